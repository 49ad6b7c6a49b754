use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nesy_tbg::env::{Difficulty, Split};
use nesy_tbg::harness::{
    mean_sd, run_bench, run_seeds, save_rules, ExperimentConfig, MetricsReport, ReportFormat, Variant, World,
    DEFAULT_EPISODES, TEST_GAMES,
};

#[derive(Parser)]
#[command(name = "nesy-tbg", version, about = "Rule-learning agents for object placement text games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train agents on IN games and save their rules.
    Train(Common),
    /// Train, then evaluate on held-out games and report.
    Eval(Common),
    /// Evaluate several variants and difficulties into one table.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// Comma-separated variants, or `all`.
    #[arg(long, default_value = "explorer_ig3")]
    variant: String,
    /// Comma-separated difficulties: easy, medium, hard.
    #[arg(long, default_value = "medium")]
    difficulty: String,
    /// Comma-separated evaluation splits: in, out.
    #[arg(long, default_value = "in,out")]
    split: String,
    #[arg(long, default_value_t = DEFAULT_EPISODES)]
    episodes: usize,
    #[arg(long, default_value_t = 50)]
    max_steps: usize,
    /// Comma-separated seeds; `a-b` expands to an inclusive range.
    #[arg(long, default_value = "0-4")]
    seeds: String,
    #[arg(long, default_value_t = TEST_GAMES)]
    test_games: usize,
    /// Taxonomy TSV (`child<TAB>parent`) replacing the bundled one.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Catalog TOML replacing the bundled one.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Where `train` writes learned rules (one file per seed if several).
    #[arg(long)]
    rules_out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    report: ReportFormat,
    /// Output file for the report; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluation transcripts as JSON lines (`eval` only).
    #[arg(long)]
    transcript: Option<PathBuf>,
}

fn list<T: std::str::FromStr<Err = String>>(s: &str, what: &str) -> Result<Vec<T>> {
    let out: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(anyhow::Error::msg))
        .collect::<Result<_>>()
        .with_context(|| format!("--{what}"))?;
    if out.is_empty() {
        bail!("--{what} is empty");
    }
    Ok(out)
}

fn seeds(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.parse().context("--seeds")?, b.parse().context("--seeds")?);
                if a > b {
                    bail!("--seeds: empty range `{part}`");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().with_context(|| format!("--seeds: `{part}`"))?),
        }
    }
    if out.is_empty() {
        bail!("--seeds is empty");
    }
    Ok(out)
}

impl Common {
    fn variants(&self) -> Result<Vec<Variant>> {
        if self.variant == "all" {
            return Ok(Variant::ALL.to_vec());
        }
        list(&self.variant, "variant")
    }

    fn base(&self, variant: Variant, difficulty: Difficulty) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            variant,
            difficulty,
            splits: list::<Split>(&self.split, "split")?,
            episodes: self.episodes,
            max_steps: self.max_steps,
            seeds: seeds(&self.seeds)?,
            test_games: self.test_games,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn single(&self) -> Result<(Variant, Difficulty)> {
        let (v, d) = (self.variants()?, list::<Difficulty>(&self.difficulty, "difficulty")?);
        if v.len() != 1 || d.len() != 1 {
            bail!("this command takes exactly one --variant and one --difficulty (use `bench` for several)");
        }
        Ok((v[0], d[0]))
    }

    fn world(&self) -> Result<World> {
        Ok(World::load(self.taxonomy.as_deref(), self.catalog.as_deref())?)
    }

    fn emit(&self, report: &MetricsReport) -> Result<()> {
        let text = report.render(self.report)?;
        match &self.out {
            Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn per_seed_path(base: &Path, seed: u64, several: bool) -> PathBuf {
    if !several {
        return base.to_path_buf();
    }
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}-seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}-seed{seed}"),
    };
    base.with_file_name(name)
}

fn train(c: &Common) -> Result<()> {
    let (variant, difficulty) = c.single()?;
    let world = c.world()?;
    let cfg = c.base(variant, difficulty)?;
    let runs = run_seeds(&cfg, &world)?;
    for run in &runs {
        let o = &run.outcome;
        let tail = &o.train_scores[o.train_scores.len().saturating_sub(20)..];
        eprintln!(
            "seed {}: {} rules, {} exceptions, last-{} training score {:.3}",
            o.seed,
            o.rule_count,
            o.exception_count,
            tail.len(),
            mean_sd(tail).0
        );
        if let Some(base) = &c.rules_out {
            let path = per_seed_path(base, o.seed, runs.len() > 1);
            save_rules(run.agent.rules(), &path)?;
            eprintln!("  rules written to {}", path.display());
        }
    }
    let outcomes: Vec<_> = runs.into_iter().map(|r| r.outcome).collect();
    c.emit(&MetricsReport::from_outcomes(&cfg, &outcomes))
}

fn eval(c: &Common) -> Result<()> {
    let (variant, difficulty) = c.single()?;
    let world = c.world()?;
    let cfg = c.base(variant, difficulty)?;
    let runs = run_seeds(&cfg, &world)?;
    if let Some(path) = &c.transcript {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        for run in &runs {
            for (split, rec) in &run.transcripts {
                let line = serde_json::json!({ "seed": run.outcome.seed, "split": split, "record": rec });
                writeln!(w, "{line}")?;
            }
        }
        w.flush()?;
    }
    let outcomes: Vec<_> = runs.into_iter().map(|r| r.outcome).collect();
    c.emit(&MetricsReport::from_outcomes(&cfg, &outcomes))
}

fn bench(c: &Common) -> Result<()> {
    let variants = c.variants()?;
    let difficulties = list::<Difficulty>(&c.difficulty, "difficulty")?;
    let world = c.world()?;
    let base = c.base(variants[0], difficulties[0])?;
    c.emit(&run_bench(&variants, &difficulties, &base, &world)?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train(c) => train(c),
        Command::Eval(c) => eval(c),
        Command::Bench(c) => bench(c),
    }
}
