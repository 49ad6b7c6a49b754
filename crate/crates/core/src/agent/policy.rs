use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ilp::EpisodeRecord;

/// Number of hashed feature buckets.
pub const FEATURE_BUCKETS: usize = 1 << 16;

/// Largest per-step regression error applied in one update.
pub const MAX_ADVANTAGE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub decay: f64,
    pub min: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule { start: 1.0, decay: 0.95, min: 0.05 }
    }
}

impl EpsilonSchedule {
    /// `max(min, start * decay^episodes)`
    pub fn epsilon(&self, episodes: usize) -> f64 {
        (self.start * self.decay.powi(episodes.min(i32::MAX as usize) as i32)).max(self.min)
    }
}

/// Lowercased word tokens of an observation. Inventory words get an `inv_`
/// prefix so that holding an apple differs from seeing one.
pub fn observation_tokens(text: &str, inventory: &str) -> Vec<String> {
    let mut out: Vec<String> = words(text).chain(words(inventory).map(|w| format!("inv_{w}"))).collect();
    out.sort();
    out.dedup();
    out
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
        .map(|w| w.trim_matches('-').to_ascii_lowercase())
        .filter(|w| !w.is_empty())
}

fn fnv1a(parts: &[&str]) -> usize {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        for b in p.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    (h % FEATURE_BUCKETS as u64) as usize
}

/// Linear scorer over hashed (observation token, action token) pairs, plus
/// one bias feature per action token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationPolicy {
    weights: Vec<f64>,
    pub learning_rate: f64,
    pub discount: f64,
    pub schedule: EpsilonSchedule,
}

impl Default for ExplorationPolicy {
    fn default() -> Self {
        ExplorationPolicy {
            weights: vec![0.0; FEATURE_BUCKETS],
            learning_rate: 0.1,
            discount: 0.9,
            schedule: EpsilonSchedule::default(),
        }
    }
}

impl ExplorationPolicy {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn features(obs_tokens: &[String], action: &str) -> Vec<usize> {
        let act: Vec<String> = words(action).collect();
        let mut out = Vec::with_capacity(act.len() * (obs_tokens.len() + 1));
        for a in &act {
            out.push(fnv1a(&["", a]));
            for o in obs_tokens {
                out.push(fnv1a(&[o, a]));
            }
        }
        out
    }

    pub fn score(&self, obs_tokens: &[String], action: &str) -> f64 {
        Self::features(obs_tokens, action).into_iter().map(|i| self.weights[i]).sum()
    }

    /// Greedy choice with probability `1 - epsilon` (ties go to the smallest
    /// action string), otherwise uniform over `admissible`.
    pub fn choose<R: Rng>(&self, obs_tokens: &[String], admissible: &[String], epsilon: f64, rng: &mut R) -> String {
        assert!(!admissible.is_empty(), "no admissible action to choose from");
        if epsilon > 0.0 && rng.gen_bool(epsilon.min(1.0)) {
            return admissible.choose(rng).expect("non-empty").clone();
        }
        let mut best: Option<(f64, &String)> = None;
        for a in admissible {
            let s = self.score(obs_tokens, a);
            let better = match best {
                None => true,
                Some((bs, ba)) => s > bs || (s == bs && a < ba),
            };
            if better {
                best = Some((s, a));
            }
        }
        best.expect("non-empty").1.clone()
    }

    /// Monte Carlo regression: each step's score moves toward its discounted
    /// return by `learning_rate` times the clipped error.
    pub fn update(&mut self, trajectory: &EpisodeRecord) {
        let mut ret = 0.0;
        let mut returns = vec![0.0; trajectory.steps.len()];
        for (i, s) in trajectory.steps.iter().enumerate().rev() {
            ret = s.record.reward + self.discount * ret;
            returns[i] = ret;
        }
        for (s, g) in trajectory.steps.iter().zip(returns) {
            let (text, inventory) = s.observation.rsplit_once('\n').unwrap_or((&s.observation, ""));
            self.update_step(&observation_tokens(text, inventory), &s.record.action_text, g);
        }
    }

    pub fn update_step(&mut self, obs_tokens: &[String], action: &str, target: f64) {
        let feats = Self::features(obs_tokens, action);
        if feats.is_empty() {
            return;
        }
        let error = (target - self.score(obs_tokens, action)).clamp(-MAX_ADVANTAGE, MAX_ADVANTAGE);
        if error == 0.0 {
            return;
        }
        let step = self.learning_rate * error / feats.len() as f64;
        for i in feats {
            self.weights[i] += step;
        }
    }
}
