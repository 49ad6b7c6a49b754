use super::{GameState, Location, ReceptacleKind};

/// Multi-word lemmas are written with hyphens so that every entity name ends
/// in a single-token noun.
pub fn display_lemma(lemma: &str) -> String {
    lemma.replace('_', "-")
}

pub fn parse_lemma(word: &str) -> String {
    word.replace('-', "_")
}

pub(super) fn article(phrase: &str) -> &'static str {
    match phrase.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

pub(super) fn with_article(phrase: &str) -> String {
    format!("{} {phrase}", article(phrase))
}

/// `a, b and c`
pub(super) fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn title(name: &str) -> String {
    name.split('_')
        .map(|w| {
            let mut c = w.chars();
            c.next().map(|f| f.to_ascii_uppercase().to_string() + c.as_str()).unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub(super) fn room_text(s: &GameState) -> String {
    let room = &s.rooms[s.agent_room];
    let mut lines = vec![format!("-= {} =-", title(&room.name)), format!("You are in the {}.", room.name.replace('_', " "))];

    let here: Vec<usize> = (0..s.receptacles.len()).filter(|&i| s.receptacles[i].room == s.agent_room).collect();
    if !here.is_empty() {
        let items: Vec<String> = here
            .iter()
            .map(|&i| {
                let r = &s.receptacles[i];
                let name = display_lemma(&r.lemma);
                match (r.kind, r.open) {
                    (ReceptacleKind::Supporter, _) => with_article(&name),
                    (ReceptacleKind::Container, true) => with_article(&format!("open {name}")),
                    (ReceptacleKind::Container, false) => with_article(&format!("closed {name}")),
                }
            })
            .collect();
        lines.push(format!("You see {}.", join_list(&items)));
    }
    for &i in &here {
        let r = &s.receptacles[i];
        let (loc, prep) = match r.kind {
            ReceptacleKind::Supporter => (Location::On(i), "On"),
            ReceptacleKind::Container if r.open => (Location::In(i), "In"),
            ReceptacleKind::Container => continue,
        };
        let items: Vec<String> =
            s.objects.iter().filter(|o| o.location == loc).map(|o| with_article(&o.display_name())).collect();
        if !items.is_empty() {
            lines.push(format!("{prep} the {} you see {}.", display_lemma(&r.lemma), join_list(&items)));
        }
    }
    let floor: Vec<String> = s
        .objects
        .iter()
        .filter(|o| o.location == Location::Floor(s.agent_room))
        .map(|o| with_article(&o.display_name()))
        .collect();
    if !floor.is_empty() {
        lines.push(format!("On the floor you see {}.", join_list(&floor)));
    }
    let exits: Vec<&str> = room.exits.keys().map(String::as_str).collect();
    if exits.is_empty() {
        lines.push("There is no exit.".to_string());
    } else {
        lines.push(format!("Exits: {}.", exits.join(", ")));
    }
    lines.join("\n")
}

pub(super) fn inventory_text(s: &GameState) -> String {
    let held: Vec<String> = s
        .objects
        .iter()
        .filter(|o| o.location == Location::Inventory)
        .map(|o| with_article(&o.display_name()))
        .collect();
    if held.is_empty() {
        "You are carrying nothing.".to_string()
    } else {
        format!("You are carrying: {}.", join_list(&held))
    }
}
