//! A seeded synthetic comment corpus with the label structure of the shared
//! task data: three overlapping classes at roughly 35% / 27% / 34%, with
//! engaging and fact-claiming comments strongly correlated.
//!
//! Cue words make the classes learnable from character n-grams, but cues are
//! dropped from some positives and sprinkled into some negatives so single
//! models stay noisy.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Comment, Dataset, Provenance};
use crate::{seed, LabelSet};

const NEUTRAL: &[&str] = &[
    "die", "der", "das", "und", "ist", "nicht", "auch", "wir", "ich", "sie", "heute", "sendung",
    "gestern", "politik", "meinung", "frage", "thema", "leute", "immer", "wieder", "doch",
    "schon", "noch", "mal", "einfach", "wirklich", "gast", "runde", "abend", "zuschauer",
    "deutschland", "land", "regierung", "partei", "zeit", "jahr", "woche", "moderator", "talk",
    "diskussion", "wenn", "aber", "oder", "weil", "dann", "hier", "dort", "gut", "viel",
];

const TOXIC: &[&str] = &[
    "dumm", "dummdreist", "idiot", "idioten", "lächerlich", "peinlich", "verlogen", "lügner",
    "schwachsinn", "heuchler", "unerträglich", "widerlich", "witzfigur", "versager", "frech",
];

const ENGAGING: &[&str] = &[
    "respekt", "verstehe", "argument", "argumente", "zustimmen", "sachlich", "danke", "fair",
    "perspektive", "überlegen", "vorschlag", "gemeinsam", "einverstanden", "nachdenken",
];

const FACT: &[&str] = &[
    "prozent", "studie", "statistik", "zahlen", "laut", "quelle", "millionen", "milliarden",
    "bericht", "gesetz", "paragraph", "euro", "daten", "belegt", "nachweislich",
];

const EMOJIS: &[&str] = &["😀", "😡", "👍", "🤔", "☕", "🙄", "👏", "😂"];

#[derive(Clone, Debug)]
pub struct SyntheticConfig {
    pub size: usize,
    /// Extra rows that repeat an earlier comment verbatim.
    pub duplicates: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            size: 1000,
            duplicates: 0,
            seed: 2021,
        }
    }
}

fn sample_labels(rng: &mut ChaCha8Rng) -> LabelSet {
    let deliberative = rng.gen_bool(0.38);
    let (p_eng, p_fact) = if deliberative { (0.6, 0.65) } else { (0.07, 0.15) };
    LabelSet::new(rng.gen_bool(0.35), rng.gen_bool(p_eng), rng.gen_bool(p_fact))
}

fn letter_spaced(word: &str) -> String {
    word.to_uppercase()
        .chars()
        .map(String::from)
        .collect::<Vec<_>>()
        .join(" ")
}

fn sample_text(rng: &mut ChaCha8Rng, labels: LabelSet) -> String {
    let len = rng.gen_range(6..30);
    let mut words: Vec<String> = (0..len)
        .map(|_| NEUTRAL.choose(rng).unwrap().to_string())
        .collect();

    for (cues, positive) in [(TOXIC, labels.0[0]), (ENGAGING, labels.0[1]), (FACT, labels.0[2])] {
        let n = if positive {
            if rng.gen_bool(0.75) {
                rng.gen_range(1..4)
            } else {
                0
            }
        } else {
            usize::from(rng.gen_bool(0.12))
        };
        for _ in 0..n {
            let at = rng.gen_range(0..=words.len());
            words.insert(at, cues.choose(rng).unwrap().to_string());
        }
    }

    if rng.gen_bool(0.05) {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, letter_spaced(["aktuell", "skandal", "wahnsinn"].choose(rng).unwrap()));
    }
    let mut text = words.join(" ");
    if rng.gen_bool(0.15) {
        for _ in 0..rng.gen_range(1..4) {
            text.push_str(EMOJIS.choose(rng).unwrap());
        }
    }
    if rng.gen_bool(0.5) {
        text.push(['.', '!', '?'][rng.gen_range(0..3)]);
    }
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => text,
    }
}

pub fn generate(config: &SyntheticConfig) -> Dataset {
    let mut rng = seed::stream(config.seed, &[0x5717]);
    let mut seen = HashSet::new();
    let mut comments: Vec<Comment> = Vec::with_capacity(config.size + config.duplicates);
    while comments.len() < config.size {
        let labels = sample_labels(&mut rng);
        let text = sample_text(&mut rng, labels);
        if seen.insert(text.clone()) {
            comments.push(Comment {
                id: 0,
                source_id: None,
                text,
                labels: Some(labels),
            });
        }
    }
    for _ in 0..config.duplicates {
        let from = rng.gen_range(0..config.size);
        let at = rng.gen_range(from + 1..=comments.len());
        let copy = comments[from].clone();
        comments.insert(at, copy);
    }
    for (i, c) in comments.iter_mut().enumerate() {
        c.id = i as u64;
        c.source_id = Some(format!("s{i}"));
    }
    Dataset {
        comments,
        provenance: Provenance {
            source: None,
            steps: vec![format!(
                "synthetic(size={}, duplicates={}, seed={})",
                config.size, config.duplicates, config.seed
            )],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::deduplicate;

    #[test]
    fn class_frequencies_are_plausible() {
        let d = generate(&SyntheticConfig::default());
        assert_eq!(d.len(), 1000);
        let rate = |k: usize| {
            d.comments.iter().filter(|c| c.labels.unwrap().0[k]).count() as f64 / 1000.0
        };
        assert!((rate(0) - 0.35).abs() < 0.05, "toxic {}", rate(0));
        assert!((rate(1) - 0.27).abs() < 0.05, "engaging {}", rate(1));
        assert!((rate(2) - 0.34).abs() < 0.05, "fact {}", rate(2));
    }

    #[test]
    fn duplicates_are_removed_by_dedup() {
        let cfg = SyntheticConfig {
            size: 200,
            duplicates: 7,
            seed: 1,
        };
        let d = generate(&cfg);
        assert_eq!(d.len(), 207);
        assert_eq!(deduplicate(&d).len(), 200);
    }

    #[test]
    fn seeded() {
        let cfg = SyntheticConfig::default();
        assert_eq!(generate(&cfg), generate(&cfg));
    }
}
