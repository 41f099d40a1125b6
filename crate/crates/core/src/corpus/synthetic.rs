//! Synthetic newspaper-like corpora with known ground truth.
//!
//! Each class gets a writing-style profile (sentence counts, pronoun use,
//! quotes, punctuation), a set of indicative tokens, and an associated topic.
//! A document's topic is its class topic with probability `confound_strength`
//! and a uniformly random topic otherwise, so topic words only carry class
//! signal when the confound is switched on.

use serde::{Deserialize, Serialize};

use super::{Dataset, Document};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::text_features::DUTCH_STOPWORDS;

/// The eight genres, alphabetical.
pub const GENRES: [&str; 8] = [
    "Background",
    "Column",
    "Feature",
    "Interview",
    "News",
    "Op-ed",
    "Report",
    "Review",
];

const INDICATIVE: [[&str; 3]; 8] = [
    ["ontwikkeling", "analyse", "oorzaak"],
    ["columnist", "eigenlijk", "trouwens"],
    ["sfeer", "zaal", "uur"],
    ["vraag", "antwoord", "gesprek"],
    ["gisteren", "meldde", "bericht"],
    ["standpunt", "betoog", "principe"],
    ["verslag", "ronde", "uitslag"],
    ["voorstelling", "regie", "recensent"],
];

const TOPICS: [[&str; 4]; 8] = [
    ["schaak", "remise", "zetten", "toernooi"],
    ["voetbal", "doelpunt", "elftal", "trainer"],
    ["rechter", "rechtbank", "verdachte", "vonnis"],
    ["toneel", "museum", "schilderij", "orkest"],
    ["kabinet", "minister", "partijleider", "kamerlid"],
    ["gulden", "bedrijf", "winst", "beurs"],
    ["onderzoek", "professor", "laboratorium", "proef"],
    ["regen", "storm", "temperatuur", "zonneschijn"],
];

const FIRST_PERSON: [&str; 6] = ["ik", "mij", "mijn", "wij", "we", "ons"];
const SECOND_PERSON: [&str; 4] = ["je", "jij", "jullie", "uw"];
const THIRD_PERSON: [&str; 5] = ["hij", "zij", "hem", "haar", "hun"];
const MODALS: [&str; 6] = ["moet", "kan", "zal", "wil", "mag", "zou"];
const ADJECTIVES: [&str; 8] = [
    "prachtig", "vreselijk", "lastig", "heerlijk", "typisch", "eenzaam", "hopeloos", "wonderlijk",
];
const INTENSIFIERS: [&str; 4] = ["zeer", "heel", "erg", "enorm"];
const NEWSPAPERS: [&str; 9] = [
    "Gereformeerd Gezinsblad",
    "Nederlands Dagblad",
    "Algemeen Handelsblad",
    "NRC",
    "Parool",
    "Telegraaf",
    "Volkskrant",
    "Vrije Volk",
    "Waarheid",
];
const BALANCED_YEARS: [i32; 5] = [1955, 1965, 1975, 1985, 1995];

/// Share of each genre's documents dated 1985 in skewed corpora (the rest is
/// 1965). News and Op-ed shrink over time, the other genres grow.
const SHARE_1985: [f64; 8] = [0.62, 0.6, 0.66, 0.6, 0.36, 0.38, 0.64, 0.6];

#[derive(Clone, Copy, Debug)]
struct Style {
    sentences: (usize, usize),
    words: (usize, usize),
    first: f64,
    second: f64,
    third: f64,
    modal: f64,
    adjective: f64,
    intensifier: f64,
    question: f64,
    exclaim: f64,
    quote: f64,
    digit: f64,
}

const STYLES: [Style; 8] = [
    // Background: long, impersonal, analytical
    Style { sentences: (12, 18), words: (12, 20), first: 0.01, second: 0.0, third: 0.05, modal: 0.04, adjective: 0.04, intensifier: 0.01, question: 0.02, exclaim: 0.0, quote: 0.05, digit: 0.04 },
    // Column: personal, opinionated, exclamations
    Style { sentences: (7, 11), words: (8, 14), first: 0.12, second: 0.05, third: 0.02, modal: 0.05, adjective: 0.08, intensifier: 0.06, question: 0.15, exclaim: 0.15, quote: 0.02, digit: 0.0 },
    // Feature: long, descriptive, adjectives and intensifiers
    Style { sentences: (10, 16), words: (10, 16), first: 0.04, second: 0.01, third: 0.07, modal: 0.02, adjective: 0.14, intensifier: 0.07, question: 0.04, exclaim: 0.04, quote: 0.12, digit: 0.01 },
    // Interview: quotes, first and second person, questions
    Style { sentences: (9, 14), words: (8, 14), first: 0.1, second: 0.08, third: 0.03, modal: 0.03, adjective: 0.03, intensifier: 0.03, question: 0.3, exclaim: 0.02, quote: 0.45, digit: 0.01 },
    // News: short, factual, numbers
    Style { sentences: (3, 6), words: (10, 15), first: 0.0, second: 0.0, third: 0.05, modal: 0.01, adjective: 0.01, intensifier: 0.0, question: 0.0, exclaim: 0.0, quote: 0.1, digit: 0.08 },
    // Op-ed: modal verbs, argumentative
    Style { sentences: (8, 12), words: (12, 18), first: 0.06, second: 0.02, third: 0.02, modal: 0.12, adjective: 0.05, intensifier: 0.04, question: 0.12, exclaim: 0.05, quote: 0.02, digit: 0.01 },
    // Report: chronological, third person, numbers
    Style { sentences: (6, 10), words: (10, 16), first: 0.0, second: 0.0, third: 0.09, modal: 0.01, adjective: 0.02, intensifier: 0.01, question: 0.0, exclaim: 0.01, quote: 0.06, digit: 0.07 },
    // Review: evaluative adjectives, moderate length
    Style { sentences: (7, 11), words: (10, 15), first: 0.03, second: 0.01, third: 0.04, modal: 0.03, adjective: 0.12, intensifier: 0.05, question: 0.03, exclaim: 0.03, quote: 0.03, digit: 0.02 },
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticShape {
    Balanced { n_per_class: usize, n_classes: usize },
    Skewed { counts: Vec<usize> },
}

impl SyntheticShape {
    /// 8 genres × 60 documents.
    pub fn balanced_gold() -> Self {
        SyntheticShape::Balanced {
            n_per_class: 60,
            n_classes: 8,
        }
    }

    /// 1424 documents with a realistic genre imbalance.
    pub fn gold_like() -> Self {
        SyntheticShape::Skewed {
            counts: vec![200, 70, 54, 100, 400, 150, 300, 150],
        }
    }

    /// 884 documents, same imbalance as `gold_like`; meant to be unlabeled.
    pub fn unlabeled_like() -> Self {
        SyntheticShape::Skewed {
            counts: vec![124, 44, 34, 62, 248, 93, 186, 93],
        }
    }

    fn counts(&self) -> Vec<usize> {
        match self {
            SyntheticShape::Balanced {
                n_per_class,
                n_classes,
            } => vec![*n_per_class; *n_classes],
            SyntheticShape::Skewed { counts } => counts.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub shape: SyntheticShape,
    pub confound_strength: f64,
    pub seed: u64,
}

fn class_label(c: usize) -> String {
    GENRES
        .get(c)
        .map(|g| g.to_string())
        .unwrap_or_else(|| format!("Class{:02}", c + 1))
}

/// Indicative tokens injected into documents of class index `c`.
pub fn indicative_tokens(c: usize) -> Vec<String> {
    match INDICATIVE.get(c) {
        Some(words) => words.iter().map(|w| w.to_string()).collect(),
        None => ["a", "b", "c"]
            .iter()
            .map(|s| format!("kenmerk{}{s}", c + 1))
            .collect(),
    }
}

/// Words of topic index `t`.
pub fn topic_tokens(t: usize) -> Vec<String> {
    match TOPICS.get(t) {
        Some(words) => words.iter().map(|w| w.to_string()).collect(),
        None => ["a", "b", "c", "d"]
            .iter()
            .map(|s| format!("onderwerp{}{s}", t + 1))
            .collect(),
    }
}

/// Fixed filler vocabulary built from syllables; independent of the seed.
fn filler_vocabulary() -> Vec<String> {
    const ONSETS: [&str; 12] = ["b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v"];
    const NUCLEI: [&str; 6] = ["a", "e", "i", "o", "oe", "aa"];
    const CODAS: [&str; 5] = ["n", "l", "st", "rk", "m"];
    let mut out = Vec::new();
    for o in ONSETS {
        for n in NUCLEI {
            for c in CODAS {
                out.push(format!("{o}{n}{c}{}", if out.len() % 3 == 0 { "en" } else { "" }));
            }
        }
    }
    out
}

struct Zipf {
    cumulative: Vec<f64>,
}

impl Zipf {
    fn new(n: usize) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..n)
            .map(|r| {
                acc += 1.0 / (r as f64 + 2.0);
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn sample(&self, rng: &mut Rng) -> usize {
        let u = rng.unit_f64() * self.cumulative.last().unwrap();
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

struct Generator<'a> {
    filler: &'a [String],
    zipf: &'a Zipf,
    n_topics: usize,
}

impl Generator<'_> {
    fn document(&self, class: usize, topic: usize, rng: &mut Rng) -> String {
        let style = STYLES[class % STYLES.len()];
        let indicative = indicative_tokens(class);
        let topic_words = topic_tokens(topic % self.n_topics.max(1));
        let n_sent = style.sentences.0 + rng.index(style.sentences.1 - style.sentences.0 + 1);
        let anchor = rng.index(n_sent);

        let mut sentences = Vec::with_capacity(n_sent);
        for s in 0..n_sent {
            let len = style.words.0 + rng.index(style.words.1 - style.words.0 + 1);
            let mut words: Vec<String> = Vec::with_capacity(len + 3);
            for _ in 0..len {
                let u = rng.unit_f64();
                let mut acc = 0.0;
                let mut pick = |p: f64| {
                    acc += p;
                    u < acc
                };
                let w = if pick(style.first) {
                    rng.choose(&FIRST_PERSON).to_string()
                } else if pick(style.second) {
                    rng.choose(&SECOND_PERSON).to_string()
                } else if pick(style.third) {
                    rng.choose(&THIRD_PERSON).to_string()
                } else if pick(style.modal) {
                    rng.choose(&MODALS).to_string()
                } else if pick(style.adjective) {
                    rng.choose(&ADJECTIVES).to_string()
                } else if pick(style.intensifier) {
                    rng.choose(&INTENSIFIERS).to_string()
                } else if pick(style.digit) {
                    (1 + rng.below(1999)).to_string()
                } else if pick(0.04) {
                    rng.choose(&indicative).clone()
                } else if pick(0.08) {
                    rng.choose(&topic_words).clone()
                } else if pick(0.3) {
                    rng.choose(&DUTCH_STOPWORDS).to_string()
                } else {
                    self.filler[self.zipf.sample(rng)].clone()
                };
                words.push(w);
            }
            if s == anchor {
                let pos = rng.index(words.len() + 1);
                words.insert(pos, indicative[0].clone());
            }
            words[0] = capitalize(&words[0]);
            let end = if rng.bernoulli(style.question) {
                "?"
            } else if rng.bernoulli(style.exclaim) {
                "!"
            } else {
                "."
            };
            let mut sentence = words.join(" ");
            if rng.bernoulli(style.quote) {
                sentence = format!("\"{sentence}{end}\" zei {}.", rng.choose(&THIRD_PERSON));
            } else {
                sentence.push_str(end);
            }
            sentences.push(sentence);
        }
        sentences.join(" ")
    }
}

/// Generates a deterministic corpus of the requested shape.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let counts = spec.shape.counts();
    if counts.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::InvalidInput(
            "synthetic shapes need at least 2 documents per class".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.confound_strength) {
        return Err(Error::InvalidInput(format!(
            "confound_strength {} outside [0, 1]",
            spec.confound_strength
        )));
    }
    let balanced = matches!(spec.shape, SyntheticShape::Balanced { .. });
    let n_classes = counts.len();
    let filler = filler_vocabulary();
    let zipf = Zipf::new(filler.len());
    let generator = Generator {
        filler: &filler,
        zipf: &zipf,
        n_topics: n_classes,
    };
    let mut rng = Rng::new(spec.seed);

    let mut docs = Vec::with_capacity(counts.iter().sum());
    let prefix: String = spec
        .name
        .chars()
        .filter(|c| c.is_alphanumeric())
        .collect::<String>()
        .to_lowercase();
    let mut serial = 0usize;
    for (class, &count) in counts.iter().enumerate() {
        let label = class_label(class);
        for k in 0..count {
            let topic = if rng.bernoulli(spec.confound_strength) {
                class
            } else {
                rng.index(n_classes)
            };
            let text = generator.document(class, topic, &mut rng);
            let (year, source) = if balanced {
                (
                    BALANCED_YEARS[k % BALANCED_YEARS.len()],
                    rng.choose(&NEWSPAPERS).to_string(),
                )
            } else {
                let share = SHARE_1985.get(class).copied().unwrap_or(0.5);
                (if rng.bernoulli(share) { 1985 } else { 1965 }, "NRC".to_string())
            };
            serial += 1;
            docs.push(
                Document::new(format!("{prefix}-{serial:05}"), text)
                    .with_label(label.clone())
                    .with_year(year)
                    .with_source(source),
            );
        }
    }
    rng.shuffle(&mut docs);
    Dataset::new(spec.name.clone(), docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_features::tokenize;
    use std::collections::BTreeMap;

    fn spec(shape: SyntheticShape, confound: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            name: "BGS".into(),
            shape,
            confound_strength: confound,
            seed,
        }
    }

    #[test]
    fn balanced_shape_counts() {
        let ds = generate_synthetic(&spec(SyntheticShape::balanced_gold(), 0.5, 3)).unwrap();
        assert_eq!(ds.len(), 480);
        assert_eq!(ds.label_set().len(), 8);
        let mut per: BTreeMap<&str, usize> = BTreeMap::new();
        for d in ds.documents() {
            *per.entry(d.gold_label.as_deref().unwrap()).or_default() += 1;
        }
        assert!(per.values().all(|&n| n == 60));
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate_synthetic(&spec(SyntheticShape::balanced_gold(), 0.3, 9)).unwrap();
        let b = generate_synthetic(&spec(SyntheticShape::balanced_gold(), 0.3, 9)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&spec(SyntheticShape::balanced_gold(), 0.3, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn every_document_carries_its_anchor_token() {
        let ds = generate_synthetic(&spec(SyntheticShape::balanced_gold(), 0.0, 1)).unwrap();
        for d in ds.documents() {
            let c = GENRES.iter().position(|g| Some(*g) == d.gold_label.as_deref()).unwrap();
            let anchor = &indicative_tokens(c)[0];
            assert!(tokenize(&d.text).contains(anchor), "{} lacks {anchor}", d.id);
        }
    }

    #[test]
    fn skewed_shapes_have_expected_sizes() {
        let gs = generate_synthetic(&spec(SyntheticShape::gold_like(), 0.5, 2)).unwrap();
        assert_eq!(gs.len(), 1424);
        assert!(gs.documents().iter().all(|d| matches!(d.year, Some(1965) | Some(1985))));
        let ud = generate_synthetic(&spec(SyntheticShape::unlabeled_like(), 0.5, 2)).unwrap();
        assert_eq!(ud.len(), 884);
    }

    #[test]
    fn tiny_classes_rejected() {
        let bad = spec(SyntheticShape::Balanced { n_per_class: 1, n_classes: 3 }, 0.0, 1);
        assert!(generate_synthetic(&bad).is_err());
    }

    #[test]
    fn many_classes_get_generated_tokens() {
        let ds = generate_synthetic(&spec(SyntheticShape::Balanced { n_per_class: 3, n_classes: 10 }, 0.0, 1)).unwrap();
        assert_eq!(ds.label_set().len(), 10);
        assert!(ds.label_set().contains(&"Class10".to_string()));
    }
}
