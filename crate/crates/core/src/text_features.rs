//! Tokenization, stop-word removal and TF-IDF vectorization.
//!
//! Weighting follows the common smoothed form:
//!
//! ```text
//! idf(t)    = ln((1 + N) / (1 + df(t))) + 1
//! weight(t) = (1 + ln tf) * idf(t)     (sublinear_tf)
//!           = tf * idf(t)              (otherwise)
//! ```
//!
//! followed by optional l2 normalization. N-grams are built after stop-word
//! removal and joined with a single space.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseVector;

const DUTCH_FILE: &str = include_str!("../data/stopwords/dutch.txt");
const DUTCH_MODIFIED_FILE: &str = include_str!("../data/stopwords/dutch_modified.txt");

fn parse_word_list(content: &str) -> Vec<String> {
    content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

fn dutch_list() -> &'static [String] {
    static LIST: OnceLock<Vec<String>> = OnceLock::new();
    LIST.get_or_init(|| parse_word_list(DUTCH_FILE))
}

/// The shipped 101-word Dutch stop-word list.
pub static DUTCH_STOPWORDS: DutchStopwords = DutchStopwords;

/// Slice-like access to the shipped Dutch list.
pub struct DutchStopwords;

impl std::ops::Deref for DutchStopwords {
    type Target = [String];

    fn deref(&self) -> &[String] {
        dutch_list()
    }
}

/// A stop-word list (lowercased, deduplicated).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopWordList {
    words: BTreeSet<String>,
}

impl StopWordList {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    /// Parses one word per line; blank lines and `#` comments are skipped.
    pub fn parse(content: &str) -> Self {
        Self::new(parse_word_list(content))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&content))
    }

    /// `dutch` (101 words) or `dutch-modified` (86 words, personal pronouns kept).
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "dutch" => Ok(Self::parse(DUTCH_FILE)),
            "dutch-modified" | "dutch_modified" => Ok(Self::parse(DUTCH_MODIFIED_FILE)),
            other => Err(Error::Config(format!("unknown stop-word list `{other}`"))),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// Lowercased maximal runs of at least two letters/digits, in order.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = 0usize;
    let mut flush = |current: &mut String, chars: &mut usize| {
        if *chars >= 2 {
            out.push(std::mem::take(current));
        } else {
            current.clear();
        }
        *chars = 0;
    };
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
            chars += 1;
        } else if chars > 0 {
            flush(&mut current, &mut chars);
        }
    }
    if chars > 0 {
        flush(&mut current, &mut chars);
    }
    out
}

/// Byte ranges and lowercased forms of the tokens [`tokenize`] returns.
pub fn token_spans(text: &str) -> Vec<(std::ops::Range<usize>, String)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut chars = 0usize;
    let mut push = |start: usize, end: usize, chars: usize| {
        if chars >= 2 {
            out.push((start..end, text[start..end].to_lowercase()));
        }
    };
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
            chars += 1;
        } else if let Some(s) = start.take() {
            push(s, i, chars);
            chars = 0;
        }
    }
    if let Some(s) = start {
        push(s, text.len(), chars);
    }
    out
}

/// Order-preserving filter.
pub fn remove_stopwords(tokens: &[String], stopwords: &StopWordList) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !stopwords.contains(t))
        .cloned()
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    L2,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfConfig {
    pub sublinear_tf: bool,
    pub min_df: usize,
    pub norm: Norm,
    pub ngram_range: (usize, usize),
    pub stopwords: Option<StopWordList>,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        Self {
            sublinear_tf: true,
            min_df: 5,
            norm: Norm::L2,
            ngram_range: (1, 2),
            stopwords: None,
        }
    }
}

impl TfidfConfig {
    pub fn with_stopwords(mut self, list: StopWordList) -> Self {
        self.stopwords = Some(list);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.ngram_range;
        if lo < 1 || lo > hi {
            return Err(Error::Config(format!(
                "ngram_range ({lo}, {hi}) must satisfy 1 <= lo <= hi"
            )));
        }
        if self.min_df < 1 {
            return Err(Error::Config("min_df must be >= 1".into()));
        }
        Ok(())
    }

    /// Stop-word removal followed by n-gram generation.
    pub fn analyze(&self, tokens: &[String]) -> Vec<String> {
        let filtered;
        let tokens = match &self.stopwords {
            Some(list) => {
                filtered = remove_stopwords(tokens, list);
                &filtered[..]
            }
            None => tokens,
        };
        let (lo, hi) = self.ngram_range;
        let mut grams = Vec::new();
        for n in lo..=hi {
            if n == 1 {
                grams.extend(tokens.iter().cloned());
            } else {
                grams.extend(tokens.windows(n).map(|w| w.join(" ")));
            }
        }
        grams
    }
}

/// Fitted vocabulary and idf weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "TfidfWire", into = "TfidfWire")]
pub struct TfidfModel {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    idf: Vec<f64>,
    config: TfidfConfig,
}

#[derive(Serialize, Deserialize)]
struct TfidfWire {
    terms: Vec<String>,
    idf: Vec<f64>,
    config: TfidfConfig,
}

impl From<TfidfWire> for TfidfModel {
    fn from(w: TfidfWire) -> Self {
        let index = w.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            terms: w.terms,
            index,
            idf: w.idf,
            config: w.config,
        }
    }
}

impl From<TfidfModel> for TfidfWire {
    fn from(m: TfidfModel) -> Self {
        Self {
            terms: m.terms,
            idf: m.idf,
            config: m.config,
        }
    }
}

impl PartialEq for TfidfModel {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms && self.idf == other.idf && self.config == other.config
    }
}

impl TfidfModel {
    /// Builds the vocabulary from the fitting corpus only.
    pub fn fit(corpus: &[Vec<String>], config: &TfidfConfig) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut df: HashMap<String, usize> = HashMap::new();
        for tokens in corpus {
            let unique: BTreeSet<String> = config.analyze(tokens).into_iter().collect();
            for g in unique {
                *df.entry(g).or_default() += 1;
            }
        }
        let mut terms: Vec<(String, usize)> =
            df.into_iter().filter(|(_, c)| *c >= config.min_df).collect();
        if terms.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        let n = corpus.len() as f64;
        let idf = terms
            .iter()
            .map(|(_, d)| ((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0)
            .collect();
        let terms: Vec<String> = terms.into_iter().map(|(t, _)| t).collect();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self {
            terms,
            index,
            idf,
            config: config.clone(),
        })
    }

    pub fn fit_texts<S: AsRef<str>>(texts: &[S], config: &TfidfConfig) -> Result<Self> {
        let corpus: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t.as_ref())).collect();
        Self::fit(&corpus, config)
    }

    pub fn transform(&self, tokens: &[String]) -> SparseVector {
        let mut counts: HashMap<usize, u32> = HashMap::new();
        for g in self.config.analyze(tokens) {
            if let Some(&i) = self.index.get(&g) {
                *counts.entry(i).or_default() += 1;
            }
        }
        let pairs: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(i, tf)| {
                let tf = f64::from(tf);
                let w = if self.config.sublinear_tf { 1.0 + tf.ln() } else { tf };
                (i, w * self.idf[i])
            })
            .collect();
        let mut v = SparseVector::from_pairs(self.terms.len(), pairs)
            .expect("vocabulary indices are in range");
        if self.config.norm == Norm::L2 {
            let norm = v.norm();
            if norm > 0.0 {
                v.scale(1.0 / norm);
            }
        }
        v
    }

    pub fn transform_text(&self, text: &str) -> SparseVector {
        self.transform(&tokenize(text))
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn config(&self) -> &TfidfConfig {
        &self.config
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn spans_agree_with_tokenize() {
        let text = "Ik zag É-een  ÄB, x 12 en...dat";
        let spans: Vec<String> = token_spans(text).into_iter().map(|(_, t)| t).collect();
        assert_eq!(spans, tokenize(text));
        for (r, t) in token_spans(text) {
            assert_eq!(text[r].to_lowercase(), t);
        }
    }

    #[test]
    fn tokenize_rules() {
        assert_eq!(toks("De krant, de krant!"), vec!["de", "krant", "de", "krant"]);
        assert!(toks("").is_empty());
        assert_eq!(toks("ik u"), vec!["ik"]);
        assert!(toks("a b c").is_empty());
        assert_eq!(toks("Één café 1985!"), vec!["één", "café", "1985"]);
    }

    #[test]
    fn stopword_filter() {
        let list = StopWordList::new(["de"]);
        assert_eq!(remove_stopwords(&toks("de krant"), &list), vec!["krant"]);
        let empty = StopWordList::default();
        assert_eq!(remove_stopwords(&toks("de krant"), &empty), toks("de krant"));
    }

    #[test]
    fn shipped_lists() {
        let full = StopWordList::builtin("dutch").unwrap();
        let modified = StopWordList::builtin("dutch-modified").unwrap();
        assert_eq!(full.len(), 101);
        assert_eq!(modified.len(), 86);
        assert!(full.contains("ik"));
        assert!(!modified.contains("ik"));
        for p in ["haar", "hem", "hij", "hun", "ik", "je", "me", "men", "mij", "mijn", "ons", "u", "uw", "ze", "zij"] {
            assert!(full.contains(p) && !modified.contains(p), "{p}");
        }
        assert_eq!(remove_stopwords(&toks("ik de krant"), &modified), vec!["ik", "krant"]);
        assert_eq!(DUTCH_STOPWORDS.len(), 101);
    }

    #[test]
    fn idf_formula_values() {
        let corpus = vec![toks("aa bb"), toks("aa cc"), toks("dd"), toks("ee")];
        let cfg = TfidfConfig { min_df: 1, ngram_range: (1, 1), ..Default::default() };
        let m = TfidfModel::fit(&corpus, &cfg).unwrap();
        let aa = m.term_index("aa").unwrap();
        assert!((m.idf()[aa] - ((5.0f64 / 3.0).ln() + 1.0)).abs() < 1e-12);
        assert!((m.idf()[aa] - 1.5108).abs() < 1e-4);

        let all = vec![toks("zz"), toks("zz"), toks("zz")];
        let m = TfidfModel::fit(&all, &cfg).unwrap();
        assert_eq!(m.idf()[0], 1.0);
    }

    #[test]
    fn min_df_prunes_everything_on_tiny_corpus() {
        let corpus = vec![toks("aa"), toks("aa"), toks("aa"), toks("aa")];
        let err = TfidfModel::fit(&corpus, &TfidfConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyVocabulary));
        assert_eq!(err.to_string(), "empty vocabulary");
    }

    #[test]
    fn sublinear_and_norm() {
        let corpus = vec![toks("aa bb"), toks("cc dd")];
        let cfg = TfidfConfig { min_df: 1, ngram_range: (1, 1), ..Default::default() };
        let m = TfidfModel::fit(&corpus, &cfg).unwrap();
        let v = m.transform(&toks("aa bb"));
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(v.nnz(), 2);
        for &x in v.values() {
            assert!((x - h).abs() < 1e-15);
        }
        let oov = m.transform(&toks("xx yy"));
        assert_eq!(oov.nnz(), 0);
    }

    #[test]
    fn bigrams_form_after_stopword_removal() {
        let cfg = TfidfConfig {
            min_df: 1,
            stopwords: Some(StopWordList::new(["de"])),
            ..Default::default()
        };
        assert_eq!(cfg.analyze(&toks("grote de krant")), vec!["grote", "krant", "grote krant"]);
    }

    #[test]
    fn invalid_config() {
        let cfg = TfidfConfig { ngram_range: (2, 1), ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = TfidfConfig { min_df: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn serde_round_trip_rebuilds_index() {
        let corpus = vec![toks("aa bb"), toks("aa cc")];
        let cfg = TfidfConfig { min_df: 1, ..Default::default() };
        let m = TfidfModel::fit(&corpus, &cfg).unwrap();
        let back: TfidfModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(m, back);
        assert_eq!(back.term_index("aa bb"), m.term_index("aa bb"));
    }
}
