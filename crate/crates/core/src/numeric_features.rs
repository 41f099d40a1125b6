//! Curated linguistic features and robust scaling.
//!
//! A [`FeatureSpec`] is an ordered list of named extractors (regex counts,
//! lexicon counts, sentence/token counts, ratios of earlier features, and
//! signed-lexicon averages). Lexicon matching runs on lowercased runs of
//! letters/digits of any length, so one-letter pronouns such as "u" count.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_SPEC: &str = include_str!("../data/features/default.json");

fn builtin_lexicon(name: &str) -> Option<&'static str> {
    Some(match name {
        "first_person_singular" => include_str!("../data/lexicons/first_person_singular.txt"),
        "first_person_plural" => include_str!("../data/lexicons/first_person_plural.txt"),
        "second_person" => include_str!("../data/lexicons/second_person.txt"),
        "third_person" => include_str!("../data/lexicons/third_person.txt"),
        "pronouns" => include_str!("../data/lexicons/pronouns.txt"),
        "modal_verbs" => include_str!("../data/lexicons/modal_verbs.txt"),
        "adjectives" => include_str!("../data/lexicons/adjectives.txt"),
        "intensifiers" => include_str!("../data/lexicons/intensifiers.txt"),
        "temporal_deixis" => include_str!("../data/lexicons/temporal_deixis.txt"),
        "reporting_verbs" => include_str!("../data/lexicons/reporting_verbs.txt"),
        "negations" => include_str!("../data/lexicons/negations.txt"),
        "conjunctions" => include_str!("../data/lexicons/conjunctions.txt"),
        "articles" => include_str!("../data/lexicons/articles.txt"),
        "prepositions" => include_str!("../data/lexicons/prepositions.txt"),
        "opinion_markers" => include_str!("../data/lexicons/opinion_markers.txt"),
        "evaluative" => include_str!("../data/lexicons/evaluative.txt"),
        "subjectivity" => include_str!("../data/lexicons/subjectivity.tsv"),
        "polarity" => include_str!("../data/lexicons/polarity.tsv"),
        _ => return None,
    })
}

/// Lowercased runs of letters/digits (no minimum length).
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

const CLOSING_QUOTES: &[char] = &['"', '”', '’', '\''];
const OPENING_QUOTES: &[char] = &['"', '“', '„', '‘', '\''];

/// Sentences end at a run of `.`, `!` or `?` followed by whitespace and an
/// uppercase letter (optionally behind an opening quote), or by the end of
/// the text. Trailing text after the last boundary counts as one more
/// sentence when it contains a letter or digit.
pub fn count_sentences(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let is_term = |c: char| matches!(c, '.' | '!' | '?');
    let mut count = 0;
    let mut last_boundary = 0;
    let mut i = 0;
    while i < chars.len() {
        if !is_term(chars[i]) {
            i += 1;
            continue;
        }
        while i < chars.len() && is_term(chars[i]) {
            i += 1;
        }
        let mut j = i;
        while j < chars.len() && CLOSING_QUOTES.contains(&chars[j]) {
            j += 1;
        }
        let rest_blank = chars[j..].iter().all(|c| c.is_whitespace());
        let boundary = if rest_blank {
            true
        } else if j < chars.len() && chars[j].is_whitespace() {
            let mut k = j;
            while k < chars.len() && chars[k].is_whitespace() {
                k += 1;
            }
            while k < chars.len() && OPENING_QUOTES.contains(&chars[k]) {
                k += 1;
            }
            k < chars.len() && chars[k].is_uppercase()
        } else {
            false
        };
        if boundary {
            count += 1;
            last_boundary = j;
        }
    }
    if chars[last_boundary.min(chars.len())..]
        .iter()
        .any(|c| c.is_alphanumeric())
    {
        count += 1;
    }
    count
}

/// Where a lexicon comes from: `builtin:<name>`, a file path, or inline entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LexiconSource {
    Named(String),
    Words { words: Vec<String> },
    Scores { scores: BTreeMap<String, f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeatureKind {
    RegexCount { pattern: String },
    LexiconCount { lexicon: LexiconSource },
    SentenceCount,
    TokenCount,
    Ratio { numerator: String, denominator: String },
    LexiconScore { lexicon: LexiconSource },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

/// Ordered list of feature definitions (JSON: `{"features": [...]}`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub features: Vec<FeatureDef>,
    /// Directory that relative lexicon paths resolve against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_dir: Option<PathBuf>,
}

impl FeatureSpec {
    /// The shipped 38-feature specification.
    pub fn default_spec() -> Self {
        Self::from_json(DEFAULT_SPEC).expect("shipped feature spec is valid")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let spec: FeatureSpec =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("feature spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_json(&content)?;
        if spec.base_dir.is_none() {
            spec.base_dir = path.parent().map(Path::to_path_buf);
        }
        Ok(spec)
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Unique names; ratio operands must be defined earlier.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if let FeatureKind::Ratio {
                numerator,
                denominator,
            } = &f.kind
            {
                for operand in [numerator, denominator] {
                    if !seen.contains(operand.as_str()) {
                        return Err(Error::Config(format!(
                            "ratio `{}` refers to `{operand}`, which is not defined before it",
                            f.name
                        )));
                    }
                }
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Config(format!("duplicate feature name `{}`", f.name)));
            }
        }
        Ok(())
    }

    /// Keeps only the named features (spec order), pulling in ratio operands
    /// is the caller's business: unknown or dangling names are errors.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let wanted: BTreeSet<&str> = names.iter().map(String::as_str).collect();
        for n in &wanted {
            if !self.features.iter().any(|f| f.name == *n) {
                return Err(Error::Config(format!("unknown feature `{n}`")));
            }
        }
        let spec = Self {
            features: self
                .features
                .iter()
                .filter(|f| wanted.contains(f.name.as_str()))
                .cloned()
                .collect(),
            base_dir: self.base_dir.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn compile(&self) -> Result<FeatureExtractor> {
        self.validate()?;
        let mut positions: HashMap<&str, usize> = HashMap::new();
        let mut extractors = Vec::with_capacity(self.features.len());
        for (i, f) in self.features.iter().enumerate() {
            let e = match &f.kind {
                FeatureKind::RegexCount { pattern } => Extractor::Regex(
                    Regex::new(pattern)
                        .map_err(|e| Error::Config(format!("feature `{}`: {e}", f.name)))?,
                ),
                FeatureKind::LexiconCount { lexicon } => {
                    Extractor::Lexicon(Lexicon::resolve(lexicon, self.base_dir.as_deref())?)
                }
                FeatureKind::SentenceCount => Extractor::Sentences,
                FeatureKind::TokenCount => Extractor::Tokens,
                FeatureKind::Ratio {
                    numerator,
                    denominator,
                } => Extractor::Ratio(positions[numerator.as_str()], positions[denominator.as_str()]),
                FeatureKind::LexiconScore { lexicon } => {
                    Extractor::Score(Lexicon::resolve(lexicon, self.base_dir.as_deref())?)
                }
            };
            positions.insert(f.name.as_str(), i);
            extractors.push(e);
        }
        Ok(FeatureExtractor {
            names: self.names(),
            extractors,
        })
    }
}

/// Word list with optional suffix entries (`-ig`) and optional scores.
#[derive(Clone, Debug, Default)]
struct Lexicon {
    words: HashMap<String, f64>,
    suffixes: Vec<String>,
}

impl Lexicon {
    fn parse(content: &str) -> Result<Self> {
        let mut lex = Lexicon::default();
        for line in content.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let word = parts.next().unwrap().trim().to_lowercase();
            let score = match parts.next() {
                Some(s) => s
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad lexicon score in line `{line}`")))?,
                None => 1.0,
            };
            if !(-1.0..=1.0).contains(&score) {
                return Err(Error::Config(format!("lexicon score outside [-1, 1]: `{line}`")));
            }
            match word.strip_prefix('-') {
                Some(suffix) if !suffix.is_empty() => lex.suffixes.push(suffix.to_string()),
                _ => {
                    lex.words.insert(word, score);
                }
            }
        }
        Ok(lex)
    }

    fn resolve(source: &LexiconSource, base: Option<&Path>) -> Result<Self> {
        match source {
            LexiconSource::Named(name) => {
                if let Some(builtin) = name.strip_prefix("builtin:") {
                    let content = builtin_lexicon(builtin)
                        .ok_or_else(|| Error::Config(format!("unknown builtin lexicon `{builtin}`")))?;
                    Self::parse(content)
                } else {
                    let path = match base {
                        Some(b) if Path::new(name).is_relative() => b.join(name),
                        _ => PathBuf::from(name),
                    };
                    let content = std::fs::read_to_string(&path)
                        .map_err(|e| Error::Config(format!("lexicon {}: {e}", path.display())))?;
                    Self::parse(&content)
                }
            }
            LexiconSource::Words { words } => Ok(Lexicon {
                words: words.iter().map(|w| (w.to_lowercase(), 1.0)).collect(),
                suffixes: Vec::new(),
            }),
            LexiconSource::Scores { scores } => Ok(Lexicon {
                words: scores.iter().map(|(w, s)| (w.to_lowercase(), *s)).collect(),
                suffixes: Vec::new(),
            }),
        }
    }

    fn lookup(&self, token: &str) -> Option<f64> {
        if let Some(&s) = self.words.get(token) {
            return Some(s);
        }
        let n = token.chars().count();
        self.suffixes
            .iter()
            .any(|s| n >= s.chars().count() + 2 && token.ends_with(s.as_str()))
            .then_some(1.0)
    }
}

#[derive(Clone, Debug)]
enum Extractor {
    Regex(Regex),
    Lexicon(Lexicon),
    Sentences,
    Tokens,
    Ratio(usize, usize),
    Score(Lexicon),
}

/// Compiled [`FeatureSpec`], ready to extract dense vectors.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    names: Vec<String>,
    extractors: Vec<Extractor>,
}

impl FeatureExtractor {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn extract(&self, text: &str) -> Vec<f64> {
        let tokens = word_tokens(text);
        let mut out: Vec<f64> = Vec::with_capacity(self.extractors.len());
        for e in &self.extractors {
            let v = match e {
                Extractor::Regex(re) => re.find_iter(text).count() as f64,
                Extractor::Lexicon(lex) => {
                    tokens.iter().filter(|t| lex.lookup(t).is_some()).count() as f64
                }
                Extractor::Sentences => count_sentences(text) as f64,
                Extractor::Tokens => tokens.len() as f64,
                Extractor::Ratio(n, d) => {
                    if out[*d] == 0.0 {
                        0.0
                    } else {
                        out[*n] / out[*d]
                    }
                }
                Extractor::Score(lex) => {
                    let scores: Vec<f64> = tokens.iter().filter_map(|t| lex.lookup(t)).collect();
                    if scores.is_empty() {
                        0.0
                    } else {
                        scores.iter().sum::<f64>() / scores.len() as f64
                    }
                }
            };
            out.push(v);
        }
        out
    }
}

/// Convenience: compile and extract in one go.
pub fn extract(text: &str, spec: &FeatureSpec) -> Result<Vec<f64>> {
    Ok(spec.compile()?.extract(text))
}

/// Feature rows keyed by document id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn row(&self, id: &str) -> Option<&[f64]> {
        self.ids
            .iter()
            .position(|i| i == id)
            .map(|p| self.rows[p].as_slice())
    }

    /// Rows in the order of `ids`; a missing document is an error.
    pub fn align(&self, ids: &[String]) -> Result<Vec<Vec<f64>>> {
        let index: HashMap<&str, usize> =
            self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        ids.iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|&i| self.rows[i].clone())
                    .ok_or_else(|| Error::MissingDocument(id.clone()))
            })
            .collect()
    }

    pub fn lookup(&self) -> HashMap<String, Vec<f64>> {
        self.ids.iter().cloned().zip(self.rows.iter().cloned()).collect()
    }
}

/// Reads precomputed features (CSV: `id` + one column per spec feature).
pub fn ingest_precomputed(path: &Path, spec: &FeatureSpec) -> Result<FeatureMatrix> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| Error::MissingField("id".into()))?;
    let expected: BTreeSet<&str> = spec.features.iter().map(|f| f.name.as_str()).collect();
    let present: BTreeSet<&str> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != id_col)
        .map(|(_, h)| h.as_str())
        .collect();
    let missing: Vec<String> = expected.difference(&present).map(|s| s.to_string()).collect();
    let extra: Vec<String> = present.difference(&expected).map(|s| s.to_string()).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::ColumnMismatch { missing, extra });
    }
    let columns: Vec<usize> = spec
        .features
        .iter()
        .map(|f| headers.iter().position(|h| *h == f.name).unwrap())
        .collect();

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        ids.push(record[id_col].to_string());
        let row = columns
            .iter()
            .map(|&c| {
                record[c].trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    message: format!("row {}: `{}` is not a number", line + 2, &record[c]),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(FeatureMatrix {
        names: spec.names(),
        ids,
        rows,
    })
}

/// Percentile by linear interpolation between order statistics
/// (position `q * (n - 1)` in the sorted sample).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Per-feature median and interquartile range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustScalerModel {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    /// Columns with zero IQR are centered but not divided.
    pub pass_through: Vec<bool>,
}

impl RobustScalerModel {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "robust scaling needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let dim = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        let mut center = Vec::with_capacity(dim);
        let mut scale = Vec::with_capacity(dim);
        let mut pass_through = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            let iqr = percentile(&col, 0.75) - percentile(&col, 0.25);
            center.push(percentile(&col, 0.5));
            scale.push(iqr.max(0.0));
            pass_through.push(iqr <= 0.0);
        }
        Ok(Self {
            center,
            scale,
            pass_through,
        })
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.center.len() {
            return Err(Error::DimensionMismatch {
                expected: self.center.len(),
                found: x.len(),
            });
        }
        Ok(x.iter()
            .enumerate()
            .map(|(j, v)| {
                let c = v - self.center[j];
                if self.pass_through[j] {
                    c
                } else {
                    c / self.scale[j]
                }
            })
            .collect())
    }
}

/// Per-feature training quartile edges `[min, Q1, median, Q3, max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureQuartiles {
    pub names: Vec<String>,
    pub edges: Vec<[f64; 5]>,
}

impl FeatureQuartiles {
    pub fn fit(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("quartiles need at least one row".into()));
        }
        let dim = names.len();
        let mut edges = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            edges.push([
                col[0],
                percentile(&col, 0.25),
                percentile(&col, 0.5),
                percentile(&col, 0.75),
                col[col.len() - 1],
            ]);
        }
        Ok(Self { names, edges })
    }

    /// A feature whose training values are all equal.
    pub fn is_degenerate(&self, j: usize) -> bool {
        self.edges[j][0] == self.edges[j][4]
    }

    /// Quartile bin (0..4) holding `value`; values outside the training
    /// range fall into the outermost bins.
    pub fn bin(&self, j: usize, value: f64) -> usize {
        let e = &self.edges[j];
        (0..3).find(|&b| value <= e[b + 1]).unwrap_or(3)
    }
}

pub fn fit_scaler(rows: &[Vec<f64>]) -> Result<RobustScalerModel> {
    RobustScalerModel::fit(rows)
}

pub fn scale(model: &RobustScalerModel, x: &[f64]) -> Result<Vec<f64>> {
    model.transform(x)
}
