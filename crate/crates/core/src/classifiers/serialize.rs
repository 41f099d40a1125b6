//! Binary model format.
//!
//! ```text
//! offset  size  content
//! 0       8     magic "GLBXMDL1"
//! 8       4     format version, u32 little-endian (currently 1)
//! 12      8     JSON envelope length J, u64 little-endian
//! 20      J     JSON envelope (UTF-8)
//! 20+J    8     array section length B in bytes, u64 little-endian
//! 28+J    B     f64 values, little-endian IEEE-754, segment after segment
//! ```
//!
//! The envelope carries the model spec, class list, input dimension, the
//! non-array structure of the model and a segment table
//! (`name`, `offset`, `len`, counted in f64 values) describing the array
//! section. Integer arrays (tree links, support indices) are stored as f64,
//! which is exact below 2^53.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::sparse::SparseVector;

use super::{
    ForestModel, LinearPair, LinearSvcModel, ModelParams, ModelSpec, NaiveBayesModel, Node,
    RbfPair, RbfSvcModel, TrainedModel, Tree,
};

pub const MODEL_MAGIC: &[u8; 8] = b"GLBXMDL1";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SegmentEntry {
    name: String,
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    spec: ModelSpec,
    classes: Vec<String>,
    dim: usize,
    #[serde(default)]
    warnings: Vec<String>,
    kind: String,
    structure: Value,
    segments: Vec<SegmentEntry>,
}

#[derive(Default)]
struct Writer {
    table: Vec<SegmentEntry>,
    data: Vec<f64>,
}

impl Writer {
    fn push(&mut self, name: &str, values: impl IntoIterator<Item = f64>) {
        let offset = self.data.len();
        self.data.extend(values);
        self.table.push(SegmentEntry {
            name: name.to_string(),
            offset,
            len: self.data.len() - offset,
        });
    }
}

struct Reader<'a> {
    origin: &'a str,
    table: &'a [SegmentEntry],
    data: Vec<f64>,
}

impl Reader<'_> {
    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::Corrupt {
            path: PathBuf::from(self.origin),
            reason: reason.into(),
        }
    }

    fn get(&self, name: &str, expected: usize) -> Result<&[f64]> {
        let seg = self
            .table
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| self.corrupt(format!("missing segment `{name}`")))?;
        if seg.len != expected {
            return Err(self.corrupt(format!(
                "segment `{name}` has {} values, expected {expected}",
                seg.len
            )));
        }
        self.data
            .get(seg.offset..seg.offset + seg.len)
            .ok_or_else(|| self.corrupt(format!("segment `{name}` runs past the array section")))
    }

    fn index(&self, v: f64, bound: usize, what: &str) -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 && (v as usize) < bound {
            Ok(v as usize)
        } else {
            Err(self.corrupt(format!("{what} {v} out of range")))
        }
    }
}

pub(crate) fn to_bytes(model: &TrainedModel) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    let (kind, structure) = match &model.params {
        ModelParams::NaiveBayes(m) => {
            w.push("class_log_prior", m.class_log_prior.iter().copied());
            w.push("feature_log_prob", m.feature_log_prob.iter().flatten().copied());
            ("naive-bayes", json!({ "alpha": m.alpha }))
        }
        ModelParams::LinearSvc(m) => {
            w.push("weights", m.pairs.iter().flat_map(|p| p.weights.iter().copied()));
            w.push("bias", m.pairs.iter().map(|p| p.bias));
            let pairs: Vec<[usize; 2]> = m.pairs.iter().map(|p| [p.a, p.b]).collect();
            ("linear-svc", json!({ "C": m.c, "pairs": pairs }))
        }
        ModelParams::RbfSvc(m) => {
            let mut indptr = vec![0.0];
            for s in &m.support {
                indptr.push(indptr.last().unwrap() + s.nnz() as f64);
            }
            w.push("support.indptr", indptr);
            w.push(
                "support.indices",
                m.support.iter().flat_map(|s| s.indices().iter().map(|&i| i as f64)),
            );
            w.push("support.values", m.support.iter().flat_map(|s| s.values().iter().copied()));
            w.push("pair.support", m.pairs.iter().flat_map(|p| p.support.iter().map(|&i| i as f64)));
            w.push("pair.coef", m.pairs.iter().flat_map(|p| p.coef.iter().copied()));
            w.push("pair.rho", m.pairs.iter().map(|p| p.rho));
            let pairs: Vec<Value> = m
                .pairs
                .iter()
                .map(|p| json!({ "a": p.a, "b": p.b, "n_support": p.support.len() }))
                .collect();
            (
                "rbf-svc",
                json!({ "C": m.c, "gamma": m.gamma, "n_support": m.support.len(), "pairs": pairs }),
            )
        }
        ModelParams::Forest(m) => {
            w.push("importances", m.importances.iter().copied());
            let nodes = || m.trees.iter().flat_map(|t| t.nodes.iter());
            w.push("node.feature", nodes().map(|n| n.feature.map_or(-1.0, |f| f as f64)));
            w.push("node.threshold", nodes().map(|n| n.threshold));
            w.push("node.left", nodes().map(|n| n.left as f64));
            w.push("node.right", nodes().map(|n| n.right as f64));
            w.push("node.class", nodes().map(|n| n.class as f64));
            let sizes: Vec<usize> = m.trees.iter().map(|t| t.nodes.len()).collect();
            (
                "forest",
                json!({
                    "n_classes": m.n_classes,
                    "max_features": m.max_features,
                    "n_importances": m.importances.len(),
                    "tree_sizes": sizes
                }),
            )
        }
    };
    let envelope = Envelope {
        format: "glassbox-model".into(),
        version: MODEL_FORMAT_VERSION,
        spec: model.spec.clone(),
        classes: model.classes.clone(),
        dim: model.dim,
        warnings: model.warnings.clone(),
        kind: kind.into(),
        structure,
        segments: w.table,
    };
    let json = serde_json::to_vec(&envelope)?;
    let mut out = Vec::with_capacity(28 + json.len() + 8 * w.data.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&((w.data.len() * 8) as u64).to_le_bytes());
    for v in &w.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize, origin: &str) -> Result<&'a [u8]> {
    let end = at.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| Error::Corrupt {
        path: PathBuf::from(origin),
        reason: format!("truncated at byte {at}"),
    })?;
    let out = &bytes[*at..end];
    *at = end;
    Ok(out)
}

pub(crate) fn from_bytes(bytes: &[u8], origin: &str) -> Result<TrainedModel> {
    let corrupt = |reason: String| Error::Corrupt {
        path: PathBuf::from(origin),
        reason,
    };
    let mut at = 0;
    if take(bytes, &mut at, 8, origin)? != MODEL_MAGIC {
        return Err(corrupt("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(take(bytes, &mut at, 4, origin)?.try_into().unwrap());
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            path: PathBuf::from(origin),
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let json_len = u64::from_le_bytes(take(bytes, &mut at, 8, origin)?.try_into().unwrap()) as usize;
    let envelope: Envelope = serde_json::from_slice(take(bytes, &mut at, json_len, origin)?)
        .map_err(|e| corrupt(format!("envelope: {e}")))?;
    let blob_len = u64::from_le_bytes(take(bytes, &mut at, 8, origin)?.try_into().unwrap()) as usize;
    if blob_len % 8 != 0 {
        return Err(corrupt("array section length is not a multiple of 8".into()));
    }
    let blob = take(bytes, &mut at, blob_len, origin)?;
    if at != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - at)));
    }
    let data = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let r = Reader {
        origin,
        table: &envelope.segments,
        data,
    };
    let n_classes = envelope.classes.len();
    let dim = envelope.dim;
    let st = &envelope.structure;
    let field = |name: &str| -> Result<&Value> {
        st.get(name)
            .ok_or_else(|| corrupt(format!("structure lacks `{name}`")))
    };
    let as_f64 = |v: &Value| v.as_f64().ok_or_else(|| corrupt("expected a number".into()));
    let as_usize = |v: &Value| {
        v.as_u64()
            .map(|u| u as usize)
            .ok_or_else(|| corrupt("expected an unsigned integer".into()))
    };

    let params = match envelope.kind.as_str() {
        "naive-bayes" => {
            let prior = r.get("class_log_prior", n_classes)?.to_vec();
            let flat = r.get("feature_log_prob", n_classes * dim)?;
            ModelParams::NaiveBayes(NaiveBayesModel {
                alpha: as_f64(field("alpha")?)?,
                class_log_prior: prior,
                feature_log_prob: flat.chunks(dim.max(1)).map(<[f64]>::to_vec).take(n_classes).collect(),
            })
        }
        "linear-svc" => {
            let pairs: Vec<[usize; 2]> = serde_json::from_value(field("pairs")?.clone())
                .map_err(|e| corrupt(format!("pairs: {e}")))?;
            let weights = r.get("weights", pairs.len() * dim)?;
            let bias = r.get("bias", pairs.len())?;
            ModelParams::LinearSvc(LinearSvcModel {
                c: as_f64(field("C")?)?,
                pairs: pairs
                    .iter()
                    .enumerate()
                    .map(|(k, &[a, b])| LinearPair {
                        a,
                        b,
                        weights: weights[k * dim..(k + 1) * dim].to_vec(),
                        bias: bias[k],
                    })
                    .collect(),
            })
        }
        "rbf-svc" => {
            let n_support = as_usize(field("n_support")?)?;
            let indptr = r.get("support.indptr", n_support + 1)?;
            let nnz = *indptr.last().unwrap_or(&0.0) as usize;
            let indices = r.get("support.indices", nnz)?;
            let values = r.get("support.values", nnz)?;
            let mut support = Vec::with_capacity(n_support);
            for s in 0..n_support {
                let lo = r.index(indptr[s], nnz + 1, "support pointer")?;
                let hi = r.index(indptr[s + 1], nnz + 1, "support pointer")?;
                if lo > hi {
                    return Err(corrupt("support pointers decrease".into()));
                }
                let pairs = (lo..hi)
                    .map(|k| Ok((r.index(indices[k], dim, "feature index")?, values[k])))
                    .collect::<Result<Vec<_>>>()?;
                support.push(SparseVector::from_pairs(dim, pairs)?);
            }
            let meta = field("pairs")?
                .as_array()
                .ok_or_else(|| corrupt("pairs is not an array".into()))?;
            let counts: Vec<(usize, usize, usize)> = meta
                .iter()
                .map(|p| {
                    Ok((
                        as_usize(&p["a"])?,
                        as_usize(&p["b"])?,
                        as_usize(&p["n_support"])?,
                    ))
                })
                .collect::<Result<_>>()?;
            let total: usize = counts.iter().map(|c| c.2).sum();
            let sv = r.get("pair.support", total)?;
            let coef = r.get("pair.coef", total)?;
            let rho = r.get("pair.rho", counts.len())?;
            let mut at = 0;
            let mut pairs = Vec::with_capacity(counts.len());
            for (k, &(a, b, n)) in counts.iter().enumerate() {
                pairs.push(RbfPair {
                    a,
                    b,
                    support: sv[at..at + n]
                        .iter()
                        .map(|&v| r.index(v, n_support, "support index"))
                        .collect::<Result<_>>()?,
                    coef: coef[at..at + n].to_vec(),
                    rho: rho[k],
                });
                at += n;
            }
            ModelParams::RbfSvc(RbfSvcModel {
                c: as_f64(field("C")?)?,
                gamma: as_f64(field("gamma")?)?,
                support,
                pairs,
            })
        }
        "forest" => {
            let sizes: Vec<usize> = serde_json::from_value(field("tree_sizes")?.clone())
                .map_err(|e| corrupt(format!("tree_sizes: {e}")))?;
            let total: usize = sizes.iter().sum();
            let importances = r.get("importances", as_usize(field("n_importances")?)?)?.to_vec();
            let feature = r.get("node.feature", total)?;
            let threshold = r.get("node.threshold", total)?;
            let left = r.get("node.left", total)?;
            let right = r.get("node.right", total)?;
            let class = r.get("node.class", total)?;
            let mut trees = Vec::with_capacity(sizes.len());
            let mut at = 0;
            for &size in &sizes {
                if size == 0 {
                    return Err(corrupt("empty tree".into()));
                }
                let mut nodes = Vec::with_capacity(size);
                for k in at..at + size {
                    let feat = if feature[k] == -1.0 {
                        None
                    } else {
                        Some(r.index(feature[k], dim, "split feature")?)
                    };
                    let (l, rr) = if feat.is_some() {
                        (r.index(left[k], size, "child link")?, r.index(right[k], size, "child link")?)
                    } else {
                        (0, 0)
                    };
                    if feat.is_some() && (l <= k - at || rr <= k - at) {
                        return Err(corrupt("child link does not point forward".into()));
                    }
                    nodes.push(Node {
                        feature: feat,
                        threshold: threshold[k],
                        left: l,
                        right: rr,
                        class: r.index(class[k], n_classes, "class index")?,
                    });
                }
                trees.push(Tree { nodes });
                at += size;
            }
            ModelParams::Forest(ForestModel {
                n_classes: as_usize(field("n_classes")?)?,
                max_features: as_usize(field("max_features")?)?,
                trees,
                importances,
            })
        }
        other => return Err(corrupt(format!("unknown model kind `{other}`"))),
    };
    Ok(TrainedModel {
        spec: envelope.spec,
        classes: envelope.classes,
        dim,
        params,
        warnings: envelope.warnings,
    })
}
