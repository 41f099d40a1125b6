//! `glassbox` subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use glassbox::classifiers::Kernel;
use glassbox::corpus::{Format, SyntheticShape};
use glassbox::service::{
    parse_hypothesis, DatasetSource, ExplainRequest, GridRequest, HypothesisRequest, IngestRequest, ViewKind,
    ViewRequest, ViewRows,
};
use glassbox::views::{doc_agreement_csv, explanation_view_csv, set_agreement_csv};
use glassbox::{
    Error, Grid, LocalExplanation, ModelSpec, PipelineConfig, Provenance, RepresentationConfig, Result,
    ServiceConfig, SplitSpec, Workbench,
};

use crate::errors::{exit_code, ErrorBody};

#[derive(Parser, Debug)]
#[command(name = "glassbox", version, about = "Transparent text-classification pipelines")]
pub struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = "GLASSBOX_STORE")]
    pub store: Option<PathBuf>,
    /// Service configuration file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Ingest a CSV or JSONL corpus.
    Ingest {
        #[arg(long)]
        name: String,
        #[arg(long)]
        file: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Generate a synthetic corpus with known ground truth.
    Synth {
        #[arg(long)]
        name: String,
        #[arg(long, value_enum, default_value = "gold-like")]
        shape: ShapeArg,
        /// Documents per class for the balanced shape.
        #[arg(long, default_value_t = 60)]
        per_class: usize,
        #[arg(long, default_value_t = 8)]
        classes: usize,
        #[arg(long, default_value_t = 0.0)]
        confound: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Drop the gold labels.
        #[arg(long)]
        unlabeled: bool,
    },
    /// List datasets.
    Datasets,
    /// List pipelines.
    Pipelines,
    /// Cross-validated hyper-parameter search.
    Gridsearch {
        #[arg(long)]
        dataset: String,
        #[arg(long, default_value = "tfidf")]
        repr: String,
        /// `svc`, `nb`, `rf` for the standard grids, or a JSON grid file.
        #[arg(long, default_value = "svc")]
        grid: String,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the candidate table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Configure and train a pipeline, then evaluate it.
    Train(TrainArgs),
    /// Print a pipeline's evaluation report.
    Evaluate {
        pipeline: String,
        /// Re-run the evaluation instead of reading the stored report.
        #[arg(long)]
        rerun: bool,
    },
    /// Local explanation of one document.
    Explain {
        #[arg(long)]
        pipeline: String,
        #[arg(long)]
        document: String,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(short, long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-pipeline comparison views.
    Views {
        #[arg(value_enum)]
        kind: ViewArg,
        /// Comma-separated pipeline ids.
        #[arg(long, value_delimiter = ',', required = true)]
        pipelines: Vec<String>,
        #[arg(long)]
        dataset: Option<String>,
        /// Write CSV here instead of printing.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Label distributions and hypothesis verdicts.
    Hypothesis {
        /// Pipeline to apply; without one the dataset's gold labels are used.
        #[arg(long)]
        pipeline: Option<String>,
        #[arg(long)]
        dataset: Option<String>,
        /// `LABEL:increase|decrease:BASELINE:COMPARISON`, repeatable.
        #[arg(long = "spec")]
        specs: Vec<String>,
        #[arg(long, value_enum, default_value = "heldout")]
        source: SourceArg,
    },
    /// Write chart payloads for trained pipelines.
    ExportCharts {
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated pipeline ids; every ready pipeline when absent.
        #[arg(long, value_delimiter = ',')]
        pipelines: Vec<String>,
        /// Pipeline whose predicted distribution is charted.
        #[arg(long)]
        hypothesis_pipeline: Option<String>,
        #[arg(long)]
        hypothesis_dataset: Option<String>,
        #[arg(long = "spec")]
        specs: Vec<String>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Full pipeline configuration as a JSON file; other flags are ignored.
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[arg(long, required_unless_present = "from")]
    pub dataset: Option<String>,
    /// `tfidf`, `tfidf-swr[:LIST]`, `numeric`, `numeric-raw`, or inline JSON.
    #[arg(long, default_value = "tfidf")]
    pub repr: String,
    /// `nb[:ALPHA]`, `svc-linear[:C]`, `svc-rbf[:C[:GAMMA]]`, `rf[:TREES[:FEATURES]]`, or inline JSON.
    #[arg(long, default_value = "svc-linear")]
    pub model: String,
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 42)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 10)]
    pub cv_folds: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ShapeArg {
    Balanced,
    GoldLike,
    UnlabeledLike,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ViewArg {
    Explanation,
    SetAgreement,
    DocAgreement,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SourceArg {
    Cv,
    Heldout,
}

impl From<SourceArg> for Provenance {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Cv => Provenance::Cv,
            SourceArg::Heldout => Provenance::Heldout,
        }
    }
}

/// Parses a representation shorthand or inline JSON.
pub fn parse_repr(s: &str) -> Result<RepresentationConfig> {
    if s.trim_start().starts_with('{') {
        return Ok(serde_json::from_str(s)?);
    }
    let (head, arg) = s.split_once(':').map_or((s, None), |(h, a)| (h, Some(a)));
    match (head, arg) {
        ("tfidf", None) => Ok(RepresentationConfig::tfidf()),
        ("tfidf-swr", list) => Ok(RepresentationConfig::tfidf_swr(list.unwrap_or("dutch"))),
        ("numeric", None) => Ok(RepresentationConfig::numeric()),
        ("numeric-raw", None) => {
            let mut r = RepresentationConfig::numeric();
            if let RepresentationConfig::Numeric(n) = &mut r {
                n.scale = false;
            }
            Ok(r)
        }
        _ => Err(Error::InvalidInput(format!("unknown representation `{s}`"))),
    }
}

fn num<T: std::str::FromStr>(what: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::InvalidInput(format!("{what} `{s}` is not a number")))
}

/// Parses a model shorthand or inline JSON.
pub fn parse_model(s: &str) -> Result<ModelSpec> {
    if s.trim_start().starts_with('{') {
        return Ok(serde_json::from_str(s)?);
    }
    let parts: Vec<&str> = s.split(':').collect();
    let arg = |i: usize| parts.get(i).copied();
    let svc = |kernel| -> Result<ModelSpec> {
        Ok(ModelSpec::Svc {
            kernel,
            c: arg(1).map(|v| num("C", v)).transpose()?.unwrap_or(1.0),
            gamma: arg(2).map(|v| num("gamma", v)).transpose()?,
            seed: 0,
        })
    };
    match parts[0] {
        "nb" if parts.len() <= 2 => Ok(ModelSpec::Nb {
            alpha: arg(1).map(|v| num("alpha", v)).transpose()?.unwrap_or(1.0),
        }),
        "svc-linear" if parts.len() <= 2 => svc(Kernel::Linear),
        "svc-rbf" if parts.len() <= 3 => svc(Kernel::Rbf),
        "rf" if parts.len() <= 3 => Ok(ModelSpec::Rf {
            n_estimators: arg(1).map(|v| num("trees", v)).transpose()?.unwrap_or(50),
            max_features: arg(2).map(|v| num("features", v)).transpose()?.unwrap_or(5),
            criterion: Default::default(),
            seed: 0,
        }),
        _ => Err(Error::InvalidInput(format!("unknown model `{s}`"))),
    }
}

fn parse_grid(s: &str, seed: u64) -> Result<Grid> {
    match s {
        "svc" => Ok(Grid::svc()),
        "nb" => Ok(Grid::nb()),
        "rf" => Ok(Grid::rf(seed)),
        path => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: PathBuf::from(path),
                source: e,
            })?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Output of one command: JSON value plus a human rendering.
struct Output {
    json: serde_json::Value,
    text: String,
}

fn out<T: Serialize>(value: &T, text: impl Into<String>) -> Result<Output> {
    Ok(Output {
        json: serde_json::to_value(value)?,
        text: text.into(),
    })
}

fn render_explanation(e: &LocalExplanation) -> String {
    let mut s = format!("document {} -> {}\n", e.document_id, e.predicted_label);
    for p in &e.probabilities {
        let _ = writeln!(s, "  p({}) = {:.3}", p.label, p.probability);
    }
    let _ = writeln!(s, "fidelity {:.3}, intercept {:.4}", e.fidelity, e.intercept);
    for a in &e.attributions {
        let name = a.condition.as_deref().unwrap_or(&a.feature);
        let _ = writeln!(s, "  {:>+9.4}  {}", a.weight, name);
    }
    for n in &e.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}

fn open(cli: &Cli) -> Result<Arc<Workbench>> {
    let config = match &cli.config {
        Some(path) => ServiceConfig::load(path)?,
        None => ServiceConfig::default(),
    };
    let root = cli
        .store
        .clone()
        .or_else(|| config.store.clone())
        .unwrap_or_else(|| PathBuf::from("glassbox-store"));
    Workbench::open(root, config)
}

fn execute(cli: &Cli) -> Result<Output> {
    if let Command::Serve { host, port } = &cli.command {
        let wb = open(cli)?;
        let host = host.clone().unwrap_or_else(|| wb.config().host.clone());
        let port = port.unwrap_or(wb.config().port);
        let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::InvalidInput(e.to_string()))?;
        runtime
            .block_on(crate::api::serve(wb, &host, port))
            .map_err(|e| Error::InvalidInput(format!("server: {e}")))?;
        return out(&serde_json::json!({ "status": "stopped" }), "stopped");
    }
    let wb = open(cli)?;
    match &cli.command {
        Command::Ingest { name, file, format } => {
            let rec = wb.ingest(&IngestRequest {
                name: name.clone(),
                source: DatasetSource::File {
                    path: file.clone(),
                    format: format.map(|f| match f {
                        FormatArg::Csv => Format::Csv,
                        FormatArg::Jsonl => Format::Jsonl,
                    }),
                },
            })?;
            let text = format!("{}: {} documents, labels {}", rec.name, rec.documents, rec.labels.join(", "));
            out(&rec, text)
        }
        Command::Synth {
            name,
            shape,
            per_class,
            classes,
            confound,
            seed,
            unlabeled,
        } => {
            let shape = match shape {
                ShapeArg::Balanced => SyntheticShape::Balanced {
                    n_per_class: *per_class,
                    n_classes: *classes,
                },
                ShapeArg::GoldLike => SyntheticShape::gold_like(),
                ShapeArg::UnlabeledLike => SyntheticShape::unlabeled_like(),
            };
            let rec = wb.ingest(&IngestRequest {
                name: name.clone(),
                source: DatasetSource::Synthetic {
                    shape,
                    confound_strength: *confound,
                    seed: *seed,
                    unlabeled: *unlabeled,
                },
            })?;
            let text = format!("{}: {} documents, labels {}", rec.name, rec.documents, rec.labels.join(", "));
            out(&rec, text)
        }
        Command::Datasets => {
            let list = wb.datasets()?;
            let mut text = String::new();
            for d in &list {
                let _ = writeln!(text, "{}\t{} docs\tlabeled={}", d.name, d.documents, d.labeled);
            }
            out(&list, text)
        }
        Command::Pipelines => {
            let list = wb.pipelines()?;
            let mut text = String::new();
            for p in &list {
                let _ = writeln!(text, "{}\t{}\t{}", p.id, p.status.as_str(), p.name);
            }
            out(&list, text)
        }
        Command::Gridsearch {
            dataset,
            repr,
            grid,
            k,
            seed,
            csv,
        } => {
            let seed = seed.unwrap_or(wb.config().seed);
            let outcome = wb.gridsearch(&GridRequest {
                dataset: dataset.clone(),
                representation: parse_repr(repr)?,
                grid: parse_grid(grid, seed)?,
                k: *k,
                seed: Some(seed),
                split: SplitSpec::default(),
            })?;
            if let Some(path) = csv {
                write_file(path, &outcome.report.to_csv())?;
            }
            let best = &outcome.report.candidates[outcome.report.selected];
            let text = format!(
                "grid {}: {} candidates, selected {} (accuracy {:.4})",
                outcome.id,
                outcome.report.candidates.len(),
                best.name,
                best.mean.accuracy
            );
            out(&outcome, text)
        }
        Command::Train(args) => {
            let config = match &args.from {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    serde_json::from_str(&text)?
                }
                None => PipelineConfig {
                    dataset: args.dataset.clone().unwrap_or_default(),
                    representation: parse_repr(&args.repr)?,
                    model: parse_model(&args.model)?,
                    split: SplitSpec {
                        test_fraction: args.test_fraction,
                        seed: args.split_seed,
                    },
                    cv_folds: args.cv_folds,
                },
            };
            let rec = wb.create_pipeline(&config)?;
            let rec = wb.train(&rec.id)?;
            let report = wb.report(&rec.id)?;
            let text = format!(
                "{}\t{}\ncv accuracy {:.4}, held-out accuracy {:.4}",
                rec.id, rec.name, report.cv.panel.accuracy, report.heldout.panel.accuracy
            );
            out(&rec, text)
        }
        Command::Evaluate { pipeline, rerun } => {
            let report = if *rerun { wb.evaluate(pipeline)? } else { wb.report(pipeline)? };
            let mut text = format!("{}\n", report.pipeline_name);
            for (tag, panel, cm) in [
                ("cv", &report.cv.panel, &report.cv.pooled),
                ("held-out", &report.heldout.panel, &report.heldout.confusion),
            ] {
                let _ = writeln!(
                    text,
                    "[{tag}] n={} accuracy {:.4}  macro F1 {:.4}  weighted F1 {:.4}",
                    panel.total, panel.accuracy, panel.macro_avg.f1, panel.weighted.f1
                );
                text.push_str(&panel.to_csv());
                text.push_str(&cm.to_csv());
            }
            for w in &report.warnings {
                let _ = writeln!(text, "warning: {w}");
            }
            out(&report, text)
        }
        Command::Explain {
            pipeline,
            document,
            dataset,
            samples,
            k,
            seed,
        } => {
            let outcome = wb.explain(&ExplainRequest {
                pipeline: pipeline.clone(),
                document: document.clone(),
                dataset: dataset.clone(),
                n_samples: *samples,
                k: *k,
                seed: *seed,
            })?;
            let text = render_explanation(&outcome.explanation);
            out(&outcome, text)
        }
        Command::Views {
            kind,
            pipelines,
            dataset,
            csv,
        } => {
            let view = match kind {
                ViewArg::Explanation => ViewKind::Explanation,
                ViewArg::SetAgreement => ViewKind::SetAgreement,
                ViewArg::DocAgreement => ViewKind::DocAgreement,
            };
            let payload = wb.view(&ViewRequest {
                view,
                pipelines: pipelines.clone(),
                dataset: dataset.clone(),
            })?;
            let table = match &payload.rows {
                ViewRows::Explanation(rows) => explanation_view_csv(rows),
                ViewRows::SetAgreement(rows) => set_agreement_csv(rows),
                ViewRows::DocAgreement(rows) => doc_agreement_csv(rows),
            };
            let text = match csv {
                Some(path) => {
                    write_file(path, &table)?;
                    format!("wrote {}", path.display())
                }
                None => table,
            };
            out(&payload, text)
        }
        Command::Hypothesis {
            pipeline,
            dataset,
            specs,
            source,
        } => {
            let specs = specs.iter().map(|s| parse_hypothesis(s)).collect::<Result<Vec<_>>>()?;
            match (pipeline, dataset) {
                (Some(p), _) => {
                    let o = wb.hypothesis(&HypothesisRequest {
                        pipeline: p.clone(),
                        dataset: dataset.clone(),
                        specs,
                        source: (*source).into(),
                    })?;
                    let mut text = format!("{} on {}\n", o.pipeline_name, o.dataset);
                    for v in &o.verdicts {
                        let _ = writeln!(
                            text,
                            "{} {:?} {} -> {}: raw {:?}, re-estimated {:?}",
                            v.raw.spec.label,
                            v.raw.spec.comparator,
                            v.raw.spec.baseline,
                            v.raw.spec.comparison,
                            v.raw.outcome,
                            v.reestimated.outcome
                        );
                    }
                    out(&o, text)
                }
                (None, Some(d)) => {
                    let o = wb.gold_hypothesis(d, &specs)?;
                    let mut text = format!("gold labels of {}\n", o.dataset);
                    for v in &o.verdicts {
                        let _ = writeln!(
                            text,
                            "{} {:?} {} -> {}: {:?}",
                            v.spec.label, v.spec.comparator, v.spec.baseline, v.spec.comparison, v.outcome
                        );
                    }
                    out(&o, text)
                }
                (None, None) => Err(Error::Validation(vec![glassbox::FieldError::new(
                    "pipeline",
                    "give --pipeline, or --dataset for a gold-label verdict",
                )])),
            }
        }
        Command::ExportCharts {
            out: dir,
            pipelines,
            hypothesis_pipeline,
            hypothesis_dataset,
            specs,
        } => {
            let specs = specs.iter().map(|s| parse_hypothesis(s)).collect::<Result<Vec<_>>>()?;
            let hyp = hypothesis_pipeline.as_ref().map(|p| HypothesisRequest {
                pipeline: p.clone(),
                dataset: hypothesis_dataset.clone(),
                specs: specs.clone(),
                source: Provenance::Heldout,
            });
            let files = wb.export_charts(pipelines, dir, hyp.as_ref())?;
            let text = files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>().join("\n");
            out(&files, text)
        }
        Command::Serve { .. } => unreachable!("handled above"),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(o) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&o.json).unwrap_or_default());
            } else if !o.text.is_empty() {
                println!("{}", o.text.trim_end());
            }
            0
        }
        Err(e) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&ErrorBody::from(&e)).unwrap_or_default());
            } else {
                eprintln!("error: {e}");
                if let Error::Validation(fields) = &e {
                    for f in fields {
                        eprintln!("  {}: {}", f.field, f.message);
                    }
                }
            }
            exit_code(&e)
        }
    }
}
