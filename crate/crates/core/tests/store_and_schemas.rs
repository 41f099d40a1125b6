//! Persistence round-trips and schema conformance of every payload.

use std::path::Path;
use std::sync::Arc;

use glassbox::charts::{accuracy_chart, heatmap_chart, importance_chart, ranking_chart};
use glassbox::corpus::SyntheticShape;
use glassbox::evaluation::Normalize;
use glassbox::explanation::global_rf_importance;
use glassbox::schemas;
use glassbox::service::{
    parse_hypothesis, DatasetSource, ExplainRequest, GridRequest, HypothesisRequest, IngestRequest, ViewKind,
    ViewRequest,
};
use glassbox::{Grid, ModelSpec, PipelineConfig, Provenance, RepresentationConfig, ServiceConfig, SplitSpec, Workbench};
use serde::Serialize;

fn validate<T: Serialize>(schema_name: &str, value: &T) {
    let schema: serde_json::Value =
        serde_json::from_str(schemas::schema(schema_name).unwrap_or_else(|| panic!("no schema {schema_name}"))).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let instance = serde_json::to_value(value).unwrap();
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:#?}");
}

fn open(root: &Path) -> Arc<Workbench> {
    let config = ServiceConfig {
        workers: 2,
        lime_samples: 300,
        ..ServiceConfig::default()
    };
    Workbench::open(root, config).unwrap()
}

fn synth(wb: &Workbench, name: &str, shape: SyntheticShape, unlabeled: bool) {
    wb.ingest(&IngestRequest {
        name: name.into(),
        source: DatasetSource::Synthetic {
            shape,
            confound_strength: 0.3,
            seed: 9,
            unlabeled,
        },
    })
    .unwrap();
}

fn balanced(n: usize) -> SyntheticShape {
    SyntheticShape::Balanced {
        n_per_class: n,
        n_classes: 4,
    }
}

#[test]
fn reopened_store_predicts_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (id, before, docs) = {
        let wb = open(dir.path());
        synth(&wb, "S", balanced(40), false);
        let rec = wb
            .create_pipeline(&PipelineConfig::new("S", RepresentationConfig::tfidf(), ModelSpec::nb(0.1)))
            .unwrap();
        wb.train(&rec.id).unwrap();
        let p = wb.pipeline(&rec.id).unwrap();
        let ds = wb.dataset("S").unwrap();
        let docs: Vec<_> = ds.documents().iter().take(100).cloned().collect();
        let preds: Vec<(String, Vec<f64>)> = docs
            .iter()
            .map(|d| (p.predict(d).unwrap(), p.predict_proba(d).unwrap()))
            .collect();
        (rec.id, preds, docs)
    };
    assert_eq!(docs.len(), 100);
    let wb = open(dir.path());
    let p = wb.pipeline(&id).unwrap();
    for (d, (label, proba)) in docs.iter().zip(&before) {
        assert_eq!(&p.predict(d).unwrap(), label);
        assert_eq!(&p.predict_proba(d).unwrap(), proba);
    }
    assert_eq!(wb.dataset("S").unwrap().documents()[..100], docs[..]);
}

#[test]
fn every_payload_matches_its_schema() {
    let dir = tempfile::tempdir().unwrap();
    let wb = open(dir.path());
    synth(&wb, "S", balanced(25), false);
    synth(&wb, "U", balanced(10), true);
    validate("dataset-record", &wb.store().dataset_record("S").unwrap());
    validate("dataset-list", &wb.datasets().unwrap());

    let text = PipelineConfig {
        split: SplitSpec {
            test_fraction: 0.2,
            seed: 1,
        },
        cv_folds: 3,
        ..PipelineConfig::new("S", RepresentationConfig::tfidf(), ModelSpec::svc_linear(1.0))
    };
    let numeric = PipelineConfig {
        cv_folds: 3,
        ..PipelineConfig::new("S", RepresentationConfig::numeric(), ModelSpec::rf(20, 3, 1))
    };
    let a = wb.create_pipeline(&text).unwrap();
    validate("pipeline-record", &a);
    let b = wb.create_pipeline(&numeric).unwrap();
    let job = wb.submit_train(&a.id).unwrap();
    validate("job", &job);
    wb.jobs().wait(&job.id, std::time::Duration::from_secs(120)).unwrap();
    wb.train(&b.id).unwrap();
    validate("pipeline-list", &wb.pipelines().unwrap());

    let ra = wb.report(&a.id).unwrap();
    let rb = wb.report(&b.id).unwrap();
    validate("evaluation-report", &ra);
    validate("chart-accuracy-bars", &accuracy_chart(&[&ra, &rb]));
    for source in [Provenance::Cv, Provenance::Heldout] {
        for norm in [Normalize::None, Normalize::Row] {
            validate("chart-confusion-heatmap", &heatmap_chart(&ra, source, norm));
        }
    }
    let classes = wb.pipeline(&a.id).unwrap().classes().to_vec();
    validate(
        "chart-pair-ranking",
        &ranking_chart(&wb.global_ranking(&a.id, &classes[0], &classes[1], Some(10)).unwrap()),
    );
    let pb = wb.pipeline(&b.id).unwrap();
    validate("chart-importance-bars", &importance_chart(&pb.id, &pb.name, &global_rf_importance(&pb).unwrap(), 10));

    let grid = wb
        .gridsearch(&GridRequest {
            dataset: "S".into(),
            representation: RepresentationConfig::tfidf(),
            grid: Grid::Nb {
                alpha: vec![0.1, 1.0],
            },
            k: 3,
            seed: Some(1),
            split: SplitSpec::default(),
        })
        .unwrap();
    validate("grid-outcome", &grid);
    validate("grid-outcome", &wb.grid(&grid.id).unwrap());

    let pa = wb.pipeline(&a.id).unwrap();
    for (pid, doc) in [(&a.id, &pa.test_ids[0]), (&b.id, &pb.test_ids[0])] {
        let e = wb
            .explain(&ExplainRequest {
                pipeline: pid.clone(),
                document: doc.clone(),
                dataset: None,
                n_samples: Some(200),
                k: Some(5),
                seed: Some(3),
            })
            .unwrap();
        validate("explain-outcome", &e);
        validate("local-explanation", &wb.stored_explanation(&e.id).unwrap());
    }
    for view in [ViewKind::Explanation, ViewKind::SetAgreement, ViewKind::DocAgreement] {
        for dataset in [None, Some("U".to_string())] {
            let v = wb
                .view(&ViewRequest {
                    view,
                    pipelines: vec![a.id.clone(), b.id.clone()],
                    dataset,
                })
                .unwrap();
            validate("view", &v);
        }
    }
    let specs = vec![parse_hypothesis("Column:increase:1965:1985").unwrap()];
    for dataset in [None, Some("U".to_string())] {
        let h = wb
            .hypothesis(&HypothesisRequest {
                pipeline: a.id.clone(),
                dataset,
                specs: specs.clone(),
                source: Provenance::Heldout,
            })
            .unwrap();
        validate("hypothesis-outcome", &h);
        validate("chart-label-distribution", &h.chart);
    }
    let gold = wb.gold_hypothesis("S", &specs).unwrap();
    validate("chart-label-distribution", &gold.chart);

    let out = dir.path().join("charts");
    let files = wb
        .export_charts(
            &[],
            &out,
            Some(&HypothesisRequest {
                pipeline: a.id.clone(),
                dataset: Some("U".into()),
                specs,
                source: Provenance::Heldout,
            }),
        )
        .unwrap();
    assert!(!files.is_empty());
    for f in files {
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&f).unwrap()).unwrap();
        let chart = v["chart"].as_str().unwrap_or_else(|| panic!("{} has no chart tag", f.display()));
        validate(&schemas::chart_schema_name(chart), &v);
    }
}

#[test]
fn error_bodies_match_schema() {
    let body = serde_json::json!({
        "error": { "kind": "validation", "message": "bad", "fields": [{ "field": "model.C", "message": "must be > 0" }] }
    });
    validate("error", &body);
}
