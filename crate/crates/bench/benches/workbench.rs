use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use glassbox::classifiers::linear::LinearSvcModel;
use glassbox::explanation::{explain_document, LimeOptions};
use glassbox::text_features::{tokenize, TfidfConfig, TfidfModel};
use glassbox::views::{build_prediction_matrix, doc_agreement_view, set_agreement_view, Predictor};
use glassbox::{DocSet, ModelSpec, PipelineConfig, RepresentationConfig, TrainedPipeline};
use glassbox_bench::corpus;

fn tfidf(c: &mut Criterion) {
    let ds = corpus(60, 1);
    let tokens: Vec<Vec<String>> = ds.documents().iter().map(|d| tokenize(&d.text)).collect();
    let config = TfidfConfig::default();
    c.bench_function("tfidf_fit_480", |b| b.iter(|| TfidfModel::fit(black_box(&tokens), &config).unwrap()));
    let model = TfidfModel::fit(&tokens, &config).unwrap();
    c.bench_function("tfidf_transform_480", |b| {
        b.iter(|| tokens.iter().map(|t| model.transform(black_box(t))).count())
    });
}

fn classifiers(c: &mut Criterion) {
    let ds = corpus(60, 2);
    let tokens: Vec<Vec<String>> = ds.documents().iter().map(|d| tokenize(&d.text)).collect();
    let model = TfidfModel::fit(&tokens, &TfidfConfig::default()).unwrap();
    let x: Vec<_> = tokens.iter().map(|t| model.transform(t)).collect();
    let labels = ds.label_set().to_vec();
    let y: Vec<usize> = ds
        .documents()
        .iter()
        .map(|d| labels.iter().position(|l| Some(l) == d.gold_label.as_ref()).unwrap())
        .collect();
    c.bench_function("svc_linear_ovo_480", |b| b.iter(|| LinearSvcModel::fit(black_box(&x), &y, labels.len(), 1.0, 0)));

    let mut group = c.benchmark_group("pipeline_train_480");
    group.sample_size(10);
    for (name, repr, model) in [
        ("tfidf_nb", RepresentationConfig::tfidf(), ModelSpec::nb(0.1)),
        ("tfidf_svc_rbf", RepresentationConfig::tfidf(), ModelSpec::svc_rbf(10.0, 0.1)),
        ("numeric_rf50", RepresentationConfig::numeric(), ModelSpec::rf(50, 5, 1)),
    ] {
        let config = PipelineConfig {
            cv_folds: 2,
            ..PipelineConfig::new("bench", repr, model)
        };
        group.bench_function(name, |b| b.iter(|| TrainedPipeline::train("p", &config, &ds).unwrap()));
    }
    group.finish();
}

fn lime(c: &mut Criterion) {
    let ds = corpus(30, 3);
    let mut group = c.benchmark_group("lime");
    group.sample_size(10);
    for (name, repr, model) in [
        ("text_1000", RepresentationConfig::tfidf(), ModelSpec::svc_linear(1.0)),
        ("tabular_1000", RepresentationConfig::numeric(), ModelSpec::rf(50, 5, 1)),
    ] {
        let p = TrainedPipeline::train("p", &PipelineConfig::new("bench", repr, model), &ds).unwrap();
        let doc = ds.get(&p.test_ids[0]).unwrap().clone();
        let opts = LimeOptions::default();
        group.bench_function(name, |b| b.iter(|| explain_document(&p, black_box(&doc), &opts).unwrap()));
    }
    group.finish();
}

fn views(c: &mut Criterion) {
    let ds = corpus(40, 4);
    let pipelines: Vec<TrainedPipeline> = [
        (RepresentationConfig::tfidf(), ModelSpec::svc_linear(1.0)),
        (RepresentationConfig::tfidf(), ModelSpec::nb(0.1)),
        (RepresentationConfig::numeric(), ModelSpec::rf(50, 5, 1)),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, (r, m))| TrainedPipeline::train(format!("p{i}"), &PipelineConfig::new("bench", r, m), &ds).unwrap())
    .collect();
    let refs: Vec<&dyn Predictor> = pipelines.iter().map(|p| p as &dyn Predictor).collect();
    let docs = DocSet {
        documents: ds.documents().to_vec(),
    };
    let gold = ds
        .documents()
        .iter()
        .filter_map(|d| d.gold_label.clone().map(|l| (d.id.clone(), l)))
        .collect();
    c.bench_function("prediction_matrix_320x3", |b| {
        b.iter_batched(|| docs.clone(), |d| build_prediction_matrix(&refs, &d).unwrap(), BatchSize::SmallInput)
    });
    let matrix = build_prediction_matrix(&refs, &docs).unwrap();
    c.bench_function("set_agreement_320x3", |b| b.iter(|| set_agreement_view(black_box(&matrix), &gold)));
    c.bench_function("doc_agreement_320x3", |b| b.iter(|| doc_agreement_view(black_box(&matrix), &gold)));
}

criterion_group!(benches, tfidf, classifiers, lime, views);
criterion_main!(benches);
