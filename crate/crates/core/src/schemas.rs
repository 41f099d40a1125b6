//! Published JSON schemas for API responses and chart payloads.

pub const SCHEMAS: &[(&str, &str)] = &[
    ("chart-accuracy-bars", include_str!("../schemas/chart-accuracy-bars.schema.json")),
    ("chart-confusion-heatmap", include_str!("../schemas/chart-confusion-heatmap.schema.json")),
    ("chart-importance-bars", include_str!("../schemas/chart-importance-bars.schema.json")),
    ("chart-label-distribution", include_str!("../schemas/chart-label-distribution.schema.json")),
    ("chart-pair-ranking", include_str!("../schemas/chart-pair-ranking.schema.json")),
    ("dataset-list", include_str!("../schemas/dataset-list.schema.json")),
    ("dataset-record", include_str!("../schemas/dataset-record.schema.json")),
    ("error", include_str!("../schemas/error.schema.json")),
    ("evaluation-report", include_str!("../schemas/evaluation-report.schema.json")),
    ("explain-outcome", include_str!("../schemas/explain-outcome.schema.json")),
    ("grid-outcome", include_str!("../schemas/grid-outcome.schema.json")),
    ("hypothesis-outcome", include_str!("../schemas/hypothesis-outcome.schema.json")),
    ("job", include_str!("../schemas/job.schema.json")),
    ("local-explanation", include_str!("../schemas/local-explanation.schema.json")),
    ("pipeline-list", include_str!("../schemas/pipeline-list.schema.json")),
    ("pipeline-record", include_str!("../schemas/pipeline-record.schema.json")),
    ("view", include_str!("../schemas/view.schema.json")),
];

/// Schema text by name (e.g. `job`, `chart-accuracy-bars`).
pub fn schema(name: &str) -> Option<&'static str> {
    SCHEMAS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Schema name for a chart type tag (`accuracy-bars` → `chart-accuracy-bars`).
pub fn chart_schema_name(chart: &str) -> String {
    format!("chart-{chart}")
}
