//! Shared fixtures for the benchmarks.

use glassbox::corpus::{generate_synthetic, SyntheticShape, SyntheticSpec};
use glassbox::Dataset;

/// Eight-genre balanced synthetic corpus with `n_per_class` documents per genre.
pub fn corpus(n_per_class: usize, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticSpec {
        name: "bench".into(),
        shape: SyntheticShape::Balanced {
            n_per_class,
            n_classes: 8,
        },
        confound_strength: 0.3,
        seed,
    })
    .expect("synthetic corpus")
}
