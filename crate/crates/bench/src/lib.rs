//! Shared scenario builders for the benchmarks.

use frlscale_core::{Controller, ExperimentConfig, PatternKind, PatternSpec};

/// A bursting-sinusoid experiment sized for benchmarking.
pub fn bench_config(controller: Controller, horizon: u64) -> ExperimentConfig {
    ExperimentConfig {
        controller,
        horizon,
        seed: 1,
        pattern: PatternSpec {
            kind: PatternKind::PredictableBursting { period: 200 },
            ..PatternSpec::default()
        },
        ..ExperimentConfig::default()
    }
}
