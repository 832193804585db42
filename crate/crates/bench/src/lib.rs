//! Fixtures shared by the benchmarks.

use axmc_core::data::{ingest_csv_str, prepare};
use axmc_core::pareto::EvalRecord;
use axmc_core::synthetic::{income_csv, income_schema, IncomeSpec};
use axmc_core::{BoosterParams, MeasureVector, PipelineConfig, Provenance, SplitSpec, Splits};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The reference synthetic task, split 70/15/15.
pub fn income_splits(n: usize) -> Splits {
    let csv = income_csv(&IncomeSpec {
        n,
        ..IncomeSpec::default()
    });
    let data = ingest_csv_str(&csv, &income_schema()).expect("synthetic data ingests");
    prepare(data, &SplitSpec::default()).expect("synthetic data splits")
}

/// `n` records with uniform random objective vectors of length `k`.
pub fn random_records(n: usize, k: usize, seed: u64) -> Vec<EvalRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| EvalRecord {
            config: PipelineConfig {
                booster: BoosterParams::default(),
                nrounds: 100,
                thr: 0.5,
            },
            measures: MeasureVector((0..k).map(|_| rng.random()).collect()),
            provenance: Provenance::Full,
            parent: None,
            iteration: i,
            wall_time: 0.0,
            penalized: false,
        })
        .collect()
}
