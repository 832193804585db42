use crate::measures::{Evaluator, MeasureSpec, MeasureVector};
use crate::mobo::PipelineConfig;
use crate::pareto::{EvalRecord, Provenance};

/// Fractions of `nrounds` re-scored without retraining (the full horizon is
/// included so the threshold sweep at `nrounds` comes for free).
pub const ROUND_FRACTIONS: [f64; 5] = [0.25, 0.5, 0.75, 0.9, 1.0];

/// Thresholds `0.0, 0.1, ..., 1.0`.
pub fn threshold_grid() -> [f64; 11] {
    std::array::from_fn(|i| i as f64 / 10.0)
}

/// Round counts `ceil(f * nrounds)` for each fraction, deduplicated, ascending.
pub fn round_grid(nrounds: u32) -> Vec<u32> {
    let mut out: Vec<u32> = ROUND_FRACTIONS
        .iter()
        .map(|f| ((f * f64::from(nrounds)).ceil() as u32).clamp(1, nrounds.max(1)))
        .collect();
    out.dedup();
    out
}

/// The `(n, thr)` pairs to re-score for a full evaluation of `config`,
/// excluding the full evaluation's own pair.
pub fn candidate_grid(config: &PipelineConfig) -> Vec<(u32, f64)> {
    let thresholds = threshold_grid();
    round_grid(config.nrounds)
        .into_iter()
        .flat_map(|n| thresholds.iter().map(move |&t| (n, t)))
        .filter(|&(n, t)| !(n == config.nrounds && t == config.thr))
        .collect()
}

/// Score every candidate on the cached staged margins. Candidates whose
/// measures fail (e.g. an undefined rate at a degenerate threshold) are
/// skipped.
pub fn subevaluations(
    evaluator: &Evaluator<'_>,
    config: &PipelineConfig,
    specs: &[MeasureSpec],
    parent: usize,
    iteration: usize,
    wall_time: f64,
) -> Vec<EvalRecord> {
    candidate_grid(config)
        .into_iter()
        .filter_map(
            |(n, thr)| match evaluator.evaluate(specs, n as usize, thr) {
                Ok(v) => Some(sub_record(config, n, thr, v, parent, iteration, wall_time)),
                Err(e) => {
                    log::debug!("sub-evaluation at n={n}, thr={thr} skipped: {e}");
                    None
                }
            },
        )
        .collect()
}

fn sub_record(
    config: &PipelineConfig,
    n: u32,
    thr: f64,
    measures: MeasureVector,
    parent: usize,
    iteration: usize,
    wall_time: f64,
) -> EvalRecord {
    EvalRecord {
        config: PipelineConfig {
            booster: config.booster.clone(),
            nrounds: n,
            thr,
        },
        measures,
        provenance: Provenance::Sub,
        parent: Some(parent),
        iteration,
        wall_time,
        penalized: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbt::BoosterParams;

    fn cfg(nrounds: u32, thr: f64) -> PipelineConfig {
        PipelineConfig {
            booster: BoosterParams {
                max_rounds: nrounds,
                ..Default::default()
            },
            nrounds,
            thr,
        }
    }

    #[test]
    fn rounds_for_100_and_10() {
        assert_eq!(round_grid(100), vec![25, 50, 75, 90, 100]);
        assert_eq!(round_grid(10), vec![3, 5, 8, 9, 10]);
        assert_eq!(round_grid(1), vec![1]);
        assert_eq!(round_grid(2), vec![1, 2]);
    }

    #[test]
    fn grid_excludes_full_pair() {
        let g = candidate_grid(&cfg(100, 0.5));
        assert_eq!(g.len(), 54);
        assert!(!g.contains(&(100, 0.5)));
        assert_eq!(candidate_grid(&cfg(100, 0.37)).len(), 55);
    }
}
