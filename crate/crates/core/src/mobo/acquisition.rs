use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as StdNormal};

use super::forest::RandomForest;
use super::space::ConfigSpace;

pub const DEFAULT_CANDIDATES: usize = 1000;
pub const MUTATIONS: usize = 10;
pub const MUTATION_SD: f64 = 0.1;

/// Expected improvement below `best` for a Normal(mu, s^2) prediction.
pub fn expected_improvement(mu: f64, s: f64, best: f64) -> f64 {
    let diff = best - mu;
    if !(s > 0.0) {
        return diff.max(0.0);
    }
    let z = diff / s;
    let n = StdNormal::standard();
    (diff * n.cdf(z) + s * n.pdf(z)).max(0.0)
}

#[derive(Clone, Debug)]
pub struct Proposal {
    pub unit: Vec<f64>,
    pub ei: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Scores `n_candidates` uniform points plus incumbent mutations and returns
/// the expected-improvement maximizer; ties go to the earliest candidate.
pub fn propose<R: Rng + ?Sized>(
    surrogate: &RandomForest,
    space: &ConfigSpace,
    best: f64,
    incumbent: Option<&[f64]>,
    rng: &mut R,
    n_candidates: usize,
) -> Proposal {
    let d = space.dim();
    let mut candidates: Vec<Vec<f64>> = (0..n_candidates.max(1))
        .map(|_| space.sample_unit(rng))
        .collect();
    if let Some(inc) = incumbent {
        let noise = Normal::new(0.0, MUTATION_SD).expect("valid sd");
        for _ in 0..MUTATIONS {
            candidates.push(
                (0..d)
                    .map(|i| (inc[i].clamp(0.0, 1.0) + noise.sample(rng)).clamp(0.0, 1.0))
                    .collect(),
            );
        }
    }
    let mut out: Option<Proposal> = None;
    for c in candidates {
        // Score the decoded point so integer rounding is what the model sees.
        let snapped = space.encode(&space.decode(&c, 0));
        let (mean, sd) = surrogate.predict_mean_sd(&snapped);
        let ei = expected_improvement(mean, sd, best);
        if out.as_ref().is_none_or(|o| ei > o.ei) {
            out = Some(Proposal {
                unit: snapped,
                ei,
                mean,
                sd,
            });
        }
    }
    out.expect("at least one candidate")
}
