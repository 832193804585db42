use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{EvalContext, RobustnessConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gbt::sigmoid;

/// Copy of `data` with Gaussian noise (sd = `epsilon` × feature range) added
/// to every non-indicator numeric cell. Missing cells stay missing.
pub fn perturb(data: &Dataset, epsilon: f64, seed: u64) -> Result<Dataset> {
    let targets: Vec<usize> = data
        .features
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_numeric() && !f.indicator)
        .map(|(j, _)| j)
        .collect();
    if targets.is_empty() {
        return Err(Error::NotApplicable(
            "robustness needs at least one numeric feature".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.clone();
    for j in targets {
        let f = &data.features[j];
        let Some((lo, hi)) = f.range else { continue };
        let sd = epsilon * (hi - lo);
        if !(sd > 0.0) {
            continue;
        }
        let noise = Normal::new(0.0, sd).map_err(|e| Error::arg(e.to_string()))?;
        let values = f
            .as_numeric()
            .expect("numeric")
            .iter()
            .map(|&v| {
                if v.is_nan() {
                    v
                } else {
                    v + noise.sample(&mut rng)
                }
            })
            .collect();
        out.set_numeric(j, values)?;
    }
    Ok(out)
}

pub(crate) fn accuracy(margins: &[f64], labels: &[u8], thr: f64) -> f64 {
    let right = margins
        .iter()
        .zip(labels)
        .filter(|(&m, &y)| u8::from(sigmoid(m) >= thr) == y)
        .count();
    right as f64 / labels.len().max(1) as f64
}

/// Mean over repeats of |acc(X) - acc(X*)| at the context's rounds and threshold.
pub fn robustness_perturbation(ctx: &EvalContext<'_>, cfg: &RobustnessConfig) -> Result<f64> {
    if cfg.repeats == 0 {
        return Err(Error::arg("robustness repeats must be at least 1"));
    }
    let base = accuracy(ctx.margins_at()?, &ctx.data.labels, ctx.thr);
    let mut total = 0.0;
    for r in 0..cfg.repeats {
        let noisy = perturb(ctx.data, cfg.epsilon, cfg.seed.wrapping_add(r as u64))?;
        let m = ctx.model.predict_margin(&noisy, ctx.n)?;
        total += (base - accuracy(&m, &ctx.data.labels, ctx.thr)).abs();
    }
    Ok(total / cfg.repeats as f64)
}
