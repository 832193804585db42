use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Augmented Tchebycheff scalarization over min-max normalized objectives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarizerConfig {
    pub rho: f64,
    /// Per-objective (min, max) used for normalization.
    pub bounds: Vec<(f64, f64)>,
    /// Objectives excluded from the scalarized target contribute 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<bool>,
}

pub const DEFAULT_RHO: f64 = 0.05;

impl ScalarizerConfig {
    pub fn new(rho: f64, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Configuration(format!(
                "rho must be positive, got {rho}"
            )));
        }
        if bounds.iter().any(|&(lo, hi)| !(lo <= hi)) {
            return Err(Error::arg("normalization bounds need min <= max"));
        }
        Ok(ScalarizerConfig {
            rho,
            bounds,
            excluded: Vec::new(),
        })
    }

    /// Clipped min-max normalization; a degenerate range maps to 0.
    pub fn normalize(&self, i: usize, y: f64) -> f64 {
        if self.excluded.get(i).copied().unwrap_or(false) {
            return 0.0;
        }
        let (lo, hi) = self.bounds[i];
        if hi > lo {
            ((y - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// `max_i(w_i f_i) + rho * sum_i(w_i f_i)` on normalized objectives.
pub fn scalarize(y: &[f64], w: &[f64], cfg: &ScalarizerConfig) -> Result<f64> {
    if y.len() != w.len() || y.len() != cfg.bounds.len() {
        return Err(Error::arg(format!(
            "scalarize lengths disagree: y {}, w {}, bounds {}",
            y.len(),
            w.len(),
            cfg.bounds.len()
        )));
    }
    Ok(scalarize_normalized(
        &y.iter()
            .enumerate()
            .map(|(i, &v)| cfg.normalize(i, v))
            .collect::<Vec<_>>(),
        w,
        cfg.rho,
    ))
}

/// The norm on already-normalized values.
pub fn scalarize_normalized(f: &[f64], w: &[f64], rho: f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for (&fi, &wi) in f.iter().zip(w) {
        let t = wi * fi;
        max = max.max(t);
        sum += t;
    }
    max + rho * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_value() {
        let cfg = ScalarizerConfig::new(0.05, vec![(0.0, 1.0); 2]).unwrap();
        let s = scalarize(&[0.4, 0.2], &[0.5, 0.5], &cfg).unwrap();
        assert!((s - 0.215).abs() < 1e-15);
    }

    #[test]
    fn minimum_is_zero_and_boundary_weight() {
        let cfg = ScalarizerConfig::new(0.05, vec![(0.1, 0.5), (2.0, 4.0)]).unwrap();
        assert_eq!(scalarize(&[0.1, 2.0], &[0.3, 0.7], &cfg).unwrap(), 0.0);
        let s = scalarize(&[0.3, 3.0], &[1.0, 0.0], &cfg).unwrap();
        assert!((s - 1.05 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_range_and_rho() {
        let cfg = ScalarizerConfig::new(0.05, vec![(1.0, 1.0), (0.0, 2.0)]).unwrap();
        assert_eq!(cfg.normalize(0, 5.0), 0.0);
        assert_eq!(cfg.normalize(1, 3.0), 1.0);
        assert!(ScalarizerConfig::new(0.0, vec![]).is_err());
    }
}
