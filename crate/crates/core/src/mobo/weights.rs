use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Consecutive rejections before a box is declared infeasible in practice.
pub const MAX_REJECTIONS: usize = 10_000;

const PIN_TOL: f64 = 1e-12;

/// Per-objective bounds on scalarization weights. Weights are always drawn
/// on the probability simplex; the box restricts which trade-offs are
/// explored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct WeightBox {
    bounds: Vec<(f64, f64)>,
}

impl WeightBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InfeasibleBox("weight box has no objectives".into()));
        }
        for (i, &(l, u)) in bounds.iter().enumerate() {
            if !(0.0 <= l && l <= u && u <= 1.0) {
                return Err(Error::InfeasibleBox(format!(
                    "bounds for w{} must satisfy 0 <= l <= u <= 1, got [{l}, {u}]",
                    i + 1
                )));
            }
        }
        let lo: f64 = bounds.iter().map(|b| b.0).sum();
        let hi: f64 = bounds.iter().map(|b| b.1).sum();
        if lo > 1.0 + PIN_TOL || hi < 1.0 - PIN_TOL {
            return Err(Error::InfeasibleBox(format!(
                "box misses the simplex: sum of lower bounds {lo}, sum of upper bounds {hi}"
            )));
        }
        Ok(WeightBox { bounds })
    }

    /// The unconstrained box `[0, 1]^k`.
    pub fn full(k: usize) -> Self {
        WeightBox {
            bounds: vec![(0.0, 1.0); k],
        }
    }

    /// Constrain only the first weight; the two-objective shorthand.
    pub fn first(k: usize, lo: f64, hi: f64) -> Result<Self> {
        let mut b = vec![(0.0, 1.0); k];
        if k > 0 {
            b[0] = (lo, hi);
        }
        WeightBox::new(b)
    }

    pub fn k(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.len() == self.k()
            && w.iter()
                .zip(&self.bounds)
                .all(|(&x, &(l, u))| l <= x && x <= u)
    }

    /// A uniform draw from the simplex restricted to the box.
    ///
    /// Coordinates with `l == u` are pinned and the remaining mass is spread
    /// uniformly (sorted-uniforms construction) over the free coordinates,
    /// rejecting draws that leave the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let k = self.k();
        let pinned: f64 = self
            .bounds
            .iter()
            .filter(|b| b.1 - b.0 <= 0.0)
            .map(|b| b.0)
            .sum();
        let free: Vec<usize> = (0..k)
            .filter(|&i| self.bounds[i].1 > self.bounds[i].0)
            .collect();
        let rest = 1.0 - pinned;
        let mut w: Vec<f64> = self.bounds.iter().map(|b| b.0).collect();
        if free.is_empty() {
            if rest.abs() > PIN_TOL {
                return Err(Error::InfeasibleBox(
                    "pinned weights do not sum to 1".into(),
                ));
            }
            return Ok(w);
        }
        if rest <= PIN_TOL {
            // Everything free must be zero.
            if free.iter().any(|&i| self.bounds[i].0 > 0.0) {
                return Err(Error::InfeasibleBox("no mass left for free weights".into()));
            }
            for &i in &free {
                w[i] = 0.0;
            }
            return Ok(w);
        }
        let mut cuts = vec![0.0; free.len() + 1];
        for _ in 0..MAX_REJECTIONS {
            cuts[0] = 0.0;
            for c in cuts.iter_mut().skip(1) {
                *c = rng.random::<f64>();
            }
            let last = cuts.len() - 1;
            cuts[last] = 1.0;
            cuts[1..last].sort_by(f64::total_cmp);
            let mut ok = true;
            for (slot, &i) in free.iter().enumerate() {
                let v = rest * (cuts[slot + 1] - cuts[slot]);
                let (l, u) = self.bounds[i];
                if v < l || v > u {
                    ok = false;
                    break;
                }
                w[i] = v;
            }
            if ok {
                return Ok(w);
            }
        }
        Err(Error::InfeasibleBox(format!(
            "{MAX_REJECTIONS} consecutive weight draws fell outside the box"
        )))
    }
}

impl TryFrom<Vec<[f64; 2]>> for WeightBox {
    type Error = Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        WeightBox::new(v.into_iter().map(|[l, u]| (l, u)).collect())
    }
}

impl From<WeightBox> for Vec<[f64; 2]> {
    fn from(b: WeightBox) -> Self {
        b.bounds.into_iter().map(|(l, u)| [l, u]).collect()
    }
}

pub fn sample_weights<R: Rng + ?Sized>(bx: &WeightBox, rng: &mut R) -> Result<Vec<f64>> {
    bx.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn box_respected() {
        let b = WeightBox::first(2, 0.1, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let w = b.sample(&mut rng).unwrap();
            assert!(b.contains(&w));
            assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn degenerate_box_pins() {
        let b = WeightBox::first(2, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(b.sample(&mut rng).unwrap(), vec![1.0, 0.0]);
        }
    }

    #[test]
    fn infeasible_boxes() {
        assert!(matches!(
            WeightBox::new(vec![(0.6, 1.0), (0.6, 1.0)]),
            Err(Error::InfeasibleBox(_))
        ));
        assert!(WeightBox::new(vec![(0.0, 0.3), (0.0, 0.3)]).is_err());
        assert!(WeightBox::new(vec![(0.5, 0.2), (0.0, 1.0)]).is_err());
        // Feasible but vanishingly thin for three objectives.
        let thin =
            WeightBox::new(vec![(0.5, 0.5 + 1e-9), (0.25, 0.25 + 1e-9), (0.0, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            thin.sample(&mut rng),
            Err(Error::InfeasibleBox(_))
        ));
    }

    #[test]
    fn serde_shape() {
        let b: WeightBox = serde_json::from_str("[[0.1,0.9],[0,1]]").unwrap();
        assert_eq!(b.bounds()[0], (0.1, 0.9));
        assert!(serde_json::from_str::<WeightBox>("[[0.9,0.1]]").is_err());
        assert_eq!(serde_json::to_string(&b).unwrap(), "[[0.1,0.9],[0.0,1.0]]");
    }
}
