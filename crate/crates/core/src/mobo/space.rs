use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbt::{bounds, BoosterParams};

/// One candidate pipeline: booster hyperparameters, boosting rounds and the
/// decision threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub booster: BoosterParams,
    pub nrounds: u32,
    pub thr: f64,
}

impl PipelineConfig {
    /// Bounds check for configurations that get trained. Sub-evaluation
    /// records legitimately carry smaller `nrounds`.
    pub fn validate(&self) -> Result<()> {
        self.booster.check_bounds()?;
        if self.nrounds != self.booster.max_rounds {
            return Err(Error::arg("nrounds must equal booster.max_rounds"));
        }
        if !(0.0..=1.0).contains(&self.thr) {
            return Err(Error::arg(format!("threshold {} outside [0, 1]", self.thr)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dim {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub scale: Scale,
    pub integer: bool,
}

impl Dim {
    fn new(name: &str, (lo, hi): (f64, f64), scale: Scale, integer: bool) -> Dim {
        Dim {
            name: name.to_string(),
            lo,
            hi,
            scale,
            integer,
        }
    }

    fn scaled(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => v,
            Scale::Log => v.ln(),
        }
    }

    /// Position in `[0, 1]` of the scaled range. Not clipped, so sub-records
    /// with truncated rounds may fall below 0.
    pub fn to_unit(&self, v: f64) -> f64 {
        let (a, b) = (self.scaled(self.lo), self.scaled(self.hi));
        (self.scaled(v) - a) / (b - a)
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u == 0.0 {
            return self.lo;
        }
        if u == 1.0 {
            return self.hi;
        }
        let (a, b) = (self.scaled(self.lo), self.scaled(self.hi));
        let s = a + u * (b - a);
        let v = match self.scale {
            Scale::Linear => s,
            Scale::Log => s.exp(),
        };
        let v = if self.integer { v.round() } else { v };
        v.clamp(self.lo, self.hi)
    }
}

/// Search space over booster parameters, rounds and threshold. Points are
/// handled as unit-cube coordinates of the (log-)scaled dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSpace {
    pub dims: Vec<Dim>,
}

const ETA: usize = 0;
const MAX_DEPTH: usize = 1;
const MIN_CHILD_WEIGHT: usize = 2;
const SUBSAMPLE: usize = 3;
const COLSAMPLE: usize = 4;
const LAMBDA: usize = 5;
const GAMMA: usize = 6;
const NROUNDS: usize = 7;
const THR: usize = 8;

impl Default for ConfigSpace {
    fn default() -> Self {
        let int = |(lo, hi): (u32, u32)| (f64::from(lo), f64::from(hi));
        ConfigSpace {
            dims: vec![
                Dim::new("eta", bounds::ETA, Scale::Linear, false),
                Dim::new("max_depth", int(bounds::MAX_DEPTH), Scale::Linear, true),
                Dim::new(
                    "min_child_weight",
                    bounds::MIN_CHILD_WEIGHT,
                    Scale::Log,
                    false,
                ),
                Dim::new("subsample", bounds::SUBSAMPLE, Scale::Linear, false),
                Dim::new("colsample", bounds::COLSAMPLE, Scale::Linear, false),
                Dim::new("lambda", bounds::LAMBDA, Scale::Log, false),
                Dim::new("gamma", bounds::GAMMA, Scale::Log, false),
                Dim::new("nrounds", int(bounds::ROUNDS), Scale::Linear, true),
                Dim::new("thr", (0.0, 1.0), Scale::Linear, false),
            ],
        }
    }
}

impl ConfigSpace {
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    /// Unit-cube coordinates of a configuration (log dimensions are
    /// log-transformed, integers treated as reals).
    pub fn encode(&self, c: &PipelineConfig) -> Vec<f64> {
        let b = &c.booster;
        let raw = [
            b.eta,
            f64::from(b.max_depth),
            b.min_child_weight,
            b.subsample,
            b.colsample,
            b.lambda,
            b.gamma,
            f64::from(c.nrounds),
            c.thr,
        ];
        raw.iter()
            .zip(&self.dims)
            .map(|(&v, d)| d.to_unit(v))
            .collect()
    }

    /// Configuration at unit-cube point `u` (clipped). `seed` becomes the
    /// booster seed.
    pub fn decode(&self, u: &[f64], seed: u64) -> PipelineConfig {
        let v = |i: usize| self.dims[i].from_unit(u[i]);
        let nrounds = v(NROUNDS) as u32;
        PipelineConfig {
            booster: BoosterParams {
                eta: v(ETA),
                max_depth: v(MAX_DEPTH) as u32,
                min_child_weight: v(MIN_CHILD_WEIGHT),
                subsample: v(SUBSAMPLE),
                colsample: v(COLSAMPLE),
                lambda: v(LAMBDA),
                gamma: v(GAMMA),
                max_rounds: nrounds,
                seed,
            },
            nrounds,
            thr: v(THR),
        }
    }

    pub fn sample_unit<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim()).map(|_| rng.random::<f64>()).collect()
    }
}
