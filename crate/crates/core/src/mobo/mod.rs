//! parEgo machinery: weight boxes, augmented Tchebycheff scalarization, a
//! random-forest surrogate and expected-improvement proposals.

pub mod acquisition;
pub mod forest;
pub mod scalarize;
pub mod space;
pub mod weights;

pub use acquisition::{expected_improvement, propose, Proposal, DEFAULT_CANDIDATES};
pub use forest::{ForestParams, RandomForest};
pub use scalarize::{scalarize, scalarize_normalized, ScalarizerConfig, DEFAULT_RHO};
pub use space::{ConfigSpace, Dim, PipelineConfig, Scale};
pub use weights::{sample_weights, WeightBox};

use crate::error::{Error, Result};
use crate::pareto::Archive;

/// A forest fitted to the scalarized archive, with the incumbent it was
/// fitted around.
pub struct Surrogate {
    pub forest: RandomForest,
    /// Lowest scalarized value in the archive.
    pub best: f64,
    /// Unit-cube encoding of the record achieving `best`.
    pub incumbent: Vec<f64>,
}

/// Scalarize every archived record with weights `w` and fit the forest on
/// (encoded config, scalarized value).
pub fn fit_surrogate(
    archive: &Archive,
    w: &[f64],
    cfg: &ScalarizerConfig,
    space: &ConfigSpace,
    params: &ForestParams,
    seed: u64,
) -> Result<Surrogate> {
    if archive.len() < forest::MIN_RECORDS {
        return Err(Error::InsufficientData {
            needed: forest::MIN_RECORDS,
            got: archive.len(),
        });
    }
    let mut x = Vec::with_capacity(archive.len());
    let mut y = Vec::with_capacity(archive.len());
    for r in archive.records() {
        x.push(space.encode(&r.config));
        y.push(scalarize(r.values(), w, cfg)?);
    }
    let forest = RandomForest::fit(&x, &y, params, seed)?;
    let mut best_i = 0;
    for i in 1..y.len() {
        if y[i] < y[best_i] {
            best_i = i;
        }
    }
    Ok(Surrogate {
        forest,
        best: y[best_i],
        incumbent: x.swap_remove(best_i),
    })
}
