//! Gradient boosted decision trees for binary log loss.
//!
//! Models are additive: `margin = base_score + sum of tree outputs`. Because
//! every tree is kept, the model can be evaluated at any prefix of its rounds,
//! which is what makes sub-evaluations cheap.

mod train;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub use train::{train, train_with, TrainMode};

/// Booster hyperparameters.
///
/// [`BoosterParams::check_bounds`] enforces the tuning ranges; [`train`]
/// itself only needs sane values, so tests may use e.g. `gamma = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoosterParams {
    pub eta: f64,
    pub max_depth: u32,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub max_rounds: u32,
    pub seed: u64,
}

impl Default for BoosterParams {
    fn default() -> Self {
        BoosterParams {
            eta: 0.1,
            max_depth: 6,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample: 1.0,
            lambda: 1.0,
            gamma: 2f64.powi(-7),
            max_rounds: 100,
            seed: 0,
        }
    }
}

pub mod bounds {
    pub const ETA: (f64, f64) = (0.01, 0.3);
    pub const MAX_DEPTH: (u32, u32) = (1, 12);
    pub const MIN_CHILD_WEIGHT: (f64, f64) = (0.0625, 16.0);
    pub const SUBSAMPLE: (f64, f64) = (0.5, 1.0);
    pub const COLSAMPLE: (f64, f64) = (0.5, 1.0);
    pub const LAMBDA: (f64, f64) = (1.0 / 1024.0, 1024.0);
    pub const GAMMA: (f64, f64) = (1.0 / 128.0, 64.0);
    pub const ROUNDS: (u32, u32) = (10, 500);
}

impl BoosterParams {
    /// Values `train` can work with at all.
    pub fn check_sane(&self) -> Result<()> {
        let ok = self.eta > 0.0
            && self.eta.is_finite()
            && self.max_depth >= 1
            && self.min_child_weight >= 0.0
            && self.subsample > 0.0
            && self.subsample <= 1.0
            && self.colsample > 0.0
            && self.colsample <= 1.0
            && self.lambda >= 0.0
            && self.lambda.is_finite()
            && self.gamma >= 0.0
            && self.gamma.is_finite()
            && self.max_rounds >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::arg(format!("invalid booster parameters {self:?}")))
        }
    }

    /// Every field within the tuning ranges.
    pub fn check_bounds(&self) -> Result<()> {
        use bounds::*;
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        let ok = inside(self.eta, ETA)
            && (MAX_DEPTH.0..=MAX_DEPTH.1).contains(&self.max_depth)
            && inside(self.min_child_weight, MIN_CHILD_WEIGHT)
            && inside(self.subsample, SUBSAMPLE)
            && inside(self.colsample, COLSAMPLE)
            && inside(self.lambda, LAMBDA)
            && inside(self.gamma, GAMMA)
            && (ROUNDS.0..=ROUNDS.1).contains(&self.max_rounds);
        if ok {
            Ok(())
        } else {
            Err(Error::arg(format!(
                "booster parameters out of bounds: {self:?}"
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x < threshold` go left; missing values follow `default_left`.
    Split {
        feature: u32,
        threshold: f64,
        default_left: bool,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Tree {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    #[inline]
    pub fn predict_at(&self, cols: &[&[f64]], i: usize) -> f64 {
        self.predict_with(|f| cols[f][i])
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_with(|f| row[f])
    }

    #[inline]
    fn predict_with(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                } => {
                    let x = value(*feature as usize);
                    let go_left = if x.is_nan() {
                        *default_left
                    } else {
                        x < *threshold
                    };
                    idx = if go_left { *left } else { *right } as usize;
                }
            }
        }
    }

    /// Feature indices used by split nodes, in node order.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature as usize),
            Node::Leaf { .. } => None,
        })
    }
}

/// Model feature `i` is named `names[i]` and derives from source `sources[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub names: Vec<String>,
    pub sources: Vec<usize>,
    pub source_names: Vec<String>,
}

impl FeatureMap {
    pub fn from_dataset(data: &Dataset) -> FeatureMap {
        FeatureMap {
            names: data.features.iter().map(|f| f.name.clone()).collect(),
            sources: data.features.iter().map(|f| f.source).collect(),
            source_names: data.sources.clone(),
        }
    }

    pub fn n_sources(&self) -> usize {
        self.source_names.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub params: BoosterParams,
    pub feature_map: FeatureMap,
    /// `feature_usage[round][source]`: number of splits on that source feature.
    pub feature_usage: Vec<Vec<u32>>,
}

impl BoostedModel {
    pub fn rounds_trained(&self) -> usize {
        self.trees.len()
    }

    fn check_rounds(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.rounds_trained() {
            return Err(Error::arg(format!(
                "rounds {n} outside 1..={}",
                self.rounds_trained()
            )));
        }
        Ok(())
    }

    fn columns<'a>(&self, rows: &'a Dataset) -> Result<Vec<&'a [f64]>> {
        if rows.n_features() != self.feature_map.names.len() {
            return Err(Error::arg(format!(
                "dataset has {} features, model expects {}",
                rows.n_features(),
                self.feature_map.names.len()
            )));
        }
        rows.numeric_columns()
    }

    /// Log-odds using the first `n` trees.
    pub fn predict_margin(&self, rows: &Dataset, n: usize) -> Result<Vec<f64>> {
        self.check_rounds(n)?;
        let cols = self.columns(rows)?;
        let m = rows.n_rows();
        let mut out = vec![self.base_score; m];
        for tree in &self.trees[..n] {
            for (i, o) in out.iter_mut().enumerate() {
                *o += tree.predict_at(&cols, i);
            }
        }
        Ok(out)
    }

    pub fn predict_proba(&self, rows: &Dataset, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .predict_margin(rows, n)?
            .into_iter()
            .map(sigmoid)
            .collect())
    }

    /// Margin of a single row using the first `n` trees (no range check).
    pub fn margin_row(&self, row: &[f64], n: usize) -> f64 {
        self.trees[..n]
            .iter()
            .fold(self.base_score, |acc, t| acc + t.predict_row(row))
    }

    /// Cumulative margins after every round, computed in one pass.
    pub fn staged_margins(&self, rows: &Dataset) -> Result<StagedMargins> {
        let cols = self.columns(rows)?;
        let m = rows.n_rows();
        let rounds = self.rounds_trained();
        let mut data = Vec::with_capacity(rounds * m);
        let mut acc = vec![self.base_score; m];
        for tree in &self.trees {
            for (i, a) in acc.iter_mut().enumerate() {
                *a += tree.predict_at(&cols, i);
            }
            data.extend_from_slice(&acc);
        }
        Ok(StagedMargins {
            rounds,
            n_rows: m,
            base_score: self.base_score,
            data,
        })
    }

    /// Source features split on in the first `n` trees.
    pub fn features_used(&self, n: usize) -> Result<BTreeSet<usize>> {
        self.check_rounds(n)?;
        let mut used = BTreeSet::new();
        for usage in &self.feature_usage[..n] {
            used.extend(
                usage
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(s, _)| s),
            );
        }
        Ok(used)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<BoostedModel> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `rounds × n_rows` matrix of cumulative margins; row `n` (1-based) equals
/// `predict_margin(.., n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StagedMargins {
    rounds: usize,
    n_rows: usize,
    base_score: f64,
    data: Vec<f64>,
}

impl StagedMargins {
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    /// Margins after `n` rounds, `1 <= n <= rounds`.
    pub fn at(&self, n: usize) -> Result<&[f64]> {
        if n == 0 || n > self.rounds {
            return Err(Error::arg(format!(
                "rounds {n} outside 1..={}",
                self.rounds
            )));
        }
        Ok(&self.data[(n - 1) * self.n_rows..n * self.n_rows])
    }
}

#[inline]
pub fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}
