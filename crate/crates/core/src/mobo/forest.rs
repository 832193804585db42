//! Random-forest regression surrogate.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_RECORDS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `ceil(d / 3)`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            mtry: None,
            min_leaf: 5,
        }
    }
}

#[derive(Clone, Debug)]
enum RNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

#[derive(Clone, Debug)]
struct RTree {
    nodes: Vec<RNode>,
}

impl RTree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                RNode::Leaf(v) => return v,
                RNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }
}

/// Bootstrap ensemble of variance-reduction regression trees. Predictive
/// uncertainty is the spread of the per-tree predictions.
#[derive(Clone, Debug)]
pub struct RandomForest {
    trees: Vec<RTree>,
    d: usize,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    mtry: usize,
    min_leaf: usize,
    buf: Vec<(f64, usize)>,
}

impl Builder<'_> {
    fn build(&mut self, rows: Vec<usize>, rng: &mut ChaCha8Rng) -> RTree {
        let mut nodes = vec![RNode::Leaf(0.0)];
        let mut stack = vec![(0usize, rows)];
        while let Some((slot, rows)) = stack.pop() {
            let mean = rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64;
            let split = if rows.len() >= 2 * self.min_leaf {
                self.best_split(&rows, rng)
            } else {
                None
            };
            let Some((feature, threshold)) = split else {
                nodes[slot] = RNode::Leaf(mean);
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| self.x[i][feature] < threshold);
            let left = nodes.len();
            nodes.push(RNode::Leaf(0.0));
            nodes.push(RNode::Leaf(0.0));
            nodes[slot] = RNode::Split {
                feature,
                threshold,
                left,
                right: left + 1,
            };
            stack.push((left + 1, r));
            stack.push((left, l));
        }
        RTree { nodes }
    }

    fn best_split(&mut self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let d = self.x[0].len();
        let n = rows.len();
        let total: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let first = self.y[rows[0]];
        if rows.iter().all(|&r| self.y[r] == first) {
            return None;
        }
        let parent = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for f in index::sample(rng, d, self.mtry.min(d)) {
            self.buf.clear();
            self.buf.extend(rows.iter().map(|&r| (self.x[r][f], r)));
            self.buf.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = 0.0;
            for s in 1..n {
                left += self.y[self.buf[s - 1].1];
                if s < self.min_leaf || n - s < self.min_leaf {
                    continue;
                }
                let (lo, hi) = (self.buf[s - 1].0, self.buf[s].0);
                if !(lo < hi) {
                    continue;
                }
                let right = total - left;
                let gain = left * left / s as f64 + right * right / (n - s) as f64 - parent;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                    let mid = 0.5 * (lo + hi);
                    best = Some((gain, f, if mid > lo { mid } else { hi }));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl RandomForest {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[f64],
        params: &ForestParams,
        seed: u64,
    ) -> Result<RandomForest> {
        if x.len() != y.len() {
            return Err(Error::arg("surrogate inputs and targets differ in length"));
        }
        if x.len() < MIN_RECORDS {
            return Err(Error::InsufficientData {
                needed: MIN_RECORDS,
                got: x.len(),
            });
        }
        let d = x[0].len();
        if d == 0 || x.iter().any(|r| r.len() != d) {
            return Err(Error::arg(
                "surrogate inputs must share a positive dimension",
            ));
        }
        if params.n_trees == 0 || params.min_leaf == 0 {
            return Err(Error::Configuration(
                "forest needs trees and min_leaf >= 1".into(),
            ));
        }
        let mtry = params.mtry.unwrap_or(d.div_ceil(3)).clamp(1, d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Builder {
            x,
            y,
            mtry,
            min_leaf: params.min_leaf,
            buf: Vec::with_capacity(x.len()),
        };
        let n = x.len();
        let trees = (0..params.n_trees)
            .map(|_| {
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                b.build(rows, &mut rng)
            })
            .collect();
        Ok(RandomForest { trees, d })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Mean and (population) standard deviation of the tree predictions.
    pub fn predict_mean_sd(&self, x: &[f64]) -> (f64, f64) {
        let t = self.trees.len() as f64;
        let (mut s, mut s2) = (0.0, 0.0);
        for tree in &self.trees {
            let v = tree.predict(x);
            s += v;
            s2 += v * v;
        }
        let mean = s / t;
        let var = (s2 / t - mean * mean).max(0.0);
        (mean, var.sqrt())
    }

    pub fn tree_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }
}
