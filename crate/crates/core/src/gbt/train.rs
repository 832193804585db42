//! Level-wise exact greedy tree growing on presorted columns.
//!
//! Split search only sees the rows sampled for the current tree; leaf values
//! are Newton steps over every training row that reaches the leaf.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{sigmoid, BoostedModel, BoosterParams, FeatureMap, Node, Tree};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// (feature, threshold, default_left, left child, right child)
type NodeSplit = (usize, f64, bool, u32, u32);

const NONE: u32 = u32::MAX;

/// Histogram scan is used while `open nodes * distinct values` stays within
/// this multiple of the sampled row count.
const HIST_FACTOR: usize = 4;

/// How split search iterates over candidate features. Both modes produce
/// bit-identical models: per-feature winners are reduced in feature order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TrainMode {
    #[default]
    Serial,
    FeatureParallel,
}

pub fn train(data: &Dataset, params: &BoosterParams) -> Result<BoostedModel> {
    train_with(data, params, TrainMode::Serial)
}

pub fn train_with(data: &Dataset, params: &BoosterParams, mode: TrainMode) -> Result<BoostedModel> {
    params.check_sane()?;
    let cols = data.numeric_columns()?;
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::Input("empty training set".into()));
    }
    let positives = data.labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateTarget(
            "training labels contain a single class".into(),
        ));
    }
    let rate = positives as f64 / n as f64;
    let base_score = (rate / (1.0 - rate)).ln();
    let p = cols.len();
    let feature_map = FeatureMap::from_dataset(data);

    let presorted: Vec<Presorted> = cols.iter().map(|c| Presorted::new(c)).collect();
    let y: Vec<f64> = data.labels.iter().map(|&v| f64::from(v)).collect();
    let mut margin = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut trees = Vec::with_capacity(params.max_rounds as usize);
    let mut usage = Vec::with_capacity(params.max_rounds as usize);
    for _ in 0..params.max_rounds {
        for i in 0..n {
            let pr = sigmoid(margin[i]);
            grad[i] = pr - y[i];
            hess[i] = (pr * (1.0 - pr)).max(1e-16);
        }
        let in_sample = if params.subsample < 1.0 {
            let k = ((params.subsample * n as f64).round() as usize).clamp(1, n);
            let mut mask = vec![false; n];
            for i in index::sample(&mut rng, n, k) {
                mask[i] = true;
            }
            mask
        } else {
            vec![true; n]
        };
        let features = if p == 0 {
            Vec::new()
        } else {
            let k = ((params.colsample * p as f64).ceil() as usize).clamp(1, p);
            let mut f = index::sample(&mut rng, p, k).into_vec();
            f.sort_unstable();
            f
        };

        let grower = Grower {
            cols: &cols,
            presorted: &presorted,
            grad: &grad,
            hess: &hess,
            in_sample: &in_sample,
            params,
            mode,
        };
        let (tree, node_of) = grower.grow(&features);

        // Leaf values from all rows in each leaf.
        let mut gs = vec![0.0; tree.nodes.len()];
        let mut hs = vec![0.0; tree.nodes.len()];
        for i in 0..n {
            gs[node_of[i] as usize] += grad[i];
            hs[node_of[i] as usize] += hess[i];
        }
        let mut tree = tree;
        for (k, node) in tree.nodes.iter_mut().enumerate() {
            if let Node::Leaf { value } = node {
                *value = -params.eta * gs[k] / (hs[k] + params.lambda);
            }
        }
        for i in 0..n {
            if let Node::Leaf { value } = tree.nodes[node_of[i] as usize] {
                margin[i] += value;
            }
        }
        let mut u = vec![0u32; feature_map.n_sources()];
        for f in tree.split_features() {
            u[feature_map.sources[f]] += 1;
        }
        usage.push(u);
        trees.push(tree);
    }

    Ok(BoostedModel {
        base_score,
        trees,
        params: params.clone(),
        feature_map,
        feature_usage: usage,
    })
}

struct Presorted {
    /// Non-missing row indices sorted by value (ties by index).
    order: Vec<u32>,
    values: Vec<f64>,
    missing: Vec<u32>,
    /// Distinct non-missing values, ascending.
    uniq: Vec<f64>,
    /// Per row, index into `uniq` or `MISSING_CODE`.
    codes: Vec<u32>,
}

const MISSING_CODE: u32 = u32::MAX;

impl Presorted {
    fn new(col: &[f64]) -> Self {
        let mut order: Vec<u32> = (0..col.len() as u32)
            .filter(|&i| !col[i as usize].is_nan())
            .collect();
        order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
        let values = order.iter().map(|&i| col[i as usize]).collect();
        let missing = (0..col.len() as u32)
            .filter(|&i| col[i as usize].is_nan())
            .collect();
        let mut uniq: Vec<f64> = Vec::new();
        let mut codes = vec![MISSING_CODE; col.len()];
        for (&r, &v) in order.iter().zip(&values) {
            if uniq.last() != Some(&v) {
                uniq.push(v);
            }
            codes[r as usize] = (uniq.len() - 1) as u32;
        }
        Presorted {
            order,
            values,
            missing,
            uniq,
            codes,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    feature: usize,
    threshold: f64,
    default_left: bool,
    gain: f64,
    left: (f64, f64),
    right: (f64, f64),
}

#[derive(Clone, Copy)]
struct Open {
    node: u32,
    g: f64,
    h: f64,
}

struct Grower<'a> {
    cols: &'a [&'a [f64]],
    presorted: &'a [Presorted],
    grad: &'a [f64],
    hess: &'a [f64],
    in_sample: &'a [bool],
    params: &'a BoosterParams,
    mode: TrainMode,
}

impl Grower<'_> {
    /// Returns the tree (leaf values still zero) and every row's leaf index.
    fn grow(&self, features: &[usize]) -> (Tree, Vec<u32>) {
        let n = self.grad.len();
        let mut node_of = vec![0u32; n];
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let (mut g0, mut h0) = (0.0, 0.0);
        for i in (0..n).filter(|&i| self.in_sample[i]) {
            g0 += self.grad[i];
            h0 += self.hess[i];
        }
        let mut open = vec![Open {
            node: 0,
            g: g0,
            h: h0,
        }];

        for _depth in 0..self.params.max_depth {
            if open.is_empty() || features.is_empty() {
                break;
            }
            let mut slot_of_node = vec![NONE; nodes.len()];
            for (s, o) in open.iter().enumerate() {
                slot_of_node[o.node as usize] = s as u32;
            }
            let slot_row: Vec<u32> = (0..n)
                .map(|i| {
                    if self.in_sample[i] {
                        slot_of_node[node_of[i] as usize]
                    } else {
                        NONE
                    }
                })
                .collect();
            let sampled = slot_row.iter().filter(|&&s| s != NONE).count();

            let per_feature: Vec<Vec<Option<Candidate>>> = match self.mode {
                TrainMode::Serial => features
                    .iter()
                    .map(|&f| self.best_for_feature(f, &slot_row, &open, sampled))
                    .collect(),
                TrainMode::FeatureParallel => features
                    .par_iter()
                    .map(|&f| self.best_for_feature(f, &slot_row, &open, sampled))
                    .collect(),
            };
            let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
            for cands in per_feature {
                for (b, c) in best.iter_mut().zip(cands) {
                    if let Some(c) = c {
                        if b.is_none_or(|b| c.gain > b.gain) {
                            *b = Some(c);
                        }
                    }
                }
            }

            let mut next = Vec::new();
            let mut split_of_node: Vec<Option<NodeSplit>> = vec![None; nodes.len()];
            for (o, b) in open.iter().zip(best) {
                let Some(c) = b else { continue };
                let left = nodes.len() as u32;
                let right = left + 1;
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[o.node as usize] = Node::Split {
                    feature: c.feature as u32,
                    threshold: c.threshold,
                    default_left: c.default_left,
                    left,
                    right,
                };
                split_of_node[o.node as usize] =
                    Some((c.feature, c.threshold, c.default_left, left, right));
                next.push(Open {
                    node: left,
                    g: c.left.0,
                    h: c.left.1,
                });
                next.push(Open {
                    node: right,
                    g: c.right.0,
                    h: c.right.1,
                });
            }
            if next.is_empty() {
                break;
            }
            for (i, nd) in node_of.iter_mut().enumerate() {
                if let Some((f, thr, dl, l, r)) = split_of_node[*nd as usize] {
                    let x = self.cols[f][i];
                    let go_left = if x.is_nan() { dl } else { x < thr };
                    *nd = if go_left { l } else { r };
                }
            }
            open = next;
        }
        (Tree { nodes }, node_of)
    }

    /// Best split per open node for feature `f`. Low-cardinality columns are
    /// scanned through per-node histograms with one bin per distinct value,
    /// which visits the same candidate thresholds as the sorted scan.
    fn best_for_feature(
        &self,
        f: usize,
        slot_row: &[u32],
        open: &[Open],
        sampled: usize,
    ) -> Vec<Option<Candidate>> {
        if open.len() * self.presorted[f].uniq.len() <= HIST_FACTOR * sampled {
            self.best_by_histogram(f, slot_row, open)
        } else {
            self.best_by_scan(f, slot_row, open)
        }
    }

    fn best_by_histogram(
        &self,
        f: usize,
        slot_row: &[u32],
        open: &[Open],
    ) -> Vec<Option<Candidate>> {
        let k = open.len();
        let ps = &self.presorted[f];
        let v = ps.uniq.len();
        let mut hg = vec![0.0; k * v];
        let mut hh = vec![0.0; k * v];
        let mut gm = vec![0.0; k];
        let mut hm = vec![0.0; k];
        for (i, (&s, &c)) in slot_row.iter().zip(&ps.codes).enumerate() {
            if s == NONE {
                continue;
            }
            let s = s as usize;
            if c == MISSING_CODE {
                gm[s] += self.grad[i];
                hm[s] += self.hess[i];
            } else {
                let b = s * v + c as usize;
                hg[b] += self.grad[i];
                hh[b] += self.hess[i];
            }
        }
        let mut best: Vec<Option<Candidate>> = vec![None; k];
        for s in 0..k {
            let mut split = SplitScan::new(self.params, open[s], gm[s], hm[s]);
            for b in 0..v {
                let h = hh[s * v + b];
                if h > 0.0 {
                    split.visit(f, ps.uniq[b], hg[s * v + b], h, &mut best[s]);
                }
            }
        }
        best
    }

    fn best_by_scan(&self, f: usize, slot_row: &[u32], open: &[Open]) -> Vec<Option<Candidate>> {
        let k = open.len();
        let ps = &self.presorted[f];
        let mut gm = vec![0.0; k];
        let mut hm = vec![0.0; k];
        for &r in &ps.missing {
            let s = slot_row[r as usize];
            if s != NONE {
                gm[s as usize] += self.grad[r as usize];
                hm[s as usize] += self.hess[r as usize];
            }
        }
        let mut scans: Vec<SplitScan> = (0..k)
            .map(|s| SplitScan::new(self.params, open[s], gm[s], hm[s]))
            .collect();
        let mut best: Vec<Option<Candidate>> = vec![None; k];
        for (&r, &v) in ps.order.iter().zip(&ps.values) {
            let s = slot_row[r as usize];
            if s == NONE {
                continue;
            }
            let s = s as usize;
            scans[s].visit(
                f,
                v,
                self.grad[r as usize],
                self.hess[r as usize],
                &mut best[s],
            );
        }
        best
    }
}

/// Left-to-right sweep over one node's rows in value order.
struct SplitScan {
    lambda: f64,
    gamma: f64,
    mcw: f64,
    g: f64,
    h: f64,
    parent: f64,
    gm: f64,
    hm: f64,
    gl: f64,
    hl: f64,
    last: f64,
}

impl SplitScan {
    fn new(params: &BoosterParams, open: Open, gm: f64, hm: f64) -> Self {
        let lambda = params.lambda;
        SplitScan {
            lambda,
            gamma: params.gamma,
            mcw: params.min_child_weight,
            g: open.g,
            h: open.h,
            parent: open.g * open.g / (open.h + lambda),
            gm,
            hm,
            gl: 0.0,
            hl: 0.0,
            last: f64::NAN,
        }
    }

    /// Consider the boundary just below `v`, then absorb (g, h) at `v`.
    #[inline]
    fn visit(&mut self, feature: usize, v: f64, g: f64, h: f64, best: &mut Option<Candidate>) {
        if v > self.last {
            let mut mid = self.last + 0.5 * (v - self.last);
            if mid <= self.last {
                mid = v;
            }
            let options: &[bool] = if self.hm > 0.0 {
                &[false, true]
            } else {
                &[false]
            };
            for &default_left in options {
                let (glx, hlx) = if default_left {
                    (self.gl + self.gm, self.hl + self.hm)
                } else {
                    (self.gl, self.hl)
                };
                let (grx, hrx) = (self.g - glx, self.h - hlx);
                if hlx < self.mcw || hrx < self.mcw {
                    continue;
                }
                let gain = 0.5
                    * (glx * glx / (hlx + self.lambda) + grx * grx / (hrx + self.lambda)
                        - self.parent)
                    - self.gamma;
                if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                    *best = Some(Candidate {
                        feature,
                        threshold: mid,
                        default_left,
                        gain,
                        left: (glx, hlx),
                        right: (grx, hrx),
                    });
                }
            }
        }
        self.gl += g;
        self.hl += h;
        self.last = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbt::sigmoid;
    use rand::Rng;

    fn separable(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut a, mut b, mut y) = (vec![], vec![], vec![]);
        for _ in 0..n {
            let x1: f64 = rng.random_range(-1.0..1.0);
            let x2: f64 = rng.random_range(-1.0..1.0);
            a.push(x1);
            b.push(x2);
            y.push(u8::from(x1 + 0.5 * x2 > 0.1));
        }
        Dataset::from_numeric(&["x1", "x2"], vec![a, b], y, None).unwrap()
    }

    fn mmce(model: &BoostedModel, d: &Dataset, n: usize) -> f64 {
        let p = model.predict_proba(d, n).unwrap();
        p.iter()
            .zip(&d.labels)
            .filter(|(p, &y)| u8::from(**p >= 0.5) != y)
            .count() as f64
            / d.n_rows() as f64
    }

    #[test]
    fn separable_fits() {
        let d = separable(200, 11);
        let params = BoosterParams {
            eta: 0.1,
            max_depth: 3,
            max_rounds: 50,
            min_child_weight: 0.0625,
            ..Default::default()
        };
        let m = train(&d, &params).unwrap();
        assert_eq!(m.rounds_trained(), 50);
        assert!(mmce(&m, &d, 50) < 0.05);
    }

    #[test]
    fn constant_features_predict_base_rate() {
        let n = 50;
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 5 < 2)).collect();
        let d = Dataset::from_numeric(&["c1", "c2"], vec![vec![3.0; n], vec![-1.0; n]], y, None)
            .unwrap();
        for params in [
            BoosterParams::default(),
            BoosterParams {
                subsample: 0.5,
                colsample: 0.5,
                eta: 0.3,
                lambda: 1.0 / 1024.0,
                seed: 5,
                ..Default::default()
            },
        ] {
            let m = train(&d, &params).unwrap();
            for p in m.predict_proba(&d, m.rounds_trained()).unwrap() {
                assert!((p - 0.4).abs() < 1e-9, "{p}");
            }
            assert!(m.features_used(m.rounds_trained()).unwrap().is_empty());
        }
    }

    #[test]
    fn single_class_rejected() {
        let d =
            Dataset::from_numeric(&["x"], vec![vec![1.0, 2.0, 3.0]], vec![1, 1, 1], None).unwrap();
        assert!(matches!(
            train(&d, &BoosterParams::default()),
            Err(Error::DegenerateTarget(_))
        ));
    }

    #[test]
    fn deterministic_and_parallel_identical() {
        let d = separable(300, 2);
        let params = BoosterParams {
            subsample: 0.7,
            colsample: 0.5,
            max_rounds: 20,
            seed: 7,
            ..Default::default()
        };
        let a = train(&d, &params).unwrap();
        let b = train(&d, &params).unwrap();
        let c = train_with(&d, &params, TrainMode::FeatureParallel).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.to_json().unwrap(), c.to_json().unwrap());
    }

    #[test]
    fn missing_values_learn_direction() {
        // Missing x behaves like large x: label 1.
        let n = 200;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            if i % 4 == 0 {
                x.push(f64::NAN);
                y.push(1);
            } else {
                let v = i as f64 / n as f64;
                x.push(v);
                y.push(u8::from(v > 0.5));
            }
        }
        let d = Dataset::from_numeric(&["x"], vec![x], y, None).unwrap();
        let params = BoosterParams {
            max_depth: 1,
            max_rounds: 30,
            eta: 0.3,
            ..Default::default()
        };
        let m = train(&d, &params).unwrap();
        let p_missing = sigmoid(m.margin_row(&[f64::NAN], 30));
        let p_low = sigmoid(m.margin_row(&[0.1], 30));
        assert!(p_missing > 0.8 && p_low < 0.2, "{p_missing} {p_low}");
    }

    #[test]
    fn training_loss_non_increasing() {
        let d = separable(150, 4);
        let params = BoosterParams {
            gamma: 0.0,
            max_rounds: 40,
            subsample: 0.8,
            seed: 3,
            ..Default::default()
        };
        let m = train(&d, &params).unwrap();
        let staged = m.staged_margins(&d).unwrap();
        let loss = |ms: &[f64]| -> f64 {
            ms.iter()
                .zip(&d.labels)
                .map(|(&m, &y)| {
                    let p = sigmoid(m);
                    if y == 1 {
                        -p.ln()
                    } else {
                        -(1.0 - p).ln()
                    }
                })
                .sum::<f64>()
        };
        let mut prev = f64::INFINITY;
        for n in 1..=40 {
            let l = loss(staged.at(n).unwrap());
            assert!(l <= prev + 1e-12, "round {n}: {l} > {prev}");
            prev = l;
        }
    }
}
