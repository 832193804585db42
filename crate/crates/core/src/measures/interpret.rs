//! Accumulated local effects and the interpretability measures built on them.
//!
//! For boosted models the predictor is the truncated ensemble on the log-odds
//! scale, where a depth-1 ensemble is exactly additive.

use super::EvalContext;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gbt::BoostedModel;

pub trait Predictor: Sync {
    fn predict_row(&self, row: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for F {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self(row)
    }
}

/// Log-odds of the first `n` trees.
pub struct TruncatedModel<'a> {
    pub model: &'a BoostedModel,
    pub n: usize,
}

impl Predictor for TruncatedModel<'_> {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self.model.margin_row(row, self.n)
    }
}

/// Piecewise-linear centered ALE curve: `values[k]` is the effect at `edges[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AleCurve {
    pub feature: usize,
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
}

impl AleCurve {
    /// Bin `k` (1-based) covers `(edges[k-1], edges[k]]`; the minimum falls in bin 1.
    fn bin_of(edges: &[f64], x: f64) -> usize {
        edges.partition_point(|&e| e < x).clamp(1, edges.len() - 1)
    }

    /// Linear interpolation between edges; clamped outside; 0 for missing.
    pub fn eval(&self, x: f64) -> f64 {
        if x.is_nan() {
            return 0.0;
        }
        let last = self.edges.len() - 1;
        if x <= self.edges[0] {
            return self.values[0];
        }
        if x >= self.edges[last] {
            return self.values[last];
        }
        let k = Self::bin_of(&self.edges, x);
        let (x0, x1) = (self.edges[k - 1], self.edges[k]);
        let t = (x - x0) / (x1 - x0);
        self.values[k - 1] + t * (self.values[k] - self.values[k - 1])
    }
}

fn rows_of(data: &Dataset) -> Vec<Vec<f64>> {
    (0..data.n_rows()).map(|i| data.row(i)).collect()
}

fn numeric(data: &Dataset, feature: usize) -> Result<&[f64]> {
    data.features
        .get(feature)
        .ok_or_else(|| Error::arg(format!("feature index {feature} out of range")))?
        .as_numeric()
        .ok_or_else(|| Error::arg(format!("feature {feature} is not numeric")))
}

fn ale_on_rows(
    pred: &dyn Predictor,
    rows: &[Vec<f64>],
    col: &[f64],
    feature: usize,
    bins: usize,
) -> Result<AleCurve> {
    if bins < 2 {
        return Err(Error::arg("ALE needs at least 2 bins"));
    }
    let present: Vec<usize> = (0..col.len()).filter(|&i| !col[i].is_nan()).collect();
    let mut sorted: Vec<f64> = present.iter().map(|&i| col[i]).collect();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() || sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::DegenerateFeature(format!(
            "feature {feature} is constant"
        )));
    }
    let m = sorted.len();
    let mut edges: Vec<f64> = (0..=bins)
        .map(|k| sorted[(k * (m - 1) + bins / 2) / bins])
        .collect();
    edges.dedup();
    let nb = edges.len() - 1;

    let mut effect = vec![0.0; nb + 1];
    let mut counts = vec![0usize; nb + 1];
    let mut scratch = Vec::new();
    for &i in &present {
        let k = AleCurve::bin_of(&edges, col[i]);
        scratch.clone_from(&rows[i]);
        scratch[feature] = edges[k];
        let hi = pred.predict_row(&scratch);
        scratch[feature] = edges[k - 1];
        let lo = pred.predict_row(&scratch);
        effect[k] += hi - lo;
        counts[k] += 1;
    }
    let mut values = vec![0.0; nb + 1];
    for k in 1..=nb {
        let local = if counts[k] > 0 {
            effect[k] / counts[k] as f64
        } else {
            0.0
        };
        values[k] = values[k - 1] + local;
    }
    let mut curve = AleCurve {
        feature,
        edges,
        values,
        counts: counts[1..].to_vec(),
    };
    let center = present.iter().map(|&i| curve.eval(col[i])).sum::<f64>() / present.len() as f64;
    for v in curve.values.iter_mut() {
        *v -= center;
    }
    Ok(curve)
}

/// First-order ALE of `feature` under an arbitrary predictor.
pub fn ale_curve_with(
    pred: &dyn Predictor,
    data: &Dataset,
    feature: usize,
    bins: usize,
) -> Result<AleCurve> {
    let col = numeric(data, feature)?;
    ale_on_rows(pred, &rows_of(data), col, feature, bins)
}

pub fn ale_curve(
    model: &BoostedModel,
    data: &Dataset,
    feature: usize,
    n: usize,
    bins: usize,
) -> Result<AleCurve> {
    if n == 0 || n > model.rounds_trained() {
        return Err(Error::arg(format!(
            "rounds {n} outside 1..={}",
            model.rounds_trained()
        )));
    }
    ale_curve_with(&TruncatedModel { model, n }, data, feature, bins)
}

/// ALE curves for every numeric feature; `None` for constant or categorical ones.
pub fn ale_curves(
    pred: &dyn Predictor,
    data: &Dataset,
    bins: usize,
) -> Result<Vec<Option<AleCurve>>> {
    let rows = rows_of(data);
    let mut out = Vec::with_capacity(data.n_features());
    for (j, f) in data.features.iter().enumerate() {
        match f.as_numeric() {
            None => out.push(None),
            Some(col) => match ale_on_rows(pred, &rows, col, j, bins) {
                Ok(c) => out.push(Some(c)),
                Err(Error::DegenerateFeature(_)) => out.push(None),
                Err(e) => return Err(e),
            },
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    x: f64,
    y: f64,
    xx: f64,
    xy: f64,
    yy: f64,
}

impl Moments {
    fn add(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.x += x;
        self.y += y;
        self.xx += x * x;
        self.xy += x * y;
        self.yy += y * y;
    }

    fn minus(&self, o: &Moments) -> Moments {
        Moments {
            n: self.n - o.n,
            x: self.x - o.x,
            y: self.y - o.y,
            xx: self.xx - o.xx,
            xy: self.xy - o.xy,
            yy: self.yy - o.yy,
        }
    }

    /// Residual sum of squares of the least-squares line.
    fn sse(&self) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        let syy = self.yy - self.y * self.y / self.n;
        let sxx = self.xx - self.x * self.x / self.n;
        let sxy = self.xy - self.x * self.y / self.n;
        let r = if sxx > 1e-12 * (self.xx.abs() + 1e-300) {
            syy - sxy * sxy / sxx
        } else {
            syy
        };
        r.max(0.0)
    }
}

/// Smallest number of linear segments (breakpoints greedily chosen among the
/// curve's bin edges) whose least-squares fit explains at least `tol` of the
/// variance of the curve over `xs`.
pub fn segments_needed(curve: &AleCurve, xs: &[f64], tol: f64) -> usize {
    let nb = curve.edges.len() - 1;
    let mut per_bin = vec![Moments::default(); nb + 1];
    for &x in xs.iter().filter(|x| !x.is_nan()) {
        per_bin[AleCurve::bin_of(&curve.edges, x)].add(x, curve.eval(x));
    }
    let mut prefix = vec![Moments::default(); nb + 1];
    for k in 1..=nb {
        let mut m = prefix[k - 1];
        let b = per_bin[k];
        m.n += b.n;
        m.x += b.x;
        m.y += b.y;
        m.xx += b.xx;
        m.xy += b.xy;
        m.yy += b.yy;
        prefix[k] = m;
    }
    let total = prefix[nb];
    let sst = (total.yy - total.y * total.y / total.n).max(0.0);
    if sst <= 0.0 {
        return 0;
    }
    // Segment over bins a+1..=b uses prefix[b] - prefix[a].
    let sse_of = |cuts: &[usize]| -> f64 {
        let mut s = 0.0;
        let mut a = 0;
        for &b in cuts.iter().chain(std::iter::once(&nb)) {
            s += prefix[b].minus(&prefix[a]).sse();
            a = b;
        }
        s
    };
    let mut cuts: Vec<usize> = Vec::new();
    let mut sse = sse_of(&cuts);
    while 1.0 - sse / sst < tol && cuts.len() + 1 < nb {
        let mut best: Option<(f64, usize)> = None;
        for c in 1..nb {
            if cuts.contains(&c) {
                continue;
            }
            let mut trial = cuts.clone();
            trial.push(c);
            trial.sort_unstable();
            let s = sse_of(&trial);
            if best.is_none_or(|(bs, _)| s < bs) {
                best = Some((s, c));
            }
        }
        let Some((s, c)) = best else { break };
        cuts.push(c);
        cuts.sort_unstable();
        sse = s;
    }
    cuts.len() + 1
}

fn curve_variance(curve: &AleCurve, xs: &[f64]) -> f64 {
    let ys: Vec<f64> = xs
        .iter()
        .filter(|x| !x.is_nan())
        .map(|&x| curve.eval(x))
        .collect();
    if ys.is_empty() {
        return 0.0;
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64
}

/// Variance-weighted mean segment count over features. 0 when no curve varies.
pub fn mec_from_curves(curves: &[Option<AleCurve>], data: &Dataset, tol: f64) -> Result<f64> {
    if curves.iter().all(Option::is_none) {
        return Err(Error::NotApplicable(
            "main effect complexity needs a non-constant numeric feature".into(),
        ));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for c in curves.iter().flatten() {
        let xs = data.features[c.feature]
            .as_numeric()
            .expect("curve on numeric feature");
        let var = curve_variance(c, xs);
        if var <= 1e-20 {
            continue;
        }
        num += var * segments_needed(c, xs, tol) as f64;
        den += var;
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

pub fn main_effect_complexity_with(
    pred: &dyn Predictor,
    data: &Dataset,
    bins: usize,
    tol: f64,
) -> Result<f64> {
    let curves = ale_curves(pred, data, bins)?;
    mec_from_curves(&curves, data, tol)
}

pub fn main_effect_complexity(
    model: &BoostedModel,
    data: &Dataset,
    n: usize,
    bins: usize,
    tol: f64,
) -> Result<f64> {
    main_effect_complexity_with(&TruncatedModel { model, n }, data, bins, tol)
}

/// Share of prediction variance left unexplained by the additive ALE surrogate,
/// clipped to `[0, 1]`. A constant predictor scores 0.
pub fn ias_from_curves(
    pred: &dyn Predictor,
    curves: &[Option<AleCurve>],
    data: &Dataset,
) -> Result<f64> {
    if data.n_rows() == 0 {
        return Err(Error::Input("interaction strength on empty data".into()));
    }
    let f: Vec<f64> = (0..data.n_rows())
        .map(|i| pred.predict_row(&data.row(i)))
        .collect();
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    let den: f64 = f.iter().map(|v| (v - mean).powi(2)).sum();
    if den <= 0.0 {
        return Ok(0.0);
    }
    let mut num = 0.0;
    for (i, fi) in f.iter().enumerate() {
        let mut g = mean;
        for c in curves.iter().flatten() {
            let xs = data.features[c.feature]
                .as_numeric()
                .expect("curve on numeric feature");
            g += c.eval(xs[i]);
        }
        num += (fi - g).powi(2);
    }
    let ias = num / den;
    if ias > 1.0 {
        log::debug!("interaction strength {ias} clipped to 1");
    }
    Ok(ias.clamp(0.0, 1.0))
}

pub fn interaction_strength_with(pred: &dyn Predictor, data: &Dataset, bins: usize) -> Result<f64> {
    if !data.features.iter().any(|f| f.is_numeric()) {
        return Err(Error::NotApplicable(
            "interaction strength needs numeric features".into(),
        ));
    }
    let curves = ale_curves(pred, data, bins)?;
    ias_from_curves(pred, &curves, data)
}

pub fn interaction_strength(
    model: &BoostedModel,
    data: &Dataset,
    n: usize,
    bins: usize,
) -> Result<f64> {
    interaction_strength_with(&TruncatedModel { model, n }, data, bins)
}

/// Fraction of source features used by the first `n` trees.
pub fn sparsity(ctx: &EvalContext<'_>) -> Result<f64> {
    let p = ctx.model.feature_map.n_sources();
    if p == 0 {
        return Ok(0.0);
    }
    Ok(ctx.model.features_used(ctx.n)?.len() as f64 / p as f64)
}
