//! The objective catalog. Every measure is a minimized scalar of
//! (model, evaluation data, threshold, rounds).

pub mod classification;
pub mod interpret;
pub mod robustness;
pub mod timing;

use std::cell::{OnceCell, RefCell};
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gbt::{BoostedModel, StagedMargins};

pub use classification::{calibration_gap, fairness_gap, mmce, FairnessKind};
pub use interpret::{
    ale_curve, ale_curve_with, interaction_strength, main_effect_complexity, sparsity, AleCurve,
    Predictor, TruncatedModel,
};
pub use robustness::{perturb, robustness_perturbation};
pub use timing::inference_time;

pub const MIN_OBJECTIVES: usize = 2;
pub const MAX_OBJECTIVES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureId {
    Mmce,
    F1Gap,
    TprGap,
    SuffGap,
    CalibGap,
    Robustness,
    Sparsity,
    InteractionStrength,
    MainEffectComplexity,
    InferenceTime,
}

impl MeasureId {
    pub const ALL: [MeasureId; 10] = [
        MeasureId::Mmce,
        MeasureId::F1Gap,
        MeasureId::TprGap,
        MeasureId::SuffGap,
        MeasureId::CalibGap,
        MeasureId::Robustness,
        MeasureId::Sparsity,
        MeasureId::InteractionStrength,
        MeasureId::MainEffectComplexity,
        MeasureId::InferenceTime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MeasureId::Mmce => "mmce",
            MeasureId::F1Gap => "f1_gap",
            MeasureId::TprGap => "tpr_gap",
            MeasureId::SuffGap => "suff_gap",
            MeasureId::CalibGap => "calib_gap",
            MeasureId::Robustness => "robustness",
            MeasureId::Sparsity => "sparsity",
            MeasureId::InteractionStrength => "interaction_strength",
            MeasureId::MainEffectComplexity => "main_effect_complexity",
            MeasureId::InferenceTime => "inference_time",
        }
    }

    pub fn needs_groups(self) -> bool {
        matches!(
            self,
            MeasureId::F1Gap | MeasureId::TprGap | MeasureId::SuffGap | MeasureId::CalibGap
        )
    }

    /// Whether the value changes with the decision threshold.
    pub fn depends_on_threshold(self) -> bool {
        matches!(
            self,
            MeasureId::Mmce
                | MeasureId::F1Gap
                | MeasureId::TprGap
                | MeasureId::SuffGap
                | MeasureId::Robustness
        )
    }
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeasureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeasureId::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::Configuration(format!("unknown measure `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub id: MeasureId,
    /// Bins for calibration or ALE-based measures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// Variance share for main effect complexity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Timing repeats for inference time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    /// Include in the scalarized surrogate target. Defaults to true except
    /// for inference time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<bool>,
}

impl MeasureSpec {
    pub fn new(id: MeasureId) -> Self {
        MeasureSpec {
            id,
            bins: None,
            tolerance: None,
            repeats: None,
            surrogate: None,
        }
    }

    pub fn in_surrogate(&self) -> bool {
        self.surrogate
            .unwrap_or(self.id != MeasureId::InferenceTime)
    }
}

/// Parse a comma-separated list such as `mmce,f1_gap`.
pub fn parse_measure_list(s: &str) -> Result<Vec<MeasureSpec>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.parse().map(MeasureSpec::new))
        .collect()
}

pub fn validate_specs(specs: &[MeasureSpec], has_protected: bool) -> Result<()> {
    if !(MIN_OBJECTIVES..=MAX_OBJECTIVES).contains(&specs.len()) {
        return Err(Error::Configuration(format!(
            "between {MIN_OBJECTIVES} and {MAX_OBJECTIVES} measures required, got {}",
            specs.len()
        )));
    }
    for (i, s) in specs.iter().enumerate() {
        if specs[..i].iter().any(|o| o.id == s.id) {
            return Err(Error::Configuration(format!(
                "measure `{}` listed twice",
                s.id
            )));
        }
        if s.id.needs_groups() && !has_protected {
            return Err(Error::Configuration(format!(
                "measure `{}` requires a protected attribute",
                s.id
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_repeats() -> usize {
    5
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            epsilon: 0.005,
            seed: 0,
            repeats: 5,
        }
    }
}

impl RobustnessConfig {
    pub const EPSILON_BOUNDS: (f64, f64) = (0.001, 0.01);

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = Self::EPSILON_BOUNDS;
        if !(lo..=hi).contains(&self.epsilon) {
            return Err(Error::Configuration(format!(
                "robustness epsilon {} outside [{lo}, {hi}]",
                self.epsilon
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Configuration(
                "robustness repeats must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Session-wide defaults for measure parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureSettings {
    pub robustness: RobustnessConfig,
    pub calibration_bins: usize,
    pub ale_bins: usize,
    pub mec_tolerance: f64,
    pub timing_repeats: usize,
}

impl Default for MeasureSettings {
    fn default() -> Self {
        MeasureSettings {
            robustness: RobustnessConfig::default(),
            calibration_bins: 10,
            ale_bins: 20,
            mec_tolerance: 0.95,
            timing_repeats: 5,
        }
    }
}

impl MeasureSettings {
    pub fn validate(&self) -> Result<()> {
        self.robustness.validate()?;
        if self.calibration_bins < 2 || self.ale_bins < 2 {
            return Err(Error::Configuration("bins must be >= 2".into()));
        }
        if !(self.mec_tolerance > 0.0 && self.mec_tolerance <= 1.0) {
            return Err(Error::Configuration(
                "mec tolerance must lie in (0, 1]".into(),
            ));
        }
        if self.timing_repeats < 3 {
            return Err(Error::Configuration("timing repeats must be >= 3".into()));
        }
        Ok(())
    }
}

/// Objective values aligned with the session's measure list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasureVector(pub Vec<f64>);

impl MeasureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A model scored on `data` at `n` rounds and threshold `thr`.
#[derive(Clone, Copy)]
pub struct EvalContext<'a> {
    pub model: &'a BoostedModel,
    pub data: &'a Dataset,
    pub margins: &'a StagedMargins,
    pub thr: f64,
    pub n: usize,
}

impl<'a> EvalContext<'a> {
    pub fn new(
        model: &'a BoostedModel,
        data: &'a Dataset,
        margins: &'a StagedMargins,
        thr: f64,
        n: usize,
    ) -> Result<Self> {
        if margins.rounds() != model.rounds_trained() || margins.n_rows() != data.n_rows() {
            return Err(Error::arg("staged margins do not match model and data"));
        }
        if !(0.0..=1.0).contains(&thr) {
            return Err(Error::arg(format!("threshold {thr} outside [0, 1]")));
        }
        if n == 0 || n > model.rounds_trained() {
            return Err(Error::arg(format!(
                "rounds {n} outside 1..={}",
                model.rounds_trained()
            )));
        }
        Ok(EvalContext {
            model,
            data,
            margins,
            thr,
            n,
        })
    }

    pub fn margins_at(&self) -> Result<&'a [f64]> {
        self.margins.at(self.n)
    }

    fn groups(&self) -> Result<&'a [u8]> {
        self.data.groups.as_deref().ok_or_else(|| {
            Error::Configuration("fairness measure without a protected attribute".into())
        })
    }
}

/// ALE curves per feature, keyed by (rounds, bins).
type CurveCache = HashMap<(usize, usize), Rc<Vec<Option<AleCurve>>>>;

/// Scores one model at many (rounds, threshold) pairs. Threshold-derived
/// measures read the cached staged margins; perturbed copies for robustness
/// and ALE curves are built once and reused.
pub struct Evaluator<'a> {
    model: &'a BoostedModel,
    data: &'a Dataset,
    margins: &'a StagedMargins,
    settings: &'a MeasureSettings,
    perturbed: OnceCell<Vec<StagedMargins>>,
    curves: RefCell<CurveCache>,
    ias: RefCell<HashMap<(usize, usize), f64>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        model: &'a BoostedModel,
        data: &'a Dataset,
        margins: &'a StagedMargins,
        settings: &'a MeasureSettings,
    ) -> Self {
        Evaluator {
            model,
            data,
            margins,
            settings,
            perturbed: OnceCell::new(),
            curves: RefCell::new(HashMap::new()),
            ias: RefCell::new(HashMap::new()),
        }
    }

    fn perturbed(&self) -> Result<&Vec<StagedMargins>> {
        if let Some(p) = self.perturbed.get() {
            return Ok(p);
        }
        let cfg = &self.settings.robustness;
        let mut out = Vec::with_capacity(cfg.repeats);
        for r in 0..cfg.repeats {
            let noisy = perturb(self.data, cfg.epsilon, cfg.seed.wrapping_add(r as u64))?;
            out.push(self.model.staged_margins(&noisy)?);
        }
        Ok(self.perturbed.get_or_init(|| out))
    }

    fn curves(&self, n: usize, bins: usize) -> Result<Rc<Vec<Option<AleCurve>>>> {
        if let Some(c) = self.curves.borrow().get(&(n, bins)) {
            return Ok(c.clone());
        }
        let pred = TruncatedModel {
            model: self.model,
            n,
        };
        let c = Rc::new(interpret::ale_curves(&pred, self.data, bins)?);
        self.curves.borrow_mut().insert((n, bins), c.clone());
        Ok(c)
    }

    pub fn evaluate_one(&self, spec: &MeasureSpec, n: usize, thr: f64) -> Result<f64> {
        let ctx = EvalContext::new(self.model, self.data, self.margins, thr, n)?;
        let labels = &self.data.labels;
        match spec.id {
            MeasureId::Mmce => mmce(&ctx),
            MeasureId::F1Gap => fairness_gap(&ctx, ctx.groups()?, FairnessKind::F1),
            MeasureId::TprGap => fairness_gap(&ctx, ctx.groups()?, FairnessKind::Independence),
            MeasureId::SuffGap => fairness_gap(&ctx, ctx.groups()?, FairnessKind::Sufficiency),
            MeasureId::CalibGap => calibration_gap(
                &ctx,
                ctx.groups()?,
                spec.bins.unwrap_or(self.settings.calibration_bins),
            ),
            MeasureId::Robustness => {
                let base = robustness::accuracy(ctx.margins_at()?, labels, thr);
                let perturbed = self.perturbed()?;
                let mut total = 0.0;
                for p in perturbed {
                    total += (base - robustness::accuracy(p.at(n)?, labels, thr)).abs();
                }
                Ok(total / perturbed.len() as f64)
            }
            MeasureId::Sparsity => sparsity(&ctx),
            MeasureId::InteractionStrength => {
                let bins = spec.bins.unwrap_or(self.settings.ale_bins);
                if let Some(v) = self.ias.borrow().get(&(n, bins)) {
                    return Ok(*v);
                }
                let curves = self.curves(n, bins)?;
                let v = interpret::ias_from_curves(
                    &TruncatedModel {
                        model: self.model,
                        n,
                    },
                    &curves,
                    self.data,
                )?;
                self.ias.borrow_mut().insert((n, bins), v);
                Ok(v)
            }
            MeasureId::MainEffectComplexity => {
                let bins = spec.bins.unwrap_or(self.settings.ale_bins);
                let tol = spec.tolerance.unwrap_or(self.settings.mec_tolerance);
                let curves = self.curves(n, bins)?;
                interpret::mec_from_curves(&curves, self.data, tol)
            }
            MeasureId::InferenceTime => {
                inference_time(&ctx, spec.repeats.unwrap_or(self.settings.timing_repeats))
            }
        }
    }

    pub fn evaluate(&self, specs: &[MeasureSpec], n: usize, thr: f64) -> Result<MeasureVector> {
        if specs.is_empty() {
            return Err(Error::Configuration("empty measure list".into()));
        }
        specs
            .iter()
            .map(|s| self.evaluate_one(s, n, thr))
            .collect::<Result<Vec<_>>>()
            .map(MeasureVector)
    }
}

/// Evaluate every measure for a single context.
pub fn evaluate_all(
    specs: &[MeasureSpec],
    ctx: &EvalContext<'_>,
    settings: &MeasureSettings,
) -> Result<MeasureVector> {
    Evaluator::new(ctx.model, ctx.data, ctx.margins, settings).evaluate(specs, ctx.n, ctx.thr)
}
