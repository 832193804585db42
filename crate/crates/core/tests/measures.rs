use axmc_core::data::prepare;
use axmc_core::gbt;
use axmc_core::measures::classification::{
    calibration_gap_from_probs, expected_calibration_error, mmce_from_margins,
};
use axmc_core::measures::interpret::interaction_strength_with;
use axmc_core::measures::{
    evaluate_all, parse_measure_list, validate_specs, EvalContext, Evaluator, MeasureSettings,
};
use axmc_core::synthetic::{income_csv, income_schema, IncomeSpec};
use axmc_core::{BoosterParams, Dataset, Error, MeasureId, MeasureSpec, SplitSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[test]
fn mmce_thresholds_probabilities() {
    let margins: Vec<f64> = [0.2, 0.4, 0.6, 0.8].iter().map(|&p| logit(p)).collect();
    let labels = [0, 1, 1, 1];
    assert_eq!(mmce_from_margins(&margins, &labels, 0.5).unwrap(), 0.25);
    assert_eq!(mmce_from_margins(&margins, &labels, 0.7).unwrap(), 0.5);
    assert_eq!(mmce_from_margins(&margins, &labels, 0.0).unwrap(), 0.25);
    assert_eq!(mmce_from_margins(&margins, &labels, 1.0).unwrap(), 0.75);
}

#[test]
fn calibration_error_by_hand() {
    // Bins: {0.05} vs 0, {0.15, 0.15} vs 0.5, {0.95} vs 1.
    let probs = [0.05, 0.15, 0.15, 0.95];
    let labels = [0, 1, 0, 1];
    let ece = expected_calibration_error(&probs, &labels, 10);
    assert!((ece - (0.05 + 2.0 * 0.35 + 0.05) / 4.0).abs() < 1e-12);
    // Group 0 perfectly calibrated in its bins, group 1 off by 0.3.
    let probs = [0.5, 0.5, 0.2, 0.2];
    let labels = [1, 0, 1, 1];
    let groups = [0, 0, 1, 1];
    let gap = calibration_gap_from_probs(&probs, &labels, &groups, 10).unwrap();
    assert!((gap - 0.8).abs() < 1e-12);
    assert!(matches!(
        calibration_gap_from_probs(&probs, &labels, &[0, 0, 0, 0], 10),
        Err(Error::GroupCoverage(_))
    ));
}

#[test]
fn measure_lists_are_validated() {
    let ok = parse_measure_list("mmce, f1_gap ,sparsity").unwrap();
    assert_eq!(
        ok.iter().map(|s| s.id).collect::<Vec<_>>(),
        vec![MeasureId::Mmce, MeasureId::F1Gap, MeasureId::Sparsity]
    );
    validate_specs(&ok, true).unwrap();
    assert!(validate_specs(&ok, false).is_err());
    assert!(parse_measure_list("mmce,accuracy").is_err());
    assert!(validate_specs(&parse_measure_list("mmce").unwrap(), true).is_err());
    assert!(validate_specs(&parse_measure_list("mmce,sparsity,mmce").unwrap(), true).is_err());
    let six = parse_measure_list("mmce,f1_gap,tpr_gap,suff_gap,calib_gap,sparsity").unwrap();
    assert!(validate_specs(&six, true).is_err());
    assert!(!MeasureSpec::new(MeasureId::InferenceTime).in_surrogate());
}

#[test]
fn additive_function_has_no_interaction() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cols: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..400).map(|_| rng.random::<f64>()).collect())
        .collect();
    let d = Dataset::from_numeric(&["a", "b"], cols, vec![0; 400], None).unwrap();
    let additive = |x: &[f64]| (3.0 * x[0]).sin() + x[1] * x[1];
    let ias = interaction_strength_with(&additive, &d, 20).unwrap();
    assert!(ias < 0.01, "{ias}");
    let linear = |x: &[f64]| 2.0 * x[0] - x[1];
    assert!(interaction_strength_with(&linear, &d, 20).unwrap() < 1e-12);
    let product = |x: &[f64]| 4.0 * (x[0] - 0.5) * (x[1] - 0.5);
    assert!(interaction_strength_with(&product, &d, 20).unwrap() > 0.5);
}

#[test]
fn cached_evaluator_matches_direct_evaluation() {
    let csv = income_csv(&IncomeSpec {
        n: 1200,
        ..IncomeSpec::default()
    });
    let data = axmc_core::data::ingest_csv_str(&csv, &income_schema()).unwrap();
    let s = prepare(data, &SplitSpec::default()).unwrap();
    let model = gbt::train(
        &s.train,
        &BoosterParams {
            max_rounds: 30,
            max_depth: 4,
            ..BoosterParams::default()
        },
    )
    .unwrap();
    let staged = model.staged_margins(&s.valid).unwrap();
    let settings = MeasureSettings::default();
    let ev = Evaluator::new(&model, &s.valid, &staged, &settings);
    let specs: Vec<MeasureSpec> = MeasureId::ALL
        .into_iter()
        .filter(|&m| m != MeasureId::InferenceTime)
        .map(MeasureSpec::new)
        .collect();
    for (n, thr) in [(30, 0.5), (10, 0.3), (20, 0.8)] {
        let cached = ev.evaluate(&specs, n, thr).unwrap();
        // Repeat to hit the caches.
        assert_eq!(ev.evaluate(&specs, n, thr).unwrap(), cached);
        let ctx = EvalContext::new(&model, &s.valid, &staged, thr, n).unwrap();
        let direct = evaluate_all(&specs, &ctx, &settings).unwrap();
        for (i, (a, b)) in cached.values().iter().zip(direct.values()).enumerate() {
            assert!(
                (a - b).abs() < 1e-12,
                "{} at ({n}, {thr}): {a} vs {b}",
                specs[i].id
            );
        }
        for (spec, v) in specs.iter().zip(cached.values()) {
            assert!(v.is_finite() && *v >= 0.0, "{} = {v}", spec.id);
            if spec.id != MeasureId::MainEffectComplexity {
                assert!(*v <= 1.0, "{} = {v}", spec.id);
            }
        }
    }
}

#[test]
fn inference_time_is_positive() {
    let csv = income_csv(&IncomeSpec {
        n: 300,
        ..IncomeSpec::default()
    });
    let data = axmc_core::data::ingest_csv_str(&csv, &income_schema()).unwrap();
    let s = prepare(data, &SplitSpec::default()).unwrap();
    let model = gbt::train(
        &s.train,
        &BoosterParams {
            max_rounds: 10,
            ..BoosterParams::default()
        },
    )
    .unwrap();
    let staged = model.staged_margins(&s.valid).unwrap();
    let settings = MeasureSettings::default();
    let ev = Evaluator::new(&model, &s.valid, &staged, &settings);
    let t = ev
        .evaluate_one(&MeasureSpec::new(MeasureId::InferenceTime), 10, 0.5)
        .unwrap();
    assert!(t > 0.0);
}
