use axmc_core::data::prepare;
use axmc_core::gbt;
use axmc_core::measures::{parse_measure_list, Evaluator};
use axmc_core::synthetic::{income_csv, income_schema, IncomeSpec};
use axmc_core::{
    DataSource, Error, Provenance, ReportSplit, RunBudget, RunControl, Session, SessionConfig,
    Status, WeightBox,
};

fn small_csv() -> String {
    income_csv(&IncomeSpec {
        n: 1500,
        seed: 3,
        ..IncomeSpec::default()
    })
}

fn config(measures: &str, seed: u64) -> SessionConfig {
    let mut c = SessionConfig::new(parse_measure_list(measures).unwrap(), seed);
    c.n_candidates = 200;
    c
}

fn session(measures: &str, seed: u64, iterations: usize) -> Session {
    let mut s = Session::init(
        DataSource::Csv(small_csv()),
        income_schema(),
        config(measures, seed),
        0,
    )
    .unwrap();
    if iterations > 0 {
        s.run(
            RunBudget::Iterations(iterations),
            &RunControl::new(),
            |_| Ok(()),
        )
        .unwrap();
    }
    s
}

#[test]
fn zero_budget_runs_only_the_initial_design() {
    let s = session("mmce,f1_gap,tpr_gap,sparsity", 1, 0);
    assert_eq!(s.status(), Status::Done);
    assert_eq!(s.archive().full_count(), 12);
    assert_eq!(s.budget().iterations_done, 0);
    assert!(s.archive().records().iter().all(|r| r.iteration == 0));
    let sum = s.summary();
    assert_eq!((sum.k, sum.archive_size), (4, s.archive().len()));
}

#[test]
fn identical_seeds_give_identical_archives() {
    let a = session("mmce,f1_gap", 5, 4);
    let b = session("mmce,f1_gap", 5, 4);
    assert!(a.archive().same_outcome(b.archive()));
    assert_eq!(a.budget().iterations_done, 4);
    assert_eq!(a.archive().full_count(), 8 + 4);
    let c = session("mmce,f1_gap", 6, 4);
    assert!(!a.archive().same_outcome(c.archive()));
}

#[test]
fn sub_records_share_their_parent_model() {
    let s = session("mmce,f1_gap", 2, 4);
    let recs = s.archive().records();
    assert!(recs.iter().any(|r| r.provenance == Provenance::Sub));
    for r in recs.iter().filter(|r| r.provenance == Provenance::Sub) {
        let p = &recs[r.parent.unwrap()];
        assert_eq!(p.provenance, Provenance::Full);
        assert_eq!(p.config.booster, r.config.booster);
        assert_eq!(p.iteration, r.iteration);
        assert!(r.config.nrounds <= p.config.nrounds);
        assert_ne!(
            (r.config.nrounds, r.config.thr),
            (p.config.nrounds, p.config.thr)
        );
    }
}

#[test]
fn validation_report_is_the_archive_front() {
    let s = session("mmce,f1_gap", 3, 3);
    let t = s.report(ReportSplit::Valid).unwrap();
    let mut idx: Vec<usize> = t.rows.iter().map(|r| r.index).collect();
    idx.sort();
    assert_eq!(idx, s.archive().front_indices());
    for r in &t.rows {
        assert_eq!(r.measures, s.archive().records()[r.index].values());
    }
    assert!(t
        .rows
        .windows(2)
        .all(|w| w[0].measures[0] <= w[1].measures[0]));
    let csv = t.to_csv().unwrap();
    assert_eq!(csv.lines().count(), t.rows.len() + 1);
    assert!(csv.starts_with("index,eta,max_depth"));
}

#[test]
fn test_report_rescores_front_models() {
    let s = session("mmce,f1_gap", 4, 2);
    let t = s.report(ReportSplit::Test).unwrap();
    let splits = prepare(
        axmc_core::data::ingest_csv_str(&small_csv(), &income_schema()).unwrap(),
        &s.config().split,
    )
    .unwrap();
    for r in &t.rows {
        // Retrain from scratch and score on the held-out split.
        let model = gbt::train(&splits.train, &r.config.booster).unwrap();
        let staged = model.staged_margins(&splits.test).unwrap();
        let ev = Evaluator::new(&model, &splits.test, &staged, &s.config().settings);
        let want = ev
            .evaluate(
                &s.config().measures,
                r.config.nrounds as usize,
                r.config.thr,
            )
            .unwrap();
        assert_eq!(r.measures, want.0);
    }
}

#[test]
fn path_tracks_a_running_best() {
    let s = session("mmce,f1_gap", 7, 5);
    let path = s.path();
    assert_eq!(
        path.iter().map(|p| p.iteration).collect::<Vec<_>>(),
        vec![1, 2, 3, 4, 5]
    );
    for w in path.windows(2) {
        assert!(w[1].best.iter().zip(&w[0].best).all(|(b, a)| b <= a));
    }
    for p in &path {
        assert!(p.best.iter().zip(&p.values).all(|(b, v)| b <= v));
    }
}

#[test]
fn weight_box_cannot_change_mid_run() {
    let mut s = session("mmce,f1_gap", 8, 0);
    let mut seen_running = false;
    s.run(RunBudget::Iterations(1), &RunControl::new(), |live| {
        let mut copy = live.clone();
        seen_running = copy.status() == Status::Running;
        assert!(matches!(
            copy.set_weight_box(WeightBox::full(2)),
            Err(Error::Status(_))
        ));
        Ok(())
    })
    .unwrap();
    assert!(seen_running);
    assert!(matches!(
        s.set_weight_box(WeightBox::full(3)),
        Err(Error::InfeasibleBox(_))
    ));
    s.set_weight_box(WeightBox::first(2, 0.2, 0.4).unwrap())
        .unwrap();
}

#[test]
fn pause_and_resume() {
    let mut s = session("mmce,f1_gap", 9, 0);
    let ctrl = RunControl::new();
    ctrl.request_pause();
    assert_eq!(
        s.run(RunBudget::Iterations(3), &ctrl, |_| Ok(())).unwrap(),
        Status::Paused
    );
    assert_eq!(s.budget().iterations_done, 0);
    assert_eq!(s.budget().remaining(), 3);
    assert_eq!(
        s.run(RunBudget::Iterations(0), &ctrl, |_| Ok(())).unwrap(),
        Status::Done
    );
    assert_eq!(s.budget().iterations_done, 3);
    // An observer error stops the run and leaves it paused.
    let err = s.run(RunBudget::Iterations(2), &ctrl, |_| {
        Err(Error::Input("disk full".into()))
    });
    assert!(err.is_err());
    assert_eq!(s.status(), Status::Paused);
    assert_eq!(s.budget().iterations_done, 4);
}

#[test]
fn seconds_budget_leaves_no_allowance() {
    let mut s = session("mmce,f1_gap", 10, 0);
    let st = s
        .run(RunBudget::Seconds(0.5), &RunControl::new(), |_| Ok(()))
        .unwrap();
    assert_eq!(st, Status::Done);
    assert!(s.budget().iterations_done >= 1);
    assert_eq!(s.budget().iterations_allowed, s.budget().iterations_done);
    assert!(s
        .run(RunBudget::Seconds(-1.0), &RunControl::new(), |_| Ok(()))
        .is_err());
}

#[test]
fn snapshots_round_trip_and_reject_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("income.csv");
    std::fs::write(&path, small_csv()).unwrap();
    let mut s = Session::init(
        DataSource::Path(path.clone()),
        income_schema(),
        config("mmce,f1_gap", 11),
        0,
    )
    .unwrap();
    s.run(RunBudget::Iterations(2), &RunControl::new(), |_| Ok(()))
        .unwrap();
    let snap = s.snapshot().unwrap();
    let back = Session::restore(&snap).unwrap();
    assert!(back.archive().same_outcome(s.archive()));
    assert_eq!(back.budget(), s.budget());
    assert_eq!(back.summary().front_size, s.summary().front_size);

    assert!(matches!(
        Session::restore(&snap[..snap.len() - 10]),
        Err(Error::Restore(_))
    ));
    let other = snap.replace("axmc-session-v1", "axmc-session-v0");
    assert!(matches!(Session::restore(&other), Err(Error::Restore(_))));
    std::fs::write(
        &path,
        income_csv(&IncomeSpec {
            n: 1500,
            seed: 4,
            ..IncomeSpec::default()
        }),
    )
    .unwrap();
    assert!(matches!(Session::restore(&snap), Err(Error::Restore(_))));
}

#[test]
fn log_lines_cover_new_records() {
    let mut s = session("mmce,f1_gap", 12, 0);
    let before = s.archive().len();
    s.run(RunBudget::Iterations(1), &RunControl::new(), |_| Ok(()))
        .unwrap();
    let lines = s.log_lines(before);
    assert_eq!(lines.len(), s.archive().len() - before);
    let first: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    assert_eq!(first["index"], before);
    assert_eq!(first["provenance"], "full");
    assert_eq!(first["iteration"], 1);
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut schema = income_schema();
    schema.protected = None;
    assert!(Session::init(
        DataSource::Csv(small_csv()),
        schema,
        config("mmce,f1_gap", 1),
        0
    )
    .is_err());
    let mut c = config("mmce,sparsity", 1);
    c.weight_box = Some(WeightBox::full(3));
    assert!(Session::init(DataSource::Csv(small_csv()), income_schema(), c, 0).is_err());
}
