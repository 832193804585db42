use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::subeval::subevaluations;
use super::{Budget, DataSource, RunBudget, RunControl, SessionConfig, Status};
use crate::data::{ingest_csv_str, prepare, Schema, Splits};
use crate::error::{Error, Result};
use crate::gbt::{self, BoostedModel};
use crate::measures::{Evaluator, MeasureId, MeasureVector};
use crate::mobo::{
    fit_surrogate, propose, ConfigSpace, PipelineConfig, ScalarizerConfig, WeightBox,
};
use crate::pareto::{filter_subevals, Archive, EvalRecord, Provenance};

pub(crate) type ModelCache = Arc<Mutex<HashMap<usize, Arc<BoostedModel>>>>;

/// A resumable optimization session.
///
/// Randomness is drawn from per-iteration ChaCha8 streams keyed by the
/// session seed (stream 0 is the initial design, stream `j` iteration `j`),
/// so the whole RNG state is the seed plus the iteration counter.
#[derive(Clone)]
pub struct Session {
    pub id: String,
    pub(crate) config: SessionConfig,
    pub(crate) source: DataSource,
    pub(crate) schema: Schema,
    pub(crate) data_hash: u64,
    pub(crate) splits: Arc<Splits>,
    pub(crate) space: ConfigSpace,
    pub(crate) archive: Archive,
    pub(crate) weight_box: WeightBox,
    pub(crate) budget: Budget,
    pub(crate) status: Status,
    pub(crate) models: ModelCache,
}

/// Cheap status view for pollers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatusSummary {
    pub id: String,
    pub status: Status,
    pub iterations_done: usize,
    pub iterations_allowed: usize,
    pub k: usize,
    pub measures: Vec<MeasureId>,
    pub weight_box: WeightBox,
    pub archive_size: usize,
    pub front_size: usize,
    pub seconds_used: f64,
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn load_splits(
    source: &DataSource,
    schema: &Schema,
    config: &SessionConfig,
) -> Result<(Splits, u64)> {
    let text = source.read()?;
    let hash = fnv1a(text.as_bytes());
    let data = ingest_csv_str(&text, schema)?;
    config.validate(data.groups.is_some())?;
    let splits = prepare(data, &config.split)?;
    for w in &splits.warnings {
        log::warn!("{w}");
    }
    Ok((splits, hash))
}

impl Session {
    /// Ingest and split the data, then train and evaluate the initial design.
    /// `iterations` is the optimizer budget granted up front; with 0 the
    /// session is immediately done.
    pub fn init(
        source: DataSource,
        schema: Schema,
        config: SessionConfig,
        iterations: usize,
    ) -> Result<Session> {
        let started = Instant::now();
        let (splits, data_hash) = load_splits(&source, &schema, &config)?;
        let k = config.k();
        let weight_box = config
            .weight_box
            .clone()
            .unwrap_or_else(|| WeightBox::full(k));
        let mut s = Session {
            id: format!("session-{}", config.seed),
            config,
            source,
            schema,
            data_hash,
            splits: Arc::new(splits),
            space: ConfigSpace::default(),
            archive: Archive::new(k),
            weight_box,
            budget: Budget {
                iterations_allowed: iterations,
                ..Budget::default()
            },
            status: if iterations > 0 {
                Status::Idle
            } else {
                Status::Done
            },
            models: Arc::default(),
        };
        let mut rng = stream_rng(s.config.seed, 0);
        let m = s.config.initial_design_size();
        let units: Vec<Vec<f64>> = (0..m).map(|_| s.space.sample_unit(&mut rng)).collect();
        for u in units {
            let cfg = s.space.decode(&u, s.config.seed);
            s.evaluate_full(cfg, 0, started)?;
        }
        s.prune_models();
        s.budget.seconds_used += started.elapsed().as_secs_f64();
        Ok(s)
    }

    /// Like [`Session::init`] without an up-front budget, leaving the session
    /// idle until the first [`Session::run`].
    pub fn create(source: DataSource, schema: Schema, config: SessionConfig) -> Result<Session> {
        let mut s = Session::init(source, schema, config, 0)?;
        s.status = Status::Idle;
        Ok(s)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn source(&self) -> &DataSource {
        &self.source
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn archive(&self) -> &Archive {
        &self.archive
    }

    pub fn weight_box(&self) -> &WeightBox {
        &self.weight_box
    }

    pub fn budget(&self) -> &Budget {
        &self.budget
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn measure_ids(&self) -> Vec<MeasureId> {
        self.config.measures.iter().map(|m| m.id).collect()
    }

    pub fn summary(&self) -> StatusSummary {
        StatusSummary {
            id: self.id.clone(),
            status: self.status,
            iterations_done: self.budget.iterations_done,
            iterations_allowed: self.budget.iterations_allowed,
            k: self.config.k(),
            measures: self.measure_ids(),
            weight_box: self.weight_box.clone(),
            archive_size: self.archive.len(),
            front_size: self.archive.front_indices().len(),
            seconds_used: self.budget.seconds_used,
        }
    }

    /// Replace the weight box between runs.
    pub fn set_weight_box(&mut self, bx: WeightBox) -> Result<()> {
        if self.status == Status::Running {
            return Err(Error::Status(
                "cannot change the weight box while running".into(),
            ));
        }
        if bx.k() != self.config.k() {
            return Err(Error::InfeasibleBox(format!(
                "weight box has {} objectives, session has {}",
                bx.k(),
                self.config.k()
            )));
        }
        self.weight_box = bx;
        Ok(())
    }

    /// Grant more budget without running. A done session becomes idle.
    pub fn extend(&mut self, budget: RunBudget) -> Result<()> {
        match budget {
            RunBudget::Iterations(n) => self.budget.iterations_allowed += n,
            RunBudget::Seconds(s) => {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::arg("seconds budget must be positive"));
                }
                self.budget.seconds_allowed += s;
            }
        }
        if self.status == Status::Done {
            self.status = Status::Idle;
        }
        Ok(())
    }

    /// Add `budget` and iterate until it is spent or a pause is requested.
    /// `after_iteration` runs at every iteration boundary (checkpointing);
    /// an error from it stops the run with the session paused.
    pub fn run<F>(
        &mut self,
        budget: RunBudget,
        ctrl: &RunControl,
        mut after_iteration: F,
    ) -> Result<Status>
    where
        F: FnMut(&Session) -> Result<()>,
    {
        if self.status == Status::Running {
            return Err(Error::Status("session is already running".into()));
        }
        self.extend(budget)?;
        let deadline = match budget {
            RunBudget::Seconds(s) => Some(s),
            RunBudget::Iterations(_) => None,
        };
        let started = Instant::now();
        let base_used = self.budget.seconds_used;
        self.status = Status::Running;
        let outcome = loop {
            if ctrl.pause_requested() {
                ctrl.clear();
                break Ok(Status::Paused);
            }
            match deadline {
                Some(limit) => {
                    if started.elapsed().as_secs_f64() >= limit {
                        break Ok(Status::Done);
                    }
                    if self.budget.remaining() == 0 {
                        self.budget.iterations_allowed += 1;
                    }
                }
                None => {
                    if self.budget.remaining() == 0 {
                        break Ok(Status::Done);
                    }
                }
            }
            if let Err(e) = self.iterate(started, base_used) {
                break Err(e);
            }
            self.budget.seconds_used = base_used + started.elapsed().as_secs_f64();
            if let Err(e) = after_iteration(self) {
                break Err(e);
            }
        };
        // Time-boxed runs leave no unspent iteration allowance behind.
        if deadline.is_some() {
            self.budget.iterations_allowed = self.budget.iterations_done;
        }
        self.budget.seconds_used = base_used + started.elapsed().as_secs_f64();
        match outcome {
            Ok(st) => {
                self.status =
                    if st == Status::Paused && self.budget.remaining() == 0 && deadline.is_none() {
                        Status::Done
                    } else {
                        st
                    };
                Ok(self.status)
            }
            Err(e) => {
                self.status = Status::Paused;
                Err(e)
            }
        }
    }

    /// One optimizer iteration regardless of budget; used by `run`.
    pub fn run_iteration(&mut self) -> Result<()> {
        if self.budget.remaining() == 0 {
            self.status = Status::Done;
            return Err(Error::Status("iteration budget exhausted".into()));
        }
        let started = Instant::now();
        let base = self.budget.seconds_used;
        self.iterate(started, base)?;
        self.budget.seconds_used = base + started.elapsed().as_secs_f64();
        if self.budget.remaining() == 0 {
            self.status = Status::Done;
        }
        Ok(())
    }

    fn iterate(&mut self, started: Instant, base_used: f64) -> Result<()> {
        let j = self.budget.iterations_done + 1;
        let mut rng = stream_rng(self.config.seed, j as u64);
        let w = self.weight_box.sample(&mut rng)?;
        let bounds = self
            .archive
            .bounds()
            .ok_or_else(|| Error::Status("empty archive".into()))?;
        let mut scal = ScalarizerConfig::new(self.config.rho, bounds)?;
        scal.excluded = self
            .config
            .measures
            .iter()
            .map(|m| !m.in_surrogate())
            .collect();
        let forest_seed = rng.next_u64();
        let surrogate = fit_surrogate(
            &self.archive,
            &w,
            &scal,
            &self.space,
            &self.config.forest,
            forest_seed,
        )?;
        let proposal = propose(
            &surrogate.forest,
            &self.space,
            surrogate.best,
            Some(&surrogate.incumbent),
            &mut rng,
            self.config.n_candidates,
        );
        let cfg = self.space.decode(&proposal.unit, self.config.seed);
        log::debug!(
            "iteration {j}: w={w:?} ei={:.4e} nrounds={} thr={:.3}",
            proposal.ei,
            cfg.nrounds,
            cfg.thr
        );
        let clock = ClockBase { started, base_used };
        self.evaluate_full_at(cfg, j, clock)?;
        self.budget.iterations_done = j;
        self.prune_models();
        Ok(())
    }

    fn evaluate_full(
        &mut self,
        cfg: PipelineConfig,
        iteration: usize,
        started: Instant,
    ) -> Result<()> {
        let clock = ClockBase {
            started,
            base_used: self.budget.seconds_used,
        };
        self.evaluate_full_at(cfg, iteration, clock)
    }

    /// Train `cfg`, score it on validation, append it and its surviving
    /// sub-evaluations. Failures after the first record become penalized
    /// records at the archive's per-objective maxima.
    fn evaluate_full_at(
        &mut self,
        cfg: PipelineConfig,
        iteration: usize,
        clock: ClockBase,
    ) -> Result<()> {
        let specs = self.config.measures.clone();
        let scored = (|| -> Result<(Arc<BoostedModel>, MeasureVector, Vec<EvalRecord>)> {
            cfg.validate()?;
            let model = Arc::new(gbt::train(&self.splits.train, &cfg.booster)?);
            let valid = &self.splits.valid;
            let staged = model.staged_margins(valid)?;
            let evaluator = Evaluator::new(&model, valid, &staged, &self.config.settings);
            let full = evaluator.evaluate(&specs, cfg.nrounds as usize, cfg.thr)?;
            let parent = self.archive.len();
            let subs = subevaluations(&evaluator, &cfg, &specs, parent, iteration, clock.now());
            Ok((model.clone(), full, subs))
        })();
        let (model, measures, subs) = match scored {
            Ok(v) => v,
            Err(e) => {
                let Some(bounds) = self.archive.bounds() else {
                    return Err(e);
                };
                log::warn!("evaluation of {cfg:?} failed, recording penalty: {e}");
                let record = EvalRecord {
                    config: cfg,
                    measures: MeasureVector(bounds.iter().map(|b| b.1).collect()),
                    provenance: Provenance::Full,
                    parent: None,
                    iteration,
                    wall_time: clock.now(),
                    penalized: true,
                };
                self.archive.push(record)?;
                return Ok(());
            }
        };
        let record = EvalRecord {
            config: cfg,
            measures,
            provenance: Provenance::Full,
            parent: None,
            iteration,
            wall_time: clock.now(),
            penalized: false,
        };
        let index = self.archive.push(record)?;
        self.models
            .lock()
            .expect("model cache")
            .insert(index, model);
        let survivors = filter_subevals(&self.archive, &subs)?;
        for r in survivors {
            self.archive.push(r)?;
        }
        Ok(())
    }

    /// Keep only models that back a current front record.
    fn prune_models(&self) {
        let keep: BTreeSet<usize> = self
            .archive
            .front_indices()
            .into_iter()
            .map(|i| {
                let r = &self.archive.records()[i];
                r.parent.unwrap_or(i)
            })
            .collect();
        self.models
            .lock()
            .expect("model cache")
            .retain(|i, _| keep.contains(i));
    }

    /// The trained model behind archive record `index` (its parent for
    /// sub-records), retrained deterministically when not cached.
    pub fn model_for(&self, index: usize) -> Result<Arc<BoostedModel>> {
        let rec = self
            .archive
            .records()
            .get(index)
            .ok_or_else(|| Error::arg(format!("no archive record {index}")))?;
        let full = rec.parent.unwrap_or(index);
        if let Some(m) = self.models.lock().expect("model cache").get(&full) {
            return Ok(m.clone());
        }
        let cfg = &self.archive.records()[full].config;
        let model = Arc::new(gbt::train(&self.splits.train, &cfg.booster)?);
        self.models
            .lock()
            .expect("model cache")
            .insert(full, model.clone());
        Ok(model)
    }

    /// JSON lines for archive records `from..`, one per record.
    pub fn log_lines(&self, from: usize) -> Vec<String> {
        #[derive(Serialize)]
        struct Line<'a> {
            index: usize,
            #[serde(flatten)]
            record: &'a EvalRecord,
        }
        self.archive.records()[from.min(self.archive.len())..]
            .iter()
            .enumerate()
            .map(|(o, r)| {
                serde_json::to_string(&Line {
                    index: from + o,
                    record: r,
                })
                .expect("record serializes")
            })
            .collect()
    }
}

#[derive(Clone, Copy)]
struct ClockBase {
    started: Instant,
    base_used: f64,
}

impl ClockBase {
    fn now(&self) -> f64 {
        self.base_used + self.started.elapsed().as_secs_f64()
    }
}
