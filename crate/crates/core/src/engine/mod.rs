//! The optimization loop: initial design, parEgo iterations with
//! sub-evaluation harvesting, budgets, pausing, snapshots and reports.

mod report;
mod session;
mod snapshot;
pub mod subeval;

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::SplitSpec;
use crate::error::{Error, Result};
use crate::measures::{validate_specs, MeasureSettings, MeasureSpec};
use crate::mobo::{ForestParams, WeightBox, DEFAULT_CANDIDATES, DEFAULT_RHO};

pub use crate::mobo::PipelineConfig;
pub use report::{FrontRow, FrontTable, PathPoint, ReportSplit};
pub use session::{Session, StatusSummary};
pub use snapshot::SNAPSHOT_FORMAT;
pub use subeval::{candidate_grid, round_grid, subevaluations};

/// Where the session's CSV comes from. Snapshots keep the source and
/// re-ingest it on restore.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Path(PathBuf),
    Csv(String),
}

impl DataSource {
    pub fn read(&self) -> Result<String> {
        match self {
            DataSource::Path(p) => std::fs::read_to_string(p).map_err(Error::Io),
            DataSource::Csv(s) => Ok(s.clone()),
        }
    }
}

fn default_rho() -> f64 {
    DEFAULT_RHO
}

fn default_candidates() -> usize {
    DEFAULT_CANDIDATES
}

/// Everything that fixes a session's behavior besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub measures: Vec<MeasureSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Initial design size `m`; defaults to `max(8, 4 + 2k)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_design: Option<usize>,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_candidates")]
    pub n_candidates: usize,
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_box: Option<WeightBox>,
    #[serde(flatten)]
    pub settings: MeasureSettings,
}

impl SessionConfig {
    pub fn new(measures: Vec<MeasureSpec>, seed: u64) -> Self {
        SessionConfig {
            measures,
            seed,
            initial_design: None,
            split: SplitSpec {
                seed,
                ..SplitSpec::default()
            },
            rho: DEFAULT_RHO,
            n_candidates: DEFAULT_CANDIDATES,
            forest: ForestParams::default(),
            weight_box: None,
            settings: MeasureSettings::default(),
        }
    }

    pub fn k(&self) -> usize {
        self.measures.len()
    }

    pub fn initial_design_size(&self) -> usize {
        self.initial_design.unwrap_or((4 + 2 * self.k()).max(8))
    }

    pub fn validate(&self, has_protected: bool) -> Result<()> {
        validate_specs(&self.measures, has_protected)?;
        self.settings.validate()?;
        if self.initial_design_size() < 4 {
            return Err(Error::arg(format!(
                "initial design needs at least 4 evaluations, got {}",
                self.initial_design_size()
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Configuration("rho must be positive".into()));
        }
        if self.n_candidates == 0 {
            return Err(Error::Configuration("n_candidates must be >= 1".into()));
        }
        if let Some(b) = &self.weight_box {
            if b.k() != self.k() {
                return Err(Error::InfeasibleBox(format!(
                    "weight box has {} objectives, session has {}",
                    b.k(),
                    self.k()
                )));
            }
        }
        self.split.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Idle,
    Running,
    Paused,
    Done,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Idle => "idle",
            Status::Running => "running",
            Status::Paused => "paused",
            Status::Done => "done",
        }
    }
}

/// Iteration and wall-clock accounting across all runs of a session.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub iterations_done: usize,
    pub iterations_allowed: usize,
    /// Total wall-clock seconds granted by time-boxed runs.
    #[serde(default)]
    pub seconds_allowed: f64,
    /// Wall-clock seconds spent in initialization and runs.
    #[serde(default)]
    pub seconds_used: f64,
}

impl Budget {
    pub fn remaining(&self) -> usize {
        self.iterations_allowed.saturating_sub(self.iterations_done)
    }
}

/// Additional budget for one call to [`Session::run`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunBudget {
    Iterations(usize),
    Seconds(f64),
}

/// Cross-thread pause request, honored at the next iteration boundary.
#[derive(Clone, Debug, Default)]
pub struct RunControl {
    pause: Arc<AtomicBool>,
}

impl RunControl {
    pub fn new() -> Self {
        RunControl::default()
    }

    pub fn request_pause(&self) {
        self.pause.store(true, Ordering::SeqCst);
    }

    pub fn pause_requested(&self) -> bool {
        self.pause.load(Ordering::SeqCst)
    }

    pub fn clear(&self) {
        self.pause.store(false, Ordering::SeqCst);
    }
}
