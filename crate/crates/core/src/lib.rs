//! Multi-objective AutoML for a built-in gradient boosted trees pipeline.
//!
//! The crate tunes booster hyperparameters, the number of boosting rounds and
//! the decision threshold against a user-chosen vector of minimized measures
//! (error, fairness gaps, robustness, interpretability, sparsity, inference
//! time). Each iteration draws a random weight vector from a user-steerable
//! weight box, scalarizes the archive with the augmented Tchebycheff norm and
//! proposes the next configuration by expected improvement on a random-forest
//! surrogate. Every trained model is additionally re-scored at truncated
//! round counts and alternative thresholds; the cheap sub-evaluations that
//! land on the Pareto front are kept in the archive.
//!
//! Modules, bottom-up:
//!
//! * [`data`]: CSV ingestion, one-hot encoding, seeded train/valid/test split.
//! * [`gbt`]: second-order boosted trees with staged (per-round) prediction.
//! * [`measures`]: the objective catalog and a caching evaluator.
//! * [`pareto`]: dominance, non-dominated filtering, the evaluation archive.
//! * [`mobo`]: weight boxes, scalarization, the surrogate forest, proposals.
//! * [`engine`]: the optimization loop, sessions, snapshots and reports.

// `!(x > 0.0)` guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod engine;
pub mod error;
pub mod gbt;
pub mod measures;
pub mod mobo;
pub mod pareto;
pub mod synthetic;

pub use data::{ColumnDef, ColumnKind, Dataset, Schema, SplitSpec, Splits};
pub use engine::{
    Budget, DataSource, FrontRow, FrontTable, PathPoint, PipelineConfig, ReportSplit, RunBudget,
    RunControl, Session, SessionConfig, Status, StatusSummary,
};
pub use error::{Error, Result};
pub use gbt::{BoostedModel, BoosterParams, StagedMargins};
pub use measures::{MeasureId, MeasureSpec, MeasureVector, RobustnessConfig};
pub use mobo::{ConfigSpace, ScalarizerConfig, WeightBox};
pub use pareto::{Archive, EvalRecord, Provenance};
