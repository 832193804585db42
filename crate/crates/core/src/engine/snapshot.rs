use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::session::load_splits;
use super::{Budget, DataSource, Session, SessionConfig, Status};
use crate::data::Schema;
use crate::error::{Error, Result};
use crate::mobo::{ConfigSpace, WeightBox};
use crate::pareto::Archive;

pub const SNAPSHOT_FORMAT: &str = "axmc-session-v1";

#[derive(Serialize, Deserialize)]
struct RngState {
    seed: u64,
    /// Stream the next iteration draws from.
    next_stream: u64,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format: String,
    id: String,
    config: SessionConfig,
    source: DataSource,
    schema: Schema,
    data_hash: String,
    space: ConfigSpace,
    weight_box: WeightBox,
    budget: Budget,
    status: Status,
    rng: RngState,
    archive: Archive,
}

impl Session {
    /// Versioned JSON holding everything needed to continue the session.
    /// Trained models are not stored; they are retrained on demand.
    pub fn snapshot(&self) -> Result<String> {
        let snap = Snapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            id: self.id.clone(),
            config: self.config.clone(),
            source: self.source.clone(),
            schema: self.schema.clone(),
            data_hash: format!("{:016x}", self.data_hash),
            space: self.space.clone(),
            weight_box: self.weight_box.clone(),
            budget: self.budget.clone(),
            status: self.status,
            rng: RngState {
                seed: self.config.seed,
                next_stream: self.budget.iterations_done as u64 + 1,
            },
            archive: self.archive.clone(),
        };
        Ok(serde_json::to_string(&snap)?)
    }

    /// Rebuild a session from [`Session::snapshot`] output, re-reading and
    /// re-splitting its data. A session saved mid-run comes back paused.
    pub fn restore(text: &str) -> Result<Session> {
        let snap: Snapshot = serde_json::from_str(text)
            .map_err(|e| Error::Restore(format!("corrupt snapshot: {e}")))?;
        if snap.format != SNAPSHOT_FORMAT {
            return Err(Error::Restore(format!(
                "unsupported snapshot format `{}` (expected {SNAPSHOT_FORMAT})",
                snap.format
            )));
        }
        if snap.rng.seed != snap.config.seed
            || snap.rng.next_stream != snap.budget.iterations_done as u64 + 1
        {
            return Err(Error::Restore("rng state inconsistent with budget".into()));
        }
        if snap.archive.k() != snap.config.k() || snap.weight_box.k() != snap.config.k() {
            return Err(Error::Restore("objective count mismatch".into()));
        }
        let (splits, hash) = load_splits(&snap.source, &snap.schema, &snap.config)
            .map_err(|e| Error::Restore(format!("cannot reload data: {e}")))?;
        if format!("{hash:016x}") != snap.data_hash {
            return Err(Error::Restore(
                "dataset changed since the snapshot was taken".into(),
            ));
        }
        Ok(Session {
            id: snap.id,
            config: snap.config,
            source: snap.source,
            schema: snap.schema,
            data_hash: hash,
            splits: Arc::new(splits),
            space: snap.space,
            archive: snap.archive,
            weight_box: snap.weight_box,
            budget: snap.budget,
            status: if snap.status == Status::Running {
                Status::Paused
            } else {
                snap.status
            },
            models: Arc::default(),
        })
    }
}
