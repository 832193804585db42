use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Session;
use crate::error::{Error, Result};
use crate::measures::{Evaluator, MeasureId};
use crate::mobo::PipelineConfig;
use crate::pareto::Provenance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportSplit {
    Valid,
    Test,
}

impl FromStr for ReportSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valid" => Ok(ReportSplit::Valid),
            "test" => Ok(ReportSplit::Test),
            other => Err(Error::arg(format!(
                "unknown split `{other}` (expected valid or test)"
            ))),
        }
    }
}

impl fmt::Display for ReportSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportSplit::Valid => "valid",
            ReportSplit::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    /// Archive index of the record.
    pub index: usize,
    pub config: PipelineConfig,
    pub provenance: Provenance,
    pub iteration: usize,
    pub measures: Vec<f64>,
}

/// Validation Pareto front, optionally re-scored on the test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontTable {
    pub split: ReportSplit,
    pub measures: Vec<MeasureId>,
    pub rows: Vec<FrontRow>,
}

const CONFIG_COLUMNS: [&str; 9] = [
    "eta",
    "max_depth",
    "min_child_weight",
    "subsample",
    "colsample",
    "lambda",
    "gamma",
    "nrounds",
    "thr",
];

impl FrontTable {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["index".to_string()];
        h.extend(CONFIG_COLUMNS.iter().map(|c| c.to_string()));
        h.extend(self.measures.iter().map(|m| m.to_string()));
        h.push("provenance".into());
        h.push("iteration".into());
        h
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for r in &self.rows {
            let b = &r.config.booster;
            let mut rec = vec![
                r.index.to_string(),
                b.eta.to_string(),
                b.max_depth.to_string(),
                b.min_child_weight.to_string(),
                b.subsample.to_string(),
                b.colsample.to_string(),
                b.lambda.to_string(),
                b.gamma.to_string(),
                r.config.nrounds.to_string(),
                r.config.thr.to_string(),
            ];
            rec.extend(r.measures.iter().map(|v| v.to_string()));
            rec.push(r.provenance.as_str().to_string());
            rec.push(r.iteration.to_string());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Fixed-width text rendering for terminals.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:>6} {:>7} {:>5} {:>4}", "index", "nrounds", "thr", "prov");
        for m in &self.measures {
            out.push_str(&format!(" {:>22}", m.as_str()));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{:>6} {:>7} {:>5.2} {:>4}",
                r.index,
                r.config.nrounds,
                r.config.thr,
                r.provenance.as_str()
            ));
            for v in &r.measures {
                out.push_str(&format!(" {v:>22.6}"));
            }
            out.push('\n');
        }
        out
    }
}

/// One optimizer iteration on the optimization path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub iteration: usize,
    /// Measures of the iteration's full evaluation.
    pub values: Vec<f64>,
    /// Per-measure minimum over every record up to this iteration.
    pub best: Vec<f64>,
}

impl Session {
    /// The validation front sorted by the first objective (ties by archive
    /// index). With `ReportSplit::Test` every front configuration is
    /// re-scored on the test split from its model's fresh test margins.
    pub fn report(&self, split: ReportSplit) -> Result<FrontTable> {
        if self.archive.is_empty() {
            return Err(Error::Status("archive is empty".into()));
        }
        let mut idx = self.archive.front_indices();
        let recs = self.archive.records();
        idx.sort_by(|&a, &b| {
            recs[a].values()[0]
                .total_cmp(&recs[b].values()[0])
                .then(a.cmp(&b))
        });
        let measures = match split {
            ReportSplit::Valid => idx
                .iter()
                .map(|&i| recs[i].values().to_vec())
                .collect::<Vec<_>>(),
            ReportSplit::Test => self.rescore_on_test(&idx)?,
        };
        Ok(FrontTable {
            split,
            measures: self.measure_ids(),
            rows: idx
                .iter()
                .zip(measures)
                .map(|(&i, m)| FrontRow {
                    index: i,
                    config: recs[i].config.clone(),
                    provenance: recs[i].provenance,
                    iteration: recs[i].iteration,
                    measures: m,
                })
                .collect(),
        })
    }

    fn rescore_on_test(&self, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
        let recs = self.archive.records();
        let test = &self.splits.test;
        let mut by_parent: HashMap<usize, Vec<usize>> = HashMap::new();
        for &i in idx {
            by_parent
                .entry(recs[i].parent.unwrap_or(i))
                .or_default()
                .push(i);
        }
        let mut out: HashMap<usize, Vec<f64>> = HashMap::new();
        let mut parents: Vec<_> = by_parent.into_iter().collect();
        parents.sort_by_key(|p| p.0);
        for (parent, members) in parents {
            let model = self.model_for(parent)?;
            let staged = model.staged_margins(test)?;
            let ev = Evaluator::new(&model, test, &staged, &self.config.settings);
            for i in members {
                let c = &recs[i].config;
                let v = ev.evaluate(&self.config.measures, c.nrounds as usize, c.thr)?;
                out.insert(i, v.0);
            }
        }
        Ok(idx
            .iter()
            .map(|i| out.remove(i).expect("every front row scored"))
            .collect())
    }

    /// Per-iteration values and running best per measure.
    pub fn path(&self) -> Vec<PathPoint> {
        let k = self.archive.k();
        let mut best = vec![f64::INFINITY; k];
        let mut points = Vec::new();
        let recs = self.archive.records();
        let mut i = 0;
        while i < recs.len() {
            let it = recs[i].iteration;
            let mut full = None;
            while i < recs.len() && recs[i].iteration == it {
                for (b, &v) in best.iter_mut().zip(recs[i].values()) {
                    *b = b.min(v);
                }
                if recs[i].provenance == Provenance::Full && full.is_none() {
                    full = Some(recs[i].values().to_vec());
                }
                i += 1;
            }
            if it > 0 {
                if let Some(values) = full {
                    points.push(PathPoint {
                        iteration: it,
                        values,
                        best: best.clone(),
                    });
                }
            }
        }
        points
    }
}
