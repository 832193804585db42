//! Pareto dominance, non-dominated filtering and the evaluation archive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::MeasureVector;
use crate::mobo::PipelineConfig;

/// `a` dominates `b`: no worse anywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::arg(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dominates_unchecked(a, b))
}

#[inline]
pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Indices of the non-dominated points, in input order. Equal vectors are
/// all kept.
pub fn front_indices<P: AsRef<[f64]>>(points: &[P]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let p = points[i].as_ref();
            !points.iter().any(|q| dominates_unchecked(q.as_ref(), p))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Full,
    Sub,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Full => "full",
            Provenance::Sub => "sub",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub config: PipelineConfig,
    pub measures: MeasureVector,
    pub provenance: Provenance,
    /// Archive index of the full evaluation a sub-record was derived from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
    /// 0 for the initial design, j for the j-th optimizer iteration.
    pub iteration: usize,
    /// Seconds since session start when the record was produced.
    pub wall_time: f64,
    /// True when the measures are a penalty for a failed training.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub penalized: bool,
}

impl EvalRecord {
    pub fn values(&self) -> &[f64] {
        self.measures.values()
    }

    /// Equality on everything except wall-clock time.
    pub fn same_outcome(&self, other: &EvalRecord) -> bool {
        self.config == other.config
            && self.measures == other.measures
            && self.provenance == other.provenance
            && self.parent == other.parent
            && self.iteration == other.iteration
            && self.penalized == other.penalized
    }
}

impl AsRef<[f64]> for EvalRecord {
    fn as_ref(&self) -> &[f64] {
        self.values()
    }
}

/// Records not dominated by any other record, in input order.
pub fn pareto_front(records: &[EvalRecord]) -> Result<Vec<EvalRecord>> {
    if records.is_empty() {
        return Err(Error::arg("pareto front of an empty record list"));
    }
    check_arity(records.iter(), records[0].measures.len())?;
    Ok(front_indices(records)
        .into_iter()
        .map(|i| records[i].clone())
        .collect())
}

fn check_arity<'a>(records: impl Iterator<Item = &'a EvalRecord>, k: usize) -> Result<()> {
    for r in records {
        if r.measures.len() != k {
            return Err(Error::arg(format!(
                "record has {} measures, expected {k}",
                r.measures.len()
            )));
        }
    }
    Ok(())
}

/// Append-only set of evaluations sharing one objective list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    k: usize,
    records: Vec<EvalRecord>,
}

impl Archive {
    pub fn new(k: usize) -> Self {
        Archive {
            k,
            records: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn full_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.provenance == Provenance::Full)
            .count()
    }

    /// Appends and returns the new record's index.
    pub fn push(&mut self, record: EvalRecord) -> Result<usize> {
        if record.measures.len() != self.k {
            return Err(Error::arg(format!(
                "record has {} measures, archive expects {}",
                record.measures.len(),
                self.k
            )));
        }
        if record.measures.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("non-finite measure value"));
        }
        match (record.provenance, record.parent) {
            (Provenance::Full, None) => {}
            (Provenance::Sub, Some(p))
                if p < self.records.len() && self.records[p].provenance == Provenance::Full => {}
            _ => {
                return Err(Error::arg(
                    "sub records need a full parent, full records none",
                ))
            }
        }
        self.records.push(record);
        Ok(self.records.len() - 1)
    }

    pub fn front_indices(&self) -> Vec<usize> {
        front_indices(&self.records)
    }

    pub fn front(&self) -> Vec<&EvalRecord> {
        self.front_indices()
            .into_iter()
            .map(|i| &self.records[i])
            .collect()
    }

    /// Per-objective (min, max) over all records; `None` when empty.
    pub fn bounds(&self) -> Option<Vec<(f64, f64)>> {
        let first = self.records.first()?;
        let mut b: Vec<(f64, f64)> = first.values().iter().map(|&v| (v, v)).collect();
        for r in &self.records[1..] {
            for (slot, &v) in b.iter_mut().zip(r.values()) {
                slot.0 = slot.0.min(v);
                slot.1 = slot.1.max(v);
            }
        }
        Some(b)
    }

    /// Archives match record-for-record, ignoring wall-clock time.
    pub fn same_outcome(&self, other: &Archive) -> bool {
        self.k == other.k
            && self.records.len() == other.records.len()
            && self
                .records
                .iter()
                .zip(&other.records)
                .all(|(a, b)| a.same_outcome(b))
    }
}

/// The candidates that lie on the front of archive ∪ candidates. The archive
/// is not modified.
pub fn filter_subevals(archive: &Archive, candidates: &[EvalRecord]) -> Result<Vec<EvalRecord>> {
    if candidates.iter().any(|c| c.provenance != Provenance::Sub) {
        return Err(Error::arg(
            "filter_subevals expects sub-evaluation candidates only",
        ));
    }
    check_arity(candidates.iter(), archive.k())?;
    let existing = archive.front();
    Ok(candidates
        .iter()
        .filter(|c| {
            let v = c.values();
            !existing.iter().any(|r| dominates_unchecked(r.values(), v))
                && !candidates
                    .iter()
                    .any(|o| dominates_unchecked(o.values(), v))
        })
        .cloned()
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbt::BoosterParams;

    fn rec(v: &[f64]) -> EvalRecord {
        EvalRecord {
            config: PipelineConfig {
                booster: BoosterParams::default(),
                nrounds: 10,
                thr: 0.5,
            },
            measures: MeasureVector(v.to_vec()),
            provenance: Provenance::Full,
            parent: None,
            iteration: 0,
            wall_time: 0.0,
            penalized: false,
        }
    }

    #[test]
    fn dominance_cases() {
        assert!(dominates(&[0.1, 0.2], &[0.2, 0.3]).unwrap());
        assert!(!dominates(&[0.1, 0.3], &[0.2, 0.2]).unwrap());
        assert!(!dominates(&[0.2, 0.2], &[0.1, 0.3]).unwrap());
        assert!(!dominates(&[0.1, 0.2], &[0.1, 0.2]).unwrap());
        assert!(dominates(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn four_point_front() {
        let rs: Vec<_> = [[0.1, 0.9], [0.9, 0.1], [0.5, 0.5], [0.6, 0.6]]
            .iter()
            .map(|v| rec(v))
            .collect();
        let f = pareto_front(&rs).unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f[2].values(), &[0.5, 0.5]);
        assert_eq!(pareto_front(&rs[..1]).unwrap().len(), 1);
        assert!(pareto_front(&[]).is_err());
    }

    #[test]
    fn ties_kept() {
        let rs = vec![rec(&[0.2, 0.2]), rec(&[0.2, 0.2])];
        assert_eq!(front_indices(&rs), vec![0, 1]);
    }

    #[test]
    fn archive_invariants() {
        let mut a = Archive::new(2);
        assert!(a.push(rec(&[0.1])).is_err());
        let p = a.push(rec(&[0.3, 0.3])).unwrap();
        let mut sub = rec(&[0.2, 0.4]);
        sub.provenance = Provenance::Sub;
        assert!(a.push(sub.clone()).is_err());
        sub.parent = Some(p);
        a.push(sub).unwrap();
        assert_eq!(a.full_count(), 1);
        assert_eq!(a.bounds().unwrap(), vec![(0.2, 0.3), (0.3, 0.4)]);
    }

    #[test]
    fn subeval_filter() {
        let mut a = Archive::new(2);
        a.push(rec(&[0.3, 0.3])).unwrap();
        let mk = |v: &[f64]| {
            let mut r = rec(v);
            r.provenance = Provenance::Sub;
            r.parent = Some(0);
            r
        };
        let kept = filter_subevals(
            &a,
            &[
                mk(&[0.4, 0.4]),
                mk(&[0.3, 0.3]),
                mk(&[0.1, 0.5]),
                mk(&[0.1, 0.6]),
            ],
        )
        .unwrap();
        let vals: Vec<_> = kept.iter().map(|r| r.values().to_vec()).collect();
        assert_eq!(vals, vec![vec![0.3, 0.3], vec![0.1, 0.5]]);
        assert!(filter_subevals(&a, &[rec(&[0.0, 0.0])]).is_err());
        assert_eq!(a.len(), 1);
    }
}
