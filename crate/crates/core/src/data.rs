//! Tabular ingestion, categorical encoding and seeded splitting.
//!
//! Features are stored column-major. Missing numeric cells are `NaN`; missing
//! categorical cells become the level `"missing"`. The target is mapped to
//! `{0, 1}` and the optional protected attribute to group labels `{0, 1}`
//! (levels in sorted order).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on levels per categorical column before one-hot encoding.
pub const MAX_LEVELS: usize = 1024;

pub const MISSING_LEVEL: &str = "missing";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub kind: ColumnKind,
}

/// Column declarations plus the roles of the target and protected columns.
///
/// This is also the JSON sidecar format:
/// `{"columns":[{"name":..,"kind":..}],"target":..,"protected":..,"positive_label":..}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnDef>,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protected: Option<String>,
    /// Target value treated as the positive class. Defaults to the larger of
    /// the two observed values in lexicographic order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_label: Option<String>,
    /// Feed the protected attribute to the model as an ordinary feature.
    #[serde(default)]
    pub include_protected: bool,
}

impl Schema {
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        if self.column(&self.target).is_none() {
            return Err(Error::Schema(format!(
                "target column `{}` not declared",
                self.target
            )));
        }
        if let Some(p) = &self.protected {
            if p == &self.target {
                return Err(Error::Schema(format!(
                    "column `{p}` cannot be both target and protected"
                )));
            }
            match self.column(p) {
                None => {
                    return Err(Error::Schema(format!(
                        "protected column `{p}` not declared"
                    )))
                }
                Some(c) if c.kind != ColumnKind::Categorical => {
                    return Err(Error::Schema(format!(
                        "protected column `{p}` must be categorical"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Columns that become model inputs, in declaration order.
    fn feature_columns(&self) -> impl Iterator<Item = &ColumnDef> {
        self.columns.iter().filter(move |c| {
            c.name != self.target
                && (self.include_protected || Some(&c.name) != self.protected.as_ref())
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureValues {
    /// `NaN` marks a missing cell.
    Numeric(Vec<f64>),
    Categorical {
        levels: Vec<String>,
        codes: Vec<u32>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    /// Index into [`Dataset::sources`]: the original column this feature came from.
    pub source: usize,
    /// One-hot indicator column (never perturbed by the robustness measure).
    pub indicator: bool,
    pub values: FeatureValues,
    /// `(min, max)` over non-missing values; `None` for categorical or all-missing.
    pub range: Option<(f64, f64)>,
}

impl Feature {
    fn numeric(name: String, source: usize, indicator: bool, values: Vec<f64>) -> Self {
        let range = numeric_range(&values);
        Feature {
            name,
            source,
            indicator,
            values: FeatureValues::Numeric(values),
            range,
        }
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match &self.values {
            FeatureValues::Numeric(v) => Some(v),
            FeatureValues::Categorical { .. } => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.values, FeatureValues::Numeric(_))
    }

    fn len(&self) -> usize {
        match &self.values {
            FeatureValues::Numeric(v) => v.len(),
            FeatureValues::Categorical { codes, .. } => codes.len(),
        }
    }

    fn select(&self, idx: &[usize]) -> Feature {
        match &self.values {
            FeatureValues::Numeric(v) => Feature::numeric(
                self.name.clone(),
                self.source,
                self.indicator,
                idx.iter().map(|&i| v[i]).collect(),
            ),
            FeatureValues::Categorical { levels, codes } => Feature {
                name: self.name.clone(),
                source: self.source,
                indicator: false,
                values: FeatureValues::Categorical {
                    levels: levels.clone(),
                    codes: idx.iter().map(|&i| codes[i]).collect(),
                },
                range: None,
            },
        }
    }
}

fn numeric_range(values: &[f64]) -> Option<(f64, f64)> {
    values
        .iter()
        .filter(|v| !v.is_nan())
        .fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Schema,
    /// Names of the original (pre-encoding) feature columns.
    pub sources: Vec<String>,
    pub features: Vec<Feature>,
    pub labels: Vec<u8>,
    pub groups: Option<Vec<u8>>,
    /// `[negative, positive]` target values as read from the file.
    pub label_levels: [String; 2],
    /// Protected attribute levels mapped to groups 0 and 1.
    pub group_levels: Option<[String; 2]>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn has_categoricals(&self) -> bool {
        self.features.iter().any(|f| !f.is_numeric())
    }

    /// Column-major views of every feature; fails if any column is categorical.
    pub fn numeric_columns(&self) -> Result<Vec<&[f64]>> {
        self.features
            .iter()
            .map(|f| {
                f.as_numeric().ok_or_else(|| {
                    Error::arg(format!(
                        "feature `{}` is categorical; encode categoricals first",
                        f.name
                    ))
                })
            })
            .collect()
    }

    /// Row `i` of an all-numeric dataset.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features
            .iter()
            .map(|f| f.as_numeric().map_or(f64::NAN, |v| v[i]))
            .collect()
    }

    /// New dataset with rows `idx` (in that order); ranges are recomputed.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            sources: self.sources.clone(),
            features: self.features.iter().map(|f| f.select(idx)).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            groups: self
                .groups
                .as_ref()
                .map(|g| idx.iter().map(|&i| g[i]).collect()),
            label_levels: self.label_levels.clone(),
            group_levels: self.group_levels.clone(),
        }
    }

    /// Replace the values of numeric feature `j`; the range is recomputed.
    pub fn set_numeric(&mut self, j: usize, values: Vec<f64>) -> Result<()> {
        let f = &mut self.features[j];
        if values.len() != f.len() {
            return Err(Error::arg("replacement column length mismatch"));
        }
        if !f.is_numeric() {
            return Err(Error::arg(format!("feature `{}` is not numeric", f.name)));
        }
        f.range = numeric_range(&values);
        f.values = FeatureValues::Numeric(values);
        Ok(())
    }

    /// Build a dataset directly from numeric columns (tests and synthetic tasks).
    pub fn from_numeric(
        names: &[&str],
        columns: Vec<Vec<f64>>,
        labels: Vec<u8>,
        groups: Option<Vec<u8>>,
    ) -> Result<Dataset> {
        if names.len() != columns.len() {
            return Err(Error::arg("names and columns differ in length"));
        }
        let n = labels.len();
        if columns.iter().any(|c| c.len() != n) || groups.as_ref().is_some_and(|g| g.len() != n) {
            return Err(Error::arg("column lengths differ from label count"));
        }
        if labels.iter().chain(groups.iter().flatten()).any(|&v| v > 1) {
            return Err(Error::arg("labels and groups must be 0 or 1"));
        }
        let mut cols: Vec<ColumnDef> = names
            .iter()
            .map(|n| ColumnDef {
                name: n.to_string(),
                kind: ColumnKind::Numeric,
            })
            .collect();
        cols.push(ColumnDef {
            name: "y".into(),
            kind: ColumnKind::Categorical,
        });
        let protected = groups.as_ref().map(|_| {
            cols.push(ColumnDef {
                name: "a".into(),
                kind: ColumnKind::Categorical,
            });
            "a".to_string()
        });
        let schema = Schema {
            columns: cols,
            target: "y".into(),
            protected,
            positive_label: Some("1".into()),
            include_protected: false,
        };
        let features = names
            .iter()
            .zip(columns)
            .enumerate()
            .map(|(j, (name, col))| Feature::numeric(name.to_string(), j, false, col))
            .collect();
        let has_groups = groups.is_some();
        Ok(Dataset {
            schema,
            sources: names.iter().map(|s| s.to_string()).collect(),
            features,
            labels,
            groups,
            label_levels: ["0".into(), "1".into()],
            group_levels: has_groups.then(|| ["0".into(), "1".into()]),
        })
    }
}

/// Options for CSV ingestion.
#[derive(Clone, Debug)]
pub struct IngestOptions {
    /// Cell values treated as missing (compared after trimming whitespace).
    pub missing_tokens: Vec<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            missing_tokens: vec![String::new(), "NA".into(), "?".into()],
        }
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    ingest_reader(file, schema, &IngestOptions::default())
}

pub fn ingest_csv_str(text: &str, schema: &Schema) -> Result<Dataset> {
    ingest_reader(text.as_bytes(), schema, &IngestOptions::default())
}

pub fn ingest_reader<R: Read>(reader: R, schema: &Schema, opts: &IngestOptions) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::Input("empty file".into()));
    }
    let header_set: BTreeSet<&str> = header.iter().map(String::as_str).collect();
    let schema_set: BTreeSet<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    if header_set != schema_set || header_set.len() != header.len() {
        return Err(Error::Schema(format!(
            "header {header:?} does not match schema columns {schema_set:?}"
        )));
    }
    let position: HashMap<&str, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();

    let is_missing = |s: &str| opts.missing_tokens.iter().any(|t| t == s);
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        for (col, cell) in raw.iter_mut().zip(rec.iter()) {
            col.push(cell.trim().to_string());
        }
    }
    let n = raw[0].len();
    if n == 0 {
        return Err(Error::Input("file contains no data rows".into()));
    }

    // Target.
    let target_col = &raw[position[schema.target.as_str()]];
    if let Some(i) = target_col.iter().position(|v| is_missing(v)) {
        return Err(Error::Schema(format!(
            "missing target value at row {}",
            i + 2
        )));
    }
    let distinct: BTreeSet<&str> = target_col.iter().map(String::as_str).collect();
    let label_levels: [String; 2] = match &schema.positive_label {
        Some(pos) => {
            if distinct.len() != 2 || !distinct.contains(pos.as_str()) {
                return Err(Error::Schema(format!(
                    "target must take exactly the values {{`{pos}`, <negative>}}, found {distinct:?}"
                )));
            }
            let neg = distinct.iter().find(|v| **v != pos.as_str()).unwrap();
            [neg.to_string(), pos.clone()]
        }
        None => {
            if distinct.len() != 2 {
                return Err(Error::Schema(format!(
                    "target must have exactly 2 distinct values, found {}",
                    distinct.len()
                )));
            }
            let mut it = distinct.iter();
            [
                it.next().unwrap().to_string(),
                it.next().unwrap().to_string(),
            ]
        }
    };
    let labels: Vec<u8> = target_col
        .iter()
        .map(|v| u8::from(*v == label_levels[1]))
        .collect();

    // Protected attribute.
    let (groups, group_levels) = match &schema.protected {
        None => (None, None),
        Some(p) => {
            let col = &raw[position[p.as_str()]];
            if let Some(i) = col.iter().position(|v| is_missing(v)) {
                return Err(Error::Schema(format!(
                    "missing protected value at row {}",
                    i + 2
                )));
            }
            let levels: BTreeSet<&str> = col.iter().map(String::as_str).collect();
            if levels.len() != 2 {
                return Err(Error::Schema(format!(
                    "protected column `{p}` must have exactly 2 distinct values, found {}",
                    levels.len()
                )));
            }
            let mut it = levels.iter();
            let lv = [
                it.next().unwrap().to_string(),
                it.next().unwrap().to_string(),
            ];
            let g = col.iter().map(|v| u8::from(*v == lv[1])).collect();
            (Some(g), Some(lv))
        }
    };

    let mut sources = Vec::new();
    let mut features = Vec::new();
    for def in schema.feature_columns() {
        let col = &raw[position[def.name.as_str()]];
        let source = sources.len();
        sources.push(def.name.clone());
        match def.kind {
            ColumnKind::Numeric => {
                let mut values = Vec::with_capacity(n);
                for (i, cell) in col.iter().enumerate() {
                    if is_missing(cell) {
                        values.push(f64::NAN);
                    } else {
                        let v: f64 = cell.parse().map_err(|_| Error::Parse {
                            row: i + 2,
                            message: format!("column `{}`: `{cell}` is not a number", def.name),
                        })?;
                        if !v.is_finite() {
                            return Err(Error::Parse {
                                row: i + 2,
                                message: format!("column `{}`: non-finite value", def.name),
                            });
                        }
                        values.push(v);
                    }
                }
                features.push(Feature::numeric(def.name.clone(), source, false, values));
            }
            ColumnKind::Categorical => {
                let cells: Vec<&str> = col
                    .iter()
                    .map(|c| {
                        if is_missing(c) {
                            MISSING_LEVEL
                        } else {
                            c.as_str()
                        }
                    })
                    .collect();
                let levels: Vec<String> = cells
                    .iter()
                    .copied()
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .map(String::from)
                    .collect();
                let index: HashMap<&str, u32> = levels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.as_str(), i as u32))
                    .collect();
                let codes = cells.iter().map(|c| index[c]).collect();
                features.push(Feature {
                    name: def.name.clone(),
                    source,
                    indicator: false,
                    values: FeatureValues::Categorical { levels, codes },
                    range: None,
                });
            }
        }
    }

    Ok(Dataset {
        schema: schema.clone(),
        sources,
        features,
        labels,
        groups,
        label_levels,
        group_levels,
    })
}

/// Replace every categorical feature with one indicator column per level,
/// named `<col>=<level>`. Numeric features pass through; applying the
/// function twice is the identity.
pub fn encode_categoricals(data: Dataset) -> Result<Dataset> {
    if !data.has_categoricals() {
        return Ok(data);
    }
    let Dataset {
        schema,
        sources,
        features,
        labels,
        groups,
        label_levels,
        group_levels,
    } = data;
    let mut out = Vec::with_capacity(features.len());
    for f in features {
        match f.values {
            FeatureValues::Numeric(_) => out.push(f),
            FeatureValues::Categorical { levels, codes } => {
                if levels.len() > MAX_LEVELS {
                    return Err(Error::Cardinality {
                        column: f.name,
                        levels: levels.len(),
                        limit: MAX_LEVELS,
                    });
                }
                for (li, level) in levels.iter().enumerate() {
                    let values = codes
                        .iter()
                        .map(|&c| if c as usize == li { 1.0 } else { 0.0 })
                        .collect();
                    out.push(Feature::numeric(
                        format!("{}={}", f.name, level),
                        f.source,
                        true,
                        values,
                    ));
                }
            }
        }
    }
    Ok(Dataset {
        schema,
        sources,
        features: out,
        labels,
        groups,
        label_levels,
        group_levels,
    })
}

/// Split fractions and seed. Defaults to stratified `(0.70, 0.15, 0.15)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            fractions: [0.70, 0.15, 0.15],
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return Err(Error::arg("split fractions must lie in (0, 1)"));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
    /// Row indices into the source dataset, each sorted ascending.
    pub indices: [Vec<usize>; 3],
    pub warnings: Vec<String>,
}

/// Largest-remainder apportionment of `total` over `weights` (which sum to 1).
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = total - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        out[i] += 1;
        rest -= 1;
    }
    out
}

/// Deterministic three-way split. Stratified splits keep every (class, split)
/// count within one of `n_class * fraction` while split sizes match the
/// unstratified apportionment exactly.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let n = data.n_rows();
    if n < 10 {
        return Err(Error::Input(format!(
            "{n} rows is too few for a three-way split (need at least 10)"
        )));
    }
    let mut sizes = apportion(n, &spec.fractions);
    // Every split must be nonempty.
    for s in 0..3 {
        if sizes[s] == 0 {
            let donor = (0..3).max_by_key(|&i| (sizes[i], usize::MAX - i)).unwrap();
            sizes[donor] -= 1;
            sizes[s] = 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    if spec.stratified {
        let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
        for (i, &y) in data.labels.iter().enumerate() {
            by_class.entry(y).or_default().push(i);
        }
        let classes: Vec<Vec<usize>> = by_class.into_values().collect();
        let counts = stratified_counts(
            &classes.iter().map(Vec::len).collect::<Vec<_>>(),
            &spec.fractions,
            &sizes,
        );
        for (class_rows, class_counts) in classes.into_iter().zip(counts) {
            let mut rows = class_rows;
            rows.shuffle(&mut rng);
            let mut start = 0;
            for (s, &c) in class_counts.iter().enumerate() {
                parts[s].extend_from_slice(&rows[start..start + c]);
                start += c;
            }
        }
    } else {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        let mut start = 0;
        for (s, &c) in sizes.iter().enumerate() {
            parts[s].extend_from_slice(&rows[start..start + c]);
            start += c;
        }
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }

    let mut warnings = Vec::new();
    if let Some(groups) = &data.groups {
        for (name, p) in ["train", "valid", "test"].iter().zip(parts.iter()) {
            let mut seen = [false; 2];
            for &i in p {
                seen[groups[i] as usize] = true;
            }
            if !(seen[0] && seen[1]) {
                let msg = format!("{name} split does not contain both protected groups");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }

    Ok(Splits {
        train: data.select_rows(&parts[0]),
        valid: data.select_rows(&parts[1]),
        test: data.select_rows(&parts[2]),
        indices: parts,
        warnings,
    })
}

/// Integer (class × split) table with row sums `class_sizes`, column sums
/// `split_sizes`, and each cell within one of `class_size * fraction`.
fn stratified_counts(
    class_sizes: &[usize],
    fractions: &[f64],
    split_sizes: &[usize],
) -> Vec<Vec<usize>> {
    let exact: Vec<Vec<f64>> = class_sizes
        .iter()
        .map(|&nc| fractions.iter().map(|f| f * nc as f64).collect())
        .collect();
    let mut counts: Vec<Vec<usize>> = exact
        .iter()
        .map(|row| row.iter().map(|e| e.floor() as usize).collect())
        .collect();
    let mut row_need: Vec<usize> = class_sizes
        .iter()
        .zip(&counts)
        .map(|(&nc, row)| nc - row.iter().sum::<usize>())
        .collect();
    let mut col_need: Vec<usize> = (0..fractions.len())
        .map(|s| split_sizes[s] - counts.iter().map(|r| r[s]).sum::<usize>())
        .collect();
    // Gale–Ryser greedy: largest row demand first, each to the columns with
    // the largest remaining demand (ties: larger fractional part, then index).
    let mut rows: Vec<usize> = (0..class_sizes.len()).collect();
    rows.sort_by(|&a, &b| row_need[b].cmp(&row_need[a]).then(a.cmp(&b)));
    for c in rows {
        let mut cols: Vec<usize> = (0..fractions.len()).collect();
        cols.sort_by(|&a, &b| {
            let fa = exact[c][a] - exact[c][a].floor();
            let fb = exact[c][b] - exact[c][b].floor();
            col_need[b]
                .cmp(&col_need[a])
                .then(fb.total_cmp(&fa))
                .then(a.cmp(&b))
        });
        for &s in cols.iter().take(row_need[c]) {
            counts[c][s] += 1;
            col_need[s] = col_need[s].saturating_sub(1);
        }
        row_need[c] = 0;
    }
    counts
}

/// Ingest, encode and split in one deterministic step.
pub fn prepare(data: Dataset, spec: &SplitSpec) -> Result<Splits> {
    let encoded = encode_categoricals(data)?;
    split(&encoded, spec)
}
