//! In-memory tabular datasets: loading, splitting, normalization and
//! categorical expansion, plus the on-disk dataset/split format.
//!
//! A persisted dataset directory contains
//!
//! * `dataset.csv` with the feature columns, a `sensitive` column and one
//!   `task:<name>` column per binary label,
//! * `dataset.json` with the column roles,
//! * after splitting, `train.csv`, `test.csv` (same layout) and `split.json`
//!   recording the seed, the fraction and both row-index lists.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SENSITIVE_COLUMN: &str = "sensitive";
pub const TASK_PREFIX: &str = "task:";
pub const DATASET_CSV: &str = "dataset.csv";
pub const DATASET_META: &str = "dataset.json";
pub const TRAIN_CSV: &str = "train.csv";
pub const TEST_CSV: &str = "test.csv";
pub const SPLIT_META: &str = "split.json";

/// Columns with a standard deviation below this are treated as constant.
pub const CONSTANT_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub name: String,
    pub labels: Vec<u8>,
}

/// Feature matrix, sensitive group ids and named binary task labels.
///
/// Rows are samples. Sensitive ids lie in `0..n_groups`. Datasets built
/// with [`Dataset::new`] have every group populated; row subsets produced
/// by [`Dataset::select_rows`] may leave a group empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    feature_names: Vec<String>,
    sensitive: Vec<usize>,
    n_groups: usize,
    tasks: Vec<Task>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        feature_names: Vec<String>,
        sensitive: Vec<usize>,
        n_groups: usize,
        tasks: Vec<Task>,
    ) -> Result<Self> {
        let d = Dataset {
            features,
            feature_names,
            sensitive,
            n_groups,
            tasks,
        };
        d.check_shape()?;
        let mut seen = vec![false; d.n_groups];
        for &g in &d.sensitive {
            seen[g] = true;
        }
        if let Some(empty) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidDataset(format!(
                "sensitive group {empty} has no rows"
            )));
        }
        Ok(d)
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.features.nrows();
        if self.feature_names.len() != self.features.ncols() {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} columns",
                self.feature_names.len(),
                self.features.ncols()
            )));
        }
        let mut names = HashSet::new();
        for name in &self.feature_names {
            if !names.insert(name.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate feature name \"{name}\""
                )));
            }
        }
        if self.n_groups < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 sensitive groups, got {}",
                self.n_groups
            )));
        }
        if self.sensitive.len() != n {
            return Err(Error::InvalidDataset(format!(
                "sensitive vector has {} rows, features have {n}",
                self.sensitive.len()
            )));
        }
        if let Some(&g) = self.sensitive.iter().find(|&&g| g >= self.n_groups) {
            return Err(Error::InvalidDataset(format!(
                "sensitive id {g} outside 0..{}",
                self.n_groups
            )));
        }
        let mut task_names = HashSet::new();
        for task in &self.tasks {
            if !task_names.insert(task.name.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate task \"{}\"",
                    task.name
                )));
            }
            if task.labels.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "task \"{}\" has {} rows, features have {n}",
                    task.name,
                    task.labels.len()
                )));
            }
            if let Some(&v) = task.labels.iter().find(|&&v| v > 1) {
                return Err(Error::InvalidDataset(format!(
                    "task \"{}\" has non-binary label {v}",
                    task.name
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn sensitive(&self) -> &[usize] {
        &self.sensitive
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task_names(&self) -> Vec<&str> {
        self.tasks.iter().map(|t| t.name.as_str()).collect()
    }

    pub fn has_task(&self, name: &str) -> bool {
        self.tasks.iter().any(|t| t.name == name)
    }

    pub fn task(&self, name: &str) -> Result<&[u8]> {
        self.tasks
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.labels.as_slice())
            .ok_or_else(|| Error::UnknownTask(name.to_string()))
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Rows in the given order. Group ids keep their meaning, so a group may
    /// end up empty in the result.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            sensitive: rows.iter().map(|&r| self.sensitive[r]).collect(),
            n_groups: self.n_groups,
            tasks: self
                .tasks
                .iter()
                .map(|t| Task {
                    name: t.name.clone(),
                    labels: rows.iter().map(|&r| t.labels[r]).collect(),
                })
                .collect(),
        }
    }

    /// Same rows, sensitive ids and tasks with a new feature matrix.
    pub fn with_features(&self, features: Array2<f64>, names: Vec<String>) -> Result<Dataset> {
        if features.nrows() != self.n() {
            return Err(Error::LengthMismatch {
                left: features.nrows(),
                right: self.n(),
            });
        }
        let d = Dataset {
            features,
            feature_names: names,
            sensitive: self.sensitive.clone(),
            n_groups: self.n_groups,
            tasks: self.tasks.clone(),
        };
        d.check_shape()?;
        Ok(d)
    }
}

/// Train/test partition of a source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    pub test_fraction: f64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Seeded uniform random split. The test side gets `round(test_fraction * n)`
/// rows; both index lists are returned in ascending order.
pub fn split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitDataset> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n = d.n();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "cannot split a dataset with {n} rows"
        )));
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} leaves an empty side for n = {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test_indices = perm[..n_test].to_vec();
    let mut train_indices = perm[n_test..].to_vec();
    test_indices.sort_unstable();
    train_indices.sort_unstable();
    Ok(SplitDataset {
        train: d.select_rows(&train_indices),
        test: d.select_rows(&test_indices),
        seed,
        test_fraction,
        train_indices,
        test_indices,
    })
}

/// Per-column z-score parameters (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl NormStats {
    pub fn fit(x: ArrayView2<'_, f64>) -> NormStats {
        let n = x.nrows().max(1) as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut stds = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            means.push(mean);
            stds.push(var.sqrt());
        }
        NormStats { means, stds }
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                found: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (mean, std) = (self.means[j], self.stds[j]);
            if std < CONSTANT_STD {
                col.fill(0.0);
            } else {
                col.mapv_inplace(|v| (v - mean) / std);
            }
        }
        Ok(out)
    }
}

pub fn fit_normalize(train: &Dataset) -> NormStats {
    NormStats::fit(train.features())
}

pub fn apply_normalize(d: &Dataset, stats: &NormStats) -> Result<Dataset> {
    let x = stats.apply(d.features())?;
    d.with_features(x, d.feature_names.clone())
}

/// Expands each named integer-coded column into one binary column per
/// observed code, named `col=code`, in place of the original column.
pub fn one_hot(d: &Dataset, columns: &[&str]) -> Result<Dataset> {
    let mut targets = Vec::with_capacity(columns.len());
    for &c in columns {
        targets.push(d.column_index(c)?);
    }
    let x = d.features();
    let mut names = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (j, name) in d.feature_names.iter().enumerate() {
        let col = x.column(j);
        if !targets.contains(&j) {
            names.push(name.clone());
            cols.push(col.to_vec());
            continue;
        }
        let mut codes = BTreeSet::new();
        for (row, &v) in col.iter().enumerate() {
            if v.fract() != 0.0 || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "column \"{name}\" row {} holds non-integer code {v}",
                    row + 1
                )));
            }
            codes.insert(v as i64);
        }
        for code in codes {
            names.push(format!("{name}={code}"));
            cols.push(
                col.iter()
                    .map(|&v| if v as i64 == code { 1.0 } else { 0.0 })
                    .collect(),
            );
        }
    }
    let n = d.n();
    let mut out = Array2::zeros((n, cols.len()));
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    d.with_features(out, names)
}

// ---------------------------------------------------------------------------
// CSV input

/// Column-major numeric table read from a headed CSV file.
#[derive(Debug, Clone)]
pub struct RawTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n_rows: usize,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "NaN" | "nan" | "null")
}

/// Reads the `required` columns of a CSV file as numbers. Cells in
/// `nullable` columns may be blank and come back as NaN; a blank anywhere
/// else is an error. Row numbers in errors count data rows from 1.
pub fn read_table(path: &Path, required: &[&str], nullable: &[&str]) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let mut positions = Vec::with_capacity(required.len());
    for &name in required {
        let pos = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        positions.push(pos);
    }
    let mut columns = vec![Vec::new(); required.len()];
    let mut n_rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let row = i + 1;
        if record.len() != headers.len() {
            return Err(Error::RaggedRow {
                row,
                expected: headers.len(),
                found: record.len(),
            });
        }
        for (k, &pos) in positions.iter().enumerate() {
            let cell = record[pos].trim();
            let value = if is_missing(cell) {
                if !nullable.contains(&required[k]) {
                    return Err(Error::MissingValue {
                        row,
                        column: required[k].to_string(),
                    });
                }
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    column: required[k].to_string(),
                    value: cell.to_string(),
                })?
            };
            columns[k].push(value);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(RawTable {
        names: required.iter().map(|s| s.to_string()).collect(),
        columns,
        n_rows,
    })
}

/// Column roles for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<String>,
    pub sensitive: String,
    /// `(task name, column name)` pairs.
    pub tasks: Vec<(String, String)>,
    /// Group count; inferred as `max id + 1` when absent.
    pub n_groups: Option<usize>,
}

impl Schema {
    fn columns(&self) -> Vec<&str> {
        let mut cols: Vec<&str> = self.features.iter().map(String::as_str).collect();
        cols.push(&self.sensitive);
        cols.extend(self.tasks.iter().map(|(_, c)| c.as_str()));
        cols
    }
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    let cols = schema.columns();
    let table = read_table(path, &cols, &[])?;
    let n = table.n_rows();
    let mut features = Array2::zeros((n, schema.features.len()));
    for (j, name) in schema.features.iter().enumerate() {
        for (i, &v) in table.column(name)?.iter().enumerate() {
            features[[i, j]] = v;
        }
    }
    let sensitive = table
        .column(&schema.sensitive)?
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v < 0.0 || v.fract() != 0.0 {
                Err(Error::InvalidDataset(format!(
                    "row {}: sensitive value {v} is not a group id",
                    i + 1
                )))
            } else {
                Ok(v as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let n_groups = schema
        .n_groups
        .unwrap_or_else(|| sensitive.iter().max().map_or(0, |m| m + 1));
    let mut tasks = Vec::with_capacity(schema.tasks.len());
    for (name, column) in &schema.tasks {
        tasks.push(Task {
            name: name.clone(),
            labels: binary_column(column, table.column(column)?)?,
        });
    }
    Dataset::new(features, schema.features.clone(), sensitive, n_groups, tasks)
}

pub(crate) fn binary_column(name: &str, values: &[f64]) -> Result<Vec<u8>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(Error::NonBinary {
                    column: name.to_string(),
                    row: i + 1,
                    value: v,
                })
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Persistence

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub name: String,
    pub feature_names: Vec<String>,
    pub tasks: Vec<String>,
    pub n_groups: usize,
    /// Suggested proxy task, if the builder knows one.
    #[serde(default)]
    pub proxy: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMeta {
    pub format_version: u32,
    pub split_id: String,
    pub seed: u64,
    pub test_fraction: f64,
    pub n: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

fn schema_for(meta: &DatasetMeta) -> Schema {
    Schema {
        features: meta.feature_names.clone(),
        sensitive: SENSITIVE_COLUMN.to_string(),
        tasks: meta
            .tasks
            .iter()
            .map(|t| (t.clone(), format!("{TASK_PREFIX}{t}")))
            .collect(),
        n_groups: Some(meta.n_groups),
    }
}

pub fn write_dataset_csv(path: &Path, d: &Dataset) -> Result<()> {
    for name in &d.feature_names {
        if name == SENSITIVE_COLUMN || name.starts_with(TASK_PREFIX) {
            return Err(Error::InvalidDataset(format!(
                "feature name \"{name}\" collides with a reserved column"
            )));
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header: Vec<String> = d.feature_names.clone();
    header.push(SENSITIVE_COLUMN.to_string());
    header.extend(d.tasks.iter().map(|t| format!("{TASK_PREFIX}{}", t.name)));
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..d.n() {
        row.clear();
        row.extend(d.features.row(i).iter().map(|v| v.to_string()));
        row.push(d.sensitive[i].to_string());
        row.extend(d.tasks.iter().map(|t| t.labels[i].to_string()));
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    atomic_write(path, text.as_bytes())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Writes through a temporary sibling file and renames it into place.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn save_dataset(dir: &Path, name: &str, d: &Dataset, proxy: Option<&str>) -> Result<()> {
    ensure_dir(dir)?;
    write_dataset_csv(&dir.join(DATASET_CSV), d)?;
    let meta = DatasetMeta {
        format_version: 1,
        name: name.to_string(),
        feature_names: d.feature_names.clone(),
        tasks: d.tasks.iter().map(|t| t.name.clone()).collect(),
        n_groups: d.n_groups,
        proxy: proxy.map(str::to_string),
    };
    write_json(&dir.join(DATASET_META), &meta)
}

pub fn load_meta(dir: &Path) -> Result<DatasetMeta> {
    read_json(&dir.join(DATASET_META))
}

pub fn load_dataset(dir: &Path) -> Result<(DatasetMeta, Dataset)> {
    let meta = load_meta(dir)?;
    let d = load_csv(&dir.join(DATASET_CSV), &schema_for(&meta))?;
    Ok((meta, d))
}

fn file_digest(path: &Path) -> Result<Sha256> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(h)
}

/// Splits the dataset stored in `dir` and writes the split next to it.
pub fn split_dir(dir: &Path, test_fraction: f64, seed: u64) -> Result<SplitDataset> {
    let (_, d) = load_dataset(dir)?;
    let s = split(&d, test_fraction, seed)?;
    let mut h = file_digest(&dir.join(DATASET_CSV))?;
    h.update(seed.to_le_bytes());
    h.update(test_fraction.to_le_bytes());
    let split_id = hex::encode(&h.finalize()[..8]);
    write_dataset_csv(&dir.join(TRAIN_CSV), &s.train)?;
    write_dataset_csv(&dir.join(TEST_CSV), &s.test)?;
    let meta = SplitMeta {
        format_version: 1,
        split_id,
        seed,
        test_fraction,
        n: d.n(),
        train_indices: s.train_indices.clone(),
        test_indices: s.test_indices.clone(),
    };
    write_json(&dir.join(SPLIT_META), &meta)?;
    Ok(s)
}

/// A split loaded back from disk together with its metadata.
#[derive(Debug, Clone)]
pub struct StoredSplit {
    pub dir: PathBuf,
    pub meta: DatasetMeta,
    pub split_meta: SplitMeta,
    pub split: SplitDataset,
}

pub fn load_split(dir: &Path) -> Result<StoredSplit> {
    let meta = load_meta(dir)?;
    let split_meta: SplitMeta = read_json(&dir.join(SPLIT_META))?;
    let schema = schema_for(&meta);
    let train = load_csv_subset(&dir.join(TRAIN_CSV), &schema)?;
    let test = load_csv_subset(&dir.join(TEST_CSV), &schema)?;
    if train.n() != split_meta.train_indices.len() || test.n() != split_meta.test_indices.len() {
        return Err(Error::InvalidDataset(format!(
            "split files in {} disagree with {SPLIT_META}",
            dir.display()
        )));
    }
    Ok(StoredSplit {
        dir: dir.to_path_buf(),
        meta,
        split: SplitDataset {
            train,
            test,
            seed: split_meta.seed,
            test_fraction: split_meta.test_fraction,
            train_indices: split_meta.train_indices.clone(),
            test_indices: split_meta.test_indices.clone(),
        },
        split_meta,
    })
}

// A split side may legitimately miss a group, so the nonempty-group check of
// `Dataset::new` is skipped here.
fn load_csv_subset(path: &Path, schema: &Schema) -> Result<Dataset> {
    let full = Schema {
        n_groups: None,
        ..schema.clone()
    };
    let table_schema = full.columns();
    let table = read_table(path, &table_schema, &[])?;
    let n = table.n_rows();
    let mut features = Array2::zeros((n, schema.features.len()));
    for (j, name) in schema.features.iter().enumerate() {
        for (i, &v) in table.column(name)?.iter().enumerate() {
            features[[i, j]] = v;
        }
    }
    let sensitive: Vec<usize> = table
        .column(&schema.sensitive)?
        .iter()
        .map(|&v| v as usize)
        .collect();
    let mut tasks = Vec::new();
    for (name, column) in &schema.tasks {
        tasks.push(Task {
            name: name.clone(),
            labels: binary_column(column, table.column(column)?)?,
        });
    }
    let d = Dataset {
        features,
        feature_names: schema.features.clone(),
        sensitive,
        n_groups: schema.n_groups.unwrap_or(2),
        tasks,
    };
    d.check_shape()?;
    Ok(d)
}

// ---------------------------------------------------------------------------
// Representation exchange files

/// Writes a representation matrix as CSV with header `z0..z{d-1}`.
pub fn write_reps_csv(path: &Path, reps: ArrayView2<'_, f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header: Vec<String> = (0..reps.ncols()).map(|j| format!("z{j}")).collect();
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for row in reps.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a representation CSV; the header must be exactly `z0..z{d-1}`.
pub fn read_reps_csv(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let names: Vec<String> = (0..headers.len()).map(|j| format!("z{j}")).collect();
    for (j, h) in headers.iter().enumerate() {
        if h.trim() != names[j] {
            return Err(Error::MissingColumn(names[j].clone()));
        }
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    drop(reader);
    let table = read_table(path, &refs, &[])?;
    let mut out = Array2::zeros((table.n_rows(), names.len()));
    for (j, name) in names.iter().enumerate() {
        for (i, &v) in table.column(name)?.iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    Ok(out)
}
