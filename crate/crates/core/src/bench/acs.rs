use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{one_hot, read_table, Dataset, Task};

pub const ACS_PROXY: &str = "PINCP_50K";

/// Feature columns taken from the person records, in output order.
pub const ACS_FEATURES: [&str; 19] = [
    "AGEP", "ANC", "CIT", "COW", "DEAR", "DEYE", "DIS", "DREM", "ESP", "JWTR", "MAR", "NATIVITY",
    "RAC1P", "RELP", "SCHL", "SEX", "WKHP", "PUMA", "POWPUMA",
];

/// Nominal codes expanded into indicator columns.
pub const ACS_CATEGORICAL: [&str; 8] = ["ANC", "CIT", "COW", "ESP", "JWTR", "MAR", "RAC1P", "RELP"];

const LABEL_SOURCES: [&str; 5] = ["PINCP", "PERNP", "JWMNP", "WKW", "PWGTP"];

/// Code written for blank ("not applicable") feature cells.
pub const NOT_APPLICABLE: f64 = -1.0;

/// Row filter applied to the person records. All predicates must hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcsFilterSpec {
    /// Keep `AGEP > age_above`.
    pub age_above: f64,
    /// Keep `AGEP < age_below`.
    pub age_below: f64,
    /// Keep `PINCP > income_above`.
    pub income_above: f64,
    /// Keep `WKHP >= min_hours`.
    pub min_hours: f64,
    /// Keep `PWGTP >= min_weight`.
    pub min_weight: f64,
}

impl Default for AcsFilterSpec {
    fn default() -> Self {
        AcsFilterSpec {
            age_above: 16.0,
            age_below: 90.0,
            income_above: 100.0,
            min_hours: 1.0,
            min_weight: 1.0,
        }
    }
}

impl AcsFilterSpec {
    /// NaN inputs never pass.
    pub fn keep(&self, age: f64, income: f64, hours: f64, weight: f64) -> bool {
        age > self.age_above
            && age < self.age_below
            && income > self.income_above
            && hours >= self.min_hours
            && weight >= self.min_weight
    }
}

/// Binary labels derived from the raw income, earnings, commute and weeks
/// worked columns. Blank inputs give 0.
fn labels(pincp: f64, pernp: f64, jwmnp: f64, wkw: f64) -> [u8; 5] {
    [
        u8::from(pincp > 50_000.0),
        u8::from(pincp > 30_000.0),
        u8::from(pernp > 70_000.0),
        u8::from(jwmnp > 20.0),
        u8::from(wkw == 1.0),
    ]
}

const TASK_NAMES: [&str; 5] = [ACS_PROXY, "PINCP_30K", "PERNP", "JWMNP", "WKW"];

/// Reads an ACS person-record CSV, filters rows and derives the five tasks.
/// The sensitive attribute is `SEX` (1 -> group 0, 2 -> group 1).
pub fn ingest_acs(path: &Path, spec: &AcsFilterSpec) -> Result<Dataset> {
    let mut required: Vec<&str> = ACS_FEATURES.to_vec();
    required.extend(LABEL_SOURCES);
    let nullable: Vec<&str> = required
        .iter()
        .copied()
        .filter(|&c| c != "AGEP" && c != "SEX")
        .collect();
    let table = read_table(path, &required, &nullable)?;

    let age = table.column("AGEP")?;
    let income = table.column("PINCP")?;
    let hours = table.column("WKHP")?;
    let weight = table.column("PWGTP")?;
    let kept: Vec<usize> = (0..table.n_rows())
        .filter(|&i| spec.keep(age[i], income[i], hours[i], weight[i]))
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidDataset("no rows pass the ACS filter".into()));
    }

    let mut features = Array2::zeros((kept.len(), ACS_FEATURES.len()));
    for (j, &name) in ACS_FEATURES.iter().enumerate() {
        let col = table.column(name)?;
        for (r, &i) in kept.iter().enumerate() {
            let v = col[i];
            features[[r, j]] = if v.is_nan() { NOT_APPLICABLE } else { v };
        }
    }
    let sex = table.column("SEX")?;
    let sensitive = kept
        .iter()
        .map(|&i| match sex[i] {
            1.0 => Ok(0),
            2.0 => Ok(1),
            v => Err(Error::InvalidDataset(format!(
                "row {}: SEX value {v} is not 1 or 2",
                i + 1
            ))),
        })
        .collect::<Result<Vec<usize>>>()?;

    let (pernp, jwmnp, wkw) = (
        table.column("PERNP")?,
        table.column("JWMNP")?,
        table.column("WKW")?,
    );
    let mut task_labels = vec![Vec::with_capacity(kept.len()); TASK_NAMES.len()];
    for &i in &kept {
        for (t, v) in labels(income[i], pernp[i], jwmnp[i], wkw[i]).into_iter().enumerate() {
            task_labels[t].push(v);
        }
    }
    let tasks = TASK_NAMES
        .iter()
        .zip(task_labels)
        .map(|(name, labels)| Task {
            name: name.to_string(),
            labels,
        })
        .collect();
    let d = Dataset::new(
        features,
        ACS_FEATURES.iter().map(|s| s.to_string()).collect(),
        sensitive,
        2,
        tasks,
    )?;
    one_hot(&d, &ACS_CATEGORICAL)
}
