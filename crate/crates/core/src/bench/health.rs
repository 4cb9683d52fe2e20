use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{binary_column, read_table, Dataset, Task};

pub const HEALTH_PROXY: &str = "max_CharlsonIndex";

/// Binary condition labels passed through unchanged.
pub const HEALTH_CONDITIONS: [&str; 4] = ["MSC2a3", "METAB3", "ARTHSPIN", "NEUMENT"];

const COUNTS: [&str; 11] = [
    "LabCount_total",
    "LabCount_months",
    "DrugCount_total",
    "DrugCount_months",
    "no_Claims",
    "no_Providers",
    "no_Vendors",
    "no_PCPs",
    "PayDelay_total",
    "PayDelay_max",
    "PayDelay_min",
];

const SPECIALTIES: [&str; 13] = [
    "Anesthesiology",
    "Diagnostic Imaging",
    "Emergency",
    "General Practice",
    "Internal",
    "Laboratory",
    "Obstetrics and Gynecology",
    "Other",
    "Pathology",
    "Pediatrics",
    "Rehabilitation",
    "Specialty_?",
    "Surgery",
];

const PROCEDURE_GROUPS: [&str; 18] = [
    "ANES",
    "EM",
    "MED",
    "PL",
    "ProcedureGroup_?",
    "RAD",
    "SAS",
    "SCS",
    "SDS",
    "SEOA",
    "SGS",
    "SIS",
    "SMCD",
    "SMS",
    "SNS",
    "SO",
    "SRS",
    "SUS",
];

const PLACES: [&str; 9] = [
    "Ambulance",
    "Home",
    "Independent Lab",
    "Inpatient Hospital",
    "Office",
    "Other",
    "Outpatient Hospital",
    "PlaceSvc_?",
    "Urgent Care",
];

/// Feature columns of the per-patient table, in output order.
pub fn health_features() -> Vec<String> {
    let mut names: Vec<String> = COUNTS.iter().map(|s| s.to_string()).collect();
    names.extend(SPECIALTIES.iter().map(|s| format!("Specialty={s}")));
    names.extend(PROCEDURE_GROUPS.iter().map(|s| format!("ProcedureGroup={s}")));
    names.extend(PLACES.iter().map(|s| format!("PlaceSvc={s}")));
    names.push("Sex".to_string());
    names
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HealthSpec {
    pub age_column: String,
    /// Patients with `age >= age_threshold` form group 1.
    pub age_threshold: f64,
}

impl Default for HealthSpec {
    fn default() -> Self {
        HealthSpec {
            age_column: "age".to_string(),
            age_threshold: 60.0,
        }
    }
}

/// Reads a pre-aggregated per-patient CSV. The proxy task is
/// `max_CharlsonIndex > 0`; the condition columns must already be binary.
pub fn ingest_health(path: &Path, spec: &HealthSpec) -> Result<Dataset> {
    let features = health_features();
    let mut required: Vec<&str> = features.iter().map(String::as_str).collect();
    required.push(&spec.age_column);
    required.push(HEALTH_PROXY);
    required.extend(HEALTH_CONDITIONS);
    let table = read_table(path, &required, &[])?;
    let n = table.n_rows();

    let mut x = Array2::zeros((n, features.len()));
    for (j, name) in features.iter().enumerate() {
        for (i, &v) in table.column(name)?.iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    let sensitive = table
        .column(&spec.age_column)?
        .iter()
        .map(|&a| usize::from(a >= spec.age_threshold))
        .collect();

    let charlson = table.column(HEALTH_PROXY)?;
    if let Some(i) = charlson.iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidDataset(format!(
            "row {}: negative {HEALTH_PROXY} {}",
            i + 1,
            charlson[i]
        )));
    }
    let mut tasks = vec![Task {
        name: HEALTH_PROXY.to_string(),
        labels: charlson.iter().map(|&v| u8::from(v > 0.0)).collect(),
    }];
    for name in HEALTH_CONDITIONS {
        tasks.push(Task {
            name: name.to_string(),
            labels: binary_column(name, table.column(name)?)?,
        });
    }
    Dataset::new(x, features, sensitive, 2, tasks)
}
