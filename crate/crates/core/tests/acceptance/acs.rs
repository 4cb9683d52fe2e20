//! Reference statistics of the ACS transfer benchmark, checked against a
//! user-supplied person-record CSV named by `FRLBENCH_ACS_CSV`.

use std::path::PathBuf;

use frlbench_core::bench::{ingest_acs, AcsFilterSpec, ACS_PROXY};
use frlbench_core::criteria::measure_task;
use frlbench_core::eval::Protocol;
use frlbench_core::tabular::split;

use crate::Outcome;

pub const CSV_VAR: &str = "FRLBENCH_ACS_CSV";
const REFERENCE_ROWS: f64 = 183_896.0;
const TEST_FRACTION: f64 = 0.2;

struct Reference {
    task: &'static str,
    dp: f64,
    smc: f64,
    ub_accuracy: f64,
    mb_accuracy: f64,
}

const REFERENCE: [Reference; 5] = [
    Reference { task: "PINCP_50K", dp: 0.065, smc: 1.000, ub_accuracy: 0.800, mb_accuracy: 0.642 },
    Reference { task: "PERNP", dp: 0.066, smc: 0.863, ub_accuracy: 0.842, mb_accuracy: 0.779 },
    Reference { task: "PINCP_30K", dp: 0.055, smc: 0.810, ub_accuracy: 0.801, mb_accuracy: 0.547 },
    Reference { task: "JWMNP", dp: 0.066, smc: 0.593, ub_accuracy: 0.727, mb_accuracy: 0.595 },
    Reference { task: "WKW", dp: 0.054, smc: 0.545, ub_accuracy: 0.821, mb_accuracy: 0.730 },
];

pub fn acs_table() -> Outcome {
    let Some(path) = std::env::var_os(CSV_VAR).map(PathBuf::from) else {
        return Outcome::Skip(format!("set {CSV_VAR} to a person-record CSV to run"));
    };
    let d = match ingest_acs(&path, &AcsFilterSpec::default()) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(format!("ingest {}: {e}", path.display())),
    };
    let mut misses = Vec::new();
    let rows = d.n() as f64;
    if (rows / REFERENCE_ROWS - 1.0).abs() > 0.01 {
        misses.push(format!("rows {rows} vs {REFERENCE_ROWS}"));
    }
    let s = split(&d, TEST_FRACTION, 0).unwrap();
    let protocol = Protocol::default();
    let mut lines = Vec::new();
    for r in &REFERENCE {
        let st = match measure_task(&s, ACS_PROXY, r.task, &protocol) {
            Ok(st) => st,
            Err(e) => return Outcome::Fail(format!("{}: {e}", r.task)),
        };
        let (smc, ub, dp, mb) = (
            st.smc_with_proxy,
            st.ub_accuracy.unwrap_or(f64::NAN),
            st.ub_dp.unwrap_or(f64::NAN),
            st.mb_accuracy,
        );
        lines.push(format!("{} smc {smc:.3} ub {ub:.3} dp {dp:.3} mb {mb:.3}", r.task));
        let checks = [
            ("smc", smc, r.smc, 0.01),
            ("ub accuracy", ub, r.ub_accuracy, 0.02),
            ("ub dp", dp, r.dp, 0.02),
            ("mb accuracy", mb, r.mb_accuracy, 0.01),
        ];
        for (name, got, want, tol) in checks {
            // NaN fails the comparison
            let within = (got - want).abs() <= tol;
            if !within {
                misses.push(format!("{} {name} {got:.3} vs {want:.3}", r.task));
            }
        }
    }
    let detail = format!("{} rows; {}", d.n(), lines.join("; "));
    if misses.is_empty() {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(format!("{detail}; outside tolerance: {}", misses.join(", ")))
    }
}
