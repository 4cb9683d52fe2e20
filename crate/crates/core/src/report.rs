//! Plot-ready per-task output of a sweep: Pareto fronts with baseline
//! reference values, ordered by decreasing correlation with the proxy.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::TradeoffPoint;
use crate::pareto::pareto_front;
use crate::sweep::{Baseline, Baselines, TrialRecord, TrialStatus};
use crate::tabular::{atomic_write, write_json};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFront {
    pub task: String,
    pub smc_with_proxy: Option<f64>,
    pub front: Vec<TradeoffPoint>,
    pub n_points: usize,
    pub unfair_accuracy: f64,
    pub unfair_dp: f64,
    pub majority_accuracy: f64,
    pub csv: String,
    pub svg: Option<String>,
}

/// Fronts of every task with completed points, most proxy-correlated first.
pub fn task_fronts(records: &[TrialRecord], baselines: &Baselines) -> Result<Vec<(TaskFront, Baseline)>> {
    let mut by_task: BTreeMap<&str, Vec<TradeoffPoint>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status == TrialStatus::Completed) {
        for p in &r.points {
            by_task.entry(&p.task).or_default().push(p.clone());
        }
    }
    let mut out = Vec::new();
    for (task, points) in by_task {
        let base = baselines
            .tasks
            .get(task)
            .ok_or_else(|| Error::MissingBaseline(task.to_string()))?;
        let front = pareto_front(&points)?;
        out.push((
            TaskFront {
                task: task.to_string(),
                smc_with_proxy: base.smc_with_proxy,
                n_points: points.len(),
                front,
                unfair_accuracy: base.unfair.mean_accuracy,
                unfair_dp: base.unfair.max_dp,
                majority_accuracy: base.majority_accuracy,
                csv: String::new(),
                svg: None,
            },
            base.clone(),
        ));
    }
    // tasks without a proxy correlation go last
    out.sort_by(|(a, _), (b, _)| {
        let key = |s: Option<f64>| s.unwrap_or(f64::NEG_INFINITY);
        key(b.smc_with_proxy)
            .total_cmp(&key(a.smc_with_proxy))
            .then_with(|| a.task.cmp(&b.task))
    });
    Ok(out)
}

fn file_stem(index: usize, task: &str) -> String {
    let clean: String = task
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{:02}_{clean}", index + 1)
}

/// Front rows followed by the two baseline rows.
pub fn front_csv(front: &TaskFront) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Config(e.to_string());
    w.write_record(["kind", "max_dp", "mean_accuracy", "config"]).map_err(err)?;
    for p in &front.front {
        w.write_record([
            "pareto".to_string(),
            p.max_dp.to_string(),
            p.mean_accuracy.to_string(),
            p.encoder_config.to_string(),
        ])
        .map_err(err)?;
    }
    w.write_record([
        "unfair_baseline".to_string(),
        front.unfair_dp.to_string(),
        front.unfair_accuracy.to_string(),
        String::new(),
    ])
    .map_err(err)?;
    w.write_record([
        "majority_baseline".to_string(),
        String::new(),
        front.majority_accuracy.to_string(),
        String::new(),
    ])
    .map_err(err)?;
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Accuracy over dp with the region beyond the unfair baseline's dp shaded.
pub fn front_svg(front: &TaskFront) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const M: f64 = 48.0;
    let dps = front.front.iter().map(|p| p.max_dp).chain([front.unfair_dp]);
    let x_max = (dps.fold(0.0f64, f64::max) * 1.1).max(0.01);
    let accs: Vec<f64> = front
        .front
        .iter()
        .map(|p| p.mean_accuracy)
        .chain([front.unfair_accuracy, front.majority_accuracy])
        .collect();
    let y_lo = accs.iter().copied().fold(f64::INFINITY, f64::min) - 0.02;
    let y_hi = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 0.02;
    let sx = |dp: f64| M + (W - 2.0 * M) * dp / x_max;
    let sy = |acc: f64| H - M - (H - 2.0 * M) * (acc - y_lo) / (y_hi - y_lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let red_x = sx(front.unfair_dp).min(W - M);
    let _ = writeln!(
        s,
        r##"<rect x="{red_x:.2}" y="{M}" width="{:.2}" height="{:.2}" fill="#f8d0d0"/>"##,
        W - M - red_x,
        H - 2.0 * M
    );
    let _ = writeln!(
        s,
        r#"<path d="M{M} {M} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    let mb = sy(front.majority_accuracy);
    let _ = writeln!(
        s,
        r##"<line x1="{M}" y1="{mb:.2}" x2="{r}" y2="{mb:.2}" stroke="#555" stroke-dasharray="4 3"/>"##,
        r = W - M
    );
    if !front.front.is_empty() {
        let pts: Vec<String> = front
            .front
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.max_dp), sy(p.mean_accuracy)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>"##,
            pts.join(" ")
        );
        for p in &front.front {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f5fa8"/>"##,
                sx(p.max_dp),
                sy(p.mean_accuracy)
            );
        }
    }
    let (ux, uy) = (sx(front.unfair_dp), sy(front.unfair_accuracy));
    let _ = writeln!(
        s,
        r##"<path d="M{:.2} {:.2} l8 8 m0 -8 l-8 8" stroke="#b00" stroke-width="2"/>"##,
        ux - 4.0,
        uy - 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        M / 2.0,
        xml_escape(&front.task)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">max DP distance (0 to {x_max:.3})</text>"#,
        W / 2.0,
        H - M / 3.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">accuracy ({y_lo:.3} to {y_hi:.3})</text>"#,
        H / 2.0,
        H / 2.0
    );
    s.push_str("</svg>\n");
    s
}

/// Writes one CSV (and optionally one SVG) per task plus a summary, and
/// returns the written fronts in output order.
pub fn emit_report(records: &[TrialRecord], baselines: &Baselines, out: &Path, svg: bool) -> Result<Vec<TaskFront>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut fronts = Vec::new();
    for (i, (mut front, _)) in task_fronts(records, baselines)?.into_iter().enumerate() {
        let stem = file_stem(i, &front.task);
        let csv_path: PathBuf = out.join(format!("{stem}.csv"));
        atomic_write(&csv_path, front_csv(&front)?.as_bytes())?;
        front.csv = format!("{stem}.csv");
        if svg {
            let svg_path = out.join(format!("{stem}.svg"));
            atomic_write(&svg_path, front_svg(&front).as_bytes())?;
            front.svg = Some(format!("{stem}.svg"));
        }
        fronts.push(front);
    }
    write_json(&out.join(SUMMARY_FILE), &fronts)?;
    Ok(fronts)
}
