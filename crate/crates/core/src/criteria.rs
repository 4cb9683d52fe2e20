//! Benchmark validation: checks candidate transfer tasks for baseline
//! unfairness (C2), closeness to the proxy (C3) and difficulty (C4), and the
//! dataset for size and task count (C1).

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{unfair_baseline, Protocol};
use crate::metrics::{majority_accuracy, smc};
use crate::tabular::SplitDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriteriaThresholds {
    pub min_samples: usize,
    pub min_tasks: usize,
    pub dp_low: f64,
    pub dp_high: f64,
    /// Half-width of the band around SMC 0.5 counted as uncorrelated.
    pub uncorrelated_band: f64,
    pub acc_low: f64,
    pub acc_high: f64,
    /// Required margin of the unfair baseline over the majority baseline.
    pub mb_gap: f64,
}

impl Default for CriteriaThresholds {
    fn default() -> Self {
        CriteriaThresholds {
            min_samples: 10_000,
            min_tasks: 2,
            dp_low: 0.05,
            dp_high: 0.5,
            uncorrelated_band: 0.05,
            acc_low: 0.70,
            acc_high: 0.90,
            mb_gap: 0.05,
        }
    }
}

impl CriteriaThresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_tasks >= 2
            && 0.0 <= self.dp_low
            && self.dp_low < self.dp_high
            && self.dp_high <= 1.0
            && 0.5 < self.acc_low
            && self.acc_low < self.acc_high
            && self.acc_high <= 1.0
            && self.mb_gap > 0.0
            && self.uncorrelated_band >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid criteria thresholds {self:?}")))
        }
    }
}

/// Measured statistics of one candidate task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub task: String,
    /// Agreement with the proxy labels on the test rows.
    pub smc_with_proxy: f64,
    /// Unfair-baseline accuracy and dp; absent when the task has a single
    /// class in the training split.
    pub ub_accuracy: Option<f64>,
    pub ub_dp: Option<f64>,
    pub mb_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    SingleClass,
    DpBelowLow,
    DpAboveHigh,
    AccuracyBelowLow,
    AccuracyAboveHigh,
    NoMarginOverMajority,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rejection::SingleClass => "single class in training labels",
            Rejection::DpBelowLow => "dp below dp_low",
            Rejection::DpAboveHigh => "dp above dp_high",
            Rejection::AccuracyBelowLow => "accuracy below acc_low",
            Rejection::AccuracyAboveHigh => "accuracy above acc_high",
            Rejection::NoMarginOverMajority => "accuracy within mb_gap of the majority baseline",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    #[serde(flatten)]
    pub stats: TaskStats,
    pub is_proxy: bool,
    pub c2_pass: bool,
    pub c4_pass: bool,
    pub accepted: bool,
    pub reasons: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub proxy: String,
    pub n_train: usize,
    pub n_test: usize,
    pub thresholds: CriteriaThresholds,
    /// Sorted by descending SMC with the proxy, then by name.
    pub tasks: Vec<TaskReport>,
    pub c1_pass: bool,
    pub c3_pass: bool,
    pub accepted: bool,
}

/// Measures one task against the proxy.
pub fn measure_task(split: &SplitDataset, proxy: &str, task: &str, protocol: &Protocol) -> Result<TaskStats> {
    let train = split.train.task(task)?;
    let smc_with_proxy = smc(split.test.task(task)?, split.test.task(proxy)?)?;
    let mb_accuracy = majority_accuracy(train, split.test.task(task)?)?;
    let single_class = train.iter().all(|&v| v == train[0]);
    let (ub_accuracy, ub_dp) = if single_class {
        (None, None)
    } else {
        let ub = unfair_baseline(split, task, protocol)?;
        (Some(ub.mean_accuracy), Some(ub.max_dp))
    };
    Ok(TaskStats {
        task: task.to_string(),
        smc_with_proxy,
        ub_accuracy,
        ub_dp,
        mb_accuracy,
    })
}

fn judge_task(stats: TaskStats, proxy: &str, t: &CriteriaThresholds) -> TaskReport {
    let mut reasons = Vec::new();
    let (mut c2, mut c4) = (true, true);
    match (stats.ub_accuracy, stats.ub_dp) {
        (Some(acc), Some(dp)) => {
            if dp < t.dp_low {
                c2 = false;
                reasons.push(Rejection::DpBelowLow);
            }
            if dp > t.dp_high {
                c2 = false;
                reasons.push(Rejection::DpAboveHigh);
            }
            if acc < t.acc_low {
                c4 = false;
                reasons.push(Rejection::AccuracyBelowLow);
            }
            if acc > t.acc_high {
                c4 = false;
                reasons.push(Rejection::AccuracyAboveHigh);
            }
            if acc - stats.mb_accuracy <= t.mb_gap {
                c4 = false;
                reasons.push(Rejection::NoMarginOverMajority);
            }
        }
        _ => {
            c2 = false;
            c4 = false;
            reasons.push(Rejection::SingleClass);
        }
    }
    TaskReport {
        is_proxy: stats.task == proxy,
        stats,
        c2_pass: c2,
        c4_pass: c4,
        accepted: c2 && c4,
        reasons,
    }
}

/// Applies the thresholds to measured statistics.
pub fn judge(
    stats: Vec<TaskStats>,
    proxy: &str,
    n_train: usize,
    n_test: usize,
    t: &CriteriaThresholds,
) -> CriteriaReport {
    let mut tasks: Vec<TaskReport> = stats.into_iter().map(|s| judge_task(s, proxy, t)).collect();
    tasks.sort_by(|a, b| {
        b.stats
            .smc_with_proxy
            .total_cmp(&a.stats.smc_with_proxy)
            .then_with(|| a.stats.task.cmp(&b.stats.task))
    });
    // the proxy always counts towards the task total
    let n_tasks = tasks.iter().filter(|r| r.accepted && !r.is_proxy).count() + 1;
    let c1 = n_train + n_test >= t.min_samples && n_tasks >= t.min_tasks;
    let c3 = tasks.iter().any(|r| {
        r.accepted && !r.is_proxy && (r.stats.smc_with_proxy - 0.5).abs() <= t.uncorrelated_band
    });
    CriteriaReport {
        proxy: proxy.to_string(),
        n_train,
        n_test,
        thresholds: *t,
        tasks,
        c1_pass: c1,
        c3_pass: c3,
        accepted: c1 && c3,
    }
}

/// Measures every task of the split and judges it against `thresholds`.
pub fn evaluate_criteria(
    split: &SplitDataset,
    proxy: &str,
    thresholds: &CriteriaThresholds,
    protocol: &Protocol,
) -> Result<CriteriaReport> {
    thresholds.validate()?;
    if !split.train.has_task(proxy) {
        return Err(Error::UnknownTask(proxy.to_string()));
    }
    let mut names: Vec<&str> = split.train.task_names();
    names.sort_unstable();
    let stats = names
        .par_iter()
        .map(|task| measure_task(split, proxy, task, protocol))
        .collect::<Result<Vec<_>>>()?;
    Ok(judge(stats, proxy, split.train.n(), split.test.n(), thresholds))
}

/// Accepted transfer tasks, most proxy-correlated first.
pub fn select_tasks(report: &CriteriaReport) -> Vec<String> {
    report
        .tasks
        .iter()
        .filter(|r| r.accepted && !r.is_proxy)
        .map(|r| r.stats.task.clone())
        .collect()
}

fn fmt_opt(v: Option<f64>, pct: bool) -> String {
    match v {
        Some(v) if pct => format!("{:.1}%", 100.0 * v),
        Some(v) => format!("{v:.3}"),
        None => "-".to_string(),
    }
}

const TABLE_HEADER: [&str; 6] = ["Task", "UB Fairness", "SMC with y_p", "UB Accuracy", "MB Accuracy", "Status"];

fn table_rows(report: &CriteriaReport) -> Vec<[String; 6]> {
    report
        .tasks
        .iter()
        .map(|r| {
            let status = if r.accepted {
                "accepted".to_string()
            } else {
                let reasons: Vec<String> = r.reasons.iter().map(|x| x.to_string()).collect();
                format!("rejected: {}", reasons.join("; "))
            };
            let name = if r.is_proxy {
                format!("{} (proxy)", r.stats.task)
            } else {
                r.stats.task.clone()
            };
            [
                name,
                fmt_opt(r.stats.ub_dp, false),
                fmt_opt(Some(r.stats.smc_with_proxy), true),
                fmt_opt(r.stats.ub_accuracy, true),
                fmt_opt(Some(r.stats.mb_accuracy), true),
                status,
            ]
        })
        .collect()
}

/// Aligned plain-text table with a dataset-level summary.
pub fn render_table(report: &CriteriaReport) -> String {
    let rows = table_rows(report);
    let mut widths: Vec<usize> = TABLE_HEADER.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(TABLE_HEADER.to_vec());
    for row in &rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    let mark = |b: bool| if b { "pass" } else { "fail" };
    out += &format!(
        "\nsamples: {} train / {} test\nC1 (size and task count): {}\nC3 (uncorrelated task present): {}\nbenchmark: {}\n",
        report.n_train,
        report.n_test,
        mark(report.c1_pass),
        mark(report.c3_pass),
        if report.accepted { "accepted" } else { "rejected" }
    );
    out
}

pub fn render_csv(report: &CriteriaReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Config(e.to_string());
    w.write_record(TABLE_HEADER).map_err(io)?;
    for row in table_rows(report) {
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
