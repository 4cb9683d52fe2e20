//! Wall-clock envelope: single-core tree builds at the largest preset size
//! and a full preset sweep on the desk-scale transfer benchmark.

use std::collections::BTreeMap;
use std::time::Instant;

use frlbench_core::bench::synth::{axis, synth_generate, SynthSpec, SynthTask};
use frlbench_core::eval::Protocol;
use frlbench_core::fare::build_tree;
use frlbench_core::sweep::{fare_params, run_sweep, EncoderKind, Preset, SweepConfig, TrainingMode, TrialStatus};
use frlbench_core::tabular::{save_dataset, split_dir};

use super::transfer::benchmark_spec;
use crate::Outcome;

const BUILD_LIMIT_SECS: f64 = 60.0;
const SWEEP_LIMIT_SECS: f64 = 30.0 * 60.0;
const SWEEP_WORKERS: usize = 4;

fn build_times() -> Vec<(EncoderKind, f64)> {
    let spec = SynthSpec {
        n: 50_000,
        d: 20,
        group_prob: 0.5,
        delta: 1.0,
        shift_direction: None,
        tasks: vec![SynthTask {
            name: "y".into(),
            weights: axis(20, 0),
            bias: 0.0,
            target_rate: None,
        }],
        label_noise: 0.1,
        seed: 0,
        proxy: Some("y".into()),
    };
    let d = synth_generate(&spec).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let runs: [(EncoderKind, &[(&str, f64)]); 3] = [
        (EncoderKind::Fare, &[("gamma", 0.5)]),
        (EncoderKind::FareRec, &[("lambda_f", 1.0), ("lambda_r", 1.0)]),
        (EncoderKind::FareRecAbs, &[("lambda_f", 1.0), ("lambda_r", 1.0)]),
    ];
    runs.iter()
        .map(|&(kind, weights)| {
            let mut point: BTreeMap<String, f64> = weights.iter().map(|&(k, v)| (k.to_string(), v)).collect();
            point.insert("max_leaves".into(), 200.0);
            let p = fare_params(kind, &point, 0).unwrap();
            let task = matches!(kind, EncoderKind::Fare).then_some("y");
            let start = Instant::now();
            let tree = pool.install(|| build_tree(&d, task, &p)).unwrap();
            assert!(tree.n_leaves() > 1);
            (kind, start.elapsed().as_secs_f64())
        })
        .collect()
}

pub fn performance_envelope() -> Outcome {
    let builds = build_times();

    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let spec = benchmark_spec(0);
    save_dataset(&data, "desk", &synth_generate(&spec).unwrap(), spec.proxy.as_deref()).unwrap();
    split_dir(&data, 0.3, 0).unwrap();
    let config = SweepConfig {
        data,
        encoder: EncoderKind::Fare,
        training: TrainingMode::Proxy,
        grid: BTreeMap::new(),
        preset: Some(Preset::Fare),
        protocol: Protocol::default(),
        tasks: None,
        out: tmp.path().join("sweep"),
        workers: SWEEP_WORKERS,
        reps_train: None,
        reps_test: None,
        seed: 0,
    };
    let start = Instant::now();
    let outcome = run_sweep(&config).unwrap();
    let sweep_secs = start.elapsed().as_secs_f64();
    let failed = outcome.records.iter().filter(|r| r.status == TrialStatus::Failed).count();

    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let build_text: Vec<String> = builds.iter().map(|(k, s)| format!("{k:?} {s:.1}s")).collect();
    let detail = format!(
        "50000x20 builds with 200 leaves: {} (limit {BUILD_LIMIT_SECS:.0}s); FARE preset sweep {} trials, {failed} failed, {sweep_secs:.0}s with {SWEEP_WORKERS} workers on {cores} core(s) (limit {SWEEP_LIMIT_SECS:.0}s)",
        build_text.join(", "),
        outcome.records.len(),
    );
    let ok = builds.iter().all(|&(_, s)| s < BUILD_LIMIT_SECS) && failed == 0 && sweep_secs < SWEEP_LIMIT_SECS;
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}
