use std::collections::HashMap;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use frlbench_core::eval::{evaluate_protocol_with, EvalInput, Learner, TradeoffPoint};
use frlbench_core::fare::{leaf_criterion, CriterionInput, CriterionWeights};
use frlbench_core::metrics::{dp_distance, gini, majority_accuracy, smc, GroupedPredictions};
use frlbench_core::pareto::pareto_front;
use frlbench_core::Result;

use crate::Outcome;

const TOL: f64 = 1e-12;

/// Group ids covering every group at least once, shuffled.
fn groups(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut g: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
    g.shuffle(rng);
    g
}

fn bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    let p: f64 = rng.gen();
    (0..n).map(|_| u8::from(rng.gen::<f64>() < p)).collect()
}

fn dp_oracle(preds: &[u8], g: &[usize], k: usize) -> f64 {
    let rate = |grp: usize| {
        let members: Vec<u8> = preds.iter().zip(g).filter(|(_, &x)| x == grp).map(|(&p, _)| p).collect();
        members.iter().filter(|&&p| p == 1).count() as f64 / members.len() as f64
    };
    let mut worst: f64 = 0.0;
    for a in 0..k {
        for b in 0..k {
            worst = worst.max((rate(a) - rate(b)).abs());
        }
    }
    worst
}

fn smc_oracle(a: &[u8], b: &[u8]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

/// Probability that two draws with replacement carry different labels.
fn gini_oracle(y: &[usize]) -> f64 {
    let n = y.len() as f64;
    let mut differ = 0usize;
    for a in y {
        for b in y {
            differ += usize::from(a != b);
        }
    }
    differ as f64 / (n * n)
}

fn majority_oracle(train: &[u8], test: &[u8]) -> f64 {
    let hits = |c: u8, ys: &[u8]| ys.iter().filter(|&&y| y == c).count();
    let constant = if hits(1, train) >= hits(0, train) { 1 } else { 0 };
    hits(constant, test) as f64 / test.len() as f64
}

fn dominated(a: (f64, f64), b: (f64, f64)) -> bool {
    // does a dominate b
    a.0 >= b.0 && a.1 <= b.1 && (a.0 > b.0 || a.1 < b.1)
}

fn point(acc: f64, dp: f64) -> TradeoffPoint {
    TradeoffPoint {
        task: "t".into(),
        encoder_config: serde_json::Value::Null,
        mean_accuracy: acc,
        max_dp: dp,
        per_run: Vec::new(),
    }
}

pub fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut front_mismatch = 0;
    for _ in 0..1000 {
        let k = rng.gen_range(2..=4);
        let n = rng.gen_range(k..=50);
        let g = groups(&mut rng, n, k);
        let preds = bits(&mut rng, n);
        let other = bits(&mut rng, n);

        let gp = GroupedPredictions::new(&preds, &g, k).unwrap();
        worst = worst.max((dp_distance(&gp).unwrap() - dp_oracle(&preds, &g, k)).abs());
        worst = worst.max((smc(&preds, &other).unwrap() - smc_oracle(&preds, &other)).abs());
        let ys: Vec<usize> = preds.iter().map(|&v| v as usize).collect();
        worst = worst.max((gini(&preds).unwrap() - gini_oracle(&ys)).abs());
        worst = worst.max((gini(&g).unwrap() - gini_oracle(&g)).abs());
        worst = worst.max((majority_accuracy(&preds, &other).unwrap() - majority_oracle(&preds, &other)).abs());

        let m = rng.gen_range(0..=n);
        let pts: Vec<(f64, f64)> = (0..m)
            .map(|_| (rng.gen_range(0..25) as f64 / 25.0, rng.gen_range(0..25) as f64 / 25.0))
            .collect();
        let points: Vec<TradeoffPoint> = pts.iter().map(|&(a, d)| point(a, d)).collect();
        let front = pareto_front(&points).unwrap();
        let mut got: Vec<(f64, f64)> = front.iter().map(|p| (p.mean_accuracy, p.max_dp)).collect();
        let mut want: Vec<(f64, f64)> = pts
            .iter()
            .copied()
            .filter(|&b| !pts.iter().any(|&a| dominated(a, b)))
            .collect();
        let sorted = got.windows(2).all(|w| w[0].1 <= w[1].1);
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if got != want || !sorted {
            front_mismatch += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "1000 instances, max deviation {worst:.1e}, front mismatches {front_mismatch}, {secs:.2}s"
    );
    if worst <= TOL && front_mismatch == 0 && secs < 10.0 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

pub fn fair_gini_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for _ in 0..500 {
        let n = rng.gen_range(1..=60);
        let x = Array2::<f64>::zeros((n, 1));
        let y = bits(&mut rng, n);
        let s: Vec<usize> = bits(&mut rng, n).into_iter().map(usize::from).collect();
        let input = CriterionInput::new(x.view(), Some(&y), &s, 2).unwrap();
        let rows: Vec<usize> = (0..n).collect();
        let gy = gini_oracle(&y.iter().map(|&v| v as usize).collect::<Vec<_>>());
        let gs = gini_oracle(&s);
        for gamma in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let w = CriterionWeights::fair_gini(gamma).unwrap();
            let got = leaf_criterion(&input, &rows, &w).unwrap();
            let want = (1.0 - gamma) * gy + gamma * (0.5 - gs);
            worst = worst.max((got - want).abs());
            cases += 1;
        }
    }
    let detail = format!("{cases} leaf/gamma cases, max deviation {worst:.1e}");
    if worst <= TOL {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

/// Returns fixed predictions per seed.
struct Stub(HashMap<u64, Vec<u8>>);

impl Learner for Stub {
    fn fit_predict(&self, _: ArrayView2<'_, f64>, _: &[u8], _: ArrayView2<'_, f64>, seed: u64) -> Result<Vec<u8>> {
        Ok(self.0[&seed].clone())
    }
}

pub fn protocol_aggregation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for _ in 0..100 {
        let k = rng.gen_range(2..=4);
        let n = rng.gen_range(k.max(5)..=200);
        let n_runs = rng.gen_range(1..=8);
        let base: u64 = rng.gen_range(0..1_000_000);
        let g = groups(&mut rng, n, k);
        let labels = bits(&mut rng, n);
        let preds: HashMap<u64, Vec<u8>> = (0..n_runs as u64).map(|r| (base + r, bits(&mut rng, n))).collect();
        let reps = Array2::<f64>::zeros((n, 1));
        let input = EvalInput {
            task: "t",
            reps_train: reps.view(),
            reps_test: reps.view(),
            labels_train: &labels,
            labels_test: &labels,
            groups_test: &g,
            n_groups: k,
        };
        let got = evaluate_protocol_with(&Stub(preds.clone()), &input, n_runs, base).unwrap();
        let mut acc_sum = 0.0;
        let mut dp_max: f64 = 0.0;
        for r in 0..n_runs as u64 {
            let p = &preds[&(base + r)];
            acc_sum += smc_oracle(p, &labels);
            dp_max = dp_max.max(dp_oracle(p, &g, k));
        }
        let want_acc = acc_sum / n_runs as f64;
        worst = worst.max((got.mean_accuracy - want_acc).abs()).max((got.max_dp - dp_max).abs());
        let seeds: Vec<u64> = got.per_run.iter().map(|r| r.seed).collect();
        if seeds != (base..base + n_runs as u64).collect::<Vec<_>>() {
            bad += 1;
        }
    }
    let detail = format!("100 stub draws, max deviation {worst:.1e}, seed mismatches {bad}");
    if worst <= TOL && bad == 0 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}
