use std::collections::BTreeSet;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use frlbench_core::bench::synth::{synth_generate, SynthSpec, SynthTask};
use frlbench_core::fare::{build_tree, CriterionWeights, FareParams, RecMode};
use frlbench_core::tabular::{Dataset, Task};

use crate::Outcome;

/// Independent leaf criterion over raw rows.
struct Oracle<'a> {
    x: &'a Array2<f64>,
    y: &'a [u8],
    s: &'a [usize],
    n_groups: usize,
    scale: Vec<f64>,
    w: CriterionWeights,
}

fn impurity(values: impl Iterator<Item = usize>, k: usize, n: usize) -> f64 {
    let mut counts = vec![0usize; k];
    for v in values {
        counts[v] += 1;
    }
    1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>()
}

impl<'a> Oracle<'a> {
    fn new(d: &'a Dataset, x: &'a Array2<f64>, growth: &[usize], w: CriterionWeights) -> Oracle<'a> {
        let n = growth.len() as f64;
        let scale = (0..x.ncols())
            .map(|j| {
                let mean = growth.iter().map(|&r| x[[r, j]]).sum::<f64>() / n;
                let var = growth.iter().map(|&r| (x[[r, j]] - mean).powi(2)).sum::<f64>() / n;
                if var.sqrt() < 1e-12 {
                    0.0
                } else {
                    1.0 / var.sqrt()
                }
            })
            .collect();
        Oracle {
            x,
            y: d.tasks()[0].labels.as_slice(),
            s: d.sensitive(),
            n_groups: d.n_groups(),
            scale,
            w,
        }
    }

    fn criterion(&self, rows: &[usize]) -> f64 {
        let n = rows.len();
        let w = &self.w;
        let gy = impurity(rows.iter().map(|&r| self.y[r] as usize), 2, n);
        let gs = impurity(rows.iter().map(|&r| self.s[r]), self.n_groups, n);
        let c_s = 1.0 - 1.0 / self.n_groups as f64;
        let mut rec = 0.0;
        for j in 0..self.x.ncols() {
            let z: Vec<f64> = rows.iter().map(|&r| self.x[[r, j]] * self.scale[j]).collect();
            rec += match w.rec_mode {
                RecMode::MeanSquared => {
                    let m = z.iter().sum::<f64>() / n as f64;
                    z.iter().map(|v| (v - m).powi(2)).sum::<f64>()
                }
                RecMode::AbsMedian => {
                    let mut sorted = z.clone();
                    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let med = sorted[(n - 1) / 2];
                    z.iter().map(|v| (v - med).abs()).sum::<f64>()
                }
                RecMode::None => 0.0,
            };
        }
        w.lambda_y * gy + w.lambda_f * (c_s - gs) + w.lambda_r * rec / n as f64
    }

    /// Best-first growth by exhaustive enumeration. `None` when the two best
    /// candidate reductions of some step are too close to call.
    fn grow(&self, growth: &[usize], max_leaves: usize, min_leaf: usize) -> Option<Vec<Vec<usize>>> {
        let mut leaves = vec![growth.to_vec()];
        while leaves.len() < max_leaves {
            let mut cands: Vec<(f64, usize, Vec<usize>, Vec<usize>)> = Vec::new();
            for (li, rows) in leaves.iter().enumerate() {
                let parent = rows.len() as f64 * self.criterion(rows);
                for j in 0..self.x.ncols() {
                    let values: BTreeSet<u64> = rows.iter().map(|&r| self.x[[r, j]].to_bits()).collect();
                    let mut values: Vec<f64> = values.into_iter().map(f64::from_bits).collect();
                    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    for pair in values.windows(2) {
                        let (a, b): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| self.x[[r, j]] <= pair[0]);
                        if a.len() < min_leaf || b.len() < min_leaf {
                            continue;
                        }
                        let red = parent
                            - a.len() as f64 * self.criterion(&a)
                            - b.len() as f64 * self.criterion(&b);
                        if red / rows.len() as f64 > 1e-12 {
                            cands.push((red, li, a, b));
                        }
                    }
                }
            }
            if cands.is_empty() {
                break;
            }
            cands.sort_by(|p, q| q.0.partial_cmp(&p.0).unwrap());
            if cands.len() > 1 && cands[0].0 - cands[1].0 < 1e-9 {
                return None;
            }
            let (_, li, a, b) = cands.swap_remove(0);
            leaves[li] = a;
            leaves.push(b);
        }
        Some(leaves)
    }
}

fn random_weights(rng: &mut ChaCha8Rng, allow_label: bool) -> CriterionWeights {
    match rng.gen_range(0..4) {
        0 | 1 if allow_label => CriterionWeights::fair_gini(rng.gen_range(0.0..=1.0)).unwrap(),
        2 if allow_label => CriterionWeights::new(
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..1.0),
            10f64.powf(rng.gen_range(-2.0..1.0)),
            RecMode::MeanSquared,
        )
        .unwrap(),
        3 => CriterionWeights::new(
            0.0,
            rng.gen_range(0.1..1.0),
            10f64.powf(rng.gen_range(-2.0..1.0)),
            RecMode::AbsMedian,
        )
        .unwrap(),
        _ => CriterionWeights::new(0.0, rng.gen_range(0.1..1.0), 1.0, RecMode::MeanSquared).unwrap(),
    }
}

fn synth(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let mut w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= norm);
    let spec = SynthSpec {
        n,
        d,
        group_prob: rng.gen_range(0.2..0.8),
        delta: rng.gen_range(0.0..2.0),
        shift_direction: None,
        tasks: vec![SynthTask {
            name: "y".into(),
            weights: w,
            bias: rng.gen_range(-0.5..0.5),
            target_rate: None,
        }],
        label_noise: rng.gen_range(0.0..0.3),
        seed: rng.gen(),
        proxy: None,
    };
    synth_generate(&spec).unwrap()
}

/// Invariants of built trees; returns a description of the first violation.
fn check_invariants(d: &Dataset, p: &FareParams, label_free: bool) -> Result<(), String> {
    let tree = build_tree(d, if label_free { None } else { Some("y") }, p).map_err(|e| e.to_string())?;
    let x = d.features().to_owned();
    let holdout: BTreeSet<usize> = tree.holdout.iter().copied().collect();
    let growth: Vec<usize> = (0..d.n()).filter(|r| !holdout.contains(r)).collect();
    if tree.n_leaves() > p.max_leaves {
        return Err(format!("{} leaves > {}", tree.n_leaves(), p.max_leaves));
    }
    let mut members = vec![Vec::new(); tree.n_leaves()];
    for &r in &growth {
        let row: Vec<f64> = x.row(r).to_vec();
        members[tree.leaf_index(&row).unwrap()].push(r);
    }
    for (leaf, rows) in tree.leaves.iter().zip(&members) {
        if rows.len() < p.min_leaf_samples || rows.len() != leaf.occupancy || *rows != leaf.rows {
            return Err(format!("leaf occupancy {} vs routed {}", leaf.occupancy, rows.len()));
        }
        for j in 0..d.n_features() {
            let mut col: Vec<f64> = rows.iter().map(|&r| x[[r, j]]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let m = col.len();
            let median = if m % 2 == 1 { col[m / 2] } else { 0.5 * (col[m / 2 - 1] + col[m / 2]) };
            if median != leaf.representation[j] {
                return Err("representation is not the leaf median".into());
            }
        }
    }
    if tree.criterion_trace.len() != tree.n_leaves() {
        return Err("trace length differs from leaf count".into());
    }
    if tree.criterion_trace.windows(2).any(|w| w[1] > w[0] + 1e-12) {
        return Err(format!("criterion increased: {:?}", tree.criterion_trace));
    }
    let oracle = Oracle::new(d, &x, &growth, p.weights);
    let total: f64 = members.iter().map(|r| r.len() as f64 * oracle.criterion(r)).sum::<f64>() / growth.len() as f64;
    let last = *tree.criterion_trace.last().unwrap();
    if (total - last).abs() > 1e-9 * (1.0 + total.abs()) {
        return Err(format!("final criterion {last} vs oracle {total}"));
    }
    Ok(())
}

pub fn tree_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = Vec::new();
    let mut built = 0;
    for _ in 0..20 {
        let n = rng.gen_range(200..1500);
        let dims = rng.gen_range(1..6);
        let d = synth(&mut rng, n, dims);
        for _ in 0..10 {
            let label_free = rng.gen_bool(0.25);
            let p = FareParams {
                weights: random_weights(&mut rng, !label_free),
                max_leaves: rng.gen_range(1..40),
                min_leaf_samples: rng.gen_range(1..40),
                val_fraction: rng.gen_range(0.0..0.4),
                seed: rng.gen(),
            };
            built += 1;
            if let Err(e) = check_invariants(&d, &p, label_free) {
                violations.push(e);
            }
        }
    }

    let (mut compared, mut tied, mut mismatched, mut leaves) = (0, 0, 0, 0);
    for case in 0..300 {
        let n = rng.gen_range(12..36);
        let dims = rng.gen_range(1..4);
        // coarse values create duplicate feature values
        let mut x = Array2::zeros((n, dims));
        x.iter_mut().for_each(|v| *v = (rng.gen_range(-3.0..3.0f64) * 4.0).round() / 4.0);
        let labels: Vec<u8> = (0..n).map(|i| u8::from(x[[i, 0]] + rng.gen_range(-1.5..1.5) > 0.0)).collect();
        let k = rng.gen_range(2..=3);
        let s: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
        let d = Dataset::new(
            x.clone(),
            (0..dims).map(|j| format!("x{j}")).collect(),
            s,
            k,
            vec![Task { name: "y".into(), labels }],
        )
        .unwrap();
        let p = FareParams {
            weights: random_weights(&mut rng, true),
            max_leaves: rng.gen_range(2..7),
            min_leaf_samples: rng.gen_range(1..5),
            val_fraction: 0.0,
            seed: case,
        };
        let growth: Vec<usize> = (0..n).collect();
        let oracle = Oracle::new(&d, &x, &growth, p.weights);
        let Some(expected) = oracle.grow(&growth, p.max_leaves, p.min_leaf_samples) else {
            tied += 1;
            continue;
        };
        let tree = build_tree(&d, Some("y"), &p).unwrap();
        let mut got: Vec<Vec<usize>> = tree.leaves.iter().map(|l| l.rows.clone()).collect();
        let mut want: Vec<Vec<usize>> = expected.into_iter().map(|mut r| {
            r.sort_unstable();
            r
        }).collect();
        got.sort();
        want.sort();
        compared += 1;
        leaves += got.len();
        if got != want {
            mismatched += 1;
        }
    }
    let detail = format!(
        "{built} trees built, {} invariant violations; greedy oracle: {compared} compared (mean {:.1} leaves), {mismatched} mismatched, {tied} tied cases excluded",
        violations.len(),
        leaves as f64 / compared.max(1) as f64
    );
    if violations.is_empty() && mismatched == 0 && compared >= 100 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(format!("{detail}; first violation: {:?}", violations.first()))
    }
}
