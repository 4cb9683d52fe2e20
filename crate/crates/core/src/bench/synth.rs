use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{Dataset, Task};

/// Rows per generation block. Each block draws from its own ChaCha stream,
/// so output does not depend on how blocks are scheduled.
const BLOCK: usize = 1024;
const CALIBRATION_ROWS: usize = 50_000;
const CALIBRATION_TOL: f64 = 0.005;
const CALIBRATION_ITERS: usize = 100;
/// Stream offset separating calibration draws from dataset draws.
const CALIBRATION_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTask {
    pub name: String,
    /// Unit-norm direction `w` of the halfspace `w . x + b > 0`.
    pub weights: Vec<f64>,
    #[serde(default)]
    pub bias: f64,
    /// When set, `bias` is replaced by [`calibrate_bias`] for this rate.
    #[serde(default)]
    pub target_rate: Option<f64>,
}

/// Gaussian features with a group-dependent mean shift and halfspace tasks.
///
/// `s ~ Bernoulli(group_prob)`, `x | s ~ N((s - group_prob) * delta * u, I)`
/// and task labels are `1[w . x + b > 0]`, each flipped with probability
/// `label_noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    pub group_prob: f64,
    pub delta: f64,
    /// Direction `u` of the group shift; the first axis when absent.
    #[serde(default)]
    pub shift_direction: Option<Vec<f64>>,
    pub tasks: Vec<SynthTask>,
    #[serde(default)]
    pub label_noise: f64,
    pub seed: u64,
    /// Task to record as the proxy in the dataset metadata.
    #[serde(default)]
    pub proxy: Option<String>,
}

fn check_unit(name: &str, v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::InvalidParameter(format!(
            "{name} has {} entries, expected {d}",
            v.len()
        )));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "{name} has norm {norm}, expected 1"
        )));
    }
    Ok(())
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 100 {
            return Err(Error::InvalidParameter(format!("n = {} < 100", self.n)));
        }
        if self.d < 1 {
            return Err(Error::InvalidParameter("d must be >= 1".into()));
        }
        if !(self.group_prob > 0.0 && self.group_prob < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "group_prob {} outside (0, 1)",
                self.group_prob
            )));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidParameter("delta must be finite".into()));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::InvalidParameter(format!(
                "label_noise {} outside [0, 0.5)",
                self.label_noise
            )));
        }
        if let Some(u) = &self.shift_direction {
            check_unit("shift_direction", u, self.d)?;
        }
        for t in &self.tasks {
            check_unit(&format!("weights of task \"{}\"", t.name), &t.weights, self.d)?;
            if let Some(r) = t.target_rate {
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "target rate {r} of task \"{}\" outside (0, 1)",
                        t.name
                    )));
                }
            }
        }
        Ok(())
    }

    fn shift(&self) -> Vec<f64> {
        self.shift_direction.clone().unwrap_or_else(|| {
            let mut u = vec![0.0; self.d];
            u[0] = 1.0;
            u
        })
    }

    /// Fills `x` (length `d`) and returns the group of one row.
    fn draw_row<R: Rng>(&self, rng: &mut R, u: &[f64], x: &mut [f64]) -> usize {
        let s = usize::from(rng.gen::<f64>() < self.group_prob);
        let offset = (s as f64 - self.group_prob) * self.delta;
        for (xj, &uj) in x.iter_mut().zip(u) {
            let z: f64 = rng.sample(StandardNormal);
            *xj = z + offset * uj;
        }
        s
    }
}

fn block_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bias `b` for which `1[w . x + b > 0]` is positive at `target_rate` on a
/// seeded calibration sample drawn from the spec's feature distribution.
pub fn calibrate_bias(w: &[f64], target_rate: f64, spec: &SynthSpec) -> Result<f64> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target rate {target_rate} outside (0, 1)"
        )));
    }
    check_unit("w", w, spec.d)?;
    let u = spec.shift();
    let n_blocks = CALIBRATION_ROWS.div_ceil(BLOCK);
    let proj: Vec<f64> = (0..n_blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = block_rng(spec.seed, CALIBRATION_STREAM + b as u64);
            let mut x = vec![0.0; spec.d];
            (0..BLOCK)
                .map(|_| {
                    spec.draw_row(&mut rng, &u, &mut x);
                    dot(w, &x)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let rate = |b: f64| proj.iter().filter(|&&p| p + b > 0.0).count() as f64 / proj.len() as f64;
    let span = proj.iter().fold(0.0f64, |m, p| m.max(p.abs())) + 1.0;
    // rate(b) is non-decreasing in b
    let (mut lo, mut hi) = (-span, span);
    let mut b = 0.0;
    let mut r = rate(b);
    for _ in 0..CALIBRATION_ITERS {
        if (r - target_rate).abs() <= CALIBRATION_TOL {
            return Ok(b);
        }
        if r < target_rate {
            lo = b;
        } else {
            hi = b;
        }
        b = 0.5 * (lo + hi);
        r = rate(b);
    }
    if (r - target_rate).abs() <= CALIBRATION_TOL {
        return Ok(b);
    }
    Err(Error::NoConvergence {
        iterations: CALIBRATION_ITERS,
        rate: r,
        target: target_rate,
    })
}

/// Draws a dataset from the spec; identical specs give identical datasets.
pub fn synth_generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let biases = spec
        .tasks
        .iter()
        .map(|t| match t.target_rate {
            Some(rate) => calibrate_bias(&t.weights, rate, spec),
            None => Ok(t.bias),
        })
        .collect::<Result<Vec<f64>>>()?;
    let u = spec.shift();
    let d = spec.d;
    let n_tasks = spec.tasks.len();
    let n_blocks = spec.n.div_ceil(BLOCK);
    let blocks: Vec<(Vec<f64>, Vec<usize>, Vec<u8>)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let rows = BLOCK.min(spec.n - b * BLOCK);
            let mut rng = block_rng(spec.seed, b as u64);
            let mut xs = vec![0.0; rows * d];
            let mut groups = Vec::with_capacity(rows);
            let mut labels = Vec::with_capacity(rows * n_tasks);
            for i in 0..rows {
                let x = &mut xs[i * d..(i + 1) * d];
                groups.push(spec.draw_row(&mut rng, &u, x));
                for (t, task) in spec.tasks.iter().enumerate() {
                    let clean = dot(&task.weights, x) + biases[t] > 0.0;
                    let flip = rng.gen::<f64>() < spec.label_noise;
                    labels.push(u8::from(clean != flip));
                }
            }
            (xs, groups, labels)
        })
        .collect();

    let mut features = Vec::with_capacity(spec.n * d);
    let mut sensitive = Vec::with_capacity(spec.n);
    let mut task_labels = vec![Vec::with_capacity(spec.n); n_tasks];
    for (xs, groups, labels) in blocks {
        features.extend(xs);
        for (i, g) in groups.into_iter().enumerate() {
            sensitive.push(g);
            for (t, col) in task_labels.iter_mut().enumerate() {
                col.push(labels[i * n_tasks + t]);
            }
        }
    }
    let features = Array2::from_shape_vec((spec.n, d), features)
        .map_err(|e| Error::InvalidDataset(e.to_string()))?;
    let tasks = spec
        .tasks
        .iter()
        .zip(task_labels)
        .map(|(t, labels)| Task {
            name: t.name.clone(),
            labels,
        })
        .collect();
    Dataset::new(
        features,
        (0..d).map(|j| format!("x{j}")).collect(),
        sensitive,
        2,
        tasks,
    )
}

/// Unit vector in the plane of orthonormal `a` and `b` at `degrees` from `a`.
pub fn rotate_towards(a: &[f64], b: &[f64], degrees: f64) -> Vec<f64> {
    let t = degrees.to_radians();
    a.iter()
        .zip(b)
        .map(|(x, y)| t.cos() * x + t.sin() * y)
        .collect()
}

/// The `i`-th standard basis vector of dimension `d`.
pub fn axis(d: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    v
}
