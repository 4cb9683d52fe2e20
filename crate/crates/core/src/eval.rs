//! Downstream evaluation protocol.
//!
//! A data consumer trains a one-hidden-layer network on normalized
//! representations without any fairness consideration. Each configuration
//! is trained `n_runs` times with consecutive seeds; the reported point is
//! the mean test accuracy and the largest demographic parity distance over
//! the runs.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{accuracy, dp_distance, GroupedPredictions};
use crate::tabular::{NormStats, SplitDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    pub hidden_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            hidden_size: 50,
            epochs: 50,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl ClassifierParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size < 1 || self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::InvalidParameter(
                "hidden_size, epochs and batch_size must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Classifier settings plus the number of repeated runs per point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    #[serde(default)]
    pub classifier: ClassifierParams,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
}

fn default_runs() -> usize {
    5
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            classifier: ClassifierParams::default(),
            n_runs: default_runs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub accuracy: f64,
    pub dp: f64,
}

/// One evaluated configuration on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub task: String,
    pub encoder_config: serde_json::Value,
    pub mean_accuracy: f64,
    pub max_dp: f64,
    pub per_run: Vec<RunResult>,
}

impl TradeoffPoint {
    pub fn from_runs(task: &str, encoder_config: serde_json::Value, per_run: Vec<RunResult>) -> Result<Self> {
        if per_run.is_empty() {
            return Err(Error::EmptyInput("per-run results"));
        }
        let mean_accuracy = per_run.iter().map(|r| r.accuracy).sum::<f64>() / per_run.len() as f64;
        let max_dp = per_run.iter().map(|r| r.dp).fold(f64::NEG_INFINITY, f64::max);
        Ok(TradeoffPoint {
            task: task.to_string(),
            encoder_config,
            mean_accuracy,
            max_dp,
            per_run,
        })
    }
}

// ---------------------------------------------------------------------------
// Classifier

/// One hidden ReLU layer, sigmoid output, trained on binary cross-entropy
/// with mini-batch Adam. Computation is in `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    d: usize,
    h: usize,
    /// `w1[j * h + k]` connects input `j` to hidden unit `k`.
    w1: Vec<f32>,
    b1: Vec<f32>,
    w2: Vec<f32>,
    b2: f32,
}

struct Adam {
    lr: f32,
    t: i32,
    m: Vec<f32>,
    v: Vec<f32>,
}

impl Adam {
    const BETA1: f32 = 0.9;
    const BETA2: f32 = 0.999;
    const EPS: f32 = 1e-8;

    fn new(n: usize, lr: f32) -> Self {
        Adam {
            lr,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// `params` and `grads` are flat views in a fixed order.
    fn step(&mut self, params: &mut [&mut [f32]], grads: &[&[f32]]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let mut offset = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            let m = &mut self.m[offset..offset + p.len()];
            let v = &mut self.v[offset..offset + p.len()];
            for i in 0..p.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= self.lr * mh / (vh.sqrt() + Self::EPS);
            }
            offset += p.len();
        }
    }
}

fn to_f32_rows(x: ArrayView2<'_, f64>) -> Vec<f32> {
    x.rows()
        .into_iter()
        .flat_map(|r| r.into_iter().map(|&v| v as f32).collect::<Vec<_>>())
        .collect()
}

/// Id of each row's distinct value pattern, and the number of patterns.
fn distinct_rows(x: &[f32], n: usize, d: usize) -> (Vec<u32>, usize) {
    let mut ids = Vec::with_capacity(n);
    let mut seen: HashMap<Vec<u32>, u32> = HashMap::new();
    for i in 0..n {
        let key: Vec<u32> = x[i * d..(i + 1) * d].iter().map(|v| v.to_bits()).collect();
        let next = seen.len() as u32;
        ids.push(*seen.entry(key).or_insert(next));
    }
    (ids, seen.len())
}

impl Classifier {
    fn init(d: usize, h: usize, rng: &mut ChaCha8Rng) -> Self {
        let b_in = 1.0 / (d.max(1) as f32).sqrt();
        let b_hid = 1.0 / (h as f32).sqrt();
        Classifier {
            d,
            h,
            w1: (0..d * h).map(|_| rng.gen_range(-b_in..b_in)).collect(),
            b1: (0..h).map(|_| rng.gen_range(-b_in..b_in)).collect(),
            w2: (0..h).map(|_| rng.gen_range(-b_hid..b_hid)).collect(),
            b2: rng.gen_range(-b_hid..b_hid),
        }
    }

    #[inline]
    fn hidden(&self, x: &[f32], z: &mut [f32]) {
        z.copy_from_slice(&self.b1);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                let w = &self.w1[j * self.h..(j + 1) * self.h];
                for (zk, &wk) in z.iter_mut().zip(w) {
                    *zk += xj * wk;
                }
            }
        }
    }

    #[inline]
    fn logit(&self, x: &[f32], z: &mut [f32]) -> f32 {
        self.hidden(x, z);
        self.b2
            + z.iter()
                .zip(&self.w2)
                .map(|(&zk, &wk)| zk.max(0.0) * wk)
                .sum::<f32>()
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.ncols(),
            });
        }
        let xs = to_f32_rows(x);
        let (ids, k) = distinct_rows(&xs, x.nrows(), self.d);
        let mut cache = vec![f64::NAN; k];
        let mut z = vec![0.0f32; self.h];
        Ok(ids
            .iter()
            .enumerate()
            .map(|(i, &id)| {
                let slot = &mut cache[id as usize];
                if slot.is_nan() {
                    let o = self.logit(&xs[i * self.d..(i + 1) * self.d], &mut z);
                    *slot = 1.0 / (1.0 + (-(o as f64)).exp());
                }
                *slot
            })
            .collect())
    }

    /// Hard predictions, positive when the output probability is >= 0.5.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| u8::from(p >= 0.5))
            .collect())
    }
}

pub fn train_classifier(reps: ArrayView2<'_, f64>, labels: &[u8], p: &ClassifierParams) -> Result<Classifier> {
    p.validate()?;
    let n = reps.nrows();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: n,
        });
    }
    if n == 0 {
        return Err(Error::EmptyInput("classifier training rows"));
    }
    let d = reps.ncols();
    let h = p.hidden_size;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut net = Classifier::init(d, h, &mut rng);
    let xs = to_f32_rows(reps);
    // Rows with identical inputs inside a batch share one forward/backward
    // pass, weighted by their label counts.
    let (ids, n_distinct) = distinct_rows(&xs, n, d);
    let mut slot = vec![u32::MAX; n_distinct];
    let mut uniq: Vec<(usize, f32, f32)> = Vec::with_capacity(p.batch_size);

    let mut gw1 = vec![0.0f32; d * h];
    let mut gb1 = vec![0.0f32; h];
    let mut gw2 = vec![0.0f32; h];
    let mut gb2 = [0.0f32; 1];
    let mut z = vec![0.0f32; h];
    let mut delta = vec![0.0f32; h];
    let mut adam = Adam::new(d * h + 2 * h + 1, p.learning_rate as f32);
    let mut order: Vec<usize> = (0..n).collect();

    for _ in 0..p.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(p.batch_size) {
            uniq.clear();
            for &i in batch {
                let id = ids[i] as usize;
                if slot[id] == u32::MAX {
                    slot[id] = uniq.len() as u32;
                    uniq.push((i, 0.0, 0.0));
                }
                let u = &mut uniq[slot[id] as usize];
                if labels[i] == 1 {
                    u.2 += 1.0;
                } else {
                    u.1 += 1.0;
                }
            }
            gw1.iter_mut().for_each(|g| *g = 0.0);
            gb1.iter_mut().for_each(|g| *g = 0.0);
            gw2.iter_mut().for_each(|g| *g = 0.0);
            gb2[0] = 0.0;
            let scale = 1.0 / batch.len() as f32;
            for &(i, neg, pos) in &uniq {
                slot[ids[i] as usize] = u32::MAX;
                let x = &xs[i * d..(i + 1) * d];
                let o = net.logit(x, &mut z);
                let s = 1.0 / (1.0 + (-o).exp());
                // d(sum of BCE)/d(logit) over the duplicates
                let g = (neg * s + pos * (s - 1.0)) * scale;
                gb2[0] += g;
                for k in 0..h {
                    let a = z[k].max(0.0);
                    gw2[k] += g * a;
                    delta[k] = if z[k] > 0.0 { g * net.w2[k] } else { 0.0 };
                    gb1[k] += delta[k];
                }
                for (j, &xj) in x.iter().enumerate() {
                    if xj != 0.0 {
                        let gw = &mut gw1[j * h..(j + 1) * h];
                        for (gk, &dk) in gw.iter_mut().zip(&delta) {
                            *gk += xj * dk;
                        }
                    }
                }
            }
            let mut b2 = [net.b2];
            adam.step(
                &mut [&mut net.w1, &mut net.b1, &mut net.w2, &mut b2],
                &[&gw1, &gb1, &gw2, &gb2],
            );
            net.b2 = b2[0];
        }
    }
    Ok(net)
}

// ---------------------------------------------------------------------------
// Protocol

/// Fits on training representations and predicts the test rows.
pub trait Learner: Sync {
    fn fit_predict(
        &self,
        train: ArrayView2<'_, f64>,
        labels: &[u8],
        test: ArrayView2<'_, f64>,
        seed: u64,
    ) -> Result<Vec<u8>>;
}

/// The default downstream learner: [`train_classifier`] with the run seed.
#[derive(Debug, Clone, Copy)]
pub struct MlpLearner(pub ClassifierParams);

impl Learner for MlpLearner {
    fn fit_predict(
        &self,
        train: ArrayView2<'_, f64>,
        labels: &[u8],
        test: ArrayView2<'_, f64>,
        seed: u64,
    ) -> Result<Vec<u8>> {
        let p = ClassifierParams { seed, ..self.0 };
        train_classifier(train, labels, &p)?.predict(test)
    }
}

/// Inputs of one protocol evaluation. Representations are expected to be
/// normalized with statistics fitted on `reps_train`.
#[derive(Debug, Clone, Copy)]
pub struct EvalInput<'a> {
    pub task: &'a str,
    pub reps_train: ArrayView2<'a, f64>,
    pub reps_test: ArrayView2<'a, f64>,
    pub labels_train: &'a [u8],
    pub labels_test: &'a [u8],
    pub groups_test: &'a [usize],
    pub n_groups: usize,
}

pub fn evaluate_protocol(input: &EvalInput<'_>, n_runs: usize, p: &ClassifierParams) -> Result<TradeoffPoint> {
    p.validate()?;
    evaluate_protocol_with(&MlpLearner(*p), input, n_runs, p.seed)
}

/// Runs `learner` with seeds `base_seed .. base_seed + n_runs`.
pub fn evaluate_protocol_with<L: Learner>(
    learner: &L,
    input: &EvalInput<'_>,
    n_runs: usize,
    base_seed: u64,
) -> Result<TradeoffPoint> {
    if n_runs < 1 {
        return Err(Error::InvalidParameter("n_runs must be >= 1".into()));
    }
    if input.reps_train.ncols() != input.reps_test.ncols() {
        return Err(Error::DimensionMismatch {
            expected: input.reps_train.ncols(),
            found: input.reps_test.ncols(),
        });
    }
    if input.labels_train.len() != input.reps_train.nrows() {
        return Err(Error::LengthMismatch {
            left: input.labels_train.len(),
            right: input.reps_train.nrows(),
        });
    }
    let runs = (0..n_runs as u64)
        .into_par_iter()
        .map(|r| {
            let seed = base_seed + r;
            let preds = learner.fit_predict(input.reps_train, input.labels_train, input.reps_test, seed)?;
            let accuracy = accuracy(&preds, input.labels_test)?;
            let gp = GroupedPredictions::new(&preds, input.groups_test, input.n_groups)?;
            Ok(RunResult {
                seed,
                accuracy,
                dp: dp_distance(&gp)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TradeoffPoint::from_runs(input.task, serde_json::Value::Null, runs)
}

/// Normalizes both sides with statistics fitted on `train`.
pub fn normalize_pair(train: ArrayView2<'_, f64>, test: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let stats = NormStats::fit(train);
    Ok((stats.apply(train)?, stats.apply(test)?))
}

/// Evaluates raw representations of a split on each task.
pub fn evaluate_representations(
    split: &SplitDataset,
    reps_train: ArrayView2<'_, f64>,
    reps_test: ArrayView2<'_, f64>,
    tasks: &[String],
    protocol: &Protocol,
    encoder_config: &serde_json::Value,
) -> Result<Vec<TradeoffPoint>> {
    if reps_train.nrows() != split.train.n() || reps_test.nrows() != split.test.n() {
        return Err(Error::InvalidDataset(format!(
            "representation rows ({}, {}) do not match the split ({}, {})",
            reps_train.nrows(),
            reps_test.nrows(),
            split.train.n(),
            split.test.n()
        )));
    }
    let (train, test) = normalize_pair(reps_train, reps_test)?;
    tasks
        .iter()
        .map(|task| {
            let input = EvalInput {
                task,
                reps_train: train.view(),
                reps_test: test.view(),
                labels_train: split.train.task(task)?,
                labels_test: split.test.task(task)?,
                groups_test: split.test.sensitive(),
                n_groups: split.test.n_groups(),
            };
            let mut point = evaluate_protocol(&input, protocol.n_runs, &protocol.classifier)?;
            point.encoder_config = encoder_config.clone();
            Ok(point)
        })
        .collect()
}

/// Classifier trained directly on the normalized raw features.
pub fn unfair_baseline(split: &SplitDataset, task: &str, protocol: &Protocol) -> Result<TradeoffPoint> {
    split.train.task(task)?;
    let config = serde_json::json!({ "encoder": "identity" });
    let mut points = evaluate_representations(
        split,
        split.train.features(),
        split.test.features(),
        &[task.to_string()],
        protocol,
        &config,
    )?;
    Ok(points.remove(0))
}
