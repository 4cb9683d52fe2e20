use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::criterion::{leaf_criterion, CriterionInput};
use super::{CriterionWeights, RecMode};
use crate::error::Result;
use crate::metrics::gini_from_counts;

/// A split must lower the criterion by more than this to count.
pub(crate) const MIN_GAIN: f64 = 1e-12;
/// Candidates closer than this are ties, resolved towards the lower
/// feature index and then the lower threshold.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: usize,
    /// Rows with `x[feature] <= threshold` go left.
    pub threshold: f64,
    /// `C(D) - (|L| C(L) + |R| C(R)) / |D|`.
    pub gain: f64,
    pub left_count: usize,
    pub right_count: usize,
}

/// Best threshold split of `rows`, or `None` when no legal split lowers the
/// criterion. Candidate thresholds are midpoints between consecutive
/// distinct values of each feature; both children must keep at least
/// `min_leaf_samples` rows.
pub fn best_split(
    input: &CriterionInput<'_>,
    rows: &[usize],
    w: &CriterionWeights,
    min_leaf_samples: usize,
) -> Result<Option<SplitCandidate>> {
    input.require_labels(w)?;
    let sorted: Vec<Vec<usize>> = input
        .columns
        .iter()
        .map(|col| {
            let mut r = rows.to_vec();
            r.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            r
        })
        .collect();
    best_split_sorted(input, &sorted, w, min_leaf_samples)
}

/// Same as [`best_split`] with the leaf rows already sorted by every feature.
pub(crate) fn best_split_sorted(
    input: &CriterionInput<'_>,
    sorted: &[Vec<usize>],
    w: &CriterionWeights,
    min_leaf_samples: usize,
) -> Result<Option<SplitCandidate>> {
    input.require_labels(w)?;
    let min = min_leaf_samples.max(1);
    let Some(first) = sorted.first() else {
        return Ok(None);
    };
    let n = first.len();
    if n < 2 * min {
        return Ok(None);
    }
    let mut acc = Accumulator::new(input, w);
    let mut right_vals = vec![0.0; n + 1];
    let mut best: Option<(f64, usize, usize)> = None;
    for (f, rows) in sorted.iter().enumerate() {
        let col = &input.columns[f];
        let is_candidate = |pos: usize| col[rows[pos - 1]] < col[rows[pos]];
        if col[rows[min - 1]] == col[rows[n - min]] {
            continue;
        }
        acc.reset();
        for pos in (min..n).rev() {
            acc.add(rows[pos]);
            if pos <= n - min && is_candidate(pos) {
                right_vals[pos] = acc.value();
            }
        }
        acc.reset();
        for pos in 1..=n - min {
            acc.add(rows[pos - 1]);
            if pos >= min && is_candidate(pos) {
                let v = (pos as f64 * acc.value() + (n - pos) as f64 * right_vals[pos]) / n as f64;
                if best.is_none_or(|(b, _, _)| v < b - TIE_EPS) {
                    best = Some((v, f, pos));
                }
            }
        }
    }
    let Some((_, feature, pos)) = best else {
        return Ok(None);
    };
    // re-evaluate the winner exactly
    let rows = &sorted[feature];
    let parent = leaf_criterion(input, rows, w)?;
    let left = leaf_criterion(input, &rows[..pos], w)?;
    let right = leaf_criterion(input, &rows[pos..], w)?;
    let children = (pos as f64 * left + (n - pos) as f64 * right) / n as f64;
    let gain = parent - children;
    if gain <= MIN_GAIN {
        return Ok(None);
    }
    let col = &input.columns[feature];
    Ok(Some(SplitCandidate {
        feature,
        threshold: midpoint(col[rows[pos - 1]], col[rows[pos]]),
        gain,
        left_count: pos,
        right_count: n - pos,
    }))
}

/// A threshold `t` with `a <= t < b`.
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b || m < a {
        a
    } else {
        m
    }
}

/// Incremental leaf statistics for threshold scans.
struct Accumulator<'i, 'a> {
    input: &'i CriterionInput<'a>,
    w: CriterionWeights,
    n: usize,
    label_counts: [usize; 2],
    group_counts: Vec<usize>,
    dims: Vec<usize>,
    sums: Vec<f64>,
    sumsq: Vec<f64>,
    heaps: Vec<MedianHeap>,
}

impl<'i, 'a> Accumulator<'i, 'a> {
    fn new(input: &'i CriterionInput<'a>, w: &CriterionWeights) -> Self {
        let dims: Vec<usize> = if w.lambda_r > 0.0 {
            (0..input.n_features())
                .filter(|&j| input.scale[j] != 0.0)
                .collect()
        } else {
            Vec::new()
        };
        let k = dims.len();
        let (sums, sumsq, heaps) = match w.rec_mode {
            RecMode::MeanSquared => (vec![0.0; k], vec![0.0; k], Vec::new()),
            RecMode::AbsMedian => (Vec::new(), Vec::new(), vec![MedianHeap::default(); k]),
            RecMode::None => (Vec::new(), Vec::new(), Vec::new()),
        };
        Accumulator {
            input,
            w: *w,
            n: 0,
            label_counts: [0; 2],
            group_counts: vec![0; input.n_groups],
            dims,
            sums,
            sumsq,
            heaps,
        }
    }

    fn reset(&mut self) {
        self.n = 0;
        self.label_counts = [0; 2];
        self.group_counts.iter_mut().for_each(|c| *c = 0);
        self.sums.iter_mut().for_each(|c| *c = 0.0);
        self.sumsq.iter_mut().for_each(|c| *c = 0.0);
        self.heaps.iter_mut().for_each(MedianHeap::clear);
    }

    #[inline]
    fn add(&mut self, row: usize) {
        self.n += 1;
        if self.w.lambda_y > 0.0 {
            if let Some(labels) = self.input.labels {
                self.label_counts[labels[row] as usize] += 1;
            }
        }
        if self.w.lambda_f > 0.0 {
            self.group_counts[self.input.groups[row]] += 1;
        }
        if self.dims.is_empty() {
            return;
        }
        let x = self.input.scaled_row(row);
        match self.w.rec_mode {
            RecMode::MeanSquared => {
                for (k, &j) in self.dims.iter().enumerate() {
                    let v = x[j];
                    self.sums[k] += v;
                    self.sumsq[k] += v * v;
                }
            }
            RecMode::AbsMedian => {
                for (k, &j) in self.dims.iter().enumerate() {
                    self.heaps[k].push(x[j]);
                }
            }
            RecMode::None => {}
        }
    }

    fn value(&self) -> f64 {
        let n = self.n;
        let mut v = 0.0;
        if self.w.lambda_y > 0.0 {
            v += self.w.lambda_y * gini_from_counts(&self.label_counts, n);
        }
        if self.w.lambda_f > 0.0 {
            v += self.w.lambda_f
                * (self.input.fairness_offset() - gini_from_counts(&self.group_counts, n));
        }
        if !self.dims.is_empty() {
            let nf = n as f64;
            let rec: f64 = match self.w.rec_mode {
                RecMode::MeanSquared => self
                    .sums
                    .iter()
                    .zip(&self.sumsq)
                    .map(|(&s, &q)| (q - s * s / nf).max(0.0))
                    .sum(),
                RecMode::AbsMedian => self.heaps.iter().map(MedianHeap::abs_deviation).sum(),
                RecMode::None => 0.0,
            };
            v += self.w.lambda_r * rec / nf;
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Insert-only running lower median with the sum of absolute deviations.
#[derive(Debug, Clone, Default)]
struct MedianHeap {
    lower: BinaryHeap<Key>,
    upper: BinaryHeap<Reverse<Key>>,
    lower_sum: f64,
    upper_sum: f64,
}

impl MedianHeap {
    fn clear(&mut self) {
        self.lower.clear();
        self.upper.clear();
        self.lower_sum = 0.0;
        self.upper_sum = 0.0;
    }

    fn push(&mut self, v: f64) {
        match self.lower.peek() {
            Some(top) if v > top.0 => {
                self.upper.push(Reverse(Key(v)));
                self.upper_sum += v;
            }
            _ => {
                self.lower.push(Key(v));
                self.lower_sum += v;
            }
        }
        // keep |lower| == |upper| or |lower| == |upper| + 1
        if self.lower.len() > self.upper.len() + 1 {
            let Key(m) = self.lower.pop().expect("nonempty");
            self.lower_sum -= m;
            self.upper.push(Reverse(Key(m)));
            self.upper_sum += m;
        } else if self.upper.len() > self.lower.len() {
            let Reverse(Key(m)) = self.upper.pop().expect("nonempty");
            self.upper_sum -= m;
            self.lower.push(Key(m));
            self.lower_sum += m;
        }
    }

    fn abs_deviation(&self) -> f64 {
        let Some(&Key(m)) = self.lower.peek() else {
            return 0.0;
        };
        let below = m * self.lower.len() as f64 - self.lower_sum;
        let above = self.upper_sum - m * self.upper.len() as f64;
        (below + above).max(0.0)
    }
}
