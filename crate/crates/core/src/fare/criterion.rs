use ndarray::ArrayView2;

use super::{CriterionWeights, RecMode};
use crate::error::{Error, Result};
use crate::metrics::gini_from_counts;

/// Everything the leaf criterion reads about the training rows.
///
/// Features are kept column-major for the threshold scans. The
/// reconstruction term works on `(x - column mean) * scale`, where `scale`
/// defaults to 1 and is set to the inverse column standard deviation when
/// the tree is grown, making the term scale free.
#[derive(Debug, Clone)]
pub struct CriterionInput<'a> {
    pub(crate) columns: Vec<Vec<f64>>,
    pub(crate) scaled: Vec<f64>,
    pub(crate) labels: Option<&'a [u8]>,
    pub(crate) groups: &'a [usize],
    pub(crate) n_groups: usize,
    pub(crate) scale: Vec<f64>,
}

impl<'a> CriterionInput<'a> {
    pub fn new(
        features: ArrayView2<'_, f64>,
        labels: Option<&'a [u8]>,
        groups: &'a [usize],
        n_groups: usize,
    ) -> Result<Self> {
        let n = features.nrows();
        if groups.len() != n {
            return Err(Error::LengthMismatch {
                left: groups.len(),
                right: n,
            });
        }
        if let Some(l) = labels {
            if l.len() != n {
                return Err(Error::LengthMismatch {
                    left: l.len(),
                    right: n,
                });
            }
        }
        if n_groups < 1 || groups.iter().any(|&g| g >= n_groups) {
            return Err(Error::InvalidParameter(format!(
                "group ids must lie in 0..{n_groups}"
            )));
        }
        let columns: Vec<Vec<f64>> = features.columns().into_iter().map(|c| c.to_vec()).collect();
        let d = columns.len();
        let mut input = CriterionInput {
            columns,
            scaled: Vec::new(),
            labels,
            groups,
            n_groups,
            scale: vec![1.0; d],
        };
        input.rescale();
        Ok(input)
    }

    /// Per-dimension multipliers for the reconstruction term.
    pub fn with_rec_scale(mut self, scale: Vec<f64>) -> Result<Self> {
        if scale.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: scale.len(),
            });
        }
        self.scale = scale;
        self.rescale();
        Ok(self)
    }

    fn rescale(&mut self) {
        let n = self.n_rows();
        let d = self.n_features();
        let mut scaled = vec![0.0; n * d];
        for (j, col) in self.columns.iter().enumerate() {
            let mean = if n > 0 { col.iter().sum::<f64>() / n as f64 } else { 0.0 };
            let s = self.scale[j];
            for (i, &v) in col.iter().enumerate() {
                scaled[i * d + j] = (v - mean) * s;
            }
        }
        self.scaled = scaled;
    }

    pub fn n_rows(&self) -> usize {
        self.groups.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    /// `c_S = 1 - 1/|S|`, the largest possible sensitive Gini impurity.
    pub(crate) fn fairness_offset(&self) -> f64 {
        1.0 - 1.0 / self.n_groups as f64
    }

    #[inline]
    pub(crate) fn scaled_row(&self, row: usize) -> &[f64] {
        let d = self.n_features();
        &self.scaled[row * d..(row + 1) * d]
    }

    pub(crate) fn require_labels(&self, w: &CriterionWeights) -> Result<()> {
        if w.lambda_y > 0.0 && self.labels.is_none() {
            return Err(Error::TaskRequired);
        }
        Ok(())
    }
}

/// `lambda_y * Gini_y + lambda_f * (c_S - Gini_s) + lambda_r * Rec` over
/// the given rows.
pub fn leaf_criterion(input: &CriterionInput<'_>, rows: &[usize], w: &CriterionWeights) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("leaf rows"));
    }
    input.require_labels(w)?;
    let n = rows.len();
    let mut value = 0.0;
    if w.lambda_y > 0.0 {
        let labels = input.labels.expect("checked above");
        let mut counts = [0usize; 2];
        for &r in rows {
            counts[labels[r] as usize] += 1;
        }
        value += w.lambda_y * gini_from_counts(&counts, n);
    }
    if w.lambda_f > 0.0 {
        let mut counts = vec![0usize; input.n_groups];
        for &r in rows {
            counts[input.groups[r]] += 1;
        }
        value += w.lambda_f * (input.fairness_offset() - gini_from_counts(&counts, n));
    }
    if w.lambda_r > 0.0 {
        value += w.lambda_r * reconstruction(input, rows, w.rec_mode);
    }
    Ok(value)
}

fn reconstruction(input: &CriterionInput<'_>, rows: &[usize], mode: RecMode) -> f64 {
    let n = rows.len() as f64;
    let d = input.n_features();
    let mut total = 0.0;
    let mut buf = Vec::with_capacity(rows.len());
    for j in 0..d {
        if input.scale[j] == 0.0 {
            continue;
        }
        buf.clear();
        buf.extend(rows.iter().map(|&r| input.scaled_row(r)[j]));
        match mode {
            RecMode::MeanSquared => {
                let mean = buf.iter().sum::<f64>() / n;
                total += buf.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
            }
            RecMode::AbsMedian => {
                let k = (buf.len() - 1) / 2;
                let (_, median, _) = buf.select_nth_unstable_by(k, f64::total_cmp);
                let median = *median;
                total += buf.iter().map(|v| (v - median).abs()).sum::<f64>();
            }
            RecMode::None => {}
        }
    }
    total / n
}
