//! Scalar statistics: demographic parity distance, simple matching
//! coefficient, Gini impurity, accuracy and the majority baseline.

use crate::error::{Error, Result};

/// Hard binary predictions paired with sensitive group ids in `0..n_groups`.
#[derive(Debug, Clone, Copy)]
pub struct GroupedPredictions<'a> {
    pub preds: &'a [u8],
    pub groups: &'a [usize],
    pub n_groups: usize,
}

impl<'a> GroupedPredictions<'a> {
    pub fn new(preds: &'a [u8], groups: &'a [usize], n_groups: usize) -> Result<Self> {
        if preds.len() != groups.len() {
            return Err(Error::LengthMismatch {
                left: preds.len(),
                right: groups.len(),
            });
        }
        if preds.is_empty() {
            return Err(Error::EmptyInput("grouped predictions"));
        }
        if let Some(&g) = groups.iter().find(|&&g| g >= n_groups) {
            return Err(Error::InvalidParameter(format!(
                "group id {g} outside 0..{n_groups}"
            )));
        }
        Ok(GroupedPredictions {
            preds,
            groups,
            n_groups,
        })
    }

    /// Positive prediction rate of each group.
    pub fn group_rates(&self) -> Result<Vec<f64>> {
        let mut pos = vec![0usize; self.n_groups];
        let mut count = vec![0usize; self.n_groups];
        for (&p, &g) in self.preds.iter().zip(self.groups) {
            count[g] += 1;
            pos[g] += p as usize;
        }
        pos.iter()
            .zip(&count)
            .enumerate()
            .map(|(g, (&p, &c))| {
                if c == 0 {
                    Err(Error::UndefinedGroup(g))
                } else {
                    Ok(p as f64 / c as f64)
                }
            })
            .collect()
    }
}

/// Largest gap in positive prediction rate between any two groups.
pub fn dp_distance(gp: &GroupedPredictions<'_>) -> Result<f64> {
    let rates = gp.group_rates()?;
    let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// Fraction of positions where two binary vectors agree.
pub fn smc(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("smc"));
    }
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(agree as f64 / a.len() as f64)
}

/// `1 - sum_c p_c^2` over the observed class proportions.
pub fn gini<T: Copy + Into<usize>>(labels: &[T]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("gini"));
    }
    let mut counts: Vec<usize> = Vec::new();
    for &l in labels {
        let c: usize = l.into();
        if c >= counts.len() {
            counts.resize(c + 1, 0);
        }
        counts[c] += 1;
    }
    Ok(gini_from_counts(&counts, labels.len()))
}

#[inline]
pub(crate) fn gini_from_counts(counts: &[usize], total: usize) -> f64 {
    let n = total as f64;
    let sum_sq: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum();
    1.0 - sum_sq
}

pub fn accuracy(preds: &[u8], labels: &[u8]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput("accuracy"));
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Majority class of the training labels; an exact tie goes to class 1.
pub fn majority_class(train_labels: &[u8]) -> Result<u8> {
    if train_labels.is_empty() {
        return Err(Error::EmptyInput("majority baseline train labels"));
    }
    let ones = train_labels.iter().filter(|&&l| l == 1).count();
    Ok(u8::from(2 * ones >= train_labels.len()))
}

/// Test accuracy of the constant predictor returning the training majority.
pub fn majority_accuracy(train_labels: &[u8], test_labels: &[u8]) -> Result<f64> {
    let class = majority_class(train_labels)?;
    if test_labels.is_empty() {
        return Err(Error::EmptyInput("majority baseline test labels"));
    }
    let hits = test_labels.iter().filter(|&&l| l == class).count();
    Ok(hits as f64 / test_labels.len() as f64)
}
