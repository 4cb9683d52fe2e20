//! Restricted tree encoders in the FARE family.
//!
//! A tree partitions the input space with axis-aligned threshold splits and
//! maps every point to the per-dimension median of the training rows in its
//! leaf. Splits are chosen greedily to minimize a leaf criterion that mixes
//! label impurity, a sensitive-attribute mixing reward and an optional
//! reconstruction error.

mod criterion;
mod split;
mod tree;

pub use criterion::{leaf_criterion, CriterionInput};
pub use split::{best_split, SplitCandidate};
pub use tree::{build_tree, FareTree, Leaf, Node, TREE_FORMAT_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reconstruction error used by the `lambda_r` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecMode {
    /// Mean squared distance to the leaf mean.
    MeanSquared,
    /// Mean L1 distance to the leaf median.
    AbsMedian,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionWeights {
    pub lambda_y: f64,
    pub lambda_f: f64,
    pub lambda_r: f64,
    pub rec_mode: RecMode,
}

impl CriterionWeights {
    pub fn new(lambda_y: f64, lambda_f: f64, lambda_r: f64, rec_mode: RecMode) -> Result<Self> {
        let w = CriterionWeights {
            lambda_y,
            lambda_f,
            lambda_r,
            rec_mode,
        };
        w.validate()?;
        Ok(w)
    }

    /// Original FARE criterion: `(1 - gamma) * Gini_y + gamma * (c_S - Gini_s)`.
    pub fn fair_gini(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!(
                "gamma {gamma} outside [0, 1]"
            )));
        }
        Self::new(1.0 - gamma, gamma, 0.0, RecMode::None)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_y", self.lambda_y),
            ("lambda_f", self.lambda_f),
            ("lambda_r", self.lambda_r),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must be finite and non-negative"
                )));
            }
        }
        if self.lambda_y == 0.0 && self.lambda_f == 0.0 && self.lambda_r == 0.0 {
            return Err(Error::InvalidParameter(
                "at least one criterion weight must be positive".into(),
            ));
        }
        if (self.rec_mode == RecMode::None) != (self.lambda_r == 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rec_mode {:?} is inconsistent with lambda_r = {}",
                self.rec_mode, self.lambda_r
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FareParams {
    pub weights: CriterionWeights,
    /// Upper bound on the number of leaves.
    pub max_leaves: usize,
    /// Lower bound on the number of training rows per leaf.
    pub min_leaf_samples: usize,
    /// Fraction of the training rows held out from growth.
    pub val_fraction: f64,
    pub seed: u64,
}

impl FareParams {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.max_leaves < 1 {
            return Err(Error::InvalidParameter("max_leaves must be >= 1".into()));
        }
        if self.min_leaf_samples < 1 {
            return Err(Error::InvalidParameter(
                "min_leaf_samples must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::InvalidParameter(format!(
                "val_fraction {} outside [0, 1)",
                self.val_fraction
            )));
        }
        Ok(())
    }
}
