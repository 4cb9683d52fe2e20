use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::criterion::{leaf_criterion, CriterionInput};
use super::split::{best_split_sorted, SplitCandidate};
use super::FareParams;
use crate::error::{Error, Result};
use crate::tabular::{read_json, write_json, Dataset, NormStats, CONSTANT_STD};

pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    /// Per-dimension median of the member rows.
    pub representation: Vec<f64>,
    pub occupancy: usize,
    /// Member rows, as indices into the training dataset. Not persisted.
    #[serde(skip)]
    pub rows: Vec<usize>,
}

/// A trained tree encoder. `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FareTree {
    pub format_version: u32,
    pub n_features: usize,
    pub nodes: Vec<Node>,
    pub leaves: Vec<Leaf>,
    pub params: FareParams,
    /// Total size-weighted criterion after each growth step, starting with
    /// the single root leaf. Not persisted.
    #[serde(skip)]
    pub criterion_trace: Vec<f64>,
    /// Training rows held out from growth. Not persisted.
    #[serde(skip)]
    pub holdout: Vec<usize>,
}

struct Growing {
    node: usize,
    /// Member rows sorted by each feature.
    sorted: Vec<Vec<usize>>,
    best: Option<SplitCandidate>,
    criterion: f64,
}

/// Grows a tree best-first: the leaf whose best split lowers the total
/// size-weighted criterion the most is split next, until `max_leaves` is
/// reached or no leaf has an improving split.
pub fn build_tree(train: &Dataset, task: Option<&str>, p: &FareParams) -> Result<FareTree> {
    p.validate()?;
    let labels = match task {
        Some(t) => Some(train.task(t)?),
        None if p.weights.lambda_y > 0.0 => return Err(Error::TaskRequired),
        None => None,
    };
    let n = train.n();
    let n_holdout = (p.val_fraction * n as f64).round() as usize;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(p.seed));
    let mut holdout = perm[..n_holdout].to_vec();
    let mut growth = perm[n_holdout..].to_vec();
    holdout.sort_unstable();
    growth.sort_unstable();
    if growth.len() < p.min_leaf_samples {
        return Err(Error::InvalidParameter(format!(
            "{} growth rows cannot fill a leaf of {} samples",
            growth.len(),
            p.min_leaf_samples
        )));
    }

    let x = train.features();
    let stats = NormStats::fit(x.select(ndarray::Axis(0), &growth).view());
    let scale: Vec<f64> = stats
        .stds
        .iter()
        .map(|&s| if s < CONSTANT_STD { 0.0 } else { 1.0 / s })
        .collect();
    let input = CriterionInput::new(x, labels, train.sensitive(), train.n_groups())?
        .with_rec_scale(scale)?;

    let w = p.weights;
    let sorted_root: Vec<Vec<usize>> = input
        .columns
        .iter()
        .map(|col| {
            let mut r = growth.clone();
            r.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            r
        })
        .collect();
    let total = growth.len() as f64;
    let root_rows = growth.clone();
    let root_criterion = leaf_criterion(&input, &root_rows, &w)?;
    let mut nodes = vec![Node::Leaf { leaf: 0 }];
    let mut growing = vec![Growing {
        node: 0,
        best: if p.max_leaves > 1 {
            best_split_sorted(&input, &sorted_root, &w, p.min_leaf_samples)?
        } else {
            None
        },
        sorted: sorted_root,
        criterion: root_criterion,
    }];
    let mut trace = vec![root_criterion];
    let mut in_left = vec![false; n];

    while growing.len() < p.max_leaves {
        // largest reduction of the total criterion; first leaf wins ties
        let mut pick: Option<(usize, f64)> = None;
        for (i, g) in growing.iter().enumerate() {
            if let Some(s) = g.best {
                let reduction = s.gain * g.sorted[0].len() as f64;
                if pick.is_none_or(|(_, r)| reduction > r) {
                    pick = Some((i, reduction));
                }
            }
        }
        let Some((idx, _)) = pick else { break };
        let split = growing[idx].best.expect("picked leaf has a split");
        let leaf = std::mem::replace(
            &mut growing[idx],
            Growing {
                node: 0,
                sorted: Vec::new(),
                best: None,
                criterion: 0.0,
            },
        );
        let col = &input.columns[split.feature];
        for &r in &leaf.sorted[0] {
            in_left[r] = col[r] <= split.threshold;
        }
        let (mut left_sorted, mut right_sorted) = (Vec::new(), Vec::new());
        for list in &leaf.sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.iter().partition(|&&r| in_left[r]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        debug_assert_eq!(left_sorted[0].len(), split.left_count);

        let left_node = nodes.len();
        let right_node = left_node + 1;
        let right_leaf = growing.len();
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: left_node,
            right: right_node,
        };
        nodes.push(Node::Leaf { leaf: idx });
        nodes.push(Node::Leaf { leaf: right_leaf });

        let can_grow = growing.len() + 1 < p.max_leaves;
        let child = |node: usize, sorted: Vec<Vec<usize>>| -> Result<Growing> {
            let criterion = leaf_criterion(&input, &sorted[0], &w)?;
            let best = if can_grow {
                best_split_sorted(&input, &sorted, &w, p.min_leaf_samples)?
            } else {
                None
            };
            Ok(Growing {
                node,
                sorted,
                best,
                criterion,
            })
        };
        growing[idx] = child(left_node, left_sorted)?;
        let right = child(right_node, right_sorted)?;
        growing.push(right);
        let weighted: f64 = growing
            .iter()
            .map(|g| g.sorted[0].len() as f64 * g.criterion)
            .sum::<f64>()
            / total;
        trace.push(weighted);
    }

    let leaves = growing
        .into_iter()
        .map(|g| {
            let mut rows = g.sorted.into_iter().next().unwrap_or_default();
            rows.sort_unstable();
            Leaf {
                representation: median_rows(x, &rows),
                occupancy: rows.len(),
                rows,
            }
        })
        .collect();
    Ok(FareTree {
        format_version: TREE_FORMAT_VERSION,
        n_features: train.n_features(),
        nodes,
        leaves,
        params: *p,
        criterion_trace: trace,
        holdout,
    })
}

/// Per-column median; even counts take the midpoint of the two middle values.
pub(crate) fn median_rows(x: ArrayView2<'_, f64>, rows: &[usize]) -> Vec<f64> {
    let mut buf = Vec::with_capacity(rows.len());
    (0..x.ncols())
        .map(|j| {
            buf.clear();
            buf.extend(rows.iter().map(|&r| x[[r, j]]));
            let (n, k) = (buf.len(), buf.len() / 2);
            let (below, &mut upper, _) = buf.select_nth_unstable_by(k, f64::total_cmp);
            if n % 2 == 1 {
                upper
            } else {
                let lower = below.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                0.5 * (lower + upper)
            }
        })
        .collect()
}

impl FareTree {
    /// Index of the leaf `x` is routed to.
    pub fn leaf_index(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Leaf { leaf } => return Ok(*leaf),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn encode(&self, x: &[f64]) -> Result<&[f64]> {
        let leaf = self.leaf_index(x)?;
        Ok(&self.leaves[leaf].representation)
    }

    pub fn encode_matrix(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((x.nrows(), self.n_features));
        let mut buf = vec![0.0; x.ncols()];
        for (i, row) in x.rows().into_iter().enumerate() {
            buf.iter_mut().zip(row.iter()).for_each(|(b, &v)| *b = v);
            let rep = self.encode(&buf)?;
            out.row_mut(i).iter_mut().zip(rep).for_each(|(o, &v)| *o = v);
        }
        Ok(out)
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<FareTree> {
        let tree: FareTree = read_json(path)?;
        if tree.format_version != TREE_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported tree format version {}",
                tree.format_version
            )));
        }
        Ok(tree)
    }
}
