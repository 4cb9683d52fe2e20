use crate::error::{Error, Result};
use crate::eval::TradeoffPoint;

/// Indices of the non-dominated `(accuracy, dp)` pairs, ordered by
/// ascending dp and then descending accuracy. A pair dominates another when
/// it is no worse on both axes and strictly better on one; pairs with a NaN
/// coordinate are dropped.
pub fn pareto_indices(pairs: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pairs.len())
        .filter(|&i| !pairs[i].0.is_nan() && !pairs[i].1.is_nan())
        .collect();
    order.sort_by(|&a, &b| {
        pairs[a]
            .1
            .total_cmp(&pairs[b].1)
            .then(pairs[b].0.total_cmp(&pairs[a].0))
            .then(a.cmp(&b))
    });
    let mut keep = Vec::new();
    // best accuracy among strictly smaller dp
    let mut best_before = f64::NEG_INFINITY;
    let mut start = 0;
    while start < order.len() {
        let dp = pairs[order[start]].1;
        let mut end = start;
        while end < order.len() && pairs[order[end]].1 == dp {
            end += 1;
        }
        let group_best = pairs[order[start]].0;
        if group_best > best_before {
            keep.extend(
                order[start..end]
                    .iter()
                    .copied()
                    .filter(|&i| pairs[i].0 == group_best),
            );
            best_before = group_best;
        }
        start = end;
    }
    keep
}

/// Non-dominated points of a single task, ordered by ascending `max_dp`.
pub fn pareto_front(points: &[TradeoffPoint]) -> Result<Vec<TradeoffPoint>> {
    if let Some(first) = points.first() {
        if let Some(other) = points.iter().find(|p| p.task != first.task) {
            return Err(Error::InvalidParameter(format!(
                "points of tasks \"{}\" and \"{}\" mixed in one front",
                first.task, other.task
            )));
        }
    }
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.mean_accuracy, p.max_dp)).collect();
    Ok(pareto_indices(&pairs)
        .into_iter()
        .map(|i| points[i].clone())
        .collect())
}
