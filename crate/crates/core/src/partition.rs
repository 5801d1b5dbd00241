//! Estimation of the partition `k = (k_1, ..., k_m)` of the atoms among clusters.
//!
//! The criterion is `g(k) = min_i lambda_min(Gamma_hat(H_i, k_i))`, maximized
//! over compositions of `k` into `m` positive parts. Cluster `i` only admits
//! orders up to `d_i`, the largest `N` whose Hankel matrix has a positive
//! smallest eigenvalue. Eigenvalues of nested Hankel matrices interlace, so
//! every excluded composition has `g <= 0` and pruning keeps the maximiser.

use log::warn;

use crate::error::{Error, Result};
use crate::local_moments::MomentTable;
use crate::psd::{enumerate_partitions, hankel_from_slice, Partition};

/// `g(k)`: smallest Hankel eigenvalue over all clusters.
pub fn g_hat(table: &MomentTable, partition: &Partition) -> Result<f64> {
    if table.len() != partition.len() {
        return Err(Error::Length {
            needed: partition.len(),
            got: table.len(),
        });
    }
    let mut g = f64::INFINITY;
    for (row, &order) in table.rows.iter().zip(partition.orders()) {
        let h = hankel_from_slice(&row.values, order)?;
        g = g.min(h.min_eigenvalue());
    }
    Ok(g)
}

/// Outcome of the partition search.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionEstimate {
    pub partition: Partition,
    /// Every candidate examined with its `g` value, in lexicographic order.
    pub candidates: Vec<(Partition, f64)>,
    /// Per-cluster upper bounds `d_i`.
    pub bounds: Vec<usize>,
    /// The pruned candidate set was empty and all compositions were searched.
    pub fell_back: bool,
}

/// Largest `N <= cap` with `lambda_min(Gamma_hat(H_i, N)) > 0` (at least 1).
fn order_bound(moments: &[f64], cap: usize) -> Result<usize> {
    let mut bound = 1;
    for n in 2..=cap {
        if hankel_from_slice(moments, n)?.min_eigenvalue() > 0.0 {
            bound = n;
        } else {
            break;
        }
    }
    Ok(bound)
}

/// Highest moment order each cluster row needs when `k` atoms are spread
/// over `m` clusters: a cluster holds at most `k - m + 1` atoms.
pub fn search_moment_order(k: usize, m: usize) -> usize {
    2 * (k - m + 1) - 1
}

/// `argmax g(k)` over compositions of `k` into `m = table.len()` parts.
///
/// Ties go to the lexicographically smallest partition. Rows need moments up
/// to order `2 (k - m + 1) - 2`.
pub fn estimate_partition(table: &MomentTable, k: usize) -> Result<PartitionEstimate> {
    let m = table.len();
    if m == 0 || k < m {
        return Err(Error::Domain(format!("cannot split {k} atoms into {m} clusters")));
    }
    if m == k {
        let partition = Partition(vec![1; m]);
        let g = g_hat(table, &partition)?;
        return Ok(PartitionEstimate {
            partition: partition.clone(),
            candidates: vec![(partition, g)],
            bounds: vec![1; m],
            fell_back: false,
        });
    }
    let cap = k - m + 1;
    let bounds = table
        .rows
        .iter()
        .map(|row| order_bound(&row.values, cap))
        .collect::<Result<Vec<_>>>()?;

    let all = enumerate_partitions(k, m)?;
    let pruned: Vec<Partition> = all
        .iter()
        .filter(|p| p.orders().iter().zip(&bounds).all(|(o, d)| o <= d))
        .cloned()
        .collect();
    let fell_back = pruned.is_empty();
    let search = if fell_back {
        warn!("no partition satisfies the bounds {bounds:?}; searching all compositions of {k}");
        all
    } else {
        pruned
    };

    let mut candidates = Vec::with_capacity(search.len());
    let mut best: Option<(usize, f64)> = None;
    for (idx, p) in search.into_iter().enumerate() {
        let g = g_hat(table, &p)?;
        if !g.is_nan() && best.is_none_or(|(_, b)| g > b) {
            best = Some((idx, g));
        }
        candidates.push((p, g));
    }
    let (idx, _) = best.ok_or_else(|| Error::Estimation("no candidate partition has a finite criterion".into()))?;
    Ok(PartitionEstimate {
        partition: candidates[idx].0.clone(),
        candidates,
        bounds,
        fell_back,
    })
}
