//! Cluster moment estimates from residues of `f_l(z) = z s_n'(z) / s_n(z)^l`.
//!
//! The contour integral around cluster `i` collects the residues at the
//! eigenvalues `A_i` and at the zeros `B_i` of `s_n`:
//!
//! ```text
//! gamma_hat_{i,l} = (-1)^l (n/p) [ sum_{A_i} Res(f_l, lambda) + sum_{B_i} Res(f_l, mu) ]
//! ```
//!
//! Residues at eigenvalues are `-lambda` for `l = 1` and vanish otherwise.
//! Residues at zeros use closed forms up to `l = 5` and a truncated Laurent
//! expansion beyond.

use crate::error::{Error, Result};
use crate::esd::{ClusterAssignment, EigenSample};
use crate::psd::MomentVector;

/// Highest moment order supported by default (`2 k_i - 1` for `k_i <= 8`).
pub const DEFAULT_MAX_ORDER: usize = 15;
/// `|s_n'(mu)|` below this marks a degenerate zero.
const DEGENERATE_SLOPE: f64 = 1e-14;
/// Orders with a closed-form residue.
const CLOSED_FORM_MAX: usize = 5;

/// `Res(f_l, lambda)` at a sample eigenvalue.
pub fn residue_at_lambda(lambda: f64, l: usize) -> f64 {
    if l == 1 {
        -lambda
    } else {
        0.0
    }
}

/// `Res(f_l, mu)` at a zero `mu` of `s_n`.
pub fn residue_at_mu(mu: f64, sample: &EigenSample, l: usize) -> Result<f64> {
    if l == 0 {
        return Err(Error::Domain("residues are defined for l >= 1".into()));
    }
    let d = sample.derivatives_at(mu, l.max(CLOSED_FORM_MAX - 1));
    residue_from_derivatives(mu, &d, l)
}

fn residue_from_derivatives(mu: f64, d: &[f64], l: usize) -> Result<f64> {
    if d[1].abs() < DEGENERATE_SLOPE {
        return Err(Error::Singular {
            at: mu,
            derivative: d[1],
        });
    }
    if l <= CLOSED_FORM_MAX {
        Ok(closed_form_residue(mu, d, l))
    } else {
        Ok(series_residue(mu, d, l))
    }
}

/// Closed-form residues for `l = 1..=5` from `d[j] = s_n^{(j)}(mu)`.
pub(crate) fn closed_form_residue(mu: f64, d: &[f64], l: usize) -> f64 {
    let (d1, d2) = (d[1], d[2]);
    match l {
        1 => mu,
        2 => 1.0 / d1,
        3 => -d2 / (2.0 * d1.powi(3)),
        4 => (3.0 * d2 * d2 - d1 * d[3]) / (6.0 * d1.powi(5)),
        5 => {
            -(15.0 * d2.powi(3) - 10.0 * d1 * d2 * d[3] + d1 * d1 * d[4]) / (24.0 * d1.powi(7))
        }
        _ => unreachable!("closed forms cover l <= 5"),
    }
}

/// Residue of `f_l` at a simple zero `mu` via truncated power series.
///
/// With `t = z - mu`, write `s_n = t S(t)`. For `l >= 2`,
/// `z s_n' s_n^{-l} = (z s_n^{1-l})' / (1 - l) - s_n^{1-l} / (1 - l)`, so the
/// residue is the coefficient of `t^{l-2}` in `S(t)^{1-l}`, divided by `l - 1`.
/// Needs `d[0..l]`.
pub fn series_residue(mu: f64, d: &[f64], l: usize) -> f64 {
    if l == 1 {
        return mu;
    }
    let len = l - 1;
    // S(t) = sum_j e_{j+1} t^j with taylor coefficients e_j = d_j / j!
    let mut s_reduced = Vec::with_capacity(len);
    let mut factorial = 1.0;
    for (j, dj) in d.iter().enumerate().skip(1).take(len) {
        factorial *= j as f64;
        s_reduced.push(dj / factorial);
    }
    let inv = series_reciprocal(&s_reduced);
    let mut power = vec![0.0; len];
    power[0] = 1.0;
    for _ in 0..len {
        power = series_mul(&power, &inv);
    }
    power[len - 1] / len as f64
}

fn series_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len();
    let mut out = vec![0.0; len];
    for i in 0..len {
        for j in 0..len - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

fn series_reciprocal(a: &[f64]) -> Vec<f64> {
    let len = a.len();
    let mut out = vec![0.0; len];
    out[0] = 1.0 / a[0];
    for i in 1..len {
        let acc: f64 = (1..=i).map(|j| a[j] * out[i - j]).sum();
        out[i] = -acc / a[0];
    }
    out
}

/// Estimated moments of every cluster's sub-measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub rows: Vec<MomentVector>,
}

impl MomentTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &MomentVector {
        &self.rows[i]
    }
}

/// `gamma_hat_{i,0..=max_order}` for cluster `i`, with `gamma_hat_{i,0} = v_i / v`.
pub fn estimate_cluster_moments(
    sample: &EigenSample,
    assignment: &ClusterAssignment,
    i: usize,
    max_order: usize,
) -> Result<MomentVector> {
    if max_order == 0 {
        return Err(Error::Domain("need at least the first moment".into()));
    }
    let range = assignment.range(i);
    let lambdas = &sample.lambdas()[range.clone()];
    let zeros = assignment.zero_set(i);
    let derivative_order = max_order.max(CLOSED_FORM_MAX - 1);
    let derivatives: Vec<Vec<f64>> = zeros
        .iter()
        .map(|&mu| sample.derivatives_at(mu, derivative_order))
        .collect();

    let prefactor = sample.n() as f64 / sample.p() as f64;
    let mut values = Vec::with_capacity(max_order + 1);
    values.push(range.len() as f64 / sample.v() as f64);
    for l in 1..=max_order {
        let mut sum: f64 = lambdas.iter().map(|&x| residue_at_lambda(x, l)).sum();
        for (&mu, d) in zeros.iter().zip(&derivatives) {
            sum += residue_from_derivatives(mu, d, l)?;
        }
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        values.push(sign * prefactor * sum);
    }
    Ok(MomentVector::estimated(values))
}

/// Moment rows for all clusters; `orders[i]` is the highest order for cluster `i`.
pub fn estimate_moment_table(
    sample: &EigenSample,
    assignment: &ClusterAssignment,
    orders: &[usize],
) -> Result<MomentTable> {
    let rows = orders
        .iter()
        .enumerate()
        .map(|(i, &order)| estimate_cluster_moments(sample, assignment, i, order))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentTable { rows })
}
