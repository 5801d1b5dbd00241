//! Dense polynomial helpers and companion-matrix root finding.
//!
//! Coefficients are stored in ascending order: `c[0] + c[1] x + ... + c[d] x^d`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Product of two real polynomials.
pub(crate) fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Sum of two real polynomials.
pub(crate) fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] += y;
    }
    out
}

pub(crate) fn scale(a: &[f64], factor: f64) -> Vec<f64> {
    a.iter().map(|x| x * factor).collect()
}

/// Horner evaluation of a complex polynomial and its derivative.
fn eval_with_derivative(coeffs: &[Complex64], x: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// All roots of a complex polynomial via the eigenvalues of its companion matrix,
/// each polished by a few Newton steps.
pub fn complex_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut coeffs = coeffs.to_vec();
    while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() == 0.0) {
        coeffs.pop();
    }
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[degree];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    if degree == 1 {
        return Ok(vec![-monic[0]]);
    }
    let mut companion = DMatrix::<Complex64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -monic[i];
    }
    let eigen = companion
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Numerical("companion eigensolve did not converge".into()))?;
    Ok(eigen.iter().map(|&r| polish(&monic, r)).collect())
}

/// Roots of a real polynomial (possibly complex).
pub fn real_poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let c: Vec<Complex64> = coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    complex_roots(&c)
}

fn polish(coeffs: &[Complex64], mut x: Complex64) -> Complex64 {
    let (mut p, _) = eval_with_derivative(coeffs, x);
    for _ in 0..4 {
        let (_, dp) = eval_with_derivative(coeffs, x);
        if dp.norm() == 0.0 {
            break;
        }
        let candidate = x - p / dp;
        let (pc, _) = eval_with_derivative(coeffs, candidate);
        if !(pc.norm() < p.norm()) {
            break;
        }
        x = candidate;
        p = pc;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut roots: Vec<Complex64>) -> Vec<f64> {
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
        roots.iter().map(|r| r.re).collect()
    }

    #[test]
    fn cubic_with_known_roots() {
        // (x-1)(x-4)(x-5) = x^3 - 10x^2 + 29x - 20
        let roots = real_poly_roots(&[-20.0, 29.0, -10.0, 1.0]).unwrap();
        for (r, e) in sorted_re(roots.clone()).iter().zip([1.0, 4.0, 5.0]) {
            assert!((r - e).abs() < 1e-12);
        }
        assert!(roots.iter().all(|r| r.im.abs() < 1e-12));
    }

    #[test]
    fn complex_pair() {
        let roots = real_poly_roots(&[1.0, 0.0, 1.0]).unwrap();
        let mut im: Vec<f64> = roots.iter().map(|r| r.im).collect();
        im.sort_by(f64::total_cmp);
        assert!((im[0] + 1.0).abs() < 1e-14 && (im[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn complex_coefficients() {
        // (x - i)(x - 2) = x^2 - (2 + i) x + 2i
        let c = [
            Complex64::new(0.0, 2.0),
            Complex64::new(-2.0, -1.0),
            Complex64::new(1.0, 0.0),
        ];
        let roots = complex_roots(&c).unwrap();
        assert!(roots.iter().any(|r| (r - Complex64::new(0.0, 1.0)).norm() < 1e-13));
        assert!(roots.iter().any(|r| (r - Complex64::new(2.0, 0.0)).norm() < 1e-13));
    }

    #[test]
    fn products() {
        assert_eq!(mul(&[1.0, 1.0], &[-1.0, 1.0]), vec![-1.0, 0.0, 1.0]);
        assert_eq!(add(&[1.0], &[0.0, 2.0]), vec![1.0, 2.0]);
    }
}
