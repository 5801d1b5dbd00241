//! Empirical companion Stieltjes transform, its real zeros and the clustering
//! of sample eigenvalues.

use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative jitter applied to repeated eigenvalues.
const TIE_JITTER: f64 = 1e-12;

/// Sorted nonzero sample eigenvalues with their dimensions `(p, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSample {
    lambdas: Vec<f64>,
    p: usize,
    n: usize,
    jittered: usize,
}

impl EigenSample {
    /// Builds a sample from eigenvalues of a `p x p` sample covariance from `n`
    /// observations. Exactly `min(p, n)` positive values must remain after
    /// dropping numerically zero ones.
    pub fn new(mut lambdas: Vec<f64>, p: usize, n: usize) -> Result<Self> {
        if p == 0 || n == 0 {
            return Err(Error::Domain("p and n must be positive".into()));
        }
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::Domain("eigenvalues must be finite".into()));
        }
        lambdas.sort_by(f64::total_cmp);
        let v = p.min(n);
        let max = lambdas.last().copied().unwrap_or(0.0);
        if lambdas.len() > v {
            let extra = lambdas.len() - v;
            if lambdas[..extra].iter().any(|l| l.abs() > 1e-10 * max) {
                return Err(Error::Domain(format!(
                    "expected {v} nonzero eigenvalues, got {} values of which more than {v} are nonzero",
                    lambdas.len()
                )));
            }
            lambdas.drain(..extra);
        }
        if lambdas.len() != v {
            return Err(Error::Domain(format!(
                "expected min(p, n) = {v} eigenvalues, got {}",
                lambdas.len()
            )));
        }
        if lambdas[0] <= 0.0 {
            return Err(Error::Domain(format!(
                "eigenvalue {} is not positive",
                lambdas[0]
            )));
        }
        let mut jittered = 0;
        for i in 1..lambdas.len() {
            if lambdas[i] <= lambdas[i - 1] {
                lambdas[i] = lambdas[i - 1] * (1.0 + TIE_JITTER);
                jittered += 1;
            }
        }
        if jittered > 0 {
            log::info!("jittered {jittered} repeated eigenvalues by {TIE_JITTER:e} relative");
        }
        Ok(Self {
            lambdas,
            p,
            n,
            jittered,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nonzero eigenvalues, `min(p, n)`.
    pub fn v(&self) -> usize {
        self.lambdas.len()
    }

    /// Eigenvalues moved apart because they were numerically equal.
    pub fn jittered(&self) -> usize {
        self.jittered
    }

    /// Dimension ratio `p / n`.
    pub fn ratio(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    /// Weight `1 - v/n` of the atom at zero of the companion ESD.
    fn zero_mass(&self) -> f64 {
        1.0 - self.v() as f64 / self.n as f64
    }

    /// Same sample with every eigenvalue multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.lambdas.iter().map(|l| l * factor).collect(),
            self.p,
            self.n,
        )
    }

    /// `s_n^{(j)}(u)` for `j = 0..=max_order` at a real point `u` off the poles.
    pub fn derivatives_at(&self, u: f64, max_order: usize) -> Vec<f64> {
        let mut out = vec![0.0; max_order + 1];
        for &l in &self.lambdas {
            let t = 1.0 / (l - u);
            let mut pow = t;
            for o in out.iter_mut() {
                *o += pow;
                pow *= t;
            }
        }
        let inv_n = 1.0 / self.n as f64;
        let zero_mass = self.zero_mass();
        let mut factorial = 1.0;
        let mut inv_u_pow = 1.0 / u;
        for (j, o) in out.iter_mut().enumerate() {
            if j > 0 {
                factorial *= j as f64;
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let pole_term = if zero_mass == 0.0 {
                0.0
            } else {
                -zero_mass * sign * factorial * inv_u_pow
            };
            *o = pole_term + factorial * inv_n * *o;
            inv_u_pow /= u;
        }
        out
    }

    /// `sum_i lambda_i / (lambda_i - u) - n`, whose roots are the zeros of `s_n`.
    fn zero_equation(&self, u: f64) -> f64 {
        self.lambdas.iter().map(|l| l / (l - u)).sum::<f64>() - self.n as f64
    }
}

/// `j`-th derivative of the empirical companion Stieltjes transform
/// `s_n(z) = -(1 - p/n)/z + (1/n) sum 1/(lambda_i - z)` (zero eigenvalues folded in).
pub fn companion_stieltjes_n(z: Complex64, sample: &EigenSample, order: usize) -> Result<Complex64> {
    let zero_mass = sample.zero_mass();
    if zero_mass != 0.0 && z.norm() == 0.0 {
        return Err(Error::Domain("s_n has a pole at z = 0".into()));
    }
    if sample.lambdas.iter().any(|&l| (z - l).norm() == 0.0) {
        return Err(Error::Domain(format!("z = {z} is an eigenvalue")));
    }
    let factorial: f64 = (1..=order).map(|j| j as f64).product();
    let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
    let power = (order + 1) as i32;
    let sum: Complex64 = sample.lambdas.iter().map(|&l| (l - z).powi(-power)).sum();
    let pole = if zero_mass == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        -zero_mass * sign * factorial * z.powi(-power)
    };
    Ok(pole + factorial / sample.n as f64 * sum)
}

fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::Numerical(format!(
            "no sign change of the zero equation on ({lo}, {hi}): values {f_lo:e}, {f_hi:e}"
        )));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

/// Zeros `mu_1 < lambda_1 < mu_2 < ... < mu_v < lambda_v` of `s_n`.
///
/// `mu_1` lies in `(0, lambda_1)` when `p < n`; for `p >= n` there is no zero
/// below `lambda_1` and `mu_1` is set to `0`.
pub fn zeros_of_companion(sample: &EigenSample) -> Result<Vec<f64>> {
    let l = &sample.lambdas;
    let f = |u: f64| sample.zero_equation(u);
    let mut mus = Vec::with_capacity(l.len());
    if sample.v() < sample.n {
        mus.push(bisect_increasing(f, 1e-12 * l[0], l[0] * (1.0 - 1e-12))?);
    } else {
        mus.push(0.0);
    }
    for w in l.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let width = hi - lo;
        // pull the bracket in from the poles without crossing the root
        let mut a = (lo + 1e-12 * width).max(lo.next_up());
        let mut b = (hi - 1e-12 * width).min(hi.next_down());
        if !(f(a) < 0.0) {
            a = lo.next_up();
        }
        if !(f(b) > 0.0) {
            b = hi.next_down();
        }
        mus.push(bisect_increasing(f, a, b)?);
    }
    Ok(mus)
}

/// How to split the sample eigenvalues into clusters.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusterSpec {
    /// `m` clusters separated by the `m - 1` widest consecutive gaps.
    Count(usize),
    /// Explicit split abscissas, increasing.
    Boundaries(Vec<f64>),
    /// Explicit cluster sizes in eigenvalue order, summing to `v`.
    Sizes(Vec<usize>),
}

/// Contiguous eigenvalue clusters `A_i` with the zeros `B_i` attached to them.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    ranges: Vec<Range<usize>>,
    zeros: Vec<f64>,
    exclude_first_zero: bool,
}

impl ClusterAssignment {
    /// Number of clusters `m`.
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Index range of cluster `i` in the sorted sample.
    pub fn range(&self, i: usize) -> Range<usize> {
        self.ranges[i].clone()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    /// Cluster sizes `v_i`.
    pub fn counts(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }

    /// All zeros `mu_1..mu_v` of `s_n`.
    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    /// The zeros `B_i` attached to cluster `i`.
    pub fn zero_set(&self, i: usize) -> &[f64] {
        let r = self.range(i);
        if r.start == 0 && self.exclude_first_zero {
            &self.zeros[1..r.end]
        } else {
            &self.zeros[r]
        }
    }

    /// Merges clusters according to `groups`, a list of contiguous index runs
    /// covering `0..m` in order.
    pub fn merge(&self, groups: &[Vec<usize>]) -> Result<Self> {
        let mut expected = 0;
        let mut ranges = Vec::with_capacity(groups.len());
        for g in groups {
            if g.is_empty() {
                return Err(Error::Domain("empty merge group".into()));
            }
            for (j, &idx) in g.iter().enumerate() {
                if idx != expected + j {
                    return Err(Error::Domain(format!(
                        "merge groups {groups:?} are not contiguous runs covering 0..{}",
                        self.len()
                    )));
                }
            }
            let first = g[0];
            let last = *g.last().expect("nonempty");
            ranges.push(self.ranges[first].start..self.ranges[last].end);
            expected += g.len();
        }
        if expected != self.len() {
            return Err(Error::Domain(format!(
                "merge groups {groups:?} do not cover all {} clusters",
                self.len()
            )));
        }
        Ok(Self {
            ranges,
            zeros: self.zeros.clone(),
            exclude_first_zero: self.exclude_first_zero,
        })
    }

    /// Gap between the last eigenvalue of cluster `i` and the first of `i + 1`.
    pub fn gap_after(&self, sample: &EigenSample, i: usize) -> f64 {
        let l = sample.lambdas();
        l[self.ranges[i + 1].start] - l[self.ranges[i].end - 1]
    }
}

/// Splits the sample into clusters and attaches the zeros of `s_n`.
pub fn cluster_eigenvalues(sample: &EigenSample, spec: &ClusterSpec) -> Result<ClusterAssignment> {
    let zeros = zeros_of_companion(sample)?;
    cluster_with_zeros(sample, spec, zeros)
}

pub(crate) fn cluster_with_zeros(
    sample: &EigenSample,
    spec: &ClusterSpec,
    zeros: Vec<f64>,
) -> Result<ClusterAssignment> {
    let l = sample.lambdas();
    let v = l.len();
    let mut cuts: Vec<usize> = match spec {
        ClusterSpec::Count(m) => {
            let m = *m;
            if m == 0 || m > v {
                return Err(Error::Domain(format!("cannot form {m} clusters from {v} eigenvalues")));
            }
            let mut gaps: Vec<(usize, f64)> = l.windows(2).map(|w| w[1] - w[0]).enumerate().collect();
            // widest first; earlier index wins ties
            gaps.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            gaps.iter().take(m - 1).map(|(i, _)| i + 1).collect()
        }
        ClusterSpec::Boundaries(bounds) => {
            let mut cuts = Vec::with_capacity(bounds.len());
            for &b in bounds {
                if l.contains(&b) {
                    return Err(Error::Domain(format!("boundary {b} coincides with an eigenvalue")));
                }
                cuts.push(l.partition_point(|&x| x < b));
            }
            cuts
        }
        ClusterSpec::Sizes(sizes) => {
            if sizes.iter().sum::<usize>() != v {
                return Err(Error::Domain(format!(
                    "cluster sizes {sizes:?} do not add up to {v} eigenvalues"
                )));
            }
            let mut acc = 0;
            sizes[..sizes.len().saturating_sub(1)]
                .iter()
                .map(|s| {
                    acc += s;
                    acc
                })
                .collect()
        }
    };
    cuts.sort_unstable();
    let mut ranges = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0;
    for &cut in cuts.iter().chain(std::iter::once(&v)) {
        if cut <= start {
            return Err(Error::Domain(format!(
                "cluster specification {spec:?} yields an empty cluster"
            )));
        }
        ranges.push(start..cut);
        start = cut;
    }
    Ok(ClusterAssignment {
        ranges,
        zeros,
        exclude_first_zero: sample.v() >= sample.n(),
    })
}
