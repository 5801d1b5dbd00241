//! Marčenko–Pastur forward model for a discrete population spectrum.
//!
//! For a population spectrum `H = sum_j w_j delta_{a_j}` and ratio `c = p/n`,
//! the companion Stieltjes transform `s` of the limiting spectral distribution
//! is the inverse of
//!
//! ```text
//! z(s) = -1/s + c * sum_j w_j a_j / (1 + a_j s)
//! ```
//!
//! on the admissible branch. Everything here (support edges, density,
//! the `u`-curve and the division of `H` into sub-measures) is derived from
//! this map.

use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly;
use crate::psd::DiscretePsd;

/// Probe points per pole gap when scanning `z'(s)` for sign changes.
const PROBES_PER_GAP: usize = 512;
/// Imaginary offset used when inverting the Stieltjes transform for densities.
pub const DENSITY_EPS: f64 = 1e-9;
/// Densities below this value are reported as zero.
const DENSITY_FLOOR: f64 = 1e-6;
/// Support gaps narrower than this fraction of the right edge are merged.
const MERGE_GAP_REL: f64 = 1e-6;

/// The map `s -> z(s)` of a fixed `(H, c)` together with the cleared-denominator
/// polynomials used to invert it.
#[derive(Debug, Clone)]
pub struct CompanionTransform {
    psd: DiscretePsd,
    c: f64,
    /// `Q(s) - c s R(s)` with `Q = prod (1 + a_j s)`, `R = sum_j w_j a_j prod_{i != j} (1 + a_i s)`.
    constant_part: Vec<f64>,
    /// `s Q(s)`; the inverse solves `z * linear_part + constant_part = 0`.
    linear_part: Vec<f64>,
}

impl CompanionTransform {
    pub fn new(psd: &DiscretePsd, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Domain(format!("ratio c = {c} must be positive")));
        }
        let factors: Vec<[f64; 2]> = psd.atoms().iter().map(|&a| [1.0, a]).collect();
        let q = factors.iter().fold(vec![1.0], |acc, f| poly::mul(&acc, f));
        let mut r = vec![0.0];
        for (j, (a, w)) in psd.iter().enumerate() {
            let others = factors
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != j)
                .fold(vec![1.0], |acc, (_, f)| poly::mul(&acc, f));
            r = poly::add(&r, &poly::scale(&others, w * a));
        }
        let s_r = poly::mul(&[0.0, 1.0], &r);
        let constant_part = poly::add(&q, &poly::scale(&s_r, -c));
        let linear_part = poly::mul(&[0.0, 1.0], &q);
        Ok(Self {
            psd: psd.clone(),
            c,
            constant_part,
            linear_part,
        })
    }

    pub fn psd(&self) -> &DiscretePsd {
        &self.psd
    }

    pub fn ratio(&self) -> f64 {
        self.c
    }

    /// `z(s)` at a complex point; errors at the poles `0` and `-1/a_j`.
    pub fn z(&self, s: Complex64) -> Result<Complex64> {
        if s.norm() == 0.0 {
            return Err(Error::Domain("z(s) has a pole at s = 0".into()));
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for (a, w) in self.psd.iter() {
            let denom = 1.0 + a * s;
            if denom.norm() <= f64::EPSILON * 1e-2 {
                return Err(Error::Domain(format!("z(s) has a pole at s = -1/{a}")));
            }
            sum += w * a / denom;
        }
        Ok(-1.0 / s + self.c * sum)
    }

    /// `z(s)` on the real line, without pole checks.
    pub fn z_real(&self, s: f64) -> f64 {
        -1.0 / s + self.c * self.psd.iter().map(|(a, w)| w * a / (1.0 + a * s)).sum::<f64>()
    }

    /// `z'(s) = 1/s^2 - c sum_j w_j a_j^2 / (1 + a_j s)^2`.
    pub fn dz(&self, s: f64) -> f64 {
        1.0 / (s * s)
            - self.c
                * self
                    .psd
                    .iter()
                    .map(|(a, w)| {
                        let d = 1.0 + a * s;
                        w * a * a / (d * d)
                    })
                    .sum::<f64>()
    }

    fn dz_complex(&self, s: Complex64) -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for (a, w) in self.psd.iter() {
            let d = 1.0 + a * s;
            sum += w * a * a / (d * d);
        }
        1.0 / (s * s) - self.c * sum
    }

    /// `z''(s)`.
    pub fn d2z(&self, s: f64) -> f64 {
        -2.0 / (s * s * s)
            + 2.0
                * self.c
                * self
                    .psd
                    .iter()
                    .map(|(a, w)| {
                        let d = 1.0 + a * s;
                        w * a * a * a / (d * d * d)
                    })
                    .sum::<f64>()
    }

    fn roots_for(&self, z: Complex64) -> Result<Vec<Complex64>> {
        let coeffs: Vec<Complex64> = (0..self.linear_part.len())
            .map(|i| {
                let lin = self.linear_part[i];
                let cst = self.constant_part.get(i).copied().unwrap_or(0.0);
                z * lin + cst
            })
            .collect();
        poly::complex_roots(&coeffs)
    }

    /// The admissible solution `s` of `z(s) = z`: for `Im z > 0` the unique root
    /// in the upper half plane, for real `z` the real root where `z'(s) > 0`.
    pub fn solve(&self, z: Complex64) -> Result<Complex64> {
        if z.im < 0.0 {
            return Ok(self.solve(z.conj())?.conj());
        }
        if z.im == 0.0 {
            return self.solve_real(z.re).map(|s| Complex64::new(s, 0.0));
        }
        let roots = self.roots_for(z)?;
        let best = roots
            .into_iter()
            .max_by(|a, b| a.im.total_cmp(&b.im))
            .expect("polynomial of degree k + 1 has roots");
        let s = self.newton_polish(z, best);
        if s.im <= 0.0 {
            return Err(Error::Domain(format!(
                "no root of the Marčenko–Pastur equation in the upper half plane for z = {z}"
            )));
        }
        Ok(s)
    }

    fn newton_polish(&self, z: Complex64, mut s: Complex64) -> Complex64 {
        let Ok(mut f) = self.z(s).map(|v| v - z) else {
            return s;
        };
        for _ in 0..4 {
            let step = f / self.dz_complex(s);
            let next = s - step;
            match self.z(next) {
                Ok(v) if (v - z).norm() < f.norm() => {
                    s = next;
                    f = v - z;
                }
                _ => break,
            }
        }
        s
    }

    /// Real `s` with `z(s) = x` and `z'(s) > 0`; exists iff `x` lies outside
    /// the support of the limiting distribution (and `x != 0`).
    pub fn solve_real(&self, x: f64) -> Result<f64> {
        if x == 0.0 || !x.is_finite() {
            return Err(Error::Domain(format!("x = {x} is not an admissible real point")));
        }
        let roots = self.roots_for(Complex64::new(x, 0.0))?;
        let mut best: Option<(f64, f64)> = None;
        for r in roots {
            if r.im.abs() > 1e-6 * (1.0 + r.norm()) {
                continue;
            }
            let s = self.polish_real(x, r.re);
            let residual = (self.z_real(s) - x).abs();
            if !(residual <= 1e-8 * (1.0 + x.abs())) || self.dz(s) <= 0.0 {
                continue;
            }
            if best.is_none_or(|(_, r0)| residual < r0) {
                best = Some((s, residual));
            }
        }
        best.map(|(s, _)| s).ok_or_else(|| {
            Error::Domain(format!(
                "x = {x} has no real preimage with z'(s) > 0; it lies inside the support"
            ))
        })
    }

    fn polish_real(&self, x: f64, mut s: f64) -> f64 {
        let mut f = self.z_real(s) - x;
        for _ in 0..6 {
            let d = self.dz(s);
            if d == 0.0 || !f.is_finite() {
                break;
            }
            let next = s - f / d;
            let fn_ = self.z_real(next) - x;
            if !(fn_.abs() < f.abs()) {
                break;
            }
            s = next;
            f = fn_;
        }
        s
    }

    /// Limiting spectral density at `x > 0`.
    pub fn density(&self, x: f64) -> Result<f64> {
        let z = Complex64::new(x, DENSITY_EPS);
        let s_companion = self.solve(z)?;
        let s = (s_companion + (1.0 - self.c) / z) / self.c;
        let d = s.im / std::f64::consts::PI;
        Ok(if d < DENSITY_FLOOR { 0.0 } else { d })
    }

    /// `u(x) = -1/s(x)` for real `x` outside the support.
    pub fn u(&self, x: f64) -> Result<f64> {
        Ok(-1.0 / self.solve_real(x)?)
    }
}

/// `z(s) = -1/s + c sum w_j a_j / (1 + a_j s)`.
pub fn companion_z(s: Complex64, psd: &DiscretePsd, c: f64) -> Result<Complex64> {
    CompanionTransform::new(psd, c)?.z(s)
}

/// Admissible inverse of [`companion_z`].
pub fn solve_companion(z: Complex64, psd: &DiscretePsd, c: f64) -> Result<Complex64> {
    CompanionTransform::new(psd, c)?.solve(z)
}

/// Limiting spectral density `(1/pi) Im s(x + i eps)`.
pub fn lsd_density(x: f64, psd: &DiscretePsd, c: f64) -> Result<f64> {
    CompanionTransform::new(psd, c)?.density(x)
}

/// `u(x) = -1/s(x)`, increasing on each gap of the support.
pub fn u_curve(x: f64, psd: &DiscretePsd, c: f64) -> Result<f64> {
    CompanionTransform::new(psd, c)?.u(x)
}

/// Support of the limiting spectral distribution on `(0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    /// Disjoint intervals `[x_i^-, x_i^+]` in increasing order.
    pub intervals: Vec<(f64, f64)>,
    /// Contour abscissas `(delta_i^-, delta_i^+)` interleaving the intervals.
    pub contour_bounds: Vec<(f64, f64)>,
    /// Critical points `s*` of `z` producing each edge (`None` for an edge at 0).
    pub edge_points: Vec<(Option<f64>, Option<f64>)>,
    pub c: f64,
    /// Set when intervals separated by a numerically negligible gap were merged.
    pub merged_narrow_gap: bool,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }

    /// Split points between consecutive intervals (the inner contour bounds).
    pub fn cluster_boundaries(&self) -> Vec<f64> {
        self.contour_bounds
            .iter()
            .take(self.len().saturating_sub(1))
            .map(|b| b.1)
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum End {
    NegInf,
    PosInf,
    AtomPole(f64),
    Zero,
    Critical(f64),
}

/// Value of `z` at a segment end approached from inside the segment.
fn end_value(t: &CompanionTransform, end: End, is_left: bool) -> (f64, Option<f64>) {
    match end {
        End::NegInf | End::PosInf => (0.0, None),
        End::AtomPole(_) => (if is_left { f64::INFINITY } else { f64::NEG_INFINITY }, None),
        End::Zero => (if is_left { f64::NEG_INFINITY } else { f64::INFINITY }, None),
        End::Critical(s) => (t.z_real(s), Some(s)),
    }
}

fn geometric(from: f64, to: f64, count: usize) -> impl Iterator<Item = f64> {
    let ratio = (to / from).ln() / (count - 1) as f64;
    (0..count).map(move |i| from * (ratio * i as f64).exp())
}

fn probe_grid(lo: End, hi: End, inv_a_min: f64, inv_a_max: f64) -> Vec<f64> {
    let half = PROBES_PER_GAP / 2;
    let mut grid: Vec<f64> = match (lo, hi) {
        (End::NegInf, End::AtomPole(p)) => geometric(1e-13 * p.abs(), 1e9 * p.abs(), PROBES_PER_GAP)
            .map(|d| p - d)
            .collect(),
        (End::Zero, End::PosInf) => geometric(1e-13 * inv_a_min, 1e9 * inv_a_max, PROBES_PER_GAP).collect(),
        (l, h) => {
            let left = match l {
                End::AtomPole(p) => p,
                _ => 0.0,
            };
            let right = match h {
                End::AtomPole(p) => p,
                _ => 0.0,
            };
            let width = right - left;
            geometric(1e-13, 0.5, half)
                .flat_map(|t| [left + t * width, right - t * width])
                .collect()
        }
    };
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

fn bisect_critical(t: &CompanionTransform, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = t.dz(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = t.dz(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Support intervals of the limiting spectral distribution of `(H, c)` with
/// contour bounds chosen at the midpoints of the gaps.
pub fn support_intervals(psd: &DiscretePsd, c: f64) -> Result<SupportSet> {
    let t = CompanionTransform::new(psd, c)?;
    let mut poles: Vec<f64> = psd.atoms().iter().map(|a| -1.0 / a).collect();
    poles.sort_by(f64::total_cmp);
    let inv_a_min = 1.0 / psd.atoms().last().copied().unwrap_or(1.0);
    let inv_a_max = 1.0 / psd.atoms()[0];

    let mut ends = vec![End::NegInf];
    ends.extend(poles.iter().map(|&p| End::AtomPole(p)));
    ends.push(End::Zero);
    let mut gaps: Vec<(End, End)> = ends.windows(2).map(|w| (w[0], w[1])).collect();
    gaps.push((End::Zero, End::PosInf));

    // images (z(left), z(right)) of the increasing branches of z
    let mut images: Vec<(f64, Option<f64>, f64, Option<f64>)> = Vec::new();
    for (lo, hi) in gaps {
        let grid = probe_grid(lo, hi, inv_a_min, inv_a_max);
        let signs: Vec<f64> = grid.iter().map(|&s| t.dz(s)).collect();
        let mut seg_start = lo;
        let mut seg_sign: Option<bool> = None;
        let mut prev: Option<(f64, f64)> = None;
        for (&s, &d) in grid.iter().zip(&signs) {
            if d == 0.0 || !d.is_finite() {
                continue;
            }
            let positive = d > 0.0;
            if let (Some((ps, _)), Some(sign)) = (prev, seg_sign) {
                if sign != positive {
                    let crit = bisect_critical(&t, ps, s);
                    let seg_end = End::Critical(crit);
                    if sign {
                        let (l, ls) = end_value(&t, seg_start, true);
                        let (r, rs) = end_value(&t, seg_end, false);
                        images.push((l, ls, r, rs));
                    }
                    seg_start = seg_end;
                }
            }
            seg_sign = Some(positive);
            prev = Some((s, d));
        }
        if seg_sign == Some(true) {
            let (l, ls) = end_value(&t, seg_start, true);
            let (r, rs) = end_value(&t, hi, false);
            images.push((l, ls, r, rs));
        }
    }
    images.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut edge_points: Vec<(Option<f64>, Option<f64>)> = Vec::new();
    let mut cursor = 0.0;
    let mut cursor_s: Option<f64> = None;
    for &(lo, lo_s, hi, hi_s) in &images {
        if hi <= 0.0 {
            continue;
        }
        if lo > cursor {
            intervals.push((cursor, lo));
            edge_points.push((cursor_s, lo_s));
        }
        if hi > cursor {
            cursor = hi;
            cursor_s = hi_s;
        }
    }
    if cursor.is_infinite() {
        // last branch reaches +inf, every support interval is closed
    } else {
        return Err(Error::Numerical(format!(
            "support of the limiting distribution appears unbounded beyond {cursor}"
        )));
    }
    if intervals.is_empty() {
        return Err(Error::Numerical("no support interval found".into()));
    }

    let scale = intervals.last().map(|iv| iv.1).unwrap_or(1.0);
    let mut merged_narrow_gap = false;
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut merged_edges: Vec<(Option<f64>, Option<f64>)> = Vec::new();
    for (iv, edge) in intervals.into_iter().zip(edge_points) {
        match merged.last_mut() {
            Some(last) if iv.0 - last.1 < MERGE_GAP_REL * scale => {
                log::warn!("merging support intervals across a gap of width {}", iv.0 - last.1);
                merged_narrow_gap = true;
                last.1 = iv.1;
                merged_edges.last_mut().expect("parallel vectors").1 = edge.1;
            }
            _ => {
                merged.push(iv);
                merged_edges.push(edge);
            }
        }
    }

    let m = merged.len();
    let mut contour_bounds = Vec::with_capacity(m);
    for i in 0..m {
        let (lo, hi) = merged[i];
        let lower = if i == 0 {
            if c < 1.0 {
                lo / 2.0
            } else {
                -lo.max(1.0)
            }
        } else {
            0.5 * (merged[i - 1].1 + lo)
        };
        let upper = if i + 1 == m {
            hi + (hi - lo) / 2.0
        } else {
            0.5 * (hi + merged[i + 1].0)
        };
        contour_bounds.push((lower, upper));
    }

    Ok(SupportSet {
        intervals: merged,
        contour_bounds,
        edge_points: merged_edges,
        c,
        merged_narrow_gap,
    })
}

/// Division of `H` into the sub-measures attached to each support interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdDivision {
    pub parts: Vec<DiscretePsd>,
    /// Atom index range of `H` owned by each part.
    pub atom_ranges: Vec<Range<usize>>,
    /// `(u(delta_i^-), u(delta_i^+))` for each part.
    pub boundaries: Vec<(f64, f64)>,
}

/// Assigns each atom of `H` to the interval whose `[u(delta^-), u(delta^+)]` holds it.
pub fn divide_psd(psd: &DiscretePsd, support: &SupportSet) -> Result<PsdDivision> {
    let t = CompanionTransform::new(psd, support.c)?;
    let boundaries = support
        .contour_bounds
        .iter()
        .map(|&(lo, hi)| Ok((t.u(lo)?, t.u(hi)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut owner = Vec::with_capacity(psd.len());
    for &a in psd.atoms() {
        let part = boundaries
            .iter()
            .position(|&(lo, hi)| lo <= a && a <= hi)
            .ok_or_else(|| {
                Error::Numerical(format!("atom {a} falls in no bracket of the division {boundaries:?}"))
            })?;
        owner.push(part);
    }
    let mut atom_ranges = Vec::with_capacity(boundaries.len());
    let mut parts = Vec::with_capacity(boundaries.len());
    for i in 0..boundaries.len() {
        let idx: Vec<usize> = (0..psd.len()).filter(|&j| owner[j] == i).collect();
        let (Some(&first), Some(&last)) = (idx.first(), idx.last()) else {
            return Err(Error::Numerical(format!("support interval {i} carries no atom")));
        };
        if last - first + 1 != idx.len() {
            return Err(Error::Numerical(format!("atoms of part {i} are not contiguous")));
        }
        atom_ranges.push(first..last + 1);
        parts.push(psd.slice(first..last + 1)?);
    }
    Ok(PsdDivision {
        parts,
        atom_ranges,
        boundaries,
    })
}

/// Nodes per support interval used by [`lsd_quantiles`].
const QUANTILE_NODES: usize = 4000;

/// `count` quantiles `F^{-1}((j - 1/2) / count)` of the continuous part of the
/// limiting spectral distribution, a deterministic "ghost" eigenvalue sample.
pub fn lsd_quantiles(psd: &DiscretePsd, c: f64, count: usize) -> Result<Vec<f64>> {
    let t = CompanionTransform::new(psd, c)?;
    let support = support_intervals(psd, c)?;
    // x = lo + (hi - lo)(1 - cos th)/2 absorbs the square-root edges
    let mut xs = Vec::new();
    let mut cdf = Vec::new();
    let mut acc = 0.0;
    for &(lo, hi) in &support.intervals {
        let half = 0.5 * (hi - lo);
        let h = std::f64::consts::PI / QUANTILE_NODES as f64;
        let mut prev: Option<f64> = None;
        for j in 0..=QUANTILE_NODES {
            let th = j as f64 * h;
            let x = lo + half * (1.0 - th.cos());
            let f = if j == 0 || j == QUANTILE_NODES || x <= 0.0 {
                0.0
            } else {
                t.density(x)? * half * th.sin()
            };
            if let Some(p) = prev {
                acc += 0.5 * h * (p + f);
            }
            prev = Some(f);
            xs.push(x);
            cdf.push(acc);
        }
    }
    let total = acc;
    let mut out = Vec::with_capacity(count);
    let mut idx = 0;
    for j in 0..count {
        let level = (j as f64 + 0.5) / count as f64 * total;
        while idx + 1 < cdf.len() && cdf[idx + 1] < level {
            idx += 1;
        }
        let (c0, c1) = (cdf[idx], cdf[(idx + 1).min(cdf.len() - 1)]);
        let (x0, x1) = (xs[idx], xs[(idx + 1).min(xs.len() - 1)]);
        let frac = if c1 > c0 { (level - c0) / (c1 - c0) } else { 0.0 };
        out.push(x0 + frac * (x1 - x0));
    }
    Ok(out)
}
