//! Discrete spectral measures, their moments and Hankel matrices.
//!
//! A [`DiscretePsd`] is a finite sum of weighted point masses on the positive
//! half-line. The same type carries full population spectra (total mass one)
//! and the sub-measures obtained when a spectrum is divided into clusters.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative gap below which two atoms are considered equal.
const ATOM_GAP_TOL: f64 = 1e-10;
/// Tolerance on a declared total mass versus the sum of weights.
const MASS_TOL: f64 = 1e-12;
/// Eigenvalues of a Hankel matrix below this fraction of its trace are
/// treated as zero when testing positive definiteness.
pub const PD_RELATIVE_TOL: f64 = 1e-12;

/// A finite discrete measure `sum_i w_i delta_{a_i}` with `0 < a_1 < ... < a_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePsd {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    total_mass: f64,
}

impl DiscretePsd {
    /// Builds a measure from atoms and weights, sorting atoms (weights follow).
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::Domain(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(Error::Domain("a measure needs at least one atom".into()));
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        for &(a, w) in &pairs {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::Domain(format!("atom {a} is not a positive real")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Domain(format!("weight {w} is not positive")));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        for pair in pairs.windows(2) {
            let (lo, hi) = (pair[0].0, pair[1].0);
            if hi - lo <= ATOM_GAP_TOL * hi {
                return Err(Error::Domain(format!("atoms {lo} and {hi} coincide")));
            }
        }
        let (atoms, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let total_mass = weights.iter().sum();
        Ok(Self {
            atoms,
            weights,
            total_mass,
        })
    }

    /// Like [`DiscretePsd::new`] but checks the weights against a declared total mass.
    pub fn with_total_mass(atoms: Vec<f64>, weights: Vec<f64>, total_mass: f64) -> Result<Self> {
        let psd = Self::new(atoms, weights)?;
        if (psd.total_mass - total_mass).abs() > MASS_TOL * total_mass.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "weights sum to {} but total mass is declared as {total_mass}",
                psd.total_mass
            )));
        }
        Ok(psd)
    }

    /// Unit point mass at `atom`.
    pub fn point_mass(atom: f64) -> Result<Self> {
        Self::new(vec![atom], vec![1.0])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Iterator over `(atom, weight)` pairs in increasing atom order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    /// The same atoms with weights rescaled to sum to one.
    pub fn normalized(&self) -> Self {
        let weights = self.weights.iter().map(|w| w / self.total_mass).collect();
        Self {
            atoms: self.atoms.clone(),
            weights,
            total_mass: 1.0,
        }
    }

    /// Sub-measure restricted to the atom index range `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        Self::new(self.atoms[range.clone()].to_vec(), self.weights[range].to_vec())
    }

    /// Plain-text record: a `# total_mass=<x>` header then `atom,weight` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# total_mass={}", fmt_f64(self.total_mass));
        for (a, w) in self.iter() {
            let _ = writeln!(out, "{},{}", fmt_f64(a), fmt_f64(w));
        }
        out
    }

    /// Parses the format written by [`DiscretePsd::to_text`].
    ///
    /// The header is optional; when present the weights must sum to it.
    /// Blank lines and other `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut declared = None;
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(value) = comment.trim().strip_prefix("total_mass=") {
                    let mass = value.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: line_no,
                        detail: format!("bad total_mass: {e}"),
                    })?;
                    declared = Some(mass);
                }
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let (Some(a), Some(w), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: line_no,
                    detail: format!("expected `atom,weight`, got `{line}`"),
                });
            };
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no,
                    detail: format!("`{s}`: {e}"),
                })
            };
            atoms.push(parse(a)?);
            weights.push(parse(w)?);
        }
        match declared {
            Some(mass) => Self::with_total_mass(atoms, weights, mass),
            None => Self::new(atoms, weights),
        }
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Whether moments were computed from a known measure or estimated from data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentOrigin {
    Exact,
    Estimated,
}

/// Moments `gamma_0, ..., gamma_L` of a (sub-)measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub values: Vec<f64>,
    pub origin: MomentOrigin,
}

impl MomentVector {
    pub fn estimated(values: Vec<f64>) -> Self {
        Self {
            values,
            origin: MomentOrigin::Estimated,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Moments of the measure with every atom multiplied by `1/scale`.
    pub(crate) fn rescaled(&self, scale: f64) -> Self {
        let mut factor = 1.0;
        let values = self
            .values
            .iter()
            .map(|g| {
                let v = g * factor;
                factor /= scale;
                v
            })
            .collect();
        Self {
            values,
            origin: self.origin,
        }
    }
}

/// `gamma_l = sum_i w_i a_i^l` for `l = 0..=max_order`.
pub fn moments_of(psd: &DiscretePsd, max_order: usize) -> MomentVector {
    let mut values = vec![0.0; max_order + 1];
    for (a, w) in psd.iter() {
        let mut term = w;
        for v in values.iter_mut() {
            *v += term;
            term *= a;
        }
    }
    // gamma_0 is the stored total mass, not a re-summation
    values[0] = psd.total_mass();
    MomentVector {
        values,
        origin: MomentOrigin::Exact,
    }
}

/// The `N x N` Hankel moment matrix `(gamma_{r+s})`, zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    matrix: DMatrix<f64>,
}

impl HankelMatrix {
    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn entry(&self, r: usize, s: usize) -> f64 {
        self.matrix[(r, s)]
    }

    /// Determinant via partially pivoted LU.
    pub fn determinant(&self) -> f64 {
        self.matrix.clone().lu().determinant()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Ratio of extreme eigenvalue magnitudes.
    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        let max = ev.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let min = ev.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
        max / min
    }

    /// All eigenvalues exceed `PD_RELATIVE_TOL * trace`.
    pub fn is_positive_definite(&self) -> bool {
        let trace = self.matrix.trace();
        trace > 0.0 && self.min_eigenvalue() > PD_RELATIVE_TOL * trace
    }
}

/// Builds the order-`n` Hankel matrix from `moments` (needs `2n - 1` values).
pub fn hankel(moments: &MomentVector, n: usize) -> Result<HankelMatrix> {
    hankel_from_slice(&moments.values, n)
}

pub(crate) fn hankel_from_slice(moments: &[f64], n: usize) -> Result<HankelMatrix> {
    let needed = (2 * n).saturating_sub(1);
    if n == 0 || moments.len() < needed {
        return Err(Error::Length {
            needed: needed.max(1),
            got: moments.len(),
        });
    }
    Ok(HankelMatrix {
        matrix: DMatrix::from_fn(n, n, |r, s| moments[r + s]),
    })
}

/// Numerical determinant of `Gamma(G, k)` next to the closed form
/// `prod m_i * prod_{i<j} (b_i - b_j)^2`.
pub fn hankel_det_identity_check(psd: &DiscretePsd) -> (f64, f64) {
    let k = psd.len();
    let moments = moments_of(psd, 2 * k - 2);
    let direct = hankel(&moments, k)
        .expect("moment vector has 2k-1 entries")
        .determinant();
    let atoms = psd.atoms();
    let mut formula: f64 = psd.weights().iter().product();
    for i in 0..k {
        for j in i + 1..k {
            formula *= (atoms[i] - atoms[j]).powi(2);
        }
    }
    (direct, formula)
}

/// Numbers of atoms `(k_1, ..., k_m)` in each cluster, `k_i >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Partition(pub Vec<usize>);

impl Partition {
    pub fn new(orders: Vec<usize>) -> Result<Self> {
        if orders.is_empty() || orders.contains(&0) {
            return Err(Error::Domain(format!(
                "partition orders must be positive, got {orders:?}"
            )));
        }
        Ok(Self(orders))
    }

    pub fn orders(&self) -> &[usize] {
        &self.0
    }

    /// Number of clusters `m`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total atom count `k`.
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// Atom index range owned by cluster `i`.
    pub fn atom_range(&self, i: usize) -> std::ops::Range<usize> {
        let start: usize = self.0[..i].iter().sum();
        start..start + self.0[i]
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        f.write_str(")")
    }
}

/// All compositions of `k` into `m` positive parts, in lexicographic order.
pub fn enumerate_partitions(k: usize, m: usize) -> Result<Vec<Partition>> {
    if m == 0 || m > k {
        return Err(Error::Domain(format!(
            "cannot split {k} atoms into {m} nonempty clusters"
        )));
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(m);
    compositions(k, m, &mut current, &mut out);
    Ok(out)
}

fn compositions(remaining: usize, parts: usize, current: &mut Vec<usize>, out: &mut Vec<Partition>) {
    if parts == 1 {
        current.push(remaining);
        out.push(Partition(current.clone()));
        current.pop();
        return;
    }
    for first in 1..=remaining - (parts - 1) {
        current.push(first);
        compositions(remaining - first, parts - 1, current, out);
        current.pop();
    }
}
