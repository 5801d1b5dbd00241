//! Recovery of a discrete measure from its leading moments.
//!
//! With `2k` moments the atoms are the roots of the monic polynomial whose
//! coefficients solve the Hankel system `Gamma(G, k) c = -(gamma_k, ..., gamma_{2k-1})`,
//! and the weights follow from a Vandermonde solve. When some weights are
//! known the moment equations are solved directly by damped Newton.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, InversionStage, Result};
use crate::poly::real_poly_roots;
use crate::psd::{hankel_from_slice, DiscretePsd, MomentVector};

/// Imaginary parts above this fraction of `1 + |re|` mark a complex root.
const COMPLEX_ROOT_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 200;
/// Scaled residual at which Newton stops.
const NEWTON_TOL: f64 = 1e-13;
/// Scaled residual accepted when the iteration stalls at rounding level.
const NEWTON_STALL_TOL: f64 = 1e-9;
const MULTISTART_SEEDS: usize = 8;

fn inversion_error(stage: InversionStage, detail: String) -> Error {
    Error::Inversion { stage, detail }
}

/// Natural scale of a moment sequence: its mean `gamma_1 / gamma_0`.
fn moment_scale(values: &[f64]) -> f64 {
    let s = if values.len() > 1 { values[1] / values[0] } else { 1.0 };
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

/// A recovered measure together with the conditioning of its Hankel system.
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub measure: DiscretePsd,
    /// Condition number of the Hankel matrix after rescaling atoms to unit mean.
    pub condition_number: f64,
}

/// The `k`-atom measure with moments `gamma_0..gamma_{2k-1}`.
pub fn moments_to_measure(moments: &MomentVector, k: usize) -> Result<DiscretePsd> {
    Ok(invert_moments(moments, k)?.measure)
}

/// As [`moments_to_measure`], also reporting the Hankel condition number.
pub fn invert_moments(moments: &MomentVector, k: usize) -> Result<Inversion> {
    if k == 0 {
        return Err(Error::Domain("need at least one atom".into()));
    }
    if moments.len() < 2 * k {
        return Err(Error::Length {
            needed: 2 * k,
            got: moments.len(),
        });
    }
    let scale = moment_scale(&moments.values);
    let g = moments.rescaled(scale).values;

    let hankel = hankel_from_slice(&g, k)?;
    if !hankel.is_positive_definite() {
        return Err(inversion_error(
            InversionStage::Invertibility,
            format!("Hankel matrix of order {k} is not positive definite"),
        ));
    }
    let condition_number = hankel.condition_number();
    let rhs = DVector::from_iterator(k, g[k..2 * k].iter().map(|x| -x));
    let coeffs = hankel
        .matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| {
            inversion_error(
                InversionStage::Invertibility,
                "Cholesky factorization failed".into(),
            )
        })?
        .solve(&rhs);

    let mut poly: Vec<f64> = coeffs.iter().copied().collect();
    poly.push(1.0);
    let roots = real_poly_roots(&poly)?;
    let mut atoms = Vec::with_capacity(k);
    for r in roots {
        if r.im.abs() > COMPLEX_ROOT_TOL * (1.0 + r.re.abs()) {
            return Err(inversion_error(
                InversionStage::ComplexRoot,
                format!("root {r} is not real"),
            ));
        }
        atoms.push(r.re);
    }
    atoms.sort_by(f64::total_cmp);
    if let Some(&a) = atoms.iter().find(|&&a| a <= 0.0) {
        return Err(inversion_error(
            InversionStage::Support,
            format!("atom {} is not positive", a * scale),
        ));
    }
    if atoms.windows(2).any(|w| w[1] - w[0] <= 1e-10 * w[1]) {
        return Err(inversion_error(
            InversionStage::Invertibility,
            "characteristic polynomial has a repeated root".into(),
        ));
    }

    let vandermonde = DMatrix::from_fn(k, k, |l, j| atoms[j].powi(l as i32));
    let target = DVector::from_column_slice(&g[..k]);
    let weights = vandermonde.lu().solve(&target).ok_or_else(|| {
        inversion_error(InversionStage::Invertibility, "singular Vandermonde system".into())
    })?;
    if let Some(&w) = weights.iter().find(|&&w| w <= 0.0) {
        return Err(inversion_error(
            InversionStage::Negativity,
            format!("weight {w} is not positive"),
        ));
    }
    let measure = DiscretePsd::new(
        atoms.iter().map(|a| a * scale).collect(),
        weights.iter().copied().collect(),
    )?;
    Ok(Inversion {
        measure,
        condition_number,
    })
}

/// Moment equations `sum_j w_j a_j^l = gamma_l` for `l` in `orders`, with some
/// weights fixed. Unknowns are all atoms followed by the free weights.
struct MomentSystem<'a> {
    gamma: &'a [f64],
    known: &'a [Option<f64>],
    first_order: usize,
    k: usize,
    unknowns: usize,
}

impl MomentSystem<'_> {
    fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let atoms = x[..self.k].to_vec();
        let mut free = x[self.k..].iter();
        let weights = self
            .known
            .iter()
            .map(|w| w.unwrap_or_else(|| *free.next().expect("one value per free weight")))
            .collect();
        (atoms, weights)
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let (a, w) = self.split(x);
        (0..self.unknowns)
            .map(|e| {
                let l = (self.first_order + e) as i32;
                let sum: f64 = a.iter().zip(&w).map(|(a, w)| w * a.powi(l)).sum();
                (sum - self.gamma[self.first_order + e]) / (1.0 + self.gamma[self.first_order + e].abs())
            })
            .collect()
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let (a, w) = self.split(x);
        let mut jac = DMatrix::zeros(self.unknowns, self.unknowns);
        for e in 0..self.unknowns {
            let l = self.first_order + e;
            let norm = 1.0 / (1.0 + self.gamma[l].abs());
            for j in 0..self.k {
                if l > 0 {
                    jac[(e, j)] = norm * l as f64 * w[j] * a[j].powi(l as i32 - 1);
                }
            }
            let mut col = self.k;
            for (j, kw) in self.known.iter().enumerate() {
                if kw.is_none() {
                    jac[(e, col)] = norm * a[j].powi(l as i32);
                    col += 1;
                }
            }
        }
        jac
    }

    fn admissible(&self, x: &[f64]) -> bool {
        let (a, w) = self.split(x);
        a[0] > 0.0 && a.windows(2).all(|p| p[1] > p[0]) && w.iter().all(|&w| w > 0.0)
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Damped Newton from `x`: full steps are halved until the residual decreases
/// and the iterate stays admissible.
fn damped_newton(system: &MomentSystem<'_>, mut x: Vec<f64>) -> Result<Vec<f64>> {
    if !system.admissible(&x) {
        return Err(Error::Domain("Newton seed is not admissible".into()));
    }
    let mut f = system.residual(&x);
    let mut norm = sup_norm(&f);
    for _ in 0..NEWTON_MAX_ITER {
        if norm <= NEWTON_TOL {
            return Ok(x);
        }
        let jac = system.jacobian(&x);
        let step = match jac.lu().solve(&DVector::from_vec(f.iter().map(|v| -v).collect())) {
            Some(s) => s,
            None => break,
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi + t * si).collect();
            if system.admissible(&trial) {
                let ft = system.residual(&trial);
                let nt = sup_norm(&ft);
                if nt < norm {
                    x = trial;
                    f = ft;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm <= NEWTON_STALL_TOL {
        Ok(x)
    } else {
        Err(Error::Convergence {
            iterations: NEWTON_MAX_ITER,
            residual: norm,
        })
    }
}

/// `k` increasing positive atoms spread around the mean of a moment sequence.
fn spread_seed(gamma: &[f64], k: usize) -> Vec<f64> {
    let mass = gamma[0];
    let mean = gamma[1] / mass;
    let sd = if gamma.len() > 2 {
        (gamma[2] / mass - mean * mean).max(0.0).sqrt()
    } else {
        0.0
    };
    let sd = if sd > 1e-3 * mean { sd } else { 0.5 * mean };
    (0..k)
        .map(|j| {
            let q = if k == 1 {
                0.0
            } else {
                -1.0 + 2.0 * j as f64 / (k - 1) as f64
            };
            (mean + sd * q).max(mean * 0.1 * (j + 1) as f64 / k as f64)
        })
        .collect()
}

/// Atoms for the given weights matching `gamma_1..gamma_k`.
pub fn solve_known_weights(moments: &MomentVector, weights: &[f64], k: usize) -> Result<DiscretePsd> {
    let known: Vec<Option<f64>> = weights.iter().map(|&w| Some(w)).collect();
    solve_partial_weights(moments, &known, k)
}

/// Atoms and free weights matching the lowest-order moment equations.
///
/// `known[j]` fixes the weight of the `j`-th smallest atom. With `f` free
/// weights there are `u = k + f` unknowns: if `f > 0` the equations are
/// `l = 0..u`, otherwise `l = 1..=k`. With every weight free this is
/// [`moments_to_measure`].
pub fn solve_partial_weights(moments: &MomentVector, known: &[Option<f64>], k: usize) -> Result<DiscretePsd> {
    if known.len() != k || k == 0 {
        return Err(Error::Domain(format!(
            "weight mask has {} entries for {k} atoms",
            known.len()
        )));
    }
    if known.iter().flatten().any(|&w| !(w > 0.0)) {
        return Err(Error::Domain("known weights must be positive".into()));
    }
    let free = known.iter().filter(|w| w.is_none()).count();
    if free == k {
        return moments_to_measure(moments, k);
    }
    let unknowns = k + free;
    let first_order = if free == 0 { 1 } else { 0 };
    let needed = first_order + unknowns;
    if moments.len() < needed.max(2) {
        return Err(Error::Length {
            needed: needed.max(2),
            got: moments.len(),
        });
    }
    if free > 0 {
        let fixed: f64 = known.iter().flatten().sum();
        if fixed >= moments.values[0] {
            return Err(Error::Domain(format!(
                "known weights sum to {fixed}, leaving no mass of {} for the free ones",
                moments.values[0]
            )));
        }
    }
    if k == 1 {
        let w = known[0].expect("single atom with a known weight");
        return DiscretePsd::new(vec![moments.values[1] / w], vec![w]);
    }

    let scale = moment_scale(&moments.values);
    let gamma = moments.rescaled(scale).values;
    let system = MomentSystem {
        gamma: &gamma,
        known,
        first_order,
        k,
        unknowns,
    };

    let base = if moments.len() >= 2 * k {
        invert_moments(&MomentVector::estimated(gamma.clone()), k)
            .ok()
            .map(|inv| (inv.measure.atoms().to_vec(), inv.measure.weights().to_vec()))
    } else {
        None
    };
    let spread = spread_seed(&gamma, k);
    let free_mass = (gamma[0] - known.iter().flatten().sum::<f64>()) / free.max(1) as f64;
    let assemble = |atoms: &[f64], weights: Option<&[f64]>| -> Vec<f64> {
        let mut x = atoms.to_vec();
        for (j, kw) in known.iter().enumerate() {
            if kw.is_none() {
                x.push(weights.map_or(free_mass, |w| w[j]));
            }
        }
        x
    };

    let mut seeds = Vec::new();
    match &base {
        Some((a, w)) => seeds.push(assemble(a, Some(w))),
        None => seeds.push(assemble(&spread, None)),
    }
    if free == 0 {
        seeds.push(assemble(&spread, None));
    } else {
        let centre = base.as_ref().map_or(spread.clone(), |(a, _)| a.clone());
        for s in 1..MULTISTART_SEEDS - 1 {
            let atoms: Vec<f64> = centre
                .iter()
                .enumerate()
                .map(|(j, a)| {
                    let sign = if (j + s) % 2 == 0 { 1.0 } else { -1.0 };
                    a * (1.0 + 0.03 * s as f64 * sign / k as f64)
                })
                .collect();
            seeds.push(assemble(&atoms, None));
        }
        seeds.push(assemble(&spread, None));
    }

    let outcomes: Vec<Result<Vec<f64>>> = seeds.into_par_iter().map(|x| damped_newton(&system, x)).collect();
    let mut last_err = None;
    for outcome in outcomes {
        match outcome {
            Ok(x) => {
                let (atoms, weights) = system.split(&x);
                return DiscretePsd::new(atoms.iter().map(|a| a * scale).collect(), weights);
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one seed"))
}
