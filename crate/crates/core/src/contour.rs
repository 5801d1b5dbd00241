//! Numerical contour integration, used as an independent check of the
//! residue formulas. Nothing in the estimation path calls into this module.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::esd::{companion_stieltjes_n, EigenSample};
use crate::forward::CompanionTransform;
use crate::psd::DiscretePsd;

/// Minimum distance between the contour and any pole of the integrand.
const POLE_CLEARANCE: f64 = 1e-6;
/// Half-height of the integration rectangle.
pub const RECTANGLE_HALF_HEIGHT: f64 = 1.0;

// 15-point Kronrod nodes on [0, 1] (symmetric) and weights; the Gauss
// 7-point rule uses the odd-indexed nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Kronrod estimate, Gauss-Kronrod error estimate and Kronrod estimate of `|f|`.
fn kronrod<F: Fn(f64) -> Result<Complex64>>(f: &F, a: f64, b: f64) -> Result<(Complex64, f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (left, right) = (f(center - dx)?, f(center + dx)?);
        kron += (left + right) * WGK[j];
        abs += (left.norm() + right.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (left + right) * WG[j / 2];
        }
    }
    Ok((kron * half, ((kron - gauss) * half).norm(), abs * half.abs()))
}

/// Relative accuracy below which cancellation in `integral |f|` makes further
/// bisection pointless.
const ROUNDING_FLOOR: f64 = 50.0 * f64::EPSILON;

/// Maximum number of subintervals in one adaptive integration.
const MAX_SUBINTERVALS: usize = 4000;

/// Adaptive Gauss–Kronrod integral of a complex-valued `f` over `[a, b]`.
///
/// The interval with the largest error estimate is bisected until the total
/// estimate drops below `max(tol, tol * |integral|)`, or below the rounding
/// floor `50 eps * integral |f|` when that is larger.
pub fn integrate<F: Fn(f64) -> Result<Complex64>>(f: &F, a: f64, b: f64, tol: f64) -> Result<Complex64> {
    let (value, err, abs) = kronrod(f, a, b)?;
    let mut pieces = vec![(a, b, value, err, abs)];
    loop {
        let total: Complex64 = pieces.iter().map(|p| p.2).sum();
        let total_err: f64 = pieces.iter().map(|p| p.3).sum();
        let total_abs: f64 = pieces.iter().map(|p| p.4).sum();
        if total_err <= (tol * total.norm().max(1.0)).max(ROUNDING_FLOOR * total_abs) {
            return Ok(total);
        }
        if pieces.len() >= MAX_SUBINTERVALS {
            return Err(Error::Convergence {
                iterations: pieces.len(),
                residual: total_err,
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("nonempty");
        let (lo, hi, ..) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1, a1) = kronrod(f, lo, mid)?;
        let (v2, e2, a2) = kronrod(f, mid, hi)?;
        pieces.push((lo, mid, v1, e1, a1));
        pieces.push((mid, hi, v2, e2, a2));
    }
}

/// `(1/2 pi i)` times the positively oriented integral of `f` around the rectangle
/// `re_lo <= Re z <= re_hi`, `|Im z| <= half_height`.
pub fn rectangle_integral<F: Fn(Complex64) -> Result<Complex64>>(
    f: &F,
    re_lo: f64,
    re_hi: f64,
    half_height: f64,
    tol: f64,
) -> Result<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    let h = half_height;
    let edge_tol = 0.25 * tol;
    let bottom = integrate(&|x| f(Complex64::new(x, -h)), re_lo, re_hi, edge_tol)?;
    let right = integrate(&|y| Ok(f(Complex64::new(re_hi, y))? * i), -h, h, edge_tol)?;
    let top = integrate(&|x| f(Complex64::new(x, h)), re_lo, re_hi, edge_tol)?;
    let left = integrate(&|y| Ok(f(Complex64::new(re_lo, y))? * i), -h, h, edge_tol)?;
    Ok((bottom + right - top - left) / (2.0 * std::f64::consts::PI * i))
}

/// `(1/2 pi i)` times the integral of `f` around a circle by the trapezoid rule.
pub fn circle_integral<F: Fn(Complex64) -> Result<Complex64>>(
    f: &F,
    center: f64,
    radius: f64,
    nodes: usize,
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..nodes {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / nodes as f64;
        let offset = Complex64::from_polar(radius, theta);
        acc += f(center + offset)? * offset;
    }
    Ok(acc / nodes as f64)
}

/// `f_l(z) = z s_n'(z) / s_n(z)^l` for an eigenvalue sample.
pub fn sample_integrand(sample: &EigenSample, l: usize) -> impl Fn(Complex64) -> Result<Complex64> + '_ {
    move |z| {
        let s = companion_stieltjes_n(z, sample, 0)?;
        let ds = companion_stieltjes_n(z, sample, 1)?;
        Ok(z * ds / s.powi(l as i32))
    }
}

fn check_clearance(abscissa: f64, poles: impl IntoIterator<Item = f64>) -> Result<()> {
    for p in poles {
        if (abscissa - p).abs() < POLE_CLEARANCE {
            return Err(Error::Domain(format!(
                "contour edge at {abscissa} passes within {POLE_CLEARANCE:e} of the pole {p}"
            )));
        }
    }
    Ok(())
}

/// `(-1)^l (n/p) (1/2 pi i) oint f_l` over the rectangle `[re_lo, re_hi] x [-1, 1]`.
pub fn oracle_contour_moment_sample(
    sample: &EigenSample,
    zeros: &[f64],
    l: usize,
    re_lo: f64,
    re_hi: f64,
) -> Result<f64> {
    for edge in [re_lo, re_hi] {
        check_clearance(edge, sample.lambdas().iter().copied())?;
        check_clearance(edge, zeros.iter().copied().filter(|&m| m != 0.0))?;
    }
    let f = sample_integrand(sample, l);
    let integral = rectangle_integral(&f, re_lo, re_hi, RECTANGLE_HALF_HEIGHT, 1e-12)?;
    let sign = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * sample.n() as f64 / sample.p() as f64 * integral.re)
}

/// `(-1)^l (1/c) (1/2 pi i) oint z s'(z) / s(z)^l` with the limiting companion
/// transform of `(H, c)`, over the rectangle `[re_lo, re_hi] x [-1, 1]`.
pub fn oracle_contour_moment_model(psd: &DiscretePsd, c: f64, l: usize, re_lo: f64, re_hi: f64) -> Result<f64> {
    let t = CompanionTransform::new(psd, c)?;
    for edge in [re_lo, re_hi] {
        if t.solve_real(edge).is_err() {
            return Err(Error::Domain(format!("contour edge {edge} meets the support")));
        }
    }
    let f = |z: Complex64| -> Result<Complex64> {
        let s = t.solve(z)?;
        let ds = 1.0 / dz_complex(&t, s);
        Ok(z * ds / s.powi(l as i32))
    };
    let integral = rectangle_integral(&f, re_lo, re_hi, RECTANGLE_HALF_HEIGHT, 1e-12)?;
    let sign = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign / c * integral.re)
}

fn dz_complex(t: &CompanionTransform, s: Complex64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for (a, w) in t.psd().iter() {
        let d = 1.0 + a * s;
        sum += w * a * a / (d * d);
    }
    1.0 / (s * s) - t.ratio() * sum
}
