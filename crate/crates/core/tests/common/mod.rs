#![allow(dead_code)]

use lme_core::esd::{ClusterAssignment, EigenSample};
use lme_core::psd::moments_of;
use lme_core::DiscretePsd;
use nalgebra::DMatrix;
use rand::Rng;

/// Rectangle abscissas enclosing cluster `i` and its zeros, midway to the
/// nearest pole outside the cluster.
pub fn contour_edges(sample: &EigenSample, a: &ClusterAssignment, i: usize) -> (f64, f64) {
    let l = sample.lambdas();
    let mu = a.zeros();
    let r = a.range(i);
    let lo = if r.start == 0 {
        let first = a.zero_set(0).first().copied().unwrap_or(l[0]).min(l[0]);
        0.5 * first
    } else {
        0.5 * (l[r.start - 1] + mu[r.start])
    };
    let hi = if r.end == l.len() {
        1.5 * l[l.len() - 1]
    } else {
        0.5 * (l[r.end - 1] + mu[r.end])
    };
    (lo, hi)
}

/// A random sample of `v <= 30` eigenvalues grouped into `clusters` visible
/// bunches, with `p < n` or `p > n` picked at random.
pub fn random_clustered_sample<R: Rng>(rng: &mut R, clusters: usize) -> EigenSample {
    let v = rng.random_range(clusters.max(2)..=30);
    let mut lambdas = Vec::with_capacity(v);
    let mut centre = rng.random_range(0.5..2.0);
    let sizes = split_count(rng, v, clusters);
    for size in sizes {
        let width = 0.2 * centre;
        for _ in 0..size {
            lambdas.push(centre + width * rng.random_range(-1.0..1.0));
        }
        centre *= rng.random_range(3.0..6.0);
    }
    let (p, n) = if rng.random_bool(0.7) {
        (v, v + rng.random_range(1..=4 * v))
    } else {
        (v + rng.random_range(1..=2 * v), v)
    };
    EigenSample::new(lambdas, p, n).expect("positive eigenvalues")
}

fn split_count<R: Rng>(rng: &mut R, v: usize, parts: usize) -> Vec<usize> {
    let mut sizes = vec![1; parts];
    for _ in parts..v {
        sizes[rng.random_range(0..parts)] += 1;
    }
    sizes
}

/// First-order bound on the relative atom and weight error caused by
/// rounding each moment `gamma_0..gamma_{2k-1}`: `eps * ||J^{-1}||_inf`, with
/// `J` the Jacobian of the relative moments in the relative atoms and weights.
pub fn rounding_bound(g: &DiscretePsd) -> f64 {
    let k = g.len();
    let n = 2 * k;
    let gamma = moments_of(g, n - 1).values;
    let j = DMatrix::from_fn(n, n, |l, c| {
        let i = c % k;
        let (a, w) = (g.atoms()[i], g.weights()[i]);
        let term = w * a.powi(l as i32) / gamma[l];
        if c < k {
            l as f64 * term
        } else {
            term
        }
    });
    let inv = j.try_inverse().expect("distinct atoms");
    let worst = (0..n).map(|r| inv.row(r).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    worst * f64::EPSILON
}

/// Random measure with up to `k_max` atoms in `[0.5, 30]` at least 0.1 apart,
/// weights drawn from `[0.05, 1]` before normalising, kept only when
/// well-separated (rounding bound at most `1e-9`).
pub fn random_separated_measure<R: Rng>(rng: &mut R, k_max: usize) -> DiscretePsd {
    loop {
        let k = rng.random_range(1..=k_max);
        let mut atoms: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..30.0)).collect();
        atoms.sort_by(f64::total_cmp);
        if atoms.windows(2).any(|w| w[1] - w[0] < 0.1) {
            continue;
        }
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let g = DiscretePsd::new(atoms, raw.iter().map(|w| w / total).collect()).unwrap();
        if rounding_bound(&g) <= 1e-9 {
            return g;
        }
    }
}
