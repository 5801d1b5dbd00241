//! Monte Carlo experiments: Gaussian data with a discrete population
//! spectrum, repeated estimation, and summary tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::esd::{ClusterSpec, EigenSample};
use crate::forward::{divide_psd, support_intervals};
use crate::pipeline::{estimate, EstimationConfig, EstimationResult};
use crate::psd::{fmt_f64, DiscretePsd, Partition};

/// Tolerance on a probability measure's total mass.
const PROBABILITY_TOL: f64 = 1e-10;

/// Integer multiplicities `round(p w_i)` summing to `p`, by largest remainder.
///
/// Ties in the remainder go to the smaller atom.
pub fn multiplicities(weights: &[f64], p: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * p as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &j in order.iter().take(p.saturating_sub(assigned)) {
        counts[j] += 1;
    }
    counts
}

/// Generator for replication `replication` of dimension index `dimension`.
pub fn replication_rng(seed: u64, dimension: usize, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((dimension as u64) << 32) | replication as u64);
    rng
}

/// Nonzero eigenvalues of `T^{1/2} X X^T T^{1/2} / n` for a `p x n` standard
/// Gaussian `X` and diagonal `T` with multiplicities from [`multiplicities`].
pub fn generate_eigen_sample_with<R: Rng>(theta: &DiscretePsd, p: usize, n: usize, rng: &mut R) -> Result<EigenSample> {
    if p == 0 || n == 0 {
        return Err(Error::Domain("dimensions must be positive".into()));
    }
    let counts = multiplicities(theta.weights(), p);
    if counts.contains(&0) {
        warn!("p = {p} leaves an atom of {:?} with no multiplicity", theta.atoms());
    }
    let root_scale: Vec<f64> = theta
        .atoms()
        .iter()
        .zip(&counts)
        .flat_map(|(&a, &c)| std::iter::repeat_n(a.sqrt(), c))
        .collect();
    let x = DMatrix::<f64>::from_fn(p, n, |_, _| rng.sample(StandardNormal));
    let y = DMatrix::from_fn(p, n, |r, c| root_scale[r] * x[(r, c)]);
    let gram = if p <= n {
        &y * y.transpose()
    } else {
        y.transpose() * &y
    } / n as f64;
    let eigen = SymmetricEigen::try_new(gram, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigensolve did not converge".into()))?;
    EigenSample::new(eigen.eigenvalues.iter().copied().collect(), p, n)
}

/// [`generate_eigen_sample_with`] driven by a ChaCha generator seeded with `seed`.
pub fn generate_eigen_sample(theta: &DiscretePsd, p: usize, n: usize, seed: u64) -> Result<EigenSample> {
    generate_eigen_sample_with(theta, p, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `int_0^1 |Q_1(t) - Q_2(t)| dt` for two discrete probability measures.
pub fn wasserstein(g1: &DiscretePsd, g2: &DiscretePsd) -> Result<f64> {
    wasserstein_raw(g1.atoms(), g1.weights(), g2.atoms(), g2.weights())
}

/// As [`wasserstein`] on raw atom/weight slices (atoms sorted, zero allowed).
pub fn wasserstein_raw(a1: &[f64], w1: &[f64], a2: &[f64], w2: &[f64]) -> Result<f64> {
    for (a, w) in [(a1, w1), (a2, w2)] {
        if a.len() != w.len() || a.is_empty() {
            return Err(Error::Domain("atoms and weights must be nonempty and of equal length".into()));
        }
        let mass: f64 = w.iter().sum();
        if (mass - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::Domain(format!("total mass {mass} is not 1")));
        }
    }
    let (mut i, mut j) = (0, 0);
    let (mut c1, mut c2) = (w1[0], w2[0]);
    let mut t = 0.0;
    let mut d = 0.0;
    loop {
        let next = c1.min(c2);
        d += (a1[i] - a2[j]).abs() * (next - t).max(0.0);
        t = next;
        let last1 = i + 1 == a1.len();
        let last2 = j + 1 == a2.len();
        if last1 && last2 {
            break;
        }
        let advance1 = !last1 && (c1 <= c2 || last2);
        let advance2 = !last2 && (c2 <= c1 || last1);
        if advance1 {
            i += 1;
            c1 += w1[i];
        }
        if advance2 {
            j += 1;
            c2 += w2[j];
        }
    }
    Ok(d)
}

/// Estimator family run by a variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Local moments with an estimated partition.
    Lme,
    /// One atom per cluster, clusters cut at the true multiplicities.
    Me,
    /// Local moments after a merge plan.
    Glme,
}

/// How a variant splits the sample eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Clustering {
    /// Cut at the gaps of the limiting support of the true model.
    #[default]
    Support,
    /// Cut at the widest eigenvalue gaps (`clusters` of them).
    Gaps,
    /// Cut at the listed `boundaries`.
    Boundaries,
    /// Cut by eigenvalue counts: each support interval of the true model
    /// receives the multiplicities of its atoms.
    Counts,
}

/// One estimator configuration within an experiment.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub method: Method,
    #[serde(default)]
    pub clustering: Clustering,
    pub clusters: Option<usize>,
    pub boundaries: Option<Vec<f64>>,
    /// Per atom: whether its true weight is supplied to the estimator.
    pub known_weights: Option<Vec<bool>>,
    pub merge: Option<Vec<Vec<usize>>>,
    pub partition: Option<Vec<usize>>,
}

/// A Monte Carlo experiment, read from TOML.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
    /// `(p, n)` pairs sharing one ratio `p / n`.
    pub dimensions: Vec<(usize, usize)>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub seed: u64,
    pub variants: Vec<Variant>,
}

fn default_replications() -> usize {
    100
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Parse {
            line: e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0),
            detail: e.message().to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn theta(&self) -> Result<DiscretePsd> {
        DiscretePsd::new(self.atoms.clone(), self.weights.clone())
    }

    /// The common ratio `c = p / n`.
    pub fn ratio(&self) -> f64 {
        let (p, n) = self.dimensions[0];
        p as f64 / n as f64
    }

    pub fn validate(&self) -> Result<()> {
        let theta = self.theta()?;
        if (theta.total_mass() - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::Domain("model weights must sum to 1".into()));
        }
        if self.dimensions.is_empty() || self.replications == 0 || self.variants.is_empty() {
            return Err(Error::Domain(
                "an experiment needs dimensions, replications and variants".into(),
            ));
        }
        let c = self.ratio();
        for &(p, n) in &self.dimensions {
            if p == 0 || n == 0 || (p as f64 / n as f64 - c).abs() > 1e-12 {
                return Err(Error::Domain(format!("dimension ({p},{n}) does not have ratio {c}")));
            }
        }
        let k = self.atoms.len();
        for v in &self.variants {
            if v.known_weights.as_ref().is_some_and(|m| m.len() != k) {
                return Err(Error::Domain(format!("variant {}: known_weights needs {k} entries", v.name)));
            }
            match v.method {
                Method::Glme if v.merge.is_none() => {
                    return Err(Error::Domain(format!("variant {}: glme needs a merge plan", v.name)));
                }
                Method::Me if self.dimensions.iter().any(|&(p, n)| p > n) => {
                    return Err(Error::Domain(format!("variant {}: me needs p <= n", v.name)));
                }
                _ => {}
            }
            match v.clustering {
                Clustering::Gaps if v.clusters.is_none() => {
                    return Err(Error::Domain(format!("variant {}: gap clustering needs clusters", v.name)));
                }
                Clustering::Boundaries if v.boundaries.is_none() => {
                    return Err(Error::Domain(format!("variant {}: needs boundaries", v.name)));
                }
                Clustering::Counts if self.dimensions.iter().any(|&(p, n)| p > n) => {
                    return Err(Error::Domain(format!("variant {}: count clustering needs p <= n", v.name)));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Everything a variant needs that does not depend on the replication.
struct PreparedVariant {
    variant: Variant,
    /// Atom ranges of the true model per initial cluster, when known.
    truth_ranges: Option<Vec<std::ops::Range<usize>>>,
    support_boundaries: Vec<f64>,
}

impl PreparedVariant {
    fn config(&self, theta: &DiscretePsd, p: usize) -> Result<EstimationConfig> {
        let k = theta.len();
        let v = &self.variant;
        let clusters = match (v.method, v.clustering) {
            (Method::Me, _) => ClusterSpec::Sizes(multiplicities(theta.weights(), p)),
            (_, Clustering::Support) => ClusterSpec::Boundaries(self.support_boundaries.clone()),
            (_, Clustering::Gaps) => ClusterSpec::Count(v.clusters.expect("validated")),
            (_, Clustering::Boundaries) => ClusterSpec::Boundaries(v.boundaries.clone().expect("validated")),
            (_, Clustering::Counts) => {
                let ranges = self.truth_ranges.as_ref().ok_or_else(|| {
                    Error::Domain("the true model does not divide along its support".into())
                })?;
                let counts = multiplicities(theta.weights(), p);
                ClusterSpec::Sizes(ranges.iter().map(|r| counts[r.clone()].iter().sum()).collect())
            }
        };
        let mut cfg = EstimationConfig::new(k, clusters);
        let known = match (&v.known_weights, v.method) {
            (Some(mask), _) => Some(mask.clone()),
            (None, Method::Me) => Some(vec![true; k]),
            (None, _) => None,
        };
        if let Some(mask) = known {
            cfg = cfg.with_weight_mask(
                mask.iter()
                    .zip(theta.weights())
                    .map(|(&known, &w)| known.then_some(w))
                    .collect(),
            );
        }
        if v.method == Method::Me {
            cfg = cfg.with_partition(Partition(vec![1; k]));
        } else if let Some(p) = &v.partition {
            cfg = cfg.with_partition(Partition::new(p.clone())?);
        }
        if v.method == Method::Glme {
            cfg = cfg.with_merge_plan(v.merge.clone().expect("validated"));
        }
        Ok(cfg)
    }

    fn free_weights(&self, k: usize) -> Vec<bool> {
        match (&self.variant.known_weights, self.variant.method) {
            (Some(mask), _) => mask.iter().map(|m| !m).collect(),
            (None, Method::Me) => vec![false; k],
            (None, _) => vec![true; k],
        }
    }
}

/// Outcome of one variant on one replication.
#[derive(Debug, Clone)]
struct Outcome {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    distance: f64,
    partition: String,
    /// `|gamma_hat_{i,1} - gamma_{i,1}|` per cluster, when the truth is known.
    first_moment_errors: Option<Vec<f64>>,
    seconds: f64,
}

fn score(theta: &DiscretePsd, prepared: &PreparedVariant, result: &EstimationResult, seconds: f64) -> Result<Outcome> {
    let distance = wasserstein(theta, &result.theta_hat)?;
    let first_moment_errors = prepared.truth_ranges.as_ref().and_then(|ranges| {
        let groups = &result.diagnostics.groups;
        if groups.iter().flatten().any(|&g| g >= ranges.len()) || groups.iter().map(Vec::len).sum::<usize>() != ranges.len() {
            return None;
        }
        Some(
            groups
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    let range = ranges[g[0]].start..ranges[*g.last().expect("nonempty")].end;
                    let truth: f64 = theta.atoms()[range.clone()]
                        .iter()
                        .zip(&theta.weights()[range])
                        .map(|(a, w)| a * w)
                        .sum();
                    (result.moments.row(i).values[1] - truth).abs()
                })
                .collect(),
        )
    });
    Ok(Outcome {
        atoms: result.theta_hat.atoms().to_vec(),
        weights: result.theta_hat.weights().to_vec(),
        distance,
        partition: result.diagnostics.initial_partition.to_string(),
        first_moment_errors,
        seconds,
    })
}

/// Mean, standard deviation (denominator `n - 1`) and count of one quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSummary {
    pub name: String,
    pub truth: Option<f64>,
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

fn summarize(name: String, truth: Option<f64>, values: &[f64]) -> ParameterSummary {
    let count = values.len();
    let mean = values.iter().sum::<f64>() / count as f64;
    let sd = if count > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    ParameterSummary {
        name,
        truth,
        mean,
        sd,
        count,
    }
}

/// Aggregates of one variant at one `(p, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub p: usize,
    pub n: usize,
    pub variant: String,
    pub parameters: Vec<ParameterSummary>,
    /// Partitions chosen on the initial clusters with their frequencies,
    /// failures excluded.
    pub partitions: Vec<(String, usize)>,
    pub failures: usize,
    pub replications: usize,
    /// Mean wall-clock seconds per estimation; not part of the rendered outputs.
    pub mean_seconds: f64,
}

impl VariantSummary {
    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn partition_count(&self, partition: &str) -> usize {
        self.partitions
            .iter()
            .find(|(p, _)| p == partition)
            .map_or(0, |(_, c)| *c)
    }
}

/// Results of an experiment, one summary per dimension and variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub c: f64,
    pub seed: u64,
    pub replications: usize,
    pub summaries: Vec<VariantSummary>,
}

impl ExperimentReport {
    pub fn summary(&self, p: usize, n: usize, variant: &str) -> Option<&VariantSummary> {
        self.summaries
            .iter()
            .find(|s| s.p == p && s.n == n && s.variant == variant)
    }

    /// `p,n,variant,parameter,truth,mean,sd,count` rows. Partition frequencies
    /// appear as `partition(...)` rows and failures as a `failures` row, with
    /// the frequency in the `mean` column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,n,variant,parameter,truth,mean,sd,count\n");
        for s in &self.summaries {
            for q in &s.parameters {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    s.p,
                    s.n,
                    s.variant,
                    q.name,
                    q.truth.map(fmt_f64).unwrap_or_default(),
                    fmt_f64(q.mean),
                    fmt_f64(q.sd),
                    q.count
                );
            }
            for (p, c) in &s.partitions {
                let _ = writeln!(out, "{},{},{},\"partition{p}\",,{c},,{}", s.p, s.n, s.variant, s.replications);
            }
            let _ = writeln!(out, "{},{},{},failures,,{},,{}", s.p, s.n, s.variant, s.failures, s.replications);
        }
        out
    }

    /// Plain-text tables of means and standard deviations per dimension.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment {} (c = {}, seed = {})", self.name, self.c, self.seed);
        let _ = writeln!(
            out,
            "{} replications per dimension; St. D. uses the n - 1 denominator",
            self.replications
        );
        let mut dims: Vec<(usize, usize)> = Vec::new();
        for s in &self.summaries {
            if !dims.contains(&(s.p, s.n)) {
                dims.push((s.p, s.n));
            }
        }
        for (p, n) in dims {
            let _ = writeln!(out, "\n(p, n) = ({p}, {n})");
            for s in self.summaries.iter().filter(|s| s.p == p && s.n == n) {
                let names: Vec<&str> = s.parameters.iter().map(|q| q.name.as_str()).collect();
                let _ = writeln!(out, "{:<12}{:<8}{}", "", "", pad_row(&names));
                let means: Vec<String> = s.parameters.iter().map(|q| format!("{:.4}", q.mean)).collect();
                let sds: Vec<String> = s.parameters.iter().map(|q| format!("{:.4}", q.sd)).collect();
                let _ = writeln!(out, "{:<12}{:<8}{}", s.variant, "Mean", pad_row(&means));
                let _ = writeln!(out, "{:<12}{:<8}{}", "", "St. D.", pad_row(&sds));
                let freq: Vec<String> = s.partitions.iter().map(|(p, c)| format!("k={p}: {c}")).collect();
                let _ = writeln!(out, "{:<20}{}; failures: {}", "", freq.join(", "), s.failures);
            }
        }
        out
    }
}

fn pad_row<S: AsRef<str>>(cells: &[S]) -> String {
    cells.iter().map(|c| format!(" {:>19}", c.as_ref())).collect()
}

/// Runs every variant on `spec.replications` samples per dimension.
///
/// Replications run on the current rayon pool; each one draws from its own
/// generator, so the report does not depend on the number of threads.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let theta = spec.theta()?;
    let c = spec.ratio();
    let k = theta.len();
    let support = support_intervals(&theta, c)?;
    let division = divide_psd(&theta, &support).ok();
    let prepared: Vec<PreparedVariant> = spec
        .variants
        .iter()
        .map(|v| {
            let truth_ranges = match (v.method, v.clustering) {
                (Method::Me, _) => Some((0..k).map(|j| j..j + 1).collect()),
                (_, Clustering::Support | Clustering::Counts) => division.as_ref().map(|d| d.atom_ranges.clone()),
                _ => None,
            };
            PreparedVariant {
                variant: v.clone(),
                truth_ranges,
                support_boundaries: support.cluster_boundaries(),
            }
        })
        .collect();

    let mut summaries = Vec::new();
    for (dim, &(p, n)) in spec.dimensions.iter().enumerate() {
        let configs = prepared
            .iter()
            .map(|pv| pv.config(&theta, p))
            .collect::<Result<Vec<_>>>()?;
        let runs: Vec<Vec<Option<Outcome>>> = (0..spec.replications)
            .into_par_iter()
            .map(|rep| -> Result<Vec<Option<Outcome>>> {
                let mut rng = replication_rng(spec.seed, dim, rep);
                let sample = generate_eigen_sample_with(&theta, p, n, &mut rng)?;
                Ok(prepared
                    .iter()
                    .zip(&configs)
                    .map(|(pv, cfg)| {
                        let start = Instant::now();
                        let result = estimate(&sample, cfg);
                        let seconds = start.elapsed().as_secs_f64();
                        result.and_then(|r| score(&theta, pv, &r, seconds)).ok()
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;

        for (vi, pv) in prepared.iter().enumerate() {
            let outcomes: Vec<&Outcome> = runs.iter().filter_map(|r| r[vi].as_ref()).collect();
            let free = pv.free_weights(k);
            let mut parameters = Vec::new();
            if !outcomes.is_empty() {
                for j in 0..k {
                    let values: Vec<f64> = outcomes.iter().map(|o| o.atoms[j]).collect();
                    parameters.push(summarize(format!("a{}", j + 1), Some(theta.atoms()[j]), &values));
                }
                for (j, _) in free.iter().enumerate().filter(|(_, f)| **f) {
                    let values: Vec<f64> = outcomes.iter().map(|o| o.weights[j]).collect();
                    parameters.push(summarize(format!("w{}", j + 1), Some(theta.weights()[j]), &values));
                }
                let d: Vec<f64> = outcomes.iter().map(|o| o.distance).collect();
                parameters.push(summarize("d".into(), Some(0.0), &d));
                let with_errors: Vec<&Vec<f64>> = outcomes.iter().filter_map(|o| o.first_moment_errors.as_ref()).collect();
                let clusters = with_errors.iter().map(|e| e.len()).max().unwrap_or(0);
                for i in 0..clusters {
                    let values: Vec<f64> = with_errors.iter().filter_map(|e| e.get(i).copied()).collect();
                    parameters.push(summarize(format!("gamma1_abs_err_c{}", i + 1), Some(0.0), &values));
                }
            }
            let mut partitions: BTreeMap<String, usize> = BTreeMap::new();
            for o in &outcomes {
                *partitions.entry(o.partition.clone()).or_default() += 1;
            }
            let mean_seconds = if outcomes.is_empty() {
                0.0
            } else {
                outcomes.iter().map(|o| o.seconds).sum::<f64>() / outcomes.len() as f64
            };
            summaries.push(VariantSummary {
                p,
                n,
                variant: pv.variant.name.clone(),
                parameters,
                partitions: partitions.into_iter().collect(),
                failures: spec.replications - outcomes.len(),
                replications: spec.replications,
                mean_seconds,
            });
        }
    }
    Ok(ExperimentReport {
        name: spec.name.clone(),
        c,
        seed: spec.seed,
        replications: spec.replications,
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn largest_remainder_rounding() {
        assert_eq!(multiplicities(&[0.5, 0.25, 0.125, 0.125], 320), vec![160, 80, 40, 40]);
        assert_eq!(multiplicities(&[1.0 / 3.0; 3], 10), vec![4, 3, 3]);
        assert_eq!(multiplicities(&[0.3, 0.4, 0.3], 7).iter().sum::<usize>(), 7);
    }

    #[test]
    fn wasserstein_examples() {
        let d1 = DiscretePsd::point_mass(1.0).unwrap();
        let d2 = DiscretePsd::point_mass(2.0).unwrap();
        assert_eq!(wasserstein(&d1, &d2).unwrap(), 1.0);
        assert_eq!(wasserstein_raw(&[0.0, 2.0], &[0.5, 0.5], &[1.0], &[1.0]).unwrap(), 1.0);
        let g = DiscretePsd::new(vec![1.0, 7.0, 15.0], vec![0.5, 0.25, 0.25]).unwrap();
        assert_eq!(wasserstein(&g, &g).unwrap(), 0.0);
        assert!(wasserstein_raw(&[1.0], &[0.9], &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let theta = DiscretePsd::new(vec![1.0, 3.0], vec![0.5, 0.5]).unwrap();
        let a = generate_eigen_sample(&theta, 20, 50, 11).unwrap();
        let b = generate_eigen_sample(&theta, 20, 50, 11).unwrap();
        assert_eq!(a, b);
        let wide = generate_eigen_sample(&theta, 30, 10, 11).unwrap();
        assert_eq!(wide.v(), 10);
    }

    #[test]
    fn spec_parses_and_validates() {
        let text = r#"
            name = "toy"
            atoms = [1.0, 5.0]
            weights = [0.5, 0.5]
            dimensions = [[20, 100], [40, 200]]
            seed = 3

            [[variants]]
            name = "LME"
            method = "lme"
        "#;
        let spec = ExperimentSpec::from_toml(text).unwrap();
        assert_eq!(spec.replications, 100);
        assert_eq!(spec.variants[0].clustering, Clustering::Support);
        let bad = text.replace("[40, 200]", "[40, 100]");
        assert!(ExperimentSpec::from_toml(&bad).is_err());
        assert!(matches!(
            ExperimentSpec::from_toml("name = 3"),
            Err(Error::Parse { .. })
        ));
    }
}
