//! End-to-end estimation of a discrete population spectrum.
//!
//! The sample eigenvalues are split into clusters, each cluster's moments are
//! estimated from residues, the number of atoms per cluster is chosen by the
//! Hankel criterion, and every cluster is inverted to a sub-measure. Clusters
//! can be merged up front (GLME) or after an inversion failure.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use log::info;

use crate::error::{Error, Result};
use crate::esd::{cluster_eigenvalues, ClusterAssignment, ClusterSpec, EigenSample};
use crate::inversion::{invert_moments, solve_partial_weights};
use crate::local_moments::{estimate_moment_table, MomentTable, DEFAULT_MAX_ORDER};
use crate::partition::{estimate_partition, search_moment_order, PartitionEstimate};
use crate::psd::{fmt_f64, hankel_from_slice, DiscretePsd, Partition};

/// What to do when a cluster cannot be inverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    /// Merge the failing cluster into its nearest neighbour and retry.
    MergeNearest,
    /// Report the failure.
    Fail,
}

/// Settings for one estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationConfig {
    /// Total number of atoms. Must be set; estimating it is not supported.
    pub k: Option<usize>,
    pub clusters: ClusterSpec,
    /// Contiguous groups of cluster indices to merge before estimation.
    pub merge_plan: Option<Vec<Vec<usize>>>,
    /// Atoms per cluster (after merging); estimated when absent.
    pub partition: Option<Partition>,
    /// Known weights per atom in increasing atom order; `None` entries are free.
    pub weights: Option<Vec<Option<f64>>>,
    pub fallback: Fallback,
    /// Highest moment order the estimator may request.
    pub max_order: usize,
}

impl EstimationConfig {
    pub fn new(k: usize, clusters: ClusterSpec) -> Self {
        Self {
            k: Some(k),
            clusters,
            merge_plan: None,
            partition: None,
            weights: None,
            fallback: Fallback::MergeNearest,
            max_order: DEFAULT_MAX_ORDER,
        }
    }

    pub fn with_merge_plan(mut self, groups: Vec<Vec<usize>>) -> Self {
        self.merge_plan = Some(groups);
        self
    }

    pub fn with_partition(mut self, partition: Partition) -> Self {
        self.partition = Some(partition);
        self
    }

    pub fn with_known_weights(mut self, weights: &[f64]) -> Self {
        self.weights = Some(weights.iter().map(|&w| Some(w)).collect());
        self
    }

    pub fn with_weight_mask(mut self, weights: Vec<Option<f64>>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn with_fallback(mut self, fallback: Fallback) -> Self {
        self.fallback = fallback;
        self
    }

    fn validate(&self) -> Result<usize> {
        let k = self.k.ok_or_else(|| {
            Error::Domain(
                "the number of atoms k must be given; selecting it from data is a separate \
                 order-selection problem"
                    .into(),
            )
        })?;
        if k == 0 {
            return Err(Error::Domain("k must be positive".into()));
        }
        if let Some(p) = &self.partition {
            if p.total() != k {
                return Err(Error::Domain(format!("partition {p} does not sum to k = {k}")));
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != k {
                return Err(Error::Domain(format!("{} weights given for k = {k} atoms", w.len())));
            }
        }
        Ok(k)
    }
}

/// Which estimator produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorPath {
    Lme,
    Glme,
}

/// Record of the decisions taken during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub path: EstimatorPath,
    pub cluster_sizes: Vec<usize>,
    /// Condition number of `Gamma_hat(H_i, k_i)` per final cluster.
    pub condition_numbers: Vec<f64>,
    pub partition_search: Option<PartitionEstimate>,
    /// Partition chosen on the initial clusters, before any fallback merge.
    pub initial_partition: Partition,
    /// Groups of initial clusters forming the final clusters.
    pub groups: Vec<Vec<usize>>,
    /// Merges triggered by inversion failures, with the reason.
    pub fallback_events: Vec<String>,
    /// All clusters were merged into one, so every moment is global.
    pub full_moment_path: bool,
    pub jittered: usize,
    pub elapsed: Duration,
}

impl Diagnostics {
    /// `key=value` lines; timing is left out so the text is reproducible.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let path = match self.path {
            EstimatorPath::Lme => "lme",
            EstimatorPath::Glme => "glme",
        };
        let join = |v: &[String]| v.join(";");
        let _ = writeln!(out, "path={path}");
        let _ = writeln!(
            out,
            "cluster_sizes={}",
            join(&self.cluster_sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>())
        );
        let groups: Vec<String> = self
            .groups
            .iter()
            .map(|g| g.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("+"))
            .collect();
        let _ = writeln!(out, "groups={}", join(&groups));
        let _ = writeln!(
            out,
            "condition_numbers={}",
            join(&self.condition_numbers.iter().map(|c| fmt_f64(*c)).collect::<Vec<_>>())
        );
        if let Some(search) = &self.partition_search {
            let _ = writeln!(
                out,
                "partition_bounds={}",
                join(&search.bounds.iter().map(|d| d.to_string()).collect::<Vec<_>>())
            );
            let _ = writeln!(out, "partition_fell_back={}", search.fell_back);
            for (p, g) in &search.candidates {
                let _ = writeln!(out, "g_hat{p}={}", fmt_f64(*g));
            }
        }
        let _ = writeln!(out, "initial_partition={}", self.initial_partition);
        let _ = writeln!(out, "fallback_merges={}", self.fallback_events.len());
        for e in &self.fallback_events {
            let _ = writeln!(out, "fallback_event={e}");
        }
        let _ = writeln!(out, "full_moment_path={}", self.full_moment_path);
        let _ = writeln!(out, "jittered_eigenvalues={}", self.jittered);
        out
    }
}

/// Estimated spectrum with the intermediate quantities that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub theta_hat: DiscretePsd,
    pub partition: Partition,
    pub moments: MomentTable,
    pub diagnostics: Diagnostics,
}

/// A cluster that could not be inverted.
struct ClusterFailure {
    cluster: usize,
    error: Error,
    partition: Partition,
}

struct Attempt {
    parts: Vec<DiscretePsd>,
    partition: Partition,
    moments: MomentTable,
    search: Option<PartitionEstimate>,
    condition_numbers: Vec<f64>,
}

fn is_recoverable(e: &Error) -> bool {
    matches!(e, Error::Inversion { .. } | Error::Convergence { .. })
}

fn attempt(
    sample: &EigenSample,
    assignment: &ClusterAssignment,
    config: &EstimationConfig,
    k: usize,
    forced: Option<&Partition>,
) -> Result<std::result::Result<Attempt, ClusterFailure>> {
    let m = assignment.len();
    if k < m {
        return Err(Error::Domain(format!("{m} clusters cannot hold only {k} atoms")));
    }
    let orders: Vec<usize> = match forced {
        Some(p) => p.orders().iter().map(|&ki| 2 * ki - 1).collect(),
        None => vec![search_moment_order(k, m); m],
    };
    if let Some(&top) = orders.iter().max() {
        if top > config.max_order {
            return Err(Error::Domain(format!(
                "moment order {top} exceeds the configured maximum {}",
                config.max_order
            )));
        }
    }
    let moments = estimate_moment_table(sample, assignment, &orders)?;
    let (partition, search) = match forced {
        Some(p) => (p.clone(), None),
        None => {
            let search = estimate_partition(&moments, k)?;
            (search.partition.clone(), Some(search))
        }
    };

    let mut parts = Vec::with_capacity(m);
    let mut condition_numbers = Vec::with_capacity(m);
    for i in 0..m {
        let ki = partition.orders()[i];
        let row = moments.row(i);
        condition_numbers.push(hankel_from_slice(&row.values, ki)?.condition_number());
        let mask: Vec<Option<f64>> = match &config.weights {
            Some(w) => w[partition.atom_range(i)].to_vec(),
            None => vec![None; ki],
        };
        let solved = if mask.iter().all(Option::is_none) {
            invert_moments(row, ki).map(|inv| inv.measure)
        } else {
            solve_partial_weights(row, &mask, ki)
        };
        match solved {
            Ok(part) => parts.push(part),
            Err(e) if is_recoverable(&e) => {
                return Ok(Err(ClusterFailure {
                    cluster: i,
                    error: e,
                    partition,
                }))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Ok(Attempt {
        parts,
        partition,
        moments,
        search,
        condition_numbers,
    }))
}

/// Index of the neighbour of cluster `i` across the narrower eigenvalue gap.
fn nearest_neighbour(sample: &EigenSample, assignment: &ClusterAssignment, i: usize) -> usize {
    let m = assignment.len();
    let left = (i > 0).then(|| assignment.gap_after(sample, i - 1));
    let right = (i + 1 < m).then(|| assignment.gap_after(sample, i));
    match (left, right) {
        (Some(l), Some(r)) if r < l => i + 1,
        (Some(_), _) => i - 1,
        (None, _) => i + 1,
    }
}

fn run(sample: &EigenSample, config: &EstimationConfig, path: EstimatorPath) -> Result<EstimationResult> {
    let start = Instant::now();
    let k = config.validate()?;
    let base = cluster_eigenvalues(sample, &config.clusters)?;
    let mut groups: Vec<Vec<usize>> = match &config.merge_plan {
        Some(plan) => plan.clone(),
        None => (0..base.len()).map(|i| vec![i]).collect(),
    };
    let mut forced = config.partition.clone();
    let mut events = Vec::new();
    let mut initial_partition = None;

    loop {
        let assignment = base.merge(&groups)?;
        if let Some(p) = &forced {
            if p.len() != assignment.len() {
                return Err(Error::Domain(format!(
                    "partition {p} has {} clusters but the sample has {}",
                    p.len(),
                    assignment.len()
                )));
            }
        }
        match attempt(sample, &assignment, config, k, forced.as_ref())? {
            Ok(done) => {
                let initial_partition = initial_partition.unwrap_or_else(|| done.partition.clone());
                let mut atoms = Vec::with_capacity(k);
                let mut weights = Vec::with_capacity(k);
                for part in &done.parts {
                    atoms.extend_from_slice(part.atoms());
                    weights.extend_from_slice(part.weights());
                }
                let total: f64 = weights.iter().sum();
                let weights = weights.iter().map(|w| w / total).collect();
                let theta_hat = DiscretePsd::new(atoms, weights)?;
                let diagnostics = Diagnostics {
                    path,
                    cluster_sizes: assignment.counts(),
                    condition_numbers: done.condition_numbers,
                    partition_search: done.search,
                    initial_partition,
                    groups,
                    fallback_events: events,
                    full_moment_path: assignment.len() == 1,
                    jittered: sample.jittered(),
                    elapsed: start.elapsed(),
                };
                return Ok(EstimationResult {
                    theta_hat,
                    partition: done.partition,
                    moments: done.moments,
                    diagnostics,
                });
            }
            Err(failure) => {
                initial_partition.get_or_insert(failure.partition.clone());
                let m = assignment.len();
                if config.fallback == Fallback::Fail || m == 1 {
                    return Err(Error::Estimation(format!(
                        "cluster {} of {m}: {}{}",
                        failure.cluster,
                        failure.error,
                        if events.is_empty() {
                            String::new()
                        } else {
                            format!(" (after merges: {})", events.join("; "))
                        }
                    )));
                }
                let i = failure.cluster;
                let j = nearest_neighbour(sample, &assignment, i);
                let (lo, hi) = (i.min(j), i.max(j));
                let event = format!("merged clusters {lo} and {hi} after {}", failure.error);
                info!("{event}");
                events.push(event);
                let upper = groups.remove(hi);
                groups[lo].extend(upper);
                if let Some(p) = &forced {
                    let mut orders = p.orders().to_vec();
                    let moved = orders.remove(hi);
                    orders[lo] += moved;
                    forced = Some(Partition(orders));
                }
            }
        }
    }
}

/// Local moment estimate; any merge plan in `config` is ignored.
pub fn lme(sample: &EigenSample, config: &EstimationConfig) -> Result<EstimationResult> {
    let mut config = config.clone();
    config.merge_plan = None;
    run(sample, &config, EstimatorPath::Lme)
}

/// Local moment estimate after merging clusters per `config.merge_plan`.
pub fn glme(sample: &EigenSample, config: &EstimationConfig) -> Result<EstimationResult> {
    if config.merge_plan.is_none() {
        return Err(Error::Domain("glme needs a merge plan".into()));
    }
    run(sample, config, EstimatorPath::Glme)
}

/// Runs [`glme`] when the config carries a merge plan and [`lme`] otherwise.
pub fn estimate(sample: &EigenSample, config: &EstimationConfig) -> Result<EstimationResult> {
    if config.merge_plan.is_some() {
        glme(sample, config)
    } else {
        lme(sample, config)
    }
}
