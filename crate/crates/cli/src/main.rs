//! `lme`: command-line front end to the local moment estimator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lme_core::esd::{cluster_eigenvalues, ClusterSpec, EigenSample};
use lme_core::forward::{lsd_density, support_intervals};
use lme_core::local_moments::estimate_moment_table;
use lme_core::partition::{estimate_partition, search_moment_order};
use lme_core::pipeline::{estimate, EstimationConfig, Fallback};
use lme_core::psd::fmt_f64;
use lme_core::sim::{run_experiment, ExperimentSpec};
use lme_core::{DiscretePsd, Error, Partition};

#[derive(Parser)]
#[command(name = "lme", version, about = "Estimate a discrete population spectrum from sample eigenvalues")]
struct Cli {
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Support intervals of the limiting spectral distribution.
    Support {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Limiting spectral density on an evenly spaced grid.
    Density {
        #[command(flatten)]
        model: ModelArgs,
        /// Left end of the grid (default: lower support edge).
        #[arg(long)]
        from: Option<f64>,
        /// Right end of the grid (default: upper support edge).
        #[arg(long)]
        to: Option<f64>,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Estimated local moments of each eigenvalue cluster.
    Moments {
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        clusters: ClusterArgs,
        /// Highest moment order.
        #[arg(long, default_value_t = 7)]
        order: usize,
    },
    /// Criterion value of every candidate partition of `k` atoms.
    Partition {
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        clusters: ClusterArgs,
        #[arg(long)]
        k: usize,
    },
    /// Estimated spectrum followed by the run diagnostics.
    Estimate {
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        clusters: ClusterArgs,
        #[arg(long)]
        k: usize,
        /// Groups of clusters to merge, e.g. `0+1;2`.
        #[arg(long)]
        merge: Option<String>,
        /// Atoms per cluster, e.g. `1,1,2`; searched when absent.
        #[arg(long)]
        partition: Option<String>,
        /// Known weights per atom, blank where unknown, e.g. `0.5,,0.25,`.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, value_enum, default_value_t = FallbackArg::Merge)]
        fallback: FallbackArg,
    },
    /// Monte Carlo experiment described by a TOML file.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Replications per dimension (default: the file's value).
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
        format: ReportFormat,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Population spectrum as `atom,weight` lines.
    #[arg(long)]
    model: PathBuf,
    /// Dimension ratio p / n.
    #[arg(long)]
    c: f64,
}

#[derive(Args)]
struct SampleArgs {
    /// Sample eigenvalues, separated by commas or newlines.
    #[arg(long)]
    eigs: PathBuf,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    n: usize,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ClusterArgs {
    /// Number of clusters, split at the widest gaps.
    #[arg(long)]
    m: Option<usize>,
    /// Split points between clusters, e.g. `2.5,10.2`.
    #[arg(long, value_delimiter = ',')]
    boundaries: Option<Vec<f64>>,
    /// Cluster sizes in eigenvalue order, e.g. `160,80,80`.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
}

impl ClusterArgs {
    fn spec(&self) -> ClusterSpec {
        match (self.m, &self.boundaries, &self.sizes) {
            (Some(m), _, _) => ClusterSpec::Count(m),
            (_, Some(b), _) => ClusterSpec::Boundaries(b.clone()),
            (_, _, Some(s)) => ClusterSpec::Sizes(s.clone()),
            _ => unreachable!("clap requires one clustering flag"),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FallbackArg {
    /// Merge a failing cluster into its neighbour and retry.
    Merge,
    /// Stop at the first failure.
    Fail,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Text,
}

/// Input problems exit with 1, numerical failures with 2.
enum Failure {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let numerical = e.chain().any(|cause| {
            matches!(
                cause.downcast_ref::<Error>(),
                Some(
                    Error::Numerical(_)
                        | Error::Singular { .. }
                        | Error::Inversion { .. }
                        | Error::Convergence { .. }
                        | Error::Estimation(_)
                )
            )
        });
        if numerical {
            Failure::Numerical(e)
        } else {
            Failure::Usage(e)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let text = match &cli.command {
        Command::Support { model } => support(model)?,
        Command::Density { model, from, to, points } => density(model, *from, *to, *points)?,
        Command::Moments { sample, clusters, order } => moments(sample, clusters, *order)?,
        Command::Partition { sample, clusters, k } => partition(sample, clusters, *k)?,
        Command::Estimate {
            sample,
            clusters,
            k,
            merge,
            partition,
            weights,
            fallback,
        } => {
            let mut config = EstimationConfig::new(*k, clusters.spec()).with_fallback(match fallback {
                FallbackArg::Merge => Fallback::MergeNearest,
                FallbackArg::Fail => Fallback::Fail,
            });
            if let Some(m) = merge {
                config = config.with_merge_plan(parse_groups(m)?);
            }
            if let Some(p) = partition {
                config = config.with_partition(Partition::new(parse_list(p)?).map_err(anyhow::Error::from)?);
            }
            if let Some(w) = weights {
                config = config.with_weight_mask(parse_weight_mask(w)?);
            }
            estimate_record(sample, &config)?
        }
        Command::Simulate { spec, seed, reps, format } => simulate(spec, *seed, *reps, *format)?,
    };
    emit(cli.out.as_deref(), &text).map_err(Failure::Usage)
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(args: &ModelArgs) -> anyhow::Result<DiscretePsd> {
    let text = read(&args.model)?;
    DiscretePsd::from_text(&text).with_context(|| format!("parsing {}", args.model.display()))
}

/// Numbers separated by commas or whitespace; a non-numeric first line is a header.
fn parse_eigenvalues(text: &str) -> anyhow::Result<Vec<f64>> {
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line
            .split(|ch: char| ch == ',' || ch.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => values.extend(v),
            Err(_) if idx == 0 => {}
            Err(e) => bail!("line {}: {e}", idx + 1),
        }
    }
    Ok(values)
}

fn load_sample(args: &SampleArgs) -> anyhow::Result<EigenSample> {
    let lambdas = parse_eigenvalues(&read(&args.eigs)?).with_context(|| format!("parsing {}", args.eigs.display()))?;
    Ok(EigenSample::new(lambdas, args.p, args.n)?)
}

fn parse_list<T: std::str::FromStr>(s: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|f| f.trim().parse::<T>().map_err(|e| anyhow!("`{f}`: {e}")))
        .collect()
}

/// `0+1;2` or `0+1,2`.
fn parse_groups(s: &str) -> anyhow::Result<Vec<Vec<usize>>> {
    s.split([';', ','])
        .map(|g| {
            g.split('+')
                .map(|i| i.trim().parse::<usize>().map_err(|e| anyhow!("merge group `{g}`: {e}")))
                .collect()
        })
        .collect()
}

fn parse_weight_mask(s: &str) -> anyhow::Result<Vec<Option<f64>>> {
    s.split(',')
        .map(|f| match f.trim() {
            "" => Ok(None),
            v => v.parse::<f64>().map(Some).map_err(|e| anyhow!("weight `{v}`: {e}")),
        })
        .collect()
}

fn support(args: &ModelArgs) -> anyhow::Result<String> {
    let s = support_intervals(&load_model(args)?, args.c)?;
    let mut out = String::from("interval,lower,upper,contour_lower,contour_upper\n");
    for (i, (&(lo, hi), &(dlo, dhi))) in s.intervals.iter().zip(&s.contour_bounds).enumerate() {
        let _ = writeln!(out, "{i},{},{},{},{}", fmt_f64(lo), fmt_f64(hi), fmt_f64(dlo), fmt_f64(dhi));
    }
    Ok(out)
}

fn density(args: &ModelArgs, from: Option<f64>, to: Option<f64>, points: usize) -> anyhow::Result<String> {
    let psd = load_model(args)?;
    let (lo, hi) = match (from, to) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => {
            let s = support_intervals(&psd, args.c)?;
            let first = s.intervals.first().map_or(0.0, |i| i.0);
            let last = s.intervals.last().map_or(0.0, |i| i.1);
            (from.unwrap_or(first), to.unwrap_or(last))
        }
    };
    if points < 2 || !(lo < hi) {
        bail!("need at least 2 points on an increasing range, got {points} on [{lo}, {hi}]");
    }
    let mut out = String::from("x,density\n");
    for j in 0..points {
        let x = lo + (hi - lo) * j as f64 / (points - 1) as f64;
        let _ = writeln!(out, "{},{}", fmt_f64(x), fmt_f64(lsd_density(x, &psd, args.c)?));
    }
    Ok(out)
}

fn moments(sample: &SampleArgs, clusters: &ClusterArgs, order: usize) -> anyhow::Result<String> {
    let sample = load_sample(sample)?;
    let a = cluster_eigenvalues(&sample, &clusters.spec())?;
    let table = estimate_moment_table(&sample, &a, &vec![order; a.len()])?;
    let mut out = String::from("cluster,size,order,moment\n");
    for (i, row) in table.rows.iter().enumerate() {
        let size = a.range(i).len();
        for (l, v) in row.values.iter().enumerate() {
            let _ = writeln!(out, "{i},{size},{l},{}", fmt_f64(*v));
        }
    }
    Ok(out)
}

fn partition(sample: &SampleArgs, clusters: &ClusterArgs, k: usize) -> anyhow::Result<String> {
    let sample = load_sample(sample)?;
    let a = cluster_eigenvalues(&sample, &clusters.spec())?;
    if k < a.len() {
        bail!("{} clusters cannot hold only {k} atoms", a.len());
    }
    let order = search_moment_order(k, a.len());
    let table = estimate_moment_table(&sample, &a, &vec![order; a.len()])?;
    let search = estimate_partition(&table, k)?;
    let mut out = String::from("partition,g_hat,chosen\n");
    for (p, g) in &search.candidates {
        let _ = writeln!(out, "\"{p}\",{},{}", fmt_f64(*g), *p == search.partition);
    }
    Ok(out)
}

fn estimate_record(sample: &SampleArgs, config: &EstimationConfig) -> anyhow::Result<String> {
    let sample = load_sample(sample)?;
    let result = estimate(&sample, config)?;
    Ok(format!(
        "{}# partition={}\n{}",
        result.theta_hat.to_text(),
        result.partition,
        result.diagnostics.to_text()
    ))
}

fn simulate(path: &Path, seed: u64, reps: Option<usize>, format: ReportFormat) -> anyhow::Result<String> {
    let mut spec = ExperimentSpec::from_toml(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    spec.seed = seed;
    if let Some(r) = reps {
        spec.replications = r;
    }
    let report = run_experiment(&spec)?;
    Ok(match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Text => report.to_text(),
    })
}
