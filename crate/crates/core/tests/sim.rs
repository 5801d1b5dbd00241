use lme_core::sim::{generate_eigen_sample, multiplicities, run_experiment, ExperimentSpec};
use lme_core::DiscretePsd;

fn three_cluster() -> DiscretePsd {
    DiscretePsd::new(vec![1.0, 7.0, 15.0, 25.0], vec![0.5, 0.25, 0.125, 0.125]).unwrap()
}

#[test]
fn single_atom_sample_fills_the_classical_support() {
    let c: f64 = 0.1;
    let theta = DiscretePsd::point_mass(1.0).unwrap();
    let s = generate_eigen_sample(&theta, 200, 2000, 9).unwrap();
    let (lo, hi) = (s.lambdas()[0], *s.lambdas().last().unwrap());
    assert!((lo - (1.0 - c.sqrt()).powi(2)).abs() < 0.05, "{lo}");
    assert!((hi - (1.0 + c.sqrt()).powi(2)).abs() < 0.05, "{hi}");
}

#[test]
fn samples_repeat_under_a_seed() {
    let a = generate_eigen_sample(&three_cluster(), 64, 200, 17).unwrap();
    let b = generate_eigen_sample(&three_cluster(), 64, 200, 17).unwrap();
    let c = generate_eigen_sample(&three_cluster(), 64, 200, 18).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn averaged_three_cluster_eigenvalues_show_three_clusters() {
    let reps = 20;
    let mut mean = vec![0.0; 320];
    for seed in 0..reps {
        let s = generate_eigen_sample(&three_cluster(), 320, 1000, seed).unwrap();
        for (m, l) in mean.iter_mut().zip(s.lambdas()) {
            *m += l / reps as f64;
        }
    }
    // multiplicities 160, 80, 80 put the cluster ends at these indices
    let (end1, start2, end2, start3) = (mean[159], mean[160], mean[239], mean[240]);
    assert!(end1 < 1.6935 && start2 > 3.2610 - 0.3 && start2 - end1 > 1.0);
    assert!(end2 < 10.2899 && start3 > 10.1562 && end2 < start3);
    // the narrow second gap still beats the spacings beside it
    let beside = (mean[239] - mean[238]).max(mean[241] - mean[240]);
    assert!(start3 - end2 > beside, "{} vs {beside}", start3 - end2);
}

#[test]
fn largest_remainder_rounding() {
    assert_eq!(multiplicities(&[0.5, 0.25, 0.125, 0.125], 320), vec![160, 80, 40, 40]);
    let m = multiplicities(&[1.0 / 3.0; 3], 100);
    assert_eq!(m.iter().sum::<usize>(), 100);
}

fn small_spec(seed: u64) -> ExperimentSpec {
    ExperimentSpec::from_toml(&format!(
        r#"
name = "small"
atoms = [1.0, 7.0, 15.0, 25.0]
weights = [0.5, 0.25, 0.125, 0.125]
dimensions = [[32, 100], [64, 200]]
replications = 12
seed = {seed}

[[variants]]
name = "LME"
method = "lme"

[[variants]]
name = "ME"
method = "me"

[[variants]]
name = "GLME"
method = "glme"
merge = [[0, 1], [2]]
"#
    ))
    .unwrap()
}

#[test]
fn reports_are_reproducible_and_thread_independent() {
    let spec = small_spec(5);
    let a = run_experiment(&spec).unwrap();
    let b = run_experiment(&spec).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_text(), b.to_text());
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_experiment(&spec).unwrap());
    assert_eq!(a.to_csv(), serial.to_csv());
    let other = run_experiment(&small_spec(6)).unwrap();
    assert_ne!(a.to_csv(), other.to_csv());
}

#[test]
fn partition_frequencies_and_failures_cover_every_replication() {
    let report = run_experiment(&small_spec(7)).unwrap();
    assert_eq!(report.summaries.len(), 6);
    for s in &report.summaries {
        let counted: usize = s.partitions.iter().map(|(_, c)| c).sum();
        assert_eq!(counted + s.failures, s.replications, "{} at ({}, {})", s.variant, s.p, s.n);
        let d = s.parameter("d").unwrap();
        assert_eq!(d.count, s.replications - s.failures);
        assert!(d.sd >= 0.0);
    }
}
