use lme_core::esd::{cluster_eigenvalues, ClusterSpec, EigenSample};
use lme_core::forward::{lsd_quantiles, support_intervals};
use lme_core::local_moments::estimate_cluster_moments;
use lme_core::pipeline::{estimate, glme, lme, EstimationConfig, EstimatorPath, Fallback};
use lme_core::psd::moments_of;
use lme_core::sim::generate_eigen_sample;
use lme_core::{DiscretePsd, Error, Partition};

fn psd(atoms: &[f64], weights: &[f64]) -> DiscretePsd {
    DiscretePsd::new(atoms.to_vec(), weights.to_vec()).unwrap()
}

fn three_cluster() -> DiscretePsd {
    psd(&[1.0, 7.0, 15.0, 25.0], &[0.5, 0.25, 0.125, 0.125])
}

/// Quantiles of the limiting distribution used as a noiseless sample.
fn ghost_sample(theta: &DiscretePsd, c: f64, p: usize) -> EigenSample {
    let n = (p as f64 / c).round() as usize;
    EigenSample::new(lsd_quantiles(theta, c, p).unwrap(), p, n).unwrap()
}

/// Largest relative atom error and absolute weight error.
fn distance(a: &DiscretePsd, b: &DiscretePsd) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let atoms = a.atoms().iter().zip(b.atoms()).map(|(x, y)| ((x - y) / x).abs()).fold(0.0, f64::max);
    let weights = a.weights().iter().zip(b.weights()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    (atoms, weights)
}

#[test]
fn ghost_sample_moments_match_the_division() {
    let theta = three_cluster();
    let s = ghost_sample(&theta, 0.32, 2000);
    let bounds = support_intervals(&theta, 0.32).unwrap().cluster_boundaries();
    let a = cluster_eigenvalues(&s, &ClusterSpec::Boundaries(bounds)).unwrap();
    let parts = [psd(&[1.0], &[1.0]), psd(&[7.0], &[1.0]), psd(&[15.0, 25.0], &[0.5, 0.5])];
    let masses = [0.5, 0.25, 0.25];
    for i in 0..3 {
        let got = estimate_cluster_moments(&s, &a, i, 3).unwrap();
        let exact = moments_of(&parts[i], 3);
        for l in 0..=3 {
            let expected = masses[i] * exact.values[l];
            println!("cluster {i} order {l}: {} vs {expected}", got.values[l]);
            assert!((got.values[l] - expected).abs() <= 1e-3 * expected, "cluster {i} order {l}");
        }
    }
}

#[test]
fn ghost_sample_recovers_the_model() {
    let theta = three_cluster();
    let s = ghost_sample(&theta, 0.32, 2000);
    let bounds = support_intervals(&theta, 0.32).unwrap().cluster_boundaries();
    let r = lme(&s, &EstimationConfig::new(4, ClusterSpec::Boundaries(bounds))).unwrap();
    assert_eq!(r.partition.orders(), &[1, 1, 2]);
    let (da, dw) = distance(&theta, &r.theta_hat);
    println!("lme ghost: {da:e} {dw:e} {:?}", r.theta_hat);
    assert!(da < 1e-2 && dw < 1e-2);
}

#[test]
fn ghost_sample_survives_merging_a_split_model() {
    let theta = psd(&[1.0, 4.0, 10.0], &[0.2, 0.4, 0.4]);
    let c = 0.05;
    let s = ghost_sample(&theta, c, 2000);
    let support = support_intervals(&theta, c).unwrap();
    assert_eq!(support.len(), 3);
    let spec = ClusterSpec::Boundaries(support.cluster_boundaries());
    for plan in [vec![vec![0], vec![1], vec![2]], vec![vec![0, 1], vec![2]], vec![vec![0], vec![1, 2]], vec![vec![0, 1, 2]]] {
        let r = glme(&s, &EstimationConfig::new(3, spec.clone()).with_merge_plan(plan.clone())).unwrap();
        let (da, dw) = distance(&theta, &r.theta_hat);
        println!("glme ghost {plan:?}: {da:e} {dw:e}");
        assert!(da < 1e-2 && dw < 1e-2, "{plan:?}");
        assert_eq!(r.diagnostics.path, EstimatorPath::Glme);
    }
}

fn three_cluster_boundaries() -> ClusterSpec {
    ClusterSpec::Boundaries(support_intervals(&three_cluster(), 0.32).unwrap().cluster_boundaries())
}

#[test]
fn default_config_on_three_cluster_data() {
    let s = generate_eigen_sample(&three_cluster(), 320, 1000, 3).unwrap();
    let r = estimate(&s, &EstimationConfig::new(4, three_cluster_boundaries())).unwrap();
    assert_eq!(r.partition.orders(), &[1, 1, 2]);
    assert_eq!(r.theta_hat.len(), 4);
    assert_eq!(r.diagnostics.path, EstimatorPath::Lme);
    assert!(r.diagnostics.fallback_events.is_empty());
    let (da, _) = distance(&three_cluster(), &r.theta_hat);
    assert!(da < 0.1, "{:?}", r.theta_hat);
}

fn two_atoms() -> DiscretePsd {
    psd(&[1.0, 3.0], &[0.5, 0.5])
}

#[test]
fn single_cluster_takes_the_full_moment_path() {
    let s = generate_eigen_sample(&two_atoms(), 320, 1000, 4).unwrap();
    let r = lme(&s, &EstimationConfig::new(2, ClusterSpec::Count(1))).unwrap();
    assert!(r.diagnostics.full_moment_path);
    assert_eq!(r.partition.orders(), &[2]);
    let (da, dw) = distance(&two_atoms(), &r.theta_hat);
    assert!(da < 0.1 && dw < 0.1, "{:?}", r.theta_hat);
}

#[test]
fn bad_boundaries_fall_back_to_merging() {
    // 5.0 cuts through the cluster of the atom at 7
    let cfg = EstimationConfig::new(4, ClusterSpec::Boundaries(vec![2.5, 5.0])).with_partition(Partition(vec![1, 2, 1]));
    for seed in 0..5 {
        let s = generate_eigen_sample(&three_cluster(), 320, 1000, seed).unwrap();
        let r = lme(&s, &cfg).unwrap();
        assert!(!r.diagnostics.fallback_events.is_empty());
        assert!(r.diagnostics.groups.len() < 3);
        assert_eq!(r.diagnostics.initial_partition.orders(), &[1, 2, 1]);
        assert_eq!(r.theta_hat.len(), 4);
        let failed = lme(&s, &cfg.clone().with_fallback(Fallback::Fail)).unwrap_err();
        assert!(matches!(failed, Error::Estimation(ref msg) if msg.contains("inversion failed")), "{failed:?}");
    }
}

#[test]
fn split_known_weight_path_divides_first_moments() {
    let theta = three_cluster();
    for seed in 0..5 {
        let s = generate_eigen_sample(&theta, 320, 1000, seed).unwrap();
        let cfg = EstimationConfig::new(4, ClusterSpec::Sizes(vec![160, 80, 40, 40]))
            .with_known_weights(theta.weights());
        let r = lme(&s, &cfg).unwrap();
        assert_eq!(r.partition.orders(), &[1, 1, 1, 1]);
        for i in 0..4 {
            let expected = r.moments.row(i).values[1] / theta.weights()[i];
            assert!((r.theta_hat.atoms()[i] - expected).abs() <= 1e-12 * expected);
        }
    }
}

#[test]
fn merging_everything_is_the_single_cluster_estimator() {
    for seed in 0..5 {
        let s = generate_eigen_sample(&two_atoms(), 320, 1000, seed).unwrap();
        let merged = glme(&s, &EstimationConfig::new(2, ClusterSpec::Count(2)).with_merge_plan(vec![vec![0, 1]])).unwrap();
        let single = lme(&s, &EstimationConfig::new(2, ClusterSpec::Count(1))).unwrap();
        assert_eq!(merged.theta_hat, single.theta_hat);
        assert_eq!(merged.moments, single.moments);
        assert!(merged.diagnostics.full_moment_path);
    }
    // failures of the seven-moment fit must coincide as well
    for seed in 0..5 {
        let s = generate_eigen_sample(&three_cluster(), 320, 1000, seed).unwrap();
        let merged = glme(&s, &EstimationConfig::new(4, three_cluster_boundaries()).with_merge_plan(vec![vec![0, 1, 2]]));
        let single = lme(&s, &EstimationConfig::new(4, ClusterSpec::Count(1)));
        match (merged, single) {
            (Ok(a), Ok(b)) => assert_eq!((a.theta_hat, a.moments), (b.theta_hat, b.moments)),
            (Err(a), Err(b)) => assert_eq!(a.to_string(), b.to_string()),
            (a, b) => panic!("outcomes differ: {:?} vs {:?}", a.map(|r| r.theta_hat), b.map(|r| r.theta_hat)),
        }
    }
}

#[test]
fn weights_close_and_atoms_increase() {
    let models = [
        (three_cluster(), vec![vec![0], vec![1], vec![2]]),
        (psd(&[1.0, 3.0, 15.0, 25.0], &[0.5, 0.25, 0.125, 0.125]), vec![vec![0, 1], vec![2]]),
    ];
    for (theta, plan) in models {
        let spec = ClusterSpec::Boundaries(support_intervals(&theta, 0.32).unwrap().cluster_boundaries());
        for seed in 0..10 {
            let s = generate_eigen_sample(&theta, 160, 500, seed).unwrap();
            let Ok(r) = glme(&s, &EstimationConfig::new(4, spec.clone()).with_merge_plan(plan.clone())) else {
                continue;
            };
            let total: f64 = r.theta_hat.weights().iter().sum();
            assert!((total - 1.0).abs() <= 1e-10);
            assert!(r.theta_hat.atoms().windows(2).all(|w| w[0] < w[1]));
        }
    }
}

#[test]
fn unknown_order_is_rejected() {
    let s = generate_eigen_sample(&three_cluster(), 32, 100, 0).unwrap();
    let mut cfg = EstimationConfig::new(4, ClusterSpec::Count(3));
    cfg.k = None;
    let err = estimate(&s, &cfg).unwrap_err().to_string();
    assert!(err.contains("order-selection"), "{err}");
}
