use proptest::prelude::*;
use shadowda_core::bench::*;
use shadowda_core::cdan::HyperGrid;
use shadowda_core::exec::Sequential;
use shadowda_core::qsim::SpinModel;
use shadowda_core::rng;
use shadowda_core::select::Criterion;

/// Zeros of 1 + h1 z + h2 z² inside the unit disk (the winding number of the
/// free-fermion symbol) and the distance of the nearest zero to the circle.
fn cluster_winding(h1: f64, h2: f64) -> (usize, f64) {
    let radii: Vec<f64> = if h2 == 0.0 {
        if h1 == 0.0 {
            vec![]
        } else {
            vec![1.0 / h1.abs()]
        }
    } else {
        let d = h1 * h1 - 4.0 * h2;
        if d >= 0.0 {
            vec![((-h1 + d.sqrt()) / (2.0 * h2)).abs(), ((-h1 - d.sqrt()) / (2.0 * h2)).abs()]
        } else {
            vec![(1.0 / h2.abs()).sqrt(); 2]
        }
    };
    let inside = radii.iter().filter(|&&r| r < 1.0).count();
    (inside, radii.iter().map(|r| (r - 1.0).abs()).fold(f64::INFINITY, f64::min))
}

fn exact_cluster_label(h1: f64, h2: f64) -> usize {
    match cluster_winding(h1, h2).0 {
        0 => 0,
        2 => 3,
        _ if h1 > 0.0 => 1,
        _ => 2,
    }
}

fn no_band(model: SpinModel) -> PhaseOracle {
    PhaseOracle::calibrate(model, OracleConfig { dead_band: 0.0, ..Default::default() }).unwrap()
}

#[test]
fn region_membership_on_ten_thousand_draws() {
    let mut g = rng::from_seed(3);
    for model in [SpinModel::Cluster, SpinModel::Annni] {
        for r in [source_region(model), target_region(model)] {
            let pts = r.sample(10_000, &mut g).unwrap();
            assert!(pts.iter().all(|&p| r.contains(p)), "{r:?}");
        }
    }
    let s = source_region(SpinModel::Cluster).sample(10_000, &mut g).unwrap();
    assert!(s.iter().all(|p| p.0 == 0.0 || p.1 == 0.0));
    assert!(s.iter().any(|p| p.0 == 0.0) && s.iter().any(|p| p.1 == 0.0));
    let t = target_region(SpinModel::Cluster).sample(10_000, &mut g).unwrap();
    assert!(t.iter().all(|p| p.0 != 0.0 && p.1 != 0.0));
    let a = source_region(SpinModel::Annni).sample(10_000, &mut g).unwrap();
    assert!(a.iter().all(|p| p.1 <= 0.1 && (0.0..=1.0).contains(&p.0)));
    let at = target_region(SpinModel::Annni).sample(10_000, &mut g).unwrap();
    assert!(at.iter().all(|p| p.1 > 0.1));
}

#[test]
fn thin_region_exhausts_rejection_budget() {
    let r = Region::RectMinus {
        x: (0.0, 1.0),
        y: (0.0, 1.0),
        minus: Box::new(Region::Rect { x: (0.0, 1.0), y: (0.0, 1.0) }),
    };
    assert!(matches!(r.sample_one(&mut rng::from_seed(1)), Err(BenchError::RejectionBudget(_))));
}

#[test]
fn cluster_oracle_known_points() {
    let o = no_band(SpinModel::Cluster);
    assert_eq!(o.raw_label((0.0, 0.0)).unwrap(), 0);
    assert_eq!(o.raw_label((4.0, 0.0)).unwrap(), 1);
    assert_eq!(o.raw_label((-4.0, 0.0)).unwrap(), 2);
    assert_eq!(o.raw_label((0.0, 4.0)).unwrap(), 3);
}

#[test]
fn cluster_oracle_flips_at_solvable_line_transitions() {
    let o = no_band(SpinModel::Cluster);
    let d = 0.02;
    assert_eq!(o.raw_label((1.0 - d, 0.0)).unwrap(), 0);
    assert_eq!(o.raw_label((1.0 + d, 0.0)).unwrap(), 1);
    assert_eq!(o.raw_label((-1.0 + d, 0.0)).unwrap(), 0);
    assert_eq!(o.raw_label((-1.0 - d, 0.0)).unwrap(), 2);
    assert_eq!(o.raw_label((0.0, 1.0 - d)).unwrap(), 0);
    assert_eq!(o.raw_label((0.0, 1.0 + d)).unwrap(), 3);
    assert_eq!(o.raw_label((0.0, -1.0 + d)).unwrap(), 0);
    assert_eq!(o.raw_label((0.0, -1.0 - d)).unwrap(), 3);
}

#[test]
fn cluster_oracle_matches_winding_number_away_from_boundaries() {
    let o = no_band(SpinModel::Cluster);
    let mut g = rng::from_seed(11);
    let mut checked = 0;
    while checked < 30 {
        let p = Region::Rect { x: (-4.0, 4.0), y: (-4.0, 4.0) }.sample_one(&mut g).unwrap();
        if cluster_winding(p.0, p.1).1 < 0.15 {
            continue;
        }
        assert_eq!(o.raw_label(p).unwrap(), exact_cluster_label(p.0, p.1), "at {p:?}");
        checked += 1;
    }
}

#[test]
fn dead_band_abstains_at_the_transition() {
    let o = PhaseOracle::calibrate(SpinModel::Cluster, OracleConfig::default()).unwrap();
    assert_eq!(o.label((1.0, 0.0)).unwrap(), None);
    assert_eq!(o.label((3.0, 0.0)).unwrap(), Some(1));
}

#[test]
fn annni_oracle_ising_limit() {
    let o = no_band(SpinModel::Annni);
    // κ = 0 is the transverse-field Ising chain, ordered for h < 1.
    assert_eq!(o.raw_label((0.0, 0.1)).unwrap(), 0);
    assert_eq!(o.raw_label((0.0, 0.98)).unwrap(), 0);
    assert_eq!(o.raw_label((0.0, 1.02)).unwrap(), 3);
    // Deep in the κ > 1/2, small-h antiphase.
    assert_eq!(o.raw_label((1.0, 0.05)).unwrap(), 1);
}

#[test]
fn macro_f1_examples() {
    assert_eq!(macro_f1(&[0, 1, 2, 1], &[0, 1, 2, 1], 3), 1.0);
    assert!((macro_f1(&[0, 0, 1, 1], &[0, 1, 0, 1], 2) - 0.5).abs() < 1e-15);
    assert!((macro_f1(&[0, 0, 1, 1], &[0, 0, 0, 0], 2) - 1.0 / 3.0).abs() < 1e-15);
    // class 2 absent from the truth is excluded
    assert!((macro_f1(&[0, 1], &[0, 1], 3) - 1.0).abs() < 1e-15);
}

#[test]
fn aggregate_examples() {
    let s = aggregate(&[0.7]);
    assert_eq!((s.median, s.mean, s.std), (0.7, 0.7, 0.0));
    assert!((aggregate(&[0.8, 0.9]).median - 0.85).abs() < 1e-15);
    let v: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let s = aggregate(&v);
    assert!((s.median - 0.55).abs() < 1e-12);
    assert!((s.mean - 0.55).abs() < 1e-12);
    // Σ (i/10 − 0.55)² = 0.825, sample variance 0.825/9
    assert!((s.std - (0.825f64 / 9.0).sqrt()).abs() < 1e-12);
}

#[test]
fn split_is_disjoint_exhaustive_and_trial_dependent() {
    let a = split_target(800, 0.5, 9, 0);
    assert_eq!((a.train.len(), a.unseen.len()), (400, 400));
    let mut all: Vec<usize> = a.train.iter().chain(&a.unseen).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..800).collect::<Vec<_>>());
    assert_eq!(a, split_target(800, 0.5, 9, 0));
    assert_ne!(a, split_target(800, 0.5, 9, 1));
}

#[test]
fn hidden_labels_need_an_open_guard() {
    let h = HiddenLabels::new(vec![2, 0, 1]);
    let g = LeakageGuard::new();
    let e = h.reveal(&[0, 2], &g, "test").unwrap_err();
    assert!(e.is_leakage());
    assert!(e.clone().at("target", 4).is_leakage());
    g.open_scoring();
    assert_eq!(h.reveal(&[0, 2], &g, "test").unwrap(), vec![2, 1]);
}

fn mini_cluster() -> (TaskSpec, TrialPlan) {
    let mut task = TaskSpec::preset("desk-cluster-qetu").unwrap();
    task.shots_target = 64;
    if let TaskKind::Spin(s) = &mut task.kind {
        s.n = 9;
        s.excited = 12;
        s.oracle.n_label = 8;
    }
    let plan = TrialPlan {
        n_source: 8,
        n_target: 16,
        trials: 2,
        grid: HyperGrid { epochs: vec![2, 3], batch: vec![4], lr: vec![1e-3], lambda: vec![1.0] },
        cv_folds: 2,
        kernel_grid: vec![(0.1, 0.1), (1.0, 1.0)],
        cluster_restarts: 2,
        ..TrialPlan::default()
    };
    (task, plan)
}

#[test]
fn miniature_cluster_task_end_to_end() {
    let (task, plan) = mini_cluster();
    let m = assemble_task(&task, &plan, &Sequential).unwrap();
    assert_eq!(m.source_counts(), vec![2, 2, 2, 2]);
    assert!(m.source.iter().all(|s| {
        let p = s.params.unwrap();
        p.0 == 0.0 || p.1 == 0.0
    }));
    assert!(m.target.iter().all(|s| {
        let p = s.params.unwrap();
        p.0 != 0.0 && p.1 != 0.0
    }));
    assert!(m.target.iter().all(|s| s.overlap.unwrap() > 0.0));
    let again = assemble_task(&task, &plan, &Sequential).unwrap();
    assert_eq!(serde_json::to_vec(&m).unwrap(), serde_json::to_vec(&again).unwrap());

    let d0 = trial_data(&m, 0, &Sequential).unwrap();
    let d1 = trial_data(&m, 1, &Sequential).unwrap();
    assert_ne!(d0.split, d1.split);
    assert_ne!(d0.target.rows, d1.target.rows);
    assert_eq!(d0.source.rows, d1.source.rows);
    assert_eq!(d0.source.shape, (15, 8));

    let methods = [Method::Erm, Method::Uda, Method::Cluster(shadowda_core::baselines::ClusterMethod::Spectral)];
    let crit = [Criterion::EnsV, Criterion::InfoMax];
    let report = run_trials(&m, &methods, &crit, &Sequential).unwrap();
    let names: Vec<&str> = report.summaries.iter().map(|s| s.method.as_str()).collect();
    assert_eq!(names, ["erm", "uda-ensv", "uda-infomax", "spectral-ensv", "spectral-infomax"]);
    assert!(report.is_consistent());
    assert!(report.rows.iter().all(|r| (0.0..=1.0).contains(&r.f1_unseen) && r.unseen.len() == 8));
    let again = run_trials(&m, &methods, &crit, &Sequential).unwrap();
    assert_eq!(serde_json::to_vec(&report).unwrap(), serde_json::to_vec(&again).unwrap());
    let csv = prediction_grid_csv(&m, &report);
    assert_eq!(csv.lines().count(), 1 + report.rows.len() * 8);
    assert!(report.table().contains("uda-ensv"));

    // scoring a real choice with a sealed guard is refused
    let set = method_candidates(&m, &d0, Method::Erm, &Sequential).unwrap();
    let choice = &select_candidates(&set, &crit).unwrap()[0];
    let sealed = LeakageGuard::new();
    assert!(score_choice(&m, &set, choice, &sealed).unwrap_err().is_leakage());
    sealed.open_scoring();
    assert!(score_choice(&m, &set, choice, &sealed).is_ok());
}

#[test]
fn ghzw_shapes_differ_and_sepent_shapes_match() {
    let plan = TrialPlan { n_source: 4, n_target: 4, trials: 1, ..TrialPlan::default() };
    let mut task = TaskSpec::preset("ghzw-8slocc-16slocc").unwrap();
    task.shots_source = Some(20);
    task.shots_target = 20;
    let m = assemble_task(&task, &plan, &Sequential).unwrap();
    let d = trial_data(&m, 0, &Sequential).unwrap();
    assert_eq!(d.source.shape, (45, 5));
    assert_eq!(d.target.shape, (45, 13));

    let mut task = TaskSpec::preset("sepent-16x6fix-16x3random").unwrap();
    task.shots_source = Some(20);
    task.shots_target = 20;
    let m = assemble_task(&task, &plan, &Sequential).unwrap();
    assert_eq!(m.source_labels, vec![0, 0, 1, 1]);
    let d = trial_data(&m, 0, &Sequential).unwrap();
    assert_eq!(d.source.shape, d.target.shape);
}

#[test]
fn presets_resolve_and_unknown_ids_fail() {
    for id in TASK_IDS {
        let t = TaskSpec::preset(id).unwrap();
        assert_eq!(t.id, id);
    }
    assert!(matches!(TaskSpec::preset("cluster-raw-1e5"), Err(BenchError::UnknownTask(_))));
    let t = TaskSpec::preset("annni-qetu-1e4").unwrap();
    assert_eq!((t.shots_target, t.k(), t.classes()), (10_000, 4, 4));
    let TaskKind::Spin(s) = t.kind else { panic!() };
    assert_eq!((s.n, s.gap_est, s.excited), (15, 0.01, 40));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn report_aggregate_is_recomputable(vals in proptest::collection::vec(0.0f64..1.0, 1..12)) {
        let rows = vals.iter().enumerate().map(|(t, &v)| TrialRow {
            trial: t,
            method: "erm".into(),
            selected: Selected { hyper: None, tau: None, gamma: None, score: 0.0 },
            f1_unseen: v,
            unseen: vec![],
            predictions: vec![],
        }).collect();
        let r = TrialReport::from_rows("x", 0, rows);
        prop_assert!(r.is_consistent());
        let s = r.summary("erm").unwrap();
        prop_assert!(s.median >= vals.iter().cloned().fold(f64::INFINITY, f64::min));
        prop_assert!(s.median <= vals.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn split_partitions_any_size(n in 2usize..300, seed in any::<u64>(), t in 0usize..10) {
        let s = split_target(n, 0.5, seed, t);
        prop_assert_eq!(s.train.len() + s.unseen.len(), n);
        prop_assert!(s.train.iter().all(|i| !s.unseen.contains(i)));
    }
}
