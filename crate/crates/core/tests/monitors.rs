mod common;

use axiflow::io::{read_trajectory, write_trajectory};
use axiflow::monitors::{region_negative_h, MonitorSettings, MonitorSuite, QhWindow};
use axiflow::singularity::{analyze, AnalysisSettings};
use axiflow::{Scheme, Trajectory};
use common::{bulge_interval, inject_all, run, BULGE, NECK};

fn analysed(traj: &Trajectory) -> (MonitorSuite, QhWindow) {
    let report = analyze(traj, &AnalysisSettings::default()).unwrap();
    let window = QhWindow::from_report(&report).expect("a pinch has a neighbourhood");
    let suite = MonitorSuite::run(traj, &MonitorSettings::default(), Some(&report)).unwrap();
    (suite, window)
}

#[test]
fn bulge_run_is_clean_and_injections_are_caught_once() {
    let traj = run(&BULGE, bulge_interval(), 101, Scheme::SemiImplicit, Some(1e-2));
    let mut geos = traj.geometries();
    let settings = MonitorSettings::default();
    assert!(!region_negative_h(&geos[0], settings.c).unwrap().is_empty());
    let (suite, window) = analysed(&traj);
    for s in &suite.series {
        assert!(s.passed(), "{}: {:?}", s.name, s.violations.first());
    }
    let found = inject_all(&mut geos, &settings, &window);
    let names: Vec<&str> = found.iter().map(|i| i.monitor).collect();
    for name in ["height_bound", "pinned_quantity", "yv", "k_over_p", "abs_k_over_p", "mean_curvature_floor"] {
        assert!(names.contains(&name), "no injection site for {name}");
    }
    for inj in &found {
        assert!(inj.detected_once(), "{inj:?}");
    }
}

#[test]
fn neck_run_is_clean_and_q_over_h_injection_is_caught_once() {
    let traj = run(&NECK, (0.0, 1.0), 101, Scheme::SemiImplicit, Some(1e-2));
    let (suite, window) = analysed(&traj);
    assert!(suite.passed(), "{:?}", suite.verdict());
    let qh = suite.q_over_h.as_ref().expect("neck window has H > 0");
    assert!(qh.series.points.len() > 1);
    let found = inject_all(&mut traj.geometries(), &MonitorSettings::default(), &window);
    let qh = found.iter().find(|i| i.monitor == "q_over_H").expect("interior window node");
    assert!(qh.detected_once(), "{qh:?}");
    assert!(found.iter().all(|i| i.detected_once()));
}

#[test]
fn neck_becomes_cylindrical() {
    let traj = run(&NECK, (0.0, 1.0), 101, Scheme::SemiImplicit, Some(1e-2));
    let ratio = |m: usize| {
        let g = traj.geometry(m);
        let j = traj.snapshots[m].argmin_rho();
        (g.k[j] / g.p[j]).abs()
    };
    // k = 0 on a shrinking cylinder; the approach is only logarithmic in T - t
    let (first, last) = (ratio(0), ratio(traj.len() - 1));
    assert!((first - 0.4 * std::f64::consts::PI.powi(2) / 5.0).abs() < 1e-3);
    assert!(last < 0.25 * first, "k/p went from {first} to {last}");
}

#[test]
fn monitors_are_reproducible_from_serialized_snapshots() {
    let traj = run(&BULGE, bulge_interval(), 41, Scheme::SemiImplicit, Some(1e-2));
    let dir = tempfile::tempdir().unwrap();
    write_trajectory(dir.path(), &traj).unwrap();
    let back = read_trajectory(dir.path()).unwrap();
    let settings = MonitorSettings::default();
    let report = analyze(&traj, &AnalysisSettings::default()).unwrap();
    let a = MonitorSuite::run(&traj, &settings, Some(&report)).unwrap();
    let b = MonitorSuite::run(&back, &settings, Some(&report)).unwrap();
    assert_eq!(a.series, b.series);
    assert_eq!(a.verdict(), b.verdict());
}
