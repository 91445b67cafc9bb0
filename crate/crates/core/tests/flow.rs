mod common;

use std::f64::consts::PI;

use axiflow::{
    derivatives, evolve, geometry_sample, laplace_beltrami, make_grid, preset_profile, resample, rhs,
    step, Event, FlowState, PresetSpec, Scheme, StepControls, StepOutcome,
};
use common::{barrier_excess, bulge_interval, run, BULGE, NECK};

fn neck_error_after_resample(n: usize) -> (f64, f64) {
    let coarse = preset_profile(&NECK, &make_grid(0.0, 1.0, n).unwrap()).unwrap();
    let fine = resample(&coarse, 4 * (n - 1) + 1).unwrap();
    let err = fine
        .grid()
        .nodes()
        .iter()
        .zip(fine.rho())
        .map(|(&x, &r)| (r - (0.6 + 0.4 * (PI * x).cos())).abs())
        .fold(0.0, f64::max);
    (coarse.grid().h(), err)
}

#[test]
fn resampling_is_fourth_order() {
    let (h1, e1) = neck_error_after_resample(101);
    let (h2, e2) = neck_error_after_resample(201);
    let c = e1 / h1.powi(4);
    println!("resample constant C = {c:.4} (h = {h1}), {:.4} (h = {h2})", e2 / h2.powi(4));
    // cubic interpolation error is at most h^4 |rho''''| / 24 with |rho''''| <= 0.4 pi^4
    assert!(c <= 0.4 * PI.powi(4) / 24.0);
    let order = (e1 / e2).ln() / (h1 / h2).ln();
    assert!((order - 4.0).abs() < 0.3, "order {order}");
}

#[test]
fn catenoid_stencils() {
    let s = preset_profile(&PresetSpec::Catenoid { c: 1.0 }, &make_grid(-1.0, 1.0, 1001).unwrap()).unwrap();
    let (_, ddr) = derivatives(&s);
    let err = s.grid().nodes().iter().zip(&ddr).map(|(x, d)| (d - x.cosh()).abs()).fold(0.0, f64::max);
    assert!(err <= 5e-6, "ddr error {err}");
    let lap = laplace_beltrami(&s, s.rho()).unwrap();
    let res = lap.iter().zip(s.rho()).map(|(l, y)| (l - 1.0 / y).abs()).fold(0.0, f64::max);
    assert!(res <= 1e-4, "Laplace-Beltrami residual {res}");
    let g = geometry_sample(&s).unwrap();
    assert!(g.mean.iter().all(|h| h.abs() <= 1e-4));
}

#[test]
fn rhs_at_the_neck_node() {
    let s = preset_profile(&NECK, &make_grid(0.0, 1.0, 401).unwrap()).unwrap();
    let r = rhs(&s).unwrap();
    let exact = 0.4 * PI * PI - 5.0;
    // second-order stencil: error about h^2 |rho''''| / 12
    let h = s.grid().h();
    assert!((r[400] - exact).abs() <= h * h * 0.4 * PI.powi(4) / 12.0 * 1.1);
}

#[test]
fn cylinder_curvature_and_extinction() {
    let s0 = preset_profile(&PresetSpec::Cylinder { r: 1.0 }, &make_grid(0.0, 1.0, 101).unwrap()).unwrap();
    let short = evolve(s0.clone(), &StepControls { t_max: 0.4, ..Default::default() }).unwrap();
    assert!(short.pinch().is_none());
    let g = geometry_sample(short.final_state()).unwrap();
    let t = short.final_state().t();
    assert!((t - 0.4).abs() < 1e-12);
    assert!((g.max_a2() / 5.0 - 1.0).abs() < 1e-3, "max|A|^2 = {}", g.max_a2());

    let full = evolve(s0, &StepControls { t_max: 1.0, ..Default::default() }).unwrap();
    let (tp, _) = full.pinch().expect("cylinder pinches");
    assert!((tp - 0.5).abs() < 1e-3);
    assert!(full.events.iter().any(|e| matches!(e, Event::PinchDetected { .. })));
}

#[test]
fn neck_pinches_inside_the_enclosing_cylinder() {
    let traj = run(&NECK, (0.0, 1.0), 101, Scheme::SemiImplicit, Some(1e-2));
    let (t, _) = traj.pinch().expect("neck pinches");
    // enclosing cylinder of radius max rho_0 = 1 vanishes at t = 1/2; the
    // weaker (max rho_0 + 1)^2 / 2 = 2 is the stated barrier time
    assert!(t < 2.0 && t < 0.5);
}

#[test]
fn barrier_holds_on_neumann_runs() {
    for (spec, interval, scheme) in [
        (PresetSpec::Cylinder { r: 1.0 }, (0.0, 1.0), Scheme::SemiImplicit),
        (NECK, (0.0, 1.0), Scheme::SemiImplicit),
        (NECK, (0.0, 1.0), Scheme::ExplicitRk2),
        (BULGE, bulge_interval(), Scheme::SemiImplicit),
    ] {
        let traj = run(&spec, interval, 61, scheme, Some(1e-2));
        let excess = barrier_excess(&traj, 1e-6, 1e-6);
        assert!(excess <= 0.0, "{spec:?} {scheme}: excess {excess}");
    }
}

#[test]
fn accepted_states_avoid_the_axis_and_keep_neumann_ends() {
    let traj = run(&NECK, (0.0, 1.0), 81, Scheme::SemiImplicit, Some(1e-2));
    let stop = traj.controls.resolved_rho_stop(&traj.snapshots[0]);
    let last = traj.len() - 1;
    for (m, s) in traj.snapshots.iter().enumerate() {
        if m < last {
            assert!(s.min_rho() > stop);
        }
        let (dr, _) = derivatives(s);
        assert_eq!((dr[0], dr[s.len() - 1]), (0.0, 0.0));
    }
}

/// `rho` after stepping from `s0` to `t_end` with a fixed step.
fn march(s0: &FlowState, scheme: Scheme, dt: f64, t_end: f64) -> FlowState {
    let controls = StepControls { scheme, ..Default::default() };
    let steps = (t_end / dt).round() as usize;
    let mut s = s0.clone();
    for _ in 0..steps {
        s = match step(&s, dt, &controls, 1e-9).unwrap() {
            StepOutcome::Advanced(next) => next,
            StepOutcome::Pinch { .. } => panic!("unexpected pinch"),
        };
    }
    s
}

fn sup_diff(a: &FlowState, b: &FlowState) -> f64 {
    a.rho().iter().zip(b.rho()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn time_stepping_orders() {
    let cyl = preset_profile(&PresetSpec::Cylinder { r: 1.0 }, &make_grid(0.0, 1.0, 11).unwrap()).unwrap();
    let exact = 0.5f64.sqrt();
    let errs: Vec<f64> = [0.01, 0.005, 0.0025]
        .iter()
        .map(|&dt| (march(&cyl, Scheme::ExplicitRk2, dt, 0.25).rho()[5] - exact).abs())
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "rk2 order {order}");
    }
    // the reaction sub-step is exact and a cylinder has no diffusion
    let si = march(&cyl, Scheme::SemiImplicit, 0.01, 0.25);
    assert!((si.rho()[5] - exact).abs() < 1e-12);

    // splitting error on a non-trivial profile, against a much finer step
    let neck = preset_profile(&NECK, &make_grid(0.0, 1.0, 41).unwrap()).unwrap();
    let reference = march(&neck, Scheme::SemiImplicit, 1e-3 / 256.0, 0.02);
    let errs: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
        .iter()
        .map(|&dt| sup_diff(&march(&neck, Scheme::SemiImplicit, dt, 0.02), &reference))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 1.0).abs() < 0.25, "semi-implicit order {order}");
    }
}

#[test]
fn catenoid_is_stationary() {
    let s0 = preset_profile(&PresetSpec::Catenoid { c: 1.0 }, &make_grid(-1.0, 1.0, 201).unwrap()).unwrap();
    let traj = evolve(s0.clone(), &StepControls { t_max: 0.1, ..Default::default() }).unwrap();
    let h = s0.grid().h();
    let moved = sup_diff(traj.final_state(), &s0);
    assert!(moved <= 10.0 * h * h * 0.1, "moved {moved}");
}
