//! Shared runs, oracles and fault injection for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use axiflow::monitors::{
    curvature_ratio_samples, height_bound_samples, pinned_quantity_samples, q_over_h_samples,
    region_track, yv_samples, MonitorSeries, MonitorSettings, QhWindow,
};
use axiflow::{evolve, make_grid, preset_profile, GeometrySample, PresetSpec, Scheme, StepControls, Trajectory};

pub const NECK: PresetSpec = PresetSpec::CosineNeck { m: 0.6, amplitude: 0.4, w: 1 };
/// Cosine profile whose waist sits at a Neumann end where `H = -1/2`.
pub const BULGE: PresetSpec = PresetSpec::CosineNeck { m: 1.5, amplitude: 0.5, w: 1 };

pub fn bulge_interval() -> (f64, f64) {
    (0.0, PI / 3f64.sqrt())
}

/// Evolves `spec` on `[a, b]` with `n` nodes to the pinch; `stop` is the pinch
/// threshold as a fraction of the initial minimum radius.
pub fn run(spec: &PresetSpec, (a, b): (f64, f64), n: usize, scheme: Scheme, stop: Option<f64>) -> Trajectory {
    let s0 = preset_profile(spec, &make_grid(a, b, n).unwrap()).unwrap();
    let controls = StepControls {
        scheme,
        rho_stop: stop.map(|f| f * s0.min_rho()),
        snapshot_stride: 20,
        ..Default::default()
    };
    evolve(s0, &controls).unwrap()
}

/// Largest excess of `max rho(t)` over the shrinking enclosing cylinder
/// `sqrt((max rho_0 + eps)^2 - 2t)` plus `tol + 10 h^2`; negative when the barrier holds.
pub fn barrier_excess(traj: &Trajectory, eps: f64, tol: f64) -> f64 {
    let r0 = traj.snapshots[0].rho().iter().copied().fold(f64::NEG_INFINITY, f64::max) + eps;
    traj.snapshots
        .iter()
        .map(|s| {
            let h = s.grid().h();
            let top = s.rho().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let radius = (r0 * r0 - 2.0 * s.t()).max(0.0).sqrt();
            top - (radius + tol + 10.0 * h * h)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Flagged `(snapshot, node)` pairs of a series.
pub fn flags(s: &MonitorSeries) -> Vec<(usize, usize)> {
    s.violations.iter().map(|v| (v.snapshot, v.node)).collect()
}

/// Outcome of one injected fault: where it was placed and what the monitor flagged.
#[derive(Debug)]
pub struct Injection {
    pub monitor: &'static str,
    pub at: (usize, usize),
    pub flagged: Vec<(usize, usize)>,
}

impl Injection {
    pub fn detected_once(&self) -> bool {
        self.flagged == vec![self.at]
    }
}

/// Nodes that are in `H < -c` at snapshot `m` and `m - 1` on an unchanged grid and are
/// not on the region boundary.
fn persistent_region_node(geos: &[GeometrySample], c: f64) -> Option<(usize, usize)> {
    let track = region_track(geos, c).unwrap();
    (1..geos.len()).rev().find_map(|m| {
        if geos[m].x != geos[m - 1].x {
            return None;
        }
        let (now, before) = (&track.slices[m], &track.slices[m - 1]);
        now.omega_minus
            .iter()
            .copied()
            .find(|&j| before.contains(j) && !now.gamma.contains(&j))
            .map(|j| (m, j))
    })
}

type Field = fn(&mut GeometrySample) -> &mut Vec<f64>;

/// Runs `check` with `field[j]` of snapshot `m` replaced by `value`, then restores it.
fn with_fault<R>(
    geos: &mut [GeometrySample],
    (m, j): (usize, usize),
    field: Field,
    value: f64,
    check: impl FnOnce(&[GeometrySample]) -> R,
) -> R {
    let old = std::mem::replace(&mut field(&mut geos[m])[j], value);
    let r = check(geos);
    field(&mut geos[m])[j] = old;
    r
}

/// Corrupts one value of a clean run per monitor and reruns that monitor on the
/// corrupted samples. `geos` must pass every monitor and is restored afterwards;
/// `window` is the `|q|/H` window.
pub fn inject_all(geos: &mut [GeometrySample], settings: &MonitorSettings, window: &QhWindow) -> Vec<Injection> {
    let c = settings.c;
    let mut out = vec![];
    let mut push = |monitor, at, flagged| out.push(Injection { monitor, at, flagged });
    let mid = geos.len() / 2;
    let j_mid = geos[mid].len() / 2;

    if let Some(at @ (m, j)) = persistent_region_node(geos, c) {
        let y = 0.5 * geos[m].y[j];
        let f = with_fault(geos, at, |g| &mut g.y, y, |g| flags(&height_bound_samples(g, c).unwrap()));
        push("height_bound", at, f);
        let a2 = 1e6 * settings.cap;
        let f = with_fault(geos, at, |g| &mut g.a2, a2, |g| flags(&pinned_quantity_samples(g, settings).unwrap().0));
        push("pinned_quantity", at, f);
    }

    let at = (mid, j_mid);
    let v = 10.0 * geos[0].max_yv() / geos[mid].y[j_mid];
    let f = with_fault(geos, at, |g| &mut g.v, v, |g| flags(&yv_samples(g, settings.tol_growth)));
    push("yv", at, f);

    let k = 1e3 * geos[mid].p[j_mid];
    let f = with_fault(geos, at, |g| &mut g.k, k, |g| {
        flags(&curvature_ratio_samples(g, c, settings.tol_growth).unwrap().0)
    });
    push("k_over_p", at, f);

    // negative k keeps k/p quiet; the node must stay in the |H| band
    let j = (0..geos[mid].len()).find(|&j| geos[mid].mean[j] >= 0.0).unwrap();
    let k = -1e3 * geos[mid].p[j];
    let f = with_fault(geos, (mid, j), |g| &mut g.k, k, |g| {
        flags(&curvature_ratio_samples(g, c, settings.tol_growth).unwrap().1)
    });
    push("abs_k_over_p", (mid, j), f);

    let h = -10.0 * (2.0 * settings.cap).sqrt();
    let f = with_fault(geos, at, |g| &mut g.mean, h, |g| flags(&pinned_quantity_samples(g, settings).unwrap().1));
    push("mean_curvature_floor", at, f);

    // an interior window node with H > 0, after the first window slice
    let slices: Vec<usize> = (0..geos.len()).filter(|&m| geos[m].t >= window.t_start).collect();
    if let Some(&m) = slices.get(slices.len() / 2).filter(|&&m| m != slices[0]) {
        let g = &geos[m];
        let nodes: Vec<usize> =
            (0..g.len()).filter(|&j| g.x[j] >= window.x[0] && g.x[j] <= window.x[1]).collect();
        if let Some(&j) = nodes[1..nodes.len() - 1].iter().find(|&&j| g.mean[j] > 0.0) {
            let q = 1e3 * g.mean[j];
            let f = with_fault(geos, (m, j), |g| &mut g.q, q, |g| {
                flags(&q_over_h_samples(g, window, settings.c0).unwrap().series)
            });
            push("q_over_H", (m, j), f);
        }
    }
    out
}
