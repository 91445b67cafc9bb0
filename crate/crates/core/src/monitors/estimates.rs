//! Maximum-principle audits. Stored bounds already include their tolerance, so a
//! point is violated exactly when its value lies beyond its bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::geometry::GeometrySample;
use crate::singularity::SingularityReport;

use super::region::region_track;
use super::{same_grid, spacing, BoundSource, MonitorPoint, MonitorSeries, MonitorSettings, Violation};

fn argmax_over(values: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    values.fold(None, |best, (j, v)| match best {
        Some((_, b)) if b >= v => best,
        _ => Some((j, v)),
    })
}

fn argmin_over(values: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    argmax_over(values.map(|(j, v)| (j, -v))).map(|(j, v)| (j, -v))
}

/// Pushes a point for snapshot `m` and flags `(m, node)` when `violated`.
fn record(
    s: &mut MonitorSeries,
    m: usize,
    t: f64,
    at: Option<(usize, f64)>,
    bound: Option<f64>,
    source: BoundSource,
    violated: bool,
) {
    if violated {
        let (node, value) = at.expect("a violation has a location");
        s.flag(Violation { snapshot: m, t, node, value, bound: bound.unwrap_or(f64::NAN) });
    }
    s.points.push(MonitorPoint { t, value: at.map(|a| a.1), bound, source, violated });
}

/// The height is non-decreasing along nodes that stay in `H < -c`, and its infimum over
/// the region is controlled by the region's parabolic boundary.
pub fn height_bound_samples(geos: &[GeometrySample], c: f64) -> Result<MonitorSeries> {
    let track = region_track(geos, c)?;
    let mut s = MonitorSeries::new("height_bound");
    let mut gamma_min = f64::INFINITY;
    for (m, g) in geos.iter().enumerate() {
        let slice = &track.slices[m];
        let prev = (m > 0 && same_grid(&geos[m - 1], g)).then(|| (&geos[m - 1], &track.slices[m - 1]));
        let dt = if m > 0 { g.t - geos[m - 1].t } else { 0.0 };
        let h = spacing(g);
        let tol = 10.0 * h * h + dt;
        for &j in &slice.gamma {
            gamma_min = gamma_min.min(g.y[j]);
        }
        for &j in &slice.omega_minus {
            if prev.map_or(true, |(_, ps)| !ps.contains(j)) {
                gamma_min = gamma_min.min(g.y[j]);
            }
        }
        let at = argmin_over(slice.omega_minus.iter().map(|&j| (j, g.y[j])));
        let bound = gamma_min.is_finite().then_some(gamma_min - tol);
        let mut violated = false;
        if let (Some((j, y)), Some(b)) = (at, bound) {
            if y < b {
                violated = true;
                s.flag(Violation { snapshot: m, t: g.t, node: j, value: y, bound: b });
            }
        }
        if let Some((pg, ps)) = prev {
            for &j in slice.omega_minus.iter().filter(|&&j| ps.contains(j)) {
                if g.y[j] < pg.y[j] - tol {
                    violated = true;
                    s.flag(Violation {
                        snapshot: m,
                        t: g.t,
                        node: j,
                        value: g.y[j],
                        bound: pg.y[j] - tol,
                    });
                }
            }
        }
        s.points.push(MonitorPoint {
            t: g.t,
            value: at.map(|a| a.1),
            bound,
            source: BoundSource::Boundary,
            violated,
        });
    }
    Ok(s)
}

pub fn monitor_height_bound(traj: &Trajectory, c: f64) -> Result<MonitorSeries> {
    height_bound_samples(&traj.geometries(), c)
}

fn yv_at(g: &GeometrySample) -> impl Iterator<Item = (usize, f64)> + '_ {
    (0..g.len()).map(|j| (j, g.y[j] * g.v[j]))
}

/// `max yv` against `(1 + tol_growth)` times its initial value.
pub fn yv_samples(geos: &[GeometrySample], tol_growth: f64) -> MonitorSeries {
    let mut s = MonitorSeries::new("yv");
    let Some(first) = geos.first() else { return s };
    let bound = (1.0 + tol_growth) * first.max_yv();
    for (m, g) in geos.iter().enumerate() {
        let at = argmax_over(yv_at(g));
        let violated = at.is_some_and(|a| a.1 > bound);
        record(&mut s, m, g.t, at, Some(bound), BoundSource::InitialData, violated);
    }
    s
}

pub fn monitor_yv(traj: &Trajectory, tol_growth: f64) -> MonitorSeries {
    yv_samples(&traj.geometries(), tol_growth)
}

/// `max k/p` over all nodes, and `max |k|/p` over nodes with `H >= 0` or `|H| <= c`.
///
/// The first is held to `max(1, initial max k/p)`. On the second set a negative `k`
/// satisfies `|k| <= p + c`, so `|k|/p <= 1 + c yv`; with `yv` held to its own bound
/// this gives `max(1, initial max k/p, 1 + c sup yv)`.
pub fn curvature_ratio_samples(
    geos: &[GeometrySample],
    c: f64,
    tol_growth: f64,
) -> Result<(MonitorSeries, MonitorSeries)> {
    if !(c > 0.0) {
        return Err(Error::Input(format!("curvature band c must be positive (got {c})")));
    }
    let mut kp = MonitorSeries::new("k_over_p");
    let mut abs_kp = MonitorSeries::new("abs_k_over_p");
    let Some(first) = geos.first() else { return Ok((kp, abs_kp)) };
    let slack = 1.0 + tol_growth;
    let initial = (0..first.len()).map(|j| first.k[j] / first.p[j]).fold(1.0, f64::max);
    let b1 = slack * initial;
    let b2 = b1.max(slack * (1.0 + c * slack * first.max_yv()));
    for (m, g) in geos.iter().enumerate() {
        let at = argmax_over((0..g.len()).map(|j| (j, g.k[j] / g.p[j])));
        let violated = at.is_some_and(|a| a.1 > b1);
        record(&mut kp, m, g.t, at, Some(b1), BoundSource::InitialData, violated);

        let band = (0..g.len())
            .filter(|&j| g.mean[j] >= 0.0 || g.mean[j].abs() <= c)
            .map(|j| (j, g.k[j].abs() / g.p[j]));
        let at = argmax_over(band);
        let violated = at.is_some_and(|a| a.1 > b2);
        record(&mut abs_kp, m, g.t, at, Some(b2), BoundSource::InitialData, violated);
    }
    Ok((kp, abs_kp))
}

pub fn monitor_curvature_ratios(
    traj: &Trajectory,
    c: f64,
    tol_growth: f64,
) -> Result<(MonitorSeries, MonitorSeries)> {
    curvature_ratio_samples(&traj.geometries(), c, tol_growth)
}

/// Weight `r / (lambda - mu r)`, `None` at or beyond its pole.
pub fn phi(r: f64, lambda: f64, mu: f64) -> Option<f64> {
    let d = lambda - mu * r;
    (d > 0.0).then(|| r / d)
}

/// `max |A|^2 phi(v^2)` over `H < -c`, and the floor series `min H`.
///
/// The first is held to the largest of its initial region maximum, its running
/// maximum over the region boundary, and `cap` (relative slack `tol_growth`). The
/// floor is held to `-sqrt(2 cap)`.
pub fn pinned_quantity_samples(
    geos: &[GeometrySample],
    settings: &MonitorSettings,
) -> Result<(MonitorSeries, MonitorSeries)> {
    settings.validate()?;
    let (lambda, mu) = (settings.lambda, settings.mu);
    let track = region_track(geos, settings.c)?;
    let mut gs = MonitorSeries::new("pinned_quantity");
    let mut floor = MonitorSeries::new("mean_curvature_floor");
    let floor_bound = -(2.0 * settings.cap).sqrt();
    let slack = 1.0 + settings.tol_growth;
    let (mut initial, mut boundary) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (m, g) in geos.iter().enumerate() {
        let at = argmin_over((0..g.len()).map(|j| (j, g.mean[j])));
        let violated = at.is_some_and(|a| a.1 < floor_bound);
        record(&mut floor, m, g.t, at, Some(floor_bound), BoundSource::Cap, violated);

        if gs.truncated {
            continue;
        }
        let weights: Vec<Option<f64>> = (0..g.len())
            .map(|j| phi(g.v[j] * g.v[j], lambda, mu).map(|w| g.a2[j] * w))
            .collect();
        if let Some(j) = weights.iter().position(Option::is_none) {
            gs.truncated = true;
            gs.notes.push(format!(
                "lambda - mu v^2 <= 0 at t = {} (node {j}, v^2 = {}); series truncated",
                g.t,
                g.v[j] * g.v[j]
            ));
            continue;
        }
        let val = |j: usize| weights[j].expect("checked above");
        let slice = &track.slices[m];
        let fresh = m == 0 || !same_grid(&geos[m - 1], g);
        for &j in &slice.gamma {
            boundary = boundary.max(val(j));
        }
        for &j in &slice.omega_minus {
            if m == 0 {
                initial = initial.max(val(j));
            } else if fresh || !track.slices[m - 1].contains(j) {
                boundary = boundary.max(val(j));
            }
        }
        let (bound, source) = [
            (initial, BoundSource::InitialData),
            (boundary, BoundSource::Boundary),
            (settings.cap, BoundSource::Cap),
        ]
        .into_iter()
        .fold((f64::NEG_INFINITY, BoundSource::Cap), |a, b| if b.0 > a.0 { b } else { a });
        let bound = slack * bound;
        let at = argmax_over(slice.omega_minus.iter().map(|&j| (j, val(j))));
        let violated = at.is_some_and(|a| a.1 > bound);
        record(&mut gs, m, g.t, at, Some(bound), source, violated);
    }
    Ok((gs, floor))
}

pub fn monitor_pinned_quantity(
    traj: &Trajectory,
    settings: &MonitorSettings,
) -> Result<(MonitorSeries, MonitorSeries)> {
    pinned_quantity_samples(&traj.geometries(), settings)
}

/// Space-time window of the `|q| / H` audit: snapshots with `t >= t_start` and nodes
/// with `x` in `[x[0], x[1]]`. A window side that reaches a domain end is treated as
/// a mirror plane rather than a lateral boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QhWindow {
    pub x: [f64; 2],
    pub t_start: f64,
}

impl QhWindow {
    /// The blow-up neighbourhood of an analysed singularity.
    pub fn from_report(report: &SingularityReport) -> Option<QhWindow> {
        report.neighborhood.map(|n| QhWindow { x: n.x, t_start: n.t[0] })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QOverHReport {
    pub window: QhWindow,
    pub series: MonitorSeries,
    /// Window nodes (summed over snapshots) with `H <= 0`.
    pub excluded_nodes: usize,
    /// Window nodes with `|A|^2 / H^2 > c0`.
    pub ratio_exceed_nodes: usize,
    /// `max |q| / p` over the window at its final snapshot.
    pub chain_constant: Option<f64>,
}

/// Interior maximum of `|q| / H` against the running maximum over the window's
/// parabolic boundary (its first time slice and its lateral edge nodes), with
/// tolerance `10 h^2`.
pub fn q_over_h_samples(
    geos: &[GeometrySample],
    window: &QhWindow,
    c0: f64,
) -> Result<QOverHReport> {
    let mut s = MonitorSeries::new("q_over_H");
    let (mut excluded, mut exceed) = (0usize, 0usize);
    let mut boundary = f64::NEG_INFINITY;
    let mut chain = None;
    let mut started = false;
    for (m, g) in geos.iter().enumerate().filter(|(_, g)| g.t >= window.t_start) {
        let nodes: Vec<usize> =
            (0..g.len()).filter(|&j| g.x[j] >= window.x[0] && g.x[j] <= window.x[1]).collect();
        let (Some(&lo), Some(&hi)) = (nodes.first(), nodes.last()) else { continue };
        chain = argmax_over(nodes.iter().map(|&j| (j, g.q[j].abs() / g.p[j]))).map(|a| a.1);
        let is_edge = |j: usize| (j == lo && lo > 0) || (j == hi && hi + 1 < g.len());
        let mut interior = vec![];
        for &j in &nodes {
            let h = g.mean[j];
            if h <= 0.0 {
                excluded += 1;
                continue;
            }
            if g.a2[j] / (h * h) > c0 {
                exceed += 1;
            }
            let f = g.q[j].abs() / h;
            if !started || is_edge(j) {
                boundary = boundary.max(f);
            } else {
                interior.push((j, f));
            }
        }
        if !boundary.is_finite() {
            continue;
        }
        started = true;
        let h = spacing(g);
        let bound = boundary + 10.0 * h * h;
        let at = argmax_over(interior.into_iter());
        let violated = at.is_some_and(|a| a.1 > bound);
        record(&mut s, m, g.t, at, Some(bound), BoundSource::Boundary, violated);
    }
    if !started {
        return Err(Error::NotApplicable(
            "no window node with H > 0; |q|/H audit skipped".into(),
        ));
    }
    if excluded > 0 {
        s.notes.push(format!("{excluded} window nodes with H <= 0 excluded"));
    }
    if exceed > 0 {
        s.notes.push(format!("{exceed} window nodes exceed |A|^2/H^2 <= {c0}"));
    }
    Ok(QOverHReport {
        window: *window,
        series: s,
        excluded_nodes: excluded,
        ratio_exceed_nodes: exceed,
        chain_constant: chain,
    })
}

pub fn monitor_q_over_h(traj: &Trajectory, window: &QhWindow, c0: f64) -> Result<QOverHReport> {
    q_over_h_samples(&traj.geometries(), window, c0)
}
