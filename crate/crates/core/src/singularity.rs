//! Blow-up analysis of a pinching trajectory.
//!
//! Under a type I blow-up `u(t) = 1 / max|A|^2` is asymptotically affine in `t`, so the
//! extinction time is the root of a line fitted to `u`, and `(T - t) max|A|^2` stays
//! bounded. Parabolic rescaling about the point of maximal curvature then compares the
//! profile with the unit cylinder and with catenoids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::geometry::geometry_sample;
use crate::grid::{make_grid, EndCondition, FlowState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    /// Fraction of snapshots, counted from the end, used by the first extinction fit.
    pub fit_fraction: f64,
    /// Fits with weighted `R^2` below this are flagged as non-linear.
    pub min_r_squared: f64,
    pub rate_cap: f64,
    pub rate_tail_band: [f64; 2],
    pub i_max: usize,
    /// Half-width `W` of rescaled windows.
    pub window: f64,
    /// Half-width used for cylinder comparisons.
    pub compare_window: f64,
    /// Half-width of the blow-up neighbourhood as a fraction of `b - a`.
    pub neighborhood_fraction: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            fit_fraction: 0.3,
            min_r_squared: 0.99,
            rate_cap: 50.0,
            rate_tail_band: [0.1, 10.0],
            i_max: 40,
            window: 4.0,
            compare_window: 2.0,
            neighborhood_fraction: 0.1,
        }
    }
}

impl AnalysisSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.fit_fraction > 0.0 && self.fit_fraction <= 1.0) {
            return Err(Error::Config("fit_fraction must lie in (0, 1]".into()));
        }
        let [lo, hi] = self.rate_tail_band;
        if !(0.0 < lo && lo < hi) {
            return Err(Error::Config("rate tail band must satisfy 0 < lo < hi".into()));
        }
        if !(self.rate_cap > 0.0) {
            return Err(Error::Config("rate_cap must be positive".into()));
        }
        if !(self.window > 0.0 && self.compare_window > 0.0) {
            return Err(Error::Config("rescaling windows must be positive".into()));
        }
        if !(self.neighborhood_fraction > 0.0 && self.neighborhood_fraction <= 1.0) {
            return Err(Error::Config("neighborhood_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-snapshot `max|A|^2` and where it is attained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSeries {
    pub t: Vec<f64>,
    pub max_a2: Vec<f64>,
    pub x_max: Vec<f64>,
}

pub fn curvature_series(traj: &Trajectory) -> CurvatureSeries {
    let mut s = CurvatureSeries { t: vec![], max_a2: vec![], x_max: vec![] };
    for state in &traj.snapshots {
        let g = geometry_sample(state).expect("recorded snapshots have positive radii");
        let j = g.argmax_a2();
        s.t.push(state.t());
        s.max_a2.push(g.a2[j]);
        s.x_max.push(g.x[j]);
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionFit {
    pub t_est: f64,
    pub uncertainty: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Weighted coefficient of determination.
    pub r_squared: f64,
    pub linear: bool,
    pub t_window: [f64; 2],
    pub points: usize,
}

/// Ratio of the largest to the smallest `T - t` in the tail window.
pub const TAIL_DECADE: f64 = 10.0;

/// Extinction time from a line fitted to `u = 1 / max|A|^2` over the final snapshots.
pub fn estimate_extinction(traj: &Trajectory, settings: &AnalysisSettings) -> Result<ExtinctionFit> {
    if traj.pinch().is_none() {
        return Err(Error::NotApplicable("trajectory ended without a pinch".into()));
    }
    let series = curvature_series(traj);
    let u: Vec<f64> = series.max_a2.iter().map(|a| 1.0 / a).collect();
    refine_extinction(&series.t, &u, fit_extinction(&series.t, &u, settings)?, settings)
}

/// Refits on the trailing decade `T - t <= TAIL_DECADE (T - t_last)` of the current
/// root until the root is stable. The fraction window reaches back into times where `u`
/// still carries slow corrections, and a root biased by a multiple of `T - t_last`
/// would dominate the tail rate; the decade window has a resolution independent extent.
pub fn refine_extinction(
    t: &[f64],
    u: &[f64],
    mut fit: ExtinctionFit,
    settings: &AnalysisSettings,
) -> Result<ExtinctionFit> {
    let last = t[t.len() - 1];
    for _ in 0..20 {
        if !(fit.t_est > last) {
            break;
        }
        let reach = TAIL_DECADE * (fit.t_est - last);
        let m = t.iter().filter(|&&s| fit.t_est - s <= reach).count().max(3);
        let next = fit_trailing(t, u, m, settings)?;
        if next.t_est == fit.t_est {
            break;
        }
        fit = next;
    }
    Ok(fit)
}

/// Weighted least-squares line through `(t, u)` on the trailing `fit_fraction` of
/// points. Weights `1 / u^2` measure residuals relative to `u`, so points close to the
/// singular time are not swamped by early, large values.
pub fn fit_extinction(t: &[f64], u: &[f64], settings: &AnalysisSettings) -> Result<ExtinctionFit> {
    let n = t.len();
    fit_trailing(t, u, ((settings.fit_fraction * n as f64).ceil() as usize).clamp(3.min(n), n), settings)
}

fn fit_trailing(t: &[f64], u: &[f64], m: usize, settings: &AnalysisSettings) -> Result<ExtinctionFit> {
    let n = t.len();
    if m < 3 {
        return Err(Error::InsufficientResolution(format!(
            "extinction fit needs at least 3 snapshots (have {n})"
        )));
    }
    let (ts, us) = (&t[n - m..], &u[n - m..]);
    let w: Vec<f64> = us.iter().map(|u| 1.0 / (u * u)).collect();
    let sw: f64 = w.iter().sum();
    let tm = w.iter().zip(ts).map(|(w, t)| w * t).sum::<f64>() / sw;
    let um = w.iter().zip(us).map(|(w, u)| w * u).sum::<f64>() / sw;
    let (mut stt, mut stu, mut suu) = (0.0, 0.0, 0.0);
    for i in 0..m {
        let (dt, du) = (ts[i] - tm, us[i] - um);
        stt += w[i] * dt * dt;
        stu += w[i] * dt * du;
        suu += w[i] * du * du;
    }
    if stt == 0.0 {
        return Err(Error::InsufficientResolution("fit window has a single time".into()));
    }
    let slope = stu / stt;
    let intercept = um - slope * tm;
    if !(slope < 0.0) {
        return Err(Error::NotApplicable(format!(
            "1/max|A|^2 is not decreasing over the fit window (slope {slope})"
        )));
    }
    let sse: f64 = (0..m)
        .map(|i| w[i] * (us[i] - intercept - slope * ts[i]).powi(2))
        .sum();
    let r_squared = if suu > 0.0 { 1.0 - sse / suu } else { 1.0 };
    let t_est = -intercept / slope;
    // delta-method standard error of the root
    let s2 = if m > 2 { sse / (m - 2) as f64 } else { 0.0 };
    let var_slope = s2 / stt;
    let var_icpt = s2 * (1.0 / sw + tm * tm / stt);
    let cov = -s2 * tm / stt;
    let (d_icpt, d_slope) = (-1.0 / slope, intercept / (slope * slope));
    let var_t = d_icpt * d_icpt * var_icpt + d_slope * d_slope * var_slope
        + 2.0 * d_icpt * d_slope * cov;
    Ok(ExtinctionFit {
        t_est,
        uncertainty: var_t.max(0.0).sqrt(),
        slope,
        intercept,
        r_squared,
        linear: r_squared >= settings.min_r_squared,
        t_window: [ts[0], ts[m - 1]],
        points: m,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TypeI,
    TypeII,
    NoSingularity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescalingPoint {
    pub t: f64,
    pub x: f64,
    pub alpha: f64,
    /// Index of the snapshot at `t`.
    pub snapshot: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub x: [f64; 2],
    pub t: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub verdict: Verdict,
    pub fit: Option<ExtinctionFit>,
    pub x_star: Option<f64>,
    pub rate_constant: Option<f64>,
    pub rate_tail: Option<f64>,
    pub rescaling: Vec<RescalingPoint>,
    pub neighborhood: Option<Neighborhood>,
    /// `max |A|^2 / H^2` over the neighbourhood where `H > 0`.
    pub ratio_bound: Option<f64>,
    /// `max |H|` over the neighbourhood.
    pub max_abs_mean: Option<f64>,
    /// Neighbourhood nodes with `H <= 0`, excluded from `ratio_bound`.
    pub excluded_nodes: usize,
    pub rate_cap: f64,
    pub rate_tail_band: [f64; 2],
    pub notes: Vec<String>,
}

impl SingularityReport {
    fn empty(verdict: Verdict, settings: &AnalysisSettings) -> Self {
        SingularityReport {
            verdict,
            fit: None,
            x_star: None,
            rate_constant: None,
            rate_tail: None,
            rescaling: vec![],
            neighborhood: None,
            ratio_bound: None,
            max_abs_mean: None,
            excluded_nodes: 0,
            rate_cap: settings.rate_cap,
            rate_tail_band: settings.rate_tail_band,
            notes: vec![],
        }
    }
}

/// `(sup, tail sup)` of `(T - t) max|A|^2` over samples before `t_est`; the tail is the
/// last decade of `T - t`.
pub fn rate_constants(t: &[f64], max_a2: &[f64], t_est: f64) -> Option<(f64, f64)> {
    let pairs: Vec<(f64, f64)> = t
        .iter()
        .zip(max_a2)
        .filter(|(t, _)| **t < t_est)
        .map(|(t, a)| (t_est - t, (t_est - t) * a))
        .collect();
    let d_last = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    if !d_last.is_finite() {
        return None;
    }
    let all = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let tail = pairs
        .iter()
        .filter(|p| p.0 <= TAIL_DECADE * d_last)
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    Some((all, tail))
}

pub fn verdict_for(rate_constant: f64, rate_tail: f64, settings: &AnalysisSettings) -> Verdict {
    let [lo, hi] = settings.rate_tail_band;
    if rate_constant <= settings.rate_cap && (lo..=hi).contains(&rate_tail) {
        Verdict::TypeI
    } else {
        Verdict::TypeII
    }
}

pub fn classify(
    traj: &Trajectory,
    fit: &ExtinctionFit,
    settings: &AnalysisSettings,
) -> SingularityReport {
    let series = curvature_series(traj);
    let mut report = SingularityReport::empty(Verdict::TypeII, settings);
    report.fit = Some(fit.clone());
    if !fit.linear {
        report.notes.push(format!(
            "1/max|A|^2 is poorly fitted by a line (weighted R^2 = {:.4})",
            fit.r_squared
        ));
    }
    match rate_constants(&series.t, &series.max_a2, fit.t_est) {
        Some((all, tail)) => {
            report.rate_constant = Some(all);
            report.rate_tail = Some(tail);
            report.verdict = verdict_for(all, tail, settings);
        }
        None => report
            .notes
            .push("no snapshot precedes the estimated extinction time".into()),
    }
    let last = traj.len() - 1;
    let x_star = series.x_max[last];
    report.x_star = Some(x_star);

    let final_grid = traj.final_state().grid();
    let half = settings.neighborhood_fraction * (final_grid.b() - final_grid.a());
    let t_lo = schedule_start(traj.snapshots[0].t(), fit.t_est);
    let hood = Neighborhood {
        x: [(x_star - half).max(final_grid.a()), (x_star + half).min(final_grid.b())],
        t: [t_lo, traj.final_state().t()],
    };
    let (mut ratio, mut max_h, mut excluded) = (f64::NEG_INFINITY, 0.0f64, 0usize);
    for state in traj.snapshots.iter().filter(|s| s.t() >= t_lo) {
        let g = geometry_sample(state).expect("recorded snapshots have positive radii");
        for j in 0..g.len() {
            if g.x[j] < hood.x[0] || g.x[j] > hood.x[1] {
                continue;
            }
            max_h = max_h.max(g.mean[j].abs());
            if g.mean[j] > 0.0 {
                ratio = ratio.max(g.a2[j] / (g.mean[j] * g.mean[j]));
            } else {
                excluded += 1;
            }
        }
    }
    report.neighborhood = Some(hood);
    report.ratio_bound = ratio.is_finite().then_some(ratio);
    report.max_abs_mean = Some(max_h);
    report.excluded_nodes = excluded;
    match rescaling_sequence(traj, fit.t_est, settings.i_max) {
        Ok(points) => report.rescaling = points,
        Err(e) => report.notes.push(e.to_string()),
    }
    report
}

/// Full analysis: fit, classification and rescaling, or a no-singularity report.
pub fn analyze(traj: &Trajectory, settings: &AnalysisSettings) -> Result<SingularityReport> {
    settings.validate()?;
    match estimate_extinction(traj, settings) {
        Ok(fit) => Ok(classify(traj, &fit, settings)),
        Err(Error::NotApplicable(msg)) if traj.pinch().is_none() => {
            let mut r = SingularityReport::empty(Verdict::NoSingularity, settings);
            r.notes.push(msg);
            Ok(r)
        }
        Err(e) => Err(e),
    }
}

/// First scheduled rescaling time: start of the last third of `[t0, t_est]`.
fn schedule_start(t0: f64, t_est: f64) -> f64 {
    t_est - (t_est - t0) / 3.0
}

/// Rescaling points at `t_i <= T - (T - t0) / (3 * 2^i)` with `alpha_i` the running
/// maximum of `|A|` up to `t_i`.
pub fn rescaling_sequence(
    traj: &Trajectory,
    t_est: f64,
    i_max: usize,
) -> Result<Vec<RescalingPoint>> {
    let series = curvature_series(traj);
    let t0 = series.t[0];
    let t_last = *series.t.last().expect("non-empty trajectory");
    let mut points: Vec<RescalingPoint> = Vec::new();
    for i in 0..=i_max {
        let target = t_est - (t_est - t0) / (3.0 * 2f64.powi(i as i32));
        if target > t_last {
            break;
        }
        let Some(idx) = series.t.iter().rposition(|&t| t <= target) else {
            continue;
        };
        if points.last().is_some_and(|p| p.snapshot == idx) {
            continue;
        }
        let best = (0..=idx)
            .max_by(|&a, &b| series.max_a2[a].total_cmp(&series.max_a2[b]))
            .expect("non-empty prefix");
        points.push(RescalingPoint {
            t: series.t[idx],
            x: series.x_max[best],
            alpha: series.max_a2[best].sqrt(),
            snapshot: idx,
        });
    }
    if points.len() < 3 {
        return Err(Error::InsufficientResolution(format!(
            "only {} distinct rescaling points before the last snapshot",
            points.len()
        )));
    }
    Ok(points)
}

/// Profile of the dilation `x~ = alpha (x - center)`, `rho~ = alpha rho`, restricted to
/// `|x~| <= half_width`, with time relabelled to zero.
pub fn rescale_profile(
    state: &FlowState,
    center: f64,
    alpha: f64,
    half_width: f64,
) -> Result<FlowState> {
    let grid = state.grid();
    if !(alpha > 0.0) {
        return Err(Error::Input(format!("scale must be positive (got {alpha})")));
    }
    if !(grid.a() <= center && center <= grid.b()) {
        return Err(Error::Input(format!(
            "center {center} lies outside [{}, {}]",
            grid.a(),
            grid.b()
        )));
    }
    let reach = half_width * (1.0 + 1e-12);
    let inside: Vec<usize> = (0..grid.n())
        .filter(|&j| (alpha * (grid.x(j) - center)).abs() <= reach)
        .collect();
    let (Some(&lo), Some(&hi)) = (inside.first(), inside.last()) else {
        return Err(Error::Input("rescaled window contains no nodes".into()));
    };
    if hi - lo + 1 < crate::grid::MIN_NODES {
        return Err(Error::Input(format!(
            "rescaled window holds {} nodes; at least {} are needed",
            hi - lo + 1,
            crate::grid::MIN_NODES
        )));
    }
    let padded = state.padded();
    let n = grid.n();
    let left = if lo == 0 {
        state.ends()[0]
    } else {
        EndCondition::Ghost { near: alpha * padded[lo + 1], far: alpha * padded[lo] }
    };
    let right = if hi == n - 1 {
        state.ends()[1]
    } else {
        EndCondition::Ghost { near: alpha * padded[hi + 3], far: alpha * padded[hi + 4] }
    };
    let new_grid = make_grid(alpha * (grid.x(lo) - center), alpha * (grid.x(hi) - center), hi - lo + 1)?;
    let rho = state.rho()[lo..=hi].iter().map(|r| alpha * r).collect();
    FlowState::with_ends(new_grid, 0.0, rho, [left, right])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderDeviation {
    /// `sup |rho~ - 1|` over the window.
    pub sup: f64,
    /// `sup |rho~ / rho~(0) - 1|`: deviation from the cylinder through the centre.
    pub relative: f64,
    /// Data (including mirror images at Neumann ends) does not cover the window.
    pub clipped: bool,
}

pub fn compare_to_cylinder(rescaled: &FlowState, window: f64) -> CylinderDeviation {
    let g = rescaled.grid();
    let (a, b) = (g.a(), g.b());
    let [left, right] = rescaled.ends().map(|e| e == EndCondition::Neumann);
    let reach = window * (1.0 + 1e-12);
    // a node and its mirror images in Neumann ends carry the same radius
    let in_window = |x: f64| {
        x.abs() <= reach
            || (left && (2.0 * a - x).abs() <= reach)
            || (right && (2.0 * b - x).abs() <= reach)
    };
    let center = crate::grid::argmin(&g.nodes().iter().map(|x| x.abs()).collect::<Vec<_>>());
    let r0 = rescaled.rho()[center];
    let (mut sup, mut rel) = (0.0f64, 0.0f64);
    for (&x, r) in g.nodes().iter().zip(rescaled.rho()) {
        if in_window(x) {
            sup = sup.max((r - 1.0).abs());
            rel = rel.max((r / r0 - 1.0).abs());
        }
    }
    let lowest = match (left, right) {
        (true, true) => f64::NEG_INFINITY,
        (true, false) => 2.0 * a - b,
        _ => a,
    };
    let highest = match (left, right) {
        (true, true) => f64::INFINITY,
        (false, true) => 2.0 * b - a,
        _ => b,
    };
    let clipped = lowest > -window * (1.0 - 1e-12) || highest < window * (1.0 - 1e-12);
    CylinderDeviation { sup, relative: rel, clipped }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatenoidFit {
    pub c: f64,
    /// Root-mean-square misfit over the nodes.
    pub residual: f64,
    /// `max c cosh^2(x~ / c)`, the value of `y v` on the fitted catenoid.
    pub yv_growth: f64,
    pub converged: bool,
}

/// `y v` on the catenoid `c cosh(x / c)`: `(c / 2)(cosh(2x / c) + 1)`.
pub fn catenoid_yv(c: f64, x: f64) -> f64 {
    0.5 * c * ((2.0 * x / c).cosh() + 1.0)
}

const CATENOID_C_RANGE: [f64; 2] = [1e-3, 1e3];

/// One-parameter least-squares fit of `c cosh(x~ / c)` by bisection on the normal
/// equation over `c` in `[1e-3, 1e3]`.
pub fn compare_to_catenoid(rescaled: &FlowState) -> CatenoidFit {
    let xs = rescaled.grid().nodes();
    let rho = rescaled.rho();
    let sse = |c: f64| -> f64 {
        xs.iter()
            .zip(rho)
            .map(|(x, r)| (c * (x / c).cosh() - r).powi(2))
            .sum()
    };
    // d/dc of sse / 2
    let gradient = |c: f64| -> f64 {
        let g: f64 = xs
            .iter()
            .zip(rho)
            .map(|(x, r)| {
                let s = x / c;
                (c * s.cosh() - r) * (s.cosh() - s * s.sinh())
            })
            .sum();
        if g.is_finite() {
            g
        } else {
            // cosh overflowed: the fit error grows as c shrinks
            -1.0
        }
    };
    let [lo, hi] = CATENOID_C_RANGE;
    let samples = 400;
    let grid: Vec<f64> = (0..=samples)
        .map(|i| lo * (hi / lo).powf(i as f64 / samples as f64))
        .collect();
    let mut best: Option<(f64, f64)> = None;
    let mut converged = false;
    for w in grid.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (ga, gb) = (gradient(a), gradient(b));
        if !(ga < 0.0 && gb >= 0.0) {
            continue;
        }
        for _ in 0..200 {
            let mid = (a * b).sqrt();
            if gradient(mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            if b / a - 1.0 < 1e-15 {
                break;
            }
        }
        let c = (a * b).sqrt();
        let e = sse(c);
        if best.map_or(true, |(_, be)| e < be) {
            best = Some((c, e));
            converged = true;
        }
    }
    let (c, e) = best.unwrap_or_else(|| {
        grid.iter()
            .map(|&c| (c, sse(c)))
            .filter(|(_, e)| e.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((hi, f64::INFINITY))
    });
    let yv_growth = xs
        .iter()
        .map(|&x| catenoid_yv(c, x))
        .fold(f64::NEG_INFINITY, f64::max);
    CatenoidFit {
        c,
        residual: (e / xs.len() as f64).sqrt(),
        yv_growth,
        converged,
    }
}
