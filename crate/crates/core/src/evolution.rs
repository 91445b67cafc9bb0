//! Time stepping of the profile under mean curvature flow.
//!
//! A surface of revolution moving with normal speed `-H` has graph height obeying
//! `rho_t = -H v = rho'' / (1 + rho'^2) - 1 / rho`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{derivatives, geometry_sample, GeometrySample};
use crate::grid::{resample, EndCondition, FlowState};

/// Default pinch threshold relative to the initial minimum radius.
pub const DEFAULT_RHO_STOP_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Midpoint rule on the full right-hand side.
    ExplicitRk2,
    /// Exact reaction sub-step followed by a backward-Euler diffusion solve with the
    /// `1 / v^2` coefficient frozen at the current state.
    SemiImplicit,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::ExplicitRk2 => "explicit_rk2",
            Scheme::SemiImplicit => "semi_implicit",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit_rk2" => Ok(Scheme::ExplicitRk2),
            "semi_implicit" => Ok(Scheme::SemiImplicit),
            _ => Err(Error::Config(format!(
                "unknown scheme `{s}` (expected explicit_rk2 or semi_implicit)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControls {
    pub scheme: Scheme,
    pub safety: f64,
    /// Absolute pinch threshold; `None` means `1e-3` times the initial minimum radius.
    pub rho_stop: Option<f64>,
    pub t_max: f64,
    pub regrid_factor: usize,
    /// Refine when `1 / max|A|` spans fewer than this many grid spacings.
    pub regrid_trigger: f64,
    pub snapshot_stride: usize,
    /// Wall-clock budget in seconds.
    pub wall_clock: Option<f64>,
}

impl Default for StepControls {
    fn default() -> Self {
        StepControls {
            scheme: Scheme::SemiImplicit,
            safety: 0.9,
            rho_stop: None,
            t_max: 10.0,
            regrid_factor: 2,
            regrid_trigger: 20.0,
            snapshot_stride: 100,
            wall_clock: None,
        }
    }
}

impl StepControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::Config(format!("safety must lie in (0, 1] (got {})", self.safety)));
        }
        if let Some(r) = self.rho_stop {
            if !(r > 0.0) {
                return Err(Error::Config(format!("rho_stop must be positive (got {r})")));
            }
        }
        if !(self.t_max > 0.0) {
            return Err(Error::Config(format!("t_max must be positive (got {})", self.t_max)));
        }
        if self.regrid_factor < 2 {
            return Err(Error::Config(format!(
                "regrid_factor must be at least 2 (got {})",
                self.regrid_factor
            )));
        }
        if !(self.regrid_trigger >= 0.0) {
            return Err(Error::Config("regrid_trigger must be non-negative".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot_stride must be at least 1".into()));
        }
        if let Some(w) = self.wall_clock {
            if !(w > 0.0) {
                return Err(Error::Config(format!("wall_clock must be positive (got {w})")));
            }
        }
        Ok(())
    }

    pub fn resolved_rho_stop(&self, initial: &FlowState) -> f64 {
        self.rho_stop
            .unwrap_or(DEFAULT_RHO_STOP_FRACTION * initial.min_rho())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Regrid { t: f64, from_n: usize, to_n: usize },
    PinchDetected { t: f64, min_rho: f64 },
    TimeCap { t: f64, wall_clock: bool },
    StepRejected { t: f64, dt: f64, reason: String },
}

/// Time-ordered snapshots and events of one run.
///
/// Geometry is not stored; [`Trajectory::geometry`] recomputes it from the state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<FlowState>,
    pub events: Vec<Event>,
    pub controls: StepControls,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(FlowState::t).collect()
    }

    pub fn geometry(&self, i: usize) -> GeometrySample {
        geometry_sample(&self.snapshots[i]).expect("recorded snapshots have positive radii")
    }

    pub fn geometries(&self) -> Vec<GeometrySample> {
        (0..self.len()).map(|i| self.geometry(i)).collect()
    }

    pub fn pinch(&self) -> Option<(f64, f64)> {
        self.events.iter().find_map(|e| match *e {
            Event::PinchDetected { t, min_rho } => Some((t, min_rho)),
            _ => None,
        })
    }

    pub fn final_state(&self) -> &FlowState {
        self.snapshots.last().expect("trajectory has an initial snapshot")
    }

    /// Whether snapshots `i` and `j` share a grid (no regrid between them).
    pub fn same_grid(&self, i: usize, j: usize) -> bool {
        self.snapshots[i].grid() == self.snapshots[j].grid()
    }
}

/// `rho'' / v^2 - 1 / rho` at every node.
pub fn rhs(state: &FlowState) -> Result<Vec<f64>> {
    if let Some((index, &value)) = state.rho().iter().enumerate().find(|(_, r)| **r <= 0.0) {
        return Err(Error::Degenerate { index, value });
    }
    let (dr, ddr) = derivatives(state);
    Ok(state
        .rho()
        .iter()
        .zip(dr.iter().zip(&ddr))
        .map(|(&r, (&d1, &d2))| d2 / (1.0 + d1 * d1) - 1.0 / r)
        .collect())
}

/// `safety * min(h^2 v^2 / 2, rho^2 / 4)` over all nodes.
pub fn stable_dt(state: &FlowState, controls: &StepControls) -> f64 {
    let h = state.grid().h();
    let (dr, _) = derivatives(state);
    let diffusion = dr
        .iter()
        .map(|d| h * h * (1.0 + d * d) / 2.0)
        .fold(f64::INFINITY, f64::min);
    let reaction = state.min_rho().powi(2) / 4.0;
    controls.safety * diffusion.min(reaction)
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Advanced(FlowState),
    /// The update would bring some radius to or below the pinch threshold.
    Pinch { min_rho: f64 },
}

pub fn step(
    state: &FlowState,
    dt: f64,
    controls: &StepControls,
    rho_stop: f64,
) -> Result<StepOutcome> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Input(format!("time step must be positive (got {dt})")));
    }
    let pinned = state.ends().map(|e| !matches!(e, EndCondition::Neumann));
    let new_rho = match controls.scheme {
        Scheme::ExplicitRk2 => {
            let mut k1 = rhs(state)?;
            hold_pinned(&mut k1, pinned);
            let half: Vec<f64> = state
                .rho()
                .iter()
                .zip(&k1)
                .map(|(r, k)| r + 0.5 * dt * k)
                .collect();
            let min_half = half.iter().copied().fold(f64::INFINITY, f64::min);
            if min_half <= rho_stop {
                return Ok(StepOutcome::Pinch { min_rho: min_half });
            }
            let mid = FlowState::with_ends(state.grid().clone(), state.t(), half, state.ends())?;
            let mut k2 = rhs(&mid)?;
            hold_pinned(&mut k2, pinned);
            state
                .rho()
                .iter()
                .zip(&k2)
                .map(|(r, k)| r + dt * k)
                .collect::<Vec<_>>()
        }
        Scheme::SemiImplicit => {
            // reaction rho' = -1/rho solved exactly
            let mut reacted = Vec::with_capacity(state.len());
            for (j, &r) in state.rho().iter().enumerate() {
                let held = (j == 0 && pinned[0]) || (j + 1 == state.len() && pinned[1]);
                let sq = r * r - 2.0 * dt;
                if held {
                    reacted.push(r);
                } else if sq <= 0.0 {
                    return Ok(StepOutcome::Pinch { min_rho: 0.0 });
                } else {
                    reacted.push(sq.sqrt());
                }
            }
            diffusion_solve(state, &reacted, dt, pinned)
        }
    };
    if let Some(bad) = new_rho.iter().position(|r| !r.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite radius at node {bad} after step of size {dt}"
        )));
    }
    let min_rho = new_rho.iter().copied().fold(f64::INFINITY, f64::min);
    if min_rho <= rho_stop {
        return Ok(StepOutcome::Pinch { min_rho });
    }
    Ok(StepOutcome::Advanced(FlowState::with_ends(
        state.grid().clone(),
        state.t() + dt,
        new_rho,
        state.ends(),
    )?))
}

fn hold_pinned(rate: &mut [f64], pinned: [bool; 2]) {
    let n = rate.len();
    if pinned[0] {
        rate[0] = 0.0;
    }
    if pinned[1] {
        rate[n - 1] = 0.0;
    }
}

/// Solves `(I - dt diag(1/v^2) D2) rho_new = rhs` with mirror closure at Neumann ends
/// and identity rows at held ends.
fn diffusion_solve(state: &FlowState, rhs: &[f64], dt: f64, pinned: [bool; 2]) -> Vec<f64> {
    let n = state.len();
    let h = state.grid().h();
    let (dr, _) = derivatives(state);
    let mut lower = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut upper = vec![0.0; n];
    for j in 0..n {
        if (j == 0 && pinned[0]) || (j == n - 1 && pinned[1]) {
            continue;
        }
        let r = dt / (h * h * (1.0 + dr[j] * dr[j]));
        diag[j] = 1.0 + 2.0 * r;
        match j {
            0 => upper[0] = -2.0 * r,
            _ if j == n - 1 => lower[j] = -2.0 * r,
            _ => {
                lower[j] = -r;
                upper[j] = -r;
            }
        }
    }
    debug_assert!((0..n).all(|j| diag[j] > lower[j].abs() + upper[j].abs()));
    thomas(&lower, &diag, &upper, rhs)
}

/// Tridiagonal solve; `lower[0]` and `upper[n-1]` are ignored.
pub(crate) fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for j in 1..n {
        let m = diag[j] - lower[j] * c[j - 1];
        assert!(m != 0.0, "tridiagonal pivot vanished at row {j}");
        c[j] = upper[j] / m;
        d[j] = (rhs[j] - lower[j] * d[j - 1]) / m;
    }
    let mut x = d;
    for j in (0..n - 1).rev() {
        x[j] -= c[j] * x[j + 1];
    }
    x
}

fn max_rejections() -> usize {
    12
}

/// Runs the flow from `initial` until pinch, `t_max`, or the wall-clock budget.
pub fn evolve(initial: FlowState, controls: &StepControls) -> Result<Trajectory> {
    controls.validate()?;
    let rho_stop = controls.resolved_rho_stop(&initial);
    // the clock is only read when a budget is set (it is unavailable on some targets)
    let started = controls.wall_clock.map(|_| Instant::now());
    let mut traj = Trajectory {
        snapshots: vec![initial.clone()],
        events: Vec::new(),
        controls: controls.clone(),
    };
    let mut state = initial;
    let mut accepted: u64 = 0;
    loop {
        if state.t() >= controls.t_max {
            traj.events.push(Event::TimeCap { t: state.t(), wall_clock: false });
            break;
        }
        if let (Some(budget), Some(started)) = (controls.wall_clock, started) {
            if accepted % 64 == 0 && started.elapsed().as_secs_f64() > budget {
                traj.events.push(Event::TimeCap { t: state.t(), wall_clock: true });
                break;
            }
        }

        let geo = geometry_sample(&state)?;
        let scale = 1.0 / geo.max_a2().sqrt();
        if scale / state.grid().h() < controls.regrid_trigger {
            if traj.final_state().t() < state.t() {
                traj.snapshots.push(state.clone());
            }
            let from_n = state.len();
            let to_n = (from_n - 1) * controls.regrid_factor + 1;
            state = resample(&state, to_n)?;
            traj.events.push(Event::Regrid { t: state.t(), from_n, to_n });
            continue;
        }

        let mut dt = stable_dt(&state, controls).min(controls.t_max - state.t());
        // land exactly on t_max rather than leave a sliver
        if controls.t_max - (state.t() + dt) < 1e-9 * dt {
            dt = controls.t_max - state.t();
        }
        let mut rejections = 0;
        let outcome = loop {
            match step(&state, dt, controls, rho_stop) {
                Ok(outcome) => break outcome,
                Err(Error::Numerical(reason)) if rejections < max_rejections() => {
                    traj.events.push(Event::StepRejected { t: state.t(), dt, reason });
                    rejections += 1;
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        };
        match outcome {
            StepOutcome::Advanced(next) => {
                state = if next.t() >= controls.t_max {
                    next.with_time(controls.t_max)
                } else {
                    next
                };
                accepted += 1;
                if accepted % controls.snapshot_stride as u64 == 0 {
                    traj.snapshots.push(state.clone());
                }
            }
            StepOutcome::Pinch { min_rho } => {
                traj.events.push(Event::PinchDetected { t: state.t(), min_rho });
                break;
            }
        }
    }
    if traj.final_state().t() < state.t() {
        traj.snapshots.push(state);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, preset_profile, PresetSpec};

    fn cylinder(n: usize) -> FlowState {
        preset_profile(&PresetSpec::Cylinder { r: 1.0 }, &make_grid(0.0, 1.0, n).unwrap())
            .unwrap()
    }

    #[test]
    fn cylinder_rhs() {
        assert!(rhs(&cylinder(21)).unwrap().iter().all(|&r| r == -1.0));
    }

    #[test]
    fn stable_dt_formula() {
        let c = StepControls { safety: 0.9, ..Default::default() };
        let s = cylinder(401);
        let dt = stable_dt(&s, &c);
        assert!((dt - 0.9 * 0.0025f64.powi(2) / 2.0).abs() < 1e-18);
        let c1 = StepControls { safety: 1.0, ..Default::default() };
        assert!((stable_dt(&s, &c1) / dt - 1.0 / 0.9).abs() < 1e-14);

        let thin = FlowState::new(make_grid(0.0, 1.0, 5).unwrap(), 0.0, vec![0.01; 5]).unwrap();
        assert!((stable_dt(&thin, &c) - 0.9 * 1e-4 / 4.0).abs() < 1e-18);
    }

    #[test]
    fn single_steps_on_cylinder() {
        let s = cylinder(21);
        let exact = (1.0f64 - 0.02).sqrt();
        let semi = StepControls { scheme: Scheme::SemiImplicit, ..Default::default() };
        let StepOutcome::Advanced(a) = step(&s, 0.01, &semi, 1e-3).unwrap() else { panic!() };
        for &r in a.rho() {
            assert!((r - 0.99).abs() < 1e-4);
            assert!((r - exact).abs() < 1e-14);
        }
        assert_eq!(a.t(), 0.01);
        let rk = StepControls { scheme: Scheme::ExplicitRk2, ..Default::default() };
        let StepOutcome::Advanced(b) = step(&s, 0.01, &rk, 1e-3).unwrap() else { panic!() };
        for &r in b.rho() {
            assert!((r - exact).abs() < 1e-5);
        }
    }

    #[test]
    fn threshold_produces_pinch_signal() {
        let s = FlowState::new(make_grid(0.0, 1.0, 5).unwrap(), 0.0, vec![0.1; 5]).unwrap();
        let rho_stop = 0.09;
        // one step to rho = sqrt(0.01 - 2 dt) = rho_stop / 2
        let dt = (0.01 - (rho_stop / 2.0f64).powi(2)) / 2.0;
        for scheme in [Scheme::SemiImplicit, Scheme::ExplicitRk2] {
            let c = StepControls { scheme, ..Default::default() };
            assert!(matches!(
                step(&s, dt, &c, rho_stop).unwrap(),
                StepOutcome::Pinch { .. }
            ));
        }
    }

    #[test]
    fn thomas_matches_dense_solution() {
        let lower = [0.0, -1.0, -0.5, -2.0];
        let diag = [4.0, 3.0, 5.0, 6.0];
        let upper = [-2.0, -1.0, -1.5, 0.0];
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let rhs: Vec<f64> = (0..4)
            .map(|j| {
                let mut s = diag[j] * x_true[j];
                if j > 0 {
                    s += lower[j] * x_true[j - 1];
                }
                if j < 3 {
                    s += upper[j] * x_true[j + 1];
                }
                s
            })
            .collect();
        let x = thomas(&lower, &diag, &upper, &rhs);
        for j in 0..4 {
            assert!((x[j] - x_true[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn evolve_stops_at_time_cap_with_snapshots() {
        let c = StepControls { t_max: 0.01, snapshot_stride: 50, ..Default::default() };
        let traj = evolve(cylinder(41), &c).unwrap();
        assert_eq!(traj.snapshots[0].t(), 0.0);
        assert_eq!(traj.final_state().t(), 0.01);
        assert!(matches!(traj.events.last(), Some(Event::TimeCap { wall_clock: false, .. })));
        let times = traj.times();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        let exact = (1.0f64 - 0.02).sqrt();
        assert!(traj.final_state().rho().iter().all(|r| (r - exact).abs() < 1e-12));
    }

    #[test]
    fn controls_validation() {
        assert!(StepControls { safety: 0.0, ..Default::default() }.validate().is_err());
        assert!(StepControls { safety: 1.5, ..Default::default() }.validate().is_err());
        assert!(StepControls { regrid_factor: 1, ..Default::default() }.validate().is_err());
        assert!(StepControls { rho_stop: Some(0.0), ..Default::default() }.validate().is_err());
        assert!(StepControls::default().validate().is_ok());
    }
}
