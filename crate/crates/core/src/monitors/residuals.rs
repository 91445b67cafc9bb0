//! Discrete residuals of the evolution identities of `y, v, k, p, q, H`.
//!
//! A material point of the surface moves with `dx/dt = H rho' / v` in the axial
//! coordinate, so the time derivative along the surface of a field `f` sampled at fixed
//! `x` is `f_t + (H rho' / v) f_x`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evolution::Trajectory;
use crate::geometry::{dx, geometry_sample, laplace_beltrami, laplace_beltrami_with_parity, GeometrySample};
use crate::grid::{EndCondition, FlowState, Parity};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub t: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    /// `max |Laplacian y - 1/y + H/v|` per snapshot.
    pub spatial_height: Vec<ResidualPoint>,
    /// Mean curvature identity at each interior snapshot of a same-grid triple.
    pub mean_curvature: Vec<ResidualPoint>,
    pub gradient: Vec<ResidualPoint>,
    pub profile_curvature: Vec<ResidualPoint>,
    pub rotational_curvature: Vec<ResidualPoint>,
    pub q: Vec<ResidualPoint>,
    /// Triples broken by a regrid.
    pub skipped_triples: usize,
}

/// `log2(coarse / fine)` for residuals of a grid and its halving.
pub fn convergence_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Nodes where the flow equation itself holds: pinned ends are held fixed.
fn free_nodes(state: &FlowState) -> std::ops::Range<usize> {
    let [l, r] = state.ends();
    let lo = usize::from(!matches!(l, EndCondition::Neumann));
    let hi = state.len() - usize::from(!matches!(r, EndCondition::Neumann));
    lo..hi
}

pub fn spatial_height_residual(state: &FlowState) -> Result<f64> {
    let g = geometry_sample(state)?;
    let lap = laplace_beltrami(state, &g.y)?;
    Ok(free_nodes(state)
        .map(|j| (lap[j] - 1.0 / g.y[j] + g.mean[j] / g.v[j]).abs())
        .fold(0.0, f64::max))
}

/// Weights of the three-point derivative at the middle of unevenly spaced times.
fn time_weights(t0: f64, t1: f64, t2: f64) -> [f64; 3] {
    let (d1, d2) = (t1 - t0, t2 - t1);
    [-d2 / (d1 * (d1 + d2)), (d2 - d1) / (d1 * d2), d1 / (d2 * (d1 + d2))]
}

/// Max residual of `D_t f = Laplacian f + reaction` at the middle snapshot.
fn material_residual(
    states: [&FlowState; 3],
    fields: [&[f64]; 3],
    parity: Parity,
    mid: &GeometrySample,
    reaction: &[f64],
) -> f64 {
    let s = states[1];
    let w = time_weights(states[0].t(), s.t(), states[2].t());
    let fx = dx(s, fields[1], parity);
    let lap = laplace_beltrami_with_parity(s, fields[1], parity).expect("field matches grid");
    free_nodes(s)
        .map(|j| {
            let ft = w[0] * fields[0][j] + w[1] * fields[1][j] + w[2] * fields[2][j];
            let transport = mid.mean[j] * mid.dr[j] / mid.v[j] * fx[j];
            (ft + transport - lap[j] - reaction[j]).abs()
        })
        .fold(0.0, f64::max)
}

/// Residuals of the height identity at every snapshot and of the mean curvature
/// identity at every same-grid triple; with `extended`, also of the `v, k, p, q`
/// identities.
pub fn residual_evolution_identities(traj: &Trajectory, extended: bool) -> ResidualRecord {
    let mut rec = ResidualRecord::default();
    for s in &traj.snapshots {
        let value = spatial_height_residual(s).expect("recorded snapshots have positive radii");
        rec.spatial_height.push(ResidualPoint { t: s.t(), value });
    }
    let geos = traj.geometries();
    for m in 1..traj.len().saturating_sub(1) {
        if !(traj.same_grid(m - 1, m) && traj.same_grid(m, m + 1)) {
            rec.skipped_triples += 1;
            continue;
        }
        let states = [&traj.snapshots[m - 1], &traj.snapshots[m], &traj.snapshots[m + 1]];
        let gs = [&geos[m - 1], &geos[m], &geos[m + 1]];
        let g = gs[1];
        let t = g.t;
        let n = g.len();
        let field = |f: fn(&GeometrySample) -> &[f64]| [f(gs[0]), f(gs[1]), f(gs[2])];

        let reaction: Vec<f64> = (0..n).map(|j| g.mean[j] * g.a2[j]).collect();
        let value = material_residual(states, field(|g| &g.mean), Parity::Even, g, &reaction);
        rec.mean_curvature.push(ResidualPoint { t, value });
        if !extended {
            continue;
        }
        let vx = dx(states[1], &g.v, Parity::Even);
        let reaction: Vec<f64> = (0..n)
            .map(|j| {
                let grad2 = (vx[j] / g.v[j]).powi(2);
                -g.a2[j] * g.v[j] + g.v[j] / (g.y[j] * g.y[j]) - 2.0 / g.v[j] * grad2
            })
            .collect();
        let value = material_residual(states, field(|g| &g.v), Parity::Even, g, &reaction);
        rec.gradient.push(ResidualPoint { t, value });

        let mix: Vec<f64> = (0..n).map(|j| 2.0 * g.q[j] * g.q[j] * (g.k[j] - g.p[j])).collect();
        let reaction: Vec<f64> = (0..n).map(|j| g.a2[j] * g.k[j] - mix[j]).collect();
        let value = material_residual(states, field(|g| &g.k), Parity::Even, g, &reaction);
        rec.profile_curvature.push(ResidualPoint { t, value });

        let reaction: Vec<f64> = (0..n).map(|j| g.a2[j] * g.p[j] + mix[j]).collect();
        let value = material_residual(states, field(|g| &g.p), Parity::Even, g, &reaction);
        rec.rotational_curvature.push(ResidualPoint { t, value });

        let reaction: Vec<f64> = (0..n)
            .map(|j| {
                let (k, p, q) = (g.k[j], g.p[j], g.q[j]);
                g.a2[j] * q + q * (p * p - q * q - 2.0 * k * p)
            })
            .collect();
        let value = material_residual(states, field(|g| &g.q), Parity::Odd, g, &reaction);
        rec.q.push(ResidualPoint { t, value });
    }
    rec
}
