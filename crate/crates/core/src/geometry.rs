//! Pointwise geometry of the rotation surface generated by a profile.
//!
//! With `v = sqrt(1 + rho'^2)` the principal curvatures are
//! `p = 1 / (rho v)` (rotational) and `k = -rho'' / v^3` (profile), and
//! `q = <nu, i1> / y = -rho' / (rho v)` for the outward normal `nu`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FlowState, Parity};

/// Central first and second differences of `rho`, ends via ghost nodes.
pub fn derivatives(state: &FlowState) -> (Vec<f64>, Vec<f64>) {
    let p = state.padded();
    let h = state.grid().h();
    let n = state.len();
    let mut dr = Vec::with_capacity(n);
    let mut ddr = Vec::with_capacity(n);
    for j in 0..n {
        let (l, c, r) = (p[j + 1], p[j + 2], p[j + 3]);
        dr.push((r - l) / (2.0 * h));
        ddr.push((l - 2.0 * c + r) / (h * h));
    }
    (dr, ddr)
}

/// Per-node geometric quantities of one state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySample {
    pub t: f64,
    pub x: Vec<f64>,
    /// Height function, equal to `rho`.
    pub y: Vec<f64>,
    pub dr: Vec<f64>,
    pub ddr: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    /// Mean curvature `k + p`.
    pub mean: Vec<f64>,
    /// `|A|^2 = k^2 + p^2`.
    pub a2: Vec<f64>,
}

impl GeometrySample {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn max_a2(&self) -> f64 {
        self.a2.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax_a2(&self) -> usize {
        crate::grid::argmax(&self.a2)
    }

    pub fn min_mean(&self) -> f64 {
        self.mean.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_yv(&self) -> f64 {
        self.y
            .iter()
            .zip(&self.v)
            .map(|(y, v)| y * v)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub const CSV_HEADER: &'static str = "x,rho,drho,ddrho,v,p,q,k,H,A2";

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 200);
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for j in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                self.x[j],
                self.y[j],
                self.dr[j],
                self.ddr[j],
                self.v[j],
                self.p[j],
                self.q[j],
                self.k[j],
                self.mean[j],
                self.a2[j]
            ));
        }
        out
    }
}

pub fn geometry_sample(state: &FlowState) -> Result<GeometrySample> {
    if let Some((index, &value)) = state.rho().iter().enumerate().find(|(_, r)| **r <= 0.0) {
        return Err(Error::Degenerate { index, value });
    }
    let (dr, ddr) = derivatives(state);
    let n = state.len();
    let mut g = GeometrySample {
        t: state.t(),
        x: state.grid().nodes().to_vec(),
        y: state.rho().to_vec(),
        v: Vec::with_capacity(n),
        p: Vec::with_capacity(n),
        q: Vec::with_capacity(n),
        k: Vec::with_capacity(n),
        mean: Vec::with_capacity(n),
        a2: Vec::with_capacity(n),
        dr,
        ddr,
    };
    for j in 0..n {
        let (rho, d1, d2) = (g.y[j], g.dr[j], g.ddr[j]);
        let w = 1.0 + d1 * d1;
        let v = w.sqrt();
        let p = 1.0 / (rho * v);
        let k = -d2 / (w * v);
        g.v.push(v);
        g.p.push(p);
        g.q.push(-d1 * p);
        g.k.push(k);
        g.mean.push(k + p);
        g.a2.push(k * k + p * p);
    }
    Ok(g)
}

/// Conservative Laplace-Beltrami operator `(1 / (rho v)) d/dx (rho f' / v)` of an
/// axially symmetric scalar that is even under reflection in Neumann ends.
pub fn laplace_beltrami(state: &FlowState, f: &[f64]) -> Result<Vec<f64>> {
    laplace_beltrami_with_parity(state, f, Parity::Even)
}

pub fn laplace_beltrami_with_parity(
    state: &FlowState,
    f: &[f64],
    parity: Parity,
) -> Result<Vec<f64>> {
    let n = state.len();
    if f.len() != n {
        return Err(Error::Input(format!(
            "field has {} values for a state of {n} nodes",
            f.len()
        )));
    }
    let h = state.grid().h();
    let rp = state.padded();
    let fp = state.pad_field(f, parity);
    // v at padded indices 1..=n+2 (nodes -1..=n)
    let mut vp = vec![f64::NAN; n + 4];
    for i in 1..n + 3 {
        let d = (rp[i + 1] - rp[i - 1]) / (2.0 * h);
        vp[i] = (1.0 + d * d).sqrt();
    }
    let flux = |i: usize| {
        // face between padded i and i + 1
        let rho = 0.5 * (rp[i] + rp[i + 1]);
        let v = 0.5 * (vp[i] + vp[i + 1]);
        rho * (fp[i + 1] - fp[i]) / (h * v)
    };
    Ok((0..n)
        .map(|j| {
            let i = j + 2;
            (flux(i) - flux(i - 1)) / (h * rp[i] * vp[i])
        })
        .collect())
}

/// Central first difference of a per-node field.
pub fn dx(state: &FlowState, f: &[f64], parity: Parity) -> Vec<f64> {
    let h = state.grid().h();
    let fp = state.pad_field(f, parity);
    (0..f.len()).map(|j| (fp[j + 3] - fp[j + 1]) / (2.0 * h)).collect()
}
