//! Axis discretization and profile-curve states.
//!
//! A [`FlowState`] holds the radius `rho` of the generating curve at each node of a
//! uniform [`ProfileGrid`] on `[a, b]`. Stencils near the ends read two ghost values per
//! side, produced by [`FlowState::padded`] according to the [`EndCondition`] of that end.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible node count; the pinned-end extrapolation reads five nodes.
pub const MIN_NODES: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "GridMeta", try_from = "GridMeta")]
pub struct ProfileGrid {
    a: f64,
    b: f64,
    n: usize,
    h: f64,
    nodes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridMeta {
    a: f64,
    b: f64,
    n: usize,
}

impl From<ProfileGrid> for GridMeta {
    fn from(g: ProfileGrid) -> Self {
        GridMeta { a: g.a, b: g.b, n: g.n }
    }
}

impl TryFrom<GridMeta> for ProfileGrid {
    type Error = Error;
    fn try_from(m: GridMeta) -> Result<Self> {
        make_grid(m.a, m.b, m.n)
    }
}

/// Uniform grid with `n` nodes on `[a, b]`.
pub fn make_grid(a: f64, b: f64, n: usize) -> Result<ProfileGrid> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Config(format!("grid endpoints must be finite (a = {a}, b = {b})")));
    }
    if a >= b {
        return Err(Error::Config(format!("grid requires a < b (a = {a}, b = {b})")));
    }
    if n < MIN_NODES {
        return Err(Error::Config(format!("grid requires n >= {MIN_NODES} (n = {n})")));
    }
    let h = (b - a) / (n - 1) as f64;
    let nodes = (0..n)
        .map(|j| if j == n - 1 { b } else { a + j as f64 * h })
        .collect();
    Ok(ProfileGrid { a, b, n, h, nodes })
}

impl ProfileGrid {
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn x(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Same interval with `n` nodes.
    pub fn with_nodes(&self, n: usize) -> Result<ProfileGrid> {
        make_grid(self.a, self.b, n)
    }
}

/// Treatment of one end of the interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EndCondition {
    /// `rho' = 0`: ghost nodes mirror the interior.
    Neumann,
    /// End value held fixed in time; ghosts by quartic extrapolation.
    Pinned,
    /// Explicit ghost radii, nearest first. Used for windows cut out of a larger profile.
    Ghost { near: f64, far: f64 },
}

/// Parity of a per-node quantity under reflection in a Neumann end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    grid: ProfileGrid,
    t: f64,
    rho: Vec<f64>,
    ends: [EndCondition; 2],
}

impl FlowState {
    /// Neumann state; fails if any radius is not positive.
    pub fn new(grid: ProfileGrid, t: f64, rho: Vec<f64>) -> Result<Self> {
        Self::with_ends(grid, t, rho, [EndCondition::Neumann; 2])
    }

    pub fn with_ends(
        grid: ProfileGrid,
        t: f64,
        rho: Vec<f64>,
        ends: [EndCondition; 2],
    ) -> Result<Self> {
        if rho.len() != grid.n() {
            return Err(Error::Input(format!(
                "profile has {} values for a grid of {} nodes",
                rho.len(),
                grid.n()
            )));
        }
        if let Some((index, &value)) = rho
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return Err(Error::Degenerate { index, value });
        }
        Ok(FlowState { grid, t, rho, ends })
    }

    pub fn grid(&self) -> &ProfileGrid {
        &self.grid
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn ends(&self) -> [EndCondition; 2] {
        self.ends
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn min_rho(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_rho(&self) -> f64 {
        self.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the smallest radius (first one on ties).
    pub fn argmin_rho(&self) -> usize {
        argmin(&self.rho)
    }

    pub(crate) fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    /// `rho` with two ghost values on each side: `[g-2, g-1, rho..., g+1, g+2]`.
    pub fn padded(&self) -> Vec<f64> {
        pad(&self.rho, self.ends, Parity::Even, true)
    }

    /// Any per-node quantity padded with ghosts under this state's end conditions.
    ///
    /// `Ghost` ends only carry radii, so other quantities are extrapolated there.
    pub fn pad_field(&self, f: &[f64], parity: Parity) -> Vec<f64> {
        pad(f, self.ends, parity, false)
    }
}

pub(crate) fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = j;
        }
    }
    best
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = j;
        }
    }
    best
}

fn pad(f: &[f64], ends: [EndCondition; 2], parity: Parity, is_rho: bool) -> Vec<f64> {
    let n = f.len();
    debug_assert!(n >= MIN_NODES);
    let sign = match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    let left = ghosts(ends[0], [f[0], f[1], f[2], f[3], f[4]], sign, is_rho);
    let right = ghosts(
        ends[1],
        [f[n - 1], f[n - 2], f[n - 3], f[n - 4], f[n - 5]],
        sign,
        is_rho,
    );
    let mut out = Vec::with_capacity(n + 4);
    out.push(left[1]);
    out.push(left[0]);
    out.extend_from_slice(f);
    out.push(right[0]);
    out.push(right[1]);
    out
}

/// Ghost values `[g1, g2]` at distance one and two spacings outside an end, given the
/// five nodes nearest that end ordered inward.
fn ghosts(end: EndCondition, inner: [f64; 5], sign: f64, is_rho: bool) -> [f64; 2] {
    match end {
        EndCondition::Neumann => [sign * inner[1], sign * inner[2]],
        EndCondition::Ghost { near, far } if is_rho => [near, far],
        EndCondition::Pinned | EndCondition::Ghost { .. } => {
            let [f0, f1, f2, f3, f4] = inner;
            [
                5.0 * f0 - 10.0 * f1 + 10.0 * f2 - 5.0 * f3 + f4,
                15.0 * f0 - 40.0 * f1 + 45.0 * f2 - 24.0 * f3 + 5.0 * f4,
            ]
        }
    }
}

/// Initial profile families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PresetSpec {
    /// `rho = r`.
    Cylinder { r: f64 },
    /// `rho = m + A cos(w pi (x - a) / (b - a))`.
    CosineNeck { m: f64, amplitude: f64, w: u32 },
    /// `rho = c cosh(x / c)`; ends are pinned since `rho'` vanishes only at `x = 0`.
    Catenoid { c: f64 },
    /// Explicit node values.
    Table { values: Vec<f64> },
}

impl PresetSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            PresetSpec::Cylinder { .. } => "cylinder",
            PresetSpec::CosineNeck { .. } => "cosine_neck",
            PresetSpec::Catenoid { .. } => "catenoid",
            PresetSpec::Table { .. } => "table",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PresetSpec::Cylinder { r } if !(r > 0.0 && r.is_finite()) => {
                Err(Error::Config(format!("cylinder requires r > 0 (r = {r})")))
            }
            PresetSpec::CosineNeck { m, amplitude, .. } if !(m > amplitude && amplitude > 0.0) => {
                Err(Error::Config(format!(
                    "cosine_neck requires m > A > 0 (m = {m}, A = {amplitude})"
                )))
            }
            PresetSpec::Catenoid { c } if !(c > 0.0 && c.is_finite()) => {
                Err(Error::Config(format!("catenoid requires c > 0 (c = {c})")))
            }
            _ => Ok(()),
        }
    }

    /// Closed-form radius at axis coordinate `x` on `[a, b]` (not defined for tables).
    pub fn eval(&self, x: f64, a: f64, b: f64) -> Option<f64> {
        match *self {
            PresetSpec::Cylinder { r } => Some(r),
            PresetSpec::CosineNeck { m, amplitude, w } => {
                Some(m + amplitude * (w as f64 * PI * (x - a) / (b - a)).cos())
            }
            PresetSpec::Catenoid { c } => Some(c * (x / c).cosh()),
            PresetSpec::Table { .. } => None,
        }
    }
}

pub fn preset_profile(spec: &PresetSpec, grid: &ProfileGrid) -> Result<FlowState> {
    spec.validate()?;
    let rho: Vec<f64> = match spec {
        PresetSpec::Table { values } => {
            if values.len() != grid.n() {
                return Err(Error::Config(format!(
                    "table has {} values for a grid of {} nodes",
                    values.len(),
                    grid.n()
                )));
            }
            values.clone()
        }
        _ => grid
            .nodes()
            .iter()
            .map(|&x| spec.eval(x, grid.a(), grid.b()).expect("closed-form preset"))
            .collect(),
    };
    let ends = match spec {
        PresetSpec::Catenoid { .. } => [EndCondition::Pinned; 2],
        _ => [EndCondition::Neumann; 2],
    };
    FlowState::with_ends(grid.clone(), 0.0, rho, ends).map_err(|e| match e {
        Error::Degenerate { index, value } => Error::Config(format!(
            "{} preset gives rho = {value} <= 0 at node {index}",
            spec.kind()
        )),
        other => other,
    })
}

/// Reads a two-column `x,rho` CSV (header row) whose abscissae match `grid` to `h/100`.
pub fn load_table(path: &Path, grid: &ProfileGrid) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::with_capacity(grid.n());
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|s| s.parse().ok()).ok_or_else(|| {
                Error::format(path, format!("line {}: expected `x,rho`", lineno + 1))
            })
        };
        let x = parse(cols.next())?;
        let r = parse(cols.next())?;
        let j = values.len();
        if j >= grid.n() {
            return Err(Error::format(path, format!("more than {} rows", grid.n())));
        }
        if (x - grid.x(j)).abs() > grid.h() / 100.0 {
            return Err(Error::format(
                path,
                format!("line {}: x = {x} does not match node {j} at {}", lineno + 1, grid.x(j)),
            ));
        }
        values.push(r);
    }
    if values.len() != grid.n() {
        return Err(Error::format(
            path,
            format!("{} rows for a grid of {} nodes", values.len(), grid.n()),
        ));
    }
    Ok(values)
}

/// Refines `state` onto `n_new >= n` nodes over the same interval by local cubic
/// interpolation. Values below both bracketing nodes are clamped to their minimum.
pub fn resample(state: &FlowState, n_new: usize) -> Result<FlowState> {
    let n = state.len();
    if n_new < n {
        return Err(Error::Input(format!(
            "resample cannot coarsen ({n} -> {n_new} nodes)"
        )));
    }
    if n_new == n {
        return Ok(state.clone());
    }
    let grid = state.grid().with_nodes(n_new)?;
    let padded = state.padded();
    let (a, h) = (state.grid().a(), state.grid().h());
    let rho = grid
        .nodes()
        .iter()
        .map(|&x| {
            let s = (x - a) / h;
            let s = if (s - s.round()).abs() < 1e-9 { s.round() } else { s };
            let j = (s.floor() as usize).min(n - 2);
            let t = s - j as f64;
            // padded[j + 2] is rho[j]
            let [fm, f0, f1, f2] = [padded[j + 1], padded[j + 2], padded[j + 3], padded[j + 4]];
            // Lagrange weights sum to one; relative to f0 constants and nodes are exact
            let v = f0 - t * (t - 1.0) * (t - 2.0) / 6.0 * (fm - f0)
                - (t + 1.0) * t * (t - 2.0) / 2.0 * (f1 - f0)
                + (t + 1.0) * t * (t - 1.0) / 6.0 * (f2 - f0);
            v.max(f0.min(f1))
        })
        .collect();
    let ends = state.ends().map(|e| match e {
        EndCondition::Ghost { .. } => EndCondition::Pinned,
        other => other,
    });
    FlowState::with_ends(grid, state.t(), rho, ends)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_arithmetic() {
        let g = make_grid(0.0, 1.0, 401).unwrap();
        assert_eq!(g.h(), 0.0025);
        for (j, &x) in g.nodes().iter().enumerate() {
            assert!((x - j as f64 / 400.0).abs() <= f64::EPSILON);
        }
        let g = make_grid(1.0, 2.0, 5).unwrap();
        assert_eq!(g.nodes(), &[1.0, 1.25, 1.5, 1.75, 2.0]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(make_grid(0.0, 1.0, 4), Err(Error::Config(_))));
        assert!(matches!(make_grid(1.0, 1.0, 10), Err(Error::Config(_))));
        assert!(matches!(make_grid(2.0, 1.0, 10), Err(Error::Config(_))));
    }

    #[test]
    fn presets_evaluate() {
        let g = make_grid(0.0, 1.0, 401).unwrap();
        let s = preset_profile(&PresetSpec::Cylinder { r: 1.0 }, &g).unwrap();
        assert!(s.rho().iter().all(|&r| r == 1.0));
        assert_eq!(s.t(), 0.0);

        let s = preset_profile(
            &PresetSpec::CosineNeck { m: 0.6, amplitude: 0.4, w: 1 },
            &g,
        )
        .unwrap();
        assert_eq!(s.rho()[0], 1.0);
        assert!((s.rho()[400] - 0.2).abs() < 1e-15);

        let g = make_grid(-1.0, 1.0, 201).unwrap();
        let s = preset_profile(&PresetSpec::Catenoid { c: 1.0 }, &g).unwrap();
        assert_eq!(s.rho()[100], 1.0);
        assert!((s.rho()[0] - 1f64.cosh()).abs() < 1e-15);
        assert!((s.rho()[200] - 1.5430806348152437).abs() < 1e-15);
        assert_eq!(s.ends(), [EndCondition::Pinned; 2]);
    }

    #[test]
    fn presets_reject_nonpositive_profiles() {
        let g = make_grid(0.0, 1.0, 11).unwrap();
        let bad = PresetSpec::CosineNeck { m: 0.4, amplitude: 0.4, w: 1 };
        assert!(preset_profile(&bad, &g).is_err());
        assert!(preset_profile(&PresetSpec::Catenoid { c: 0.0 }, &g).is_err());
        let table = PresetSpec::Table { values: vec![1.0; 10] };
        assert!(preset_profile(&table, &g).is_err());
        let mut values = vec![1.0; 11];
        values[3] = -0.1;
        assert!(preset_profile(&PresetSpec::Table { values }, &g).is_err());
    }

    #[test]
    fn cosine_neck_mirror_is_exact() {
        let g = make_grid(0.0, 1.0, 101).unwrap();
        for w in 1..4 {
            let s = preset_profile(&PresetSpec::CosineNeck { m: 1.0, amplitude: 0.5, w }, &g)
                .unwrap();
            let rho = s.rho();
            let n = rho.len();
            // The closed form is even about both ends, so mirrored ghosts equal it.
            let ghost_left = PresetSpec::CosineNeck { m: 1.0, amplitude: 0.5, w }
                .eval(-g.h(), 0.0, 1.0)
                .unwrap();
            assert!((ghost_left - rho[1]).abs() < 1e-14);
            let p = s.padded();
            assert_eq!(p[1], rho[1]);
            assert_eq!(p[0], rho[2]);
            assert_eq!(p[n + 2], rho[n - 2]);
            assert_eq!(p[n + 3], rho[n - 3]);
        }
    }

    #[test]
    fn pinned_ghosts_reproduce_quartics() {
        let g = make_grid(0.0, 1.0, 9).unwrap();
        let f = |x: f64| 2.0 + x - 3.0 * x * x + x.powi(3) - 0.5 * x.powi(4);
        let rho: Vec<f64> = g.nodes().iter().map(|&x| f(x)).collect();
        let s = FlowState::with_ends(g.clone(), 0.0, rho, [EndCondition::Pinned; 2]).unwrap();
        let p = s.padded();
        let h = g.h();
        assert!((p[0] - f(-2.0 * h)).abs() < 1e-12);
        assert!((p[1] - f(-h)).abs() < 1e-12);
        assert!((p[11] - f(1.0 + h)).abs() < 1e-12);
        assert!((p[12] - f(1.0 + 2.0 * h)).abs() < 1e-12);
    }

    #[test]
    fn resample_constant_and_identity() {
        let g = make_grid(0.0, 1.0, 101).unwrap();
        let s = preset_profile(&PresetSpec::Cylinder { r: 1.0 }, &g).unwrap();
        let fine = resample(&s, 201).unwrap();
        assert_eq!(fine.len(), 201);
        assert!(fine.rho().iter().all(|&r| r == 1.0));

        let s = preset_profile(&PresetSpec::CosineNeck { m: 0.6, amplitude: 0.4, w: 2 }, &g)
            .unwrap();
        assert_eq!(resample(&s, 101).unwrap(), s);
        assert!(resample(&s, 100).is_err());
    }

    #[test]
    fn resample_keeps_coarse_nodes() {
        let g = make_grid(0.0, 1.0, 51).unwrap();
        let s = preset_profile(&PresetSpec::CosineNeck { m: 0.6, amplitude: 0.4, w: 1 }, &g)
            .unwrap();
        let fine = resample(&s, 101).unwrap();
        for j in 0..51 {
            assert_eq!(fine.rho()[2 * j], s.rho()[j]);
        }
    }

    #[test]
    fn table_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(0.0, 1.0, 6).unwrap();
        let path = dir.path().join("t.csv");
        let mut text = String::from("x,rho\n");
        for &x in g.nodes() {
            text.push_str(&format!("{x},{}\n", 1.0 + x));
        }
        std::fs::write(&path, &text).unwrap();
        let v = load_table(&path, &g).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v[5], 2.0);

        std::fs::write(&path, "x,rho\n0,1\n0.5,1\n").unwrap();
        assert!(load_table(&path, &g).is_err());
    }
}
