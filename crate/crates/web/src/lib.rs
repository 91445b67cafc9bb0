//! Browser front end: evolve a preset, scrub through profiles, classify the pinch.
//!
//! The `Demo` type holds all logic and is usable natively; `Simulation` is the thin
//! wasm-bindgen wrapper the page talks to. Everything crosses the boundary as JSON.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use axiflow::monitors::{MonitorSettings, MonitorSuite, MonitorVerdict};
use axiflow::singularity::{
    analyze, compare_to_cylinder, curvature_series, rescale_profile, AnalysisSettings,
    SingularityReport,
};
use axiflow::{evolve, make_grid, preset_profile, PresetSpec, Scheme, StepControls, Trajectory};

/// Largest initial grid the page may request; regrids refine beyond it.
pub const MAX_NODES: usize = 1601;
/// Points per plotted profile.
const PLOT_POINTS: usize = 400;

#[derive(Clone, Debug, Deserialize)]
pub struct DemoRequest {
    pub preset: PresetSpec,
    pub a: f64,
    pub b: f64,
    pub n: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Pinch threshold as a fraction of the initial minimum radius; coarser than the
    /// command-line default so that a browser run stays interactive.
    #[serde(default = "default_stop_fraction")]
    pub stop_fraction: f64,
}

fn default_scheme() -> Scheme {
    Scheme::SemiImplicit
}

fn default_stop_fraction() -> f64 {
    1e-2
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Frame {
    pub t: f64,
    pub n: usize,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub snapshots: usize,
    pub final_t: f64,
    pub final_n: usize,
    pub pinch: Option<(f64, f64)>,
    pub regrids: usize,
    /// `(t, max |A|^2)` per snapshot.
    pub t: Vec<f64>,
    pub max_a2: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Analysis {
    pub report: SingularityReport,
    pub monitors: MonitorVerdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct RescaledView {
    pub t: f64,
    pub alpha: f64,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub deviation: f64,
    pub clipped: bool,
}

#[derive(Debug)]
pub struct Demo {
    traj: Trajectory,
    analysis: Option<Analysis>,
}

fn thin(xs: &[f64], ys: &[f64], keep: usize) -> (Vec<f64>, Vec<f64>) {
    let stride = xs.len().div_ceil(keep).max(1);
    let mut idx: Vec<usize> = (0..xs.len()).step_by(stride).collect();
    if idx.last() != Some(&(xs.len() - 1)) {
        idx.push(xs.len() - 1);
    }
    (idx.iter().map(|&i| xs[i]).collect(), idx.iter().map(|&i| ys[i]).collect())
}

impl Demo {
    pub fn start(req: &DemoRequest) -> Result<Demo, String> {
        if req.n > MAX_NODES {
            return Err(format!("at most {MAX_NODES} nodes in the browser (got {})", req.n));
        }
        let grid = make_grid(req.a, req.b, req.n).map_err(|e| e.to_string())?;
        let s0 = preset_profile(&req.preset, &grid).map_err(|e| e.to_string())?;
        if !(req.stop_fraction > 0.0 && req.stop_fraction < 1.0) {
            return Err(format!("stop_fraction must lie in (0, 1) (got {})", req.stop_fraction));
        }
        let controls = StepControls {
            scheme: req.scheme,
            snapshot_stride: 50,
            rho_stop: Some(req.stop_fraction * s0.min_rho()),
            ..Default::default()
        };
        let traj = evolve(s0, &controls).map_err(|e| e.to_string())?;
        Ok(Demo { traj, analysis: None })
    }

    pub fn summary(&self) -> RunSummary {
        let series = curvature_series(&self.traj);
        let last = self.traj.final_state();
        RunSummary {
            snapshots: self.traj.len(),
            final_t: last.t(),
            final_n: last.len(),
            pinch: self.traj.pinch(),
            regrids: self
                .traj
                .events
                .iter()
                .filter(|e| matches!(e, axiflow::Event::Regrid { .. }))
                .count(),
            t: series.t,
            max_a2: series.max_a2,
        }
    }

    /// Snapshot `i`, thinned for plotting.
    pub fn frame(&self, i: usize) -> Option<Frame> {
        let s = self.traj.snapshots.get(i)?;
        let (x, rho) = thin(s.grid().nodes(), s.rho(), PLOT_POINTS);
        Some(Frame { t: s.t(), n: s.len(), x, rho })
    }

    pub fn analysis(&mut self) -> Result<&Analysis, String> {
        if self.analysis.is_none() {
            let report = analyze(&self.traj, &AnalysisSettings::default()).map_err(|e| e.to_string())?;
            let suite = MonitorSuite::run(&self.traj, &MonitorSettings::default(), Some(&report))
                .map_err(|e| e.to_string())?;
            self.analysis = Some(Analysis { report, monitors: suite.verdict() });
        }
        Ok(self.analysis.as_ref().expect("just filled"))
    }

    /// Rescaled profile at point `k` of the rescaling sequence, compared with the
    /// unit cylinder on `|x| <= 2`.
    pub fn rescaled(&mut self, k: usize) -> Result<RescaledView, String> {
        let p = *self
            .analysis()?
            .report
            .rescaling
            .get(k)
            .ok_or_else(|| format!("no rescaling point {k}"))?;
        let state = &self.traj.snapshots[p.snapshot];
        let r = rescale_profile(state, p.x, p.alpha, 4.0).map_err(|e| e.to_string())?;
        let d = compare_to_cylinder(&r, 2.0);
        let (x, rho) = thin(r.grid().nodes(), r.rho(), PLOT_POINTS);
        Ok(RescaledView { t: p.t, alpha: p.alpha, x, rho, deviation: d.sup, clipped: d.clipped })
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

#[wasm_bindgen]
pub struct Simulation(Demo);

#[wasm_bindgen]
impl Simulation {
    /// Evolves the JSON request to the first pinch.
    #[wasm_bindgen(constructor)]
    pub fn new(request: &str) -> Result<Simulation, JsError> {
        let req: DemoRequest = serde_json::from_str(request).map_err(|e| JsError::new(&e.to_string()))?;
        Demo::start(&req).map(Simulation).map_err(|e| JsError::new(&e))
    }

    pub fn summary(&self) -> String {
        to_json(&self.0.summary())
    }

    pub fn frame(&self, i: usize) -> Result<String, JsError> {
        self.0.frame(i).map(|f| to_json(&f)).ok_or_else(|| JsError::new("no such snapshot"))
    }

    pub fn analysis(&mut self) -> Result<String, JsError> {
        self.0.analysis().map(to_json).map_err(|e| JsError::new(&e))
    }

    pub fn rescaled(&mut self, k: usize) -> Result<String, JsError> {
        self.0.rescaled(k).map(|v| to_json(&v)).map_err(|e| JsError::new(&e))
    }
}
