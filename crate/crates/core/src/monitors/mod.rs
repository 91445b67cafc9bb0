//! Numerical audits of the a priori estimates along a trajectory.
//!
//! Every monitor is a pure function of the recorded snapshots. Each one produces a
//! [`MonitorSeries`]: one value per snapshot, the bound it is held to, and the
//! `(snapshot, node)` pairs where the bound is exceeded beyond tolerance.

mod estimates;
mod region;
mod residuals;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::geometry::GeometrySample;
use crate::singularity::SingularityReport;

pub use estimates::{
    curvature_ratio_samples, height_bound_samples, monitor_curvature_ratios,
    monitor_height_bound, monitor_pinned_quantity, monitor_q_over_h, monitor_yv,
    phi, pinned_quantity_samples, q_over_h_samples, yv_samples, QOverHReport, QhWindow,
};
pub use region::{region_negative_h, region_track, RegionSlice, RegionTrack};
pub use residuals::{
    convergence_order, residual_evolution_identities, spatial_height_residual, ResidualPoint,
    ResidualRecord,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSettings {
    /// Threshold `c` of the negative-curvature region `H < -c`.
    pub c: f64,
    pub lambda: f64,
    pub mu: f64,
    /// Admissible `|A|^2 / H^2` in the blow-up neighbourhood.
    pub c0: f64,
    /// Relative slack on bounds derived from initial data.
    pub tol_growth: f64,
    /// Configured cap of the pinned quantity `|A|^2 phi(v^2)`.
    pub cap: f64,
    /// Evaluate the gradient and curvature evolution identities as well.
    pub extended_identities: bool,
}

impl Default for MonitorSettings {
    fn default() -> Self {
        MonitorSettings {
            c: 0.25,
            lambda: 10.0,
            mu: 1.0,
            c0: 10.0,
            tol_growth: 1e-2,
            cap: 50.0,
            extended_identities: false,
        }
    }
}

impl MonitorSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::Config(format!("region threshold c must be positive (got {})", self.c)));
        }
        if !(self.mu > 0.75) {
            return Err(Error::Config(format!(
                "the pinned curvature quantity requires mu > 3/4 (got {})",
                self.mu
            )));
        }
        if !(self.lambda > self.mu) {
            return Err(Error::Config(format!(
                "lambda must exceed mu * max v^2 >= mu (lambda = {}, mu = {})",
                self.lambda, self.mu
            )));
        }
        if !(self.c0 >= 1.0) {
            return Err(Error::Config(format!("c0 must be at least 1 (got {})", self.c0)));
        }
        if !(self.tol_growth >= 0.0) {
            return Err(Error::Config("tol_growth must be non-negative".into()));
        }
        if !(self.cap > 0.0) {
            return Err(Error::Config("cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    InitialData,
    Boundary,
    Cap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorPoint {
    pub t: f64,
    /// Absent when the monitored set is empty at this snapshot.
    pub value: Option<f64>,
    /// Absent while no bounding data exist yet.
    pub bound: Option<f64>,
    pub source: BoundSource,
    pub violated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub snapshot: usize,
    pub t: f64,
    pub node: usize,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSeries {
    pub name: String,
    pub points: Vec<MonitorPoint>,
    pub violations: Vec<Violation>,
    /// The series stopped early (pole of the weight function).
    pub truncated: bool,
    pub notes: Vec<String>,
}

impl MonitorSeries {
    pub(crate) fn new(name: &str) -> Self {
        MonitorSeries {
            name: name.to_string(),
            points: vec![],
            violations: vec![],
            truncated: false,
            notes: vec![],
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty() && !self.truncated
    }

    /// Records a flag unless the same `(snapshot, node)` is already flagged.
    pub(crate) fn flag(&mut self, v: Violation) {
        if !self
            .violations
            .iter()
            .any(|w| w.snapshot == v.snapshot && w.node == v.node)
        {
            self.violations.push(v);
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value,bound,violated\n");
        for p in &self.points {
            let value = p.value.map(|v| v.to_string()).unwrap_or_default();
            let bound = p.bound.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", p.t, value, bound, u8::from(p.violated)));
        }
        out
    }
}

/// Grid spacing of a sample.
pub(crate) fn spacing(g: &GeometrySample) -> f64 {
    g.x[1] - g.x[0]
}

pub(crate) fn same_grid(a: &GeometrySample, b: &GeometrySample) -> bool {
    a.x == b.x
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub name: String,
    pub passed: bool,
    pub violations: usize,
    pub snapshots: usize,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorVerdict {
    pub passed: bool,
    pub monitors: Vec<MonitorSummary>,
    pub q_over_h: Option<QOverHSummary>,
    pub residuals: ResidualSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QOverHSummary {
    pub excluded_nodes: usize,
    pub ratio_exceed_nodes: usize,
    pub chain_constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub max_spatial_height: f64,
    pub max_mean_curvature: Option<f64>,
    pub skipped_triples: usize,
}

/// All monitors of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSuite {
    pub series: Vec<MonitorSeries>,
    pub q_over_h: Option<QOverHReport>,
    pub residuals: ResidualRecord,
}

impl MonitorSuite {
    pub fn run(
        traj: &Trajectory,
        settings: &MonitorSettings,
        report: Option<&SingularityReport>,
    ) -> Result<MonitorSuite> {
        settings.validate()?;
        let geos = traj.geometries();
        let mut series = vec![
            height_bound_samples(&geos, settings.c)?,
            yv_samples(&geos, settings.tol_growth),
        ];
        let (kp, abs_kp) = curvature_ratio_samples(&geos, settings.c, settings.tol_growth)?;
        series.push(kp);
        series.push(abs_kp);
        let (g, floor) = pinned_quantity_samples(&geos, settings)?;
        series.push(g);
        series.push(floor);
        let q_over_h = match report.and_then(QhWindow::from_report) {
            Some(window) => match q_over_h_samples(&geos, &window, settings.c0) {
                Ok(r) => Some(r),
                Err(Error::NotApplicable(_)) => None,
                Err(e) => return Err(e),
            },
            None => None,
        };
        if let Some(r) = &q_over_h {
            series.push(r.series.clone());
        }
        let residuals = residual_evolution_identities(traj, settings.extended_identities);
        Ok(MonitorSuite { series, q_over_h, residuals })
    }

    pub fn passed(&self) -> bool {
        self.series.iter().all(MonitorSeries::passed)
    }

    pub fn verdict(&self) -> MonitorVerdict {
        MonitorVerdict {
            passed: self.passed(),
            monitors: self
                .series
                .iter()
                .map(|s| MonitorSummary {
                    name: s.name.clone(),
                    passed: s.passed(),
                    violations: s.violations.len(),
                    snapshots: s.points.len(),
                    notes: s.notes.clone(),
                })
                .collect(),
            q_over_h: self.q_over_h.as_ref().map(|r| QOverHSummary {
                excluded_nodes: r.excluded_nodes,
                ratio_exceed_nodes: r.ratio_exceed_nodes,
                chain_constant: r.chain_constant,
            }),
            residuals: ResidualSummary {
                max_spatial_height: self
                    .residuals
                    .spatial_height
                    .iter()
                    .map(|p| p.value)
                    .fold(0.0, f64::max),
                max_mean_curvature: self
                    .residuals
                    .mean_curvature
                    .iter()
                    .map(|p| p.value)
                    .reduce(f64::max),
                skipped_triples: self.residuals.skipped_triples,
            },
        }
    }
}
