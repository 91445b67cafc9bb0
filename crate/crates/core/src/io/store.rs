//! Trajectory directories: `trajectory.json` (controls, events, grid metadata),
//! one geometry CSV per snapshot, and `summary.csv` of per-snapshot scalars.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{Event, StepControls, Trajectory};
use crate::geometry::{geometry_sample, GeometrySample};
use crate::grid::{make_grid, EndCondition, FlowState};

pub const TRAJECTORY_FILE: &str = "trajectory.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_HEADER: &str = "index,t,n,min_rho,max_A2,min_H,max_yv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub file: String,
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub ends: [EndCondition; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryIndex {
    pub controls: StepControls,
    pub events: Vec<Event>,
    pub snapshots: Vec<SnapshotMeta>,
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn summary_row(index: usize, g: &GeometrySample) -> String {
    format!(
        "{index},{},{},{},{},{},{}\n",
        g.t,
        g.len(),
        g.y.iter().copied().fold(f64::INFINITY, f64::min),
        g.max_a2(),
        g.min_mean(),
        g.max_yv()
    )
}

/// Writes the trajectory into `dir` (created if needed) and returns the relative
/// paths of the files written.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![];
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    let mut metas = Vec::with_capacity(traj.len());
    let width = traj.len().max(2).ilog10() as usize + 1;
    for (i, state) in traj.snapshots.iter().enumerate() {
        let g = geometry_sample(state)?;
        let file = format!("snapshot_{i:0width$}.csv");
        write_file(&dir.join(&file), g.to_csv().as_bytes())?;
        summary.push_str(&summary_row(i, &g));
        let grid = state.grid();
        metas.push(SnapshotMeta {
            file: file.clone(),
            t: state.t(),
            a: grid.a(),
            b: grid.b(),
            n: grid.n(),
            ends: state.ends(),
        });
        files.push(file);
    }
    write_file(&dir.join(SUMMARY_FILE), summary.as_bytes())?;
    files.push(SUMMARY_FILE.into());
    let index = TrajectoryIndex {
        controls: traj.controls.clone(),
        events: traj.events.clone(),
        snapshots: metas,
    };
    write_file(&dir.join(TRAJECTORY_FILE), serde_json::to_string_pretty(&index)?.as_bytes())?;
    files.push(TRAJECTORY_FILE.into());
    Ok(files)
}

/// Reads `x` and `rho` back from a snapshot CSV written by [`write_trajectory`].
fn read_snapshot(path: &Path, meta: &SnapshotMeta) -> Result<FlowState> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(GeometrySample::CSV_HEADER) {
        return Err(Error::format(path, "unexpected header"));
    }
    let grid = make_grid(meta.a, meta.b, meta.n)?;
    let mut rho = Vec::with_capacity(meta.n);
    for (j, line) in lines.enumerate() {
        let mut cols = line.split(',');
        let mut next = |name: &str| -> Result<f64> {
            cols.next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| Error::format(path, format!("row {}: bad {name}", j + 2)))
        };
        let x = next("x")?;
        let r = next("rho")?;
        if j >= meta.n || (x - grid.x(j)).abs() > 1e-9 * (1.0 + x.abs()) {
            return Err(Error::format(path, format!("row {}: x does not match the grid", j + 2)));
        }
        rho.push(r);
    }
    if rho.len() != meta.n {
        return Err(Error::format(path, format!("{} rows for {} nodes", rho.len(), meta.n)));
    }
    FlowState::with_ends(grid, meta.t, rho, meta.ends)
}

pub fn read_trajectory(dir: &Path) -> Result<Trajectory> {
    let index_path = dir.join(TRAJECTORY_FILE);
    let index: TrajectoryIndex = serde_json::from_str(&read_file(&index_path)?)
        .map_err(|e| Error::format(&index_path, e.to_string()))?;
    let snapshots = index
        .snapshots
        .iter()
        .map(|m| read_snapshot(&dir.join(&m.file), m))
        .collect::<Result<Vec<_>>>()?;
    if snapshots.is_empty() {
        return Err(Error::format(&index_path, "trajectory has no snapshots"));
    }
    Ok(Trajectory { snapshots, events: index.events, controls: index.controls })
}
