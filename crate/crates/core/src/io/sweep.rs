//! Cartesian parameter sweeps over independent runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PresetSpec;

use super::commands::{exit_code, run_in, RunResult};
use super::config::{PresetConfig, RunConfig};
use super::store::write_file;

pub const SWEEP_FILE: &str = "sweep.csv";

/// One sweep axis: a dotted config key and its values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    /// `section.key=v1,v2,...`
    fn from_str(s: &str) -> Result<Self> {
        let (key, values) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("axis `{s}` must have the form key=v1,v2,...")))?;
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(Error::Config(format!("axis `{key}` has no values")));
        }
        Ok(Axis { key: key.trim().to_string(), values })
    }
}

/// All configs of the Cartesian product, with the overrides that produced each. No axes
/// yields the template alone.
pub fn expand(template: &RunConfig, axes: &[Axis]) -> Result<Vec<(Vec<(String, String)>, RunConfig)>> {
    let mut out = vec![(vec![], template.clone())];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.values.len());
        for (overrides, cfg) in &out {
            for v in &axis.values {
                let mut o = overrides.clone();
                o.push((axis.key.clone(), v.clone()));
                next.push((o, cfg.with_override(&axis.key, v)?));
            }
        }
        out = next;
    }
    Ok(out)
}

/// Observed convergence orders of `values` computed at spacings `hs` (coarse to fine).
///
/// With an exact value, entry `i >= 1` is `log(e[i-1] / e[i]) / log(h[i-1] / h[i])`;
/// without one, entry `i >= 2` uses successive differences instead.
pub fn observed_orders(hs: &[f64], values: &[f64], exact: Option<f64>) -> Vec<Option<f64>> {
    let n = values.len();
    let mut orders = vec![None; n];
    match exact {
        Some(x) => {
            for i in 1..n {
                let (e0, e1) = ((values[i - 1] - x).abs(), (values[i] - x).abs());
                orders[i] = Some((e0 / e1).ln() / (hs[i - 1] / hs[i]).ln());
            }
        }
        None => {
            for i in 2..n {
                let d0 = (values[i - 2] - values[i - 1]).abs();
                let d1 = (values[i - 1] - values[i]).abs();
                orders[i] = Some((d0 / d1).ln() / (hs[i - 1] / hs[i]).ln());
            }
        }
    }
    orders
}

fn exact_extinction(cfg: &RunConfig) -> Option<f64> {
    match cfg.preset {
        PresetConfig::Builtin { spec: PresetSpec::Cylinder { r } } => Some(0.5 * r * r),
        _ => None,
    }
}

#[derive(Clone, Debug)]
pub struct SweepRun {
    pub overrides: Vec<(String, String)>,
    pub dir: PathBuf,
    pub config: RunConfig,
    pub exit_code: u8,
    pub result: Option<RunResult>,
}

/// Runs every config of the sweep in `out/run_NNN` using up to `jobs` threads, writes
/// `sweep.csv`, and returns the runs in sweep order.
pub fn sweep_in(template: &RunConfig, axes: &[Axis], out: &Path, jobs: usize) -> Result<Vec<SweepRun>> {
    let configs = expand(template, axes)?;
    let width = configs.len().max(2).ilog10() as usize + 1;
    let runs: Vec<(Vec<(String, String)>, RunConfig, PathBuf)> = configs
        .into_iter()
        .enumerate()
        .map(|(i, (o, mut cfg))| {
            let dir = out.join(format!("run_{i:0width$}"));
            cfg.output.dir = Some(dir.clone());
            (o, cfg, dir)
        })
        .collect();
    let results: Mutex<Vec<Option<(u8, Option<RunResult>)>>> = Mutex::new(vec![None; runs.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, runs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((_, cfg, dir)) = runs.get(i) else { break };
                let outcome = match run_in(cfg, dir) {
                    Ok(r) => (r.exit_code, Some(r)),
                    Err(e) => {
                        eprintln!("{}: {e}", dir.display());
                        (exit_code(&e), None)
                    }
                };
                results.lock().expect("no worker panics while holding the lock")[i] = Some(outcome);
            });
        }
    });
    let results = results.into_inner().expect("workers finished");
    let runs: Vec<SweepRun> = runs
        .into_iter()
        .zip(results)
        .map(|((overrides, config, dir), r)| {
            let (exit_code, result) = r.expect("every run was attempted");
            SweepRun { overrides, dir, config, exit_code, result }
        })
        .collect();
    write_file(&out.join(SWEEP_FILE), sweep_csv(axes, &runs).as_bytes())?;
    Ok(runs)
}

fn sweep_csv(axes: &[Axis], runs: &[SweepRun]) -> String {
    let mut s = String::from("run");
    for a in axes {
        let _ = write!(s, ",{}", a.key);
    }
    s.push_str(",exit,h,t_est,t_est_uncertainty,t_est_error,observed_order,rate_constant,rate_tail,verdict\n");
    let t_est: Vec<Option<f64>> = runs
        .iter()
        .map(|r| r.result.as_ref().and_then(|r| r.report.fit.as_ref()).map(|f| f.t_est))
        .collect();
    let hs: Vec<f64> = runs
        .iter()
        .map(|r| (r.config.grid.b - r.config.grid.a) / (r.config.grid.n - 1) as f64)
        .collect();
    // orders only make sense along a single resolution axis
    let orders = if axes.len() == 1 && axes[0].key == "grid.n" && t_est.iter().all(Option::is_some) {
        let values: Vec<f64> = t_est.iter().map(|t| t.expect("checked")).collect();
        observed_orders(&hs, &values, exact_extinction(&runs[0].config))
    } else {
        vec![None; runs.len()]
    };
    let show = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for (i, r) in runs.iter().enumerate() {
        let name = r.dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let _ = write!(s, "{name}");
        for (_, v) in &r.overrides {
            let _ = write!(s, ",{v}");
        }
        let report = r.result.as_ref().map(|r| &r.report);
        let fit = report.and_then(|r| r.fit.as_ref());
        let error = t_est[i].zip(exact_extinction(&r.config)).map(|(t, x)| (t - x).abs());
        let _ = writeln!(
            s,
            ",{},{},{},{},{},{},{},{},{}",
            r.exit_code,
            hs[i],
            show(t_est[i]),
            show(fit.map(|f| f.uncertainty)),
            show(error),
            show(orders[i]),
            show(report.and_then(|r| r.rate_constant)),
            show(report.and_then(|r| r.rate_tail)),
            report.map(|r| format!("{:?}", r.verdict)).unwrap_or_default()
        );
    }
    s
}

/// `sweep`: the exit status is the largest child exit status.
pub fn cmd_sweep(template: &RunConfig, axes: &[Axis], out: &Path, jobs: usize) -> u8 {
    match sweep_in(template, axes, out, jobs) {
        Ok(runs) => runs.iter().map(|r| r.exit_code).max().unwrap_or(0),
        Err(e) => {
            eprintln!("{}: {e}", out.display());
            exit_code(&e)
        }
    }
}
