//! `run`, `analyze` and `report`.
//!
//! A run directory holds `config.txt`, `trajectory/`, `singularity.json`, `monitors/`
//! and finally `manifest.json`, whose presence marks the run as complete.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::{evolve, Event, Trajectory};
use crate::monitors::{MonitorSuite, MonitorVerdict};
use crate::singularity::{
    analyze, compare_to_cylinder, curvature_series, rescale_profile, SingularityReport,
};

use super::config::{parse_config, RunConfig};
use super::store::{read_file, read_trajectory, write_file, write_trajectory};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_MONITOR: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_IO: u8 = 4;
pub const EXIT_INCOMPLETE: u8 = 5;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.txt";
pub const SINGULARITY_FILE: &str = "singularity.json";
pub const TRAJECTORY_DIR: &str = "trajectory";
pub const MONITOR_DIR: &str = "monitors";
pub const REPORT_DIR: &str = "report";
/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "AXIFLOW_OUTPUT_ROOT";

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::ConfigKey { .. } | Error::Input(_) => EXIT_CONFIG,
        Error::Io { .. } | Error::Format { .. } | Error::Json(_) => EXIT_IO,
        Error::Degenerate { .. }
        | Error::Numerical(_)
        | Error::NotApplicable(_)
        | Error::InsufficientResolution(_) => EXIT_NUMERICAL,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub started: String,
    pub finished: String,
    pub events: Vec<Event>,
    pub files: Vec<FileDigest>,
    pub monitor_verdict: Option<MonitorVerdict>,
    pub singularity_report: String,
    pub exit_code: u8,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<RunManifest> {
        let path = dir.join(MANIFEST_FILE);
        serde_json::from_str(&read_file(&path)?).map_err(|e| Error::format(&path, e.to_string()))
    }

    /// Files whose current digest differs from the recorded one.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = vec![];
        for f in &self.files {
            if digest(&dir.join(&f.path))?.sha256 != f.sha256 {
                bad.push(f.path.clone());
            }
        }
        Ok(bad)
    }
}

fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        path: String::new(),
        bytes: bytes.len() as u64,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Output directory of a config: its own `output.dir`, else
/// `$AXIFLOW_OUTPUT_ROOT/<config stem>`, else `runs/<config stem>`.
pub fn resolve_output_dir(cfg: &RunConfig, config_path: &Path) -> PathBuf {
    if let Some(dir) = &cfg.output.dir {
        return dir.clone();
    }
    let stem = config_path.file_stem().map(|s| s.to_os_string()).unwrap_or_else(|| "run".into());
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(stem)
}

/// Results of a completed run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub report: SingularityReport,
    pub monitors_passed: Option<bool>,
    pub exit_code: u8,
}

struct Analysis {
    report: SingularityReport,
    suite: Option<MonitorSuite>,
}

fn analyse(traj: &Trajectory, cfg: &RunConfig) -> Result<Analysis> {
    let report = analyze(traj, &cfg.analysis)?;
    let suite = if cfg.monitors_enabled {
        Some(MonitorSuite::run(traj, &cfg.monitors, Some(&report))?)
    } else {
        None
    };
    Ok(Analysis { report, suite })
}

fn write_analysis(dir: &Path, a: &Analysis) -> Result<Vec<String>> {
    let mut files = vec![];
    write_file(&dir.join(SINGULARITY_FILE), serde_json::to_string_pretty(&a.report)?.as_bytes())?;
    files.push(SINGULARITY_FILE.to_string());
    if let Some(suite) = &a.suite {
        let mdir = dir.join(MONITOR_DIR);
        fs::create_dir_all(&mdir).map_err(|e| Error::io(&mdir, e))?;
        for s in &suite.series {
            let name = format!("{MONITOR_DIR}/{}.csv", s.name);
            write_file(&dir.join(&name), s.to_csv().as_bytes())?;
            files.push(name);
        }
        for (name, json) in [
            ("verdict.json", serde_json::to_string_pretty(&suite.verdict())?),
            ("residuals.json", serde_json::to_string_pretty(&suite.residuals)?),
        ] {
            let name = format!("{MONITOR_DIR}/{name}");
            write_file(&dir.join(&name), json.as_bytes())?;
            files.push(name);
        }
    }
    Ok(files)
}

fn result_code(a: &Analysis) -> u8 {
    match &a.suite {
        Some(s) if !s.passed() => EXIT_MONITOR,
        _ => EXIT_OK,
    }
}

fn write_manifest(
    dir: &Path,
    cfg: &RunConfig,
    started: String,
    events: &[Event],
    files: &[String],
    a: &Analysis,
) -> Result<()> {
    let mut digests = Vec::with_capacity(files.len());
    for f in files {
        let mut d = digest(&dir.join(f))?;
        d.path = f.clone();
        digests.push(d);
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        started,
        finished: now(),
        events: events.to_vec(),
        files: digests,
        monitor_verdict: a.suite.as_ref().map(MonitorSuite::verdict),
        singularity_report: SINGULARITY_FILE.into(),
        exit_code: result_code(a),
    };
    write_file(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?.as_bytes())
}

fn remove_manifest(dir: &Path) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    match fs::remove_file(&path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(Error::io(path, e)),
        _ => Ok(()),
    }
}

/// Evolves, analyses and writes a full run into `dir`.
pub fn run_in(cfg: &RunConfig, dir: &Path) -> Result<RunResult> {
    let started = now();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    remove_manifest(dir)?;
    write_file(&dir.join(CONFIG_FILE), cfg.to_text().as_bytes())?;
    let traj = evolve(cfg.initial_state()?, &cfg.controls)?;
    let mut files = vec![CONFIG_FILE.to_string()];
    for f in write_trajectory(&dir.join(TRAJECTORY_DIR), &traj)? {
        files.push(format!("{TRAJECTORY_DIR}/{f}"));
    }
    let a = analyse(&traj, cfg)?;
    files.extend(write_analysis(dir, &a)?);
    write_manifest(dir, cfg, started, &traj.events, &files, &a)?;
    Ok(RunResult {
        exit_code: result_code(&a),
        monitors_passed: a.suite.as_ref().map(MonitorSuite::passed),
        report: a.report,
    })
}

/// `run`: exit 0 when clean, 2 on monitor violations, 3 on numerical failure, 4 on
/// I/O failure.
pub fn cmd_run(cfg: &RunConfig, dir: &Path) -> u8 {
    match run_in(cfg, dir) {
        Ok(r) => {
            eprintln!(
                "{}: {:?}{}",
                dir.display(),
                r.report.verdict,
                if r.exit_code == EXIT_MONITOR { " (monitor violations)" } else { "" }
            );
            r.exit_code
        }
        Err(e) => {
            eprintln!("{}: {e}", dir.display());
            exit_code(&e)
        }
    }
}

fn load_run(dir: &Path) -> Result<(RunConfig, Trajectory)> {
    let mut cfg = parse_config(&read_file(&dir.join(CONFIG_FILE))?)?;
    cfg.rebase_paths(dir);
    let traj = read_trajectory(&dir.join(TRAJECTORY_DIR))?;
    Ok((cfg, traj))
}

/// Re-analyses the stored trajectory of `dir` with its stored config.
pub fn analyze_dir(dir: &Path) -> Result<RunResult> {
    let started = now();
    let (cfg, traj) = load_run(dir)?;
    remove_manifest(dir)?;
    let a = analyse(&traj, &cfg)?;
    let mut files = vec![CONFIG_FILE.to_string()];
    let tdir = dir.join(TRAJECTORY_DIR);
    let mut names: Vec<String> = fs::read_dir(&tdir)
        .map_err(|e| Error::io(&tdir, e))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    names.sort();
    files.extend(names.into_iter().map(|n| format!("{TRAJECTORY_DIR}/{n}")));
    files.extend(write_analysis(dir, &a)?);
    write_manifest(dir, &cfg, started, &traj.events, &files, &a)?;
    Ok(RunResult {
        exit_code: result_code(&a),
        monitors_passed: a.suite.as_ref().map(MonitorSuite::passed),
        report: a.report,
    })
}

/// `analyze`: exit 5 when the directory holds no trajectory.
pub fn cmd_analyze(dir: &Path) -> u8 {
    if !dir.join(TRAJECTORY_DIR).join(super::store::TRAJECTORY_FILE).is_file() {
        eprintln!("{}: no stored trajectory", dir.display());
        return EXIT_INCOMPLETE;
    }
    match analyze_dir(dir) {
        Ok(r) => r.exit_code,
        Err(e) => {
            eprintln!("{}: {e}", dir.display());
            exit_code(&e)
        }
    }
}

/// Snapshot indices spread evenly over the run, first and last included.
fn sample_indices(len: usize, count: usize) -> Vec<usize> {
    if len <= count {
        return (0..len).collect();
    }
    let mut idx: Vec<usize> = (0..count).map(|i| i * (len - 1) / (count - 1)).collect();
    idx.dedup();
    idx
}

/// Plot-ready CSVs and `summary.txt` under `dir/report`; returns the files written.
pub fn report_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let (cfg, traj) = load_run(dir)?;
    let a = analyse(&traj, &cfg)?;
    let out = dir.join(REPORT_DIR);
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut written = vec![];
    let mut emit = |name: &str, body: String| -> Result<()> {
        let path = out.join(name);
        write_file(&path, body.as_bytes())?;
        written.push(path);
        Ok(())
    };

    let mut waterfall = String::from("snapshot,t,x,rho\n");
    for i in sample_indices(traj.len(), 12) {
        let s = &traj.snapshots[i];
        let stride = s.len().div_ceil(1000).max(1);
        for j in (0..s.len()).step_by(stride).chain(std::iter::once(s.len() - 1)) {
            let _ = writeln!(waterfall, "{i},{},{},{}", s.t(), s.grid().x(j), s.rho()[j]);
            if j == s.len() - 1 {
                break;
            }
        }
    }
    emit("waterfall.csv", waterfall)?;

    let t_est = a.report.fit.as_ref().map(|f| f.t_est);
    if let Some(t_est) = t_est {
        let series = curvature_series(&traj);
        let mut loglog =
            String::from("t,tau,max_A2,log10_tau,log10_max_A2,log10_reference\n");
        for (t, a2) in series.t.iter().zip(&series.max_a2) {
            let tau = t_est - t;
            if tau > 0.0 {
                let _ = writeln!(
                    loglog,
                    "{t},{tau},{a2},{},{},{}",
                    tau.log10(),
                    a2.log10(),
                    0.5f64.log10() - tau.log10()
                );
            }
        }
        emit("loglog.csv", loglog)?;
    }

    let mut overlay = String::from("i,t,alpha,x_tilde,rho_tilde,cylinder\n");
    let mut deviations = String::from("i,t,x,alpha,deviation,relative_deviation,clipped\n");
    for (i, p) in a.report.rescaling.iter().enumerate() {
        let state = &traj.snapshots[p.snapshot];
        let Ok(r) = rescale_profile(state, p.x, p.alpha, cfg.analysis.window) else { continue };
        for (x, rho) in r.grid().nodes().iter().zip(r.rho()) {
            let _ = writeln!(overlay, "{i},{},{},{x},{rho},1", p.t, p.alpha);
        }
        let d = compare_to_cylinder(&r, cfg.analysis.compare_window);
        let _ = writeln!(
            deviations,
            "{i},{},{},{},{},{},{}",
            p.t,
            p.x,
            p.alpha,
            d.sup,
            d.relative,
            u8::from(d.clipped)
        );
    }
    emit("rescaled_overlay.csv", overlay)?;
    emit("rescaled_deviation.csv", deviations)?;

    if let Some(suite) = &a.suite {
        let mut m = String::from("monitor,t,value,bound,violated\n");
        for s in &suite.series {
            for line in s.to_csv().lines().skip(1) {
                let _ = writeln!(m, "{},{line}", s.name);
            }
        }
        emit("monitors.csv", m)?;
    }

    emit("summary.txt", summary_text(&cfg, &traj, &a))?;
    Ok(written)
}

fn summary_text(cfg: &RunConfig, traj: &Trajectory, a: &Analysis) -> String {
    let mut s = String::new();
    let r = &a.report;
    let first = &traj.snapshots[0];
    let last = traj.final_state();
    let _ = writeln!(s, "preset        {}", match &cfg.preset {
        super::config::PresetConfig::Builtin { spec } => spec.kind().to_string(),
        super::config::PresetConfig::TableFile { path } => format!("table {}", path.display()),
    });
    let _ = writeln!(s, "grid          [{}, {}], n = {} -> {}", cfg.grid.a, cfg.grid.b, first.len(), last.len());
    let _ = writeln!(s, "scheme        {}", cfg.controls.scheme);
    let _ = writeln!(s, "snapshots     {}", traj.len());
    let _ = writeln!(s, "final time    {}", last.t());
    match traj.pinch() {
        Some((t, rho)) => {
            let _ = writeln!(s, "pinch         t = {t}, min rho = {rho}");
        }
        None => {
            let _ = writeln!(s, "pinch         none");
        }
    }
    let regrids = traj.events.iter().filter(|e| matches!(e, Event::Regrid { .. })).count();
    let _ = writeln!(s, "regrids       {regrids}");
    let _ = writeln!(s, "verdict       {:?}", r.verdict);
    if let Some(f) = &r.fit {
        let _ = writeln!(s, "T_est         {} +/- {}", f.t_est, f.uncertainty);
        let _ = writeln!(s, "fit slope     {} (weighted R^2 = {})", f.slope, f.r_squared);
    }
    let show = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
    let _ = writeln!(s, "x_star        {}", show(r.x_star));
    let _ = writeln!(s, "rate const    {}", show(r.rate_constant));
    let _ = writeln!(s, "rate tail     {}", show(r.rate_tail));
    let _ = writeln!(s, "|A|^2/H^2     {}", show(r.ratio_bound));
    let _ = writeln!(s, "rescalings    {}", r.rescaling.len());
    for note in &r.notes {
        let _ = writeln!(s, "note          {note}");
    }
    if let Some(suite) = &a.suite {
        let _ = writeln!(s, "\nmonitor                 violations");
        for m in &suite.series {
            let _ = writeln!(
                s,
                "{:<24}{}{}",
                m.name,
                m.violations.len(),
                if m.truncated { " (truncated)" } else { "" }
            );
        }
    }
    s
}

/// `report`: exit 5 when the run is incomplete (no manifest).
pub fn cmd_report(dir: &Path) -> u8 {
    if !dir.join(MANIFEST_FILE).is_file() {
        eprintln!("{}: no {MANIFEST_FILE}; the run is incomplete", dir.display());
        return EXIT_INCOMPLETE;
    }
    match report_dir(dir) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}: {e}", dir.display());
            exit_code(&e)
        }
    }
}
