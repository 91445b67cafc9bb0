//! Line-based run configuration.
//!
//! ```text
//! # comment
//! [grid]
//! a = 0
//! b = 1
//! n = 401
//!
//! [preset]
//! kind = cosine_neck
//! m = 0.6
//! amplitude = 0.4
//! w = 1
//! ```
//!
//! Sections are `grid`, `preset`, `controls`, `monitors`, `analysis` and `output`.
//! Every key is optional except `grid.a`, `grid.b`, `grid.n` and `preset.kind`; unknown
//! sections and keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{Scheme, StepControls};
use crate::grid::{load_table, make_grid, preset_profile, FlowState, PresetSpec, ProfileGrid};
use crate::monitors::MonitorSettings;
use crate::singularity::AnalysisSettings;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PresetConfig {
    Builtin { spec: PresetSpec },
    /// CSV with header `x,rho` matching the grid nodes.
    TableFile { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub preset: PresetConfig,
    pub controls: StepControls,
    pub monitors_enabled: bool,
    pub monitors: MonitorSettings,
    pub analysis: AnalysisSettings,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn make_grid(&self) -> Result<ProfileGrid> {
        make_grid(self.grid.a, self.grid.b, self.grid.n)
    }

    pub fn initial_state(&self) -> Result<FlowState> {
        let grid = self.make_grid()?;
        let spec = match &self.preset {
            PresetConfig::Builtin { spec } => spec.clone(),
            PresetConfig::TableFile { path } => PresetSpec::Table { values: load_table(path, &grid)? },
        };
        preset_profile(&spec, &grid)
    }

    /// Makes a relative table path relative to `base` instead of the working directory.
    pub fn rebase_paths(&mut self, base: &Path) {
        if let PresetConfig::TableFile { path } = &mut self.preset {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    /// Applies a `section.key = value` override and re-validates the whole config.
    pub fn with_override(&self, dotted: &str, value: &str) -> Result<RunConfig> {
        let (section, key) = dotted.split_once('.').ok_or_else(|| {
            Error::Config(format!("override `{dotted}` must have the form section.key"))
        })?;
        let mut b = Builder::from_config(self);
        b.set(section, key, value, 0)?;
        b.finish()
    }

    /// The configuration in the input format with every default written out.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let _ = writeln!(s, "[grid]\na = {}\nb = {}\nn = {}\n", g.a, g.b, g.n);
        s.push_str("[preset]\n");
        match &self.preset {
            PresetConfig::TableFile { path } => {
                let _ = writeln!(s, "kind = table\ntable = {}", path.display());
            }
            PresetConfig::Builtin { spec } => {
                let _ = writeln!(s, "kind = {}", spec.kind());
                match spec {
                    PresetSpec::Cylinder { r } => {
                        let _ = writeln!(s, "r = {r}");
                    }
                    PresetSpec::CosineNeck { m, amplitude, w } => {
                        let _ = writeln!(s, "m = {m}\namplitude = {amplitude}\nw = {w}");
                    }
                    PresetSpec::Catenoid { c } => {
                        let _ = writeln!(s, "c = {c}");
                    }
                    PresetSpec::Table { .. } => unreachable!("inline tables are not configurable"),
                }
            }
        }
        let c = &self.controls;
        let _ = writeln!(
            s,
            "\n[controls]\nscheme = {}\nsafety = {}\nrho_stop = {}\nt_max = {}\nregrid_factor = {}\nregrid_trigger = {}\nsnapshot_stride = {}\nwall_clock = {}",
            c.scheme,
            c.safety,
            opt(c.rho_stop),
            c.t_max,
            c.regrid_factor,
            c.regrid_trigger,
            c.snapshot_stride,
            opt(c.wall_clock)
        );
        let m = &self.monitors;
        let _ = writeln!(
            s,
            "\n[monitors]\nenabled = {}\nc = {}\nlambda = {}\nmu = {}\nc0 = {}\ntol_growth = {}\ncap = {}\nextended_identities = {}",
            self.monitors_enabled,
            m.c,
            m.lambda,
            m.mu,
            m.c0,
            m.tol_growth,
            m.cap,
            m.extended_identities
        );
        let a = &self.analysis;
        let _ = writeln!(
            s,
            "\n[analysis]\nfit_fraction = {}\nmin_r_squared = {}\nrate_cap = {}\nrate_tail_band = {}, {}\ni_max = {}\nwindow = {}\ncompare_window = {}\nneighborhood_fraction = {}",
            a.fit_fraction,
            a.min_r_squared,
            a.rate_cap,
            a.rate_tail_band[0],
            a.rate_tail_band[1],
            a.i_max,
            a.window,
            a.compare_window,
            a.neighborhood_fraction
        );
        let o = &self.output;
        let dir = o.dir.as_ref().map(|d| d.display().to_string()).unwrap_or_else(|| "auto".into());
        let _ = writeln!(s, "\n[output]\ndir = {dir}\nseed = {}", o.seed);
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "auto".into())
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut b = Builder::default();
    let mut section: Option<(String, usize)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::ConfigKey {
                line,
                key: content.to_string(),
                message: "unterminated section header".into(),
            })?;
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::ConfigKey {
                    line,
                    key: name.to_string(),
                    message: format!("unknown section (expected one of {})", SECTIONS.join(", ")),
                });
            }
            section = Some((name.to_string(), line));
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigKey {
            line,
            key: content.to_string(),
            message: "expected `key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let Some((name, _)) = &section else {
            return Err(Error::ConfigKey {
                line,
                key: key.to_string(),
                message: "key outside of any [section]".into(),
            });
        };
        b.set(name, key, value, line)?;
    }
    b.finish()
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(base) = path.parent() {
        cfg.rebase_paths(base);
    }
    Ok(cfg)
}

const SECTIONS: [&str; 6] = ["grid", "preset", "controls", "monitors", "analysis", "output"];

fn keys_of(section: &str) -> &'static [&'static str] {
    match section {
        "grid" => &["a", "b", "n"],
        "preset" => &["kind", "r", "m", "amplitude", "w", "c", "table"],
        "controls" => &[
            "scheme",
            "safety",
            "rho_stop",
            "t_max",
            "regrid_factor",
            "regrid_trigger",
            "snapshot_stride",
            "wall_clock",
        ],
        "monitors" => {
            &["enabled", "c", "lambda", "mu", "c0", "tol_growth", "cap", "extended_identities"]
        }
        "analysis" => &[
            "fit_fraction",
            "min_r_squared",
            "rate_cap",
            "rate_tail_band",
            "i_max",
            "window",
            "compare_window",
            "neighborhood_fraction",
        ],
        "output" => &["dir", "seed"],
        _ => &[],
    }
}

/// Raw preset fields; the spec is assembled once all keys are known.
#[derive(Default)]
struct PresetFields {
    kind: Option<String>,
    r: Option<f64>,
    m: Option<f64>,
    amplitude: Option<f64>,
    w: Option<u32>,
    c: Option<f64>,
    table: Option<PathBuf>,
}

#[derive(Default)]
struct Builder {
    a: Option<f64>,
    b: Option<f64>,
    n: Option<usize>,
    preset: PresetFields,
    controls: StepControls,
    monitors_enabled: Option<bool>,
    monitors: MonitorSettings,
    analysis: AnalysisSettings,
    output: Option<OutputConfig>,
    /// Line of each key seen, by `section.key`.
    lines: BTreeMap<String, usize>,
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize, key: &str, what: &str) -> Result<T> {
    value.parse().map_err(|_| Error::ConfigKey {
        line,
        key: key.to_string(),
        message: format!("expected {what}, found `{value}`"),
    })
}

fn auto_or<T: std::str::FromStr>(value: &str, line: usize, key: &str, what: &str) -> Result<Option<T>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_num(value, line, key, what).map(Some)
    }
}

impl Builder {
    fn from_config(cfg: &RunConfig) -> Self {
        let mut preset = PresetFields::default();
        match &cfg.preset {
            PresetConfig::TableFile { path } => {
                preset.kind = Some("table".into());
                preset.table = Some(path.clone());
            }
            PresetConfig::Builtin { spec } => {
                preset.kind = Some(spec.kind().into());
                match *spec {
                    PresetSpec::Cylinder { r } => preset.r = Some(r),
                    PresetSpec::CosineNeck { m, amplitude, w } => {
                        preset.m = Some(m);
                        preset.amplitude = Some(amplitude);
                        preset.w = Some(w);
                    }
                    PresetSpec::Catenoid { c } => preset.c = Some(c),
                    PresetSpec::Table { .. } => {}
                }
            }
        }
        Builder {
            a: Some(cfg.grid.a),
            b: Some(cfg.grid.b),
            n: Some(cfg.grid.n),
            preset,
            controls: cfg.controls.clone(),
            monitors_enabled: Some(cfg.monitors_enabled),
            monitors: cfg.monitors.clone(),
            analysis: cfg.analysis.clone(),
            output: Some(cfg.output.clone()),
            lines: BTreeMap::new(),
        }
    }

    fn set(&mut self, section: &str, key: &str, value: &str, line: usize) -> Result<()> {
        let dotted = format!("{section}.{key}");
        if !keys_of(section).contains(&key) {
            return Err(Error::ConfigKey {
                line,
                key: dotted,
                message: format!("unknown key (expected one of {})", keys_of(section).join(", ")),
            });
        }
        self.lines.insert(dotted.clone(), line);
        let k = dotted.as_str();
        let real = |v: &str| parse_num::<f64>(v, line, k, "a number");
        let count = |v: &str| parse_num::<usize>(v, line, k, "a non-negative integer");
        let flag = |v: &str| parse_num::<bool>(v, line, k, "true or false");
        match (section, key) {
            ("grid", "a") => self.a = Some(real(value)?),
            ("grid", "b") => self.b = Some(real(value)?),
            ("grid", "n") => self.n = Some(count(value)?),
            ("preset", "kind") => self.preset.kind = Some(value.to_string()),
            ("preset", "r") => self.preset.r = Some(real(value)?),
            ("preset", "m") => self.preset.m = Some(real(value)?),
            ("preset", "amplitude") => self.preset.amplitude = Some(real(value)?),
            ("preset", "w") => self.preset.w = Some(parse_num(value, line, k, "a positive integer")?),
            ("preset", "c") => self.preset.c = Some(real(value)?),
            ("preset", "table") => self.preset.table = Some(PathBuf::from(value)),
            ("controls", "scheme") => {
                self.controls.scheme = value.parse::<Scheme>().map_err(|m| Error::ConfigKey {
                    line,
                    key: dotted.clone(),
                    message: m.to_string(),
                })?
            }
            ("controls", "safety") => self.controls.safety = real(value)?,
            ("controls", "rho_stop") => self.controls.rho_stop = auto_or(value, line, k, "a number or auto")?,
            ("controls", "t_max") => self.controls.t_max = real(value)?,
            ("controls", "regrid_factor") => self.controls.regrid_factor = count(value)?,
            ("controls", "regrid_trigger") => self.controls.regrid_trigger = real(value)?,
            ("controls", "snapshot_stride") => self.controls.snapshot_stride = count(value)?,
            ("controls", "wall_clock") => {
                self.controls.wall_clock = auto_or(value, line, k, "seconds or auto")?
            }
            ("monitors", "enabled") => self.monitors_enabled = Some(flag(value)?),
            ("monitors", "c") => self.monitors.c = real(value)?,
            ("monitors", "lambda") => self.monitors.lambda = real(value)?,
            ("monitors", "mu") => self.monitors.mu = real(value)?,
            ("monitors", "c0") => self.monitors.c0 = real(value)?,
            ("monitors", "tol_growth") => self.monitors.tol_growth = real(value)?,
            ("monitors", "cap") => self.monitors.cap = real(value)?,
            ("monitors", "extended_identities") => self.monitors.extended_identities = flag(value)?,
            ("analysis", "fit_fraction") => self.analysis.fit_fraction = real(value)?,
            ("analysis", "min_r_squared") => self.analysis.min_r_squared = real(value)?,
            ("analysis", "rate_cap") => self.analysis.rate_cap = real(value)?,
            ("analysis", "rate_tail_band") => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                let [lo, hi] = parts[..] else {
                    return Err(Error::ConfigKey {
                        line,
                        key: dotted,
                        message: format!("expected `lo, hi`, found `{value}`"),
                    });
                };
                self.analysis.rate_tail_band = [real(lo)?, real(hi)?];
            }
            ("analysis", "i_max") => self.analysis.i_max = count(value)?,
            ("analysis", "window") => self.analysis.window = real(value)?,
            ("analysis", "compare_window") => self.analysis.compare_window = real(value)?,
            ("analysis", "neighborhood_fraction") => self.analysis.neighborhood_fraction = real(value)?,
            ("output", "dir") => {
                let out = self.output.get_or_insert(OutputConfig { dir: None, seed: 0 });
                out.dir = (value != "auto").then(|| PathBuf::from(value));
            }
            ("output", "seed") => {
                let seed = parse_num(value, line, k, "a non-negative integer")?;
                self.output.get_or_insert(OutputConfig { dir: None, seed: 0 }).seed = seed;
            }
            _ => unreachable!("key list and setter agree"),
        }
        Ok(())
    }

    fn line_of(&self, dotted: &str) -> usize {
        self.lines.get(dotted).copied().unwrap_or(0)
    }

    /// Re-raises a module validation error against the key it names.
    fn blame(&self, section: &str, err: Error) -> Error {
        let message = match err {
            Error::Config(m) => m,
            other => other.to_string(),
        };
        let words: Vec<&str> = message
            .split(|c: char| !(c.is_alphanumeric() || c == '_'))
            .collect();
        let key = keys_of(section)
            .iter()
            .find(|k| words.contains(k))
            .map(|k| format!("{section}.{k}"))
            .unwrap_or_else(|| section.to_string());
        Error::ConfigKey { line: self.line_of(&key), key, message }
    }

    fn require<T: Copy>(&self, v: Option<T>, key: &str) -> Result<T> {
        v.ok_or_else(|| Error::ConfigKey {
            line: 0,
            key: key.to_string(),
            message: "required key is missing".into(),
        })
    }

    fn preset_value(&self, v: Option<f64>, key: &str, kind: &str) -> Result<f64> {
        v.ok_or_else(|| Error::ConfigKey {
            line: self.line_of("preset.kind"),
            key: format!("preset.{key}"),
            message: format!("preset `{kind}` requires `{key}`"),
        })
    }

    fn finish(self) -> Result<RunConfig> {
        let grid = GridConfig {
            a: self.require(self.a, "grid.a")?,
            b: self.require(self.b, "grid.b")?,
            n: self.require(self.n, "grid.n")?,
        };
        make_grid(grid.a, grid.b, grid.n).map_err(|e| self.blame("grid", e))?;

        let p = &self.preset;
        let kind = p.kind.clone().ok_or_else(|| Error::ConfigKey {
            line: 0,
            key: "preset.kind".into(),
            message: "required key is missing".into(),
        })?;
        let preset = match kind.as_str() {
            "cylinder" => PresetSpec::Cylinder { r: p.r.unwrap_or(1.0) }.into(),
            "cosine_neck" => PresetSpec::CosineNeck {
                m: self.preset_value(p.m, "m", &kind)?,
                amplitude: self.preset_value(p.amplitude, "amplitude", &kind)?,
                w: p.w.unwrap_or(1),
            }
            .into(),
            "catenoid" => PresetSpec::Catenoid { c: p.c.unwrap_or(1.0) }.into(),
            "table" => PresetConfig::TableFile {
                path: p.table.clone().ok_or_else(|| Error::ConfigKey {
                    line: self.line_of("preset.kind"),
                    key: "preset.table".into(),
                    message: "preset `table` requires `table = <csv path>`".into(),
                })?,
            },
            other => {
                return Err(Error::ConfigKey {
                    line: self.line_of("preset.kind"),
                    key: "preset.kind".into(),
                    message: format!(
                        "unknown preset `{other}` (expected cylinder, cosine_neck, catenoid or table)"
                    ),
                })
            }
        };
        if let PresetConfig::Builtin { spec } = &preset {
            spec.validate().map_err(|e| self.blame("preset", e))?;
            if let PresetSpec::CosineNeck { w: 0, .. } = spec {
                return Err(Error::ConfigKey {
                    line: self.line_of("preset.w"),
                    key: "preset.w".into(),
                    message: "w must be a positive integer".into(),
                });
            }
        }
        self.controls.validate().map_err(|e| self.blame("controls", e))?;
        self.monitors.validate().map_err(|e| self.blame("monitors", e))?;
        self.analysis.validate().map_err(|e| self.blame("analysis", e))?;
        Ok(RunConfig {
            grid,
            preset,
            controls: self.controls.clone(),
            monitors_enabled: self.monitors_enabled.unwrap_or(true),
            monitors: self.monitors.clone(),
            analysis: self.analysis.clone(),
            output: self.output.clone().unwrap_or(OutputConfig { dir: None, seed: 0 }),
        })
    }
}

impl From<PresetSpec> for PresetConfig {
    fn from(spec: PresetSpec) -> Self {
        PresetConfig::Builtin { spec }
    }
}
