//! Flat `key = value` sweep configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use qam_mppm_core::analytic::AnalyticMethod;
use qam_mppm_core::constellation::Constellation;
use qam_mppm_core::mppm::MppmCode;
use qam_mppm_core::sim::Detector;

pub const KEYS: &[&str] = &[
    "mode",
    "grid.start",
    "grid.stop",
    "grid.step",
    "sys.N",
    "sys.w",
    "sys.nQ",
    "sys.m",
    "sys.Rb",
    "detectors",
    "methods",
    "sim.trials",
    "sim.seed",
    "out.csv",
    "out.plot",
];

const REQUIRED: &[&str] = &[
    "mode",
    "grid.start",
    "grid.stop",
    "grid.step",
    "sys.N",
    "sys.w",
    "sys.nQ",
    "sys.m",
    "detectors",
    "methods",
    "out.csv",
];

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Sweep over Eb/N0 in dB, normalized link.
    Ebn0,
    /// Sweep over received optical power in dBm, physical link.
    Popt,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Ebn0 => "ebn0",
            Mode::Popt => "popt",
        }
    }

    pub fn axis_label(self) -> &'static str {
        match self {
            Mode::Ebn0 => "E_b/N_0 (dB)",
            Mode::Popt => "P_opt (dBm)",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Mode::Ebn0 => "dB",
            Mode::Popt => "dBm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    /// Grid values `start + i * step` up to and including `stop`.
    pub fn points(&self) -> Vec<f64> {
        let span = (self.stop - self.start) / self.step;
        let count = (span + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| {
                let x = self.start + i as f64 * self.step;
                (x * 1e9).round() / 1e9
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub n: u32,
    pub w: u32,
    /// Bits per QAM symbol.
    pub n_q: u32,
    pub m: f64,
    /// Bit rate in bits/s, needed in `popt` mode.
    pub rb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub mode: Mode,
    pub grid: Grid,
    pub system: SystemParams,
    pub detectors: Vec<Detector>,
    pub methods: Vec<AnalyticMethod>,
    /// Frame budget per sweep point and detector.
    pub trials: u64,
    pub seed: u64,
    pub out_csv: PathBuf,
    pub out_plot: Option<PathBuf>,
}

impl SweepSpec {
    pub fn methods_for(&self, detector: Detector) -> impl Iterator<Item = AnalyticMethod> + '_ {
        self.methods.iter().copied().filter(move |m| method_detector(*m) == detector)
    }
}

pub fn detector_name(d: Detector) -> &'static str {
    match d {
        Detector::Cmd => "cmd",
        Detector::Imd => "imd",
    }
}

pub fn method_name(m: AnalyticMethod) -> &'static str {
    match m {
        AnalyticMethod::CmdJa => "ja",
        AnalyticMethod::CmdSa => "sa",
        AnalyticMethod::ImdNi => "ni",
        AnalyticMethod::ImdUb => "ub",
    }
}

pub fn method_detector(m: AnalyticMethod) -> Detector {
    match m {
        AnalyticMethod::CmdJa | AnalyticMethod::CmdSa => Detector::Cmd,
        AnalyticMethod::ImdNi | AnalyticMethod::ImdUb => Detector::Imd,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid configuration:\n{}", join(.0))]
    Invalid(Vec<Diagnostic>),
}

impl ConfigError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            ConfigError::Invalid(d) => d,
            ConfigError::Io { .. } => &[],
        }
    }
}

fn join(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

pub fn parse_config(path: &Path, overrides: &[(&str, String)]) -> Result<SweepSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut spec = parse_config_str(&text, overrides)?;
    // relative output paths from the file are taken relative to its directory
    let base = path.parent().unwrap_or(Path::new(""));
    let from_file = |key: &str| !overrides.iter().any(|(k, _)| *k == key);
    if from_file("out.csv") && spec.out_csv.is_relative() {
        spec.out_csv = base.join(&spec.out_csv);
    }
    if from_file("out.plot") {
        if let Some(p) = spec.out_plot.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
    }
    Ok(spec)
}

/// Parses configuration text; `overrides` replace file keys.
pub fn parse_config_str(text: &str, overrides: &[(&str, String)]) -> Result<SweepSpec, ConfigError> {
    let mut diags = Vec::new();
    let mut entries: BTreeMap<String, (Option<usize>, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            diags.push(Diagnostic {
                line: Some(lineno),
                key: line.to_string(),
                message: "expected key = value".into(),
            });
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            diags.push(Diagnostic {
                line: Some(lineno),
                key: k.to_string(),
                message: "unknown key".into(),
            });
            continue;
        }
        if let Some((prev, _)) = entries.get(k) {
            diags.push(Diagnostic {
                line: Some(lineno),
                key: k.to_string(),
                message: format!("duplicate key (first set on line {})", prev.unwrap_or(0)),
            });
            continue;
        }
        entries.insert(k.to_string(), (Some(lineno), v.to_string()));
    }
    for (k, v) in overrides {
        if !KEYS.contains(k) {
            diags.push(Diagnostic {
                line: None,
                key: k.to_string(),
                message: "unknown key".into(),
            });
            continue;
        }
        entries.insert(k.to_string(), (None, v.clone()));
    }
    let mut p = Parser { entries, diags };
    let spec = p.build();
    if p.diags.is_empty() {
        Ok(spec.expect("validated spec"))
    } else {
        Err(ConfigError::Invalid(p.diags))
    }
}

struct Parser {
    entries: BTreeMap<String, (Option<usize>, String)>,
    diags: Vec<Diagnostic>,
}

impl Parser {
    fn error(&mut self, key: &str, message: impl Into<String>) {
        let line = self.entries.get(key).and_then(|e| e.0);
        self.diags.push(Diagnostic {
            line,
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        match self.entries.get(key) {
            Some((_, v)) if !v.is_empty() => Some(v.clone()),
            Some(_) => {
                self.error(key, "empty value");
                None
            }
            None => {
                if REQUIRED.contains(&key) {
                    self.error(key, "missing required key");
                }
                None
            }
        }
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        let v = self.raw(key)?;
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Some(x),
            _ => {
                self.error(key, format!("`{v}` is not a finite number"));
                None
            }
        }
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        let v = self.raw(key)?;
        if let Ok(x) = v.parse::<u64>() {
            return Some(x);
        }
        match v.parse::<f64>() {
            Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Some(x as u64),
            _ => {
                self.error(key, format!("`{v}` is not a non-negative integer"));
                None
            }
        }
    }

    fn small(&mut self, key: &str) -> Option<u32> {
        let x = self.uint(key)?;
        match u32::try_from(x) {
            Ok(x) => Some(x),
            Err(_) => {
                self.error(key, "out of range");
                None
            }
        }
    }

    fn list<T>(&mut self, key: &str, item: impl Fn(&str) -> Option<T>, what: &str) -> Option<Vec<T>>
    where
        T: PartialEq,
    {
        let v = self.raw(key)?;
        let mut out = Vec::new();
        let mut ok = true;
        for tok in v.split(',').map(str::trim) {
            match item(&tok.to_ascii_lowercase()) {
                Some(x) if out.contains(&x) => {
                    self.error(key, format!("`{tok}` listed twice"));
                    ok = false;
                }
                Some(x) => out.push(x),
                None => {
                    self.error(key, format!("`{tok}` is not a {what}"));
                    ok = false;
                }
            }
        }
        if out.is_empty() && ok {
            self.error(key, "empty set");
            ok = false;
        }
        ok.then_some(out)
    }

    fn build(&mut self) -> Option<SweepSpec> {
        let mode = self.raw("mode").and_then(|v| match v.to_ascii_lowercase().as_str() {
            "ebn0" => Some(Mode::Ebn0),
            "popt" => Some(Mode::Popt),
            _ => {
                self.error("mode", format!("`{v}` is neither ebn0 nor popt"));
                None
            }
        });

        let start = self.float("grid.start");
        let stop = self.float("grid.stop");
        let step = self.float("grid.step");
        let grid = match (start, stop, step) {
            (Some(start), Some(stop), Some(step)) => {
                if step == 0.0 {
                    self.error("grid.step", "step must be nonzero");
                    None
                } else if (stop - start) * step < 0.0 {
                    self.error("grid.step", "step points away from grid.stop");
                    None
                } else if (stop - start) / step > 1e6 {
                    self.error("grid.step", "more than 10^6 grid points");
                    None
                } else {
                    Some(Grid { start, stop, step })
                }
            }
            _ => None,
        };

        let n = self.small("sys.N");
        let w = self.small("sys.w");
        if let (Some(n), Some(w)) = (n, w) {
            if let Err(e) = MppmCode::new(n, w) {
                self.error("sys.N", format!("N={n}, w={w}: {e}"));
            }
        }
        let n_q = self.small("sys.nQ");
        if let Some(nq) = n_q {
            if let Err(e) = Constellation::new(nq) {
                self.error("sys.nQ", e.to_string());
            }
        }
        let m = self.float("sys.m");
        if let Some(m) = m {
            if !(m > 0.0 && m <= 1.0) {
                self.error("sys.m", "modulation index must lie in (0, 1]");
            }
        }
        let rb = self.float("sys.Rb");
        if let Some(rb) = rb {
            if rb <= 0.0 {
                self.error("sys.Rb", "bit rate must be positive");
            }
        } else if mode == Some(Mode::Popt) && !self.entries.contains_key("sys.Rb") {
            self.error("sys.Rb", "required in popt mode");
        }

        let detectors = self.list(
            "detectors",
            |t| match t {
                "cmd" => Some(Detector::Cmd),
                "imd" => Some(Detector::Imd),
                _ => None,
            },
            "detector (cmd, imd)",
        );
        let methods = self.list(
            "methods",
            |t| match t {
                "ja" => Some(AnalyticMethod::CmdJa),
                "sa" => Some(AnalyticMethod::CmdSa),
                "ni" => Some(AnalyticMethod::ImdNi),
                "ub" => Some(AnalyticMethod::ImdUb),
                _ => None,
            },
            "method (ja, sa, ni, ub)",
        );
        if let (Some(ds), Some(ms)) = (&detectors, &methods) {
            for &m in ms {
                let d = method_detector(m);
                if !ds.contains(&d) {
                    self.error(
                        "methods",
                        format!("`{}` needs detector {}, which is not selected", method_name(m), detector_name(d)),
                    );
                }
            }
        }

        let trials = if self.entries.contains_key("sim.trials") {
            self.uint("sim.trials")
        } else {
            Some(DEFAULT_TRIALS)
        };
        if trials == Some(0) {
            self.error("sim.trials", "budget must be at least one frame");
        }
        let seed = if self.entries.contains_key("sim.seed") {
            self.uint("sim.seed")
        } else {
            Some(DEFAULT_SEED)
        };
        let out_csv = self.raw("out.csv").map(PathBuf::from);
        let out_plot = self.raw("out.plot").map(PathBuf::from);
        if out_plot.is_some() && out_plot == out_csv {
            self.error("out.plot", "same path as out.csv");
        }

        if !self.diags.is_empty() {
            return None;
        }
        Some(SweepSpec {
            mode: mode?,
            grid: grid?,
            system: SystemParams {
                n: n?,
                w: w?,
                n_q: n_q?,
                m: m?,
                rb,
            },
            detectors: detectors?,
            methods: methods?,
            trials: trials?,
            seed: seed?,
            out_csv: out_csv?,
            out_plot,
        })
    }
}
