//! Sweep orchestration: analytic values and parallel simulation per point.

use std::io;
use std::path::{Path, PathBuf};

use qam_mppm_core::analytic::{evaluate, AnalyticMethod, AnalyticOptions};
use qam_mppm_core::constellation::Constellation;
use qam_mppm_core::link::{bits_per_frame, dbm_to_watts, link_from_popt, LinkParams, ReceiverNoiseParams};
use qam_mppm_core::mppm::MppmCode;
use qam_mppm_core::sim::{simulate_range, Detector, TrialCounters};
use rayon::prelude::*;

use crate::config::{detector_name, method_name, Mode, SweepSpec, SystemParams};
use crate::plot::plot_script;
use crate::report::{ErrorReport, ReportWriter};

/// Environment variable capping the number of simulation workers.
pub const WORKERS_ENV: &str = "QAM_MPPM_WORKERS";
/// Frames per work unit.
pub const CHUNK_FRAMES: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Run the whole budget.
    Budget,
    /// Stop at the first chunk boundary with at least `min_errors` symbol
    /// errors and `min_frames` frames.
    Early { min_errors: u64, min_frames: u64 },
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::Early {
            min_errors: 100,
            min_frames: 100_000,
        }
    }
}

impl StopRule {
    fn done(self, c: &TrialCounters) -> bool {
        match self {
            StopRule::Budget => false,
            StopRule::Early { min_errors, min_frames } => c.symbol_errors >= min_errors && c.frames >= min_frames,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Worker threads; `None` reads [`WORKERS_ENV`], then uses all cores.
    pub workers: Option<usize>,
    pub stop: StopRule,
    pub analytic: AnalyticOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: None,
            stop: StopRule::default(),
            analytic: AnalyticOptions::default(),
        }
    }
}

impl RunOptions {
    fn worker_count(&self) -> usize {
        if let Some(w) = self.workers {
            return w.max(1);
        }
        let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        match std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            Some(cap) if cap >= 1 => cap.min(cores),
            _ => cores,
        }
    }

    pub fn pool(&self) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.worker_count())
            .build()
            .expect("thread pool")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("cannot write {}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{what} at sweep point {x}: {source}")]
    Numeric {
        x: f64,
        what: String,
        source: qam_mppm_core::Error,
    },
}

/// A sweep system with its derived code, constellation and frame size.
#[derive(Debug, Clone)]
pub struct System {
    pub params: SystemParams,
    pub code: MppmCode,
    pub constellation: Constellation,
    pub q_total: u32,
}

impl System {
    pub fn new(params: SystemParams) -> qam_mppm_core::Result<Self> {
        let code = MppmCode::new(params.n, params.w)?;
        let constellation = Constellation::new(params.n_q)?;
        let q_total = bits_per_frame(params.n, params.w, &constellation)?;
        Ok(System {
            params,
            code,
            constellation,
            q_total,
        })
    }

    /// Link at sweep value `x` (dB in `ebn0` mode, dBm in `popt` mode).
    pub fn link(&self, mode: Mode, x: f64) -> qam_mppm_core::Result<LinkParams> {
        let p = &self.params;
        match mode {
            Mode::Ebn0 => LinkParams::from_ebn0(p.n, p.w, p.m, &self.constellation, x),
            Mode::Popt => {
                let rb = p.rb.ok_or_else(|| qam_mppm_core::Error::Parameter { name: "R_b", reason: "required in popt mode" })?;
                link_from_popt(dbm_to_watts(x), &ReceiverNoiseParams::typical(), p.n, p.w, p.m, rb, self.q_total)
            }
        }
    }
}

/// Simulates up to `budget` frames of one point. Chunks run in parallel but
/// are merged and tested against `stop` in index order, so the counters do
/// not depend on the worker count.
pub fn simulate_point(
    pool: &rayon::ThreadPool,
    system: &System,
    link: &LinkParams,
    detector: Detector,
    seed: u64,
    point: u64,
    budget: u64,
    stop: StopRule,
) -> TrialCounters {
    let chunks = budget.div_ceil(CHUNK_FRAMES);
    let wave = 2 * pool.current_num_threads() as u64;
    let mut total = TrialCounters::default();
    let mut next = 0u64;
    pool.install(|| {
        while next < chunks {
            let end = (next + wave).min(chunks);
            let parts: Vec<TrialCounters> = (next..end)
                .into_par_iter()
                .map(|i| {
                    let frames = i * CHUNK_FRAMES..((i + 1) * CHUNK_FRAMES).min(budget);
                    simulate_range(&system.code, &system.constellation, link, detector, seed, point, frames)
                })
                .collect();
            for p in &parts {
                total.merge(p);
                if stop.done(&total) {
                    return;
                }
            }
            next = end;
        }
    });
    total
}

/// Reports of one detector, in grid order.
#[derive(Debug, Clone)]
pub struct DetectorRun {
    pub detector: Detector,
    pub csv: PathBuf,
    pub rows: Vec<ErrorReport>,
    pub counters: Vec<TrialCounters>,
}

/// CSV path for `detector`: `out.csv` itself with a single detector,
/// otherwise `<stem>_<detector>.<ext>`.
pub fn csv_path(spec: &SweepSpec, detector: Detector) -> PathBuf {
    if spec.detectors.len() == 1 {
        return spec.out_csv.clone();
    }
    let stem = spec.out_csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match spec.out_csv.extension() {
        Some(ext) => format!("{stem}_{}.{}", detector_name(detector), ext.to_string_lossy()),
        None => format!("{stem}_{}", detector_name(detector)),
    };
    spec.out_csv.with_file_name(name)
}

pub fn header_comments(spec: &SweepSpec, system: &System, detector: Detector) -> Vec<String> {
    let p = &spec.system;
    let mut c = vec![
        "qam-mppm error-rate sweep".to_string(),
        format!(
            "mode={} sweep_db unit={} ({})",
            spec.mode.name(),
            spec.mode.unit(),
            spec.mode.axis_label()
        ),
        format!(
            "detector={} N={} w={} nQ={} M_Q={} m={} q_total={}",
            detector_name(detector),
            p.n,
            p.w,
            p.n_q,
            system.constellation.order(),
            p.m,
            system.q_total
        ),
    ];
    if spec.mode == Mode::Popt {
        let rx = ReceiverNoiseParams::typical();
        c.push(format!(
            "Rb={:e} T={} K R_L={} ohm F={} RIN={:e} /Hz responsivity={} A/W",
            p.rb.unwrap_or(f64::NAN),
            rx.temperature,
            rx.load,
            rx.noise_factor,
            rx.rin,
            rx.responsivity
        ));
    }
    let methods: Vec<&str> = spec.methods_for(detector).map(method_name).collect();
    c.push(format!("analytic methods={}", if methods.is_empty() { "none".into() } else { methods.join(",") }));
    c.push(format!("seed={} trials={} chunk={}", spec.seed, spec.trials, CHUNK_FRAMES));
    c.push("ci: 95% normal half-widths; ber_ci uses the per-frame bit error variance".into());
    c.push("zero-error rates report the one-sided 95% bound 1-0.05^(1/n)".into());
    c
}

/// Analytic results of `methods` at one point.
pub fn analytic_point(
    system: &System,
    link: &LinkParams,
    methods: impl Iterator<Item = AnalyticMethod>,
    x: f64,
    opts: &AnalyticOptions,
) -> Result<Vec<qam_mppm_core::analytic::AnalyticResult>, RunError> {
    methods
        .map(|m| {
            evaluate(m, &system.code, &system.constellation, link, opts).map_err(|source| RunError::Numeric {
                x,
                what: m.label().to_string(),
                source,
            })
        })
        .collect()
}

/// Runs the sweep, writing one CSV per detector and the optional plot script.
pub fn run(spec: &SweepSpec, opts: &RunOptions) -> Result<Vec<DetectorRun>, RunError> {
    let system = System::new(spec.system).map_err(|source| RunError::Numeric {
        x: spec.grid.start,
        what: "system".into(),
        source,
    })?;
    let pool = opts.pool();
    let grid = spec.grid.points();
    let mut runs = Vec::new();
    for &detector in &spec.detectors {
        let path = csv_path(spec, detector);
        let io_err = |source| RunError::Io {
            path: path.clone(),
            source,
        };
        let mut writer = ReportWriter::create(&path, &header_comments(spec, &system, detector)).map_err(io_err)?;
        let mut rows = Vec::with_capacity(grid.len());
        let mut all = Vec::with_capacity(grid.len());
        for (i, &x) in grid.iter().enumerate() {
            let link = system.link(spec.mode, x).map_err(|source| RunError::Numeric {
                x,
                what: "link".into(),
                source,
            })?;
            let analytic = analytic_point(&system, &link, spec.methods_for(detector), x, &opts.analytic)?;
            let counters = simulate_point(&pool, &system, &link, detector, spec.seed, i as u64, spec.trials, opts.stop);
            let row = ErrorReport::new(x, &counters, system.q_total, &analytic);
            log::info!(
                "{} {}={x} frames={} ser={:.3e} ber={:.3e}",
                detector_name(detector),
                spec.mode.name(),
                row.frames,
                row.ser_sim,
                row.ber_sim
            );
            writer.push(&row).map_err(io_err)?;
            rows.push(row);
            all.push(counters);
        }
        runs.push(DetectorRun {
            detector,
            csv: path,
            rows,
            counters: all,
        });
    }
    if let Some(plot) = &spec.out_plot {
        let text = plot_script(spec, &runs, plot);
        write_file(plot, &text)?;
    }
    Ok(runs)
}

fn write_file(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn spec(dir: &Path, extra: &str) -> SweepSpec {
        let text = format!(
            "mode=ebn0\ngrid.start=4\ngrid.stop=8\ngrid.step=2\nsys.N=8\nsys.w=2\nsys.nQ=2\nsys.m=0.7\n\
             detectors=cmd,imd\nmethods=ja,ni\nsim.trials=30000\nsim.seed=5\nout.csv={}\n{extra}",
            dir.join("s.csv").display()
        );
        parse_config_str(&text, &[]).unwrap()
    }

    #[test]
    fn early_stop_is_deterministic_across_workers() {
        let sys = System::new(SystemParams { n: 8, w: 2, n_q: 2, m: 0.7, rb: None }).unwrap();
        let link = sys.link(Mode::Ebn0, 2.0).unwrap();
        let stop = StopRule::Early {
            min_errors: 50,
            min_frames: 15_000,
        };
        let one = RunOptions { workers: Some(1), ..Default::default() }.pool();
        let many = RunOptions { workers: Some(6), ..Default::default() }.pool();
        let a = simulate_point(&one, &sys, &link, Detector::Imd, 3, 0, 95_000, stop);
        let b = simulate_point(&many, &sys, &link, Detector::Imd, 3, 0, 95_000, stop);
        assert_eq!(a, b);
        assert_eq!(a.frames, 20_000);
        let full = simulate_point(&many, &sys, &link, Detector::Imd, 3, 0, 95_000, StopRule::Budget);
        assert_eq!(full.frames, 95_000);
        assert_eq!(full, simulate_point(&one, &sys, &link, Detector::Imd, 3, 0, 95_000, StopRule::Budget));
    }

    #[test]
    fn per_detector_files_and_columns() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(dir.path(), "");
        let runs = run(&s, &RunOptions { workers: Some(2), ..Default::default() }).unwrap();
        assert_eq!(runs.len(), 2);
        assert!(runs[0].csv.ends_with("s_cmd.csv"));
        assert!(runs[1].csv.ends_with("s_imd.csv"));
        for r in &runs[0].rows {
            assert!(r.cmd_ja.pe.is_some() && r.imd_ni.pe.is_none());
            assert!(r.cmd_sa.pe.is_none());
        }
        for r in &runs[1].rows {
            assert!(r.imd_ni.pe.is_some() && r.cmd_ja.pe.is_none());
        }
        let (_, back) = crate::report::read_report(&runs[1].csv).unwrap();
        assert_eq!(back, runs[1].rows);
    }

    #[test]
    fn unwritable_output_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = spec(dir.path(), "");
        s.out_csv = dir.path().join("missing").join("x.csv");
        assert!(matches!(run(&s, &RunOptions::default()), Err(RunError::Io { .. })));
    }

    #[test]
    fn popt_link_is_physical() {
        let sys = System::new(SystemParams {
            n: 12,
            w: 6,
            n_q: 4,
            m: 0.5,
            rb: Some(50e6),
        })
        .unwrap();
        let l = sys.link(Mode::Popt, -20.0).unwrap();
        assert!(!l.normalized);
        // T_s = q_total / (N R_b)
        assert!((l.ts - 33.0 / (12.0 * 50e6)).abs() < 1e-20);
        let lo = sys.link(Mode::Popt, -30.0).unwrap();
        assert!(lo.mppm_scale() < l.mppm_scale());
    }
}
