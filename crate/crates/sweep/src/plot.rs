//! gnuplot script generation.

use std::fmt::Write as _;
use std::path::{Component, Path, PathBuf};

use qam_mppm_core::analytic::AnalyticMethod;
use qam_mppm_core::sim::Detector;

use crate::config::{Mode, SweepSpec};
use crate::report::HEADER;
use crate::run::{header_comments, DetectorRun, System};

/// `target` relative to directory `base`.
pub fn relative_path(target: &Path, base: &Path) -> PathBuf {
    let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let (t, b) = (abs(target), abs(base));
    let tc: Vec<Component> = t.components().collect();
    let bc: Vec<Component> = b.components().collect();
    let common = tc.iter().zip(&bc).take_while(|(a, b)| a == b).count();
    if common == 0 {
        return t;
    }
    let mut out = PathBuf::new();
    for _ in common..bc.len() {
        out.push("..");
    }
    for c in &tc[common..] {
        out.push(c);
    }
    out
}

fn column(name: &str) -> usize {
    HEADER.iter().position(|h| *h == name).expect("known column") + 1
}

fn quote(p: &Path) -> String {
    format!("'{}'", p.to_string_lossy().replace('\\', "/").replace('\'', "''"))
}

struct Series {
    file: String,
    skip: usize,
    x: usize,
    y: usize,
    err: Option<usize>,
    title: String,
    style: String,
}

/// Script drawing SER (left) and BER (right) against the sweep variable on
/// a log scale: simulated points with error bars and analytic curves.
pub fn plot_script(spec: &SweepSpec, runs: &[DetectorRun], plot_path: &Path) -> String {
    let base = plot_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let system = System::new(spec.system).ok();
    let mut ser = Vec::new();
    let mut ber = Vec::new();
    let x = column("sweep_db");
    for (k, run) in runs.iter().enumerate() {
        let file = quote(&relative_path(&run.csv, base));
        let skip = system
            .as_ref()
            .map(|s| header_comments(spec, s, run.detector).len())
            .unwrap_or(0)
            + 1;
        let det = match run.detector {
            Detector::Cmd => "CMD",
            Detector::Imd => "IMD",
        };
        let color = if run.detector == Detector::Cmd { 7 } else { 6 };
        let point = k + 5;
        ser.push(Series {
            file: file.clone(),
            skip,
            x,
            y: column("ser_sim"),
            err: Some(column("ser_ci")),
            title: format!("{det} simulated"),
            style: format!("with yerrorbars pt {} lc {color}", point),
        });
        ber.push(Series {
            file: file.clone(),
            skip,
            x,
            y: column("ber_sim"),
            err: Some(column("ber_ci")),
            title: format!("{det} simulated"),
            style: format!("with yerrorbars pt {} lc {color}", point),
        });
        for (j, m) in spec.methods_for(run.detector).enumerate() {
            let (pe, pb) = match m {
                AnalyticMethod::CmdJa => ("pe_cmd_ja", "pb_cmd_ja"),
                AnalyticMethod::CmdSa => ("pe_cmd_sa", "pb_cmd_sa"),
                AnalyticMethod::ImdNi => ("pe_imd_ni", "pb_imd_ni"),
                AnalyticMethod::ImdUb => ("pe_imd_ub", "pb_imd_ub"),
            };
            let style = format!("with lines lw 2 dt {} lc {color}", j + 1);
            ser.push(Series {
                file: file.clone(),
                skip,
                x,
                y: column(pe),
                err: None,
                title: m.label().into(),
                style: style.clone(),
            });
            ber.push(Series {
                file: file.clone(),
                skip,
                x,
                y: column(pb),
                err: None,
                title: m.label().into(),
                style,
            });
        }
    }

    let p = &spec.system;
    let output = plot_path.with_extension("png");
    let output = output.file_name().map(PathBuf::from).unwrap_or_else(|| "sweep.png".into());
    let mut s = String::new();
    let _ = writeln!(s, "# qam-mppm sweep plot; run from this directory: gnuplot {}", plot_path.file_name().map(|f| f.to_string_lossy()).unwrap_or_default());
    let _ = writeln!(s, "set terminal pngcairo size 1400,560 enhanced");
    let _ = writeln!(s, "set output {}", quote(&output));
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale y");
    let _ = writeln!(s, "set format y '10^{{%L}}'");
    let _ = writeln!(s, "set grid xtics ytics mytics");
    let _ = writeln!(s, "set key bottom left");
    let _ = writeln!(s, "set xlabel '{}'", axis(spec.mode));
    let _ = writeln!(s, "set yrange [1e-6:1]");
    let _ = writeln!(s, "set multiplot layout 1,2 title 'N={}, w={}, M_Q={}, m={}'", p.n, p.w, 1u64 << p.n_q, p.m);
    emit(&mut s, "SER", &ser);
    emit(&mut s, "BER", &ber);
    let _ = writeln!(s, "unset multiplot");
    s
}

fn axis(mode: Mode) -> &'static str {
    match mode {
        Mode::Ebn0 => "E_b/N_0 (dB)",
        Mode::Popt => "P_{opt} (dBm)",
    }
}

fn emit(s: &mut String, ylabel: &str, series: &[Series]) {
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    let parts: Vec<String> = series
        .iter()
        .map(|r| {
            let using = match r.err {
                Some(e) => format!("{}:{}:{}", r.x, r.y, e),
                None => format!("{}:{}", r.x, r.y),
            };
            format!("{} skip {} using {} title '{}' {}", r.file, r.skip, using, r.title, r.style)
        })
        .collect();
    let _ = writeln!(s, "plot \\\n  {}", parts.join(", \\\n  "));
}
