//! Detector cost table.

use std::fmt::Write as _;

use qam_mppm_core::link::{complexity, ComplexityReport, DetectorCost};

/// Per-frame operation counts of both detectors and their ratio `G`,
/// printed next to the duty cycle `w/N` it roughly follows.
pub fn complexity_report(n: u32, w: u32, m_q: u32, ns: u32) -> qam_mppm_core::Result<(ComplexityReport, String)> {
    let r = complexity(n, w, m_q, ns)?;
    let mut s = String::new();
    let _ = writeln!(s, "N={n} w={w} M_Q={m_q} N_s={ns}");
    let _ = writeln!(s, "{:<9}{:>14}{:>14}{:>14}{:>14}{:>14}", "detector", "input_filter", "qam_metrics", "qam_sorting", "mppm", "total");
    let row = |s: &mut String, name: &str, c: &DetectorCost| {
        let _ = writeln!(
            s,
            "{name:<9}{:>14.1}{:>14.1}{:>14.1}{:>14.1}{:>14.1}",
            c.input_filter,
            c.qam_metrics,
            c.qam_sorting,
            c.mppm,
            c.total()
        );
    };
    row(&mut s, "CMD", &r.cmd);
    row(&mut s, "IMD", &r.imd);
    let _ = writeln!(s, "G = IMD/CMD = {:.4}", r.gain);
    let _ = writeln!(s, "w/N = {:.4}", w as f64 / n as f64);
    Ok((r, s))
}
