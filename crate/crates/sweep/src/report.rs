//! CSV rows: simulated rates with 95% half-widths next to analytic values.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use qam_mppm_core::analytic::{AnalyticMethod, AnalyticResult};
use qam_mppm_core::sim::TrialCounters;

pub const HEADER: [&str; 18] = [
    "sweep_db",
    "ser_sim",
    "ser_ci",
    "ber_sim",
    "ber_ci",
    "ser_mppm_sim",
    "ser_qam_cond_sim",
    "pe_cmd_ja",
    "pe_cmd_sa",
    "pb_cmd_ja",
    "pb_cmd_sa",
    "pe_imd_ni",
    "pe_imd_ub",
    "pb_imd_ni",
    "pb_imd_ub",
    "frames",
    "sym_errors",
    "bit_errors",
];

/// 1.96, the two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Analytic {
    pub pe: Option<f64>,
    pub pb: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub sweep_db: f64,
    pub ser_sim: f64,
    pub ser_ci: f64,
    pub ber_sim: f64,
    pub ber_ci: f64,
    pub ser_mppm_sim: f64,
    pub ser_qam_cond_sim: f64,
    pub cmd_ja: Analytic,
    pub cmd_sa: Analytic,
    pub imd_ni: Analytic,
    pub imd_ub: Analytic,
    pub frames: u64,
    pub sym_errors: u64,
    pub bit_errors: u64,
}

/// Upper one-sided 95% bound on a rate after `n` error-free trials.
pub fn zero_error_bound(n: u64) -> f64 {
    if n == 0 {
        1.0
    } else {
        -f64::exp_m1(0.05f64.ln() / n as f64)
    }
}

fn rate(errors: u64, n: u64) -> f64 {
    if errors == 0 {
        zero_error_bound(n)
    } else {
        errors as f64 / n as f64
    }
}

fn binomial_ci(errors: u64, n: u64) -> f64 {
    if errors == 0 || n == 0 {
        return 0.0;
    }
    let p = errors as f64 / n as f64;
    Z95 * (p * (1.0 - p) / n as f64).sqrt()
}

impl ErrorReport {
    pub fn new(sweep: f64, c: &TrialCounters, q_total: u32, analytic: &[AnalyticResult]) -> Self {
        let n = c.frames;
        let nb = n * q_total as u64;
        let ber_ci = if c.bit_errors == 0 || n < 2 {
            0.0
        } else {
            // frame-clustered variance of the per-frame bit error count
            let mean = c.bit_errors as f64 / n as f64;
            let var = (c.bit_errors_sq as f64 / n as f64 - mean * mean).max(0.0) * n as f64 / (n - 1) as f64;
            Z95 * (var / n as f64).sqrt() / q_total as f64
        };
        let mut r = ErrorReport {
            sweep_db: sweep,
            ser_sim: rate(c.symbol_errors, n),
            ser_ci: binomial_ci(c.symbol_errors, n),
            ber_sim: rate(c.bit_errors, nb),
            ber_ci,
            ser_mppm_sim: rate(c.mppm_errors, n),
            ser_qam_cond_sim: rate(c.qam_errors_cond, c.qam_slots_cond),
            frames: n,
            sym_errors: c.symbol_errors,
            bit_errors: c.bit_errors,
            ..Default::default()
        };
        for a in analytic {
            *r.analytic_mut(a.method) = Analytic {
                pe: Some(a.pe),
                pb: Some(a.pb),
            };
        }
        r
    }

    /// Probabilities in `[0, 1]`, half-widths nonnegative, counts bounded.
    pub fn is_consistent(&self) -> bool {
        let p = |x: f64| (0.0..=1.0).contains(&x);
        let analytic = [self.cmd_ja, self.cmd_sa, self.imd_ni, self.imd_ub]
            .iter()
            .flat_map(|a| [a.pe, a.pb])
            .flatten()
            .all(p);
        analytic
            && [self.ser_sim, self.ber_sim, self.ser_mppm_sim, self.ser_qam_cond_sim].into_iter().all(p)
            && self.ser_ci >= 0.0
            && self.ber_ci >= 0.0
            && self.sym_errors <= self.frames
    }

    pub fn analytic(&self, m: AnalyticMethod) -> Analytic {
        match m {
            AnalyticMethod::CmdJa => self.cmd_ja,
            AnalyticMethod::CmdSa => self.cmd_sa,
            AnalyticMethod::ImdNi => self.imd_ni,
            AnalyticMethod::ImdUb => self.imd_ub,
        }
    }

    fn analytic_mut(&mut self, m: AnalyticMethod) -> &mut Analytic {
        match m {
            AnalyticMethod::CmdJa => &mut self.cmd_ja,
            AnalyticMethod::CmdSa => &mut self.cmd_sa,
            AnalyticMethod::ImdNi => &mut self.imd_ni,
            AnalyticMethod::ImdUb => &mut self.imd_ub,
        }
    }

    pub fn to_record(&self) -> Vec<String> {
        let f = |x: f64| format!("{x:e}");
        let o = |x: Option<f64>| x.map(f).unwrap_or_default();
        vec![
            f(self.sweep_db),
            f(self.ser_sim),
            f(self.ser_ci),
            f(self.ber_sim),
            f(self.ber_ci),
            f(self.ser_mppm_sim),
            f(self.ser_qam_cond_sim),
            o(self.cmd_ja.pe),
            o(self.cmd_sa.pe),
            o(self.cmd_ja.pb),
            o(self.cmd_sa.pb),
            o(self.imd_ni.pe),
            o(self.imd_ub.pe),
            o(self.imd_ni.pb),
            o(self.imd_ub.pb),
            self.frames.to_string(),
            self.sym_errors.to_string(),
            self.bit_errors.to_string(),
        ]
    }

    pub fn from_record(rec: &csv::StringRecord) -> Result<Self, ReadError> {
        if rec.len() != HEADER.len() {
            return Err(ReadError::Format(format!("expected {} fields, found {}", HEADER.len(), rec.len())));
        }
        let f = |i: usize| -> Result<f64, ReadError> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| ReadError::Format(format!("{}: `{}` is not a number", HEADER[i], &rec[i])))
        };
        let o = |i: usize| -> Result<Option<f64>, ReadError> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                f(i).map(Some)
            }
        };
        let u = |i: usize| -> Result<u64, ReadError> {
            rec[i]
                .parse::<u64>()
                .map_err(|_| ReadError::Format(format!("{}: `{}` is not a count", HEADER[i], &rec[i])))
        };
        Ok(ErrorReport {
            sweep_db: f(0)?,
            ser_sim: f(1)?,
            ser_ci: f(2)?,
            ber_sim: f(3)?,
            ber_ci: f(4)?,
            ser_mppm_sim: f(5)?,
            ser_qam_cond_sim: f(6)?,
            cmd_ja: Analytic { pe: o(7)?, pb: o(9)? },
            cmd_sa: Analytic { pe: o(8)?, pb: o(10)? },
            imd_ni: Analytic { pe: o(11)?, pb: o(13)? },
            imd_ub: Analytic { pe: o(12)?, pb: o(14)? },
            frames: u(15)?,
            sym_errors: u(16)?,
            bit_errors: u(17)?,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed report: {0}")]
    Format(String),
}

/// Streams rows to a CSV file, flushing after every row.
pub struct ReportWriter {
    inner: csv::Writer<File>,
}

impl ReportWriter {
    /// Creates `path`, writes `comments` as `# ` lines and the header.
    pub fn create(path: &Path, comments: &[String]) -> io::Result<Self> {
        let mut file = File::create(path)?;
        for c in comments {
            writeln!(file, "# {c}")?;
        }
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(HEADER)?;
        inner.flush()?;
        Ok(ReportWriter { inner })
    }

    pub fn push(&mut self, row: &ErrorReport) -> io::Result<()> {
        self.inner.write_record(row.to_record())?;
        self.inner.flush()
    }
}

/// Reads a report back; returns the comment lines (without `# `) and rows.
pub fn read_report(path: &Path) -> Result<(Vec<String>, Vec<ErrorReport>), ReadError> {
    let text = std::fs::read_to_string(path)?;
    let comments = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim_start().to_string())
        .collect();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(ReadError::Format(format!("unexpected header {:?}", header)));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(ErrorReport::from_record(&rec?)?);
    }
    Ok((comments, rows))
}
