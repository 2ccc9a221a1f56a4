//! Symbol and bit error probabilities of both detectors.
//!
//! MPPM error probabilities are integrated directly as complements,
//! e.g. `P(min signal metric < max noise metric)`, which keeps high-SNR
//! values accurate far below the quadrature tolerance of `1 - P_c`.
//!
//! The CMD joint average (JA) weights every ordered `w`-tuple of QAM
//! symbols equally. Its MPPM part only depends on how many symbols fall in
//! each energy ring, so the sum runs over ring compositions, each weighted by
//! its multinomial probability; the QAM part factorizes inside each
//! composition into per-ring means. The separate average (SA) replaces the
//! joint expectation with a product of averages over the mixture density.

use alloc::vec;
use alloc::vec::Vec;

use crate::constellation::Constellation;
use crate::distributions::{
    cdf_nsl_imd, energy_rings, f_sl_cmd, f_sl_imd, sf_nsl_imd, sf_sl_imd, tails_sl_cmd, CmdMixture,
};
use crate::link::LinkParams;
use crate::mppm::{binomial, k_l, ne_mppm, MppmCode};
use crate::quadrature::{integrate, Integral, Tolerance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnalyticMethod {
    CmdJa,
    CmdSa,
    ImdNi,
    ImdUb,
}

impl AnalyticMethod {
    pub fn label(self) -> &'static str {
        match self {
            AnalyticMethod::CmdJa => "CMD/JA",
            AnalyticMethod::CmdSa => "CMD/SA",
            AnalyticMethod::ImdNi => "IMD/NI",
            AnalyticMethod::ImdUb => "IMD/UB",
        }
    }
}

/// Per-symbol conditional QAM error model used by the joint average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QamSymbolModel {
    /// Exact rectangular-region probabilities on square and rectangular
    /// grids, union bound on cross constellations.
    #[default]
    ExactGrid,
    /// Pairwise union bound for every shape, clamped to 1.
    UnionBound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticOptions {
    pub tol: Tolerance,
    /// Largest number of ring compositions the joint average may integrate.
    pub combination_budget: u128,
    pub qam_model: QamSymbolModel,
}

impl Default for AnalyticOptions {
    fn default() -> Self {
        AnalyticOptions {
            tol: Tolerance::default(),
            combination_budget: 10_000_000,
            qam_model: QamSymbolModel::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticResult {
    pub method: AnalyticMethod,
    /// QAM-MPPM symbol error probability.
    pub pe: f64,
    /// Bit error probability.
    pub pb: f64,
    /// Average probability of correct MPPM detection.
    pub pc_mppm: f64,
    /// Average QAM symbol error probability.
    pub pe_qam: f64,
    /// Sum of quadrature error estimates that entered `pe`.
    pub abs_error: f64,
    /// Set when `pb` replaces joint expectations by products of averages.
    pub factorized: bool,
}

fn clamp_probability(name: &str, v: f64) -> f64 {
    if !(0.0..=1.0).contains(&v) {
        log::debug!("clamping {name} = {v:e} to [0, 1]");
    }
    v.clamp(0.0, 1.0)
}

fn check_link(code: &MppmCode, link: &LinkParams) -> Result<()> {
    if code.slots() != link.n || code.weight() != link.w {
        return Err(Error::param("link", "N and w differ from the MPPM code"));
    }
    Ok(())
}

// P(at least one of k i.i.d. metrics with survival `sf` exceeds x),
// i.e. 1 - (1 - sf)^k.
#[inline]
fn any_exceeds(sf: f64, k: u32) -> f64 {
    if sf >= 1.0 {
        1.0
    } else {
        -libm::expm1(k as f64 * libm::log1p(-sf))
    }
}

#[inline]
fn all_below(sf: f64, k: u32) -> f64 {
    libm::pow(1.0 - sf, k as f64)
}

#[inline]
fn sq(x: f64) -> f64 {
    x * x
}

fn cmd_domain(omegas: impl Iterator<Item = f64>, sigma2: f64, noise_slots: u32) -> (f64, Vec<f64>) {
    let s = libm::sqrt(sigma2);
    let mut hi = 0.0f64;
    let mut breaks = Vec::new();
    for o in omegas {
        let a = libm::sqrt(o);
        hi = hi.max(a);
        breaks.push(sq((a - 4.0 * s).max(0.0)));
        breaks.push(o);
        breaks.push(sq(a + 4.0 * s));
    }
    // where the largest noise metric usually sits
    let typical = 2.0 * sigma2 * libm::log((noise_slots as f64).max(2.0));
    breaks.extend([0.5 * typical, typical, 2.0 * typical]);
    let upper = sq(hi + 12.0 * s);
    (upper, breaks)
}

fn group_omegas(omegas: &[f64]) -> Vec<(f64, u32)> {
    let mut sorted: Vec<f64> = omegas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups: Vec<(f64, u32)> = Vec::new();
    for o in sorted {
        match groups.last_mut() {
            Some((g, c)) if *g == o => *c += 1,
            _ => groups.push((o, 1)),
        }
    }
    groups
}

fn cmd_joint_integral(groups: &[(f64, u32)], n: u32, w: u32, sigma2: f64, tol: Tolerance, complement: bool) -> Result<Integral> {
    let k = n - w;
    let (upper, breaks) = cmd_domain(groups.iter().map(|g| g.0), sigma2, k);
    let mut f = vec![0.0; groups.len()];
    let mut sf = vec![0.0; groups.len()];
    integrate(
        |x| {
            for (j, &(o, _)) in groups.iter().enumerate() {
                f[j] = f_sl_cmd(x, o, sigma2);
                sf[j] = tails_sl_cmd(x, o, sigma2).1;
            }
            // density of the smallest signal metric
            let mut dens = 0.0;
            for (j, &(_, c)) in groups.iter().enumerate() {
                if f[j] == 0.0 {
                    continue;
                }
                let mut t = c as f64 * f[j] * libm::pow(sf[j], (c - 1) as f64);
                for (h, &(_, ch)) in groups.iter().enumerate() {
                    if h != j {
                        t *= libm::pow(sf[h], ch as f64);
                    }
                }
                dens += t;
            }
            let sfn = libm::exp(-x / (2.0 * sigma2));
            dens * if complement { any_exceeds(sfn, k) } else { all_below(sfn, k) }
        },
        0.0,
        upper,
        &breaks,
        tol,
    )
}

fn check_sigma(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::param("sigma_n^2", "must be positive and finite"))
    }
}

fn check_geometry(n: u32, w: u32, omegas: &[f64]) -> Result<()> {
    if w < 1 || w >= n {
        return Err(Error::param("w", "must lie in 1..=N-1"));
    }
    if omegas.len() != w as usize {
        return Err(Error::param("omegas", "must hold exactly w noncentralities"));
    }
    if omegas.iter().any(|o| !(*o >= 0.0 && o.is_finite())) {
        return Err(Error::param("omegas", "must be nonnegative and finite"));
    }
    Ok(())
}

/// CMD MPPM error probability for signal slots with noncentralities
/// `omegas`, integrated as `P(min signal metric < max noise metric)`.
pub fn pe_mppm_cmd_joint(omegas: &[f64], n: u32, w: u32, sigma2: f64, tol: Tolerance) -> Result<Integral> {
    check_geometry(n, w, omegas)?;
    check_sigma(sigma2)?;
    cmd_joint_integral(&group_omegas(omegas), n, w, sigma2, tol, true)
}

/// CMD probability of correct MPPM detection for signal slots with
/// noncentralities `omegas`.
pub fn pc_mppm_cmd_joint(omegas: &[f64], n: u32, w: u32, sigma2: f64, tol: Tolerance) -> Result<f64> {
    check_geometry(n, w, omegas)?;
    check_sigma(sigma2)?;
    let r = cmd_joint_integral(&group_omegas(omegas), n, w, sigma2, tol, false)?;
    Ok(clamp_probability("P_c,MPPM", r.value))
}

fn cmd_sa_integral(code: &MppmCode, mix: &CmdMixture, tol: Tolerance, complement: bool) -> Result<Integral> {
    let (n, w) = (code.slots(), code.weight());
    let k = n - w;
    let sigma2 = mix.sigma2;
    let (upper, breaks) = cmd_domain(mix.components.iter().map(|c| c.0), sigma2, k);
    integrate(
        |x| {
            let f = mix.pdf(x);
            if f == 0.0 {
                return 0.0;
            }
            let sf = mix.tails(x).1;
            let sfn = libm::exp(-x / (2.0 * sigma2));
            let noise = if complement { any_exceeds(sfn, k) } else { all_below(sfn, k) };
            w as f64 * f * libm::pow(sf, (w - 1) as f64) * noise
        },
        0.0,
        upper,
        &breaks,
        tol,
    )
}

/// Separate-average CMD MPPM error probability.
pub fn pe_mppm_cmd_sa(code: &MppmCode, constellation: &Constellation, link: &LinkParams, tol: Tolerance) -> Result<Integral> {
    check_link(code, link)?;
    cmd_sa_integral(code, &CmdMixture::new(constellation, link), tol, true)
}

/// Separate-average CMD probability of correct MPPM detection.
pub fn pc_mppm_cmd_sa(code: &MppmCode, constellation: &Constellation, link: &LinkParams, tol: Tolerance) -> Result<f64> {
    check_link(code, link)?;
    let r = cmd_sa_integral(code, &CmdMixture::new(constellation, link), tol, false)?;
    Ok(clamp_probability("P_c,MPPM", r.value))
}

fn imd_domain(link: &LinkParams) -> (f64, f64, [f64; 5]) {
    let s = libm::sqrt(link.sigma2);
    let mu = link.mu();
    (
        (-12.0 * s).min(mu - 12.0 * s),
        (12.0 * s).max(mu + 12.0 * s),
        [mu - 4.0 * s, mu, mu + 4.0 * s, 0.0, 0.5 * mu],
    )
}

fn imd_integral(link: &LinkParams, tol: Tolerance, complement: bool) -> Result<Integral> {
    let (n, w) = (link.n, link.w);
    let k = n - w;
    let (mu, s2) = (link.mu(), link.sigma2);
    let (lo, hi, breaks) = imd_domain(link);
    integrate(
        |x| {
            let f = f_sl_imd(x, mu, s2);
            if f == 0.0 {
                return 0.0;
            }
            let sfn = sf_nsl_imd(x, s2);
            let noise = if complement {
                any_exceeds(sfn, k)
            } else {
                libm::pow(cdf_nsl_imd(x, s2), k as f64)
            };
            w as f64 * f * libm::pow(sf_sl_imd(x, mu, s2), (w - 1) as f64) * noise
        },
        lo,
        hi,
        &breaks,
        tol,
    )
}

/// IMD MPPM error probability.
pub fn pe_mppm_imd(code: &MppmCode, link: &LinkParams, tol: Tolerance) -> Result<Integral> {
    check_link(code, link)?;
    imd_integral(link, tol, true)
}

/// IMD probability of correct MPPM detection, integrating the product form
/// directly.
pub fn pc_mppm_imd(code: &MppmCode, link: &LinkParams, tol: Tolerance) -> Result<f64> {
    check_link(code, link)?;
    Ok(clamp_probability("P_c,MPPM", imd_integral(link, tol, false)?.value))
}

/// IMD probability of correct MPPM detection from the binomial expansion of
/// the noise-slot cdf power. The alternating sum cancels badly for large
/// `N - w`, so this cross-check is limited to `N - w <= 16`.
pub fn pc_mppm_imd_binomial(code: &MppmCode, link: &LinkParams, tol: Tolerance) -> Result<f64> {
    check_link(code, link)?;
    let (n, w) = (link.n, link.w);
    if n - w > 16 {
        return Err(Error::param("N", "binomial expansion limited to N - w <= 16"));
    }
    let (mu, s2) = (link.mu(), link.sigma2);
    let (lo, hi, breaks) = imd_domain(link);
    let mut total = 0.0;
    for m in 0..=(n - w) {
        let c = binomial(n - w, m).unwrap_or(0) as f64;
        let r = integrate(
            |x| {
                f_sl_imd(x, mu, s2) * libm::pow(sf_sl_imd(x, mu, s2), (w - 1) as f64) * libm::pow(sf_nsl_imd(x, s2), m as f64)
            },
            lo,
            hi,
            &breaks,
            tol,
        )?;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * c * r.value;
    }
    Ok(clamp_probability("P_c,MPPM", w as f64 * total))
}

/// Conditional symbol error probability of every constellation point.
pub fn qam_symbol_ser(constellation: &Constellation, link: &LinkParams, model: QamSymbolModel) -> Result<Vec<f64>> {
    let scale = link.qam_scale();
    (0..constellation.order())
        .map(|i| {
            let exact = match model {
                QamSymbolModel::ExactGrid => constellation.ser_exact(i, scale),
                QamSymbolModel::UnionBound => None,
            };
            match exact {
                Some(p) => Ok(p),
                None => Ok(constellation.ser_union_bound(i, scale)?.min(1.0)),
            }
        })
        .collect()
}

/// Bit accounting of one frame given the probability of correct MPPM
/// detection and the expected number of QAM symbol errors.
#[derive(Debug, Clone, PartialEq)]
pub struct BitErrorModel {
    q_total: f64,
    ne: f64,
    w: f64,
    n_q: f64,
    kl: Vec<f64>,
}

impl BitErrorModel {
    pub fn new(code: &MppmCode, constellation: &Constellation) -> Result<Self> {
        let (n, w) = (code.slots(), code.weight());
        let kl = (1..=w.min(n - w)).map(|l| k_l(n, w, l)).collect::<Result<Vec<_>>>()?;
        let n_q = constellation.bits_per_symbol();
        Ok(BitErrorModel {
            q_total: (code.bits() + w * n_q) as f64,
            ne: ne_mppm(code.bits()),
            w: w as f64,
            n_q: n_q as f64,
            kl,
        })
    }

    /// Bit error probability for MPPM success probability `pc` and expected
    /// QAM symbol errors `sum_pe` over the `w` signal slots.
    pub fn pb(&self, pc: f64, sum_pe: f64) -> f64 {
        let miss: f64 = self
            .kl
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let l = (i + 1) as f64;
                k * ((self.w - l) / self.w * sum_pe + 0.5 * self.n_q * l)
            })
            .sum();
        let fail = 1.0 - pc;
        (pc * sum_pe + self.ne * fail + fail * miss) / self.q_total
    }
}

// 1 - (1 - p)^w without cancellation.
fn one_minus_power(p: f64, w: f64) -> f64 {
    if p >= 1.0 {
        1.0
    } else {
        -libm::expm1(w * libm::log1p(-p))
    }
}

fn compositions(parts: usize, total: u32) -> Vec<Vec<u32>> {
    fn rec(parts: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() + 1 == parts {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in (0..=left).rev() {
            cur.push(c);
            rec(parts, left - c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(parts, total, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

fn multinomial(counts: &[u32]) -> u128 {
    let mut left: u32 = counts.iter().sum();
    let mut m: u128 = 1;
    for &c in counts {
        m *= binomial(left, c).unwrap_or(0);
        left -= c;
    }
    m
}

/// CMD joint average error probabilities.
pub fn pe_cmd_ja(code: &MppmCode, constellation: &Constellation, link: &LinkParams, opts: &AnalyticOptions) -> Result<AnalyticResult> {
    check_link(code, link)?;
    let w = code.weight();
    let rings = energy_rings(constellation);
    let n_comp = binomial(rings.len() as u32 + w - 1, w).unwrap_or(u128::MAX);
    if n_comp > opts.combination_budget {
        return Err(Error::Capacity {
            count: n_comp,
            budget: opts.combination_budget,
        });
    }
    let ser = qam_symbol_ser(constellation, link, opts.qam_model)?;
    // mean conditional SER per ring
    let mut ring_ser = vec![0.0; rings.len()];
    for (i, &p) in ser.iter().enumerate() {
        let e = constellation.energy(i);
        let r = rings
            .iter()
            .position(|&(re, _)| (e - re).abs() <= 1e-9 * re.abs().max(1.0))
            .unwrap_or(0);
        ring_ser[r] += p / rings[r].1 as f64;
    }
    let m = constellation.order() as f64;
    let ber = BitErrorModel::new(code, constellation)?;

    let (mut pe, mut pb, mut pc_avg, mut abs_error) = (0.0, 0.0, 0.0, 0.0);
    for comp in compositions(rings.len(), w) {
        let mut prob = multinomial(&comp) as f64;
        let mut groups = Vec::new();
        let mut log_qam_ok = 0.0;
        let mut sum_pe = 0.0;
        for (r, &c) in comp.iter().enumerate() {
            if c == 0 {
                continue;
            }
            prob *= libm::pow(rings[r].1 as f64 / m, c as f64);
            groups.push((link.omega(rings[r].0), c));
            log_qam_ok += c as f64 * libm::log1p(-ring_ser[r].min(1.0));
            sum_pe += c as f64 * ring_ser[r];
        }
        let integral = cmd_joint_integral(&groups, code.slots(), w, link.sigma2, opts.tol, true)?;
        let pe_mppm = integral.value.clamp(0.0, 1.0);
        let qam_fail = -libm::expm1(log_qam_ok);
        pe += prob * (pe_mppm + (1.0 - pe_mppm) * qam_fail);
        pb += prob * ber.pb(1.0 - pe_mppm, sum_pe);
        pc_avg += prob * (1.0 - pe_mppm);
        abs_error += prob * integral.abs_error;
    }
    Ok(AnalyticResult {
        method: AnalyticMethod::CmdJa,
        pe: clamp_probability("P_e", pe),
        pb: clamp_probability("P_b", pb),
        pc_mppm: clamp_probability("P_c,MPPM", pc_avg),
        pe_qam: ser.iter().sum::<f64>() / m,
        abs_error,
        factorized: false,
    })
}

/// CMD joint average by brute enumeration over multisets of QAM symbol
/// indices. Exponentially slower than [`pe_cmd_ja`]; kept as a second route.
pub fn pe_cmd_ja_enumerated(
    code: &MppmCode,
    constellation: &Constellation,
    link: &LinkParams,
    opts: &AnalyticOptions,
) -> Result<AnalyticResult> {
    check_link(code, link)?;
    let w = code.weight();
    let mq = constellation.order();
    let count = binomial(mq as u32 + w - 1, w).unwrap_or(u128::MAX);
    if count > opts.combination_budget {
        return Err(Error::Capacity {
            count,
            budget: opts.combination_budget,
        });
    }
    let ser = qam_symbol_ser(constellation, link, opts.qam_model)?;
    let ber = BitErrorModel::new(code, constellation)?;
    let norm = libm::pow(mq as f64, -(w as f64));
    let (mut pe, mut pb, mut pc_avg, mut abs_error) = (0.0, 0.0, 0.0, 0.0);
    for comb in QamCombinations::new(mq, w as usize) {
        let omegas: Vec<f64> = comb.indices.iter().map(|&i| link.omega(constellation.energy(i))).collect();
        let integral = pe_mppm_cmd_joint(&omegas, code.slots(), w, link.sigma2, opts.tol)?;
        let pe_mppm = integral.value.clamp(0.0, 1.0);
        let qam_ok: f64 = comb.indices.iter().map(|&i| 1.0 - ser[i]).product();
        let sum_pe: f64 = comb.indices.iter().map(|&i| ser[i]).sum();
        let p = comb.multiplicity as f64 * norm;
        pe += p * (1.0 - (1.0 - pe_mppm) * qam_ok);
        pb += p * ber.pb(1.0 - pe_mppm, sum_pe);
        pc_avg += p * (1.0 - pe_mppm);
        abs_error += p * integral.abs_error;
    }
    Ok(AnalyticResult {
        method: AnalyticMethod::CmdJa,
        pe: clamp_probability("P_e", pe),
        pb: clamp_probability("P_b", pb),
        pc_mppm: clamp_probability("P_c,MPPM", pc_avg),
        pe_qam: ser.iter().sum::<f64>() / mq as f64,
        abs_error,
        factorized: false,
    })
}

/// A multiset of `w` QAM symbol indices (nondecreasing) with the number of
/// ordered `w`-tuples it stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QamCombination {
    pub indices: Vec<usize>,
    pub multiplicity: u128,
}

/// Combinations with repetition of `w` indices out of `M_Q`, in
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct QamCombinations {
    m: usize,
    next: Option<Vec<usize>>,
}

impl QamCombinations {
    pub fn new(m: usize, w: usize) -> Self {
        QamCombinations {
            m,
            next: (m > 0).then(|| vec![0; w]),
        }
    }
}

impl Iterator for QamCombinations {
    type Item = QamCombination;

    fn next(&mut self) -> Option<QamCombination> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        if let Some(pos) = succ.iter().rposition(|&i| i + 1 < self.m) {
            let v = succ[pos] + 1;
            for s in &mut succ[pos..] {
                *s = v;
            }
            self.next = Some(succ);
        }
        let mut runs = Vec::new();
        let mut i = 0;
        while i < cur.len() {
            let j = cur[i..].iter().take_while(|&&v| v == cur[i]).count();
            runs.push(j as u32);
            i += j;
        }
        Some(QamCombination {
            multiplicity: multinomial(&runs),
            indices: cur,
        })
    }
}

/// CMD separate-average error probabilities.
pub fn pe_cmd_sa(code: &MppmCode, constellation: &Constellation, link: &LinkParams, opts: &AnalyticOptions) -> Result<AnalyticResult> {
    check_link(code, link)?;
    let integral = cmd_sa_integral(code, &CmdMixture::new(constellation, link), opts.tol, true)?;
    compose(AnalyticMethod::CmdSa, code, constellation, link, integral.value, integral.abs_error, true)
}

fn compose(
    method: AnalyticMethod,
    code: &MppmCode,
    constellation: &Constellation,
    link: &LinkParams,
    pe_mppm: f64,
    abs_error: f64,
    factorized: bool,
) -> Result<AnalyticResult> {
    let pe_mppm = clamp_probability("P_e,MPPM", pe_mppm);
    let w = code.weight() as f64;
    let pe_qam = constellation.average_ser(link.es_qam_n0());
    let pe = pe_mppm + (1.0 - pe_mppm) * one_minus_power(pe_qam, w);
    let pb = BitErrorModel::new(code, constellation)?.pb(1.0 - pe_mppm, w * pe_qam);
    Ok(AnalyticResult {
        method,
        pe: clamp_probability("P_e", pe),
        pb: clamp_probability("P_b", pb),
        pc_mppm: 1.0 - pe_mppm,
        pe_qam,
        abs_error,
        factorized,
    })
}

/// IMD error probabilities by numerical integration.
pub fn pe_imd(code: &MppmCode, constellation: &Constellation, link: &LinkParams, opts: &AnalyticOptions) -> Result<AnalyticResult> {
    let integral = pe_mppm_imd(code, link, opts.tol)?;
    compose(AnalyticMethod::ImdNi, code, constellation, link, integral.value, integral.abs_error, false)
}

/// IMD error probabilities with the MPPM union bound in place of the
/// integral.
pub fn pe_imd_ub(code: &MppmCode, constellation: &Constellation, link: &LinkParams, _opts: &AnalyticOptions) -> Result<AnalyticResult> {
    check_link(code, link)?;
    let ub = code.ser_union_bound(link.mppm_scale())?;
    compose(AnalyticMethod::ImdUb, code, constellation, link, ub.min(1.0), 0.0, false)
}

/// CMD bit error probability (`CmdJa` or `CmdSa`).
pub fn pb_cmd(
    code: &MppmCode,
    constellation: &Constellation,
    link: &LinkParams,
    opts: &AnalyticOptions,
    method: AnalyticMethod,
) -> Result<f64> {
    match method {
        AnalyticMethod::CmdJa => Ok(pe_cmd_ja(code, constellation, link, opts)?.pb),
        AnalyticMethod::CmdSa => Ok(pe_cmd_sa(code, constellation, link, opts)?.pb),
        _ => Err(Error::param("method", "CMD bit error probability needs JA or SA")),
    }
}

/// IMD bit error probability by numerical integration.
pub fn pb_imd(code: &MppmCode, constellation: &Constellation, link: &LinkParams, opts: &AnalyticOptions) -> Result<f64> {
    Ok(pe_imd(code, constellation, link, opts)?.pb)
}

pub fn evaluate(
    method: AnalyticMethod,
    code: &MppmCode,
    constellation: &Constellation,
    link: &LinkParams,
    opts: &AnalyticOptions,
) -> Result<AnalyticResult> {
    match method {
        AnalyticMethod::CmdJa => pe_cmd_ja(code, constellation, link, opts),
        AnalyticMethod::CmdSa => pe_cmd_sa(code, constellation, link, opts),
        AnalyticMethod::ImdNi => pe_imd(code, constellation, link, opts),
        AnalyticMethod::ImdUb => pe_imd_ub(code, constellation, link, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::erfc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn setup(n: u32, w: u32, nq: u32, m: f64, db: f64) -> (MppmCode, Constellation, LinkParams) {
        let code = MppmCode::new(n, w).unwrap();
        let c = Constellation::new(nq).unwrap();
        let link = LinkParams::from_ebn0(n, w, m, &c, db).unwrap();
        (code, c, link)
    }

    #[test]
    fn joint_is_permutation_invariant() {
        let tol = Tolerance::default();
        let a = pc_mppm_cmd_joint(&[0.1, 0.5, 0.9, 0.1], 8, 4, 0.05, tol).unwrap();
        let b = pc_mppm_cmd_joint(&[0.9, 0.1, 0.1, 0.5], 8, 4, 0.05, tol).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn joint_noiseless_limit() {
        let pc = pc_mppm_cmd_joint(&[1.0, 2.0, 0.5], 6, 3, 1e-3, Tolerance::default()).unwrap();
        assert!((pc - 1.0).abs() < 1e-9);
        let pe = pe_mppm_cmd_joint(&[1.0, 2.0, 0.5], 6, 3, 1e-3, Tolerance::default()).unwrap();
        assert!(pe.value < 1e-9);
    }

    #[test]
    fn joint_and_complement_add_to_one() {
        for s2 in [0.01, 0.1, 1.0] {
            let om = [0.3, 0.3, 1.2];
            let pc = pc_mppm_cmd_joint(&om, 9, 3, s2, Tolerance::default()).unwrap();
            let pe = pe_mppm_cmd_joint(&om, 9, 3, s2, Tolerance::default()).unwrap().value;
            assert!((pc + pe - 1.0).abs() < 1e-9, "{pc} {pe}");
        }
    }

    #[test]
    fn joint_equal_omegas_symmetric_form() {
        let (n, w, o, s2) = (10u32, 4u32, 0.7, 0.08);
        let pc = pc_mppm_cmd_joint(&[o; 4], n, w, s2, Tolerance::default()).unwrap();
        let up = (libm::sqrt(o) + 12.0 * libm::sqrt(s2)).powi(2);
        let direct = integrate(
            |x| {
                let (_, sf) = tails_sl_cmd(x, o, s2);
                w as f64 * f_sl_cmd(x, o, s2) * sf.powi(w as i32 - 1) * (-libm::expm1(-x / (2.0 * s2))).powi((n - w) as i32)
            },
            0.0,
            up,
            &[o],
            Tolerance::absolute(1e-12),
        )
        .unwrap();
        assert!((pc - direct.value).abs() < 1e-9);
    }

    #[test]
    fn joint_matches_monte_carlo_n3_w1() {
        let (o, s2) = (1.0, 0.25);
        let pc = pc_mppm_cmd_joint(&[o], 3, 1, s2, Tolerance::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let s = libm::sqrt(s2);
        let trials = 1_000_000;
        let mut ok = 0usize;
        let metric = |rng: &mut ChaCha8Rng, a: f64| {
            let i = a + s * rng.sample::<f64, _>(StandardNormal);
            let q = s * rng.sample::<f64, _>(StandardNormal);
            i * i + q * q
        };
        for _ in 0..trials {
            let x = metric(&mut rng, libm::sqrt(o));
            let n1 = metric(&mut rng, 0.0);
            let n2 = metric(&mut rng, 0.0);
            ok += (x > n1 && x > n2) as usize;
        }
        let p = ok as f64 / trials as f64;
        let se = libm::sqrt(pc * (1.0 - pc) / trials as f64);
        assert!((p - pc).abs() < 3.0 * se, "{p} vs {pc}");
    }

    #[test]
    fn sa_with_one_pulse_is_mean_of_joint() {
        let (code, c, link) = setup(6, 1, 4, 0.7, 8.0);
        let sa = pc_mppm_cmd_sa(&code, &c, &link, Tolerance::default()).unwrap();
        let mean: f64 = (0..c.order())
            .map(|i| pc_mppm_cmd_joint(&[link.omega(c.energy(i))], 6, 1, link.sigma2, Tolerance::default()).unwrap())
            .sum::<f64>()
            / c.order() as f64;
        assert!((sa - mean).abs() < 1e-9);
    }

    #[test]
    fn four_qam_ja_equals_sa() {
        let (code, c, link) = setup(12, 6, 2, 0.5, 6.0);
        let ja = pe_cmd_ja(&code, &c, &link, &AnalyticOptions::default()).unwrap();
        let sa = pe_cmd_sa(&code, &c, &link, &AnalyticOptions::default()).unwrap();
        assert!((ja.pe - sa.pe).abs() < 1e-9, "{} {}", ja.pe, sa.pe);
        assert!((ja.pb - sa.pb).abs() < 1e-9);
        let pc = pc_mppm_cmd_sa(&code, &c, &link, Tolerance::default()).unwrap();
        let joint = pc_mppm_cmd_joint(&[link.omega(1.0); 6], 12, 6, link.sigma2, Tolerance::default()).unwrap();
        assert!((pc - joint).abs() < 1e-9);
    }

    #[test]
    fn ring_memo_matches_enumeration() {
        for (n, w, nq) in [(6u32, 2u32, 4u32), (5, 3, 3), (8, 2, 5)] {
            let (code, c, link) = setup(n, w, nq, 0.6, 7.0);
            let opts = AnalyticOptions::default();
            let a = pe_cmd_ja(&code, &c, &link, &opts).unwrap();
            let b = pe_cmd_ja_enumerated(&code, &c, &link, &opts).unwrap();
            assert!((a.pe - b.pe).abs() < 1e-9 * a.pe.max(1e-3), "{} {}", a.pe, b.pe);
            assert!((a.pb - b.pb).abs() < 1e-9 * a.pb.max(1e-3));
            assert!((a.pc_mppm - b.pc_mppm).abs() < 1e-9);
        }
    }

    #[test]
    fn combinations_with_repetition() {
        let all: Vec<QamCombination> = QamCombinations::new(16, 3).collect();
        assert_eq!(all.len() as u128, binomial(18, 3).unwrap());
        assert_eq!(all.iter().map(|c| c.multiplicity).sum::<u128>(), 16u128.pow(3));
        assert_eq!(all[0].indices, [0, 0, 0]);
        assert_eq!(all[0].multiplicity, 1);
        assert_eq!(all[1].indices, [0, 0, 1]);
        assert_eq!(all[1].multiplicity, 3);
        assert!(all.windows(2).all(|p| p[0].indices < p[1].indices));
    }

    #[test]
    fn ja_budget_is_enforced() {
        let (code, c, link) = setup(12, 6, 4, 0.5, 6.0);
        let opts = AnalyticOptions {
            combination_budget: 10,
            ..AnalyticOptions::default()
        };
        assert!(matches!(pe_cmd_ja(&code, &c, &link, &opts), Err(Error::Capacity { count: 28, .. })));
        assert!(matches!(pe_cmd_ja_enumerated(&code, &c, &link, &opts), Err(Error::Capacity { .. })));
    }

    #[test]
    fn ja_extreme_noise() {
        let (code, c, link) = setup(12, 6, 4, 0.5, -30.0);
        let r = pe_cmd_ja(&code, &c, &link, &AnalyticOptions::default()).unwrap();
        assert!(r.pe >= 0.9);
    }

    #[test]
    fn sa_high_snr_asymptote() {
        let opts = AnalyticOptions::default();
        let mut checked = 0;
        for db in 15..40 {
            let (code, c, link) = setup(12, 6, 4, 0.9, db as f64);
            let r = pe_cmd_sa(&code, &c, &link, &opts).unwrap();
            let pe_mppm = 1.0 - r.pc_mppm;
            if pe_mppm < 1e-3 && r.pe_qam < 1e-3 && r.pe > 1e-12 {
                let approx = 6.0 * r.pe_qam + pe_mppm;
                assert!((r.pe - approx).abs() < 0.05 * approx, "{db} dB");
                checked += 1;
            }
        }
        assert!(checked >= 3);
    }

    #[test]
    fn sa_modulation_index_limits() {
        let (code, c, link) = setup(12, 6, 4, 1e-4, 10.0);
        assert!(pe_cmd_sa(&code, &c, &link, &AnalyticOptions::default()).unwrap().pe > 0.999);
        let (code, c, link) = setup(12, 6, 4, 1.0, 30.0);
        assert!(pe_cmd_sa(&code, &c, &link, &AnalyticOptions::default()).unwrap().pe < 1e-12);
    }

    #[test]
    fn imd_two_slot_closed_form() {
        let code = MppmCode::new(2, 1).unwrap();
        for s2 in [0.05, 0.3, 1.0, 4.0] {
            let link = LinkParams::normalized(2, 1, 0.5, s2).unwrap();
            let pc = pc_mppm_imd(&code, &link, Tolerance::default()).unwrap();
            let want = 1.0 - 0.5 * erfc(link.mu() / (2.0 * libm::sqrt(s2)));
            assert!((pc - want).abs() < 1e-9, "{pc} {want}");
            let pe = pe_mppm_imd(&code, &link, Tolerance::default()).unwrap().value;
            assert!((pe - (1.0 - want)).abs() < 1e-10);
        }
    }

    #[test]
    fn imd_binomial_cross_check() {
        for (n, w, db) in [(4u32, 2u32, 3.0), (12, 6, 5.0), (12, 6, 12.0), (20, 4, 8.0)] {
            let (code, c, link) = setup(n, w, 4, 0.5, db);
            let _ = c;
            let a = pc_mppm_imd(&code, &link, Tolerance::default()).unwrap();
            let b = pc_mppm_imd_binomial(&code, &link, Tolerance::absolute(1e-13)).unwrap();
            assert!((a - b).abs() < 1e-8, "N={n} w={w}: {a} {b}");
        }
        let (code, _, link) = setup(32, 2, 2, 0.9, 5.0);
        assert!(pc_mppm_imd_binomial(&code, &link, Tolerance::default()).is_err());
    }

    #[test]
    fn imd_noiseless_limit() {
        let code = MppmCode::new(12, 6).unwrap();
        let link = LinkParams::normalized(12, 6, 0.5, 1e-3).unwrap();
        assert!((pc_mppm_imd(&code, &link, Tolerance::default()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bit_accounting_limits() {
        let code = MppmCode::new(12, 6).unwrap();
        let c = Constellation::new(4).unwrap();
        let ber = BitErrorModel::new(&code, &c).unwrap();
        // perfect MPPM detection
        assert!((ber.pb(1.0, 0.3) - 0.3 / 33.0).abs() < 1e-15);
        // perfect QAM
        let pc = 0.9;
        let kl_sum: f64 = (1..=6).map(|l| k_l(12, 6, l).unwrap() * 2.0 * l as f64).sum();
        let want = (1.0 - pc) * (ne_mppm(9) + kl_sum) / 33.0;
        assert!((ber.pb(pc, 0.0) - want).abs() < 1e-15);
    }

    #[test]
    fn imd_forced_parts() {
        let (code, c, link) = setup(12, 6, 4, 0.5, 8.0);
        let pe_qam = c.average_ser(link.es_qam_n0());
        let forced = compose(AnalyticMethod::ImdNi, &code, &c, &link, 0.0, 0.0, false).unwrap();
        assert!((forced.pe - (1.0 - (1.0 - pe_qam).powi(6))).abs() < 1e-14);
        assert!((forced.pb - 6.0 * pe_qam / 33.0).abs() < 1e-15);
    }

    #[test]
    fn outputs_decrease_with_snr() {
        let mut prev = [1.0f64; 8];
        for db in (0..=18).step_by(2) {
            let (code, c, link) = setup(12, 6, 4, 0.5, db as f64);
            let opts = AnalyticOptions::default();
            let rs = [
                pe_cmd_ja(&code, &c, &link, &opts).unwrap(),
                pe_cmd_sa(&code, &c, &link, &opts).unwrap(),
                pe_imd(&code, &c, &link, &opts).unwrap(),
                pe_imd_ub(&code, &c, &link, &opts).unwrap(),
            ];
            for (k, r) in rs.iter().enumerate() {
                assert!(r.pe <= prev[2 * k] && r.pb <= prev[2 * k + 1], "{} at {db} dB", r.method.label());
                assert!((0.0..=1.0).contains(&r.pe) && (0.0..=1.0).contains(&r.pb));
                prev[2 * k] = r.pe;
                prev[2 * k + 1] = r.pb;
            }
        }
    }

    // The pairwise bound only covers ML decisions inside the expurgated set,
    // while the detector ranks metrics over all weight-w patterns and then
    // corrects; the bound tracks the simulated rate without dominating it.
    // The integral counts every wrong top-w ranking, which correction can
    // only reduce.
    #[test]
    fn union_bound_and_integral_bracket_simulation() {
        use crate::sim::{simulate_range, Detector};
        for db in [3.0, 4.0, 5.0, 6.0] {
            let (code, c, link) = setup(12, 6, 4, 0.5, db);
            let ub = code.ser_union_bound(link.mppm_scale()).unwrap().min(1.0);
            let ni = pe_mppm_imd(&code, &link, Tolerance::default()).unwrap().value;
            let frames = 400_000;
            let cnt = simulate_range(&code, &c, &link, Detector::Imd, 21, 0, 0..frames);
            let p = cnt.mppm_errors as f64 / frames as f64;
            let se = libm::sqrt(p * (1.0 - p) / frames as f64);
            assert!(ni >= p - 3.0 * se, "{db} dB: ni {ni} sim {p}");
            assert!((ub - p).abs() < 0.15 * p + 3.0 * se, "{db} dB: ub {ub} sim {p}");
        }
    }

    #[test]
    fn method_mismatch_is_rejected() {
        let (code, c, link) = setup(12, 6, 4, 0.5, 8.0);
        let other = LinkParams::normalized(10, 5, 0.5, link.sigma2).unwrap();
        assert!(pe_imd(&code, &c, &other, &AnalyticOptions::default()).is_err());
        assert!(pb_cmd(&code, &c, &link, &AnalyticOptions::default(), AnalyticMethod::ImdNi).is_err());
    }
}
