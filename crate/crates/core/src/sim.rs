//! Frame-level Monte-Carlo transmission and detection.
//!
//! The default path draws the per-slot sufficient statistics directly: I/Q
//! correlator outputs and the DC matched-filter output, each with
//! independent Gaussian noise of variance `sigma_n^2`. A sampled-waveform
//! path builds the same statistics from discrete correlators and is used to
//! validate the statistic-level model.
//!
//! Every frame draws from its own ChaCha8 stream keyed by
//! `(seed, point)` with stream id = frame index, so any partition of the
//! frames over workers reproduces the same counters.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::constellation::Constellation;
use crate::link::LinkParams;
use crate::mppm::{MppmCode, MppmPattern};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    /// Common metrics: slots ranked by `(r^I)^2 + (r^Q)^2`.
    Cmd,
    /// Independent metrics: slots ranked by the DC matched-filter output.
    Imd,
}

/// One transmitted frame. QAM symbols are listed in ascending slot order;
/// the source word is the MPPM word followed by the QAM labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameTx {
    pub pattern: MppmPattern,
    pub mppm_word: u128,
    pub symbols: Vec<usize>,
}

impl FrameTx {
    /// Source bits, MPPM word first (most significant bit first), then each
    /// QAM label in ascending slot order.
    pub fn bits(&self, code: &MppmCode, constellation: &Constellation) -> Vec<bool> {
        pack_bits(self.mppm_word, &self.symbols, code, constellation)
    }
}

fn pack_bits(word: u128, symbols: &[usize], code: &MppmCode, constellation: &Constellation) -> Vec<bool> {
    let q = code.bits();
    let nq = constellation.bits_per_symbol();
    let mut bits = Vec::with_capacity((q + nq * symbols.len() as u32) as usize);
    bits.extend((0..q).rev().map(|b| (word >> b) & 1 == 1));
    for &s in symbols {
        let label = constellation.label(s);
        bits.extend((0..nq).rev().map(|b| (label >> b) & 1 == 1));
    }
    bits
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotStatistics {
    pub ri: Vec<f64>,
    pub rq: Vec<f64>,
    pub r: Vec<f64>,
}

impl SlotStatistics {
    pub fn zeros(n: usize) -> Self {
        SlotStatistics {
            ri: vec![0.0; n],
            rq: vec![0.0; n],
            r: vec![0.0; n],
        }
    }

    pub fn slots(&self) -> usize {
        self.r.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub pattern: MppmPattern,
    pub mppm_word: u128,
    /// Demapped symbol per slot of `pattern`, ascending slot order.
    pub symbols: Vec<usize>,
}

impl Decision {
    pub fn bits(&self, code: &MppmCode, constellation: &Constellation) -> Vec<bool> {
        pack_bits(self.mppm_word, &self.symbols, code, constellation)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialCounters {
    pub frames: u64,
    /// Frames with any MPPM or QAM error.
    pub symbol_errors: u64,
    pub bit_errors: u64,
    /// Sum over frames of squared bit-error counts.
    pub bit_errors_sq: u64,
    pub mppm_errors: u64,
    /// QAM errors over transmitted signal slots that were detected as such.
    pub qam_errors_cond: u64,
    pub qam_slots_cond: u64,
}

impl TrialCounters {
    pub fn merge(&mut self, other: &TrialCounters) {
        self.frames += other.frames;
        self.symbol_errors += other.symbol_errors;
        self.bit_errors += other.bit_errors;
        self.bit_errors_sq += other.bit_errors_sq;
        self.mppm_errors += other.mppm_errors;
        self.qam_errors_cond += other.qam_errors_cond;
        self.qam_slots_cond += other.qam_slots_cond;
    }

    /// Tallies one frame.
    pub fn record(&mut self, tx: &FrameTx, rx: &Decision, constellation: &Constellation) {
        self.frames += 1;
        let mppm_err = tx.pattern != rx.pattern;
        let mut bits = (tx.mppm_word ^ rx.mppm_word).count_ones() as u64;
        let mut qam_err = false;
        for (a, b) in tx.symbols.iter().zip(&rx.symbols) {
            bits += (constellation.label(*a) ^ constellation.label(*b)).count_ones() as u64;
        }
        let mut rx_slots = rx.pattern.slots().zip(&rx.symbols);
        let mut next = rx_slots.next();
        for (slot, &sent) in tx.pattern.slots().zip(&tx.symbols) {
            while let Some((s, _)) = next {
                if s >= slot {
                    break;
                }
                next = rx_slots.next();
            }
            if let Some((s, &got)) = next {
                if s == slot {
                    self.qam_slots_cond += 1;
                    if got != sent {
                        self.qam_errors_cond += 1;
                        qam_err = true;
                    }
                }
            }
        }
        self.symbol_errors += (mppm_err || qam_err) as u64;
        self.mppm_errors += mppm_err as u64;
        self.bit_errors += bits;
        self.bit_errors_sq += bits * bits;
    }
}

/// RNG for frame `frame` of sweep point `point`.
pub fn frame_rng(seed: u64, point: u64, frame: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&point.to_le_bytes());
    key[16..24].copy_from_slice(b"qammppm1");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(frame);
    rng
}

/// Uniform source bits mapped to a frame.
pub fn generate_frame<R: Rng + ?Sized>(rng: &mut R, code: &MppmCode, constellation: &Constellation) -> FrameTx {
    let q = code.bits();
    let word = rng.random::<u128>() >> (128 - q);
    let pattern = match code.encode(word) {
        Ok(p) => p,
        Err(_) => unreachable!(),
    };
    let m = constellation.order();
    let symbols = (0..code.weight()).map(|_| rng.random_range(0..m)).collect();
    FrameTx {
        pattern,
        mppm_word: word,
        symbols,
    }
}

/// Noiseless statistics of a frame.
pub fn mean_statistics(frame: &FrameTx, link: &LinkParams, constellation: &Constellation) -> SlotStatistics {
    let mut st = SlotStatistics::zeros(link.n as usize);
    let amp = link.qam_amplitude();
    let mu = link.mu();
    for (slot, &s) in frame.pattern.slots().zip(&frame.symbols) {
        let p = constellation.point(s);
        st.ri[slot] = amp * p[0];
        st.rq[slot] = amp * p[1];
        st.r[slot] = mu;
    }
    st
}

/// Adds independent `N(0, sigma_n^2)` noise to every statistic.
pub fn channel<R: Rng + ?Sized>(frame: &FrameTx, link: &LinkParams, constellation: &Constellation, rng: &mut R) -> SlotStatistics {
    let mut st = mean_statistics(frame, link, constellation);
    let s = libm::sqrt(link.sigma2);
    for k in 0..st.slots() {
        st.ri[k] += s * rng.sample::<f64, _>(StandardNormal);
        st.rq[k] += s * rng.sample::<f64, _>(StandardNormal);
        st.r[k] += s * rng.sample::<f64, _>(StandardNormal);
    }
    st
}

/// Slots of the `w` largest metrics; ties go to the lower slot index.
pub fn top_w(metrics: &[f64], w: usize) -> MppmPattern {
    let mut idx: Vec<usize> = (0..metrics.len()).collect();
    let cmp = |a: &usize, b: &usize| metrics[*b].total_cmp(&metrics[*a]).then(a.cmp(b));
    if w < idx.len() {
        idx.select_nth_unstable_by(w, cmp);
    }
    MppmPattern::from_slots(&idx[..w])
}

fn finish<R: Rng + ?Sized>(
    detected: MppmPattern,
    stats: &SlotStatistics,
    code: &MppmCode,
    constellation: &Constellation,
    amp: f64,
    rng: &mut R,
) -> Decision {
    let pattern = code.correct(detected, rng);
    let mppm_word = match code.decode(pattern) {
        Some(wd) => wd,
        None => unreachable!(),
    };
    let inv = if amp > 0.0 { 1.0 / amp } else { 0.0 };
    let symbols = pattern
        .slots()
        .map(|k| constellation.demap([stats.ri[k] * inv, stats.rq[k] * inv]))
        .collect();
    Decision {
        pattern,
        mppm_word,
        symbols,
    }
}

/// Common-metrics detection.
pub fn detect_cmd<R: Rng + ?Sized>(
    stats: &SlotStatistics,
    code: &MppmCode,
    constellation: &Constellation,
    link: &LinkParams,
    rng: &mut R,
) -> Decision {
    let x: Vec<f64> = stats.ri.iter().zip(&stats.rq).map(|(i, q)| i * i + q * q).collect();
    let detected = top_w(&x, code.weight() as usize);
    finish(detected, stats, code, constellation, link.qam_amplitude(), rng)
}

/// Independent-metrics detection.
pub fn detect_imd<R: Rng + ?Sized>(
    stats: &SlotStatistics,
    code: &MppmCode,
    constellation: &Constellation,
    link: &LinkParams,
    rng: &mut R,
) -> Decision {
    let detected = top_w(&stats.r, code.weight() as usize);
    finish(detected, stats, code, constellation, link.qam_amplitude(), rng)
}

pub fn detect<R: Rng + ?Sized>(
    detector: Detector,
    stats: &SlotStatistics,
    code: &MppmCode,
    constellation: &Constellation,
    link: &LinkParams,
    rng: &mut R,
) -> Decision {
    match detector {
        Detector::Cmd => detect_cmd(stats, code, constellation, link, rng),
        Detector::Imd => detect_imd(stats, code, constellation, link, rng),
    }
}

/// Simulates frames `frames` of sweep point `point`.
pub fn simulate_range(
    code: &MppmCode,
    constellation: &Constellation,
    link: &LinkParams,
    detector: Detector,
    seed: u64,
    point: u64,
    frames: Range<u64>,
) -> TrialCounters {
    let mut counters = TrialCounters::default();
    for f in frames {
        let mut rng = frame_rng(seed, point, f);
        let tx = generate_frame(&mut rng, code, constellation);
        let stats = channel(&tx, link, constellation, &mut rng);
        let rx = detect(detector, &stats, code, constellation, link, &mut rng);
        counters.record(&tx, &rx, constellation);
    }
    counters
}

/// Statistics from a sampled waveform: `samples_per_slot` midpoint samples
/// per slot, carrier `f_c = n_c / T_s`, discrete correlators in place of
/// the integrals. With `noise`, white Gaussian noise of variance
/// `sigma_n^2 / dt` is added per sample, which gives every statistic
/// variance `sigma_n^2`.
pub fn waveform_crosscheck(
    frame: &FrameTx,
    link: &LinkParams,
    constellation: &Constellation,
    n_c: f64,
    samples_per_slot: usize,
    noise: Option<&mut dyn RngCore>,
) -> Result<SlotStatistics> {
    if !(n_c >= 2.0 && libm::floor(n_c) == n_c && n_c.is_finite()) {
        return Err(Error::param("n_c", "must be an integer >= 2"));
    }
    let nc = n_c as usize;
    if samples_per_slot == 0 || samples_per_slot % (4 * nc) != 0 {
        return Err(Error::param("samples_per_slot", "must be a positive multiple of 4 n_c"));
    }
    let n = link.n as usize;
    let ts = link.ts;
    let dt = ts / samples_per_slot as f64;
    let mut amp = vec![None; n];
    for (slot, &s) in frame.pattern.slots().zip(&frame.symbols) {
        amp[slot] = Some(constellation.point(s));
    }
    let mut noise = noise;
    let noise_sd = libm::sqrt(link.sigma2 / dt);
    let two_pi = 2.0 * core::f64::consts::PI;
    let carrier_norm = libm::sqrt(2.0 / ts);
    let dc_norm = 1.0 / libm::sqrt(ts);
    let mut st = SlotStatistics::zeros(n);
    for (k, a) in amp.iter().enumerate() {
        let (mut si, mut sq, mut sr) = (0.0, 0.0, 0.0);
        for i in 0..samples_per_slot {
            // carrier phase within the slot; whole cycles per slot
            let u = (i as f64 + 0.5) / samples_per_slot as f64;
            let (sin, cos) = libm::sincos(two_pi * n_c * u);
            let mut v = match a {
                Some(p) => link.iph * (1.0 + link.m * (p[0] * cos + p[1] * sin)),
                None => 0.0,
            };
            if let Some(rng) = noise.as_deref_mut() {
                v += noise_sd * rng.sample::<f64, _>(StandardNormal);
            }
            si += v * carrier_norm * cos * dt;
            sq += v * carrier_norm * sin * dt;
            sr += v * dc_norm * dt;
        }
        st.ri[k] = si;
        st.rq[k] = sq;
        st.r[k] = sr;
    }
    Ok(st)
}
