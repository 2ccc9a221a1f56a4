//! Energy, noise and timing bookkeeping, and the detector cost model.
//!
//! Statistics are expressed in correlator units: a signal slot produces a
//! DC matched-filter mean `sqrt(T_s) I_ph` and I/Q means
//! `sqrt(T_s / 2) I_ph m A`, each with additive Gaussian noise of variance
//! `sigma_n^2 = N0 / 2`. In normalized mode `T_s = I_ph = 1`.
//!
//! The bit energy is `E_b = E_s / q_total` with
//! `E_s = w T_s I_ph^2 (1 + m^2 / 2)` and `q_total = q_MPPM + w n_Q`.

use crate::constellation::Constellation;
use crate::mppm::bits_per_mppm;
use crate::{Error, Result};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Elementary charge, C.
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub n: u32,
    pub w: u32,
    /// Modulation index, `0 < m <= 1`.
    pub m: f64,
    /// Slot duration (seconds, or 1 when normalized).
    pub ts: f64,
    /// Peak photocurrent (amperes, or 1 when normalized).
    pub iph: f64,
    /// Noise variance of each statistic, `N0 / 2`.
    pub sigma2: f64,
    pub normalized: bool,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, "must be positive and finite"))
    }
}

impl LinkParams {
    pub fn physical(n: u32, w: u32, m: f64, ts: f64, iph: f64, sigma2: f64) -> Result<Self> {
        bits_per_mppm(n, w)?;
        if !(m > 0.0 && m <= 1.0) {
            return Err(Error::param("m", "must lie in (0, 1]"));
        }
        positive("T_s", ts)?;
        positive("I_ph", iph)?;
        positive("sigma_n^2", sigma2)?;
        Ok(LinkParams {
            n,
            w,
            m,
            ts,
            iph,
            sigma2,
            normalized: false,
        })
    }

    pub fn normalized(n: u32, w: u32, m: f64, sigma2: f64) -> Result<Self> {
        let mut p = Self::physical(n, w, m, 1.0, 1.0, sigma2)?;
        p.normalized = true;
        Ok(p)
    }

    /// Normalized link at the given `E_b/N0` in dB.
    pub fn from_ebn0(n: u32, w: u32, m: f64, constellation: &Constellation, ebn0_db: f64) -> Result<Self> {
        let mut p = Self::normalized(n, w, m, 1.0)?;
        p.sigma2 = sigma_from_ebn0(ebn0_db, &p, constellation)?;
        positive("sigma_n^2", p.sigma2)?;
        Ok(p)
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self
    }

    pub fn n0(&self) -> f64 {
        2.0 * self.sigma2
    }

    /// `T_s I_ph^2`.
    pub fn pulse_energy(&self) -> f64 {
        self.ts * self.iph * self.iph
    }

    /// Noncentrality of a signal-slot CMD metric carrying a symbol of
    /// normalized energy `energy`.
    pub fn omega(&self, energy: f64) -> f64 {
        self.pulse_energy() * 0.5 * self.m * self.m * energy
    }

    /// Mean of the DC matched-filter output of a signal slot.
    pub fn mu(&self) -> f64 {
        libm::sqrt(self.ts) * self.iph
    }

    /// Amplitude factor `sqrt(T_s / 2) I_ph m` of the I/Q statistics.
    pub fn qam_amplitude(&self) -> f64 {
        libm::sqrt(0.5 * self.ts) * self.iph * self.m
    }

    /// `T_s I_ph^2 m^2 / sigma_n^2`, the per-symbol QAM union-bound scale.
    pub fn qam_scale(&self) -> f64 {
        self.pulse_energy() * self.m * self.m / self.sigma2
    }

    /// `T_s I_ph^2 / sigma_n^2`, the MPPM union-bound scale.
    pub fn mppm_scale(&self) -> f64 {
        self.pulse_energy() / self.sigma2
    }

    /// `E_s,QAM / N0`.
    pub fn es_qam_n0(&self) -> f64 {
        0.5 * self.pulse_energy() * self.m * self.m / self.n0()
    }
}

/// Bits per QAM-MPPM frame, `q_MPPM + w n_Q`.
pub fn bits_per_frame(n: u32, w: u32, constellation: &Constellation) -> Result<u32> {
    Ok(bits_per_mppm(n, w)? + w * constellation.bits_per_symbol())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameEnergies {
    /// Mean energy per QAM-MPPM frame.
    pub es: f64,
    /// Mean energy per QAM symbol.
    pub es_qam: f64,
    /// Energy per bit.
    pub eb: f64,
}

pub fn frame_energies(params: &LinkParams, constellation: &Constellation) -> Result<FrameEnergies> {
    let q_total = bits_per_frame(params.n, params.w, constellation)?;
    let e = params.pulse_energy();
    let es_qam = 0.5 * e * params.m * params.m;
    let es = params.w as f64 * (e + es_qam);
    Ok(FrameEnergies {
        es,
        es_qam,
        eb: es / q_total as f64,
    })
}

/// Noise variance at `E_b/N0 = ebn0_db` for the energies of `params`.
pub fn sigma_from_ebn0(ebn0_db: f64, params: &LinkParams, constellation: &Constellation) -> Result<f64> {
    if !ebn0_db.is_finite() {
        return Err(Error::param("ebn0_db", "must be finite"));
    }
    let eb = frame_energies(params, constellation)?.eb;
    Ok(0.5 * eb * libm::pow(10.0, -ebn0_db / 10.0))
}

/// `E_b/N0` in dB of `params`.
pub fn ebn0_from_sigma(params: &LinkParams, constellation: &Constellation) -> Result<f64> {
    let eb = frame_energies(params, constellation)?.eb;
    Ok(10.0 * libm::log10(eb / params.n0()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverNoiseParams {
    /// Kelvin.
    pub temperature: f64,
    /// Load resistance, ohms.
    pub load: f64,
    /// Linear noise factor.
    pub noise_factor: f64,
    /// Relative intensity noise, 1/Hz (linear).
    pub rin: f64,
    /// Photodiode responsivity, A/W.
    pub responsivity: f64,
}

impl ReceiverNoiseParams {
    /// 290 K, 50 ohm, 10 dB noise figure, -155 dB/Hz RIN, 0.5 A/W.
    pub fn typical() -> Self {
        ReceiverNoiseParams {
            temperature: 290.0,
            load: 50.0,
            noise_factor: 10.0,
            rin: libm::pow(10.0, -15.5),
            responsivity: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("temperature", self.temperature)?;
        positive("load", self.load)?;
        positive("noise_factor", self.noise_factor)?;
        positive("rin", self.rin)?;
        positive("responsivity", self.responsivity)
    }

    pub fn thermal_psd(&self) -> f64 {
        4.0 * BOLTZMANN * self.temperature * self.noise_factor / self.load
    }

    pub fn shot_psd(&self, i_dc: f64) -> f64 {
        2.0 * ELECTRON_CHARGE * i_dc
    }

    pub fn rin_psd(&self, i_dc: f64) -> f64 {
        self.rin * i_dc * i_dc
    }

    /// One-sided noise power spectral density at DC photocurrent `i_dc`.
    pub fn n0(&self, i_dc: f64) -> f64 {
        self.thermal_psd() + self.shot_psd(i_dc) + self.rin_psd(i_dc)
    }
}

/// Physical link at mean received optical power `p_opt` (watts) and bit
/// rate `rb` (bits/s).
pub fn link_from_popt(
    p_opt: f64,
    rx: &ReceiverNoiseParams,
    n: u32,
    w: u32,
    m: f64,
    rb: f64,
    q_total: u32,
) -> Result<LinkParams> {
    positive("p_opt", p_opt)?;
    positive("R_b", rb)?;
    rx.validate()?;
    if q_total == 0 {
        return Err(Error::param("q_total", "must be positive"));
    }
    let i_dc = rx.responsivity * p_opt;
    let iph = n as f64 / w as f64 * i_dc;
    let ts = q_total as f64 / (n as f64 * rb);
    LinkParams::physical(n, w, m, ts, iph, 0.5 * rx.n0(i_dc))
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * libm::pow(10.0, dbm / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorCost {
    pub input_filter: f64,
    pub qam_metrics: f64,
    pub qam_sorting: f64,
    pub mppm: f64,
}

impl DetectorCost {
    pub fn total(&self) -> f64 {
        self.input_filter + self.qam_metrics + self.qam_sorting + self.mppm
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityReport {
    pub cmd: DetectorCost,
    pub imd: DetectorCost,
    /// IMD over CMD total cost.
    pub gain: f64,
}

/// Operation counts per frame for both detectors, with `log = log2`.
pub fn complexity(n: u32, w: u32, m_q: u32, ns: u32) -> Result<ComplexityReport> {
    if n < 2 {
        return Err(Error::param("N", "must be at least 2"));
    }
    if w < 1 || w > n {
        return Err(Error::param("w", "must lie in 1..=N"));
    }
    if m_q < 2 {
        return Err(Error::param("M_Q", "must be at least 2"));
    }
    if ns < 2 {
        return Err(Error::param("N_s", "must be at least 2 samples per slot"));
    }
    let (n, w, m_q, ns) = (n as f64, w as f64, m_q as f64, ns as f64);
    let heap = n * libm::log2(w);
    let cmd = DetectorCost {
        input_filter: 0.0,
        qam_metrics: 2.0 * n * ns,
        qam_sorting: n * m_q,
        mppm: heap,
    };
    let imd = DetectorCost {
        input_filter: n * ns,
        qam_metrics: 2.0 * w * ns,
        qam_sorting: w * m_q,
        mppm: heap,
    };
    Ok(ComplexityReport {
        cmd,
        imd,
        gain: imd.total() / cmd.total(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qam16() -> Constellation {
        Constellation::new(4).unwrap()
    }

    #[test]
    fn normalized_energies() {
        let p = LinkParams::normalized(12, 6, 0.5, 1.0).unwrap();
        let e = frame_energies(&p, &qam16()).unwrap();
        assert!((e.es - 6.75).abs() < 1e-15);
        assert!((e.eb - 6.75 / 33.0).abs() < 1e-15);
        assert!((e.es_qam - 0.125).abs() < 1e-15);
    }

    #[test]
    fn energies_scale_quadratically() {
        let c = qam16();
        let a = LinkParams::physical(12, 6, 0.5, 2e-9, 1e-3, 1e-20).unwrap();
        let mut b = a;
        b.iph *= 2.0;
        let (ea, eb) = (frame_energies(&a, &c).unwrap(), frame_energies(&b, &c).unwrap());
        assert!((eb.es / ea.es - 4.0).abs() < 1e-14);
        assert!((eb.es_qam / ea.es_qam - 4.0).abs() < 1e-14);
    }

    #[test]
    fn sigma_round_trip() {
        let c = qam16();
        let p = LinkParams::normalized(12, 6, 0.5, 1.0).unwrap();
        for db in [-5.0, 0.0, 3.3, 10.0, 18.0] {
            let s = sigma_from_ebn0(db, &p, &c).unwrap();
            let back = ebn0_from_sigma(&p.with_sigma2(s), &c).unwrap();
            assert!((back - db).abs() < 1e-12);
        }
        let s0 = sigma_from_ebn0(0.0, &p, &c).unwrap();
        let s10 = sigma_from_ebn0(10.0, &p, &c).unwrap();
        assert!((s0 / s10 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn typical_receiver_noise() {
        let rx = ReceiverNoiseParams::typical();
        let i_dc = 0.5e-3;
        let thermal = 4.0 * 1.380649e-23 * 290.0 * 10.0 / 50.0;
        let shot = 2.0 * 1.602176634e-19 * i_dc;
        let rin = 3.1622776601683794e-16 * i_dc * i_dc;
        assert!((rx.n0(i_dc) - (thermal + shot + rin)).abs() < 1e-15 * thermal);
        assert_eq!(rx.n0(0.0), rx.thermal_psd());
        assert!(rx.n0(1e-4) < rx.n0(2e-4));
    }

    #[test]
    fn link_from_optical_power() {
        let rx = ReceiverNoiseParams::typical();
        let p = link_from_popt(1e-3, &rx, 12, 6, 0.5, 50e6, 33).unwrap();
        assert!((p.iph - 2.0 * 0.5e-3).abs() < 1e-18);
        assert!((p.ts - 33.0 / (12.0 * 50e6)).abs() < 1e-22);
        assert!((p.sigma2 - 0.5 * rx.n0(0.5e-3)).abs() < 1e-30);
        // mean optical power recovers p_opt
        assert!(((p.w as f64 / p.n as f64) * p.iph / rx.responsivity - 1e-3).abs() < 1e-15);
        assert!(link_from_popt(0.0, &rx, 12, 6, 0.5, 50e6, 33).is_err());
        assert!(link_from_popt(1e-3, &rx, 12, 6, 0.5, -1.0, 33).is_err());
    }

    #[test]
    fn complexity_example() {
        let r = complexity(12, 6, 16, 2).unwrap();
        assert!((r.cmd.total() - 271.02).abs() < 0.01);
        assert!((r.imd.total() - 175.02).abs() < 0.01);
        assert!((r.gain - 0.6458).abs() < 1e-3);
        assert!(complexity(12, 6, 16, 1).is_err());
    }

    #[test]
    fn gain_increases_with_weight() {
        for n in [4u32, 12, 32, 64] {
            for m_q in [4u32, 16, 64] {
                let g: alloc::vec::Vec<f64> =
                    (1..n).map(|w| complexity(n, w, m_q, 2).unwrap().gain).collect();
                assert!(g.windows(2).all(|p| p[1] > p[0]), "N={n} M={m_q}");
                assert!(g.iter().all(|&x| x > 0.0));
            }
        }
    }

    #[test]
    fn gain_below_one_region() {
        // IMD is cheaper exactly when w/N <= (N_s + M_Q) / (2 N_s + M_Q)
        for n in 2..=64u32 {
            for m_q in [4u32, 8, 16, 32, 64] {
                for w in 1..=n {
                    for ns in [2u32, 4] {
                        let g = complexity(n, w, m_q, ns).unwrap().gain;
                        let frac = w as f64 / n as f64;
                        let knee = (ns + m_q) as f64 / (2 * ns + m_q) as f64;
                        if frac < knee - 1e-12 {
                            assert!(g < 1.0);
                        } else if frac > knee + 1e-12 {
                            assert!(g > 1.0);
                        }
                    }
                }
            }
        }
    }
}
