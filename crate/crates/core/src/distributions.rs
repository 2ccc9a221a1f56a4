//! Slot-metric distributions of both detectors.
//!
//! CMD metrics `X = (r^I)^2 + (r^Q)^2` are chi-square with two degrees of
//! freedom: central (exponential) in non-signal slots and noncentral with
//! noncentrality `Omega` in signal slots. IMD metrics are the Gaussian
//! matched-filter outputs with mean `mu` (signal) or 0 (non-signal).
//!
//! Every cdf has a matching survival function evaluated without `1 - cdf`.

use alloc::vec::Vec;

use crate::constellation::Constellation;
use crate::link::LinkParams;
use crate::special::{erfc, i0e, marcum_q1_pair};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotDistParams {
    pub sigma2: f64,
    pub omega: f64,
    pub mu: f64,
}

impl SlotDistParams {
    /// Parameters for a signal slot carrying a symbol of normalized energy
    /// `energy`.
    pub fn from_link(link: &LinkParams, energy: f64) -> Self {
        SlotDistParams {
            sigma2: link.sigma2,
            omega: link.omega(energy),
            mu: link.mu(),
        }
    }
}

#[inline]
fn flush(v: f64) -> f64 {
    if v.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        v
    }
}

pub fn f_nsl_cmd(x: f64, sigma2: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    flush(libm::exp(-x / (2.0 * sigma2)) / (2.0 * sigma2))
}

pub fn cdf_nsl_cmd(x: f64, sigma2: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    -libm::expm1(-x / (2.0 * sigma2))
}

pub fn sf_nsl_cmd(x: f64, sigma2: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    flush(libm::exp(-x / (2.0 * sigma2)))
}

/// Noncentral chi-square (2 degrees of freedom) density,
/// `exp(-(sqrt(x) - sqrt(Omega))^2 / 2 sigma^2) I0e(sqrt(x Omega) / sigma^2) / 2 sigma^2`.
pub fn f_sl_cmd(x: f64, omega: f64, sigma2: f64) -> f64 {
    if omega == 0.0 {
        return f_nsl_cmd(x, sigma2);
    }
    if x < 0.0 {
        return 0.0;
    }
    let d = libm::sqrt(x) - libm::sqrt(omega);
    let z = libm::sqrt(x * omega) / sigma2;
    flush(libm::exp(-d * d / (2.0 * sigma2)) * i0e(z) / (2.0 * sigma2))
}

/// Both tails `(F, 1 - F)` of the signal-slot CMD metric,
/// `F = 1 - Q1(sqrt(Omega) / sigma, sqrt(x) / sigma)`.
pub fn tails_sl_cmd(x: f64, omega: f64, sigma2: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let s = libm::sqrt(sigma2);
    let (p, q) = marcum_q1_pair(libm::sqrt(omega) / s, libm::sqrt(x) / s);
    (flush(p), flush(q))
}

pub fn cdf_sl_cmd(x: f64, omega: f64, sigma2: f64) -> f64 {
    tails_sl_cmd(x, omega, sigma2).0
}

pub fn sf_sl_cmd(x: f64, omega: f64, sigma2: f64) -> f64 {
    tails_sl_cmd(x, omega, sigma2).1
}

pub fn f_sl_imd(x: f64, mu: f64, sigma2: f64) -> f64 {
    let d = x - mu;
    flush(libm::exp(-d * d / (2.0 * sigma2)) / libm::sqrt(2.0 * core::f64::consts::PI * sigma2))
}

pub fn cdf_sl_imd(x: f64, mu: f64, sigma2: f64) -> f64 {
    flush(0.5 * erfc(-(x - mu) / libm::sqrt(2.0 * sigma2)))
}

pub fn sf_sl_imd(x: f64, mu: f64, sigma2: f64) -> f64 {
    flush(0.5 * erfc((x - mu) / libm::sqrt(2.0 * sigma2)))
}

pub fn f_nsl_imd(x: f64, sigma2: f64) -> f64 {
    f_sl_imd(x, 0.0, sigma2)
}

pub fn cdf_nsl_imd(x: f64, sigma2: f64) -> f64 {
    cdf_sl_imd(x, 0.0, sigma2)
}

pub fn sf_nsl_imd(x: f64, sigma2: f64) -> f64 {
    sf_sl_imd(x, 0.0, sigma2)
}

/// Distinct symbol energies of a constellation with their multiplicities,
/// in increasing energy order. Energies within `1e-9` relative are merged.
pub fn energy_rings(constellation: &Constellation) -> Vec<(f64, usize)> {
    let mut e: Vec<f64> = (0..constellation.order()).map(|i| constellation.energy(i)).collect();
    e.sort_by(f64::total_cmp);
    let mut rings: Vec<(f64, usize)> = Vec::new();
    for v in e {
        match rings.last_mut() {
            Some((r, c)) if (v - *r).abs() <= 1e-9 * r.abs().max(1.0) => *c += 1,
            _ => rings.push((v, 1)),
        }
    }
    rings
}

/// Uniform mixture over the constellation of the signal-slot CMD metric.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdMixture {
    /// `(Omega, weight)` per energy ring; weights sum to 1.
    pub components: Vec<(f64, f64)>,
    pub sigma2: f64,
}

impl CmdMixture {
    pub fn new(constellation: &Constellation, link: &LinkParams) -> Self {
        let m = constellation.order() as f64;
        CmdMixture {
            components: energy_rings(constellation)
                .into_iter()
                .map(|(e, c)| (link.omega(e), c as f64 / m))
                .collect(),
            sigma2: link.sigma2,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components.iter().map(|&(o, p)| p * f_sl_cmd(x, o, self.sigma2)).sum()
    }

    /// `(cdf, survival)`.
    pub fn tails(&self, x: f64) -> (f64, f64) {
        self.components.iter().fold((0.0, 0.0), |(c, s), &(o, p)| {
            let (a, b) = tails_sl_cmd(x, o, self.sigma2);
            (c + p * a, s + p * b)
        })
    }

    pub fn max_omega(&self) -> f64 {
        self.components.iter().map(|c| c.0).fold(0.0, f64::max)
    }
}

/// Mixture density and cdf of the signal-slot CMD metric at `x`.
pub fn mixture_sl_cmd(x: f64, constellation: &Constellation, link: &LinkParams) -> (f64, f64) {
    let mix = CmdMixture::new(constellation, link);
    (mix.pdf(x), mix.tails(x).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn cmd_upper(omega: f64, sigma2: f64) -> f64 {
        let s = libm::sqrt(omega) + 14.0 * libm::sqrt(sigma2);
        s * s
    }

    fn cmd_breaks(omega: f64, sigma2: f64) -> [f64; 3] {
        let (a, s) = (libm::sqrt(omega), libm::sqrt(sigma2));
        [(a - 4.0 * s).max(0.0).powi(2), omega, (a + 4.0 * s).powi(2)]
    }

    const GRID: [(f64, f64); 8] = [
        (0.0, 1.0),
        (0.5, 0.1),
        (2.0, 0.5),
        (1.0, 1.0),
        (10.0, 0.05),
        (100.0, 0.01),
        (1e3, 1e-3),
        (0.03, 2.0),
    ];

    #[test]
    fn cmd_densities_integrate_to_one() {
        for &(o, s2) in &GRID {
            let tol = Tolerance::absolute(1e-11);
            let r = integrate(|x| f_sl_cmd(x, o, s2), 0.0, cmd_upper(o, s2), &cmd_breaks(o, s2), tol).unwrap();
            assert!((r.value - 1.0).abs() < 1e-9, "Omega={o} s2={s2}: {}", r.value);
            let r = integrate(|x| f_nsl_cmd(x, s2), 0.0, cmd_upper(0.0, s2), &[], tol).unwrap();
            assert!((r.value - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn central_case_is_exponential() {
        for &s2 in &[0.1, 1.0, 7.0] {
            for i in 0..50 {
                let x = i as f64 * 0.3 * s2;
                assert_eq!(f_sl_cmd(x, 0.0, s2), f_nsl_cmd(x, s2));
                assert!((cdf_sl_cmd(x, 0.0, s2) - cdf_nsl_cmd(x, s2)).abs() < 1e-14);
            }
            let median = 2.0 * s2 * core::f64::consts::LN_2;
            assert!((cdf_nsl_cmd(median, s2) - 0.5).abs() < 1e-15);
        }
        assert_eq!(cdf_nsl_cmd(0.0, 1.0), 0.0);
        assert_eq!(cdf_nsl_cmd(f64::INFINITY, 1.0), 1.0);
    }

    #[test]
    fn cmd_cdf_matches_quadrature() {
        let r = integrate(|x| f_sl_cmd(x, 2.0, 0.5), 0.0, 2.0, &[], Tolerance::absolute(1e-13)).unwrap();
        assert!((cdf_sl_cmd(2.0, 2.0, 0.5) - r.value).abs() < 1e-8);
        assert_eq!(cdf_sl_cmd(0.0, 2.0, 0.5), 0.0);
    }

    // five-point stencil
    fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let h = 1e-5 * x.abs().max(1e-3);
        (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
    }

    #[test]
    fn cmd_cdf_derivative_is_density() {
        for &(o, s2) in &GRID {
            let hi = cmd_upper(o, s2);
            for i in 1..60 {
                let x = hi * i as f64 / 60.0;
                let pdf = f_sl_cmd(x, o, s2);
                if pdf < 1e-8 * (1.0 / s2) {
                    continue;
                }
                let fd = if cdf_sl_cmd(x, o, s2) < 0.5 {
                    central_difference(|t| cdf_sl_cmd(t, o, s2), x)
                } else {
                    -central_difference(|t| sf_sl_cmd(t, o, s2), x)
                };
                assert!((fd - pdf).abs() < 1e-6 * pdf, "Omega={o} s2={s2} x={x}: {fd} vs {pdf}");
            }
        }
    }

    #[test]
    fn imd_distributions() {
        for &(mu, s2) in &[(1.0, 0.1), (0.5, 1.0), (3.0, 0.01)] {
            let sd = libm::sqrt(s2);
            let r = integrate(|x| f_sl_imd(x, mu, s2), mu - 14.0 * sd, mu + 14.0 * sd, &[mu], Tolerance::absolute(1e-12))
                .unwrap();
            assert!((r.value - 1.0).abs() < 1e-9);
            assert!((cdf_sl_imd(mu, mu, s2) - 0.5).abs() < 1e-16);
            assert!((cdf_nsl_imd(0.0, s2) - 0.5).abs() < 1e-16);
            for i in -40..=40 {
                let x = mu + i as f64 * 0.15 * sd;
                let pdf = f_sl_imd(x, mu, s2);
                let fd = if x < mu {
                    central_difference(|t| cdf_sl_imd(t, mu, s2), x)
                } else {
                    -central_difference(|t| sf_sl_imd(t, mu, s2), x)
                };
                assert!((fd - pdf).abs() < 1e-6 * pdf, "x={x}");
                assert!((cdf_sl_imd(x, mu, s2) + sf_sl_imd(x, mu, s2) - 1.0).abs() < 1e-15);
                let pdf = f_nsl_imd(x, s2);
                let fd = if x < 0.0 {
                    central_difference(|t| cdf_nsl_imd(t, s2), x)
                } else {
                    -central_difference(|t| sf_nsl_imd(t, s2), x)
                };
                if pdf > 1e-12 {
                    assert!((fd - pdf).abs() < 1e-6 * pdf, "x={x}");
                }
            }
        }
    }

    #[test]
    fn deep_tails_flush_to_zero() {
        assert_eq!(f_nsl_cmd(1e6, 1e-3), 0.0);
        assert_eq!(sf_sl_imd(1e3, 0.0, 1.0), 0.0);
        assert_eq!(f_sl_cmd(1e6, 1.0, 1e-2), 0.0);
        assert_eq!(sf_sl_cmd(1e6, 1.0, 1e-2), 0.0);
    }

    #[test]
    fn mixtures() {
        let link = LinkParams::normalized(12, 6, 0.5, 0.02).unwrap();
        let c4 = Constellation::new(2).unwrap();
        let mix4 = CmdMixture::new(&c4, &link);
        assert_eq!(mix4.components.len(), 1);
        let o = mix4.components[0].0;
        assert!((o / link.omega(1.0) - 1.0).abs() < 1e-15);
        for i in 0..30 {
            let x = i as f64 * 0.01;
            let (d, c) = mixture_sl_cmd(x, &c4, &link);
            assert!((d - f_sl_cmd(x, o, link.sigma2)).abs() <= 1e-15 * d.max(1e-300));
            assert!((c - cdf_sl_cmd(x, o, link.sigma2)).abs() <= 1e-15);
        }

        let c16 = Constellation::new(4).unwrap();
        let mix = CmdMixture::new(&c16, &link);
        let w: Vec<f64> = mix.components.iter().map(|c| c.1).collect();
        assert_eq!(w, [0.25, 0.5, 0.25]);
        let hi = cmd_upper(mix.max_omega(), link.sigma2);
        let mut breaks = Vec::new();
        for &(o, _) in &mix.components {
            breaks.extend(cmd_breaks(o, link.sigma2));
        }
        let r = integrate(|x| mix.pdf(x), 0.0, hi, &breaks, Tolerance::absolute(1e-11)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9);
        let (c, s) = mix.tails(hi);
        assert!((c - 1.0).abs() < 1e-12 && s < 1e-12);
    }

    // Equal-probability bins from the cdf, Pearson chi-square against `samples`.
    fn chi_square_p<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F, bins: usize) -> f64 {
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        let mut counts = alloc::vec![0usize; bins];
        for &x in samples.iter() {
            let u = cdf(x);
            counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let e = n / bins as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat)
    }

    fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn simulated_metrics_fit_distributions() {
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5107);
        for &(o, s2) in &[(0.0, 1.0), (2.0, 0.5), (0.1, 0.05), (0.02, 0.02)] {
            let (s, a) = (libm::sqrt(s2), libm::sqrt(o));
            let mut xs: Vec<f64> = (0..n)
                .map(|_| {
                    let i: f64 = rng.sample(StandardNormal);
                    let q: f64 = rng.sample(StandardNormal);
                    // noncentrality split between the two quadratures
                    let (ri, rq) = (a * 0.6 + s * i, a * 0.8 + s * q);
                    ri * ri + rq * rq
                })
                .collect();
            let p = chi_square_p(&mut xs, |x| cdf_sl_cmd(x, o, s2), 100);
            assert!(p > 0.01, "Omega={o} s2={s2} p={p}");
            if o == 0.0 {
                // 1.63 / sqrt(n) is the 1% critical value
                assert!(ks_statistic(&mut xs, |x| cdf_nsl_cmd(x, s2)) < 1.63 / libm::sqrt(n as f64));
            }
        }
        for &(mu, s2) in &[(1.0, 0.3), (0.0, 2.0)] {
            let s = libm::sqrt(s2);
            let mut xs: Vec<f64> = (0..n)
                .map(|_| mu + s * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let p = chi_square_p(&mut xs, |x| cdf_sl_imd(x, mu, s2), 100);
            assert!(p > 0.01, "mu={mu} p={p}");
            assert!(ks_statistic(&mut xs, |x| cdf_sl_imd(x, mu, s2)) < 1.63 / libm::sqrt(n as f64));
        }
    }
}
