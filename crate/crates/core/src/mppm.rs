//! Multi-pulse PPM patterns and their combinatorics.
//!
//! A pattern is a weight-`w` subset of `N <= 128` slots, stored as a bit
//! mask with bit `k` set when slot `k` is active. Patterns are ranked in
//! lexicographic order of their sorted slot lists, so `{0,1} < {0,2} <
//! {0,3} < {1,2} < ...`. The expurgated set used for transmission is the
//! first `2^q` patterns of that order, `q = floor(log2 C(N, w))`.
//!
//! All binomials are exact `u128` integers.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::special::erfc;
use crate::{Error, Result};

/// Largest supported frame length.
pub const MAX_SLOTS: u32 = 128;

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial(n: u32, k: u32) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        let num = (n - i) as u128;
        let den = (i + 1) as u128;
        let g = gcd(c, den);
        c = (c / g).checked_mul(num / (den / g))?;
    }
    Some(c)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn check_geometry(n: u32, w: u32) -> Result<()> {
    if !(2..=MAX_SLOTS).contains(&n) {
        return Err(Error::param("N", "must lie in 2..=128"));
    }
    if w < 1 || w >= n {
        return Err(Error::param("w", "must lie in 1..=N-1"));
    }
    Ok(())
}

/// Bits carried by one MPPM symbol: `floor(log2 C(n, w))`, in exact integer
/// arithmetic.
pub fn bits_per_mppm(n: u32, w: u32) -> Result<u32> {
    check_geometry(n, w)?;
    let c = binomial(n, w).ok_or(Error::param("N", "binomial overflows u128"))?;
    Ok(127 - c.leading_zeros())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MppmPattern(u128);

impl MppmPattern {
    pub fn from_mask(mask: u128) -> Self {
        MppmPattern(mask)
    }

    pub fn from_slots(slots: &[usize]) -> Self {
        MppmPattern(slots.iter().fold(0u128, |m, &s| m | (1u128 << s)))
    }

    pub fn mask(self) -> u128 {
        self.0
    }

    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_active(self, slot: usize) -> bool {
        (self.0 >> slot) & 1 == 1
    }

    /// Active slots in ascending order.
    pub fn slots(self) -> impl Iterator<Item = usize> {
        let mut m = self.0;
        core::iter::from_fn(move || {
            if m == 0 {
                None
            } else {
                let s = m.trailing_zeros() as usize;
                m &= m - 1;
                Some(s)
            }
        })
    }

    /// Squared Euclidean (= Hamming) distance between two 0/1 vectors.
    pub fn distance2(self, other: MppmPattern) -> u32 {
        (self.0 ^ other.0).count_ones()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MppmCode {
    n: u32,
    w: u32,
    q: u32,
    total: u128,
    size: u128,
    // pascal[(a) * (n + 1) + b] = C(a, b)
    pascal: Vec<u128>,
}

impl MppmCode {
    pub fn new(n: u32, w: u32) -> Result<Self> {
        let q = bits_per_mppm(n, w)?;
        let stride = n as usize + 1;
        let mut pascal = vec![0u128; stride * stride];
        for a in 0..=n as usize {
            pascal[a * stride] = 1;
            for b in 1..=a {
                pascal[a * stride + b] = pascal[(a - 1) * stride + b - 1] + pascal[(a - 1) * stride + b];
            }
        }
        Ok(MppmCode {
            n,
            w,
            q,
            total: pascal[n as usize * stride + w as usize],
            size: 1u128 << q,
            pascal,
        })
    }

    pub fn slots(&self) -> u32 {
        self.n
    }

    pub fn weight(&self) -> u32 {
        self.w
    }

    /// Bits per MPPM symbol.
    pub fn bits(&self) -> u32 {
        self.q
    }

    /// `C(N, w)`, the number of weight-`w` patterns.
    pub fn total_patterns(&self) -> u128 {
        self.total
    }

    /// `2^q`, the size of the expurgated set.
    pub fn size(&self) -> u128 {
        self.size
    }

    #[inline]
    fn choose(&self, a: u32, b: u32) -> u128 {
        if b > a {
            0
        } else {
            self.pascal[a as usize * (self.n as usize + 1) + b as usize]
        }
    }

    /// Lexicographic rank among all `C(N, w)` patterns.
    pub fn rank(&self, pattern: MppmPattern) -> u128 {
        let mut r = 0u128;
        let mut next = 0u32;
        for (j, c) in pattern.slots().enumerate() {
            let left = self.w - 1 - j as u32;
            for v in next..c as u32 {
                r += self.choose(self.n - 1 - v, left);
            }
            next = c as u32 + 1;
        }
        r
    }

    /// Inverse of [`rank`](Self::rank); `rank < C(N, w)`.
    pub fn unrank(&self, mut rank: u128) -> Result<MppmPattern> {
        if rank >= self.total {
            return Err(Error::param("rank", "exceeds the number of patterns"));
        }
        let mut mask = 0u128;
        let mut v = 0u32;
        for j in 0..self.w {
            let left = self.w - 1 - j;
            loop {
                let cnt = self.choose(self.n - 1 - v, left);
                if rank < cnt {
                    mask |= 1u128 << v;
                    v += 1;
                    break;
                }
                rank -= cnt;
                v += 1;
            }
        }
        Ok(MppmPattern(mask))
    }

    #[inline]
    fn fits(&self, pattern: MppmPattern) -> bool {
        pattern.0.checked_shr(self.n).unwrap_or(0) == 0
    }

    /// Whether the pattern belongs to the expurgated set.
    pub fn contains(&self, pattern: MppmPattern) -> bool {
        pattern.weight() == self.w && self.fits(pattern) && self.rank(pattern) < self.size
    }

    /// Maps a `q`-bit word to its pattern.
    pub fn encode(&self, word: u128) -> Result<MppmPattern> {
        if word >= self.size {
            return Err(Error::param("word", "must be below 2^q"));
        }
        self.unrank(word)
    }

    /// Inverse of [`encode`](Self::encode); `None` outside the expurgated set.
    pub fn decode(&self, pattern: MppmPattern) -> Option<u128> {
        if pattern.weight() != self.w || !self.fits(pattern) {
            return None;
        }
        let r = self.rank(pattern);
        (r < self.size).then_some(r)
    }

    /// Nearest member of the expurgated set. Members are returned as-is;
    /// otherwise all members at the minimum distance are collected and one is
    /// drawn uniformly with `rng`.
    pub fn correct<R: Rng + ?Sized>(&self, detected: MppmPattern, rng: &mut R) -> MppmPattern {
        if self.contains(detected) {
            return detected;
        }
        let ones: Vec<usize> = detected.slots().collect();
        let zeros: Vec<usize> = (0..self.n as usize).filter(|&s| !detected.is_active(s)).collect();
        let mut candidates = Vec::new();
        for j in 1..=ones.len().min(zeros.len()) {
            for_each_subset(&ones, j, &mut |out| {
                for_each_subset(&zeros, j, &mut |inn| {
                    let flip = out.iter().chain(inn).fold(0u128, |m, &s| m | (1u128 << s));
                    let cand = MppmPattern(detected.0 ^ flip);
                    if self.rank(cand) < self.size {
                        candidates.push(cand);
                    }
                });
            });
            if !candidates.is_empty() {
                break;
            }
        }
        candidates[rng.random_range(0..candidates.len())]
    }

    /// Ordered pairs `(B, B')` of expurgated patterns by half distance:
    /// entry `j` counts pairs with `||B - B'||^2 = 2j` (entry 0 is `B = B'`).
    pub fn distance_spectrum(&self) -> Vec<u128> {
        let w = self.w as usize;
        let jmax = w.min((self.n - self.w) as usize);
        let dmax = 2 * jmax;
        let last = match self.unrank(self.size - 1) {
            Ok(p) => p,
            Err(_) => unreachable!(),
        };
        // state: ones in B, ones in B', mismatches, tight(B), tight(B')
        let dim_d = dmax + 1;
        let idx = |a: usize, b: usize, d: usize, ta: usize, tb: usize| {
            ((((a * (w + 1) + b) * dim_d + d) * 2 + ta) * 2) + tb
        };
        let states = (w + 1) * (w + 1) * dim_d * 4;
        let mut cur = vec![0u128; states];
        cur[idx(0, 0, 0, 1, 1)] = 1;
        for k in 0..self.n as usize {
            let tbit = last.is_active(k) as usize;
            let mut nxt = vec![0u128; states];
            for a in 0..=w {
                for b in 0..=w {
                    for d in 0..=dmax {
                        for ta in 0..2 {
                            for tb in 0..2 {
                                let c = cur[idx(a, b, d, ta, tb)];
                                if c == 0 {
                                    continue;
                                }
                                for xa in 0..2usize {
                                    let Some(na) = step_tight(ta, tbit, xa) else { continue };
                                    if a + xa > w {
                                        continue;
                                    }
                                    for xb in 0..2usize {
                                        let Some(nb) = step_tight(tb, tbit, xb) else { continue };
                                        if b + xb > w {
                                            continue;
                                        }
                                        let nd = d + (xa != xb) as usize;
                                        if nd > dmax {
                                            continue;
                                        }
                                        nxt[idx(a + xa, b + xb, nd, na, nb)] += c;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            cur = nxt;
        }
        let mut spectrum = vec![0u128; jmax + 1];
        for (j, slot) in spectrum.iter_mut().enumerate() {
            for ta in 0..2 {
                for tb in 0..2 {
                    *slot += cur[idx(w, w, 2 * j, ta, tb)];
                }
            }
        }
        spectrum
    }

    /// Union bound on the MPPM symbol error probability of the
    /// matched-filter detector,
    /// `2^-(q+1) sum_B sum_{B' != B} erfc(sqrt(scale ||B - B'||^2 / 8))`,
    /// with `scale = T_s I_ph^2 / sigma_n^2`. Not clamped.
    pub fn ser_union_bound(&self, scale: f64) -> Result<f64> {
        if !(scale >= 0.0) {
            return Err(Error::param("scale", "must be nonnegative"));
        }
        let spectrum = self.distance_spectrum();
        let norm = 0.5 / self.size as f64;
        Ok(spectrum
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, &count)| norm * count as f64 * erfc(libm::sqrt(scale * (2 * j) as f64 / 8.0)))
            .sum())
    }
}

// Next tight flag when placing bit `x` against threshold bit `tbit`; `None`
// when the prefix drops below the threshold.
fn step_tight(tight: usize, tbit: usize, x: usize) -> Option<usize> {
    if tight == 0 {
        Some(0)
    } else if x == tbit {
        Some(1)
    } else if x > tbit {
        Some(0)
    } else {
        None
    }
}

fn for_each_subset<F: FnMut(&[usize])>(items: &[usize], k: usize, f: &mut F) {
    let n = items.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf: Vec<usize> = vec![0; k];
    loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = items[i];
        }
        f(&buf);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// `K_l = C(w,l) C(N-w,l) / (C(N,w) - 1)` as an exact fraction
/// `(numerator, denominator)`.
pub fn k_l_exact(n: u32, w: u32, l: u32) -> Result<(u128, u128)> {
    check_geometry(n, w)?;
    if l < 1 || l > w.min(n - w) {
        return Err(Error::param("l", "must lie in 1..=min(w, N-w)"));
    }
    let ovf = Error::param("N", "binomial overflows u128");
    let num = binomial(w, l)
        .zip(binomial(n - w, l))
        .and_then(|(a, b)| a.checked_mul(b))
        .ok_or(ovf.clone())?;
    let den = binomial(n, w).ok_or(ovf)? - 1;
    Ok((num, den))
}

/// Weight of an MPPM error that misses exactly `l` signal slots.
pub fn k_l(n: u32, w: u32, l: u32) -> Result<f64> {
    let (num, den) = k_l_exact(n, w, l)?;
    Ok(num as f64 / den as f64)
}

/// Expected number of wrong MPPM bits given an MPPM symbol error,
/// `q 2^(q-1) / (2^q - 1)`.
pub fn ne_mppm(q: u32) -> f64 {
    if q == 0 {
        return 0.0;
    }
    let q_f = q as f64;
    0.5 * q_f / (1.0 - libm::exp2(-q_f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bits_per_symbol_examples() {
        assert_eq!(bits_per_mppm(12, 6).unwrap(), 9);
        assert_eq!(bits_per_mppm(4, 2).unwrap(), 2);
        assert_eq!(bits_per_mppm(32, 2).unwrap(), 8);
        assert_eq!(bits_per_mppm(2, 1).unwrap(), 1);
        assert!(bits_per_mppm(4, 0).is_err());
        assert!(bits_per_mppm(4, 4).is_err());
        assert!(bits_per_mppm(1, 1).is_err());
    }

    #[test]
    fn binomials_near_the_u128_limit() {
        assert_eq!(binomial(12, 6), Some(924));
        assert_eq!(binomial(64, 32), Some(1_832_624_140_942_590_534));
        let c = binomial(128, 64).unwrap();
        assert_eq!(c, binomial(127, 63).unwrap() + binomial(127, 64).unwrap());
        // C(128, 64) is just above 2^124
        assert_eq!(bits_per_mppm(128, 64).unwrap(), 124);
    }

    #[test]
    fn lexicographic_encoding() {
        let code = MppmCode::new(4, 2).unwrap();
        let slots = |p: MppmPattern| p.slots().collect::<Vec<_>>();
        assert_eq!(slots(code.encode(0).unwrap()), [0, 1]);
        assert_eq!(slots(code.encode(1).unwrap()), [0, 2]);
        assert_eq!(slots(code.encode(2).unwrap()), [0, 3]);
        assert_eq!(slots(code.encode(3).unwrap()), [1, 2]);
        assert!(code.encode(4).is_err());
        assert_eq!(code.decode(MppmPattern::from_slots(&[1, 3])), None);
        assert_eq!(code.rank(MppmPattern::from_slots(&[2, 3])), 5);
    }

    #[test]
    fn round_trip_n8_w4() {
        let code = MppmCode::new(8, 4).unwrap();
        for word in 0..code.size() {
            let p = code.encode(word).unwrap();
            assert_eq!(p.weight(), 4);
            assert_eq!(code.decode(p), Some(word));
        }
    }

    #[test]
    fn correction_identity_and_nearest() {
        let code = MppmCode::new(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for w in 0..4 {
            let p = code.encode(w).unwrap();
            assert_eq!(code.correct(p, &mut rng), p);
        }
        // {2,3}: {0,2}, {0,3} and {1,2} at distance 2, {0,1} at 4
        let far = MppmPattern::from_slots(&[2, 3]);
        let near = [[0, 2], [0, 3], [1, 2]].map(|s| MppmPattern::from_slots(&s));
        for _ in 0..500 {
            let c = code.correct(far, &mut rng);
            assert!(near.contains(&c));
            assert_eq!(c.distance2(far), 2);
        }
    }

    #[test]
    fn correction_ties_are_uniform() {
        let code = MppmCode::new(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let detected = MppmPattern::from_slots(&[1, 3]);
        let allowed = [
            MppmPattern::from_slots(&[0, 1]),
            MppmPattern::from_slots(&[0, 3]),
            MppmPattern::from_slots(&[1, 2]),
        ];
        let draws = 30_000;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            let c = code.correct(detected, &mut rng);
            let k = allowed.iter().position(|&a| a == c).expect("not a nearest pattern");
            counts[k] += 1;
        }
        let e = draws as f64 / 3.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // chi-square, 2 dof, p = 0.001 critical value
        assert!(chi2 < 13.82, "{counts:?}");
    }

    #[test]
    fn k_l_values() {
        assert!((k_l(4, 2, 1).unwrap() - 0.8).abs() < 1e-15);
        assert!((k_l(4, 2, 2).unwrap() - 0.2).abs() < 1e-15);
        assert!(k_l(4, 2, 0).is_err());
        assert!(k_l(4, 2, 3).is_err());
        assert!(k_l(32, 2, 3).is_err());
    }

    #[test]
    fn ne_mppm_values() {
        assert_eq!(ne_mppm(1), 1.0);
        assert!((ne_mppm(9) - 9.0 * 256.0 / 511.0).abs() < 1e-14);
        assert!((ne_mppm(60) / 60.0 - 0.5).abs() < 1e-15);
    }

    fn brute_spectrum(code: &MppmCode) -> Vec<u128> {
        let members: Vec<MppmPattern> = (0..code.size()).map(|r| code.unrank(r).unwrap()).collect();
        let jmax = code.weight().min(code.slots() - code.weight()) as usize;
        let mut s = vec![0u128; jmax + 1];
        for a in &members {
            for b in &members {
                s[(a.distance2(*b) / 2) as usize] += 1;
            }
        }
        s
    }

    #[test]
    fn spectrum_matches_brute_force() {
        for (n, w) in [(4, 2), (5, 2), (8, 3), (8, 4), (10, 5), (12, 6), (9, 1), (7, 6)] {
            let code = MppmCode::new(n, w).unwrap();
            assert_eq!(code.distance_spectrum(), brute_spectrum(&code), "N={n} w={w}");
        }
    }

    #[test]
    fn union_bound_limits() {
        let code = MppmCode::new(12, 6).unwrap();
        let at_zero = code.ser_union_bound(0.0).unwrap();
        let want = (code.size() as f64 - 1.0) / 2.0;
        assert!((at_zero - want).abs() < 1e-9 * want);
        assert!(code.ser_union_bound(1e5).unwrap() < 1e-300);
        assert!(code.ser_union_bound(-1.0).is_err());
    }
}
