//! Normalized Gray-labeled QAM constellations.
//!
//! Points are stored in label order: the bit label of point `i` is `i`
//! itself (`n_q` bits, most significant first). Square constellations
//! (even `n_q`) and the 4x2 rectangle (`n_q = 3`) carry independent Gray
//! codes on the I and Q axes. Cross constellations (odd `n_q >= 5`) use a
//! column-serpentine Gray walk over the cross footprint: vertical neighbors
//! differ in one bit, horizontal neighbors in general do not, since a full
//! Gray labeling of a cross shape does not exist.

use alloc::vec::Vec;

use crate::special::{erfc, gaussian_tail};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Square,
    Rectangular,
    Cross,
}

/// Geometry of a grid-aligned constellation: the number of distinct
/// amplitude levels on each axis, used for exact per-symbol error rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Grid {
    columns: u32,
    rows: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    bits: u32,
    shape: Shape,
    points: Vec<[f64; 2]>,
    // integer lattice coordinates (odd integers) before normalization
    lattice: Vec<[i32; 2]>,
    // distance between lattice neighbours after normalization
    min_distance: f64,
    grid: Option<Grid>,
}

fn gray(v: u32) -> u32 {
    v ^ (v >> 1)
}

fn gray_inverse(mut g: u32) -> u32 {
    let mut v = g;
    while g > 1 {
        g >>= 1;
        v ^= g;
    }
    v
}

impl Constellation {
    /// Builds the `2^n_q` point constellation, `2 <= n_q <= 10`.
    pub fn new(n_q: u32) -> Result<Self> {
        if !(2..=10).contains(&n_q) {
            return Err(Error::param("n_q", "must lie in 2..=10"));
        }
        let order = 1usize << n_q;
        let mut lattice = alloc::vec![[0i32; 2]; order];
        let (shape, grid) = if n_q % 2 == 0 || n_q == 3 {
            let ibits = (n_q + 1) / 2;
            let qbits = n_q / 2;
            let cols = 1u32 << ibits;
            let rows = 1u32 << qbits;
            for label in 0..order as u32 {
                let ci = gray_inverse(label >> qbits);
                let ri = gray_inverse(label & (rows - 1));
                lattice[label as usize] = [
                    2 * ci as i32 - cols as i32 + 1,
                    2 * ri as i32 - rows as i32 + 1,
                ];
            }
            let shape = if n_q == 3 {
                Shape::Rectangular
            } else {
                Shape::Square
            };
            (shape, Some(Grid { columns: cols, rows }))
        } else {
            let corner = 1i32 << ((n_q - 5) / 2);
            let side = 6 * corner;
            let mut k = 0u32;
            for col in 0..side {
                let outer = col < corner || col >= side - corner;
                let (lo, hi) = if outer {
                    (corner, side - corner)
                } else {
                    (0, side)
                };
                let ys: Vec<i32> = if col % 2 == 0 {
                    (lo..hi).collect()
                } else {
                    (lo..hi).rev().collect()
                };
                for row in ys {
                    lattice[gray(k) as usize] = [2 * col - side + 1, 2 * row - side + 1];
                    k += 1;
                }
            }
            debug_assert_eq!(k as usize, order);
            (Shape::Cross, None)
        };
        let energy: f64 = lattice
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1]) as f64)
            .sum::<f64>()
            / order as f64;
        let scale = 1.0 / libm::sqrt(energy);
        let points = lattice
            .iter()
            .map(|p| [p[0] as f64 * scale, p[1] as f64 * scale])
            .collect();
        Ok(Constellation {
            bits: n_q,
            shape,
            points,
            lattice,
            min_distance: 2.0 * scale,
            grid,
        })
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn point(&self, index: usize) -> [f64; 2] {
        self.points[index]
    }

    /// Bit label of point `index` (identical to the index).
    pub fn label(&self, index: usize) -> u32 {
        index as u32
    }

    pub fn energy(&self, index: usize) -> f64 {
        let [i, q] = self.points[index];
        i * i + q * q
    }

    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }

    /// Lattice coordinates (odd integers) of point `index`.
    pub fn lattice_point(&self, index: usize) -> [i32; 2] {
        self.lattice[index]
    }

    /// ML (minimum Euclidean distance) decision; ties go to the lowest index.
    pub fn demap(&self, point: [f64; 2]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, s) in self.points.iter().enumerate() {
            let di = point[0] - s[0];
            let dq = point[1] - s[1];
            let d = di * di + dq * dq;
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Union bound on the conditional symbol error probability of point `i`.
    ///
    /// `scale` is `T_s I_ph^2 m^2 / sigma_n^2`; the pairwise term for a
    /// normalized distance `d` is `erfc(sqrt(scale d^2 / 16)) / 2`. The
    /// returned sum is not clamped.
    pub fn ser_union_bound(&self, i: usize, scale: f64) -> Result<f64> {
        if !(scale >= 0.0) {
            return Err(Error::param("scale", "must be nonnegative"));
        }
        let si = self.points[i];
        let mut sum = 0.0;
        for (j, sj) in self.points.iter().enumerate() {
            if j == i {
                continue;
            }
            let di = si[0] - sj[0];
            let dq = si[1] - sj[1];
            sum += 0.5 * erfc(libm::sqrt(scale * (di * di + dq * dq) / 16.0));
        }
        Ok(sum)
    }

    /// Exact conditional symbol error probability of point `i` for grid
    /// constellations (square and rectangular), whose ML regions are
    /// rectangles. `None` for cross constellations.
    pub fn ser_exact(&self, i: usize, scale: f64) -> Option<f64> {
        let grid = self.grid?;
        // half the neighbour distance over sigma
        let q = gaussian_tail(libm::sqrt(0.5 * scale) * self.min_distance / 2.0);
        let [x, y] = self.lattice[i];
        let inner = |c: i32, levels: u32| {
            let edge = levels as i32 - 1;
            if c.abs() == edge {
                1.0
            } else {
                2.0
            }
        };
        let ei = inner(x, grid.columns) * q;
        let eq = inner(y, grid.rows) * q;
        Some(ei + eq - ei * eq)
    }

    /// Average symbol error probability at `es_n0 = E_s,QAM / N0`.
    ///
    /// Square constellations use the exact two-PAM product formula. Other
    /// shapes use the mean union bound, clamped to `[0, 1]`.
    pub fn average_ser(&self, es_n0: f64) -> f64 {
        let es_n0 = es_n0.max(0.0);
        let m = self.order() as f64;
        match self.shape {
            Shape::Square => {
                let sqrt_m = libm::sqrt(m);
                let p = 2.0 * (1.0 - 1.0 / sqrt_m) * gaussian_tail(libm::sqrt(3.0 * es_n0 / (m - 1.0)));
                p * (2.0 - p)
            }
            _ => {
                let scale = 4.0 * es_n0;
                let mean = (0..self.order())
                    .map(|i| self.ser_union_bound(i, scale).unwrap_or(f64::NAN))
                    .sum::<f64>()
                    / m;
                mean.clamp(0.0, 1.0)
            }
        }
    }
}
