use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform discretization of the torus `[0, 2π)³` with `M` nodes per side.
///
/// Nodes are stored x-fastest: the flat index of node `(j0, j1, j2)` is
/// `j0 + M * (j1 + M * j2)`. The same flat index addresses the wavenumber
/// `k = (κ(j0), κ(j1), κ(j2))` in spectral arrays, where `κ(j) = j` for
/// `j <= M/2` and `j - M` otherwise, i.e. `k ∈ {-M/2+1, …, M/2}³`.
#[derive(Clone)]
pub struct Grid {
    m: usize,
    shared: Arc<GridShared>,
}

struct GridShared {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k_squared: Vec<f64>,
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<GridShared>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GridShared>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Grid {
    pub fn new(modes_per_dim: usize) -> Result<Self> {
        let m = modes_per_dim;
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "modes per dimension must be a power of two >= 4, got {m}"
            )));
        }
        let mut guard = cache().lock().expect("grid cache poisoned");
        let shared = guard
            .entry(m)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                let forward = planner.plan_fft_forward(m);
                let inverse = planner.plan_fft_inverse(m);
                let mut k_squared = Vec::with_capacity(m * m * m);
                for j2 in 0..m {
                    for j1 in 0..m {
                        for j0 in 0..m {
                            let k = [wavenumber(m, j0), wavenumber(m, j1), wavenumber(m, j2)];
                            k_squared.push(k.iter().map(|&c| (c * c) as f64).sum());
                        }
                    }
                }
                Arc::new(GridShared {
                    forward,
                    inverse,
                    k_squared,
                })
            })
            .clone();
        Ok(Grid { m, shared })
    }

    /// Nodes per dimension.
    pub fn modes(&self) -> usize {
        self.m
    }

    /// Total node count `M³`.
    pub fn len(&self) -> usize {
        self.m * self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice spacing `h = 2π / M`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.m as f64
    }

    /// Quadrature weight `h³`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// `(2π)^{-3/2} h³`: maps a raw DFT to the coefficient convention.
    pub fn spectral_scale(&self) -> f64 {
        (2.0 * PI).powf(-1.5) * self.cell_volume()
    }

    pub fn index(&self, j: [usize; 3]) -> usize {
        j[0] + self.m * (j[1] + self.m * j[2])
    }

    pub fn node(&self, idx: usize) -> [usize; 3] {
        let m = self.m;
        [idx % m, (idx / m) % m, idx / (m * m)]
    }

    /// Physical coordinates of node `idx`, in `[0, 2π)³`.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let j = self.node(idx);
        [j[0] as f64 * h, j[1] as f64 * h, j[2] as f64 * h]
    }

    /// Signed lattice offset of node `idx` from the origin, each component in
    /// `{-M/2+1, …, M/2}`. Multiplying by `h` gives the representative of the
    /// node in the fundamental cell around the origin.
    pub fn signed_offset(&self, idx: usize) -> [i64; 3] {
        self.wavevector(idx)
    }

    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        let j = self.node(idx);
        [
            wavenumber(self.m, j[0]),
            wavenumber(self.m, j[1]),
            wavenumber(self.m, j[2]),
        ]
    }

    /// Flat index of wavenumber `k`, reduced modulo `M` in each component.
    pub fn index_of_wavevector(&self, k: [i64; 3]) -> usize {
        let m = self.m as i64;
        let j = k.map(|c| c.rem_euclid(m) as usize);
        self.index(j)
    }

    pub fn k_squared(&self) -> &[f64] {
        &self.shared.k_squared
    }

    /// Largest wavenumber magnitude on the lattice, `√3 · M/2`.
    pub fn max_wavenumber(&self) -> f64 {
        3f64.sqrt() * (self.m / 2) as f64
    }

    /// Two-thirds rule: keep modes with `3|k_d| < M` in every direction.
    pub fn dealias_keep(&self, idx: usize) -> bool {
        let m = self.m as i64;
        self.wavevector(idx).iter().all(|&c| 3 * c.abs() < m)
    }

    /// Index of the node at `-x_j` (mod 2π).
    pub fn reflect(&self, idx: usize) -> usize {
        let m = self.m;
        let j = self.node(idx).map(|c| (m - c) % m);
        self.index(j)
    }

    /// Flat index of `x_a - x_b` (equivalently of `k_a - k_b` for wavevector
    /// indices), reduced modulo `M` componentwise.
    pub fn difference_index(&self, a: usize, b: usize) -> usize {
        let shift = self.m.trailing_zeros();
        let mask = self.m - 1;
        let mut out = 0;
        for d in 0..3 {
            let s = shift * d;
            let ca = (a >> s) & mask;
            let cb = (b >> s) & mask;
            out |= (ca.wrapping_sub(cb) & mask) << s;
        }
        out
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self.m != other.m {
            return Err(Error::GridMismatch {
                left: self.m,
                right: other.m,
            });
        }
        Ok(())
    }

    /// Unnormalized forward DFT, `Σ_j u_j e^{-i k·x_j}`, in place.
    pub(crate) fn dft_forward(&self, data: &mut [Complex64]) {
        transform3(self.m, &*self.shared.forward, data);
    }

    /// Inverse DFT including the `1/M³` factor, in place.
    pub(crate) fn dft_inverse(&self, data: &mut [Complex64]) {
        transform3(self.m, &*self.shared.inverse, data);
        let norm = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= norm);
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("modes", &self.m).finish()
    }
}

fn wavenumber(m: usize, j: usize) -> i64 {
    if j <= m / 2 {
        j as i64
    } else {
        j as i64 - m as i64
    }
}

fn transform3(m: usize, fft: &dyn Fft<f64>, data: &mut [Complex64]) {
    debug_assert_eq!(data.len(), m * m * m);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    // axis 0 is contiguous
    fft.process_with_scratch(data, &mut scratch);

    let mut lines = vec![Complex64::default(); data.len()];
    for axis in 1..3 {
        let stride = if axis == 1 { m } else { m * m };
        let mut line = 0;
        for outer in 0..m {
            for inner in 0..m {
                let base = if axis == 1 {
                    inner + m * m * outer
                } else {
                    inner + m * outer
                };
                for t in 0..m {
                    lines[line * m + t] = data[base + t * stride];
                }
                line += 1;
            }
        }
        fft.process_with_scratch(&mut lines, &mut scratch);
        let mut line = 0;
        for outer in 0..m {
            for inner in 0..m {
                let base = if axis == 1 {
                    inner + m * m * outer
                } else {
                    inner + m * outer
                };
                for t in 0..m {
                    data[base + t * stride] = lines[line * m + t];
                }
                line += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(31).is_err());
        assert!(Grid::new(2).is_err());
        assert!(Grid::new(12).is_err());
        assert!(Grid::new(8).is_ok());
    }

    #[test]
    fn index_and_wavevector_are_bijective() {
        let g = Grid::new(8).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.index(g.node(idx)), idx);
            assert_eq!(g.index_of_wavevector(g.wavevector(idx)), idx);
            let k = g.wavevector(idx);
            assert!(k.iter().all(|&c| (-3..=4).contains(&c)));
        }
    }

    #[test]
    fn difference_index_matches_wavevector_arithmetic() {
        let g = Grid::new(8).unwrap();
        for a in (0..g.len()).step_by(7) {
            for b in (0..g.len()).step_by(5) {
                let ka = g.wavevector(a);
                let kb = g.wavevector(b);
                let expected = g.index_of_wavevector([ka[0] - kb[0], ka[1] - kb[1], ka[2] - kb[2]]);
                assert_eq!(g.difference_index(a, b), expected);
            }
        }
    }

    #[test]
    fn dft_matches_direct_sum() {
        let g = Grid::new(4).unwrap();
        let data: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        g.dft_forward(&mut fast);
        for q in 0..g.len() {
            let k = g.wavevector(q);
            let mut acc = Complex64::default();
            for (j, v) in data.iter().enumerate() {
                let x = g.position(j);
                let phase = -(k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]);
                acc += v * Complex64::from_polar(1.0, phase);
            }
            assert!((acc - fast[q]).norm() < 1e-12);
        }
        g.dft_inverse(&mut fast);
        for (a, b) in fast.iter().zip(&data) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
