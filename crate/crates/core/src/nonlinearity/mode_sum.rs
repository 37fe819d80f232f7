//! Mode-sum evaluation of the full-product multiplier at `p = 2`.
//!
//! Expanding `ω(a - b) = Σ_q c_q e^{iq·(a-b)}` (exact on the lattice over the
//! full wavenumber set) gives
//! `N(x) = h⁶ Σ_{a,b} ω(x-a) ω(x-b) ω(a-b) g(a) g(b) = Σ_q c_q |F_q(x)|²`
//! with `F_q = ω * (g e^{iq·y})`. Since `g` and `ω` are real,
//! `F_{-q} = conj(F_q)`, so each `±q` pair is computed once.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potentials::TwoBodyPotential;
use crate::spectral::Grid;

#[derive(Clone, Debug)]
pub(crate) struct ModeSum {
    cutoff: usize,
    // (wavevector index of q, multiplicity · c_q)
    terms: Vec<(usize, f64)>,
    tail_mass: f64,
}

impl ModeSum {
    pub(crate) fn new(omega: &TwoBodyPotential, cutoff: usize) -> Result<Self> {
        let grid = omega.grid();
        if cutoff > grid.modes() / 2 {
            return Err(Error::param(format!(
                "mode cutoff Q = {cutoff} exceeds the lattice range M/2 = {}",
                grid.modes() / 2
            )));
        }
        let q_max = cutoff as i64;
        let mut terms = Vec::new();
        let mut kept = 0.0;
        let mut total = 0.0;
        for idx in 0..grid.len() {
            let c = omega.plain_coefficient(idx);
            total += c.abs();
            if grid.wavevector(idx).iter().any(|k| k.abs() > q_max) {
                continue;
            }
            kept += c.abs();
            let partner = grid.reflect(idx);
            if partner < idx || c == 0.0 {
                continue;
            }
            let multiplicity = if partner == idx { 1.0 } else { 2.0 };
            terms.push((idx, multiplicity * c));
        }
        let tail_mass = if total > 0.0 {
            (total - kept).max(0.0) / total
        } else {
            0.0
        };
        Ok(ModeSum {
            cutoff,
            terms,
            tail_mass,
        })
    }

    pub(crate) fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// `Σ_{|q|>Q} |c_q| / Σ_q |c_q|`.
    pub(crate) fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Unscaled multiplier `Σ_q c_q |F_q|²`.
    pub(crate) fn multiplier(&self, omega: &TwoBodyPotential, g: &[f64]) -> Vec<f64> {
        let grid = omega.grid();
        let g_hat = forward_real(grid, g);
        let transfer = omega.kernel().transfer();
        let n = grid.len();
        self.terms
            .par_iter()
            .fold(
                || vec![0.0; n],
                |mut acc, &(q, weight)| {
                    let f = shifted_convolution(grid, transfer, &g_hat, q);
                    for (a, z) in acc.iter_mut().zip(&f) {
                        *a += weight * z.norm_sqr();
                    }
                    acc
                },
            )
            .reduce(|| vec![0.0; n], add_vectors)
    }

    /// `N(g + d) - N(g)` as `Σ_q c_q (2 Re(conj(F_q) D_q) + |D_q|²)` with
    /// `D_q` built from `d`, so small increments do not cancel.
    pub(crate) fn multiplier_delta(
        &self,
        omega: &TwoBodyPotential,
        g: &[f64],
        d: &[f64],
    ) -> Vec<f64> {
        let grid = omega.grid();
        let g_hat = forward_real(grid, g);
        let d_hat = forward_real(grid, d);
        let transfer = omega.kernel().transfer();
        let n = grid.len();
        self.terms
            .par_iter()
            .fold(
                || vec![0.0; n],
                |mut acc, &(q, weight)| {
                    let f = shifted_convolution(grid, transfer, &g_hat, q);
                    let df = shifted_convolution(grid, transfer, &d_hat, q);
                    for ((a, z), dz) in acc.iter_mut().zip(&f).zip(&df) {
                        *a += weight * (2.0 * (z.conj() * dz).re + dz.norm_sqr());
                    }
                    acc
                },
            )
            .reduce(|| vec![0.0; n], add_vectors)
    }
}

fn add_vectors(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
    a
}

fn forward_real(grid: &Grid, g: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = g.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.dft_forward(&mut buf);
    buf
}

/// Nodal values of `ω * (g e^{iq·y})`: its DFT at `k` is
/// `h³ DFT(ω)(k) · DFT(g)(k - q)`.
fn shifted_convolution(
    grid: &Grid,
    transfer: &[Complex64],
    g_hat: &[Complex64],
    q: usize,
) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = (0..grid.len())
        .map(|k| transfer[k] * g_hat[grid.difference_index(k, q)])
        .collect();
    grid.dft_inverse(&mut buf);
    buf
}
