//! Real-space evaluation of the full-product multiplier at `p = 2`.
//!
//! Substituting `b = a - r` gives
//! `N(x) = h³ Σ_r ω(r) (K_r * G_r)(x)` with `K_r(y) = ω(y) ω(y + r)` and
//! `G_r(a) = g(a) g(a - r)`, one convolution per lattice point `r` in the
//! support of `ω`. Cheaper than the mode sum whenever `ω` is narrow.

use rayon::prelude::*;

use crate::error::Result;
use crate::potentials::TwoBodyPotential;
use crate::spectral::{Grid, Kernel};

#[derive(Clone, Debug)]
pub(crate) struct OffsetSum {
    // (node index of r, ω(r))
    offsets: Vec<(usize, f64)>,
}

impl OffsetSum {
    pub(crate) fn new(omega: &TwoBodyPotential) -> Self {
        let offsets = omega
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| (i, w))
            .collect();
        OffsetSum { offsets }
    }

    /// Unscaled multiplier.
    pub(crate) fn multiplier(&self, omega: &TwoBodyPotential, g: &[f64]) -> Result<Vec<f64>> {
        self.accumulate(omega, |grid, r, a| g[a] * g[grid.difference_index(a, r)])
    }

    /// `N(g + d) - N(g)`, from `G'_r - G_r = d(a) g(a-r) + g'(a) d(a-r)`.
    pub(crate) fn multiplier_delta(
        &self,
        omega: &TwoBodyPotential,
        g: &[f64],
        d: &[f64],
    ) -> Result<Vec<f64>> {
        self.accumulate(omega, |grid, r, a| {
            let b = grid.difference_index(a, r);
            d[a] * g[b] + (g[a] + d[a]) * d[b]
        })
    }

    fn accumulate(
        &self,
        omega: &TwoBodyPotential,
        pair: impl Fn(&Grid, usize, usize) -> f64 + Sync,
    ) -> Result<Vec<f64>> {
        let grid = omega.grid();
        let w = omega.values();
        let n = grid.len();
        let h3 = grid.cell_volume();
        self.offsets
            .par_iter()
            .try_fold(
                || vec![0.0; n],
                |mut acc, &(r, wr)| {
                    // y + r is the difference y - (-r).
                    let minus_r = grid.reflect(r);
                    let k: Vec<f64> = (0..n)
                        .map(|y| w[y] * w[grid.difference_index(y, minus_r)])
                        .collect();
                    let gr: Vec<f64> = (0..n).map(|a| pair(grid, r, a)).collect();
                    let conv = Kernel::new(grid, &k)?.apply(&gr);
                    acc.iter_mut().zip(&conv).for_each(|(a, c)| *a += h3 * wr * c);
                    Ok(acc)
                },
            )
            .try_reduce(
                || vec![0.0; n],
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                    Ok(a)
                },
            )
    }
}
