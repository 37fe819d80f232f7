//! Smooth dyadic frequency decomposition.
//!
//! The base cutoff is `φ(r) = 1` for `r <= 1`, `φ(r) = 0` for `r >= 2`, and
//! `φ(r) = 1 - S(r - 1)` in between with the smoothstep `S(t) = 3t² - 2t³`,
//! so `φ` is C¹ at both joins. Scales are `N ∈ {1, 2, 4, …}` with
//! `φ_1(k) = φ(|k|)` and `φ_N(k) = φ(|k|/N) - φ(2|k|/N)` for `N >= 2`.
//!
//! The pieces telescope, and since halving and doubling are exact in binary
//! floating point, every lattice point sees at most two nonzero pieces of the
//! form `a` and `1 - a`; their sum is exactly one.

use num_complex::Complex64;

use super::{Field, Grid};
use crate::error::{Error, Result};

pub fn cutoff(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let t = r - 1.0;
        1.0 - t * t * (3.0 - 2.0 * t)
    }
}

/// Which frequency band to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Band {
    /// `P_N`, `N` a power of two (`N = 1` is the low-frequency piece).
    Dyadic(u64),
    /// `P_{<=N} = Σ_{N' <= N} P_{N'}`, with multiplier `φ(|k|/N)`.
    AtMost(u64),
}

impl Band {
    fn validate(self) -> Result<()> {
        let n = match self {
            Band::Dyadic(n) | Band::AtMost(n) => n,
        };
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::param(format!(
                "dyadic scale must be a power of two, got {n}"
            )));
        }
        Ok(())
    }
}

/// Multiplier of `band` at wavenumber magnitude `|k|`.
pub fn multiplier(kabs: f64, band: Band) -> f64 {
    match band {
        Band::Dyadic(1) => cutoff(kabs),
        Band::Dyadic(n) => {
            let n = n as f64;
            cutoff(kabs / n) - cutoff(2.0 * kabs / n)
        }
        Band::AtMost(n) => cutoff(kabs / n as f64),
    }
}

/// Dyadic scales `1, 2, 4, …` up to the first `N` with `φ(|k|/N) = 1` on
/// the whole lattice.
pub fn scales(grid: &Grid) -> Vec<u64> {
    let kmax = grid.max_wavenumber();
    let mut out = vec![1u64];
    let mut n = 1u64;
    while (n as f64) < kmax {
        n *= 2;
        out.push(n);
    }
    out
}

pub fn lp_project(u: &Field, band: Band) -> Result<Field> {
    band.validate()?;
    let ksq = u.grid().k_squared();
    Ok(u.multiply_spectral(|i| Complex64::new(multiplier(ksq[i].sqrt(), band), 0.0)))
}

/// Bounds `(c, C)` with `c ⟨k⟩^{2s} <= Σ_N N^{2s} φ_N(k)² <= C ⟨k⟩^{2s}` over
/// the lattice. They bracket `Σ_N N^{2s}‖P_N u‖² / ‖u‖²_{H^s}` for every field.
pub fn equivalence_bounds(grid: &Grid, s: f64) -> (f64, f64) {
    let scales = scales(grid);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut seen = std::collections::BTreeSet::new();
    for &k2 in grid.k_squared() {
        // |k|² is an integer; each value only needs checking once
        if !seen.insert(k2 as u64) {
            continue;
        }
        let kabs = k2.sqrt();
        let weight: f64 = scales
            .iter()
            .map(|&n| (n as f64).powf(2.0 * s) * multiplier(kabs, Band::Dyadic(n)).powi(2))
            .sum();
        let ratio = weight / (1.0 + k2).powf(s);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    (lo, hi)
}

/// `Σ_N N^{2s} ‖P_N u‖²_{L²}`.
pub fn dyadic_sobolev_sum(u: &Field, s: f64) -> f64 {
    let ksq = u.grid().k_squared();
    scales(u.grid())
        .iter()
        .map(|&n| {
            let band = Band::Dyadic(n);
            let piece: f64 = u
                .spectral()
                .iter()
                .zip(ksq)
                .map(|(z, &k2)| multiplier(k2.sqrt(), band).powi(2) * z.norm_sqr())
                .sum();
            (n as f64).powf(2.0 * s) * piece
        })
        .sum()
}
