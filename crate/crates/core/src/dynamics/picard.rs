//! Picard iteration of the Duhamel map
//! `L(u)(t) = e^{itΔ}u₀ - i ∫₀ᵗ e^{i(t-s)Δ} 𝒩(u(s)) ds`
//! on uniform nodes with the composite trapezoid rule.
//!
//! Successive iterates are tracked through their differences
//! `δ^{(m+1)} = L(u^{(m)}) - L(u^{(m-1)})`, whose integrand
//! `𝒩(u^{(m)}) - 𝒩(u^{(m-1)})` is formed without subtracting two nearly
//! equal nonlinearities. For small data the increments shrink by many orders
//! of magnitude per iteration and would otherwise drown in round-off.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::spectral::{free_propagator, sobolev_norm, Field};

#[derive(Clone, Copy, Debug)]
pub struct PicardOptions {
    /// Number of time nodes on `[0, T]`, endpoints included.
    pub n_quad: usize,
    /// Number of iterates after `u^{(0)}`.
    pub iterations: usize,
    /// Regularity of the norm in the contraction factors.
    pub sobolev_index: f64,
    /// Contraction factors above this mark the run as divergent.
    pub divergence_threshold: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            n_quad: 64,
            iterations: 6,
            sobolev_index: 1.0,
            divergence_threshold: 10.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PicardResult {
    pub times: Vec<f64>,
    /// `iterates[m][i] = u^{(m)}(t_i)`.
    pub iterates: Vec<Vec<Field>>,
    /// `sup_i ‖u^{(m+1)}(t_i) - u^{(m)}(t_i)‖_{H^s}` for `m = 0, 1, …`.
    pub increments: Vec<f64>,
    /// `ρ_m = increments[m] / increments[m-1]`, `None` when the denominator is 0.
    pub contraction: Vec<Option<f64>>,
    pub diverged: bool,
}

#[derive(Serialize)]
pub struct PicardSummary {
    pub times: usize,
    pub increments: Vec<f64>,
    pub contraction: Vec<Option<f64>>,
    pub diverged: bool,
}

impl PicardResult {
    pub fn summary(&self) -> PicardSummary {
        PicardSummary {
            times: self.times.len(),
            increments: self.increments.clone(),
            contraction: self.contraction.clone(),
            diverged: self.diverged,
        }
    }
}

pub fn picard_iterate(
    u0: &Field,
    t_final: f64,
    nonlinearity: &Nonlinearity,
    opts: &PicardOptions,
) -> Result<PicardResult> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::param("Picard iteration needs T > 0"));
    }
    if opts.n_quad < 8 {
        return Err(Error::param("Picard iteration needs at least 8 time nodes"));
    }
    if opts.iterations < 2 {
        return Err(Error::param("Picard iteration needs K >= 2"));
    }
    let n = opts.n_quad;
    let tau = t_final / (n - 1) as f64;
    let times: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { t_final } else { i as f64 * tau })
        .collect();

    let zeroth: Vec<Field> = times.iter().map(|&t| free_propagator(u0, t)).collect();
    // 𝒩(u^{(0)}) at every node
    let first_integrand = zeroth
        .iter()
        .map(|u| nonlinearity.apply(u))
        .collect::<Result<Vec<_>>>()?;
    let mut delta = duhamel(&first_integrand, &times);

    let mut iterates = vec![zeroth];
    let mut increments = Vec::new();
    let mut contraction = Vec::new();
    let mut diverged = false;
    let norm = |fields: &[Field]| {
        fields
            .iter()
            .map(|f| sobolev_norm(f, opts.sobolev_index))
            .fold(0.0, f64::max)
    };

    for m in 0..opts.iterations {
        let previous = iterates.last().expect("at least one iterate");
        let next: Vec<Field> = previous
            .iter()
            .zip(&delta)
            .map(|(u, d)| u.add(d))
            .collect::<Result<_>>()?;
        let size = norm(&delta);
        if let Some(&last) = increments.last() {
            let rho = if last > 0.0 { Some(size / last) } else { None };
            if rho.is_some_and(|r: f64| r > opts.divergence_threshold || !r.is_finite()) {
                diverged = true;
            }
            contraction.push(rho);
        }
        increments.push(size);
        if diverged || m + 1 == opts.iterations {
            iterates.push(next);
            break;
        }
        // integrand 𝒩(u^{(m+1)}) - 𝒩(u^{(m)}) with u^{(m+1)} = u^{(m)} + δ
        let integrand = previous
            .iter()
            .zip(&delta)
            .map(|(base, d)| nonlinearity_difference(nonlinearity, base, d))
            .collect::<Result<Vec<_>>>()?;
        delta = duhamel(&integrand, &times);
        iterates.push(next);
    }
    Ok(PicardResult {
        times,
        iterates,
        increments,
        contraction,
        diverged,
    })
}

/// `-i ∫₀^{t_i} e^{i(t_i - s)Δ} f(s) ds` by the cumulative trapezoid rule in
/// the interaction picture.
fn duhamel(integrand: &[Field], times: &[f64]) -> Vec<Field> {
    let pulled: Vec<Field> = integrand
        .iter()
        .zip(times)
        .map(|(f, &t)| free_propagator(f, -t))
        .collect();
    let mut out = Vec::with_capacity(times.len());
    let zero = Field::zeros(integrand[0].grid());
    let mut acc = zero.clone();
    out.push(zero);
    let minus_i = Complex64::new(0.0, -1.0);
    for i in 1..times.len() {
        let w = 0.5 * (times[i] - times[i - 1]);
        let step = pulled[i - 1]
            .combine(Complex64::new(w, 0.0), &pulled[i], Complex64::new(w, 0.0))
            .expect("same grid");
        acc = acc.add(&step).expect("same grid");
        out.push(free_propagator(&acc.scale(minus_i), times[i]));
    }
    out
}

/// `𝒩(u + δ) - 𝒩(u) = [N(g + Δg) - N(g)](u + δ) + N(g) δ` with
/// `Δg = 2 Re(ū δ) + |δ|²`.
fn nonlinearity_difference(nonlinearity: &Nonlinearity, u: &Field, delta: &Field) -> Result<Field> {
    let grid = u.grid();
    let g = u.density();
    let dg: Vec<f64> = u
        .physical()
        .iter()
        .zip(delta.physical())
        .map(|(a, d)| 2.0 * (a.conj() * d).re + d.norm_sqr())
        .collect();
    let dn = nonlinearity.multiplier_delta(grid, &g, &dg)?;
    let n = nonlinearity.multiplier_from_density(grid, &g)?;
    let values = u
        .physical()
        .iter()
        .zip(delta.physical())
        .enumerate()
        .map(|(i, (a, d))| (a + d) * dn[i] + d * n[i])
        .collect();
    let out = Field::from_physical(grid, values)?;
    let dealiased = nonlinearity.evaluators().iter().any(|e| e.dealias());
    Ok(if dealiased {
        crate::spectral::dealias(&out)
    } else {
        out
    })
}
