//! Two-body mollifiers and the p-body interaction families built from them.
//!
//! `V1` is the symmetrized pairwise sum
//! `V1(x_0, …, x_p) = (1/(p+1)) Σ_i Π_{j≠i} ω(x_i - x_j)`,
//! `V2` the full product over all pairs `Π_{i<j} ω(x_i - x_j)`, and
//! `LocalDelta` the local `|u|^{2p}` interaction.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{Grid, Kernel};

/// Default budget for brute-force lattice sums, in summand evaluations.
pub const BRUTE_FORCE_BUDGET: u128 = 1 << 27;

/// Default Monte Carlo sample count for `L¹` estimates.
pub const MONTE_CARLO_SAMPLES: usize = 1_000_000;

/// `‖V2‖_{L¹}` as printed in the literature for `ω_n = (n³χ)^{2/3}`.
pub const LITERATURE_V2_BOX_L1: f64 = 1.0 / 512.0;

/// Exact continuum value of `∫∫ ω_n(a) ω_n(b) ω_n(a-b) da db` for
/// `ω_n = n²χ_{[-1/(2n), 1/(2n)]³}`: each axis contributes `3c²` with
/// `c = 1/(2n)`, so the total is `n⁶ (3/(4n²))³ = 27/64`.
pub const CONTINUUM_V2_BOX_L1: f64 = 27.0 / 64.0;

// ∫_{[-1/2,1/2]³} |x|^{-1} dx = 3 ln(2 + √3) - π/2
const UNIT_CUBE_INVERSE_DISTANCE: f64 = 2.380_077_363_979_553_5;

/// Even, real two-body potential sampled on the lattice.
#[derive(Clone, Debug)]
pub struct TwoBodyPotential {
    label: String,
    values: Vec<f64>,
    kernel: Kernel,
    fourier: Vec<f64>,
    l1_norm: f64,
    integral: f64,
}

impl TwoBodyPotential {
    /// Wraps lattice values; rejects data that is not exactly even.
    pub fn from_values(grid: &Grid, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param("potential size does not match the grid"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("potential has non-finite values"));
        }
        for idx in 0..grid.len() {
            if values[idx] != values[grid.reflect(idx)] {
                return Err(Error::param("potential is not even on the lattice"));
            }
        }
        let kernel = Kernel::new(grid, &values)?;
        let scale = grid.spectral_scale() / grid.cell_volume();
        let fourier = kernel.transfer().iter().map(|z| z.re * scale).collect();
        let h3 = grid.cell_volume();
        Ok(TwoBodyPotential {
            label: label.into(),
            l1_norm: h3 * values.iter().map(|v| v.abs()).sum::<f64>(),
            integral: h3 * values.iter().sum::<f64>(),
            values,
            kernel,
            fourier,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn grid(&self) -> &Grid {
        self.kernel.grid()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Coefficients `ω̂(k) = (2π)^{-3/2} h³ Σ_j ω(x_j) e^{-ik·x_j}`.
    pub fn fourier(&self) -> &[f64] {
        &self.fourier
    }

    /// Plain series coefficients `c_q = (2π)^{-3} h³ Σ_j ω(x_j) e^{-iq·x_j}`,
    /// so that `ω(x_j) = Σ_q c_q e^{iq·x_j}` exactly on the lattice.
    pub fn plain_coefficient(&self, idx: usize) -> f64 {
        self.fourier[idx] * (2.0 * PI).powf(-1.5)
    }

    /// `h³ Σ |ω|`.
    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    /// `h³ Σ ω`.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// `(ω * f)(x_j)` for real nodal data.
    pub fn convolve(&self, f: &[f64]) -> Vec<f64> {
        self.kernel.apply(f)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// `|ω|`.
    pub fn abs(&self) -> Result<Self> {
        Self::from_values(
            self.grid(),
            self.values.iter().map(|v| v.abs()).collect(),
            format!("|{}|", self.label),
        )
    }

    /// `ω / ∫ω`, so that the discrete integral is one.
    pub fn unit_mass(&self) -> Result<Self> {
        if self.integral == 0.0 {
            return Err(Error::param(
                "cannot normalize a potential with zero integral",
            ));
        }
        let c = 1.0 / self.integral;
        Self::from_values(
            self.grid(),
            self.values.iter().map(|v| v * c).collect(),
            self.label.clone(),
        )
    }

    /// Number of lattice points where `ω ≠ 0`.
    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }

    /// Largest distance from the origin of a lattice point in the support.
    pub fn support_radius(&self) -> f64 {
        let grid = self.grid();
        let h = grid.spacing();
        (0..grid.len())
            .filter(|&i| self.values[i] != 0.0)
            .map(|i| {
                let o = grid.signed_offset(i);
                h * ((o[0] * o[0] + o[1] * o[1] + o[2] * o[2]) as f64).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Lattice points `j` with `|j| h <= c` on one axis: `{-r, …, r}`.
/// Boundary points belong to the cube.
pub(crate) fn closed_half_width(c: f64, h: f64) -> i64 {
    (c / h * (1.0 + 1e-12)).floor() as i64
}

fn check_box_resolved(grid: &Grid, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("mollifier index n must be positive"));
    }
    let half = 0.5 / n as f64;
    if half < grid.spacing() {
        return Err(Error::Resolution(format!(
            "box of half-width 1/(2n) = {half:.4} is narrower than the grid spacing {:.4} at M = {}",
            grid.spacing(),
            grid.modes()
        )));
    }
    Ok(half)
}

fn indicator_cube(grid: &Grid, half: f64, height: f64) -> Vec<f64> {
    let r = closed_half_width(half, grid.spacing());
    (0..grid.len())
        .map(|i| {
            if grid.signed_offset(i).iter().all(|c| c.abs() <= r) {
                height
            } else {
                0.0
            }
        })
        .collect()
}

/// `ω*_n = n³ χ_{[-1/(2n), 1/(2n)]³}` sampled on the lattice (closed cube).
pub fn box_mollifier(grid: &Grid, n: u32) -> Result<TwoBodyPotential> {
    let half = check_box_resolved(grid, n)?;
    let height = (n as f64).powi(3);
    TwoBodyPotential::from_values(
        grid,
        indicator_cube(grid, half, height),
        format!("box(n={n})"),
    )
}

/// `(ω*_n)^{2/(p+1)}`: height `n^{6/(p+1)}` on the same cube.
pub fn power_mollifier(grid: &Grid, n: u32, p: u32) -> Result<TwoBodyPotential> {
    if p < 1 {
        return Err(Error::param("power mollifier needs p >= 1"));
    }
    let half = check_box_resolved(grid, n)?;
    let height = if p == 1 {
        (n as f64).powi(3)
    } else {
        (n as f64).powf(6.0 / (p + 1) as f64)
    };
    TwoBodyPotential::from_values(
        grid,
        indicator_cube(grid, half, height),
        format!("power-box(n={n},p={p})"),
    )
}

/// Box mollifier averaged over lattice cells: node `j` carries
/// `h⁻³ ∫_{cell_j} n³χ`. Unit mass for every `n`, nonnegative and even;
/// it reduces to the discrete delta once the box fits inside one cell.
pub fn box_mollifier_cell_averaged(grid: &Grid, n: u32) -> Result<TwoBodyPotential> {
    if n == 0 {
        return Err(Error::param("mollifier index n must be positive"));
    }
    let h = grid.spacing();
    let half = 0.5 / n as f64;
    if half >= PI {
        return Err(Error::param("box does not fit in the torus"));
    }
    let axis_weight = |j: i64| -> f64 {
        let lo = (j as f64 - 0.5) * h;
        let hi = (j as f64 + 0.5) * h;
        let overlap = (hi.min(half) - lo.max(-half)).max(0.0);
        overlap / h
    };
    let height = (n as f64).powi(3);
    let values = (0..grid.len())
        .map(|i| {
            let o = grid.signed_offset(i);
            height * axis_weight(o[0]) * axis_weight(o[1]) * axis_weight(o[2])
        })
        .collect();
    TwoBodyPotential::from_values(grid, values, format!("box-cell(n={n})"))
}

/// `h⁻³` at the origin, zero elsewhere.
pub fn discrete_delta(grid: &Grid) -> Result<TwoBodyPotential> {
    let mut values = vec![0.0; grid.len()];
    values[0] = 1.0 / grid.cell_volume();
    TwoBodyPotential::from_values(grid, values, "delta")
}

/// `1/|x|` on the fundamental cell, with the origin replaced by the average
/// of `1/|x|` over its lattice cell.
pub fn coulomb(grid: &Grid) -> Result<TwoBodyPotential> {
    let h = grid.spacing();
    let values = (0..grid.len())
        .map(|i| {
            let o = grid.signed_offset(i);
            let r2 = (o[0] * o[0] + o[1] * o[1] + o[2] * o[2]) as f64;
            if r2 == 0.0 {
                UNIT_CUBE_INVERSE_DISTANCE / h
            } else {
                1.0 / (h * r2.sqrt())
            }
        })
        .collect();
    TwoBodyPotential::from_values(grid, values, "coulomb")
}

/// Even, compactly supported profile `Ψ` with `∫Ψ = 1`.
pub trait Profile: Send + Sync {
    fn support_radius(&self) -> f64;
    fn eval(&self, x: [f64; 3]) -> f64;
    fn name(&self) -> &str;
}

/// `Ψ(x) = (315 / 64π) (1 - |x|²)³` on the unit ball: C², unit mass.
#[derive(Clone, Copy, Debug, Default)]
pub struct PolynomialBump;

impl Profile for PolynomialBump {
    fn support_radius(&self) -> f64 {
        1.0
    }

    fn eval(&self, x: [f64; 3]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        if r2 >= 1.0 {
            0.0
        } else {
            315.0 / (64.0 * PI) * (1.0 - r2).powi(3)
        }
    }

    fn name(&self) -> &str {
        "poly-bump"
    }
}

/// `ω_N(x) = N³ Ψ(N[x])` with `[x]` the representative of `x` in the
/// fundamental cell around the origin.
///
/// The support radius `R/N` must be at least one grid spacing and fit in
/// the cell `[-π, π)³`.
pub fn smooth_mollifier(grid: &Grid, n: u32, profile: &dyn Profile) -> Result<TwoBodyPotential> {
    if n == 0 {
        return Err(Error::param("mollifier index N must be positive"));
    }
    let radius = profile.support_radius() / n as f64;
    let h = grid.spacing();
    if radius < h {
        return Err(Error::Resolution(format!(
            "support radius {radius:.4} is below the grid spacing {h:.4} at M = {}",
            grid.modes()
        )));
    }
    if radius >= PI {
        return Err(Error::param("mollifier support does not fit in the torus"));
    }
    let scale = n as f64;
    let height = scale.powi(3);
    let values = (0..grid.len())
        .map(|i| {
            let o = grid.signed_offset(i);
            // evaluate on |offset| so both lattice representatives of the
            // Nyquist plane see the same value
            let x = o.map(|c| scale * h * c.abs() as f64);
            height * profile.eval(x)
        })
        .collect();
    TwoBodyPotential::from_values(grid, values, format!("{}(N={n})", profile.name()))
}

/// `max_{|k|_∞ <= K} |ω̂(k)/ω̂(0) - 1|`, i.e. the gap to a flat spectrum in the
/// normalization where unit mass means `ω̂(0) = 1`.
pub fn fourier_gap(omega: &TwoBodyPotential, k_max: i64) -> Result<f64> {
    let grid = omega.grid();
    if omega.integral() == 0.0 {
        return Err(Error::param(
            "fourier gap is undefined for a zero-integral potential",
        ));
    }
    if k_max < 0 || k_max > (grid.modes() / 2) as i64 {
        return Err(Error::param(format!(
            "K = {k_max} outside the lattice range 0..={}",
            grid.modes() / 2
        )));
    }
    let zero = omega.fourier()[0];
    Ok((0..grid.len())
        .filter(|&i| grid.wavevector(i).iter().all(|c| c.abs() <= k_max))
        .map(|i| (omega.fourier()[i] / zero - 1.0).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    LocalDelta,
    V1,
    V2,
}

/// Sign `μ` of the nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Defocusing,
    Focusing,
}

impl Sign {
    pub fn from_int(s: i64) -> Result<Self> {
        match s {
            1 => Ok(Sign::Defocusing),
            -1 => Ok(Sign::Focusing),
            _ => Err(Error::param(format!("sign must be +1 or -1, got {s}"))),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Defocusing => 1.0,
            Sign::Focusing => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Defocusing => Sign::Focusing,
            Sign::Focusing => Sign::Defocusing,
        }
    }
}

/// A p-body interaction: family, two-body factor, order, sign and coupling.
/// `prefactor` is the scalar applied by [`normalize_to_unit_l1`]; the
/// nonlinearity is multiplied by `μ λ prefactor`.
#[derive(Clone, Debug)]
pub struct InteractionSpec {
    family: Family,
    omega: Option<Arc<TwoBodyPotential>>,
    p: u32,
    sign: Sign,
    coupling: f64,
    prefactor: f64,
}

impl InteractionSpec {
    pub fn local(p: u32, sign: Sign, coupling: f64) -> Result<Self> {
        if p < 1 {
            return Err(Error::param("interaction order p must be >= 1"));
        }
        Ok(InteractionSpec {
            family: Family::LocalDelta,
            omega: None,
            p,
            sign,
            coupling,
            prefactor: 1.0,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn omega(&self) -> Option<&TwoBodyPotential> {
        self.omega.as_deref()
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// `μ λ prefactor`.
    pub fn strength(&self) -> f64 {
        self.sign.value() * self.coupling * self.prefactor
    }

    pub fn with_coupling(&self, coupling: f64) -> Self {
        InteractionSpec {
            coupling,
            ..self.clone()
        }
    }

    pub fn with_sign(&self, sign: Sign) -> Self {
        InteractionSpec {
            sign,
            ..self.clone()
        }
    }

    pub fn with_prefactor(&self, prefactor: f64) -> Self {
        InteractionSpec {
            prefactor,
            ..self.clone()
        }
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.omega().map(|w| w.grid())
    }

    pub fn describe(&self) -> String {
        let fam = match self.family {
            Family::LocalDelta => "local".to_string(),
            Family::V1 => format!("V1[{}]", self.omega().map(|w| w.label()).unwrap_or("")),
            Family::V2 => format!("V2[{}]", self.omega().map(|w| w.label()).unwrap_or("")),
        };
        format!(
            "{fam} p={} mu={:+} lambda={}",
            self.p,
            self.sign.value(),
            self.coupling
        )
    }
}

pub fn v1_interaction(
    omega: &TwoBodyPotential,
    p: u32,
    sign: Sign,
    coupling: f64,
) -> Result<InteractionSpec> {
    if p < 1 {
        return Err(Error::param("interaction order p must be >= 1"));
    }
    Ok(InteractionSpec {
        family: Family::V1,
        omega: Some(Arc::new(omega.clone())),
        p,
        sign,
        coupling,
        prefactor: 1.0,
    })
}

pub fn v2_interaction(
    omega: &TwoBodyPotential,
    p: u32,
    sign: Sign,
    coupling: f64,
) -> Result<InteractionSpec> {
    if p < 2 {
        return Err(Error::param(
            "the full-product family needs p >= 2 (p = 1 is the two-body case)",
        ));
    }
    Ok(InteractionSpec {
        family: Family::V2,
        omega: Some(Arc::new(omega.clone())),
        p,
        sign,
        coupling,
        prefactor: 1.0,
    })
}

/// Evaluates the p-body potential at lattice positions `x_0, …, x_p`
/// (flat node indices). Shared with the brute-force nonlinearity.
pub(crate) fn evaluate_at_positions(
    family: Family,
    omega: &TwoBodyPotential,
    positions: &[usize],
) -> f64 {
    let grid = omega.grid();
    let w = omega.values();
    let pair = |a: usize, b: usize| w[grid.difference_index(a, b)];
    let n = positions.len();
    match family {
        Family::LocalDelta => unreachable!("local interactions have no potential to sample"),
        Family::V1 => {
            let mut total = 0.0;
            for i in 0..n {
                let mut prod = 1.0;
                for j in 0..n {
                    if j != i {
                        prod *= pair(positions[i], positions[j]);
                        if prod == 0.0 {
                            break;
                        }
                    }
                }
                total += prod;
            }
            total / n as f64
        }
        Family::V2 => {
            let mut prod = 1.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    prod *= pair(positions[i], positions[j]);
                    if prod == 0.0 {
                        return 0.0;
                    }
                }
            }
            prod
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum L1Method {
    /// `(∫|ω|)^p`, exact for `V1` with `ω >= 0`.
    StarFactorization,
    /// `h³ Σ |ω| (|ω|*|ω|)`, exact for `V2` with `p = 2`.
    Convolution,
    BruteForce,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct L1Estimate {
    pub value: f64,
    pub std_error: Option<f64>,
    pub method: L1Method,
}

#[derive(Clone, Copy, Debug)]
pub struct L1Options {
    pub samples: usize,
    pub seed: u64,
    pub brute_force_budget: u128,
}

impl Default for L1Options {
    fn default() -> Self {
        L1Options {
            samples: MONTE_CARLO_SAMPLES,
            seed: 0,
            brute_force_budget: BRUTE_FORCE_BUDGET,
        }
    }
}

/// `‖V‖_{L¹(X^p)}` of the interaction, including its normalization prefactor.
pub fn l1_norm(spec: &InteractionSpec) -> Result<L1Estimate> {
    l1_norm_with(spec, &L1Options::default())
}

pub fn l1_norm_with(spec: &InteractionSpec, opts: &L1Options) -> Result<L1Estimate> {
    let omega = match (spec.family, spec.omega()) {
        (Family::LocalDelta, _) | (_, None) => {
            return Err(Error::param(
                "the L¹ norm is defined for V1/V2 interactions only",
            ))
        }
        (_, Some(w)) => w,
    };
    let grid = omega.grid();
    let p = spec.p;
    let h3 = grid.cell_volume();
    let raw = match spec.family {
        Family::V1 if omega.is_nonnegative() => L1Estimate {
            value: omega.integral().powi(p as i32),
            std_error: None,
            method: L1Method::StarFactorization,
        },
        Family::V2 if p == 2 => {
            let abs = omega.abs()?;
            let conv = abs.convolve(abs.values());
            let value = h3
                * abs
                    .values()
                    .iter()
                    .zip(&conv)
                    .map(|(a, c)| a * c)
                    .sum::<f64>();
            L1Estimate {
                value,
                std_error: None,
                method: L1Method::Convolution,
            }
        }
        family => {
            let points = (grid.len() as u128).pow(p);
            if points <= opts.brute_force_budget {
                L1Estimate {
                    value: brute_force_l1(family, omega, p),
                    std_error: None,
                    method: L1Method::BruteForce,
                }
            } else {
                monte_carlo_l1(family, omega, p, opts)
            }
        }
    };
    Ok(L1Estimate {
        value: raw.value * spec.prefactor.abs(),
        std_error: raw.std_error.map(|e| e * spec.prefactor.abs()),
        method: raw.method,
    })
}

fn brute_force_l1(family: Family, omega: &TwoBodyPotential, p: u32) -> f64 {
    let grid = omega.grid();
    let n = grid.len();
    let p = p as usize;
    let mut positions = vec![0usize; p + 1];
    let mut total = 0.0;
    // odometer over x_1..x_p with x_0 pinned at the origin
    loop {
        total += evaluate_at_positions(family, omega, &positions).abs();
        let mut d = 1;
        loop {
            if d > p {
                return total * grid.cell_volume().powi(p as i32);
            }
            positions[d] += 1;
            if positions[d] < n {
                break;
            }
            positions[d] = 0;
            d += 1;
        }
    }
}

fn monte_carlo_l1(
    family: Family,
    omega: &TwoBodyPotential,
    p: u32,
    opts: &L1Options,
) -> L1Estimate {
    let grid = omega.grid();
    let n = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut positions = vec![0usize; p as usize + 1];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let samples = opts.samples.max(2);
    for _ in 0..samples {
        for slot in positions.iter_mut().skip(1) {
            *slot = rng.random_range(0..n);
        }
        let v = evaluate_at_positions(family, omega, &positions).abs();
        sum += v;
        sum_sq += v * v;
    }
    let count = samples as f64;
    let mean = sum / count;
    let var = ((sum_sq / count - mean * mean) * count / (count - 1.0)).max(0.0);
    let volume = (2.0 * PI).powi(3 * p as i32);
    L1Estimate {
        value: volume * mean,
        std_error: Some(volume * (var / count).sqrt()),
        method: L1Method::MonteCarlo,
    }
}

/// Rescales the prefactor so the measured `L¹` norm becomes one.
pub fn normalize_to_unit_l1(spec: &InteractionSpec) -> Result<InteractionSpec> {
    normalize_to_unit_l1_with(spec, &L1Options::default())
}

pub fn normalize_to_unit_l1_with(
    spec: &InteractionSpec,
    opts: &L1Options,
) -> Result<InteractionSpec> {
    let measured = l1_norm_with(spec, opts)?.value;
    if measured == 0.0 || !measured.is_finite() {
        return Err(Error::param(
            "cannot normalize an interaction with zero L¹ norm",
        ));
    }
    Ok(spec.with_prefactor(spec.prefactor / measured))
}

/// Discrete `‖V2‖_{L¹}` for `ω = (n³χ)^{2/3}` computed by counting lattice
/// pairs axis by axis: `#{(a, b) ∈ [-r, r]² : |a - b| <= r} = 3r² + 3r + 1`.
pub fn power_box_v2_l1_lattice(grid: &Grid, n: u32) -> Result<f64> {
    check_box_resolved(grid, n)?;
    let h = grid.spacing();
    let r = closed_half_width(0.5 / n as f64, h) as f64;
    let per_axis = (3.0 * r * r + 3.0 * r + 1.0) * h * h;
    Ok((n as f64).powi(6) * per_axis.powi(3))
}
