//! Hartree, local and mixed nonlinearities `𝒩(u) = N[|u|²] u`.
//!
//! Every evaluator produces the real multiplier `N` from the density
//! `g = |u|²`; the nonlinearity is `N u`. The potential energy is normalized
//! so that its derivative with respect to `g` is exactly `N` on the lattice.

mod mode_sum;
mod offset_sum;
mod oracle;

use crate::error::{Error, Result};
use crate::potentials::{Family, InteractionSpec, TwoBodyPotential, BRUTE_FORCE_BUDGET};
use crate::spectral::{dealias, dealias_real, Field, Grid};

use mode_sum::ModeSum;
use offset_sum::OffsetSum;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    /// Direct nested quadrature, `O(M^{3(p+1)})`.
    Oracle,
    /// `V1` via `O(p)` convolutions.
    FactorizedV1,
    /// `V2` at `p = 2` via the mode sum over `|q|_∞ <= cutoff`.
    ModeSumV2 { cutoff: usize },
    /// `V2` at `p = 2` via one convolution per support point of `ω`.
    OffsetSumV2,
    /// Pointwise `g^p`.
    Local,
}

#[derive(Clone, Debug)]
pub struct NonlinearityEvaluator {
    spec: InteractionSpec,
    algorithm: Algorithm,
    dealias: bool,
    oracle_budget: u128,
    mode_sum: Option<ModeSum>,
    offset_sum: Option<OffsetSum>,
}

impl NonlinearityEvaluator {
    pub fn new(spec: &InteractionSpec, algorithm: Algorithm) -> Result<Self> {
        let mut mode_sum = None;
        let mut offset_sum = None;
        match (spec.family(), algorithm) {
            (Family::LocalDelta, Algorithm::Local) => {}
            (Family::V1, Algorithm::FactorizedV1) => {}
            (Family::V1 | Family::V2, Algorithm::Oracle) => {}
            (Family::V2, Algorithm::ModeSumV2 { cutoff }) => {
                if spec.p() != 2 {
                    return Err(Error::Unsupported(
                        "the mode-sum evaluator covers the full-product family at p = 2 only"
                            .into(),
                    ));
                }
                mode_sum = Some(ModeSum::new(spec.omega().expect("V2 carries ω"), cutoff)?);
            }
            (Family::V2, Algorithm::OffsetSumV2) => {
                if spec.p() != 2 {
                    return Err(Error::Unsupported(
                        "the offset-sum evaluator covers the full-product family at p = 2 only"
                            .into(),
                    ));
                }
                offset_sum = Some(OffsetSum::new(spec.omega().expect("V2 carries ω")));
            }
            (family, algorithm) => {
                return Err(Error::Unsupported(format!(
                    "{algorithm:?} cannot evaluate a {family:?} interaction"
                )))
            }
        }
        Ok(NonlinearityEvaluator {
            spec: spec.clone(),
            algorithm,
            dealias: false,
            oracle_budget: BRUTE_FORCE_BUDGET,
            mode_sum,
            offset_sum,
        })
    }

    /// Fastest available algorithm for the interaction. At `V2`, `p = 2` the two
    /// exact routes are compared by FFT count: three per support point of
    /// `ω` against one per `±q` pair of the full-lattice (`Q = M/2`) mode sum.
    pub fn for_spec(spec: &InteractionSpec) -> Result<Self> {
        let algorithm = match spec.family() {
            Family::LocalDelta => Algorithm::Local,
            Family::V1 => Algorithm::FactorizedV1,
            Family::V2 if spec.p() == 2 => {
                let omega = spec.omega().expect("V2 carries ω");
                if 3 * omega.support_size() < omega.grid().len() / 2 {
                    Algorithm::OffsetSumV2
                } else {
                    Algorithm::ModeSumV2 {
                        cutoff: omega.grid().modes() / 2,
                    }
                }
            }
            Family::V2 => Algorithm::Oracle,
        };
        Self::new(spec, algorithm)
    }

    pub fn with_dealias(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn with_oracle_budget(mut self, budget: u128) -> Self {
        self.oracle_budget = budget;
        self
    }

    pub fn spec(&self) -> &InteractionSpec {
        &self.spec
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }

    /// Truncation diagnostic of the mode sum; `None` for other algorithms.
    pub fn tail_mass(&self) -> Option<f64> {
        self.mode_sum.as_ref().map(|m| m.tail_mass())
    }

    pub fn mode_cutoff(&self) -> Option<usize> {
        self.mode_sum.as_ref().map(|m| m.cutoff())
    }

    fn omega(&self) -> &TwoBodyPotential {
        self.spec.omega().expect("nonlocal families carry ω")
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        match self.spec.grid() {
            Some(own) => own.check_same(grid),
            None => Ok(()),
        }
    }

    /// Multiplier without the `μ λ prefactor` factor.
    fn raw_multiplier(&self, g: &[f64]) -> Result<Vec<f64>> {
        let p = self.spec.p();
        match self.algorithm {
            Algorithm::Local => Ok(g.iter().map(|v| v.powi(p as i32)).collect()),
            Algorithm::FactorizedV1 => {
                let omega = self.omega();
                let phi = omega.convolve(g);
                if p == 1 {
                    return Ok(phi);
                }
                let inner: Vec<f64> = phi
                    .iter()
                    .zip(g)
                    .map(|(f, gv)| f.powi(p as i32 - 1) * gv)
                    .collect();
                let second = omega.convolve(&inner);
                let pf = p as f64;
                Ok(phi
                    .iter()
                    .zip(&second)
                    .map(|(f, s)| (f.powi(p as i32) + pf * s) / (pf + 1.0))
                    .collect())
            }
            Algorithm::ModeSumV2 { .. } => {
                let ms = self.mode_sum.as_ref().expect("mode sum prepared");
                Ok(ms.multiplier(self.omega(), g))
            }
            Algorithm::OffsetSumV2 => {
                let os = self.offset_sum.as_ref().expect("offset sum prepared");
                os.multiplier(self.omega(), g)
            }
            Algorithm::Oracle => {
                let omega = self.omega();
                let points = (omega.grid().len() as u128).pow(p + 1);
                if points > self.oracle_budget {
                    return Err(Error::OracleTooLarge {
                        points,
                        budget: self.oracle_budget,
                    });
                }
                Ok(oracle::multiplier(self.spec.family(), omega, p, g))
            }
        }
    }

    /// Real multiplier `N` (including `μ λ prefactor`) for density `g`.
    pub fn multiplier_from_density(&self, grid: &Grid, g: &[f64]) -> Result<Vec<f64>> {
        self.check_grid(grid)?;
        let strength = self.spec.strength();
        if strength == 0.0 {
            return Ok(vec![0.0; grid.len()]);
        }
        let mut n = self.raw_multiplier(g)?;
        n.iter_mut().for_each(|v| *v *= strength);
        if self.dealias {
            n = dealias_real(grid, &n);
        }
        Ok(n)
    }

    pub fn multiplier(&self, u: &Field) -> Result<Vec<f64>> {
        self.multiplier_from_density(u.grid(), &u.density())
    }

    /// `N(g + d) - N(g)`, evaluated without subtracting two large numbers
    /// where the algorithm allows it.
    pub fn multiplier_delta(&self, grid: &Grid, g: &[f64], d: &[f64]) -> Result<Vec<f64>> {
        self.check_grid(grid)?;
        let strength = self.spec.strength();
        if strength == 0.0 {
            return Ok(vec![0.0; grid.len()]);
        }
        let p = self.spec.p() as i32;
        let mut out = match self.algorithm {
            Algorithm::Local => g
                .iter()
                .zip(d)
                .map(|(&a, &da)| power_difference(a + da, a, da, p))
                .collect(),
            Algorithm::FactorizedV1 => {
                let omega = self.omega();
                let phi = omega.convolve(g);
                let dphi = omega.convolve(d);
                if p == 1 {
                    dphi
                } else {
                    // Φ'^{p-1} g' - Φ^{p-1} g = (Φ'^{p-1} - Φ^{p-1}) g' + Φ^{p-1} d
                    let inner: Vec<f64> = (0..g.len())
                        .map(|i| {
                            let new_phi = phi[i] + dphi[i];
                            power_difference(new_phi, phi[i], dphi[i], p - 1) * (g[i] + d[i])
                                + phi[i].powi(p - 1) * d[i]
                        })
                        .collect();
                    let second = omega.convolve(&inner);
                    let pf = p as f64;
                    (0..g.len())
                        .map(|i| {
                            let first = power_difference(phi[i] + dphi[i], phi[i], dphi[i], p);
                            (first + pf * second[i]) / (pf + 1.0)
                        })
                        .collect()
                }
            }
            Algorithm::ModeSumV2 { .. } => {
                let ms = self.mode_sum.as_ref().expect("mode sum prepared");
                ms.multiplier_delta(self.omega(), g, d)
            }
            Algorithm::OffsetSumV2 => {
                let os = self.offset_sum.as_ref().expect("offset sum prepared");
                os.multiplier_delta(self.omega(), g, d)?
            }
            Algorithm::Oracle => {
                let shifted: Vec<f64> = g.iter().zip(d).map(|(a, b)| a + b).collect();
                let hi = self.raw_multiplier(&shifted)?;
                let lo = self.raw_multiplier(g)?;
                hi.iter().zip(&lo).map(|(a, b)| a - b).collect::<Vec<f64>>()
            }
        };
        out.iter_mut().for_each(|v| *v *= strength);
        if self.dealias {
            out = dealias_real(grid, &out);
        }
        Ok(out)
    }

    /// `𝒩(u) = N u`, truncated by the two-thirds rule when dealiasing is on.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        let n = self.multiplier(u)?;
        let out = u.map_physical(|i, z| z * n[i]);
        Ok(if self.dealias { dealias(&out) } else { out })
    }

    /// Potential energy with `d E / d g = N` (no dealiasing).
    pub fn potential_energy(&self, u: &Field) -> Result<f64> {
        let grid = u.grid();
        self.check_grid(grid)?;
        let strength = self.spec.strength();
        if strength == 0.0 {
            return Ok(0.0);
        }
        let g = u.density();
        let p = self.spec.p();
        let h3 = grid.cell_volume();
        let scale = strength / (p + 1) as f64;
        let sum: f64 = match self.algorithm {
            Algorithm::Local => g.iter().map(|v| v.powi(p as i32 + 1)).sum(),
            Algorithm::FactorizedV1 => {
                let phi = self.omega().convolve(&g);
                phi.iter()
                    .zip(&g)
                    .map(|(f, gv)| f.powi(p as i32) * gv)
                    .sum()
            }
            _ => {
                let n = self.raw_multiplier(&g)?;
                n.iter().zip(&g).map(|(a, b)| a * b).sum()
            }
        };
        Ok(scale * h3 * sum)
    }
}

/// `a^k - b^k = (a - b) Σ_{i<k} a^i b^{k-1-i}` with `a - b = d` supplied.
fn power_difference(a: f64, b: f64, d: f64, k: i32) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..k {
        s += a.powi(i) * b.powi(k - 1 - i);
    }
    d * s
}

/// Sum of several interactions, `Σ_i λ_i 𝒩_{p_i}`.
#[derive(Clone, Debug)]
pub struct Nonlinearity {
    evaluators: Vec<NonlinearityEvaluator>,
}

impl Nonlinearity {
    pub fn new(evaluators: Vec<NonlinearityEvaluator>) -> Self {
        Nonlinearity { evaluators }
    }

    /// Default evaluators for each interaction.
    pub fn from_specs(specs: &[InteractionSpec]) -> Result<Self> {
        Ok(Nonlinearity {
            evaluators: specs
                .iter()
                .map(NonlinearityEvaluator::for_spec)
                .collect::<Result<_>>()?,
        })
    }

    pub fn with_dealias(self, dealias: bool) -> Self {
        Nonlinearity {
            evaluators: self
                .evaluators
                .into_iter()
                .map(|e| e.with_dealias(dealias))
                .collect(),
        }
    }

    pub fn evaluators(&self) -> &[NonlinearityEvaluator] {
        &self.evaluators
    }

    pub fn specs(&self) -> Vec<InteractionSpec> {
        self.evaluators.iter().map(|e| e.spec().clone()).collect()
    }

    /// True when every interaction has zero strength.
    pub fn is_trivial(&self) -> bool {
        self.evaluators.iter().all(|e| e.spec().strength() == 0.0)
    }

    pub fn multiplier_from_density(&self, grid: &Grid, g: &[f64]) -> Result<Vec<f64>> {
        let mut total = vec![0.0; grid.len()];
        for e in &self.evaluators {
            let n = e.multiplier_from_density(grid, g)?;
            total.iter_mut().zip(&n).for_each(|(t, v)| *t += v);
        }
        Ok(total)
    }

    pub fn multiplier(&self, u: &Field) -> Result<Vec<f64>> {
        self.multiplier_from_density(u.grid(), &u.density())
    }

    pub fn multiplier_delta(&self, grid: &Grid, g: &[f64], d: &[f64]) -> Result<Vec<f64>> {
        let mut total = vec![0.0; grid.len()];
        for e in &self.evaluators {
            let n = e.multiplier_delta(grid, g, d)?;
            total.iter_mut().zip(&n).for_each(|(t, v)| *t += v);
        }
        Ok(total)
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        let n = self.multiplier(u)?;
        let out = u.map_physical(|i, z| z * n[i]);
        let dealiased = self.evaluators.iter().any(|e| e.dealias());
        Ok(if dealiased { dealias(&out) } else { out })
    }

    pub fn potential_energy(&self, u: &Field) -> Result<f64> {
        self.evaluators.iter().map(|e| e.potential_energy(u)).sum()
    }
}

/// `μ |u|^{2p} u`.
pub fn local_nls(u: &Field, p: u32, sign: crate::potentials::Sign) -> Result<Field> {
    if p < 1 {
        return Err(Error::param("local nonlinearity needs p >= 1"));
    }
    let mu = sign.value();
    Ok(u.map_physical(|_, z| z * (mu * z.norm_sqr().powi(p as i32))))
}

/// Brute-force reference evaluation of `𝒩(u)`.
pub fn hartree_oracle(u: &Field, spec: &InteractionSpec) -> Result<Field> {
    NonlinearityEvaluator::new(spec, Algorithm::Oracle)?.apply(u)
}

/// Factorized evaluation for the pairwise-sum family.
pub fn hartree_v1(u: &Field, spec: &InteractionSpec) -> Result<Field> {
    NonlinearityEvaluator::new(spec, Algorithm::FactorizedV1)?.apply(u)
}

/// Mode-sum evaluation for the full-product family at `p = 2`.
pub fn hartree_v2_p2(u: &Field, spec: &InteractionSpec, cutoff: usize) -> Result<Field> {
    NonlinearityEvaluator::new(spec, Algorithm::ModeSumV2 { cutoff })?.apply(u)
}

/// `Σ_i 𝒩_i(u)` with default evaluators.
pub fn mixed_nonlinearity(u: &Field, specs: &[InteractionSpec]) -> Result<Field> {
    Nonlinearity::from_specs(specs)?.apply(u)
}
