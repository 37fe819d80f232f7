//! Mass, energies, the functional-gradient check and the inequality suites.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::potentials::{InteractionSpec, TwoBodyPotential};
use crate::spectral::{kinetic_energy, sobolev_norm, Field};

/// One row of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub mass: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub total_energy: f64,
    pub h1: f64,
    pub hsc: f64,
    pub linf: f64,
}

impl ObservableRecord {
    /// Observables of `u` at time `t`; `hsc` is the `H^s` norm at `s`.
    pub fn measure(t: f64, u: &Field, nonlinearity: &Nonlinearity, s: f64) -> Result<Self> {
        let e = energy(u, nonlinearity)?;
        Ok(ObservableRecord {
            t,
            mass: mass(u),
            kinetic: e.kinetic,
            potential: e.potential,
            total_energy: e.total,
            h1: sobolev_norm(u, 1.0),
            hsc: sobolev_norm(u, s),
            linf: u.linf_norm(),
        })
    }
}

/// `h³ Σ |u|²`.
pub fn mass(u: &Field) -> f64 {
    u.grid().cell_volume() * u.physical().iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// `Σ_k |û(k)|²`; equals [`mass`] by Parseval.
pub fn mass_spectral(u: &Field) -> f64 {
    u.spectral().iter().map(|z| z.norm_sqr()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Energy {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

/// `E(u) = ∫|∇u|² + Σ_i E_pot,i(u)`.
pub fn energy(u: &Field, nonlinearity: &Nonlinearity) -> Result<Energy> {
    let kinetic = kinetic_energy(u);
    let potential = nonlinearity.potential_energy(u)?;
    Ok(Energy {
        kinetic,
        potential,
        total: kinetic + potential,
    })
}

pub fn energy_for_specs(u: &Field, specs: &[InteractionSpec]) -> Result<Energy> {
    energy(u, &Nonlinearity::from_specs(specs)?)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GradientCheck {
    /// `2 Re h³ Σ 𝒩(u) conj(v)`.
    pub analytic: f64,
    /// `[E_pot(u + εv) - E_pot(u - εv)] / 2ε`.
    pub finite_difference: f64,
    pub relative_error: f64,
}

/// First variation of the potential energy along `v` against the
/// nonlinearity. Treating `E_pot` as a function of `(u, ū)`, the derivative
/// along `(v, v̄)` is `2 Re ⟨𝒩(u), v⟩`.
pub fn functional_gradient_check(
    u: &Field,
    nonlinearity: &Nonlinearity,
    v: &Field,
    eps: f64,
) -> Result<GradientCheck> {
    if !(1e-6..=1e-2).contains(&eps) {
        return Err(Error::param(format!("ε = {eps} outside [1e-6, 1e-2]")));
    }
    u.grid().check_same(v.grid())?;
    let n = nonlinearity.multiplier(u)?;
    let h3 = u.grid().cell_volume();
    let analytic = 2.0
        * h3
        * u.physical()
            .iter()
            .zip(v.physical())
            .zip(&n)
            .map(|((a, b), m)| m * (a * b.conj()).re)
            .sum::<f64>();
    let step = Complex64::new(eps, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let plus = nonlinearity.potential_energy(&u.combine(one, v, step)?)?;
    let minus = nonlinearity.potential_energy(&u.combine(one, v, -step)?)?;
    let finite_difference = (plus - minus) / (2.0 * eps);
    let scale = analytic.abs().max(finite_difference.abs());
    let relative_error = if scale == 0.0 {
        0.0
    } else {
        (analytic - finite_difference).abs() / scale
    };
    Ok(GradientCheck {
        analytic,
        finite_difference,
        relative_error,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct YoungReport {
    /// `∫ (|ω| * g)² g`.
    pub quintic_lhs: f64,
    /// `‖ω‖²_{L¹} ‖u‖⁶_{L⁶}`.
    pub quintic_rhs: f64,
    pub quintic_margin: f64,
    /// `∫ (|ω| * g) g`.
    pub cubic_lhs: f64,
    /// `‖ω‖_{L¹} ‖u‖⁴_{L⁴}`.
    pub cubic_rhs: f64,
    pub cubic_margin: f64,
}

fn margin(lhs: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            -f64::INFINITY
        }
    } else {
        (rhs - lhs) / rhs
    }
}

/// Both Young-type bounds with `g = |u|²`, evaluated by lattice quadrature.
pub fn young_inequality_check(u: &Field, omega: &TwoBodyPotential) -> Result<YoungReport> {
    u.grid().check_same(omega.grid())?;
    let abs = omega.abs()?;
    let g = u.density();
    let t = abs.convolve(&g);
    let h3 = u.grid().cell_volume();
    let l1 = omega.l1_norm();
    let quintic_lhs = h3 * t.iter().zip(&g).map(|(a, b)| a * a * b).sum::<f64>();
    let cubic_lhs = h3 * t.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
    let l6 = h3 * g.iter().map(|v| v.powi(3)).sum::<f64>();
    let l4 = h3 * g.iter().map(|v| v * v).sum::<f64>();
    let quintic_rhs = l1 * l1 * l6;
    let cubic_rhs = l1 * l4;
    Ok(YoungReport {
        quintic_lhs,
        quintic_rhs,
        quintic_margin: margin(quintic_lhs, quintic_rhs),
        cubic_lhs,
        cubic_rhs,
        cubic_margin: margin(cubic_lhs, cubic_rhs),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KineticBoundReport {
    /// `‖∇u‖²_{L²}`.
    pub lhs: f64,
    /// `E(u) + C M(u)`.
    pub rhs: f64,
    pub energy: f64,
    pub mass: f64,
    /// `C = 3λ₁² / (16 λ₂)`.
    pub constant_used: f64,
    /// `min_x (λ₂/3) t² + (λ₁/2) t` with `t = ω * g`.
    pub pointwise_min: f64,
    pub holds: bool,
}

/// Completing the square in `(λ₂/3) t² + (λ₁/2) t >= -3λ₁²/(16λ₂)` bounds the
/// kinetic energy of the mixed cubic-quintic Hartree energy
/// `E = ∫|∇u|² + (λ₁/2) ∫(ω*g) g + (λ₂/3) ∫(ω*g)² g`.
pub fn kinetic_bound_check(
    u: &Field,
    lambda1: f64,
    lambda2: f64,
    omega: &TwoBodyPotential,
) -> Result<KineticBoundReport> {
    if lambda2 <= 0.0 || !lambda2.is_finite() {
        return Err(Error::param(format!("λ₂ must be positive, got {lambda2}")));
    }
    u.grid().check_same(omega.grid())?;
    let g = u.density();
    let t = omega.convolve(&g);
    let h3 = u.grid().cell_volume();
    let constant_used = 3.0 * lambda1 * lambda1 / (16.0 * lambda2);
    let density_term = |tv: f64| lambda2 / 3.0 * tv * tv + lambda1 / 2.0 * tv;
    let potential = h3 * t.iter().zip(&g).map(|(&tv, gv)| density_term(tv) * gv).sum::<f64>();
    let pointwise_min = t.iter().map(|&tv| density_term(tv)).fold(f64::INFINITY, f64::min);
    let lhs = kinetic_energy(u);
    let m = mass(u);
    let energy = lhs + potential;
    let rhs = energy + constant_used * m;
    let slack = 1e-12 * (lhs.abs() + potential.abs() + constant_used * m);
    Ok(KineticBoundReport {
        lhs,
        rhs,
        energy,
        mass: m,
        constant_used,
        pointwise_min,
        holds: lhs <= rhs + slack,
    })
}

/// `max_j |(ω * g)(x_j) - g(x_j)|` with `g = |u|²`.
pub fn mollifier_gap_sup(omega: &TwoBodyPotential, u: &Field) -> Result<f64> {
    u.grid().check_same(omega.grid())?;
    let g = u.density();
    let conv = omega.convolve(&g);
    Ok(conv.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{
        box_mollifier, box_mollifier_cell_averaged, discrete_delta, smooth_mollifier, v1_interaction,
        v2_interaction, PolynomialBump, Sign,
    };
    use crate::spectral::{random_field, Grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(m: usize) -> Grid {
        Grid::new(m).unwrap()
    }

    #[test]
    fn mass_examples() {
        let g = grid(8);
        let vol = (2.0 * PI).powi(3);
        let one = Field::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        assert!((mass(&one) - vol).abs() < 1e-12 * vol);
        let wave = Field::from_fn(&g, |x| Complex64::from_polar(1.0, x[0]));
        assert!((mass(&wave) - vol).abs() < 1e-12 * vol);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = random_field(&g, &mut rng, 4, 0.0);
        assert!((mass(&r) - mass_spectral(&r)).abs() < 1e-12 * mass(&r));
    }

    #[test]
    fn energy_examples() {
        let g = grid(16);
        let vol = (2.0 * PI).powi(3);
        let w = box_mollifier(&g, 1).unwrap().unit_mass().unwrap();
        let spec = v1_interaction(&w, 2, Sign::Defocusing, 1.0).unwrap();
        let c = Complex64::new(0.6, 0.2);
        let u = Field::from_fn(&g, |_| c);
        let e = energy_for_specs(&u, std::slice::from_ref(&spec)).unwrap();
        let expected = vol * c.norm_sqr().powi(3) / 3.0;
        assert!((e.total - expected).abs() < 1e-12 * expected);
        assert!(e.kinetic.abs() < 1e-20);

        let wave = Field::from_fn(&g, |x| Complex64::from_polar(1.0, x[0]));
        let free = energy_for_specs(&wave, &[spec.with_coupling(0.0)]).unwrap();
        assert!((free.total - vol).abs() < 1e-12 * vol);
        assert_eq!(free.total, free.kinetic + free.potential);
    }

    #[test]
    fn hartree_energy_approaches_local_energy() {
        let g = grid(64);
        let u = Field::from_fn(&g, |x| {
            Complex64::new(1.0 + 0.5 * x[0].cos(), 0.3 * (x[1] + x[2]).sin())
        });
        let local = InteractionSpec::local(2, Sign::Defocusing, 1.0).unwrap();
        let e_local = energy_for_specs(&u, &[local]).unwrap().potential;
        let dens = u.density();
        let direct = g.cell_volume() * dens.iter().map(|v| v.powi(3)).sum::<f64>() / 3.0;
        assert!((e_local - direct).abs() < 1e-12 * direct);
        let mut previous = f64::INFINITY;
        for n in [2, 4, 8, 16] {
            let w = box_mollifier_cell_averaged(&g, n).unwrap();
            let spec = v1_interaction(&w, 2, Sign::Defocusing, 1.0).unwrap();
            let gap = (energy_for_specs(&u, &[spec]).unwrap().potential - e_local).abs();
            assert!(gap < previous, "n = {n}: {gap} vs {previous}");
            previous = gap;
        }
    }

    fn nonlinearity(specs: &[InteractionSpec]) -> Nonlinearity {
        Nonlinearity::from_specs(specs).unwrap()
    }

    #[test]
    fn gradient_check_passes_for_each_family() {
        let g = grid(8);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = smooth_mollifier(&g, 1, &PolynomialBump).unwrap();
        let specs = [
            v1_interaction(&w, 2, Sign::Defocusing, 1.0).unwrap(),
            v2_interaction(&w, 2, Sign::Focusing, 1.0).unwrap(),
            InteractionSpec::local(2, Sign::Defocusing, 1.0).unwrap(),
        ];
        for spec in specs {
            let u = random_field(&g, &mut rng, 3, 0.0).scale(Complex64::new(0.05, 0.0));
            let v = random_field(&g, &mut rng, 3, 0.0).scale(Complex64::new(0.05, 0.0));
            let nl = nonlinearity(std::slice::from_ref(&spec));
            let check = functional_gradient_check(&u, &nl, &v, 1e-4).unwrap();
            assert!(check.relative_error <= 1e-6, "{}: {check:?}", spec.describe());
            let zero = functional_gradient_check(&u, &nl, &Field::zeros(&g), 1e-4).unwrap();
            assert_eq!(zero.analytic, 0.0);
            assert_eq!(zero.finite_difference, 0.0);
        }
        let nl = nonlinearity(&[InteractionSpec::local(1, Sign::Defocusing, 1.0).unwrap()]);
        let u = Field::zeros(&g);
        assert!(functional_gradient_check(&u, &nl, &u, 0.5).is_err());
    }

    #[test]
    fn young_examples() {
        let g = grid(16);
        let w = box_mollifier(&g, 1).unwrap();
        let c = Field::from_fn(&g, |_| Complex64::new(0.4, 0.3));
        let r = young_inequality_check(&c, &w).unwrap();
        assert!(r.quintic_margin.abs() < 1e-12 && r.cubic_margin.abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_field(&g, &mut rng, 5, 0.0);
        let r = young_inequality_check(&u, &w).unwrap();
        assert!((-1e-12..=1.0).contains(&r.quintic_margin));
        assert!((-1e-12..=1.0).contains(&r.cubic_margin));

        let d = discrete_delta(&g).unwrap();
        let r = young_inequality_check(&u, &d).unwrap();
        let l6 = g.cell_volume() * u.density().iter().map(|v| v.powi(3)).sum::<f64>();
        assert!((r.quintic_lhs - l6).abs() < 1e-12 * l6);
        assert!(r.quintic_margin.abs() < 1e-12);
    }

    #[test]
    fn kinetic_bound_examples() {
        let g = grid(16);
        let w = box_mollifier(&g, 1).unwrap().unit_mass().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_field(&g, &mut rng, 4, 0.0);
        let r = kinetic_bound_check(&u, 0.0, 1.0, &w).unwrap();
        assert_eq!(r.constant_used, 0.0);
        assert!(r.holds && r.lhs <= r.energy);

        let r = kinetic_bound_check(&u, -1.0, 1.0, &w).unwrap();
        assert!((r.constant_used - 3.0 / 16.0).abs() < 1e-16);
        assert!(r.holds);
        assert!(r.pointwise_min >= -3.0 / 16.0);

        let z = kinetic_bound_check(&Field::zeros(&g), -1.0, 1.0, &w).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
        assert!(kinetic_bound_check(&u, 1.0, 0.0, &w).is_err());
        assert!(kinetic_bound_check(&u, 1.0, -1.0, &w).is_err());
    }

    #[test]
    fn mollifier_gap_examples() {
        let g = grid(64);
        let c = Field::from_fn(&g, |_| Complex64::new(0.5, -0.5));
        let w = box_mollifier(&g, 1).unwrap().unit_mass().unwrap();
        assert!(mollifier_gap_sup(&w, &c).unwrap() < 1e-12);
        let d = discrete_delta(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(&g, &mut rng, 3, 0.0);
        assert!(mollifier_gap_sup(&d, &u).unwrap() < 1e-10);

        let smooth = Field::from_fn(&g, |x| Complex64::new(x[0].cos() + 2.0, x[1].sin()));
        let mut previous = f64::INFINITY;
        for n in [2, 4, 8, 16] {
            let w = box_mollifier_cell_averaged(&g, n).unwrap();
            let gap = mollifier_gap_sup(&w, &smooth).unwrap();
            assert!(gap < previous, "n = {n}");
            previous = gap;
        }
    }
}
