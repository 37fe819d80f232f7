//! Discrete 3-torus, Fourier analysis, Sobolev norms, Littlewood–Paley
//! projections and the free Schrödinger flow.

mod field;
mod grid;
pub mod littlewood_paley;

use std::f64::consts::PI;

use num_complex::Complex64;

pub use field::{random_field, Field};
pub use grid::Grid;

use crate::error::{Error, Result};

/// Japanese bracket `⟨k⟩² = 1 + |k|²`.
fn bracket_sq(k_squared: f64) -> f64 {
    1.0 + k_squared
}

/// Inhomogeneous Sobolev norm `(Σ_k ⟨k⟩^{2s} |û(k)|²)^{1/2}`.
pub fn sobolev_norm(u: &Field, s: f64) -> f64 {
    let ksq = u.grid().k_squared();
    u.spectral()
        .iter()
        .zip(ksq)
        .map(|(z, &k2)| bracket_sq(k2).powf(s) * z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Homogeneous norm `(Σ_{k≠0} |k|^{2s} |û(k)|²)^{1/2}`.
pub fn homogeneous_norm(u: &Field, s: f64) -> f64 {
    let ksq = u.grid().k_squared();
    u.spectral()
        .iter()
        .zip(ksq)
        .filter(|(_, &k2)| k2 > 0.0)
        .map(|(z, &k2)| k2.powf(s) * z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `∫|∇u|² = Σ_k |k|² |û(k)|²`.
pub fn kinetic_energy(u: &Field) -> f64 {
    u.spectral()
        .iter()
        .zip(u.grid().k_squared())
        .map(|(z, &k2)| k2 * z.norm_sqr())
        .sum()
}

/// Scaling-critical regularity `3/2 - 1/p`.
pub fn critical_exponent(p: u32) -> Result<f64> {
    if p < 1 {
        return Err(Error::param("critical exponent needs p >= 1"));
    }
    Ok(1.5 - 1.0 / p as f64)
}

/// Ratio `‖u_λ‖²_{Ḣ^s} / ‖u‖²_{Ḣ^s}` for `u_λ(x) = λ^{-1/p} u(x/λ)` on ℝ³,
/// with the coefficients of `u` read as samples of its Euclidean transform on
/// a unit-spaced frequency lattice.
///
/// The rescaled transform `λ^{3-1/p} û(λξ)` lives on the lattice of spacing
/// `1/λ`, so both Riemann sums use the same coefficients and differ only in
/// the weights; the ratio is `λ^{3-2s-2/p}` and equals one exactly at the
/// critical exponent. A field with no nonzero modes returns that factor.
pub fn scaling_ratio(u: &Field, p: u32, lambda: u32, s: f64) -> Result<f64> {
    if p < 1 {
        return Err(Error::param("scaling check needs p >= 1"));
    }
    if lambda < 1 {
        return Err(Error::param("scaling factor must be >= 1"));
    }
    let lam = lambda as f64;
    let amplitude_sq = lam.powf(2.0 * (3.0 - 1.0 / p as f64));
    let cell = lam.powi(-3);
    let mut base = 0.0;
    let mut scaled = 0.0;
    for (z, &k2) in u.spectral().iter().zip(u.grid().k_squared()) {
        if k2 == 0.0 {
            continue;
        }
        let kabs = k2.sqrt();
        let w = z.norm_sqr();
        base += kabs.powf(2.0 * s) * w;
        scaled += cell * (kabs / lam).powf(2.0 * s) * amplitude_sq * w;
    }
    if base == 0.0 {
        return Ok(lam.powf(3.0 - 2.0 * s - 2.0 / p as f64));
    }
    Ok(scaled / base)
}

/// [`scaling_ratio`] at `s = 3/2 - 1/p`.
pub fn scaling_exponent_check(u: &Field, p: u32, lambda: u32) -> Result<f64> {
    scaling_ratio(u, p, lambda, critical_exponent(p)?)
}

/// Free Schrödinger flow `e^{itΔ}`: `û(k) ↦ e^{-i|k|²t} û(k)`.
pub fn free_propagator(u: &Field, t: f64) -> Field {
    if t == 0.0 {
        return u.clone();
    }
    let ksq = u.grid().k_squared();
    u.multiply_spectral(|i| Complex64::from_polar(1.0, -ksq[i] * t))
}

/// Periodic convolution `(f*g)(x_j) = h³ Σ_l f(x_j - x_l) g(x_l)`, via
/// `(f*g)^ = (2π)^{3/2} f̂ ĝ`.
pub fn convolve(f: &Field, g: &Field) -> Result<Field> {
    f.grid().check_same(g.grid())?;
    let c = (2.0 * PI).powf(1.5);
    let coeffs = f
        .spectral()
        .iter()
        .zip(g.spectral())
        .map(|(a, b)| a * b * c)
        .collect();
    Ok(Field::from_spectral_unchecked(f.grid(), coeffs))
}

/// Two-thirds-rule truncation.
pub fn dealias(u: &Field) -> Field {
    let g = u.grid().clone();
    u.multiply_spectral(|i| {
        if g.dealias_keep(i) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::default()
        }
    })
}

/// Real-valued convolution kernel with a cached transform, for repeated
/// `K * f` on real nodal data.
#[derive(Clone, Debug)]
pub struct Kernel {
    grid: Grid,
    // h³ · DFT(kernel)
    weights: Vec<Complex64>,
}

impl Kernel {
    pub fn new(grid: &Grid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param("kernel size does not match the grid"));
        }
        let mut weights: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.dft_forward(&mut weights);
        let h3 = grid.cell_volume();
        weights.iter_mut().for_each(|z| *z *= h3);
        Ok(Kernel {
            grid: grid.clone(),
            weights,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `h³ DFT(kernel)`; real for an even kernel.
    pub fn transfer(&self) -> &[Complex64] {
        &self.weights
    }

    /// `(K * f)(x_j)` for real `f`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.grid.dft_forward(&mut buf);
        buf.iter_mut().zip(&self.weights).for_each(|(z, w)| *z *= w);
        self.grid.dft_inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// `(K * f)(x_j)` for complex `f`.
    pub fn apply_complex(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut buf = f.to_vec();
        self.grid.dft_forward(&mut buf);
        buf.iter_mut().zip(&self.weights).for_each(|(z, w)| *z *= w);
        self.grid.dft_inverse(&mut buf);
        buf
    }
}

/// Two-thirds-rule truncation of real nodal data.
pub fn dealias_real(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.dft_forward(&mut buf);
    for (i, z) in buf.iter_mut().enumerate() {
        if !grid.dealias_keep(i) {
            *z = Complex64::default();
        }
    }
    grid.dft_inverse(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plane_wave(g: &Grid) -> Field {
        Field::from_fn(g, |x| Complex64::from_polar(1.0, x[0]))
    }

    #[test]
    fn sobolev_norm_examples() {
        let g = Grid::new(8).unwrap();
        assert_eq!(sobolev_norm(&Field::zeros(&g), 1.0), 0.0);
        let expected = (2.0 * PI).powf(1.5) * 2f64.sqrt();
        assert!((sobolev_norm(&plane_wave(&g), 1.0) - expected).abs() < 1e-10);
    }

    #[test]
    fn parseval_on_random_fields() {
        let g = Grid::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let u = random_field(&g, &mut rng, 8, 0.5);
            let spectral = sobolev_norm(&u, 0.0).powi(2);
            let physical = u.l2_norm().powi(2);
            assert!((spectral - physical).abs() <= 1e-12 * physical);
        }
    }

    #[test]
    fn homogeneous_norm_examples() {
        let g = Grid::new(8).unwrap();
        let c = Field::from_fn(&g, |_| Complex64::new(2.0, 1.0));
        assert!(homogeneous_norm(&c, 1.3) < 1e-12);
        for s in [0.0, 0.5, 2.7] {
            let v = homogeneous_norm(&plane_wave(&g), s);
            assert!((v - (2.0 * PI).powf(1.5)).abs() < 1e-10);
        }
        let a = Field::from_fn(&g, |x| Complex64::from_polar(1.0, x[1] + x[2]));
        let sum = plane_wave(&g).add(&a).unwrap();
        let s = 1.5;
        let rss =
            (homogeneous_norm(&plane_wave(&g), s).powi(2) + homogeneous_norm(&a, s).powi(2)).sqrt();
        assert!((homogeneous_norm(&sum, s) - rss).abs() < 1e-10);
    }

    #[test]
    fn critical_exponent_values() {
        assert_eq!(critical_exponent(2).unwrap(), 1.0);
        assert_eq!(critical_exponent(1).unwrap(), 0.5);
        assert!((critical_exponent(3).unwrap() - 7.0 / 6.0).abs() < 1e-15);
        assert!(critical_exponent(0).is_err());
    }

    #[test]
    fn scaling_ratio_examples() {
        let g = Grid::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_field(&g, &mut rng, 3, 0.0);
        assert!((scaling_ratio(&u, 3, 1, 0.2).unwrap() - 1.0).abs() < 1e-14);
        assert!((scaling_ratio(&u, 2, 2, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((scaling_ratio(&u, 2, 2, 1.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn free_propagator_examples() {
        let g = Grid::new(8).unwrap();
        let u = plane_wave(&g);
        let same = free_propagator(&u, 0.0);
        assert_eq!(same.physical(), u.physical());
        let t = 0.7;
        let evolved = free_propagator(&u, t);
        let expected = u.scale(Complex64::from_polar(1.0, -t));
        assert!(evolved.relative_l2_distance(&expected).unwrap() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = random_field(&g, &mut rng, 4, 0.0);
        let m0 = r.l2_norm();
        let m1 = free_propagator(&r, 3.3).l2_norm();
        assert!((m0 - m1).abs() < 1e-12 * m0);
    }

    #[test]
    fn convolution_examples() {
        let g = Grid::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_field(&g, &mut rng, 3, 0.0);
        let c = Complex64::new(0.5, -0.25);
        let constant = Field::from_fn(&g, |_| c);
        let integral: Complex64 = f.physical().iter().sum::<Complex64>() * g.cell_volume();
        let conv = convolve(&f, &constant).unwrap();
        for z in conv.physical() {
            assert!((z - c * integral).norm() < 1e-10);
        }

        let delta_value = 1.0 / g.cell_volume();
        let delta = Field::from_fn(&g, |x| {
            if x == [0.0, 0.0, 0.0] {
                Complex64::new(delta_value, 0.0)
            } else {
                Complex64::default()
            }
        });
        let id = convolve(&delta, &f).unwrap();
        assert!(id.relative_l2_distance(&f).unwrap() < 1e-12);

        let h = random_field(&g, &mut rng, 3, 0.0);
        let fh = convolve(&f, &h).unwrap();
        let hf = convolve(&h, &f).unwrap();
        assert!(fh.relative_l2_distance(&hf).unwrap() < 1e-12);

        assert!(convolve(&f, &Field::zeros(&Grid::new(4).unwrap())).is_err());
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let g = Grid::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_field(&g, &mut rng, 2, 0.0);
        let h = random_field(&g, &mut rng, 2, 0.0);
        let fast = convolve(&f, &h).unwrap();
        let m = g.modes();
        for j in 0..g.len() {
            let a = g.node(j);
            let mut acc = Complex64::default();
            for l in 0..g.len() {
                let b = g.node(l);
                let d = [
                    (a[0] + m - b[0]) % m,
                    (a[1] + m - b[1]) % m,
                    (a[2] + m - b[2]) % m,
                ];
                acc += f.physical()[g.index(d)] * h.physical()[l];
            }
            acc *= g.cell_volume();
            assert!((acc - fast.physical()[j]).norm() < 1e-10);
        }
    }

    #[test]
    fn kernel_matches_field_convolution() {
        let g = Grid::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k: Vec<f64> = random_field(&g, &mut rng, 2, 0.0)
            .physical()
            .iter()
            .map(|z| z.re)
            .collect();
        let f: Vec<f64> = random_field(&g, &mut rng, 2, 0.0)
            .physical()
            .iter()
            .map(|z| z.re)
            .collect();
        let kernel = Kernel::new(&g, &k).unwrap();
        let fast = kernel.apply(&f);
        let slow = convolve(
            &Field::from_real(&g, &k).unwrap(),
            &Field::from_real(&g, &f).unwrap(),
        )
        .unwrap();
        for (a, b) in fast.iter().zip(slow.physical()) {
            assert!((a - b.re).abs() < 1e-10);
        }
    }

    #[test]
    fn dealias_removes_high_modes() {
        let g = Grid::new(8).unwrap();
        let high = Field::from_fn(&g, |x| Complex64::from_polar(1.0, 3.0 * x[0]));
        assert!(dealias(&high).l2_norm() < 1e-12);
        let low = Field::from_fn(&g, |x| Complex64::from_polar(1.0, 2.0 * x[1]));
        assert!(dealias(&low).relative_l2_distance(&low).unwrap() < 1e-12);
    }
}
