use num_complex::Complex64;
use rand::Rng;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Complex field on the discrete torus, holding both the nodal values and the
/// Fourier coefficients
/// `û(k) = (2π)^{-3/2} h³ Σ_j u(x_j) e^{-i k·x_j}`.
///
/// With this normalization `Σ_k |û(k)|² = h³ Σ_j |u(x_j)|²` and the periodic
/// convolution satisfies `(f*g)^ = (2π)^{3/2} f̂ ĝ`.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    physical: Vec<Complex64>,
    spectral: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Field {
            grid: grid.clone(),
            physical: vec![Complex64::default(); grid.len()],
            spectral: vec![Complex64::default(); grid.len()],
        }
    }

    /// Samples `sampler` at every node.
    pub fn from_fn(grid: &Grid, sampler: impl Fn([f64; 3]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| sampler(grid.position(i))).collect();
        Self::from_physical_unchecked(grid, values)
    }

    pub fn from_physical(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param(format!(
                "expected {} nodal values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self::from_physical_unchecked(grid, values))
    }

    pub fn from_spectral(grid: &Grid, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != grid.len() {
            return Err(Error::param(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coefficients.len()
            )));
        }
        Ok(Self::from_spectral_unchecked(grid, coefficients))
    }

    pub(crate) fn from_physical_unchecked(grid: &Grid, values: Vec<Complex64>) -> Self {
        let mut spectral = values.clone();
        grid.dft_forward(&mut spectral);
        let scale = grid.spectral_scale();
        spectral.iter_mut().for_each(|z| *z *= scale);
        Field {
            grid: grid.clone(),
            physical: values,
            spectral,
        }
    }

    pub(crate) fn from_spectral_unchecked(grid: &Grid, coefficients: Vec<Complex64>) -> Self {
        let mut physical = coefficients.clone();
        grid.dft_inverse(&mut physical);
        let scale = 1.0 / grid.spectral_scale();
        physical.iter_mut().for_each(|z| *z *= scale);
        Field {
            grid: grid.clone(),
            physical,
            spectral: coefficients,
        }
    }

    /// Real nodal values promoted to a field.
    pub fn from_real(grid: &Grid, values: &[f64]) -> Result<Self> {
        Self::from_physical(
            grid,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn physical(&self) -> &[Complex64] {
        &self.physical
    }

    pub fn spectral(&self) -> &[Complex64] {
        &self.spectral
    }

    pub fn into_physical(self) -> Vec<Complex64> {
        self.physical
    }

    /// Coefficient at wavenumber `k` (reduced onto the lattice).
    pub fn coefficient(&self, k: [i64; 3]) -> Complex64 {
        self.spectral[self.grid.index_of_wavevector(k)]
    }

    /// Applies a spectral multiplier `m(idx)`.
    pub fn multiply_spectral(&self, multiplier: impl Fn(usize) -> Complex64) -> Field {
        let coeffs = self
            .spectral
            .iter()
            .enumerate()
            .map(|(i, z)| z * multiplier(i))
            .collect();
        Self::from_spectral_unchecked(&self.grid, coeffs)
    }

    /// Pointwise map over nodal values.
    pub fn map_physical(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Field {
        let values = self
            .physical
            .iter()
            .enumerate()
            .map(|(i, &z)| f(i, z))
            .collect();
        Self::from_physical_unchecked(&self.grid, values)
    }

    /// `|u(x_j)|²` at every node.
    pub fn density(&self) -> Vec<f64> {
        self.physical.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn scale(&self, c: Complex64) -> Field {
        Field {
            grid: self.grid.clone(),
            physical: self.physical.iter().map(|z| z * c).collect(),
            spectral: self.spectral.iter().map(|z| z * c).collect(),
        }
    }

    /// `a·self + b·other`, computed in both views without a transform.
    pub fn combine(&self, a: Complex64, other: &Field, b: Complex64) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        let lin = |x: &[Complex64], y: &[Complex64]| -> Vec<Complex64> {
            x.iter().zip(y).map(|(p, q)| a * p + b * q).collect()
        };
        Ok(Field {
            grid: self.grid.clone(),
            physical: lin(&self.physical, &other.physical),
            spectral: lin(&self.spectral, &other.spectral),
        })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// Discrete `L²` norm from nodal values, `(h³ Σ |u|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.physical.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `max_j |u(x_j)|`.
    pub fn linf_norm(&self) -> f64 {
        self.physical.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `u(· - a)` for a lattice shift `a` (in node units).
    pub fn translate(&self, shift: [usize; 3]) -> Field {
        let m = self.grid.modes();
        let values = (0..self.grid.len())
            .map(|idx| {
                let j = self.grid.node(idx);
                let src = [
                    (j[0] + m - shift[0] % m) % m,
                    (j[1] + m - shift[1] % m) % m,
                    (j[2] + m - shift[2] % m) % m,
                ];
                self.physical[self.grid.index(src)]
            })
            .collect();
        Self::from_physical_unchecked(&self.grid, values)
    }

    /// Relative `L²` distance `‖self - other‖ / ‖other‖` (absolute when `other = 0`).
    pub fn relative_l2_distance(&self, other: &Field) -> Result<f64> {
        let diff = self.sub(other)?.l2_norm();
        let scale = other.l2_norm();
        Ok(if scale > 0.0 { diff / scale } else { diff })
    }
}

/// Random band-limited field: independent complex Gaussian coefficients for
/// `|k|_∞ <= kmax`, scaled by `(1 + |k|²)^{-decay/2}`.
pub fn random_field<R: Rng + ?Sized>(grid: &Grid, rng: &mut R, kmax: i64, decay: f64) -> Field {
    let coeffs = (0..grid.len())
        .map(|idx| {
            let k = grid.wavevector(idx);
            if k.iter().all(|c| c.abs() <= kmax) {
                let weight = (1.0 + grid.k_squared()[idx]).powf(-decay / 2.0);
                Complex64::new(standard_normal(rng), standard_normal(rng)) * weight
            } else {
                Complex64::default()
            }
        })
        .collect();
    Field::from_spectral_unchecked(grid, coeffs)
}

/// Box–Muller draw from N(0, 1).
pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
