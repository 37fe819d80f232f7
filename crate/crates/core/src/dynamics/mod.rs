//! Time stepping for `i ∂_t u + Δu = 𝒩(u)` and the Duhamel/Picard iteration.

mod picard;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use picard::{picard_iterate, PicardOptions, PicardResult};

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::observables::ObservableRecord;
use crate::spectral::{free_propagator, Field};

/// Growth factor of the `L²` norm within one step that trips the guard.
pub const BLOW_UP_GROWTH: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Strang,
    Rk4,
}

/// `e^{i(dt/2)Δ} ∘ e^{-i dt N} ∘ e^{i(dt/2)Δ}`.
///
/// The nonlinear substep freezes `N` at substep entry. Since `N` is real and
/// depends on `u` only through `|u|²`, which that substep leaves unchanged
/// pointwise, the frozen flow is the exact flow of the substep.
pub fn strang_step(u: &Field, dt: f64, nonlinearity: &Nonlinearity) -> Result<Field> {
    if nonlinearity.is_trivial() {
        return Ok(free_propagator(u, dt));
    }
    let half = free_propagator(u, 0.5 * dt);
    let kicked = nonlinear_substep(&half, dt, nonlinearity)?;
    Ok(free_propagator(&kicked, 0.5 * dt))
}

/// Exact flow of `i ∂_t u = N[|u|²] u` over `dt`: `u ↦ e^{-i dt N} u`.
pub fn nonlinear_substep(u: &Field, dt: f64, nonlinearity: &Nonlinearity) -> Result<Field> {
    let n = nonlinearity.multiplier(u)?;
    Ok(u.map_physical(|i, z| z * Complex64::from_polar(1.0, -dt * n[i])))
}

/// Classical four-stage Runge–Kutta in the interaction picture
/// (integrating factor `e^{itΔ}` for the linear part).
pub fn rk4_step(u: &Field, dt: f64, nonlinearity: &Nonlinearity) -> Result<Field> {
    let rhs = |v: &Field| -> Result<Field> {
        Ok(nonlinearity.apply(v)?.scale(Complex64::new(0.0, -1.0)))
    };
    let c = |x: f64| Complex64::new(x, 0.0);
    let one = c(1.0);
    let half = 0.5 * dt;
    let k1 = rhs(u)?;
    let u_half = free_propagator(u, half);
    let k1_half = free_propagator(&k1, half);
    let k2 = rhs(&u_half.combine(one, &k1_half, c(half))?)?;
    let k3 = rhs(&u_half.combine(one, &k2, c(half))?)?;
    let k3_half = free_propagator(&k3, half);
    let u_full = free_propagator(u, dt);
    let k4 = rhs(&u_full.combine(one, &k3_half, c(dt))?)?;
    let middle = free_propagator(&k2.add(&k3)?, half);
    let k1_full = free_propagator(&k1, dt);
    let incr = k1_full.combine(one, &middle, c(2.0))?.add(&k4)?;
    u_full.combine(one, &incr, c(dt / 6.0))
}

/// One step with the blow-up guard applied at time `t_end`.
pub fn step(u: &Field, dt: f64, nonlinearity: &Nonlinearity, integrator: Integrator, t_end: f64) -> Result<Field> {
    let next = match integrator {
        Integrator::Strang => strang_step(u, dt, nonlinearity)?,
        Integrator::Rk4 => rk4_step(u, dt, nonlinearity)?,
    };
    guard(u, &next, t_end)?;
    Ok(next)
}

fn guard(before: &Field, after: &Field, t: f64) -> Result<()> {
    let a = before.l2_norm();
    let b = after.l2_norm();
    if !b.is_finite() {
        return Err(Error::BlowUp {
            t,
            reason: "non-finite field".into(),
        });
    }
    if b > BLOW_UP_GROWTH * a && b > 0.0 {
        return Err(Error::BlowUp {
            t,
            reason: format!("L² norm grew from {a:.6e} to {b:.6e} in one step"),
        });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct EvolutionProblem {
    pub initial: Field,
    pub nonlinearity: Nonlinearity,
    pub t_final: f64,
    pub dt: f64,
    pub integrator: Integrator,
    /// Record observables every this many steps (and at the final time).
    pub snapshot_stride: usize,
    /// Keep the field at every recorded time.
    pub keep_snapshots: bool,
    /// Regularity of the `hsc` column.
    pub sobolev_index: f64,
}

impl EvolutionProblem {
    pub fn new(initial: Field, nonlinearity: Nonlinearity, t_final: f64, dt: f64) -> Self {
        EvolutionProblem {
            initial,
            nonlinearity,
            t_final,
            dt,
            integrator: Integrator::Strang,
            snapshot_stride: 1,
            keep_snapshots: false,
            sobolev_index: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::param("final time must be finite and >= 0"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("dt must be positive"));
        }
        if self.t_final > 0.0 && self.dt > self.t_final {
            return Err(Error::param("dt must not exceed the final time"));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::param("snapshot stride must be >= 1"));
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened to land on `t_final`.
    pub fn step_count(&self) -> usize {
        if self.t_final == 0.0 {
            return 0;
        }
        (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    /// End time of step `k` (1-based).
    pub fn time_of_step(&self, k: usize) -> f64 {
        if k >= self.step_count() {
            self.t_final
        } else {
            k as f64 * self.dt
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub records: Vec<ObservableRecord>,
    pub snapshots: Vec<Field>,
}

impl Trajectory {
    pub fn final_record(&self) -> Option<&ObservableRecord> {
        self.records.last()
    }
}

/// Steps from 0 to `t_final`, calling `visit(step, t, u)` at step 0 and after
/// every step. Returns the final field.
pub fn integrate(
    problem: &EvolutionProblem,
    mut visit: impl FnMut(usize, f64, &Field) -> Result<()>,
) -> Result<Field> {
    problem.validate()?;
    let mut u = problem.initial.clone();
    visit(0, 0.0, &u)?;
    let steps = problem.step_count();
    let mut t = 0.0;
    for k in 1..=steps {
        let t_next = problem.time_of_step(k);
        u = step(&u, t_next - t, &problem.nonlinearity, problem.integrator, t_next)?;
        t = t_next;
        visit(k, t, &u)?;
    }
    Ok(u)
}

pub fn evolve(problem: &EvolutionProblem) -> Result<Trajectory> {
    let steps = problem.step_count();
    let mut traj = Trajectory::default();
    integrate(problem, |k, t, u| {
        if k % problem.snapshot_stride == 0 || k == steps {
            traj.times.push(t);
            traj.records.push(ObservableRecord::measure(
                t,
                u,
                &problem.nonlinearity,
                problem.sobolev_index,
            )?);
            if problem.keep_snapshots {
                traj.snapshots.push(u.clone());
            }
        }
        Ok(())
    })?;
    Ok(traj)
}

#[cfg(test)]
mod tests;
