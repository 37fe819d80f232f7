//! Desk-scale studies: Hartree-to-NLS convergence (single and mixed),
//! long-time cubic-quintic runs, integrator order and Picard contraction.
//!
//! Rows of a study run concurrently on the rayon pool; each row is
//! sequential. Results are plain data; wall-clock timings are kept apart in
//! [`Metadata`] so that the rest of a report is reproducible byte for byte.

use std::collections::BTreeMap;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate, picard_iterate, step, EvolutionProblem, Integrator, PicardOptions,
};
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::observables::{energy, kinetic_bound_check, mass};
use crate::potentials::{
    box_mollifier, box_mollifier_cell_averaged, discrete_delta, normalize_to_unit_l1,
    power_mollifier, smooth_mollifier, v1_interaction, v2_interaction, InteractionSpec,
    PolynomialBump, Sign, TwoBodyPotential,
};
use crate::spectral::{critical_exponent, kinetic_energy, random_field, sobolev_norm, Field, Grid};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Consecutive discrepancies may grow by at most this factor.
pub const MONOTONE_SLACK: f64 = 1.05;

/// Discrepancies below this are treated as zero by the monotonicity check.
pub const DISCREPANCY_FLOOR: f64 = 1e-8;

/// Relative errors below this are round-off in the order study.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MollifierKind {
    /// `n³ χ` sampled at the nodes; needs `1/(2n) >= h`.
    Box,
    /// `n³ χ` averaged over lattice cells; defined for every `n`.
    BoxAveraged,
    /// `n³ Ψ(n x)` with the polynomial bump.
    Smooth,
    /// `(n³ χ)^{2/(p+1)}`.
    Power,
}

impl MollifierKind {
    pub fn build(self, grid: &Grid, n: u32, p: u32) -> Result<TwoBodyPotential> {
        match self {
            MollifierKind::Box => box_mollifier(grid, n),
            MollifierKind::BoxAveraged => box_mollifier_cell_averaged(grid, n),
            MollifierKind::Smooth => smooth_mollifier(grid, n, &PolynomialBump),
            MollifierKind::Power => power_mollifier(grid, n, p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Local,
    V1,
    V2,
}

/// One term `μ λ 𝒩_p` of the nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermParams {
    pub family: FamilyKind,
    pub p: u32,
    /// `+1` defocusing, `-1` focusing.
    pub mu: i64,
    #[serde(rename = "lambda")]
    pub coupling: f64,
}

impl TermParams {
    pub fn sign(&self) -> Result<Sign> {
        Sign::from_int(self.mu)
    }

    pub fn local(&self) -> Result<InteractionSpec> {
        InteractionSpec::local(self.p, self.sign()?, self.coupling)
    }

    /// The term with two-body factor `omega`, rescaled to unit `L¹`.
    pub fn with_omega(&self, omega: &TwoBodyPotential) -> Result<InteractionSpec> {
        let sign = self.sign()?;
        let spec = match self.family {
            FamilyKind::Local => return self.local(),
            FamilyKind::V1 => v1_interaction(omega, self.p, sign, self.coupling)?,
            FamilyKind::V2 => v2_interaction(omega, self.p, sign, self.coupling)?,
        };
        normalize_to_unit_l1(&spec)
    }

    pub fn build(&self, grid: &Grid, mollifier: MollifierKind, n: u32) -> Result<InteractionSpec> {
        if self.family == FamilyKind::Local {
            return self.local();
        }
        self.with_omega(&mollifier.build(grid, n, self.p)?)
    }
}

pub fn build_nonlinearity(
    grid: &Grid,
    terms: &[TermParams],
    mollifier: MollifierKind,
    n: u32,
    dealias: bool,
) -> Result<Nonlinearity> {
    let specs = terms
        .iter()
        .map(|t| t.build(grid, mollifier, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(Nonlinearity::from_specs(&specs)?.with_dealias(dealias))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub k: [i64; 3],
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    /// `a e^{i k·x}`.
    PlaneWave { amplitude: f64, k: [i64; 3] },
    /// `Σ c_k e^{i k·x}`.
    Modes { modes: Vec<Mode> },
    /// Gaussian coefficients on `|k|_∞ <= kmax` with `⟨k⟩^{-decay}` weights,
    /// drawn from the run seed.
    Random { kmax: i64, decay: f64 },
}

impl InitialData {
    pub fn build(&self, grid: &Grid, seed: u64) -> Result<Field> {
        let half = (grid.modes() / 2) as i64;
        let check = |k: &[i64; 3]| -> Result<()> {
            if k.iter().any(|c| c.abs() >= half) {
                return Err(Error::param(format!(
                    "wavevector {k:?} is not resolved below the Nyquist mode {half}"
                )));
            }
            Ok(())
        };
        match self {
            InitialData::PlaneWave { amplitude, k } => {
                check(k)?;
                let a = *amplitude;
                let k = k.map(|c| c as f64);
                Ok(Field::from_fn(grid, |x| {
                    Complex64::from_polar(a, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])
                }))
            }
            InitialData::Modes { modes } => {
                if modes.is_empty() {
                    return Err(Error::param("mode list is empty"));
                }
                for m in modes {
                    check(&m.k)?;
                }
                Ok(Field::from_fn(grid, |x| {
                    modes
                        .iter()
                        .map(|m| {
                            let phase = m.k[0] as f64 * x[0] + m.k[1] as f64 * x[1] + m.k[2] as f64 * x[2];
                            Complex64::new(m.re, m.im) * Complex64::from_polar(1.0, phase)
                        })
                        .sum()
                }))
            }
            InitialData::Random { kmax, decay } => {
                if *kmax < 0 || *kmax >= half {
                    return Err(Error::param(format!("kmax must lie in [0, {})", half)));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(random_field(grid, &mut rng, *kmax, *decay))
            }
        }
    }

    /// Closed-form flow for plane-wave data under a constant-modulus
    /// collapsing nonlinearity: `u₀ e^{-i(|k|² + Σ μλ|a|^{2p}) t}`.
    pub fn plane_wave_solution(&self, grid: &Grid, terms: &[TermParams], t: f64) -> Option<Field> {
        let InitialData::PlaneWave { amplitude, k } = self else {
            return None;
        };
        let g = amplitude * amplitude;
        let mut freq = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        for term in terms {
            freq += term.mu as f64 * term.coupling * g.powi(term.p as i32);
        }
        let u0 = self.build(grid, 0).ok()?;
        Some(u0.scale(Complex64::from_polar(1.0, -freq * t)))
    }
}

/// Rescales `u` to `‖u‖_{H^s} = target`.
pub fn rescale_to_norm(u: &Field, s: f64, target: f64) -> Result<Field> {
    let norm = sobolev_norm(u, s);
    if norm == 0.0 {
        return Err(Error::param("cannot rescale the zero field"));
    }
    Ok(u.scale(Complex64::new(target / norm, 0.0)))
}

fn max_p(terms: &[TermParams]) -> u32 {
    terms.iter().map(|t| t.p).max().unwrap_or(1)
}

fn validate_time(t_final: f64, dt: f64, stride: usize) -> Result<()> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::param("T must be positive"));
    }
    if !(dt > 0.0) || dt > t_final {
        return Err(Error::param("dt must lie in (0, T]"));
    }
    if stride == 0 {
        return Err(Error::param("record stride must be >= 1"));
    }
    Ok(())
}

// ---------------------------------------------------------------- reports

#[derive(Clone, Debug, Default, Serialize)]
pub struct Metadata {
    pub created_unix: u64,
    /// Wall-clock seconds per row, keyed by row label.
    pub runtimes: BTreeMap<String, f64>,
}

impl Metadata {
    pub fn now(runtimes: BTreeMap<String, f64>) -> Self {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Metadata {
            created_unix,
            runtimes,
        }
    }
}

/// A study result with its row timings.
#[derive(Clone, Debug)]
pub struct Study<R> {
    pub result: R,
    pub metadata: Metadata,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyReport {
    pub study: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub results: serde_json::Value,
    pub metadata: Metadata,
}

impl StudyReport {
    pub fn new<C: Serialize, R: Serialize>(
        name: &str,
        seed: u64,
        config: &C,
        study: &Study<R>,
    ) -> Result<Self> {
        let json = |v: serde_json::Result<serde_json::Value>| v.map_err(|e| Error::Format(e.to_string()));
        Ok(StudyReport {
            study: name.to_string(),
            version: CODE_VERSION.to_string(),
            seed,
            config: json(serde_json::to_value(config))?,
            results: json(serde_json::to_value(&study.result))?,
            metadata: study.metadata.clone(),
        })
    }

    /// Pretty JSON. Without metadata the output depends only on config and seed.
    pub fn to_json(&self, include_metadata: bool) -> Result<String> {
        let mut value = serde_json::to_value(self).map_err(|e| Error::Format(e.to_string()))?;
        if !include_metadata {
            if let Some(obj) = value.as_object_mut() {
                obj.remove("metadata");
            }
        }
        let mut text = serde_json::to_string_pretty(&value).map_err(|e| Error::Format(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

// ----------------------------------------------------------- convergence

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudyConfig {
    pub modes: usize,
    pub initial: InitialData,
    pub seed: u64,
    /// Hartree terms; the reference replaces each by its local counterpart.
    pub terms: Vec<TermParams>,
    pub mollifier: MollifierKind,
    pub n_values: Vec<u32>,
    pub t_final: f64,
    pub dt: f64,
    pub integrator: Integrator,
    pub record_stride: usize,
    /// Regularity of `D(n)`; `s_c` of the highest order when absent.
    pub sobolev_index: Option<f64>,
    /// Add a row with the discrete delta as two-body factor.
    pub delta_proxy: bool,
    pub dealias: bool,
}

impl ConvergenceStudyConfig {
    pub fn validate(&self) -> Result<()> {
        Grid::new(self.modes)?;
        validate_time(self.t_final, self.dt, self.record_stride)?;
        if self.terms.is_empty() {
            return Err(Error::param("at least one nonlinearity term is required"));
        }
        if self.terms.iter().any(|t| t.family == FamilyKind::Local) {
            return Err(Error::param("convergence terms must be V1 or V2"));
        }
        if self.n_values.is_empty() {
            return Err(Error::param("n_values is empty"));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("n_values must be strictly increasing"));
        }
        Ok(())
    }

    pub fn sobolev_index(&self) -> Result<f64> {
        match self.sobolev_index {
            Some(s) => Ok(s),
            None => critical_exponent(max_p(&self.terms)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub label: String,
    pub n: Option<u32>,
    /// `max_t ‖u(t) - u^n(t)‖_{H^s}` over recorded times.
    pub discrepancy: Option<f64>,
    pub argmax_time: Option<f64>,
    /// `max_t |M(t) - M(0)| / M(0)` of the reference and the Hartree run.
    pub mass_drift_reference: Option<f64>,
    pub mass_drift_hartree: Option<f64>,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceResult {
    pub sobolev_index: f64,
    pub rows: Vec<ConvergenceRow>,
    pub delta_proxy: Option<ConvergenceRow>,
    /// `D(n_{i+1}) <= 1.05 D(n_i)` for all i, or both below the floor.
    pub non_increasing: bool,
}

impl ConvergenceResult {
    pub fn discrepancies(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.discrepancy).collect()
    }
}

pub fn non_increasing_with_slack(values: &[Option<f64>]) -> bool {
    values.windows(2).all(|w| match (w[0], w[1]) {
        (Some(a), Some(b)) => b <= MONOTONE_SLACK * a || (a <= DISCREPANCY_FLOOR && b <= DISCREPANCY_FLOOR),
        _ => false,
    })
}

struct LockstepRun<'a> {
    initial: &'a Field,
    reference: &'a Nonlinearity,
    hartree: &'a Nonlinearity,
    t_final: f64,
    dt: f64,
    integrator: Integrator,
    stride: usize,
    s: f64,
}

impl LockstepRun<'_> {
    fn run(&self, label: String, n: Option<u32>) -> Result<ConvergenceRow> {
        let problem = EvolutionProblem::new(self.initial.clone(), self.reference.clone(), self.t_final, self.dt);
        let steps = problem.step_count();
        let mut u = self.initial.clone();
        let mut v = self.initial.clone();
        let m0 = mass(&u);
        let mut d_max = 0.0;
        let mut argmax = 0.0;
        let mut drift_u: f64 = 0.0;
        let mut drift_v: f64 = 0.0;
        let mut t = 0.0;
        let mut status = "ok".to_string();
        for k in 1..=steps {
            let t_next = problem.time_of_step(k);
            let h = t_next - t;
            let advanced = step(&u, h, self.reference, self.integrator, t_next)
                .and_then(|a| Ok((a, step(&v, h, self.hartree, self.integrator, t_next)?)));
            match advanced {
                Ok((a, b)) => {
                    u = a;
                    v = b;
                }
                Err(Error::BlowUp { t, reason }) => {
                    status = format!("blow-up at t={t:.6e}: {reason}");
                    break;
                }
                Err(e) => return Err(e),
            }
            t = t_next;
            if k % self.stride == 0 || k == steps {
                let d = sobolev_norm(&u.sub(&v)?, self.s);
                if d > d_max {
                    d_max = d;
                    argmax = t;
                }
                if m0 > 0.0 {
                    drift_u = drift_u.max((mass(&u) - m0).abs() / m0);
                    drift_v = drift_v.max((mass(&v) - m0).abs() / m0);
                }
            }
        }
        let ok = status == "ok";
        Ok(ConvergenceRow {
            label,
            n,
            discrepancy: ok.then_some(d_max),
            argmax_time: ok.then_some(argmax),
            mass_drift_reference: ok.then_some(drift_u),
            mass_drift_hartree: ok.then_some(drift_v),
            status,
        })
    }
}

/// `D(n)` for each `n` against the local NLS reference run with the same
/// integrator, grid and step.
pub fn convergence_study(cfg: &ConvergenceStudyConfig) -> Result<Study<ConvergenceResult>> {
    cfg.validate()?;
    let grid = Grid::new(cfg.modes)?;
    let s = cfg.sobolev_index()?;
    let initial = cfg.initial.build(&grid, cfg.seed)?;
    let reference = Nonlinearity::from_specs(
        &cfg.terms.iter().map(|t| t.local()).collect::<Result<Vec<_>>>()?,
    )?
    .with_dealias(cfg.dealias);

    enum Row {
        Mollified(u32),
        Delta,
    }
    let mut jobs: Vec<(String, Row, Nonlinearity)> = Vec::new();
    for &n in &cfg.n_values {
        let nl = build_nonlinearity(&grid, &cfg.terms, cfg.mollifier, n, cfg.dealias)?;
        jobs.push((format!("n={n}"), Row::Mollified(n), nl));
    }
    if cfg.delta_proxy {
        let delta = discrete_delta(&grid)?;
        let specs = cfg
            .terms
            .iter()
            .map(|t| t.with_omega(&delta))
            .collect::<Result<Vec<_>>>()?;
        let nl = Nonlinearity::from_specs(&specs)?.with_dealias(cfg.dealias);
        jobs.push(("delta".to_string(), Row::Delta, nl));
    }

    let outcomes: Vec<(Result<ConvergenceRow>, f64, bool)> = jobs
        .par_iter()
        .map(|(label, kind, nl)| {
            let run = LockstepRun {
                initial: &initial,
                reference: &reference,
                hartree: nl,
                t_final: cfg.t_final,
                dt: cfg.dt,
                integrator: cfg.integrator,
                stride: cfg.record_stride,
                s,
            };
            let n = match kind {
                Row::Mollified(n) => Some(*n),
                Row::Delta => None,
            };
            let (row, secs) = timed(|| run.run(label.clone(), n));
            (row, secs, matches!(kind, Row::Delta))
        })
        .collect();

    let mut runtimes = BTreeMap::new();
    let mut rows = Vec::new();
    let mut delta_proxy = None;
    for ((label, _, _), (row, secs, is_delta)) in jobs.iter().zip(outcomes) {
        runtimes.insert(label.clone(), secs);
        let row = row?;
        if is_delta {
            delta_proxy = Some(row);
        } else {
            rows.push(row);
        }
    }
    let non_increasing = non_increasing_with_slack(&rows.iter().map(|r| r.discrepancy).collect::<Vec<_>>());
    Ok(Study {
        result: ConvergenceResult {
            sobolev_index: s,
            rows,
            delta_proxy,
            non_increasing,
        },
        metadata: Metadata::now(runtimes),
    })
}

/// Convergence study for `±|u|^{2p₁}u ± |u|^{2p₂}u` with two Hartree terms.
pub fn mixed_convergence_study(cfg: &ConvergenceStudyConfig) -> Result<Study<ConvergenceResult>> {
    match cfg.terms.as_slice() {
        [a, b] if b.p > a.p => {}
        _ => {
            return Err(Error::param(
                "the mixed study needs exactly two terms with p₂ > p₁",
            ))
        }
    }
    let grid = Grid::new(cfg.modes)?;
    for &n in &cfg.n_values {
        for t in &cfg.terms {
            if !cfg.mollifier.build(&grid, n, t.p)?.is_nonnegative() {
                return Err(Error::param("mixed study potentials must be nonnegative"));
            }
        }
    }
    convergence_study(cfg)
}

// ------------------------------------------------------------------- GWP

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GwpStudyConfig {
    pub modes: usize,
    pub initial: InitialData,
    pub seed: u64,
    /// Rescale the initial data to this `H¹` norm.
    pub initial_h1: Option<f64>,
    /// Signed coupling `λ` of the cubic term.
    pub lambda: f64,
    /// Coupling of the defocusing quintic term, `> 0`.
    pub lambda2: f64,
    /// Two-body factor `ω_N` of the quintic `V1` term.
    pub mollifier: MollifierKind,
    pub n: u32,
    /// Factor `ω'` of the cubic term; `None` takes `ω' = ω_N`.
    pub cubic_mollifier: Option<(MollifierKind, u32)>,
    pub t_final: f64,
    pub dt: f64,
    pub integrator: Integrator,
    pub record_stride: usize,
    pub dealias: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GwpRecord {
    pub t: f64,
    pub h1: f64,
    pub kinetic: f64,
    pub energy: f64,
    pub mass: f64,
    /// `E + C M`, when a constant `C` is available.
    pub bound: Option<f64>,
    pub holds: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GwpResult {
    pub h1_initial: f64,
    pub h1_max: f64,
    /// `C` in `‖∇u‖² <= E + C M`; `None` when no bound is available for this
    /// `(λ, ω')`.
    pub constant: Option<f64>,
    pub bound_holds: Option<bool>,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub status: String,
    pub records: Vec<GwpRecord>,
}

pub fn gwp_longtime_study(cfg: &GwpStudyConfig) -> Result<Study<GwpResult>> {
    validate_time(cfg.t_final, cfg.dt, cfg.record_stride)?;
    if !(cfg.lambda2 > 0.0) {
        return Err(Error::param("λ₂ must be positive"));
    }
    let grid = Grid::new(cfg.modes)?;
    let mut initial = cfg.initial.build(&grid, cfg.seed)?;
    if let Some(target) = cfg.initial_h1 {
        initial = rescale_to_norm(&initial, 1.0, target)?;
    }
    let omega = cfg.mollifier.build(&grid, cfg.n, 2)?.unit_mass()?;
    let (omega_cubic, same) = match cfg.cubic_mollifier {
        None => (omega.clone(), true),
        Some((kind, n)) => (kind.build(&grid, n, 1)?.unit_mass()?, false),
    };
    let quintic = v1_interaction(&omega, 2, Sign::Defocusing, cfg.lambda2)?;
    let mut specs = vec![quintic];
    if cfg.lambda != 0.0 {
        let sign = if cfg.lambda > 0.0 { Sign::Defocusing } else { Sign::Focusing };
        specs.push(v1_interaction(&omega_cubic, 1, sign, cfg.lambda.abs())?);
    }
    let nl = Nonlinearity::from_specs(&specs)?.with_dealias(cfg.dealias);
    let constant = if same {
        Some(3.0 * cfg.lambda * cfg.lambda / (16.0 * cfg.lambda2))
    } else if cfg.lambda >= 0.0 && omega_cubic.is_nonnegative() {
        Some(0.0)
    } else {
        None
    };

    let mut problem = EvolutionProblem::new(initial.clone(), nl.clone(), cfg.t_final, cfg.dt);
    problem.integrator = cfg.integrator;
    let steps = problem.step_count();
    let mut records = Vec::new();
    let (outcome, secs) = timed(|| {
        integrate(&problem, |k, t, u| {
            if k % cfg.record_stride != 0 && k != steps {
                return Ok(());
            }
            let e = energy(u, &nl)?.total;
            let m = mass(u);
            let kinetic = kinetic_energy(u);
            let (bound, holds) = if same {
                let r = kinetic_bound_check(u, cfg.lambda, cfg.lambda2, &omega)?;
                (Some(r.rhs), Some(r.holds))
            } else if let Some(c) = constant {
                let rhs = e + c * m;
                (Some(rhs), Some(kinetic <= rhs + 1e-12 * (kinetic.abs() + e.abs())))
            } else {
                (None, None)
            };
            records.push(GwpRecord {
                t,
                h1: sobolev_norm(u, 1.0),
                kinetic,
                energy: e,
                mass: m,
                bound,
                holds,
            });
            Ok(())
        })
    });
    let status = match outcome {
        Ok(_) => "ok".to_string(),
        Err(Error::BlowUp { t, reason }) => format!("blow-up at t={t:.6e}: {reason}"),
        Err(e) => return Err(e),
    };
    let first = records[0];
    let h1_max = records.iter().map(|r| r.h1).fold(0.0, f64::max);
    let mass_drift = records
        .iter()
        .map(|r| (r.mass - first.mass).abs() / first.mass.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let energy_drift = records
        .iter()
        .map(|r| (r.energy - first.energy).abs() / first.energy.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let bound_holds = constant.map(|_| records.iter().all(|r| r.holds == Some(true)));
    let mut runtimes = BTreeMap::new();
    runtimes.insert("evolve".to_string(), secs);
    Ok(Study {
        result: GwpResult {
            h1_initial: first.h1,
            h1_max,
            constant,
            bound_holds,
            mass_drift,
            energy_drift,
            status,
            records,
        },
        metadata: Metadata::now(runtimes),
    })
}

// ----------------------------------------------------------------- order

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderReference {
    /// Closed form for plane-wave data, otherwise a fine RK4 run.
    Auto,
    /// RK4 at a quarter of the smallest step.
    Fine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderStudyConfig {
    pub modes: usize,
    pub initial: InitialData,
    pub seed: u64,
    pub terms: Vec<TermParams>,
    pub mollifier: MollifierKind,
    pub n: u32,
    pub t_final: f64,
    pub integrator: Integrator,
    pub dt_list: Vec<f64>,
    pub reference: OrderReference,
    pub dealias: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrderRow {
    pub dt: f64,
    /// Relative `L²` error at the final time.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderResult {
    pub reference: String,
    pub rows: Vec<OrderRow>,
    /// Least-squares slope of `log error` against `log dt` over the rows
    /// above the round-off floor; `None` with fewer than two such rows.
    pub slope: Option<f64>,
    pub points_used: usize,
    pub roundoff_floor: bool,
}

pub fn fitted_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

fn final_state(initial: &Field, nl: &Nonlinearity, t_final: f64, dt: f64, integrator: Integrator) -> Result<Field> {
    let mut problem = EvolutionProblem::new(initial.clone(), nl.clone(), t_final, dt);
    problem.integrator = integrator;
    integrate(&problem, |_, _, _| Ok(()))
}

pub fn order_study(cfg: &OrderStudyConfig) -> Result<Study<OrderResult>> {
    if cfg.dt_list.len() < 4 {
        return Err(Error::param("dt_list needs at least 4 entries"));
    }
    if cfg
        .dt_list
        .windows(2)
        .any(|w| ((w[1] - 0.5 * w[0]) / w[0]).abs() > 1e-12)
    {
        return Err(Error::param("dt_list must be a halving sequence"));
    }
    let finest = *cfg.dt_list.last().expect("non-empty");
    validate_time(cfg.t_final, cfg.dt_list[0], 1)?;
    let grid = Grid::new(cfg.modes)?;
    let initial = cfg.initial.build(&grid, cfg.seed)?;
    let nl = build_nonlinearity(&grid, &cfg.terms, cfg.mollifier, cfg.n, cfg.dealias)?;

    let closed = match cfg.reference {
        OrderReference::Auto if !cfg.dealias => cfg.initial.plane_wave_solution(&grid, &cfg.terms, cfg.t_final),
        _ => None,
    };
    let mut runtimes = BTreeMap::new();
    let (reference, label) = match closed {
        Some(f) => (f, "closed-form".to_string()),
        None => {
            let (f, secs) = timed(|| final_state(&initial, &nl, cfg.t_final, finest / 4.0, Integrator::Rk4));
            runtimes.insert("reference".to_string(), secs);
            (f?, format!("rk4 dt={:e}", finest / 4.0))
        }
    };
    let outcomes: Vec<(Result<OrderRow>, f64)> = cfg
        .dt_list
        .par_iter()
        .map(|&dt| {
            timed(|| {
                let u = final_state(&initial, &nl, cfg.t_final, dt, cfg.integrator)?;
                Ok(OrderRow {
                    dt,
                    error: u.relative_l2_distance(&reference)?,
                })
            })
        })
        .collect();
    let mut rows = Vec::new();
    for (row, secs) in outcomes {
        let row = row?;
        runtimes.insert(format!("dt={:e}", row.dt), secs);
        rows.push(row);
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > ROUNDOFF_FLOOR)
        .map(|r| (r.dt, r.error))
        .collect();
    let slope = fitted_slope(&points);
    Ok(Study {
        result: OrderResult {
            reference: label,
            roundoff_floor: points.len() < rows.len(),
            points_used: points.len(),
            slope,
            rows,
        },
        metadata: Metadata::now(runtimes),
    })
}

// ---------------------------------------------------------------- Picard

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardStudyConfig {
    pub modes: usize,
    pub initial: InitialData,
    pub seed: u64,
    /// Rescale the initial data to this `H^s` norm, `s` = `sobolev_index`.
    pub initial_norm: Option<f64>,
    pub terms: Vec<TermParams>,
    pub mollifier: MollifierKind,
    pub n: u32,
    pub t_final: f64,
    pub n_quad: usize,
    pub iterations: usize,
    /// `s_c` of the highest order when absent.
    pub sobolev_index: Option<f64>,
    pub dealias: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PicardStudyResult {
    pub sobolev_index: f64,
    pub initial_norm: f64,
    pub increments: Vec<f64>,
    pub contraction: Vec<Option<f64>>,
    pub diverged: bool,
    /// `max_i ‖u^{(K)}(t_i) - u(t_i)‖ / ‖u(t_i)‖` against an RK4 run with a
    /// tenth of the node spacing.
    pub evolve_agreement: f64,
}

pub fn picard_study(cfg: &PicardStudyConfig) -> Result<Study<PicardStudyResult>> {
    let grid = Grid::new(cfg.modes)?;
    let s = match cfg.sobolev_index {
        Some(s) => s,
        None => critical_exponent(max_p(&cfg.terms))?,
    };
    let mut u0 = cfg.initial.build(&grid, cfg.seed)?;
    if let Some(target) = cfg.initial_norm {
        u0 = rescale_to_norm(&u0, s, target)?;
    }
    let nl = build_nonlinearity(&grid, &cfg.terms, cfg.mollifier, cfg.n, cfg.dealias)?;
    let opts = PicardOptions {
        n_quad: cfg.n_quad,
        iterations: cfg.iterations,
        sobolev_index: s,
        ..PicardOptions::default()
    };
    let mut runtimes = BTreeMap::new();
    let (picard, secs) = timed(|| picard_iterate(&u0, cfg.t_final, &nl, &opts));
    let picard = picard?;
    runtimes.insert("picard".to_string(), secs);

    let last = picard.iterates.last().expect("at least one iterate");
    let sub = 10;
    let tau = cfg.t_final / (cfg.n_quad - 1) as f64;
    let mut problem = EvolutionProblem::new(u0.clone(), nl, cfg.t_final, tau / sub as f64);
    problem.integrator = Integrator::Rk4;
    let mut agreement: f64 = 0.0;
    let (run, secs) = timed(|| {
        integrate(&problem, |k, _, u| {
            if k % sub == 0 {
                let node = &last[k / sub];
                agreement = agreement.max(node.relative_l2_distance(u)?);
            }
            Ok(())
        })
    });
    run?;
    runtimes.insert("evolve".to_string(), secs);
    Ok(Study {
        result: PicardStudyResult {
            sobolev_index: s,
            initial_norm: sobolev_norm(&u0, s),
            increments: picard.increments,
            contraction: picard.contraction,
            diverged: picard.diverged,
            evolve_agreement: agreement,
        },
        metadata: Metadata::now(runtimes),
    })
}

#[cfg(test)]
mod tests;
