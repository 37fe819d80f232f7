//! Command-line front end. Exit codes: 0 success, 1 validation error,
//! 2 numerical abort (blow-up guard, failed invariant), 3 I/O error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{parse_config, RunConfig};
use crate::dynamics::{integrate, EvolutionProblem, Integrator};
use crate::error::{Error, Result};
use crate::experiments::{
    build_nonlinearity, convergence_study, gwp_longtime_study, mixed_convergence_study, order_study,
    picard_study, rescale_to_norm, FamilyKind, Metadata, MollifierKind, Study, StudyReport,
};
use crate::io::{records_to_csv, write_snapshot_file, write_text};
use crate::nonlinearity::Nonlinearity;
use crate::observables::{
    energy, functional_gradient_check, mass, young_inequality_check, ObservableRecord,
};
use crate::potentials::{
    fourier_gap, l1_norm_with, power_box_v2_l1_lattice, v1_interaction, v2_interaction, L1Estimate,
    L1Options, Sign, CONTINUUM_V2_BOX_L1, LITERATURE_V2_BOX_L1,
};
use crate::spectral::{random_field, Field, Grid};

pub const THREADS_ENV: &str = "HARTREE3D_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "hartree3d", version, about = "Hartree and NLS dynamics on the 3-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for all output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to HARTREE3D_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct PotentialArgs {
    /// `v1` or `v2`.
    #[arg(long, value_parser = parse_enum::<FamilyKind>)]
    family: FamilyKind,
    /// Interaction order.
    #[arg(long)]
    p: u32,
    /// `box`, `box-averaged`, `smooth` or `power`.
    #[arg(long, value_parser = parse_enum::<MollifierKind>)]
    mollifier: MollifierKind,
    /// Mollifier scale.
    #[arg(long)]
    n: u32,
    /// Modes per dimension.
    #[arg(long = "grid", default_value_t = 32)]
    modes: usize,
    /// Monte Carlo samples when no exact method applies.
    #[arg(long, default_value_t = crate::potentials::MONTE_CARLO_SAMPLES)]
    samples: usize,
    /// Monte Carlo seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; falls back to HARTREE3D_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write the JSON to `<out-dir>/potential.json`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve the configured initial data; writes CSV, optional snapshots and a report.
    Simulate(RunArgs),
    /// Hartree-to-NLS convergence over `n_values`.
    Converge(RunArgs),
    /// Convergence for two terms `p = [p1, p2]`.
    MixedConverge(RunArgs),
    /// Long-time cubic-quintic run with the kinetic bound checked at every record.
    Gwp(RunArgs),
    /// Picard iteration of the Duhamel map.
    Picard(RunArgs),
    /// Integrator order over `order.dt_list`.
    Order(RunArgs),
    /// L¹ norm, Fourier gap table and support statistics of one potential.
    PotentialInfo(PotentialArgs),
    /// Conservation, gradient and inequality checks for the configured run.
    CheckInvariants(RunArgs),
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::BlowUp { .. } => EXIT_NUMERICAL,
        Error::Io(_) | Error::Format(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_VALIDATION,
            };
        }
    };
    let threads = match &cli.command {
        Command::PotentialInfo(a) => a.threads,
        Command::Simulate(a)
        | Command::Converge(a)
        | Command::MixedConverge(a)
        | Command::Gwp(a)
        | Command::Picard(a)
        | Command::Order(a)
        | Command::CheckInvariants(a) => a.threads,
    };
    let outcome = thread_count(threads).and_then(|n| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = n {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::param(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(&cli.command))
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => Some(v.trim().parse::<usize>().map_err(|_| {
                Error::param(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))
            })?),
            _ => None,
        },
    };
    if n == Some(0) {
        return Err(Error::param("thread count must be >= 1"));
    }
    Ok(n)
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        cfg = cfg.resolve()?;
    }
    Ok(cfg)
}

fn save_report(args: &RunArgs, cfg: &RunConfig, report: &StudyReport) -> Result<PathBuf> {
    let path = args.out_dir.join(&cfg.output.report);
    write_text(&path, &report.to_json(true)?)?;
    Ok(path)
}

fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Converge(a) => {
            let cfg = load(a)?;
            let study = convergence_study(&cfg.convergence())?;
            finish_convergence(a, &cfg, "converge", study)
        }
        Command::MixedConverge(a) => {
            let cfg = load(a)?;
            let study = mixed_convergence_study(&cfg.convergence())?;
            finish_convergence(a, &cfg, "mixed-converge", study)
        }
        Command::Gwp(a) => {
            let cfg = load(a)?;
            let study = gwp_longtime_study(&cfg.gwp())?;
            let r = &study.result;
            println!(
                "h1_initial={:.6e} h1_max={:.6e} bound_holds={:?} status={}",
                r.h1_initial, r.h1_max, r.bound_holds, r.status
            );
            let blew_up = r.status != "ok";
            let path = save_report(a, &cfg, &StudyReport::new("gwp", cfg.seed, &cfg, &study)?)?;
            println!("report: {}", path.display());
            Ok(if blew_up { EXIT_NUMERICAL } else { EXIT_OK })
        }
        Command::Picard(a) => {
            let cfg = load(a)?;
            let study = picard_study(&cfg.picard())?;
            let r = &study.result;
            for (m, rho) in r.contraction.iter().enumerate() {
                println!("rho_{} = {}", m + 1, rho.map_or("n/a".into(), |v| format!("{v:.6e}")));
            }
            println!("evolve_agreement = {:.6e}", r.evolve_agreement);
            let path = save_report(a, &cfg, &StudyReport::new("picard", cfg.seed, &cfg, &study)?)?;
            println!("report: {}", path.display());
            Ok(EXIT_OK)
        }
        Command::Order(a) => {
            let cfg = load(a)?;
            let study = order_study(&cfg.order())?;
            let r = &study.result;
            for row in &r.rows {
                println!("dt={:.6e} error={:.6e}", row.dt, row.error);
            }
            match r.slope {
                Some(s) => println!("slope = {s:.4}{}", if r.roundoff_floor { " (round-off floor reached)" } else { "" }),
                None => println!("slope undefined: errors at the round-off floor"),
            }
            let path = save_report(a, &cfg, &StudyReport::new("order", cfg.seed, &cfg, &study)?)?;
            println!("report: {}", path.display());
            Ok(EXIT_OK)
        }
        Command::PotentialInfo(a) => potential_info(a),
        Command::CheckInvariants(a) => check_invariants(a),
    }
}

fn finish_convergence(
    args: &RunArgs,
    cfg: &RunConfig,
    name: &str,
    study: Study<crate::experiments::ConvergenceResult>,
) -> Result<i32> {
    let r = &study.result;
    for row in r.rows.iter().chain(r.delta_proxy.iter()) {
        match row.discrepancy {
            Some(d) => println!("{:>8}  D = {d:.6e}", row.label),
            None => println!("{:>8}  {}", row.label, row.status),
        }
    }
    println!("non-increasing (5% slack): {}", r.non_increasing);
    let path = save_report(args, cfg, &StudyReport::new(name, cfg.seed, cfg, &study)?)?;
    println!("report: {}", path.display());
    Ok(EXIT_OK)
}

fn initial_field(cfg: &RunConfig, grid: &Grid) -> Result<Field> {
    let u = cfg.initial.build(grid, cfg.seed)?;
    match cfg.initial_norm {
        Some(target) => rescale_to_norm(&u, cfg.sobolev(), target),
        None => Ok(u),
    }
}

fn run_nonlinearity(cfg: &RunConfig, grid: &Grid) -> Result<Nonlinearity> {
    build_nonlinearity(grid, &cfg.terms(), cfg.mollifier, cfg.n, cfg.dealias)
}

#[derive(Serialize)]
struct SimulateSummary {
    steps: usize,
    records: usize,
    final_record: Option<ObservableRecord>,
    mass_drift: f64,
    energy_drift: f64,
    status: String,
}

fn max_relative_drift(values: impl Iterator<Item = f64>) -> f64 {
    let mut first = None;
    let mut worst: f64 = 0.0;
    for v in values {
        let f = *first.get_or_insert(v);
        let scale = if f == 0.0 { 1.0 } else { f.abs() };
        worst = worst.max((v - f).abs() / scale);
    }
    worst
}

fn simulate(args: &RunArgs) -> Result<i32> {
    let cfg = load(args)?;
    let grid = Grid::new(cfg.modes)?;
    let nl = run_nonlinearity(&cfg, &grid)?;
    let mut problem = EvolutionProblem::new(initial_field(&cfg, &grid)?, nl.clone(), cfg.t_final, cfg.dt);
    problem.integrator = cfg.integrator;
    problem.snapshot_stride = cfg.snapshot_stride;
    problem.sobolev_index = cfg.sobolev();
    let steps = problem.step_count();
    let keep = cfg.output.snapshots.is_some();
    let mut records = Vec::new();
    let mut snapshots: Vec<(f64, Field)> = Vec::new();
    let start = Instant::now();
    let outcome = integrate(&problem, |k, t, u| {
        if k % cfg.snapshot_stride == 0 || k == steps {
            records.push(ObservableRecord::measure(t, u, &nl, cfg.sobolev())?);
            if keep {
                snapshots.push((t, u.clone()));
            }
        }
        Ok(())
    });
    let elapsed = start.elapsed().as_secs_f64();
    let (status, blow_up) = match outcome {
        Ok(_) => ("ok".to_string(), None),
        Err(Error::BlowUp { t, reason }) => (format!("blow-up at t={t:.6e}: {reason}"), Some((t, reason))),
        Err(e) => return Err(e),
    };
    let csv_path = args.out_dir.join(&cfg.output.csv);
    write_text(&csv_path, &records_to_csv(&records))?;
    println!("trajectory: {}", csv_path.display());
    if let Some(name) = &cfg.output.snapshots {
        let path = args.out_dir.join(name);
        let refs: Vec<(f64, &Field)> = snapshots.iter().map(|(t, f)| (*t, f)).collect();
        write_snapshot_file(&path, &grid, &refs)?;
        println!("snapshots: {}", path.display());
    }
    let summary = SimulateSummary {
        steps,
        records: records.len(),
        final_record: records.last().copied(),
        mass_drift: max_relative_drift(records.iter().map(|r| r.mass)),
        energy_drift: max_relative_drift(records.iter().map(|r| r.total_energy)),
        status,
    };
    let mut runtimes = BTreeMap::new();
    runtimes.insert("evolve".to_string(), elapsed);
    let study = Study {
        result: summary,
        metadata: Metadata::now(runtimes),
    };
    let path = save_report(args, &cfg, &StudyReport::new("simulate", cfg.seed, &cfg, &study)?)?;
    println!("report: {}", path.display());
    match blow_up {
        Some((t, reason)) => Err(Error::BlowUp { t, reason }),
        None => Ok(EXIT_OK),
    }
}

#[derive(Serialize)]
struct FourierGapRow {
    k_max: i64,
    gap: f64,
}

#[derive(Serialize)]
struct PotentialInfo {
    family: FamilyKind,
    p: u32,
    mollifier: MollifierKind,
    n: u32,
    modes: usize,
    omega_label: String,
    omega_integral: f64,
    omega_l1: f64,
    omega_nonnegative: bool,
    support_size: usize,
    support_radius: f64,
    l1_norm: L1Estimate,
    /// Scalar that rescales the interaction to unit `L¹`.
    normalization: f64,
    /// For the full-product family with the power box at `p = 2`.
    literature_l1: Option<f64>,
    continuum_l1: Option<f64>,
    lattice_oracle_l1: Option<f64>,
    fourier_gap: Vec<FourierGapRow>,
}

fn potential_info(a: &PotentialArgs) -> Result<i32> {
    let grid = Grid::new(a.modes)?;
    let omega = a.mollifier.build(&grid, a.n, a.p)?;
    let spec = match a.family {
        FamilyKind::V1 => v1_interaction(&omega, a.p, Sign::Defocusing, 1.0)?,
        FamilyKind::V2 => v2_interaction(&omega, a.p, Sign::Defocusing, 1.0)?,
        FamilyKind::Local => return Err(Error::param("potential-info needs --family v1 or v2")),
    };
    let opts = L1Options {
        samples: a.samples,
        seed: a.seed,
        ..L1Options::default()
    };
    let l1 = l1_norm_with(&spec, &opts)?;
    let power_v2 = a.family == FamilyKind::V2 && a.p == 2 && a.mollifier == MollifierKind::Power;
    let half = (a.modes / 2) as i64;
    let info = PotentialInfo {
        family: a.family,
        p: a.p,
        mollifier: a.mollifier,
        n: a.n,
        modes: a.modes,
        omega_label: omega.label().to_string(),
        omega_integral: omega.integral(),
        omega_l1: omega.l1_norm(),
        omega_nonnegative: omega.is_nonnegative(),
        support_size: omega.support_size(),
        support_radius: omega.support_radius(),
        normalization: 1.0 / l1.value,
        l1_norm: l1,
        literature_l1: power_v2.then_some(LITERATURE_V2_BOX_L1),
        continuum_l1: power_v2.then_some(CONTINUUM_V2_BOX_L1),
        lattice_oracle_l1: if power_v2 { Some(power_box_v2_l1_lattice(&grid, a.n)?) } else { None },
        fourier_gap: (1..=half)
            .map(|k| Ok(FourierGapRow { k_max: k, gap: fourier_gap(&omega, k)? }))
            .collect::<Result<_>>()?,
    };
    let mut text = serde_json::to_string_pretty(&info).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    print!("{text}");
    if let Some(dir) = &a.out_dir {
        write_text(&dir.join("potential.json"), &text)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct InvariantReport {
    steps: usize,
    mass_drift: f64,
    mass_ok: bool,
    energy_drift_dt: f64,
    energy_drift_half_dt: f64,
    /// Drift ratio under `dt → dt/2`; about 4 for a second-order method.
    energy_drift_ratio: f64,
    energy_ok: bool,
    gradient_relative_error: f64,
    gradient_ok: bool,
    young_margins: Option<[f64; 2]>,
    young_ok: bool,
    all_pass: bool,
}

fn drifts(problem: &EvolutionProblem) -> Result<(f64, f64)> {
    let nl = &problem.nonlinearity;
    let m0 = mass(&problem.initial);
    let e0 = energy(&problem.initial, nl)?.total;
    let mut dm: f64 = 0.0;
    let mut de: f64 = 0.0;
    integrate(problem, |_, _, u| {
        dm = dm.max((mass(u) - m0).abs() / m0.max(f64::MIN_POSITIVE));
        de = de.max((energy(u, nl)?.total - e0).abs() / e0.abs().max(f64::MIN_POSITIVE));
        Ok(())
    })?;
    Ok((dm, de))
}

fn check_invariants(args: &RunArgs) -> Result<i32> {
    let cfg = load(args)?;
    if cfg.t_final == 0.0 {
        return Err(Error::config("T", "check-invariants needs T > 0"));
    }
    let grid = Grid::new(cfg.modes)?;
    let nl = run_nonlinearity(&cfg, &grid)?;
    let u0 = initial_field(&cfg, &grid)?;
    let mut problem = EvolutionProblem::new(u0.clone(), nl.clone(), cfg.t_final, cfg.dt);
    problem.integrator = cfg.integrator;
    let (mass_drift, drift_dt) = drifts(&problem)?;
    let mut half = problem.clone();
    half.dt = 0.5 * cfg.dt;
    let (_, drift_half) = drifts(&half)?;
    let ratio = if drift_half > 0.0 { drift_dt / drift_half } else { f64::INFINITY };
    // second order for Strang, fourth for RK4; the energy is conserved to round-off when both drifts are tiny
    let (lo, hi) = match cfg.integrator {
        Integrator::Strang => (3.0, 5.0),
        Integrator::Rk4 => (12.0, 20.0),
    };
    let energy_ok = (lo..=hi).contains(&ratio) || drift_dt <= 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let v = random_field(&grid, &mut rng, (cfg.modes / 4) as i64, 1.0);
    let v = v.scale(Complex64::new(u0.l2_norm() / v.l2_norm(), 0.0));
    let gradient = functional_gradient_check(&u0, &nl, &v, 1e-4)?;
    let gradient_ok = gradient.relative_error <= 1e-6;

    let young_margins = match cfg.family {
        FamilyKind::Local => None,
        _ => {
            let omega = cfg.mollifier.build(&grid, cfg.n, cfg.p[0])?;
            let r = young_inequality_check(&u0, &omega)?;
            Some([r.cubic_margin, r.quintic_margin])
        }
    };
    let young_ok = young_margins.is_none_or(|m| m.iter().all(|&x| x >= -1e-12));
    let mass_ok = mass_drift <= 1e-11;
    let all_pass = mass_ok && energy_ok && gradient_ok && young_ok;
    let report = InvariantReport {
        steps: problem.step_count(),
        mass_drift,
        mass_ok,
        energy_drift_dt: drift_dt,
        energy_drift_half_dt: drift_half,
        energy_drift_ratio: ratio,
        energy_ok,
        gradient_relative_error: gradient.relative_error,
        gradient_ok,
        young_margins,
        young_ok,
        all_pass,
    };
    println!(
        "mass_drift={mass_drift:.3e} energy_ratio={ratio:.3} gradient={:.3e} all_pass={all_pass}",
        gradient.relative_error
    );
    let study = Study {
        result: report,
        metadata: Metadata::now(BTreeMap::new()),
    };
    let path = save_report(args, &cfg, &StudyReport::new("check-invariants", cfg.seed, &cfg, &study)?)?;
    println!("report: {}", path.display());
    Ok(if all_pass { EXIT_OK } else { EXIT_NUMERICAL })
}
