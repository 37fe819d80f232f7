use super::*;

fn term(family: FamilyKind, p: u32, mu: i64, coupling: f64) -> TermParams {
    TermParams {
        family,
        p,
        mu,
        coupling,
    }
}

fn two_mode() -> InitialData {
    InitialData::Modes {
        modes: vec![
            Mode {
                k: [1, 0, 0],
                re: 1.0,
                im: 0.0,
            },
            Mode {
                k: [0, 1, -1],
                re: 0.0,
                im: 0.5,
            },
        ],
    }
}

fn small_study(initial: InitialData, terms: Vec<TermParams>) -> ConvergenceStudyConfig {
    ConvergenceStudyConfig {
        modes: 16,
        initial,
        seed: 0,
        terms,
        mollifier: MollifierKind::BoxAveraged,
        n_values: vec![1, 2, 4],
        t_final: 0.05,
        dt: 5e-3,
        integrator: Integrator::Strang,
        record_stride: 1,
        sobolev_index: None,
        delta_proxy: true,
        dealias: false,
    }
}

#[test]
fn plane_wave_rows_vanish_for_both_signs() {
    for mu in [1, -1] {
        let cfg = small_study(
            InitialData::PlaneWave {
                amplitude: 1.5,
                k: [1, -2, 0],
            },
            vec![term(FamilyKind::V1, 2, mu, 1.0)],
        );
        let study = convergence_study(&cfg).unwrap().result;
        for row in study.rows.iter().chain(study.delta_proxy.iter()) {
            assert_eq!(row.status, "ok");
            assert!(row.discrepancy.unwrap() <= 1e-10, "{row:?}");
        }
    }
}

#[test]
fn delta_proxy_matches_local_reference() {
    let cfg = small_study(two_mode(), vec![term(FamilyKind::V1, 2, 1, 1.0)]);
    let study = convergence_study(&cfg).unwrap().result;
    let delta = study.delta_proxy.unwrap();
    assert!(delta.discrepancy.unwrap() <= 1e-8);
    assert!(study.rows[0].discrepancy.unwrap() > 1e-6);
    for row in &study.rows {
        assert!(row.mass_drift_reference.unwrap() <= 1e-11);
        assert!(row.mass_drift_hartree.unwrap() <= 1e-11);
    }
}

#[test]
fn rows_are_translation_invariant() {
    let cfg = small_study(two_mode(), vec![term(FamilyKind::V1, 2, 1, 1.0)]);
    let base = convergence_study(&cfg).unwrap().result;
    // translating every mode by an integer lattice shift is a phase per mode
    let shift = [3usize, 5, 1];
    let g = Grid::new(16).unwrap();
    let h = g.spacing();
    let InitialData::Modes { modes } = two_mode() else {
        unreachable!()
    };
    let moved = modes
        .iter()
        .map(|m| {
            let phase = -(m.k[0] as f64 * shift[0] as f64 + m.k[1] as f64 * shift[1] as f64 + m.k[2] as f64 * shift[2] as f64) * h;
            let c = Complex64::new(m.re, m.im) * Complex64::from_polar(1.0, phase);
            Mode {
                k: m.k,
                re: c.re,
                im: c.im,
            }
        })
        .collect::<Vec<_>>();
    let u = two_mode().build(&g, 0).unwrap().translate(shift);
    let v = InitialData::Modes { modes: moved.clone() }.build(&g, 0).unwrap();
    assert!(u.relative_l2_distance(&v).unwrap() < 1e-13);
    let mut cfg2 = cfg.clone();
    cfg2.initial = InitialData::Modes { modes: moved };
    let moved = convergence_study(&cfg2).unwrap().result;
    for (a, b) in base.rows.iter().zip(&moved.rows) {
        let (a, b) = (a.discrepancy.unwrap(), b.discrepancy.unwrap());
        assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn mixed_with_zero_quintic_matches_single_study() {
    let mut single = small_study(two_mode(), vec![term(FamilyKind::V1, 1, 1, 1.0)]);
    single.sobolev_index = Some(1.0);
    let mixed = small_study(
        two_mode(),
        vec![term(FamilyKind::V1, 1, 1, 1.0), term(FamilyKind::V1, 2, 1, 0.0)],
    );
    let a = convergence_study(&single).unwrap().result;
    let b = mixed_convergence_study(&mixed).unwrap().result;
    assert_eq!(a.discrepancies(), b.discrepancies());
    let mut bad = mixed.clone();
    bad.terms.swap(0, 1);
    assert!(mixed_convergence_study(&bad).is_err());
}

#[test]
fn config_validation() {
    let mut cfg = small_study(two_mode(), vec![term(FamilyKind::V1, 2, 1, 1.0)]);
    cfg.n_values = vec![2, 2];
    assert!(convergence_study(&cfg).is_err());
    cfg.n_values = vec![2];
    cfg.terms = vec![term(FamilyKind::Local, 2, 1, 1.0)];
    assert!(convergence_study(&cfg).is_err());
    cfg.terms = vec![term(FamilyKind::V1, 2, 3, 1.0)];
    assert!(convergence_study(&cfg).is_err());
    cfg.terms = vec![term(FamilyKind::V1, 2, 1, 1.0)];
    cfg.mollifier = MollifierKind::Box;
    cfg.n_values = vec![8];
    assert!(matches!(convergence_study(&cfg), Err(Error::Resolution(_))));
}

#[test]
fn reports_are_reproducible() {
    let cfg = small_study(two_mode(), vec![term(FamilyKind::V1, 2, 1, 1.0)]);
    let a = StudyReport::new("converge", 0, &cfg, &convergence_study(&cfg).unwrap()).unwrap();
    let b = StudyReport::new("converge", 0, &cfg, &convergence_study(&cfg).unwrap()).unwrap();
    assert_eq!(a.to_json(false).unwrap(), b.to_json(false).unwrap());
    assert!(!a.to_json(false).unwrap().contains("runtimes"));
    assert!(a.to_json(true).unwrap().contains("runtimes"));
}

#[test]
fn monotone_check_examples() {
    assert!(non_increasing_with_slack(&[Some(1.0), Some(1.04), Some(0.5)]));
    assert!(!non_increasing_with_slack(&[Some(1.0), Some(1.06)]));
    assert!(non_increasing_with_slack(&[Some(1e-9), Some(5e-9)]));
    assert!(!non_increasing_with_slack(&[Some(1.0), None]));
}

#[test]
fn slope_of_exact_power_law() {
    let pts: Vec<(f64, f64)> = (0..5).map(|i| {
        let dt = 0.1 / 2f64.powi(i);
        (dt, 3.0 * dt.powi(2))
    }).collect();
    assert!((fitted_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(fitted_slope(&pts[..1]), None);
}

fn order_cfg(initial: InitialData, terms: Vec<TermParams>, integrator: Integrator) -> OrderStudyConfig {
    OrderStudyConfig {
        modes: 8,
        initial,
        seed: 0,
        terms,
        mollifier: MollifierKind::Smooth,
        n: 1,
        t_final: 0.2,
        integrator,
        dt_list: vec![0.02, 0.01, 0.005, 0.0025],
        reference: OrderReference::Auto,
        dealias: false,
    }
}

#[test]
fn free_flow_order_sits_on_roundoff_floor() {
    let cfg = order_cfg(
        InitialData::PlaneWave {
            amplitude: 1.0,
            k: [1, 1, 0],
        },
        vec![],
        Integrator::Strang,
    );
    let r = order_study(&cfg).unwrap().result;
    assert_eq!(r.reference, "closed-form");
    assert!(r.roundoff_floor);
    assert_eq!(r.slope, None);
}

#[test]
fn rk4_plane_wave_is_fourth_order() {
    let cfg = order_cfg(
        InitialData::PlaneWave {
            amplitude: 1.5,
            k: [1, 0, 0],
        },
        vec![term(FamilyKind::V1, 2, 1, 1.0)],
        Integrator::Rk4,
    );
    let r = order_study(&cfg).unwrap().result;
    let slope = r.slope.unwrap();
    assert!((slope - 4.0).abs() <= 0.2, "{r:?}");
}

#[test]
fn strang_two_mode_is_second_order() {
    let cfg = order_cfg(two_mode(), vec![term(FamilyKind::V1, 2, 1, 1.0)], Integrator::Strang);
    let r = order_study(&cfg).unwrap().result;
    assert!(r.reference.starts_with("rk4"));
    let slope = r.slope.unwrap();
    assert!((slope - 2.0).abs() <= 0.1, "{r:?}");
}

#[test]
fn gwp_defocusing_quintic_stays_in_energy_envelope() {
    let cfg = GwpStudyConfig {
        modes: 16,
        initial: two_mode(),
        seed: 0,
        initial_h1: None,
        lambda: 0.0,
        lambda2: 1.0,
        mollifier: MollifierKind::BoxAveraged,
        n: 2,
        cubic_mollifier: None,
        t_final: 0.5,
        dt: 5e-3,
        integrator: Integrator::Strang,
        record_stride: 10,
        dealias: false,
    };
    let r = gwp_longtime_study(&cfg).unwrap().result;
    assert_eq!(r.constant, Some(0.0));
    assert_eq!(r.bound_holds, Some(true));
    for rec in &r.records {
        assert!(rec.h1 * rec.h1 <= rec.energy + rec.mass + 1e-12);
    }
    assert!(r.mass_drift <= 1e-11);

    let mut small = cfg.clone();
    small.initial_h1 = Some(1e-2);
    small.lambda = -1.0;
    let r = gwp_longtime_study(&small).unwrap().result;
    assert_eq!(r.bound_holds, Some(true));
    assert!(r.h1_max <= 2.0 * r.h1_initial);
}

#[test]
fn initial_data_validation() {
    let g = Grid::new(8).unwrap();
    let nyquist = InitialData::PlaneWave {
        amplitude: 1.0,
        k: [4, 0, 0],
    };
    assert!(nyquist.build(&g, 0).is_err());
    let random = InitialData::Random { kmax: 2, decay: 1.0 };
    assert_eq!(
        random.build(&g, 9).unwrap().physical(),
        random.build(&g, 9).unwrap().physical()
    );
    assert_ne!(
        random.build(&g, 9).unwrap().physical(),
        random.build(&g, 10).unwrap().physical()
    );
}
