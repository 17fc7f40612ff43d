use robin_lab::degiorgi::*;
use robin_lab::*;

fn heat(n: usize) -> AssembledSystem {
    assemble(
        build_interval_mesh(n).unwrap(),
        &CoefficientSet::laplacian(),
        4,
    )
    .unwrap()
}

fn no_volume() -> Signal {
    Signal::zero(Target::Volume)
}

fn no_boundary() -> Signal {
    Signal::zero(Target::Boundary)
}

fn right_flux() -> Signal {
    Signal::boundary().with(Field::from_fn(|x| x[0]), Temporal::Constant)
}

#[test]
fn level_sets_of_constant_state() {
    let sys = heat(16);
    let u0 = vec![2.0; sys.ndof()];
    let traj = solve_parabolic(
        &sys,
        &u0,
        &no_volume(),
        &no_boundary(),
        TimeStepping::new(0.1, 0.01),
    )
    .unwrap();
    let below = level_sets(&traj, 1.5, 0.05).unwrap();
    assert!(below.volume.iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert!(below.boundary.iter().all(|v| *v == 2.0));
    assert!(below.warning.is_some());
    let at = level_sets(&traj, 2.0 + 1e-9, 0.05).unwrap();
    assert!(at.volume.iter().all(|v| *v == 0.0));
    assert_eq!(at.q_norm_sq, 0.0);
    assert!(level_sets(&traj, 1.0, 0.5).is_err());
}

#[test]
fn level_measures_are_monotone_in_k() {
    let sys = heat(64);
    let u0 = sys.interpolate(&Field::from_fn(|x| (3.0 * x[0]).cos()));
    let traj = solve_parabolic(
        &sys,
        &u0,
        &no_volume(),
        &right_flux(),
        TimeStepping::new(0.5, 0.005),
    )
    .unwrap();
    let mut prev: Option<LevelSetProfile> = None;
    for i in 0..20 {
        let k = -1.0 + 0.15 * i as f64;
        let p = level_sets(&traj, k, 0.2).unwrap();
        for (v, b) in p.volume.iter().zip(&p.boundary) {
            assert!(*v <= 1.0 + 1e-12 && *b <= 2.0);
        }
        if let Some(q) = prev {
            for (a, b) in q.volume.iter().zip(&p.volume) {
                assert!(b <= &(a + 1e-14));
            }
            assert!(p.q_norm_sq <= q.q_norm_sq + 1e-14);
        }
        prev = Some(p);
    }
}

#[test]
fn zero_forcing_below_level_needs_no_constant() {
    let sys = heat(32);
    let u0 = sys.interpolate(&Field::from_fn(|x| {
        0.5 * (std::f64::consts::PI * x[0]).cos()
    }));
    let traj = solve_parabolic(
        &sys,
        &u0,
        &no_volume(),
        &no_boundary(),
        TimeStepping::new(1.0, 0.01),
    )
    .unwrap();
    let r = caccioppoli_check(
        &sys,
        &traj,
        &no_volume(),
        &no_boundary(),
        1.0,
        0.5,
        0.25,
        &Exponents::default(),
    )
    .unwrap();
    assert_eq!(r.k_hat, 0.0);
    assert_eq!(r.lhs, 0.0);
    assert_eq!(r.gamma_required, 0.0);
}

#[test]
fn boundary_heating_constant_stays_bounded() {
    let sys = heat(128);
    let g = right_flux();
    let u0 = vec![0.0; sys.ndof()];
    let traj = solve_parabolic(
        &sys,
        &u0,
        &no_volume(),
        &g,
        TimeStepping::new(1.0, 1.0 / 400.0),
    )
    .unwrap();
    let exps = Exponents::default();
    let mut worst: f64 = 0.0;
    for factor in [1.0, 2.0, 4.0] {
        for tau in [0.25, 0.5, 1.0] {
            for sigma in [0.1, 0.25, 0.45] {
                let kh = k_hat(&sys, &traj.times, &no_volume(), &g, &exps);
                let r = caccioppoli_check(
                    &sys,
                    &traj,
                    &no_volume(),
                    &g,
                    factor * kh,
                    tau,
                    sigma,
                    &exps,
                )
                .unwrap();
                assert!(r.gamma_required.is_finite());
                worst = worst.max(r.gamma_required);
            }
        }
    }
    assert!(worst > 0.0 && worst < 1.0, "worst gamma {worst}");
}

#[test]
fn caccioppoli_is_homogeneous() {
    let sys = heat(64);
    let f = Signal::volume().with(Field::from_fn(|x| 1.0 + x[0]), Temporal::cos(3.0));
    let g = right_flux();
    let u0 = sys.interpolate(&Field::from_fn(|x| 0.3 + x[0] * x[0]));
    let opts = TimeStepping::new(1.0, 0.005);
    let exps = Exponents::default();
    let one = solve_parabolic(&sys, &u0, &f, &g, opts).unwrap();
    let two_u0: Vec<f64> = u0.iter().map(|v| 2.0 * v).collect();
    let two = solve_parabolic(&sys, &two_u0, &f.scaled(2.0), &g.scaled(2.0), opts).unwrap();
    let k = 1.05 * k_hat(&sys, &one.times, &f, &g, &exps);
    let a = caccioppoli_check(&sys, &one, &f, &g, k, 0.5, 0.25, &exps).unwrap();
    let b = caccioppoli_check(
        &sys,
        &two,
        &f.scaled(2.0),
        &g.scaled(2.0),
        2.0 * k,
        0.5,
        0.25,
        &exps,
    )
    .unwrap();
    assert!(a.gamma_required > 0.0);
    assert!((b.gamma_required / a.gamma_required - 1.0).abs() < 1e-10);
}

#[test]
fn caccioppoli_rejects_bad_input() {
    let sys = heat(16);
    let g = right_flux();
    let u0 = vec![0.0; sys.ndof()];
    let traj = solve_parabolic(&sys, &u0, &no_volume(), &g, TimeStepping::new(0.5, 0.01)).unwrap();
    let exps = Exponents::default();
    assert!(caccioppoli_check(&sys, &traj, &no_volume(), &g, 0.1, 0.5, 0.25, &exps).is_err());
    assert!(caccioppoli_check(&sys, &traj, &no_volume(), &g, 5.0, 0.5, 0.5, &exps).is_err());
    let bad = Exponents { r2: 2.0, ..exps };
    assert!(caccioppoli_check(&sys, &traj, &no_volume(), &g, 5.0, 0.5, 0.25, &bad).is_err());
}

#[test]
fn zero_data_ratio_is_zero() {
    let sys = heat(16);
    let u0 = vec![0.0; sys.ndof()];
    let traj = solve_parabolic(
        &sys,
        &u0,
        &no_volume(),
        &no_boundary(),
        TimeStepping::new(1.0, 0.1),
    )
    .unwrap();
    for w in [SupWindow::Late, SupWindow::Global] {
        let s = sup_bound_check(
            &sys,
            &traj,
            &no_volume(),
            &no_boundary(),
            &Exponents::default(),
            w,
        )
        .unwrap();
        assert_eq!(s.ratio, 0.0);
    }
}

#[test]
fn unbounded_initial_value_gives_finite_late_sup() {
    let opts = PanelOptions::default();
    let panel = sup_bound_panel(&opts).unwrap();
    let ratios: Vec<f64> = panel.iter().map(|m| m.late.ratio).collect();
    let bound = 3.0 * median(&ratios);

    let sys = heat(opts.cells);
    // x^{-1/4} is square integrable but unbounded; its L2 projection is
    // finite at the nodes and large near 0.
    let u0 = sys.project(&Field::from_fn(|x| x[0].powf(-0.25))).unwrap();
    assert!(u0[0] > 2.0);
    let traj = solve_parabolic(
        &sys,
        &u0,
        &no_volume(),
        &no_boundary(),
        TimeStepping::new(opts.t_end, opts.dt),
    )
    .unwrap();
    let s = sup_bound_check(
        &sys,
        &traj,
        &no_volume(),
        &no_boundary(),
        &Exponents::default(),
        SupWindow::Late,
    )
    .unwrap();
    assert!(s.sup_norm.is_finite() && s.sup_norm < u0[0]);
    assert!(s.ratio <= bound, "{} > {bound}", s.ratio);
    assert!(sup_bound_check(
        &sys,
        &traj,
        &no_volume(),
        &no_boundary(),
        &Exponents::default(),
        SupWindow::Global
    )
    .is_err());
}

#[test]
fn global_variant_for_zero_start() {
    let sys = heat(64);
    let g = Signal::boundary().with(Field::constant(1.0), Temporal::cos(4.0));
    let f = Signal::volume().with(Field::from_fn(|x| x[0]), Temporal::Decay { rate: 1.0 });
    let u0 = vec![0.0; sys.ndof()];
    let traj = solve_parabolic(&sys, &u0, &f, &g, TimeStepping::new(1.0, 0.0025)).unwrap();
    let exps = Exponents::default();
    let late = sup_bound_check(&sys, &traj, &f, &g, &exps, SupWindow::Late).unwrap();
    let global = sup_bound_check(&sys, &traj, &f, &g, &exps, SupWindow::Global).unwrap();
    assert!(global.sup_norm >= late.sup_norm);
    assert_eq!(global.rhs, late.rhs);
    assert!(global.ratio.is_finite() && global.ratio < 2.0);
}

#[test]
fn panel_is_reproducible() {
    let opts = PanelOptions {
        count: 6,
        ..PanelOptions::default()
    };
    let a = sup_bound_panel(&opts).unwrap();
    let b = sup_bound_panel(&opts).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.late, y.late);
        assert_eq!(x.coefficients, y.coefficients);
        assert_eq!(x.zero_initial, x.index % 2 == 1);
        assert_eq!(x.global.is_some(), x.zero_initial);
    }
}

#[test]
fn aniso_constant_for_constant_function() {
    let sys = heat(16);
    let tau = 0.5;
    let k = 3.0;
    let u0 = vec![k; sys.ndof()];
    let traj = solve_parabolic(
        &sys,
        &u0,
        &no_volume(),
        &no_boundary(),
        TimeStepping::new(tau, 0.01),
    )
    .unwrap();
    let zero = solve_parabolic(
        &sys,
        &vec![0.0; sys.ndof()],
        &no_volume(),
        &no_boundary(),
        TimeStepping::new(tau, 0.01),
    )
    .unwrap();
    let exps = AnisoExponents {
        r1: 8.0,
        q1: 4.0,
        r2: 4.0,
        q2: 2.0,
    };
    let est = aniso_embedding_estimate(&sys, &exps, &[traj, zero]).unwrap();
    // |Omega| = 1 and two boundary points:
    // (tau^{1/r1} + tau^{1/r2} 2^{1/q2}) k / k.
    let expected = tau.powf(1.0 / 8.0) + tau.powf(0.25) * 2f64.sqrt();
    assert!(
        (est.constant - expected).abs() < 1e-10,
        "{} vs {expected}",
        est.constant
    );
    assert!(est.ratios[1].is_none());
}

#[test]
fn aniso_ratio_stable_under_refinement() {
    let exps = AnisoExponents {
        r1: 8.0,
        q1: 4.0,
        r2: 4.0,
        q2: 2.0,
    };
    let ratio = |n: usize| {
        let sys = heat(n);
        let u0 = sys.interpolate(&Field::from_fn(|x| (std::f64::consts::PI * x[0]).cos()));
        let traj = solve_parabolic(
            &sys,
            &u0,
            &no_volume(),
            &no_boundary(),
            TimeStepping::new(0.2, 2e-4),
        )
        .unwrap();
        aniso_embedding_estimate(&sys, &exps, &[traj])
            .unwrap()
            .constant
    };
    let (a, b) = (ratio(64), ratio(128));
    assert!(a.is_finite() && (a - b).abs() < 0.01 * b, "{a} {b}");
    assert!(aniso_embedding_estimate(&heat(8), &AnisoExponents { r1: 4.0, ..exps }, &[]).is_err());
}
