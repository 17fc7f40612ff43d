use std::f64::consts::PI;

use proptest::prelude::*;
use robin_lab::almost_periodic::cesaro_limit;
use robin_lab::degiorgi::{iteration_lemma_verify, level_slice, IterationParams, Start};
use robin_lab::mean_spaces::{
    bounded_embedding_check, embedding_check, m_norm, running_norm, sample_profile,
};
use robin_lab::parabolic::mass_balance_defect;
use robin_lab::signal::MassKind;
use robin_lab::*;

fn interval_system(n: usize, coeffs: &CoefficientSet) -> AssembledSystem {
    assemble(build_interval_mesh(n).unwrap(), coeffs, 4).unwrap()
}

fn square() -> Mesh {
    build_polygon_mesh(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], 0.25).unwrap()
}

fn random_coefficients(a: f64, slope: f64, b: f64, c: f64, d: f64, beta: f64) -> CoefficientSet {
    let mut k = CoefficientSet::laplacian();
    k.diffusion[0][0] = Field::from_fn(move |x| a + slope * x[0]);
    k.diffusion[1][1] = Field::constant(a);
    k.conormal_drift[0] = Field::constant(b);
    k.advection[0] = Field::from_fn(move |x| c * x[1]);
    k.reaction = Field::constant(d);
    k.robin = BoundaryField::constant(beta);
    k.ellipticity = a;
    k
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn interval_refinement_halves_h(n in 1usize..400) {
        let mesh = build_interval_mesh(n).unwrap();
        let fine = mesh.refine();
        let half = 0.5 * mesh.h();
        // Coordinates are rounded at the scale of the domain length 1.
        prop_assert!((fine.h() - half).abs() <= 4.0 * f64::EPSILON);
        let total: f64 = (0..fine.n_cells()).map(|c| fine.cell_measure(c)).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rectangle_meshes_are_consistent(w in 0.3f64..3.0, hgt in 0.3f64..3.0, target in 0.15f64..0.6) {
        let poly = [[0.0, 0.0], [w, 0.0], [w, hgt], [0.0, hgt]];
        let mesh = build_polygon_mesh(&poly, target).unwrap();
        prop_assert!((mesh.domain_measure() - w * hgt).abs() < 1e-10);
        prop_assert!((mesh.boundary_measure() - 2.0 * (w + hgt)).abs() < 1e-10);
        for (f, facet) in mesh.boundary_facets().iter().enumerate() {
            let n = mesh.normals()[f];
            prop_assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-12);
            let (a, b) = (mesh.vertices()[facet.vertices[0]], mesh.vertices()[facet.vertices[1]]);
            prop_assert!((n[0] * (b[0] - a[0]) + n[1] * (b[1] - a[1])).abs() < 1e-12);
            let c = mesh.cell_centroid(facet.cell);
            prop_assert!(n[0] * (a[0] - c[0]) + n[1] * (a[1] - c[1]) > 0.0);
            for p in [a, b] {
                let on_edge = p[0].abs() < 1e-12 || (p[0] - w).abs() < 1e-12
                    || p[1].abs() < 1e-12 || (p[1] - hgt).abs() < 1e-12;
                prop_assert!(on_edge);
            }
        }
    }

    #[test]
    fn assembly_is_linear_in_coefficients(
        a in 0.5f64..2.0, s in 0.0f64..0.4, b in -1.0f64..1.0, c in -1.0f64..1.0,
        d in 0.0f64..2.0, beta in 0.0f64..2.0,
        a2 in 0.5f64..2.0, b2 in -1.0f64..1.0, d2 in 0.0f64..2.0, beta2 in 0.0f64..2.0,
    ) {
        let mesh = std::sync::Arc::new(square());
        let k1 = random_coefficients(a, s, b, c, d, beta);
        let k2 = random_coefficients(a2, 0.0, b2, 0.0, d2, beta2);
        let s1 = assemble(mesh.clone(), &k1, 4).unwrap();
        let s2 = assemble(mesh.clone(), &k2, 4).unwrap();
        let s12 = assemble(mesh, &k1.sum(&k2), 4).unwrap();
        let diff = s12.stiffness.add_scaled(1.0, &s1.stiffness.add_scaled(1.0, &s2.stiffness, 1.0), -1.0);
        prop_assert!(diff.max_abs() < 1e-12 * s12.stiffness.max_abs().max(1.0));
    }

    #[test]
    fn balanced_drift_gives_symmetric_stiffness(gamma in -2.0f64..2.0, d in -1.0f64..2.0, beta in -1.0f64..2.0) {
        let mut k = CoefficientSet::laplacian();
        k.conormal_drift = [Field::constant(gamma), Field::constant(0.5 * gamma)];
        k.advection = k.conormal_drift.clone();
        k.reaction = Field::constant(d);
        k.robin = BoundaryField::constant(beta);
        let sys = assemble(square(), &k, 4).unwrap();
        prop_assert!(sys.stiffness.asymmetry() < 1e-12);
    }

    #[test]
    fn no_drift_form_dominates_dirichlet_energy(
        a in 0.5f64..3.0, d in 0.0f64..2.0, beta in 0.0f64..2.0,
        u in prop::collection::vec(-5.0f64..5.0, 33),
    ) {
        let k = random_coefficients(a, 0.0, 0.0, 0.0, d, beta);
        let sys = interval_system(32, &k);
        let lhs = sys.form(&u, &u);
        let rhs = sys.mu() * sys.h1_seminorm(&u).powi(2);
        prop_assert!(lhs >= rhs - 1e-10 * rhs.max(1.0));
    }

    #[test]
    fn solutions_superpose(
        u in prop::collection::vec(-1.0f64..1.0, 17),
        v in prop::collection::vec(-1.0f64..1.0, 17),
        fa in -2.0f64..2.0, ga in -2.0f64..2.0, freq in 0.5f64..6.0,
    ) {
        let sys = interval_system(16, &CoefficientSet::robin(0.5));
        let f1 = Signal::volume().with(Field::from_fn(|x| x[0]), Temporal::cos(freq));
        let g1 = Signal::boundary().with(Field::constant(ga), Temporal::Decay { rate: 1.0 });
        let f2 = Signal::volume().with(Field::constant(fa), Temporal::Constant);
        let g2 = Signal::boundary().with(Field::from_fn(|x| 1.0 - x[0]), Temporal::sin(2.0));
        let opts = TimeStepping::new(0.5, 0.01);
        let a = solve_parabolic(&sys, &u, &f1, &g1, opts).unwrap();
        let b = solve_parabolic(&sys, &v, &f2, &g2, opts).unwrap();
        let uv: Vec<f64> = u.iter().zip(&v).map(|(p, q)| p + q).collect();
        let c = solve_parabolic(&sys, &uv, &f1.plus(&f2).unwrap(), &g1.plus(&g2).unwrap(), opts).unwrap();
        for ((x, y), z) in a.states.iter().zip(&b.states).zip(&c.states) {
            for i in 0..x.len() {
                prop_assert!((x[i] + y[i] - z[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn conserving_drift_keeps_mass_balance(gamma in -3.0f64..3.0, amp in -2.0f64..2.0) {
        let sys = interval_system(32, &CoefficientSet::drift_conserving(gamma));
        prop_assert!(check_conservation_condition(&sys) <= 1e-10);
        let u0 = sys.interpolate(&Field::from_fn(|x| (PI * x[0]).sin()));
        let f = Signal::volume().with(Field::constant(amp), Temporal::cos(3.0));
        let g = Signal::boundary().with(Field::from_fn(|x| x[0]), Temporal::Decay { rate: 2.0 });
        let traj = solve_parabolic(&sys, &u0, &f, &g, TimeStepping::new(1.0, 0.005)).unwrap();
        prop_assert!(mass_balance_defect(&traj, &sys, &f, &g).unwrap() < 1e-10);
    }

    #[test]
    fn nonnegative_data_stay_nonnegative(
        u in prop::collection::vec(0.0f64..1.0, 41),
        fa in 0.0f64..2.0, ga in 0.0f64..2.0, beta in 0.0f64..2.0,
    ) {
        let sys = interval_system(40, &CoefficientSet::robin(beta));
        let f = Signal::volume().with(Field::from_fn(move |x| fa * x[0]), Temporal::Constant);
        let g = Signal::boundary().with(Field::constant(ga), Temporal::Window { start: 0.1, end: 0.3 });
        let traj = solve_parabolic(&sys, &u, &f, &g, TimeStepping::new(0.5, 1e-3).lumped()).unwrap();
        prop_assert!(traj.min_value() >= -1e-14);
    }

    #[test]
    fn resolvent_is_fixed_point_of_implicit_step(lambda in 0.5f64..50.0, fa in -2.0f64..2.0, ga in -2.0f64..2.0, dt in 1e-3f64..0.5) {
        let sys = interval_system(24, &CoefficientSet::laplacian());
        let f = Field::from_fn(move |x| fa * (2.0 * x[0]).cos());
        let g = Field::constant(ga);
        let r = solve_resolvent(&sys, lambda, &f, &g).unwrap();
        // u_t = Au - lambda u + (f, g): assemble the shifted operator.
        let shifted = interval_system(24, &CoefficientSet::reaction(lambda));
        let step = solve_parabolic(
            &shifted,
            &r.u,
            &Signal::steady(Target::Volume, f),
            &Signal::steady(Target::Boundary, g),
            TimeStepping::new(dt, dt),
        )
        .unwrap();
        let scale = r.u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in step.final_state().iter().zip(&r.u) {
            prop_assert!((a - b).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn smaller_exponents_embed(r in 1.5f64..6.0, dr in 0.0f64..3.0, q in 1.5f64..6.0, dq in 0.0f64..3.0, rate in 0.0f64..2.0, freq in 0.5f64..5.0) {
        let sys = interval_system(16, &CoefficientSet::laplacian());
        let sig = Signal::volume()
            .with(Field::from_fn(|x| 1.0 + x[0]), Temporal::Decay { rate })
            .with(Field::from_fn(|x| x[0] * x[0]), Temporal::cos(freq));
        let (times, _) = sample_profile(|_| 0.0, 6.0, 0.02);
        let window = 1.0;
        let grid: Vec<f64> = times.iter().copied().filter(|t| *t <= 5.0 + 1e-9).collect();
        let build = |r: f64, q: f64| {
            let norms = robin_lab::mean_spaces::signal_lq_norms(&sys, &sig, q, &times);
            running_norm(&times, &norms, r, q, window, &grid).unwrap()
        };
        let high = build(r + dr, q + dq);
        let low = build(r, q);
        prop_assert!(embedding_check(&low, &high, 1.0).unwrap().holds(1e-9));
        prop_assert!(bounded_embedding_check(&high).holds(1e-9));
    }

    #[test]
    fn m_norm_is_subadditive(a in 0.0f64..3.0, b in 0.0f64..3.0, w1 in 0.5f64..4.0, w2 in 0.5f64..4.0, r in 1.0f64..5.0) {
        let (times, na) = sample_profile(|t| a * (-t).exp() + (w1 * t).sin().abs(), 8.0, 0.01);
        let (_, nb) = sample_profile(|t| b / (1.0 + t) + (w2 * t).cos().abs(), 8.0, 0.01);
        let ns: Vec<f64> = na.iter().zip(&nb).map(|(x, y)| x + y).collect();
        let grid: Vec<f64> = times.iter().copied().filter(|t| *t <= 6.0 + 1e-9).collect();
        let m = |n: &[f64]| m_norm(&running_norm(&times, n, r, 2.0, 2.0, &grid).unwrap());
        prop_assert!(m(&ns) <= (m(&na) + m(&nb)) * (1.0 + 1e-9));
    }

    #[test]
    fn running_norm_is_continuous(freq in 0.5f64..5.0, r in 1.0f64..4.0) {
        let coarse = |step: f64| {
            let (times, n) = sample_profile(|t| 1.0 + (freq * t).sin(), 6.0, step);
            let p = running_norm(&times, &n, r, 2.0, 1.0, &[2.0, 2.0 + step]).unwrap();
            (p.values[0] - p.values[1]).abs()
        };
        let (a, b) = (coarse(0.01), coarse(0.001));
        prop_assert!(b <= a + 1e-12);
        prop_assert!(b < 0.01);
    }

    #[test]
    fn cesaro_is_linear(e1 in 0.5f64..4.0, e2 in 0.5f64..4.0, eta in 0.0f64..4.0, s in -3.0f64..3.0) {
        let times: Vec<f64> = (0..=4000).map(|k| k as f64 * 0.01).collect();
        let a: Vec<Vec<f64>> = times.iter().map(|t| vec![(e1 * t).cos(), 1.0]).collect();
        let b: Vec<Vec<f64>> = times.iter().map(|t| vec![(e2 * t).sin(), t.cos()]).collect();
        let ab: Vec<Vec<f64>> = a.iter().zip(&b).map(|(x, y)| vec![x[0] + s * y[0], x[1] + s * y[1]]).collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let ca = cesaro_limit(&times, &a, eta, &norm).unwrap();
        let cb = cesaro_limit(&times, &b, eta, &norm).unwrap();
        let cab = cesaro_limit(&times, &ab, eta, &norm).unwrap();
        for i in 0..2 {
            prop_assert!((cab.value[i] - (ca.value[i] + cb.value[i] * s)).norm() < 1e-12);
        }
    }

    #[test]
    fn characters_are_nearly_orthogonal(eta in 0.5f64..5.0, gap in 0.2f64..3.0, x0 in -3.0f64..3.0) {
        let other = eta + gap;
        let t_avg = 40.0;
        let n = 8000;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * t_avg / n as f64).collect();
        let samples: Vec<Vec<f64>> = times.iter().map(|t| vec![x0 * (other * t).cos()]).collect();
        let c = cesaro_limit(&times, &samples, eta, &|v: &[f64]| v[0].abs()).unwrap();
        // cos = (e_{i other} + e_{-i other}) / 2
        let bound = x0.abs() * (1.0 / (gap * t_avg) + 1.0 / ((eta + other) * t_avg));
        prop_assert!(c.value[0].norm() <= bound * (1.0 + 1e-3));
    }

    #[test]
    fn saturated_recurrence_is_monotone(
        c in 0.1f64..10.0, b in 1.0f64..8.0, eps in 0.1f64..3.0, delta in 0.1f64..3.0,
        s1 in 0.0f64..1.0, s2 in 0.0f64..1.0, t in 0.0f64..1.0,
    ) {
        let p = IterationParams::new(c, b, eps, delta).unwrap();
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let a = iteration_lemma_verify(&p, Start::Bound(lo), Start::Bound(t), 40).unwrap();
        let z = iteration_lemma_verify(&p, Start::Bound(hi), Start::Bound(t), 40).unwrap();
        let w = iteration_lemma_verify(&p, Start::Bound(lo), Start::Bound(t.max(hi)), 40).unwrap();
        for n in 0..=40 {
            // Larger y_n means a smaller margin.
            prop_assert!(z.margins_y[n] <= a.margins_y[n] + 1e-20 * (1.0 + a.margins_y[n].abs()));
            prop_assert!(w.margins_y[n] <= a.margins_y[n] + 1e-20 * (1.0 + a.margins_y[n].abs()));
        }
        prop_assert!(a.passed && z.passed && w.passed);
    }

    #[test]
    fn lambda_is_positive(c in 0.1f64..10.0, b in 1.0f64..8.0, eps in 0.1f64..3.0, delta in 0.1f64..3.0) {
        let p = IterationParams::new(c, b, eps, delta).unwrap();
        let d = p.d();
        let direct = ((2.0 * c).powf(-1.0 / delta) * b.powf(-1.0 / (delta * d)))
            .min((2.0 * c).powf(-(1.0 + eps) / eps) * b.powf(-1.0 / (eps * d)));
        prop_assert!(p.lambda() > 0.0);
        prop_assert!((p.lambda() - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn layer_cake_on_random_p1(vals in prop::collection::vec(-2.0f64..2.0, 21), k in -1.0f64..1.0) {
        let mesh = build_interval_mesh(20).unwrap();
        let direct = level_slice(&mesh, &vals, k).l2;
        let top = vals.iter().copied().fold(f64::MIN, f64::max);
        let mut cake = 0.0;
        if top > k {
            let n = 2000;
            let ds = (top - k) / n as f64;
            for i in 0..n {
                let s = k + (i as f64 + 0.5) * ds;
                cake += 2.0 * (s - k) * level_slice(&mesh, &vals, s).volume * ds;
            }
        }
        prop_assert!((cake - direct).abs() <= 0.01 * direct + 1e-12);
    }

    #[test]
    fn level_measures_decrease_in_k(vals in prop::collection::vec(-2.0f64..2.0, 25), k in -2.0f64..2.0, dk in 0.0f64..1.0) {
        let sq = square();
        let u: Vec<f64> = (0..sq.n_vertices()).map(|i| vals[i % vals.len()]).collect();
        let a = level_slice(&sq, &u, k);
        let b = level_slice(&sq, &u, k + dk);
        prop_assert!(b.volume <= a.volume + 1e-14 && a.volume <= 1.0 + 1e-12);
        prop_assert!(b.boundary <= a.boundary + 1e-14 && a.boundary <= 4.0 + 1e-12);
        prop_assert!(b.l2 <= a.l2 + 1e-14 && b.gradient <= a.gradient + 1e-12);
    }
}

#[test]
fn lumped_mass_matches_consistent_totals() {
    let sys = assemble(square(), &CoefficientSet::laplacian(), 4).unwrap();
    let u = sys.interpolate(&Field::from_fn(|x| x[0] * x[1] + 1.0));
    let consistent: f64 = sys.mass.mul_vec(&u).iter().sum();
    let lumped: f64 = u.iter().zip(&sys.lumped_mass).map(|(a, m)| a * m).sum();
    assert!((consistent - lumped).abs() < 1e-12);
    assert_eq!(MassKind::default(), MassKind::Consistent);
}
