//! Acceptance criteria 1 to 10. Runs without the libtest harness and prints
//! one line per criterion; the process fails if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robin_lab::almost_periodic::{
    asymptotic_periodicity_check, freq_set, frequency_transfer_check, TransferOptions,
};
use robin_lab::degiorgi::{iteration_panel, median, sup_bound_panel, PanelOptions};
use robin_lab::forms::decay_constants;
use robin_lab::mean_spaces::{
    bounded_embedding_check, convolution_bound_check, embedding_check, running_norm,
    signal_lq_norms, window_equivalence_ratio, Kernel,
};
use robin_lab::parabolic::{
    decay_bound_check, exact_growth_exponent, exact_resolvent_1d, geometric_grid,
    mass_balance_defect, resolvent_growth_exponent,
};
use robin_lab::*;

type Outcome = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lab<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn heat(n: usize, coeffs: &CoefficientSet) -> std::result::Result<AssembledSystem, String> {
    lab(assemble(lab(build_interval_mesh(n))?, coeffs, 4))
}

fn relative_resolvent_error(n: usize, lambda: f64) -> std::result::Result<f64, String> {
    let sys = heat(n, &CoefficientSet::laplacian())?;
    let u = lab(solve_resolvent(
        &sys,
        lambda,
        &Field::zero(),
        &Field::from_fn(|x| x[0]),
    ))?
    .u;
    let exact = sys.interpolate(&Field::from_fn(move |x| {
        exact_resolvent_1d(lambda, x[0]).unwrap()
    }));
    let diff: Vec<f64> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
    Ok(sys.l2_norm(&diff) / sys.l2_norm(&exact))
}

fn resolvent_reproduction() -> Outcome {
    let mut worst_err: f64 = 0.0;
    let mut worst_order = f64::INFINITY;
    for lambda in [1.0, 10.0, 100.0] {
        let fine = relative_resolvent_error(512, lambda)?;
        let coarse = relative_resolvent_error(256, lambda)?;
        worst_err = worst_err.max(fine);
        worst_order = worst_order.min((coarse / fine).log2());
    }
    ensure(
        worst_err <= 1e-3 && worst_order >= 1.9,
        format!("max rel L2 error {worst_err:.2e} (<= 1e-3), min order {worst_order:.3} (>= 1.9)"),
    )
}

fn growth_exponent() -> Outcome {
    let lambdas = geometric_grid(1e2, 1e6, 9);
    let exact = lab(exact_growth_exponent(&lambdas))?;
    // h sqrt(lambda_max) = 0.05 resolves the boundary layer.
    let sys = heat(20_000, &CoefficientSet::laplacian())?;
    let discrete = lab(resolvent_growth_exponent(&sys, &lambdas))?;
    ensure(
        (exact.slope - 0.25).abs() <= 0.02
            && (discrete.slope - 0.25).abs() <= 0.04
            && discrete.warning.is_none(),
        format!(
            "exact slope {:.4} (0.25 +- 0.02), discrete slope {:.4} (0.25 +- 0.04)",
            exact.slope, discrete.slope
        ),
    )
}

fn conservation_identity() -> Outcome {
    let sys = heat(64, &CoefficientSet::drift_conserving(1.5))?;
    let condition = check_conservation_condition(&sys);
    let u0 = sys.interpolate(&Field::from_fn(|x| 1.0 + (PI * x[0]).sin()));
    let f = Signal::volume().with(Field::from_fn(|x| x[0] * x[0]), Temporal::cos(5.0));
    let g = Signal::boundary().with(
        Field::from_fn(|x| 1.0 - 2.0 * x[0]),
        Temporal::Decay { rate: 0.5 },
    );
    let traj = lab(solve_parabolic(
        &sys,
        &u0,
        &f,
        &g,
        TimeStepping::new(1.0, 1e-4),
    ))?;
    let defect = lab(mass_balance_defect(&traj, &sys, &f, &g))?;
    ensure(
        condition <= 1e-12 && defect <= 1e-10 && traj.len() == 10_001,
        format!("condition {condition:.1e} (<= 1e-12), mass defect {defect:.1e} over {} steps (<= 1e-10)", traj.len() - 1),
    )
}

fn exponential_decay() -> Outcome {
    let sys = heat(200, &CoefficientSet::laplacian())?;
    let u0 = sys.interpolate(&Field::from_fn(|x| (PI * x[0]).cos()));
    let (f, g) = (Signal::zero(Target::Volume), Signal::zero(Target::Boundary));
    let traj = lab(solve_parabolic(
        &sys,
        &u0,
        &f,
        &g,
        TimeStepping::new(0.2, 1e-4),
    ))?;
    let mut worst: f64 = 0.0;
    for t in [0.05, 0.1, 0.2] {
        let measured = sys.l2_norm(&traj.states[traj.index_near(t)]);
        let exact = (-PI * PI * t).exp() / 2f64.sqrt();
        worst = worst.max((measured - exact).abs() / exact);
    }
    let constants = lab(decay_constants(&sys))?;
    let decay = lab(decay_bound_check(&traj, &sys, &f, &g, constants))?;
    ensure(
        worst <= 0.01 && decay.worst_ratio <= 1.0,
        format!(
            "max rel deviation {worst:.2e} (<= 1e-2), decay bound ratio {:.4} (<= 1, tau = {:.4})",
            decay.worst_ratio, constants.tau
        ),
    )
}

fn convergence_to_mean() -> Outcome {
    let sys = heat(200, &CoefficientSet::laplacian())?;
    let u0 = sys.interpolate(&Field::from_fn(|x| 1.0 + (PI * x[0]).cos()));
    let f = Signal::volume().with(
        Field::from_fn(|x| (PI * x[0]).cos()),
        Temporal::Decay { rate: 3.0 },
    );
    // +1 at x = 0 and -1 at x = 1: zero total flux.
    let g = Signal::boundary().with(
        Field::from_fn(|x| 1.0 - 2.0 * x[0]),
        Temporal::Decay { rate: 3.0 },
    );
    let traj = lab(solve_parabolic(
        &sys,
        &u0,
        &f,
        &g,
        TimeStepping::new(5.0, 1e-3),
    ))?;
    let mean = sys.mean(&u0);
    let dev: Vec<f64> = traj.final_state().iter().map(|v| v - mean).collect();
    let l2 = sys.l2_norm(&dev);
    let max = dev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ensure(
        l2 <= 1e-4 && max <= 1e-3,
        format!("at t = 5: L2 deviation {l2:.2e} (<= 1e-4), nodal max {max:.2e} (<= 1e-3)"),
    )
}

fn frequency_transfer() -> Outcome {
    let eta = 2.0;
    let sys = heat(100, &CoefficientSet::laplacian())?;
    let f = Signal::zero(Target::Volume);
    let g = Signal::boundary().with(Field::from_fn(|x| 2.0 * x[0] - 1.0), Temporal::cos(eta));
    let opts = TransferOptions::default();
    let candidates = [0.0, 1.0, 2f64.sqrt(), eta, -eta, 3.0, 4.0];
    let mut details = Vec::new();
    let mut ok = true;
    for offset in [0.0, 1.0] {
        let u0 = sys.interpolate(&Field::from_fn(move |x| offset + (PI * x[0]).cos()));
        let report = lab(frequency_transfer_check(&sys, &u0, &f, &g, eta, opts))?;
        ok &= report.deviation <= 0.02;

        let period = 2.0 * PI / eta;
        let dt = period / opts.steps_per_period as f64;
        let burn_in = (opts.burn_in / dt).ceil() * dt;
        let traj = lab(solve_parabolic(
            &sys,
            &u0,
            &f,
            &g,
            TimeStepping::new(burn_in + opts.periods * period, dt).theta(opts.theta),
        ))?;
        let start = traj.index_near(burn_in);
        let norm = |v: &[f64]| sys.l2_norm(v);
        let probe = lab(freq_set(
            &traj.times[start..],
            &traj.states[start..],
            &candidates,
            f64::MAX,
            &norm,
        ))?;
        let spec = lab(freq_set(
            &traj.times[start..],
            &traj.states[start..],
            &candidates,
            probe.noise_floor,
            &norm,
        ))?;
        let has_mass = sys.integral(&u0).abs() > 1e-12;
        let expected: Vec<f64> = candidates
            .iter()
            .copied()
            .filter(|c| c.abs() == eta || (*c == 0.0 && has_mass))
            .collect();
        let absent_max = spec
            .entries
            .iter()
            .filter(|e| !expected.contains(&e.eta))
            .map(|e| e.magnitude())
            .fold(0.0, f64::max);
        ok &= spec.frequencies() == expected;
        details.push(format!(
            "mean {offset}: deviation {:.2e} (<= 2e-2), absent max {absent_max:.2e} < floor {:.2e}, Freq {:?}",
            report.deviation,
            spec.noise_floor,
            spec.frequencies()
        ));
    }
    ensure(ok, details.join("; "))
}

fn asymptotic_periodicity() -> Outcome {
    let tau = 1.0;
    let sys = heat(200, &CoefficientSet::robin(1.0))?;
    let u0 = sys.interpolate(&Field::from_fn(|x| (PI * x[0]).cos()));
    let f = Signal::zero(Target::Volume);
    let g = Signal::boundary().with(
        Field::constant(1.0),
        Temporal::Square {
            period: tau,
            duty: 0.5,
        },
    );
    let traj = lab(solve_parabolic(
        &sys,
        &u0,
        &f,
        &g,
        TimeStepping::new(11.0 * tau, tau / 200.0),
    ))?;
    let report = lab(asymptotic_periodicity_check(&traj, &sys, tau))?;
    let d = report.l2_at(10.0 * tau);
    ensure(
        d < 1e-4,
        format!(
            "d(10 tau) = {d:.2e} (< 1e-4), d(0) = {:.2e}",
            report.l2_at(0.0)
        ),
    )
}

fn iteration_lemma() -> Outcome {
    let seed = 2024;
    let reports = lab(iteration_panel(10_000, seed, 60))?;
    let failed = reports.iter().filter(|r| !r.passed).count();
    let min_margin = reports
        .iter()
        .map(|r| r.min_margin)
        .fold(f64::INFINITY, f64::min);
    ensure(
        failed == 0 && reports.len() == 10_000,
        format!(
            "{failed} of {} tuples failed, smallest margin {min_margin:.3e} (seed {seed}, n <= 60)",
            reports.len()
        ),
    )
}

fn sup_norm_panel() -> Outcome {
    let opts = PanelOptions::default();
    let panel = lab(sup_bound_panel(&opts))?;
    let late: Vec<f64> = panel.iter().map(|m| m.late.ratio).collect();
    let global: Vec<f64> = panel
        .iter()
        .filter_map(|m| m.global.map(|g| g.ratio))
        .collect();
    let (late_med, global_med) = (median(&late), median(&global));
    let late_max = late.iter().copied().fold(0.0, f64::max);
    let global_max = global.iter().copied().fold(0.0, f64::max);
    let zero_members = panel.iter().filter(|m| m.zero_initial).count();
    ensure(
        panel.len() == 50
            && late.iter().all(|r| r.is_finite())
            && late_max <= 3.0 * late_med
            && global.len() == zero_members
            && global_max <= 3.0 * global_med,
        format!(
            "late: median {late_med:.3}, max {late_max:.3} (<= {:.3}); global ({} members): median {global_med:.3}, max {global_max:.3} (<= {:.3}); seed {}",
            3.0 * late_med,
            global.len(),
            3.0 * global_med,
            opts.seed
        ),
    )
}

fn random_signal(rng: &mut ChaCha8Rng, family: usize) -> Signal {
    let amp = rng.gen_range(0.2..3.0);
    let k = rng.gen_range(1..4) as f64;
    match family {
        0 => Signal::volume().with(Field::constant(amp), Temporal::Constant),
        1 => {
            let rate = rng.gen_range(0.1..2.0);
            Signal::volume().with(
                Field::from_fn(move |x| amp * (1.0 + x[0])),
                Temporal::Decay { rate },
            )
        }
        2 => {
            let freq = rng.gen_range(0.5..6.0);
            Signal::volume().with(
                Field::from_fn(move |x| amp * (k * PI * x[0]).cos()),
                Temporal::cos(freq),
            )
        }
        3 => {
            let start = rng.gen_range(0.0..6.0);
            let end = start + rng.gen_range(0.3..4.0);
            Signal::volume().with(
                Field::from_fn(move |x| amp * x[0] * x[0]),
                Temporal::Window { start, end },
            )
        }
        _ => {
            let (fa, fb) = (rng.gen_range(0..4), rng.gen_range(0..4));
            let a = random_signal(rng, fa);
            let b = random_signal(rng, fb);
            a.plus(&b).expect("same target")
        }
    }
}

fn mean_space_inequalities() -> Outcome {
    let seed = 11;
    let sys = heat(32, &CoefficientSet::laplacian())?;
    let horizon = 12.0;
    let n = 1200;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * horizon / n as f64).collect();
    let (short, long) = (1.0, 2.5);
    let grid: Vec<f64> = times
        .iter()
        .copied()
        .filter(|t| *t + long <= horizon + 1e-9)
        .collect();
    let kernels = [lab(Kernel::exponential(0.7))?, lab(Kernel::indicator(1.5))?];
    let mut failures = Vec::new();
    let mut worst = [0.0f64; 4];
    for i in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let signal = random_signal(&mut rng, i % 5);
        let n2 = signal_lq_norms(&sys, &signal, 2.0, &times);
        let n4 = signal_lq_norms(&sys, &signal, 4.0, &times);
        let low = lab(running_norm(&times, &n2, 2.0, 2.0, short, &grid))?;
        let high = lab(running_norm(&times, &n4, 4.0, 4.0, short, &grid))?;
        let wide = lab(running_norm(&times, &n2, 2.0, 2.0, long, &grid))?;

        let w = lab(window_equivalence_ratio(&low, &wide))?;
        let e = lab(embedding_check(&low, &high, sys.mesh().domain_measure()))?;
        let b = bounded_embedding_check(&high);
        let ratio = |lhs: f64, rhs: f64| if rhs > 0.0 { lhs / rhs } else { 0.0 };
        worst[0] = worst[0].max(w.ratio / w.bound);
        worst[1] = worst[1].max(ratio(e.lhs, e.rhs));
        worst[2] = worst[2].max(ratio(b.lhs, b.rhs));
        let mut ok = w.ratio <= w.bound && e.holds(1e-9) && b.holds(1e-9);
        for kernel in &kernels {
            let c = convolution_bound_check(&low, kernel);
            worst[3] = worst[3].max(ratio(c.max_lhs(), c.rhs));
            ok &= c.holds(1e-9);
        }
        if !ok {
            failures.push(i);
        }
    }
    ensure(
        failures.is_empty(),
        format!(
            "100 signals (seed {seed}), failing {failures:?}; worst ratios: window {:.3}, embedding {:.3}, bounded {:.3}, convolution {:.3}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "resolvent reproduction",
            resolvent_reproduction,
            Duration::from_secs(5),
        ),
        ("growth exponent", growth_exponent, Duration::from_secs(30)),
        (
            "conservation identity",
            conservation_identity,
            Duration::from_secs(10),
        ),
        (
            "exponential decay",
            exponential_decay,
            Duration::from_secs(60),
        ),
        (
            "convergence to the mean",
            convergence_to_mean,
            Duration::from_secs(60),
        ),
        (
            "frequency transfer",
            frequency_transfer,
            Duration::from_secs(180),
        ),
        (
            "asymptotic periodicity",
            asymptotic_periodicity,
            Duration::from_secs(120),
        ),
        ("iteration lemma", iteration_lemma, Duration::from_secs(30)),
        ("sup-norm panel", sup_norm_panel, Duration::from_secs(600)),
        (
            "mean-space inequalities",
            mean_space_inequalities,
            Duration::from_secs(10),
        ),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed < *limit;
        let (ok, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {detail} [{:.2}s, limit {}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
