//! Resolvent and time-dependent solves, with the identities their
//! solutions satisfy.

use std::io::Write;
use std::sync::Arc;

use crate::coefficients::Field;
use crate::error::{LabError, Result};
use crate::forms::{AssembledSystem, DecayConstants};
use crate::linalg::{norm2, CsrMatrix, Factorization};
use crate::mesh::Mesh;
use crate::signal::{DiscreteSignal, MassKind, Signal, Target};

/// Discrete solution of `(lambda - A) u = (f, g)`.
#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub lambda: f64,
    pub u: Vec<f64>,
    /// Relative residual of the linear solve.
    pub residual: f64,
}

/// Solves `(lambda M + K) u = M f_h + Mb g_h`.
///
/// A singular or numerically singular system is reported as an error.
pub fn solve_resolvent(
    system: &AssembledSystem,
    lambda: f64,
    f: &Field,
    g: &Field,
) -> Result<ResolventSolution> {
    let mut rhs = system.mass.mul_vec(&system.interpolate(f));
    let gb = system.boundary_mass.mul_vec(&system.interpolate(g));
    crate::linalg::axpy(1.0, &gb, &mut rhs);
    solve_resolvent_rhs(system, lambda, &rhs)
}

/// Resolvent solve for an already assembled right-hand side.
pub fn solve_resolvent_rhs(
    system: &AssembledSystem,
    lambda: f64,
    rhs: &[f64],
) -> Result<ResolventSolution> {
    if !lambda.is_finite() {
        return Err(LabError::input("lambda", "must be finite"));
    }
    let a = system.stiffness.add_scaled(1.0, &system.mass, lambda);
    let u = Factorization::new(&a)?.solve(rhs)?;
    let au = a.mul_vec(&u);
    let r: Vec<f64> = au.iter().zip(rhs).map(|(p, q)| p - q).collect();
    let scale = norm2(rhs);
    let residual = if scale > 0.0 {
        norm2(&r) / scale
    } else {
        norm2(&r)
    };
    if !residual.is_finite() || residual > 1e-8 {
        return Err(LabError::SingularSystem(format!(
            "resolvent at lambda = {lambda} has relative residual {residual:.2e}"
        )));
    }
    Ok(ResolventSolution {
        lambda,
        u,
        residual,
    })
}

/// Closed-form solution of `lambda u - u'' = 0` on `(0, 1)` with
/// `-u'(0) = 0`, `u'(1) = 1`.
///
/// Evaluated as `(e^{s(x-1)} + e^{-s(x+1)}) / (s (1 - e^{-2s}))` with
/// `s = sqrt(lambda)`, which does not overflow for large `lambda`.
pub fn exact_resolvent_1d(lambda: f64, x: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(LabError::input("lambda", "must be positive"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(LabError::input("x", "must lie in [0, 1]"));
    }
    let s = lambda.sqrt();
    Ok(((s * (x - 1.0)).exp() + (-s * (x + 1.0)).exp()) / (s * -(-2.0 * s).exp_m1()))
}

/// `L2(0, 1)` norm of [`exact_resolvent_1d`].
pub fn exact_resolvent_norm_1d(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(LabError::input("lambda", "must be positive"));
    }
    let s = lambda.sqrt();
    let sinh = s.sinh();
    let sq = 1.0 / s.tanh() / (2.0 * s.powi(3)) + 1.0 / (2.0 * s * s * sinh * sinh);
    Ok(sq.sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Power-law fit of the resolvent under the boundary datum `g(x) = x`.
#[derive(Debug, Clone)]
pub struct GrowthFit {
    pub lambdas: Vec<f64>,
    /// `|lambda u_lambda|_{L2}`
    pub scaled_norms: Vec<f64>,
    /// Slope of `log |lambda u_lambda|` against `log lambda`.
    pub slope: f64,
    /// Slope of `log |u_lambda|`.
    pub norm_slope: f64,
    /// Set when `h sqrt(lambda)` exceeds 0.1 for some grid value.
    pub warning: Option<String>,
}

fn fit(lambdas: &[f64], norms: Vec<f64>, warning: Option<String>) -> GrowthFit {
    let scaled: Vec<f64> = lambdas.iter().zip(&norms).map(|(l, n)| l * n).collect();
    GrowthFit {
        lambdas: lambdas.to_vec(),
        slope: loglog_slope(lambdas, &scaled),
        norm_slope: loglog_slope(lambdas, &norms),
        scaled_norms: scaled,
        warning,
    }
}

/// Fits the growth of `|lambda R(lambda) (0, g)|` for `g(x) = x`, which on
/// the unit interval is the datum `0` at `x = 0` and `1` at `x = 1`.
pub fn resolvent_growth_exponent(system: &AssembledSystem, lambdas: &[f64]) -> Result<GrowthFit> {
    if lambdas.len() < 2 {
        return Err(LabError::input("lambdas", "need at least two values"));
    }
    let h = system.mesh().h();
    let lmax = lambdas.iter().copied().fold(0.0, f64::max);
    let warning = (h * lmax.sqrt() > 0.1).then(|| {
        format!(
            "boundary layer under-resolved: h * sqrt(lambda_max) = {:.3}",
            h * lmax.sqrt()
        )
    });
    let g = Field::from_fn(|p| p[0]);
    let zero = Field::zero();
    let norms = lambdas
        .iter()
        .map(|&l| Ok(system.l2_norm(&solve_resolvent(system, l, &zero, &g)?.u)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(fit(lambdas, norms, warning))
}

/// Same fit evaluated on the closed-form solution.
pub fn exact_growth_exponent(lambdas: &[f64]) -> Result<GrowthFit> {
    let norms = lambdas
        .iter()
        .map(|&l| exact_resolvent_norm_1d(l))
        .collect::<Result<Vec<f64>>>()?;
    Ok(fit(lambdas, norms, None))
}

/// Geometric grid `start, start*q, ...` with `n` points ending at `end`.
pub fn geometric_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    let r = (end / start).ln() / (n - 1) as f64;
    (0..n).map(|k| start * (r * k as f64).exp()).collect()
}

/// Parameters of the theta scheme.
#[derive(Debug, Clone, Copy)]
pub struct TimeStepping {
    pub t_end: f64,
    pub dt: f64,
    /// 1 is implicit Euler, 1/2 Crank-Nicolson.
    pub theta: f64,
    pub mass: MassKind,
    /// Keep every `record_every`-th state (the final state is always kept).
    pub record_every: usize,
}

impl TimeStepping {
    pub fn new(t_end: f64, dt: f64) -> TimeStepping {
        TimeStepping {
            t_end,
            dt,
            theta: 1.0,
            mass: MassKind::Consistent,
            record_every: 1,
        }
    }

    pub fn theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn lumped(mut self) -> Self {
        self.mass = MassKind::Lumped;
        self
    }

    pub fn record_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }

    fn validate(&self) -> Result<usize> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(LabError::input("t_end", "must be positive and finite"));
        }
        if !(self.dt > 0.0 && self.dt <= self.t_end) {
            return Err(LabError::input("dt", "must satisfy 0 < dt <= t_end"));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(LabError::input("theta", "must lie in [1/2, 1]"));
        }
        let steps = (self.t_end / self.dt).round().max(1.0) as usize;
        Ok(steps)
    }
}

/// Discrete solution on a uniform time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    mesh: Arc<Mesh>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub theta: f64,
    /// Step size actually used (`t_end / steps`).
    pub dt: f64,
    pub mass: MassKind,
    /// Stride between recorded states, in steps.
    pub record_every: usize,
}

fn mass_matrix(system: &AssembledSystem, kind: MassKind) -> CsrMatrix {
    match kind {
        MassKind::Consistent => system.mass.clone(),
        MassKind::Lumped => CsrMatrix::diagonal(&system.lumped_mass),
    }
}

fn check_signals(f: &Signal, g: &Signal) -> Result<()> {
    if f.target() != Target::Volume {
        return Err(LabError::input("f", "volume data expected"));
    }
    if g.target() != Target::Boundary {
        return Err(LabError::input("g", "boundary data expected"));
    }
    Ok(())
}

/// Theta-scheme for `M u' + K u = M f_h + Mb g_h`, `u(0) = u0`.
///
/// Each step solves
/// `(M + theta dt K) u^{n+1} = (M - (1 - theta) dt K) u^n + dt F(t_n + theta dt)`
/// with one factorization reused for all steps.
pub fn solve_parabolic(
    system: &AssembledSystem,
    u0: &[f64],
    f: &Signal,
    g: &Signal,
    opts: TimeStepping,
) -> Result<Trajectory> {
    check_signals(f, g)?;
    let steps = opts.validate()?;
    let n = system.ndof();
    if u0.len() != n {
        return Err(LabError::input(
            "u0",
            format!("expected {n} values, got {}", u0.len()),
        ));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite { step: 0 });
    }
    let dt = opts.t_end / steps as f64;
    let theta = opts.theta;
    let m = mass_matrix(system, opts.mass);
    let lhs = m.add_scaled(1.0, &system.stiffness, theta * dt);
    let rhs_op = m.add_scaled(1.0, &system.stiffness, -(1.0 - theta) * dt);
    let solver = Factorization::new(&lhs)?;
    let fd = DiscreteSignal::new(system, f, opts.mass);
    let gd = DiscreteSignal::new(system, g, opts.mass);

    let every = opts.record_every.max(1);
    let mut times = vec![0.0];
    let mut states = vec![u0.to_vec()];
    let mut u = u0.to_vec();
    let mut rhs = vec![0.0; n];
    for step in 0..steps {
        let t = step as f64 * dt;
        rhs_op.mul_vec_into(&u, &mut rhs);
        let ts = t + theta * dt;
        fd.add_load(ts, dt, &mut rhs);
        gd.add_load(ts, dt, &mut rhs);
        u = solver.solve(&rhs)?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite { step: step + 1 });
        }
        if (step + 1) % every == 0 || step + 1 == steps {
            times.push((step + 1) as f64 * dt);
            states.push(u.clone());
        }
    }
    Ok(Trajectory {
        mesh: system.mesh().clone(),
        times,
        states,
        theta,
        dt,
        mass: opts.mass,
        record_every: every,
    })
}

impl Trajectory {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds at least u0")
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory holds at least u0")
    }

    /// Index of the recorded time closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.times.len() => self.times.len() - 1,
            Err(i) => {
                if t - self.times[i - 1] <= self.times[i] - t {
                    i - 1
                } else {
                    i
                }
            }
        }
    }

    /// Smallest nodal value over all recorded states.
    pub fn min_value(&self) -> f64 {
        self.states
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Writes `t,dof_0,...,dof_{n-1}`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let n = self.states[0].len();
        write!(w, "t")?;
        for i in 0..n {
            write!(w, ",dof_{i}")?;
        }
        writeln!(w)?;
        for (t, u) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for v in u {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Writes `t,l2_norm,h1_seminorm,mass,min,max`.
    pub fn write_summary_csv(&self, system: &AssembledSystem, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,l2_norm,h1_seminorm,mass,min,max")?;
        for (t, u) in self.times.iter().zip(&self.states) {
            let min = u.iter().copied().fold(f64::INFINITY, f64::min);
            let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            writeln!(
                w,
                "{t},{},{},{},{min},{max}",
                system.l2_norm(u),
                system.h1_seminorm(u),
                system.integral(u)
            )?;
        }
        Ok(())
    }
}

fn require_every_step(traj: &Trajectory) -> Result<()> {
    if traj.record_every != 1 {
        return Err(LabError::Precondition(
            "this check needs every time step recorded".into(),
        ));
    }
    Ok(())
}

/// Largest deviation from the integrated equation
/// `M (u^n - u^0) + K int_0^{t_n} u = int_0^{t_n} F`, time integrals by the
/// trapezoid rule on the step grid. Euclidean norm, maximized over `n`.
pub fn mild_residual(
    traj: &Trajectory,
    system: &AssembledSystem,
    f: &Signal,
    g: &Signal,
) -> Result<f64> {
    check_signals(f, g)?;
    require_every_step(traj)?;
    let m = mass_matrix(system, traj.mass);
    let fd = DiscreteSignal::new(system, f, traj.mass);
    let gd = DiscreteSignal::new(system, g, traj.mass);
    let n = system.ndof();
    let u0 = &traj.states[0];
    let mut int_u = vec![0.0; n];
    let mut int_load = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for k in 1..traj.len() {
        let (t0, t1) = (traj.times[k - 1], traj.times[k]);
        let h = t1 - t0;
        for i in 0..n {
            int_u[i] += 0.5 * h * (traj.states[k - 1][i] + traj.states[k][i]);
        }
        for t in [t0, t1] {
            fd.add_load(t, 0.5 * h, &mut int_load);
            gd.add_load(t, 0.5 * h, &mut int_load);
        }
        let diff: Vec<f64> = traj.states[k].iter().zip(u0).map(|(a, b)| a - b).collect();
        let mut r = m.mul_vec(&diff);
        let ku = system.stiffness.mul_vec(&int_u);
        for i in 0..n {
            r[i] += ku[i] - int_load[i];
        }
        worst = worst.max(norm2(&r));
    }
    Ok(worst)
}

/// Both sides of the energy estimate and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCheck {
    /// `sup |u^n|^2 + sum dt |grad u^n|^2`
    pub lhs: f64,
    /// `|u0|^2 + sum dt (|f^n|^2 + |g^n|^2_{dOmega})`
    pub rhs: f64,
    /// `lhs / rhs`, or 0 when both vanish.
    pub ratio: f64,
}

pub fn energy_estimate_check(
    traj: &Trajectory,
    system: &AssembledSystem,
    f: &Signal,
    g: &Signal,
) -> Result<EnergyCheck> {
    check_signals(f, g)?;
    let fd = DiscreteSignal::new(system, f, MassKind::Consistent);
    let gd = DiscreteSignal::new(system, g, MassKind::Consistent);
    let mut sup: f64 = 0.0;
    let mut dirichlet = 0.0;
    let mut rhs = system.l2_norm(&traj.states[0]).powi(2);
    for (k, (t, u)) in traj.times.iter().zip(&traj.states).enumerate() {
        sup = sup.max(system.l2_norm(u).powi(2));
        if k > 0 {
            let h = t - traj.times[k - 1];
            dirichlet += h * system.h1_seminorm(u).powi(2);
            rhs += h * (fd.norm_squared(*t) + gd.norm_squared(*t));
        }
    }
    let lhs = sup + dirichlet;
    let ratio = if lhs == 0.0 && rhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    };
    Ok(EnergyCheck { lhs, rhs, ratio })
}

/// Worst ratio of `|u(t)|^2` to the exponential decay bound
/// `e^{-t/tau} |u0|^2 + c int_0^t e^{(s-t)/tau} (|f|^2 + |g|^2) ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheck {
    pub constants: DecayConstants,
    /// `max_n |u^n|^2 / bound(t_n)`; at most 1 when the bound holds.
    pub worst_ratio: f64,
    /// Time at which the worst ratio occurs.
    pub worst_time: f64,
}

pub fn decay_bound_check(
    traj: &Trajectory,
    system: &AssembledSystem,
    f: &Signal,
    g: &Signal,
    constants: DecayConstants,
) -> Result<DecayCheck> {
    check_signals(f, g)?;
    let fd = DiscreteSignal::new(system, f, MassKind::Consistent);
    let gd = DiscreteSignal::new(system, g, MassKind::Consistent);
    let tau = constants.tau;
    let u0sq = system.l2_norm(&traj.states[0]).powi(2);
    let forcing = |t: f64| fd.norm_squared(t) + gd.norm_squared(t);
    let mut conv = 0.0;
    let mut worst = (0.0, 0.0);
    for k in 0..traj.len() {
        let t = traj.times[k];
        if k > 0 {
            let t0 = traj.times[k - 1];
            let decay = (-(t - t0) / tau).exp();
            // Trapezoid update of int_0^t e^{(s-t)/tau} F(s) ds.
            conv = decay * conv + 0.5 * (t - t0) * (decay * forcing(t0) + forcing(t));
        }
        let bound = (-t / tau).exp() * u0sq + constants.forcing * conv;
        let usq = system.l2_norm(&traj.states[k]).powi(2);
        let ratio = if bound > 0.0 {
            usq / bound
        } else if usq == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ratio > worst.0 {
            worst = (ratio, t);
        }
    }
    Ok(DecayCheck {
        constants,
        worst_ratio: worst.0,
        worst_time: worst.1,
    })
}

/// Largest deviation from the discrete mass balance
/// `1^T M u^n = 1^T M u^0 + sum_m dt 1^T F(t_m + theta dt)`.
pub fn mass_balance_defect(
    traj: &Trajectory,
    system: &AssembledSystem,
    f: &Signal,
    g: &Signal,
) -> Result<f64> {
    check_signals(f, g)?;
    require_every_step(traj)?;
    let fd = DiscreteSignal::new(system, f, traj.mass);
    let gd = DiscreteSignal::new(system, g, traj.mass);
    let m0 = system.integral(&traj.states[0]);
    let mut expected = m0;
    let mut worst: f64 = 0.0;
    for k in 1..traj.len() {
        let ts = traj.times[k - 1] + traj.theta * traj.dt;
        expected += traj.dt * (fd.total(ts) + gd.total(ts));
        worst = worst.max((system.integral(&traj.states[k]) - expected).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientSet;
    use crate::forms::assemble;
    use crate::mesh::build_interval_mesh;
    use crate::signal::Temporal;

    fn heat(n: usize) -> AssembledSystem {
        assemble(
            build_interval_mesh(n).unwrap(),
            &CoefficientSet::laplacian(),
            4,
        )
        .unwrap()
    }

    #[test]
    fn exact_resolvent_values() {
        assert!((exact_resolvent_1d(1.0, 0.0).unwrap() - 0.850918).abs() < 1e-6);
        assert!((exact_resolvent_1d(1.0, 1.0).unwrap() - 1.313035).abs() < 1e-6);
        assert!(exact_resolvent_1d(1e12, 1.0).unwrap().is_finite());
        assert!(exact_resolvent_1d(0.0, 0.5).is_err());
        let l: f64 = 1e8;
        let scaled = l.powf(0.75) * exact_resolvent_norm_1d(l).unwrap();
        assert!((scaled - 0.5f64.sqrt()).abs() / 0.5f64.sqrt() < 0.01);
    }

    #[test]
    fn norm_formula_matches_quadrature() {
        let l = 7.0;
        let n = 20_000;
        let q: f64 = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) / n as f64;
                exact_resolvent_1d(l, x).unwrap().powi(2)
            })
            .sum::<f64>()
            / n as f64;
        assert!((q.sqrt() - exact_resolvent_norm_1d(l).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn resolvent_of_constant() {
        let sys = heat(20);
        let sol = solve_resolvent(&sys, 3.0, &Field::constant(3.0), &Field::zero()).unwrap();
        assert!(sol.u.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn singular_resolvent_fails() {
        let sys = heat(20);
        assert!(matches!(
            solve_resolvent(&sys, 0.0, &Field::constant(1.0), &Field::zero()),
            Err(LabError::SingularSystem(_))
        ));
    }

    #[test]
    fn growth_warns_when_under_resolved() {
        let sys = heat(10);
        let fit = resolvent_growth_exponent(&sys, &[100.0, 1e4]).unwrap();
        assert!(fit.warning.is_some());
    }

    #[test]
    fn constant_forcing_is_exact() {
        let sys = heat(16);
        let f = Signal::steady(Target::Volume, 1.0);
        let traj = solve_parabolic(
            &sys,
            &[0.0; 17],
            &f,
            &Signal::boundary(),
            TimeStepping::new(1.0, 0.1),
        )
        .unwrap();
        for (t, u) in traj.times.iter().zip(&traj.states) {
            assert!(u.iter().all(|v| (v - t).abs() < 1e-12));
        }
    }

    #[test]
    fn parameter_validation() {
        let sys = heat(4);
        let (f, g) = (Signal::volume(), Signal::boundary());
        let u0 = [0.0; 5];
        assert!(solve_parabolic(&sys, &u0, &f, &g, TimeStepping::new(1.0, -0.1)).is_err());
        assert!(
            solve_parabolic(&sys, &u0, &f, &g, TimeStepping::new(1.0, 0.1).theta(0.3)).is_err()
        );
        assert!(solve_parabolic(&sys, &u0[..3], &f, &g, TimeStepping::new(1.0, 0.1)).is_err());
        assert!(solve_parabolic(&sys, &u0, &g, &f, TimeStepping::new(1.0, 0.1)).is_err());
    }

    #[test]
    fn mild_residual_is_first_order() {
        let sys = heat(32);
        let u0 = sys.interpolate(&Field::parse("cos(pi*x)").unwrap());
        let f = Signal::volume().with(Field::parse("x").unwrap(), Temporal::cos(3.0));
        let g = Signal::boundary();
        let r = |dt: f64| {
            let traj = solve_parabolic(&sys, &u0, &f, &g, TimeStepping::new(0.5, dt)).unwrap();
            mild_residual(&traj, &sys, &f, &g).unwrap()
        };
        let (r1, r2) = (r(0.01), r(0.005));
        assert!((r1 / r2 - 2.0).abs() < 0.15, "{r1} {r2}");
        let zero = solve_parabolic(
            &sys,
            &[0.0; 33],
            &Signal::volume(),
            &g,
            TimeStepping::new(0.5, 0.01),
        )
        .unwrap();
        assert_eq!(
            mild_residual(&zero, &sys, &Signal::volume(), &g).unwrap(),
            0.0
        );
    }

    #[test]
    fn trajectory_csv_layout() {
        let sys = heat(2);
        let traj = solve_parabolic(
            &sys,
            &[1.0, 0.0, 1.0],
            &Signal::volume(),
            &Signal::boundary(),
            TimeStepping::new(0.2, 0.1),
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,dof_0,dof_1,dof_2\n0,1,0,1\n"));
        assert_eq!(text.lines().count(), 4);
        let mut buf = Vec::new();
        traj.write_summary_csv(&sys, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("t,l2_norm,h1_seminorm,mass,min,max\n"));
    }
}
