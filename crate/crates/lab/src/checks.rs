//! Named checks a scenario can request, and their evaluation.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{anyhow, bail, Result};
use robin_lab::almost_periodic::{
    asymptotic_periodicity_check, freq_set, frequency_transfer_check, TransferOptions,
};
use robin_lab::degiorgi::{
    caccioppoli_check, iteration_panel, k_hat, median, sup_bound_check, sup_bound_panel,
    write_iteration_csv, Exponents, PanelOptions, SupWindow,
};
use robin_lab::forms::{check_conservation_condition, decay_constants};
use robin_lab::mean_spaces::{
    bounded_embedding_check, m_norm, running_norm, signal_lq_norms, window_equivalence_ratio,
};
use robin_lab::parabolic::{
    decay_bound_check, energy_estimate_check, exact_growth_exponent, exact_resolvent_1d,
    geometric_grid, mass_balance_defect, resolvent_growth_exponent,
};
use robin_lab::{solve_resolvent, Field};
use serde::Deserialize;

use crate::runner::Context;

fn pi_squared() -> f64 {
    PI * PI
}

fn growth_min() -> f64 {
    1e2
}

fn growth_max() -> f64 {
    1e6
}

fn nine() -> usize {
    9
}

fn quarter() -> f64 {
    0.25
}

fn transfer_periods() -> f64 {
    200.0
}

fn hundred() -> usize {
    100
}

fn ten() -> f64 {
    10.0
}

fn half() -> f64 {
    0.5
}

fn iteration_count() -> usize {
    10_000
}

fn sixty() -> usize {
    60
}

fn fifty() -> usize {
    50
}

fn panel_cells() -> usize {
    128
}

fn three() -> f64 {
    3.0
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn slack() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowSpec {
    Late,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    Volume,
    Boundary,
}

/// A verification step. The `name` key of a `[[check]]` table selects the variant.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// `|u(t)|` against `amplitude * exp(-rate t)` at the listed times.
    ExactDecay {
        #[serde(default = "pi_squared")]
        rate: f64,
        /// Defaults to `|u0|`.
        amplitude: Option<f64>,
        times: Vec<f64>,
        tol: f64,
    },
    /// Relative L2 error of the resolvent against the closed form (1D, boundary datum `x`).
    ResolventExact {
        lambdas: Vec<f64>,
        tol: f64,
    },
    /// Power-law slope of `|lambda u_lambda|`.
    ResolventGrowth {
        #[serde(default = "growth_min")]
        lambda_min: f64,
        #[serde(default = "growth_max")]
        lambda_max: f64,
        #[serde(default = "nine")]
        points: usize,
        /// Use the closed form instead of the discrete solver.
        #[serde(default)]
        exact: bool,
        #[serde(default = "quarter")]
        target: f64,
        tol: f64,
    },
    MassBalance {
        tol: f64,
    },
    ConservationCondition {
        tol: f64,
    },
    /// Energy ratio at most `tol`.
    EnergyEstimate {
        tol: f64,
    },
    /// Exponential decay bound with the computed constants; ratio at most `1 + tol`.
    DecayBound {
        tol: f64,
    },
    /// Distance to the mean of the initial value at time `at`.
    MeanConvergence {
        at: Option<f64>,
        tol: f64,
        max_tol: Option<f64>,
    },
    /// Smallest nodal value at least `-tol`.
    Positivity {
        tol: f64,
    },
    FrequencyTransfer {
        eta: f64,
        tol: f64,
        #[serde(default = "transfer_periods")]
        periods: f64,
        #[serde(default = "hundred")]
        steps_per_period: usize,
        #[serde(default = "ten")]
        burn_in: f64,
        #[serde(default = "half")]
        theta: f64,
    },
    /// Frequencies above the noise floor must be exactly `expected`.
    Spectrum {
        candidates: Vec<f64>,
        expected: Vec<f64>,
        #[serde(default)]
        burn_in: f64,
    },
    /// `|u(at + tau) - u(at)|` in L2 below `tol`; `at` defaults to `10 tau`.
    Periodicity {
        tau: f64,
        at: Option<f64>,
        tol: f64,
    },
    IterationPanel {
        #[serde(default = "iteration_count")]
        count: usize,
        #[serde(default = "sixty")]
        n_max: usize,
    },
    /// No member of the seeded panel exceeds `factor` times the median ratio.
    SupPanel {
        #[serde(default = "fifty")]
        count: usize,
        #[serde(default = "panel_cells")]
        cells: usize,
        #[serde(default = "three")]
        factor: f64,
    },
    /// Sup-norm over the window divided by the energy side, at most `tol`.
    SupBound {
        window: WindowSpec,
        tol: f64,
    },
    /// Constant needed in the truncated energy inequality at `k = k_factor * k_hat`, at most `tol`.
    Caccioppoli {
        #[serde(default = "two")]
        k_factor: f64,
        #[serde(default = "half")]
        tau: f64,
        #[serde(default = "quarter")]
        sigma: f64,
        #[serde(default = "one")]
        tol: f64,
    },
    /// Running norm of a forcing signal with the bounded and window-equivalence inequalities.
    RunningNorm {
        #[serde(default = "target_volume")]
        target: TargetSpec,
        #[serde(default = "two")]
        r: f64,
        #[serde(default = "two")]
        q: f64,
        #[serde(default = "one")]
        window: f64,
        compare_window: Option<f64>,
        horizon: f64,
        #[serde(default = "slack")]
        tol: f64,
    },
}

fn target_volume() -> TargetSpec {
    TargetSpec::Volume
}

/// Name and short description of every check, in catalog order.
pub const CATALOG: &[(&str, &str)] = &[
    ("exact_decay", "|u(t)| against amplitude * exp(-rate t); params rate, amplitude, times, tol"),
    ("resolvent_exact", "1D resolvent against the closed form; params lambdas, tol"),
    ("resolvent_growth", "slope of log |lambda u_lambda|; params lambda_min, lambda_max, points, exact, target, tol"),
    ("mass_balance", "discrete mass identity at every step; param tol"),
    ("conservation_condition", "mass conservation of the form; param tol"),
    ("energy_estimate", "energy ratio; param tol (upper bound)"),
    ("decay_bound", "exponential decay bound, ratio <= 1 + tol"),
    ("mean_convergence", "distance to the initial mean at time `at`; params at, tol, max_tol"),
    ("positivity", "smallest nodal value >= -tol"),
    ("frequency_transfer", "Cesaro coefficient against the resolvent; params eta, tol, periods, steps_per_period, burn_in, theta"),
    ("spectrum", "detected frequencies equal `expected`; params candidates, expected, burn_in"),
    ("periodicity", "|u(t + tau) - u(t)| at t = at; params tau, at, tol"),
    ("iteration_panel", "seeded De Giorgi recurrence panel; params count, n_max"),
    ("sup_panel", "seeded sup-norm panel, max <= factor * median; params count, cells, factor"),
    ("sup_bound", "sup-norm ratio; params window (late | global), tol"),
    ("caccioppoli", "truncated energy constant; params k_factor, tau, sigma, tol"),
    ("running_norm", "running norm of f or g; params target, r, q, window, compare_window, horizon, tol"),
];

/// A rejected parameter.
#[derive(Debug)]
pub struct Issue {
    pub field: &'static str,
    pub message: String,
}

fn positive(field: &'static str, v: f64) -> std::result::Result<(), Issue> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Issue {
            field,
            message: format!("must be positive, got {v}"),
        })
    }
}

/// Outcome of one check. `measured` is compared against `limit`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub check: String,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
    pub detail: String,
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::ExactDecay { .. } => "exact_decay",
            CheckSpec::ResolventExact { .. } => "resolvent_exact",
            CheckSpec::ResolventGrowth { .. } => "resolvent_growth",
            CheckSpec::MassBalance { .. } => "mass_balance",
            CheckSpec::ConservationCondition { .. } => "conservation_condition",
            CheckSpec::EnergyEstimate { .. } => "energy_estimate",
            CheckSpec::DecayBound { .. } => "decay_bound",
            CheckSpec::MeanConvergence { .. } => "mean_convergence",
            CheckSpec::Positivity { .. } => "positivity",
            CheckSpec::FrequencyTransfer { .. } => "frequency_transfer",
            CheckSpec::Spectrum { .. } => "spectrum",
            CheckSpec::Periodicity { .. } => "periodicity",
            CheckSpec::IterationPanel { .. } => "iteration_panel",
            CheckSpec::SupPanel { .. } => "sup_panel",
            CheckSpec::SupBound { .. } => "sup_bound",
            CheckSpec::Caccioppoli { .. } => "caccioppoli",
            CheckSpec::RunningNorm { .. } => "running_norm",
        }
    }

    pub fn needs_trajectory(&self) -> bool {
        matches!(
            self,
            CheckSpec::ExactDecay { .. }
                | CheckSpec::MassBalance { .. }
                | CheckSpec::EnergyEstimate { .. }
                | CheckSpec::DecayBound { .. }
                | CheckSpec::MeanConvergence { .. }
                | CheckSpec::Positivity { .. }
                | CheckSpec::Spectrum { .. }
                | CheckSpec::Periodicity { .. }
                | CheckSpec::SupBound { .. }
                | CheckSpec::Caccioppoli { .. }
        )
    }

    pub fn validate(&self) -> std::result::Result<(), Issue> {
        match self {
            CheckSpec::ExactDecay { times, tol, .. } => {
                positive("tol", *tol)?;
                if times.is_empty() {
                    return Err(Issue {
                        field: "times",
                        message: "list is empty".into(),
                    });
                }
            }
            CheckSpec::ResolventExact { lambdas, tol } => {
                positive("tol", *tol)?;
                for l in lambdas {
                    positive("lambdas", *l)?;
                }
            }
            CheckSpec::ResolventGrowth {
                lambda_min,
                lambda_max,
                points,
                tol,
                ..
            } => {
                positive("tol", *tol)?;
                positive("lambda_min", *lambda_min)?;
                if !(lambda_max > lambda_min) {
                    return Err(Issue {
                        field: "lambda_max",
                        message: "must exceed lambda_min".into(),
                    });
                }
                if *points < 2 {
                    return Err(Issue {
                        field: "points",
                        message: "need at least two".into(),
                    });
                }
            }
            CheckSpec::MassBalance { tol }
            | CheckSpec::ConservationCondition { tol }
            | CheckSpec::EnergyEstimate { tol }
            | CheckSpec::DecayBound { tol }
            | CheckSpec::Positivity { tol }
            | CheckSpec::SupBound { tol, .. } => positive("tol", *tol)?,
            CheckSpec::MeanConvergence { tol, max_tol, .. } => {
                positive("tol", *tol)?;
                if let Some(m) = max_tol {
                    positive("max_tol", *m)?;
                }
            }
            CheckSpec::FrequencyTransfer {
                tol,
                periods,
                steps_per_period,
                ..
            } => {
                positive("tol", *tol)?;
                positive("periods", *periods)?;
                if *steps_per_period == 0 {
                    return Err(Issue {
                        field: "steps_per_period",
                        message: "must be positive".into(),
                    });
                }
            }
            CheckSpec::Spectrum { candidates, .. } => {
                if candidates.is_empty() {
                    return Err(Issue {
                        field: "candidates",
                        message: "list is empty".into(),
                    });
                }
            }
            CheckSpec::Periodicity { tau, tol, .. } => {
                positive("tau", *tau)?;
                positive("tol", *tol)?;
            }
            CheckSpec::IterationPanel { count, .. } | CheckSpec::SupPanel { count, .. }
                if *count == 0 =>
            {
                return Err(Issue {
                    field: "count",
                    message: "must be positive".into(),
                });
            }
            CheckSpec::SupPanel { factor, .. } => positive("factor", *factor)?,
            CheckSpec::IterationPanel { .. } => {}
            CheckSpec::Caccioppoli {
                k_factor,
                tau,
                sigma,
                tol,
            } => {
                positive("tol", *tol)?;
                positive("tau", *tau)?;
                if !(*k_factor >= 1.0) {
                    return Err(Issue {
                        field: "k_factor",
                        message: "must be at least 1".into(),
                    });
                }
                if !(*sigma > 0.0 && *sigma < 0.5) {
                    return Err(Issue {
                        field: "sigma",
                        message: "must lie in (0, 1/2)".into(),
                    });
                }
            }
            CheckSpec::RunningNorm {
                window,
                horizon,
                tol,
                compare_window,
                ..
            } => {
                positive("tol", *tol)?;
                positive("window", *window)?;
                positive("horizon", *horizon)?;
                if let Some(w) = compare_window {
                    positive("compare_window", *w)?;
                }
            }
        }
        Ok(())
    }

    /// Runs the check; `index` numbers its CSV output.
    pub fn run(&self, cx: &Context, index: usize) -> Result<CheckOutcome> {
        let name = self.name();
        let csv = |suffix: &str| -> Result<BufWriter<File>> {
            let path = cx.out_dir.join(format!("{index:02}_{name}{suffix}.csv"));
            Ok(BufWriter::new(File::create(path)?))
        };
        let outcome = |passed: bool, measured: f64, limit: f64, detail: String| CheckOutcome {
            check: name.to_string(),
            passed,
            measured,
            limit,
            detail,
        };
        let sys = &cx.system;
        match self {
            CheckSpec::ExactDecay {
                rate,
                amplitude,
                times,
                tol,
            } => {
                let traj = cx.trajectory()?;
                let amp = amplitude.unwrap_or_else(|| sys.l2_norm(&cx.u0));
                let mut w = csv("")?;
                writeln!(w, "t,measured,reference")?;
                for (t, u) in traj.times.iter().zip(&traj.states) {
                    writeln!(w, "{t},{},{}", sys.l2_norm(u), amp * (-rate * t).exp())?;
                }
                w.flush()?;
                let mut worst: f64 = 0.0;
                for &t in times {
                    if t > traj.t_end() + 1e-12 {
                        bail!("time {t} lies beyond the horizon");
                    }
                    let exact = amp * (-rate * t).exp();
                    worst = worst
                        .max((sys.l2_norm(&traj.states[traj.index_near(t)]) - exact).abs() / exact);
                }
                Ok(outcome(
                    worst <= *tol,
                    worst,
                    *tol,
                    format!("max relative deviation at {} times", times.len()),
                ))
            }
            CheckSpec::ResolventExact { lambdas, tol } => {
                if sys.mesh().dim() != 1 {
                    bail!("the closed form is one-dimensional");
                }
                let mut w = csv("")?;
                writeln!(w, "lambda,rel_l2_error")?;
                let mut worst: f64 = 0.0;
                for &l in lambdas {
                    let u = solve_resolvent(sys, l, &Field::zero(), &Field::from_fn(|x| x[0]))?.u;
                    let exact = sys.interpolate(&Field::from_fn(move |x| {
                        exact_resolvent_1d(l, x[0]).unwrap_or(f64::NAN)
                    }));
                    let diff: Vec<f64> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
                    let err = sys.l2_norm(&diff) / sys.l2_norm(&exact);
                    writeln!(w, "{l},{err}")?;
                    worst = worst.max(err);
                }
                w.flush()?;
                Ok(outcome(
                    worst <= *tol,
                    worst,
                    *tol,
                    "max relative L2 error".into(),
                ))
            }
            CheckSpec::ResolventGrowth {
                lambda_min,
                lambda_max,
                points,
                exact,
                target,
                tol,
            } => {
                let lambdas = geometric_grid(*lambda_min, *lambda_max, *points);
                let fit = if *exact {
                    exact_growth_exponent(&lambdas)?
                } else {
                    resolvent_growth_exponent(sys, &lambdas)?
                };
                let mut w = csv("")?;
                writeln!(w, "lambda,scaled_norm")?;
                for (l, n) in fit.lambdas.iter().zip(&fit.scaled_norms) {
                    writeln!(w, "{l},{n}")?;
                }
                w.flush()?;
                let dev = (fit.slope - target).abs();
                let mut detail = format!("slope {:.4} against {target}", fit.slope);
                if let Some(warn) = &fit.warning {
                    detail.push_str(&format!("; {warn}"));
                }
                Ok(outcome(dev <= *tol, dev, *tol, detail))
            }
            CheckSpec::MassBalance { tol } => {
                let d = mass_balance_defect(cx.trajectory()?, sys, &cx.f, &cx.g)?;
                Ok(outcome(
                    d <= *tol,
                    d,
                    *tol,
                    "largest defect over all steps".into(),
                ))
            }
            CheckSpec::ConservationCondition { tol } => {
                let c = check_conservation_condition(sys);
                Ok(outcome(
                    c <= *tol,
                    c,
                    *tol,
                    "largest normalized column sum".into(),
                ))
            }
            CheckSpec::EnergyEstimate { tol } => {
                let e = energy_estimate_check(cx.trajectory()?, sys, &cx.f, &cx.g)?;
                Ok(outcome(
                    e.ratio <= *tol,
                    e.ratio,
                    *tol,
                    format!("lhs {:.6e}, rhs {:.6e}", e.lhs, e.rhs),
                ))
            }
            CheckSpec::DecayBound { tol } => {
                let constants = decay_constants(sys)?;
                let d = decay_bound_check(cx.trajectory()?, sys, &cx.f, &cx.g, constants)?;
                Ok(outcome(
                    d.worst_ratio <= 1.0 + tol,
                    d.worst_ratio,
                    1.0 + tol,
                    format!("tau {:.6}, worst at t = {}", constants.tau, d.worst_time),
                ))
            }
            CheckSpec::MeanConvergence { at, tol, max_tol } => {
                let traj = cx.trajectory()?;
                let t = at.unwrap_or(traj.t_end());
                let mean = sys.mean(&cx.u0);
                let dev: Vec<f64> = traj.states[traj.index_near(t)]
                    .iter()
                    .map(|v| v - mean)
                    .collect();
                let l2 = sys.l2_norm(&dev);
                let max = dev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let passed = l2 <= *tol && max_tol.is_none_or(|m| max <= m);
                Ok(outcome(
                    passed,
                    l2,
                    *tol,
                    format!("at t = {t}: nodal max deviation {max:.3e}"),
                ))
            }
            CheckSpec::Positivity { tol } => {
                let min = cx.trajectory()?.min_value();
                Ok(outcome(
                    min >= -tol,
                    min,
                    -tol,
                    "smallest nodal value".into(),
                ))
            }
            CheckSpec::FrequencyTransfer {
                eta,
                tol,
                periods,
                steps_per_period,
                burn_in,
                theta,
            } => {
                let opts = TransferOptions {
                    periods: *periods,
                    steps_per_period: *steps_per_period,
                    burn_in: *burn_in,
                    theta: *theta,
                };
                let r = frequency_transfer_check(sys, &cx.u0, &cx.f, &cx.g, *eta, opts)?;
                Ok(outcome(
                    r.deviation <= *tol,
                    r.deviation,
                    *tol,
                    format!(
                        "measured {:.6e}, predicted {:.6e}, T_avg {:.3}",
                        r.measured_norm, r.predicted_norm, r.t_avg
                    ),
                ))
            }
            CheckSpec::Spectrum {
                candidates,
                expected,
                burn_in,
            } => {
                let traj = cx.trajectory()?;
                let start = traj.index_near(*burn_in);
                let norm = |v: &[f64]| sys.l2_norm(v);
                let (ts, us) = (&traj.times[start..], &traj.states[start..]);
                let floor = freq_set(ts, us, candidates, f64::MAX, &norm)?.noise_floor;
                let spec = freq_set(ts, us, candidates, floor, &norm)?;
                spec.write_csv(csv("")?)?;
                let found = spec.frequencies();
                let same = found.len() == expected.len()
                    && found.iter().all(|a| {
                        expected
                            .iter()
                            .any(|b| (a - b).abs() <= 1e-12 * (1.0 + b.abs()))
                    });
                let absent = spec
                    .entries
                    .iter()
                    .filter(|e| {
                        !expected
                            .iter()
                            .any(|b| (e.eta - b).abs() <= 1e-12 * (1.0 + b.abs()))
                    })
                    .map(|e| e.magnitude())
                    .fold(0.0, f64::max);
                Ok(outcome(
                    same,
                    absent,
                    floor,
                    format!("detected {found:?}; measured is the largest absent magnitude"),
                ))
            }
            CheckSpec::Periodicity { tau, at, tol } => {
                let r = asymptotic_periodicity_check(cx.trajectory()?, sys, *tau)?;
                let mut w = csv("")?;
                writeln!(w, "t,l2,max")?;
                for ((t, a), b) in r.times.iter().zip(&r.l2).zip(&r.max) {
                    writeln!(w, "{t},{a},{b}")?;
                }
                w.flush()?;
                let t = at.unwrap_or(10.0 * tau);
                if t + tau > cx.trajectory()?.t_end() + 1e-9 {
                    bail!("horizon must reach at + tau = {}", t + tau);
                }
                let d = r.l2_at(t);
                Ok(outcome(
                    d < *tol,
                    d,
                    *tol,
                    format!("L2 distance at t = {t}, nodal max {:.3e}", r.max_at(t)),
                ))
            }
            CheckSpec::IterationPanel { count, n_max } => {
                let reports = iteration_panel(*count, cx.seed, *n_max)?;
                write_iteration_csv(&reports, csv("")?)?;
                let failed = reports.iter().filter(|r| !r.passed).count();
                let min = reports
                    .iter()
                    .map(|r| r.min_margin)
                    .fold(f64::INFINITY, f64::min);
                Ok(outcome(
                    failed == 0,
                    failed as f64,
                    0.0,
                    format!(
                        "failed tuples out of {count}; smallest margin {min:.3e}; seed {}",
                        cx.seed
                    ),
                ))
            }
            CheckSpec::SupPanel {
                count,
                cells,
                factor,
            } => {
                let opts = PanelOptions {
                    count: *count,
                    seed: cx.seed,
                    cells: *cells,
                    ..PanelOptions::default()
                };
                let panel = sup_bound_panel(&opts)?;
                let mut w = csv("")?;
                writeln!(w, "index,a,b,c,d,beta,zero_initial,late_ratio,global_ratio")?;
                for m in &panel {
                    let [a, b, c, d, beta] = m.coefficients;
                    let global = m.global.map_or(String::new(), |g| g.ratio.to_string());
                    writeln!(
                        w,
                        "{},{a},{b},{c},{d},{beta},{},{},{global}",
                        m.index, m.zero_initial, m.late.ratio
                    )?;
                }
                w.flush()?;
                let late: Vec<f64> = panel.iter().map(|m| m.late.ratio).collect();
                let global: Vec<f64> = panel
                    .iter()
                    .filter_map(|m| m.global.map(|g| g.ratio))
                    .collect();
                let spread = |v: &[f64]| {
                    let med = median(v);
                    let max = v.iter().copied().fold(0.0, f64::max);
                    if med > 0.0 {
                        max / med
                    } else if max == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                };
                let worst = spread(&late).max(if global.is_empty() {
                    0.0
                } else {
                    spread(&global)
                });
                Ok(outcome(
                    worst <= *factor,
                    worst,
                    *factor,
                    format!(
                        "max / median ratio; late median {:.4}; seed {}",
                        median(&late),
                        cx.seed
                    ),
                ))
            }
            CheckSpec::SupBound { window, tol } => {
                let window = match window {
                    WindowSpec::Late => SupWindow::Late,
                    WindowSpec::Global => SupWindow::Global,
                };
                let s = sup_bound_check(
                    sys,
                    cx.trajectory()?,
                    &cx.f,
                    &cx.g,
                    &Exponents::default(),
                    window,
                )?;
                Ok(outcome(
                    s.ratio <= *tol,
                    s.ratio,
                    *tol,
                    format!("sup {:.6e}, energy side {:.6e}", s.sup_norm, s.rhs),
                ))
            }
            CheckSpec::Caccioppoli {
                k_factor,
                tau,
                sigma,
                tol,
            } => {
                let traj = cx.trajectory()?;
                let exps = Exponents::default();
                let kh = k_hat(sys, &traj.times, &cx.f, &cx.g, &exps);
                if kh == 0.0 {
                    return Err(anyhow!(
                        "forcing vanishes, so k_hat = 0 and no level is selected"
                    ));
                }
                let r =
                    caccioppoli_check(sys, traj, &cx.f, &cx.g, k_factor * kh, *tau, *sigma, &exps)?;
                let mut detail = format!("k {:.6e}, lhs {:.6e}", r.k, r.lhs);
                if let Some(warn) = r.warning {
                    detail.push_str(&format!("; {warn}"));
                }
                Ok(outcome(
                    r.gamma_required <= *tol,
                    r.gamma_required,
                    *tol,
                    detail,
                ))
            }
            CheckSpec::RunningNorm {
                target,
                r,
                q,
                window,
                compare_window,
                horizon,
                tol,
            } => {
                let signal = match target {
                    TargetSpec::Volume => &cx.f,
                    TargetSpec::Boundary => &cx.g,
                };
                let longest = compare_window.unwrap_or(*window).max(*window);
                let step = window.min(longest) / 50.0;
                let n = (horizon / step).round().max(2.0) as usize;
                let times: Vec<f64> = (0..=n).map(|k| k as f64 * horizon / n as f64).collect();
                let grid: Vec<f64> = times
                    .iter()
                    .copied()
                    .filter(|t| t + longest <= horizon + 1e-9)
                    .collect();
                if grid.is_empty() {
                    bail!("horizon is shorter than the window");
                }
                let norms = signal_lq_norms(sys, signal, *q, &times);
                let profile = running_norm(&times, &norms, *r, *q, *window, &grid)?;
                profile.write_csv(csv("")?)?;
                let bounded = bounded_embedding_check(&profile);
                let mut passed = bounded.holds(*tol);
                let mut detail = format!(
                    "m-norm against T^(1/r) sup |f|; sup bound {:.6e}",
                    bounded.rhs
                );
                if let Some(w2) = compare_window {
                    let other = running_norm(&times, &norms, *r, *q, *w2, &grid)?;
                    let ratio = window_equivalence_ratio(&profile, &other)?;
                    passed &= ratio.ratio <= ratio.bound;
                    detail.push_str(&format!(
                        "; window ratio {:.4} <= {}",
                        ratio.ratio, ratio.bound
                    ));
                }
                Ok(outcome(passed, m_norm(&profile), bounded.rhs, detail))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_matches_variants() {
        // Every catalog entry deserializes into the variant carrying the same name.
        let samples = [
            r#"name = "exact_decay"
times = [0.1]
tol = 0.01"#,
            r#"name = "resolvent_exact"
lambdas = [1.0]
tol = 1e-3"#,
            "name = \"resolvent_growth\"\ntol = 0.02",
            "name = \"mass_balance\"\ntol = 1e-10",
            "name = \"conservation_condition\"\ntol = 1e-12",
            "name = \"energy_estimate\"\ntol = 1.5",
            "name = \"decay_bound\"\ntol = 1e-12",
            "name = \"mean_convergence\"\ntol = 1e-4",
            "name = \"positivity\"\ntol = 1e-14",
            "name = \"frequency_transfer\"\neta = 2.0\ntol = 0.02",
            "name = \"spectrum\"\ncandidates = [0.0]\nexpected = []",
            "name = \"periodicity\"\ntau = 1.0\ntol = 1e-4",
            "name = \"iteration_panel\"",
            "name = \"sup_panel\"",
            "name = \"sup_bound\"\nwindow = \"late\"\ntol = 2.0",
            "name = \"caccioppoli\"",
            "name = \"running_norm\"\nhorizon = 5.0",
        ];
        assert_eq!(samples.len(), CATALOG.len());
        for (src, (name, _)) in samples.iter().zip(CATALOG) {
            let spec: CheckSpec = toml::from_str(src).unwrap();
            assert_eq!(spec.name(), *name);
            spec.validate().unwrap();
        }
    }

    #[test]
    fn nonpositive_tolerance_rejected() {
        let spec: CheckSpec = toml::from_str("name = \"mass_balance\"\ntol = 0.0").unwrap();
        assert_eq!(spec.validate().unwrap_err().field, "tol");
        assert!(
            toml::from_str::<CheckSpec>("name = \"mass_balance\"\ntol = 1.0\nextra = 1").is_err()
        );
        assert!(toml::from_str::<CheckSpec>("name = \"no_such_check\"").is_err());
    }
}
