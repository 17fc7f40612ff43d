//! Long-run averages against characters, frequency sets, and the
//! frequency response of the discrete evolution.
//!
//! The Cesaro coefficient of a sampled function is
//! `C_eta f = (1/T) int e^{-i eta s} f(s) ds` over the sample window. It
//! recovers the amplitude of the `eta` component up to an error of order
//! `1/T`; frequency sets are only ever evaluated on explicit candidate lists.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::forms::{check_conservation_condition, check_fixedpoint_condition, AssembledSystem};
use crate::linalg::{BandedLu, TripletBuilder};
use crate::parabolic::{solve_parabolic, TimeStepping, Trajectory};
use crate::signal::{compatibility_defect, Signal};

/// Cesaro coefficient at one frequency.
#[derive(Debug, Clone)]
pub struct Coefficient {
    pub eta: f64,
    pub value: Vec<Complex64>,
    /// `2 sup |f| / T`, the size of the finite-window error for unit frequency separation.
    pub trunc_err: f64,
}

fn check_samples(times: &[f64], samples: &[Vec<f64>]) -> Result<f64> {
    if times.len() != samples.len() || times.len() < 2 {
        return Err(LabError::input(
            "samples",
            "need at least two samples, one per time",
        ));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::input("times", "must increase strictly"));
    }
    Ok(times[times.len() - 1] - times[0])
}

/// `(1/T) int e^{-i eta s} f(s) ds` over the whole sample window, trapezoid rule.
///
/// `norm` measures vectors (for the truncation estimate).
pub fn cesaro_limit(
    times: &[f64],
    samples: &[Vec<f64>],
    eta: f64,
    norm: &dyn Fn(&[f64]) -> f64,
) -> Result<Coefficient> {
    let t_avg = check_samples(times, samples)?;
    if eta != 0.0 {
        let spacing = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let need = 2.0 * PI / eta.abs() / 20.0;
        if spacing > need * (1.0 + 1e-9) {
            return Err(LabError::Precondition(format!(
                "sample spacing {spacing:.3e} does not resolve frequency {eta}; use a step of at most {need:.3e}"
            )));
        }
    }
    let n = samples[0].len();
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        let e0 = Complex64::from_polar(0.5 * h, -eta * times[k - 1]);
        let e1 = Complex64::from_polar(0.5 * h, -eta * times[k]);
        for i in 0..n {
            acc[i] += e0 * samples[k - 1][i] + e1 * samples[k][i];
        }
    }
    for a in acc.iter_mut() {
        *a /= t_avg;
    }
    let sup = samples.iter().map(|s| norm(s)).fold(0.0, f64::max);
    Ok(Coefficient {
        eta,
        value: acc,
        trunc_err: 2.0 * sup / t_avg,
    })
}

/// Norm of a complex vector as `sqrt(|re|^2 + |im|^2)`.
pub fn complex_norm(v: &[Complex64], norm: &dyn Fn(&[f64]) -> f64) -> (f64, f64) {
    let re: Vec<f64> = v.iter().map(|c| c.re).collect();
    let im: Vec<f64> = v.iter().map(|c| c.im).collect();
    (norm(&re), norm(&im))
}

#[derive(Debug, Clone)]
pub struct SpectrumEntry {
    pub eta: f64,
    pub coefficient: Vec<Complex64>,
    pub re_norm: f64,
    pub im_norm: f64,
    pub trunc_err: f64,
    pub detected: bool,
}

impl SpectrumEntry {
    pub fn magnitude(&self) -> f64 {
        self.re_norm.hypot(self.im_norm)
    }
}

/// Cesaro coefficients on a candidate list, with the detected subset.
#[derive(Debug, Clone)]
pub struct FrequencySpectrum {
    pub entries: Vec<SpectrumEntry>,
    pub t_avg: f64,
    pub threshold: f64,
    /// `2 sup |f| / (T gap)` with `gap` the smallest separation of the candidates.
    pub noise_floor: f64,
}

impl FrequencySpectrum {
    /// Candidates whose coefficient exceeds the threshold.
    pub fn frequencies(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.detected)
            .map(|e| e.eta)
            .collect()
    }

    pub fn contains(&self, eta: f64) -> bool {
        self.entries.iter().any(|e| e.detected && e.eta == eta)
    }

    pub fn entry(&self, eta: f64) -> Option<&SpectrumEntry> {
        self.entries.iter().find(|e| e.eta == eta)
    }

    /// Writes `eta,re_norm,im_norm,trunc_err` for every candidate.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "eta,re_norm,im_norm,trunc_err")?;
        for e in &self.entries {
            writeln!(w, "{},{},{},{}", e.eta, e.re_norm, e.im_norm, e.trunc_err)?;
        }
        Ok(())
    }
}

/// Smallest distance between distinct candidates; `2 pi / T` if there is only one.
fn candidate_gap(candidates: &[f64], t_avg: f64) -> f64 {
    let mut gap = f64::INFINITY;
    for (i, a) in candidates.iter().enumerate() {
        for b in &candidates[i + 1..] {
            if a != b {
                gap = gap.min((a - b).abs());
            }
        }
    }
    if gap.is_finite() {
        gap
    } else {
        2.0 * PI / t_avg
    }
}

/// Evaluates the Cesaro coefficient at every candidate and flags those above `threshold`.
pub fn freq_set(
    times: &[f64],
    samples: &[Vec<f64>],
    candidates: &[f64],
    threshold: f64,
    norm: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<FrequencySpectrum> {
    let t_avg = check_samples(times, samples)?;
    if candidates.is_empty() {
        return Err(LabError::input("candidates", "list is empty"));
    }
    let sup = samples.iter().map(|s| norm(s)).fold(0.0, f64::max);
    let noise_floor = 2.0 * sup / (t_avg * candidate_gap(candidates, t_avg));
    if threshold < noise_floor {
        return Err(LabError::Precondition(format!(
            "threshold {threshold:.3e} is below the noise floor {noise_floor:.3e}"
        )));
    }
    let entries = candidates
        .par_iter()
        .map(|&eta| {
            let c = cesaro_limit(times, samples, eta, norm)?;
            let (re_norm, im_norm) = complex_norm(&c.value, norm);
            Ok(SpectrumEntry {
                eta,
                detected: re_norm.hypot(im_norm) > threshold,
                coefficient: c.value,
                re_norm,
                im_norm,
                trunc_err: c.trunc_err,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencySpectrum {
        entries,
        t_avg,
        threshold,
        noise_floor,
    })
}

/// Solves `(i eta M + K) U = L` as a real system of twice the size, with
/// real and imaginary parts of each unknown interleaved to keep the band narrow.
pub fn solve_complex_resolvent(
    system: &AssembledSystem,
    eta: f64,
    load: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = system.ndof();
    let mut b = TripletBuilder::new(2 * n);
    for i in 0..n {
        for (j, v) in system.stiffness.row(i) {
            b.add(2 * i, 2 * j, v);
            b.add(2 * i + 1, 2 * j + 1, v);
        }
        for (j, v) in system.mass.row(i) {
            b.add(2 * i, 2 * j + 1, -eta * v);
            b.add(2 * i + 1, 2 * j, eta * v);
        }
    }
    let a = b.build();
    let rhs: Vec<f64> = load.iter().flat_map(|c| [c.re, c.im]).collect();
    let x = BandedLu::factor(&a)?.solve(&rhs);
    Ok((0..n)
        .map(|i| Complex64::new(x[2 * i], x[2 * i + 1]))
        .collect())
}

/// Zero-mean solution of `K U = L` for a load with `1^T L = 0`, assuming
/// constants span the kernel of `K`.
fn solve_zero_mean(system: &AssembledSystem, load: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = system.ndof();
    // Replace the first equation by u_0 = 0; the dropped row is implied by the others.
    let mut b = TripletBuilder::new(n);
    b.add(0, 0, 1.0);
    for i in 1..n {
        for (j, v) in system.stiffness.row(i) {
            b.add(i, j, v);
        }
    }
    let lu = BandedLu::factor(&b.build())?;
    let part = |f: &dyn Fn(&Complex64) -> f64| -> Vec<f64> {
        let mut r: Vec<f64> = load.iter().map(f).collect();
        r[0] = 0.0;
        let mut u = lu.solve(&r);
        let mean = system.mean(&u);
        u.iter_mut().for_each(|v| *v -= mean);
        u
    };
    let re = part(&|c| c.re);
    let im = part(&|c| c.im);
    Ok(re
        .into_iter()
        .zip(im)
        .map(|(a, b)| Complex64::new(a, b))
        .collect())
}

/// Nodal complex vector of the closed-form Cesaro coefficient of a signal,
/// already multiplied by the matching mass matrix.
fn cesaro_load(system: &AssembledSystem, signal: &Signal, eta: f64) -> Result<Vec<Complex64>> {
    let n = system.ndof();
    let matrix = match signal.target() {
        crate::signal::Target::Volume => &system.mass,
        crate::signal::Target::Boundary => &system.boundary_mass,
    };
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (profile, c) in signal.cesaro_terms(eta)? {
        if c.norm() == 0.0 {
            continue;
        }
        let load = matrix.mul_vec(&system.interpolate(&profile));
        for (o, l) in out.iter_mut().zip(load) {
            *o += c * l;
        }
    }
    Ok(out)
}

/// Cesaro coefficient of the long-time solution predicted by one resolvent
/// solve: `(i eta - A)^{-1} (C_eta f, C_eta g)`, plus the conserved mean of
/// `u0` when `eta = 0`.
pub fn predicted_coefficient(
    system: &AssembledSystem,
    u0: &[f64],
    f: &Signal,
    g: &Signal,
    eta: f64,
) -> Result<Vec<Complex64>> {
    let mut load = cesaro_load(system, f, eta)?;
    for (l, b) in load.iter_mut().zip(cesaro_load(system, g, eta)?) {
        *l += b;
    }
    if eta != 0.0 {
        return solve_complex_resolvent(system, eta, &load);
    }
    let mean = system.mean(u0);
    let mut u = solve_zero_mean(system, &load)?;
    u.iter_mut().for_each(|v| *v += mean);
    Ok(u)
}

/// Parameters of the long-run simulation behind the frequency check.
#[derive(Debug, Clone, Copy)]
pub struct TransferOptions {
    /// Averaging window in periods of the tested frequency (or time units for `eta = 0`).
    pub periods: f64,
    pub steps_per_period: usize,
    /// Time discarded before averaging.
    pub burn_in: f64,
    pub theta: f64,
}

impl Default for TransferOptions {
    fn default() -> Self {
        TransferOptions {
            periods: 200.0,
            steps_per_period: 100,
            burn_in: 10.0,
            theta: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferReport {
    pub eta: f64,
    /// Cesaro coefficient of the simulated solution over the averaging window.
    pub measured: Vec<Complex64>,
    /// Resolvent prediction.
    pub predicted: Vec<Complex64>,
    pub measured_norm: f64,
    pub predicted_norm: f64,
    /// `|measured - predicted|_{L2}`, relative to the prediction when it is nonzero.
    pub deviation: f64,
    pub t_avg: f64,
    pub trunc_err: f64,
}

/// Checks `C_eta u = (i eta - A)^{-1} (C_eta f, C_eta g)` on a long simulation.
///
/// Requires compatible forcing (`int f + int g = 0` at all times) and an
/// operator that conserves mass and fixes constants.
pub fn frequency_transfer_check(
    system: &AssembledSystem,
    u0: &[f64],
    f: &Signal,
    g: &Signal,
    eta: f64,
    opts: TransferOptions,
) -> Result<TransferReport> {
    let scale = system.mesh().domain_measure();
    let probe: Vec<f64> = (0..400).map(|k| k as f64 * 0.0731).collect();
    let defect = compatibility_defect(system, f, g, &probe);
    if defect > 1e-10 * scale.max(1.0) {
        return Err(LabError::Precondition(format!(
            "forcing is not compatible: |int f + int g| reaches {defect:.2e}"
        )));
    }
    if check_conservation_condition(system) > 1e-10 || check_fixedpoint_condition(system)? > 1e-10 {
        return Err(LabError::Precondition(
            "operator must conserve mass and fix constants".into(),
        ));
    }
    let period = if eta != 0.0 {
        2.0 * PI / eta.abs()
    } else {
        1.0
    };
    let dt = period / opts.steps_per_period as f64;
    let t_avg = opts.periods * period;
    let burn_steps = (opts.burn_in / dt).ceil();
    let burn_in = burn_steps * dt;
    let traj = solve_parabolic(
        system,
        u0,
        f,
        g,
        TimeStepping::new(burn_in + t_avg, dt).theta(opts.theta),
    )?;
    let start = traj.index_near(burn_in);
    let norm = |v: &[f64]| system.l2_norm(v);
    let measured = cesaro_limit(&traj.times[start..], &traj.states[start..], eta, &norm)?;
    let predicted = predicted_coefficient(system, u0, f, g, eta)?;
    let diff: Vec<Complex64> = measured
        .value
        .iter()
        .zip(&predicted)
        .map(|(a, b)| a - b)
        .collect();
    let l2 = |v: &[Complex64]| {
        let (r, i) = complex_norm(v, &norm);
        r.hypot(i)
    };
    let (mn, pn, dn) = (l2(&measured.value), l2(&predicted), l2(&diff));
    Ok(TransferReport {
        eta,
        measured_norm: mn,
        predicted_norm: pn,
        deviation: if pn > 0.0 { dn / pn } else { dn },
        measured: measured.value,
        predicted,
        t_avg,
        trunc_err: measured.trunc_err,
    })
}

/// `d(t) = |u(t + tau) - u(t)|` in L2 and in the nodal max norm.
#[derive(Debug, Clone)]
pub struct PeriodicityReport {
    pub tau: f64,
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub max: Vec<f64>,
}

impl PeriodicityReport {
    fn at(values: &[f64], times: &[f64], t: f64) -> f64 {
        let k = times
            .partition_point(|&s| s < t - 1e-9)
            .min(times.len() - 1);
        values[k]
    }

    /// `d` in L2 at the first recorded time at or after `t`.
    pub fn l2_at(&self, t: f64) -> f64 {
        Self::at(&self.l2, &self.times, t)
    }

    pub fn max_at(&self, t: f64) -> f64 {
        Self::at(&self.max, &self.times, t)
    }

    /// Largest L2 value on `[t, end]`.
    pub fn l2_envelope(&self, t: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.l2)
            .filter(|(s, _)| **s >= t - 1e-9)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }

    pub fn max_envelope(&self, t: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.max)
            .filter(|(s, _)| **s >= t - 1e-9)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }
}

/// Distance between the solution and its shift by one period.
pub fn asymptotic_periodicity_check(
    traj: &Trajectory,
    system: &AssembledSystem,
    tau: f64,
) -> Result<PeriodicityReport> {
    if !(tau > 0.0) {
        return Err(LabError::input("tau", "must be positive"));
    }
    if traj.t_end() < 10.0 * tau * (1.0 - 1e-12) {
        return Err(LabError::Precondition(format!(
            "horizon {} is shorter than 10 periods ({})",
            traj.t_end(),
            10.0 * tau
        )));
    }
    let spacing = traj.dt * traj.record_every as f64;
    let shift = (tau / spacing).round() as usize;
    if shift == 0 || ((shift as f64) * spacing - tau).abs() > 1e-9 * tau {
        return Err(LabError::Precondition(
            "period must be a multiple of the recorded time step".into(),
        ));
    }
    let count = traj.len().saturating_sub(shift);
    let (l2, max): (Vec<f64>, Vec<f64>) = (0..count)
        .into_par_iter()
        .map(|k| {
            let d: Vec<f64> = traj.states[k + shift]
                .iter()
                .zip(&traj.states[k])
                .map(|(a, b)| a - b)
                .collect();
            (
                system.l2_norm(&d),
                d.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            )
        })
        .unzip();
    Ok(PeriodicityReport {
        tau,
        times: traj.times[..count].to_vec(),
        l2,
        max,
    })
}
