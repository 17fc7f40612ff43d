//! Windowed space-time norms of time-dependent data.
//!
//! For a scalar profile `n(t) = |f(t)|_{L^q}` and a window length `T`,
//! the running norm is `R(t) = (int_t^{t+T} n(s)^r ds)^{1/r}`. Data whose
//! running norm is bounded are uniformly mean integrable; if in addition
//! `R(t) -> 0` they are mean integrable with decay. The limit is only ever
//! tested on a finite horizon: all samples after `t_tail` below `tol`.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::forms::AssembledSystem;
use crate::signal::{DiscreteSignal, MassKind, Signal, Target};

/// Running norm `t -> R(t)` together with the samples it was computed from.
#[derive(Debug, Clone)]
pub struct NormProfile {
    pub r: f64,
    pub q: f64,
    pub window: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Set where the window reaches past the last sample.
    pub truncated: Vec<bool>,
    pub source: String,
    source_times: Vec<f64>,
    source_norms: Vec<f64>,
}

/// Samples `norm(t)` on `0, step, ..., t_end`.
pub fn sample_profile(norm: impl Fn(f64) -> f64, t_end: f64, step: f64) -> (Vec<f64>, Vec<f64>) {
    let n = (t_end / step).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * t_end / n as f64).collect();
    let values = times.iter().map(|&t| norm(t)).collect();
    (times, values)
}

/// `|f(t)|_{L^q}` (of the interpolant, on the domain or boundary) at the given times.
pub fn signal_lq_norms(
    system: &AssembledSystem,
    signal: &Signal,
    q: f64,
    times: &[f64],
) -> Vec<f64> {
    let d = DiscreteSignal::new(system, signal, MassKind::Consistent);
    times
        .par_iter()
        .map(|&t| {
            let u = d.nodal(t);
            match signal.target() {
                Target::Volume => system.lq_norm(&u, q),
                Target::Boundary => system.boundary_lq_norm(&u, q),
            }
        })
        .collect()
}

/// Linear interpolant of `g` at `t`, with `k` the interval containing `t`.
fn interp(times: &[f64], g: &[f64], k: usize, t: f64) -> f64 {
    let h = times[k + 1] - times[k];
    g[k] + (g[k + 1] - g[k]) * (t - times[k]) / h
}

/// Integral of the piecewise linear interpolant of `g` over `[a, b]`
/// clipped to the sample range. Summed directly rather than as a difference
/// of running sums, so small windows far out keep their relative accuracy.
pub(crate) fn integrate(times: &[f64], g: &[f64], a: f64, b: f64) -> f64 {
    let last = times.len() - 1;
    let (a, b) = (a.max(times[0]), b.min(times[last]));
    if b <= a {
        return 0.0;
    }
    let mut k = times
        .partition_point(|&s| s <= a)
        .saturating_sub(1)
        .min(last - 1);
    let mut s = 0.0;
    let mut lo = a;
    while k < last && times[k] < b {
        let hi = times[k + 1].min(b);
        if hi > lo {
            s += 0.5 * (hi - lo) * (interp(times, g, k, lo) + interp(times, g, k, hi));
        }
        lo = hi;
        k += 1;
    }
    s
}

/// Running norm over windows of length `window` starting at each point of `grid`.
pub fn running_norm(
    times: &[f64],
    norms: &[f64],
    r: f64,
    q: f64,
    window: f64,
    grid: &[f64],
) -> Result<NormProfile> {
    if times.len() != norms.len() || times.len() < 2 {
        return Err(LabError::input(
            "norms",
            "need at least two samples, one per time",
        ));
    }
    if !(r >= 1.0 && q >= 1.0) {
        return Err(LabError::input("r, q", "exponents must be at least 1"));
    }
    if !(window > 0.0) {
        return Err(LabError::input("window", "must be positive"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::input(
            "times",
            "sample grids must increase strictly",
        ));
    }
    let spacing = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if spacing > window / 10.0 {
        return Err(LabError::Precondition(format!(
            "sample spacing {spacing} is coarser than window / 10 = {}",
            window / 10.0
        )));
    }
    if norms.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(LabError::input("norms", "must be finite and nonnegative"));
    }
    let g: Vec<f64> = norms.iter().map(|n| n.powf(r)).collect();
    let end = *times.last().unwrap();
    let mut values = Vec::with_capacity(grid.len());
    let mut truncated = Vec::with_capacity(grid.len());
    for &t in grid {
        let hi = t + window;
        truncated.push(hi > end * (1.0 + 1e-12));
        let integral = integrate(times, &g, t, hi);
        values.push(integral.max(0.0).powf(1.0 / r));
    }
    Ok(NormProfile {
        r,
        q,
        window,
        times: grid.to_vec(),
        values,
        truncated,
        source: String::new(),
        source_times: times.to_vec(),
        source_norms: norms.to_vec(),
    })
}

impl NormProfile {
    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    /// Samples `(t, |f(t)|)` the profile was built from.
    pub fn source_samples(&self) -> (&[f64], &[f64]) {
        (&self.source_times, &self.source_norms)
    }

    /// Profile values whose window lies inside the data.
    pub fn complete_values(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .zip(&self.values)
            .zip(&self.truncated)
            .filter(|(_, tr)| !**tr)
            .map(|((t, v), _)| (*t, *v))
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,R")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }
}

/// Supremum of the running norm over complete windows.
pub fn m_norm(profile: &NormProfile) -> f64 {
    let complete = profile
        .complete_values()
        .map(|(_, v)| v)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    complete.unwrap_or_else(|| profile.values.iter().copied().fold(0.0, f64::max))
}

/// All samples at or after `t_tail` lie below `tol`.
pub fn is_m0(profile: &NormProfile, tol: f64, t_tail: f64) -> Result<bool> {
    let tail: Vec<f64> = profile
        .times
        .iter()
        .zip(&profile.values)
        .filter(|(t, _)| **t >= t_tail)
        .map(|(_, v)| *v)
        .collect();
    if tail.is_empty() {
        return Err(LabError::Precondition(format!(
            "profile ends before t_tail = {t_tail}"
        )));
    }
    Ok(tail.iter().all(|v| *v < tol))
}

/// Measured value against the constant allowed by the corresponding inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
}

impl Inequality {
    /// `lhs <= rhs` up to a relative slack for quadrature rounding.
    pub fn holds(&self, rel_slack: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + rel_slack) + f64::MIN_POSITIVE
    }
}

/// Ratio of the m-norms for two window lengths against `ceil(T' / T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRatio {
    pub ratio: f64,
    pub bound: f64,
}

pub fn window_equivalence_ratio(a: &NormProfile, b: &NormProfile) -> Result<WindowRatio> {
    if a.source != b.source || a.r != b.r || a.q != b.q || a.source_norms != b.source_norms {
        return Err(LabError::input(
            "profiles",
            "must come from the same signal and exponents",
        ));
    }
    let (short, long) = if a.window <= b.window { (a, b) } else { (b, a) };
    let (ms, ml) = (m_norm(short), m_norm(long));
    let ratio = if ms == 0.0 {
        if ml == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        ml / ms
    };
    Ok(WindowRatio {
        ratio,
        bound: (long.window / short.window - 1e-12).ceil(),
    })
}

/// Inclusion of mean spaces with smaller exponents:
/// `m_{r', q'} <= T^{(r - r')/(r r')} |Omega|^{(q - q')/(q q')} m_{r, q}`.
pub fn embedding_check(
    lower: &NormProfile,
    higher: &NormProfile,
    domain_measure: f64,
) -> Result<Inequality> {
    if lower.r > higher.r || lower.q > higher.q {
        return Err(LabError::input(
            "profiles",
            "first profile must carry the smaller exponents",
        ));
    }
    if lower.window != higher.window {
        return Err(LabError::input("profiles", "window lengths differ"));
    }
    let (r, rp, q, qp) = (higher.r, lower.r, higher.q, lower.q);
    let c = higher.window.powf((r - rp) / (r * rp)) * domain_measure.powf((q - qp) / (q * qp));
    Ok(Inequality {
        lhs: m_norm(lower),
        rhs: c * m_norm(higher),
    })
}

/// Bounded data are uniformly mean integrable: `m_norm <= T^{1/r} sup |f(t)|`.
pub fn bounded_embedding_check(profile: &NormProfile) -> Inequality {
    let sup = profile.source_norms.iter().copied().fold(0.0, f64::max);
    Inequality {
        lhs: m_norm(profile),
        rhs: profile.window.powf(1.0 / profile.r) * sup,
    }
}

/// A nonnegative, nonincreasing, integrable convolution kernel.
#[derive(Clone)]
pub struct Kernel {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `int_0^inf h`
    pub l1: f64,
    /// `sup h = h(0)`
    pub sup: f64,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Kernel {{ l1: {}, sup: {} }}", self.l1, self.sup)
    }
}

impl Kernel {
    /// `e^{-rate s}`
    pub fn exponential(rate: f64) -> Result<Kernel> {
        if !(rate > 0.0) {
            return Err(LabError::input("rate", "must be positive"));
        }
        Ok(Kernel {
            f: Arc::new(move |s| (-rate * s).exp()),
            l1: 1.0 / rate,
            sup: 1.0,
        })
    }

    /// Indicator of `[0, len]`.
    pub fn indicator(len: f64) -> Result<Kernel> {
        if !(len > 0.0) {
            return Err(LabError::input("len", "must be positive"));
        }
        Ok(Kernel {
            f: Arc::new(move |s| if s <= len { 1.0 } else { 0.0 }),
            l1: len,
            sup: 1.0,
        })
    }

    /// A kernel with certified norms; monotonicity is checked on `[0, horizon]`.
    pub fn custom(
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        l1: f64,
        sup: f64,
        horizon: f64,
    ) -> Result<Kernel> {
        let n = 10_000;
        let mut prev = f64::INFINITY;
        for k in 0..=n {
            let v = h(horizon * k as f64 / n as f64);
            if !(v >= 0.0) || v > prev * (1.0 + 1e-12) {
                return Err(LabError::input(
                    "kernel",
                    "must be nonnegative and nonincreasing",
                ));
            }
            prev = v;
        }
        Ok(Kernel {
            f: Arc::new(h),
            l1,
            sup,
        })
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }
}

/// `t -> int_0^t h(t - s) |f(s)|^r ds` on the profile's source grid.
pub fn convolution(profile: &NormProfile, kernel: &Kernel) -> Vec<f64> {
    let (ts, ns) = profile.source_samples();
    let g: Vec<f64> = ns.iter().map(|n| n.powf(profile.r)).collect();
    (0..ts.len())
        .into_par_iter()
        .map(|j| {
            let t = ts[j];
            let mut s = 0.0;
            for k in 1..=j {
                let h = ts[k] - ts[k - 1];
                s += 0.5
                    * h
                    * (kernel.eval(t - ts[k - 1]) * g[k - 1] + kernel.eval(t - ts[k]) * g[k]);
            }
            s
        })
        .collect()
}

/// Convolution values against `(|h|_inf + (2/T) |h|_1) m_norm^r`.
#[derive(Debug, Clone)]
pub struct ConvolutionCheck {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: f64,
}

impl ConvolutionCheck {
    pub fn max_lhs(&self) -> f64 {
        self.lhs.iter().copied().fold(0.0, f64::max)
    }

    pub fn holds(&self, rel_slack: f64) -> bool {
        self.max_lhs() <= self.rhs * (1.0 + rel_slack)
    }
}

pub fn convolution_bound_check(profile: &NormProfile, kernel: &Kernel) -> ConvolutionCheck {
    let lhs = convolution(profile, kernel);
    let rhs = (kernel.sup + 2.0 / profile.window * kernel.l1) * m_norm(profile).powf(profile.r);
    ConvolutionCheck {
        times: profile.source_times.clone(),
        lhs,
        rhs,
    }
}

/// Outcome of the decay test for the convolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionDecay {
    pub tail_max: f64,
    pub decays: bool,
}

/// Checks that the convolution falls below `tol` after `t_tail`. The
/// profile itself must pass [`is_m0`] with the same `(tol, t_tail)`.
pub fn convolution_decay_check(
    profile: &NormProfile,
    kernel: &Kernel,
    tol: f64,
    t_tail: f64,
) -> Result<ConvolutionDecay> {
    if !is_m0(profile, tol, t_tail)? {
        return Err(LabError::Precondition(
            "running norm does not decay; the data are not in the decaying mean space".into(),
        ));
    }
    let conv = convolution(profile, kernel);
    let (ts, _) = profile.source_samples();
    // The convolution needs the kernel tail to die out as well: test on the
    // last fifth of the horizon beyond t_tail.
    let t_end = *ts.last().unwrap();
    let from = t_tail.max(t_end - 0.2 * (t_end - t_tail));
    let tail_max = ts
        .iter()
        .zip(&conv)
        .filter(|(t, _)| **t >= from)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    Ok(ConvolutionDecay {
        tail_max,
        decays: tail_max < tol,
    })
}
