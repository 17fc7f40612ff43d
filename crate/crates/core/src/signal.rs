//! Time-dependent data on the domain or on its boundary.
//!
//! A [`Signal`] is a finite sum of separable terms `profile(x) * temporal(t)`.
//! Trigonometric polynomials, decaying and compactly supported pulses,
//! square waves and tabulated data (piecewise linear in time) are all
//! expressed this way, which makes long-run averages computable in closed
//! form.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::coefficients::Field;
use crate::error::{LabError, Result};
use crate::forms::AssembledSystem;
use crate::mesh::Point;

/// Where the data lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Volume,
    Boundary,
}

/// Scalar time factor of a signal term.
#[derive(Clone)]
pub enum Temporal {
    Constant,
    /// `cos(freq t + phase)`
    Cos {
        freq: f64,
        phase: f64,
    },
    /// `exp(-rate t)`
    Decay {
        rate: f64,
    },
    /// Indicator of `[start, end)`.
    Window {
        start: f64,
        end: f64,
    },
    /// `+1` on the first `duty` fraction of each period, `-1` on the rest.
    Square {
        period: f64,
        duty: f64,
    },
    /// Piecewise linear hat: 0 outside `(left, right)`, 1 at `peak`.
    Hat {
        left: f64,
        peak: f64,
        right: f64,
    },
    Product(Box<Temporal>, Box<Temporal>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Temporal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Temporal::Constant => f.write_str("Constant"),
            Temporal::Cos { freq, phase } => write!(f, "Cos {{ freq: {freq}, phase: {phase} }}"),
            Temporal::Decay { rate } => write!(f, "Decay {{ rate: {rate} }}"),
            Temporal::Window { start, end } => write!(f, "Window {{ start: {start}, end: {end} }}"),
            Temporal::Square { period, duty } => {
                write!(f, "Square {{ period: {period}, duty: {duty} }}")
            }
            Temporal::Hat { left, peak, right } => {
                write!(f, "Hat {{ left: {left}, peak: {peak}, right: {right} }}")
            }
            Temporal::Product(a, b) => write!(f, "Product({a:?}, {b:?})"),
            Temporal::Custom(_) => f.write_str("Custom(<fn>)"),
        }
    }
}

impl Temporal {
    pub fn cos(freq: f64) -> Temporal {
        Temporal::Cos { freq, phase: 0.0 }
    }

    pub fn sin(freq: f64) -> Temporal {
        Temporal::Cos {
            freq,
            phase: -0.5 * PI,
        }
    }

    pub fn times(self, other: Temporal) -> Temporal {
        Temporal::Product(Box::new(self), Box::new(other))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Temporal::Constant => 1.0,
            Temporal::Cos { freq, phase } => (freq * t + phase).cos(),
            Temporal::Decay { rate } => (-rate * t).exp(),
            Temporal::Window { start, end } => {
                if t >= *start && t < *end {
                    1.0
                } else {
                    0.0
                }
            }
            Temporal::Square { period, duty } => {
                let frac = (t / period).rem_euclid(1.0);
                if frac < *duty {
                    1.0
                } else {
                    -1.0
                }
            }
            Temporal::Hat { left, peak, right } => {
                if t <= *left || t >= *right {
                    if t == *peak {
                        1.0
                    } else {
                        0.0
                    }
                } else if t <= *peak {
                    (t - left) / (peak - left)
                } else {
                    (right - t) / (right - peak)
                }
            }
            Temporal::Product(a, b) => a.eval(t) * b.eval(t),
            Temporal::Custom(f) => f(t),
        }
    }

    /// Tends to zero as `t` grows (and is bounded).
    pub fn is_decaying(&self) -> bool {
        match self {
            Temporal::Decay { rate } => *rate > 0.0,
            Temporal::Window { end, .. } => end.is_finite(),
            Temporal::Hat { right, .. } => right.is_finite(),
            Temporal::Product(a, b) => {
                (a.is_decaying() && b.is_bounded()) || (b.is_decaying() && a.is_bounded())
            }
            _ => false,
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            Temporal::Decay { rate } => *rate >= 0.0,
            Temporal::Product(a, b) => a.is_bounded() && b.is_bounded(),
            Temporal::Custom(_) => false,
            _ => true,
        }
    }

    /// Long-run average of `exp(-i eta t) * self(t)`, if known in closed form.
    pub fn cesaro(&self, eta: f64) -> Option<Complex64> {
        if self.is_decaying() {
            return Some(Complex64::new(0.0, 0.0));
        }
        match self {
            Temporal::Constant => Some(if eta == 0.0 { 1.0 } else { 0.0 }.into()),
            Temporal::Decay { rate } if *rate == 0.0 => Temporal::Constant.cesaro(eta),
            Temporal::Cos { freq, phase } => {
                let (w, p) = (*freq, *phase);
                if w == 0.0 {
                    return Temporal::Constant.cesaro(eta).map(|c| c * p.cos());
                }
                let mut c = Complex64::new(0.0, 0.0);
                if eta == w {
                    c += Complex64::from_polar(0.5, p);
                }
                if eta == -w {
                    c += Complex64::from_polar(0.5, -p);
                }
                Some(c)
            }
            Temporal::Square { period, duty } => {
                let base = 2.0 * PI / period;
                let k = (eta / base).round();
                if (eta - k * base).abs() > 1e-12 * base.max(eta.abs()) {
                    return Some(Complex64::new(0.0, 0.0));
                }
                if k == 0.0 {
                    return Some((2.0 * duty - 1.0).into());
                }
                // (1/P) [int_0^{dP} - int_{dP}^P] exp(-i k w t) dt
                let kw = k * base;
                let prim = |t: f64| Complex64::from_polar(1.0, -kw * t) / Complex64::new(0.0, -kw);
                let split = duty * period;
                let c = (prim(split) - prim(0.0)) - (prim(*period) - prim(split));
                Some(c / *period)
            }
            Temporal::Product(a, b) => match (a.as_ref(), b.as_ref()) {
                (Temporal::Constant, x) | (x, Temporal::Constant) => x.cesaro(eta),
                _ => None,
            },
            _ => None,
        }
    }

    /// Frequencies at which [`Temporal::cesaro`] may be nonzero, when finite.
    pub fn frequencies(&self) -> Option<Vec<f64>> {
        if self.is_decaying() {
            return Some(Vec::new());
        }
        match self {
            Temporal::Constant => Some(vec![0.0]),
            Temporal::Decay { rate } if *rate == 0.0 => Some(vec![0.0]),
            Temporal::Cos { freq, .. } if *freq == 0.0 => Some(vec![0.0]),
            Temporal::Cos { freq, .. } => Some(vec![-freq.abs(), freq.abs()]),
            Temporal::Product(a, b) => match (a.as_ref(), b.as_ref()) {
                (Temporal::Constant, x) | (x, Temporal::Constant) => x.frequencies(),
                _ => None,
            },
            _ => None,
        }
    }
}

/// One separable term `profile(x) * temporal(t)`.
#[derive(Clone, Debug)]
pub struct Term {
    pub profile: Field,
    pub temporal: Temporal,
}

/// Data `f(t, x)` on the domain or `g(t, x)` on the boundary.
#[derive(Clone, Debug)]
pub struct Signal {
    target: Target,
    terms: Vec<Term>,
}

impl Signal {
    pub fn zero(target: Target) -> Signal {
        Signal {
            target,
            terms: Vec::new(),
        }
    }

    pub fn volume() -> Signal {
        Signal::zero(Target::Volume)
    }

    pub fn boundary() -> Signal {
        Signal::zero(Target::Boundary)
    }

    /// Adds the term `profile(x) * temporal(t)`.
    pub fn with(mut self, profile: impl Into<Field>, temporal: Temporal) -> Signal {
        self.terms.push(Term {
            profile: profile.into(),
            temporal,
        });
        self
    }

    /// Time-independent data.
    pub fn steady(target: Target, profile: impl Into<Field>) -> Signal {
        Signal::zero(target).with(profile, Temporal::Constant)
    }

    /// Data given at increasing times, interpolated linearly in between and
    /// zero outside `[times[0], times[last]]`.
    pub fn tabulated(target: Target, times: &[f64], profiles: Vec<Field>) -> Result<Signal> {
        if times.len() != profiles.len() || times.is_empty() {
            return Err(LabError::input("tabulated", "need one profile per time"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::input("tabulated", "times must increase strictly"));
        }
        let n = times.len();
        let mut s = Signal::zero(target);
        for (k, p) in profiles.into_iter().enumerate() {
            let peak = times[k];
            let left = if k == 0 { peak } else { times[k - 1] };
            let right = if k + 1 == n { peak } else { times[k + 1] };
            s = s.with(p, Temporal::Hat { left, peak, right });
        }
        Ok(s)
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.profile.is_zero())
    }

    pub fn eval(&self, t: f64, x: &Point) -> f64 {
        self.terms
            .iter()
            .map(|term| term.profile.eval(x) * term.temporal.eval(t))
            .sum()
    }

    /// Sum of two signals on the same target.
    pub fn plus(mut self, other: &Signal) -> Result<Signal> {
        if self.target != other.target {
            return Err(LabError::input(
                "signal",
                "cannot add volume and boundary data",
            ));
        }
        self.terms.extend(other.terms.iter().cloned());
        Ok(self)
    }

    pub fn scaled(&self, s: f64) -> Signal {
        Signal {
            target: self.target,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    profile: t.profile.scaled(s),
                    temporal: t.temporal.clone(),
                })
                .collect(),
        }
    }

    /// Closed-form long-run average of `exp(-i eta t) f(t)` as a complex
    /// combination of the term profiles.
    pub fn cesaro_terms(&self, eta: f64) -> Result<Vec<(Field, Complex64)>> {
        self.terms
            .iter()
            .map(|t| {
                t.temporal
                    .cesaro(eta)
                    .map(|c| (t.profile.clone(), c))
                    .ok_or_else(|| {
                        LabError::Precondition(format!(
                            "no closed-form average for temporal factor {:?}",
                            t.temporal
                        ))
                    })
            })
            .collect()
    }
}

/// Which mass matrix multiplies the volume data and the time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassKind {
    #[default]
    Consistent,
    /// Row-sum lumped mass; keeps the scheme monotone on acute meshes.
    Lumped,
}

/// A signal with its profiles interpolated on a mesh and the matching load vectors.
#[derive(Debug, Clone)]
pub struct DiscreteSignal {
    temporals: Vec<Temporal>,
    nodal: Vec<Vec<f64>>,
    loads: Vec<Vec<f64>>,
    /// Gram matrix of the nodal profiles in the L2 pairing of the target.
    gram: Vec<Vec<f64>>,
    ndof: usize,
}

impl DiscreteSignal {
    pub fn new(system: &AssembledSystem, signal: &Signal, mass: MassKind) -> DiscreteSignal {
        let ndof = system.ndof();
        let boundary = system.mesh().boundary_vertices();
        let mut nodal = Vec::new();
        let mut temporals = Vec::new();
        for term in signal.terms() {
            let mut v = system.interpolate(&term.profile);
            if signal.target() == Target::Boundary {
                let mut masked = vec![0.0; ndof];
                for &b in &boundary {
                    masked[b] = v[b];
                }
                v = masked;
            }
            nodal.push(v);
            temporals.push(term.temporal.clone());
        }
        let apply = |v: &[f64]| -> Vec<f64> {
            match (signal.target(), mass) {
                (Target::Boundary, _) => system.boundary_mass.mul_vec(v),
                (Target::Volume, MassKind::Consistent) => system.mass.mul_vec(v),
                (Target::Volume, MassKind::Lumped) => v
                    .iter()
                    .zip(&system.lumped_mass)
                    .map(|(a, m)| a * m)
                    .collect(),
            }
        };
        let loads: Vec<Vec<f64>> = nodal.iter().map(|v| apply(v)).collect();
        let pairing = match signal.target() {
            Target::Volume => &system.mass,
            Target::Boundary => &system.boundary_mass,
        };
        let gram = nodal
            .iter()
            .map(|a| nodal.iter().map(|b| pairing.form(a, b)).collect())
            .collect();
        DiscreteSignal {
            temporals,
            nodal,
            loads,
            gram,
            ndof,
        }
    }

    fn weights(&self, t: f64) -> Vec<f64> {
        self.temporals.iter().map(|tf| tf.eval(t)).collect()
    }

    /// `M f_h(t)` (or `Mb g_h(t)`), added into `out` with factor `scale`.
    pub fn add_load(&self, t: f64, scale: f64, out: &mut [f64]) {
        for (w, load) in self.weights(t).into_iter().zip(&self.loads) {
            if w != 0.0 {
                crate::linalg::axpy(scale * w, load, out);
            }
        }
    }

    pub fn load(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.ndof];
        self.add_load(t, 1.0, &mut out);
        out
    }

    /// Nodal values at time `t`.
    pub fn nodal(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.ndof];
        for (w, v) in self.weights(t).into_iter().zip(&self.nodal) {
            if w != 0.0 {
                crate::linalg::axpy(w, v, &mut out);
            }
        }
        out
    }

    /// Squared L2 norm (on the domain or boundary) of the interpolant at time `t`.
    pub fn norm_squared(&self, t: f64) -> f64 {
        let w = self.weights(t);
        let mut s = 0.0;
        for (i, wi) in w.iter().enumerate() {
            for (j, wj) in w.iter().enumerate() {
                s += wi * wj * self.gram[i][j];
            }
        }
        s.max(0.0)
    }

    /// Total mass `1^T load(t)`.
    pub fn total(&self, t: f64) -> f64 {
        self.load(t).iter().sum()
    }
}

/// Largest `|int f(t) + int_dOmega g(t)|` over the sample times.
pub fn compatibility_defect(
    system: &AssembledSystem,
    f: &Signal,
    g: &Signal,
    times: &[f64],
) -> f64 {
    let fd = DiscreteSignal::new(system, f, MassKind::Consistent);
    let gd = DiscreteSignal::new(system, g, MassKind::Consistent);
    times
        .iter()
        .map(|&t| (fd.total(t) + gd.total(t)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientSet;
    use crate::forms::assemble;
    use crate::mesh::build_interval_mesh;

    #[test]
    fn temporal_values() {
        assert_eq!(Temporal::Constant.eval(3.0), 1.0);
        assert!((Temporal::sin(2.0).eval(0.25 * PI) - 1.0).abs() < 1e-15);
        let sq = Temporal::Square {
            period: 2.0,
            duty: 0.5,
        };
        assert_eq!(sq.eval(0.5), 1.0);
        assert_eq!(sq.eval(1.5), -1.0);
        assert_eq!(sq.eval(2.5), 1.0);
        let hat = Temporal::Hat {
            left: 0.0,
            peak: 1.0,
            right: 3.0,
        };
        assert_eq!(hat.eval(0.5), 0.5);
        assert_eq!(hat.eval(2.0), 0.5);
        assert_eq!(hat.eval(4.0), 0.0);
    }

    #[test]
    fn closed_form_averages() {
        let c = Temporal::Cos {
            freq: 3.0,
            phase: 0.4,
        };
        let p = c.cesaro(3.0).unwrap();
        let m = c.cesaro(-3.0).unwrap();
        assert!((p - m.conj()).norm() < 1e-15);
        assert!((p.norm() - 0.5).abs() < 1e-15);
        assert_eq!(c.cesaro(1.0).unwrap().norm(), 0.0);
        assert_eq!(
            Temporal::Decay { rate: 1.0 }.cesaro(0.0).unwrap().norm(),
            0.0
        );
        let sq = Temporal::Square {
            period: 2.0 * PI,
            duty: 0.5,
        };
        // Fundamental of a unit square wave has modulus 2 / pi.
        assert!((sq.cesaro(1.0).unwrap().norm() - 2.0 / PI).abs() < 1e-14);
        assert!(sq.cesaro(2.0).unwrap().norm() < 1e-14);
        assert!(sq.cesaro(0.0).unwrap().norm() < 1e-15);
        assert!(Temporal::Custom(Arc::new(|t| t)).cesaro(0.0).is_none());
    }

    #[test]
    fn tabulated_interpolates() {
        let s = Signal::tabulated(
            Target::Volume,
            &[0.0, 1.0, 2.0],
            vec![
                Field::constant(0.0),
                Field::constant(2.0),
                Field::constant(4.0),
            ],
        )
        .unwrap();
        assert!((s.eval(0.5, &[0.3, 0.0]) - 1.0).abs() < 1e-15);
        assert!((s.eval(1.5, &[0.3, 0.0]) - 3.0).abs() < 1e-15);
        assert!(
            Signal::tabulated(Target::Volume, &[1.0, 0.0], vec![1.0.into(), 1.0.into()]).is_err()
        );
    }

    #[test]
    fn discrete_loads_and_norms() {
        let sys = assemble(
            build_interval_mesh(10).unwrap(),
            &CoefficientSet::laplacian(),
            4,
        )
        .unwrap();
        let f = Signal::volume().with(2.0, Temporal::Decay { rate: 1.0 });
        let d = DiscreteSignal::new(&sys, &f, MassKind::Consistent);
        assert!((d.total(0.0) - 2.0).abs() < 1e-12);
        assert!((d.norm_squared(0.0) - 4.0).abs() < 1e-12);
        let g = Signal::boundary().with(Field::parse("2*x - 1").unwrap(), Temporal::cos(2.0));
        let gd = DiscreteSignal::new(&sys, &g, MassKind::Consistent);
        assert!(gd.total(0.3).abs() < 1e-14);
        assert!((gd.norm_squared(0.0) - 2.0).abs() < 1e-12);
        assert!(compatibility_defect(&sys, &Signal::volume(), &g, &[0.0, 1.0, 2.0]) < 1e-14);
    }
}
