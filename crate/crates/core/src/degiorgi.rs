//! De Giorgi machinery: the iteration lemma for coupled sequences, level
//! sets and truncations of discrete solutions, the truncated energy
//! inequality and the resulting sup-norm bound.
//!
//! Time windows follow the forward convention: a window of length `tau` is
//! `[T - tau, T]` at the end of the trajectory.
//!
//! # Iteration lemma
//!
//! For `c >= 0`, `b >= 1`, `eps, delta > 0` let `d = min(delta, eps / (1 + eps))`
//! and
//!
//! ```text
//! lambda = min((2c)^(-1/delta) b^(-1/(delta d)), (2c)^(-(1+eps)/eps) b^(-1/(eps d))).
//! ```
//!
//! Nonnegative sequences with
//! `y_{n+1} <= c b^n (y_n^{1+delta} + z_n^{1+eps} y_n^delta)`,
//! `z_{n+1} <= c b^n (y_n + z_n^{1+eps})`, `y_0 <= lambda` and
//! `z_0 <= lambda^{1/(1+eps)}` satisfy `y_n <= lambda b^{-n/d}` and
//! `z_n <= (lambda b^{-n/d})^{1/(1+eps)}`. The right hand sides are
//! increasing in `y_n` and `z_n`, so the sequences attaining equality
//! dominate every admissible pair. [`iteration_lemma_verify`] runs them in
//! double-double log arithmetic.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coefficients::{BoundaryField, CoefficientSet, Field};
use crate::error::{LabError, Result};
use crate::extended::DoubleDouble as Dd;
use crate::forms::{assemble, AssembledSystem, CellGeometry};
use crate::mean_spaces::{integrate, signal_lq_norms};
use crate::mesh::{build_interval_mesh, Mesh};
use crate::parabolic::{solve_parabolic, TimeStepping, Trajectory};
use crate::signal::{Signal, Temporal};

/// Slack granted to the log-margins for rounding, relative to `1 + |ln Y_n|`.
/// Only matters where the extremal sequence touches the envelope exactly.
pub const ROUNDING_ALLOWANCE: f64 = 1e-28;

/// Parameters of the iteration lemma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationParams {
    pub c: f64,
    pub b: f64,
    pub eps: f64,
    pub delta: f64,
}

impl IterationParams {
    pub fn new(c: f64, b: f64, eps: f64, delta: f64) -> Result<IterationParams> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(LabError::input("c", "must be finite and nonnegative"));
        }
        if !(b >= 1.0 && b.is_finite()) {
            return Err(LabError::input("b", "must be finite and at least 1"));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(LabError::input("eps", "must be positive"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(LabError::input("delta", "must be positive"));
        }
        Ok(IterationParams { c, b, eps, delta })
    }

    /// `min(delta, eps / (1 + eps))`
    pub fn d(&self) -> f64 {
        self.delta.min(self.eps / (1.0 + self.eps))
    }

    fn d_dd(&self) -> Dd {
        let delta = Dd::new(self.delta);
        let e = Dd::new(self.eps) / (Dd::new(self.eps) + 1.0);
        if delta <= e {
            delta
        } else {
            e
        }
    }

    fn ln_lambda_dd(&self) -> Dd {
        if self.c == 0.0 {
            return Dd::new(f64::INFINITY);
        }
        let l2c = Dd::new(2.0 * self.c).ln();
        let lb = Dd::new(self.b).ln();
        let (delta, eps) = (Dd::new(self.delta), Dd::new(self.eps));
        let d = self.d_dd();
        let first = -(l2c / delta) - lb / (delta * d);
        let second = -((eps + 1.0) * l2c / eps) - lb / (eps * d);
        if first <= second {
            first
        } else {
            second
        }
    }

    /// `ln lambda`, `+inf` when `c = 0`.
    pub fn ln_lambda(&self) -> f64 {
        self.ln_lambda_dd().to_f64()
    }

    /// `lambda` itself; may underflow to zero for extreme parameters.
    pub fn lambda(&self) -> f64 {
        self.ln_lambda().exp()
    }
}

/// Initial value of one of the two sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start {
    Value(f64),
    /// The given multiple of the hypothesis bound: `s lambda` for `y_0`,
    /// `s lambda^{1/(1+eps)}` for `z_0`.
    Bound(f64),
}

impl Start {
    fn ln(self, ln_bound: Dd) -> Result<Dd> {
        match self {
            Start::Value(v) if v >= 0.0 && v.is_finite() => Ok(Dd::new(v).ln()),
            Start::Bound(s) if s >= 0.0 && s.is_finite() && ln_bound.is_finite() => {
                if s == 0.0 {
                    Ok(Dd::NEG_INFINITY)
                } else {
                    Ok(ln_bound + Dd::new(s).ln())
                }
            }
            Start::Bound(_) if !ln_bound.is_finite() => Err(LabError::input(
                "start",
                "the bound is infinite for c = 0; give an explicit value",
            )),
            _ => Err(LabError::input("start", "must be finite and nonnegative")),
        }
    }
}

/// Outcome of one saturated run.
#[derive(Debug, Clone)]
pub struct IterationReport {
    pub params: IterationParams,
    pub ln_lambda: f64,
    pub n_max: usize,
    /// Whether the initial values satisfy the hypotheses.
    pub applicable: bool,
    /// `ln(Y_n / y_n)` for `n = 0..=n_max`, `+inf` where `y_n = 0`.
    pub margins_y: Vec<f64>,
    /// `ln(Y_n^{1/(1+eps)} / z_n)`
    pub margins_z: Vec<f64>,
    pub min_margin: f64,
    /// Applicable and every margin nonnegative up to [`ROUNDING_ALLOWANCE`].
    pub passed: bool,
}

impl IterationReport {
    pub fn lambda(&self) -> f64 {
        self.ln_lambda.exp()
    }
}

/// Runs the saturated recurrence from `(y0, z0)` and compares it to the
/// envelope `Y_n = lambda b^{-n/d}` for `n <= n_max`. Initial values
/// outside the hypotheses are not an error: the run is still performed and
/// reported with `applicable = false`.
pub fn iteration_lemma_verify(
    params: &IterationParams,
    y0: Start,
    z0: Start,
    n_max: usize,
) -> Result<IterationReport> {
    if n_max < 1 {
        return Err(LabError::input("n_max", "must be at least 1"));
    }
    let p = IterationParams::new(params.c, params.b, params.eps, params.delta)?;
    let ln_lambda = p.ln_lambda_dd();
    let one_eps = Dd::new(p.eps) + 1.0;
    let one_delta = Dd::new(p.delta) + 1.0;
    let delta = Dd::new(p.delta);
    let lc = Dd::new(p.c).ln();
    let lb = Dd::new(p.b).ln();
    let d = p.d_dd();

    let mut ly = y0.ln(ln_lambda)?;
    let mut lz = z0.ln(ln_lambda / one_eps)?;
    let mut margins_y = Vec::with_capacity(n_max + 1);
    let mut margins_z = Vec::with_capacity(n_max + 1);
    let mut ok = true;
    let mut applicable = true;
    for n in 0..=n_max {
        let envelope = if ln_lambda.is_finite() {
            ln_lambda - lb * (n as f64) / d
        } else {
            ln_lambda
        };
        let my = margin(envelope, ly);
        let mz = margin(envelope / one_eps, lz);
        let allowance = ROUNDING_ALLOWANCE * (1.0 + envelope.hi.abs());
        if my.hi < -allowance || mz.hi < -allowance {
            ok = false;
            if n == 0 {
                applicable = false;
            }
        }
        margins_y.push(my.to_f64());
        margins_z.push(mz.to_f64());
        if n == n_max {
            break;
        }
        let scale = lc + lb * (n as f64);
        let power_z = lz.scale_log(one_eps);
        let ly_next = scale + Dd::logaddexp(ly.scale_log(one_delta), power_z + ly.scale_log(delta));
        let lz_next = scale + Dd::logaddexp(ly, power_z);
        ly = if ly_next.hi.is_nan() {
            Dd::NEG_INFINITY
        } else {
            ly_next
        };
        lz = if lz_next.hi.is_nan() {
            Dd::NEG_INFINITY
        } else {
            lz_next
        };
    }
    let min_margin = margins_y
        .iter()
        .chain(&margins_z)
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(IterationReport {
        params: p,
        ln_lambda: ln_lambda.to_f64(),
        n_max,
        applicable,
        margins_y,
        margins_z,
        min_margin,
        passed: applicable && ok,
    })
}

/// `bound - value` in the log domain, `+inf` when the value is zero.
fn margin(bound: Dd, value: Dd) -> Dd {
    if value.hi == f64::NEG_INFINITY || bound.hi == f64::INFINITY {
        Dd::new(f64::INFINITY)
    } else {
        bound - value
    }
}

/// Draws `count` parameter tuples with `c` in `[0.1, 10]`, `b` in `[1, 8]`
/// and `eps, delta` in `[0.1, 3]`, and verifies each from the hypothesis
/// boundary `y_0 = lambda`, `z_0 = lambda^{1/(1+eps)}`. Tuple `i` uses
/// stream `i` of a ChaCha generator seeded with `seed`, so the result does
/// not depend on the thread count.
pub fn iteration_panel(count: usize, seed: u64, n_max: usize) -> Result<Vec<IterationReport>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let p = IterationParams::new(
                rng.gen_range(0.1..=10.0),
                rng.gen_range(1.0..=8.0),
                rng.gen_range(0.1..=3.0),
                rng.gen_range(0.1..=3.0),
            )?;
            iteration_lemma_verify(&p, Start::Bound(1.0), Start::Bound(1.0), n_max)
        })
        .collect()
}

/// Writes `c,b,eps,delta,lambda,min_margin,n_max`, one line per report.
pub fn write_iteration_csv(reports: &[IterationReport], mut w: impl Write) -> Result<()> {
    writeln!(w, "c,b,eps,delta,lambda,min_margin,n_max")?;
    for r in reports {
        let p = &r.params;
        writeln!(
            w,
            "{},{},{},{},{:e},{:e},{}",
            p.c,
            p.b,
            p.eps,
            p.delta,
            r.lambda(),
            r.min_margin,
            r.n_max
        )?;
    }
    Ok(())
}

/// Level set data of one P1 function at one level `k`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LevelSlice {
    /// `|{u > k}|`
    pub volume: f64,
    /// Boundary measure of `{u > k}` (counting measure in 1D).
    pub boundary: f64,
    /// `int (u - k)_+^2`
    pub l2: f64,
    /// `int |grad (u - k)_+|^2 = int_{u > k} |grad u|^2`
    pub gradient: f64,
}

/// `int` of the square of the linear function with vertex values `a` over a
/// simplex of measure `m`.
fn simplex_square(m: f64, a: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mut s = 0.0;
    for i in 0..a.len() {
        for j in i..a.len() {
            s += a[i] * a[j];
        }
    }
    2.0 * m * s / (n * (n + 1.0))
}

/// `(measure of {a > 0}, int a_+^2)` for a linear function on a segment.
fn clip_segment(len: f64, p: f64, q: f64) -> (f64, f64) {
    match (p > 0.0, q > 0.0) {
        (false, false) => (0.0, 0.0),
        _ if p >= 0.0 && q >= 0.0 => (len, simplex_square(len, &[p, q])),
        _ => {
            let top = p.max(q);
            let frac = top / (p - q).abs();
            (len * frac, len * frac * top * top / 3.0)
        }
    }
}

/// Same for a triangle, by splitting the positive part into sub-triangles.
fn clip_triangle(area: f64, vals: [f64; 3]) -> (f64, f64) {
    let mut a = vals;
    a.sort_by(f64::total_cmp);
    let [a0, a1, a2] = a;
    if a2 <= 0.0 {
        (0.0, 0.0)
    } else if a0 >= 0.0 {
        (area, simplex_square(area, &a))
    } else if a1 <= 0.0 {
        // Corner at the largest vertex with values (a2, 0, 0).
        let f = a2 / (a2 - a0) * (a2 / (a2 - a1));
        (area * f, area * f * a2 * a2 / 6.0)
    } else {
        // Quadrilateral: triangles (v1, v2, P02) and (v1, P02, P01).
        let s = a0 / (a0 - a1);
        let t = a0 / (a0 - a2);
        let m1 = area * (1.0 - t);
        let m2 = area * t * (1.0 - s);
        (
            m1 + m2,
            simplex_square(m1, &[a1, a2, 0.0]) + m2 * a1 * a1 / 6.0,
        )
    }
}

/// Exact level set measures and truncation integrals of the P1 function
/// `u` at level `k`.
pub fn level_slice(mesh: &Mesh, u: &[f64], k: f64) -> LevelSlice {
    let mut out = LevelSlice::default();
    for c in 0..mesh.n_cells() {
        let geo = CellGeometry::new(mesh, c);
        let vals: Vec<f64> = geo.nodes[..geo.n].iter().map(|&i| u[i] - k).collect();
        let (m, l2) = if geo.n == 2 {
            clip_segment(geo.measure, vals[0], vals[1])
        } else {
            clip_triangle(geo.measure, [vals[0], vals[1], vals[2]])
        };
        if m > 0.0 {
            let mut g = [0.0; 2];
            for (j, &node) in geo.nodes[..geo.n].iter().enumerate() {
                g[0] += geo.grads[j][0] * u[node];
                g[1] += geo.grads[j][1] * u[node];
            }
            out.gradient += m * (g[0] * g[0] + g[1] * g[1]);
        }
        out.volume += m;
        out.l2 += l2;
    }
    for (f, facet) in mesh.boundary_facets().iter().enumerate() {
        out.boundary += if mesh.dim() == 1 {
            if u[facet.vertices[0]] > k {
                1.0
            } else {
                0.0
            }
        } else {
            let (i, j) = (facet.vertices[0], facet.vertices[1]);
            clip_segment(mesh.facet_measure(f), u[i] - k, u[j] - k).0
        };
    }
    out
}

/// Level sets and truncation energies of a trajectory at level `k` over the
/// final window `[T - tau, T]`.
#[derive(Debug, Clone)]
pub struct LevelSetProfile {
    pub k: f64,
    pub tau: f64,
    /// Recorded times used; the first may precede the window by one record.
    pub times: Vec<f64>,
    /// `|A_k(t)|`
    pub volume: Vec<f64>,
    /// `|B_k(t)|`
    pub boundary: Vec<f64>,
    /// `int |u^{(k)}(t)|^2`
    pub l2: Vec<f64>,
    /// `int |grad u^{(k)}(t)|^2`
    pub gradient: Vec<f64>,
    /// `||u^{(k)}||_{Q(tau)}^2`
    pub q_norm_sq: f64,
    pub warning: Option<String>,
}

impl LevelSetProfile {
    fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// `||u^{(k)}||_{Q(len)}^2` over `[T - len, T]` for `len <= tau`.
    pub fn q_norm_sq_over(&self, len: f64) -> f64 {
        let t = self.t_end();
        let a = t - len;
        let tol = 1e-9 * t.abs().max(len);
        let sup = self
            .times
            .iter()
            .zip(&self.l2)
            .filter(|(s, _)| **s >= a - tol)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max);
        sup + integrate(&self.times, &self.gradient, a, t)
    }

    /// `int_{T - tau}^T g(t) dt` for per-time values `g` on `times`.
    pub fn window_integral(&self, g: &[f64]) -> f64 {
        let t = self.t_end();
        integrate(&self.times, g, t - self.tau, t)
    }
}

fn window_start(times: &[f64], a: f64) -> usize {
    let tol = 1e-9 * times.last().unwrap().abs().max(1.0);
    times.partition_point(|&s| s <= a + tol).saturating_sub(1)
}

pub fn level_sets(traj: &Trajectory, k: f64, tau: f64) -> Result<LevelSetProfile> {
    if traj.len() < 2 {
        return Err(LabError::input(
            "trajectory",
            "need at least two recorded states",
        ));
    }
    let t_end = traj.t_end();
    let span = t_end - traj.times[0];
    if !(tau > 0.0 && tau <= span * (1.0 + 1e-12)) {
        return Err(LabError::input("tau", format!("must lie in (0, {span}]")));
    }
    if !k.is_finite() {
        return Err(LabError::input("k", "must be finite"));
    }
    let i0 = window_start(&traj.times, t_end - tau);
    let mesh = traj.mesh();
    let slices: Vec<LevelSlice> = traj.states[i0..]
        .par_iter()
        .map(|u| level_slice(mesh, u, k))
        .collect();
    let lowest = traj.states[i0..]
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let warning = (k < lowest)
        .then(|| format!("k = {k} is below min u = {lowest}: the level set is the whole domain"));
    let mut profile = LevelSetProfile {
        k,
        tau,
        times: traj.times[i0..].to_vec(),
        volume: slices.iter().map(|s| s.volume).collect(),
        boundary: slices.iter().map(|s| s.boundary).collect(),
        l2: slices.iter().map(|s| s.l2).collect(),
        gradient: slices.iter().map(|s| s.gradient).collect(),
        q_norm_sq: 0.0,
        warning,
    };
    profile.q_norm_sq = profile.q_norm_sq_over(tau);
    Ok(profile)
}

/// Integrability exponents of the data: `f` in `L^{r1}(L^{q1})`, `g` in
/// `L^{r2}(L^{q2})` on the boundary, and the coefficients of order zero in
/// `L^{coef_q}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub r1: f64,
    pub q1: f64,
    pub r2: f64,
    pub q2: f64,
    pub coef_q: f64,
}

impl Default for Exponents {
    fn default() -> Self {
        Exponents {
            r1: 4.0,
            q1: 4.0,
            r2: 4.0,
            q2: 4.0,
            coef_q: 4.0,
        }
    }
}

/// `(r, q, kappa)` of one measure term in the truncated energy inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureExponent {
    pub r: f64,
    pub q: f64,
    pub kappa: f64,
}

impl Exponents {
    /// Requires `r, q >= 2`, `1/r1 + N/(2 q1) < 1`,
    /// `1/r2 + (N-1)/(2 q2) < 1/2` and `coef_q > max(N, 2)`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        for (name, v) in [
            ("r1", self.r1),
            ("q1", self.q1),
            ("r2", self.r2),
            ("q2", self.q2),
        ] {
            if !(v >= 2.0 && v.is_finite()) {
                return Err(LabError::InvalidInput {
                    what: "exponents",
                    reason: format!("{name} = {v} must be finite and at least 2"),
                });
            }
        }
        let (k1, k2) = self.kappas(dim);
        if !(k1 > 0.0) {
            return Err(LabError::input(
                "exponents",
                "1/r1 + N/(2 q1) must be below 1",
            ));
        }
        if !(k2 > 0.0) {
            return Err(LabError::input(
                "exponents",
                "1/r2 + (N-1)/(2 q2) must be below 1/2",
            ));
        }
        if !(self.coef_q > (dim as f64).max(2.0) && self.coef_q.is_finite()) {
            return Err(LabError::input("exponents", "coef_q must exceed max(N, 2)"));
        }
        Ok(())
    }

    /// `kappa_1, kappa_2` with `1/r1 + N/(2 q1) = 1 - kappa_1 N / 2` and
    /// `1/r2 + (N-1)/(2 q2) = 1/2 - kappa_2 N / 2`.
    pub fn kappas(&self, dim: usize) -> (f64, f64) {
        let n = dim as f64;
        let k1 = 2.0 / n * (1.0 - 1.0 / self.r1 - n / (2.0 * self.q1));
        let k2 = 2.0 / n * (0.5 - 1.0 / self.r2 - (n - 1.0) / (2.0 * self.q2));
        (k1, k2)
    }

    /// Exponents of the volume terms (forcing, then coefficients) and of the
    /// boundary terms (forcing, then Robin weight).
    pub fn measure_exponents(&self, dim: usize) -> ([MeasureExponent; 2], [MeasureExponent; 2]) {
        let n = dim as f64;
        let q = self.coef_q;
        let (k1, k2) = self.kappas(dim);
        // Chosen so that every pair lies on 1/r + N/(2q) = N/4 (boundary:
        // 1/r + (N-1)/(2q) = N/4).
        let k12 = 2.0 * (q - n) / (q * n);
        let k22 = (q - n) / (n * (q - 1.0));
        let volume = [
            MeasureExponent {
                r: 2.0 * (1.0 + k1) * self.r1 / (self.r1 - 1.0),
                q: 2.0 * (1.0 + k1) * self.q1 / (self.q1 - 1.0),
                kappa: k1,
            },
            MeasureExponent {
                r: 2.0 * (1.0 + k12),
                q: 2.0 * (1.0 + k12) * q / (q - 2.0),
                kappa: k12,
            },
        ];
        let boundary = [
            MeasureExponent {
                r: 2.0 * (1.0 + k2) * self.r2 / (self.r2 - 1.0),
                q: 2.0 * (1.0 + k2) * self.q2 / (self.q2 - 1.0),
                kappa: k2,
            },
            MeasureExponent {
                r: 2.0 * (1.0 + k22),
                q: 2.0 * (1.0 + k22) * (q - 1.0) / (q - 2.0),
                kappa: k22,
            },
        ];
        (volume, boundary)
    }
}

/// `||s||_{L^r(t0, T; L^q)}` of a signal sampled at the trajectory times.
pub fn signal_mixed_norm(
    system: &AssembledSystem,
    signal: &Signal,
    r: f64,
    q: f64,
    times: &[f64],
) -> f64 {
    if signal.is_zero() || times.len() < 2 {
        return 0.0;
    }
    let norms = signal_lq_norms(system, signal, q, times);
    let g: Vec<f64> = norms.iter().map(|n| n.powf(r)).collect();
    integrate(times, &g, times[0], *times.last().unwrap())
        .max(0.0)
        .powf(1.0 / r)
}

/// `k_hat = (||f||^2_{L^{r1} L^{q1}} + ||g||^2_{L^{r2} L^{q2}})^{1/2}`
pub fn k_hat(
    system: &AssembledSystem,
    times: &[f64],
    f: &Signal,
    g: &Signal,
    exps: &Exponents,
) -> f64 {
    let nf = signal_mixed_norm(system, f, exps.r1, exps.q1, times);
    let ng = signal_mixed_norm(system, g, exps.r2, exps.q2, times);
    (nf * nf + ng * ng).sqrt()
}

/// Both sides of the truncated energy inequality at one `(k, tau, sigma)`.
#[derive(Debug, Clone)]
pub struct CaccioppoliReport {
    pub k: f64,
    pub k_hat: f64,
    pub tau: f64,
    pub sigma: f64,
    /// `||u^{(k)}||^2_{Q((1 - sigma) tau)}`
    pub lhs: f64,
    /// `(1 / (sigma tau)) int int |u^{(k)}|^2`
    pub energy_term: f64,
    /// `k^2 sum_l (int |A_k|^{r/q})^{2(1+kappa)/r}`
    pub volume_term: f64,
    /// Same with `|B_k|`.
    pub boundary_term: f64,
    /// Smallest `gamma` with `lhs <= gamma * (sum of the three terms)`.
    pub gamma_required: f64,
    pub warning: Option<String>,
}

impl CaccioppoliReport {
    pub fn rhs_terms(&self) -> [f64; 3] {
        [self.energy_term, self.volume_term, self.boundary_term]
    }
}

fn measure_term(profile: &LevelSetProfile, values: &[f64], exps: &[MeasureExponent; 2]) -> f64 {
    exps.iter()
        .map(|e| {
            let g: Vec<f64> = values.iter().map(|m| m.powf(e.r / e.q)).collect();
            profile
                .window_integral(&g)
                .max(0.0)
                .powf(2.0 * (1.0 + e.kappa) / e.r)
        })
        .sum()
}

/// Evaluates the truncated energy inequality on a discrete solution and
/// returns the constant it needs. Requires `k >= k_hat`, `tau` in `(0, T]`
/// and `sigma` in `(0, 1/2)`.
#[allow(clippy::too_many_arguments)]
pub fn caccioppoli_check(
    system: &AssembledSystem,
    traj: &Trajectory,
    f: &Signal,
    g: &Signal,
    k: f64,
    tau: f64,
    sigma: f64,
    exps: &Exponents,
) -> Result<CaccioppoliReport> {
    let dim = traj.mesh().dim();
    exps.validate(dim)?;
    if !(sigma > 0.0 && sigma < 0.5) {
        return Err(LabError::input("sigma", "must lie in (0, 1/2)"));
    }
    let kh = k_hat(system, &traj.times, f, g, exps);
    if k < kh * (1.0 - 1e-12) {
        return Err(LabError::Precondition(format!(
            "level k = {k} is below k_hat = {kh}"
        )));
    }
    let profile = level_sets(traj, k, tau)?;
    let lhs = profile.q_norm_sq_over((1.0 - sigma) * tau);
    let energy_term = profile.window_integral(&profile.l2) / (sigma * tau);
    let (ve, be) = exps.measure_exponents(dim);
    let volume_term = k * k * measure_term(&profile, &profile.volume, &ve);
    let boundary_term = k * k * measure_term(&profile, &profile.boundary, &be);
    let rhs = energy_term + volume_term + boundary_term;
    let gamma_required = if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    };
    Ok(CaccioppoliReport {
        k,
        k_hat: kh,
        tau,
        sigma,
        lhs,
        energy_term,
        volume_term,
        boundary_term,
        gamma_required,
        warning: profile.warning,
    })
}

/// Time range over which the supremum is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupWindow {
    /// `[T/2, T]`, any initial value.
    Late,
    /// `[0, T]`, zero initial value only.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupBound {
    pub window: SupWindow,
    /// Largest nodal `|u|` over the window.
    pub sup_norm: f64,
    /// `(||u||^2_{L^2 L^2} + ||f||^2 + ||g||^2)^{1/2}` over the whole horizon.
    pub rhs: f64,
    /// `sup_norm / rhs`, zero when both vanish.
    pub ratio: f64,
}

/// `sup |u|` against the data of the sup-norm a priori estimate.
pub fn sup_bound_check(
    system: &AssembledSystem,
    traj: &Trajectory,
    f: &Signal,
    g: &Signal,
    exps: &Exponents,
    window: SupWindow,
) -> Result<SupBound> {
    exps.validate(traj.mesh().dim())?;
    if traj.len() < 2 {
        return Err(LabError::input(
            "trajectory",
            "need at least two recorded states",
        ));
    }
    let (t0, t_end) = (traj.times[0], traj.t_end());
    let start = match window {
        SupWindow::Late => 0.5 * (t0 + t_end),
        SupWindow::Global => {
            if traj.states[0].iter().any(|v| *v != 0.0) {
                return Err(LabError::Precondition(
                    "the global bound needs a zero initial value".into(),
                ));
            }
            t0
        }
    };
    let tol = 1e-9 * t_end.abs().max(1.0);
    let sup_norm = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= start - tol)
        .flat_map(|(_, u)| u.iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    let sq: Vec<f64> = traj
        .states
        .iter()
        .map(|u| system.mass.form(u, u).max(0.0))
        .collect();
    let u_sq = integrate(&traj.times, &sq, t0, t_end);
    let kh = k_hat(system, &traj.times, f, g, exps);
    let rhs = (u_sq + kh * kh).sqrt();
    let ratio = if sup_norm == 0.0 { 0.0 } else { sup_norm / rhs };
    Ok(SupBound {
        window,
        sup_norm,
        rhs,
        ratio,
    })
}

/// Exponents of the anisotropic embedding, on the critical lines
/// `1/r1 + N/(2 q1) = N/4` and `1/r2 + (N-1)/(2 q2) = N/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisoExponents {
    pub r1: f64,
    pub q1: f64,
    pub r2: f64,
    pub q2: f64,
}

impl AnisoExponents {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let n = dim as f64;
        for v in [self.r1, self.q1, self.r2, self.q2] {
            if !(v >= 2.0 && v.is_finite()) {
                return Err(LabError::input(
                    "exponents",
                    "must be finite and at least 2",
                ));
            }
        }
        let e1 = 1.0 / self.r1 + n / (2.0 * self.q1) - n / 4.0;
        let e2 = 1.0 / self.r2 + (n - 1.0) / (2.0 * self.q2) - n / 4.0;
        if e1.abs() > 1e-12 {
            return Err(LabError::input("exponents", "need 1/r1 + N/(2 q1) = N/4"));
        }
        if e2.abs() > 1e-12 {
            return Err(LabError::input(
                "exponents",
                "need 1/r2 + (N-1)/(2 q2) = N/4",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AnisoEstimate {
    /// Largest ratio over the samples that are not identically zero.
    pub constant: f64,
    /// Per-sample ratio, `None` for zero samples.
    pub ratios: Vec<Option<f64>>,
}

/// `||u||_{Q}^2` of a whole trajectory: `sup ||u||^2 + int ||grad u||^2`.
pub fn q_norm_sq(system: &AssembledSystem, traj: &Trajectory) -> f64 {
    let l2: Vec<f64> = traj
        .states
        .iter()
        .map(|u| system.mass.form(u, u).max(0.0))
        .collect();
    let grad: Vec<f64> = traj
        .states
        .iter()
        .map(|u| system.h1_seminorm(u).powi(2))
        .collect();
    let sup = l2.iter().copied().fold(0.0, f64::max);
    sup + integrate(&traj.times, &grad, traj.times[0], traj.t_end())
}

/// Empirical constant of `||u||_{L^{r1} L^{q1}} + ||u||_{L^{r2} L^{q2}(bdry)} <= c ||u||_Q`,
/// each sample taken over its whole recorded horizon.
pub fn aniso_embedding_estimate(
    system: &AssembledSystem,
    exps: &AnisoExponents,
    samples: &[Trajectory],
) -> Result<AnisoEstimate> {
    exps.validate(system.mesh().dim())?;
    let ratios: Vec<Option<f64>> = samples
        .par_iter()
        .map(|traj| {
            if traj.len() < 2 {
                return None;
            }
            let (t0, t1) = (traj.times[0], traj.t_end());
            let mixed = |r: f64, q: f64, boundary: bool| {
                let g: Vec<f64> = traj
                    .states
                    .iter()
                    .map(|u| {
                        let n = if boundary {
                            system.boundary_lq_norm(u, q)
                        } else {
                            system.lq_norm(u, q)
                        };
                        n.powf(r)
                    })
                    .collect();
                integrate(&traj.times, &g, t0, t1).max(0.0).powf(1.0 / r)
            };
            let lhs = mixed(exps.r1, exps.q1, false) + mixed(exps.r2, exps.q2, true);
            let q = q_norm_sq(system, traj).sqrt();
            (q > 0.0).then(|| lhs / q)
        })
        .collect();
    let constant = ratios.iter().flatten().copied().fold(0.0, f64::max);
    Ok(AnisoEstimate { constant, ratios })
}

/// Settings of the randomized sup-bound panel on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelOptions {
    pub count: usize,
    pub seed: u64,
    pub cells: usize,
    pub t_end: f64,
    pub dt: f64,
}

impl Default for PanelOptions {
    fn default() -> Self {
        PanelOptions {
            count: 50,
            seed: 7,
            cells: 128,
            t_end: 1.0,
            dt: 1.0 / 400.0,
        }
    }
}

/// One member of the panel: coefficients `a, b, c, d, beta` (constants) and
/// the sup-bound results.
#[derive(Debug, Clone)]
pub struct PanelMember {
    pub index: usize,
    pub coefficients: [f64; 5],
    pub zero_initial: bool,
    pub late: SupBound,
    /// Only for members with zero initial value.
    pub global: Option<SupBound>,
}

fn random_temporal(rng: &mut ChaCha8Rng, t_end: f64) -> Temporal {
    match rng.gen_range(0..4) {
        0 => Temporal::Constant,
        1 => Temporal::Cos {
            freq: rng.gen_range(1.0..10.0),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        },
        2 => Temporal::Decay {
            rate: rng.gen_range(0.0..5.0),
        },
        _ => {
            let start = rng.gen_range(0.0..0.8) * t_end;
            Temporal::Window {
                start,
                end: start + 0.2 * t_end,
            }
        }
    }
}

/// Runs the randomized panel: bounded constant coefficients, smooth initial
/// values (zero for every odd member), forcing built from cosine profiles
/// and bounded time factors. Member `i` draws from stream `i` of a ChaCha
/// generator seeded with `seed`.
pub fn sup_bound_panel(opts: &PanelOptions) -> Result<Vec<PanelMember>> {
    let mesh = std::sync::Arc::new(build_interval_mesh(opts.cells)?);
    let exps = Exponents::default();
    (0..opts.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let a = rng.gen_range(0.5..2.0);
            let bb = rng.gen_range(-0.5..0.5);
            let cc = rng.gen_range(-0.5..0.5);
            let d = rng.gen_range(0.0..1.0);
            let beta = rng.gen_range(0.0..1.0);
            let mut coeffs = CoefficientSet::laplacian();
            coeffs.diffusion[0][0] = Field::constant(a);
            coeffs.diffusion[1][1] = Field::constant(a);
            coeffs.conormal_drift[0] = Field::constant(bb);
            coeffs.advection[0] = Field::constant(cc);
            coeffs.reaction = Field::constant(d);
            coeffs.robin = BoundaryField::constant(beta);
            coeffs.ellipticity = a;
            let system = assemble(mesh.clone(), &coeffs, 4)?;

            let zero_initial = i % 2 == 1;
            let modes: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let u0 = if zero_initial {
                vec![0.0; system.ndof()]
            } else {
                system.interpolate(&Field::from_fn(move |x| {
                    modes
                        .iter()
                        .enumerate()
                        .map(|(j, m)| m * (j as f64 * std::f64::consts::PI * x[0]).cos())
                        .sum()
                }))
            };
            let m = rng.gen_range(0..4) as f64;
            let amp = rng.gen_range(-2.0..2.0);
            let f = Signal::volume().with(
                Field::from_fn(move |x| amp * (m * std::f64::consts::PI * x[0]).cos()),
                random_temporal(&mut rng, opts.t_end),
            );
            let (g0, g1) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let g = Signal::boundary().with(
                Field::from_fn(move |x| g0 + (g1 - g0) * x[0]),
                random_temporal(&mut rng, opts.t_end),
            );
            let traj =
                solve_parabolic(&system, &u0, &f, &g, TimeStepping::new(opts.t_end, opts.dt))?;
            let late = sup_bound_check(&system, &traj, &f, &g, &exps, SupWindow::Late)?;
            let global = if zero_initial {
                Some(sup_bound_check(
                    &system,
                    &traj,
                    &f,
                    &g,
                    &exps,
                    SupWindow::Global,
                )?)
            } else {
                None
            };
            Ok(PanelMember {
                index: i,
                coefficients: [a, bb, cc, d, beta],
                zero_initial,
                late,
                global,
            })
        })
        .collect()
}

/// Median of the finite values.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
