//! Coefficient fields of the elliptic operator and the Robin weight.
//!
//! The operator acts as `Au = div(a grad u + b u) - c . grad u - d u` with
//! boundary flux `(a grad u + b u) . nu + beta u`. All fields are bounded
//! closures; presets cover the cases used by the bundled scenarios.

use std::fmt;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::expr::Expr;
use crate::mesh::Point;

type ScalarFn = dyn Fn(&Point) -> f64 + Send + Sync;
type BoundaryFn = dyn Fn(&Point, &Point) -> f64 + Send + Sync;

/// A scalar field on the domain, cheap to clone and callable from many threads.
#[derive(Clone)]
pub struct Field {
    f: Arc<ScalarFn>,
    constant: Option<f64>,
}

impl Field {
    pub fn constant(v: f64) -> Field {
        Field {
            f: Arc::new(move |_| v),
            constant: Some(v),
        }
    }

    pub fn zero() -> Field {
        Field::constant(0.0)
    }

    pub fn from_fn(f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Field {
        Field {
            f: Arc::new(f),
            constant: None,
        }
    }

    /// Parses an expression in `x` and `y`, e.g. `"1 + 0.5*sin(pi*x)"`.
    pub fn parse(src: &str) -> Result<Field> {
        let e = Expr::parse(src)?;
        if let Expr::Num(v) = e {
            return Ok(Field::constant(v));
        }
        Ok(Field::from_fn(move |p| e.eval(p[0], p[1])))
    }

    #[inline]
    pub fn eval(&self, p: &Point) -> f64 {
        (self.f)(p)
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn is_zero(&self) -> bool {
        self.constant == Some(0.0)
    }

    pub fn scaled(&self, s: f64) -> Field {
        match self.constant {
            Some(v) => Field::constant(s * v),
            None => {
                let f = self.f.clone();
                Field::from_fn(move |p| s * f(p))
            }
        }
    }

    pub fn sum(&self, other: &Field) -> Field {
        match (self.constant, other.constant) {
            (Some(a), Some(b)) => Field::constant(a + b),
            _ => {
                let (f, g) = (self.f.clone(), other.f.clone());
                Field::from_fn(move |p| f(p) + g(p))
            }
        }
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some(v) => write!(f, "Field({v})"),
            None => f.write_str("Field(<fn>)"),
        }
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::constant(v)
    }
}

/// A field on the boundary that may depend on the outward normal.
#[derive(Clone)]
pub struct BoundaryField {
    f: Arc<BoundaryFn>,
    constant: Option<f64>,
}

impl BoundaryField {
    pub fn constant(v: f64) -> BoundaryField {
        BoundaryField {
            f: Arc::new(move |_, _| v),
            constant: Some(v),
        }
    }

    pub fn zero() -> BoundaryField {
        BoundaryField::constant(0.0)
    }

    /// `f(point, outward_normal)`
    pub fn from_fn(f: impl Fn(&Point, &Point) -> f64 + Send + Sync + 'static) -> BoundaryField {
        BoundaryField {
            f: Arc::new(f),
            constant: None,
        }
    }

    #[inline]
    pub fn eval(&self, p: &Point, normal: &Point) -> f64 {
        (self.f)(p, normal)
    }

    pub fn is_zero(&self) -> bool {
        self.constant == Some(0.0)
    }

    pub fn scaled(&self, s: f64) -> BoundaryField {
        match self.constant {
            Some(v) => BoundaryField::constant(s * v),
            None => {
                let f = self.f.clone();
                BoundaryField::from_fn(move |p, n| s * f(p, n))
            }
        }
    }

    pub fn sum(&self, other: &BoundaryField) -> BoundaryField {
        match (self.constant, other.constant) {
            (Some(a), Some(b)) => BoundaryField::constant(a + b),
            _ => {
                let (f, g) = (self.f.clone(), other.f.clone());
                BoundaryField::from_fn(move |p, n| f(p, n) + g(p, n))
            }
        }
    }
}

impl From<Field> for BoundaryField {
    fn from(field: Field) -> Self {
        BoundaryField {
            constant: field.constant,
            f: Arc::new(move |p, _| field.eval(p)),
        }
    }
}

impl fmt::Debug for BoundaryField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some(v) => write!(f, "BoundaryField({v})"),
            None => f.write_str("BoundaryField(<fn>)"),
        }
    }
}

/// Coefficients of the operator and its boundary condition.
///
/// In one dimension only the `[0][0]` diffusion entry and the first
/// component of the vector fields are used.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    /// Diffusion matrix `a`.
    pub diffusion: [[Field; 2]; 2],
    /// Drift inside the divergence, `b`.
    pub conormal_drift: [Field; 2],
    /// Advection acting on the gradient, `c`.
    pub advection: [Field; 2],
    /// Zero-order term `d`.
    pub reaction: Field,
    /// Robin weight `beta` on the boundary.
    pub robin: BoundaryField,
    /// Claimed lower bound for the symmetric part of `a`.
    pub ellipticity: f64,
}

impl CoefficientSet {
    /// `a = I`, everything else zero, `mu = 1` (pure Neumann heat operator).
    pub fn laplacian() -> CoefficientSet {
        CoefficientSet {
            diffusion: [
                [Field::constant(1.0), Field::zero()],
                [Field::zero(), Field::constant(1.0)],
            ],
            conormal_drift: [Field::zero(), Field::zero()],
            advection: [Field::zero(), Field::zero()],
            reaction: Field::zero(),
            robin: BoundaryField::zero(),
            ellipticity: 1.0,
        }
    }

    pub fn anisotropic(a11: f64, a22: f64) -> CoefficientSet {
        let mut c = CoefficientSet::laplacian();
        c.diffusion[0][0] = Field::constant(a11);
        c.diffusion[1][1] = Field::constant(a22);
        c.ellipticity = a11.min(a22);
        c
    }

    /// Constant advection `c = (gamma, 0)` with the Robin weight
    /// `beta = -gamma nu_1` that cancels its boundary flux, so that total
    /// mass is conserved.
    pub fn drift_conserving(gamma: f64) -> CoefficientSet {
        let mut c = CoefficientSet::laplacian();
        c.advection[0] = Field::constant(gamma);
        c.robin = BoundaryField::from_fn(move |_, n| -gamma * n[0]);
        c
    }

    /// `b = c = (gamma, 0)` with `beta = -gamma nu_1`: conserves mass and
    /// keeps constants as equilibria.
    pub fn drift_balanced(gamma: f64) -> CoefficientSet {
        let mut c = CoefficientSet::drift_conserving(gamma);
        c.conormal_drift[0] = Field::constant(gamma);
        c
    }

    pub fn reaction(d: f64) -> CoefficientSet {
        let mut c = CoefficientSet::laplacian();
        c.reaction = Field::constant(d);
        c
    }

    pub fn robin(beta: f64) -> CoefficientSet {
        let mut c = CoefficientSet::laplacian();
        c.robin = BoundaryField::constant(beta);
        c
    }

    /// Parses a preset such as `"anisotropic(2, 1)"` or `"robin(0.5)"`.
    pub fn preset(spec: &str) -> Result<CoefficientSet> {
        let spec = spec.trim();
        let (name, args) = match spec.find('(') {
            Some(open) => {
                if !spec.ends_with(')') {
                    return Err(LabError::input(
                        "preset",
                        format!("missing `)` in `{spec}`"),
                    ));
                }
                let inner = &spec[open + 1..spec.len() - 1];
                let args = inner
                    .split(',')
                    .map(|s| {
                        s.trim().parse::<f64>().map_err(|_| {
                            LabError::input(
                                "preset",
                                format!("bad numeric argument `{}`", s.trim()),
                            )
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                (spec[..open].trim(), args)
            }
            None => (spec, Vec::new()),
        };
        let want = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(LabError::input(
                    "preset",
                    format!("`{name}` takes {n} argument(s), got {}", args.len()),
                ))
            }
        };
        match name {
            "laplacian" => want(0).map(|_| CoefficientSet::laplacian()),
            "anisotropic" => {
                want(2)?;
                if args[0] <= 0.0 || args[1] <= 0.0 {
                    return Err(LabError::input(
                        "preset",
                        "anisotropic entries must be positive",
                    ));
                }
                Ok(CoefficientSet::anisotropic(args[0], args[1]))
            }
            "drift_conserving" => want(1).map(|_| CoefficientSet::drift_conserving(args[0])),
            "drift_balanced" => want(1).map(|_| CoefficientSet::drift_balanced(args[0])),
            "reaction" => want(1).map(|_| CoefficientSet::reaction(args[0])),
            "robin" => want(1).map(|_| CoefficientSet::robin(args[0])),
            _ => Err(LabError::input(
                "preset",
                format!("unknown preset `{name}`"),
            )),
        }
    }

    /// Names accepted by [`CoefficientSet::preset`].
    pub const PRESETS: &'static [&'static str] = &[
        "laplacian",
        "anisotropic(a11,a22)",
        "drift_conserving(gamma)",
        "drift_balanced(gamma)",
        "reaction(d)",
        "robin(beta)",
    ];

    /// Elementwise sum; the ellipticity claims add up.
    pub fn sum(&self, other: &CoefficientSet) -> CoefficientSet {
        let pair = |a: &[Field; 2], b: &[Field; 2]| [a[0].sum(&b[0]), a[1].sum(&b[1])];
        CoefficientSet {
            diffusion: [
                pair(&self.diffusion[0], &other.diffusion[0]),
                pair(&self.diffusion[1], &other.diffusion[1]),
            ],
            conormal_drift: pair(&self.conormal_drift, &other.conormal_drift),
            advection: pair(&self.advection, &other.advection),
            reaction: self.reaction.sum(&other.reaction),
            robin: self.robin.sum(&other.robin),
            ellipticity: self.ellipticity + other.ellipticity,
        }
    }

    /// Multiplies every field by `s`.
    pub fn scaled(&self, s: f64) -> CoefficientSet {
        let pair = |a: &[Field; 2]| [a[0].scaled(s), a[1].scaled(s)];
        CoefficientSet {
            diffusion: [pair(&self.diffusion[0]), pair(&self.diffusion[1])],
            conormal_drift: pair(&self.conormal_drift),
            advection: pair(&self.advection),
            reaction: self.reaction.scaled(s),
            robin: self.robin.scaled(s),
            ellipticity: self.ellipticity * s,
        }
    }

    /// All coefficients zero except the ones set afterwards.
    pub fn zero() -> CoefficientSet {
        CoefficientSet::laplacian().scaled(0.0)
    }
}

/// Panel of `n` unit directions spread over the upper half circle.
pub fn unit_directions(n: usize) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let phi = std::f64::consts::PI * k as f64 / n as f64;
            [phi.cos(), phi.sin()]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        let c = CoefficientSet::preset("anisotropic(2, 1)").unwrap();
        assert_eq!(c.diffusion[0][0].as_constant(), Some(2.0));
        assert_eq!(c.ellipticity, 1.0);
        let r = CoefficientSet::preset(" robin(0.5) ").unwrap();
        assert_eq!(r.robin.eval(&[0.0, 0.0], &[1.0, 0.0]), 0.5);
        let d = CoefficientSet::preset("drift_conserving(0.3)").unwrap();
        assert_eq!(d.robin.eval(&[0.0, 0.0], &[-1.0, 0.0]), 0.3);
        assert_eq!(d.robin.eval(&[1.0, 0.0], &[1.0, 0.0]), -0.3);
        assert!(CoefficientSet::preset("reaction").is_err());
        assert!(CoefficientSet::preset("spiral(1)").is_err());
        assert!(CoefficientSet::preset("robin(x)").is_err());
    }

    #[test]
    fn expression_fields() {
        let f = Field::parse("1 + x*y").unwrap();
        assert_eq!(f.eval(&[2.0, 3.0]), 7.0);
        assert_eq!(Field::parse("2.5").unwrap().as_constant(), Some(2.5));
        assert!(Field::parse("1 +").is_err());
    }

    #[test]
    fn directions_are_unit() {
        for d in unit_directions(16) {
            assert!((d[0].hypot(d[1]) - 1.0).abs() < 1e-15);
        }
    }
}
