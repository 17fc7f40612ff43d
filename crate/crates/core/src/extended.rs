//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64`
//! carrying about 106 bits of mantissa. Only what the log-domain
//! recurrences need is provided.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

const LN2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };
    pub const NEG_INFINITY: DoubleDouble = DoubleDouble {
        hi: f64::NEG_INFINITY,
        lo: 0.0,
    };

    pub fn new(x: f64) -> DoubleDouble {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite()
    }

    pub fn abs(self) -> DoubleDouble {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    fn renorm(hi: f64, lo: f64) -> DoubleDouble {
        if !hi.is_finite() {
            return DoubleDouble { hi, lo: 0.0 };
        }
        let (hi, lo) = quick_two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    /// `self * 2^k`, exact barring overflow.
    pub fn ldexp(self, k: i32) -> DoubleDouble {
        let s = 2f64.powi(k);
        DoubleDouble {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    pub fn exp(self) -> DoubleDouble {
        if self.hi == f64::NEG_INFINITY || self.hi < -745.0 {
            return DoubleDouble::ZERO;
        }
        if self.hi > 709.0 {
            return DoubleDouble::new(f64::INFINITY);
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2 * k;
        let mut term = DoubleDouble::ONE;
        let mut sum = DoubleDouble::ONE;
        for i in 1..=30 {
            term = term * r / i as f64;
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        sum.ldexp(k as i32)
    }

    /// Natural logarithm; `-inf` at zero, NaN for negative input.
    pub fn ln(self) -> DoubleDouble {
        if self.hi == 0.0 {
            return DoubleDouble::NEG_INFINITY;
        }
        if self.hi < 0.0 || self.hi.is_nan() {
            return DoubleDouble::new(f64::NAN);
        }
        if self.hi == f64::INFINITY {
            return self;
        }
        // Newton on exp(y) = x, quadratic convergence from a double guess.
        let mut y = DoubleDouble::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - 1.0;
        }
        y
    }

    /// `ln(exp(a) + exp(b))`, with `-inf` standing for `ln 0`.
    pub fn logaddexp(a: DoubleDouble, b: DoubleDouble) -> DoubleDouble {
        let (m, s) = if a >= b { (a, b) } else { (b, a) };
        if s.hi == f64::NEG_INFINITY {
            return m;
        }
        m + ((s - m).exp() + 1.0).ln()
    }

    /// Product with a possibly infinite value, treating `0 * -inf` as `-inf`
    /// (the logarithm of a zero power stays zero).
    pub fn scale_log(self, factor: DoubleDouble) -> DoubleDouble {
        if self.hi == f64::NEG_INFINITY {
            self
        } else {
            self * factor
        }
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        DoubleDouble::new(x)
    }
}

impl fmt::Debug for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e} + {:e}", self.hi, self.lo)
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl Neg for DoubleDouble {
    type Output = DoubleDouble;
    fn neg(self) -> DoubleDouble {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = DoubleDouble;
    fn add(self, o: DoubleDouble) -> DoubleDouble {
        if !self.hi.is_finite() || !o.hi.is_finite() {
            return DoubleDouble::new(self.hi + o.hi);
        }
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        DoubleDouble::renorm(s, e + f)
    }
}

impl Add<f64> for DoubleDouble {
    type Output = DoubleDouble;
    fn add(self, o: f64) -> DoubleDouble {
        self + DoubleDouble::new(o)
    }
}

impl Sub for DoubleDouble {
    type Output = DoubleDouble;
    fn sub(self, o: DoubleDouble) -> DoubleDouble {
        self + (-o)
    }
}

impl Sub<f64> for DoubleDouble {
    type Output = DoubleDouble;
    fn sub(self, o: f64) -> DoubleDouble {
        self + DoubleDouble::new(-o)
    }
}

impl Mul for DoubleDouble {
    type Output = DoubleDouble;
    fn mul(self, o: DoubleDouble) -> DoubleDouble {
        if !self.hi.is_finite() || !o.hi.is_finite() {
            return DoubleDouble::new(self.hi * o.hi);
        }
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        DoubleDouble::renorm(p, e)
    }
}

impl Mul<f64> for DoubleDouble {
    type Output = DoubleDouble;
    fn mul(self, o: f64) -> DoubleDouble {
        self * DoubleDouble::new(o)
    }
}

impl Div for DoubleDouble {
    type Output = DoubleDouble;
    fn div(self, o: DoubleDouble) -> DoubleDouble {
        if !self.hi.is_finite() || !o.hi.is_finite() || o.hi == 0.0 {
            return DoubleDouble::new(self.hi / o.hi);
        }
        let q1 = self.hi / o.hi;
        let r = self - o * q1;
        let q2 = r.hi / o.hi;
        let r = r - o * q2;
        let q3 = r.hi / o.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        DoubleDouble::new(q1) + DoubleDouble::new(q2) + q3
    }
}

impl Div<f64> for DoubleDouble {
    type Output = DoubleDouble;
    fn div(self, o: f64) -> DoubleDouble {
        self / DoubleDouble::new(o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: DoubleDouble, b: DoubleDouble, tol: f64) -> bool {
        (a - b).abs().hi <= tol * b.abs().hi.max(1.0)
    }

    #[test]
    fn third_round_trips() {
        let third = DoubleDouble::ONE / 3.0;
        let back = third * 3.0;
        assert!(close(back, DoubleDouble::ONE, 1e-31));
        assert!(third.lo != 0.0);
    }

    #[test]
    fn exp_ln_inverse() {
        for x in [-600.0, -30.5, -1.0, -1e-20, 0.0, 0.3, 2.0, 100.0, 650.0] {
            let d = DoubleDouble::new(x);
            let back = d.exp().ln();
            assert!(close(back, d, 1e-30), "{x}: {back:?}");
        }
        let e = DoubleDouble::ONE.exp();
        assert_eq!(e.hi, std::f64::consts::E);
        // e = 2.718281828459045 + 1.4456468917292502e-16
        assert!(
            (e.lo - 1.445_646_891_729_250_2e-16).abs() < 1e-31,
            "{:e}",
            e.lo
        );
    }

    #[test]
    fn ln_two_matches_constant() {
        let l = DoubleDouble::new(2.0).ln();
        assert!(close(l, LN2, 1e-31));
    }

    #[test]
    fn logaddexp_cases() {
        let a = DoubleDouble::new(3.0).ln();
        let b = DoubleDouble::new(5.0).ln();
        let s = DoubleDouble::logaddexp(a, b);
        assert!(
            close(s, DoubleDouble::new(8.0).ln(), 1e-30),
            "{:?} {:?}",
            s,
            DoubleDouble::new(8.0).ln()
        );
        let z = DoubleDouble::NEG_INFINITY;
        assert_eq!(DoubleDouble::logaddexp(z, a), a);
        assert_eq!(DoubleDouble::logaddexp(z, z).hi, f64::NEG_INFINITY);
    }

    #[test]
    fn ordering_uses_low_word() {
        let a = DoubleDouble { hi: 1.0, lo: 1e-20 };
        let b = DoubleDouble {
            hi: 1.0,
            lo: -1e-20,
        };
        assert!(a > b);
        assert!(DoubleDouble::NEG_INFINITY < b);
    }
}
