//! Gauss quadrature on the reference segment and triangle.
//!
//! Segment rules live on `[0, 1]`; triangle rules on the reference simplex
//! `{(s, t) : s, t >= 0, s + t <= 1}` and are obtained from a collapsed
//! (Duffy) tensor product of Gauss-Legendre rules. Weights sum to the
//! reference measure (1 and 1/2 respectively).

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]` with `n` points.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-type initial guess followed by Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature rule on a reference cell: barycentric-free reference coordinates and weights.
#[derive(Debug, Clone)]
pub struct Rule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Rule on `[0, 1]` exact for polynomials of degree `order`.
pub fn segment_rule(order: usize) -> Rule {
    let n = order / 2 + 1;
    let (x, w) = gauss_legendre(n);
    Rule {
        points: x.iter().map(|&xi| [0.5 * (xi + 1.0), 0.0]).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
    }
}

/// Rule on the reference triangle exact for polynomials of degree `order`.
pub fn triangle_rule(order: usize) -> Rule {
    // The collapse adds one degree through the Jacobian (1 - eta).
    let n = order.div_ceil(2) + 1;
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (xi, wi) in x.iter().zip(&w) {
        let a = 0.5 * (xi + 1.0);
        for (eta, we) in x.iter().zip(&w) {
            let b = 0.5 * (eta + 1.0);
            points.push([a * (1.0 - b), b]);
            weights.push(0.25 * wi * we * (1.0 - b));
        }
    }
    Rule { points, weights }
}
