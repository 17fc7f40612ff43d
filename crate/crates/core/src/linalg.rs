//! Sparse matrices and the linear solvers used by the assembly and time stepping.
//!
//! [`CsrMatrix`] holds assembled operators. Systems are solved either by a
//! banded LU factorization with partial pivoting (after a reverse
//! Cuthill-McKee reordering), or iteratively by Jacobi-preconditioned
//! conjugate gradients (symmetric) or BiCGSTAB (nonsymmetric).

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;

use crate::error::{LabError, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed.
#[derive(Debug, Default, Clone)]
pub struct TripletBuilder {
    n: usize,
    rows: Vec<BTreeMap<usize, f64>>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        TripletBuilder {
            n,
            rows: vec![BTreeMap::new(); n],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        *self.rows[i].entry(j).or_insert(0.0) += v;
    }

    /// Inserts an explicit zero so the sparsity pattern contains `(i, j)`.
    pub fn touch(&mut self, i: usize, j: usize) {
        self.rows[i].entry(j).or_insert(0.0);
    }

    pub fn build(self) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in self.rows {
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn zeros_like(other: &CsrMatrix) -> CsrMatrix {
        CsrMatrix {
            values: vec![0.0; other.values.len()],
            ..other.clone()
        }
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn diagonal(d: &[f64]) -> CsrMatrix {
        CsrMatrix {
            values: d.to_vec(),
            ..CsrMatrix::identity(d.len())
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `A^T x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// `x^T A y`
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.tr_mul_vec(&vec![1.0; self.n])
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut b = TripletBuilder::new(self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                b.add(j, i, v);
            }
        }
        b.build()
    }

    /// `alpha * self + beta * other`, union of the sparsity patterns.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let mut b = TripletBuilder::new(self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                b.add(i, j, alpha * v);
            }
            for (j, v) in other.row(i) {
                b.add(i, j, beta * v);
            }
        }
        b.build()
    }

    pub fn scale(&self, alpha: f64) -> CsrMatrix {
        CsrMatrix {
            values: self.values.iter().map(|v| alpha * v).collect(),
            ..self.clone()
        }
    }

    /// `(A + A^T) / 2`
    pub fn symmetric_part(&self) -> CsrMatrix {
        self.add_scaled(0.5, &self.transpose(), 0.5)
    }

    /// Largest entry of `|A - A^T|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let d = self.add_scaled(1.0, &t, -1.0);
        d.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    /// Column indices of row `i`, including explicit zeros.
    pub fn pattern(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.pattern(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // Start each component from an unvisited vertex of minimal degree.
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| adj[i].len())
            .unwrap();
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| adj[w].len());
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// LU factorization with partial pivoting of a banded matrix.
///
/// Rows and columns are permuted by `perm` (new index -> old index) to
/// reduce the bandwidth before factorization.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major band storage: row `i` holds columns `i - kl ..= i + ku + kl`.
    band: Vec<f64>,
    width: usize,
    pivots: Vec<usize>,
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<BandedLu> {
        let perm = if a.n() > 64 {
            reverse_cuthill_mckee(a)
        } else {
            (0..a.n()).collect()
        };
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<BandedLu> {
        let n = a.n();
        let mut inv_perm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..n {
            for &j in a.pattern(i) {
                let (pi, pj) = (inv_perm[i], inv_perm[j]);
                if pj < pi {
                    kl = kl.max(pi - pj);
                } else {
                    ku = ku.max(pj - pi);
                }
            }
        }
        // Pivoting can fill up to kl extra super-diagonals.
        let width = kl + ku + kl + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            band: vec![0.0; n * width],
            width,
            pivots: vec![0; n],
            perm,
            inv_perm,
        };
        for i in 0..n {
            for (j, v) in a.row(i) {
                let (pi, pj) = (lu.inv_perm[i], lu.inv_perm[j]);
                *lu.at_mut(pi, pj) += v;
            }
        }
        lu.decompose()?;
        Ok(lu)
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        // Column j stored at position j - i + kl within row i.
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            0.0
        } else {
            self.band[self.offset(i, j)]
        }
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let o = self.offset(i, j);
        &mut self.band[o]
    }

    fn decompose(&mut self) -> Result<()> {
        let n = self.n;
        let kl = self.kl;
        let scale = self.band.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Err(LabError::SingularSystem("zero matrix".into()));
        }
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= scale * 1e-14 {
                return Err(LabError::SingularSystem(format!(
                    "zero pivot in column {k} (relative magnitude {:.1e})",
                    best / scale
                )));
            }
            self.pivots[k] = p;
            let last_col = (k + self.ku + kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.at(k, j);
                    let b = self.at(p, j);
                    *self.at_mut(k, j) = b;
                    *self.at_mut(p, j) = a;
                }
            }
            let pivot = self.at(k, k);
            for i in k + 1..=last_row {
                let l = self.at(i, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                *self.at_mut(i, k) = l;
                for j in k + 1..=last_col {
                    let u = self.at(k, j);
                    if u != 0.0 {
                        *self.at_mut(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let kl = self.kl;
        let mut x: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        // Forward substitution with the row interchanges applied in order.
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= self.at(i, k) * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.ku + kl).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=last_col {
                s -= self.at(k, j) * x[j];
            }
            x[k] = s / self.at(k, k);
        }
        let mut out = vec![0.0; n];
        for (i, v) in x.into_iter().enumerate() {
            out[self.perm[i]] = v;
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IterativeOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for IterativeOptions {
    fn default() -> Self {
        IterativeOptions {
            rel_tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterativeSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite `a`.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: IterativeOptions,
) -> Result<IterativeSolution> {
    let n = a.n();
    let inv_diag: Vec<f64> = a
        .diag()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(IterativeSolution {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let ax = a.mul_vec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..opts.max_iter {
        let res = norm2(&r) / bnorm;
        if res <= opts.rel_tol {
            return Ok(IterativeSolution {
                x,
                iterations: it,
                rel_residual: res,
            });
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(LabError::SingularSystem(
                "conjugate gradients met a non-positive curvature direction".into(),
            ));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        for ((zi, ri), di) in z.iter_mut().zip(&r).zip(&inv_diag) {
            *zi = ri * di;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(LabError::NotConverged {
        iterations: opts.max_iter,
        residual: norm2(&r) / bnorm,
    })
}

/// Jacobi-preconditioned BiCGSTAB for general nonsingular `a`.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: IterativeOptions,
) -> Result<IterativeSolution> {
    let n = a.n();
    let inv_diag: Vec<f64> = a
        .diag()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(a, b)| a * b).collect() };
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(IterativeSolution {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let ax = a.mul_vec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for it in 0..opts.max_iter {
        let res = norm2(&r) / bnorm;
        if res <= opts.rel_tol {
            return Ok(IterativeSolution {
                x,
                iterations: it,
                rel_residual: res,
            });
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let y = precond(&p);
        a.mul_vec_into(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        let zs = precond(&s);
        let t = a.mul_vec(&zs);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        axpy(alpha, &y, &mut x);
        axpy(omega, &zs, &mut x);
        for i in 0..n {
            r[i] = s[i] - omega * t[i];
        }
        if omega == 0.0 {
            break;
        }
    }
    Err(LabError::NotConverged {
        iterations: opts.max_iter,
        residual: norm2(&r) / bnorm,
    })
}

/// A reusable solver for one matrix: direct below `DIRECT_LIMIT` unknowns.
#[derive(Debug, Clone)]
pub enum Factorization {
    Direct(BandedLu),
    Iterative {
        matrix: CsrMatrix,
        symmetric: bool,
        opts: IterativeOptions,
    },
}

/// Systems up to this size are factored directly.
pub const DIRECT_LIMIT: usize = 50_000;

impl Factorization {
    pub fn new(a: &CsrMatrix) -> Result<Factorization> {
        if a.n() <= DIRECT_LIMIT {
            Ok(Factorization::Direct(BandedLu::factor(a)?))
        } else {
            Ok(Self::iterative(a, IterativeOptions::default()))
        }
    }

    pub fn iterative(a: &CsrMatrix, opts: IterativeOptions) -> Factorization {
        let symmetric = a.asymmetry() <= 1e-14 * a.max_abs();
        Factorization::Iterative {
            matrix: a.clone(),
            symmetric,
            opts,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Factorization::Direct(lu) => Ok(lu.solve(b)),
            Factorization::Iterative {
                matrix,
                symmetric,
                opts,
            } => {
                let sol = if *symmetric {
                    conjugate_gradient(matrix, b, None, *opts)?
                } else {
                    bicgstab(matrix, b, None, *opts)?
                };
                Ok(sol.x)
            }
        }
    }
}
