//! Galerkin assembly of the bilinear form with Robin term, plus the
//! structural checks on it.
//!
//! For P1 hat functions `phi_i` the stiffness matrix is
//! `K[i][j] = a_beta(phi_j, phi_i)`, so `v^T K u = a_beta(u, v)`. Column
//! sums of `K` test the form against the constant function in its second
//! slot, row sums in its first.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::coefficients::{BoundaryField, CoefficientSet, Field};
use crate::error::{LabError, Result};
use crate::linalg::{dot, CsrMatrix, Factorization, TripletBuilder};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{segment_rule, triangle_rule, Rule};

/// Default quadrature degree.
pub const DEFAULT_QUAD_ORDER: usize = 4;

/// Largest system handled by the dense eigenvalue routines.
pub const DENSE_LIMIT: usize = 4000;

/// Mass, boundary mass and stiffness matrices on one mesh.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    mesh: Arc<Mesh>,
    coefficients: CoefficientSet,
    quad_order: usize,
    /// `int_Omega phi_i phi_j`
    pub mass: CsrMatrix,
    /// `int_dOmega phi_i phi_j`
    pub boundary_mass: CsrMatrix,
    /// `a_beta(phi_j, phi_i)`
    pub stiffness: CsrMatrix,
    /// `int_Omega grad phi_i . grad phi_j`
    pub gradient_stiffness: CsrMatrix,
    /// Row sums of the mass matrix.
    pub lumped_mass: Vec<f64>,
}

/// Geometry of one simplex: node indices, basis gradients and the affine map.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CellGeometry {
    pub nodes: [usize; 3],
    pub n: usize,
    pub grads: [Point; 3],
    pub measure: f64,
    origin: Point,
    axes: [Point; 2],
}

impl CellGeometry {
    pub fn new(mesh: &Mesh, c: usize) -> CellGeometry {
        let v = mesh.cell(c);
        let p = mesh.vertices();
        if mesh.dim() == 1 {
            let (x0, x1) = (p[v[0]][0], p[v[1]][0]);
            let l = x1 - x0;
            CellGeometry {
                nodes: [v[0], v[1], 0],
                n: 2,
                grads: [[-1.0 / l, 0.0], [1.0 / l, 0.0], [0.0, 0.0]],
                measure: l.abs(),
                origin: p[v[0]],
                axes: [[l, 0.0], [0.0, 0.0]],
            }
        } else {
            let (a, b, cc) = (p[v[0]], p[v[1]], p[v[2]]);
            let e1 = [b[0] - a[0], b[1] - a[1]];
            let e2 = [cc[0] - a[0], cc[1] - a[1]];
            let det = e1[0] * e2[1] - e2[0] * e1[1];
            let g1 = [e2[1] / det, -e2[0] / det];
            let g2 = [-e1[1] / det, e1[0] / det];
            let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
            CellGeometry {
                nodes: [v[0], v[1], v[2]],
                n: 3,
                grads: [g0, g1, g2],
                measure: 0.5 * det.abs(),
                origin: a,
                axes: [e1, e2],
            }
        }
    }

    /// Physical point, basis values and weight for a reference quadrature point.
    pub fn map(&self, rp: &Point, rw: f64) -> (Point, [f64; 3], f64) {
        let x = [
            self.origin[0] + rp[0] * self.axes[0][0] + rp[1] * self.axes[1][0],
            self.origin[1] + rp[0] * self.axes[0][1] + rp[1] * self.axes[1][1],
        ];
        if self.n == 2 {
            (x, [1.0 - rp[0], rp[0], 0.0], rw * self.measure)
        } else {
            // Reference triangle has area 1/2.
            (
                x,
                [1.0 - rp[0] - rp[1], rp[0], rp[1]],
                2.0 * rw * self.measure,
            )
        }
    }
}

pub(crate) fn cell_rule(dim: usize, order: usize) -> Rule {
    if dim == 1 {
        segment_rule(order)
    } else {
        triangle_rule(order)
    }
}

/// Boundary quadrature points: `(facet, point, weight, basis values on the facet vertices)`.
pub(crate) fn boundary_points(mesh: &Mesh, order: usize) -> Vec<(usize, Point, f64, [f64; 2])> {
    let mut out = Vec::new();
    let p = mesh.vertices();
    if mesh.dim() == 1 {
        for (f, facet) in mesh.boundary_facets().iter().enumerate() {
            out.push((f, p[facet.vertices[0]], 1.0, [1.0, 0.0]));
        }
        return out;
    }
    let rule = segment_rule(order);
    for (f, facet) in mesh.boundary_facets().iter().enumerate() {
        let (a, b) = (p[facet.vertices[0]], p[facet.vertices[1]]);
        let len = mesh.facet_measure(f);
        for (rp, rw) in rule.points.iter().zip(&rule.weights) {
            let s = rp[0];
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            out.push((f, x, rw * len, [1.0 - s, s]));
        }
    }
    out
}

struct ElementMatrices {
    nodes: [usize; 3],
    n: usize,
    mass: [[f64; 3]; 3],
    stiffness: [[f64; 3]; 3],
    grad: [[f64; 3]; 3],
}

fn finite(v: f64, what: &str, x: &Point) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(LabError::input(
            "coefficients",
            format!("{what} is not finite at ({}, {})", x[0], x[1]),
        ))
    }
}

fn element(mesh: &Mesh, coeffs: &CoefficientSet, rule: &Rule, c: usize) -> Result<ElementMatrices> {
    let geo = CellGeometry::new(mesh, c);
    let dim = mesh.dim();
    let n = geo.n;
    let mut em = ElementMatrices {
        nodes: geo.nodes,
        n,
        mass: [[0.0; 3]; 3],
        stiffness: [[0.0; 3]; 3],
        grad: [[0.0; 3]; 3],
    };
    for (rp, &rw) in rule.points.iter().zip(&rule.weights) {
        let (x, phi, w) = geo.map(rp, rw);
        let mut a = [[0.0; 2]; 2];
        for (i, row) in a.iter_mut().enumerate().take(dim) {
            for (j, aij) in row.iter_mut().enumerate().take(dim) {
                *aij = finite(coeffs.diffusion[i][j].eval(&x), "diffusion", &x)?;
            }
        }
        let mut b = [0.0; 2];
        let mut cv = [0.0; 2];
        for k in 0..dim {
            b[k] = finite(coeffs.conormal_drift[k].eval(&x), "conormal drift", &x)?;
            cv[k] = finite(coeffs.advection[k].eval(&x), "advection", &x)?;
        }
        let d = finite(coeffs.reaction.eval(&x), "reaction", &x)?;
        for j in 0..n {
            let gj = geo.grads[j];
            let flux = [
                a[0][0] * gj[0] + a[0][1] * gj[1] + b[0] * phi[j],
                a[1][0] * gj[0] + a[1][1] * gj[1] + b[1] * phi[j],
            ];
            let lower = cv[0] * gj[0] + cv[1] * gj[1] + d * phi[j];
            for i in 0..n {
                let gi = geo.grads[i];
                em.stiffness[i][j] += w * (flux[0] * gi[0] + flux[1] * gi[1] + lower * phi[i]);
                em.mass[i][j] += w * phi[i] * phi[j];
                em.grad[i][j] += w * (gi[0] * gj[0] + gi[1] * gj[1]);
            }
        }
    }
    Ok(em)
}

/// Assembles mass, boundary mass and stiffness matrices with quadrature
/// exact to degree `quad_order`.
pub fn assemble(
    mesh: impl Into<Arc<Mesh>>,
    coeffs: &CoefficientSet,
    quad_order: usize,
) -> Result<AssembledSystem> {
    let mesh: Arc<Mesh> = mesh.into();
    if quad_order < 1 {
        return Err(LabError::input("quad_order", "must be at least 1"));
    }
    let n = mesh.n_vertices();
    let rule = cell_rule(mesh.dim(), quad_order);
    let elements: Vec<ElementMatrices> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| element(&mesh, coeffs, &rule, c))
        .collect::<Result<_>>()?;

    let mut mass = TripletBuilder::new(n);
    let mut stiff = TripletBuilder::new(n);
    let mut grad = TripletBuilder::new(n);
    let mut bmass = TripletBuilder::new(n);
    for em in &elements {
        for i in 0..em.n {
            for j in 0..em.n {
                let (gi, gj) = (em.nodes[i], em.nodes[j]);
                mass.add(gi, gj, em.mass[i][j]);
                stiff.add(gi, gj, em.stiffness[i][j]);
                grad.add(gi, gj, em.grad[i][j]);
                bmass.touch(gi, gj);
            }
        }
    }
    let normals = mesh.normals();
    for (f, x, w, phi) in boundary_points(&mesh, quad_order) {
        let facet = &mesh.boundary_facets()[f];
        let beta = finite(coeffs.robin.eval(&x, &normals[f]), "robin weight", &x)?;
        for (a, &ga) in facet.vertices.iter().enumerate() {
            for (b, &gb) in facet.vertices.iter().enumerate() {
                let m = w * phi[a] * phi[b];
                bmass.add(ga, gb, m);
                stiff.add(ga, gb, beta * m);
            }
        }
    }
    let mass = mass.build();
    let lumped_mass = mass.row_sums();
    Ok(AssembledSystem {
        mesh,
        coefficients: coeffs.clone(),
        quad_order,
        mass,
        boundary_mass: bmass.build(),
        stiffness: stiff.build(),
        gradient_stiffness: grad.build(),
        lumped_mass,
    })
}

impl AssembledSystem {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.coefficients
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    pub fn ndof(&self) -> usize {
        self.mass.n()
    }

    /// Claimed ellipticity constant of the diffusion.
    pub fn mu(&self) -> f64 {
        self.coefficients.ellipticity
    }

    /// Nodal interpolant of a field.
    pub fn interpolate(&self, field: &Field) -> Vec<f64> {
        self.mesh.vertices().iter().map(|p| field.eval(p)).collect()
    }

    /// `int_Omega f phi_i` by quadrature.
    pub fn load_vector(&self, field: &Field) -> Vec<f64> {
        let mut out = vec![0.0; self.ndof()];
        let rule = cell_rule(self.mesh.dim(), self.quad_order);
        for c in 0..self.mesh.n_cells() {
            let geo = CellGeometry::new(&self.mesh, c);
            for (rp, &rw) in rule.points.iter().zip(&rule.weights) {
                let (x, phi, w) = geo.map(rp, rw);
                let fx = field.eval(&x);
                for k in 0..geo.n {
                    out[geo.nodes[k]] += w * fx * phi[k];
                }
            }
        }
        out
    }

    /// `int_dOmega g phi_i` by quadrature.
    pub fn boundary_load_vector(&self, field: &BoundaryField) -> Vec<f64> {
        let mut out = vec![0.0; self.ndof()];
        let normals = self.mesh.normals();
        for (f, x, w, phi) in boundary_points(&self.mesh, self.quad_order) {
            let gx = field.eval(&x, &normals[f]);
            for (a, &v) in self.mesh.boundary_facets()[f].vertices.iter().enumerate() {
                out[v] += w * gx * phi[a];
            }
        }
        out
    }

    /// L2 projection onto the P1 space; works for fields that are
    /// square-integrable but unbounded at a vertex.
    pub fn project(&self, field: &Field) -> Result<Vec<f64>> {
        let rhs = self.load_vector(field);
        Factorization::new(&self.mass)?.solve(&rhs)
    }

    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        self.mass.form(u, u).max(0.0).sqrt()
    }

    pub fn boundary_l2_norm(&self, u: &[f64]) -> f64 {
        self.boundary_mass.form(u, u).max(0.0).sqrt()
    }

    pub fn h1_seminorm(&self, u: &[f64]) -> f64 {
        self.gradient_stiffness.form(u, u).max(0.0).sqrt()
    }

    /// `int_Omega u`
    pub fn integral(&self, u: &[f64]) -> f64 {
        dot(&self.lumped_mass, u)
    }

    pub fn mean(&self, u: &[f64]) -> f64 {
        self.integral(u) / self.mesh.domain_measure()
    }

    /// `int_dOmega u`
    pub fn boundary_integral(&self, u: &[f64]) -> f64 {
        self.boundary_mass
            .row_sums()
            .iter()
            .zip(u)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `(int_Omega |u|^q)^{1/q}` of the P1 function with nodal values `u`.
    pub fn lq_norm(&self, u: &[f64], q: f64) -> f64 {
        let rule = cell_rule(self.mesh.dim(), 8);
        let mut s = 0.0;
        for c in 0..self.mesh.n_cells() {
            let geo = CellGeometry::new(&self.mesh, c);
            for (rp, &rw) in rule.points.iter().zip(&rule.weights) {
                let (_, phi, w) = geo.map(rp, rw);
                let v: f64 = (0..geo.n).map(|k| phi[k] * u[geo.nodes[k]]).sum();
                s += w * v.abs().powf(q);
            }
        }
        s.powf(1.0 / q)
    }

    /// `(int_dOmega |u|^q)^{1/q}`, counting measure in 1D.
    pub fn boundary_lq_norm(&self, u: &[f64], q: f64) -> f64 {
        let mut s = 0.0;
        for (f, _, w, phi) in boundary_points(&self.mesh, 8) {
            let fv = &self.mesh.boundary_facets()[f].vertices;
            let v: f64 = fv.iter().enumerate().map(|(a, &i)| phi[a] * u[i]).sum();
            s += w * v.abs().powf(q);
        }
        s.powf(1.0 / q)
    }

    /// `a_beta(u, v) = v^T K u`
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.stiffness.form(v, u)
    }
}

/// Smallest value of `xi^T a(x) xi - mu |xi|^2` over quadrature points and directions.
pub fn check_ellipticity(
    coeffs: &CoefficientSet,
    mesh: &Mesh,
    directions: &[Point],
    quad_order: usize,
) -> Result<f64> {
    if directions.is_empty() {
        return Err(LabError::input("directions", "panel is empty"));
    }
    let dim = mesh.dim();
    let rule = cell_rule(dim, quad_order.max(1));
    let mu = coeffs.ellipticity;
    let margins: Vec<f64> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let geo = CellGeometry::new(mesh, c);
            let mut worst = f64::INFINITY;
            for (rp, &rw) in rule.points.iter().zip(&rule.weights) {
                let (x, _, _) = geo.map(rp, rw);
                for xi in directions {
                    // The only unit directions on the line are +-1.
                    let xi = if dim == 1 { [1.0, 0.0] } else { *xi };
                    let mut q = 0.0;
                    for i in 0..dim {
                        for j in 0..dim {
                            q += xi[i] * coeffs.diffusion[i][j].eval(&x) * xi[j];
                        }
                    }
                    let n2 = xi[0] * xi[0] + xi[1] * xi[1];
                    worst = worst.min(q - mu * n2);
                }
            }
            worst
        })
        .collect();
    Ok(margins.into_iter().fold(f64::INFINITY, f64::min))
}

/// Eigenvalues of the symmetric pencil `(a, b)` with `b` positive definite, ascending.
pub(crate) fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    if n > DENSE_LIMIT {
        return Err(LabError::Precondition(format!(
            "dense eigenvalue problem of size {n} exceeds the limit {DENSE_LIMIT}"
        )));
    }
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| LabError::SingularSystem("pencil matrix is not positive definite".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(a)
        .ok_or_else(|| LabError::SingularSystem("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| LabError::SingularSystem("triangular solve failed".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let mut ev = SymmetricEigen::try_new(c, 1e-14, 10_000)
        .ok_or(LabError::NotConverged {
            iterations: 10_000,
            residual: f64::NAN,
        })?
        .eigenvalues;
    ev.as_mut_slice().sort_by(f64::total_cmp);
    Ok(ev)
}

/// Constants of the shifted coercivity estimate
/// `a_beta(u, u) + omega |u|^2 >= alpha_grad |grad u|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Garding {
    pub alpha_grad: f64,
    pub omega: f64,
}

/// Smallest discrete `omega` with `alpha_grad = mu / 2`.
pub fn estimate_garding(system: &AssembledSystem) -> Result<Garding> {
    let alpha = 0.5 * system.mu();
    let s = system
        .stiffness
        .symmetric_part()
        .add_scaled(1.0, &system.gradient_stiffness, -alpha);
    let ev = generalized_eigenvalues(&s.to_dense(), &system.mass.to_dense())?;
    let omega = (-ev[0]).max(0.0);
    Ok(Garding {
        alpha_grad: alpha,
        omega,
    })
}

/// `max(0, -min_u (u^T sym(K) u - mu |grad u|^2) / |u|_{H1}^2)`.
///
/// Zero means `a_beta(u, u) >= mu |grad u|^2` holds exactly on the discrete space.
pub fn coercivity_defect(system: &AssembledSystem) -> Result<f64> {
    let s =
        system
            .stiffness
            .symmetric_part()
            .add_scaled(1.0, &system.gradient_stiffness, -system.mu());
    let h1 = system.mass.add_scaled(1.0, &system.gradient_stiffness, 1.0);
    let ev = generalized_eigenvalues(&s.to_dense(), &h1.to_dense())?;
    Ok((-ev[0]).max(0.0))
}

/// Largest `|a_beta(phi_j, 1)| / |phi_j|_{H1}` over basis functions.
///
/// This is `int c . grad eta + int d eta + int_dOmega beta eta` for `eta = phi_j`.
pub fn check_conservation_condition(system: &AssembledSystem) -> f64 {
    let cols = system.stiffness.col_sums();
    let m = system.mass.diag();
    let g = system.gradient_stiffness.diag();
    cols.iter()
        .zip(m.iter().zip(&g))
        .map(|(r, (mi, gi))| r.abs() / (mi + gi).sqrt())
        .fold(0.0, f64::max)
}

/// `K 1` measured in the dual norm of the discrete H1 space.
pub fn check_fixedpoint_condition(system: &AssembledSystem) -> Result<f64> {
    let r = system.stiffness.row_sums();
    if r.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let h1 = system.mass.add_scaled(1.0, &system.gradient_stiffness, 1.0);
    let z = Factorization::new(&h1)?.solve(&r)?;
    Ok(dot(&r, &z).max(0.0).sqrt())
}

/// Constant `c1` of `|u|^2 + |u|_{dOmega}^2 <= c1 |grad u|^2` on discrete
/// functions with zero mean.
pub fn poincare_constant(system: &AssembledSystem) -> Result<f64> {
    let n = system.ndof();
    let w = system.lumped_mass.clone();
    // Householder reflector mapping w to a multiple of e_0; its remaining
    // columns span the zero-mean subspace.
    let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v = DVector::from_vec(w);
    v[0] += wn * if v[0] >= 0.0 { 1.0 } else { -1.0 };
    let vv = v.dot(&v);
    let mut h = DMatrix::<f64>::identity(n, n);
    h -= (&v * v.transpose()) * (2.0 / vv);
    let q = h.columns(1, n - 1).into_owned();
    let kg = q.transpose() * system.gradient_stiffness.to_dense() * &q;
    let b = q.transpose()
        * system
            .mass
            .add_scaled(1.0, &system.boundary_mass, 1.0)
            .to_dense()
        * &q;
    let ev = generalized_eigenvalues(&kg, &b)?;
    if ev[0] <= 0.0 {
        return Err(LabError::SingularSystem(
            "gradient form degenerate on zero-mean functions".into(),
        ));
    }
    Ok(1.0 / ev[0])
}

/// Time constant and forcing constant of the exponential decay estimate,
/// `tau = c1 / (2 mu^2)` and `c = c1 / mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayConstants {
    pub poincare: f64,
    pub tau: f64,
    pub forcing: f64,
}

pub fn decay_constants(system: &AssembledSystem) -> Result<DecayConstants> {
    let c1 = poincare_constant(system)?;
    let mu = system.mu();
    Ok(DecayConstants {
        poincare: c1,
        tau: c1 / (2.0 * mu * mu),
        forcing: c1 / mu,
    })
}
