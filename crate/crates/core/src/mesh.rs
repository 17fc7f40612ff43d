//! Simplicial meshes of the unit interval and of simple polygons.
//!
//! A [`Mesh`] is immutable once built. Cells are stored as a flat index
//! array with stride `dim + 1`; boundary facets carry the owning cell, the
//! local face index (the face opposite local vertex `k`) and an outward
//! unit normal.
//!
//! In one dimension the boundary `{0, 1}` is measured with the counting
//! measure: every boundary point has weight one.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{LabError, Result};

/// A point of the plane; one-dimensional meshes use `y = 0`.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub cell: usize,
    /// Facet opposite this local vertex of `cell`.
    pub local_face: usize,
    /// One vertex in 1D, two in 2D (ordered counter-clockwise along the boundary).
    pub vertices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<usize>,
    facets: Vec<BoundaryFacet>,
    normals: Vec<Point>,
    h: f64,
}

/// Uniform mesh of `(0, 1)` with `n` cells.
pub fn build_interval_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(LabError::input(
            "n",
            "an interval mesh needs at least one cell",
        ));
    }
    let vertices = (0..=n).map(|i| [i as f64 / n as f64, 0.0]).collect();
    let cells = (0..n).flat_map(|i| [i, i + 1]).collect();
    Mesh::from_parts(1, vertices, cells)
}

/// Conforming triangulation of a simple polygon with maximal cell diameter
/// at most `h_target`.
///
/// The polygon is ear-clipped, improved by Delaunay edge flips, then
/// uniformly red-refined until the diameter bound holds. Boundary facets
/// trace the input polygon.
pub fn build_polygon_mesh(polygon: &[Point], h_target: f64) -> Result<Mesh> {
    if polygon.len() < 3 {
        return Err(LabError::InvalidMesh(format!(
            "a polygon needs at least 3 vertices, got {}",
            polygon.len()
        )));
    }
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(LabError::input("h_target", "must be positive and finite"));
    }
    check_simple(polygon)?;

    let mut pts: Vec<Point> = polygon.to_vec();
    if signed_area(&pts) < 0.0 {
        pts.reverse();
    }
    let mut tris = ear_clip(&pts)?;
    delaunay_flip(&pts, &mut tris);
    let cells = tris.iter().flat_map(|t| t.iter().copied()).collect();
    let mut mesh = Mesh::from_parts(2, pts, cells)?;
    while mesh.h > h_target {
        mesh = mesh.refine();
    }
    Ok(mesh)
}

/// Shoelace area of a polygon (positive for counter-clockwise orientation).
pub fn signed_area(polygon: &[Point]) -> f64 {
    let n = polygon.len();
    (0..n)
        .map(|i| {
            let a = polygon[i];
            let b = polygon[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: Point, b: Point, c: Point, d: f64| {
        d == 0.0
            && c[0] >= a[0].min(b[0])
            && c[0] <= a[0].max(b[0])
            && c[1] >= a[1].min(b[1])
            && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn check_simple(polygon: &[Point]) -> Result<()> {
    let n = polygon.len();
    for (i, p) in polygon.iter().enumerate() {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(LabError::InvalidMesh(format!("vertex {i} is not finite")));
        }
        for q in &polygon[i + 1..] {
            if p == q {
                return Err(LabError::InvalidMesh("repeated polygon vertex".into()));
            }
        }
    }
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[(i + 1) % n]);
        for j in i + 1..n {
            // Adjacent edges share a vertex; skip them.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (polygon[j], polygon[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Err(LabError::InvalidMesh(format!(
                    "polygon is self-intersecting (edges {i} and {j})"
                )));
            }
        }
    }
    if signed_area(polygon).abs() <= 0.0 {
        return Err(LabError::InvalidMesh("polygon has zero area".into()));
    }
    Ok(())
}

fn point_in_triangle(p: Point, a: Point, b: Point, c: Point) -> bool {
    cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
}

fn ear_clip(pts: &[Point]) -> Result<Vec<[usize; 3]>> {
    let mut ring: Vec<usize> = (0..pts.len()).collect();
    let mut tris = Vec::with_capacity(pts.len() - 2);
    while ring.len() > 3 {
        let m = ring.len();
        let mut clipped = false;
        for k in 0..m {
            let (ip, i, inx) = (ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]);
            let (a, b, c) = (pts[ip], pts[i], pts[inx]);
            if cross(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = ring
                .iter()
                .filter(|&&j| j != ip && j != i && j != inx)
                .any(|&j| point_in_triangle(pts[j], a, b, c));
            if !blocked {
                tris.push([ip, i, inx]);
                ring.remove(k);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(LabError::InvalidMesh("ear clipping found no ear".into()));
        }
    }
    let (a, b, c) = (ring[0], ring[1], ring[2]);
    if cross(pts[a], pts[b], pts[c]) <= 0.0 {
        return Err(LabError::InvalidMesh("degenerate final ear".into()));
    }
    tris.push([a, b, c]);
    Ok(tris)
}

fn in_circumcircle(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let det = (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        - (bdx * bdx + bdy * bdy) * (adx * cdy - cdx * ady)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
    det > 1e-12
}

/// Lawson edge flips on a CCW triangulation until it is locally Delaunay.
fn delaunay_flip(pts: &[Point], tris: &mut [[usize; 3]]) {
    for _sweep in 0..100 {
        let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                edges.entry((a.min(b), a.max(b))).or_default().push((t, k));
            }
        }
        let mut flipped = false;
        let mut touched = vec![false; tris.len()];
        for owners in edges.values() {
            if owners.len() != 2 {
                continue;
            }
            let (t1, k1) = owners[0];
            let (t2, k2) = owners[1];
            if touched[t1] || touched[t2] {
                continue;
            }
            let tri1 = tris[t1];
            let tri2 = tris[t2];
            let c = tri1[k1];
            let d = tri2[k2];
            let a = tri1[(k1 + 1) % 3];
            let b = tri1[(k1 + 2) % 3];
            if !in_circumcircle(pts[a], pts[b], pts[c], pts[d]) {
                continue;
            }
            // New triangles (c, a, d) and (d, b, c) must both be positively oriented.
            if cross(pts[c], pts[a], pts[d]) <= 0.0 || cross(pts[d], pts[b], pts[c]) <= 0.0 {
                continue;
            }
            tris[t1] = [c, a, d];
            tris[t2] = [d, b, c];
            touched[t1] = true;
            touched[t2] = true;
            flipped = true;
        }
        if !flipped {
            break;
        }
    }
}

impl Mesh {
    /// Builds a mesh from vertices and a flat cell array, deriving boundary
    /// facets, normals and `h`. Triangles are reoriented counter-clockwise.
    pub fn from_parts(dim: usize, vertices: Vec<Point>, mut cells: Vec<usize>) -> Result<Mesh> {
        if dim != 1 && dim != 2 {
            return Err(LabError::InvalidMesh(format!(
                "unsupported dimension {dim}"
            )));
        }
        let stride = dim + 1;
        if cells.is_empty() || !cells.len().is_multiple_of(stride) {
            return Err(LabError::InvalidMesh("cell array has wrong length".into()));
        }
        if cells.iter().any(|&i| i >= vertices.len()) {
            return Err(LabError::InvalidMesh(
                "cell references missing vertex".into(),
            ));
        }
        for c in cells.chunks_mut(stride) {
            let measure = match dim {
                1 => vertices[c[1]][0] - vertices[c[0]][0],
                _ => cross(vertices[c[0]], vertices[c[1]], vertices[c[2]]),
            };
            if measure == 0.0 {
                return Err(LabError::InvalidMesh("degenerate cell".into()));
            }
            if measure < 0.0 {
                c.swap(0, 1);
            }
        }

        let mut faces: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
        for (ci, c) in cells.chunks(stride).enumerate() {
            for k in 0..stride {
                let mut key: Vec<usize> = (1..stride).map(|o| c[(k + o) % stride]).collect();
                key.sort_unstable();
                faces.entry(key).or_default().push((ci, k));
            }
        }
        let mut facets = Vec::new();
        for owners in faces.values() {
            match owners.len() {
                1 => {
                    let (cell, k) = owners[0];
                    let c = &cells[cell * stride..(cell + 1) * stride];
                    let verts = (1..stride).map(|o| c[(k + o) % stride]).collect();
                    facets.push(BoundaryFacet {
                        cell,
                        local_face: k,
                        vertices: verts,
                    });
                }
                2 => {}
                n => {
                    return Err(LabError::InvalidMesh(format!(
                        "non-manifold facet shared by {n} cells"
                    )))
                }
            }
        }
        facets.sort_by(|a, b| a.vertices.cmp(&b.vertices));

        let mut mesh = Mesh {
            dim,
            vertices,
            cells,
            facets,
            normals: Vec::new(),
            h: 0.0,
        };
        mesh.normals = (0..mesh.facets.len())
            .map(|f| mesh.compute_normal(f))
            .collect();
        mesh.h = (0..mesh.n_cells())
            .map(|c| mesh.cell_diameter(c))
            .fold(0.0, f64::max);
        Ok(mesh)
    }

    fn compute_normal(&self, f: usize) -> Point {
        let facet = &self.facets[f];
        let cell = self.cell(facet.cell);
        match self.dim {
            1 => {
                let v = self.vertices[facet.vertices[0]][0];
                let other = self.vertices[cell[facet.local_face]][0];
                [if v > other { 1.0 } else { -1.0 }, 0.0]
            }
            _ => {
                let a = self.vertices[facet.vertices[0]];
                let b = self.vertices[facet.vertices[1]];
                let len = dist(a, b);
                // Facet vertices follow the CCW cell order, so the outward
                // normal is the edge direction rotated clockwise.
                [(b[1] - a[1]) / len, -(b[0] - a[0]) / len]
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.cells[c * s..(c + 1) * s]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks(self.dim + 1)
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    pub fn normals(&self) -> &[Point] {
        &self.normals
    }

    /// Maximal cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        let v = self.cell(c);
        match self.dim {
            1 => (self.vertices[v[1]][0] - self.vertices[v[0]][0]).abs(),
            _ => {
                0.5 * cross(
                    self.vertices[v[0]],
                    self.vertices[v[1]],
                    self.vertices[v[2]],
                )
                .abs()
            }
        }
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let v = self.cell(c);
        let mut d: f64 = 0.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                d = d.max(dist(self.vertices[v[i]], self.vertices[v[j]]));
            }
        }
        d
    }

    pub fn facet_measure(&self, f: usize) -> f64 {
        let fv = &self.facets[f].vertices;
        match self.dim {
            1 => 1.0,
            _ => dist(self.vertices[fv[0]], self.vertices[fv[1]]),
        }
    }

    /// `|Omega|`
    pub fn domain_measure(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_measure(c)).sum()
    }

    /// `|dOmega|`, counting measure in 1D.
    pub fn boundary_measure(&self) -> f64 {
        (0..self.facets.len()).map(|f| self.facet_measure(f)).sum()
    }

    /// Sorted, deduplicated list of vertices lying on the boundary.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .facets
            .iter()
            .flat_map(|f| f.vertices.iter().copied())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Uniform refinement: segments are bisected, triangles red-refined into four.
    pub fn refine(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                vertices.len() - 1
            })
        };
        let mut cells = Vec::with_capacity(self.cells.len() * 4);
        for c in self.cells() {
            match self.dim {
                1 => {
                    let m = midpoint(c[0], c[1], &mut vertices);
                    cells.extend_from_slice(&[c[0], m, m, c[1]]);
                }
                _ => {
                    let (a, b, d) = (c[0], c[1], c[2]);
                    let ab = midpoint(a, b, &mut vertices);
                    let bd = midpoint(b, d, &mut vertices);
                    let da = midpoint(d, a, &mut vertices);
                    cells.extend_from_slice(&[a, ab, da, ab, b, bd, da, bd, d, ab, bd, da]);
                }
            }
        }
        if self.dim == 1 {
            // Keep 1D vertices sorted so the natural ordering stays banded.
            let mut order: Vec<usize> = (0..vertices.len()).collect();
            order.sort_by(|&i, &j| vertices[i][0].total_cmp(&vertices[j][0]));
            let mut new_index = vec![0; vertices.len()];
            for (new, &old) in order.iter().enumerate() {
                new_index[old] = new;
            }
            let sorted = order.iter().map(|&i| vertices[i]).collect();
            let cells = cells.iter().map(|&i| new_index[i]).collect();
            return Mesh::from_parts(1, sorted, cells).expect("refinement preserves validity");
        }
        Mesh::from_parts(self.dim, vertices, cells).expect("refinement preserves validity")
    }

    /// Checks the structural invariants. Returns a description of the first
    /// violation found.
    pub fn validate(&self) -> Result<()> {
        for (f, n) in self.normals.iter().enumerate() {
            let len = (n[0] * n[0] + n[1] * n[1]).sqrt();
            if (len - 1.0).abs() > 1e-12 {
                return Err(LabError::InvalidMesh(format!("normal {f} is not unit")));
            }
        }
        if self.dim == 2 {
            let mut degree: HashMap<usize, usize> = HashMap::new();
            for facet in &self.facets {
                for &v in &facet.vertices {
                    *degree.entry(v).or_default() += 1;
                }
            }
            if degree.values().any(|&d| d != 2) {
                return Err(LabError::InvalidMesh(
                    "boundary does not form closed loops".into(),
                ));
            }
            for (f, facet) in self.facets.iter().enumerate() {
                let a = self.vertices[facet.vertices[0]];
                let b = self.vertices[facet.vertices[1]];
                let c = self.cell_centroid(facet.cell);
                let n = self.normals[f];
                let t = [b[0] - a[0], b[1] - a[1]];
                if (n[0] * t[0] + n[1] * t[1]).abs() > 1e-12 * dist(a, b) {
                    return Err(LabError::InvalidMesh(format!("normal {f} not orthogonal")));
                }
                let m = [0.5 * (a[0] + b[0]) - c[0], 0.5 * (a[1] + b[1]) - c[1]];
                if n[0] * m[0] + n[1] * m[1] <= 0.0 {
                    return Err(LabError::InvalidMesh(format!("normal {f} points inward")));
                }
            }
        }
        Ok(())
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        let v = self.cell(c);
        let k = v.len() as f64;
        let mut p = [0.0, 0.0];
        for &i in v {
            p[0] += self.vertices[i][0] / k;
            p[1] += self.vertices[i][1] / k;
        }
        p
    }

    /// Largest interior angle over all triangles (0 for 1D meshes).
    pub fn max_angle(&self) -> f64 {
        if self.dim == 1 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for c in self.cells() {
            for k in 0..3 {
                let o = self.vertices[c[k]];
                let a = self.vertices[c[(k + 1) % 3]];
                let b = self.vertices[c[(k + 2) % 3]];
                let u = [a[0] - o[0], a[1] - o[1]];
                let w = [b[0] - o[0], b[1] - o[1]];
                let cos = (u[0] * w[0] + u[1] * w[1]) / (dist(a, o) * dist(b, o));
                worst = worst.max(cos.clamp(-1.0, 1.0).acos());
            }
        }
        worst
    }

    /// Plain-text export: `v x [y]`, `c i j [k]`, `b i [j]`, one record per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.vertices {
            match self.dim {
                1 => writeln!(out, "v {:e}", p[0]),
                _ => writeln!(out, "v {:e} {:e}", p[0], p[1]),
            }
            .unwrap();
        }
        for c in self.cells() {
            let idx: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            writeln!(out, "c {}", idx.join(" ")).unwrap();
        }
        for f in &self.facets {
            let idx: Vec<String> = f.vertices.iter().map(|i| i.to_string()).collect();
            writeln!(out, "b {}", idx.join(" ")).unwrap();
        }
        out
    }

    /// Parses the format written by [`Mesh::to_text`]. Boundary records are
    /// checked against the facets derived from the cells.
    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut vertices = Vec::new();
        let mut cells = Vec::new();
        let mut boundary: Vec<Vec<usize>> = Vec::new();
        let mut dim = None;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: &str| LabError::Parse {
                line: ln + 1,
                message: m.to_string(),
            };
            let mut parts = line.split_whitespace();
            let tag = parts.next().unwrap();
            let rest: Vec<&str> = parts.collect();
            match tag {
                "v" => {
                    let xs: Vec<f64> = rest
                        .iter()
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| err("bad coordinate"))?;
                    let d = xs.len();
                    if d != 1 && d != 2 {
                        return Err(err("a vertex has 1 or 2 coordinates"));
                    }
                    if *dim.get_or_insert(d) != d {
                        return Err(err("mixed vertex dimensions"));
                    }
                    vertices.push([xs[0], if d == 2 { xs[1] } else { 0.0 }]);
                }
                "c" | "b" => {
                    let idx: Vec<usize> = rest
                        .iter()
                        .map(|s| s.parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| err("bad index"))?;
                    if tag == "c" {
                        cells.push((ln + 1, idx));
                    } else {
                        boundary.push(idx);
                    }
                }
                _ => return Err(err("unknown record tag")),
            }
        }
        let dim = dim.ok_or_else(|| LabError::InvalidMesh("no vertices".into()))?;
        let mut flat = Vec::new();
        for (ln, c) in cells {
            if c.len() != dim + 1 {
                return Err(LabError::Parse {
                    line: ln,
                    message: format!("a cell needs {} vertices", dim + 1),
                });
            }
            flat.extend(c);
        }
        let mesh = Mesh::from_parts(dim, vertices, flat)?;
        if !boundary.is_empty() {
            let mut given: Vec<Vec<usize>> = boundary
                .into_iter()
                .map(|mut b| {
                    b.sort_unstable();
                    b
                })
                .collect();
            given.sort();
            let mut derived: Vec<Vec<usize>> = mesh
                .facets
                .iter()
                .map(|f| {
                    let mut b = f.vertices.clone();
                    b.sort_unstable();
                    b
                })
                .collect();
            derived.sort();
            if given != derived {
                return Err(LabError::InvalidMesh(
                    "boundary records do not match the cell topology".into(),
                ));
            }
        }
        Ok(mesh)
    }
}
