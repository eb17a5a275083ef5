//! Shared helpers for the integration and acceptance tests, including a
//! dense reference implementation that shares no numerics with the library.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::Rng;
use proptest::test_runner::{RngAlgorithm, TestRng};
use sfwg::cases::case_by_id;
use sfwg::mesh::{Mesh, MeshFamily, Point2};
use sfwg::solver::{solve_biharmonic, BiharmonicData, Discretization, SolutionPair, SolverOptions};

/// Gauss-Legendre nodes and weights on [-1, 1] via the Golub-Welsch eigenproblem.
pub fn golub_welsch(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::zeros(m, m);
    for i in 1..m {
        let b = i as f64 / ((4 * i * i - 1) as f64).sqrt();
        jac[(i - 1, i)] = b;
        jac[(i, i - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

pub struct Rule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
}

/// Over-resolved rule on a convex polygon: fan from the first vertex, each
/// triangle mapped from the square by the Duffy collapse.
pub fn polygon_rule(poly: &[Point2], m: usize) -> Rule {
    let (x, w) = golub_welsch(m);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let a = poly[0];
    for i in 1..poly.len() - 1 {
        let (b, c) = (poly[i], poly[i + 1]);
        let det = ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs();
        for (&u, &wu) in x.iter().zip(&w) {
            for (&v, &wv) in x.iter().zip(&w) {
                let s = 0.5 * (1.0 + u);
                let t = 0.5 * (1.0 + v) * (1.0 - s);
                points.push(Point2::new(
                    a.x + s * (b.x - a.x) + t * (c.x - a.x),
                    a.y + s * (b.y - a.y) + t * (c.y - a.y),
                ));
                weights.push(0.25 * (1.0 - s) * wu * wv * det);
            }
        }
    }
    Rule { points, weights }
}

fn legendre(n: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return 1.0;
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn legendre_d(n: usize, x: f64) -> f64 {
    // (2k+1) P_k summed over k = n-1, n-3, ...
    let mut s = 0.0;
    let mut k = n as isize - 1;
    while k >= 0 {
        s += (2 * k + 1) as f64 * legendre(k as usize, x);
        k -= 2;
    }
    s
}

struct Geometry {
    poly: Vec<Point2>,
    centroid: Point2,
    diameter: f64,
    lo: Point2,
    hi: Point2,
}

fn geometry(mesh: &Mesh, t: usize) -> Geometry {
    let mut poly: Vec<Point2> = mesh.elements[t].vertex_ids.iter().map(|&v| mesh.vertices[v]).collect();
    let n = poly.len();
    let mut area2 = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let c = p.x * q.y - q.x * p.y;
        area2 += c;
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    if area2 < 0.0 {
        poly.reverse();
    }
    let centroid = Point2::new(cx / (3.0 * area2), cy / (3.0 * area2));
    let mut diameter: f64 = 0.0;
    for p in &poly {
        for q in &poly {
            diameter = diameter.max(((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt());
        }
    }
    let lo = Point2::new(poly.iter().map(|p| p.x).fold(f64::MAX, f64::min), poly.iter().map(|p| p.y).fold(f64::MAX, f64::min));
    let hi = Point2::new(poly.iter().map(|p| p.x).fold(f64::MIN, f64::max), poly.iter().map(|p| p.y).fold(f64::MIN, f64::max));
    Geometry {
        poly,
        centroid,
        diameter,
        lo,
        hi,
    }
}

fn interior_values(g: &Geometry, k: usize, p: Point2) -> Vec<f64> {
    let s = 0.5 * g.diameter;
    let (x, y) = ((p.x - g.centroid.x) / s, (p.y - g.centroid.y) / s);
    let mut out = Vec::new();
    for d in 0..=k {
        for a in (0..=d).rev() {
            out.push(x.powi(a as i32) * y.powi((d - a) as i32));
        }
    }
    out
}

/// Product Legendre basis of total degree `j` on the bounding box: values and gradients.
fn range_values(g: &Geometry, j: usize, p: Point2) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (hx, hy) = (0.5 * (g.hi.x - g.lo.x), 0.5 * (g.hi.y - g.lo.y));
    let xi = (p.x - 0.5 * (g.lo.x + g.hi.x)) / hx;
    let eta = (p.y - 0.5 * (g.lo.y + g.hi.y)) / hy;
    let (mut v, mut dx, mut dy) = (Vec::new(), Vec::new(), Vec::new());
    for d in 0..=j {
        for a in 0..=d {
            let b = d - a;
            v.push(legendre(a, xi) * legendre(b, eta));
            dx.push(legendre_d(a, xi) / hx * legendre(b, eta));
            dy.push(legendre(a, xi) * legendre_d(b, eta) / hy);
        }
    }
    (v, dx, dy)
}

struct Side {
    edge: usize,
    points: Vec<Point2>,
    params: Vec<f64>,
    weights: Vec<f64>,
    normal: Point2,
}

fn edge_points(mesh: &Mesh, e: usize, m: usize) -> (Vec<Point2>, Vec<f64>, Vec<f64>) {
    let (x, w) = golub_welsch(m);
    let a = mesh.vertices[mesh.edges[e].endpoints[0]];
    let b = mesh.vertices[mesh.edges[e].endpoints[1]];
    let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
    let pts = x
        .iter()
        .map(|&t| {
            let s = 0.5 * (1.0 + t);
            Point2::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y))
        })
        .collect();
    (pts, x.clone(), w.iter().map(|w| 0.5 * len * w).collect())
}

fn sides(mesh: &Mesh, g: &Geometry, m: usize) -> Vec<Side> {
    let n = g.poly.len();
    (0..n)
        .map(|i| {
            let (p, q) = (g.poly[i], g.poly[(i + 1) % n]);
            let close = |a: Point2, b: Point2| (a.x - b.x).abs() + (a.y - b.y).abs() < 1e-12;
            let edge = (0..mesh.n_edges())
                .find(|&e| {
                    let a = mesh.vertices[mesh.edges[e].endpoints[0]];
                    let b = mesh.vertices[mesh.edges[e].endpoints[1]];
                    (close(a, p) && close(b, q)) || (close(a, q) && close(b, p))
                })
                .expect("side is a mesh edge");
            let len = ((q.x - p.x).powi(2) + (q.y - p.y).powi(2)).sqrt();
            let (points, params, weights) = edge_points(mesh, edge, m);
            Side {
                edge,
                points,
                params,
                weights,
                normal: Point2::new((q.y - p.y) / len, -(q.x - p.x) / len),
            }
        })
        .collect()
}

/// Dense reference discretization of the same weak function space.
pub struct Oracle {
    pub k: usize,
    pub n_all: usize,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub boundary: Vec<bool>,
    interior_dim: usize,
    n_elements: usize,
    mesh: Mesh,
}

impl Oracle {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        let ni = (k + 1) * (k + 2) / 2;
        let nb = k + 1;
        let n_all = mesh.n_elements() * ni + mesh.n_edges() * nb;
        let mut a = DMatrix::zeros(n_all, n_all);
        let mut b = DMatrix::zeros(n_all, n_all);
        for t in 0..mesh.n_elements() {
            let g = geometry(mesh, t);
            let j = g.poly.len() + k - 1;
            let rule = polygon_rule(&g.poly, j + k + 6);
            let sides = sides(mesh, &g, j + k + 6);
            let mut dofs: Vec<usize> = (t * ni..(t + 1) * ni).collect();
            for s in &sides {
                let o = mesh.n_elements() * ni + s.edge * nb;
                dofs.extend(o..o + nb);
            }
            let nl = dofs.len();

            let mut al = DMatrix::zeros(nl, nl);
            for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                let v = DVector::from_vec(interior_values(&g, k, p));
                al.view_mut((0, 0), (ni, ni)).gemm(w, &v, &v.transpose(), 1.0);
            }
            for (si, s) in sides.iter().enumerate() {
                for ((&p, &tp), &w) in s.points.iter().zip(&s.params).zip(&s.weights) {
                    let mut jump = DVector::zeros(nl);
                    for (i, v) in interior_values(&g, k, p).into_iter().enumerate() {
                        jump[i] = v;
                    }
                    for i in 0..nb {
                        jump[ni + si * nb + i] = -tp.powi(i as i32);
                    }
                    al.gemm(g.diameter * w, &jump, &jump.transpose(), 1.0);
                }
            }

            // Householder QR of the weighted table gives an orthonormal range basis phi R^-1
            let nr = (j + 1) * (j + 2) / 2;
            let mut table = DMatrix::<f64>::zeros(rule.points.len(), nr);
            let mut load = DMatrix::<f64>::zeros(2 * nr, nl);
            for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let (v, dx, dy) = range_values(&g, j, p);
                let phi = interior_values(&g, k, p);
                for r in 0..nr {
                    table[(q, r)] = w.sqrt() * v[r];
                    for (i, &f) in phi.iter().enumerate() {
                        load[(r, i)] -= w * f * dx[r];
                        load[(nr + r, i)] -= w * f * dy[r];
                    }
                }
            }
            for (si, s) in sides.iter().enumerate() {
                for ((&p, &tp), &w) in s.points.iter().zip(&s.params).zip(&s.weights) {
                    let (v, _, _) = range_values(&g, j, p);
                    for r in 0..nr {
                        for i in 0..nb {
                            let c = w * tp.powi(i as i32) * v[r];
                            load[(r, ni + si * nb + i)] += c * s.normal.x;
                            load[(nr + r, ni + si * nb + i)] += c * s.normal.y;
                        }
                    }
                }
            }
            let rt = table.qr().r().transpose();
            let mut ortho = DMatrix::<f64>::zeros(2 * nr, nl);
            for c in 0..2 {
                let block = load.rows(c * nr, nr).into_owned();
                let x = rt.solve_lower_triangular(&block).expect("range table has full rank");
                ortho.rows_mut(c * nr, nr).copy_from(&x);
            }
            let bl = ortho.transpose() * &ortho;

            for (r, &gr) in dofs.iter().enumerate() {
                for (c, &gc) in dofs.iter().enumerate() {
                    a[(gr, gc)] += al[(r, c)];
                    b[(gr, gc)] += bl[(r, c)];
                }
            }
        }
        let mut boundary = vec![false; n_all];
        for (e, edge) in mesh.edges.iter().enumerate() {
            if edge.incident_elements.len() == 1 {
                let o = mesh.n_elements() * ni + e * nb;
                boundary[o..o + nb].iter_mut().for_each(|x| *x = true);
            }
        }
        Self {
            k,
            n_all,
            a,
            b,
            boundary,
            interior_dim: ni,
            n_elements: mesh.n_elements(),
            mesh: mesh.clone(),
        }
    }

    fn edge_offset(&self, e: usize) -> usize {
        self.n_elements * self.interior_dim + e * (self.k + 1)
    }

    /// L² projection of `f` onto the edge polynomials of edge `e`.
    fn edge_projection(&self, e: usize, f: impl Fn(Point2) -> f64) -> DVector<f64> {
        let nb = self.k + 1;
        let (pts, params, w) = edge_points(&self.mesh, e, 2 * self.k + 12);
        let mut m = DMatrix::zeros(nb, nb);
        let mut r = DVector::zeros(nb);
        for q in 0..pts.len() {
            for i in 0..nb {
                let pi = params[q].powi(i as i32);
                r[i] += w[q] * f(pts[q]) * pi;
                for jj in 0..nb {
                    m[(i, jj)] += w[q] * pi * params[q].powi(jj as i32);
                }
            }
        }
        m.lu().solve(&r).expect("edge mass is invertible")
    }

    /// Solves the saddle system densely; returns full `(φ, u)` coefficient vectors.
    pub fn solve(&self, data: &dyn BiharmonicData) -> (DVector<f64>, DVector<f64>) {
        let n = self.n_all;
        let ni = self.interior_dim;
        let nb = self.k + 1;
        let free: Vec<usize> = (0..n).filter(|&g| !self.boundary[g]).collect();
        let mut ud = DVector::zeros(n);
        let mut flux = DVector::<f64>::zeros(n);
        for (e, edge) in self.mesh.edges.iter().enumerate() {
            if edge.incident_elements.len() != 1 {
                continue;
            }
            let o = self.edge_offset(e);
            let ud_e = self.edge_projection(e, |p| data.dirichlet(p));
            ud.rows_mut(o, nb).copy_from(&ud_e);
            let t = edge.incident_elements[0];
            let g = geometry(&self.mesh, t);
            let side = sides(&self.mesh, &g, 2).into_iter().find(|s| s.edge == e).expect("boundary side");
            let (pts, params, w) = edge_points(&self.mesh, e, 2 * self.k + 12);
            for q in 0..pts.len() {
                let gn = data.neumann(pts[q], side.normal);
                for i in 0..nb {
                    flux[o + i] += w[q] * gn * params[q].powi(i as i32);
                }
            }
        }
        let mut load = DVector::<f64>::zeros(n);
        for t in 0..self.n_elements {
            let g = geometry(&self.mesh, t);
            let rule = polygon_rule(&g.poly, 2 * self.k + 12);
            for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                let f = data.source(p);
                for (i, v) in interior_values(&g, self.k, p).into_iter().enumerate() {
                    load[t * ni + i] += w * f * v;
                }
            }
        }

        let m = n + free.len();
        let mut mat = DMatrix::zeros(m, m);
        mat.view_mut((0, 0), (n, n)).copy_from(&self.a);
        for (c, &g) in free.iter().enumerate() {
            for r in 0..n {
                mat[(r, n + c)] = -self.b[(r, g)];
                mat[(n + c, r)] = -self.b[(g, r)];
            }
        }
        let lift = &self.b * &ud;
        let mut rhs = DVector::zeros(m);
        for i in 0..n {
            rhs[i] = lift[i] - flux[i];
        }
        for (c, &g) in free.iter().enumerate() {
            rhs[n + c] = -load[g];
        }
        let x = mat.lu().solve(&rhs).expect("saddle system is invertible");
        let phi = x.rows(0, n).into_owned();
        let mut u = ud;
        for (c, &g) in free.iter().enumerate() {
            u[g] = x[n + c];
        }
        (phi, u)
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

/// Deterministic pseudo-random coefficients in [-1, 1].
pub fn pseudo_random(len: usize, seed: u64) -> Vec<f64> {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = TestRng::from_seed(RngAlgorithm::ChaCha, &bytes);
    (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

fn solve(mesh: &Mesh, case: u8) -> (Discretization, SolutionPair) {
    let disc = Discretization::new(mesh, 2, SolverOptions::default()).unwrap();
    let sol = solve_biharmonic(&disc, &case_by_id(case).unwrap()).unwrap();
    (disc, sol)
}

/// Maximum coefficient difference after mapping interior blocks back to the
/// original element numbering.
pub fn permuted_difference(family: MeshFamily, n: usize, case: u8) -> f64 {
    let mesh = family.generate(n).unwrap();
    let ne = mesh.n_elements();
    let order: Vec<usize> = (0..ne).map(|i| (i * 7 + 3) % ne).collect();
    let mut seen = order.clone();
    seen.sort_unstable();
    assert_eq!(seen, (0..ne).collect::<Vec<_>>(), "order must be a permutation");
    let permuted = mesh.permute_elements(&order).unwrap();

    let (d0, s0) = solve(&mesh, case);
    let (d1, s1) = solve(&permuted, case);
    let mut worst: f64 = 0.0;
    for (a, b) in [(&s0.phi, &s1.phi), (&s0.u, &s1.u)] {
        for (new, &old) in order.iter().enumerate() {
            for (x, y) in a.interior(&d0.dofs, old).iter().zip(b.interior(&d1.dofs, new)) {
                worst = worst.max((x - y).abs());
            }
        }
        for e in 0..mesh.n_edges() {
            for (x, y) in a.trace(&d0.dofs, e).iter().zip(b.trace(&d1.dofs, e)) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}
