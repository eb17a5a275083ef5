//! Scaled monomial bases on elements and edges, Gram matrices, and the local
//! L² projections onto `P_k(T)`, `P_k(e)` and `[P_j(T)]²`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::mesh::{Edge, Element, Point2};
use crate::quadrature::{edge_quadrature, element_quadrature, EdgeRule, QuadratureRule};

pub fn scalar_dim(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// `φ_α(x) = ((x - x_T) / (h_T / 2))^α` for `|α| ≤ degree`, ordered by total degree
/// and then by decreasing power of the first coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledMonomialBasis {
    pub center: Point2,
    pub scale: f64,
    pub degree: usize,
    pub exponents: Vec<(usize, usize)>,
    /// Lower-triangular change of basis applied on top of the monomials.
    pub transform: Option<DMatrix<f64>>,
}

impl ScaledMonomialBasis {
    pub fn new(center: Point2, scale: f64, degree: usize) -> Self {
        let mut exponents = Vec::with_capacity(scalar_dim(degree));
        for d in 0..=degree {
            for a in (0..=d).rev() {
                exponents.push((a, d - a));
            }
        }
        Self {
            center,
            scale,
            degree,
            exponents,
            transform: None,
        }
    }

    /// Same span, orthonormal in the discrete inner product of `rule`
    /// (two Cholesky passes).
    pub fn orthonormalized(mut self, rule: &QuadratureRule) -> Result<Self> {
        for _ in 0..2 {
            let m = gram(&self.table(&rule.points), &rule.weights);
            let l = cholesky(m, "orthonormalization")?.l();
            let inv = l
                .solve_lower_triangular(&DMatrix::identity(self.dim(), self.dim()))
                .ok_or_else(|| Error::DegenerateMassMatrix {
                    context: "orthonormalization".into(),
                })?;
            self.transform = Some(match self.transform.take() {
                Some(t) => inv * t,
                None => inv,
            });
        }
        Ok(self)
    }

    fn apply_transform(&self, out: &mut [f64]) {
        if let Some(t) = &self.transform {
            let raw = out.to_vec();
            for (i, o) in out.iter_mut().enumerate() {
                *o = (0..=i).map(|l| t[(i, l)] * raw[l]).sum();
            }
        }
    }

    pub fn for_element(element: &Element, degree: usize) -> Self {
        Self::new(element.centroid, 0.5 * element.diameter, degree)
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    fn powers(&self, p: Point2) -> (Vec<f64>, Vec<f64>) {
        let xi = (p.x - self.center.x) / self.scale;
        let eta = (p.y - self.center.y) / self.scale;
        let mut px = vec![1.0; self.degree + 1];
        let mut py = vec![1.0; self.degree + 1];
        for i in 1..=self.degree {
            px[i] = px[i - 1] * xi;
            py[i] = py[i - 1] * eta;
        }
        (px, py)
    }

    pub fn eval(&self, p: Point2, out: &mut [f64]) {
        let (px, py) = self.powers(p);
        for (o, &(a, b)) in out.iter_mut().zip(&self.exponents) {
            *o = px[a] * py[b];
        }
        self.apply_transform(out);
    }

    pub fn values(&self, p: Point2) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.eval(p, &mut v);
        v
    }

    /// Gradients `(∂x φ_α, ∂y φ_α)` in physical coordinates.
    pub fn eval_grad(&self, p: Point2, gx: &mut [f64], gy: &mut [f64]) {
        let (px, py) = self.powers(p);
        let inv = 1.0 / self.scale;
        for (i, &(a, b)) in self.exponents.iter().enumerate() {
            gx[i] = if a > 0 { a as f64 * px[a - 1] * py[b] * inv } else { 0.0 };
            gy[i] = if b > 0 { b as f64 * px[a] * py[b - 1] * inv } else { 0.0 };
        }
        self.apply_transform(gx);
        self.apply_transform(gy);
    }

    /// Evaluates the polynomial with coefficients `c` at `p`.
    pub fn evaluate(&self, coeffs: &[f64], p: Point2) -> f64 {
        self.values(p).iter().zip(coeffs).map(|(v, c)| v * c).sum()
    }

    /// Basis values at every point of `rule`, one row per point.
    pub fn table(&self, points: &[Point2]) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(points.len(), self.dim());
        let mut row = vec![0.0; self.dim()];
        for (q, &p) in points.iter().enumerate() {
            self.eval(p, &mut row);
            for (i, v) in row.iter().enumerate() {
                t[(q, i)] = *v;
            }
        }
        t
    }
}

/// `ψ_i(t) = t^i` with `t ∈ [-1, 1]` the scaled arclength coordinate from the
/// edge midpoint, in the edge's global orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeBasis {
    pub degree: usize,
}

impl EdgeBasis {
    pub fn new(degree: usize) -> Self {
        Self { degree }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let mut v = 1.0;
        for o in out.iter_mut().take(self.dim()) {
            *o = v;
            v *= t;
        }
    }

    pub fn values(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.eval(t, &mut v);
        v
    }

    pub fn evaluate(&self, coeffs: &[f64], t: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn table(&self, params: &[f64]) -> DMatrix<f64> {
        let mut tab = DMatrix::zeros(params.len(), self.dim());
        for (q, &t) in params.iter().enumerate() {
            let mut v = 1.0;
            for i in 0..self.dim() {
                tab[(q, i)] = v;
                v *= t;
            }
        }
        tab
    }
}

/// `[P_j(T)]²` as `{(φ_α, 0)} ∪ {(0, φ_α)}`; coefficient vectors store all
/// first-component coefficients before the second-component ones.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorBasis {
    pub scalar: ScaledMonomialBasis,
}

impl VectorBasis {
    pub fn new(scalar: ScaledMonomialBasis) -> Self {
        Self { scalar }
    }

    pub fn degree(&self) -> usize {
        self.scalar.degree
    }

    pub fn dim(&self) -> usize {
        2 * self.scalar.dim()
    }

    pub fn evaluate(&self, coeffs: &[f64], p: Point2) -> [f64; 2] {
        let d = self.scalar.dim();
        [
            self.scalar.evaluate(&coeffs[..d], p),
            self.scalar.evaluate(&coeffs[d..], p),
        ]
    }
}

/// `∫ φ_i φ_j` from a table of basis values and quadrature weights.
pub fn gram(table: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let n = table.ncols();
    let mut m = DMatrix::zeros(n, n);
    for (q, &w) in weights.iter().enumerate() {
        for i in 0..n {
            let wi = w * table[(q, i)];
            for j in i..n {
                m[(i, j)] += wi * table[(q, j)];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

pub fn element_mass_matrix(basis: &ScaledMonomialBasis, rule: &QuadratureRule) -> DMatrix<f64> {
    gram(&basis.table(&rule.points), &rule.weights)
}

pub fn edge_mass_matrix(basis: &EdgeBasis, rule: &EdgeRule) -> DMatrix<f64> {
    gram(&basis.table(&rule.params), &rule.weights)
}

pub fn cholesky(m: DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::DegenerateMassMatrix {
        context: context.to_string(),
    })
}

/// Default element quadrature exactness for an element and trace degree `k`:
/// `2j + 2` with `j = n_edges + k - 1`.
pub fn default_element_degree(element: &Element, k: usize) -> usize {
    2 * (element.n_edges() + k - 1) + 2
}

/// L² projection onto `P_k(T)` in the scaled monomial basis.
pub fn project_q0(
    f: impl Fn(Point2) -> f64,
    element: &Element,
    vertices: &[Point2],
    k: usize,
) -> Result<DVector<f64>> {
    let rule = element_quadrature(element, vertices, default_element_degree(element, k))?;
    project_q0_with(f, &ScaledMonomialBasis::for_element(element, k), &rule)
}

pub fn project_q0_with(
    f: impl Fn(Point2) -> f64,
    basis: &ScaledMonomialBasis,
    rule: &QuadratureRule,
) -> Result<DVector<f64>> {
    let table = basis.table(&rule.points);
    let mut rhs = DVector::zeros(basis.dim());
    for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let fv = w * f(p);
        for i in 0..basis.dim() {
            rhs[i] += fv * table[(q, i)];
        }
    }
    let chol = cholesky(gram(&table, &rule.weights), "element projection")?;
    Ok(chol.solve(&rhs))
}

/// L² projection onto `P_k(e)` in the edge basis.
pub fn project_qb(f: impl Fn(Point2) -> f64, edge: &Edge, vertices: &[Point2], k: usize) -> Result<DVector<f64>> {
    let rule = edge_quadrature(edge, vertices, 2 * k + 8);
    project_qb_with(f, &EdgeBasis::new(k), &rule)
}

pub fn project_qb_with(f: impl Fn(Point2) -> f64, basis: &EdgeBasis, rule: &EdgeRule) -> Result<DVector<f64>> {
    let table = basis.table(&rule.params);
    let mut rhs = DVector::zeros(basis.dim());
    for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let fv = w * f(p);
        for i in 0..basis.dim() {
            rhs[i] += fv * table[(q, i)];
        }
    }
    let chol = cholesky(gram(&table, &rule.weights), "edge projection")?;
    Ok(chol.solve(&rhs))
}

/// Componentwise L² projection onto `[P_j(T)]²`.
pub fn project_qbold(
    f: impl Fn(Point2) -> [f64; 2],
    element: &Element,
    vertices: &[Point2],
    j: usize,
) -> Result<DVector<f64>> {
    let rule = element_quadrature(element, vertices, 2 * j + 2)?;
    project_qbold_with(f, &ScaledMonomialBasis::for_element(element, j), &rule)
}

pub fn project_qbold_with(
    f: impl Fn(Point2) -> [f64; 2],
    scalar: &ScaledMonomialBasis,
    rule: &QuadratureRule,
) -> Result<DVector<f64>> {
    let d = scalar.dim();
    let table = scalar.table(&rule.points);
    let mut rhs = DMatrix::zeros(d, 2);
    for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let fv = f(p);
        for i in 0..d {
            rhs[(i, 0)] += w * fv[0] * table[(q, i)];
            rhs[(i, 1)] += w * fv[1] * table[(q, i)];
        }
    }
    let chol = cholesky(gram(&table, &rule.weights), "vector projection")?;
    let sol = chol.solve(&rhs);
    let mut out = DVector::zeros(2 * d);
    for i in 0..d {
        out[i] = sol[(i, 0)];
        out[d + i] = sol[(i, 1)];
    }
    Ok(out)
}
