//! Discrete weak gradient.
//!
//! On element `T` the weak gradient of `v = {v₀, v_b}` is the unique
//! `∇_w v ∈ [P_j(T)]²` with
//!
//! ```text
//! (∇_w v, q)_T = -(v₀, ∇·q)_T + <v_b, q·n>_∂T   for all q ∈ [P_j(T)]²,
//! ```
//!
//! where `j = n_edges(T) + k - 1`. The operator is stored as the dense matrix
//! `G = M⁻¹ L` acting on the element's local coefficients.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{cholesky, gram, project_qbold_with, scalar_dim, EdgeBasis, ScaledMonomialBasis, VectorBasis};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point2};
use crate::quadrature::{edge_quadrature, element_quadrature, EdgeRule, QuadratureRule};

/// Range degree of the weak gradient on an element with `n_edges` sides.
pub fn weak_gradient_degree(n_edges: usize, k: usize) -> usize {
    n_edges + k - 1
}

/// Quadrature shared by all element-local computations: an element rule and
/// one rule per local edge, the latter in the edge's global orientation so
/// that both neighbours see the same points.
#[derive(Clone, Debug)]
pub struct ElementQuadrature {
    pub cell: QuadratureRule,
    pub sides: Vec<EdgeRule>,
}

impl ElementQuadrature {
    pub fn new(mesh: &Mesh, t: usize, degree: usize) -> Result<Self> {
        let el = &mesh.elements[t];
        let cell = element_quadrature(el, &mesh.vertices, degree)?;
        let sides = el
            .edge_ids
            .iter()
            .map(|&e| edge_quadrature(&mesh.edges[e], &mesh.vertices, degree))
            .collect();
        Ok(Self { cell, sides })
    }

    /// Exactness `2j + 2` on the element and its edges.
    pub fn default_for(mesh: &Mesh, t: usize, k: usize) -> Result<Self> {
        let j = weak_gradient_degree(mesh.elements[t].n_edges(), k);
        Self::new(mesh, t, 2 * j + 2)
    }
}

#[derive(Clone, Debug)]
pub struct WeakGradientOperator {
    pub element: usize,
    pub k: usize,
    pub j: usize,
    pub n_sides: usize,
    /// `(2 dim P_j) x n_local`.
    pub matrix: DMatrix<f64>,
    /// Scalar Gram matrix of `P_j(T)`; the vector Gram matrix is `diag(gram, gram)`.
    pub gram: DMatrix<f64>,
    /// Relative residual `‖M G - L‖ / ‖L‖` of the local solve.
    pub residual: f64,
    /// Scalar basis of `P_j(T)` behind the range coefficients.
    pub range: ScaledMonomialBasis,
}

impl WeakGradientOperator {
    pub fn interior_dim(&self) -> usize {
        scalar_dim(self.k)
    }

    pub fn edge_dim(&self) -> usize {
        self.k + 1
    }

    pub fn n_local(&self) -> usize {
        self.interior_dim() + self.n_sides * self.edge_dim()
    }

    pub fn range_dim(&self) -> usize {
        2 * scalar_dim(self.j)
    }

    pub fn basis(&self) -> VectorBasis {
        VectorBasis::new(self.range.clone())
    }

    /// `(p, q)_T` for two coefficient vectors in the range basis.
    pub fn inner(&self, p: &DVector<f64>, q: &DVector<f64>) -> f64 {
        let d = self.gram.nrows();
        let mut s = 0.0;
        for c in 0..2 {
            let pc = p.rows(c * d, d);
            let qc = q.rows(c * d, d);
            s += pc.dot(&(&self.gram * qc));
        }
        s
    }

    /// Local Gram matrix `Gᵀ diag(M, M) G`, exactly symmetric.
    pub fn stiffness(&self) -> DMatrix<f64> {
        let d = self.gram.nrows();
        let n = self.n_local();
        let mg = {
            let mut out = DMatrix::zeros(2 * d, n);
            for c in 0..2 {
                let block = &self.gram * self.matrix.rows(c * d, d);
                out.rows_mut(c * d, d).copy_from(&block);
            }
            out
        };
        let mut s = self.matrix.transpose() * mg;
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }
}

/// Right-hand side operator `L` of the defining relation, columnwise over local DOFs.
fn load_matrix(mesh: &Mesh, t: usize, k: usize, vb: &ScaledMonomialBasis, quad: &ElementQuadrature) -> DMatrix<f64> {
    let el = &mesh.elements[t];
    let d = vb.dim();
    let ib = ScaledMonomialBasis::for_element(el, k);
    let ni = ib.dim();
    let eb = EdgeBasis::new(k);
    let nb = eb.dim();
    let n_local = ni + el.n_edges() * nb;
    let mut l = DMatrix::zeros(2 * d, n_local);

    let mut gx = vec![0.0; d];
    let mut gy = vec![0.0; d];
    let mut phi = vec![0.0; ni];
    for (&p, &w) in quad.cell.points.iter().zip(&quad.cell.weights) {
        vb.eval_grad(p, &mut gx, &mut gy);
        ib.eval(p, &mut phi);
        for a in 0..ni {
            let wa = w * phi[a];
            for b in 0..d {
                // div (φ_b, 0) = ∂x φ_b, div (0, φ_b) = ∂y φ_b
                l[(b, a)] -= wa * gx[b];
                l[(d + b, a)] -= wa * gy[b];
            }
        }
    }

    let mut q = vec![0.0; d];
    let mut psi = vec![0.0; nb];
    for (side, rule) in quad.sides.iter().enumerate() {
        let n = el.outward_normals[side];
        let col0 = ni + side * nb;
        for ((&p, &tpar), &w) in rule.points.iter().zip(&rule.params).zip(&rule.weights) {
            vb.eval(p, &mut q);
            eb.eval(tpar, &mut psi);
            for i in 0..nb {
                let wi = w * psi[i];
                for b in 0..d {
                    l[(b, col0 + i)] += wi * q[b] * n.x;
                    l[(d + b, col0 + i)] += wi * q[b] * n.y;
                }
            }
        }
    }
    l
}

/// Scaled monomials of degree `j` on element `t`, orthonormalized in the
/// discrete inner product of `rule`.
pub fn range_basis(mesh: &Mesh, t: usize, j: usize, rule: &QuadratureRule) -> Result<ScaledMonomialBasis> {
    ScaledMonomialBasis::for_element(&mesh.elements[t], j).orthonormalized(rule)
}

/// Solves `diag(M, M) X = rhs` with the Cholesky factor of the scalar Gram matrix.
fn solve_vector_gram(
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    d: usize,
    rhs: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(rhs.nrows(), rhs.ncols());
    for c in 0..2 {
        let block = chol.solve(&rhs.rows(c * d, d).into_owned());
        x.rows_mut(c * d, d).copy_from(&block);
    }
    x
}

pub fn build_weak_gradient(mesh: &Mesh, t: usize, k: usize) -> Result<WeakGradientOperator> {
    let quad = ElementQuadrature::default_for(mesh, t, k)?;
    build_weak_gradient_with(mesh, t, k, &quad)
}

pub fn build_weak_gradient_with(
    mesh: &Mesh,
    t: usize,
    k: usize,
    quad: &ElementQuadrature,
) -> Result<WeakGradientOperator> {
    if k < 1 {
        return Err(Error::InvalidArgument("weak gradient needs k >= 1".into()));
    }
    let el = &mesh.elements[t];
    let j = weak_gradient_degree(el.n_edges(), k);
    let vb = range_basis(mesh, t, j, &quad.cell)?;
    let d = vb.dim();
    let m = gram(&vb.table(&quad.cell.points), &quad.cell.weights);
    let chol = cholesky(m.clone(), &format!("weak gradient Gram, element {t}"))?;
    let l = load_matrix(mesh, t, k, &vb, quad);
    let g = solve_vector_gram(&chol, d, &l);

    let mut r = 0.0f64;
    for c in 0..2 {
        let mg = &m * g.rows(c * d, d);
        r = r.max((mg - l.rows(c * d, d)).norm());
    }
    let residual = r / l.norm().max(f64::MIN_POSITIVE);
    Ok(WeakGradientOperator {
        element: t,
        k,
        j,
        n_sides: el.n_edges(),
        matrix: g,
        gram: m,
        residual,
        range: vb,
    })
}

/// Weak gradient operators for every element, in element order.
pub fn build_all(mesh: &Mesh, k: usize) -> Result<Vec<WeakGradientOperator>> {
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| build_weak_gradient(mesh, t, k))
        .collect()
}

pub fn apply_weak_gradient(op: &WeakGradientOperator, local: &[f64]) -> Result<DVector<f64>> {
    if local.len() != op.n_local() {
        return Err(Error::DimensionMismatch {
            expected: op.n_local(),
            got: local.len(),
        });
    }
    Ok(&op.matrix * DVector::from_column_slice(local))
}

/// Weak gradient of a smooth function, using `v` itself as both interior
/// value and trace.
pub fn weak_gradient_of_function(
    mesh: &Mesh,
    t: usize,
    k: usize,
    v: impl Fn(Point2) -> f64,
) -> Result<DVector<f64>> {
    weak_gradient_of_function_with(mesh, t, k, v, &ElementQuadrature::default_for(mesh, t, k)?)
}

pub fn weak_gradient_of_function_with(
    mesh: &Mesh,
    t: usize,
    k: usize,
    v: impl Fn(Point2) -> f64,
    quad: &ElementQuadrature,
) -> Result<DVector<f64>> {
    let el = &mesh.elements[t];
    let j = weak_gradient_degree(el.n_edges(), k);
    let vb = range_basis(mesh, t, j, &quad.cell)?;
    let d = vb.dim();
    let mut rhs = DMatrix::zeros(2 * d, 1);
    let mut gx = vec![0.0; d];
    let mut gy = vec![0.0; d];
    for (&p, &w) in quad.cell.points.iter().zip(&quad.cell.weights) {
        vb.eval_grad(p, &mut gx, &mut gy);
        let fv = w * v(p);
        for b in 0..d {
            rhs[(b, 0)] -= fv * gx[b];
            rhs[(d + b, 0)] -= fv * gy[b];
        }
    }
    let mut q = vec![0.0; d];
    for (side, rule) in quad.sides.iter().enumerate() {
        let n = el.outward_normals[side];
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            vb.eval(p, &mut q);
            let fv = w * v(p);
            for b in 0..d {
                rhs[(b, 0)] += fv * q[b] * n.x;
                rhs[(d + b, 0)] += fv * q[b] * n.y;
            }
        }
    }
    let chol = cholesky(gram(&vb.table(&quad.cell.points), &quad.cell.weights), "weak gradient Gram")?;
    Ok(solve_vector_gram(&chol, d, &rhs).column(0).into_owned())
}

/// Max coefficient deviation between `∇_w v` (exact traces) and the L²
/// projection of `∇v` onto `[P_j(T)]²`.
pub fn check_grad_ex(
    mesh: &Mesh,
    t: usize,
    k: usize,
    v: impl Fn(Point2) -> f64,
    grad_v: impl Fn(Point2) -> [f64; 2],
) -> Result<f64> {
    let j = weak_gradient_degree(mesh.elements[t].n_edges(), k);
    check_grad_ex_with(mesh, t, k, v, grad_v, 2 * j + 2)
}

/// [`check_grad_ex`] with every integral evaluated at exactness `degree`.
pub fn check_grad_ex_with(
    mesh: &Mesh,
    t: usize,
    k: usize,
    v: impl Fn(Point2) -> f64,
    grad_v: impl Fn(Point2) -> [f64; 2],
    degree: usize,
) -> Result<f64> {
    let j = weak_gradient_degree(mesh.elements[t].n_edges(), k);
    let quad = ElementQuadrature::new(mesh, t, degree)?;
    let wg = weak_gradient_of_function_with(mesh, t, k, v, &quad)?;
    let proj = project_qbold_with(grad_v, &range_basis(mesh, t, j, &quad.cell)?, &quad.cell)?;
    Ok((wg - proj).amax())
}
