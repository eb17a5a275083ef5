//! Assembly of `a(·,·)` and `b(·,·)`, the mixed biharmonic saddle-point
//! solve and the Ritz and Neumann elliptic projections.
//!
//! Unknowns are ordered `[φ (V_h numbering); u (V_h⁰ numbering)]` and the
//! global system is
//!
//! ```text
//! [  A   -B ] [φ]   [ -<g_N, v_b>_∂Ω + B_full[:, ∂] u_D ]
//! [ -Bᵀ   0 ] [u] = [ -(f, ψ₀)                          ]
//! ```
//!
//! with `u_D = Q_b g_D` on boundary edges.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::basis::{EdgeBasis, ScaledMonomialBasis};
use crate::error::{Error, Result};
use crate::linalg::{solve_general, solve_spd, Backend, CscMatrix, TripletBuilder};
use crate::mesh::{Mesh, Point2};
use crate::quadrature::edge_quadrature;
use crate::space::{interior_moments, DofMap, WeakFunction};
use crate::weak_gradient::{build_weak_gradient_with, ElementQuadrature, WeakGradientOperator};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Power `p` of the penalty weight `h_T^p` in `a(·,·)`.
    pub penalty_exponent: f64,
    pub backend: Backend,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            penalty_exponent: 1.0,
            backend: Backend::Auto,
        }
    }
}

/// Data of the biharmonic problem `Δ²u = f`, `u = g_D`, `∂u/∂n = g_N`.
pub trait BiharmonicData: Sync {
    fn source(&self, p: Point2) -> f64;
    fn dirichlet(&self, p: Point2) -> f64;
    /// Normal derivative for the outward unit normal `n`.
    fn neumann(&self, p: Point2, n: Point2) -> f64;
}

/// Element-level data shared by every assembly on one mesh.
pub struct Discretization {
    pub mesh: Mesh,
    pub dofs: DofMap,
    pub options: SolverOptions,
    pub quadrature: Vec<ElementQuadrature>,
    pub gradients: Vec<WeakGradientOperator>,
    pub local_a: Vec<DMatrix<f64>>,
    pub local_b: Vec<DMatrix<f64>>,
}

impl Discretization {
    pub fn new(mesh: &Mesh, k: usize, options: SolverOptions) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidArgument(format!("polynomial degree must be >= 1, got {k}")));
        }
        let locals: Vec<(ElementQuadrature, WeakGradientOperator, DMatrix<f64>, DMatrix<f64>)> = (0..mesh
            .n_elements())
            .into_par_iter()
            .map(|t| {
                let quad = ElementQuadrature::default_for(mesh, t, k)?;
                let g = build_weak_gradient_with(mesh, t, k, &quad)?;
                let a = local_a_matrix(mesh, t, k, &quad, options.penalty_exponent);
                let b = g.stiffness();
                Ok((quad, g, a, b))
            })
            .collect::<Result<_>>()?;
        let mut quadrature = Vec::with_capacity(locals.len());
        let mut gradients = Vec::with_capacity(locals.len());
        let mut local_a = Vec::with_capacity(locals.len());
        let mut local_b = Vec::with_capacity(locals.len());
        for (q, g, a, b) in locals {
            quadrature.push(q);
            gradients.push(g);
            local_a.push(a);
            local_b.push(b);
        }
        Ok(Self {
            mesh: mesh.clone(),
            dofs: DofMap::new(mesh, k),
            options,
            quadrature,
            gradients,
            local_a,
            local_b,
        })
    }

    pub fn k(&self) -> usize {
        self.dofs.k
    }

    fn assemble(&self, locals: &[DMatrix<f64>]) -> CscMatrix {
        let n = self.dofs.n_all();
        let mut b = TripletBuilder::new(n, n);
        for (t, m) in locals.iter().enumerate() {
            let g = self.dofs.element_dofs(&self.mesh, t);
            for (c, &gc) in g.iter().enumerate() {
                for (r, &gr) in g.iter().enumerate() {
                    b.push(gr, gc, m[(r, c)]);
                }
            }
        }
        b.build()
    }

    /// `A` on `V_h × V_h`.
    pub fn assemble_a(&self) -> CscMatrix {
        self.assemble(&self.local_a)
    }

    /// `B_full` on `V_h × V_h`.
    pub fn assemble_b_full(&self) -> CscMatrix {
        self.assemble(&self.local_b)
    }

    /// `B` on `V_h × V_h⁰` (rows all DOFs, columns reduced DOFs).
    pub fn assemble_b(&self) -> CscMatrix {
        select(&self.assemble_b_full(), |r| Some(r), |c| self.dofs.reduced(c), self.dofs.n_all(), self.dofs.n_0())
    }

    /// `B₀` on `V_h⁰ × V_h⁰`.
    pub fn assemble_b0(&self) -> CscMatrix {
        let n0 = self.dofs.n_0();
        select(&self.assemble_b_full(), |r| self.dofs.reduced(r), |c| self.dofs.reduced(c), n0, n0)
    }

    /// `(f, ψ₀)` for every interior DOF, zero on trace DOFs.
    pub fn load_interior(&self, f: &(dyn Fn(Point2) -> f64 + Sync)) -> Vec<f64> {
        let k = self.k();
        let blocks: Vec<Vec<f64>> = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|t| {
                let basis = ScaledMonomialBasis::for_element(&self.mesh.elements[t], k);
                let rule = &self.quadrature[t].cell;
                let mut out = vec![0.0; basis.dim()];
                let mut phi = vec![0.0; basis.dim()];
                for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                    basis.eval(p, &mut phi);
                    let fw = w * f(p);
                    for (o, v) in out.iter_mut().zip(&phi) {
                        *o += fw * v;
                    }
                }
                out
            })
            .collect();
        let mut rhs = vec![0.0; self.dofs.n_all()];
        for (t, b) in blocks.iter().enumerate() {
            let o = self.dofs.interior_offset(t);
            rhs[o..o + b.len()].copy_from_slice(b);
        }
        rhs
    }

    /// `<g(·, n), ψ_b>_∂Ω` for every boundary trace DOF.
    pub fn load_boundary(&self, g: &dyn Fn(Point2, Point2) -> f64) -> Vec<f64> {
        let k = self.k();
        let basis = EdgeBasis::new(k);
        let mut rhs = vec![0.0; self.dofs.n_all()];
        let mut psi = vec![0.0; basis.dim()];
        for &e in &self.mesh.boundary_edge_ids {
            let edge = &self.mesh.edges[e];
            let n = boundary_normal(&self.mesh, e);
            let rule = edge_quadrature(edge, &self.mesh.vertices, 2 * k + 8);
            let o = self.dofs.edge_offset(e);
            for ((&p, &t), &w) in rule.points.iter().zip(&rule.params).zip(&rule.weights) {
                basis.eval(t, &mut psi);
                let gw = w * g(p, n);
                for (i, v) in psi.iter().enumerate() {
                    rhs[o + i] += gw * v;
                }
            }
        }
        rhs
    }
}

/// Outward unit normal of boundary edge `e`.
pub fn boundary_normal(mesh: &Mesh, e: usize) -> Point2 {
    let t = mesh.edges[e].incident_elements[0];
    let el = &mesh.elements[t];
    let side = el.edge_ids.iter().position(|&x| x == e).expect("edge belongs to its element");
    el.outward_normals[side]
}

fn select(
    m: &CscMatrix,
    row: impl Fn(usize) -> Option<usize>,
    col: impl Fn(usize) -> Option<usize>,
    nrows: usize,
    ncols: usize,
) -> CscMatrix {
    let mut b = TripletBuilder::new(nrows, ncols);
    for (r, c, v) in m.iter() {
        if let (Some(r), Some(c)) = (row(r), col(c)) {
            b.push(r, c, v);
        }
    }
    b.build()
}

/// Local matrix of `a(·,·)` on element `t`: interior mass plus
/// `h_T^p <w₀ - w_b, v₀ - v_b>_∂T`.
pub fn local_a_matrix(mesh: &Mesh, t: usize, k: usize, quad: &ElementQuadrature, exponent: f64) -> DMatrix<f64> {
    let el = &mesh.elements[t];
    let ib = ScaledMonomialBasis::for_element(el, k);
    let ni = ib.dim();
    let eb = EdgeBasis::new(k);
    let nb = eb.dim();
    let n = ni + el.n_edges() * nb;
    let mut m = DMatrix::zeros(n, n);
    let mut phi = vec![0.0; ni];
    for (&p, &w) in quad.cell.points.iter().zip(&quad.cell.weights) {
        ib.eval(p, &mut phi);
        for c in 0..ni {
            for r in 0..=c {
                m[(r, c)] += w * phi[r] * phi[c];
            }
        }
    }
    let weight = el.diameter.powf(exponent);
    let mut jump = vec![0.0; n];
    let mut psi = vec![0.0; nb];
    for (side, rule) in quad.sides.iter().enumerate() {
        let col0 = ni + side * nb;
        for ((&p, &tpar), &w) in rule.points.iter().zip(&rule.params).zip(&rule.weights) {
            ib.eval(p, &mut phi);
            eb.eval(tpar, &mut psi);
            jump.iter_mut().for_each(|x| *x = 0.0);
            jump[..ni].copy_from_slice(&phi);
            for i in 0..nb {
                jump[col0 + i] = -psi[i];
            }
            let ww = weight * w;
            for c in 0..n {
                if jump[c] == 0.0 {
                    continue;
                }
                for r in 0..=c {
                    m[(r, c)] += ww * jump[r] * jump[c];
                }
            }
        }
    }
    for c in 0..n {
        for r in 0..c {
            m[(c, r)] = m[(r, c)];
        }
    }
    m
}

/// The assembled saddle-point system with boundary data folded in.
pub struct SaddleSystem {
    pub matrix: CscMatrix,
    pub rhs: Vec<f64>,
    pub n_phi: usize,
    pub n_u: usize,
    /// `Q_b g_D` on boundary edges, zero elsewhere.
    pub dirichlet: WeakFunction,
}

pub fn assemble_saddle(disc: &Discretization, data: &dyn BiharmonicData) -> Result<SaddleSystem> {
    let dofs = &disc.dofs;
    let n_phi = dofs.n_all();
    let n_u = dofs.n_0();
    let a = disc.assemble_a();
    let b_full = disc.assemble_b_full();

    let mut builder = TripletBuilder::new(n_phi + n_u, n_phi + n_u);
    for (r, c, v) in a.iter() {
        builder.push(r, c, v);
    }
    for (r, c, v) in b_full.iter() {
        if let Some(cu) = dofs.reduced(c) {
            builder.push(r, n_phi + cu, -v);
        }
        if let Some(ru) = dofs.reduced(r) {
            builder.push(n_phi + ru, c, -v);
        }
    }
    let matrix = builder.build();

    let dirichlet = WeakFunction::project_boundary(&disc.mesh, dofs, |p| data.dirichlet(p))?;
    let lift = b_full.mul_vec(&dirichlet.coeffs);
    let flux = disc.load_boundary(&|p, n| data.neumann(p, n));
    let load = disc.load_interior(&|p| data.source(p));

    let mut rhs = vec![0.0; n_phi + n_u];
    for i in 0..n_phi {
        rhs[i] = lift[i] - flux[i];
    }
    for (g, &l) in load.iter().enumerate() {
        if let Some(r) = dofs.reduced(g) {
            rhs[n_phi + r] = -l;
        }
    }
    Ok(SaddleSystem {
        matrix,
        rhs,
        n_phi,
        n_u,
        dirichlet,
    })
}

#[derive(Clone, Debug)]
pub struct SolutionPair {
    pub phi: WeakFunction,
    pub u: WeakFunction,
    pub residual: f64,
    pub condition: f64,
}

pub fn solve_saddle(disc: &Discretization, system: &SaddleSystem) -> Result<SolutionPair> {
    let rep = solve_general(&system.matrix, &system.rhs, disc.options.backend)?;
    if rep.residual > 1e-9 {
        return Err(Error::SingularSystem(format!("relative residual {:.3e} exceeds 1e-9", rep.residual)));
    }
    let dofs = &disc.dofs;
    let phi = WeakFunction::from_coeffs(dofs, rep.solution[..system.n_phi].to_vec())?;
    let u = WeakFunction::from_coeffs(dofs, dofs.extend(&rep.solution[system.n_phi..], &system.dirichlet.coeffs))?;
    Ok(SolutionPair {
        phi,
        u,
        residual: rep.residual,
        condition: rep.condition,
    })
}

pub fn solve_biharmonic(disc: &Discretization, data: &dyn BiharmonicData) -> Result<SolutionPair> {
    let system = assemble_saddle(disc, data)?;
    solve_saddle(disc, &system)
}

/// `|∫_Ω φ₀ + ∫_∂Ω g_N|`.
pub fn mean_value_check(disc: &Discretization, solution: &SolutionPair, boundary_flux: f64) -> Result<f64> {
    Ok((solution.phi.interior_integral(&disc.mesh, &disc.dofs)? + boundary_flux).abs())
}

/// Ritz projection: `b(Π v, ψ) = (-Δv, ψ₀)` for all `ψ ∈ V_h⁰`.
pub fn solve_ritz_projection(
    disc: &Discretization,
    minus_laplacian: &(dyn Fn(Point2) -> f64 + Sync),
) -> Result<WeakFunction> {
    let dofs = &disc.dofs;
    let rhs = dofs.restrict(&disc.load_interior(minus_laplacian));
    let rep = solve_spd(&disc.assemble_b0(), &rhs, disc.options.backend)?;
    if rep.residual > 1e-10 {
        return Err(Error::SingularSystem(format!("relative residual {:.3e} exceeds 1e-10", rep.residual)));
    }
    WeakFunction::from_coeffs(dofs, dofs.extend(&rep.solution, &vec![0.0; dofs.n_all()]))
}

/// Neumann projection: `b(Π v, ψ) = (-Δv, ψ₀) + <∇v·n, ψ_b>_∂Ω` for all
/// `ψ ∈ V_h`, with `∫_Ω Π₀ v = 0` imposed by a Lagrange multiplier.
pub fn solve_neumann_projection(
    disc: &Discretization,
    minus_laplacian: &(dyn Fn(Point2) -> f64 + Sync),
    flux: &dyn Fn(Point2, Point2) -> f64,
) -> Result<WeakFunction> {
    let dofs = &disc.dofs;
    let n = dofs.n_all();
    let mut rhs = disc.load_interior(minus_laplacian);
    for (r, b) in rhs.iter_mut().zip(disc.load_boundary(flux)) {
        *r += b;
    }
    let one = WeakFunction::constant(dofs, 1.0);
    let compat: f64 = rhs.iter().zip(&one.coeffs).map(|(a, b)| a * b).sum();
    if compat.abs() > 1e-8 {
        return Err(Error::Incompatible { residual: compat });
    }

    let moments = interior_moments(&disc.mesh, dofs)?;
    let mut builder = TripletBuilder::new(n + 1, n + 1);
    for (r, c, v) in disc.assemble_b_full().iter() {
        builder.push(r, c, v);
    }
    for (t, m) in moments.iter().enumerate() {
        let o = dofs.interior_offset(t);
        for (i, &v) in m.iter().enumerate() {
            builder.push(o + i, n, v);
            builder.push(n, o + i, v);
        }
    }
    rhs.push(0.0);
    let rep = solve_general(&builder.build(), &rhs, disc.options.backend)?;
    if rep.residual > 1e-10 {
        return Err(Error::SingularSystem(format!("relative residual {:.3e} exceeds 1e-10", rep.residual)));
    }
    WeakFunction::from_coeffs(dofs, rep.solution[..n].to_vec())
}
