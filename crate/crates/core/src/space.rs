//! Degree-of-freedom layout of the weak finite element spaces `V_h` and `V_h⁰`
//! and the weak functions living in them.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::basis::{cholesky, gram, scalar_dim, EdgeBasis, ScaledMonomialBasis};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point2};
use crate::quadrature::{edge_quadrature, element_quadrature};

/// Global numbering: all interior blocks (one per element), then all edge
/// blocks (one per edge). `V_h⁰` drops the boundary edge blocks and keeps the
/// remaining DOFs in the same relative order.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub k: usize,
    pub n_elements: usize,
    pub n_edges: usize,
    pub interior_dim: usize,
    pub edge_dim: usize,
    pub boundary_edge: Vec<bool>,
    reduced: Vec<Option<usize>>,
    n_0: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        let interior_dim = scalar_dim(k);
        let edge_dim = k + 1;
        let boundary_edge: Vec<bool> = mesh.edges.iter().map(|e| e.is_boundary).collect();
        let n_all = mesh.n_elements() * interior_dim + mesh.n_edges() * edge_dim;
        let mut reduced = vec![None; n_all];
        let mut next = 0;
        for (g, slot) in reduced.iter_mut().enumerate() {
            let keep = match Self::edge_of(g, mesh.n_elements() * interior_dim, edge_dim) {
                Some(e) => !boundary_edge[e],
                None => true,
            };
            if keep {
                *slot = Some(next);
                next += 1;
            }
        }
        Self {
            k,
            n_elements: mesh.n_elements(),
            n_edges: mesh.n_edges(),
            interior_dim,
            edge_dim,
            boundary_edge,
            reduced,
            n_0: next,
        }
    }

    fn edge_of(g: usize, interior_total: usize, edge_dim: usize) -> Option<usize> {
        (g >= interior_total).then(|| (g - interior_total) / edge_dim)
    }

    pub fn n_all(&self) -> usize {
        self.reduced.len()
    }

    pub fn n_0(&self) -> usize {
        self.n_0
    }

    pub fn interior_offset(&self, t: usize) -> usize {
        t * self.interior_dim
    }

    pub fn edge_offset(&self, e: usize) -> usize {
        self.n_elements * self.interior_dim + e * self.edge_dim
    }

    /// Edge owning global DOF `g`, if it is a trace DOF.
    pub fn edge_of_dof(&self, g: usize) -> Option<usize> {
        Self::edge_of(g, self.n_elements * self.interior_dim, self.edge_dim)
    }

    /// Index of `g` in the `V_h⁰` numbering, `None` for boundary trace DOFs.
    pub fn reduced(&self, g: usize) -> Option<usize> {
        self.reduced[g]
    }

    pub fn is_boundary_dof(&self, g: usize) -> bool {
        self.reduced[g].is_none()
    }

    /// Global DOFs of element `t` in local order: interior block, then the
    /// trace block of each local edge.
    pub fn element_dofs(&self, mesh: &Mesh, t: usize) -> Vec<usize> {
        let el = &mesh.elements[t];
        let mut out = Vec::with_capacity(self.interior_dim + el.n_edges() * self.edge_dim);
        out.extend(self.interior_offset(t)..self.interior_offset(t) + self.interior_dim);
        for &e in &el.edge_ids {
            out.extend(self.edge_offset(e)..self.edge_offset(e) + self.edge_dim);
        }
        out
    }

    /// Restricts a full coefficient vector to the `V_h⁰` numbering.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_0];
        for (g, r) in self.reduced.iter().enumerate() {
            if let Some(r) = r {
                out[*r] = full[g];
            }
        }
        out
    }

    /// Scatters `V_h⁰` coefficients into a full vector over `base`.
    pub fn extend(&self, reduced: &[f64], base: &[f64]) -> Vec<f64> {
        let mut out = base.to_vec();
        for (g, r) in self.reduced.iter().enumerate() {
            if let Some(r) = r {
                out[g] = reduced[*r];
            }
        }
        out
    }
}

/// A discrete weak function `{v₀, v_b}` stored in `DofMap` layout.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakFunction {
    pub k: usize,
    pub coeffs: Vec<f64>,
}

impl WeakFunction {
    pub fn zeros(dofs: &DofMap) -> Self {
        Self {
            k: dofs.k,
            coeffs: vec![0.0; dofs.n_all()],
        }
    }

    pub fn from_coeffs(dofs: &DofMap, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != dofs.n_all() {
            return Err(Error::DimensionMismatch {
                expected: dofs.n_all(),
                got: coeffs.len(),
            });
        }
        Ok(Self { k: dofs.k, coeffs })
    }

    pub fn interior<'a>(&'a self, dofs: &DofMap, t: usize) -> &'a [f64] {
        let o = dofs.interior_offset(t);
        &self.coeffs[o..o + dofs.interior_dim]
    }

    pub fn trace<'a>(&'a self, dofs: &DofMap, e: usize) -> &'a [f64] {
        let o = dofs.edge_offset(e);
        &self.coeffs[o..o + dofs.edge_dim]
    }

    pub fn local(&self, dofs: &DofMap, mesh: &Mesh, t: usize) -> Vec<f64> {
        dofs.element_dofs(mesh, t).into_iter().map(|g| self.coeffs[g]).collect()
    }

    /// `{c, c}`: constant interior and trace values.
    pub fn constant(dofs: &DofMap, c: f64) -> Self {
        let mut v = Self::zeros(dofs);
        for t in 0..dofs.n_elements {
            v.coeffs[dofs.interior_offset(t)] = c;
        }
        for e in 0..dofs.n_edges {
            v.coeffs[dofs.edge_offset(e)] = c;
        }
        v
    }

    /// `Q_h f = {Q₀ f, Q_b f}`.
    pub fn project(mesh: &Mesh, dofs: &DofMap, f: impl Fn(Point2) -> f64 + Sync) -> Result<Self> {
        let k = dofs.k;
        let interior: Vec<DVector<f64>> = (0..mesh.n_elements())
            .into_par_iter()
            .map(|t| {
                let el = &mesh.elements[t];
                let j = el.n_edges() + k - 1;
                let rule = element_quadrature(el, &mesh.vertices, 2 * j + 2)?;
                crate::basis::project_q0_with(&f, &ScaledMonomialBasis::for_element(el, k), &rule)
            })
            .collect::<Result<_>>()?;
        let traces: Vec<DVector<f64>> = (0..mesh.n_edges())
            .into_par_iter()
            .map(|e| {
                let rule = edge_quadrature(&mesh.edges[e], &mesh.vertices, 2 * k + 8);
                crate::basis::project_qb_with(&f, &EdgeBasis::new(k), &rule)
            })
            .collect::<Result<_>>()?;
        let mut v = Self::zeros(dofs);
        for (t, c) in interior.iter().enumerate() {
            let o = dofs.interior_offset(t);
            v.coeffs[o..o + dofs.interior_dim].copy_from_slice(c.as_slice());
        }
        for (e, c) in traces.iter().enumerate() {
            let o = dofs.edge_offset(e);
            v.coeffs[o..o + dofs.edge_dim].copy_from_slice(c.as_slice());
        }
        Ok(v)
    }

    /// `Q_b f` on boundary edges, zero elsewhere.
    pub fn project_boundary(mesh: &Mesh, dofs: &DofMap, f: impl Fn(Point2) -> f64) -> Result<Self> {
        let mut v = Self::zeros(dofs);
        let basis = EdgeBasis::new(dofs.k);
        for &e in &mesh.boundary_edge_ids {
            let rule = edge_quadrature(&mesh.edges[e], &mesh.vertices, 2 * dofs.k + 8);
            let c = crate::basis::project_qb_with(&f, &basis, &rule)?;
            let o = dofs.edge_offset(e);
            v.coeffs[o..o + dofs.edge_dim].copy_from_slice(c.as_slice());
        }
        Ok(v)
    }

    pub fn axpy(&mut self, a: f64, other: &WeakFunction) {
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn sub(&self, other: &WeakFunction) -> WeakFunction {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn scale(&self, a: f64) -> WeakFunction {
        WeakFunction {
            k: self.k,
            coeffs: self.coeffs.iter().map(|x| a * x).collect(),
        }
    }

    /// `∫_Ω v₀`.
    pub fn interior_integral(&self, mesh: &Mesh, dofs: &DofMap) -> Result<f64> {
        let moments = interior_moments(mesh, dofs)?;
        Ok((0..mesh.n_elements())
            .map(|t| {
                let c = self.interior(dofs, t);
                moments[t].iter().zip(c).map(|(m, c)| m * c).sum::<f64>()
            })
            .sum())
    }
}

/// `∫_T φ_α` for every element and every interior basis function.
pub fn interior_moments(mesh: &Mesh, dofs: &DofMap) -> Result<Vec<Vec<f64>>> {
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let el = &mesh.elements[t];
            let rule = element_quadrature(el, &mesh.vertices, dofs.k + 1)?;
            let basis = ScaledMonomialBasis::for_element(el, dofs.k);
            let tab = basis.table(&rule.points);
            Ok((0..basis.dim())
                .map(|i| (0..rule.len()).map(|q| rule.weights[q] * tab[(q, i)]).sum())
                .collect())
        })
        .collect()
}

/// Cholesky-checks the scalar Gram matrix of `P_k(T)` on every element.
pub fn check_interior_mass(mesh: &Mesh, k: usize) -> Result<()> {
    for (t, el) in mesh.elements.iter().enumerate() {
        let rule = element_quadrature(el, &mesh.vertices, 2 * k + 2)?;
        let b = ScaledMonomialBasis::for_element(el, k);
        cholesky(gram(&b.table(&rule.points), &rule.weights), &format!("element {t}"))?;
    }
    Ok(())
}
