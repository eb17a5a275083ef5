//! Discrete norms on weak functions, errors against projections of exact
//! solutions and observed convergence rates.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::basis::{cholesky, gram, EdgeBasis, ScaledMonomialBasis};
use crate::error::{Error, Result};
use crate::mesh::Point2;
use crate::quadrature::edge_quadrature;
use crate::solver::Discretization;
use crate::space::WeakFunction;
use crate::weak_gradient::apply_weak_gradient;

fn check_len(disc: &Discretization, v: &WeakFunction) -> Result<()> {
    if v.coeffs.len() != disc.dofs.n_all() {
        return Err(Error::DimensionMismatch {
            expected: disc.dofs.n_all(),
            got: v.coeffs.len(),
        });
    }
    Ok(())
}

/// Per-element sums `Σ_T (‖v₀‖²_T or ‖∇v₀‖²_T) + w_T ‖v₀ - v_b‖²_∂T`.
fn broken_sum(disc: &Discretization, v: &WeakFunction, gradient: bool, weight: impl Fn(f64) -> f64 + Sync) -> f64 {
    let mesh = &disc.mesh;
    let dofs = &disc.dofs;
    let eb = EdgeBasis::new(dofs.k);
    let parts: Vec<f64> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let el = &mesh.elements[t];
            let ib = ScaledMonomialBasis::for_element(el, dofs.k);
            let c0 = v.interior(dofs, t);
            let quad = &disc.quadrature[t];
            let n = ib.dim();
            let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; n]);
            let volume: f64 = quad
                .cell
                .points
                .iter()
                .zip(&quad.cell.weights)
                .map(|(&p, &w)| {
                    if gradient {
                        ib.eval_grad(p, &mut gx, &mut gy);
                        let dx: f64 = c0.iter().zip(&gx).map(|(a, b)| a * b).sum();
                        let dy: f64 = c0.iter().zip(&gy).map(|(a, b)| a * b).sum();
                        w * (dx * dx + dy * dy)
                    } else {
                        w * ib.evaluate(c0, p).powi(2)
                    }
                })
                .sum();
            let mut jump = 0.0;
            for (side, rule) in quad.sides.iter().enumerate() {
                let cb = v.trace(dofs, el.edge_ids[side]);
                jump += rule.integrate(|p, s| (ib.evaluate(c0, p) - eb.evaluate(cb, s)).powi(2));
            }
            volume + weight(el.diameter) * jump
        })
        .collect();
    parts.iter().sum()
}

/// `‖v‖₀ₕ = a(v, v)^½`.
pub fn norm_0h(disc: &Discretization, v: &WeakFunction) -> Result<f64> {
    check_len(disc, v)?;
    let p = disc.options.penalty_exponent;
    Ok(broken_sum(disc, v, false, |h| h.powf(p)).sqrt())
}

/// `‖v‖₁ₕ`.
pub fn norm_1h(disc: &Discretization, v: &WeakFunction) -> Result<f64> {
    check_len(disc, v)?;
    Ok(broken_sum(disc, v, true, |h| 1.0 / h).sqrt())
}

/// Weak gradient coefficients of `v` on every element.
pub fn weak_gradients(disc: &Discretization, v: &WeakFunction) -> Result<Vec<DVector<f64>>> {
    check_len(disc, v)?;
    (0..disc.mesh.n_elements())
        .into_par_iter()
        .map(|t| apply_weak_gradient(&disc.gradients[t], &v.local(&disc.dofs, &disc.mesh, t)))
        .collect()
}

/// `|||v||| = b(v, v)^½`.
pub fn triple_norm(disc: &Discretization, v: &WeakFunction) -> Result<f64> {
    let g = weak_gradients(disc, v)?;
    Ok(g.iter().zip(&disc.gradients).map(|(g, op)| op.inner(g, g)).sum::<f64>().max(0.0).sqrt())
}

/// Ingredients of `|||ψ|||₁`: `Q₀(∇·∇_w ψ)` per element and the projected
/// normal jumps `Q_b[∇_w ψ]` per edge.
struct JumpData {
    divergence: Vec<DVector<f64>>,
    jumps: Vec<DVector<f64>>,
}

fn jump_data(disc: &Discretization, psi: &WeakFunction) -> Result<JumpData> {
    let mesh = &disc.mesh;
    let k = disc.k();
    let grads = weak_gradients(disc, psi)?;
    let divergence: Vec<DVector<f64>> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let el = &mesh.elements[t];
            let vb = disc.gradients[t].basis();
            let d = vb.scalar.dim();
            let ib = ScaledMonomialBasis::for_element(el, k);
            let rule = &disc.quadrature[t].cell;
            let (mut gx, mut gy) = (vec![0.0; d], vec![0.0; d]);
            let g = &grads[t];
            let mut rhs = DVector::zeros(ib.dim());
            for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                vb.scalar.eval_grad(p, &mut gx, &mut gy);
                let div: f64 = (0..d).map(|b| g[b] * gx[b] + g[d + b] * gy[b]).sum();
                let phi = ib.values(p);
                for (r, v) in rhs.iter_mut().zip(&phi) {
                    *r += w * div * v;
                }
            }
            let m = gram(&ib.table(&rule.points), &rule.weights);
            Ok(cholesky(m, "interior mass")?.solve(&rhs))
        })
        .collect::<Result<_>>()?;

    let eb = EdgeBasis::new(k);
    let jumps: Vec<DVector<f64>> = (0..mesh.n_edges())
        .into_par_iter()
        .map(|e| {
            let edge = &mesh.edges[e];
            let j = edge.incident_elements.iter().map(|&t| disc.gradients[t].j).max().unwrap_or(0);
            let rule = edge_quadrature(edge, &mesh.vertices, 2 * j + 2);
            let mut values = vec![0.0; rule.len()];
            for &t in &edge.incident_elements {
                let el = &mesh.elements[t];
                let side = el.edge_ids.iter().position(|&x| x == e).expect("incident edge");
                let n = el.outward_normals[side];
                let vb = disc.gradients[t].basis();
                for (val, &p) in values.iter_mut().zip(&rule.points) {
                    let w = vb.evaluate(grads[t].as_slice(), p);
                    *val += w[0] * n.x + w[1] * n.y;
                }
            }
            let tab = eb.table(&rule.params);
            let mut rhs = DVector::zeros(eb.dim());
            for (q, (&w, &v)) in rule.weights.iter().zip(&values).enumerate() {
                for i in 0..eb.dim() {
                    rhs[i] += w * v * tab[(q, i)];
                }
            }
            Ok(cholesky(gram(&tab, &rule.weights), "edge mass")?.solve(&rhs))
        })
        .collect::<Result<_>>()?;
    Ok(JumpData { divergence, jumps })
}

fn interior_l2_sq(disc: &Discretization, t: usize, c: &[f64]) -> f64 {
    let ib = ScaledMonomialBasis::for_element(&disc.mesh.elements[t], disc.k());
    disc.quadrature[t].cell.integrate(|p| ib.evaluate(c, p).powi(2))
}

fn edge_l2_sq(disc: &Discretization, e: usize, c: &[f64]) -> f64 {
    let eb = EdgeBasis::new(disc.k());
    edge_quadrature(&disc.mesh.edges[e], &disc.mesh.vertices, 2 * disc.k() + 2).integrate(|_, s| eb.evaluate(c, s).powi(2))
}

/// `|||ψ|||₁ = (Σ_T ‖Q₀(∇·∇_w ψ)‖²_T + Σ_e h⁻¹ ‖Q_b[∇_w ψ]‖²_e)^½` with the global mesh size `h`.
pub fn triple_norm_1(disc: &Discretization, psi: &WeakFunction) -> Result<f64> {
    let data = jump_data(disc, psi)?;
    let vol: f64 = data.divergence.iter().enumerate().map(|(t, c)| interior_l2_sq(disc, t, c.as_slice())).sum();
    let edges: f64 = data.jumps.iter().enumerate().map(|(e, c)| edge_l2_sq(disc, e, c.as_slice())).sum();
    Ok((vol + edges / disc.mesh.h).sqrt())
}

/// `v* = {-Q₀(∇·∇_w ψ), h⁻¹ Q_b[∇_w ψ]}`.
pub fn vstar(disc: &Discretization, psi: &WeakFunction) -> Result<WeakFunction> {
    let data = jump_data(disc, psi)?;
    let dofs = &disc.dofs;
    let mut v = WeakFunction::zeros(dofs);
    for (t, c) in data.divergence.iter().enumerate() {
        let o = dofs.interior_offset(t);
        for (i, x) in c.iter().enumerate() {
            v.coeffs[o + i] = -x;
        }
    }
    for (e, c) in data.jumps.iter().enumerate() {
        let o = dofs.edge_offset(e);
        for (i, x) in c.iter().enumerate() {
            v.coeffs[o + i] = x / disc.mesh.h;
        }
    }
    Ok(v)
}

/// `b(v, w)` evaluated elementwise from the weak gradients.
pub fn b_form(disc: &Discretization, v: &WeakFunction, w: &WeakFunction) -> Result<f64> {
    let gv = weak_gradients(disc, v)?;
    let gw = weak_gradients(disc, w)?;
    Ok(disc.gradients.iter().zip(gv.iter().zip(&gw)).map(|(op, (a, b))| op.inner(a, b)).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorNorm {
    /// `|||Q_h v - v_h|||`.
    Energy,
    /// `‖Q₀ v - v₀‖`.
    L2,
}

pub fn error_vs_projection(
    disc: &Discretization,
    exact: impl Fn(Point2) -> f64 + Sync,
    vh: &WeakFunction,
    which: ErrorNorm,
) -> Result<f64> {
    check_len(disc, vh)?;
    let diff = WeakFunction::project(&disc.mesh, &disc.dofs, exact)?.sub(vh);
    match which {
        ErrorNorm::Energy => triple_norm(disc, &diff),
        ErrorNorm::L2 => Ok((0..disc.mesh.n_elements())
            .map(|t| interior_l2_sq(disc, t, diff.interior(&disc.dofs, t)))
            .sum::<f64>()
            .sqrt()),
    }
}

/// `‖v - v₀‖` against the exact function itself.
pub fn interior_l2_error(disc: &Discretization, exact: impl Fn(Point2) -> f64 + Sync, vh: &WeakFunction) -> Result<f64> {
    check_len(disc, vh)?;
    let k = disc.k();
    let parts: Vec<f64> = (0..disc.mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let ib = ScaledMonomialBasis::for_element(&disc.mesh.elements[t], k);
            let c = vh.interior(&disc.dofs, t);
            disc.quadrature[t].cell.integrate(|p| (exact(p) - ib.evaluate(c, p)).powi(2))
        })
        .collect();
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// `log₂(e_coarse / e_fine)`.
pub fn observed_rate(e_coarse: f64, e_fine: f64) -> Result<f64> {
    if !(e_coarse > 0.0 && e_fine > 0.0) || !e_coarse.is_finite() || !e_fine.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rates need positive finite errors, got {e_coarse:e} and {e_fine:e}"
        )));
    }
    Ok((e_coarse / e_fine).log2())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub n: usize,
    pub e_phi_energy: f64,
    pub e_u_energy: f64,
    pub e_phi_l2: f64,
    pub e_u_l2: f64,
    /// Rates of the four errors against the previous row, in the same order.
    pub rates: Option<[f64; 4]>,
}

impl ErrorRow {
    pub fn errors(&self) -> [f64; 4] {
        [self.e_phi_energy, self.e_u_energy, self.e_phi_l2, self.e_u_l2]
    }
}

/// Fills `rates` from the previous row when it has half the `n`; other rows get none.
pub fn fill_rates(rows: &mut [ErrorRow]) {
    for i in 0..rows.len() {
        rows[i].rates = if i == 0 || 2 * rows[i - 1].n != rows[i].n {
            None
        } else {
            let (a, b) = (rows[i - 1].errors(), rows[i].errors());
            let r: Vec<f64> = (0..4).map(|c| observed_rate(a[c], b[c]).unwrap_or(f64::NAN)).collect();
            Some([r[0], r[1], r[2], r[3]])
        };
    }
}
