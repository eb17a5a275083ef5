//! Manufactured solutions on the unit square.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::Point2;
use crate::solver::BiharmonicData;

type Scalar = fn(Point2) -> f64;

#[derive(Clone, Copy)]
pub struct ManufacturedCase {
    pub id: u8,
    pub name: &'static str,
    pub u: Scalar,
    pub grad_u: fn(Point2) -> [f64; 2],
    /// `φ = -Δu`.
    pub phi: Scalar,
    /// `f = Δ²u`.
    pub f: Scalar,
    pub dirichlet_zero: bool,
    pub neumann_zero: bool,
    /// `∫_∂Ω ∂u/∂n ds`.
    pub boundary_flux: f64,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase").field("id", &self.id).field("name", &self.name).finish()
    }
}

impl BiharmonicData for ManufacturedCase {
    fn source(&self, p: Point2) -> f64 {
        (self.f)(p)
    }

    fn dirichlet(&self, p: Point2) -> f64 {
        if self.dirichlet_zero {
            0.0
        } else {
            (self.u)(p)
        }
    }

    fn neumann(&self, p: Point2, n: Point2) -> f64 {
        if self.neumann_zero {
            return 0.0;
        }
        let g = (self.grad_u)(p);
        g[0] * n.x + g[1] * n.y
    }
}

// x²(1-x)² and its derivatives
fn b0(x: f64) -> f64 {
    x * x * (1.0 - x) * (1.0 - x)
}
fn b1(x: f64) -> f64 {
    2.0 * x - 6.0 * x * x + 4.0 * x * x * x
}
fn b2(x: f64) -> f64 {
    2.0 - 12.0 * x + 12.0 * x * x
}
const B4: f64 = 24.0;

fn polynomial_case() -> ManufacturedCase {
    ManufacturedCase {
        id: 1,
        name: "x^2(1-x)^2 y^2(1-y)^2",
        u: |p| b0(p.x) * b0(p.y),
        grad_u: |p| [b1(p.x) * b0(p.y), b0(p.x) * b1(p.y)],
        phi: |p| -(b2(p.x) * b0(p.y) + b0(p.x) * b2(p.y)),
        f: |p| B4 * b0(p.y) + 2.0 * b2(p.x) * b2(p.y) + b0(p.x) * B4,
        dirichlet_zero: true,
        neumann_zero: true,
        boundary_flux: 0.0,
    }
}

fn sine_case() -> ManufacturedCase {
    ManufacturedCase {
        id: 2,
        name: "sin(pi x) sin(pi y)",
        u: |p| (PI * p.x).sin() * (PI * p.y).sin(),
        grad_u: |p| {
            [
                PI * (PI * p.x).cos() * (PI * p.y).sin(),
                PI * (PI * p.x).sin() * (PI * p.y).cos(),
            ]
        },
        phi: |p| 2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).sin(),
        f: |p| 4.0 * PI.powi(4) * (PI * p.x).sin() * (PI * p.y).sin(),
        dirichlet_zero: true,
        neumann_zero: false,
        boundary_flux: -8.0,
    }
}

fn exponential_case() -> ManufacturedCase {
    let e1 = std::f64::consts::E - 1.0;
    ManufacturedCase {
        id: 3,
        name: "exp(x+y)",
        u: |p| (p.x + p.y).exp(),
        grad_u: |p| [(p.x + p.y).exp(), (p.x + p.y).exp()],
        phi: |p| -2.0 * (p.x + p.y).exp(),
        f: |p| 4.0 * (p.x + p.y).exp(),
        dirichlet_zero: false,
        neumann_zero: false,
        boundary_flux: 2.0 * e1 * e1,
    }
}

pub fn case_catalog() -> Vec<ManufacturedCase> {
    vec![polynomial_case(), sine_case(), exponential_case()]
}

pub fn case_by_id(id: u8) -> Result<ManufacturedCase> {
    case_catalog()
        .into_iter()
        .find(|c| c.id == id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown case {id}; expected 1, 2 or 3")))
}

/// Largest relative deviation of `φ` from `-Δ_h u` and of `f` from `-Δ_h φ`
/// (five-point differences with step `h`) over `points`.
pub fn finite_difference_check(case: &ManufacturedCase, points: &[Point2], h: f64) -> f64 {
    let lap = |g: Scalar, p: Point2| {
        let c = g(p);
        (g(Point2::new(p.x + h, p.y)) + g(Point2::new(p.x - h, p.y)) + g(Point2::new(p.x, p.y + h))
            + g(Point2::new(p.x, p.y - h))
            - 4.0 * c)
            / (h * h)
    };
    let rel = |fd: Vec<f64>, exact: Vec<f64>| {
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        fd.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
    };
    let phi = rel(
        points.iter().map(|&p| -lap(case.u, p)).collect(),
        points.iter().map(|&p| (case.phi)(p)).collect(),
    );
    let f = rel(
        points.iter().map(|&p| -lap(case.phi, p)).collect(),
        points.iter().map(|&p| (case.f)(p)).collect(),
    );
    phi.max(f)
}
