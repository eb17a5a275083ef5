//! Quadrature on convex polygons (centroid fan of collapsed Gauss rules) and
//! on straight edges (Gauss–Legendre).

use std::fmt;

use crate::error::{Error, Result};
use crate::mesh::{Edge, Element, Point2};

/// Gauss–Legendre nodes and weights on [-1, 1], ascending nodes.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m > 0, "gauss_legendre needs at least one point");
    if m == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // P_m(x) and P_{m-1}(x) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = mf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn integrate(&self, mut f: impl FnMut(Point2) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

impl fmt::Display for QuadratureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# degree {} points {}", self.degree, self.len())?;
        for (p, w) in self.points.iter().zip(&self.weights) {
            writeln!(f, "{:.17e} {:.17e} {:.17e}", p.x, p.y, w)?;
        }
        Ok(())
    }
}

/// Collapsed-square Gauss rule on triangle `(a, b, c)`, exact for total degree `degree`.
pub fn triangle_quadrature(a: Point2, b: Point2, c: Point2, degree: usize) -> QuadratureRule {
    // the Duffy Jacobian adds one degree in the collapsed direction
    let (ru, wu) = gauss_legendre((degree + 2).div_ceil(2));
    let (rv, wv) = gauss_legendre((degree + 1).div_ceil(2).max(1));
    let twice_area = (b - a).cross(c - a).abs();
    let mut points = Vec::with_capacity(ru.len() * rv.len());
    let mut weights = Vec::with_capacity(ru.len() * rv.len());
    for (&xu, &au) in ru.iter().zip(&wu) {
        let u = 0.5 * (1.0 + xu);
        for (&xv, &av) in rv.iter().zip(&wv) {
            let v = 0.5 * (1.0 + xv);
            let p = Point2::new(
                (1.0 - u) * a.x + u * ((1.0 - v) * b.x + v * c.x),
                (1.0 - u) * a.y + u * ((1.0 - v) * b.y + v * c.y),
            );
            points.push(p);
            weights.push(0.25 * au * av * u * twice_area);
        }
    }
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

/// Fan-triangulates a convex element from its centroid and places a
/// degree-exact triangle rule on each piece.
pub fn element_quadrature(element: &Element, vertices: &[Point2], degree: usize) -> Result<QuadratureRule> {
    let pts: Vec<Point2> = element.points(vertices).collect();
    let m = pts.len();
    for i in 0..m {
        let d0 = pts[(i + 1) % m] - pts[i];
        let d1 = pts[(i + 2) % m] - pts[(i + 1) % m];
        if !(d0.cross(d1) > 0.0) {
            return Err(Error::NonConvexElement(format!(
                "vertices {:?}, centroid ({}, {})",
                element.vertex_ids, element.centroid.x, element.centroid.y
            )));
        }
    }
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
        degree,
    };
    for i in 0..m {
        let piece = triangle_quadrature(element.centroid, pts[i], pts[(i + 1) % m], degree);
        rule.points.extend(piece.points);
        rule.weights.extend(piece.weights);
    }
    Ok(rule)
}

/// Gauss–Legendre rule on an edge. `params` holds the scaled coordinate
/// `t ∈ [-1, 1]` along the global orientation, `t = (s - |e|/2) / (|e|/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRule {
    pub points: Vec<Point2>,
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl EdgeRule {
    pub fn integrate(&self, mut f: impl FnMut(Point2, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.params)
            .zip(&self.weights)
            .map(|((&p, &t), &w)| w * f(p, t))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub fn edge_quadrature(edge: &Edge, vertices: &[Point2], degree: usize) -> EdgeRule {
    let (nodes, w) = gauss_legendre((degree + 1).div_ceil(2).max(1));
    let a = vertices[edge.endpoints[0]];
    let b = vertices[edge.endpoints[1]];
    let half = 0.5 * edge.length;
    let points = nodes
        .iter()
        .map(|&t| {
            let s = 0.5 * (1.0 + t);
            Point2::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y))
        })
        .collect();
    EdgeRule {
        points,
        params: nodes,
        weights: w.iter().map(|&x| x * half).collect(),
        degree,
    }
}
