//! Polygonal partitions of the unit square with full edge/element topology.
//!
//! Vertices of every element are stored counterclockwise. Edges carry a
//! global orientation from the lower-indexed endpoint to the higher-indexed
//! one, which is the parameterization every edge basis function uses.

mod generate;
mod io;
mod validate;

use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};

pub use generate::{generate_polygonal, generate_rectangular, generate_triangular, MeshFamily};
pub use io::{read_mesh, write_mesh, parse_mesh, format_mesh};
pub use validate::{validate, Entity, Violation};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, rhs: Point2) -> Point2 {
        Point2::new(self * rhs.x, self * rhs.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// `endpoints[0] < endpoints[1]`; the edge is parameterized from the first to the second.
    pub endpoints: [usize; 2],
    pub incident_elements: Vec<usize>,
    pub is_boundary: bool,
    pub length: f64,
    pub midpoint: Point2,
}

impl Edge {
    /// Unit tangent in the global orientation.
    pub fn tangent(&self, vertices: &[Point2]) -> Point2 {
        let a = vertices[self.endpoints[0]];
        let b = vertices[self.endpoints[1]];
        (1.0 / self.length) * (b - a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub vertex_ids: Vec<usize>,
    /// `edge_ids[i]` joins `vertex_ids[i]` and `vertex_ids[i + 1]`.
    pub edge_ids: Vec<usize>,
    pub centroid: Point2,
    /// Signed area; positive for a counterclockwise cycle.
    pub area: f64,
    pub diameter: f64,
    /// Unit normal of local edge `i`, pointing out of the element for a CCW cycle.
    pub outward_normals: Vec<Point2>,
}

impl Element {
    /// Builds an element and its derived geometry from a vertex cycle.
    pub fn from_cycle(vertex_ids: Vec<usize>, edge_ids: Vec<usize>, vertices: &[Point2]) -> Self {
        let pts: Vec<Point2> = vertex_ids.iter().map(|&v| vertices[v]).collect();
        let m = pts.len();
        let mut twice_area = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        // Shoelace terms relative to the first vertex keep cancellation small.
        let origin = pts[0];
        for i in 0..m {
            let p = pts[i] - origin;
            let q = pts[(i + 1) % m] - origin;
            let w = p.cross(q);
            twice_area += w;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        let area = 0.5 * twice_area;
        let centroid = if twice_area != 0.0 {
            Point2::new(origin.x + cx / (3.0 * twice_area), origin.y + cy / (3.0 * twice_area))
        } else {
            pts[0]
        };
        let mut diameter: f64 = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                diameter = diameter.max(pts[i].distance(pts[j]));
            }
        }
        let outward_normals = (0..m)
            .map(|i| {
                let d = pts[(i + 1) % m] - pts[i];
                let len = d.norm();
                Point2::new(d.y / len, -d.x / len)
            })
            .collect();
        Self {
            vertex_ids,
            edge_ids,
            centroid,
            area,
            diameter,
            outward_normals,
        }
    }

    pub fn n_edges(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn points<'a>(&'a self, vertices: &'a [Point2]) -> impl Iterator<Item = Point2> + 'a {
        self.vertex_ids.iter().map(move |&v| vertices[v])
    }

    /// The local edge running from `vertex_ids[i]` to `vertex_ids[i+1]` agrees
    /// with the global edge orientation.
    pub fn edge_agrees_with_global(&self, local: usize, edges: &[Edge]) -> bool {
        self.vertex_ids[local] == edges[self.edge_ids[local]].endpoints[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point2>,
    pub edges: Vec<Edge>,
    pub elements: Vec<Element>,
    pub h: f64,
    pub boundary_edge_ids: Vec<usize>,
}

impl Mesh {
    /// Builds the topology from CCW vertex cycles. Edges are numbered in order of
    /// first appearance while walking elements and their local edges.
    pub fn from_polygons(vertices: Vec<Point2>, polygons: Vec<Vec<usize>>) -> Result<Self> {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut endpoints: Vec<[usize; 2]> = Vec::new();
        for poly in &polygons {
            let m = poly.len();
            for i in 0..m {
                let key = ordered(poly[i], poly[(i + 1) % m]);
                index.entry(key).or_insert_with(|| {
                    endpoints.push([key.0, key.1]);
                    endpoints.len() - 1
                });
            }
        }
        Self::from_parts(vertices, endpoints, polygons)
    }

    /// Builds a mesh from an explicit edge list and element vertex cycles.
    /// Every element side must appear in `edge_endpoints`.
    pub fn from_parts(
        vertices: Vec<Point2>,
        edge_endpoints: Vec<[usize; 2]>,
        polygons: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let nv = vertices.len();
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        for (e, ends) in edge_endpoints.iter().enumerate() {
            if ends[0] >= nv || ends[1] >= nv {
                return Err(Error::InvalidMesh(format!("edge {e} references a missing vertex")));
            }
            index.entry(ordered(ends[0], ends[1])).or_insert(e);
        }
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); edge_endpoints.len()];
        let mut elements = Vec::with_capacity(polygons.len());
        for (t, poly) in polygons.into_iter().enumerate() {
            if poly.len() < 3 {
                return Err(Error::InvalidMesh(format!("element {t} has fewer than 3 vertices")));
            }
            if let Some(&v) = poly.iter().find(|&&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("element {t} references missing vertex {v}")));
            }
            let m = poly.len();
            let mut edge_ids = Vec::with_capacity(m);
            for i in 0..m {
                let key = ordered(poly[i], poly[(i + 1) % m]);
                let e = *index.get(&key).ok_or_else(|| {
                    Error::InvalidMesh(format!("element {t}: side {key:?} is not in the edge list"))
                })?;
                incident[e].push(t);
                edge_ids.push(e);
            }
            elements.push(Element::from_cycle(poly, edge_ids, &vertices));
        }
        let edges: Vec<Edge> = edge_endpoints
            .into_iter()
            .zip(incident)
            .map(|(ends, inc)| {
                let (lo, hi) = ordered(ends[0], ends[1]);
                let a = vertices[lo];
                let b = vertices[hi];
                Edge {
                    endpoints: [lo, hi],
                    is_boundary: inc.len() == 1,
                    incident_elements: inc,
                    length: a.distance(b),
                    midpoint: Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)),
                }
            })
            .collect();
        let boundary_edge_ids = (0..edges.len()).filter(|&e| edges[e].is_boundary).collect();
        let h = elements.iter().map(|el| el.diameter).fold(0.0, f64::max);
        Ok(Self {
            vertices,
            edges,
            elements,
            h,
            boundary_edge_ids,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn total_area(&self) -> f64 {
        self.elements.iter().map(|t| t.area).sum()
    }

    /// Returns a copy with elements reordered by `order` (a permutation of
    /// element indices). Edge numbering is preserved.
    pub fn permute_elements(&self, order: &[usize]) -> Result<Mesh> {
        if order.len() != self.n_elements() {
            return Err(Error::DimensionMismatch {
                expected: self.n_elements(),
                got: order.len(),
            });
        }
        let polygons = order.iter().map(|&t| self.elements[t].vertex_ids.clone()).collect();
        let edges = self.edges.iter().map(|e| e.endpoints).collect();
        Mesh::from_parts(self.vertices.clone(), edges, polygons)
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}
