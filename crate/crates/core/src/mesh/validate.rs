use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use super::Mesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entity {
    Vertex(usize),
    Edge(usize),
    Element(usize),
    Mesh,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub entity: Entity,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.entity {
            Entity::Vertex(i) => write!(f, "vertex {i}: {}", self.message),
            Entity::Edge(i) => write!(f, "edge {i}: {}", self.message),
            Entity::Element(i) => write!(f, "element {i}: {}", self.message),
            Entity::Mesh => write!(f, "mesh: {}", self.message),
        }
    }
}

const GEOM_TOL: f64 = 1e-12;

/// Checks every vertex, edge, element and mesh-level invariant. Returns an
/// empty list for a valid mesh.
pub fn validate(mesh: &Mesh) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut report = |entity: Entity, message: String| out.push(Violation { entity, message });
    let nv = mesh.vertices.len();
    let ne = mesh.edges.len();

    for (i, p) in mesh.vertices.iter().enumerate() {
        if !p.is_finite() {
            report(Entity::Vertex(i), "non-finite coordinate".into());
        }
    }

    // incidence recomputed from the element side lists
    let mut incidence: Vec<Vec<usize>> = vec![Vec::new(); ne];
    for (t, el) in mesh.elements.iter().enumerate() {
        for &e in &el.edge_ids {
            if e < ne {
                incidence[e].push(t);
            } else {
                report(Entity::Element(t), format!("references missing edge {e}"));
            }
        }
    }

    let mut seen: HashMap<[usize; 2], usize> = HashMap::new();
    for (e, edge) in mesh.edges.iter().enumerate() {
        let [a, b] = edge.endpoints;
        if a >= nv || b >= nv {
            report(Entity::Edge(e), "endpoint out of range".into());
            continue;
        }
        if a == b {
            report(Entity::Edge(e), "endpoints not distinct".into());
        }
        if let Some(&other) = seen.get(&edge.endpoints) {
            report(Entity::Edge(e), format!("duplicate of edge {other}"));
        } else {
            seen.insert(edge.endpoints, e);
        }
        if !(edge.length > 0.0) {
            report(Entity::Edge(e), "length <= 0".into());
        }
        let count = incidence[e].len();
        if edge.is_boundary != (count == 1) {
            report(
                Entity::Edge(e),
                format!("boundary flag inconsistent with {count} incident elements"),
            );
        }
        if !edge.is_boundary && count != 2 {
            report(Entity::Edge(e), format!("interior edge shared by ≠ 2 elements ({count})"));
        }
        if edge.is_boundary && count == 0 {
            report(Entity::Edge(e), "boundary edge not used by any element".into());
        }
        let mut listed = edge.incident_elements.clone();
        listed.sort_unstable();
        let mut actual = incidence[e].clone();
        actual.sort_unstable();
        if listed != actual {
            report(Entity::Edge(e), "incident element list inconsistent with element sides".into());
        }
    }

    for (t, el) in mesh.elements.iter().enumerate() {
        let m = el.vertex_ids.len();
        if m < 3 || el.edge_ids.len() != m || el.outward_normals.len() != m {
            report(Entity::Element(t), "fewer than 3 edges or inconsistent cycle lengths".into());
            continue;
        }
        if el.vertex_ids.iter().any(|&v| v >= nv) {
            report(Entity::Element(t), "vertex out of range".into());
            continue;
        }
        if !(el.area > 0.0) {
            report(Entity::Element(t), format!("signed area ≤ 0 ({:e})", el.area));
        }
        let pts: Vec<_> = el.points(&mesh.vertices).collect();
        // convexity: every turn is a left turn and the total turning is one revolution
        let mut turning = 0.0;
        let mut convex = true;
        for i in 0..m {
            let d0 = pts[(i + 1) % m] - pts[i];
            let d1 = pts[(i + 2) % m] - pts[(i + 1) % m];
            let c = d0.cross(d1);
            if !(c > 0.0) {
                convex = false;
            }
            turning += c.atan2(d0.dot(d1));
        }
        if !convex || (turning - 2.0 * PI).abs() > 1e-9 {
            report(Entity::Element(t), "polygon not simple and convex".into());
        }
        let mut diam: f64 = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                diam = diam.max(pts[i].distance(pts[j]));
            }
        }
        if !(el.diameter > 0.0) || (el.diameter - diam).abs() > GEOM_TOL {
            report(Entity::Element(t), "diameter differs from max vertex distance".into());
        }
        for i in 0..m {
            let e = el.edge_ids[i];
            if e >= ne {
                continue;
            }
            let (a, b) = (el.vertex_ids[i], el.vertex_ids[(i + 1) % m]);
            let ends = mesh.edges[e].endpoints;
            if !((ends[0] == a && ends[1] == b) || (ends[0] == b && ends[1] == a)) {
                report(Entity::Element(t), format!("local edge {i} does not join its vertices"));
            }
            let n = el.outward_normals[i];
            if (n.norm() - 1.0).abs() > GEOM_TOL {
                report(Entity::Element(t), format!("normal {i} is not unit length"));
            }
            if !(n.dot(mesh.edges[e].midpoint - el.centroid) > 0.0) {
                report(Entity::Element(t), format!("normal {i} does not point outward"));
            }
        }
    }

    for (e, inc) in incidence.iter().enumerate() {
        if inc.len() == 2 {
            let n0 = local_normal(mesh, inc[0], e);
            let n1 = local_normal(mesh, inc[1], e);
            if let (Some(n0), Some(n1)) = (n0, n1) {
                if (n0.dot(n1) + 1.0).abs() > GEOM_TOL {
                    report(Entity::Edge(e), "incident elements do not see opposite normals".into());
                }
            }
        }
    }

    let area = mesh.total_area();
    if (area - 1.0).abs() > GEOM_TOL {
        report(Entity::Mesh, format!("element areas sum to {area}, expected 1"));
    }
    let h = mesh.elements.iter().map(|t| t.diameter).fold(0.0, f64::max);
    if h != mesh.h {
        report(Entity::Mesh, "h differs from max element diameter".into());
    }
    let boundary: Vec<usize> = (0..ne).filter(|&e| incidence[e].len() == 1).collect();
    if boundary != mesh.boundary_edge_ids {
        report(Entity::Mesh, "boundary edge set inconsistent".into());
    }
    let euler = nv as i64 - ne as i64 + mesh.elements.len() as i64;
    if euler != 1 {
        report(Entity::Mesh, format!("V - E + F = {euler}, expected 1"));
    }
    out
}

fn local_normal(mesh: &Mesh, t: usize, e: usize) -> Option<super::Point2> {
    let el = &mesh.elements[t];
    el.edge_ids.iter().position(|&x| x == e).map(|i| el.outward_normals[i])
}
