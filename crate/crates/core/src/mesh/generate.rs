use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Mesh, Point2};
use crate::error::{Error, Result};

/// The three structured families of the convergence study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFamily {
    Tri,
    Rect,
    Poly,
}

impl MeshFamily {
    pub fn generate(self, n: usize) -> Result<Mesh> {
        match self {
            MeshFamily::Tri => generate_triangular(n),
            MeshFamily::Rect => generate_rectangular(n),
            MeshFamily::Poly => generate_polygonal(n, 0.25),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MeshFamily::Tri => "tri",
            MeshFamily::Rect => "rect",
            MeshFamily::Poly => "poly",
        }
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeshFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tri" | "triangular" => Ok(MeshFamily::Tri),
            "rect" | "rectangular" => Ok(MeshFamily::Rect),
            "poly" | "polygonal" => Ok(MeshFamily::Poly),
            other => Err(Error::InvalidArgument(format!("unknown mesh family '{other}'"))),
        }
    }
}

fn grid_vertices(n: usize) -> Vec<Point2> {
    let nf = n as f64;
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            v.push(Point2::new(i as f64 / nf, j as f64 / nf));
        }
    }
    v
}

fn check_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidArgument(format!("mesh parameter n must be >= {min}, got {n}")));
    }
    Ok(())
}

/// `n x n` squares, each split along its lower-left to upper-right diagonal.
pub fn generate_triangular(n: usize) -> Result<Mesh> {
    check_n(n, 1)?;
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut polys = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            polys.push(vec![a, b, c]);
            polys.push(vec![a, c, d]);
        }
    }
    Mesh::from_polygons(grid_vertices(n), polys)
}

/// `n x n` axis-aligned squares.
pub fn generate_rectangular(n: usize) -> Result<Mesh> {
    check_n(n, 1)?;
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut polys = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            polys.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::from_polygons(grid_vertices(n), polys)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Dir {
    E,
    N,
    W,
    S,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum VertexKey {
    Grid(usize, usize),
    Cut(usize, usize, Dir),
}

/// Cut-corner family: every interior grid vertex of the `n x n` grid is
/// replaced by a small diamond whose corners sit at distance `cut_ratio / n`
/// along the four incident grid lines. Interior cells become octagons, cells
/// along the boundary become hexagons and the corner cells pentagons.
pub fn generate_polygonal(n: usize, cut_ratio: f64) -> Result<Mesh> {
    check_n(n, 2)?;
    if !(cut_ratio > 0.0 && cut_ratio < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "cut_ratio must lie in (0, 1/2), got {cut_ratio}"
        )));
    }
    let nf = n as f64;
    let cut = cut_ratio / nf;
    let interior = |i: usize, j: usize| i > 0 && i < n && j > 0 && j < n;

    let mut vertices = Vec::new();
    let mut ids: HashMap<VertexKey, usize> = HashMap::new();
    let mut vertex = |key: VertexKey| -> usize {
        *ids.entry(key).or_insert_with(|| {
            let p = match key {
                VertexKey::Grid(i, j) => Point2::new(i as f64 / nf, j as f64 / nf),
                VertexKey::Cut(i, j, d) => {
                    let (x, y) = (i as f64 / nf, j as f64 / nf);
                    match d {
                        Dir::E => Point2::new(x + cut, y),
                        Dir::N => Point2::new(x, y + cut),
                        Dir::W => Point2::new(x - cut, y),
                        Dir::S => Point2::new(x, y - cut),
                    }
                }
            };
            vertices.push(p);
            vertices.len() - 1
        })
    };

    let mut polys = Vec::new();
    for j in 0..n {
        for i in 0..n {
            // corner, then (incoming, outgoing) cut directions when the corner is cut
            let corners = [
                ((i, j), Dir::N, Dir::E),
                ((i + 1, j), Dir::W, Dir::N),
                ((i + 1, j + 1), Dir::S, Dir::W),
                ((i, j + 1), Dir::E, Dir::S),
            ];
            let mut poly = Vec::with_capacity(8);
            for &((ci, cj), inc, out) in &corners {
                if interior(ci, cj) {
                    poly.push(vertex(VertexKey::Cut(ci, cj, inc)));
                    poly.push(vertex(VertexKey::Cut(ci, cj, out)));
                } else {
                    poly.push(vertex(VertexKey::Grid(ci, cj)));
                }
            }
            polys.push(poly);
        }
    }
    for j in 1..n {
        for i in 1..n {
            polys.push(
                [Dir::E, Dir::N, Dir::W, Dir::S]
                    .iter()
                    .map(|&d| vertex(VertexKey::Cut(i, j, d)))
                    .collect(),
            );
        }
    }
    Mesh::from_polygons(vertices, polys)
}
