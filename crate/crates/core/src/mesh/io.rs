//! Plain-text mesh format.
//!
//! ```text
//! SFWG-MESH 1
//! VERTICES <count>
//! <x> <y>
//! EDGES <count>
//! <v0> <v1>
//! ELEMENTS <count>
//! <m> <v_1> ... <v_m>
//! ```
//!
//! Coordinates are written in shortest round-trip decimal form, so reading a
//! written mesh reproduces it bit for bit. Lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{Mesh, Point2};
use crate::error::{Error, Result};

const HEADER: &str = "SFWG-MESH 1";

pub fn format_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    writeln!(s, "{HEADER}").unwrap();
    writeln!(s, "VERTICES {}", mesh.vertices.len()).unwrap();
    for p in &mesh.vertices {
        writeln!(s, "{:?} {:?}", p.x, p.y).unwrap();
    }
    writeln!(s, "EDGES {}", mesh.edges.len()).unwrap();
    for e in &mesh.edges {
        writeln!(s, "{} {}", e.endpoints[0], e.endpoints[1]).unwrap();
    }
    writeln!(s, "ELEMENTS {}", mesh.elements.len()).unwrap();
    for t in &mesh.elements {
        write!(s, "{}", t.vertex_ids.len()).unwrap();
        for v in &t.vertex_ids {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text, path)
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    path: PathBuf,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            self.last = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Some((i + 1, line));
        }
        None
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let (no, line) = self
            .next()
            .ok_or_else(|| self.err(self.last + 1, format!("missing {name} section")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(name) {
            return Err(self.err(no, format!("expected {name} section, found '{line}'")));
        }
        let count = parts
            .next()
            .and_then(|c| c.parse::<usize>().ok())
            .ok_or_else(|| self.err(no, format!("{name} section: missing or invalid count")))?;
        Ok(count)
    }

    fn entries(&mut self, name: &str, count: usize) -> Result<Vec<(usize, &'a str)>> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            match self.inner.peek() {
                None => break,
                Some((_, l)) if starts_section(l.trim()) => break,
                _ => {}
            }
            match self.next() {
                Some(entry) => out.push(entry),
                None => break,
            }
        }
        if out.len() != count {
            return Err(self.err(
                self.last,
                format!("{name} section: expected {count} entries, found {}", out.len()),
            ));
        }
        Ok(out)
    }
}

fn starts_section(line: &str) -> bool {
    ["VERTICES", "EDGES", "ELEMENTS"]
        .iter()
        .any(|s| line.split_whitespace().next() == Some(s))
}

pub fn parse_mesh(text: &str, path: &Path) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate().peekable(),
        path: path.to_path_buf(),
        last: 0,
    };
    match lines.next() {
        Some((_, l)) if l == HEADER => {}
        Some((no, l)) => return Err(lines.err(no, format!("missing header (found '{l}')"))),
        None => return Err(lines.err(1, "missing header")),
    }

    let nv = lines.section("VERTICES")?;
    let mut vertices = Vec::with_capacity(nv);
    for (no, l) in lines.entries("VERTICES", nv)? {
        let xy: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| lines.err(no, format!("VERTICES section: bad coordinate: {e}")))?;
        if xy.len() != 2 {
            return Err(lines.err(no, "VERTICES section: expected two coordinates"));
        }
        vertices.push(Point2::new(xy[0], xy[1]));
    }

    let ne = lines.section("EDGES")?;
    let mut edges = Vec::with_capacity(ne);
    for (no, l) in lines.entries("EDGES", ne)? {
        let ids = parse_ids(l).map_err(|m| lines.err(no, format!("EDGES section: {m}")))?;
        if ids.len() != 2 {
            return Err(lines.err(no, "EDGES section: expected two vertex indices"));
        }
        edges.push([ids[0], ids[1]]);
    }

    let nt = lines.section("ELEMENTS")?;
    let mut polys = Vec::with_capacity(nt);
    for (no, l) in lines.entries("ELEMENTS", nt)? {
        let ids = parse_ids(l).map_err(|m| lines.err(no, format!("ELEMENTS section: {m}")))?;
        if ids.is_empty() || ids[0] + 1 != ids.len() {
            return Err(lines.err(no, "ELEMENTS section: vertex count does not match entries"));
        }
        polys.push(ids[1..].to_vec());
    }
    if let Some((no, l)) = lines.next() {
        return Err(lines.err(no, format!("unexpected trailing content '{l}'")));
    }
    Mesh::from_parts(vertices, edges, polys)
}

fn parse_ids(line: &str) -> std::result::Result<Vec<usize>, String> {
    line.split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| format!("bad index '{t}': {e}")))
        .collect()
}
