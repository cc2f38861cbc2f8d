//! Plain-text mesh format.
//!
//! ```text
//! # comment
//! vertices N
//! x y          (N lines)
//! triangles M
//! v0 v1 v2     (M lines, 0-based, refinement edge v1-v2)
//! ```

use std::path::Path;
use std::sync::Arc;

use super::forest::{Forest, Point};
use super::Triangulation;
use crate::error::{Error, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Arc<Forest>> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub fn parse_mesh(text: &str) -> Result<Arc<Forest>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let perr = |line: usize, message: &str| Error::Parse { line, message: message.to_string() };
    let header = |lines: &mut dyn Iterator<Item = (usize, &str)>, word: &str| -> Result<usize> {
        let (ln, l) = lines.next().ok_or_else(|| perr(0, &format!("missing `{word}` header")))?;
        let mut it = l.split_whitespace();
        if it.next() != Some(word) {
            return Err(perr(ln, &format!("expected `{word} <count>`")));
        }
        let n = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| perr(ln, "invalid count"))?;
        if it.next().is_some() {
            return Err(perr(ln, "trailing tokens"));
        }
        Ok(n)
    };

    let nv = header(&mut lines, "vertices")?;
    let mut coords: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| perr(0, "unexpected end of vertex list"))?;
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| perr(ln, "invalid coordinate"))?;
        if vals.len() != 2 || !vals.iter().all(|v| v.is_finite()) {
            return Err(perr(ln, "expected two finite coordinates"));
        }
        coords.push([vals[0], vals[1]]);
    }

    let nt = header(&mut lines, "triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = lines.next().ok_or_else(|| perr(0, "unexpected end of triangle list"))?;
        let ids: Vec<u32> = l
            .split_whitespace()
            .map(|s| s.parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| perr(ln, "invalid vertex index"))?;
        if ids.len() != 3 {
            return Err(perr(ln, "expected three vertex indices"));
        }
        if ids.iter().any(|&v| v as usize >= nv) {
            return Err(perr(ln, "vertex index out of range"));
        }
        triangles.push([ids[0], ids[1], ids[2]]);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(perr(ln, "unexpected trailing content"));
    }
    Forest::new(coords, triangles)
}

/// Writes the leaves of `tri` in the mesh format (NVB vertex order kept).
pub fn write_mesh(tri: &Triangulation) -> String {
    let mut out = format!("vertices {}\n", tri.num_vertices());
    for v in 0..tri.num_vertices() {
        let p = tri.vertex_coord(v);
        out.push_str(&format!("{:?} {:?}\n", p[0], p[1]));
    }
    out.push_str(&format!("triangles {}\n", tri.num_elements()));
    for t in 0..tri.num_elements() {
        let [a, b, c] = tri.element_vertices(t);
        out.push_str(&format!("{a} {b} {c}\n"));
    }
    out
}
