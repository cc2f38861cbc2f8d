//! Append-only newest-vertex-bisection forest.
//!
//! Every element ever created is a node of the forest. A node stores its
//! vertices in NVB order `(v0, v1, v2)`: the refinement edge is `v1v2` and
//! `v0` is the newest vertex. Bisection creates the children
//! `(m, v1, v0)` and `(m, v0, v2)` where `m` is the midpoint of `v1v2`.
//! Nodes and vertices are never removed, so every [`Triangulation`] is a
//! cheap immutable cut through the forest.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{RwLock, RwLockReadGuard, RwLockWriteGuard};
use serde::{Deserialize, Serialize};

use super::Triangulation;
use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElemId(pub u32);

/// Global side identifier: the ordered pair of endpoint vertex ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SideKey(VertexId, VertexId);

impl SideKey {
    pub fn new(a: VertexId, b: VertexId) -> Self {
        if a <= b {
            SideKey(a, b)
        } else {
            SideKey(b, a)
        }
    }

    pub fn endpoints(self) -> [VertexId; 2] {
        [self.0, self.1]
    }
}

impl fmt::Display for SideKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}-{})", self.0 .0, self.1 .0)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub verts: [VertexId; 3],
    pub parent: Option<ElemId>,
    pub children: Option<[ElemId; 2]>,
    pub generation: u32,
}

#[derive(Debug)]
pub(crate) struct ForestData {
    pub coords: Vec<Point>,
    pub nodes: Vec<Node>,
    pub roots: Vec<ElemId>,
    pub midpoints: HashMap<SideKey, VertexId>,
}

impl ForestData {
    pub fn node(&self, e: ElemId) -> &Node {
        &self.nodes[e.0 as usize]
    }

    pub fn coord(&self, v: VertexId) -> Point {
        self.coords[v.0 as usize]
    }

    /// Returns the children of `e`, bisecting it first if necessary.
    pub fn bisect(&mut self, e: ElemId) -> [ElemId; 2] {
        if let Some(ch) = self.nodes[e.0 as usize].children {
            return ch;
        }
        let Node { verts: [v0, v1, v2], generation, .. } = self.nodes[e.0 as usize];
        let key = SideKey::new(v1, v2);
        let m = match self.midpoints.get(&key) {
            Some(&m) => m,
            None => {
                let (a, b) = (self.coord(v1), self.coord(v2));
                let m = VertexId(self.coords.len() as u32);
                self.coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                self.midpoints.insert(key, m);
                m
            }
        };
        let first = ElemId(self.nodes.len() as u32);
        let second = ElemId(first.0 + 1);
        for verts in [[m, v1, v0], [m, v0, v2]] {
            self.nodes.push(Node { verts, parent: Some(e), children: None, generation: generation + 1 });
        }
        self.nodes[e.0 as usize].children = Some([first, second]);
        [first, second]
    }
}

static NEXT_FOREST_ID: AtomicU64 = AtomicU64::new(1);

/// Binary NVB forest over a matching initial triangulation.
///
/// Appends are serialized through the internal write lock; readers of
/// committed nodes never block each other.
#[derive(Debug)]
pub struct Forest {
    id: u64,
    data: RwLock<ForestData>,
}

impl Forest {
    /// Builds a forest from vertex coordinates and root triangles given in
    /// NVB order. Conformity and the matching assumption are validated.
    pub fn new(coords: Vec<Point>, triangles: Vec<[u32; 3]>) -> Result<Arc<Forest>> {
        let nv = coords.len() as u32;
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::Parse { line: 0, message: format!("triangle {i} references unknown vertex") });
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::DegenerateElement { element: i });
            }
            let p = t.map(|v| coords[v as usize]);
            let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            if area2.abs() <= 1e-14 {
                return Err(Error::DegenerateElement { element: i });
            }
        }
        validate_roots(&coords, &triangles)?;

        let nodes: Vec<Node> = triangles
            .iter()
            .map(|t| Node { verts: t.map(VertexId), parent: None, children: None, generation: 0 })
            .collect();
        let roots = (0..nodes.len() as u32).map(ElemId).collect();
        let data = ForestData { coords, nodes, roots, midpoints: HashMap::new() };
        Ok(Arc::new(Forest { id: NEXT_FOREST_ID.fetch_add(1, Ordering::Relaxed), data: RwLock::new(data) }))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub(crate) fn read(&self) -> RwLockReadGuard<'_, ForestData> {
        self.data.read()
    }

    pub(crate) fn write(&self) -> RwLockWriteGuard<'_, ForestData> {
        self.data.write()
    }

    /// The initial triangulation `T_⊥`.
    pub fn bottom(self: &Arc<Self>) -> Triangulation {
        let roots = self.read().roots.clone();
        Triangulation::from_leaves(self.clone(), roots).expect("roots were validated as conforming")
    }

    pub fn roots(&self) -> Vec<ElemId> {
        self.read().roots.clone()
    }

    pub fn num_roots(&self) -> usize {
        self.read().roots.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.read().nodes.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.read().coords.len()
    }

    pub fn coord(&self, v: VertexId) -> Point {
        self.read().coord(v)
    }

    pub fn vertices(&self, e: ElemId) -> [VertexId; 3] {
        self.read().node(e).verts
    }

    pub fn parent(&self, e: ElemId) -> Option<ElemId> {
        self.read().node(e).parent
    }

    pub fn children(&self, e: ElemId) -> Option<[ElemId; 2]> {
        self.read().node(e).children
    }

    pub fn generation(&self, e: ElemId) -> u32 {
        self.read().node(e).generation
    }

    /// Midpoint vertex of `key`, if that side has ever been bisected.
    pub fn midpoint(&self, key: SideKey) -> Option<VertexId> {
        self.read().midpoints.get(&key).copied()
    }

    /// Bisects `e` (idempotent) and returns its children.
    pub fn bisect(&self, e: ElemId) -> [ElemId; 2] {
        if let Some(ch) = self.children(e) {
            return ch;
        }
        self.write().bisect(e)
    }

    /// True if `anc` equals `e` or is one of its ancestors.
    pub fn is_ancestor_or_self(&self, anc: ElemId, e: ElemId) -> bool {
        let data = self.read();
        let mut cur = Some(e);
        while let Some(c) = cur {
            if c == anc {
                return true;
            }
            if data.node(c).generation <= data.node(anc).generation {
                return false;
            }
            cur = data.node(c).parent;
        }
        false
    }
}

/// Checks conformity and the matching assumption of the root triangles.
fn validate_roots(coords: &[Point], triangles: &[[u32; 3]]) -> Result<()> {
    let mut sides: HashMap<(u32, u32), Vec<(usize, bool)>> = HashMap::new();
    for (i, t) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
            let key = (a.min(b), a.max(b));
            // k == 0 is the side (v1, v2): the refinement edge.
            sides.entry(key).or_default().push((i, k == 0));
        }
    }
    let mut keys: Vec<_> = sides.keys().copied().collect();
    keys.sort_unstable();
    for key in &keys {
        let adj = &sides[key];
        if adj.len() > 2 {
            return Err(Error::NonConforming { elements: adj.iter().map(|a| a.0).collect() });
        }
        if adj.len() == 2 && adj[0].1 != adj[1].1 {
            return Err(Error::MatchingViolation { elements: vec![adj[0].0, adj[1].0] });
        }
    }
    // Hanging nodes: a vertex strictly inside a side that has only one neighbour.
    for key in &keys {
        let adj = &sides[key];
        if adj.len() != 1 {
            continue;
        }
        let (a, b) = (coords[key.0 as usize], coords[key.1 as usize]);
        let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
        for (vi, p) in coords.iter().enumerate() {
            if vi as u32 == key.0 || vi as u32 == key.1 {
                continue;
            }
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            let t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / len2;
            if cross.abs() <= 1e-12 * len2 && t > 1e-12 && t < 1.0 - 1e-12 {
                let mut elements: Vec<usize> = triangles
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.contains(&(vi as u32)))
                    .map(|(i, _)| i)
                    .collect();
                elements.insert(0, adj[0].0);
                return Err(Error::NonConforming { elements });
            }
        }
    }
    Ok(())
}
