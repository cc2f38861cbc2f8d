use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use super::forest::{ElemId, Forest, Point, SideKey, VertexId};
use crate::error::{Error, Result};

/// A side of a triangulation. Local indices refer to the owning
/// [`Triangulation`].
#[derive(Clone, Debug)]
pub struct Side {
    pub key: SideKey,
    /// Local vertex indices, ordered like `key`.
    pub vertices: [usize; 2],
    pub midpoint: Point,
    pub length: f64,
    /// Adjacent elements, lower local index first.
    pub elements: [usize; 2],
    pub boundary: bool,
}

impl Side {
    pub fn adjacent(&self) -> &[usize] {
        if self.boundary {
            &self.elements[..1]
        } else {
            &self.elements[..]
        }
    }

    /// Unit tangent pointing from the first to the second endpoint of `key`.
    pub fn tangent(&self, tri: &Triangulation) -> Point {
        let a = tri.vertex_coord(self.vertices[0]);
        let b = tri.vertex_coord(self.vertices[1]);
        [(b[0] - a[0]) / self.length, (b[1] - a[1]) / self.length]
    }
}

struct Inner {
    forest: Arc<Forest>,
    elements: Vec<ElemId>,
    elem_index: HashMap<ElemId, usize>,
    /// Local vertex indices in NVB order.
    elem_vertices: Vec<[usize; 3]>,
    /// Side `k` is opposite local vertex `k`; side 0 is the refinement edge.
    elem_sides: Vec<[usize; 3]>,
    areas: Vec<f64>,
    grad_lambda: Vec<[Point; 3]>,
    vertices: Vec<VertexId>,
    coords: Vec<Point>,
    vertex_index: HashMap<VertexId, usize>,
    boundary_vertex: Vec<bool>,
    sides: Vec<Side>,
    side_index: HashMap<SideKey, usize>,
}

/// Immutable conforming leaf cut through a [`Forest`].
///
/// Elements are sorted by their forest id, sides by their [`SideKey`]; local
/// indices are therefore deterministic for a given leaf set. Cloning is cheap.
#[derive(Clone)]
pub struct Triangulation {
    inner: Arc<Inner>,
}

impl fmt::Debug for Triangulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Triangulation")
            .field("forest", &self.inner.forest.id())
            .field("elements", &self.num_elements())
            .field("sides", &self.num_sides())
            .finish()
    }
}

impl PartialEq for Triangulation {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (Arc::ptr_eq(&self.inner.forest, &other.inner.forest) && self.inner.elements == other.inner.elements)
    }
}

impl Eq for Triangulation {}

impl Triangulation {
    /// Builds the snapshot for the given leaf set, checking conformity.
    pub fn from_leaves(forest: Arc<Forest>, mut leaves: Vec<ElemId>) -> Result<Self> {
        leaves.sort_unstable();
        leaves.dedup();
        let data = forest.read();

        let mut vertex_index: HashMap<VertexId, usize> = HashMap::with_capacity(leaves.len());
        let mut vertices = Vec::new();
        let mut coords = Vec::new();
        let mut elem_vertices = Vec::with_capacity(leaves.len());
        for &e in &leaves {
            let verts = data.node(e).verts;
            elem_vertices.push(verts.map(|v| {
                *vertex_index.entry(v).or_insert_with(|| {
                    vertices.push(v);
                    coords.push(data.coord(v));
                    vertices.len() - 1
                })
            }));
        }

        let mut incidences: Vec<(SideKey, usize, usize)> = Vec::with_capacity(3 * leaves.len());
        for (t, ev) in elem_vertices.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (vertices[ev[(k + 1) % 3]], vertices[ev[(k + 2) % 3]]);
                incidences.push((SideKey::new(a, b), t, k));
            }
        }
        incidences.sort_unstable();

        let mut sides: Vec<Side> = Vec::with_capacity(incidences.len() / 2 + leaves.len());
        let mut elem_sides = vec![[usize::MAX; 3]; leaves.len()];
        let mut i = 0;
        while i < incidences.len() {
            let key = incidences[i].0;
            let mut j = i;
            while j < incidences.len() && incidences[j].0 == key {
                j += 1;
            }
            if j - i > 2 {
                return Err(Error::NonConforming { elements: incidences[i..j].iter().map(|x| x.1).collect() });
            }
            let s = sides.len();
            let [a, b] = key.endpoints();
            let (la, lb) = (vertex_index[&a], vertex_index[&b]);
            let (pa, pb) = (coords[la], coords[lb]);
            let boundary = j - i == 1;
            let e0 = incidences[i].1;
            let e1 = if boundary { e0 } else { incidences[i + 1].1 };
            for inc in &incidences[i..j] {
                elem_sides[inc.1][inc.2] = s;
            }
            sides.push(Side {
                key,
                vertices: [la, lb],
                midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
                length: ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt(),
                elements: [e0.min(e1), e0.max(e1)],
                boundary,
            });
            i = j;
        }

        // A single-element side whose bisection midpoint is present is a hanging node.
        for side in sides.iter().filter(|s| s.boundary) {
            if let Some(m) = data.midpoints.get(&side.key) {
                if let Some(&lm) = vertex_index.get(m) {
                    let mut elements = vec![side.elements[0]];
                    elements.extend(
                        elem_vertices.iter().enumerate().filter(|(_, ev)| ev.contains(&lm)).map(|(t, _)| t),
                    );
                    return Err(Error::NonConforming { elements });
                }
            }
        }
        drop(data);

        let mut boundary_vertex = vec![false; vertices.len()];
        for s in sides.iter().filter(|s| s.boundary) {
            boundary_vertex[s.vertices[0]] = true;
            boundary_vertex[s.vertices[1]] = true;
        }

        let mut areas = Vec::with_capacity(leaves.len());
        let mut grad_lambda = Vec::with_capacity(leaves.len());
        for (t, ev) in elem_vertices.iter().enumerate() {
            let p = ev.map(|v| coords[v]);
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            if det.abs() <= 0.0 {
                return Err(Error::DegenerateElement { element: t });
            }
            areas.push(0.5 * det.abs());
            // grad λ_k = rot(p_{k+2} - p_{k+1}) / det
            let mut g = [[0.0; 2]; 3];
            for k in 0..3 {
                let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                g[k] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
            }
            grad_lambda.push(g);
        }

        let side_index = sides.iter().enumerate().map(|(i, s)| (s.key, i)).collect();
        let elem_index = leaves.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        Ok(Triangulation {
            inner: Arc::new(Inner {
                forest,
                elements: leaves,
                elem_index,
                elem_vertices,
                elem_sides,
                areas,
                grad_lambda,
                vertices,
                coords,
                vertex_index,
                boundary_vertex,
                sides,
                side_index,
            }),
        })
    }

    pub fn forest(&self) -> &Arc<Forest> {
        &self.inner.forest
    }

    pub fn same_forest(&self, other: &Triangulation) -> bool {
        Arc::ptr_eq(&self.inner.forest, &other.inner.forest)
    }

    pub fn num_elements(&self) -> usize {
        self.inner.elements.len()
    }

    pub fn num_sides(&self) -> usize {
        self.inner.sides.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.inner.vertices.len()
    }

    pub fn elements(&self) -> &[ElemId] {
        &self.inner.elements
    }

    pub fn element_id(&self, t: usize) -> ElemId {
        self.inner.elements[t]
    }

    pub fn element_index(&self, e: ElemId) -> Option<usize> {
        self.inner.elem_index.get(&e).copied()
    }

    pub fn contains_element(&self, e: ElemId) -> bool {
        self.inner.elem_index.contains_key(&e)
    }

    /// Local vertex indices in NVB order.
    pub fn element_vertices(&self, t: usize) -> [usize; 3] {
        self.inner.elem_vertices[t]
    }

    pub fn element_coords(&self, t: usize) -> [Point; 3] {
        self.inner.elem_vertices[t].map(|v| self.inner.coords[v])
    }

    /// Local side indices; side `k` is opposite vertex `k`, side 0 is the
    /// refinement edge.
    pub fn element_sides(&self, t: usize) -> [usize; 3] {
        self.inner.elem_sides[t]
    }

    pub fn refinement_edge(&self, t: usize) -> usize {
        self.inner.elem_sides[t][0]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.inner.areas[t]
    }

    /// `h_T = |T|^{1/2}`.
    pub fn h(&self, t: usize) -> f64 {
        self.inner.areas[t].sqrt()
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let p = self.element_coords(t);
        (0..3)
            .map(|k| {
                let (a, b) = (p[k], p[(k + 1) % 3]);
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        self.inner.areas.iter().sum()
    }

    /// Gradients of the barycentric coordinates, ordered like the vertices.
    pub fn grad_lambda(&self, t: usize) -> &[Point; 3] {
        &self.inner.grad_lambda[t]
    }

    pub fn centroid(&self, t: usize) -> Point {
        let p = self.element_coords(t);
        [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
    }

    /// Barycentric coordinates of `x` with respect to element `t`.
    pub fn barycentric(&self, t: usize, x: Point) -> [f64; 3] {
        let p = self.element_coords(t);
        let g = self.grad_lambda(t);
        let l1 = g[1][0] * (x[0] - p[0][0]) + g[1][1] * (x[1] - p[0][1]);
        let l2 = g[2][0] * (x[0] - p[0][0]) + g[2][1] * (x[1] - p[0][1]);
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn vertex_id(&self, v: usize) -> VertexId {
        self.inner.vertices[v]
    }

    pub fn vertex_index(&self, v: VertexId) -> Option<usize> {
        self.inner.vertex_index.get(&v).copied()
    }

    pub fn vertex_coord(&self, v: usize) -> Point {
        self.inner.coords[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.inner.boundary_vertex[v]
    }

    pub fn sides(&self) -> &[Side] {
        &self.inner.sides
    }

    pub fn side(&self, s: usize) -> &Side {
        &self.inner.sides[s]
    }

    pub fn side_index(&self, key: SideKey) -> Option<usize> {
        self.inner.side_index.get(&key).copied()
    }

    pub fn contains_side(&self, key: SideKey) -> bool {
        self.inner.side_index.contains_key(&key)
    }

    pub(crate) fn require_side(&self, key: SideKey) -> Result<usize> {
        self.side_index(key).ok_or(Error::UnknownSide(key))
    }

    pub fn side_keys(&self) -> BTreeSet<SideKey> {
        self.inner.sides.iter().map(|s| s.key).collect()
    }

    /// Position of side `s` within element `t`, if `s` is a side of `t`.
    pub fn local_side(&self, t: usize, s: usize) -> Option<usize> {
        self.inner.elem_sides[t].iter().position(|&x| x == s)
    }

    /// Node patch (star) of every vertex.
    pub fn vertex_patches(&self) -> Vec<Vec<usize>> {
        let mut patches = vec![Vec::new(); self.num_vertices()];
        for (t, ev) in self.inner.elem_vertices.iter().enumerate() {
            for &v in ev {
                patches[v].push(t);
            }
        }
        patches
    }

    /// `#(T ∖ T_⊥)`: leaves that are not roots of the forest.
    pub fn count_new_elements(&self) -> usize {
        let data = self.inner.forest.read();
        self.inner.elements.iter().filter(|&&e| data.node(e).parent.is_some()).count()
    }

    /// Number of vertices created by bisection (edge bisections from `T_⊥`).
    pub fn count_bisected_edges(&self) -> usize {
        let data = self.inner.forest.read();
        let roots: std::collections::HashSet<VertexId> =
            data.roots.iter().flat_map(|&r| data.node(r).verts).collect();
        self.inner.vertices.iter().filter(|v| !roots.contains(v)).count()
    }

    /// Ratio `diam(T)/|T|^{1/2}` maximized over the elements.
    pub fn shape_regularity(&self) -> f64 {
        (0..self.num_elements()).map(|t| self.diameter(t) / self.h(t)).fold(0.0, f64::max)
    }
}
