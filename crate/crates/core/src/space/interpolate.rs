//! Nonconforming interpolation `I_T` and the piecewise constant projection.

use super::{CrFunction, P0Function};
use crate::error::{Error, Result};
use crate::mesh::{Point, SideKey, Triangulation};
use crate::quadrature::{integrate_segment, TriangleRule};

/// Gauss points per side for closure inputs (exact up to degree 15).
const EDGE_GAUSS_POINTS: usize = 8;

/// `(I_T v)(m_S) = |S|^{-1} ∫_S v ds` for a field given by closure.
///
/// The result carries whatever boundary values the field has; for
/// `v ∈ H¹_0` these vanish.
pub fn interpolate_closure(tri: &Triangulation, components: usize, f: impl Fn(Point) -> [f64; 2]) -> CrFunction {
    let ns = tri.num_sides();
    let mut coeffs = vec![0.0; components * ns];
    for (s, side) in tri.sides().iter().enumerate() {
        let (a, b) = (tri.vertex_coord(side.vertices[0]), tri.vertex_coord(side.vertices[1]));
        for c in 0..components {
            coeffs[c * ns + s] = integrate_segment(a, b, EDGE_GAUSS_POINTS, |x| f(x)[c]) / side.length;
        }
    }
    CrFunction::from_coeffs_free(tri, components, coeffs).expect("length matches")
}

/// Decomposes side `key` of a coarse triangulation into sides of `fine`.
pub(crate) fn sub_sides(fine: &Triangulation, key: SideKey, out: &mut Vec<usize>) -> Result<()> {
    if let Some(s) = fine.side_index(key) {
        out.push(s);
        return Ok(());
    }
    let m = fine.forest().midpoint(key).ok_or(Error::NotRefinement)?;
    let [a, b] = key.endpoints();
    sub_sides(fine, SideKey::new(a, m), out)?;
    sub_sides(fine, SideKey::new(m, b), out)
}

/// `I_T v` for `v ∈ CR(T★)` with `T ≤ T★`.
///
/// Side integrals are exact: a CR function on a sub-side has mean equal to
/// its coefficient from either neighbour, so `∫_S v = Σ |s| v(m_s)`.
pub fn interpolate_cr(tri: &Triangulation, v: &CrFunction) -> Result<CrFunction> {
    if v.tri() == tri {
        return Ok(v.clone());
    }
    if !tri.same_forest(v.tri()) {
        return Err(Error::ForeignForest);
    }
    let fine = v.tri();
    let ns = tri.num_sides();
    let nc = v.components();
    let mut coeffs = vec![0.0; nc * ns];
    let mut subs = Vec::new();
    for (s, side) in tri.sides().iter().enumerate() {
        subs.clear();
        sub_sides(fine, side.key, &mut subs)?;
        for c in 0..nc {
            let integral: f64 = subs.iter().map(|&f| fine.side(f).length * v.coeff(f, c)).sum();
            coeffs[c * ns + s] = integral / side.length;
        }
    }
    CrFunction::from_coeffs_free(tri, nc, coeffs)
}

/// Elementwise averages `Π_T q` of a closure.
pub fn project_p0_closure(tri: &Triangulation, rule: &TriangleRule, q: impl Fn(Point) -> f64) -> P0Function {
    let values = (0..tri.num_elements())
        .map(|t| rule.integrate(&tri.element_coords(t), tri.area(t), &q) / tri.area(t))
        .collect();
    P0Function::new(tri, values).expect("one value per element")
}

/// `Π_T q` for `q` piecewise constant on a refinement of `tri`
/// (area-weighted averages). Identity when `q` already lives on `tri`.
pub fn project_p0(tri: &Triangulation, q: &P0Function) -> Result<P0Function> {
    if q.tri() == tri {
        return Ok(q.clone());
    }
    let parent = tri.coarse_parent_map(q.tri())?;
    let mut sums = vec![0.0; tri.num_elements()];
    for (k, &t) in parent.iter().enumerate() {
        sums[t] += q.tri().area(k) * q.value(k);
    }
    let values = sums.iter().enumerate().map(|(t, s)| s / tri.area(t)).collect();
    P0Function::new(tri, values)
}
