//! Enrichment `E_T : CR_T → H¹_0` and the composition `I_{T★} ∘ E_T`.

use super::CrFunction;
use crate::error::{Error, Result};
use crate::mesh::{Point, Triangulation};

/// Continuous piecewise quadratic function in Lagrange form (values at
/// vertices and side midpoints), component-major like [`CrFunction`].
#[derive(Clone, Debug)]
pub struct P2Function {
    tri: Triangulation,
    components: usize,
    vertex_values: Vec<f64>,
    side_values: Vec<f64>,
}

impl P2Function {
    pub fn tri(&self) -> &Triangulation {
        &self.tri
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn vertex_value(&self, v: usize, c: usize) -> f64 {
        self.vertex_values[c * self.tri.num_vertices() + v]
    }

    pub fn side_value(&self, s: usize, c: usize) -> f64 {
        self.side_values[c * self.tri.num_sides() + s]
    }

    fn local(&self, t: usize, c: usize) -> ([f64; 3], [f64; 3]) {
        let vv = self.tri.element_vertices(t).map(|v| self.vertex_value(v, c));
        let sv = self.tri.element_sides(t).map(|s| self.side_value(s, c));
        (vv, sv)
    }

    /// Value at barycentric point `l` of element `t`.
    pub fn eval(&self, t: usize, l: [f64; 3], c: usize) -> f64 {
        let (vv, sv) = self.local(t, c);
        let mut out = 0.0;
        for k in 0..3 {
            out += vv[k] * l[k] * (2.0 * l[k] - 1.0);
            // side k joins vertices k+1 and k+2
            out += sv[k] * 4.0 * l[(k + 1) % 3] * l[(k + 2) % 3];
        }
        out
    }

    pub fn eval_point(&self, t: usize, x: Point, c: usize) -> f64 {
        self.eval(t, self.tri.barycentric(t, x), c)
    }

    pub fn gradient(&self, t: usize, l: [f64; 3], c: usize) -> Point {
        let (vv, sv) = self.local(t, c);
        let g = self.tri.grad_lambda(t);
        let mut out = [0.0; 2];
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let dv = vv[k] * (4.0 * l[k] - 1.0);
            for d in 0..2 {
                out[d] += dv * g[k][d] + sv[k] * 4.0 * (l[j] * g[i][d] + l[i] * g[j][d]);
            }
        }
        out
    }

    /// `∫_T ∇w` (exact: the gradient is affine, the midpoint rule suffices).
    pub fn gradient_integral(&self, t: usize, c: usize) -> Point {
        let a = self.tri.area(t);
        let mut out = [0.0; 2];
        for l in [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]] {
            let g = self.gradient(t, l, c);
            out[0] += a * g[0] / 3.0;
            out[1] += a * g[1] / 3.0;
        }
        out
    }
}

/// `E_T v`: vertex averaging into conforming P1 (zero on ∂Ω) plus one
/// quadratic edge bubble `4λ_aλ_b` per interior side restoring the side
/// means of `v`.
pub fn enrich(tri: &Triangulation, v: &CrFunction) -> Result<P2Function> {
    v.ensure_on(tri)?;
    if let Some(s) = v.boundary_violation(1e-14) {
        return Err(Error::Invariant(format!("enrichment needs CR_0 input; boundary side {}", tri.side(s).key)));
    }
    let (nv, ns, nc) = (tri.num_vertices(), tri.num_sides(), v.components());
    let patches = tri.vertex_patches();
    let mut vertex_values = vec![0.0; nc * nv];
    for (z, patch) in patches.iter().enumerate() {
        if tri.is_boundary_vertex(z) {
            continue;
        }
        for c in 0..nc {
            let sum: f64 = patch
                .iter()
                .map(|&t| {
                    let k = tri.element_vertices(t).iter().position(|&x| x == z).expect("patch element holds z");
                    v.vertex_value(t, k, c)
                })
                .sum();
            vertex_values[c * nv + z] = sum / patch.len() as f64;
        }
    }
    let mut side_values = vec![0.0; nc * ns];
    for (s, side) in tri.sides().iter().enumerate() {
        if side.boundary {
            continue;
        }
        for c in 0..nc {
            let p1_mid = 0.5 * (vertex_values[c * nv + side.vertices[0]] + vertex_values[c * nv + side.vertices[1]]);
            // ∫_S bubble ds = (2/3) h_S, bubble value 1 at the midpoint
            let alpha = (v.coeff(s, c) - p1_mid) * side.length / (2.0 / 3.0 * side.length);
            side_values[c * ns + s] = p1_mid + alpha;
        }
    }
    Ok(P2Function { tri: tri.clone(), components: nc, vertex_values, side_values })
}

/// `I_{T★} w` for a continuous piecewise quadratic `w` on `T ≤ T★`
/// (Simpson's rule per side of `T★`, exact for quadratics).
pub fn interpolate_p2(fine: &Triangulation, w: &P2Function) -> Result<CrFunction> {
    let coarse = w.tri();
    let parent = coarse.coarse_parent_map(fine)?;
    let (ns, nc) = (fine.num_sides(), w.components());
    let mut coeffs = vec![0.0; nc * ns];
    for (s, side) in fine.sides().iter().enumerate() {
        let t = parent[side.elements[0]];
        let (a, b) = (fine.vertex_coord(side.vertices[0]), fine.vertex_coord(side.vertices[1]));
        for c in 0..nc {
            let fa = w.eval_point(t, a, c);
            let fb = w.eval_point(t, b, c);
            let fm = w.eval_point(t, side.midpoint, c);
            coeffs[c * ns + s] = (fa + 4.0 * fm + fb) / 6.0;
        }
    }
    CrFunction::from_coeffs_free(fine, nc, coeffs)
}

/// `I_T w` for a continuous piecewise quadratic `w` living on a
/// refinement of `coarse`. Each side of `coarse` is split into sides of
/// `w`'s triangulation, integrated exactly by Simpson's rule.
pub fn interpolate_p2_coarse(coarse: &Triangulation, w: &P2Function) -> Result<CrFunction> {
    let fine = w.tri();
    if !coarse.is_coarsening_of(fine)? {
        return Err(Error::NotRefinement);
    }
    let (ns, nc) = (coarse.num_sides(), w.components());
    let mut coeffs = vec![0.0; nc * ns];
    let mut subs = Vec::new();
    for (s, side) in coarse.sides().iter().enumerate() {
        subs.clear();
        super::interpolate::sub_sides(fine, side.key, &mut subs)?;
        for c in 0..nc {
            let mut integral = 0.0;
            for &f in &subs {
                let fs = fine.side(f);
                let t = fs.elements[0];
                let (a, b) = (fine.vertex_coord(fs.vertices[0]), fine.vertex_coord(fs.vertices[1]));
                let simpson = (w.eval_point(t, a, c) + 4.0 * w.eval_point(t, fs.midpoint, c) + w.eval_point(t, b, c)) / 6.0;
                integral += fs.length * simpson;
            }
            coeffs[c * ns + s] = integral / side.length;
        }
    }
    CrFunction::from_coeffs_free(coarse, nc, coeffs)
}

/// `I_{T★} ∘ E_T`.
pub fn enrich_then_interpolate(coarse: &Triangulation, fine: &Triangulation, v: &CrFunction) -> Result<CrFunction> {
    if !coarse.is_coarsening_of(fine)? {
        return Err(Error::NotRefinement);
    }
    if coarse == fine {
        v.ensure_on(coarse)?;
        return Ok(v.clone());
    }
    interpolate_p2(fine, &enrich(coarse, v)?)
}
