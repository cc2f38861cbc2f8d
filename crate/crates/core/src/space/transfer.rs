//! Transfer operator `J_T^{T★} : CR_T → CR_{T★}`.
//!
//! Built on the intermediate triangulation `K = T̂ ∧ T★`. At every node `z`
//! of `K` the elements of the star are grouped into classes connected across
//! sides of `K` that are not sides of `T`; an auxiliary piecewise affine
//! function takes the class average of the traces of `v` at `z` (zero on
//! ∂Ω). CR coefficients on `K` keep `v(m_S)` on sides of `T` and use the
//! auxiliary function elsewhere.

use super::CrFunction;
use crate::error::{Error, Result};
use crate::mesh::{intermediate_triangulation, Triangulation};

/// Everything `transfer` computes, for inspection by the checks.
#[derive(Clone, Debug)]
pub struct TransferResult {
    /// `T̂ ∧ T★`.
    pub intermediate: Triangulation,
    /// `J v` as a CR function of the intermediate triangulation.
    pub on_intermediate: CrFunction,
    /// `J v` represented on `T★`.
    pub on_fine: CrFunction,
    /// Largest midpoint discontinuity of `J v` across sides of `T★`
    /// (zero iff `J v ∈ CR(T★)`).
    pub fine_cr_defect: f64,
    /// Largest disagreement of the auxiliary function across sides of `K`
    /// that are not sides of `T` (zero by construction of the classes).
    pub auxiliary_defect: f64,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let n = self.0[c];
            self.0[c] = r;
            c = n;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub fn transfer_detailed(coarse: &Triangulation, fine: &Triangulation, v: &CrFunction) -> Result<TransferResult> {
    v.ensure_on(coarse)?;
    let inter = intermediate_triangulation(coarse, fine)?;
    let parent = coarse.coarse_parent_map(&inter)?;
    let nc = v.components();
    let (nk, ns) = (inter.num_elements(), inter.num_sides());

    // Sides of K along which classes connect: interior and not a side of T.
    let connects: Vec<bool> =
        inter.sides().iter().map(|s| !s.boundary && !coarse.contains_side(s.key)).collect();

    // Auxiliary function: aux[c][t][k] at local vertex k of element t of K.
    let mut aux = vec![vec![[0.0; 3]; nk]; nc];
    let patches = inter.vertex_patches();
    let mut uf = UnionFind((0..nk).collect());
    for (z, star) in patches.iter().enumerate() {
        if inter.is_boundary_vertex(z) {
            continue;
        }
        for &t in star {
            uf.0[t] = t;
        }
        for &t in star {
            for (k, &s) in inter.element_sides(t).iter().enumerate() {
                // sides through z are those not opposite z
                if inter.element_vertices(t)[k] == z || !connects[s] {
                    continue;
                }
                let side = inter.side(s);
                uf.union(side.elements[0], side.elements[1]);
            }
        }
        let local_k = |t: usize| inter.element_vertices(t).iter().position(|&x| x == z).expect("star holds z");
        for c in 0..nc {
            let traces: Vec<(usize, f64)> = star
                .iter()
                .map(|&t| {
                    let x = inter.vertex_coord(z);
                    (uf.find(t), v.eval_point(parent[t], x, c))
                })
                .collect();
            for (i, &t) in star.iter().enumerate() {
                let class = traces[i].0;
                let (sum, count) = traces
                    .iter()
                    .filter(|(r, _)| *r == class)
                    .fold((0.0, 0usize), |(s, n), (_, val)| (s + val, n + 1));
                aux[c][t][local_k(t)] = sum / count as f64;
            }
        }
    }

    let mut coeffs = vec![0.0; nc * ns];
    let mut auxiliary_defect: f64 = 0.0;
    for (s, side) in inter.sides().iter().enumerate() {
        if let Some(cs) = coarse.side_index(side.key) {
            for c in 0..nc {
                coeffs[c * ns + s] = v.coeff(cs, c);
            }
            continue;
        }
        for c in 0..nc {
            let mid = |t: usize| {
                let [a, b] = side.vertices.map(|x| {
                    let k = inter.element_vertices(t).iter().position(|&y| y == x).expect("side vertex");
                    aux[c][t][k]
                });
                0.5 * (a + b)
            };
            let first = mid(side.elements[0]);
            if !side.boundary {
                auxiliary_defect = auxiliary_defect.max((first - mid(side.elements[1])).abs());
            }
            coeffs[c * ns + s] = first;
        }
    }
    let on_intermediate = CrFunction::from_coeffs_free(&inter, nc, coeffs)?;

    // Represent on T★: J v is affine on each element of K ≤ T★.
    let kparent = inter.coarse_parent_map(fine)?;
    let nf = fine.num_sides();
    let mut fine_coeffs = vec![0.0; nc * nf];
    let mut fine_cr_defect: f64 = 0.0;
    for (s, side) in fine.sides().iter().enumerate() {
        for c in 0..nc {
            let val = |t: usize| on_intermediate.eval_point(kparent[t], side.midpoint, c);
            let first = val(side.elements[0]);
            if !side.boundary {
                fine_cr_defect = fine_cr_defect.max((first - val(side.elements[1])).abs());
            }
            fine_coeffs[c * nf + s] = first;
        }
    }
    let on_fine = CrFunction::from_coeffs_free(fine, nc, fine_coeffs)?;
    Ok(TransferResult { intermediate: inter, on_intermediate, on_fine, fine_cr_defect, auxiliary_defect })
}

/// `J_T^{T★} v ∈ CR(T★)`; fails if the result is not a CR function of `T★`.
pub fn transfer(coarse: &Triangulation, fine: &Triangulation, v: &CrFunction) -> Result<CrFunction> {
    let r = transfer_detailed(coarse, fine, v)?;
    let scale = v.coeffs().iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if r.fine_cr_defect > 1e-10 * scale {
        return Err(Error::Invariant(format!("transfer result not in CR(T★): defect {:e}", r.fine_cr_defect)));
    }
    Ok(r.on_fine)
}
