//! REFINE and `refd` via the NVB conformity closure.
//!
//! Bisecting a side `S` forces every element adjacent to `S` to bisect its
//! refinement edge first, so the set of sides of `T` bisected in the
//! coarsest refinement is the closure of the marked sides under
//! "side → refinement edges of its adjacent elements". Every element of `T`
//! then splits into 2, 3 or 4 children in a single pass.

use std::collections::BTreeSet;

use super::forest::SideKey;
use super::Triangulation;
use crate::error::{Error, Result};

impl Triangulation {
    /// Closure of `seeds` (local side indices) as a membership mask.
    pub(crate) fn closure_mask(&self, seeds: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut mask = vec![false; self.num_sides()];
        let mut stack: Vec<usize> = Vec::new();
        for s in seeds {
            if !mask[s] {
                mask[s] = true;
                stack.push(s);
            }
        }
        while let Some(s) = stack.pop() {
            for &t in self.side(s).adjacent() {
                let r = self.refinement_edge(t);
                if !mask[r] {
                    mask[r] = true;
                    stack.push(r);
                }
            }
        }
        mask
    }

    /// `refd(T;S)` as sorted local side indices.
    pub fn refd_local(&self, s: usize) -> Vec<usize> {
        let mut out = vec![s];
        let mut i = 0;
        while i < out.len() {
            let cur = out[i];
            for &t in self.side(cur).adjacent() {
                let r = self.refinement_edge(t);
                if !out.contains(&r) {
                    out.push(r);
                }
            }
            i += 1;
        }
        out.sort_unstable();
        out
    }

    /// Sides of `T` that are bisected in the smallest refinement in which
    /// `S` is bisected: `E(T) ∖ E(REFINE(T;{S}))`.
    pub fn refd(&self, side: SideKey) -> Result<BTreeSet<SideKey>> {
        let s = self.require_side(side)?;
        Ok(self.refd_local(s).into_iter().map(|i| self.side(i).key).collect())
    }

    /// `refd` for every side, in local side order.
    pub fn refd_all(&self) -> Vec<Vec<usize>> {
        (0..self.num_sides()).map(|s| self.refd_local(s)).collect()
    }

    /// Coarsest conforming refinement in which no side of `marked` survives.
    pub fn refine<'a>(&self, marked: impl IntoIterator<Item = &'a SideKey>) -> Result<Triangulation> {
        let seeds = marked.into_iter().map(|&k| self.require_side(k)).collect::<Result<Vec<_>>>()?;
        Ok(self.refine_local(&seeds))
    }

    pub(crate) fn refine_local(&self, seeds: &[usize]) -> Triangulation {
        if seeds.is_empty() {
            return self.clone();
        }
        let bisect = self.closure_mask(seeds.iter().copied());
        self.refine_mask(&bisect)
    }

    /// Refines with an already closed mask of bisected sides.
    pub(crate) fn refine_mask(&self, bisect: &[bool]) -> Triangulation {
        let forest = self.forest().clone();
        let mut leaves = Vec::with_capacity(self.num_elements() + 2 * bisect.iter().filter(|&&b| b).count());
        {
            let mut data = forest.write();
            for t in 0..self.num_elements() {
                let e = self.element_id(t);
                let [ref_edge, opp1, opp2] = self.element_sides(t);
                if !bisect[ref_edge] {
                    debug_assert!(!bisect[opp1] && !bisect[opp2], "closure must include the refinement edge");
                    leaves.push(e);
                    continue;
                }
                // children (m, v1, v0) and (m, v0, v2) carry the old sides v1v0 (opp2) and v0v2 (opp1)
                // as their refinement edges
                let [c1, c2] = data.bisect(e);
                for (child, side) in [(c1, opp2), (c2, opp1)] {
                    if bisect[side] {
                        leaves.extend(data.bisect(child));
                    } else {
                        leaves.push(child);
                    }
                }
            }
        }
        Triangulation::from_leaves(forest, leaves).expect("NVB closure yields a conforming triangulation")
    }

    /// `T̂ = REFINE(T; E(T))`.
    pub fn uniform_refine(&self) -> Triangulation {
        self.refine_mask(&vec![true; self.num_sides()])
    }

    pub fn uniform_refine_times(&self, k: usize) -> Triangulation {
        (0..k).fold(self.clone(), |t, _| t.uniform_refine())
    }

    /// Bisects the leaf `t` together with its conformity closure.
    pub(crate) fn bisect_element(&self, t: usize) -> Triangulation {
        self.refine_local(&[self.refinement_edge(t)])
    }
}

/// Sides of `coarse` that are no longer sides of `fine`: `E(T) ∖ E(T★)`.
pub fn bisected_sides(coarse: &Triangulation, fine: &Triangulation) -> Result<Vec<usize>> {
    if !coarse.same_forest(fine) {
        return Err(Error::ForeignForest);
    }
    Ok((0..coarse.num_sides()).filter(|&s| !fine.contains_side(coarse.side(s).key)).collect())
}
