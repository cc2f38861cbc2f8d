//! Lattice operations on conforming refinements of one forest.
//!
//! A triangulation is determined by its set of interior (bisected) forest
//! nodes, which is closed under taking ancestors. The finest common
//! coarsening is the intersection of those sets, the coarsest common
//! refinement their union.

use std::collections::HashSet;

use super::forest::ElemId;
use super::Triangulation;
use crate::error::{Error, Result};

impl Triangulation {
    /// Forest nodes strictly above the leaves of this triangulation.
    pub fn interior_nodes(&self) -> HashSet<ElemId> {
        let data = self.forest().read();
        let mut set = HashSet::with_capacity(self.num_elements());
        for &e in self.elements() {
            let mut cur = data.node(e).parent;
            while let Some(p) = cur {
                if !set.insert(p) {
                    break;
                }
                cur = data.node(p).parent;
            }
        }
        set
    }

    /// `self ≤ other`: `other` is a refinement of `self`.
    pub fn is_coarsening_of(&self, other: &Triangulation) -> Result<bool> {
        if !self.same_forest(other) {
            return Err(Error::ForeignForest);
        }
        let data = self.forest().read();
        for &e in other.elements() {
            let mut cur = Some(e);
            loop {
                match cur {
                    Some(c) if self.contains_element(c) => break,
                    Some(c) => cur = data.node(c).parent,
                    None => return Ok(false),
                }
            }
        }
        Ok(true)
    }

    /// For every element of the refinement `fine`, the local index of the
    /// element of `self` containing it.
    pub fn coarse_parent_map(&self, fine: &Triangulation) -> Result<Vec<usize>> {
        if !self.same_forest(fine) {
            return Err(Error::ForeignForest);
        }
        let data = self.forest().read();
        fine.elements()
            .iter()
            .map(|&e| {
                let mut cur = Some(e);
                while let Some(c) = cur {
                    if let Some(t) = self.element_index(c) {
                        return Ok(t);
                    }
                    cur = data.node(c).parent;
                }
                Err(Error::NotRefinement)
            })
            .collect()
    }

    /// Elements of `self` that are not elements of `other` (`T ∖ T★`).
    pub fn elements_not_in(&self, other: &Triangulation) -> Vec<usize> {
        (0..self.num_elements()).filter(|&t| !other.contains_element(self.element_id(t))).collect()
    }
}

fn from_interior(reference: &Triangulation, interior: &HashSet<ElemId>) -> Result<Triangulation> {
    let forest = reference.forest().clone();
    let mut leaves = Vec::new();
    {
        let data = forest.read();
        let mut stack: Vec<ElemId> = data.roots.iter().rev().copied().collect();
        while let Some(e) = stack.pop() {
            if interior.contains(&e) {
                let ch = data.node(e).children.expect("interior node has children");
                stack.push(ch[1]);
                stack.push(ch[0]);
            } else {
                leaves.push(e);
            }
        }
    }
    Triangulation::from_leaves(forest, leaves)
}

/// Finest common coarsening `T1 ∧ T2`.
pub fn meet(a: &Triangulation, b: &Triangulation) -> Result<Triangulation> {
    if !a.same_forest(b) {
        return Err(Error::ForeignForest);
    }
    let (ia, ib) = (a.interior_nodes(), b.interior_nodes());
    let both: HashSet<ElemId> = ia.intersection(&ib).copied().collect();
    from_interior(a, &both)
}

/// Coarsest common refinement `T1 ∨ T2`.
pub fn join(a: &Triangulation, b: &Triangulation) -> Result<Triangulation> {
    if !a.same_forest(b) {
        return Err(Error::ForeignForest);
    }
    let mut all = a.interior_nodes();
    all.extend(b.interior_nodes());
    from_interior(a, &all)
}

pub fn meet_all(ts: &[Triangulation]) -> Result<Triangulation> {
    let (first, rest) = ts.split_first().ok_or_else(|| Error::InvalidParameter("empty list".into()))?;
    rest.iter().try_fold(first.clone(), |acc, t| meet(&acc, t))
}

pub fn join_all(ts: &[Triangulation]) -> Result<Triangulation> {
    let (first, rest) = ts.split_first().ok_or_else(|| Error::InvalidParameter("empty list".into()))?;
    rest.iter().try_fold(first.clone(), |acc, t| join(&acc, t))
}

/// Lower diamond test: `lower` is the meet and `upper` the join of `members`,
/// and the coarsening areas `Ω(T_j ∖ T∨)` are pairwise disjoint.
pub fn is_lower_diamond(lower: &Triangulation, upper: &Triangulation, members: &[Triangulation]) -> bool {
    if members.is_empty() || members.iter().any(|t| !t.same_forest(lower)) || !lower.same_forest(upper) {
        return false;
    }
    match (meet_all(members), join_all(members)) {
        (Ok(m), Ok(j)) if &m == lower && &j == upper => {}
        _ => return false,
    }
    let forest = upper.forest();
    let coarsened: Vec<Vec<ElemId>> = members
        .iter()
        .map(|t| t.elements_not_in(upper).into_iter().map(|i| t.element_id(i)).collect())
        .collect();
    for i in 0..coarsened.len() {
        for j in i + 1..coarsened.len() {
            for &a in &coarsened[i] {
                for &b in &coarsened[j] {
                    if forest.is_ancestor_or_self(a, b) || forest.is_ancestor_or_self(b, a) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// `T̂ ∧ T★` with its defining properties checked.
pub fn intermediate_triangulation(coarse: &Triangulation, fine: &Triangulation) -> Result<Triangulation> {
    if !coarse.is_coarsening_of(fine)? {
        return Err(Error::NotRefinement);
    }
    let hat = coarse.uniform_refine();
    let inter = meet(&hat, fine)?;

    let parent = coarse.coarse_parent_map(&inter)?;
    for (k, &t) in parent.iter().enumerate() {
        let (hk, ht) = (inter.h(k), coarse.h(t));
        if hk > ht * (1.0 + 1e-12) || ht > 4.0 * hk * (1.0 + 1e-12) {
            return Err(Error::Invariant(format!("mesh-size equivalence fails on intermediate element {k}")));
        }
    }
    for t in 0..coarse.num_elements() {
        let e = coarse.element_id(t);
        if fine.contains_element(e) != inter.contains_element(e) {
            return Err(Error::Invariant(format!("T∩T★ differs from T∩(T̂∧T★) at element {t}")));
        }
    }
    for s in coarse.sides() {
        if fine.contains_side(s.key) != inter.contains_side(s.key) {
            return Err(Error::Invariant(format!("E(T)∩E(T★) differs from E(T)∩E(T̂∧T★) at side {}", s.key)));
        }
    }
    Ok(inter)
}

/// `#(T_k ∖ T_⊥) / Σ_{j<k} #M_j`; `None` when nothing was marked.
pub fn bdd_ratio(new_elements: usize, marked_total: usize) -> Option<f64> {
    if marked_total == 0 {
        None
    } else {
        Some(new_elements as f64 / marked_total as f64)
    }
}
