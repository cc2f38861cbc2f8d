//! Assembly and solution of the discrete Poisson and Stokes problems in
//! the Crouzeix–Raviart space with homogeneous Dirichlet data.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Point, Triangulation};
use crate::quadrature::TriangleRule;
use crate::space::{CrFunction, P0Function};
use crate::sparse::{self, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Poisson,
    Stokes,
}

impl ProblemKind {
    pub fn components(self) -> usize {
        match self {
            ProblemKind::Poisson => 1,
            ProblemKind::Stokes => 2,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Poisson => "poisson",
            ProblemKind::Stokes => "stokes",
        })
    }
}

type FieldFn = dyn Fn(Point) -> [f64; 2] + Send + Sync;

/// Right-hand side `f` (scalar) or `f` (2-vector). Scalar fields use the
/// first slot of the returned pair.
#[derive(Clone)]
pub struct RhsField {
    components: usize,
    eval: Arc<FieldFn>,
    degree: Option<u32>,
    load_rule: TriangleRule,
    square_rule: TriangleRule,
}

impl fmt::Debug for RhsField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RhsField").field("components", &self.components).field("degree", &self.degree).finish()
    }
}

impl RhsField {
    /// `degree` is the declared polynomial degree, `None` for general data.
    /// Load integrals `∫ f φ` use a rule exact for degree `d + 1`, squared
    /// norms a rule exact for `2d`; general data gets the degree-5 rule.
    pub fn new(components: usize, degree: Option<u32>, eval: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        assert!(components == 1 || components == 2);
        let (load_rule, square_rule) = match degree {
            Some(d) => (TriangleRule::for_degree(d + 1), TriangleRule::for_degree(2 * d)),
            None => (TriangleRule::degree5().clone(), TriangleRule::degree5().clone()),
        };
        RhsField { components, eval: Arc::new(eval), degree, load_rule, square_rule }
    }

    pub fn scalar(degree: Option<u32>, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(1, degree, move |x| [f(x), 0.0])
    }

    pub fn vector(degree: Option<u32>, f: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self::new(2, degree, f)
    }

    pub fn constant_scalar(c: f64) -> Self {
        Self::scalar(Some(0), move |_| c)
    }

    pub fn constant_vector(c: [f64; 2]) -> Self {
        Self::vector(Some(0), move |_| c)
    }

    pub fn zero(components: usize) -> Self {
        Self::new(components, Some(0), |_| [0.0, 0.0])
    }

    /// `s · f`.
    pub fn scaled(&self, s: f64) -> Self {
        let inner = self.eval.clone();
        let mut out = Self::new(self.components, self.degree, move |x| {
            let v = inner(x);
            [s * v[0], s * v[1]]
        });
        out.load_rule = self.load_rule.clone();
        out.square_rule = self.square_rule.clone();
        out
    }

    /// Replaces the load quadrature (for oracle comparisons).
    pub fn with_load_rule(mut self, rule: TriangleRule) -> Self {
        self.load_rule = rule;
        self
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn degree(&self) -> Option<u32> {
        self.degree
    }

    pub fn load_rule(&self) -> &TriangleRule {
        &self.load_rule
    }

    pub fn square_rule(&self) -> &TriangleRule {
        &self.square_rule
    }

    pub fn eval(&self, x: Point) -> [f64; 2] {
        (self.eval)(x)
    }

    pub fn component(&self, x: Point, c: usize) -> f64 {
        (self.eval)(x)[c]
    }

    /// `∫_T |f|²`.
    pub fn l2_sq_on(&self, tri: &Triangulation, t: usize) -> f64 {
        self.square_rule.integrate(&tri.element_coords(t), tri.area(t), |x| {
            let v = self.eval(x);
            (0..self.components).map(|c| v[c] * v[c]).sum()
        })
    }

    /// `‖h_T f‖²_T = |T| ∫_T |f|²` for every element.
    pub fn hf_sq(&self, tri: &Triangulation) -> Vec<f64> {
        (0..tri.num_elements()).into_par_iter().map(|t| tri.area(t) * self.l2_sq_on(tri, t)).collect()
    }

    /// Local load `∫_T f_c ψ_k` for the three sides of `t`.
    pub fn local_load(&self, tri: &Triangulation, t: usize, c: usize) -> [f64; 3] {
        let verts = tri.element_coords(t);
        let area = tri.area(t);
        let mut out = [0.0; 3];
        for ((x, w), l) in self.load_rule.map(&verts).zip(&self.load_rule.points) {
            let fx = self.component(x, c);
            for k in 0..3 {
                out[k] += area * w * fx * (1.0 - 2.0 * l[k]);
            }
        }
        out
    }

    /// `∫ f · v` for a CR function `v`.
    pub fn integrate_against(&self, v: &CrFunction) -> f64 {
        let tri = v.tri();
        (0..tri.num_elements())
            .into_par_iter()
            .map(|t| {
                let mut s = 0.0;
                for c in 0..self.components.min(v.components()) {
                    let m = v.local(t, c);
                    let b = self.local_load(tri, t, c);
                    s += (0..3).map(|k| m[k] * b[k]).sum::<f64>();
                }
                s
            })
            .sum()
    }
}

/// Local stiffness `(∫_T ∇ψ_j·∇ψ_k)_{jk}` of the CR basis on the triangle
/// with vertices `p`; side `k` is opposite vertex `k`.
pub fn local_stiffness(p: [Point; 3]) -> [[f64; 3]; 3] {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let area = 0.5 * det.abs();
    let g: [Point; 3] = std::array::from_fn(|k| {
        let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        [(a[1] - b[1]) / det, (b[0] - a[0]) / det]
    });
    let mut m = [[0.0; 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            m[j][k] = 4.0 * area * (g[j][0] * g[k][0] + g[j][1] * g[k][1]);
        }
    }
    m
}

/// Free-DOF numbering: interior sides, component-major.
#[derive(Clone, Debug)]
pub struct DofMap {
    components: usize,
    num_sides: usize,
    index: Vec<Option<usize>>,
    free_sides: Vec<usize>,
}

impl DofMap {
    pub fn new(tri: &Triangulation, components: usize) -> Self {
        let free_sides: Vec<usize> = (0..tri.num_sides()).filter(|&s| !tri.side(s).boundary).collect();
        let ns = tri.num_sides();
        let mut index = vec![None; components * ns];
        for c in 0..components {
            for (i, &s) in free_sides.iter().enumerate() {
                index[c * ns + s] = Some(c * free_sides.len() + i);
            }
        }
        DofMap { components, num_sides: ns, index, free_sides }
    }

    pub fn dof(&self, side: usize, comp: usize) -> Option<usize> {
        self.index[comp * self.num_sides + side]
    }

    pub fn num_free(&self) -> usize {
        self.components * self.free_sides.len()
    }

    pub fn free_sides(&self) -> &[usize] {
        &self.free_sides
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Scatters free values into a full CR coefficient vector.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.components * self.num_sides];
        for (slot, idx) in out.iter_mut().zip(&self.index) {
            if let Some(i) = idx {
                *slot = x[*i];
            }
        }
        out
    }

    pub fn restrict(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_free()];
        for (v, idx) in coeffs.iter().zip(&self.index) {
            if let Some(i) = idx {
                out[*i] = *v;
            }
        }
        out
    }
}

/// Assembled linear system with boundary DOFs eliminated.
///
/// For Stokes the unknowns are the free velocity DOFs, one pressure per
/// element and a final scalar multiplier enforcing `Σ |T| p_T = 0`.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub kind: ProblemKind,
    pub tri: Triangulation,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
    /// Boundary sides whose DOFs were removed.
    pub constrained: Vec<usize>,
}

impl SparseSystem {
    pub fn num_velocity(&self) -> usize {
        self.dofs.num_free()
    }

    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        sparse::residual_norm(&self.matrix, x, &self.rhs)
    }

    pub fn to_matrix_market(&self) -> String {
        self.matrix.to_matrix_market()
    }

    /// Right-hand side as a one-column Matrix Market array.
    pub fn rhs_matrix_market(&self) -> String {
        let mut out = format!("%%MatrixMarket matrix array real general\n{} 1\n", self.rhs.len());
        for v in &self.rhs {
            out.push_str(&format!("{v:e}\n"));
        }
        out
    }
}

fn stiffness_triplets(tri: &Triangulation, dofs: &DofMap) -> Vec<(usize, usize, f64)> {
    (0..tri.num_elements())
        .into_par_iter()
        .flat_map_iter(|t| {
            let a = local_stiffness(tri.element_coords(t));
            let sides = tri.element_sides(t);
            let mut out = Vec::with_capacity(9 * dofs.components());
            for c in 0..dofs.components() {
                for j in 0..3 {
                    let Some(dj) = dofs.dof(sides[j], c) else { continue };
                    for k in 0..3 {
                        if let Some(dk) = dofs.dof(sides[k], c) {
                            out.push((dj, dk, a[j][k]));
                        }
                    }
                }
            }
            out
        })
        .collect()
}

fn load_vector(tri: &Triangulation, f: &RhsField, dofs: &DofMap, len: usize) -> Vec<f64> {
    let locals: Vec<Vec<[f64; 3]>> = (0..tri.num_elements())
        .into_par_iter()
        .map(|t| (0..dofs.components()).map(|c| f.local_load(tri, t, c)).collect())
        .collect();
    let mut b = vec![0.0; len];
    for (t, per_comp) in locals.iter().enumerate() {
        let sides = tri.element_sides(t);
        for (c, loc) in per_comp.iter().enumerate() {
            for k in 0..3 {
                if let Some(d) = dofs.dof(sides[k], c) {
                    b[d] += loc[k];
                }
            }
        }
    }
    b
}

fn check_components(kind: ProblemKind, f: &RhsField) -> Result<()> {
    if f.components() != kind.components() {
        return Err(Error::ComponentMismatch { expected: kind.components(), actual: f.components() });
    }
    Ok(())
}

fn boundary_sides(tri: &Triangulation) -> Vec<usize> {
    (0..tri.num_sides()).filter(|&s| tri.side(s).boundary).collect()
}

pub fn assemble_poisson(tri: &Triangulation, f: &RhsField) -> Result<SparseSystem> {
    check_components(ProblemKind::Poisson, f)?;
    let dofs = DofMap::new(tri, 1);
    let n = dofs.num_free();
    let matrix = CsrMatrix::from_triplets(n, stiffness_triplets(tri, &dofs));
    let rhs = load_vector(tri, f, &dofs, n);
    Ok(SparseSystem { kind: ProblemKind::Poisson, tri: tri.clone(), matrix, rhs, dofs, constrained: boundary_sides(tri) })
}

pub fn assemble_stokes(tri: &Triangulation, f: &RhsField) -> Result<SparseSystem> {
    check_components(ProblemKind::Stokes, f)?;
    let dofs = DofMap::new(tri, 2);
    let nv = dofs.num_free();
    let ne = tri.num_elements();
    let n = nv + ne + 1;
    let mut trip = stiffness_triplets(tri, &dofs);
    for t in 0..ne {
        let area = tri.area(t);
        let g = tri.grad_lambda(t);
        let p = nv + t;
        for (k, &s) in tri.element_sides(t).iter().enumerate() {
            for c in 0..2 {
                if let Some(d) = dofs.dof(s, c) {
                    // ∫_T div(ψ_s e_c) = |T| ∂_c ψ_s
                    let b = -2.0 * area * g[k][c];
                    trip.push((d, p, b));
                    trip.push((p, d, b));
                }
            }
        }
        trip.push((p, n - 1, area));
        trip.push((n - 1, p, area));
    }
    let matrix = CsrMatrix::from_triplets(n, trip);
    let rhs = load_vector(tri, f, &dofs, n);
    Ok(SparseSystem { kind: ProblemKind::Stokes, tri: tri.clone(), matrix, rhs, dofs, constrained: boundary_sides(tri) })
}

pub fn assemble(kind: ProblemKind, tri: &Triangulation, f: &RhsField) -> Result<SparseSystem> {
    match kind {
        ProblemKind::Poisson => assemble_poisson(tri, f),
        ProblemKind::Stokes => assemble_stokes(tri, f),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverOptions {
    /// Systems with more unknowns than this use CG (Poisson only).
    pub direct_limit: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { direct_limit: 400_000, cg_tol: 1e-10, cg_max_iter: 50_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Cholesky,
    /// Shifted `LDLᵀ` with iterative refinement (saddle-point systems).
    Ldlt,
    Cg,
    Trivial,
}

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct SolveStats {
    pub unknowns: usize,
    pub nnz: usize,
    pub residual: f64,
    pub rhs_norm: f64,
    pub method: SolveMethod,
    pub cg_iterations: usize,
}

/// Discrete solution: velocity or scalar `u_T`, and for Stokes the
/// mean-zero pressure `p_T`.
#[derive(Clone, Debug)]
pub struct Solution {
    pub kind: ProblemKind,
    pub u: CrFunction,
    pub p: Option<P0Function>,
    pub stats: SolveStats,
}

impl Solution {
    pub fn tri(&self) -> &Triangulation {
        self.u.tri()
    }
}

/// Relative size of the negative shift on the pressure block.
const PRESSURE_SHIFT: f64 = 1e-8;

/// Drops the multiplier, factors the quasi-definite shifted matrix, refines
/// against the singular pressure-velocity block and then fixes the pressure
/// constant through the mean-value row.
fn solve_saddle(sys: &SparseSystem, rhs_norm: f64) -> Result<Vec<f64>> {
    let n = sys.matrix.dim();
    let nv = sys.num_velocity();
    let reduced = sys.matrix.leading_block(n - 1);
    let weights: Vec<f64> = (nv..n - 1).map(|p| sys.matrix.get(n - 1, p)).collect();
    let shift: Vec<f64> = (0..n - 1).map(|i| if i < nv { 0.0 } else { -PRESSURE_SHIFT * weights[i - nv] }).collect();
    let tol = 1e-14 * (rhs_norm + 1.0);
    let (mut x, _) = sparse::solve_shifted_ldlt(&reduced, &sys.rhs[..n - 1], &shift, tol, 50)?;
    let total: f64 = weights.iter().sum();
    let mean = weights.iter().zip(&x[nv..]).map(|(w, p)| w * p).sum::<f64>() / total;
    for p in &mut x[nv..] {
        *p -= mean;
    }
    x.push(0.0);
    Ok(x)
}

fn solve_system(sys: &SparseSystem, opts: &SolverOptions) -> Result<(Vec<f64>, SolveStats)> {
    let n = sys.matrix.dim();
    let rhs_norm = sparse::norm2(&sys.rhs);
    let mut cg_iterations = 0;
    let (x, method) = if n == 0 {
        (Vec::new(), SolveMethod::Trivial)
    } else if rhs_norm == 0.0 {
        (vec![0.0; n], SolveMethod::Trivial)
    } else {
        match sys.kind {
            ProblemKind::Poisson if n > opts.direct_limit => {
                let (x, out) = sparse::pcg(&sys.matrix, &sys.rhs, opts.cg_tol, opts.cg_max_iter)?;
                cg_iterations = out.iterations;
                (x, SolveMethod::Cg)
            }
            ProblemKind::Poisson => (sparse::solve_spd_direct(&sys.matrix, &sys.rhs)?, SolveMethod::Cholesky),
            ProblemKind::Stokes => (solve_saddle(sys, rhs_norm)?, SolveMethod::Ldlt),
        }
    };
    let residual = if n == 0 { 0.0 } else { sys.residual_norm(&x) };
    let bound = match method {
        SolveMethod::Cg => opts.cg_tol * rhs_norm * 1.01 + 1e-300,
        _ => 1e-12 * (rhs_norm + 1.0),
    };
    if residual > bound {
        return Err(Error::Solver(format!("residual {residual:e} exceeds {bound:e}")));
    }
    let stats = SolveStats { unknowns: n, nnz: sys.matrix.nnz(), residual, rhs_norm, method, cg_iterations };
    Ok((x, stats))
}

pub fn solve_poisson(tri: &Triangulation, f: &RhsField, opts: &SolverOptions) -> Result<Solution> {
    let sys = assemble_poisson(tri, f)?;
    let (x, stats) = solve_system(&sys, opts)?;
    let u = CrFunction::from_coeffs(tri, 1, sys.dofs.expand(&x))?;
    Ok(Solution { kind: ProblemKind::Poisson, u, p: None, stats })
}

pub fn solve_stokes(tri: &Triangulation, f: &RhsField, opts: &SolverOptions) -> Result<Solution> {
    let sys = assemble_stokes(tri, f)?;
    let (x, stats) = solve_system(&sys, opts)?;
    let nv = sys.num_velocity();
    let ne = tri.num_elements();
    let (vel, rest) = if x.is_empty() { (&[][..], &[][..]) } else { x.split_at(nv) };
    let u = CrFunction::from_coeffs(tri, 2, sys.dofs.expand(vel))?;
    let pressure = if rest.is_empty() { vec![0.0; ne] } else { rest[..ne].to_vec() };
    let p = P0Function::new_mean_zero(tri, pressure)?;
    Ok(Solution { kind: ProblemKind::Stokes, u, p: Some(p), stats })
}

pub fn solve(kind: ProblemKind, tri: &Triangulation, f: &RhsField, opts: &SolverOptions) -> Result<Solution> {
    match kind {
        ProblemKind::Poisson => solve_poisson(tri, f, opts),
        ProblemKind::Stokes => solve_stokes(tri, f, opts),
    }
}

/// Stand-in for the solution on the (unrepresentable) top element: the
/// solution on `finest` refined uniformly `k_ref` more times.
pub fn reference_solution(
    kind: ProblemKind,
    finest: &Triangulation,
    k_ref: usize,
    f: &RhsField,
    opts: &SolverOptions,
) -> Result<Solution> {
    solve(kind, &finest.uniform_refine_times(k_ref), f, opts)
}

/// `max_j |∫ ∇_NC u·∇_NC φ_j − ∫ f·φ_j|` over free velocity basis functions.
pub fn galerkin_defect(u: &CrFunction, f: &RhsField) -> Result<f64> {
    let tri = u.tri();
    let dofs = DofMap::new(tri, u.components());
    let a = CsrMatrix::from_triplets(dofs.num_free(), stiffness_triplets(tri, &dofs));
    let b = load_vector(tri, f, &dofs, dofs.num_free());
    let x = dofs.restrict(u.coeffs());
    let ax = a.matvec(&x);
    Ok(ax.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
}

/// `∇_NC`-orthogonal projection of `v` (on a coarsening of `fine`) onto
/// `CR_0(fine)`.
pub fn nc_projection(fine: &Triangulation, v: &CrFunction) -> Result<CrFunction> {
    let coarse = v.tri();
    let parent = coarse.coarse_parent_map(fine)?;
    let dofs = DofMap::new(fine, v.components());
    let n = dofs.num_free();
    let a = CsrMatrix::from_triplets(n, stiffness_triplets(fine, &dofs));
    let mut b = vec![0.0; n];
    for (t, &pt) in parent.iter().enumerate() {
        let g = fine.grad_lambda(t);
        let area = fine.area(t);
        for c in 0..v.components() {
            let gv = v.gradient(pt, c);
            for (k, &s) in fine.element_sides(t).iter().enumerate() {
                if let Some(d) = dofs.dof(s, c) {
                    b[d] += -2.0 * area * (gv[0] * g[k][0] + gv[1] * g[k][1]);
                }
            }
        }
    }
    let x = if n == 0 { Vec::new() } else { sparse::solve_spd_direct(&a, &b)? };
    CrFunction::from_coeffs(fine, v.components(), dofs.expand(&x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builtin;

    #[test]
    fn local_stiffness_of_unit_right_triangle() {
        // vertex order puts the right angle first so side 0 is the hypotenuse,
        // side 1 (opposite (1,0)) the vertical leg, side 2 the horizontal one
        let a = local_stiffness([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let expect = [[4.0, -2.0, -2.0], [-2.0, 2.0, 0.0], [-2.0, 0.0, 2.0]];
        for j in 0..3 {
            for k in 0..3 {
                assert!((a[j][k] - expect[j][k]).abs() < 1e-14, "{a:?}");
            }
        }
    }

    #[test]
    fn two_triangle_poisson_system() {
        let tri = builtin::unit_square().bottom();
        let sys = assemble_poisson(&tri, &RhsField::constant_scalar(1.0)).unwrap();
        assert_eq!(sys.matrix.dim(), 1);
        assert!((sys.matrix.get(0, 0) - 8.0).abs() < 1e-14);
        assert!((sys.rhs[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(sys.constrained.len(), 4);
        let sol = solve_poisson(&tri, &RhsField::constant_scalar(1.0), &SolverOptions::default()).unwrap();
        let diag = (0..tri.num_sides()).find(|&s| !tri.side(s).boundary).unwrap();
        assert!((sol.u.coeff(diag, 0) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let tri = builtin::lshape().bottom().uniform_refine_times(2);
        let sys = assemble_poisson(&tri, &RhsField::zero(1)).unwrap();
        assert!(sys.rhs.iter().all(|&b| b == 0.0));
        let s = solve_stokes(&tri, &RhsField::zero(2), &SolverOptions::default()).unwrap();
        assert!(s.u.coeffs().iter().all(|&c| c == 0.0));
        assert!(s.p.unwrap().max_abs() == 0.0);
    }

    #[test]
    fn component_mismatch_is_rejected() {
        let tri = builtin::unit_square().bottom();
        assert!(matches!(
            assemble_stokes(&tri, &RhsField::constant_scalar(1.0)),
            Err(Error::ComponentMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn cg_and_direct_agree() {
        let tri = builtin::lshape().bottom().uniform_refine_times(4);
        let f = RhsField::constant_scalar(1.0);
        let direct = solve_poisson(&tri, &f, &SolverOptions::default()).unwrap();
        let opts = SolverOptions { direct_limit: 0, ..Default::default() };
        let cg = solve_poisson(&tri, &f, &opts).unwrap();
        assert_eq!(cg.stats.method, SolveMethod::Cg);
        let diff = direct.u.coeffs().iter().zip(cg.u.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
    }
}
