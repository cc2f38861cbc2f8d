//! Compressed sparse row matrices and the linear solvers used by the
//! discrete problems. Direct factorizations are delegated to `faer`; the
//! diagonally preconditioned CG is implemented here.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, SymmetricOrdering};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Par, Side};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n × n` matrix, summing duplicate entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i},{j}) outside {n}x{n}");
            if last == Some((i, j)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                row_ptr[i + 1] += 1;
                col_idx.push(j);
                values.push(v);
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Leading `m × m` block.
    pub fn leading_block(&self, m: usize) -> CsrMatrix {
        let trip = (0..m).flat_map(|i| self.row(i).filter(|&(j, _)| j < m).map(move |(j, v)| (i, j, v))).collect();
        CsrMatrix::from_triplets(m, trip)
    }

    /// Lower triangle of `self + diag(shift)` in faer's layout.
    fn lower_shifted_faer(&self, shift: &[f64]) -> Result<SparseColMat<usize, f64>> {
        let mut trip = Vec::with_capacity(self.nnz() / 2 + self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if j < i {
                    trip.push(Triplet::new(i, j, v));
                }
            }
            trip.push(Triplet::new(i, i, self.get(i, i) + shift[i]));
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &trip).map_err(|e| Error::Solver(format!("{e:?}")))
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                trip.push(Triplet::new(i, j, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &trip).map_err(|e| Error::Solver(format!("{e:?}")))
    }

    /// Matrix Market coordinate format (1-based, general).
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
        out.push_str(&format!("{} {} {}\n", self.n, self.n, self.nnz()));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                out.push_str(&format!("{} {} {:e}\n", i + 1, j + 1, v));
            }
        }
        out
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn residual_norm(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Sparse Cholesky for symmetric positive definite systems.
pub fn solve_spd_direct(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.dim() == 0 {
        return Ok(Vec::new());
    }
    let m = a.to_faer()?;
    let llt = m.sp_cholesky(Side::Lower).map_err(|e| Error::Solver(format!("cholesky: {e:?}")))?;
    let rhs = faer::Col::<f64>::from_fn(b.len(), |i| b[i]);
    let x = llt.solve(&rhs);
    Ok((0..b.len()).map(|i| x[i]).collect())
}

/// Sparse LU with partial pivoting, used for the symmetric indefinite
/// saddle-point systems.
pub fn solve_general_direct(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.dim() == 0 {
        return Ok(Vec::new());
    }
    let m = a.to_faer()?;
    let lu = m.sp_lu().map_err(|e| Error::Solver(format!("lu: {e:?}")))?;
    let rhs = faer::Col::<f64>::from_fn(b.len(), |i| b[i]);
    let x = lu.solve(&rhs);
    let x: Vec<f64> = (0..b.len()).map(|i| x[i]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("singular saddle-point system".into()));
    }
    Ok(x)
}

/// Symmetric indefinite solve: `LDLᵀ` of `a + diag(shift)` followed by
/// iterative refinement against `a` until `‖b − a x‖ ≤ tol`.
///
/// A negative shift on the constraint block of a saddle-point matrix makes
/// it quasi-definite, so the factorization is stable for any fill-reducing
/// ordering. The refinement removes the perturbation; a consistent
/// right-hand side is required if `a` is singular. Returns the refinement
/// step count.
pub fn solve_shifted_ldlt(a: &CsrMatrix, b: &[f64], shift: &[f64], tol: f64, max_refine: usize) -> Result<(Vec<f64>, usize)> {
    let n = a.dim();
    if n == 0 {
        return Ok((Vec::new(), 0));
    }
    let m = a.lower_shifted_faer(shift)?;
    let symbolic = factorize_symbolic_cholesky(m.symbolic(), Side::Lower, SymmetricOrdering::Amd, Default::default())
        .map_err(|e| Error::Solver(format!("symbolic ldlt: {e:?}")))?;
    let mut values = vec![0.0; symbolic.len_val()];
    let mut mem = MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()));
    let ldlt = symbolic
        .factorize_numeric_ldlt(
            &mut values,
            m.as_ref(),
            Side::Lower,
            LdltRegularization::default(),
            Par::Seq,
            MemStack::new(&mut mem),
            Default::default(),
        )
        .map_err(|e| Error::Solver(format!("ldlt: {e:?}")))?;
    let mut solve_mem = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
    let mut apply = |r: &[f64]| -> Vec<f64> {
        let mut col = faer::Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        ldlt.solve_in_place_with_conj(Conj::No, col.as_mut(), Par::Seq, MemStack::new(&mut solve_mem));
        (0..n).map(|i| col[(i, 0)]).collect()
    };
    let mut x = apply(b);
    let mut steps = 0;
    loop {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let rn = norm2(&r);
        if !rn.is_finite() {
            return Err(Error::Solver("non-finite iterate in refinement".into()));
        }
        if rn <= tol || steps >= max_refine {
            break;
        }
        let d = apply(&r);
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
        steps += 1;
    }
    Ok((x, steps))
}

#[derive(Clone, Copy, Debug)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients, `‖r‖ ≤ tol·‖b‖`.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, CgOutcome)> {
    let n = a.dim();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, CgOutcome { iterations: 0, relative_residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 1..=max_iter {
        let ap = a.matvec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::Solver("CG breakdown: matrix not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let mut restart = false;
        if norm2(&r) / bnorm <= tol {
            // the recursive residual drifts; accept only on the true one
            let ax = a.matvec(&x);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
            let rel = norm2(&r) / bnorm;
            if rel <= tol {
                return Ok((x, CgOutcome { iterations: it, relative_residual: rel }));
            }
            restart = true;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = if restart { 0.0 } else { rz_new / rz };
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver(format!("CG did not reach tolerance {tol:e} in {max_iter} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (0, 1, 1.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.asymmetry(), 0.0);
    }

    #[test]
    fn direct_and_cg_agree() {
        let a = laplace_1d(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x1 = solve_spd_direct(&a, &b).unwrap();
        let (x2, out) = pcg(&a, &b, 1e-13, 500).unwrap();
        assert!(out.iterations <= 50);
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-9);
        }
        assert!(residual_norm(&a, &x1, &b) < 1e-12);
        let x3 = solve_general_direct(&a, &b).unwrap();
        assert!(residual_norm(&a, &x3, &b) < 1e-12);
    }

    #[test]
    fn cg_reports_non_convergence() {
        let a = laplace_1d(100);
        let b = vec![1.0; 100];
        assert!(matches!(pcg(&a, &b, 1e-14, 3), Err(Error::Solver(_))));
    }

    #[test]
    fn shifted_ldlt_solves_saddle_point_system() {
        // [A Bᵀ; B 0] with A the 1D Laplacian and one constraint row
        let n = 20;
        let mut t: Vec<(usize, usize, f64)> = Vec::new();
        let a = laplace_1d(n);
        for i in 0..n {
            for (j, v) in a.row(i) {
                t.push((i, j, v));
            }
            let bij = if i % 2 == 0 { 1.0 } else { -0.5 };
            t.push((n, i, bij));
            t.push((i, n, bij));
        }
        let k = CsrMatrix::from_triplets(n + 1, t);
        let mut b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        b.push(0.25);
        let mut shift = vec![0.0; n + 1];
        shift[n] = -1e-8;
        let (x, steps) = solve_shifted_ldlt(&k, &b, &shift, 1e-13, 20).unwrap();
        assert!(residual_norm(&k, &x, &b) <= 1e-13);
        assert!(steps <= 5);
        let y = solve_general_direct(&k, &b).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-10);
        }
    }
}
