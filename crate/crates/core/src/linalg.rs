//! Krylov solvers, sparse factorizations and Dirichlet elimination.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::{Conj, Mat, Par, Side};

use crate::error::{FsiError, Result};
use crate::sparse::{dot, norm2, SparseOperator, TripletBuilder};

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct IterativeSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual after each iteration (first entry is the initial residual).
    pub history: Vec<f64>,
}

/// Jacobi-preconditioned conjugate gradients for an SPD operator.
pub fn conjugate_gradient(
    a: &SparseOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<IterativeSolution> {
    let n = b.len();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(IterativeSolution {
            x: vec![0.0; n],
            iterations: 0,
            history: vec![0.0],
        });
    }
    let mut r = a.mul_vec(&x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = vec![norm2(&r) / bnorm];
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if *history.last().unwrap() <= rel_tol {
            return Ok(IterativeSolution { x, iterations: it, history });
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(FsiError::Solver {
                stage: "conjugate-gradient",
                message: format!("operator not positive definite (pᵀAp = {pap:e})"),
                residual_history: history,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        history.push(norm2(&r) / bnorm);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if *history.last().unwrap() <= rel_tol {
        return Ok(IterativeSolution {
            x,
            iterations: max_iter,
            history,
        });
    }
    Err(FsiError::Solver {
        stage: "conjugate-gradient",
        message: format!("no convergence in {max_iter} iterations"),
        residual_history: history,
    })
}

/// Restarted flexible GMRES with a right preconditioner that may vary between iterations.
pub fn fgmres(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    precondition: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
    restart: usize,
) -> Result<IterativeSolution> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return Ok(IterativeSolution {
            x,
            iterations: 0,
            history: vec![0.0],
        });
    }
    let mut total = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm2(&r);
        history.push(beta / bnorm);
        if beta / bnorm <= rel_tol {
            return Ok(IterativeSolution {
                x,
                iterations: total,
                history,
            });
        }
        if total >= max_iter {
            return Err(FsiError::Solver {
                stage: "fgmres",
                message: format!("no convergence in {max_iter} iterations"),
                residual_history: history,
            });
        }
        let m = restart.min(max_iter - total).max(1);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_done = 0;
        for k in 0..m {
            let z = precondition(&v[k]);
            let mut w = apply(&z);
            zs.push(z);
            // modified Gram–Schmidt
            for (j, vj) in v.iter().enumerate() {
                let hij = dot(&w, vj);
                h[j][k] = hij;
                w.iter_mut().zip(vj).for_each(|(wi, vi)| *wi -= hij * vi);
            }
            let wn = norm2(&w);
            h[k + 1][k] = wn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            cs[k] = if d == 0.0 { 1.0 } else { h[k][k] / d };
            sn[k] = if d == 0.0 { 0.0 } else { h[k + 1][k] / d };
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_done = k + 1;
            history.push(g[k + 1].abs() / bnorm);
            if g[k + 1].abs() / bnorm <= rel_tol || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / wn).collect());
        }
        // back substitution
        let mut y = vec![0.0; k_done];
        for i in (0..k_done).rev() {
            let mut s = g[i];
            for j in i + 1..k_done {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, z) in zs.iter().enumerate().take(k_done) {
            x.iter_mut().zip(z).for_each(|(xi, zi)| *xi += y[j] * zi);
        }
    }
}

/// Sparse `LDLᵀ` factorization of a symmetric quasi-definite matrix, read from
/// its upper triangle. `signs[i]` is the expected sign of pivot `i`; pivots
/// with the wrong sign or exactly zero are replaced by a tiny value of the
/// expected sign.
pub struct SignedLdlt {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    n: usize,
}

impl std::fmt::Debug for SignedLdlt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SignedLdlt").field("n", &self.n).finish_non_exhaustive()
    }
}

impl SignedLdlt {
    pub fn new(a: &SparseOperator, signs: &[i8]) -> Result<Self> {
        let n = a.nrows();
        crate::error::check_len("pivot signs", n, signs.len())?;
        let m = a.upper_to_faer_lower()?;
        let fail = |message: String| FsiError::Solver {
            stage: "ldlt",
            message,
            residual_history: Vec::new(),
        };
        let symbolic =
            factorize_symbolic_cholesky(m.symbolic(), Side::Lower, SymmetricOrdering::Amd, Default::default())
                .map_err(|e| fail(format!("symbolic analysis failed: {e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let regularization = LdltRegularization {
            dynamic_regularization_signs: Some(signs),
            dynamic_regularization_delta: 1e-14 * a.max_abs().max(f64::MIN_POSITIVE),
            dynamic_regularization_epsilon: 0.0,
        };
        let mut mem = MemBuffer::try_new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()))
            .map_err(|e| fail(format!("workspace allocation failed: {e:?}")))?;
        symbolic
            .factorize_numeric_ldlt(
                &mut values,
                m.as_ref(),
                Side::Lower,
                regularization,
                Par::Seq,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|e| fail(format!("numeric factorization failed: {e:?}")))?;
        Ok(SignedLdlt { symbolic, values, n })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        LdltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            x.as_mut(),
            Par::Seq,
            MemStack::new(&mut mem),
        );
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

/// Symmetric elimination of prescribed dofs: the returned operator has identity
/// rows/columns at `fixed`, and `b` is lifted and overwritten with the values.
pub fn eliminate_dirichlet(a: &SparseOperator, b: &mut [f64], fixed: &[(usize, f64)]) -> SparseOperator {
    let n = a.nrows();
    let mut value: Vec<Option<f64>> = vec![None; n];
    for &(d, v) in fixed {
        value[d] = Some(v);
    }
    let mut tb = TripletBuilder::with_capacity(n, a.ncols(), a.nnz());
    for i in 0..n {
        if value[i].is_some() {
            tb.push(i, i, 1.0);
            continue;
        }
        for (j, aij) in a.row(i) {
            match value.get(j).copied().flatten() {
                Some(vj) => b[i] -= aij * vj,
                None => tb.push(i, j, aij),
            }
        }
    }
    for &(d, v) in fixed {
        b[d] = v;
    }
    tb.build(a.is_symmetric_flagged())
}
