use super::csr::CsrMatrix;
use super::ordering::{amd_order, inverse_permutation};
use crate::error::{Error, Result};
use crate::scalar::Real;

const NONE: usize = usize::MAX;

/// Sparse `L D Lᵀ` factors of a symmetric matrix under a fill-reducing
/// symmetric permutation. Immutable once built, so concurrent solves are fine.
#[derive(Clone, Debug)]
pub struct LdltFactorization<T> {
    n: usize,
    perm: Vec<usize>,
    perm_inv: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<T>,
    d: Vec<T>,
    pin: Option<usize>,
}

impl<T: Real> LdltFactorization<T> {
    /// Factors `matrix`. With `pin = Some(i)` row and column `i` are replaced
    /// so that unknown `i` is fixed to zero, which removes a constant nullspace.
    pub fn factorize(matrix: &CsrMatrix<T>, pin: Option<usize>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::ShapeMismatch(format!(
                "factorize needs a square matrix, got {}x{}",
                matrix.n_rows(),
                matrix.n_cols()
            )));
        }
        matrix.check_finite()?;
        let pinned;
        let a = match pin {
            Some(p) => {
                pinned = matrix.pinned(p)?;
                &pinned
            }
            None => matrix,
        };
        let n = a.n_rows();
        let perm = amd_order(n, a.row_ptr(), a.col_idx())?;
        let perm_inv = inverse_permutation(&perm);

        // elimination tree and column counts of L
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            let (cols, _) = a.row(perm[k]);
            for &c in cols {
                let mut i = perm_inv[c];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == NONE {
                            parent[i] = k;
                        }
                        lnz[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut l_ptr = vec![0usize; n + 1];
        for k in 0..n {
            l_ptr[k + 1] = l_ptr[k] + lnz[k];
        }

        let nnz_l = l_ptr[n];
        let mut l_idx = vec![0usize; nnz_l];
        let mut l_val = vec![T::zero(); nnz_l];
        let mut d = vec![T::zero(); n];
        let mut y = vec![T::zero(); n];
        let mut pattern = vec![0usize; n];
        let mut fill = vec![0usize; n];
        let tol = T::epsilon() * T::lit(1e3);
        flag.fill(NONE);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let (cols, vals) = a.row(perm[k]);
            let mut scale = T::zero();
            for (&c, &v) in cols.iter().zip(vals) {
                scale = scale.max(v.abs());
                let mut i = perm_inv[c];
                if i <= k {
                    y[i] += v;
                    let mut len = 0;
                    while flag[i] != k {
                        pattern[len] = i;
                        len += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                    while len > 0 {
                        len -= 1;
                        top -= 1;
                        pattern[top] = pattern[len];
                    }
                }
            }
            let mut dk = y[k];
            y[k] = T::zero();
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = T::zero();
                let p2 = l_ptr[i] + fill[i];
                for p in l_ptr[i]..p2 {
                    y[l_idx[p]] -= l_val[p] * yi;
                }
                let lki = yi / d[i];
                dk -= lki * yi;
                l_idx[p2] = k;
                l_val[p2] = lki;
                fill[i] += 1;
            }
            if !dk.is_finite() || dk.abs() <= tol * scale {
                return Err(Error::Singular { pivot: perm[k] });
            }
            d[k] = dk;
        }
        Ok(Self { n, perm, perm_inv, l_ptr, l_idx, l_val, d, pin })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn pin(&self) -> Option<usize> {
        self.pin
    }

    /// Nonzeros of the strictly lower factor.
    pub fn factor_nnz(&self) -> usize {
        self.l_idx.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.n {
            return Err(Error::ShapeMismatch(format!("rhs length {} for dimension {}", b.len(), self.n)));
        }
        let mut x = vec![T::zero(); self.n];
        for (k, xk) in x.iter_mut().enumerate() {
            *xk = b[self.perm[k]];
        }
        if let Some(p) = self.pin {
            x[self.perm_inv[p]] = T::zero();
        }
        for j in 0..self.n {
            let xj = x[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                x[self.l_idx[p]] -= self.l_val[p] * xj;
            }
        }
        for (xj, &dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..self.n).rev() {
            let mut xj = x[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                xj -= self.l_val[p] * x[self.l_idx[p]];
            }
            x[j] = xj;
        }
        let mut out = vec![T::zero(); self.n];
        for k in 0..self.n {
            out[self.perm[k]] = x[k];
        }
        Ok(out)
    }

    /// Solves every column of `block`; each column goes through the same code
    /// path as [`Self::solve`], so results match separate solves bit for bit.
    pub fn solve_multi(&self, block: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        block.iter().map(|b| self.solve(b)).collect()
    }
}
