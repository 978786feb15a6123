use super::csr::CsrMatrix;
use super::ordering::amd_order;
use crate::error::{Error, Result};
use crate::scalar::Real;

const NONE: usize = usize::MAX;

/// Left-looking sparse LU with threshold partial pivoting: `P A Q = L U`.
/// Columns are ordered by a fill-reducing ordering of the symmetrized
/// pattern; the diagonal is kept as pivot whenever it is within
/// `pivot_threshold` of the column maximum.
#[derive(Clone, Debug)]
pub struct SparseLu<T> {
    n: usize,
    q: Vec<usize>,
    pinv: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<T>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<T>,
    pin: Option<usize>,
}

impl<T: Real> SparseLu<T> {
    pub fn factorize(matrix: &CsrMatrix<T>, pin: Option<usize>) -> Result<Self> {
        Self::factorize_with(matrix, pin, T::lit(0.1))
    }

    pub fn factorize_with(matrix: &CsrMatrix<T>, pin: Option<usize>, pivot_threshold: T) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::ShapeMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                matrix.n_rows(),
                matrix.n_cols()
            )));
        }
        matrix.check_finite()?;
        let a = match pin {
            Some(p) => identity_row(matrix, p)?,
            None => matrix.clone(),
        };
        let n = a.n_rows();
        // CSC of A is the CSR of Aᵀ
        let at = a.transpose();
        let (cp, ci, cx) = (at.row_ptr(), at.col_idx(), at.values());
        let q = amd_order(n, cp, ci)?;

        let mut l_ptr = vec![0usize; n + 1];
        let mut u_ptr = vec![0usize; n + 1];
        let mut l_idx = Vec::with_capacity(4 * a.nnz() + n);
        let mut l_val = Vec::with_capacity(4 * a.nnz() + n);
        let mut u_idx = Vec::with_capacity(4 * a.nnz() + n);
        let mut u_val = Vec::with_capacity(4 * a.nnz() + n);
        let mut pinv = vec![NONE; n];
        let mut x = vec![T::zero(); n];
        let mut xi = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut mark = vec![NONE; n];
        let tol = T::epsilon() * T::lit(1e3);

        for k in 0..n {
            l_ptr[k] = l_idx.len();
            u_ptr[k] = u_idx.len();
            let col = q[k];
            let (s, e) = (cp[col], cp[col + 1]);

            // nonzero pattern of L⁻¹ a_col, topologically ordered in xi[top..n]
            let mut top = n;
            for &start in &ci[s..e] {
                if mark[start] == k {
                    continue;
                }
                let mut head = 0usize;
                stack[0] = start;
                loop {
                    let j = stack[head];
                    let jcol = pinv[j];
                    if mark[j] != k {
                        mark[j] = k;
                        pstack[head] = if jcol == NONE { 0 } else { l_ptr[jcol] };
                    }
                    let end = if jcol == NONE { 0 } else { l_ptr[jcol + 1] };
                    let mut descended = false;
                    while pstack[head] < end {
                        let i = l_idx[pstack[head]];
                        pstack[head] += 1;
                        if mark[i] != k {
                            head += 1;
                            stack[head] = i;
                            descended = true;
                            break;
                        }
                    }
                    if !descended {
                        top -= 1;
                        xi[top] = j;
                        if head == 0 {
                            break;
                        }
                        head -= 1;
                    }
                }
            }

            let mut scale = T::zero();
            for p in s..e {
                x[ci[p]] = cx[p];
                scale = scale.max(cx[p].abs());
            }
            for &j in &xi[top..n] {
                let jcol = pinv[j];
                if jcol == NONE {
                    continue;
                }
                let xj = x[j];
                // first entry of each L column is the unit diagonal
                for p in l_ptr[jcol] + 1..l_ptr[jcol + 1] {
                    x[l_idx[p]] -= l_val[p] * xj;
                }
            }

            let mut ipiv = NONE;
            let mut amax = T::zero();
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    if x[i].abs() > amax {
                        amax = x[i].abs();
                        ipiv = i;
                    }
                } else {
                    u_idx.push(pinv[i]);
                    u_val.push(x[i]);
                }
            }
            if ipiv == NONE || !amax.is_finite() || amax <= tol * scale {
                return Err(Error::Singular { pivot: col });
            }
            if pinv[col] == NONE && x[col].abs() >= amax * pivot_threshold {
                ipiv = col;
            }
            let piv = x[ipiv];
            u_idx.push(k);
            u_val.push(piv);
            pinv[ipiv] = k;
            l_idx.push(ipiv);
            l_val.push(T::one());
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    l_idx.push(i);
                    l_val.push(x[i] / piv);
                }
                x[i] = T::zero();
            }
            l_ptr[k + 1] = l_idx.len();
        }
        l_ptr[n] = l_idx.len();
        u_ptr[n] = u_idx.len();
        for r in l_idx.iter_mut() {
            *r = pinv[*r];
        }
        Ok(Self { n, q, pinv, l_ptr, l_idx, l_val, u_ptr, u_idx, u_val, pin })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len()
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.n {
            return Err(Error::ShapeMismatch(format!("rhs length {} for dimension {}", b.len(), self.n)));
        }
        let mut y = vec![T::zero(); self.n];
        for (i, &bi) in b.iter().enumerate() {
            y[self.pinv[i]] = bi;
        }
        if let Some(p) = self.pin {
            y[self.pinv[p]] = T::zero();
        }
        for j in 0..self.n {
            let yj = y[j];
            for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                y[self.l_idx[p]] -= self.l_val[p] * yj;
            }
        }
        for j in (0..self.n).rev() {
            let last = self.u_ptr[j + 1] - 1;
            y[j] /= self.u_val[last];
            let yj = y[j];
            for p in self.u_ptr[j]..last {
                y[self.u_idx[p]] -= self.u_val[p] * yj;
            }
        }
        let mut out = vec![T::zero(); self.n];
        for k in 0..self.n {
            out[self.q[k]] = y[k];
        }
        Ok(out)
    }

    pub fn solve_multi(&self, block: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        block.iter().map(|b| self.solve(b)).collect()
    }
}

/// Row `p` becomes `e_pᵀ` and column `p` is cleared elsewhere, fixing unknown `p`.
fn identity_row<T: Real>(a: &CsrMatrix<T>, p: usize) -> Result<CsrMatrix<T>> {
    if p >= a.n_rows() {
        return Err(Error::ShapeMismatch(format!("pin {p} outside dimension {}", a.n_rows())));
    }
    let mut trip = Vec::with_capacity(a.nnz());
    for r in 0..a.n_rows() {
        if r == p {
            continue;
        }
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            if c != p {
                trip.push((r, c, v));
            }
        }
    }
    trip.push((p, p, T::one()));
    CsrMatrix::from_triplets(a.n_rows(), a.n_cols(), &trip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(a: &CsrMatrix<f64>, x: &[f64], b: &[f64]) -> f64 {
        a.matvec(x).iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn needs_row_pivoting() {
        let a = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let lu = SparseLu::factorize(&a, None).unwrap();
        assert_eq!(lu.solve(&[2.0, 3.0]).unwrap(), vec![3.0, 2.0]);
    }

    #[test]
    fn random_nonsymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 60;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + rng.gen::<f64>()));
            for _ in 0..3 {
                t.push((i, rng.gen_range(0..n), rng.gen::<f64>() - 0.5));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 7.0).collect();
        let lu = SparseLu::factorize(&a, None).unwrap();
        let x = lu.solve(&b).unwrap();
        assert!(residual(&a, &x, &b) < 1e-12);
        let multi = lu.solve_multi(&[b.clone(), b.clone()]).unwrap();
        assert_eq!(multi[0], x);
        assert_eq!(multi[1], x);
    }

    #[test]
    fn singular_detected_and_pinned() {
        let a = CsrMatrix::<f64>::from_dense(&[vec![1.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 1.0]]);
        assert!(matches!(SparseLu::factorize(&a, None), Err(Error::Singular { .. })));
        let lu = SparseLu::factorize(&a, Some(0)).unwrap();
        let x = lu.solve(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 1.0).abs() < 1e-14 && (x[2] - 2.0).abs() < 1e-14);
    }
}
