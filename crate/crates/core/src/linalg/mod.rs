//! Sparse matrices, direct factorizations and Krylov iterations.

mod csr;
mod krylov;
mod ldlt;
mod lu;
mod ordering;

pub use csr::CsrMatrix;
pub(crate) use csr::norm2;
pub use krylov::{krylov_solve, KrylovConfig, KrylovMethod, KrylovOutcome, Preconditioner};
pub use ldlt::LdltFactorization;
pub use lu::SparseLu;
pub use ordering::{amd_order, inverse_permutation};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Assembled linear system on a box of cells.
#[derive(Clone, Debug)]
pub struct SparseSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    pub dims: [usize; 3],
}

impl<T: Real> SparseSystem<T> {
    pub fn new(matrix: CsrMatrix<T>, rhs: Vec<T>, dims: [usize; 3]) -> Result<Self> {
        if !matrix.is_square() || matrix.n_rows() != rhs.len() || dims.iter().product::<usize>() != rhs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix, rhs {}, dims {dims:?}",
                matrix.n_rows(),
                matrix.n_cols(),
                rhs.len()
            )));
        }
        Ok(Self { matrix, rhs, dims })
    }

    pub fn unknowns(&self) -> usize {
        self.rhs.len()
    }

    /// Factors the matrix, pinning unknown `pin` to zero when given.
    pub fn factorize(&self, pin: Option<usize>) -> Result<LdltFactorization<T>> {
        LdltFactorization::factorize(&self.matrix, pin)
    }

    pub fn residual_norm(&self, x: &[T]) -> T {
        let ax = self.matrix.matvec(x);
        norm2(&ax.iter().zip(&self.rhs).map(|(&a, &b)| a - b).collect::<Vec<_>>())
    }
}
