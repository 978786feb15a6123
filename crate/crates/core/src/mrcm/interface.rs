use super::local::MbfSet;
use crate::error::{Error, Result};
use crate::linalg::{norm2, CsrMatrix, SparseLu};
use crate::scalar::Real;

/// Coupled system for `X = (π^p, π^u)`, both of length `N_V`.
///
/// Row `i` enforces weak flux continuity on the support of basis `i`.
/// Row `N_V + i` sets `π^u_i` to the β-weighted average of the two one-sided
/// normal fluxes.
#[derive(Clone, Debug)]
pub struct InterfaceSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    pub n_basis: usize,
    /// `π^p_0` is fixed to zero when the global problem only sees Neumann data.
    pub pin: Option<usize>,
}

impl<T: Real> InterfaceSystem<T> {
    pub fn dim(&self) -> usize {
        2 * self.n_basis
    }

    /// `‖A X − b‖ / ‖b‖`, skipping the pinned row.
    pub fn relative_residual(&self, x: &[T]) -> T {
        let ax = self.matrix.matvec(x);
        let mut r: Vec<T> = ax.iter().zip(&self.rhs).map(|(&a, &b)| a - b).collect();
        let mut b = self.rhs.clone();
        if let Some(p) = self.pin {
            r[p] = T::zero();
            b[p] = T::zero();
        }
        let bn = norm2(&b);
        if bn == T::zero() {
            norm2(&r)
        } else {
            norm2(&r) / bn
        }
    }
}

/// Contributions of one subdomain as `(row, col, value)` triplets plus rhs entries.
pub(crate) fn subdomain_contributions<T: Real>(
    set: &MbfSet<T>,
    n_basis: usize,
) -> (Vec<(usize, usize, T)>, Vec<(usize, T)>) {
    let m = set.active_len();
    let active = &set.problem.active;
    let mut trip = Vec::with_capacity(set.problem.faces.len() * (4 * m + 1));
    let mut rhs = Vec::with_capacity(2 * set.problem.faces.len());
    for (f, face) in set.problem.faces.iter().enumerate() {
        let i = face.basis;
        let w = face.area;
        let wb = face.area * face.beta * face.sign;
        for j in 1..=2 * m {
            let col = if j <= m { active[j - 1] } else { n_basis + active[j - 1 - m] };
            let q = set.traces[j][f];
            trip.push((i, col, w * q));
            trip.push((n_basis + i, col, wb * q));
        }
        trip.push((n_basis + i, n_basis + i, -face.area * face.beta));
        let qbar = set.traces[0][f];
        rhs.push((i, -w * qbar));
        rhs.push((n_basis + i, -wb * qbar));
    }
    (trip, rhs)
}

/// Sums the subdomain contributions in subdomain order.
pub fn assemble_interface<T: Real>(mbfs: &[MbfSet<T>], n_basis: usize, pin: bool) -> Result<InterfaceSystem<T>> {
    for (l, set) in mbfs.iter().enumerate() {
        if set.problem.subdomain != l || set.traces.len() != 2 * set.active_len() + 1 {
            return Err(Error::MissingMbf(l));
        }
    }
    let parts: Vec<_> = mbfs.iter().map(|s| subdomain_contributions(s, n_basis)).collect();
    assemble_from_parts(parts, n_basis, pin)
}

pub(crate) fn assemble_from_parts<T: Real>(
    parts: Vec<(Vec<(usize, usize, T)>, Vec<(usize, T)>)>,
    n_basis: usize,
    pin: bool,
) -> Result<InterfaceSystem<T>> {
    let dim = 2 * n_basis;
    let mut triplets = Vec::with_capacity(parts.iter().map(|p| p.0.len()).sum());
    let mut rhs = vec![T::zero(); dim];
    for (t, r) in parts {
        triplets.extend(t);
        for (i, v) in r {
            rhs[i] += v;
        }
    }
    let matrix = CsrMatrix::from_triplets(dim, dim, &triplets)?;
    let pin = (pin && n_basis > 0).then_some(0);
    if pin.is_some() {
        rhs[0] = T::zero();
    }
    Ok(InterfaceSystem { matrix, rhs, n_basis, pin })
}

/// Sparse LU solve of the interface system.
pub fn solve_interface<T: Real>(system: &InterfaceSystem<T>) -> Result<Vec<T>> {
    if system.n_basis == 0 {
        return Ok(Vec::new());
    }
    SparseLu::factorize(&system.matrix, system.pin)?.solve(&system.rhs)
}
