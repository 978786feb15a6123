//! Two-point flux finite volumes for `∇·u = f`, `u = −K̂∇p` on a box grid.
//!
//! Rows are scaled per unit cell volume, so interior couplings are `K̃/h²`
//! with `K̃` the harmonic mean of the two cell values. Face velocities are
//! `u = −K̃ (p_hi − p_lo)/h`. Boundary faces close with a half-cell
//! transmissibility `T′ = 2K̂/h`, and every closure is written as an outward
//! flux `q = a·p_cell − b`.

use crate::error::{invalid, Error, Result};
use crate::grid::{tangential_axes, CellField, FaceFluxField, PermeabilityField, StructuredGrid};
use crate::linalg::{CsrMatrix, SparseSystem};
use crate::scalar::Real;

/// Condition on one boundary face. Neumann data is the outward flux
/// `u·n̂`; Robin data `r` is the right-hand side of `−β u·n̂ + p = r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FaceCondition<T> {
    Dirichlet(T),
    Neumann(T),
    Robin { beta: T, r: T },
}

impl<T: Real> FaceCondition<T> {
    /// Coefficients `(a, b)` of the outward flux `q = a·p_cell − b`.
    #[inline]
    pub fn closure(&self, t_half: T) -> (T, T) {
        match *self {
            FaceCondition::Dirichlet(g) => (t_half, t_half * g),
            FaceCondition::Neumann(g) => (T::zero(), -g),
            FaceCondition::Robin { beta, r } => {
                let t = T::one() / (beta + T::one() / t_half);
                (t, t * r)
            }
        }
    }

    pub fn is_neumann(&self) -> bool {
        matches!(self, FaceCondition::Neumann(_))
    }

    /// Same kind and β, which is all the matrix depends on.
    pub fn same_kind(&self, other: &Self) -> bool {
        match (self, other) {
            (FaceCondition::Dirichlet(_), FaceCondition::Dirichlet(_)) => true,
            (FaceCondition::Neumann(_), FaceCondition::Neumann(_)) => true,
            (FaceCondition::Robin { beta: a, .. }, FaceCondition::Robin { beta: b, .. }) => a == b,
            _ => false,
        }
    }
}

/// Boundary side `2·axis + 0` is the low face of `axis`, `2·axis + 1` the high one.
#[inline]
pub fn side_of(axis: usize, high: bool) -> usize {
    2 * axis + usize::from(high)
}

/// Conditions on every exterior face of a box, stored per side. Faces on a
/// side are numbered by their tangential cell coordinates, lower axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySpec<T> {
    dims: [usize; 3],
    sides: [Vec<FaceCondition<T>>; 6],
}

impl<T: Real> BoundarySpec<T> {
    pub fn uniform(dims: [usize; 3], cond: FaceCondition<T>) -> Self {
        let sides = [0, 1, 2, 3, 4, 5].map(|s| vec![cond; Self::side_len(dims, s)]);
        Self { dims, sides }
    }

    pub fn no_flow(dims: [usize; 3]) -> Self {
        Self::uniform(dims, FaceCondition::Neumann(T::zero()))
    }

    /// Builds every face condition from `(side, cell coordinates)`.
    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, [usize; 3]) -> FaceCondition<T>) -> Self {
        let sides = [0, 1, 2, 3, 4, 5].map(|s| {
            let axis = s / 2;
            let [t0, t1] = tangential_axes(axis);
            let mut v = Vec::with_capacity(Self::side_len(dims, s));
            for b in 0..dims[t1] {
                for a in 0..dims[t0] {
                    let mut ijk = [0; 3];
                    ijk[axis] = if s % 2 == 1 { dims[axis] - 1 } else { 0 };
                    ijk[t0] = a;
                    ijk[t1] = b;
                    v.push(f(s, ijk));
                }
            }
            v
        });
        Self { dims, sides }
    }

    pub fn side_len(dims: [usize; 3], side: usize) -> usize {
        let [t0, t1] = tangential_axes(side / 2);
        dims[t0] * dims[t1]
    }

    /// Position on `side` of the boundary face touching cell `ijk`.
    #[inline]
    pub fn face_on_side(dims: [usize; 3], side: usize, ijk: [usize; 3]) -> usize {
        let [t0, t1] = tangential_axes(side / 2);
        ijk[t0] + dims[t0] * ijk[t1]
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn side(&self, side: usize) -> &[FaceCondition<T>] {
        &self.sides[side]
    }

    pub fn side_mut(&mut self, side: usize) -> &mut [FaceCondition<T>] {
        &mut self.sides[side]
    }

    #[inline]
    pub fn get(&self, side: usize, ijk: [usize; 3]) -> FaceCondition<T> {
        self.sides[side][Self::face_on_side(self.dims, side, ijk)]
    }

    pub fn set(&mut self, side: usize, ijk: [usize; 3], cond: FaceCondition<T>) {
        let i = Self::face_on_side(self.dims, side, ijk);
        self.sides[side][i] = cond;
    }

    pub fn set_side(&mut self, side: usize, cond: FaceCondition<T>) {
        self.sides[side].iter_mut().for_each(|c| *c = cond);
    }

    /// True when every face is Neumann, so pressure is fixed only up to a constant.
    pub fn is_pure_neumann(&self) -> bool {
        self.sides.iter().flatten().all(FaceCondition::is_neumann)
    }

    pub fn validate(&self) -> Result<()> {
        for (s, side) in self.sides.iter().enumerate() {
            if side.len() != Self::side_len(self.dims, s) {
                return Err(Error::CountMismatch { expected: Self::side_len(self.dims, s), found: side.len() });
            }
            for (i, c) in side.iter().enumerate() {
                let ok = match *c {
                    FaceCondition::Dirichlet(g) | FaceCondition::Neumann(g) => g.is_finite(),
                    FaceCondition::Robin { beta, r } => beta > T::zero() && beta.is_finite() && r.is_finite(),
                };
                if !ok {
                    return Err(invalid(format!("bad boundary condition {c:?} at side {s}, face {i}")));
                }
            }
        }
        Ok(())
    }

    /// Net outward boundary flux `Σ q·A` implied by Neumann data.
    pub fn neumann_outflow(&self, grid: &StructuredGrid<T>) -> T {
        let mut total = T::zero();
        for (s, side) in self.sides.iter().enumerate() {
            let area = grid.face_area(s / 2);
            for c in side {
                if let FaceCondition::Neumann(g) = *c {
                    total += g * area;
                }
            }
        }
        total
    }

    /// `Σ |g|·A` over Neumann faces, the scale of the boundary data.
    pub fn neumann_outflow_abs(&self, grid: &StructuredGrid<T>) -> T {
        let mut total = T::zero();
        for (s, side) in self.sides.iter().enumerate() {
            let area = grid.face_area(s / 2);
            for c in side {
                if let FaceCondition::Neumann(g) = *c {
                    total += g.abs() * area;
                }
            }
        }
        total
    }
}

/// `K̃ / h²` for the face between cells with values `ka` and `kb`.
pub fn harmonic_transmissibility<T: Real>(ka: T, kb: T, h: T) -> Result<T> {
    if !(ka > T::zero()) || !(kb > T::zero()) || !(h > T::zero()) {
        return Err(invalid(format!("harmonic transmissibility needs positive inputs, got {ka}, {kb}, {h}")));
    }
    Ok(harmonic(ka, kb) / (h * h))
}

#[inline]
pub(crate) fn harmonic<T: Real>(ka: T, kb: T) -> T {
    T::lit(2.0) * ka * kb / (ka + kb)
}

fn check_shapes<T: Real>(k: &PermeabilityField<T>, bc: &BoundarySpec<T>) -> Result<()> {
    if bc.dims() != k.grid().dims() {
        return Err(Error::ShapeMismatch(format!(
            "boundary spec for {:?} on grid {:?}",
            bc.dims(),
            k.grid().dims()
        )));
    }
    bc.validate()
}

/// Visits, for every cell, its boundary faces as `(cell, side, condition)`.
fn for_each_boundary_face<T: Real>(
    grid: &StructuredGrid<T>,
    c: usize,
    bc: &BoundarySpec<T>,
    mut f: impl FnMut(usize, FaceCondition<T>),
) {
    let dims = grid.dims();
    let ijk = grid.cell_coords(c);
    for a in 0..3 {
        if ijk[a] == 0 {
            f(side_of(a, false), bc.get(side_of(a, false), ijk));
        }
        if ijk[a] + 1 == dims[a] {
            f(side_of(a, true), bc.get(side_of(a, true), ijk));
        }
    }
}

/// Seven-point matrix. Depends on the kinds and β of `bc`, not on its data.
pub fn assemble_matrix<T: Real>(k: &PermeabilityField<T>, bc: &BoundarySpec<T>) -> Result<CsrMatrix<T>> {
    check_shapes(k, bc)?;
    let grid = k.grid();
    let dims = grid.dims();
    let h = grid.spacing();
    let n = grid.cell_count();
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(7 * n);
    let mut values = Vec::with_capacity(7 * n);
    row_ptr.push(0);
    for c in 0..n {
        let ijk = grid.cell_coords(c);
        let mut lower = Vec::with_capacity(3);
        let mut upper = Vec::with_capacity(3);
        let mut diag = T::zero();
        for a in 0..3 {
            let kc = k.get(c, a);
            if ijk[a] > 0 {
                let t = harmonic(kc, k.get(c - strides[a], a)) / (h[a] * h[a]);
                lower.push((c - strides[a], -t));
                diag += t;
            }
            if ijk[a] + 1 < dims[a] {
                let t = harmonic(kc, k.get(c + strides[a], a)) / (h[a] * h[a]);
                upper.push((c + strides[a], -t));
                diag += t;
            }
        }
        for_each_boundary_face(grid, c, bc, |side, cond| {
            let a = side / 2;
            let (coef, _) = cond.closure(T::lit(2.0) * k.get(c, a) / h[a]);
            diag += coef / h[a];
        });
        lower.sort_by_key(|e| e.0);
        upper.sort_by_key(|e| e.0);
        for (j, v) in lower.into_iter().chain(std::iter::once((c, diag))).chain(upper) {
            col_idx.push(j);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    CsrMatrix::new(n, n, row_ptr, col_idx, values)
}

/// Right-hand side: source term plus boundary data.
pub fn assemble_rhs<T: Real>(k: &PermeabilityField<T>, bc: &BoundarySpec<T>, f: &CellField<T>) -> Result<Vec<T>> {
    check_shapes(k, bc)?;
    let grid = k.grid();
    if !f.grid().same_shape(grid) {
        return Err(Error::ShapeMismatch("source field does not match grid".into()));
    }
    let h = grid.spacing();
    let mut rhs = f.values().to_vec();
    for (c, rc) in rhs.iter_mut().enumerate() {
        for_each_boundary_face(grid, c, bc, |side, cond| {
            let a = side / 2;
            let (_, b) = cond.closure(T::lit(2.0) * k.get(c, a) / h[a]);
            *rc += b / h[a];
        });
    }
    Ok(rhs)
}

pub fn assemble<T: Real>(k: &PermeabilityField<T>, bc: &BoundarySpec<T>, f: &CellField<T>) -> Result<SparseSystem<T>> {
    let matrix = assemble_matrix(k, bc)?;
    let rhs = assemble_rhs(k, bc, f)?;
    SparseSystem::new(matrix, rhs, k.grid().dims())
}

/// Outward flux through one boundary face of cell `c`.
#[inline]
pub fn boundary_outflux<T: Real>(k: &PermeabilityField<T>, c: usize, side: usize, cond: FaceCondition<T>, p_cell: T) -> T {
    let a = side / 2;
    let h = k.grid().spacing()[a];
    let (coef, b) = cond.closure(T::lit(2.0) * k.get(c, a) / h);
    coef * p_cell - b
}

/// Face velocities from cell pressures using the same closures as assembly.
pub fn recover_fluxes<T: Real>(
    p: &CellField<T>,
    k: &PermeabilityField<T>,
    bc: &BoundarySpec<T>,
) -> Result<FaceFluxField<T>> {
    check_shapes(k, bc)?;
    let grid = *k.grid();
    if !p.grid().same_shape(&grid) {
        return Err(Error::ShapeMismatch("pressure field does not match grid".into()));
    }
    let dims = grid.dims();
    let h = grid.spacing();
    let mut u = FaceFluxField::zeros(grid);
    for a in 0..3 {
        let fd = grid.face_dims(a);
        let stride = [1, dims[0], dims[0] * dims[1]][a];
        let out = u.axis_mut(a);
        for kk in 0..fd[2] {
            for j in 0..fd[1] {
                for i in 0..fd[0] {
                    let lat = [i, j, kk];
                    let idx = i + fd[0] * (j + fd[1] * kk);
                    let m = lat[a];
                    let mut cell = lat;
                    if m == 0 {
                        let c = grid.cell_index(cell);
                        let q = boundary_outflux(k, c, side_of(a, false), bc.get(side_of(a, false), cell), p.get(c));
                        out[idx] = -q;
                    } else if m == dims[a] {
                        cell[a] = m - 1;
                        let c = grid.cell_index(cell);
                        out[idx] = boundary_outflux(k, c, side_of(a, true), bc.get(side_of(a, true), cell), p.get(c));
                    } else {
                        cell[a] = m - 1;
                        let lo = grid.cell_index(cell);
                        let hi = lo + stride;
                        let kt = harmonic(k.get(lo, a), k.get(hi, a));
                        out[idx] = -kt * (p.get(hi) - p.get(lo)) / h[a];
                    }
                }
            }
        }
    }
    Ok(u)
}

/// Per-cell `∇·u − f`, with the divergence taken per unit volume.
pub fn cell_mass_residual<T: Real>(u: &FaceFluxField<T>, f: &CellField<T>) -> Result<CellField<T>> {
    let grid = *u.grid();
    if !f.grid().same_shape(&grid) {
        return Err(Error::ShapeMismatch("source field does not match flux grid".into()));
    }
    let h = grid.spacing();
    let values = (0..grid.cell_count())
        .map(|c| {
            let o = u.cell_outflux(c);
            (o[0] + o[1]) / h[0] + (o[2] + o[3]) / h[1] + (o[4] + o[5]) / h[2] - f.get(c)
        })
        .collect();
    CellField::new(grid, values)
}
