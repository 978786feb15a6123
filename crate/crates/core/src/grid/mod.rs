//! Structured hexahedral grids with cell-centred scalar fields and
//! face-centred normal flux fields.
//!
//! Cells are numbered x1-fastest: `c = i + n1 * (j + n2 * k)`. Faces
//! perpendicular to axis `a` form a `(n_a + 1)`-extended lattice numbered the
//! same way, and every stored flux is oriented along the positive axis.

mod io;
mod permeability;

pub use io::{
    export_spe10, import_spe10, parse_spe10, read_field_dump, write_field_dump, FIELD_DUMP_MAGIC,
};
pub use permeability::{ChannelFieldParams, PermeabilityField};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// The two axes tangential to `axis`, in increasing order.
#[inline]
pub fn tangential_axes(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructuredGrid<T> {
    dims: [usize; 3],
    extents: [T; 3],
}

impl<T: Real> StructuredGrid<T> {
    pub fn new(dims: [usize; 3], extents: [T; 3]) -> Result<Self> {
        if dims.iter().any(|&n| n == 0) {
            return Err(invalid(format!("grid dimensions must be positive, got {dims:?}")));
        }
        if extents.iter().any(|&l| !(l > T::zero()) || !l.is_finite()) {
            return Err(invalid(format!("grid extents must be positive, got {extents:?}")));
        }
        Ok(Self { dims, extents })
    }

    /// Grid sharing the spacing `h` with `dims` cells per axis.
    pub fn with_spacing(dims: [usize; 3], h: [T; 3]) -> Result<Self> {
        Self::new(dims, [0, 1, 2].map(|a| h[a] * T::count(dims[a])))
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn extents(&self) -> [T; 3] {
        self.extents
    }

    #[inline]
    pub fn spacing(&self) -> [T; 3] {
        [0, 1, 2].map(|a| self.extents[a] / T::count(self.dims[a]))
    }

    pub fn h_min(&self) -> T {
        let h = self.spacing();
        h[0].min(h[1]).min(h[2])
    }

    pub fn h_max(&self) -> T {
        let h = self.spacing();
        h[0].max(h[1]).max(h[2])
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn cell_volume(&self) -> T {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    pub fn volume(&self) -> T {
        self.extents[0] * self.extents[1] * self.extents[2]
    }

    /// Area of a face perpendicular to `axis`.
    pub fn face_area(&self, axis: usize) -> T {
        let h = self.spacing();
        let [b, c] = tangential_axes(axis);
        h[b] * h[c]
    }

    #[inline]
    pub fn cell_index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.dims[0] * (ijk[1] + self.dims[1] * ijk[2])
    }

    #[inline]
    pub fn cell_coords(&self, c: usize) -> [usize; 3] {
        let i = c % self.dims[0];
        let r = c / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    pub fn cell_center(&self, c: usize) -> [T; 3] {
        let ijk = self.cell_coords(c);
        let h = self.spacing();
        [0, 1, 2].map(|a| (T::count(ijk[a]) + T::lit(0.5)) * h[a])
    }

    /// Lattice dimensions of the faces perpendicular to `axis`.
    #[inline]
    pub fn face_dims(&self, axis: usize) -> [usize; 3] {
        let mut d = self.dims;
        d[axis] += 1;
        d
    }

    pub fn face_count(&self, axis: usize) -> usize {
        let d = self.face_dims(axis);
        d[0] * d[1] * d[2]
    }

    /// Index of the face perpendicular to `axis` at lattice position `ijk`
    /// (`ijk[axis]` ranges over `0..=n_axis`).
    #[inline]
    pub fn face_index(&self, axis: usize, ijk: [usize; 3]) -> usize {
        let d = self.face_dims(axis);
        ijk[0] + d[0] * (ijk[1] + d[1] * ijk[2])
    }

    /// Grid covering `cells` with the same spacing.
    pub fn subgrid(&self, cells: &CellBox) -> Result<Self> {
        if !cells.fits_in(self.dims) {
            return Err(invalid(format!("box {cells:?} outside grid {:?}", self.dims)));
        }
        Self::with_spacing(cells.dims(), self.spacing())
    }

    /// Same physical domain with every axis refined by an integer factor.
    pub fn refined(&self, factors: [usize; 3]) -> Result<Self> {
        if factors.iter().any(|&f| f == 0) {
            return Err(invalid("refinement factors must be >= 1"));
        }
        Self::new([0, 1, 2].map(|a| self.dims[a] * factors[a]), self.extents)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dims == other.dims
    }
}

/// Half-open box of cell indices `lo..hi` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CellBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl CellBox {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Result<Self> {
        if (0..3).any(|a| hi[a] <= lo[a]) {
            return Err(invalid(format!("empty cell box {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn whole(dims: [usize; 3]) -> Self {
        Self { lo: [0; 3], hi: dims }
    }

    pub fn dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.hi[a] - self.lo[a])
    }

    pub fn cell_count(&self) -> usize {
        let d = self.dims();
        d[0] * d[1] * d[2]
    }

    pub fn fits_in(&self, dims: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] < self.hi[a] && self.hi[a] <= dims[a])
    }

    pub fn contains(&self, ijk: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= ijk[a] && ijk[a] < self.hi[a])
    }

    pub fn intersects(&self, other: &CellBox) -> bool {
        (0..3).all(|a| self.lo[a] < other.hi[a] && other.lo[a] < self.hi[a])
    }

    /// Global cell indices of the box in x1-fastest order.
    pub fn cells<T: Real>(&self, grid: &StructuredGrid<T>) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.cell_count());
        for k in self.lo[2]..self.hi[2] {
            for j in self.lo[1]..self.hi[1] {
                for i in self.lo[0]..self.hi[0] {
                    out.push(grid.cell_index([i, j, k]));
                }
            }
        }
        out
    }

    pub fn scaled(&self, factors: [usize; 3]) -> Self {
        Self {
            lo: [0, 1, 2].map(|a| self.lo[a] * factors[a]),
            hi: [0, 1, 2].map(|a| self.hi[a] * factors[a]),
        }
    }
}

/// One finite value per cell, x1-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct CellField<T> {
    grid: StructuredGrid<T>,
    values: Vec<T>,
}

impl<T: Real> CellField<T> {
    pub fn new(grid: StructuredGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::CountMismatch { expected: grid.cell_count(), found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite cell value at {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: StructuredGrid<T>, value: T) -> Self {
        Self { values: vec![value; grid.cell_count()], grid }
    }

    pub fn zeros(grid: StructuredGrid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn from_fn(grid: StructuredGrid<T>, mut f: impl FnMut(usize) -> T) -> Self {
        let values = (0..grid.cell_count()).map(&mut f).collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &StructuredGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, c: usize) -> T {
        self.values[c]
    }

    pub fn restrict(&self, cells: &CellBox) -> Result<Self> {
        let sub = self.grid.subgrid(cells)?;
        let values = cells.cells(&self.grid).into_iter().map(|c| self.values[c]).collect();
        Ok(Self { grid: sub, values })
    }

    /// Volume-weighted integral over the grid.
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::count(self.values.len())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Oriented normal fluxes (Darcy velocity components) on the faces of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceFluxField<T> {
    grid: StructuredGrid<T>,
    faces: [Vec<T>; 3],
}

impl<T: Real> FaceFluxField<T> {
    pub fn zeros(grid: StructuredGrid<T>) -> Self {
        let faces = [0, 1, 2].map(|a| vec![T::zero(); grid.face_count(a)]);
        Self { grid, faces }
    }

    pub fn from_axes(grid: StructuredGrid<T>, faces: [Vec<T>; 3]) -> Result<Self> {
        for a in 0..3 {
            if faces[a].len() != grid.face_count(a) {
                return Err(Error::CountMismatch {
                    expected: grid.face_count(a),
                    found: faces[a].len(),
                });
            }
            if faces[a].iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("non-finite flux on axis {a}")));
            }
        }
        Ok(Self { grid, faces })
    }

    /// Uniform velocity `v` on every face.
    pub fn uniform(grid: StructuredGrid<T>, v: [T; 3]) -> Self {
        let faces = [0, 1, 2].map(|a| vec![v[a]; grid.face_count(a)]);
        Self { grid, faces }
    }

    #[inline]
    pub fn grid(&self) -> &StructuredGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn axis(&self, a: usize) -> &[T] {
        &self.faces[a]
    }

    #[inline]
    pub fn axis_mut(&mut self, a: usize) -> &mut [T] {
        &mut self.faces[a]
    }

    #[inline]
    pub fn get(&self, a: usize, ijk: [usize; 3]) -> T {
        self.faces[a][self.grid.face_index(a, ijk)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, ijk: [usize; 3], v: T) {
        let idx = self.grid.face_index(a, ijk);
        self.faces[a][idx] = v;
    }

    pub fn scaled(&self, s: T) -> Self {
        let faces = [0, 1, 2].map(|a| self.faces[a].iter().map(|&v| v * s).collect());
        Self { grid: self.grid, faces }
    }

    pub fn max_abs(&self) -> T {
        self.faces.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Outward fluxes of cell `c` through its six faces, ordered
    /// `[-x1, +x1, -x2, +x2, -x3, +x3]`.
    pub fn cell_outflux(&self, c: usize) -> [T; 6] {
        let ijk = self.grid.cell_coords(c);
        let mut out = [T::zero(); 6];
        for a in 0..3 {
            let mut hi = ijk;
            hi[a] += 1;
            out[2 * a] = -self.get(a, ijk);
            out[2 * a + 1] = self.get(a, hi);
        }
        out
    }
}

/// Water saturation, bounded to `[0, 1]` in every cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SaturationField<T>(CellField<T>);

impl<T: Real> SaturationField<T> {
    pub fn new(field: CellField<T>) -> Result<Self> {
        if let Some((cell, v)) =
            field.values().iter().enumerate().find(|(_, &s)| !(s >= T::zero() && s <= T::one()))
        {
            return Err(invalid(format!("saturation {v} outside [0, 1] in cell {cell}")));
        }
        Ok(Self(field))
    }

    pub fn constant(grid: StructuredGrid<T>, s: T) -> Result<Self> {
        Self::new(CellField::constant(grid, s))
    }

    pub fn field(&self) -> &CellField<T> {
        &self.0
    }

    pub fn values(&self) -> &[T] {
        self.0.values()
    }

    pub fn grid(&self) -> &StructuredGrid<T> {
        self.0.grid()
    }

    pub fn into_field(self) -> CellField<T> {
        self.0
    }
}
