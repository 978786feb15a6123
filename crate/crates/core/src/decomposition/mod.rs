//! Non-overlapping box decomposition, the interface skeleton, the
//! piecewise-constant interface space and the Robin parameter field.
//!
//! Subdomains are numbered `l = i + N1 (j + N2 k)`. Patches are listed axis by
//! axis, each owned by the pair `(l, l + stride)` with fixed normal `+e_axis`,
//! so the lower subdomain sees sign `+1` and the upper one `-1`.

use crate::error::{invalid, Error, Result};
use crate::fv::{side_of, BoundarySpec};
use crate::grid::{tangential_axes, CellBox, PermeabilityField, StructuredGrid};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Subdomain {
    pub index: usize,
    pub coords: [usize; 3],
    pub cells: CellBox,
}

/// Interface between two face-adjacent subdomains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InterfacePatch {
    pub index: usize,
    pub lower: usize,
    pub upper: usize,
    pub axis: usize,
    /// Face lattice coordinate along `axis`.
    pub plane: usize,
    /// Global tangential cell ranges `lo..hi`, for the two tangential axes in order.
    pub lo: [usize; 2],
    pub hi: [usize; 2],
    /// First global skeleton face id of the patch.
    pub face_offset: usize,
}

impl InterfacePatch {
    pub fn face_count(&self) -> usize {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }

    pub fn tangential_dims(&self) -> [usize; 2] {
        [self.hi[0] - self.lo[0], self.hi[1] - self.lo[1]]
    }
}

/// How subdomain `l` meets a patch on one of its sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchSide {
    pub patch: usize,
    /// `n̂ · n̂^l`: +1 when `l` is the lower subdomain.
    pub sign: i8,
    /// Slot of `l` in two-sided per-face arrays (0 lower, 1 upper).
    pub slot: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainDecomposition<T> {
    grid: StructuredGrid<T>,
    counts: [usize; 3],
    sub_dims: [usize; 3],
    subdomains: Vec<Subdomain>,
    patches: Vec<InterfacePatch>,
    skeleton_faces: usize,
}

pub fn decompose<T: Real>(grid: &StructuredGrid<T>, counts: [usize; 3]) -> Result<DomainDecomposition<T>> {
    DomainDecomposition::new(grid, counts)
}

impl<T: Real> DomainDecomposition<T> {
    pub fn new(grid: &StructuredGrid<T>, counts: [usize; 3]) -> Result<Self> {
        let dims = grid.dims();
        if counts.iter().any(|&c| c == 0) || (0..3).any(|a| dims[a] % counts[a] != 0) {
            return Err(invalid(format!("subdomain counts {counts:?} do not divide grid {dims:?}")));
        }
        let sub_dims = [0, 1, 2].map(|a| dims[a] / counts[a]);
        let n_sub = counts.iter().product();
        let subdomains = (0..n_sub)
            .map(|index| {
                let coords = [index % counts[0], (index / counts[0]) % counts[1], index / (counts[0] * counts[1])];
                let lo = [0, 1, 2].map(|a| coords[a] * sub_dims[a]);
                let hi = [0, 1, 2].map(|a| lo[a] + sub_dims[a]);
                Subdomain { index, coords, cells: CellBox { lo, hi } }
            })
            .collect::<Vec<_>>();
        let strides = [1, counts[0], counts[0] * counts[1]];
        let mut patches = Vec::new();
        let mut face_offset = 0;
        for axis in 0..3 {
            let [t0, t1] = tangential_axes(axis);
            for s in &subdomains {
                if s.coords[axis] + 1 == counts[axis] {
                    continue;
                }
                let p = InterfacePatch {
                    index: patches.len(),
                    lower: s.index,
                    upper: s.index + strides[axis],
                    axis,
                    plane: s.cells.hi[axis],
                    lo: [s.cells.lo[t0], s.cells.lo[t1]],
                    hi: [s.cells.hi[t0], s.cells.hi[t1]],
                    face_offset,
                };
                face_offset += p.face_count();
                patches.push(p);
            }
        }
        Ok(Self { grid: *grid, counts, sub_dims, subdomains, patches, skeleton_faces: face_offset })
    }

    pub fn grid(&self) -> &StructuredGrid<T> {
        &self.grid
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    /// Cells per subdomain along each axis.
    pub fn sub_dims(&self) -> [usize; 3] {
        self.sub_dims
    }

    /// Physical subdomain size `H` per axis.
    pub fn sub_size(&self) -> [T; 3] {
        let h = self.grid.spacing();
        [0, 1, 2].map(|a| h[a] * T::count(self.sub_dims[a]))
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn subdomain_count(&self) -> usize {
        self.subdomains.len()
    }

    pub fn patches(&self) -> &[InterfacePatch] {
        &self.patches
    }

    pub fn skeleton_face_count(&self) -> usize {
        self.skeleton_faces
    }

    pub fn subgrid(&self) -> StructuredGrid<T> {
        StructuredGrid::with_spacing(self.sub_dims, self.grid.spacing()).expect("positive subdomain dims")
    }

    pub fn subdomain_of_cell(&self, ijk: [usize; 3]) -> usize {
        let c = [0, 1, 2].map(|a| ijk[a] / self.sub_dims[a]);
        c[0] + self.counts[0] * (c[1] + self.counts[1] * c[2])
    }

    /// Patch on each of the six sides of subdomain `l` (`None` on the exterior boundary).
    pub fn sides_of(&self, l: usize) -> [Option<PatchSide>; 6] {
        let s = &self.subdomains[l];
        let mut out = [None; 6];
        for axis in 0..3 {
            if s.coords[axis] > 0 {
                let below = l - [1, self.counts[0], self.counts[0] * self.counts[1]][axis];
                out[side_of(axis, false)] =
                    Some(PatchSide { patch: self.patch_between(below, axis), sign: -1, slot: 1 });
            }
            if s.coords[axis] + 1 < self.counts[axis] {
                out[side_of(axis, true)] = Some(PatchSide { patch: self.patch_between(l, axis), sign: 1, slot: 0 });
            }
        }
        out
    }

    /// Index of the patch whose lower subdomain is `lower`, normal to `axis`.
    fn patch_between(&self, lower: usize, axis: usize) -> usize {
        let c = self.subdomains[lower].coords;
        let n = self.counts;
        // patches of earlier axes come first
        let mut offset = 0;
        for a in 0..axis {
            offset += (n[a] - 1) * n.iter().enumerate().filter(|&(b, _)| b != a).map(|(_, &v)| v).product::<usize>();
        }
        let mut dims = n;
        dims[axis] -= 1;
        offset + c[0] + dims[0] * (c[1] + dims[1] * c[2])
    }

    /// Global skeleton face id of the face on `side` of subdomain-local cell `ijk`.
    pub fn skeleton_face(&self, l: usize, side: usize, ijk: [usize; 3]) -> Option<usize> {
        let ps = self.sides_of(l)[side]?;
        let p = &self.patches[ps.patch];
        Some(p.face_offset + BoundarySpec::<T>::face_on_side(self.sub_dims, side, ijk))
    }

    /// Patch and lattice position of every skeleton face, by global id.
    pub fn skeleton_face_location(&self, face: usize) -> (usize, [usize; 3]) {
        let p = self.patch_of_face(face);
        let patch = &self.patches[p];
        let local = face - patch.face_offset;
        let td = patch.tangential_dims();
        let [t0, t1] = tangential_axes(patch.axis);
        let mut ijk = [0; 3];
        ijk[patch.axis] = patch.plane;
        ijk[t0] = patch.lo[0] + local % td[0];
        ijk[t1] = patch.lo[1] + local / td[0];
        (p, ijk)
    }

    pub fn patch_of_face(&self, face: usize) -> usize {
        self.patches.partition_point(|p| p.face_offset + p.face_count() <= face)
    }

    /// Global skeleton face id of the grid face `(axis, lattice ijk)`, if it lies on Γ.
    pub fn skeleton_face_at(&self, axis: usize, ijk: [usize; 3]) -> Option<usize> {
        let m = ijk[axis];
        if m == 0 || m >= self.grid.dims()[axis] || m % self.sub_dims[axis] != 0 {
            return None;
        }
        let mut cell = ijk;
        cell[axis] = m - 1;
        let lower = self.subdomain_of_cell(cell);
        let local = [0, 1, 2].map(|a| cell[a] - self.subdomains[lower].cells.lo[a]);
        self.skeleton_face(lower, side_of(axis, true), local)
    }
}

/// Piecewise-constant interface space, shared by the pressure and flux
/// multipliers. `coarsening[a]` is the number of fine cells per basis
/// function along axis `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceSpace {
    coarsening: [usize; 3],
    patch_offset: Vec<usize>,
    patch_bases: Vec<[usize; 2]>,
    n_basis: usize,
    /// Per subdomain, the global bases touching it, in side order.
    active: Vec<Vec<usize>>,
}

pub fn build_interface_space<T: Real>(dd: &DomainDecomposition<T>, coarsening: [usize; 3]) -> Result<InterfaceSpace> {
    InterfaceSpace::new(dd, coarsening)
}

impl InterfaceSpace {
    pub fn new<T: Real>(dd: &DomainDecomposition<T>, coarsening: [usize; 3]) -> Result<Self> {
        let sd = dd.sub_dims();
        for a in 0..3 {
            if coarsening[a] == 0 || coarsening[a] > sd[a] || sd[a] % coarsening[a] != 0 {
                return Err(invalid(format!(
                    "interface coarsening {coarsening:?} must divide subdomain size {sd:?}"
                )));
            }
        }
        let mut patch_offset = Vec::with_capacity(dd.patches().len());
        let mut patch_bases = Vec::with_capacity(dd.patches().len());
        let mut n_basis = 0;
        for p in dd.patches() {
            let [t0, t1] = tangential_axes(p.axis);
            let nb = [sd[t0] / coarsening[t0], sd[t1] / coarsening[t1]];
            patch_offset.push(n_basis);
            patch_bases.push(nb);
            n_basis += nb[0] * nb[1];
        }
        let active = (0..dd.subdomain_count())
            .map(|l| {
                dd.sides_of(l)
                    .iter()
                    .flatten()
                    .flat_map(|ps| {
                        let nb = patch_bases[ps.patch];
                        let o = patch_offset[ps.patch];
                        o..o + nb[0] * nb[1]
                    })
                    .collect()
            })
            .collect();
        Ok(Self { coarsening, patch_offset, patch_bases, n_basis, active })
    }

    pub fn coarsening(&self) -> [usize; 3] {
        self.coarsening
    }

    /// Number of basis functions `N_V`.
    pub fn len(&self) -> usize {
        self.n_basis
    }

    pub fn is_empty(&self) -> bool {
        self.n_basis == 0
    }

    pub fn active(&self, l: usize) -> &[usize] {
        &self.active[l]
    }

    pub fn patch_range(&self, patch: usize) -> std::ops::Range<usize> {
        let nb = self.patch_bases[patch];
        self.patch_offset[patch]..self.patch_offset[patch] + nb[0] * nb[1]
    }

    /// Basis supported on the patch face with tangential offsets `(a, b)`.
    #[inline]
    pub fn basis_of(&self, patch: usize, axis: usize, a: usize, b: usize) -> usize {
        let [t0, t1] = tangential_axes(axis);
        let nb = self.patch_bases[patch];
        self.patch_offset[patch] + a / self.coarsening[t0] + nb[0] * (b / self.coarsening[t1])
    }

    /// Basis of a global skeleton face.
    pub fn basis_of_face<T: Real>(&self, dd: &DomainDecomposition<T>, face: usize) -> usize {
        let p = dd.patch_of_face(face);
        let patch = &dd.patches()[p];
        let local = face - patch.face_offset;
        let td = patch.tangential_dims();
        self.basis_of(p, patch.axis, local % td[0], local / td[0])
    }

    /// Global skeleton faces forming the support of each basis function.
    pub fn supports<T: Real>(&self, dd: &DomainDecomposition<T>) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_basis];
        for f in 0..dd.skeleton_face_count() {
            out[self.basis_of_face(dd, f)].push(f);
        }
        out
    }
}

/// Closed-form basis count: `Σ_a (N_a − 1) Π_{b≠a} N_b · Π_{b≠a} H_b/H̄_b`.
pub fn interface_dof_count(counts: [usize; 3], sub_dims: [usize; 3], coarsening: [usize; 3]) -> usize {
    (0..3)
        .map(|a| {
            let [t0, t1] = tangential_axes(a);
            (counts[a] - 1) * counts[t0] * counts[t1] * (sub_dims[t0] / coarsening[t0]) * (sub_dims[t1] / coarsening[t1])
        })
        .sum()
}

/// Two-sided Robin weights on the skeleton, `β = α H_n / K̂_n` in the adjacent cell.
#[derive(Clone, Debug, PartialEq)]
pub struct RobinParams<T> {
    pub alpha: T,
    /// Indexed by global skeleton face; slot 0 is the lower subdomain's side.
    pub beta: Vec<[T; 2]>,
}

pub fn compute_robin_params<T: Real>(
    dd: &DomainDecomposition<T>,
    k: &PermeabilityField<T>,
    alpha: T,
) -> Result<RobinParams<T>> {
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(invalid(format!("Robin parameter alpha must be positive, got {alpha}")));
    }
    if !k.grid().same_shape(dd.grid()) {
        return Err(Error::ShapeMismatch("permeability does not match decomposition grid".into()));
    }
    let grid = dd.grid();
    let hsub = dd.sub_size();
    let mut beta = vec![[T::zero(); 2]; dd.skeleton_face_count()];
    for (f, b) in beta.iter_mut().enumerate() {
        let (p, ijk) = dd.skeleton_face_location(f);
        let axis = dd.patches()[p].axis;
        let mut lo = ijk;
        lo[axis] -= 1;
        let c_lo = grid.cell_index(lo);
        let c_hi = grid.cell_index(ijk);
        *b = [alpha * hsub[axis] / k.get(c_lo, axis), alpha * hsub[axis] / k.get(c_hi, axis)];
    }
    Ok(RobinParams { alpha, beta })
}

/// Contiguous blocks of subdomain indices per worker, remainder spread
/// one by one over the first workers.
pub fn worker_assignment(n_subdomains: usize, workers: usize) -> Vec<std::ops::Range<usize>> {
    let workers = workers.max(1);
    let base = n_subdomains / workers;
    let extra = n_subdomains % workers;
    let mut start = 0;
    (0..workers)
        .map(|w| {
            let len = base + usize::from(w < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn grid(dims: [usize; 3]) -> StructuredGrid<f64> {
        StructuredGrid::new(dims, dims.map(|n| n as f64)).unwrap()
    }

    #[test]
    fn cube_of_eight() {
        let dd = decompose(&grid([4, 4, 4]), [2, 2, 2]).unwrap();
        assert_eq!(dd.subdomain_count(), 8);
        assert_eq!(dd.patches().len(), 12);
        assert!(dd.patches().iter().all(|p| p.face_count() == 4));
        assert_eq!(dd.skeleton_face_count(), 48);
        let single = decompose(&grid([4, 4, 4]), [1, 1, 1]).unwrap();
        assert!(single.patches().is_empty());
        assert!(decompose(&grid([4, 4, 4]), [3, 1, 1]).is_err());
    }

    #[test]
    fn sides_point_at_the_right_patches() {
        let dd = decompose(&grid([6, 4, 2]), [3, 2, 1]).unwrap();
        for p in dd.patches() {
            let up = dd.sides_of(p.upper)[side_of(p.axis, false)].unwrap();
            let low = dd.sides_of(p.lower)[side_of(p.axis, true)].unwrap();
            assert_eq!((up.patch, up.sign, low.patch, low.sign), (p.index, -1, p.index, 1));
        }
        // boundary faces of subdomains count every skeleton face twice
        let total: usize = (0..dd.subdomain_count())
            .map(|l| {
                dd.sides_of(l)
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.is_some())
                    .map(|(side, _)| BoundarySpec::<f64>::side_len(dd.sub_dims(), side))
                    .sum::<usize>()
            })
            .sum();
        assert_eq!(total, 2 * dd.skeleton_face_count());
    }

    #[test]
    fn face_ids_round_trip() {
        let dd = decompose(&grid([4, 6, 4]), [2, 3, 2]).unwrap();
        for f in 0..dd.skeleton_face_count() {
            let (p, ijk) = dd.skeleton_face_location(f);
            assert_eq!(dd.skeleton_face_at(dd.patches()[p].axis, ijk), Some(f));
        }
    }

    #[test]
    fn cardinality_and_active_sets() {
        let dd = decompose(&grid([4, 4, 4]), [2, 2, 2]).unwrap();
        let space = build_interface_space(&dd, [2, 2, 2]).unwrap();
        assert_eq!(space.len(), 12);
        let dd3 = decompose(&grid([6, 6, 6]), [3, 3, 3]).unwrap();
        let s3 = build_interface_space(&dd3, [2, 2, 2]).unwrap();
        // the centre subdomain touches six patches with one basis each
        assert_eq!(2 * s3.active(13).len(), 12);
        let fine = build_interface_space(&dd, [1, 1, 1]).unwrap();
        assert_eq!(fine.len(), 4 * space.len());
        assert!(build_interface_space(&dd, [3, 1, 1]).is_err());
    }

    #[test]
    fn supports_partition_the_skeleton() {
        let dd = decompose(&grid([8, 4, 4]), [2, 2, 1]).unwrap();
        let space = build_interface_space(&dd, [2, 1, 2]).unwrap();
        let sup = space.supports(&dd);
        let mut seen = HashSet::new();
        for s in &sup {
            assert!(!s.is_empty());
            for &f in s {
                assert!(seen.insert(f));
            }
        }
        assert_eq!(seen.len(), dd.skeleton_face_count());
        assert_eq!(space.len(), interface_dof_count(dd.counts(), dd.sub_dims(), [2, 1, 2]));
    }

    #[test]
    fn robin_beta() {
        let g = StructuredGrid::new([4, 2, 2], [20.0, 2.0, 2.0]).unwrap();
        let dd = decompose(&g, [2, 1, 1]).unwrap();
        let k = PermeabilityField::homogeneous(g, [2.0, 1.0, 1.0]).unwrap();
        let r = compute_robin_params(&dd, &k, 1.0).unwrap();
        assert!(r.beta.iter().all(|b| b[0] == 5.0 && b[1] == 5.0));
        let r2 = compute_robin_params(&dd, &k, 2.0).unwrap();
        assert!(r2.beta.iter().all(|b| b[0] == 10.0));
        assert!(compute_robin_params(&dd, &k, 0.0).is_err());
    }

    #[test]
    fn assignment_covers_everything() {
        let a = worker_assignment(10, 4);
        assert_eq!(a, vec![0..3, 3..6, 6..8, 8..10]);
        assert_eq!(worker_assignment(2, 8).iter().map(|r| r.len()).sum::<usize>(), 2);
    }
}
