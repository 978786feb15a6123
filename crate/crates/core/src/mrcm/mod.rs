//! Multiscale Robin coupled solver and the global fine-grid reference solve.

mod interface;
mod local;

pub use interface::{assemble_interface, solve_interface, InterfaceSystem};
pub use local::{compute_mbfs, LocalFace, LocalProblem, MbfSet};

use std::time::Instant;

use crate::decomposition::{compute_robin_params, DomainDecomposition, InterfaceSpace, RobinParams};
use crate::error::{invalid, Error, Result};
use crate::fv::{assemble, recover_fluxes, BoundarySpec, FaceCondition};
use crate::grid::{CellField, FaceFluxField, PermeabilityField};
use crate::linalg::{krylov_solve, KrylovConfig, KrylovOutcome, LdltFactorization};
use crate::parallel::WorkerPool;
use crate::scalar::Real;

/// Everything the multiscale stages read. `k` is the mobility-scaled
/// permeability on the whole grid.
#[derive(Clone, Copy, Debug)]
pub struct MrcmProblem<'a, T> {
    pub k: &'a PermeabilityField<T>,
    pub bc: &'a BoundarySpec<T>,
    pub f: &'a CellField<T>,
    pub dd: &'a DomainDecomposition<T>,
    pub space: &'a InterfaceSpace,
    pub robin: &'a RobinParams<T>,
}

impl<'a, T: Real> MrcmProblem<'a, T> {
    pub fn new(
        k: &'a PermeabilityField<T>,
        bc: &'a BoundarySpec<T>,
        f: &'a CellField<T>,
        dd: &'a DomainDecomposition<T>,
        space: &'a InterfaceSpace,
        robin: &'a RobinParams<T>,
    ) -> Result<Self> {
        let dims = dd.grid().dims();
        if k.grid().dims() != dims || bc.dims() != dims || f.grid().dims() != dims {
            return Err(Error::ShapeMismatch("permeability, boundary, source and decomposition disagree".into()));
        }
        if robin.beta.len() != dd.skeleton_face_count() {
            return Err(Error::ShapeMismatch("Robin parameters do not match the skeleton".into()));
        }
        bc.validate()?;
        Ok(Self { k, bc, f, dd, space, robin })
    }

    /// The exterior data fixes the pressure level unless every face is Neumann.
    pub fn needs_pin(&self) -> bool {
        self.bc.is_pure_neumann()
    }
}

/// Wall-clock seconds per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub mbf: f64,
    /// Summed over subdomains, so it exceeds `mbf` when workers overlap.
    pub mbf_factor: f64,
    pub mbf_solve: f64,
    pub interface_assembly: f64,
    pub interface_solve: f64,
    pub reconstruction: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.mbf + self.interface_assembly + self.interface_solve + self.reconstruction
    }
}

/// Both one-sided values on a skeleton face: velocity along `n̂` and face pressure.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SkeletonTrace<T> {
    pub flux: [T; 2],
    pub pressure: [T; 2],
}

#[derive(Clone, Debug)]
pub struct MultiscaleSolution<T> {
    pub pressure: CellField<T>,
    /// Skeleton faces hold the mean of the two one-sided velocities.
    pub velocity: FaceFluxField<T>,
    /// Indexed by global skeleton face.
    pub traces: Vec<SkeletonTrace<T>>,
    /// `(π^p, π^u)`.
    pub coefficients: Vec<T>,
    pub interface_residual: T,
    pub n_basis: usize,
    pub local_solves: usize,
    pub timings: StageTimings,
}

impl<T: Real> MultiscaleSolution<T> {
    /// Velocity on the grid with the side-`slot` trace on every skeleton face.
    pub fn one_sided_velocity(&self, dd: &DomainDecomposition<T>, slot: usize) -> FaceFluxField<T> {
        let mut u = self.velocity.clone();
        for (f, tr) in self.traces.iter().enumerate() {
            let (p, ijk) = dd.skeleton_face_location(f);
            u.set(dd.patches()[p].axis, ijk, tr.flux[slot]);
        }
        u
    }
}

/// Local Robin data `r = π^p − β s π^u` on each skeleton face of `set`.
pub fn robin_data<T: Real>(set: &MbfSet<T>, x: &[T], n_basis: usize) -> Vec<T> {
    set.problem
        .faces
        .iter()
        .map(|f| x[f.basis] - f.beta * f.sign * x[n_basis + f.basis])
        .collect()
}

struct LocalResult<T> {
    pressure: Vec<T>,
    velocity: FaceFluxField<T>,
    /// `(global face, slot, velocity along n̂, face pressure)`.
    traces: Vec<(usize, usize, T, T)>,
}

fn combine<T: Real>(set: &MbfSet<T>, x: &[T], n_basis: usize) -> Vec<T> {
    let m = set.active_len();
    let mut p = set.pressures[0].clone();
    for j in 1..=2 * m {
        let coef = if j <= m { x[set.problem.active[j - 1]] } else { x[n_basis + set.problem.active[j - 1 - m]] };
        if coef != T::zero() {
            for (pi, &v) in p.iter_mut().zip(&set.pressures[j]) {
                *pi += coef * v;
            }
        }
    }
    p
}

fn finish_local<T: Real>(set: &MbfSet<T>, pressure: Vec<T>, r: &[T]) -> Result<LocalResult<T>> {
    let lp = &set.problem;
    let bc = lp.bc_with_robin_data(r);
    let pf = CellField::new(*lp.k.grid(), pressure)?;
    let velocity = recover_fluxes(&pf, &lp.k, &bc)?;
    let traces = lp
        .faces
        .iter()
        .zip(r)
        .map(|(f, &rf)| {
            let q = f.t_robin * (pf.get(f.cell) - rf);
            (f.global_face, f.slot, f.sign * q, pf.get(f.cell) - q / f.t_half)
        })
        .collect();
    Ok(LocalResult { pressure: pf.into_values(), velocity, traces })
}

fn gather<T: Real>(
    problem: &MrcmProblem<'_, T>,
    locals: Vec<LocalResult<T>>,
) -> Result<(CellField<T>, FaceFluxField<T>, Vec<SkeletonTrace<T>>)> {
    let dd = problem.dd;
    let grid = *dd.grid();
    let mut pressure = vec![T::zero(); grid.cell_count()];
    let mut velocity = FaceFluxField::zeros(grid);
    let mut traces = vec![SkeletonTrace::default(); dd.skeleton_face_count()];
    for (l, res) in locals.into_iter().enumerate() {
        let sub = dd.subdomains()[l].cells;
        for (local, global) in sub.cells(&grid).into_iter().enumerate() {
            pressure[global] = res.pressure[local];
        }
        let lg = *res.velocity.grid();
        for a in 0..3 {
            let fd = lg.face_dims(a);
            for k in 0..fd[2] {
                for j in 0..fd[1] {
                    for i in 0..fd[0] {
                        let lat = [i, j, k];
                        let glat = [0, 1, 2].map(|b| lat[b] + sub.lo[b]);
                        if dd.skeleton_face_at(a, glat).is_none() {
                            velocity.set(a, glat, res.velocity.get(a, lat));
                        }
                    }
                }
            }
        }
        for (face, slot, v, p) in res.traces {
            traces[face].flux[slot] = v;
            traces[face].pressure[slot] = p;
        }
    }
    let half = T::lit(0.5);
    for (f, tr) in traces.iter().enumerate() {
        let (p, ijk) = dd.skeleton_face_location(f);
        velocity.set(dd.patches()[p].axis, ijk, half * (tr.flux[0] + tr.flux[1]));
    }
    Ok((CellField::new(grid, pressure)?, velocity, traces))
}

/// Pressure and velocity from the basis functions: `p = p̄ + Σ π·columns`.
pub fn reconstruct<T: Real>(
    problem: &MrcmProblem<'_, T>,
    mbfs: &[MbfSet<T>],
    x: &[T],
    pool: &WorkerPool,
) -> Result<(CellField<T>, FaceFluxField<T>, Vec<SkeletonTrace<T>>)> {
    let nb = problem.space.len();
    let locals = pool.try_map(mbfs.len(), |l| {
        let set = &mbfs[l];
        finish_local(set, combine(set, x, nb), &robin_data(set, x, nb))
    })?;
    gather(problem, locals)
}

/// Independent reconstruction path: re-solves every local problem with the
/// Robin data implied by `x`.
pub fn reconstruct_by_resolve<T: Real>(
    problem: &MrcmProblem<'_, T>,
    mbfs: &[MbfSet<T>],
    x: &[T],
    pool: &WorkerPool,
) -> Result<(CellField<T>, FaceFluxField<T>, Vec<SkeletonTrace<T>>)> {
    let nb = problem.space.len();
    let locals = pool.try_map(mbfs.len(), |l| {
        let set = &mbfs[l];
        let r = robin_data(set, x, nb);
        let lp = &set.problem;
        let sys = assemble(&lp.k, &lp.bc_with_robin_data(&r), &lp.f)?;
        let fact = LdltFactorization::factorize(&sys.matrix, lp.pin())?;
        finish_local(set, fact.solve(&sys.rhs)?, &r)
    })?;
    gather(problem, locals)
}

/// Runs the multiscale stages: local basis functions, interface assembly,
/// interface solve and reconstruction.
pub fn solve_mrcm<T: Real>(problem: &MrcmProblem<'_, T>, pool: &WorkerPool) -> Result<MultiscaleSolution<T>> {
    let mut timings = StageTimings::default();
    let n_sub = problem.dd.subdomain_count();

    let t = Instant::now();
    let mbfs = pool.try_map(n_sub, |l| compute_mbfs(problem, l))?;
    timings.mbf = t.elapsed().as_secs_f64();
    timings.mbf_factor = mbfs.iter().map(|s| s.factor_seconds).sum();
    timings.mbf_solve = mbfs.iter().map(|s| s.solve_seconds).sum();

    let t = Instant::now();
    let nb = problem.space.len();
    let parts = pool.map(n_sub, |l| interface::subdomain_contributions(&mbfs[l], nb));
    let system = interface::assemble_from_parts(parts, nb, problem.needs_pin())?;
    timings.interface_assembly = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let x = solve_interface(&system)?;
    timings.interface_solve = t.elapsed().as_secs_f64();
    let interface_residual = system.relative_residual(&x);

    let t = Instant::now();
    let (pressure, velocity, traces) = reconstruct(problem, &mbfs, &x, pool)?;
    timings.reconstruction = t.elapsed().as_secs_f64();

    Ok(MultiscaleSolution {
        pressure,
        velocity,
        traces,
        coefficients: x,
        interface_residual,
        n_basis: nb,
        local_solves: mbfs.iter().map(MbfSet::solves).sum(),
        timings,
    })
}

/// Convenience wrapper building the decomposition data from counts, interface
/// coarsening (fine cells per basis) and α.
pub fn solve_mrcm_with<T: Real>(
    k: &PermeabilityField<T>,
    bc: &BoundarySpec<T>,
    f: &CellField<T>,
    counts: [usize; 3],
    coarsening: [usize; 3],
    alpha: T,
    pool: &WorkerPool,
) -> Result<MultiscaleSolution<T>> {
    let dd = DomainDecomposition::new(k.grid(), counts)?;
    let space = InterfaceSpace::new(&dd, coarsening)?;
    let robin = compute_robin_params(&dd, k, alpha)?;
    solve_mrcm(&MrcmProblem::new(k, bc, f, &dd, &space, &robin)?, pool)
}

/// Per basis function of the flux space: `|Σ A (v_lo − v_hi)|` and `Σ A (|v_lo| + |v_hi|)`.
pub fn weak_flux_jumps<T: Real>(
    sol: &MultiscaleSolution<T>,
    dd: &DomainDecomposition<T>,
    space: &InterfaceSpace,
) -> Vec<(T, T)> {
    let mut out = vec![(T::zero(), T::zero()); space.len()];
    for (f, tr) in sol.traces.iter().enumerate() {
        let b = space.basis_of_face(dd, f);
        let axis = dd.patches()[dd.patch_of_face(f)].axis;
        let area = dd.grid().face_area(axis);
        out[b].0 += area * (tr.flux[0] - tr.flux[1]);
        out[b].1 += area * (tr.flux[0].abs() + tr.flux[1].abs());
    }
    out.into_iter().map(|(j, s)| (j.abs(), s)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FineSolver<T> {
    Direct,
    Krylov(KrylovConfig<T>),
}

pub const DEFAULT_FINE_CAP: usize = 2_000_000;

#[derive(Clone, Debug)]
pub struct FineSolution<T> {
    pub pressure: CellField<T>,
    pub velocity: FaceFluxField<T>,
    pub krylov: Option<KrylovOutcome<T>>,
    pub seconds: f64,
}

/// Global TPFA solve. Pure-Neumann problems must be compatible and get
/// cell 0 pinned to zero.
pub fn solve_fine<T: Real>(
    k: &PermeabilityField<T>,
    bc: &BoundarySpec<T>,
    f: &CellField<T>,
    solver: FineSolver<T>,
    cap: usize,
) -> Result<FineSolution<T>> {
    let grid = *k.grid();
    if grid.cell_count() > cap {
        return Err(Error::TooLarge { unknowns: grid.cell_count(), cap });
    }
    let t = Instant::now();
    let sys = assemble(k, bc, f)?;
    let pin = bc.is_pure_neumann().then_some(0);
    if pin.is_some() {
        check_compatibility(bc, f)?;
    }
    let (p, krylov) = match solver {
        FineSolver::Direct => (LdltFactorization::factorize(&sys.matrix, pin)?.solve(&sys.rhs)?, None),
        FineSolver::Krylov(cfg) => {
            let (a, mut b) = match pin {
                Some(i) => (sys.matrix.pinned(i)?, sys.rhs.clone()),
                None => (sys.matrix.clone(), sys.rhs.clone()),
            };
            if let Some(i) = pin {
                b[i] = T::zero();
            }
            let out = krylov_solve(&a, &b, &cfg)?;
            (out.solution.clone(), Some(out))
        }
    };
    let pressure = CellField::new(grid, p)?;
    let velocity = recover_fluxes(&pressure, k, bc)?;
    Ok(FineSolution { pressure, velocity, krylov, seconds: t.elapsed().as_secs_f64() })
}

/// Sources must balance the prescribed boundary outflow.
pub fn check_compatibility<T: Real>(bc: &BoundarySpec<T>, f: &CellField<T>) -> Result<()> {
    let grid = f.grid();
    if bc.dims() != grid.dims() {
        return Err(invalid("boundary spec does not match the source grid"));
    }
    let imbalance = (f.integral() - bc.neumann_outflow(grid)).abs();
    let scale = f.values().iter().map(|v| v.abs()).sum::<T>() * grid.cell_volume() + bc.neumann_outflow_abs(grid);
    let tolerance = T::lit(1e-10) * scale.max(T::min_positive_value());
    if imbalance > tolerance {
        return Err(Error::Incompatible { imbalance: imbalance.to_f64_lossy(), tolerance: tolerance.to_f64_lossy() });
    }
    Ok(())
}

/// Linear Dirichlet drive along `axis` from `p_lo` to `p_hi`, no flow elsewhere.
pub fn linear_drive<T: Real>(dims: [usize; 3], axis: usize, p_lo: T, p_hi: T) -> BoundarySpec<T> {
    let mut bc = BoundarySpec::no_flow(dims);
    bc.set_side(2 * axis, FaceCondition::Dirichlet(p_lo));
    bc.set_side(2 * axis + 1, FaceCondition::Dirichlet(p_hi));
    bc
}

#[cfg(test)]
mod tests;
