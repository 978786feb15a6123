//! Conservative velocity recovery from a multiscale solution by averaging
//! the two skeleton traces and re-solving each subdomain with Neumann data.

use crate::error::{Error, Result};
use crate::fv::{assemble, cell_mass_residual, recover_fluxes, BoundarySpec, FaceCondition};
use crate::grid::{CellField, FaceFluxField};
use crate::linalg::LdltFactorization;
use crate::mrcm::{MrcmProblem, MultiscaleSolution};
use crate::parallel::WorkerPool;
use crate::scalar::Real;

/// Single-valued fluxes that are conservative on the fine scale.
#[derive(Clone, Debug)]
pub struct ConservativeFlux<T> {
    pub velocity: FaceFluxField<T>,
    /// `|∫f − boundary outflow|` of each pure-Neumann subdomain before it was removed.
    pub imbalances: Vec<T>,
    /// Largest `|∇·u − f|` over all cells.
    pub max_residual: T,
    /// `max |f| + max |u| / h_min`, the scale `max_residual` is measured against.
    pub scale: T,
}

/// Mean of the two one-sided velocities on each skeleton face.
pub fn average_skeleton_flux<T: Real>(msol: &MultiscaleSolution<T>) -> Vec<T> {
    let half = T::lit(0.5);
    msol.traces.iter().map(|t| half * (t.flux[0] + t.flux[1])).collect()
}

/// Largest relative imbalance the per-subdomain solves accept before the
/// mismatch is treated as an interface-solve failure.
const IMBALANCE_TOLERANCE: f64 = 1e-6;

/// Mean-method reconstruction: every subdomain is re-solved with the
/// averaged skeleton flux as Neumann data and its interior fluxes replace
/// the multiscale ones.
pub fn conservative_reconstruction<T: Real>(
    msol: &MultiscaleSolution<T>,
    problem: &MrcmProblem<'_, T>,
    pool: &WorkerPool,
) -> Result<ConservativeFlux<T>> {
    let dd = problem.dd;
    if msol.traces.len() != dd.skeleton_face_count() {
        return Err(Error::ShapeMismatch("traces do not match the skeleton".into()));
    }
    let grid = *dd.grid();
    let ubar = average_skeleton_flux(msol);
    let sd = dd.sub_dims();

    let locals = pool.try_map(dd.subdomain_count(), |l| {
        let sub = dd.subdomains()[l].cells;
        let sides = dd.sides_of(l);
        let k = problem.k.restrict(&sub)?;
        let mut f = problem.f.restrict(&sub)?;
        let bc = BoundarySpec::from_fn(sd, |side, ijk| match sides[side] {
            None => problem.bc.get(side, [0, 1, 2].map(|a| ijk[a] + sub.lo[a])),
            Some(ps) => {
                let face = dd.skeleton_face(l, side, ijk).expect("skeleton face");
                FaceCondition::Neumann(if ps.sign > 0 { ubar[face] } else { -ubar[face] })
            }
        });
        let pin = bc.is_pure_neumann().then_some(0);
        let mut imbalance = T::zero();
        if pin.is_some() {
            let lg = *f.grid();
            let delta = f.integral() - bc.neumann_outflow(&lg);
            let scale = f.values().iter().map(|v| v.abs()).sum::<T>() * lg.cell_volume() + bc.neumann_outflow_abs(&lg);
            let tol = T::lit(IMBALANCE_TOLERANCE) * scale.max(T::min_positive_value());
            if delta.abs() > tol {
                return Err(Error::Incompatible {
                    imbalance: delta.abs().to_f64_lossy(),
                    tolerance: tol.to_f64_lossy(),
                });
            }
            imbalance = delta.abs();
            let shift = delta / lg.volume();
            for v in f.values_mut() {
                *v -= shift;
            }
        }
        let sys = assemble(&k, &bc, &f)?;
        let p = LdltFactorization::factorize(&sys.matrix, pin)?.solve(&sys.rhs)?;
        let u = recover_fluxes(&CellField::new(*k.grid(), p)?, &k, &bc)?;
        Ok((u, imbalance))
    })?;

    let mut velocity = FaceFluxField::zeros(grid);
    let mut imbalances = Vec::with_capacity(locals.len());
    for (l, (u, imb)) in locals.into_iter().enumerate() {
        let lo = dd.subdomains()[l].cells.lo;
        let lg = *u.grid();
        for a in 0..3 {
            let fd = lg.face_dims(a);
            for k in 0..fd[2] {
                for j in 0..fd[1] {
                    for i in 0..fd[0] {
                        let lat = [i, j, k];
                        velocity.set(a, [0, 1, 2].map(|b| lat[b] + lo[b]), u.get(a, lat));
                    }
                }
            }
        }
        imbalances.push(imb);
    }
    for (face, &v) in ubar.iter().enumerate() {
        let (p, ijk) = dd.skeleton_face_location(face);
        velocity.set(dd.patches()[p].axis, ijk, v);
    }

    let residual = cell_mass_residual(&velocity, problem.f)?;
    let max_residual = residual.max_abs();
    let scale = problem.f.max_abs() + velocity.max_abs() / grid.h_min();
    Ok(ConservativeFlux { velocity, imbalances, max_residual, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{compute_robin_params, decompose, InterfaceSpace};
    use crate::grid::{PermeabilityField, StructuredGrid};
    use crate::mrcm::{linear_drive, solve_fine, solve_mrcm, weak_flux_jumps, FineSolver, DEFAULT_FINE_CAP};

    fn run(
        k: &PermeabilityField<f64>,
        bc: &BoundarySpec<f64>,
        f: &CellField<f64>,
        counts: [usize; 3],
        coarsening: [usize; 3],
        alpha: f64,
    ) -> (MultiscaleSolution<f64>, ConservativeFlux<f64>) {
        let dd = decompose(k.grid(), counts).unwrap();
        let space = InterfaceSpace::new(&dd, coarsening).unwrap();
        let robin = compute_robin_params(&dd, k, alpha).unwrap();
        let problem = MrcmProblem::new(k, bc, f, &dd, &space, &robin).unwrap();
        let pool = WorkerPool::serial();
        let msol = solve_mrcm(&problem, &pool).unwrap();
        let cons = conservative_reconstruction(&msol, &problem, &pool).unwrap();
        (msol, cons)
    }

    fn channel(dims: [usize; 3], seed: u64) -> PermeabilityField<f64> {
        let g = StructuredGrid::new(dims, dims.map(|d| d as f64)).unwrap();
        PermeabilityField::generate_channel_field(seed, g, 1e3).unwrap()
    }

    #[test]
    fn mean_of_traces() {
        let g = StructuredGrid::<f64>::new([4, 1, 1], [4.0, 1.0, 1.0]).unwrap();
        let k = PermeabilityField::homogeneous(g, [1.0; 3]).unwrap();
        let bc = linear_drive([4, 1, 1], 0, 1.0, 0.0);
        let (mut msol, _) = run(&k, &bc, &CellField::zeros(g), [2, 1, 1], [1, 1, 1], 1.0);
        msol.traces[0].flux = [2.0, 0.0];
        assert_eq!(average_skeleton_flux(&msol), vec![1.0]);
        msol.traces[0].flux = [0.3, 0.3];
        assert_eq!(average_skeleton_flux(&msol), vec![0.3]);
    }

    #[test]
    fn averaging_preserves_coarse_mass() {
        let k = channel([16, 16, 4], 7);
        let g = *k.grid();
        let bc = linear_drive(g.dims(), 0, 1.0, 0.0);
        let (msol, _) = run(&k, &bc, &CellField::zeros(g), [2, 2, 1], [4, 4, 4], 1.0);
        let dd = decompose(&g, [2, 2, 1]).unwrap();
        let space = InterfaceSpace::new(&dd, [4, 4, 4]).unwrap();
        let ubar = average_skeleton_flux(&msol);
        let mut before = vec![[0.0; 2]; space.len()];
        let mut after = vec![0.0; space.len()];
        for (face, tr) in msol.traces.iter().enumerate() {
            let b = space.basis_of_face(&dd, face);
            before[b][0] += tr.flux[0];
            before[b][1] += tr.flux[1];
            after[b] += ubar[face];
        }
        let scale = msol.velocity.max_abs() * 16.0;
        for b in 0..space.len() {
            assert!((before[b][0] - after[b]).abs() <= 1e-12 * scale);
            assert!((before[b][1] - after[b]).abs() <= 1e-12 * scale);
        }
        assert!(weak_flux_jumps(&msol, &dd, &space).iter().all(|(j, s)| *j <= 1e-9 * s.max(1e-300)));
    }

    #[test]
    fn equivalence_case_is_unchanged() {
        let k = channel([8, 8, 4], 2);
        let g = *k.grid();
        let bc = linear_drive(g.dims(), 1, 0.0, 1.0);
        let (msol, cons) = run(&k, &bc, &CellField::zeros(g), [2, 2, 2], [1, 1, 1], 1.0);
        let scale = msol.velocity.max_abs();
        for a in 0..3 {
            for (x, y) in cons.velocity.axis(a).iter().zip(msol.velocity.axis(a)) {
                assert!((x - y).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn linear_drive_flux_is_preserved() {
        let g = StructuredGrid::<f64>::new([8, 4, 2], [8.0, 4.0, 2.0]).unwrap();
        let k = PermeabilityField::homogeneous(g, [2.0; 3]).unwrap();
        let bc = linear_drive(g.dims(), 0, 1.0, 0.0);
        let (_, cons) = run(&k, &bc, &CellField::zeros(g), [2, 1, 1], [2, 2, 2], 1.0);
        // u = −K ∇p = 2 · 1/8
        let bad: Vec<_> = cons.velocity.axis(0).iter().filter(|v| (*v - 0.25).abs() >= 1e-12).collect();
        assert!(bad.is_empty(), "{bad:?}");
        assert!(cons.velocity.axis(1).iter().chain(cons.velocity.axis(2)).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn heterogeneous_reconstruction_is_conservative() {
        let k = channel([16, 16, 8], 4);
        let g = *k.grid();
        let n = g.cell_count();
        let f = CellField::from_fn(g, |c| if c == 100 { 1.0 } else if c == n - 3 { -1.0 } else { 0.0 });
        let bc = BoundarySpec::no_flow(g.dims());
        let (msol, cons) = run(&k, &bc, &f, [2, 2, 2], [4, 4, 2], 1.0);
        assert!(cons.max_residual <= 1e-10 * cons.scale, "{} vs {}", cons.max_residual, cons.scale);
        // the raw multiscale field is not conservative in cells next to Γ
        let raw = cell_mass_residual(&msol.velocity, &f).unwrap().max_abs();
        assert!(raw > cons.max_residual);
        let fine = solve_fine(&k, &bc, &f, FineSolver::Direct, DEFAULT_FINE_CAP).unwrap();
        let d: f64 = fine.velocity.axis(0).iter().zip(cons.velocity.axis(0)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < fine.velocity.max_abs());
    }
}
