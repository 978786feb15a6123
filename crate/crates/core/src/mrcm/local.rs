use std::time::Instant;

use super::MrcmProblem;
use crate::error::Result;
use crate::fv::{assemble_matrix, assemble_rhs, BoundarySpec, FaceCondition};
use crate::grid::{CellField, PermeabilityField};
use crate::linalg::LdltFactorization;
use crate::scalar::Real;

/// One skeleton face as seen from a subdomain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalFace<T> {
    pub side: usize,
    /// Position on the side, matching [`BoundarySpec::face_on_side`].
    pub slot_on_side: usize,
    /// Subdomain-local cell behind the face.
    pub cell: usize,
    pub global_face: usize,
    pub basis: usize,
    /// Index of `basis` in the subdomain's active set.
    pub basis_local: usize,
    /// `n̂ · n̂^l`.
    pub sign: T,
    /// 0 for the lower subdomain, 1 for the upper.
    pub slot: usize,
    pub beta: T,
    pub area: T,
    /// Robin transmissibility `1/(β + 1/T′)`.
    pub t_robin: T,
    /// Half-cell transmissibility `T′ = 2K̂/h`.
    pub t_half: T,
    pub h: T,
}

/// Subdomain data shared by every local solve.
#[derive(Clone, Debug)]
pub struct LocalProblem<T> {
    pub subdomain: usize,
    pub k: PermeabilityField<T>,
    pub f: CellField<T>,
    /// Exterior data from the global problem; Robin with `r = 0` on Γ.
    pub bc: BoundarySpec<T>,
    pub faces: Vec<LocalFace<T>>,
    pub active: Vec<usize>,
}

impl<T: Real> LocalProblem<T> {
    pub fn new(problem: &MrcmProblem<'_, T>, l: usize) -> Result<Self> {
        let dd = problem.dd;
        let sub = dd.subdomains()[l];
        let sd = dd.sub_dims();
        let k = problem.k.restrict(&sub.cells)?;
        let f = problem.f.restrict(&sub.cells)?;
        let sides = dd.sides_of(l);
        let active = problem.space.active(l).to_vec();
        let grid = *k.grid();
        let h = grid.spacing();
        let mut faces = Vec::new();
        let bc = BoundarySpec::from_fn(sd, |side, ijk| match sides[side] {
            None => {
                let global = [0, 1, 2].map(|a| ijk[a] + sub.cells.lo[a]);
                problem.bc.get(side, global)
            }
            Some(ps) => {
                let slot_on_side = BoundarySpec::<T>::face_on_side(sd, side, ijk);
                let patch = &dd.patches()[ps.patch];
                let global_face = patch.face_offset + slot_on_side;
                let basis = problem.space.basis_of_face(dd, global_face);
                let basis_local = active.iter().position(|&b| b == basis).expect("basis in active set");
                let beta = problem.robin.beta[global_face][ps.slot];
                let a = side / 2;
                let cell = grid.cell_index(ijk);
                let t_half = T::lit(2.0) * k.get(cell, a) / h[a];
                let t_robin = FaceCondition::Robin { beta, r: T::zero() }.closure(t_half).0;
                faces.push(LocalFace {
                    side,
                    slot_on_side,
                    cell,
                    global_face,
                    basis,
                    basis_local,
                    sign: if ps.sign > 0 { T::one() } else { -T::one() },
                    slot: ps.slot,
                    beta,
                    area: grid.face_area(a),
                    t_robin,
                    t_half,
                    h: h[a],
                });
                FaceCondition::Robin { beta, r: T::zero() }
            }
        });
        Ok(Self { subdomain: l, k, f, bc, faces, active })
    }

    /// Local conditions with Robin data `r` on every skeleton face, in `faces` order.
    pub fn bc_with_robin_data(&self, r: &[T]) -> BoundarySpec<T> {
        let mut bc = self.bc.clone();
        for (face, &rf) in self.faces.iter().zip(r) {
            bc.side_mut(face.side)[face.slot_on_side] = FaceCondition::Robin { beta: face.beta, r: rf };
        }
        bc
    }

    /// Cell 0 is pinned only when the local problem has a constant nullspace.
    pub fn pin(&self) -> Option<usize> {
        self.bc.is_pure_neumann().then_some(0)
    }
}

/// Local solutions of one subdomain: the particular problem followed by the
/// responses to unit pressure data and unit flux data for each active basis.
#[derive(Clone, Debug)]
pub struct MbfSet<T> {
    pub problem: LocalProblem<T>,
    /// Columns `[particular, P_0 .. P_{m-1}, U_0 .. U_{m-1}]` of cell pressures.
    pub pressures: Vec<Vec<T>>,
    /// Outward skeleton flux `q = T_R (p_cell − r)` of each column, in `faces` order.
    pub traces: Vec<Vec<T>>,
    pub factorization: LdltFactorization<T>,
    pub factor_seconds: f64,
    pub solve_seconds: f64,
}

impl<T: Real> MbfSet<T> {
    pub fn active_len(&self) -> usize {
        self.problem.active.len()
    }

    /// Number of local right-hand sides solved.
    pub fn solves(&self) -> usize {
        self.pressures.len()
    }

    /// Robin datum of column `j` on local face `f`.
    #[inline]
    pub fn column_robin_data(&self, j: usize, face: &LocalFace<T>) -> T {
        let m = self.active_len();
        if j == 0 {
            T::zero()
        } else if j <= m {
            if face.basis_local == j - 1 {
                T::one()
            } else {
                T::zero()
            }
        } else if face.basis_local == j - 1 - m {
            -face.beta * face.sign
        } else {
            T::zero()
        }
    }
}

/// Factors subdomain `l` once and solves all `2|I^l| + 1` local problems.
pub fn compute_mbfs<T: Real>(problem: &MrcmProblem<'_, T>, l: usize) -> Result<MbfSet<T>> {
    let local = LocalProblem::new(problem, l)?;
    let t0 = Instant::now();
    let matrix = assemble_matrix(&local.k, &local.bc)?;
    let pin = local.pin();
    if pin.is_some() {
        super::check_compatibility(&local.bc, &local.f)?;
    }
    let factorization = LdltFactorization::factorize(&matrix, pin)?;
    let factor_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let m = local.active.len();
    let n = local.k.grid().cell_count();
    let mut rhs = Vec::with_capacity(2 * m + 1);
    rhs.push(assemble_rhs(&local.k, &local.bc, &local.f)?);
    for kind in 0..2 {
        for b in 0..m {
            let mut r = vec![T::zero(); n];
            for face in local.faces.iter().filter(|fc| fc.basis_local == b) {
                let datum = if kind == 0 { T::one() } else { -face.beta * face.sign };
                r[face.cell] += face.t_robin * datum / face.h;
            }
            rhs.push(r);
        }
    }
    let pressures = factorization.solve_multi(&rhs)?;
    let solve_seconds = t1.elapsed().as_secs_f64();

    let mut set = MbfSet { problem: local, pressures, traces: Vec::new(), factorization, factor_seconds, solve_seconds };
    set.traces = (0..set.pressures.len())
        .map(|j| {
            set.problem
                .faces
                .iter()
                .map(|face| face.t_robin * (set.pressures[j][face.cell] - set.column_robin_data(j, face)))
                .collect()
        })
        .collect();
    Ok(set)
}
