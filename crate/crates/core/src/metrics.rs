//! Error norms between fine and multiscale solutions and skeleton jump measures.

use crate::error::{invalid, Error, Result};
use crate::fv::harmonic;
use crate::grid::{CellField, FaceFluxField, PermeabilityField};
use crate::mrcm::MultiscaleSolution;
use crate::scalar::Real;

/// Relative errors of one solution against a reference plus skeleton jumps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport<T> {
    pub pressure: T,
    pub velocity: T,
    pub max_pressure_jump: T,
    pub max_flux_jump: T,
}

fn weighted_mean<T: Real>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::count(v.len())
}

/// `‖p_a − p_b‖ / ‖p_b‖` in the volume-weighted L² norm. With `gauge` both
/// fields have their means removed first.
pub fn pressure_error<T: Real>(p_a: &CellField<T>, p_b: &CellField<T>, gauge: bool) -> Result<T> {
    if !p_a.grid().same_shape(p_b.grid()) {
        return Err(Error::ShapeMismatch("pressure fields live on different grids".into()));
    }
    let (ma, mb) = if gauge { (weighted_mean(p_a.values()), weighted_mean(p_b.values())) } else { (T::zero(), T::zero()) };
    let vol = p_a.grid().cell_volume();
    let (mut num, mut den) = (T::zero(), T::zero());
    for (&a, &b) in p_a.values().iter().zip(p_b.values()) {
        let (a, b) = (a - ma, b - mb);
        num += vol * (a - b) * (a - b);
        den += vol * b * b;
    }
    if den == T::zero() {
        return Err(invalid("reference pressure has zero norm"));
    }
    Ok((num / den).sqrt())
}

/// Weight `A·h / K̃` of every face: the control volume of the face over the
/// harmonic face permeability, halved on the exterior boundary.
fn face_weights<T: Real>(k: &PermeabilityField<T>) -> [Vec<T>; 3] {
    let grid = *k.grid();
    let dims = grid.dims();
    let h = grid.spacing();
    [0, 1, 2].map(|a| {
        let fd = grid.face_dims(a);
        let vol = grid.face_area(a) * h[a];
        let mut w = Vec::with_capacity(grid.face_count(a));
        for kk in 0..fd[2] {
            for j in 0..fd[1] {
                for i in 0..fd[0] {
                    let ijk = [i, j, kk];
                    let m = ijk[a];
                    let cell = |off: usize| {
                        let mut c = ijk;
                        c[a] = off;
                        k.get(grid.cell_index(c), a)
                    };
                    let value = if m == 0 {
                        T::lit(0.5) * vol / cell(0)
                    } else if m == dims[a] {
                        T::lit(0.5) * vol / cell(m - 1)
                    } else {
                        vol / harmonic(cell(m - 1), cell(m))
                    };
                    w.push(value);
                }
            }
        }
        w
    })
}

/// `‖u_a − u_b‖_{K⁻¹} / ‖u_b‖_{K⁻¹}` evaluated directly on faces.
pub fn velocity_error<T: Real>(u_a: &FaceFluxField<T>, u_b: &FaceFluxField<T>, k: &PermeabilityField<T>) -> Result<T> {
    if !u_a.grid().same_shape(u_b.grid()) || !u_a.grid().same_shape(k.grid()) {
        return Err(Error::ShapeMismatch("velocity fields and permeability differ in shape".into()));
    }
    let w = face_weights(k);
    let (mut num, mut den) = (T::zero(), T::zero());
    for a in 0..3 {
        for ((&x, &y), &wf) in u_a.axis(a).iter().zip(u_b.axis(a)).zip(&w[a]) {
            num += wf * (x - y) * (x - y);
            den += wf * y * y;
        }
    }
    if den == T::zero() {
        return Err(invalid("reference velocity has zero norm"));
    }
    Ok((num / den).sqrt())
}

/// `‖u‖_{K⁻¹}` with the face weights of [`velocity_error`].
pub fn velocity_norm<T: Real>(u: &FaceFluxField<T>, k: &PermeabilityField<T>) -> Result<T> {
    if !u.grid().same_shape(k.grid()) {
        return Err(Error::ShapeMismatch("velocity and permeability differ in shape".into()));
    }
    let w = face_weights(k);
    Ok((0..3)
        .map(|a| u.axis(a).iter().zip(&w[a]).map(|(&x, &wf)| wf * x * x).sum::<T>())
        .sum::<T>()
        .sqrt())
}

/// Largest two-sided mismatches on the skeleton with the scales they are judged against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkeletonJumps<T> {
    /// `max |p⁺ − p⁻|` of the face pressures.
    pub pressure: T,
    /// `max |u⁺·n̂ − u⁻·n̂|`.
    pub flux: T,
    /// `max p − min p` over the cells.
    pub pressure_range: T,
    /// `max |u·n̂|` over all faces.
    pub flux_scale: T,
}

pub fn skeleton_jumps<T: Real>(msol: &MultiscaleSolution<T>) -> SkeletonJumps<T> {
    let (mut dp, mut du) = (T::zero(), T::zero());
    for t in &msol.traces {
        dp = dp.max((t.pressure[0] - t.pressure[1]).abs());
        du = du.max((t.flux[0] - t.flux[1]).abs());
    }
    let v = msol.pressure.values();
    let range = v.iter().fold(T::neg_infinity(), |m, &x| m.max(x)) - v.iter().fold(T::infinity(), |m, &x| m.min(x));
    let scale = msol
        .traces
        .iter()
        .fold(msol.velocity.max_abs(), |m, t| m.max(t.flux[0].abs()).max(t.flux[1].abs()));
    SkeletonJumps { pressure: dp, flux: du, pressure_range: range.max(T::zero()), flux_scale: scale }
}

/// Multiscale solution against the fine reference.
pub fn compare<T: Real>(
    fine_p: &CellField<T>,
    fine_u: &FaceFluxField<T>,
    msol: &MultiscaleSolution<T>,
    velocity: &FaceFluxField<T>,
    k: &PermeabilityField<T>,
    gauge: bool,
) -> Result<ErrorReport<T>> {
    let jumps = skeleton_jumps(msol);
    Ok(ErrorReport {
        pressure: pressure_error(&msol.pressure, fine_p, gauge)?,
        velocity: velocity_error(velocity, fine_u, k)?,
        max_pressure_jump: jumps.pressure,
        max_flux_jump: jumps.flux,
    })
}
