//! Explicit upwind Buckley–Leverett transport and the IMPES driver.

mod impes;

pub use impes::{run_impes, DarcyDriver, ImpesConfig, ImpesOutcome, TwoPhaseProblem};

use crate::error::{invalid, Error, Result};
use crate::grid::{CellBox, CellField, FaceFluxField, SaturationField, StructuredGrid};
use crate::parallel::WorkerPool;
use crate::scalar::Real;

/// Phase viscosities under quadratic relative permeabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidProps<T> {
    mu_w: T,
    mu_o: T,
    /// Argmax of `φ′` on `[0, 1]`.
    s_peak: T,
}

impl<T: Real> FluidProps<T> {
    pub fn new(mu_w: T, mu_o: T) -> Result<Self> {
        if !(mu_w > T::zero() && mu_o > T::zero() && mu_w.is_finite() && mu_o.is_finite()) {
            return Err(invalid(format!("viscosities must be positive, got {mu_w} and {mu_o}")));
        }
        let mut props = Self { mu_w, mu_o, s_peak: T::lit(0.5) };
        props.s_peak = props.locate_peak();
        Ok(props)
    }

    pub fn mu_w(&self) -> T {
        self.mu_w
    }

    pub fn mu_o(&self) -> T {
        self.mu_o
    }

    /// `M = μ_o / μ_w`.
    pub fn viscosity_ratio(&self) -> T {
        self.mu_o / self.mu_w
    }

    /// `φ′` is unimodal on `[0, 1]`; ternary search for its maximum.
    fn locate_peak(&self) -> T {
        let (mut a, mut b) = (T::zero(), T::one());
        let third = T::lit(1.0 / 3.0);
        for _ in 0..200 {
            let m1 = a + (b - a) * third;
            let m2 = b - (b - a) * third;
            if self.dphi(m1) < self.dphi(m2) {
                a = m1;
            } else {
                b = m2;
            }
        }
        T::lit(0.5) * (a + b)
    }

    #[inline]
    pub(crate) fn phi(&self, s: T) -> T {
        let w = s * s / self.mu_w;
        let o = (T::one() - s) * (T::one() - s) / self.mu_o;
        w / (w + o)
    }

    #[inline]
    pub(crate) fn dphi(&self, s: T) -> T {
        let m = self.viscosity_ratio();
        let d = m * s * s + (T::one() - s) * (T::one() - s);
        T::lit(2.0) * m * s * (T::one() - s) / (d * d)
    }

    #[inline]
    pub(crate) fn lambda(&self, s: T) -> T {
        s * s / self.mu_w + (T::one() - s) * (T::one() - s) / self.mu_o
    }

    /// Largest `φ′` between two saturations.
    pub fn max_dphi_between(&self, a: T, b: T) -> T {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mut m = self.dphi(lo).max(self.dphi(hi));
        if lo <= self.s_peak && self.s_peak <= hi {
            m = m.max(self.dphi(self.s_peak));
        }
        m
    }
}

fn check_unit<T: Real>(s: T) -> Result<()> {
    if s >= T::zero() && s <= T::one() {
        Ok(())
    } else {
        Err(invalid(format!("saturation {s} outside [0, 1]")))
    }
}

/// Water fractional flow `φ(S) = (S²/μ_w) / λ(S)`.
pub fn fractional_flow<T: Real>(s: T, props: &FluidProps<T>) -> Result<T> {
    check_unit(s)?;
    Ok(props.phi(s))
}

/// `dφ/dS`.
pub fn fractional_flow_derivative<T: Real>(s: T, props: &FluidProps<T>) -> Result<T> {
    check_unit(s)?;
    Ok(props.dphi(s))
}

/// Total mobility `λ(S) = S²/μ_w + (1 − S)²/μ_o`.
pub fn total_mobility<T: Real>(s: T, props: &FluidProps<T>) -> Result<T> {
    check_unit(s)?;
    Ok(props.lambda(s))
}

/// Cellwise `λ(S)`.
pub fn mobility_field<T: Real>(s: &SaturationField<T>, props: &FluidProps<T>) -> CellField<T> {
    CellField::from_fn(*s.grid(), |c| props.lambda(s.values()[c]))
}

/// Neighbour of cell `ijk` across local face `f` (ordered `[-x1, +x1, -x2, +x2, -x3, +x3]`).
#[inline]
fn neighbour<T: Real>(grid: &StructuredGrid<T>, ijk: [usize; 3], f: usize) -> Option<usize> {
    let a = f / 2;
    let mut n = ijk;
    if f % 2 == 0 {
        n[a] = n[a].checked_sub(1)?;
    } else {
        n[a] += 1;
        if n[a] >= grid.dims()[a] {
            return None;
        }
    }
    Some(grid.cell_index(n))
}

/// Stable step for the explicit upwind update: `σ / max_c Σ_in |u|/h · φ′`,
/// with `φ′` maximised between the cell and each upwind neighbour. Returns
/// `cap` when nothing flows.
pub fn cfl_timestep<T: Real>(u: &FaceFluxField<T>, s: &SaturationField<T>, props: &FluidProps<T>, sigma: T, cap: T) -> T {
    let grid = *u.grid();
    let h = grid.spacing();
    let sv = s.values();
    let mut rate = T::zero();
    for c in 0..grid.cell_count() {
        let ijk = grid.cell_coords(c);
        let out = u.cell_outflux(c);
        let mut r = T::zero();
        for (f, &q) in out.iter().enumerate() {
            if q < T::zero() {
                let up = neighbour(&grid, ijk, f).map_or(sv[c], |n| sv[n]);
                r += -q / h[f / 2] * props.max_dphi_between(sv[c], up);
            }
        }
        rate = rate.max(r);
    }
    if rate > T::zero() {
        (sigma / rate).min(cap)
    } else {
        cap
    }
}

/// `S − Δt Σ_f (u·n/h)(φ_up − φ_c) + Δt f⁺(1 − φ_c)` in every cell, which is the
/// conservative upwind update with the sink producing at the cell's `φ` and
/// the divergence residual of `u` compensated. Injector cells are reset to 1.
pub fn advance_saturation<T: Real>(
    s: &SaturationField<T>,
    u: &FaceFluxField<T>,
    f: &CellField<T>,
    dt: T,
    props: &FluidProps<T>,
    injector: &[usize],
) -> Result<SaturationField<T>> {
    advance_saturation_with(s, u, f, dt, props, injector, &WorkerPool::serial())
}

/// Cells per parallel tile of the saturation update.
const TILE: usize = 4096;

#[allow(clippy::too_many_arguments)]
pub fn advance_saturation_with<T: Real>(
    s: &SaturationField<T>,
    u: &FaceFluxField<T>,
    f: &CellField<T>,
    dt: T,
    props: &FluidProps<T>,
    injector: &[usize],
    pool: &WorkerPool,
) -> Result<SaturationField<T>> {
    let grid = *s.grid();
    if !u.grid().same_shape(&grid) || !f.grid().same_shape(&grid) {
        return Err(Error::ShapeMismatch("saturation, flux and source grids differ".into()));
    }
    if !(dt >= T::zero()) {
        return Err(invalid(format!("negative time step {dt}")));
    }
    let n = grid.cell_count();
    let h = grid.spacing();
    let sv = s.values();
    let phis: Vec<T> = sv.iter().map(|&x| props.phi(x)).collect();
    let tiles = pool.map(n.div_ceil(TILE), |t| {
        let range = t * TILE..((t + 1) * TILE).min(n);
        range
            .map(|c| {
                let ijk = grid.cell_coords(c);
                let out = u.cell_outflux(c);
                let mut acc = T::zero();
                for (face, &q) in out.iter().enumerate() {
                    if q < T::zero() {
                        if let Some(nb) = neighbour(&grid, ijk, face) {
                            acc += q / h[face / 2] * (phis[nb] - phis[c]);
                        }
                    }
                }
                let src = f.get(c).max(T::zero());
                sv[c] - dt * acc + dt * src * (T::one() - phis[c])
            })
            .collect::<Vec<T>>()
    });
    let mut next: Vec<T> = tiles.into_iter().flatten().collect();
    for &c in injector {
        next[c] = T::one();
    }
    let slack = T::lit(1e-12);
    for (c, v) in next.iter_mut().enumerate() {
        if *v < -slack || *v > T::one() + slack || !v.is_finite() {
            return Err(Error::CflViolation { cell: c, value: v.to_f64_lossy() });
        }
        *v = v.max(T::zero()).min(T::one());
    }
    SaturationField::new(CellField::new(grid, next)?)
}

/// Injector and producer well boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct Wells {
    /// Cells held at `S = 1`.
    pub injectors: Vec<CellBox>,
    pub producers: Vec<CellBox>,
}

impl Wells {
    pub fn injector_cells<T: Real>(&self, grid: &StructuredGrid<T>) -> Vec<usize> {
        self.injectors.iter().flat_map(|b| b.cells(grid)).collect()
    }
}

/// Production state at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductionSample<T> {
    pub t_pvi: T,
    pub oil_fraction: T,
    pub watercuts: Vec<T>,
    /// Set when no fluid reaches the producers; the fractions are then 0.
    pub no_flow: bool,
}

/// Samples with nondecreasing `t_pvi`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProductionRecord<T> {
    pub samples: Vec<ProductionSample<T>>,
}

impl<T: Real> ProductionRecord<T> {
    /// Oil fraction at `t`, linearly interpolated and held constant past either end.
    pub fn oil_fraction_at(&self, t: T) -> Option<T> {
        let s = &self.samples;
        let first = s.first()?;
        if t <= first.t_pvi {
            return Some(first.oil_fraction);
        }
        for w in s.windows(2) {
            if t <= w[1].t_pvi {
                let span = w[1].t_pvi - w[0].t_pvi;
                if span <= T::zero() {
                    return Some(w[1].oil_fraction);
                }
                let x = (t - w[0].t_pvi) / span;
                return Some(w[0].oil_fraction + x * (w[1].oil_fraction - w[0].oil_fraction));
            }
        }
        s.last().map(|l| l.oil_fraction)
    }

    /// Largest `|𝒫_oil|` difference against `other`, sampled at both records' times.
    pub fn max_oil_difference(&self, other: &Self) -> Option<T> {
        let mut m = T::zero();
        for t in self.samples.iter().chain(&other.samples).map(|s| s.t_pvi) {
            m = m.max((self.oil_fraction_at(t)? - other.oil_fraction_at(t)?).abs());
        }
        Some(m)
    }
}

/// Outward flux through the boundary of `well` split into total and water parts,
/// with `φ` taken from the upwind side of each face.
fn well_boundary_flux<T: Real>(u: &FaceFluxField<T>, phis: &[T], well: &CellBox) -> (T, T) {
    let grid = *u.grid();
    let (mut total, mut water) = (T::zero(), T::zero());
    for c in well.cells(&grid) {
        let ijk = grid.cell_coords(c);
        let out = u.cell_outflux(c);
        for (face, &q) in out.iter().enumerate() {
            let nb = neighbour(&grid, ijk, face);
            if nb.is_some_and(|n| well.contains(grid.cell_coords(n))) {
                continue;
            }
            let flux = q * grid.face_area(face / 2);
            let phi = match nb {
                Some(n) if q < T::zero() => phis[n],
                _ => phis[c],
            };
            total += flux;
            water += phi * flux;
        }
    }
    (total, water)
}

/// Oil fraction and watercuts from surface integrals over the producer boundaries.
pub fn production_metrics<T: Real>(
    u: &FaceFluxField<T>,
    s: &SaturationField<T>,
    props: &FluidProps<T>,
    wells: &Wells,
    t_pvi: T,
) -> Result<ProductionSample<T>> {
    if !u.grid().same_shape(s.grid()) {
        return Err(Error::ShapeMismatch("flux and saturation grids differ".into()));
    }
    let phis: Vec<T> = s.values().iter().map(|&x| props.phi(x)).collect();
    let mut watercuts = Vec::with_capacity(wells.producers.len());
    let (mut total, mut oil) = (T::zero(), T::zero());
    let mut no_flow = false;
    for w in &wells.producers {
        let (t, wat) = well_boundary_flux(u, &phis, w);
        if t == T::zero() {
            no_flow = true;
            watercuts.push(T::zero());
        } else {
            watercuts.push((wat / t).max(T::zero()).min(T::one()));
        }
        total += t;
        oil += t - wat;
    }
    let oil_fraction = if total == T::zero() {
        no_flow = true;
        T::zero()
    } else {
        (oil / total).max(T::zero()).min(T::one())
    };
    Ok(ProductionSample { t_pvi, oil_fraction, watercuts, no_flow })
}
