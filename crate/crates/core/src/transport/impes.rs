use std::time::Instant;

use super::{advance_saturation_with, cfl_timestep, mobility_field, production_metrics, FluidProps, ProductionRecord, Wells};
use crate::decomposition::{compute_robin_params, DomainDecomposition, InterfaceSpace};
use crate::error::{invalid, Error, Result};
use crate::fv::BoundarySpec;
use crate::grid::{CellField, FaceFluxField, PermeabilityField, SaturationField};
use crate::mrcm::{solve_fine, solve_mrcm, FineSolver, MrcmProblem, DEFAULT_FINE_CAP};
use crate::parallel::WorkerPool;
use crate::postprocess::conservative_reconstruction;
use crate::scalar::Real;

/// Pressure solver used at every pressure step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DarcyDriver<T> {
    Fine(FineSolver<T>),
    /// Multiscale solve followed by the conservative postprocessing.
    Mrcm { counts: [usize; 3], coarsening: [usize; 3], alpha: T },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImpesConfig<T> {
    /// Transport steps per pressure solve.
    pub skipping: usize,
    pub cfl: T,
    pub end_pvi: T,
    /// Hard stop on transport steps, needed when nothing is injected.
    pub max_steps: Option<usize>,
    /// Step used when the velocity vanishes.
    pub dt_cap: T,
    pub driver: DarcyDriver<T>,
    pub fine_cap: usize,
}

impl<T: Real> Default for ImpesConfig<T> {
    fn default() -> Self {
        Self {
            skipping: 600,
            cfl: T::lit(0.9),
            end_pvi: T::lit(0.2),
            max_steps: None,
            dt_cap: T::one(),
            driver: DarcyDriver::Fine(FineSolver::Direct),
            fine_cap: DEFAULT_FINE_CAP,
        }
    }
}

impl<T: Real> ImpesConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.skipping < 1 {
            errs.push("skipping constant must be at least 1".to_string());
        }
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            errs.push(format!("CFL factor {} outside (0, 1]", self.cfl));
        }
        if !(self.end_pvi >= T::zero() && self.end_pvi.is_finite()) {
            errs.push(format!("end time {} must be finite and non-negative", self.end_pvi));
        }
        if !(self.dt_cap > T::zero()) {
            errs.push("time step cap must be positive".to_string());
        }
        if let DarcyDriver::Mrcm { alpha, .. } = self.driver {
            if !(alpha > T::zero() && alpha.is_finite()) {
                errs.push(format!("Robin parameter {alpha} must be positive"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

/// Absolute permeability, flow data and fluids for a two-phase run.
#[derive(Clone, Copy, Debug)]
pub struct TwoPhaseProblem<'a, T> {
    pub k: &'a PermeabilityField<T>,
    pub bc: &'a BoundarySpec<T>,
    pub f: &'a CellField<T>,
    pub wells: &'a Wells,
    pub props: FluidProps<T>,
}

#[derive(Clone, Debug)]
pub struct ImpesOutcome<T> {
    /// One sample per pressure step plus the final state.
    pub record: ProductionRecord<T>,
    pub saturation: SaturationField<T>,
    pub pressure: CellField<T>,
    pub velocity: FaceFluxField<T>,
    pub pressure_steps: usize,
    pub transport_steps: usize,
    pub t_pvi: T,
    pub darcy_seconds: f64,
    pub transport_seconds: f64,
}

struct MrcmCache<T> {
    dd: DomainDecomposition<T>,
    space: InterfaceSpace,
}

fn darcy_solve<T: Real>(
    problem: &TwoPhaseProblem<'_, T>,
    config: &ImpesConfig<T>,
    cache: Option<&MrcmCache<T>>,
    s: &SaturationField<T>,
    pool: &WorkerPool,
) -> Result<(CellField<T>, FaceFluxField<T>)> {
    let k_hat = problem.k.scaled_by(&mobility_field(s, &problem.props))?;
    match (config.driver, cache) {
        (DarcyDriver::Fine(solver), _) => {
            let sol = solve_fine(&k_hat, problem.bc, problem.f, solver, config.fine_cap)?;
            Ok((sol.pressure, sol.velocity))
        }
        (DarcyDriver::Mrcm { alpha, .. }, Some(c)) => {
            let robin = compute_robin_params(&c.dd, &k_hat, alpha)?;
            let mp = MrcmProblem::new(&k_hat, problem.bc, problem.f, &c.dd, &c.space, &robin)?;
            let msol = solve_mrcm(&mp, pool)?;
            let cons = conservative_reconstruction(&msol, &mp, pool)?;
            Ok((msol.pressure, cons.velocity))
        }
        (DarcyDriver::Mrcm { .. }, None) => Err(invalid("multiscale driver without a decomposition")),
    }
}

/// IMPES loop: the pressure is solved every `skipping` transport steps with
/// `K̂ = λ(S)K` and the velocity is frozen in between.
pub fn run_impes<T: Real>(
    problem: &TwoPhaseProblem<'_, T>,
    config: &ImpesConfig<T>,
    initial: SaturationField<T>,
    pool: &WorkerPool,
) -> Result<ImpesOutcome<T>> {
    config.validate()?;
    let grid = *problem.k.grid();
    if !initial.grid().same_shape(&grid) || !problem.f.grid().same_shape(&grid) {
        return Err(Error::ShapeMismatch("initial saturation or source does not match permeability".into()));
    }
    let cache = match config.driver {
        DarcyDriver::Mrcm { counts, coarsening, .. } => {
            let dd = DomainDecomposition::new(&grid, counts)?;
            let space = InterfaceSpace::new(&dd, coarsening)?;
            Some(MrcmCache { dd, space })
        }
        DarcyDriver::Fine(_) => None,
    };
    let injector = problem.wells.injector_cells(&grid);
    let pore_volume = grid.volume();
    let rate = injector.iter().map(|&c| problem.f.get(c)).sum::<T>() * grid.cell_volume();
    if rate <= T::zero() && config.max_steps.is_none() {
        return Err(invalid("no injection and no step limit: the run would not end"));
    }

    let mut s = {
        let mut v = initial.into_field().into_values();
        for &c in &injector {
            v[c] = T::one();
        }
        SaturationField::new(CellField::new(grid, v)?)?
    };
    let mut record = ProductionRecord::default();
    let mut t_pvi = T::zero();
    let (mut darcy_seconds, mut transport_seconds) = (0.0, 0.0);
    let mut pressure_steps = 0;
    let mut steps = 0usize;
    let mut state: Option<(CellField<T>, FaceFluxField<T>)> = None;
    let done = |t: T, n: usize| {
        (rate > T::zero() && t >= config.end_pvi * (T::one() - T::lit(1e-12))) || config.max_steps.is_some_and(|m| n >= m)
    };

    loop {
        if steps % config.skipping == 0 || state.is_none() {
            let t0 = Instant::now();
            let solved = darcy_solve(problem, config, cache.as_ref(), &s, pool).map_err(|e| Error::Aborted {
                step: pressure_steps,
                t_pvi: t_pvi.to_f64_lossy(),
                saturation: s.values().iter().map(|v| v.to_f64_lossy()).collect(),
                source: Box::new(e),
            })?;
            darcy_seconds += t0.elapsed().as_secs_f64();
            record.samples.push(production_metrics(&solved.1, &s, &problem.props, problem.wells, t_pvi)?);
            state = Some(solved);
            pressure_steps += 1;
        }
        if done(t_pvi, steps) {
            break;
        }
        let (_, u) = state.as_ref().expect("velocity available");
        let t0 = Instant::now();
        let mut dt = cfl_timestep(u, &s, &problem.props, config.cfl, config.dt_cap);
        if rate > T::zero() {
            dt = dt.min((config.end_pvi - t_pvi) * pore_volume / rate);
        }
        s = advance_saturation_with(&s, u, problem.f, dt, &problem.props, &injector, pool)?;
        t_pvi += dt * rate / pore_volume;
        steps += 1;
        transport_seconds += t0.elapsed().as_secs_f64();
    }

    let (pressure, velocity) = state.expect("at least one pressure step");
    if record.samples.last().is_some_and(|l| l.t_pvi < t_pvi) {
        record.samples.push(production_metrics(&velocity, &s, &problem.props, problem.wells, t_pvi)?);
    }
    Ok(ImpesOutcome {
        record,
        saturation: s,
        pressure,
        velocity,
        pressure_steps,
        transport_steps: steps,
        t_pvi,
        darcy_seconds,
        transport_seconds,
    })
}
