//! Five-spot scenario: one central injector column and four corner producers.

use crate::error::{Error, Result};
use crate::fv::BoundarySpec;
use crate::grid::{CellBox, CellField, PermeabilityField, StructuredGrid};
use crate::linalg::KrylovConfig;
use crate::mrcm::{FineSolver, DEFAULT_FINE_CAP};
use crate::transport::{DarcyDriver, FluidProps, ImpesConfig, Wells};

/// Reference domain in feet and the well footprint on it.
pub const REFERENCE_EXTENTS: [f64; 3] = [1200.0, 2200.0, 120.0];
const WELL_FOOTPRINT: [f64; 2] = [20.0, 10.0];

/// Well boxes and the matching volumetric source.
#[derive(Clone, Debug, PartialEq)]
pub struct FiveSpot {
    pub wells: Wells,
    pub source: CellField<f64>,
    /// Total injected volume per unit time.
    pub injection_rate: f64,
}

/// Footprint in cells: the reference well size scaled by the grid resolution.
pub fn well_footprint(dims: [usize; 3]) -> [usize; 2] {
    [0, 1].map(|a| ((dims[a] as f64 * WELL_FOOTPRINT[a] / REFERENCE_EXTENTS[a]).round() as usize).max(1))
}

/// Builds the wells so that one pore volume is injected every `pvi_period`
/// time units. `split[i]` is the share of producer `i`, ordered
/// `(lo, lo), (hi, lo), (lo, hi), (hi, hi)` in `(x1, x2)`.
pub fn build_five_spot(grid: &StructuredGrid<f64>, pvi_period: f64, split: [f64; 4]) -> Result<FiveSpot> {
    let mut errs = Vec::new();
    if !(pvi_period > 0.0 && pvi_period.is_finite()) {
        errs.push(format!("PVI period must be positive, got {pvi_period}"));
    }
    if split.iter().any(|&s| !(s >= 0.0)) || (split.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        errs.push(format!("producer split {split:?} must be non-negative and sum to 1"));
    }
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let d = grid.dims();
    let [fx, fy] = well_footprint(d);
    let col = |x: usize, y: usize| CellBox::new([x, y, 0], [x + fx, y + fy, d[2]]);
    let centre = |n: usize, w: usize| (n - w.min(n)) / 2;
    let injector = col(centre(d[0], fx), centre(d[1], fy))?;
    let (hx, hy) = (d[0].saturating_sub(fx), d[1].saturating_sub(fy));
    let producers = vec![col(0, 0)?, col(hx, 0)?, col(0, hy)?, col(hx, hy)?];
    let all: Vec<&CellBox> = std::iter::once(&injector).chain(&producers).collect();
    for (i, a) in all.iter().enumerate() {
        if !a.fits_in(d) {
            return Err(Error::Validation(vec![format!("well box {a:?} leaves the {d:?} grid")]));
        }
        for b in &all[i + 1..] {
            if a.intersects(b) {
                return Err(Error::Validation(vec![format!("grid {d:?} too small: well boxes {a:?} and {b:?} overlap")]));
            }
        }
    }
    let rate = grid.volume() / pvi_period;
    let vol = grid.cell_volume();
    let mut f = vec![0.0; grid.cell_count()];
    let inj = injector.cells(grid);
    for &c in &inj {
        f[c] = rate / (inj.len() as f64 * vol);
    }
    for (p, share) in producers.iter().zip(split) {
        let cells = p.cells(grid);
        for &c in &cells {
            f[c] = -share * rate / (cells.len() as f64 * vol);
        }
    }
    Ok(FiveSpot {
        wells: Wells { injectors: vec![injector], producers },
        source: CellField::new(*grid, f)?,
        injection_rate: rate,
    })
}

/// Multiscale settings; `coarsening` is `H̄` in fine cells per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MrcmSettings {
    pub counts: [usize; 3],
    pub coarsening: [usize; 3],
    pub alpha: f64,
}

/// Fully built problem description.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub k: PermeabilityField<f64>,
    pub bc: BoundarySpec<f64>,
    pub f: CellField<f64>,
    pub wells: Option<Wells>,
    pub props: FluidProps<f64>,
    pub mrcm: MrcmSettings,
    pub fine_solver: FineSolver<f64>,
    pub fine_cap: usize,
    pub impes: ImpesConfig<f64>,
    /// Darcy driver of the two-phase loop.
    pub multiscale: bool,
    pub workers: Option<usize>,
}

impl Scenario {
    pub fn grid(&self) -> &StructuredGrid<f64> {
        self.k.grid()
    }

    /// Five-spot on `k` with no flow outside and the given multiscale settings.
    pub fn five_spot(k: PermeabilityField<f64>, mrcm: MrcmSettings, props: FluidProps<f64>) -> Result<Self> {
        let grid = *k.grid();
        let fs = build_five_spot(&grid, 1.0, [0.25; 4])?;
        let s = Self {
            bc: BoundarySpec::no_flow(grid.dims()),
            f: fs.source,
            wells: Some(fs.wells),
            props,
            mrcm,
            fine_solver: FineSolver::Direct,
            fine_cap: DEFAULT_FINE_CAP,
            impes: ImpesConfig::default(),
            multiscale: true,
            workers: None,
            k,
        };
        s.validate()?;
        Ok(s)
    }

    /// IMPES settings with the requested Darcy driver.
    pub fn impes_config(&self, multiscale: bool) -> ImpesConfig<f64> {
        let driver = if multiscale {
            DarcyDriver::Mrcm { counts: self.mrcm.counts, coarsening: self.mrcm.coarsening, alpha: self.mrcm.alpha }
        } else {
            DarcyDriver::Fine(self.fine_solver)
        };
        ImpesConfig { driver, fine_cap: self.fine_cap, ..self.impes }
    }

    /// Checks every cross-field invariant and lists all violations.
    pub fn validate(&self) -> Result<()> {
        let grid = *self.grid();
        let d = grid.dims();
        let mut errs = Vec::new();
        if self.bc.dims() != d || !self.f.grid().same_shape(&grid) {
            errs.push("boundary conditions or source do not match the grid".to_string());
        }
        if let Err(e) = self.bc.validate() {
            errs.push(e.to_string());
        }
        if let Some(w) = &self.wells {
            let all: Vec<&CellBox> = w.injectors.iter().chain(&w.producers).collect();
            for (i, a) in all.iter().enumerate() {
                if !a.fits_in(d) {
                    errs.push(format!("well box {a:?} outside the {d:?} grid"));
                }
                if all[i + 1..].iter().any(|b| a.intersects(b)) {
                    errs.push(format!("well box {a:?} overlaps another well"));
                }
            }
        }
        if self.bc.is_pure_neumann() {
            let net = self.f.integral() - self.bc.neumann_outflow(&grid);
            let scale = self.f.values().iter().map(|v| v.abs()).sum::<f64>() * grid.cell_volume();
            if net.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                errs.push(format!("sources do not balance under no-flow boundaries (net {net:e})"));
            }
        }
        let m = self.mrcm;
        for a in 0..3 {
            if m.counts[a] == 0 || d[a] % m.counts[a] != 0 {
                errs.push(format!("{} subdomains do not divide {} cells along axis {a}", m.counts[a], d[a]));
            } else if m.coarsening[a] == 0 || (d[a] / m.counts[a]) % m.coarsening[a] != 0 {
                errs.push(format!("interface size {} does not divide the subdomain along axis {a}", m.coarsening[a]));
            }
        }
        if !(m.alpha > 0.0 && m.alpha.is_finite()) {
            errs.push(format!("Robin parameter {} must be positive", m.alpha));
        }
        if let FineSolver::Krylov(cfg) = self.fine_solver {
            if let Err(e) = KrylovConfig::validate(&cfg) {
                errs.push(e.to_string());
            }
        }
        if let Err(Error::Validation(v)) = self.impes.validate() {
            errs.extend(v);
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}
