//! Scenario configuration as TOML: `[section]` headers with `key = value` lines.
//! Unknown sections and keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fv::{BoundarySpec, FaceCondition};
use crate::grid::{import_spe10, CellField, PermeabilityField, StructuredGrid};
use crate::linalg::{KrylovConfig, KrylovMethod, Preconditioner};
use crate::mrcm::{FineSolver, DEFAULT_FINE_CAP};
use crate::scenario::{build_five_spot, MrcmSettings, Scenario, REFERENCE_EXTENTS};
use crate::transport::{FluidProps, ImpesConfig};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: RawGrid,
    permeability: RawPermeability,
    #[serde(default)]
    wells: RawWells,
    #[serde(default)]
    boundary: RawBoundary,
    #[serde(default)]
    fluid: RawFluid,
    #[serde(default)]
    mrcm: RawMrcm,
    #[serde(default)]
    impes: RawImpes,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dims: [usize; 3],
    #[serde(default = "reference_extents")]
    extents: [f64; 3],
}

fn reference_extents() -> [f64; 3] {
    REFERENCE_EXTENTS
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum PermSource {
    Homogeneous,
    Generate,
    Import,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPermeability {
    source: PermSource,
    /// Homogeneous diagonal tensor.
    value: Option<[f64; 3]>,
    seed: Option<u64>,
    contrast: Option<f64>,
    path: Option<PathBuf>,
    /// Dimensions of the file on disk.
    file_dims: Option<[usize; 3]>,
    /// Zero-based half-open x3 layer range.
    layers: Option<[usize; 2]>,
    #[serde(default = "unit_factors")]
    refine: [usize; 3],
    #[serde(default = "one")]
    theta: f64,
}

fn unit_factors() -> [usize; 3] {
    [1; 3]
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWells {
    #[serde(default = "yes")]
    five_spot: bool,
    #[serde(default = "one")]
    pvi_period: f64,
    #[serde(default = "equal_split")]
    producer_split: [f64; 4],
}

fn yes() -> bool {
    true
}

fn equal_split() -> [f64; 4] {
    [0.25; 4]
}

impl Default for RawWells {
    fn default() -> Self {
        Self { five_spot: true, pvi_period: 1.0, producer_split: equal_split() }
    }
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
enum BoundaryKind {
    #[default]
    NoFlow,
    LinearDrive,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    #[serde(default)]
    kind: BoundaryKind,
    axis: Option<usize>,
    p_lo: Option<f64>,
    p_hi: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFluid {
    #[serde(default = "one")]
    mu_w: f64,
    #[serde(default = "default_mu_o")]
    mu_o: f64,
}

fn default_mu_o() -> f64 {
    4.0
}

impl Default for RawFluid {
    fn default() -> Self {
        Self { mu_w: 1.0, mu_o: default_mu_o() }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMrcm {
    subdomains: Option<[usize; 3]>,
    /// `H̄` in fine cells; defaults to the subdomain size.
    coarsening: Option<[usize; 3]>,
    alpha: Option<f64>,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
enum DriverKind {
    Fine,
    #[default]
    Mrcm,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawImpes {
    skipping: Option<usize>,
    cfl: Option<f64>,
    end_pvi: Option<f64>,
    max_steps: Option<usize>,
    dt_cap: Option<f64>,
    #[serde(default)]
    driver: DriverKind,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
enum FineKind {
    #[default]
    Direct,
    Cg,
    Gmres,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default)]
    fine: FineKind,
    rtol: Option<f64>,
    max_iter: Option<usize>,
    restart: Option<usize>,
    jacobi: Option<bool>,
    fine_cap: Option<usize>,
    workers: Option<usize>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn parse_raw(text: &str) -> Result<RawConfig> {
    toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })
}

/// Parses and validates a scenario. Relative import paths resolve against `base`.
pub fn parse_config(text: &str, base: Option<&Path>) -> Result<Scenario> {
    let raw = parse_raw(text)?;
    let mut errs = Vec::new();

    let grid = StructuredGrid::new(raw.grid.dims, raw.grid.extents)?;
    let k = build_permeability(&raw.permeability, &grid, base, &mut errs)?;
    let Some(k) = k else { return Err(Error::Validation(errs)) };
    let grid = *k.grid();
    let d = grid.dims();

    let bc = match raw.boundary.kind {
        BoundaryKind::NoFlow => BoundarySpec::no_flow(d),
        BoundaryKind::LinearDrive => {
            let axis = raw.boundary.axis.unwrap_or(0);
            if axis > 2 {
                errs.push(format!("boundary axis {axis} must be 0, 1 or 2"));
            }
            let mut bc = BoundarySpec::no_flow(d);
            bc.set_side(2 * axis.min(2), FaceCondition::Dirichlet(raw.boundary.p_lo.unwrap_or(1.0)));
            bc.set_side(2 * axis.min(2) + 1, FaceCondition::Dirichlet(raw.boundary.p_hi.unwrap_or(0.0)));
            bc
        }
    };
    if raw.boundary.kind == BoundaryKind::NoFlow
        && (raw.boundary.axis.is_some() || raw.boundary.p_lo.is_some() || raw.boundary.p_hi.is_some())
    {
        errs.push("axis, p_lo and p_hi only apply to kind = \"linear-drive\"".into());
    }

    let (f, wells) = if raw.wells.five_spot {
        match build_five_spot(&grid, raw.wells.pvi_period, raw.wells.producer_split) {
            Ok(fs) => (fs.source, Some(fs.wells)),
            Err(Error::Validation(v)) => {
                errs.extend(v);
                (CellField::zeros(grid), None)
            }
            Err(e) => return Err(e),
        }
    } else {
        (CellField::zeros(grid), None)
    };

    let props = match FluidProps::new(raw.fluid.mu_w, raw.fluid.mu_o) {
        Ok(p) => p,
        Err(e) => {
            errs.push(e.to_string());
            FluidProps::new(1.0, 1.0)?
        }
    };

    let counts = raw.mrcm.subdomains.unwrap_or([1; 3]);
    let coarsening = raw.mrcm.coarsening.unwrap_or_else(|| [0, 1, 2].map(|a| d[a] / counts[a].max(1)));
    let mrcm = MrcmSettings { counts, coarsening, alpha: raw.mrcm.alpha.unwrap_or(1.0) };

    let defaults = KrylovConfig::<f64>::default();
    let fine_solver = match raw.solver.fine {
        FineKind::Direct => FineSolver::Direct,
        kind => FineSolver::Krylov(KrylovConfig {
            rtol: raw.solver.rtol.unwrap_or(defaults.rtol),
            max_iter: raw.solver.max_iter.unwrap_or(defaults.max_iter),
            preconditioner: match raw.solver.jacobi {
                Some(false) => Preconditioner::None,
                _ => Preconditioner::Jacobi,
            },
            method: if kind == FineKind::Cg { KrylovMethod::Cg } else { KrylovMethod::Gmres(raw.solver.restart.unwrap_or(50)) },
        }),
    };
    if raw.solver.fine == FineKind::Direct
        && (raw.solver.rtol.is_some() || raw.solver.max_iter.is_some() || raw.solver.restart.is_some() || raw.solver.jacobi.is_some())
    {
        errs.push("rtol, max_iter, restart and jacobi need an iterative fine solver".into());
    }
    if raw.solver.workers == Some(0) {
        errs.push("workers must be at least 1".into());
    }

    let base_impes = ImpesConfig::<f64>::default();
    let impes = ImpesConfig {
        skipping: raw.impes.skipping.unwrap_or(base_impes.skipping),
        cfl: raw.impes.cfl.unwrap_or(base_impes.cfl),
        end_pvi: raw.impes.end_pvi.unwrap_or(base_impes.end_pvi),
        max_steps: raw.impes.max_steps,
        dt_cap: raw.impes.dt_cap.unwrap_or(base_impes.dt_cap),
        ..base_impes
    };

    let scenario = Scenario {
        k,
        bc,
        f,
        wells,
        props,
        mrcm,
        fine_solver,
        fine_cap: raw.solver.fine_cap.unwrap_or(DEFAULT_FINE_CAP),
        impes,
        multiscale: raw.impes.driver == DriverKind::Mrcm,
        workers: raw.solver.workers,
    };
    if let Err(Error::Validation(v)) = scenario.validate() {
        errs.extend(v);
    }
    if errs.is_empty() {
        Ok(scenario)
    } else {
        Err(Error::Validation(errs))
    }
}

fn build_permeability(
    raw: &RawPermeability,
    grid: &StructuredGrid<f64>,
    base: Option<&Path>,
    errs: &mut Vec<String>,
) -> Result<Option<PermeabilityField<f64>>> {
    let mut unused = |name: &str, present: bool| {
        if present {
            errs.push(format!("permeability key `{name}` does not apply to this source"));
        }
    };
    let field = match raw.source {
        PermSource::Homogeneous => {
            unused("seed", raw.seed.is_some());
            unused("contrast", raw.contrast.is_some());
            unused("path", raw.path.is_some());
            unused("file_dims", raw.file_dims.is_some());
            unused("layers", raw.layers.is_some());
            let refined = grid.refined(raw.refine)?;
            PermeabilityField::homogeneous(refined, raw.value.unwrap_or([1.0; 3]))?
        }
        PermSource::Generate => {
            unused("value", raw.value.is_some());
            unused("path", raw.path.is_some());
            unused("file_dims", raw.file_dims.is_some());
            unused("layers", raw.layers.is_some());
            PermeabilityField::generate_channel_field(raw.seed.unwrap_or(0), *grid, raw.contrast.unwrap_or(1e4))?
                .refine(raw.refine)?
        }
        PermSource::Import => {
            unused("value", raw.value.is_some());
            unused("seed", raw.seed.is_some());
            unused("contrast", raw.contrast.is_some());
            let Some(path) = &raw.path else {
                errs.push("import needs `path`".into());
                return Ok(None);
            };
            let path = match base {
                Some(b) if path.is_relative() => b.join(path),
                _ => path.clone(),
            };
            let file_dims = raw.file_dims.unwrap_or(grid.dims());
            let layers = raw.layers.map(|[a, b]| a..b);
            let kept = layers.as_ref().map_or(file_dims[2], |r| r.len());
            if [file_dims[0], file_dims[1], kept] != grid.dims() {
                errs.push(format!(
                    "imported field {:?} does not match grid dims {:?}",
                    [file_dims[0], file_dims[1], kept],
                    grid.dims()
                ));
                return Ok(None);
            }
            import_spe10(path, file_dims, layers, grid.extents())?.refine(raw.refine)?
        }
    };
    Ok(Some(if raw.theta == 1.0 { field } else { field.apply_contrast_exponent(raw.theta)? }))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path.parent())
}
