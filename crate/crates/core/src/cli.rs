//! Command-line surface. `run_command` returns the process exit code.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{factor_vs_solve, fine_solver_comparison, sweep_subdomains};
use crate::config::load_config;
use crate::decomposition::{compute_robin_params, DomainDecomposition, InterfaceSpace};
use crate::error::{Error, Result};
use crate::grid::{export_spe10, write_field_dump, CellField, PermeabilityField, SaturationField, StructuredGrid};
use crate::metrics::{compare, skeleton_jumps, velocity_error};
use crate::mrcm::{solve_fine, solve_mrcm, FineSolution, MrcmProblem, MultiscaleSolution, DEFAULT_FINE_CAP};
use crate::output::{write_production_curves, write_report, write_timings, RunReport};
use crate::parallel::WorkerPool;
use crate::postprocess::{conservative_reconstruction, ConservativeFlux};
use crate::scenario::{Scenario, REFERENCE_EXTENTS};
use crate::transport::{run_impes, TwoPhaseProblem};

#[derive(Debug, Parser)]
#[command(name = "mrcm", version, about = "Fine-grid and multiscale Darcy solvers with IMPES transport")]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a channelized permeability field in SPE10 layout.
    GenPerm(GenPerm),
    /// Solve the single-phase problem with the fine-grid solver.
    SolveFine(Solve),
    /// Solve the single-phase problem with the multiscale solver.
    SolveMrcm(SolveMrcm),
    /// Fine against multiscale: pressure and velocity errors and skeleton jumps.
    Compare(Solve),
    /// Run the IMPES loop and write production curves.
    TwoPhase(TwoPhase),
    /// Timing harness.
    Bench(Bench),
}

#[derive(Debug, Args)]
struct GenPerm {
    #[arg(long, num_args = 3, required = true)]
    dims: Vec<usize>,
    #[arg(long, num_args = 3)]
    extents: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e4)]
    contrast: f64,
    /// Contrast exponent applied after generation.
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write log10 of the x1 component as a field dump.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Solve {
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SolveMrcm {
    #[command(flatten)]
    solve: Solve,
    /// Overrides the configured Robin parameter.
    #[arg(long)]
    alpha: Option<f64>,
    /// Skip the conservative velocity reconstruction.
    #[arg(long)]
    no_postprocess: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Driver {
    Fine,
    Mrcm,
}

#[derive(Debug, Args)]
struct TwoPhase {
    #[command(flatten)]
    solve: Solve,
    /// Darcy driver; defaults to the config.
    #[arg(long, value_enum)]
    driver: Option<Driver>,
}

#[derive(Debug, Args)]
struct Bench {
    /// MBF and interface stage times over subdomain counts.
    #[arg(long)]
    sweep_subdomains: bool,
    /// Factorization against per-right-hand-side solve time.
    #[arg(long)]
    factor_solve: bool,
    /// Direct against CG on the fine problem.
    #[arg(long)]
    fine_solvers: bool,
    #[arg(long, num_args = 3, default_values_t = [32, 32, 16])]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e3)]
    contrast: f64,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run_command<I, A>(argv: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<String> {
    let pool = cli.workers;
    match cli.command {
        Command::GenPerm(a) => gen_perm(a),
        Command::SolveFine(a) => with_scenario(&a, pool, |s, _, out| {
            let mut r = RunReport::default();
            let sol = fine(&s, &mut r)?;
            finish_single_phase(out, &mut r, &sol.pressure)?;
            Ok(r)
        }),
        Command::SolveMrcm(a) => with_scenario(&a.solve, pool, |mut s, pool, out| {
            if let Some(alpha) = a.alpha {
                s.mrcm.alpha = alpha;
                s.validate()?;
            }
            let mut r = RunReport::default();
            let (msol, post) = multiscale(&s, pool, !a.no_postprocess, &mut r)?;
            let jumps = skeleton_jumps(&msol);
            r.metric("max_pressure_jump", jumps.pressure);
            r.metric("max_flux_jump", jumps.flux);
            if let Some(p) = post {
                r.flag("conservative", p.max_residual <= 1e-10 * p.scale);
            }
            finish_single_phase(out, &mut r, &msol.pressure)?;
            Ok(r)
        }),
        Command::Compare(a) => with_scenario(&a, pool, |s, pool, out| {
            let mut r = RunReport::default();
            let f = fine(&s, &mut r)?;
            let (msol, post) = multiscale(&s, pool, true, &mut r)?;
            let gauge = s.bc.is_pure_neumann();
            r.add_errors(&compare(&f.pressure, &f.velocity, &msol, &msol.velocity, &s.k, gauge)?);
            if let Some(p) = post {
                r.metric("velocity_error_postprocessed", velocity_error(&p.velocity, &f.velocity, &s.k)?);
            }
            write_field_dump(out.join("pressure_fine.mrcm"), &f.pressure)?;
            finish_single_phase(out, &mut r, &msol.pressure)?;
            Ok(r)
        }),
        Command::TwoPhase(a) => with_scenario(&a.solve, pool, |s, pool, out| two_phase(&s, a.driver, pool, out)),
        Command::Bench(a) => bench(a, pool.map_or_else(WorkerPool::default, WorkerPool::new)),
    }
}

fn with_scenario(
    a: &Solve,
    workers: Option<usize>,
    run: impl FnOnce(Scenario, &WorkerPool, &Path) -> Result<RunReport>,
) -> Result<String> {
    let s = load_config(&a.config)?;
    // the command-line flag wins over the config
    let pool = workers.or(s.workers).map_or_else(WorkerPool::default, WorkerPool::new);
    std::fs::create_dir_all(&a.out)?;
    let report = run(s, &pool, &a.out)?;
    write_timings(a.out.join("timings.csv"), &report.timings)?;
    write_report(a.out.join("report.csv"), &report)?;
    Ok(report.summary())
}

fn finish_single_phase(out: &Path, r: &mut RunReport, p: &CellField<f64>) -> Result<()> {
    write_field_dump(out.join("pressure.mrcm"), p)?;
    r.metric("cells", p.grid().cell_count() as f64);
    Ok(())
}

fn fine(s: &Scenario, r: &mut RunReport) -> Result<FineSolution<f64>> {
    let sol = solve_fine(&s.k, &s.bc, &s.f, s.fine_solver, s.fine_cap)?;
    r.time("fine", "solve", sol.seconds);
    if let Some(k) = &sol.krylov {
        r.metric("fine_iterations", k.iterations as f64);
        r.metric("fine_relative_residual", k.relative_residual);
    }
    Ok(sol)
}

fn multiscale(
    s: &Scenario,
    pool: &WorkerPool,
    postprocess: bool,
    r: &mut RunReport,
) -> Result<(MultiscaleSolution<f64>, Option<ConservativeFlux<f64>>)> {
    let t = Instant::now();
    let dd = DomainDecomposition::new(s.grid(), s.mrcm.counts)?;
    let space = InterfaceSpace::new(&dd, s.mrcm.coarsening)?;
    let robin = compute_robin_params(&dd, &s.k, s.mrcm.alpha)?;
    let problem = MrcmProblem::new(&s.k, &s.bc, &s.f, &dd, &space, &robin)?;
    r.time("mrcm", "setup", t.elapsed().as_secs_f64());
    let msol = solve_mrcm(&problem, pool)?;
    r.add_mrcm_timings(&msol.timings);
    r.metric("interface_unknowns", msol.n_basis as f64);
    r.metric("local_solves", msol.local_solves as f64);
    r.metric("interface_residual", msol.interface_residual);
    let post = if postprocess {
        let t = Instant::now();
        let p = conservative_reconstruction(&msol, &problem, pool)?;
        r.time("mrcm", "postprocess", t.elapsed().as_secs_f64());
        r.metric("postprocess_max_residual", p.max_residual);
        r.metric("postprocess_scale", p.scale);
        Some(p)
    } else {
        None
    };
    Ok((msol, post))
}

fn two_phase(s: &Scenario, driver: Option<Driver>, pool: &WorkerPool, out: &Path) -> Result<RunReport> {
    let Some(wells) = &s.wells else {
        return Err(Error::Validation(vec!["two-phase runs need wells".into()]));
    };
    let multiscale = driver.map_or(s.multiscale, |d| matches!(d, Driver::Mrcm));
    let problem = TwoPhaseProblem { k: &s.k, bc: &s.bc, f: &s.f, wells, props: s.props };
    let initial = SaturationField::constant(*s.grid(), 0.0)?;
    let o = run_impes(&problem, &s.impes_config(multiscale), initial, pool)?;
    let mut r = RunReport::default();
    r.time("darcy", if multiscale { "mrcm" } else { "fine" }, o.darcy_seconds);
    r.time("transport", "update", o.transport_seconds);
    r.metric("pressure_steps", o.pressure_steps as f64);
    r.metric("transport_steps", o.transport_steps as f64);
    r.metric("t_pvi", o.t_pvi);
    if let Some(last) = o.record.samples.last() {
        r.metric("final_oil_fraction", last.oil_fraction);
    }
    write_production_curves(out.join("curves.csv"), &o.record)?;
    write_field_dump(out.join("saturation.mrcm"), o.saturation.field())?;
    write_field_dump(out.join("pressure.mrcm"), &o.pressure)?;
    Ok(r)
}

fn dims3(v: &[usize]) -> [usize; 3] {
    [v[0], v[1], v[2]]
}

fn gen_perm(a: GenPerm) -> Result<String> {
    let dims = dims3(&a.dims);
    let extents = a.extents.as_deref().map_or(REFERENCE_EXTENTS, |e| [e[0], e[1], e[2]]);
    let grid = StructuredGrid::new(dims, extents)?;
    let mut k = PermeabilityField::generate_channel_field(a.seed, grid, a.contrast)?;
    if a.theta != 1.0 {
        k = k.apply_contrast_exponent(a.theta)?;
    }
    export_spe10(&k, &a.out)?;
    if let Some(d) = &a.dump {
        let log = CellField::new(grid, k.component(0).iter().map(|v| v.log10()).collect())?;
        write_field_dump(d, &log)?;
    }
    Ok(format!("wrote {} cells, contrast {:.3e}, to {}\n", grid.cell_count(), k.contrast(), a.out.display()))
}

fn bench(a: Bench, pool: WorkerPool) -> Result<String> {
    let dims = dims3(&a.dims);
    let grid = StructuredGrid::new(dims, REFERENCE_EXTENTS)?;
    let k = PermeabilityField::generate_channel_field(a.seed, grid, a.contrast)?;
    let bc = crate::mrcm::linear_drive(dims, 0, 1.0, 0.0);
    let f = CellField::zeros(grid);
    std::fs::create_dir_all(&a.out)?;
    let all = !(a.sweep_subdomains || a.factor_solve || a.fine_solvers);
    let mut r = RunReport::default();
    let mut text = String::new();
    if all || a.sweep_subdomains {
        let counts: Vec<[usize; 3]> = [[1, 1, 1], [2, 2, 1], [2, 2, 2], [4, 4, 2], [4, 4, 4], [8, 8, 4]]
            .into_iter()
            .filter(|c| (0..3).all(|i| dims[i] % c[i] == 0 && dims[i] / c[i] >= 2))
            .collect();
        let rows = sweep_subdomains(&k, &bc, &f, &counts, a.reps, &pool)?;
        text.push_str("subdomains  cells/sub  N_gamma  mbf_s      interface_s  total_s\n");
        for row in &rows {
            text.push_str(&format!(
                "{:<11} {:<10} {:<8} {:<10.4e} {:<12.4e} {:.4e}\n",
                format!("{}x{}x{}", row.counts[0], row.counts[1], row.counts[2]),
                row.sub_cells,
                row.n_basis,
                row.mbf_seconds,
                row.interface_seconds,
                row.total_seconds
            ));
            r.timings.extend(row.timing_rows());
        }
    }
    if all || a.factor_solve {
        let row = factor_vs_solve(&k, 8, a.reps, a.seed)?;
        r.time("factor_solve", "factor", row.factor_seconds);
        r.time("factor_solve", "solve_per_rhs", row.solve_seconds_per_rhs);
        r.metric("factor_solve_unknowns", row.unknowns as f64);
        r.metric("solve_over_factor", row.ratio());
    }
    if all || a.fine_solvers {
        for row in fine_solver_comparison(&k, &bc, &f, DEFAULT_FINE_CAP, a.reps)? {
            r.time("fine", &row.name, row.seconds);
            if let Some(it) = row.iterations {
                r.metric(&format!("{}_iterations", row.name), it as f64);
            }
        }
    }
    write_timings(a.out.join("bench_timings.csv"), &r.timings)?;
    write_report(a.out.join("bench_report.csv"), &r)?;
    text.push_str(&r.summary());
    Ok(text)
}
