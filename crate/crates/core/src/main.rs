use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use swarm_ocp::driver::{solve_scenario, termination_label, write_artifacts};
use swarm_ocp::ocp::{adjoint_inner_product_test, fd_gradient_check, random_control};
use swarm_ocp::output::export_fields;
use swarm_ocp::scenario::{load_scenario, Preset};
use swarm_ocp::Error;

/// Gradient checks above this relative error exit with [`EXIT_CHECK_FAILED`].
const GRADIENT_TOL: f64 = 1e-6;
const EXIT_IO: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "swarm-ocp", version, about = "Swarm-actuated control of an advection-diffusion field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one or more scenarios and write CSV/VTK artifacts.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        preset: Option<Preset>,
        /// Random initial control from this seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Scenarios run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Compare the adjoint gradient with central differences.
    CheckGradient {
        config: PathBuf,
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long, default_value_t = 20)]
        directions: usize,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the tagged mesh with Dirichlet data as legacy VTK.
    ExportMesh {
        config: PathBuf,
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long, default_value = "mesh.vtk")]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::SolverFailure { .. } => EXIT_SOLVER,
        _ => EXIT_VALIDATION,
    }
}

fn run_one(path: &Path, out: &Path, preset: Option<Preset>, seed: Option<u64>, many: bool) -> Result<(), Error> {
    let mut scenario = load_scenario(path, preset)?;
    if seed.is_some() {
        scenario.seed = seed;
    }
    let dir = if many { out.join(&scenario.name) } else { out.to_path_buf() };
    let label = |e: Error| match e {
        Error::SolverFailure { step, reason } => Error::SolverFailure {
            step,
            reason: format!("{reason} (scenario `{}`)", scenario.name),
        },
        e => e,
    };
    let outcome = solve_scenario(&scenario).map_err(label)?;
    if let Some(w) = &outcome.setup.warning {
        eprintln!("warning: {w}");
    }
    let files = write_artifacts(&scenario, &outcome, &dir)?;
    let mass = |s: &[f64]| swarm_ocp::forward::total_mass(s, &outcome.setup.ops.mass);
    println!(
        "{}: J(0) = {:.6e}, J = {:.6e} after {} iterations ({}), m_S(T) controlled {:.6e} / uncontrolled {:.6e}, {} files in {}",
        scenario.name,
        outcome.cost_zero,
        outcome.report.final_cost(),
        outcome.report.history.len() - 1,
        termination_label(outcome.report.termination),
        mass(outcome.controlled().final_s())?,
        mass(outcome.uncontrolled.final_s())?,
        files.len(),
        dir.display()
    );
    Ok(())
}

/// Returns whether the gradient error is within tolerance.
fn check_gradient(config: &Path, preset: Option<Preset>, directions: usize, eps: f64, seed: u64) -> Result<bool, Error> {
    let scenario = load_scenario(config, preset)?;
    let setup = scenario.build()?;
    let problem = setup.problem(scenario.weights)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctrl = random_control(setup.grid.steps(), setup.mesh.n_nodes(), 1.0, &mut rng);
    let fd = fd_gradient_check(&problem, &ctrl, directions, eps, seed)?;
    let dual = adjoint_inner_product_test(&problem, &ctrl, 10, seed)?;
    println!("max relative gradient error {:.3e} over {directions} directions", fd.max_rel_error);
    println!("max relative duality residual {dual:.3e}");
    Ok(fd.max_rel_error <= GRADIENT_TOL)
}

fn export_mesh(config: &Path, preset: Option<Preset>, out: &Path) -> Result<(), Error> {
    let scenario = load_scenario(config, preset)?;
    let setup = scenario.build()?;
    let d = &setup.ops.dirichlet;
    let constrained: Vec<f64> = (0..setup.mesh.n_nodes())
        .map(|i| if d.is_constrained(i) { 1.0 } else { 0.0 })
        .collect();
    let speed: Vec<f64> = setup.velocity.iter().map(|v| v[0].hypot(v[1])).collect();
    export_fields(
        &[
            ("constrained", &constrained),
            ("dirichlet_value", d.prescribed()),
            ("flow_speed", &speed),
        ],
        &scenario.name,
        &setup.mesh,
        out,
    )?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(configs: &[PathBuf], out: &Path, preset: Option<Preset>, seed: Option<u64>, jobs: usize) -> Result<(), Error> {
    let many = configs.len() > 1;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidState(e.to_string()))?;
    pool.install(|| {
        configs
            .par_iter()
            .map(|c| run_one(c, out, preset, seed, many))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            configs,
            out,
            preset,
            seed,
            jobs,
        } => run(&configs, &out, preset, seed, jobs),
        Command::CheckGradient {
            config,
            preset,
            directions,
            eps,
            seed,
        } => match check_gradient(&config, preset, directions, eps, seed) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("gradient check failed (tolerance {GRADIENT_TOL:e})");
                return ExitCode::from(EXIT_CHECK_FAILED);
            }
            Err(e) => Err(e),
        },
        Command::ExportMesh { config, preset, out } => export_mesh(&config, preset, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
