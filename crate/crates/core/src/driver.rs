//! Scenario execution: uncontrolled baseline, optimization, artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forward::total_mass;
use crate::ocp::random_control;
use crate::optimizer::{minimize, project_box, OptimizeReport, Termination};
use crate::output::{convergence_csv, export_fields, mass_csv, write_text};
use crate::scenario::{Scenario, Setup};
use crate::series::{ControlTrajectory, NodalSeries, StateTrajectory};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Amplitude of the seeded random initial control.
pub const SEEDED_CONTROL_AMPLITUDE: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub setup: Setup,
    pub uncontrolled: StateTrajectory,
    pub cost_zero: f64,
    pub report: OptimizeReport,
}

impl RunOutcome {
    pub fn controlled(&self) -> &StateTrajectory {
        &self.report.last.state
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.setup.grid.steps()).map(|l| self.setup.grid.time(l)).collect()
    }

    pub fn mass_series(&self, field: &NodalSeries) -> Result<Vec<f64>> {
        field.iter_rows().map(|r| total_mass(r, &self.setup.ops.mass)).collect()
    }
}

pub fn initial_control(scenario: &Scenario, steps: usize, n: usize) -> ControlTrajectory {
    let c = match scenario.seed {
        Some(seed) => random_control(steps, n, SEEDED_CONTROL_AMPLITUDE, &mut ChaCha8Rng::seed_from_u64(seed)),
        None => ControlTrajectory::zeros(steps, n),
    };
    project_box(&c, &scenario.optimizer)
}

/// Optimizes the scenario and computes the zero-control baseline.
pub fn solve_scenario(scenario: &Scenario) -> Result<RunOutcome> {
    let setup = scenario.build()?;
    let (uncontrolled, cost_zero, report) = {
        let problem = setup.problem(scenario.weights)?;
        let zero = problem.zero_control();
        let uncontrolled = problem.solve(&zero)?;
        let cost_zero = problem.cost_of(&uncontrolled, &zero)?;
        let ctrl0 = initial_control(scenario, setup.grid.steps(), setup.mesh.n_nodes());
        let report = minimize(&problem, &ctrl0, &scenario.optimizer)?;
        (uncontrolled, cost_zero, report)
    };
    Ok(RunOutcome {
        setup,
        uncontrolled,
        cost_zero,
        report,
    })
}

/// Writes CSVs, snapshots and the resolved-config manifest into `out_dir`.
pub fn write_artifacts(scenario: &Scenario, outcome: &RunOutcome, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::new();
    let mut emit = |name: String, text: String| -> Result<()> {
        let path = out_dir.join(name);
        write_text(&path, &text)?;
        files.push(path);
        Ok(())
    };

    let ctl = outcome.controlled();
    emit(
        "mass_timeseries.csv".into(),
        mass_csv(
            &outcome.times(),
            &outcome.mass_series(&ctl.s)?,
            &outcome.mass_series(&outcome.uncontrolled.s)?,
            &outcome.mass_series(&ctl.q)?,
        )?,
    )?;
    emit("convergence.csv".into(), convergence_csv(&outcome.report.history))?;
    emit(
        "manifest.toml".into(),
        format!("# swarm-ocp {VERSION}\n{}", scenario.to_toml()?),
    )?;

    let grid = outcome.setup.grid;
    let ctrl = &outcome.report.control;
    let mut levels: Vec<usize> = scenario.output.snapshot_times.iter().map(|&t| grid.nearest_level(t)).collect();
    levels.dedup();
    for level in levels {
        // Controls live on steps; level L shows the control of the step ending there.
        let row = level.saturating_sub(1);
        let speed: Vec<f64> = ctrl
            .ux
            .row(row)
            .iter()
            .zip(ctrl.uy.row(row))
            .map(|(x, y)| x.hypot(*y))
            .collect();
        let fields = [
            ("q", ctl.q.row(level)),
            ("S", ctl.s.row(level)),
            ("S_uncontrolled", outcome.uncontrolled.s.row(level)),
            ("k", ctrl.k.row(row)),
            ("u_mag", &speed[..]),
        ];
        let path = out_dir.join(format!("snapshot_{level:04}.vtk"));
        let title = format!("{} t={}", scenario.name, grid.time(level));
        export_fields(&fields, &title, &outcome.setup.mesh, &path)?;
        files.push(path);
    }
    Ok(files)
}

pub fn termination_label(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxIters => "max_iters",
        Termination::LineSearchFailure => "line_search_failure",
    }
}
