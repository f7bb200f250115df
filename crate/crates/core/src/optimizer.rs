//! Projected gradient descent with Armijo backtracking and optional box
//! bounds on the controls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ocp::{Evaluation, OcpProblem};
use crate::series::ControlTrajectory;

/// Shrinks attempted before a line search is declared failed.
pub const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeOptions {
    pub max_iters: usize,
    /// Stop once the projected-gradient norm drops below this fraction of
    /// its initial value.
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    /// Per-component bound `|ux|, |uy| <= box_u`.
    pub box_u: Option<f64>,
    /// Bound `|k| <= box_k`.
    pub box_k: Option<f64>,
    /// Scale the gradient by the inverse lumped mass (times `1/Δt`).
    pub precondition: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-6,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            box_u: None,
            box_k: None,
            precondition: false,
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::validation("optimizer.armijo_c", "must lie in (0, 1)"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::validation("optimizer.backtrack_factor", "must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return Err(Error::validation("optimizer.initial_step", "must be positive"));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::validation("optimizer.grad_tol", "must be >= 0"));
        }
        for (key, b) in [("optimizer.box_u", self.box_u), ("optimizer.box_k", self.box_k)] {
            if let Some(b) = b {
                if !(b > 0.0) {
                    return Err(Error::validation(key, format!("bound must be positive, got {b}")));
                }
            }
        }
        Ok(())
    }
}

/// Componentwise clamp to the configured boxes; identity without bounds.
pub fn project_box(ctrl: &ControlTrajectory, opts: &OptimizeOptions) -> ControlTrajectory {
    let mut out = ctrl.clone();
    let bounds = [opts.box_u, opts.box_u, opts.box_k];
    for (comp, bound) in out.components_mut().into_iter().zip(bounds) {
        if let Some(b) = bound {
            comp.as_mut_slice().iter_mut().for_each(|v| *v = v.clamp(-b, b));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    LineSearchFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    /// Accepted step length (zero for the initial point).
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub history: Vec<IterRecord>,
    pub control: ControlTrajectory,
    pub termination: Termination,
    /// Cost, gradient and state at the final control.
    pub last: Evaluation,
}

impl OptimizeReport {
    pub fn final_cost(&self) -> f64 {
        self.last.cost
    }
}

/// Metric weights for the preconditioned search direction.
fn metric(problem: &OcpProblem<'_>, opts: &OptimizeOptions) -> Option<Vec<f64>> {
    opts.precondition.then(|| {
        let dt = problem.grid().dt();
        let lumped = problem.ops().mass.row_sums();
        let steps = problem.grid().steps();
        let mut w = Vec::with_capacity(3 * steps * lumped.len());
        for _ in 0..3 * steps {
            w.extend(lumped.iter().map(|m| m * dt));
        }
        w
    })
}

fn direction(gradient: &ControlTrajectory, metric: Option<&[f64]>) -> Vec<f64> {
    let g = gradient.to_flat();
    match metric {
        Some(w) => g.iter().zip(w).map(|(g, w)| g / w).collect(),
        None => g,
    }
}

fn weighted_sq(v: &[f64], metric: Option<&[f64]>) -> f64 {
    match metric {
        Some(w) => v.iter().zip(w).map(|(x, w)| w * x * x).sum(),
        None => v.iter().map(|x| x * x).sum(),
    }
}

/// Minimizes the discrete cost starting from `ctrl0` (projected first).
pub fn minimize(
    problem: &OcpProblem<'_>,
    ctrl0: &ControlTrajectory,
    opts: &OptimizeOptions,
) -> Result<OptimizeReport> {
    opts.validate()?;
    let steps = problem.grid().steps();
    let n = problem.n_nodes();
    let metric = metric(problem, opts);
    let metric = metric.as_deref();

    let project_flat = |x: &[f64]| -> Result<Vec<f64>> {
        let c = ControlTrajectory::from_flat(steps, n, x)?;
        Ok(project_box(&c, opts).to_flat())
    };
    let pg_norm = |x: &[f64], d: &[f64]| -> Result<f64> {
        let trial: Vec<f64> = x.iter().zip(d).map(|(x, d)| x - d).collect();
        let p = project_flat(&trial)?;
        Ok(p.iter().zip(x).map(|(p, x)| (p - x) * (p - x)).sum::<f64>().sqrt())
    };

    let mut ctrl = project_box(ctrl0, opts);
    let mut eval = problem.evaluate(&ctrl)?;
    let mut x = ctrl.to_flat();
    let mut d = direction(&eval.gradient, metric);
    let pg0 = pg_norm(&x, &d)?;
    let mut history = vec![IterRecord {
        iter: 0,
        cost: eval.cost,
        grad_norm: pg0,
        step: 0.0,
    }];
    if pg0 == 0.0 {
        return Ok(OptimizeReport {
            history,
            control: ctrl,
            termination: Termination::Converged,
            last: eval,
        });
    }

    let tol = opts.grad_tol * pg0;
    let mut step = opts.initial_step;
    let mut termination = Termination::MaxIters;
    for iter in 1..=opts.max_iters {
        let mut s = step;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(x, d)| x - s * d).collect();
            let x_new = project_flat(&trial)?;
            let dx: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let c_new = ControlTrajectory::from_flat(steps, n, &x_new)?;
            // A failed solve at a trial point counts as insufficient decrease.
            if let Ok(e_new) = problem.evaluate(&c_new) {
                let decrease = opts.armijo_c * weighted_sq(&dx, metric) / s;
                if e_new.cost.is_finite() && e_new.cost <= eval.cost - decrease {
                    accepted = Some((s, x_new, dx, c_new, e_new));
                    break;
                }
            }
            s *= opts.backtrack_factor;
        }
        let Some((s, x_new, dx, c_new, e_new)) = accepted else {
            termination = Termination::LineSearchFailure;
            break;
        };

        let d_new = direction(&e_new.gradient, metric);
        // Barzilai-Borwein trial length for the next iteration.
        let dd: Vec<f64> = d_new.iter().zip(&d).map(|(a, b)| a - b).collect();
        let num = weighted_sq(&dx, metric);
        let den: f64 = match metric {
            Some(w) => dx.iter().zip(&dd).zip(w).map(|((a, b), w)| a * b * w).sum(),
            None => dx.iter().zip(&dd).map(|(a, b)| a * b).sum(),
        };
        step = if den > 0.0 && num > 0.0 {
            (num / den).clamp(1e-12 * opts.initial_step, 1e12 * opts.initial_step)
        } else {
            2.0 * s
        };

        x = x_new;
        d = d_new;
        ctrl = c_new;
        eval = e_new;
        let pg = pg_norm(&x, &d)?;
        history.push(IterRecord {
            iter,
            cost: eval.cost,
            grad_norm: pg,
            step: s,
        });
        if pg <= tol {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(OptimizeReport {
        history,
        control: ctrl,
        termination,
        last: eval,
    })
}
