//! Discrete cost, reduced gradient and derivative checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjoint::{solve_adjoint, AdjointTrajectory};
use crate::error::{check_len, Error, Result};
use crate::fem::AssembledOperators;
use crate::forward::{solve_forward_with, solve_linearized_with, Stepper};
use crate::series::{ControlTrajectory, StateTrajectory, TimeGrid};


#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    pub alpha_t: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CostWeights {
    pub fn new(alpha_t: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let w = Self {
            alpha_t,
            alpha,
            beta,
            gamma,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("weights.alpha_t", self.alpha_t),
            ("weights.alpha", self.alpha),
            ("weights.beta", self.beta),
            ("weights.gamma", self.gamma),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(key, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.alpha_t == 0.0 && self.alpha == 0.0 && self.beta == 0.0 && self.gamma == 0.0 {
            return Err(Error::validation("weights", "at least one weight must be positive"));
        }
        Ok(())
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            alpha_t: 10.0,
            alpha: 1.0,
            beta: 0.1,
            gamma: 0.1,
        }
    }
}

/// Gradient with respect to the raw nodal control coefficients; same layout
/// as the controls.
pub type GradientTrajectory = ControlTrajectory;

/// `J = α_T/2 |S^N − z|²_M + Δt Σ_{n≥1} [α/2 |Sⁿ − z|²_M + β/2 |uⁿ|²_M + γ/2 |kⁿ|²_M]`.
pub fn evaluate_cost(
    state: &StateTrajectory,
    ctrl: &ControlTrajectory,
    target: &[f64],
    w: &CostWeights,
    ops: &AssembledOperators,
    grid: &TimeGrid,
) -> Result<f64> {
    let n = ops.n_nodes();
    let steps = grid.steps();
    ctrl.check(steps, n)?;
    check_len("state trajectory levels", steps + 1, state.levels())?;
    check_len("target field", n, target.len())?;
    let m = &ops.mass;
    let misfit = |level: usize| -> Result<f64> {
        let e: Vec<f64> = state.s.row(level).iter().zip(target).map(|(s, z)| s - z).collect();
        m.bilinear(&e, &e)
    };

    let mut running = 0.0;
    for step in 1..=steps {
        let r = step - 1;
        let mut term = 0.0;
        if w.alpha != 0.0 {
            term += 0.5 * w.alpha * misfit(step)?;
        }
        if w.beta != 0.0 {
            let ux = ctrl.ux.row(r);
            let uy = ctrl.uy.row(r);
            term += 0.5 * w.beta * (m.bilinear(ux, ux)? + m.bilinear(uy, uy)?);
        }
        if w.gamma != 0.0 {
            let k = ctrl.k.row(r);
            term += 0.5 * w.gamma * m.bilinear(k, k)?;
        }
        running += term;
    }
    let terminal = if w.alpha_t != 0.0 {
        0.5 * w.alpha_t * misfit(steps)?
    } else {
        0.0
    };
    Ok(terminal + grid.dt() * running)
}

fn gradient_parts(
    st: &Stepper<'_>,
    state: &StateTrajectory,
    adjoint: &AdjointTrajectory,
    ctrl: &ControlTrajectory,
    w: &CostWeights,
    tikhonov: bool,
) -> Result<GradientTrajectory> {
    let ops = st.ops;
    let n = ops.n_nodes();
    let steps = st.steps();
    let dt = st.dt;
    ctrl.check(steps, n)?;
    check_len("state trajectory levels", steps + 1, state.levels())?;
    check_len("adjoint trajectory levels", steps + 1, adjoint.lambda_q.rows())?;

    let mut g = ControlTrajectory::zeros(steps, n);
    for r in 0..steps {
        let q = state.q.row(r + 1);
        let lq = adjoint.lambda_q.row(r);
        let ls = adjoint.lambda_s.row(r);

        let mut gx = ops.transport_x.bilinear(q, lq)?;
        let mut gy = ops.transport_y.bilinear(q, lq)?;
        let mut gk = ops.reaction.bilinear(ls, q)?;
        if tikhonov {
            let mx = ops.mass.mul_vec(ctrl.ux.row(r))?;
            let my = ops.mass.mul_vec(ctrl.uy.row(r))?;
            let mk = ops.mass.mul_vec(ctrl.k.row(r))?;
            for i in 0..n {
                gx[i] += w.beta * mx[i];
                gy[i] += w.beta * my[i];
                gk[i] += w.gamma * mk[i];
            }
        }
        for (dst, src) in [(&mut g.ux, gx), (&mut g.uy, gy), (&mut g.k, gk)] {
            let row = dst.row_mut(r);
            for i in 0..n {
                row[i] = dt * src[i];
            }
        }
    }
    Ok(g)
}

/// `g_u = Δt (β M u + qᵀ B λ_q)`, `g_k = Δt (γ M k + qᵀ C λ_S)` per step,
/// pairing the controls of step `n` with `qⁿ` and the multipliers of row
/// `n − 1`.
pub fn reduced_gradient(
    st: &Stepper<'_>,
    state: &StateTrajectory,
    adjoint: &AdjointTrajectory,
    ctrl: &ControlTrajectory,
    w: &CostWeights,
) -> Result<GradientTrajectory> {
    gradient_parts(st, state, adjoint, ctrl, w, true)
}

/// One cost/gradient evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub cost: f64,
    pub gradient: GradientTrajectory,
    pub state: StateTrajectory,
}

/// A fully specified discrete control problem: operators, time grid,
/// initial data, target and weights.
pub struct OcpProblem<'a> {
    stepper: Stepper<'a>,
    grid: TimeGrid,
    q0: Vec<f64>,
    s0: Vec<f64>,
    target: Vec<f64>,
    weights: CostWeights,
}

impl<'a> OcpProblem<'a> {
    pub fn new(
        ops: &'a AssembledOperators,
        grid: TimeGrid,
        q0: Vec<f64>,
        s0: Vec<f64>,
        target: Vec<f64>,
        weights: CostWeights,
    ) -> Result<Self> {
        let n = ops.n_nodes();
        check_len("initial density", n, q0.len())?;
        check_len("initial field", n, s0.len())?;
        check_len("target field", n, target.len())?;
        weights.validate()?;
        Ok(Self {
            stepper: Stepper::new(ops, &grid)?,
            grid,
            q0,
            s0,
            target,
            weights,
        })
    }

    pub fn ops(&self) -> &AssembledOperators {
        self.stepper.ops
    }

    pub fn stepper(&self) -> &Stepper<'a> {
        &self.stepper
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn weights(&self) -> &CostWeights {
        &self.weights
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn initial(&self) -> (&[f64], &[f64]) {
        (&self.q0, &self.s0)
    }

    pub fn n_nodes(&self) -> usize {
        self.stepper.ops.n_nodes()
    }

    pub fn zero_control(&self) -> ControlTrajectory {
        ControlTrajectory::zeros(self.grid.steps(), self.n_nodes())
    }

    /// Same problem with different weights (operators and factorizations
    /// are rebuilt, which is cheap compared with a trajectory solve).
    pub fn with_weights(&self, weights: CostWeights) -> Result<Self> {
        Self::new(
            self.stepper.ops,
            self.grid,
            self.q0.clone(),
            self.s0.clone(),
            self.target.clone(),
            weights,
        )
    }

    pub fn with_target(&self, target: Vec<f64>) -> Result<Self> {
        Self::new(
            self.stepper.ops,
            self.grid,
            self.q0.clone(),
            self.s0.clone(),
            target,
            self.weights,
        )
    }

    pub fn solve(&self, ctrl: &ControlTrajectory) -> Result<StateTrajectory> {
        solve_forward_with(&self.stepper, ctrl, &self.q0, &self.s0)
    }

    pub fn cost_of(&self, state: &StateTrajectory, ctrl: &ControlTrajectory) -> Result<f64> {
        evaluate_cost(state, ctrl, &self.target, &self.weights, self.ops(), &self.grid)
    }

    pub fn cost(&self, ctrl: &ControlTrajectory) -> Result<f64> {
        let state = self.solve(ctrl)?;
        self.cost_of(&state, ctrl)
    }

    pub fn adjoint(&self, ctrl: &ControlTrajectory, state: &StateTrajectory) -> Result<AdjointTrajectory> {
        solve_adjoint(&self.stepper, ctrl, state, &self.target, &self.weights)
    }

    /// Forward solve, adjoint solve and reduced gradient.
    pub fn evaluate(&self, ctrl: &ControlTrajectory) -> Result<Evaluation> {
        let state = self.solve(ctrl)?;
        let cost = self.cost_of(&state, ctrl)?;
        let adjoint = self.adjoint(ctrl, &state)?;
        let gradient = reduced_gradient(&self.stepper, &state, &adjoint, ctrl, &self.weights)?;
        Ok(Evaluation {
            cost,
            gradient,
            state,
        })
    }

    /// The state-dependent (non-Tikhonov) part of the gradient.
    pub fn adjoint_gradient(&self, ctrl: &ControlTrajectory, state: &StateTrajectory) -> Result<GradientTrajectory> {
        let adjoint = self.adjoint(ctrl, state)?;
        gradient_parts(&self.stepper, state, &adjoint, ctrl, &self.weights, false)
    }
}

/// Random control field with entries uniform in `[-amplitude, amplitude]`.
pub fn random_control(steps: usize, n: usize, amplitude: f64, rng: &mut impl Rng) -> ControlTrajectory {
    let mut c = ControlTrajectory::zeros(steps, n);
    if amplitude > 0.0 {
        for comp in c.components_mut() {
            comp.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = rng.gen_range(-amplitude..amplitude));
        }
    }
    c
}

fn random_unit_direction(steps: usize, n: usize, rng: &mut impl Rng) -> ControlTrajectory {
    let d = random_control(steps, n, 1.0, rng);
    let norm = d.norm();
    d.scaled(1.0 / norm)
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Debug, Clone)]
pub struct FdCheck {
    /// Worst relative mismatch between `⟨∇J, d⟩` and the central difference.
    pub max_rel_error: f64,
    /// `(adjoint directional derivative, finite difference)` per direction.
    pub pairs: Vec<(f64, f64)>,
}

/// Compares the adjoint gradient against central differences
/// `(J(c + εd) − J(c − εd)) / 2ε` along random unit directions.
pub fn fd_gradient_check(
    problem: &OcpProblem<'_>,
    ctrl: &ControlTrajectory,
    directions: usize,
    epsilon: f64,
    seed: u64,
) -> Result<FdCheck> {
    if directions == 0 {
        return Err(Error::invalid("at least one probe direction is required"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("probe step must be positive, got {epsilon}")));
    }
    let eval = problem.evaluate(ctrl)?;
    let steps = problem.grid().steps();
    let n = problem.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<ControlTrajectory> = (0..directions)
        .map(|_| random_unit_direction(steps, n, &mut rng))
        .collect();

    let pairs = dirs
        .par_iter()
        .map(|d| -> Result<(f64, f64)> {
            let mut plus = ctrl.clone();
            plus.axpy(epsilon, d)?;
            let mut minus = ctrl.clone();
            minus.axpy(-epsilon, d)?;
            let fd = (problem.cost(&plus)? - problem.cost(&minus)?) / (2.0 * epsilon);
            Ok((eval.gradient.dot(d), fd))
        })
        .collect::<Result<Vec<_>>>()?;

    let max_rel_error = pairs
        .iter()
        .map(|&(a, b)| relative_error(a, b))
        .fold(0.0, f64::max);
    Ok(FdCheck {
        max_rel_error,
        pairs,
    })
}

/// Duality test of the linearized forward map against the adjoint map: for
/// random perturbations and random targets, compares the linearized cost
/// change `α_T ⟨S^N − z, z_S^N⟩_M + Δt α Σ ⟨Sⁿ − z, z_Sⁿ⟩_M` with the adjoint
/// pairing `⟨d, ∇J − Tikhonov part⟩`. Returns the worst relative mismatch.
pub fn adjoint_inner_product_test(
    problem: &OcpProblem<'_>,
    ctrl: &ControlTrajectory,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let steps = problem.grid().steps();
    let n = problem.n_nodes();
    let dt = problem.grid().dt();
    let w = problem.weights();
    let mass = &problem.ops().mass;
    let base = problem.solve(ctrl)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let dir = random_control(steps, n, 1.0, &mut rng);
        let target: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = problem.with_target(target)?;
        let lin = solve_linearized_with(p.stepper(), ctrl, &base, &dir)?;

        let misfit_pair = |level: usize| -> Result<f64> {
            let e: Vec<f64> = base.s.row(level).iter().zip(p.target()).map(|(s, z)| s - z).collect();
            mass.bilinear(&e, lin.s.row(level))
        };
        let mut primal = w.alpha_t * misfit_pair(steps)?;
        for level in 1..=steps {
            primal += dt * w.alpha * misfit_pair(level)?;
        }
        let dual = dir.dot(&p.adjoint_gradient(ctrl, &base)?);
        worst = worst.max(relative_error(primal, dual));
    }
    Ok(worst)
}

/// Directional derivative check of the control-to-state map: returns
/// `(ε, ‖(Ξ(c + εd) − Ξ(c))/ε − Ξ'(c)d‖)` for each probe step.
pub fn linearization_errors(
    problem: &OcpProblem<'_>,
    ctrl: &ControlTrajectory,
    dir: &ControlTrajectory,
    epsilons: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let base = problem.solve(ctrl)?;
    let lin = solve_linearized_with(problem.stepper(), ctrl, &base, dir)?;
    epsilons
        .iter()
        .map(|&eps| {
            let mut c = ctrl.clone();
            c.axpy(eps, dir)?;
            let pert = problem.solve(&c)?;
            let mut sq = 0.0;
            for (series, (b, z)) in [(&pert.q, (&base.q, &lin.q)), (&pert.s, (&base.s, &lin.s))] {
                for ((p, b), z) in series.as_slice().iter().zip(b.as_slice()).zip(z.as_slice()) {
                    let d = (p - b) / eps - z;
                    sq += d * d;
                }
            }
            Ok((eps, sq.sqrt()))
        })
        .collect()
}

/// Slopes `Δ log e / Δ log ε` between consecutive probe steps.
pub fn observed_orders(errors: &[(f64, f64)]) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect()
}
