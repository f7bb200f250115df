//! Discrete adjoint of the implicit-Euler state recursion.
//!
//! The backward recursion uses the transposes of the forward step matrices,
//! so the resulting gradient is exact for the discrete cost. Multipliers are
//! stored divided by `Δt`; for steps `n = N … 1` (row `n − 1`):
//!
//! ```text
//! K_Sᵀ λ_S[n−1] = α M (Sⁿ − z) + M λ_S[n] / Δt            on free nodes
//! K_q(uⁿ)ᵀ λ_q[n−1] = M λ_q[n] / Δt + C(kⁿ) λ_S[n−1]
//! ```
//!
//! Row `N` holds the terminal data `λ_q = 0`, `λ_S = α_T M (S^N − z)`
//! restricted to free nodes. That row already carries the mass matrix, so it
//! enters the last backward step as `λ_S[N] / Δt` without another `M`.

use crate::error::{check_len, Result};
use crate::forward::{QFactorCache, Stepper};
use crate::ocp::CostWeights;
use crate::series::{ControlTrajectory, NodalSeries, StateTrajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    pub lambda_q: NodalSeries,
    pub lambda_s: NodalSeries,
}

/// Runs the backward recursion, field multiplier first at every step.
pub fn solve_adjoint(
    st: &Stepper<'_>,
    ctrl: &ControlTrajectory,
    state: &StateTrajectory,
    target: &[f64],
    weights: &CostWeights,
) -> Result<AdjointTrajectory> {
    let ops = st.ops;
    let n = ops.n_nodes();
    let steps = st.steps();
    let dt = st.dt;
    ctrl.check(steps, n)?;
    check_len("state trajectory levels", steps + 1, state.levels())?;
    check_len("state trajectory nodes", n, state.s.n_nodes())?;
    check_len("target field", n, target.len())?;
    let d = &ops.dirichlet;

    let mut lq = NodalSeries::zeros(steps + 1, n);
    let mut ls = NodalSeries::zeros(steps + 1, n);

    let misfit = |level: usize| -> Result<Vec<f64>> {
        let e: Vec<f64> = state.s.row(level).iter().zip(target).map(|(s, z)| s - z).collect();
        ops.mass.mul_vec(&e)
    };

    let mut terminal = misfit(steps)?;
    terminal.iter_mut().for_each(|v| *v *= weights.alpha_t);
    d.zero_constrained(&mut terminal);
    ls.set_row(steps, &terminal);

    let mut cache = QFactorCache::new(true);
    for step in (1..=steps).rev() {
        let m = step - 1;

        let mut rhs = misfit(step)?;
        rhs.iter_mut().for_each(|v| *v *= weights.alpha);
        let carry = if step == steps {
            ls.row(steps).to_vec()
        } else {
            ops.mass.mul_vec(ls.row(step))?
        };
        for (r, c) in rhs.iter_mut().zip(&carry) {
            *r += c / dt;
        }
        let free_sol = st
            .solve_s_free_transpose(&d.restrict(&rhs))
            .map_err(|e| e.at_step(step))?;
        let ls_now = d.extend(&free_sol, &vec![0.0; n]);

        let mut rhs_q = st.mass_over_dt(lq.row(step))?;
        let coupling = ops.reaction.contract(ctrl.k.row(m))?.mul_vec(&ls_now)?;
        for (r, c) in rhs_q.iter_mut().zip(&coupling) {
            *r += c;
        }
        let lq_now = cache
            .get(st, ctrl.ux.row(m), ctrl.uy.row(m))
            .and_then(|lu| lu.solve(&rhs_q))
            .map_err(|e| e.at_step(step))?;

        ls.set_row(m, &ls_now);
        lq.set_row(m, &lq_now);
    }
    Ok(AdjointTrajectory {
        lambda_q: lq,
        lambda_s: ls,
    })
}
