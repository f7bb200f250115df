//! Implicit-Euler time stepping of the one-way coupled density/field system
//! and of its linearization.
//!
//! Per step `n → n+1`, with controls taken at `t_{n+1}`:
//!
//! ```text
//! (M/Δt + A_q − B_Fᵀ − (Bx ux)ᵀ − (By uy)ᵀ) q⁺ = M q / Δt
//! (M/Δt + A_S − B_Fᵀ) S⁺ = M S / Δt + (C k) q⁺        on free nodes
//! ```
//!
//! Constrained field nodes are eliminated; their prescribed values enter the
//! free-node right-hand side.

use crate::error::{check_len, Error, Result};
use crate::fem::AssembledOperators;
use crate::linalg::BandLu;
use crate::series::{ControlTrajectory, NodalSeries, StateTrajectory, TimeGrid};
use crate::sparse::SparseMatrix;

/// Tolerance on the unit-mass precondition of the initial density.
pub const Q0_MASS_TOL: f64 = 1e-10;

/// Step matrices shared by the forward, linearized and adjoint recursions.
pub struct Stepper<'a> {
    pub(crate) ops: &'a AssembledOperators,
    pub(crate) dt: f64,
    steps: usize,
    /// `M/Δt + A_q − B_Fᵀ`, without the control-dependent transport part.
    q_base: SparseMatrix,
    /// Full `M/Δt + A_S − B_Fᵀ`.
    s_full: SparseMatrix,
    /// Free-node block of `s_full`.
    s_lu: BandLu,
    s_lu_t: BandLu,
}

impl<'a> Stepper<'a> {
    pub fn new(ops: &'a AssembledOperators, grid: &TimeGrid) -> Result<Self> {
        let dt = grid.dt();
        let adv_t = ops.advection.transpose();
        let mass_dt = ops.mass.scaled(1.0 / dt);
        let q_base = mass_dt
            .lin_comb(1.0, &ops.stiffness_q, 1.0)?
            .lin_comb(1.0, &adv_t, -1.0)?;
        let s_full = mass_dt
            .lin_comb(1.0, &ops.stiffness_s, 1.0)?
            .lin_comb(1.0, &adv_t, -1.0)?;
        let free = ops.dirichlet.free();
        let s_free = s_full.submatrix(free, free);
        let s_lu = BandLu::factor(&s_free)?;
        let s_lu_t = BandLu::factor(&s_free.transpose())?;
        Ok(Self {
            ops,
            dt,
            steps: grid.steps(),
            q_base,
            s_full,
            s_lu,
            s_lu_t,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// The density step matrix for velocity `(ux, uy)`.
    pub fn q_matrix(&self, ux: &[f64], uy: &[f64]) -> Result<SparseMatrix> {
        let tx = self.ops.transport_x_t.contract(ux)?;
        let ty = self.ops.transport_y_t.contract(uy)?;
        self.q_base.lin_comb(1.0, &tx, -1.0)?.lin_comb(1.0, &ty, -1.0)
    }

    /// The full (unreduced) field step matrix.
    pub fn s_matrix(&self) -> &SparseMatrix {
        &self.s_full
    }

    pub(crate) fn solve_s_free(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.s_lu.solve(rhs)
    }

    pub(crate) fn solve_s_free_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.s_lu_t.solve(rhs)
    }

    pub(crate) fn mass_over_dt(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.ops.mass.mul_vec(v)?;
        r.iter_mut().for_each(|x| *x /= self.dt);
        Ok(r)
    }

    /// One density step: solves for `q⁺` given `q` and the step matrix.
    pub fn q_step(&self, lu: &BandLu, q_prev: &[f64]) -> Result<Vec<f64>> {
        lu.solve(&self.mass_over_dt(q_prev)?)
    }

    /// One field step with source `C(k) q⁺` and Dirichlet data `g` on the
    /// constrained nodes (pass zeros for homogeneous problems).
    pub fn s_step(&self, s_prev: &[f64], source: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let d = &self.ops.dirichlet;
        let mut rhs = self.mass_over_dt(s_prev)?;
        let lift = self.s_full.mul_vec(g)?;
        for i in 0..rhs.len() {
            rhs[i] += source[i] - lift[i];
        }
        let free_sol = self.solve_s_free(&d.restrict(&rhs))?;
        Ok(d.extend(&free_sol, g))
    }
}

/// Factorizes the density step matrix, reusing the previous factorization
/// when the velocity does not change between steps.
pub(crate) struct QFactorCache {
    last: Option<(Vec<f64>, Vec<f64>, BandLu)>,
    transpose: bool,
}

impl QFactorCache {
    pub(crate) fn new(transpose: bool) -> Self {
        Self {
            last: None,
            transpose,
        }
    }

    pub(crate) fn get(&mut self, st: &Stepper<'_>, ux: &[f64], uy: &[f64]) -> Result<&BandLu> {
        let hit = matches!(&self.last, Some((x, y, _)) if x == ux && y == uy);
        if !hit {
            let mut k = st.q_matrix(ux, uy)?;
            if self.transpose {
                k = k.transpose();
            }
            let lu = BandLu::factor(&k)?;
            self.last = Some((ux.to_vec(), uy.to_vec(), lu));
        }
        Ok(&self.last.as_ref().unwrap().2)
    }
}

/// `1ᵀ M v`, the integral of a P1 field.
pub fn total_mass(field: &[f64], mass: &SparseMatrix) -> Result<f64> {
    check_len("total mass", mass.ncols(), field.len())?;
    Ok(mass.col_sums().iter().zip(field).map(|(c, v)| c * v).sum())
}

fn validate_initial(ops: &AssembledOperators, q0: &[f64], s0: &[f64]) -> Result<()> {
    let n = ops.n_nodes();
    check_len("initial density", n, q0.len())?;
    check_len("initial field", n, s0.len())?;
    if q0.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("initial density must be finite and nonnegative"));
    }
    let m = total_mass(q0, &ops.mass)?;
    if (m - 1.0).abs() > Q0_MASS_TOL {
        return Err(Error::invalid(format!(
            "initial density must have unit mass, got {m:.15}"
        )));
    }
    if s0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial field must be finite"));
    }
    let d = &ops.dirichlet;
    let scale = d.prescribed().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mismatch = d.mismatch(s0);
    if mismatch > 1e-12 * scale {
        return Err(Error::invalid(format!(
            "initial field violates the Dirichlet data by {mismatch:.3e}"
        )));
    }
    Ok(())
}

/// Advances `(q, S)` from `(q0, S0)` over the whole grid.
pub fn solve_forward(
    ops: &AssembledOperators,
    ctrl: &ControlTrajectory,
    q0: &[f64],
    s0: &[f64],
    grid: &TimeGrid,
) -> Result<StateTrajectory> {
    let st = Stepper::new(ops, grid)?;
    solve_forward_with(&st, ctrl, q0, s0)
}

pub fn solve_forward_with(
    st: &Stepper<'_>,
    ctrl: &ControlTrajectory,
    q0: &[f64],
    s0: &[f64],
) -> Result<StateTrajectory> {
    let ops = st.ops;
    let n = ops.n_nodes();
    let steps = st.steps();
    ctrl.check(steps, n)?;
    validate_initial(ops, q0, s0)?;

    let g = ops.dirichlet.prescribed();
    let mut q = NodalSeries::zeros(steps + 1, n);
    let mut s = NodalSeries::zeros(steps + 1, n);
    q.set_row(0, q0);
    let mut s_init = s0.to_vec();
    // Pin constrained values exactly.
    for &i in ops.dirichlet.constrained() {
        s_init[i] = g[i];
    }
    s.set_row(0, &s_init);

    let mut cache = QFactorCache::new(false);
    for step in 1..=steps {
        let m = step - 1;
        let q_next = cache
            .get(st, ctrl.ux.row(m), ctrl.uy.row(m))
            .and_then(|lu| st.q_step(lu, q.row(m)))
            .map_err(|e| e.at_step(step))?;
        let source = ops.reaction.contract(ctrl.k.row(m))?.mul_vec(&q_next)?;
        let s_next = st
            .s_step(s.row(m), &source, g)
            .map_err(|e| e.at_step(step))?;
        q.set_row(step, &q_next);
        s.set_row(step, &s_next);
    }
    Ok(StateTrajectory { q, s })
}

/// Sensitivities `(z_q, z_S)` of the state with respect to a control
/// perturbation `dir = (h, l)`, from zero initial data with homogeneous
/// Dirichlet conditions on `z_S`.
pub fn solve_linearized(
    ops: &AssembledOperators,
    ctrl: &ControlTrajectory,
    base: &StateTrajectory,
    dir: &ControlTrajectory,
    grid: &TimeGrid,
) -> Result<StateTrajectory> {
    let st = Stepper::new(ops, grid)?;
    solve_linearized_with(&st, ctrl, base, dir)
}

pub fn solve_linearized_with(
    st: &Stepper<'_>,
    ctrl: &ControlTrajectory,
    base: &StateTrajectory,
    dir: &ControlTrajectory,
) -> Result<StateTrajectory> {
    let ops = st.ops;
    let n = ops.n_nodes();
    let steps = st.steps();
    ctrl.check(steps, n)?;
    dir.check(steps, n)?;
    check_len("base trajectory levels", steps + 1, base.levels())?;
    check_len("base trajectory nodes", n, base.q.n_nodes())?;

    let zeros = vec![0.0; n];
    let mut zq = NodalSeries::zeros(steps + 1, n);
    let mut zs = NodalSeries::zeros(steps + 1, n);
    let mut cache = QFactorCache::new(false);
    for step in 1..=steps {
        let m = step - 1;
        let q_now = base.q.row(step);
        let mut rhs = ops.mass.mul_vec(zq.row(m))?;
        let fx = ops.transport_x_t.contract(dir.ux.row(m))?.mul_vec(q_now)?;
        let fy = ops.transport_y_t.contract(dir.uy.row(m))?.mul_vec(q_now)?;
        for i in 0..n {
            rhs[i] = rhs[i] / st.dt + fx[i] + fy[i];
        }
        let zq_next = cache
            .get(st, ctrl.ux.row(m), ctrl.uy.row(m))
            .and_then(|lu| lu.solve(&rhs))
            .map_err(|e| e.at_step(step))?;

        let a = ops.reaction.contract(ctrl.k.row(m))?.mul_vec(&zq_next)?;
        let b = ops.reaction.contract(dir.k.row(m))?.mul_vec(q_now)?;
        let source: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let zs_next = st
            .s_step(zs.row(m), &source, &zeros)
            .map_err(|e| e.at_step(step))?;
        zq.set_row(step, &zq_next);
        zs.set_row(step, &zs_next);
    }
    Ok(StateTrajectory { q: zq, s: zs })
}
