//! Time-indexed nodal fields.

use crate::error::{check_len, Error, Result};

/// A `(rows × n_nodes)` array, one row per time level, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalSeries {
    rows: usize,
    n: usize,
    data: Vec<f64>,
}

impl NodalSeries {
    pub fn zeros(rows: usize, n: usize) -> Self {
        Self {
            rows,
            n,
            data: vec![0.0; rows * n],
        }
    }

    pub fn from_vec(rows: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        check_len("nodal series storage", rows * n, data.len())?;
        Ok(Self { rows, n, data })
    }

    /// Every row equal to `row`.
    pub fn constant(rows: usize, row: &[f64]) -> Self {
        let n = row.len();
        let mut data = Vec::with_capacity(rows * n);
        for _ in 0..rows {
            data.extend_from_slice(row);
        }
        Self { rows, n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n..(r + 1) * self.n]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.n..(r + 1) * self.n]
    }

    pub fn set_row(&mut self, r: usize, values: &[f64]) {
        self.row_mut(r).copy_from_slice(values);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n.max(1)).take(self.rows)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        check_len("nodal series rows", self.rows, other.rows)?;
        check_len("nodal series nodes", self.n, other.n)
    }

    /// `self += s·other`.
    pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
        self.same_shape(other)?;
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += s * b);
        Ok(())
    }
}

/// Decision variables: nodal velocity components and actuation intensity.
///
/// Row `m` holds the controls acting on the implicit step `t_m → t_{m+1}`,
/// i.e. the values at the right end point `t_{m+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrajectory {
    pub ux: NodalSeries,
    pub uy: NodalSeries,
    pub k: NodalSeries,
}

impl ControlTrajectory {
    pub fn zeros(steps: usize, n: usize) -> Self {
        Self {
            ux: NodalSeries::zeros(steps, n),
            uy: NodalSeries::zeros(steps, n),
            k: NodalSeries::zeros(steps, n),
        }
    }

    pub fn new(ux: NodalSeries, uy: NodalSeries, k: NodalSeries) -> Result<Self> {
        ux.same_shape(&uy)?;
        ux.same_shape(&k)?;
        Ok(Self { ux, uy, k })
    }

    pub fn steps(&self) -> usize {
        self.k.rows()
    }

    pub fn n_nodes(&self) -> usize {
        self.k.n_nodes()
    }

    pub fn components(&self) -> [&NodalSeries; 3] {
        [&self.ux, &self.uy, &self.k]
    }

    pub fn components_mut(&mut self) -> [&mut NodalSeries; 3] {
        [&mut self.ux, &mut self.uy, &mut self.k]
    }

    /// Flat view `[ux | uy | k]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.ux.as_slice().len());
        for c in self.components() {
            v.extend_from_slice(c.as_slice());
        }
        v
    }

    pub fn from_flat(steps: usize, n: usize, flat: &[f64]) -> Result<Self> {
        let len = steps * n;
        check_len("flat control vector", 3 * len, flat.len())?;
        Ok(Self {
            ux: NodalSeries::from_vec(steps, n, flat[..len].to_vec())?,
            uy: NodalSeries::from_vec(steps, n, flat[len..2 * len].to_vec())?,
            k: NodalSeries::from_vec(steps, n, flat[2 * len..].to_vec())?,
        })
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| crate::sparse::dot(a.as_slice(), b.as_slice()))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
        for (a, b) in self.components_mut().into_iter().zip(other.components()) {
            a.axpy(s, b)?;
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in out.components_mut() {
            c.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }

    pub(crate) fn check(&self, steps: usize, n: usize) -> Result<()> {
        check_len("control trajectory steps", steps, self.steps())?;
        check_len("control trajectory nodes", n, self.n_nodes())?;
        if !self.is_finite() {
            return Err(Error::invalid("control trajectory has non-finite entries"));
        }
        Ok(())
    }
}

/// Swarm density `q` and field `S` at every time level `t_0 … t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub q: NodalSeries,
    pub s: NodalSeries,
}

impl StateTrajectory {
    pub fn levels(&self) -> usize {
        self.q.rows()
    }

    pub fn final_s(&self) -> &[f64] {
        self.s.row(self.s.rows() - 1)
    }
}

/// Uniform time grid on `[0, T]` with `steps` implicit-Euler steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    final_time: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time > 0.0) || !final_time.is_finite() {
            return Err(Error::invalid(format!("final time must be positive, got {final_time}")));
        }
        if steps == 0 {
            return Err(Error::invalid("time step count must be >= 1"));
        }
        Ok(Self { final_time, steps })
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    pub fn time(&self, level: usize) -> f64 {
        self.final_time * level as f64 / self.steps as f64
    }

    /// Time level closest to `t`.
    pub fn nearest_level(&self, t: f64) -> usize {
        ((t / self.dt()).round().max(0.0) as usize).min(self.steps)
    }
}
