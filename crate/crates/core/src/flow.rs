//! Steady background currents.

use std::f64::consts::PI;

use crate::error::{check_len, Result};
use crate::mesh::Mesh;

/// Default stream-function amplitude, giving a peak speed of one.
pub const DEFAULT_AMPLITUDE: f64 = 1.0 / (2.0 * PI);

#[derive(Debug, Clone, PartialEq)]
pub enum FlowField {
    /// Two counter-rotating cells from `ψ = A sin(2πx) sin(πy)`.
    DoubleGyre { amplitude: f64 },
    Zero,
    Nodal(Vec<[f64; 2]>),
}

/// `F = (∂ψ/∂y, −∂ψ/∂x)` for `ψ = A sin(2πx) sin(πy)`.
pub fn double_gyre_at(x: f64, y: f64, amplitude: f64) -> [f64; 2] {
    [
        PI * amplitude * (2.0 * PI * x).sin() * (PI * y).cos(),
        -2.0 * PI * amplitude * (2.0 * PI * x).cos() * (PI * y).sin(),
    ]
}

/// Analytic divergence of the double gyre (identically zero up to rounding).
pub fn double_gyre_divergence(x: f64, y: f64, amplitude: f64) -> f64 {
    let dfx_dx = 2.0 * PI * PI * amplitude * (2.0 * PI * x).cos() * (PI * y).cos();
    let dfy_dy = -2.0 * PI * PI * amplitude * (2.0 * PI * x).cos() * (PI * y).cos();
    dfx_dx + dfy_dy
}

/// Evaluates the field at every node. Boundary nodes get the normal
/// component set to exactly zero.
pub fn sample_at_nodes(mesh: &Mesh, field: &FlowField) -> Result<Vec<[f64; 2]>> {
    let n = mesh.n_nodes();
    match field {
        FlowField::Zero => Ok(vec![[0.0; 2]; n]),
        FlowField::Nodal(v) => {
            check_len("nodal flow field", n, v.len())?;
            Ok(v.clone())
        }
        FlowField::DoubleGyre { amplitude } => {
            let mut out: Vec<[f64; 2]> = mesh
                .nodes()
                .iter()
                .map(|p| double_gyre_at(p[0], p[1], *amplitude))
                .collect();
            for (i, p) in mesh.nodes().iter().enumerate() {
                if p[0] == 0.0 || p[0] == 1.0 {
                    out[i][0] = 0.0;
                }
                if p[1] == 0.0 || p[1] == 1.0 {
                    out[i][1] = 0.0;
                }
            }
            Ok(out)
        }
    }
}
