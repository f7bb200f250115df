//! Optimal control of an advection-diffusion field by a mean-field robot
//! swarm, discretized with P1 finite elements and implicit Euler.

pub mod adjoint;
pub mod driver;
pub mod error;
pub mod fem;
pub mod flow;
pub mod forward;
pub mod linalg;
pub mod mesh;
pub mod ocp;
pub mod optimizer;
pub mod output;
pub mod scenario;
pub mod series;
pub mod sparse;

pub use error::{Error, Result};
