//! Discrete non-local quantum drift diffusion on the periodic unit interval.

pub mod cli;
pub mod grid;
pub mod kernels;
pub mod liouville;
pub mod nlqdd;
pub mod ode;
pub mod qmax;
