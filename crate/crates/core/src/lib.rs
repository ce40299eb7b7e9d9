//! Simulation and verification toolkit for degenerate triangular
//! reaction-diffusion systems `A_1 + ... + A_{m-1} <-> A_m` on intervals and
//! rectangles with no-flux boundaries.

pub mod bootstrap;
pub mod diagnostics;
pub mod grid;
pub mod kernel;
pub mod kinetics;
pub mod model;
pub mod picard;
pub mod stepper;
