//! Differentiable yarn-level woven-fabric simulator.
//!
//! A woven cloth is discretized into crossing nodes carrying Lagrangian
//! spatial coordinates plus Eulerian sliding coordinates along each yarn.
//! Forward dynamics integrate an implicit-Euler system with analytic force
//! Jacobians; reverse-mode gradients flow through every step via the
//! adjoint of the linear solve, enabling inverse estimation of yarn
//! parameters from observed trajectories and gradient-based learning of
//! control forces.
//!
//! Start with the `examples/` directory: each example exercises one major
//! capability (forward simulation, gradient checking, parameter recovery,
//! data efficiency, control learning, the friction curve). The `yarnsim`
//! binary wraps the same entry points behind `simulate`, `estimate`,
//! `gradcheck` and `control` subcommands.

pub mod adjoint;
pub mod cli;
pub mod estimation;
pub mod fabric;
pub mod forces;
pub mod integrator;
pub mod io;
pub mod math;
pub mod params;
pub mod solver;
pub mod verify;

pub use fabric::{DofLayout, Fabric, FabricSpec, State, WovenPattern, YarnMaterial};
pub use integrator::{Constraints, Externals, Obstacle, SimOptions, StepTape};
pub use params::{ModelConsts, ParamBounds, ParamKey, Params};

/// Number of threads the library may use for embarrassingly parallel work.
/// Controlled by the `YARNSIM_THREADS` environment variable; defaults to the
/// machine parallelism.
pub fn max_threads() -> usize {
    std::env::var("YARNSIM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}
