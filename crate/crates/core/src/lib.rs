//! Heterogeneous robot swarm searching for and tracking a fast moving disc
//! target with topological k-nearest-neighbor PSO and adaptive repulsion.
//!
//! * [`model`]: agent classes, state, configuration and seeded randomness
//! * [`topology`]: directed k-nearest-neighbor graph
//! * [`target`]: binary objective and target motion
//! * [`dynamics`]: the synchronous per-step control loop
//! * [`metrics`]: Ξ, heading-bearing histogram and time on target
//! * [`experiment`]: runs, sweeps, figure presets and output files

pub mod dynamics;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod target;
pub mod topology;
pub mod vec2;

pub use dynamics::Simulation;
pub use experiment::{run_simulation, run_sweep, RunSummary, SweepSpec};
pub use model::{AgentClass, AgentState, ClassCount, SimConfig, TargetState};
pub use vec2::Vec2;
