//! Power flow, equilibrium initialization and time-domain simulation.

pub mod dae;
pub mod integrator;
pub mod measure;
pub mod plant;
pub mod powerflow;
pub mod simulator;
pub mod trajectory;

pub use dae::Dae;
pub use integrator::{StepFailure, Trapezoid};
pub use measure::Measurements;
pub use plant::{DynamicState, MachineInputs, Plant};
pub use powerflow::{solve_power_flow, PowerFlowSolution};
pub use simulator::{solve_algebraic, SimConfig, Simulator};
pub use trajectory::{Trajectory, TrajectoryRow};
