//! Static network data and the component dynamics of the two-area grid.

pub mod case;
pub mod exciter;
pub mod governor;
pub mod machine;
pub mod network;

pub use case::{Branch, Bus, BusKind, ExciterParams, GovernorParams, MachineParams, NetworkCase};
pub use exciter::{exciter_derivatives, exciter_init, ExciterOutputs, QuadSaturation, EXCITER_STATES};
pub use governor::{governor_derivatives, governor_init, GovernorOutputs, GOVERNOR_STATES};
pub use machine::{machine_derivatives, machine_init, machine_outputs, MachineInit, MachineOutputs, MACHINE_STATES};
pub use network::{network_mismatch, Admittance};
