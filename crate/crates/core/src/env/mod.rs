//! Episodic attack environment: scenarios, action mapping, observations and
//! reward.

pub mod environment;
pub mod scenario;

pub use environment::{
    build_observation, compute_reward, map_action, route_injections, AttackEnv, InjectionVector, StepInfo, StepResult,
};
pub use scenario::{InjectionKind, InjectionPoint, Scenario};
