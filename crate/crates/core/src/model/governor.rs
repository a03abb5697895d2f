//! Steam turbine-governor: droop, valve lag with anti-windup limits and a
//! turbine lead-lag.
//!
//! The speed input is whatever the governor measures; a falsified measurement
//! or reference enters here unchanged.

use super::case::GovernorParams;
use crate::error::{Error, Result};

pub const GOVERNOR_STATES: usize = 2;

pub const VALVE: usize = 0;
pub const TURBINE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorOutputs {
    /// Mechanical power (torque) delivered to the shaft.
    pub pm: f64,
    /// Valve position demand before the lag.
    pub valve_ref: f64,
}

/// Whether a state on or beyond a limit is being driven further out.
#[inline]
pub(crate) fn limit_holds(y: f64, drive: f64, lo: f64, hi: f64) -> bool {
    (y >= hi && drive > 0.0) || (y <= lo && drive < 0.0)
}

pub fn governor_derivatives(
    p: &GovernorParams,
    x: &[f64],
    omega_measured: f64,
    omega_ref: f64,
) -> Result<([f64; GOVERNOR_STATES], GovernorOutputs)> {
    if x.len() != GOVERNOR_STATES {
        return Err(Error::Shape {
            what: "governor state".into(),
            expected: GOVERNOR_STATES,
            actual: x.len(),
        });
    }
    if !(omega_measured.is_finite() && omega_ref.is_finite() && x.iter().all(|v| v.is_finite())) {
        return Err(Error::InvalidState(format!("non-finite governor input for machine {}", p.machine)));
    }
    let mut dx = [0.0; GOVERNOR_STATES];
    let out = derivatives_into(p, x, omega_measured, omega_ref, false, &mut dx);
    if limit_holds(x[VALVE], dx[VALVE], p.vmin, p.vmax) {
        dx[VALVE] = 0.0;
    }
    Ok((dx, out))
}

pub(crate) fn derivatives_into(
    p: &GovernorParams,
    x: &[f64],
    omega_measured: f64,
    omega_ref: f64,
    hold_valve: bool,
    dx: &mut [f64],
) -> GovernorOutputs {
    let dev = omega_measured - omega_ref;
    let valve_ref = p.p_ref - dev / p.r;
    let valve = x[VALVE];
    dx[VALVE] = if hold_valve { 0.0 } else { (valve_ref - valve) / p.t1 };
    dx[TURBINE] = (valve - x[TURBINE]) / p.t3;
    let lead_lag = p.t2 / p.t3 * (valve - x[TURBINE]) + x[TURBINE];
    GovernorOutputs {
        pm: lead_lag - p.dt * dev,
        valve_ref,
    }
}

/// Clamp the valve state into its limits.
pub(crate) fn clamp_states(p: &GovernorParams, x: &mut [f64]) {
    x[VALVE] = x[VALVE].clamp(p.vmin, p.vmax);
}

/// States that hold `pm` at nominal speed.
pub fn governor_init(p: &mut GovernorParams, pm: f64) -> Result<[f64; GOVERNOR_STATES]> {
    if pm < p.vmin || pm > p.vmax {
        return Err(Error::Init {
            component: format!("governor of machine {}", p.machine),
            reason: format!("required valve position {pm:.4} outside [{}, {}]", p.vmin, p.vmax),
        });
    }
    p.p_ref = pm;
    Ok([pm, pm])
}
