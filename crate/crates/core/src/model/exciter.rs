//! DC exciter with voltage transducer lag, lead-lag, limited regulator,
//! exciter integrator with quadratic saturation and rate feedback.
//!
//! The stabilizer signal `v_pss` is summed at the regulator input together
//! with the reference, the sensed voltage and the rate feedback.

use super::case::ExciterParams;
use super::governor::limit_holds;
use crate::error::{Error, Result};

pub const EXCITER_STATES: usize = 5;

pub const SENSED_V: usize = 0;
pub const LEAD_LAG: usize = 1;
pub const VR: usize = 2;
pub const FIELD: usize = 3;
pub const FEEDBACK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExciterOutputs {
    /// Field voltage applied to the machine (speed-scaled exciter output).
    pub efd: f64,
    /// Summing-junction output: reference minus sensed voltage plus the
    /// stabilizer signal minus rate feedback.
    pub regulator_input: f64,
}

/// Quadratic saturation `SE(E) * E = B (E - A)^2` fitted through two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSaturation {
    pub a: f64,
    pub b: f64,
}

impl QuadSaturation {
    pub fn fit(e1: f64, se1: f64, e2: f64, se2: f64) -> Self {
        // A zero second point disables saturation.
        let (e2, se2) = if se2 == 0.0 { (e2 + 2.0, se2 + 2.0) } else { (e2, se2) };
        let ratio = if se2 != 0.0 { (se1 * e1 / (se2 * e2)).sqrt() } else { 0.0 };
        let a = e2 - (e1 - e2) / (ratio - 1.0);
        let b = if ratio != 0.0 {
            se2 * e2 * (ratio - 1.0).powi(2) / (e1 - e2).powi(2)
        } else {
            0.0
        };
        QuadSaturation { a, b }
    }

    /// Saturation factor `SE(e)`.
    pub fn factor(&self, e: f64) -> f64 {
        if self.b == 0.0 || e <= self.a || e <= 0.0 {
            0.0
        } else {
            self.b * (e - self.a).powi(2) / e
        }
    }
}

impl ExciterParams {
    pub fn saturation(&self) -> QuadSaturation {
        QuadSaturation::fit(self.e1, self.se1, self.e2, self.se2)
    }
}

pub fn exciter_derivatives(
    p: &ExciterParams,
    x: &[f64],
    v_measured: f64,
    v_ref: f64,
    v_pss: f64,
    omega: f64,
) -> Result<([f64; EXCITER_STATES], ExciterOutputs)> {
    if x.len() != EXCITER_STATES {
        return Err(Error::Shape {
            what: "exciter state".into(),
            expected: EXCITER_STATES,
            actual: x.len(),
        });
    }
    let inputs = [v_measured, v_ref, v_pss, omega];
    if !(inputs.iter().chain(x.iter()).all(|v| v.is_finite())) {
        return Err(Error::InvalidState(format!("non-finite exciter input for machine {}", p.machine)));
    }
    let mut dx = [0.0; EXCITER_STATES];
    let out = derivatives_into(p, &p.saturation(), x, v_measured, v_ref, v_pss, omega, false, &mut dx);
    if limit_holds(x[VR], dx[VR], p.vrmin, p.vrmax) {
        dx[VR] = 0.0;
    }
    Ok((dx, out))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn derivatives_into(
    p: &ExciterParams,
    sat: &QuadSaturation,
    x: &[f64],
    v_measured: f64,
    v_ref: f64,
    v_pss: f64,
    omega: f64,
    hold_regulator: bool,
    dx: &mut [f64],
) -> ExciterOutputs {
    let feedback = p.kf / p.tf * (x[FIELD] - x[FEEDBACK]);
    let vi = v_ref - x[SENSED_V] + v_pss - feedback;
    let ll_out = if p.tb > 0.0 {
        dx[LEAD_LAG] = (vi - x[LEAD_LAG]) / p.tb;
        p.tc / p.tb * (vi - x[LEAD_LAG]) + x[LEAD_LAG]
    } else {
        dx[LEAD_LAG] = 0.0;
        vi
    };
    dx[SENSED_V] = (v_measured - x[SENSED_V]) / p.tr;
    dx[VR] = if hold_regulator { 0.0 } else { (p.ka * ll_out - x[VR]) / p.ta };
    let vp = x[FIELD];
    dx[FIELD] = (x[VR] - p.ke * vp - sat.factor(vp) * vp) / p.te;
    dx[FEEDBACK] = (vp - x[FEEDBACK]) / p.tf;
    ExciterOutputs {
        efd: omega * vp,
        regulator_input: vi,
    }
}

pub(crate) fn clamp_states(p: &ExciterParams, x: &mut [f64]) {
    x[VR] = x[VR].clamp(p.vrmin, p.vrmax);
}

/// Settled states for field voltage `efd` at sensed voltage `v`; sets `v_ref`.
pub fn exciter_init(p: &mut ExciterParams, efd: f64, v: f64) -> Result<[f64; EXCITER_STATES]> {
    let se = p.saturation().factor(efd);
    let vr = (p.ke + se) * efd;
    if vr > p.vrmax || vr < p.vrmin {
        return Err(Error::Init {
            component: format!("exciter of machine {}", p.machine),
            reason: format!("required regulator output {vr:.4} outside [{}, {}]", p.vrmin, p.vrmax),
        });
    }
    let vb = vr / p.ka;
    p.v_ref = v + vb;
    Ok([v, vb, vr, efd, efd])
}
