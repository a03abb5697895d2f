//! Round-rotor synchronous machine with sub-transient dynamics.
//!
//! State order: rotor angle, speed, q-axis transient voltage, d-axis transient
//! voltage, d-axis and q-axis sub-transient flux states. Magnetic saturation is
//! neglected. Stator transients are neglected and the network frame is related
//! to the rotor frame by `V = (vd + j vq) * (-j) e^{j delta}`.

use num_complex::Complex64;

use super::case::MachineParams;
use crate::error::{Error, Result};

pub const MACHINE_STATES: usize = 6;

pub const DELTA: usize = 0;
pub const OMEGA: usize = 1;
pub const E_Q_T: usize = 2;
pub const E_D_T: usize = 3;
pub const PSI_D_ST: usize = 4;
pub const PSI_Q_ST: usize = 5;

/// Electrical quantities at the machine terminal for a given state and bus voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineOutputs {
    pub id: f64,
    pub iq: f64,
    pub vd: f64,
    pub vq: f64,
    /// Air-gap torque, equal to the electrical power with zero armature resistance.
    pub te: f64,
    pub pe: f64,
    pub qe: f64,
    /// Current injected into the network, network frame.
    pub current: Complex64,
}

/// Operating point of a machine back-solved from a power-flow result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineInit {
    pub state: [f64; MACHINE_STATES],
    pub tm: f64,
    pub efd: f64,
}

struct Coefs {
    gd1: f64,
    gq1: f64,
    gd2: f64,
    gq2: f64,
}

impl MachineParams {
    fn coefs(&self) -> Coefs {
        Coefs {
            gd1: (self.xd_st - self.xl) / (self.xd_t - self.xl),
            gq1: (self.xq_st - self.xl) / (self.xq_t - self.xl),
            gd2: (self.xd_t - self.xd_st) / (self.xd_t - self.xl).powi(2),
            gq2: (self.xq_t - self.xq_st) / (self.xq_t - self.xl).powi(2),
        }
    }

    pub fn inertia_m(&self) -> f64 {
        2.0 * self.h
    }
}

fn air_gap_flux(p: &MachineParams, c: &Coefs, x: &[f64]) -> (f64, f64) {
    let psi_d = c.gd1 * x[E_Q_T] + c.gd2 * (p.xd_t - p.xl) * x[PSI_D_ST];
    let psi_q = c.gq1 * x[E_D_T] + (1.0 - c.gq1) * x[PSI_Q_ST];
    (psi_d, psi_q)
}

/// Stator algebraic solution for terminal voltage `v` at angle `theta`.
pub fn machine_outputs(p: &MachineParams, x: &[f64], v: f64, theta: f64) -> MachineOutputs {
    let c = p.coefs();
    outputs_with(p, &c, x, v, theta)
}

fn outputs_with(p: &MachineParams, c: &Coefs, x: &[f64], v: f64, theta: f64) -> MachineOutputs {
    let (psi2d, psi2q) = air_gap_flux(p, c, x);
    let (s, co) = (x[DELTA] - theta).sin_cos();
    let vd = v * s;
    let vq = v * co;
    // psi_d = vq + ra iq, psi_q = -(vd + ra id); solve the 2x2 stator equations
    //   psi_d + xd'' id - psi2d = 0,  psi_q + xq'' iq + psi2q = 0.
    let (id, iq) = if p.ra == 0.0 {
        ((psi2d - vq) / p.xd_st, (vd - psi2q) / p.xq_st)
    } else {
        // [xd'', ra; -ra, xq''] [id; iq] = [psi2d - vq; vd - psi2q]
        let det = p.xd_st * p.xq_st + p.ra * p.ra;
        let b1 = psi2d - vq;
        let b2 = vd - psi2q;
        ((p.xq_st * b1 - p.ra * b2) / det, (p.xd_st * b2 + p.ra * b1) / det)
    };
    let psid = vq + p.ra * iq;
    let psiq = -(vd + p.ra * id);
    let te = psid * iq - psiq * id;
    let pe = vd * id + vq * iq;
    let qe = vq * id - vd * iq;
    let rot = Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, x[DELTA]);
    MachineOutputs {
        id,
        iq,
        vd,
        vq,
        te,
        pe,
        qe,
        current: Complex64::new(id, iq) * rot,
    }
}

/// Time derivatives of the six machine states.
///
/// `tm` is mechanical torque and `efd` field voltage, both per unit; the
/// returned speed derivative is per-unit per second and the angle derivative
/// is in rad/s.
pub fn machine_derivatives(
    p: &MachineParams,
    x: &[f64],
    v: f64,
    theta: f64,
    tm: f64,
    efd: f64,
    omega_base: f64,
) -> Result<[f64; MACHINE_STATES]> {
    if x.len() != MACHINE_STATES {
        return Err(Error::Shape {
            what: "machine state".into(),
            expected: MACHINE_STATES,
            actual: x.len(),
        });
    }
    if !(x.iter().all(|v| v.is_finite()) && v.is_finite() && theta.is_finite() && tm.is_finite() && efd.is_finite()) {
        return Err(Error::InvalidState(format!("non-finite machine input for machine {}", p.id)));
    }
    let mut dx = [0.0; MACHINE_STATES];
    derivatives_into(p, x, v, theta, tm, efd, omega_base, &mut dx);
    Ok(dx)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn derivatives_into(
    p: &MachineParams,
    x: &[f64],
    v: f64,
    theta: f64,
    tm: f64,
    efd: f64,
    omega_base: f64,
    dx: &mut [f64],
) -> MachineOutputs {
    let c = p.coefs();
    let out = outputs_with(p, &c, x, v, theta);
    let omega = x[OMEGA];

    let xad_ifd = x[E_Q_T] + (p.xd - p.xd_t) * (c.gd1 * out.id - c.gd2 * x[PSI_D_ST] + c.gd2 * x[E_Q_T]);
    let xaq_i1q = x[E_D_T] + (p.xq - p.xq_t) * (c.gq2 * x[E_D_T] - c.gq2 * x[PSI_Q_ST] - c.gq1 * out.iq);

    dx[DELTA] = omega_base * (omega - 1.0);
    dx[OMEGA] = (tm - out.te - p.d * (omega - 1.0)) / p.inertia_m();
    dx[E_Q_T] = (efd - xad_ifd) / p.td0_t;
    dx[E_D_T] = -xaq_i1q / p.tq0_t;
    dx[PSI_D_ST] = (-x[PSI_D_ST] + x[E_Q_T] - (p.xd_t - p.xl) * out.id) / p.td0_st;
    dx[PSI_Q_ST] = (-x[PSI_Q_ST] + x[E_D_T] + (p.xq_t - p.xl) * out.iq) / p.tq0_st;
    out
}

/// Back-solve the machine states from terminal voltage and complex power output.
pub fn machine_init(p: &MachineParams, v: f64, theta: f64, pg: f64, qg: f64) -> Result<MachineInit> {
    let vt = Complex64::from_polar(v, theta);
    let it = Complex64::new(pg, -qg) / vt.conj();
    let delta = (vt + Complex64::new(p.ra, p.xq) * it).arg();

    // Rotor frame: (d + j q) = network * j e^{-j delta}
    let to_dq = Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, -delta);
    let i_dq = it * to_dq;
    let v_dq = vt * to_dq;
    let (id, iq) = (i_dq.re, i_dq.im);
    let (vd, vq) = (v_dq.re, v_dq.im);

    let psi2d = vq + p.ra * iq + p.xd_st * id;
    let tm = (vq + p.ra * iq) * iq + (vd + p.ra * id) * id;
    let efd = psi2d + (p.xd - p.xd_st) * id;

    let state = [
        delta,
        1.0,
        id * (p.xd_t - p.xd) + efd,
        iq * (p.xq - p.xq_t),
        id * (p.xl - p.xd) + efd,
        iq * (p.xq - p.xl),
    ];
    if state.iter().any(|s| !s.is_finite()) {
        return Err(Error::Init {
            component: format!("machine {}", p.id),
            reason: "non-finite operating point".into(),
        });
    }
    Ok(MachineInit { state, tm, efd })
}
