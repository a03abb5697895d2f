//! The assembled grid: machines with their controllers coupled through the
//! network, written as a semi-explicit DAE.
//!
//! Differential states are stored machine by machine: six machine states,
//! then the governor states and the exciter states if the machine has them.
//! Algebraic states are all bus voltage magnitudes followed by all bus angles.

use num_complex::Complex64;
use serde::Serialize;

use super::dae::Dae;
use super::powerflow::PowerFlowSolution;
use crate::error::{Error, Result};
use crate::model::exciter::{self, QuadSaturation, EXCITER_STATES};
use crate::model::governor::{self, limit_holds, GOVERNOR_STATES};
use crate::model::machine::{self, MACHINE_STATES, OMEGA};
use crate::model::{Admittance, ExciterParams, GovernorParams, MachineParams, NetworkCase};

/// Falsified signals applied to one machine's controllers. `None` leaves the
/// true signal in place.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MachineInputs {
    /// Speed seen by the governor, per unit.
    pub governor_speed: Option<f64>,
    /// Speed reference of the governor, per unit.
    pub governor_reference: Option<f64>,
    /// Terminal voltage seen by the voltage regulator, per unit.
    pub avr_voltage: Option<f64>,
    /// Stabilizer signal added at the regulator summing junction, per unit.
    pub pss: f64,
}

#[derive(Debug, Clone)]
pub struct MachineSlot {
    pub params: MachineParams,
    pub bus: usize,
    pub governor: Option<GovernorParams>,
    pub exciter: Option<(ExciterParams, QuadSaturation)>,
    pub offset: usize,
    /// Constant torque and field voltage used when a controller is absent.
    pub tm0: f64,
    pub efd0: f64,
}

impl MachineSlot {
    pub fn n_states(&self) -> usize {
        MACHINE_STATES
            + self.governor.as_ref().map_or(0, |_| GOVERNOR_STATES)
            + self.exciter.as_ref().map_or(0, |_| EXCITER_STATES)
    }

    fn governor_offset(&self) -> usize {
        self.offset + MACHINE_STATES
    }

    fn exciter_offset(&self) -> usize {
        self.governor_offset() + self.governor.as_ref().map_or(0, |_| GOVERNOR_STATES)
    }
}

/// Values of the full plant state at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicState {
    pub time: f64,
    pub x: Vec<f64>,
    /// Bus voltage magnitudes, per unit.
    pub v: Vec<f64>,
    /// Bus voltage angles, radians.
    pub theta: Vec<f64>,
    pub online: Vec<bool>,
}

impl DynamicState {
    pub fn algebraic(&self) -> Vec<f64> {
        self.v.iter().chain(&self.theta).copied().collect()
    }

    pub fn set_algebraic(&mut self, y: &[f64]) {
        let n = self.v.len();
        self.v.copy_from_slice(&y[..n]);
        self.theta.copy_from_slice(&y[n..2 * n]);
    }

    pub fn max_abs_diff(&self, other: &DynamicState) -> f64 {
        let a = self.x.iter().zip(&other.x);
        let b = self.v.iter().zip(&other.v);
        let c = self.theta.iter().zip(&other.theta);
        a.chain(b).chain(c).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct Plant {
    pub case: NetworkCase,
    pub slots: Vec<MachineSlot>,
    pub admittance: Admittance,
    pub inputs: Vec<MachineInputs>,
    pub online: Vec<bool>,
    /// Limited states currently held at a bound, indexed like the
    /// differential state vector.
    held: Vec<bool>,
    omega_base: f64,
    n_diff: usize,
}

impl Plant {
    /// Build the plant around a converged power flow and back-solve every
    /// state so the DAE residual vanishes. Controller set-points are written
    /// into the plant's copy of the case.
    pub fn init_equilibrium(case: &NetworkCase, pf: &PowerFlowSolution) -> Result<(Plant, DynamicState)> {
        let admittance = Admittance::with_constant_impedance_loads(case, &pf.v)?;
        let mut slots = Vec::with_capacity(case.machines.len());
        let mut x = Vec::new();
        let mut seen_bus = vec![false; case.buses.len()];

        for (k, m) in case.machines.iter().enumerate() {
            let bus = case.bus_index(m.bus).expect("validated machine bus");
            if std::mem::replace(&mut seen_bus[bus], true) {
                return Err(Error::Init {
                    component: format!("machine {}", m.id),
                    reason: format!("bus {} already has a machine", m.bus),
                });
            }
            let init = machine::machine_init(m, pf.v[bus], pf.theta[bus], pf.machine_p[k], pf.machine_q[k])?;
            let offset = x.len();
            x.extend_from_slice(&init.state);

            let governor = match case.governor_for(m.id) {
                Some(g) => {
                    let mut g = g.clone();
                    x.extend_from_slice(&governor::governor_init(&mut g, init.tm)?);
                    Some(g)
                }
                None => None,
            };
            let exciter = match case.exciter_for(m.id) {
                Some(e) => {
                    let mut e = e.clone();
                    x.extend_from_slice(&exciter::exciter_init(&mut e, init.efd, pf.v[bus])?);
                    let sat = e.saturation();
                    Some((e, sat))
                }
                None => None,
            };
            slots.push(MachineSlot {
                params: m.clone(),
                bus,
                governor,
                exciter,
                offset,
                tm0: init.tm,
                efd0: init.efd,
            });
        }

        // Every generating bus must be backed by a machine in the dynamic model.
        for (i, b) in case.buses.iter().enumerate() {
            if b.kind != crate::model::BusKind::Pq && !seen_bus[i] {
                return Err(Error::Init {
                    component: format!("bus {}", b.id),
                    reason: "generation bus without a dynamic machine".into(),
                });
            }
        }

        let mut resolved = case.clone();
        for slot in &slots {
            if let Some(g) = &slot.governor {
                if let Some(dst) = resolved.governors.iter_mut().find(|d| d.machine == g.machine) {
                    *dst = g.clone();
                }
            }
            if let Some((e, _)) = &slot.exciter {
                if let Some(dst) = resolved.exciters.iter_mut().find(|d| d.machine == e.machine) {
                    *dst = e.clone();
                }
            }
        }

        let n_diff = x.len();
        let plant = Plant {
            omega_base: case.omega_base(),
            inputs: vec![MachineInputs::default(); slots.len()],
            online: vec![true; slots.len()],
            held: vec![false; n_diff],
            case: resolved,
            slots,
            admittance,
            n_diff,
        };
        let state = DynamicState {
            time: 0.0,
            x,
            v: pf.v.clone(),
            theta: pf.theta.clone(),
            online: plant.online.clone(),
        };

        let residual = plant.residual_norm(&state);
        if !(residual < 1e-8) {
            return Err(Error::Init {
                component: "plant".into(),
                reason: format!("equilibrium residual {residual:.3e} exceeds 1e-8"),
            });
        }
        Ok((plant, state))
    }

    pub fn n_machines(&self) -> usize {
        self.slots.len()
    }

    pub fn n_buses(&self) -> usize {
        self.admittance.len()
    }

    pub fn omega_base(&self) -> f64 {
        self.omega_base
    }

    pub fn machine_states<'a>(&self, state: &'a DynamicState, k: usize) -> &'a [f64] {
        let s = &self.slots[k];
        &state.x[s.offset..s.offset + MACHINE_STATES]
    }

    pub fn speed(&self, state: &DynamicState, k: usize) -> f64 {
        state.x[self.slots[k].offset + OMEGA]
    }

    pub fn set_inputs(&mut self, inputs: &[MachineInputs]) -> Result<()> {
        if inputs.len() != self.slots.len() {
            return Err(Error::Shape {
                what: "machine inputs".into(),
                expected: self.slots.len(),
                actual: inputs.len(),
            });
        }
        self.inputs.copy_from_slice(inputs);
        Ok(())
    }

    pub fn clear_inputs(&mut self) {
        self.inputs.fill(MachineInputs::default());
    }

    /// Infinity norm of `[f; g]` at `state` under the current inputs.
    pub fn residual_norm(&self, state: &DynamicState) -> f64 {
        let mut f = vec![0.0; self.n_diff];
        let mut g = vec![0.0; 2 * self.n_buses()];
        self.eval(&state.x, &state.algebraic(), &mut f, &mut g);
        f.iter().chain(&g).map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Differential residual only.
    pub fn derivative_norm(&self, state: &DynamicState) -> f64 {
        let mut f = vec![0.0; self.n_diff];
        let mut g = vec![0.0; 2 * self.n_buses()];
        self.eval(&state.x, &state.algebraic(), &mut f, &mut g);
        f.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Current each machine injects into the network.
    pub fn machine_currents(&self, state: &DynamicState) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.n_buses()];
        for (k, s) in self.slots.iter().enumerate() {
            if self.online[k] {
                let o = machine::machine_outputs(&s.params, self.machine_states(state, k), state.v[s.bus], state.theta[s.bus]);
                out[s.bus] += o.current;
            }
        }
        out
    }

    /// Electrical power output of every machine.
    pub fn machine_power(&self, state: &DynamicState) -> Vec<(f64, f64)> {
        self.slots
            .iter()
            .enumerate()
            .map(|(k, s)| {
                if !self.online[k] {
                    return (0.0, 0.0);
                }
                let o = machine::machine_outputs(&s.params, self.machine_states(state, k), state.v[s.bus], state.theta[s.bus]);
                (o.pe, o.qe)
            })
            .collect()
    }
}

impl Dae for Plant {
    fn n_diff(&self) -> usize {
        self.n_diff
    }

    fn n_alg(&self) -> usize {
        2 * self.n_buses()
    }

    fn eval(&self, x: &[f64], y: &[f64], f: &mut [f64], g: &mut [f64]) {
        let n = self.n_buses();
        let (vm, va) = y.split_at(n);
        let mut inj = [Complex64::default(); 64];
        let mut inj_vec;
        let inj: &mut [Complex64] = if n <= inj.len() {
            &mut inj[..n]
        } else {
            inj_vec = vec![Complex64::default(); n];
            &mut inj_vec
        };

        for (k, s) in self.slots.iter().enumerate() {
            let end = s.offset + s.n_states();
            if !self.online[k] {
                f[s.offset..end].fill(0.0);
                continue;
            }
            let input = &self.inputs[k];
            let xm = &x[s.offset..s.offset + MACHINE_STATES];
            let omega = xm[OMEGA];
            let (v, a) = (vm[s.bus], va[s.bus]);

            let tm = match &s.governor {
                Some(gp) => {
                    let o = s.governor_offset();
                    let speed = input.governor_speed.unwrap_or(omega);
                    let reference = input.governor_reference.unwrap_or(gp.w_ref);
                    governor::derivatives_into(
                        gp,
                        &x[o..o + GOVERNOR_STATES],
                        speed,
                        reference,
                        self.held[o + governor::VALVE],
                        &mut f[o..o + GOVERNOR_STATES],
                    )
                    .pm
                }
                None => s.tm0,
            };
            let efd = match &s.exciter {
                Some((ep, sat)) => {
                    let o = s.exciter_offset();
                    let sensed = input.avr_voltage.unwrap_or(v);
                    exciter::derivatives_into(
                        ep,
                        sat,
                        &x[o..o + EXCITER_STATES],
                        sensed,
                        ep.v_ref,
                        input.pss,
                        omega,
                        self.held[o + exciter::VR],
                        &mut f[o..o + EXCITER_STATES],
                    )
                    .efd
                }
                None => s.efd0,
            };
            let out = machine::derivatives_into(
                &s.params,
                xm,
                v,
                a,
                tm,
                efd,
                self.omega_base,
                &mut f[s.offset..s.offset + MACHINE_STATES],
            );
            inj[s.bus] += out.current;
        }

        for i in 0..n {
            let mut flow = Complex64::default();
            for j in 0..n {
                let yij = self.admittance.get(i, j);
                if yij.re != 0.0 || yij.im != 0.0 {
                    flow += yij * Complex64::from_polar(vm[j], va[j]);
                }
            }
            let r = inj[i] - flow;
            g[2 * i] = r.re;
            g[2 * i + 1] = r.im;
        }
    }

    fn project(&mut self, x: &mut [f64], y: &[f64]) -> bool {
        let vm = &y[..self.n_buses()];
        let mut changed = false;
        for (k, s) in self.slots.iter().enumerate() {
            let input = &self.inputs[k];
            let omega = x[s.offset + OMEGA];
            if let Some(gp) = &s.governor {
                let o = s.governor_offset();
                let xg = &mut x[o..o + GOVERNOR_STATES];
                governor::clamp_states(gp, xg);
                let mut dx = [0.0; GOVERNOR_STATES];
                let speed = input.governor_speed.unwrap_or(omega);
                let reference = input.governor_reference.unwrap_or(gp.w_ref);
                governor::derivatives_into(gp, xg, speed, reference, false, &mut dx);
                let i = o + governor::VALVE;
                let hold = self.online[k] && limit_holds(xg[governor::VALVE], dx[governor::VALVE], gp.vmin, gp.vmax);
                changed |= hold != self.held[i];
                self.held[i] = hold;
            }
            if let Some((ep, sat)) = &s.exciter {
                let o = s.exciter_offset();
                let xe = &mut x[o..o + EXCITER_STATES];
                exciter::clamp_states(ep, xe);
                let mut dx = [0.0; EXCITER_STATES];
                let sensed = input.avr_voltage.unwrap_or(vm[s.bus]);
                exciter::derivatives_into(ep, sat, xe, sensed, ep.v_ref, input.pss, omega, false, &mut dx);
                let i = o + exciter::VR;
                let hold = self.online[k] && limit_holds(xe[exciter::VR], dx[exciter::VR], ep.vrmin, ep.vrmax);
                changed |= hold != self.held[i];
                self.held[i] = hold;
            }
        }
        changed
    }
}

impl Plant {
    /// Index range of governor states of machine `k`, if it has a governor.
    pub fn governor_range(&self, k: usize) -> Option<std::ops::Range<usize>> {
        let s = &self.slots[k];
        s.governor.as_ref().map(|_| s.governor_offset()..s.governor_offset() + GOVERNOR_STATES)
    }

    pub fn exciter_range(&self, k: usize) -> Option<std::ops::Range<usize>> {
        let s = &self.slots[k];
        s.exciter.as_ref().map(|_| s.exciter_offset()..s.exciter_offset() + EXCITER_STATES)
    }
}
