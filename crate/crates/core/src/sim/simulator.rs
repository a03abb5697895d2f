use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dae::Dae;
use super::integrator::{StepFailure, Trapezoid};
use super::measure::Measurements;
use super::plant::{DynamicState, MachineInputs, Plant};
use super::powerflow::{solve_power_flow, PowerFlowSolution};
use crate::error::{Error, Result};
use crate::model::NetworkCase;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Internal integration step, s.
    pub step: f64,
    /// Action window, s. Must be an integer multiple of `step`.
    pub window: f64,
    /// Newton update tolerance relative to the largest state magnitude.
    pub newton_tol: f64,
    pub power_flow_tol: f64,
    pub power_flow_max_iter: usize,
    /// Bus voltage below which the network is treated as collapsed, pu.
    pub collapse_voltage: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            step: 0.01,
            window: 0.2,
            newton_tol: 1e-11,
            power_flow_tol: 1e-10,
            power_flow_max_iter: 30,
            collapse_voltage: 0.2,
        }
    }
}

impl SimConfig {
    pub fn steps_per_window(&self) -> Result<usize> {
        let n = self.window / self.step;
        let k = n.round();
        if !(self.step > 0.0 && self.window > 0.0) || (n - k).abs() > 1e-9 * n.max(1.0) || k < 1.0 {
            return Err(Error::Config(format!(
                "window {} s is not a positive integer multiple of step {} s",
                self.window, self.step
            )));
        }
        Ok(k as usize)
    }
}

/// A plant together with its current state and integrator.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    steps: usize,
    step_count: u64,
    power_flow: PowerFlowSolution,
    initial_plant: Plant,
    initial_state: DynamicState,
    plant: Plant,
    state: DynamicState,
    integrator: Trapezoid,
    last: Measurements,
}

impl Simulator {
    pub fn new(case: &NetworkCase, config: SimConfig) -> Result<Self> {
        let steps = config.steps_per_window()?;
        let power_flow = solve_power_flow(case, config.power_flow_tol, config.power_flow_max_iter)?;
        let (plant, state) = Plant::init_equilibrium(case, &power_flow)?;
        let mut integrator = Trapezoid::new(config.step);
        integrator.tol = config.newton_tol;
        let last = Measurements::at_rest(&plant, &state, case.freq_hz);
        Ok(Simulator {
            config,
            steps,
            step_count: 0,
            power_flow,
            initial_plant: plant.clone(),
            initial_state: state.clone(),
            plant,
            state,
            integrator,
            last,
        })
    }

    /// Return to the initial equilibrium.
    pub fn reset(&mut self) {
        self.plant = self.initial_plant.clone();
        self.state = self.initial_state.clone();
        self.step_count = 0;
        self.integrator.invalidate();
        self.last = Measurements::at_rest(&self.plant, &self.state, self.nominal_hz());
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn state(&self) -> &DynamicState {
        &self.state
    }

    pub fn initial_state(&self) -> &DynamicState {
        &self.initial_state
    }

    pub fn power_flow(&self) -> &PowerFlowSolution {
        &self.power_flow
    }

    pub fn measurements(&self) -> &Measurements {
        &self.last
    }

    pub fn nominal_hz(&self) -> f64 {
        self.plant.case.freq_hz
    }

    pub fn integrator_stats(&self) -> super::integrator::Stats {
        self.integrator.stats
    }

    /// Advance one action window with `inputs` held constant.
    ///
    /// On failure the state is left at the last accepted step.
    pub fn integrate_window(&mut self, inputs: &[MachineInputs]) -> Result<Measurements> {
        self.plant.set_inputs(inputs)?;
        for v in inputs {
            let vals = [v.governor_speed, v.governor_reference, v.avr_voltage, Some(v.pss)];
            if vals.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::InvalidState("non-finite injection".into()));
            }
        }
        let freq0 = self.last.freq_hz.clone();
        let mut y = self.state.algebraic();
        let mut x = self.state.x.clone();
        for _ in 0..self.steps {
            let t = self.state.time;
            if let Err(fail) = self.integrator.step(&mut self.plant, &mut x, &mut y) {
                // The factorization may be stale for the restored state.
                self.integrator.invalidate();
                return Err(self.classify(fail, t, &y));
            }
            let min_v = y[..self.plant.n_buses()].iter().copied().fold(f64::INFINITY, f64::min);
            if !(min_v >= self.config.collapse_voltage) {
                self.integrator.invalidate();
                return Err(Error::Collapse {
                    time: t,
                    reason: format!("bus voltage fell to {min_v:.4} pu"),
                });
            }
            self.state.x.copy_from_slice(&x);
            self.state.set_algebraic(&y);
            self.step_count += 1;
            self.state.time = self.step_count as f64 * self.config.step;
        }
        self.last = Measurements::capture(&self.plant, &self.state, &freq0, self.config.window, self.nominal_hz());
        Ok(self.last.clone())
    }

    fn classify(&self, fail: StepFailure, time: f64, y: &[f64]) -> Error {
        let n = self.plant.n_buses();
        let low = y[..n].iter().any(|v| !(v.is_finite() && *v >= self.config.collapse_voltage));
        match fail {
            StepFailure::Singular | StepFailure::NonFinite => Error::Collapse {
                time,
                reason: format!("network equations became {}", if fail == StepFailure::Singular { "singular" } else { "non-finite" }),
            },
            StepFailure::Diverged { residual } if low => Error::Collapse {
                time,
                reason: format!("Newton diverged with depressed voltages (update {residual:.3e})"),
            },
            StepFailure::Diverged { residual } => Error::Integration {
                time,
                reason: format!("Newton corrector did not converge (update {residual:.3e})"),
            },
        }
    }

    /// Disconnect machines and re-solve the network at fixed differential states.
    pub fn disconnect(&mut self, machines: &[usize]) -> Result<()> {
        let mut changed = false;
        for &k in machines {
            if k >= self.plant.n_machines() {
                return Err(Error::Contract(format!("machine index {k} out of range")));
            }
            changed |= std::mem::replace(&mut self.plant.online[k], false);
        }
        if !changed {
            return Ok(());
        }
        self.state.online = self.plant.online.clone();
        self.integrator.invalidate();
        let mut y = self.state.algebraic();
        let residual = solve_algebraic(&self.plant, &self.state.x, &mut y, 1e-12, 30).map_err(|reason| Error::Collapse {
            time: self.state.time,
            reason,
        })?;
        if !(residual < 1e-8) {
            return Err(Error::Collapse {
                time: self.state.time,
                reason: format!("network residual {residual:.3e} after disconnection"),
            });
        }
        let min_v = y[..self.plant.n_buses()].iter().copied().fold(f64::INFINITY, f64::min);
        if !(min_v >= self.config.collapse_voltage) {
            return Err(Error::Collapse {
                time: self.state.time,
                reason: format!("bus voltage fell to {min_v:.4} pu after disconnection"),
            });
        }
        self.state.set_algebraic(&y);
        self.last.bus_v = self.state.v.clone();
        self.last.machine_v = self.plant.slots.iter().map(|s| self.state.v[s.bus]).collect();
        Ok(())
    }
}

/// Newton solve of `g(x, y) = 0` for `y`; returns the final residual norm.
pub fn solve_algebraic<D: Dae + ?Sized>(
    dae: &D,
    x: &[f64],
    y: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> std::result::Result<f64, String> {
    let (nx, ny) = (dae.n_diff(), dae.n_alg());
    let mut f = vec![0.0; nx];
    let mut g = vec![0.0; ny];
    let mut g1 = vec![0.0; ny];
    for _ in 0..max_iter {
        dae.eval(x, y, &mut f, &mut g);
        let norm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !norm.is_finite() {
            return Err("non-finite network residual".into());
        }
        if norm < tol {
            return Ok(norm);
        }
        let mut jac = DMatrix::zeros(ny, ny);
        for j in 0..ny {
            let base = y[j];
            let eps = 1e-7 * base.abs().max(1.0);
            y[j] = base + eps;
            dae.eval(x, y, &mut f, &mut g1);
            y[j] = base;
            for i in 0..ny {
                jac[(i, j)] = (g1[i] - g[i]) / eps;
            }
        }
        let rhs = DVector::from_column_slice(&g);
        let dy = jac.lu().solve(&rhs).ok_or("singular network Jacobian")?;
        for j in 0..ny {
            y[j] -= dy[j];
        }
    }
    dae.eval(x, y, &mut f, &mut g);
    let norm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if norm < tol {
        Ok(norm)
    } else {
        Err(format!("network re-solve did not converge (residual {norm:.3e})"))
    }
}
