use serde::Serialize;

use super::scenario::{InjectionKind, InjectionPoint, Scenario};
use crate::error::{Error, Result};
use crate::model::NetworkCase;
use crate::protection::{apply_trips, evaluate_relays, GeneratorTrip, RelaySettings, TripCause, TripReport};
use crate::sim::{MachineInputs, Measurements, Simulator, Trajectory};

/// Physical values, one per injection point, in scenario order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectionVector {
    pub values: Vec<f64>,
}

/// Affine map from `[-1, 1]` onto each point's bounds; raw values outside
/// the unit interval saturate.
pub fn map_action(raw: &[f64], points: &[InjectionPoint]) -> Result<InjectionVector> {
    if raw.len() != points.len() {
        return Err(Error::Contract(format!(
            "action has {} entries for {} injection points",
            raw.len(),
            points.len()
        )));
    }
    let values = raw
        .iter()
        .zip(points)
        .map(|(&a, p)| {
            // NaN maps to the midpoint rather than escaping the bounds.
            let a = if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) };
            if a == -1.0 {
                p.lo
            } else if a == 1.0 {
                p.hi
            } else {
                p.lo + (a + 1.0) / 2.0 * (p.hi - p.lo)
            }
        })
        .collect();
    Ok(InjectionVector { values })
}

/// Route physical injection values to the controller inputs they replace or
/// perturb.
pub fn route_injections(
    inj: &InjectionVector,
    points: &[InjectionPoint],
    case: &NetworkCase,
) -> Result<Vec<MachineInputs>> {
    let mut inputs = vec![MachineInputs::default(); case.machines.len()];
    for (p, &v) in points.iter().zip(&inj.values) {
        let k = case
            .machine_index(p.machine)
            .ok_or_else(|| Error::Config(format!("no machine {}", p.machine)))?;
        let slot = &mut inputs[k];
        match p.kind {
            InjectionKind::GovernorFreqMeasurement => slot.governor_speed = Some(v / case.freq_hz),
            InjectionKind::GovernorFreqReference => slot.governor_reference = Some(v / case.freq_hz),
            InjectionKind::AvrVoltageMeasurement => slot.avr_voltage = Some(v),
            InjectionKind::PssOutputSignal => slot.pss += v,
        }
    }
    Ok(inputs)
}

/// Local features of every observed machine, ascending by id:
/// `[V - 1 (voltage-capable points only), f - f_nominal, rocof]`, followed by
/// the elapsed fraction of the episode.
pub fn build_observation(meas: &Measurements, scenario: &Scenario, case: &NetworkCase, time_fraction: f64) -> Vec<f64> {
    let mut obs = Vec::with_capacity(scenario.observation_dim());
    for id in scenario.observed_machines() {
        let k = case.machine_index(id).expect("validated scenario");
        if scenario.observes_voltage(id) {
            obs.push(meas.machine_v[k] - 1.0);
        }
        obs.push(meas.freq_hz[k] - case.freq_hz);
        obs.push(meas.rocof_hzps[k]);
    }
    obs.push(time_fraction);
    obs
}

/// `sum_g gamma_rocof * rocof_g^2 + gamma_trip * trip_g` over every generator.
pub fn compute_reward(meas: &Measurements, report: &TripReport, gamma_rocof: f64, gamma_trip: f64) -> f64 {
    let mut r = 0.0;
    for (g, rocof) in meas.rocof_hzps.iter().enumerate() {
        r += gamma_rocof * rocof * rocof;
        if report.generators.get(g).is_some_and(GeneratorTrip::tripped) {
            r += gamma_trip;
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepInfo {
    pub trips: TripReport,
    pub measurements: Measurements,
    pub injections: InjectionVector,
    /// Reason the simulation collapsed during this step, if it did.
    pub collapse: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Episodic environment over one scenario.
#[derive(Debug, Clone)]
pub struct AttackEnv {
    scenario: Scenario,
    case: NetworkCase,
    sim: Simulator,
    step: usize,
    done: bool,
    started: bool,
    seed: u64,
    /// Generators disconnected so far this episode.
    latched: Vec<bool>,
    episode_trips: TripReport,
    recording: bool,
    trajectory: Option<Trajectory>,
}

impl AttackEnv {
    pub fn new(scenario: Scenario, case: NetworkCase) -> Result<Self> {
        scenario.validate(&case)?;
        let sim = Simulator::new(&case, scenario.sim_config())?;
        let n = case.machines.len();
        Ok(AttackEnv {
            scenario,
            case,
            sim,
            step: 0,
            done: false,
            started: false,
            seed: 0,
            latched: vec![false; n],
            episode_trips: TripReport::default(),
            recording: false,
            trajectory: None,
        })
    }

    /// Environment on the bundled two-area case.
    pub fn bundled(scenario: Scenario) -> Result<Self> {
        Self::new(scenario, NetworkCase::kundur())
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn case(&self) -> &NetworkCase {
        &self.case
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn observation_dim(&self) -> usize {
        self.scenario.observation_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.scenario.action_dim()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn relay_settings(&self) -> &RelaySettings {
        &self.scenario.relay
    }

    /// Record a trajectory row per step from the next reset on.
    pub fn set_recording(&mut self, on: bool) {
        self.recording = on;
    }

    pub fn trajectory(&self) -> Option<&Trajectory> {
        self.trajectory.as_ref()
    }

    pub fn take_trajectory(&mut self) -> Option<Trajectory> {
        self.trajectory.take()
    }

    /// Relay outcomes accumulated over the current episode.
    pub fn episode_trips(&self) -> &TripReport {
        &self.episode_trips
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Restore the equilibrium and return the initial observation. The plant
    /// is deterministic; `seed` is kept for bookkeeping.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.seed = seed;
        self.sim.reset();
        self.step = 0;
        self.done = false;
        self.started = true;
        self.latched.fill(false);
        let n = self.case.machines.len();
        self.episode_trips = TripReport {
            generators: vec![GeneratorTrip::default(); n],
        };
        self.trajectory = self
            .recording
            .then(|| Trajectory::new(&self.case, self.scenario.injection_names()));
        build_observation(self.sim.measurements(), &self.scenario, &self.case, 0.0)
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if !self.started {
            return Err(Error::Contract("step called before reset".into()));
        }
        if self.done {
            return Err(Error::Contract("step called after the episode ended".into()));
        }
        let injections = map_action(action, &self.scenario.injection)?;
        let inputs = route_injections(&injections, &self.scenario.injection, &self.case)?;
        self.step += 1;
        let n_steps = self.scenario.n_steps();

        let (meas, collapse) = match self.sim.integrate_window(&inputs) {
            Ok(m) => (m, None),
            Err(e @ Error::Collapse { .. }) => (self.sim.measurements().clone(), Some(e.to_string())),
            Err(e) => {
                self.done = true;
                return Err(e);
            }
        };

        let (report, reward) = if collapse.is_some() {
            // A collapsed grid counts as every generator tripping.
            let generators = (0..self.case.machines.len())
                .map(|_| GeneratorTrip {
                    causes: vec![TripCause::Voltage],
                    first_trip_time: Some(self.sim.state().time),
                })
                .collect();
            let report = TripReport { generators };
            let reward = self.scenario.gamma_trip * report.count() as f64;
            (report, reward)
        } else {
            let mut report = evaluate_relays(&meas, &self.scenario.relay);
            if !self.scenario.suppress_trips {
                for (k, g) in report.generators.iter_mut().enumerate() {
                    if self.latched[k] && !g.tripped() {
                        // Latched trips keep counting for the rest of the episode.
                        g.causes = self.episode_trips.generators[k].causes.clone();
                    }
                }
            }
            let reward = compute_reward(&meas, &report, self.scenario.gamma_rocof, self.scenario.gamma_trip);
            (report, reward)
        };
        self.episode_trips.merge(&report);

        let mut collapse = collapse;
        if collapse.is_none() && !self.scenario.suppress_trips {
            let fresh: Vec<GeneratorTrip> = report
                .generators
                .iter()
                .zip(&self.latched)
                .map(|(g, &l)| if l { GeneratorTrip::default() } else { g.clone() })
                .collect();
            for (k, g) in fresh.iter().enumerate() {
                self.latched[k] |= g.tripped();
            }
            if let Err(e) = apply_trips(&mut self.sim, &TripReport { generators: fresh }, false) {
                if !e.is_collapse() {
                    self.done = true;
                    return Err(e);
                }
                collapse = Some(e.to_string());
            }
        }

        let done = collapse.is_some() || self.step >= n_steps;
        self.done = done;
        let meas = if collapse.is_none() { self.sim.measurements().clone() } else { meas };
        let observation = build_observation(&meas, &self.scenario, &self.case, self.step as f64 / n_steps as f64);
        if let Some(t) = &mut self.trajectory {
            t.push(Some(self.sim.state().clone()), meas.clone(), injections.values.clone());
        }
        Ok(StepResult {
            observation,
            reward,
            done,
            info: StepInfo {
                trips: report,
                measurements: meas,
                injections,
                collapse,
            },
        })
    }

    /// End the episode; further steps need a reset.
    pub fn close(&mut self) {
        self.done = true;
        self.started = false;
    }
}
