use serde::{Deserialize, Serialize};

use super::plant::{DynamicState, Plant};

/// Sensor readings at the end of an action window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub time: f64,
    /// Terminal voltage of each machine, pu.
    pub machine_v: Vec<f64>,
    /// Machine frequency, Hz.
    pub freq_hz: Vec<f64>,
    /// Rate of change of frequency averaged over the last window, Hz/s.
    pub rocof_hzps: Vec<f64>,
    /// Voltage magnitude of every bus, pu.
    pub bus_v: Vec<f64>,
}

impl Measurements {
    /// Readings of `state` given the frequencies one window earlier.
    pub fn capture(plant: &Plant, state: &DynamicState, previous_freq: &[f64], window: f64, nominal_hz: f64) -> Self {
        let freq_hz: Vec<f64> = (0..plant.n_machines()).map(|k| nominal_hz * plant.speed(state, k)).collect();
        let rocof_hzps = freq_hz
            .iter()
            .zip(previous_freq)
            .map(|(f, f0)| (f - f0) / window)
            .collect();
        Measurements {
            time: state.time,
            machine_v: plant.slots.iter().map(|s| state.v[s.bus]).collect(),
            freq_hz,
            rocof_hzps,
            bus_v: state.v.clone(),
        }
    }

    /// Readings with zero ROCOF, used at the start of an episode.
    pub fn at_rest(plant: &Plant, state: &DynamicState, nominal_hz: f64) -> Self {
        let freq: Vec<f64> = (0..plant.n_machines()).map(|k| nominal_hz * plant.speed(state, k)).collect();
        Self::capture(plant, state, &freq, 1.0, nominal_hz)
    }

    pub fn n_machines(&self) -> usize {
        self.freq_hz.len()
    }

    pub fn is_finite(&self) -> bool {
        self.machine_v
            .iter()
            .chain(&self.freq_hz)
            .chain(&self.rocof_hzps)
            .chain(&self.bus_v)
            .all(|v| v.is_finite())
            && self.time.is_finite()
    }
}
