//! Generator protection: voltage, frequency and ROCOF relays.
//!
//! A reading trips only when strictly outside its band; a value sitting exactly
//! on a bound does not trip.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Measurements, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaySettings {
    pub v_low: f64,
    pub v_high: f64,
    /// Frequency band, Hz.
    pub w_low: f64,
    pub w_high: f64,
    /// ROCOF limit, Hz/s.
    pub rocof_limit: f64,
}

impl Default for RelaySettings {
    fn default() -> Self {
        RelaySettings {
            v_low: 0.7,
            v_high: 1.3,
            w_low: 57.4,
            w_high: 61.7,
            rocof_limit: 1.0,
        }
    }
}

impl RelaySettings {
    pub fn validate(&self, nominal_hz: f64) -> Result<()> {
        let all = [self.v_low, self.v_high, self.w_low, self.w_high, self.rocof_limit];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("relay settings must be finite".into()));
        }
        if !(self.v_low < self.v_high) {
            return Err(Error::Config(format!("v_low {} must be below v_high {}", self.v_low, self.v_high)));
        }
        if !(self.w_low < nominal_hz && nominal_hz < self.w_high) {
            return Err(Error::Config(format!(
                "frequency band [{}, {}] must contain {nominal_hz} Hz",
                self.w_low, self.w_high
            )));
        }
        if !(self.rocof_limit > 0.0) {
            return Err(Error::Config("rocof_limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripCause {
    Voltage,
    Frequency,
    Rocof,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTrip {
    pub causes: Vec<TripCause>,
    pub first_trip_time: Option<f64>,
}

impl GeneratorTrip {
    pub fn tripped(&self) -> bool {
        !self.causes.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TripReport {
    pub generators: Vec<GeneratorTrip>,
}

impl TripReport {
    pub fn trips(&self) -> Vec<bool> {
        self.generators.iter().map(GeneratorTrip::tripped).collect()
    }

    pub fn count(&self) -> usize {
        self.generators.iter().filter(|g| g.tripped()).count()
    }

    pub fn any(&self) -> bool {
        self.count() > 0
    }

    /// Fold a later report into an accumulated one, keeping the earliest
    /// trip time and the union of causes.
    pub fn merge(&mut self, later: &TripReport) {
        if self.generators.len() < later.generators.len() {
            self.generators.resize(later.generators.len(), GeneratorTrip::default());
        }
        for (acc, g) in self.generators.iter_mut().zip(&later.generators) {
            for c in &g.causes {
                if !acc.causes.contains(c) {
                    acc.causes.push(*c);
                }
            }
            acc.causes.sort();
            acc.first_trip_time = match (acc.first_trip_time, g.first_trip_time) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
        }
    }
}

fn outside(value: f64, lo: f64, hi: f64) -> bool {
    value < lo || value > hi
}

pub fn evaluate_relays(meas: &Measurements, settings: &RelaySettings) -> TripReport {
    let generators = (0..meas.n_machines())
        .map(|g| {
            let mut causes = Vec::new();
            if outside(meas.machine_v[g], settings.v_low, settings.v_high) {
                causes.push(TripCause::Voltage);
            }
            if outside(meas.freq_hz[g], settings.w_low, settings.w_high) {
                causes.push(TripCause::Frequency);
            }
            if meas.rocof_hzps[g].abs() > settings.rocof_limit {
                causes.push(TripCause::Rocof);
            }
            let first_trip_time = (!causes.is_empty()).then_some(meas.time);
            GeneratorTrip { causes, first_trip_time }
        })
        .collect();
    TripReport { generators }
}

/// Disconnect tripped machines unless tripping is suppressed. Disconnection
/// latches for the rest of the episode.
pub fn apply_trips(sim: &mut Simulator, report: &TripReport, suppression: bool) -> Result<()> {
    if suppression {
        return Ok(());
    }
    let tripped: Vec<usize> = report
        .generators
        .iter()
        .enumerate()
        .filter(|(_, g)| g.tripped())
        .map(|(k, _)| k)
        .collect();
    if tripped.is_empty() {
        return Ok(());
    }
    sim.disconnect(&tripped)
}
