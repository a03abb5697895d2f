use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::protection::{evaluate_relays, RelaySettings, TripCause};
use crate::sim::Trajectory;

/// First time each relay function would have operated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RelayTimes {
    pub voltage: Option<f64>,
    pub frequency: Option<f64>,
    pub rocof: Option<f64>,
}

impl RelayTimes {
    pub fn first(&self) -> Option<f64> {
        [self.voltage, self.frequency, self.rocof].into_iter().flatten().reduce(f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMetrics {
    pub machine: usize,
    pub area: u32,
    /// Largest |ROCOF|, Hz/s.
    pub peak_rocof_hzps: f64,
    /// Largest |f - nominal|, Hz.
    pub peak_freq_deviation_hz: f64,
    pub min_voltage_pu: f64,
    pub max_voltage_pu: f64,
    pub first_trip_s: RelayTimes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaMetrics {
    pub area: u32,
    pub peak_rocof_hzps: f64,
    /// First time any machine of the area exceeded the ROCOF limit.
    pub first_rocof_crossing_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rocof_limit_hzps: f64,
    pub duration_s: f64,
    pub peak_rocof_hzps: f64,
    pub generators: Vec<GeneratorMetrics>,
    pub areas: Vec<AreaMetrics>,
    /// Area whose ROCOF crossed the limit strictly first.
    pub fastest_area: Option<u32>,
}

impl MetricsReport {
    pub fn area(&self, area: u32) -> Option<&AreaMetrics> {
        self.areas.iter().find(|a| a.area == area)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

fn earliest(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Peak excursions and hypothetical relay operations over a trajectory.
pub fn trajectory_metrics(traj: &Trajectory, settings: &RelaySettings) -> MetricsReport {
    let nm = traj.machine_ids.len();
    let mut generators: Vec<GeneratorMetrics> = (0..nm)
        .map(|k| GeneratorMetrics {
            machine: traj.machine_ids[k],
            area: traj.machine_area[k],
            peak_rocof_hzps: 0.0,
            peak_freq_deviation_hz: 0.0,
            min_voltage_pu: f64::INFINITY,
            max_voltage_pu: f64::NEG_INFINITY,
            first_trip_s: RelayTimes::default(),
        })
        .collect();
    for row in &traj.rows {
        let m = &row.measurements;
        let report = evaluate_relays(m, settings);
        for (k, g) in generators.iter_mut().enumerate() {
            g.peak_rocof_hzps = g.peak_rocof_hzps.max(m.rocof_hzps[k].abs());
            g.peak_freq_deviation_hz = g.peak_freq_deviation_hz.max((m.freq_hz[k] - traj.nominal_hz).abs());
            g.min_voltage_pu = g.min_voltage_pu.min(m.machine_v[k]);
            g.max_voltage_pu = g.max_voltage_pu.max(m.machine_v[k]);
            for cause in &report.generators[k].causes {
                let slot = match cause {
                    TripCause::Voltage => &mut g.first_trip_s.voltage,
                    TripCause::Frequency => &mut g.first_trip_s.frequency,
                    TripCause::Rocof => &mut g.first_trip_s.rocof,
                };
                slot.get_or_insert(row.time);
            }
        }
    }
    if traj.rows.is_empty() {
        for g in &mut generators {
            g.min_voltage_pu = f64::NAN;
            g.max_voltage_pu = f64::NAN;
        }
    }

    let mut area_ids: Vec<u32> = traj.machine_area.clone();
    area_ids.sort_unstable();
    area_ids.dedup();
    let areas: Vec<AreaMetrics> = area_ids
        .iter()
        .map(|&area| {
            let members = generators.iter().filter(|g| g.area == area);
            AreaMetrics {
                area,
                peak_rocof_hzps: members.clone().map(|g| g.peak_rocof_hzps).fold(0.0, f64::max),
                first_rocof_crossing_s: members.map(|g| g.first_trip_s.rocof).fold(None, earliest),
            }
        })
        .collect();

    let crossings: Vec<(u32, f64)> = areas
        .iter()
        .filter_map(|a| a.first_rocof_crossing_s.map(|t| (a.area, t)))
        .collect();
    let fastest_area = crossings
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .filter(|best| crossings.iter().filter(|c| c.1 == best.1).count() == 1)
        .map(|c| c.0);

    MetricsReport {
        rocof_limit_hzps: settings.rocof_limit,
        duration_s: traj.rows.last().map_or(0.0, |r| r.time),
        peak_rocof_hzps: generators.iter().map(|g| g.peak_rocof_hzps).fold(0.0, f64::max),
        generators,
        areas,
        fastest_area,
    }
}
