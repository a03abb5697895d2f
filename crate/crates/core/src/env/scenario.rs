use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NetworkCase;
use crate::protection::RelaySettings;
use crate::sim::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionKind {
    /// Replaces the speed signal seen by the governor. Bounds in Hz.
    GovernorFreqMeasurement,
    /// Replaces the governor speed reference. Bounds in Hz.
    GovernorFreqReference,
    /// Replaces the terminal voltage seen by the voltage regulator. Bounds in pu.
    AvrVoltageMeasurement,
    /// Added at the voltage regulator summing junction. Bounds in pu.
    PssOutputSignal,
}

impl InjectionKind {
    pub fn is_frequency(self) -> bool {
        matches!(self, Self::GovernorFreqMeasurement | Self::GovernorFreqReference)
    }

    /// Whether an agent holding this point can observe terminal voltage.
    pub fn is_voltage(self) -> bool {
        !self.is_frequency()
    }

    fn tag(self) -> &'static str {
        match self {
            Self::GovernorFreqMeasurement => "gov_meas",
            Self::GovernorFreqReference => "gov_ref",
            Self::AvrVoltageMeasurement => "avr_meas",
            Self::PssOutputSignal => "pss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionPoint {
    pub kind: InjectionKind,
    /// Machine id as listed in the case.
    pub machine: usize,
    pub lo: f64,
    pub hi: f64,
}

impl InjectionPoint {
    pub fn name(&self) -> String {
        format!("{}_G{}", self.kind.tag(), self.machine)
    }
}

fn default_episode() -> f64 {
    20.0
}
fn default_window() -> f64 {
    0.2
}
fn default_step() -> f64 {
    0.01
}
fn default_gamma_rocof() -> f64 {
    1.0
}
fn default_gamma_trip() -> f64 {
    5.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_episode")]
    pub episode_s: f64,
    #[serde(default = "default_window")]
    pub window_s: f64,
    /// Internal integration step, s.
    #[serde(default = "default_step")]
    pub step_s: f64,
    /// Reward weight on squared ROCOF, s/Hz.
    #[serde(default = "default_gamma_rocof")]
    pub gamma_rocof: f64,
    /// Reward per tripped generator per step.
    #[serde(default = "default_gamma_trip")]
    pub gamma_trip: f64,
    #[serde(default = "default_true")]
    pub suppress_trips: bool,
    #[serde(default)]
    pub relay: RelaySettings,
    pub injection: Vec<InjectionPoint>,
}

const BUNDLED: [(&str, &str); 6] = [
    ("gov-G1-narrow", include_str!("../../data/scenarios/gov-G1-narrow.toml")),
    ("gov-G1-wide", include_str!("../../data/scenarios/gov-G1-wide.toml")),
    ("gov-G1G3", include_str!("../../data/scenarios/gov-G1G3.toml")),
    ("gov+avr-G1", include_str!("../../data/scenarios/gov+avr-G1.toml")),
    ("avr-G1", include_str!("../../data/scenarios/avr-G1.toml")),
    ("avr-G1G3", include_str!("../../data/scenarios/avr-G1G3.toml")),
];

impl Scenario {
    pub fn bundled_names() -> Vec<&'static str> {
        BUNDLED.iter().map(|(n, _)| *n).collect()
    }

    pub fn bundled(name: &str) -> Result<Scenario> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Config(format!("unknown scenario {name:?}; bundled: {}", Self::bundled_names().join(", "))))?;
        Self::from_toml_str(text)
    }

    pub fn catalog() -> Vec<Scenario> {
        BUNDLED
            .iter()
            .map(|(_, t)| Self::from_toml_str(t).expect("bundled scenario parses"))
            .collect()
    }

    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))
    }

    /// A bundled name or a path to a scenario file.
    pub fn resolve(name_or_path: &str) -> Result<Scenario> {
        if Self::bundled_names().contains(&name_or_path) {
            Self::bundled(name_or_path)
        } else if Path::new(name_or_path).exists() {
            Self::load(name_or_path)
        } else {
            Err(Error::Config(format!(
                "scenario {name_or_path:?} is neither a bundled name ({}) nor a file",
                Self::bundled_names().join(", ")
            )))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn n_steps(&self) -> usize {
        (self.episode_s / self.window_s).round() as usize
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            step: self.step_s,
            window: self.window_s,
            ..SimConfig::default()
        }
    }

    pub fn injection_names(&self) -> Vec<String> {
        self.injection.iter().map(InjectionPoint::name).collect()
    }

    /// Machine ids the agent observes, ascending.
    pub fn observed_machines(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.injection.iter().map(|p| p.machine).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn observes_voltage(&self, machine: usize) -> bool {
        self.injection.iter().any(|p| p.machine == machine && p.kind.is_voltage())
    }

    pub fn observation_dim(&self) -> usize {
        self.observed_machines()
            .iter()
            .map(|&m| 2 + self.observes_voltage(m) as usize)
            .sum::<usize>()
            + 1
    }

    pub fn action_dim(&self) -> usize {
        self.injection.len()
    }

    pub fn validate(&self, case: &NetworkCase) -> Result<()> {
        let err = |m: String| Err(Error::Config(format!("scenario {}: {m}", self.name)));
        if self.name.trim().is_empty() {
            return err("empty name".into());
        }
        if self.injection.is_empty() {
            return err("no injection points".into());
        }
        let ratio = self.episode_s / self.window_s;
        if !(self.episode_s > 0.0 && self.window_s > 0.0) || (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return err(format!("episode {} s is not a multiple of window {} s", self.episode_s, self.window_s));
        }
        self.sim_config().steps_per_window()?;
        if !(self.gamma_rocof.is_finite() && self.gamma_trip.is_finite() && self.gamma_rocof >= 0.0 && self.gamma_trip >= 0.0) {
            return err("reward weights must be finite and non-negative".into());
        }
        self.relay.validate(case.freq_hz)?;
        for (i, p) in self.injection.iter().enumerate() {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo < p.hi) {
                return err(format!("{}: bounds [{}, {}] must satisfy lo < hi", p.name(), p.lo, p.hi));
            }
            if case.machine_index(p.machine).is_none() {
                return err(format!("{}: no machine {}", p.name(), p.machine));
            }
            let controller_present = match p.kind {
                InjectionKind::GovernorFreqMeasurement | InjectionKind::GovernorFreqReference => case.governor_for(p.machine).is_some(),
                _ => case.exciter_for(p.machine).is_some(),
            };
            if !controller_present {
                return err(format!("{}: machine {} has no matching controller", p.name(), p.machine));
            }
            let band = match p.kind {
                k if k.is_frequency() => Some((self.relay.w_low, self.relay.w_high)),
                InjectionKind::AvrVoltageMeasurement => Some((self.relay.v_low, self.relay.v_high)),
                _ => None,
            };
            if let Some((lo, hi)) = band {
                if p.lo < lo || p.hi > hi {
                    return err(format!("{}: bounds [{}, {}] leave relay band [{lo}, {hi}]", p.name(), p.lo, p.hi));
                }
            }
            if self.injection[..i].iter().any(|q| q.kind == p.kind && q.machine == p.machine) {
                return err(format!("duplicate injection point {}", p.name()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_valid() {
        let case = NetworkCase::kundur();
        let all = Scenario::catalog();
        assert_eq!(all.len(), 6);
        for s in &all {
            s.validate(&case).unwrap();
            assert_eq!(s.n_steps(), 100);
            assert!(s.suppress_trips);
        }
    }

    #[test]
    fn observation_dimensions() {
        assert_eq!(Scenario::bundled("gov-G1-wide").unwrap().observation_dim(), 3);
        assert_eq!(Scenario::bundled("avr-G1").unwrap().observation_dim(), 4);
        assert_eq!(Scenario::bundled("gov-G1G3").unwrap().observation_dim(), 5);
        assert_eq!(Scenario::bundled("gov+avr-G1").unwrap().observation_dim(), 4);
        assert_eq!(Scenario::bundled("avr-G1G3").unwrap().observation_dim(), 7);
    }

    #[test]
    fn bounds_must_stay_inside_relay_band() {
        let case = NetworkCase::kundur();
        let mut s = Scenario::bundled("gov-G1-wide").unwrap();
        s.injection[0].lo = 57.0;
        assert!(s.validate(&case).is_err());
        let mut s = Scenario::bundled("avr-G1").unwrap();
        s.injection[0].hi = 1.35;
        assert!(s.validate(&case).is_err());
    }

    #[test]
    fn rejects_bad_structure() {
        let case = NetworkCase::kundur();
        let mut s = Scenario::bundled("gov-G1G3").unwrap();
        s.injection[1].machine = 1;
        assert!(s.validate(&case).is_err());
        let mut s = Scenario::bundled("gov-G1-wide").unwrap();
        s.injection[0].machine = 9;
        assert!(s.validate(&case).is_err());
        let mut s = Scenario::bundled("gov-G1-wide").unwrap();
        s.episode_s = 20.1;
        assert!(s.validate(&case).is_err());
        assert!(Scenario::from_toml_str("name = \"x\"\nbogus = 1\ninjection = []").is_err());
    }

    #[test]
    fn toml_round_trip() {
        for s in Scenario::catalog() {
            assert_eq!(Scenario::from_toml_str(&s.to_toml()).unwrap(), s);
        }
    }
}
