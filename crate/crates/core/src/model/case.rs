//! Static network data: buses, branches and the dynamic-device parameter sets.
//!
//! A case file stores machine and governor ratings on the machine base
//! (`sn_mva`); [`NetworkCase`] always holds system-base values.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const KUNDUR_FULL: &str = include_str!("../../data/kundur_full.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub base_kv: f64,
    #[serde(default = "default_area")]
    pub area: u32,
    pub kind: BusKind,
    /// Voltage set-point for slack and PV buses.
    #[serde(default = "one")]
    pub v_set: f64,
    /// Angle of the slack bus.
    #[serde(default)]
    pub angle: f64,
    /// Scheduled generation (PV) or initial guess (slack).
    #[serde(default)]
    pub p_gen: f64,
    #[serde(default)]
    pub p_load: f64,
    #[serde(default)]
    pub q_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, split evenly between the ends.
    #[serde(default)]
    pub b: f64,
}

/// Round-rotor machine constants (system base once loaded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineParams {
    pub id: usize,
    pub bus: usize,
    pub xd: f64,
    pub xq: f64,
    pub xd_t: f64,
    pub xq_t: f64,
    pub xd_st: f64,
    pub xq_st: f64,
    pub xl: f64,
    #[serde(default)]
    pub ra: f64,
    pub td0_t: f64,
    pub tq0_t: f64,
    pub td0_st: f64,
    pub tq0_st: f64,
    /// Inertia constant H in seconds.
    pub h: f64,
    #[serde(default)]
    pub d: f64,
}

/// Steam turbine-governor (TGOV1 structure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernorParams {
    pub machine: usize,
    pub r: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub vmax: f64,
    pub vmin: f64,
    #[serde(default)]
    pub dt: f64,
    #[serde(default = "one")]
    pub w_ref: f64,
    /// Load reference; filled in from the power-flow dispatch at initialization.
    #[serde(default)]
    pub p_ref: f64,
}

/// DC exciter (EXDC2 structure) with sensing lag and lead-lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExciterParams {
    pub machine: usize,
    pub tr: f64,
    pub ka: f64,
    pub ta: f64,
    #[serde(default = "one")]
    pub tc: f64,
    #[serde(default = "one")]
    pub tb: f64,
    pub ke: f64,
    pub te: f64,
    pub kf: f64,
    pub tf: f64,
    pub vrmax: f64,
    pub vrmin: f64,
    #[serde(default)]
    pub e1: f64,
    #[serde(default)]
    pub se1: f64,
    #[serde(default = "one")]
    pub e2: f64,
    #[serde(default = "one")]
    pub se2: f64,
    /// Voltage set-point; back-solved at initialization.
    #[serde(default = "one")]
    pub v_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkCase {
    pub name: String,
    pub base_mva: f64,
    pub freq_hz: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub machines: Vec<MachineParams>,
    pub governors: Vec<GovernorParams>,
    pub exciters: Vec<ExciterParams>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    name: String,
    base_mva: f64,
    #[serde(default = "sixty")]
    freq_hz: f64,
    #[serde(rename = "bus")]
    buses: Vec<Bus>,
    #[serde(rename = "branch", default)]
    branches: Vec<Branch>,
    #[serde(rename = "machine", default)]
    machines: Vec<MachineEntry>,
    #[serde(rename = "governor", default)]
    governors: Vec<GovernorParams>,
    #[serde(rename = "exciter", default)]
    exciters: Vec<ExciterParams>,
}

#[derive(Debug, Deserialize)]
struct MachineEntry {
    sn_mva: f64,
    #[serde(flatten)]
    params: MachineParams,
}

fn one() -> f64 {
    1.0
}

fn sixty() -> f64 {
    60.0
}

fn default_area() -> u32 {
    1
}

impl NetworkCase {
    /// The bundled two-area case.
    pub fn kundur() -> Self {
        Self::from_toml_str(KUNDUR_FULL).expect("bundled case is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: CaseFile = toml::from_str(text).map_err(|e| Error::Case(e.to_string()))?;
        let base = file.base_mva;
        if !(base > 0.0) {
            return Err(Error::Case("base_mva must be positive".into()));
        }

        let mut ratings = HashMap::new();
        let machines: Vec<MachineParams> = file
            .machines
            .into_iter()
            .map(|entry| {
                ratings.insert(entry.params.id, entry.sn_mva);
                entry.params.into_system_base(entry.sn_mva, base)
            })
            .collect();

        let governors = file
            .governors
            .into_iter()
            .map(|g| {
                let sn = ratings.get(&g.machine).copied().ok_or_else(|| {
                    Error::Case(format!("governor references unknown machine {}", g.machine))
                })?;
                Ok(g.into_system_base(sn, base))
            })
            .collect::<Result<Vec<_>>>()?;

        let case = NetworkCase {
            name: file.name,
            base_mva: base,
            freq_hz: file.freq_hz,
            buses: file.buses,
            branches: file.branches,
            machines,
            governors,
            exciters: file.exciters,
        };
        case.validate()?;
        Ok(case)
    }

    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn machine_index(&self, id: usize) -> Option<usize> {
        self.machines.iter().position(|m| m.id == id)
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated case has a slack bus")
    }

    pub fn governor_for(&self, machine_id: usize) -> Option<&GovernorParams> {
        self.governors.iter().find(|g| g.machine == machine_id)
    }

    pub fn exciter_for(&self, machine_id: usize) -> Option<&ExciterParams> {
        self.exciters.iter().find(|e| e.machine == machine_id)
    }

    /// Area of the bus each machine is connected to.
    pub fn machine_areas(&self) -> Vec<u32> {
        self.machines
            .iter()
            .map(|m| self.buses[self.bus_index(m.bus).unwrap()].area)
            .collect()
    }

    pub fn omega_base(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.freq_hz
    }

    pub fn validate(&self) -> Result<()> {
        let ids: BTreeSet<usize> = self.buses.iter().map(|b| b.id).collect();
        if ids.len() != self.buses.len() {
            return Err(Error::Case("duplicate bus id".into()));
        }
        let slacks = self.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slacks != 1 {
            return Err(Error::Case(format!("expected exactly one slack bus, found {slacks}")));
        }
        for br in &self.branches {
            if !ids.contains(&br.from) || !ids.contains(&br.to) {
                return Err(Error::Case(format!("branch {}-{} references a missing bus", br.from, br.to)));
            }
            if br.x == 0.0 || !br.x.is_finite() {
                return Err(Error::Case(format!("branch {}-{} has zero reactance", br.from, br.to)));
            }
        }
        if !self.is_connected() {
            return Err(Error::Case("branch graph is not connected".into()));
        }

        let mut seen = BTreeSet::new();
        for m in &self.machines {
            if !seen.insert(m.id) {
                return Err(Error::Case(format!("duplicate machine id {}", m.id)));
            }
            let bus = self
                .bus_index(m.bus)
                .ok_or_else(|| Error::Case(format!("machine {} references missing bus {}", m.id, m.bus)))?;
            if self.buses[bus].kind == BusKind::Pq {
                return Err(Error::Case(format!("machine {} sits on PQ bus {}", m.id, m.bus)));
            }
            m.validate()?;
        }
        for g in &self.governors {
            if self.machine_index(g.machine).is_none() {
                return Err(Error::Case(format!("governor references unknown machine {}", g.machine)));
            }
            g.validate()?;
        }
        for e in &self.exciters {
            if self.machine_index(e.machine).is_none() {
                return Err(Error::Case(format!("exciter references unknown machine {}", e.machine)));
            }
            e.validate()?;
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        if self.buses.is_empty() {
            return false;
        }
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for br in &self.branches {
            adj.entry(br.from).or_default().push(br.to);
            adj.entry(br.to).or_default().push(br.from);
        }
        let mut visited = BTreeSet::new();
        let mut queue = VecDeque::from([self.buses[0].id]);
        while let Some(id) = queue.pop_front() {
            if visited.insert(id) {
                if let Some(next) = adj.get(&id) {
                    queue.extend(next.iter().copied());
                }
            }
        }
        visited.len() == self.buses.len()
    }
}

impl MachineParams {
    fn into_system_base(mut self, sn_mva: f64, base_mva: f64) -> Self {
        let z = base_mva / sn_mva;
        for x in [
            &mut self.xd,
            &mut self.xq,
            &mut self.xd_t,
            &mut self.xq_t,
            &mut self.xd_st,
            &mut self.xq_st,
            &mut self.xl,
            &mut self.ra,
        ] {
            *x *= z;
        }
        self.h /= z;
        self.d /= z;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |a: f64, b: f64, c: f64| a >= b && b >= c && c > self.xl && self.xl >= 0.0;
        if !ordered(self.xd, self.xd_t, self.xd_st) || !ordered(self.xq, self.xq_t, self.xq_st) {
            return Err(Error::Case(format!(
                "machine {}: reactances must satisfy X >= X' >= X'' > Xl >= 0",
                self.id
            )));
        }
        let tcs = [self.td0_t, self.tq0_t, self.td0_st, self.tq0_st];
        if tcs.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Case(format!("machine {}: time constants must be positive", self.id)));
        }
        if !(self.h > 0.0) {
            return Err(Error::Case(format!("machine {}: H must be positive", self.id)));
        }
        Ok(())
    }
}

impl GovernorParams {
    fn into_system_base(mut self, sn_mva: f64, base_mva: f64) -> Self {
        let s = sn_mva / base_mva;
        self.r /= s;
        self.vmax *= s;
        self.vmin *= s;
        self.dt *= s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) {
            return Err(Error::Case(format!("governor of machine {}: R must be positive", self.machine)));
        }
        if !(self.vmin < self.vmax) {
            return Err(Error::Case(format!("governor of machine {}: VMIN must be below VMAX", self.machine)));
        }
        if !(self.t1 > 0.0 && self.t3 > 0.0) {
            return Err(Error::Case(format!("governor of machine {}: T1 and T3 must be positive", self.machine)));
        }
        Ok(())
    }
}

impl ExciterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ta > 0.0 && self.te > 0.0 && self.tf > 0.0 && self.tr > 0.0) {
            return Err(Error::Case(format!(
                "exciter of machine {}: TR, TA, TE, TF must be positive",
                self.machine
            )));
        }
        if self.tb < 0.0 {
            return Err(Error::Case(format!("exciter of machine {}: TB must not be negative", self.machine)));
        }
        if !(self.vrmin < self.vrmax) {
            return Err(Error::Case(format!("exciter of machine {}: VRMIN must be below VRMAX", self.machine)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_case_loads() {
        let case = NetworkCase::kundur();
        assert_eq!(case.buses.len(), 10);
        assert_eq!(case.branches.len(), 15);
        assert_eq!(case.machines.len(), 4);
        assert_eq!(case.governors.len(), 4);
        assert_eq!(case.exciters.len(), 4);
        assert_eq!(case.machine_areas(), vec![1, 1, 2, 2]);
    }

    #[test]
    fn machine_base_conversion() {
        let case = NetworkCase::kundur();
        let g1 = &case.machines[0];
        // 900 MVA machines on a 100 MVA base.
        assert!((g1.xd - 1.8 / 9.0).abs() < 1e-15);
        assert!((g1.h - 6.5 * 9.0).abs() < 1e-12);
        let gov = &case.governors[0];
        assert!((gov.r - 0.05 / 9.0).abs() < 1e-15);
        assert!((gov.vmin - 3.6).abs() < 1e-12);
        assert!((gov.vmax - 297.0).abs() < 1e-12);
    }

    fn two_bus() -> String {
        r#"
name = "t"
base_mva = 100.0
[[bus]]
id = 1
kind = "slack"
[[bus]]
id = 2
kind = "pq"
[[branch]]
from = 1
to = 2
r = 0.0
x = 0.1
"#
        .to_string()
    }

    #[test]
    fn rejects_two_slacks() {
        let text = two_bus().replace("kind = \"pq\"", "kind = \"slack\"");
        assert!(matches!(NetworkCase::from_toml_str(&text), Err(Error::Case(_))));
    }

    #[test]
    fn rejects_zero_reactance() {
        let text = two_bus().replace("x = 0.1", "x = 0.0");
        assert!(NetworkCase::from_toml_str(&text).is_err());
    }

    #[test]
    fn rejects_disconnected_graph() {
        let text = format!("{}\n[[bus]]\nid = 3\nkind = \"pq\"\n", two_bus());
        let err = NetworkCase::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("not connected"));
    }

    #[test]
    fn rejects_bad_machine_ordering() {
        let mut case = NetworkCase::kundur();
        case.machines[0].xd_st = case.machines[0].xd_t * 2.0;
        assert!(case.validate().is_err());
        let mut case = NetworkCase::kundur();
        case.machines[1].bus = 99;
        assert!(case.validate().is_err());
    }
}
