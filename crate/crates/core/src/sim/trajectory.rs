//! Per-window record of an episode and its CSV form.
//!
//! Column order: `time_s`, one `V_bus<id>_pu` per bus, one `freq_G<id>_Hz`
//! per machine, one `rocof_G<id>_Hzps` per machine, then one `inj_<name>`
//! per injection point, all in case order.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use super::measure::Measurements;
use super::plant::DynamicState;
use crate::error::{Error, Result};
use crate::model::NetworkCase;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub time: f64,
    #[serde(skip)]
    pub state: Option<DynamicState>,
    pub measurements: Measurements,
    pub injections: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub bus_ids: Vec<usize>,
    pub machine_ids: Vec<usize>,
    /// Bus position (into `bus_ids`) of each machine's terminal.
    pub machine_bus: Vec<usize>,
    pub machine_area: Vec<u32>,
    pub nominal_hz: f64,
    pub injection_names: Vec<String>,
    pub rows: Vec<TrajectoryRow>,
}

impl Trajectory {
    pub fn new(case: &NetworkCase, injection_names: Vec<String>) -> Self {
        Trajectory {
            bus_ids: case.buses.iter().map(|b| b.id).collect(),
            machine_ids: case.machines.iter().map(|m| m.id).collect(),
            machine_bus: case.machines.iter().map(|m| case.bus_index(m.bus).expect("validated")).collect(),
            machine_area: case.machine_areas(),
            nominal_hz: case.freq_hz,
            injection_names,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, state: Option<DynamicState>, measurements: Measurements, injections: Vec<f64>) {
        self.rows.push(TrajectoryRow {
            time: measurements.time,
            state,
            measurements,
            injections,
        });
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["time_s".to_string()];
        h.extend(self.bus_ids.iter().map(|id| format!("V_bus{id}_pu")));
        h.extend(self.machine_ids.iter().map(|id| format!("freq_G{id}_Hz")));
        h.extend(self.machine_ids.iter().map(|id| format!("rocof_G{id}_Hzps")));
        h.extend(self.injection_names.iter().map(|n| format!("inj_{n}")));
        h
    }

    /// Series of one injection channel.
    pub fn injection_series(&self, channel: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.injections[channel]).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in &self.rows {
            let m = &r.measurements;
            let rec: Vec<String> = std::iter::once(r.time)
                .chain(m.bus_v.iter().copied())
                .chain(m.freq_hz.iter().copied())
                .chain(m.rocof_hzps.iter().copied())
                .chain(r.injections.iter().copied())
                .map(|v| format!("{v:?}"))
                .collect();
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Read a trajectory written by [`Trajectory::write_csv`]. Machine terminals
    /// and areas are taken from `case`; bus and machine columns must match it.
    pub fn read_csv<R: Read>(input: R, case: &NetworkCase, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let mut traj = Trajectory::new(case, Vec::new());
        let fixed = traj.header();
        if header.len() < fixed.len() || header[..fixed.len()] != fixed[..] {
            return Err(parse_err(1, format!("expected leading columns {}", fixed.join(","))));
        }
        for h in &header[fixed.len()..] {
            match h.strip_prefix("inj_") {
                Some(name) => traj.injection_names.push(name.to_string()),
                None => return Err(parse_err(1, format!("unexpected column {h:?}"))),
            }
        }
        let (nb, nm) = (traj.bus_ids.len(), traj.machine_ids.len());
        for (i, rec) in rd.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            if rec.len() != header.len() {
                return Err(parse_err(line, format!("expected {} fields, found {}", header.len(), rec.len())));
            }
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|_| parse_err(line, format!("not a number: {s:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            let bus_v = vals[1..1 + nb].to_vec();
            let m = Measurements {
                time: vals[0],
                machine_v: traj.machine_bus.iter().map(|&b| bus_v[b]).collect(),
                freq_hz: vals[1 + nb..1 + nb + nm].to_vec(),
                rocof_hzps: vals[1 + nb + nm..1 + nb + 2 * nm].to_vec(),
                bus_v,
            };
            traj.push(None, m, vals[1 + nb + 2 * nm..].to_vec());
        }
        Ok(traj)
    }

    pub fn load_csv(path: impl AsRef<Path>, case: &NetworkCase) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f), case, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let case = NetworkCase::kundur();
        let mut t = Trajectory::new(&case, vec!["gov_meas_G1".into()]);
        for k in 1..=3 {
            let m = Measurements {
                time: 0.2 * k as f64,
                machine_v: vec![1.0; 4],
                freq_hz: vec![60.0 + 0.01 * k as f64, 60.0, 60.0, 60.0],
                rocof_hzps: vec![0.05, 0.0, 0.0, -0.1],
                bus_v: (0..10).map(|i| 0.95 + 0.005 * i as f64).collect(),
            };
            t.push(None, m, vec![60.5]);
        }
        t
    }

    #[test]
    fn header_order_is_stable() {
        let h = sample().header();
        assert_eq!(h[0], "time_s");
        assert_eq!(h[1], "V_bus1_pu");
        assert_eq!(h[11], "freq_G1_Hz");
        assert_eq!(h[15], "rocof_G1_Hzps");
        assert_eq!(h[19], "inj_gov_meas_G1");
        assert_eq!(h.len(), 20);
    }

    #[test]
    fn csv_round_trip() {
        let case = NetworkCase::kundur();
        let t = sample();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(&buf[..], &case, Path::new("mem.csv")).unwrap();
        assert_eq!(back.rows.len(), 3);
        for (a, b) in t.rows.iter().zip(&back.rows) {
            assert_eq!(a.measurements.freq_hz, b.measurements.freq_hz);
            assert_eq!(a.measurements.bus_v, b.measurements.bus_v);
            assert_eq!(a.injections, b.injections);
        }
        // Terminal voltages come from the machine buses (1..4).
        assert_eq!(back.rows[0].measurements.machine_v[2], back.rows[0].measurements.bus_v[2]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let case = NetworkCase::kundur();
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("60.5", "abc", 2);
        let err = Trajectory::read_csv(text.as_bytes(), &case, Path::new("t.csv")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
