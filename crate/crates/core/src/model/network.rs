//! Bus admittance matrix and the network current-balance residual.

use num_complex::Complex64;

use super::case::NetworkCase;
use crate::error::{Error, Result};

/// Dense bus admittance matrix. Cases here have a handful of buses, so a
/// dense row-major layout is both simpler and faster than a sparse one.
#[derive(Debug, Clone, PartialEq)]
pub struct Admittance {
    n: usize,
    y: Vec<Complex64>,
}

impl Admittance {
    /// Branches and line charging only.
    pub fn from_branches(case: &NetworkCase) -> Self {
        let n = case.buses.len();
        let mut y = vec![Complex64::new(0.0, 0.0); n * n];
        for br in &case.branches {
            let i = case.bus_index(br.from).expect("validated branch");
            let j = case.bus_index(br.to).expect("validated branch");
            let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
            let ysh = Complex64::new(0.0, br.b / 2.0);
            y[i * n + i] += ys + ysh;
            y[j * n + j] += ys + ysh;
            y[i * n + j] -= ys;
            y[j * n + i] -= ys;
        }
        Admittance { n, y }
    }

    /// Branches plus loads converted to constant impedance at the given bus
    /// voltage magnitudes: `Y_load = (P - jQ) / V^2`.
    pub fn with_constant_impedance_loads(case: &NetworkCase, v: &[f64]) -> Result<Self> {
        let mut adm = Self::from_branches(case);
        if v.len() != adm.n {
            return Err(Error::Shape {
                what: "load conversion voltages".into(),
                expected: adm.n,
                actual: v.len(),
            });
        }
        for (i, bus) in case.buses.iter().enumerate() {
            if bus.p_load != 0.0 || bus.q_load != 0.0 {
                if !(v[i] > 0.0) {
                    return Err(Error::Model(format!("bus {} has no voltage for load conversion", bus.id)));
                }
                adm.y[i * adm.n + i] += Complex64::new(bus.p_load, -bus.q_load) / (v[i] * v[i]);
            }
        }
        adm.check_structure(case)?;
        Ok(adm)
    }

    fn check_structure(&self, case: &NetworkCase) -> Result<()> {
        for i in 0..self.n {
            if self.y[i * self.n + i].norm() == 0.0 {
                return Err(Error::Model(format!("bus {} has no admittance to ground or neighbours", case.buses[i].id)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.y[i * self.n + j]
    }

    pub fn add_shunt(&mut self, bus: usize, y: Complex64) {
        self.y[bus * self.n + bus] += y;
    }

    /// `Y * V` for phasors `V`.
    pub fn current(&self, v: &[Complex64], out: &mut [Complex64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let row = &self.y[i * self.n..(i + 1) * self.n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| j != i && self.get(i, j).norm() > 0.0).collect()
    }
}

/// Current mismatch `I_injected - Y V` at every bus, returned as interleaved
/// real and imaginary parts (`2 * n` entries).
pub fn network_mismatch(y: &Admittance, v: &[f64], theta: &[f64], injections: &[Complex64]) -> Result<Vec<f64>> {
    let n = y.len();
    for (what, len) in [("voltage magnitudes", v.len()), ("angles", theta.len()), ("injections", injections.len())] {
        if len != n {
            return Err(Error::Shape {
                what: what.into(),
                expected: n,
                actual: len,
            });
        }
    }
    let phasors: Vec<Complex64> = v.iter().zip(theta).map(|(&m, &a)| Complex64::from_polar(m, a)).collect();
    let mut yv = vec![Complex64::new(0.0, 0.0); n];
    y.current(&phasors, &mut yv);
    let mut out = Vec::with_capacity(2 * n);
    for (inj, flow) in injections.iter().zip(&yv) {
        let r = inj - flow;
        out.push(r.re);
        out.push(r.im);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bus_case() -> NetworkCase {
        NetworkCase::from_toml_str(
            r#"
name = "two"
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
r = 0.01
x = 0.1
"#,
        )
        .unwrap()
    }

    #[test]
    fn no_flow_identity() {
        let case = two_bus_case();
        let y = Admittance::with_constant_impedance_loads(&case, &[1.0, 1.0]).unwrap();
        let r = network_mismatch(&y, &[1.0, 1.0], &[0.0, 0.0], &[Complex64::default(); 2]).unwrap();
        assert!(r.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn angle_perturbation_is_local() {
        let case = NetworkCase::kundur();
        let y = Admittance::from_branches(&case);
        let n = case.buses.len();
        let v = vec![1.0; n];
        let base = vec![0.0; n];
        let inj = vec![Complex64::default(); n];
        let r0 = network_mismatch(&y, &v, &base, &inj).unwrap();
        let k = case.bus_index(7).unwrap();
        let mut theta = base.clone();
        theta[k] += 0.1;
        let r1 = network_mismatch(&y, &v, &theta, &inj).unwrap();
        let neighbours = y.neighbours(k);
        assert!(!neighbours.is_empty());
        for i in 0..n {
            let changed = (r1[2 * i] - r0[2 * i]).abs() + (r1[2 * i + 1] - r0[2 * i + 1]).abs() > 1e-12;
            assert_eq!(changed, i == k || neighbours.contains(&i), "bus index {i}");
        }
    }

    #[test]
    fn shape_is_checked() {
        let case = two_bus_case();
        let y = Admittance::from_branches(&case);
        assert!(network_mismatch(&y, &[1.0], &[0.0, 0.0], &[Complex64::default(); 2]).is_err());
    }

    #[test]
    fn admittance_is_symmetric() {
        let y = Admittance::from_branches(&NetworkCase::kundur());
        for i in 0..y.len() {
            for j in 0..y.len() {
                assert_eq!(y.get(i, j), y.get(j, i));
            }
        }
    }
}
