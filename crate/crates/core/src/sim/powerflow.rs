//! Newton-Raphson power flow in polar coordinates.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Admittance, BusKind, NetworkCase};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerFlowSolution {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    /// Per machine, in case order.
    pub machine_p: Vec<f64>,
    pub machine_q: Vec<f64>,
    pub slack_p: f64,
    pub slack_q: f64,
    pub iterations: usize,
    pub mismatch: f64,
}

impl PowerFlowSolution {
    /// Net complex power injected at every bus (generation minus load).
    pub fn bus_injections(&self, case: &NetworkCase) -> Vec<(f64, f64)> {
        let y = Admittance::from_branches(case);
        injections(&y, &self.v, &self.theta)
    }

    /// Active power flowing from `from` to `to` summed over all parallel
    /// branches between the two buses, measured at the `from` end.
    pub fn transfer(&self, case: &NetworkCase, from: usize, to: usize) -> f64 {
        let i = case.bus_index(from).expect("known bus");
        let j = case.bus_index(to).expect("known bus");
        let vi = num_complex::Complex64::from_polar(self.v[i], self.theta[i]);
        let vj = num_complex::Complex64::from_polar(self.v[j], self.theta[j]);
        case.branches
            .iter()
            .filter_map(|br| {
                let ys = num_complex::Complex64::new(1.0, 0.0) / num_complex::Complex64::new(br.r, br.x);
                let ysh = num_complex::Complex64::new(0.0, br.b / 2.0);
                if br.from == from && br.to == to || br.from == to && br.to == from {
                    let i_ij = (vi - vj) * ys + vi * ysh;
                    Some((vi * i_ij.conj()).re)
                } else {
                    None
                }
            })
            .sum()
    }
}

fn injections(y: &Admittance, v: &[f64], theta: &[f64]) -> Vec<(f64, f64)> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut p = 0.0;
            let mut q = 0.0;
            for j in 0..n {
                let yij = y.get(i, j);
                if yij.re == 0.0 && yij.im == 0.0 {
                    continue;
                }
                let (s, c) = (theta[i] - theta[j]).sin_cos();
                p += v[j] * (yij.re * c + yij.im * s);
                q += v[j] * (yij.re * s - yij.im * c);
            }
            (v[i] * p, v[i] * q)
        })
        .collect()
}

pub fn solve_power_flow(case: &NetworkCase, tol: f64, max_iter: usize) -> Result<PowerFlowSolution> {
    let n = case.buses.len();
    let y = Admittance::from_branches(case);
    let slack = case.slack_index();

    let mut v: Vec<f64> = case
        .buses
        .iter()
        .map(|b| if b.kind == BusKind::Pq { 1.0 } else { b.v_set })
        .collect();
    let mut theta = vec![case.buses[slack].angle; n];

    let p_spec: Vec<f64> = case.buses.iter().map(|b| b.p_gen * (b.kind != BusKind::Pq) as u8 as f64 - b.p_load).collect();
    let q_spec: Vec<f64> = case.buses.iter().map(|b| -b.q_load).collect();

    // Unknown ordering: angles of non-slack buses, then magnitudes of PQ buses.
    let ang: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let mag: Vec<usize> = (0..n).filter(|&i| case.buses[i].kind == BusKind::Pq).collect();
    let na = ang.len();
    let dim = na + mag.len();

    let mut iterations = 0;
    loop {
        let s = injections(&y, &v, &theta);
        let mut f = DVector::zeros(dim);
        for (k, &i) in ang.iter().enumerate() {
            f[k] = p_spec[i] - s[i].0;
        }
        for (k, &i) in mag.iter().enumerate() {
            f[na + k] = q_spec[i] - s[i].1;
        }
        let mismatch = f.amax();
        if !mismatch.is_finite() {
            return Err(Error::PowerFlowDivergence { iterations, mismatch });
        }
        if mismatch < tol {
            return Ok(finish(case, &y, v, theta, iterations, mismatch));
        }
        if iterations >= max_iter {
            return Err(Error::PowerFlowDivergence { iterations, mismatch });
        }

        let jac = jacobian(&y, &v, &theta, &s, &ang, &mag);
        let dx = jac
            .lu()
            .solve(&f)
            .ok_or_else(|| Error::Model("singular power-flow Jacobian".into()))?;
        for (k, &i) in ang.iter().enumerate() {
            theta[i] += dx[k];
        }
        for (k, &i) in mag.iter().enumerate() {
            v[i] += dx[na + k];
        }
        iterations += 1;
    }
}

fn jacobian(
    y: &Admittance,
    v: &[f64],
    theta: &[f64],
    s: &[(f64, f64)],
    ang: &[usize],
    mag: &[usize],
) -> DMatrix<f64> {
    let na = ang.len();
    let dim = na + mag.len();
    let mut jac = DMatrix::zeros(dim, dim);

    // d(P, Q)_i / d(theta, V)_j
    let d = |i: usize, j: usize| -> (f64, f64, f64, f64) {
        let yij = y.get(i, j);
        let (g, b) = (yij.re, yij.im);
        if i == j {
            let (p, q) = s[i];
            (-q - b * v[i] * v[i], p / v[i] + g * v[i], p - g * v[i] * v[i], q / v[i] - b * v[i])
        } else {
            let (sn, cs) = (theta[i] - theta[j]).sin_cos();
            (
                v[i] * v[j] * (g * sn - b * cs),
                v[i] * (g * cs + b * sn),
                -v[i] * v[j] * (g * cs + b * sn),
                v[i] * (g * sn - b * cs),
            )
        }
    };

    for (r, &i) in ang.iter().enumerate() {
        for (c, &j) in ang.iter().enumerate() {
            jac[(r, c)] = d(i, j).0;
        }
        for (c, &j) in mag.iter().enumerate() {
            jac[(r, na + c)] = d(i, j).1;
        }
    }
    for (r, &i) in mag.iter().enumerate() {
        for (c, &j) in ang.iter().enumerate() {
            jac[(na + r, c)] = d(i, j).2;
        }
        for (c, &j) in mag.iter().enumerate() {
            jac[(na + r, na + c)] = d(i, j).3;
        }
    }
    jac
}

fn finish(
    case: &NetworkCase,
    y: &Admittance,
    v: Vec<f64>,
    theta: Vec<f64>,
    iterations: usize,
    mismatch: f64,
) -> PowerFlowSolution {
    let s = injections(y, &v, &theta);
    let slack = case.slack_index();
    let gen = |i: usize| (s[i].0 + case.buses[i].p_load, s[i].1 + case.buses[i].q_load);
    let (machine_p, machine_q) = case
        .machines
        .iter()
        .map(|m| gen(case.bus_index(m.bus).expect("validated machine bus")))
        .unzip();
    let (slack_p, slack_q) = gen(slack);
    PowerFlowSolution {
        v,
        theta,
        machine_p,
        machine_q,
        slack_p,
        slack_q,
        iterations,
        mismatch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(p_load: f64, q_load: f64, r: f64, x: f64, b: f64) -> NetworkCase {
        NetworkCase::from_toml_str(&format!(
            r#"
name = "toy"
base_mva = 100.0
[[bus]]
id = 1
kind = "slack"
[[bus]]
id = 2
kind = "pq"
p_load = {p_load}
q_load = {q_load}
[[branch]]
from = 1
to = 2
r = {r}
x = {x}
b = {b}
"#
        ))
        .unwrap()
    }

    #[test]
    fn flat_network_needs_no_iteration() {
        let pf = solve_power_flow(&toy(0.0, 0.0, 0.01, 0.1, 0.0), 1e-10, 10).unwrap();
        assert!(pf.iterations <= 1);
        assert_eq!(pf.v, vec![1.0, 1.0]);
        assert_eq!(pf.theta, vec![0.0, 0.0]);
    }

    #[test]
    fn two_bus_closed_form() {
        // Source 1∠0 feeding P + jQ through r + jx:
        // V^4 + (2(Pr + Qx) - 1) V^2 + (P^2 + Q^2)(r^2 + x^2) = 0, upper root.
        let (p, q, r, x) = (0.8_f64, 0.3_f64, 0.02_f64, 0.2_f64);
        let b = 2.0 * (p * r + q * x) - 1.0;
        let c = (p * p + q * q) * (r * r + x * x);
        let v2 = ((-b + (b * b - 4.0 * c).sqrt()) / 2.0).sqrt();
        let pf = solve_power_flow(&toy(p, q, r, x, 0.0), 1e-12, 20).unwrap();
        assert!((pf.v[1] - v2).abs() < 1e-10, "{} vs {v2}", pf.v[1]);
        // Slack supplies load plus I^2 r losses.
        let loss = (p * p + q * q) / (v2 * v2) * r;
        assert!((pf.slack_p - p - loss).abs() < 1e-10);
    }

    #[test]
    fn divergence_reports_mismatch() {
        let err = solve_power_flow(&toy(50.0, 20.0, 0.02, 0.2, 0.0), 1e-10, 15).unwrap_err();
        match err {
            Error::PowerFlowDivergence { iterations, mismatch } => {
                assert!(iterations <= 15);
                assert!(mismatch > 1e-10);
            }
            Error::Model(_) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
