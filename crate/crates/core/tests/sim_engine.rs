use gridattack::model::{BusKind, NetworkCase};
use gridattack::sim::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn kundur_sim(step: f64) -> Simulator {
    let config = SimConfig {
        step,
        ..SimConfig::default()
    };
    Simulator::new(&NetworkCase::kundur(), config).unwrap()
}

fn idle() -> Vec<MachineInputs> {
    vec![MachineInputs::default(); 4]
}

/// Gauss-Seidel power flow, deliberately unrelated to the Newton solver.
fn gauss_seidel(case: &NetworkCase) -> (Vec<f64>, Vec<f64>) {
    let n = case.buses.len();
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for br in &case.branches {
        let i = case.bus_index(br.from).unwrap();
        let j = case.bus_index(br.to).unwrap();
        let ys = 1.0 / Complex64::new(br.r, br.x);
        let half = Complex64::new(0.0, br.b / 2.0);
        y[i][i] += ys + half;
        y[j][j] += ys + half;
        y[i][j] -= ys;
        y[j][i] -= ys;
    }
    let mut v: Vec<Complex64> = case
        .buses
        .iter()
        .map(|b| match b.kind {
            BusKind::Slack => Complex64::from_polar(b.v_set, b.angle),
            BusKind::Pv => Complex64::new(b.v_set, 0.0),
            BusKind::Pq => Complex64::new(1.0, 0.0),
        })
        .collect();
    for _ in 0..20_000 {
        let mut change: f64 = 0.0;
        for (i, bus) in case.buses.iter().enumerate() {
            if bus.kind == BusKind::Slack {
                continue;
            }
            let others: Complex64 = (0..n).filter(|&j| j != i).map(|j| y[i][j] * v[j]).sum();
            let q = match bus.kind {
                BusKind::Pv => -(v[i].conj() * (others + y[i][i] * v[i])).im,
                _ => -bus.q_load,
            };
            let s = Complex64::new(bus.p_gen - bus.p_load, q);
            let mut next = (s.conj() / v[i].conj() - others) / y[i][i];
            if bus.kind == BusKind::Pv {
                next = Complex64::from_polar(bus.v_set, next.arg());
            }
            change = change.max((next - v[i]).norm());
            v[i] = next;
        }
        if change < 1e-13 {
            break;
        }
    }
    (v.iter().map(|c| c.norm()).collect(), v.iter().map(|c| c.arg()).collect())
}

#[test]
fn newton_agrees_with_gauss_seidel() {
    let case = NetworkCase::kundur();
    let pf = solve_power_flow(&case, 1e-12, 30).unwrap();
    let (v, theta) = gauss_seidel(&case);
    for i in 0..v.len() {
        assert!((v[i] - pf.v[i]).abs() < 1e-8, "bus {i}: {} vs {}", v[i], pf.v[i]);
        assert!((theta[i] - pf.theta[i]).abs() < 1e-8, "bus {i}: {} vs {}", theta[i], pf.theta[i]);
    }
}

#[test]
fn kundur_power_flow_reference_values() {
    let case = NetworkCase::kundur();
    let pf = solve_power_flow(&case, 1e-12, 30).unwrap();
    let reference = [1.0, 1.0, 1.0, 1.0, 0.98337472, 0.96908585, 0.95621810, 0.95400018, 0.96856366, 0.98377143];
    // The reference solution was converged to a 1e-6 mismatch.
    for (v, r) in pf.v.iter().zip(reference) {
        assert!((v - r).abs() < 1e-6, "{v} vs {r}");
    }
    assert!((pf.slack_p - 7.26802921).abs() < 1e-5);
    assert!((pf.slack_q - 1.09463368).abs() < 1e-5);
    // Area 1 exports over the three tie lines; this dispatch and load split
    // gives a flow of a couple of hundred MW.
    let tie = pf.transfer(&case, 7, 8);
    let (v, theta) = gauss_seidel(&case);
    let oracle_tie: f64 = case
        .branches
        .iter()
        .filter(|br| (br.from, br.to) == (7, 8))
        .map(|br| {
            let vi = Complex64::from_polar(v[6], theta[6]);
            let vj = Complex64::from_polar(v[7], theta[7]);
            let i = (vi - vj) / Complex64::new(br.r, br.x) + vi * Complex64::new(0.0, br.b / 2.0);
            (vi * i.conj()).re
        })
        .sum();
    assert!((tie - oracle_tie).abs() < 1e-8, "{tie} vs {oracle_tie}");
    assert!((2.0..3.0).contains(&tie), "inter-area flow {tie} pu");
    assert!(pf.v.iter().all(|v| (0.9..=1.1).contains(v)));
}

#[test]
fn initial_state_is_synchronous_equilibrium() {
    let sim = kundur_sim(0.01);
    let x0 = sim.initial_state();
    assert!(sim.plant().residual_norm(x0) < 1e-8);
    for k in 0..4 {
        assert_eq!(sim.plant().speed(x0, k), 1.0);
    }
}

#[test]
fn equilibrium_holds_for_twenty_seconds() {
    let mut sim = kundur_sim(0.01);
    let x0 = sim.initial_state().clone();
    let pf_v = sim.power_flow().v.clone();
    for _ in 0..100 {
        let m = sim.integrate_window(&idle()).unwrap();
        assert!(sim.state().x.iter().zip(&x0.x).all(|(a, b)| (a - b).abs() < 1e-6));
        assert!(m.freq_hz.iter().all(|f| (f - 60.0).abs() < 1e-3));
        assert!(m.bus_v.iter().zip(&pf_v).all(|(a, b)| (a - b).abs() < 1e-3));
    }
    assert!((sim.state().time - 20.0).abs() < 1e-9);
}

#[test]
fn one_idle_window_is_a_fixed_point() {
    let mut sim = kundur_sim(0.01);
    sim.integrate_window(&idle()).unwrap();
    assert!(sim.state().max_abs_diff(sim.initial_state()) < 1e-9);
}

#[test]
fn constant_speed_gives_exactly_zero_rocof() {
    let sim = kundur_sim(0.01);
    let freq: Vec<f64> = (0..4).map(|k| 60.0 * sim.plant().speed(sim.state(), k)).collect();
    let m = Measurements::capture(sim.plant(), sim.state(), &freq, 0.2, 60.0);
    assert!(m.rocof_hzps.iter().all(|r| *r == 0.0));
}

fn reference_step(step: f64, windows: usize) -> Vec<f64> {
    let mut sim = kundur_sim(step);
    let mut inputs = idle();
    inputs[0].governor_reference = Some(1.001);
    for _ in 0..windows {
        sim.integrate_window(&inputs).unwrap();
    }
    sim.state().x.iter().chain(&sim.state().v).chain(&sim.state().theta).copied().collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

#[test]
fn step_halving_is_second_order() {
    let coarse = reference_step(0.01, 10);
    let half = reference_step(0.005, 10);
    let quarter = reference_step(0.0025, 10);
    let e1 = max_diff(&coarse, &half);
    let e2 = max_diff(&half, &quarter);
    assert!(e1 < 1e-5, "half-step discrepancy {e1:e}");
    let ratio = e1 / e2;
    assert!((3.0..=5.0).contains(&ratio), "convergence ratio {ratio}");
}

#[test]
fn measurements_mirror_the_state() {
    let mut sim = kundur_sim(0.01);
    let mut inputs = idle();
    inputs[2].avr_voltage = Some(1.05);
    let m = sim.integrate_window(&inputs).unwrap();
    for k in 0..4 {
        assert_eq!(m.freq_hz[k], 60.0 * sim.plant().speed(sim.state(), k));
        assert_eq!(m.machine_v[k], sim.state().v[sim.plant().slots[k].bus]);
    }
    assert_eq!(m.bus_v, sim.state().v);
    assert!((m.time - 0.2).abs() < 1e-12);
}

#[test]
fn losing_every_source_is_a_collapse() {
    let mut sim = kundur_sim(0.01);
    let err = sim.disconnect(&[0, 1, 2, 3]).unwrap_err();
    assert!(err.is_collapse(), "{err}");
}

#[test]
fn window_must_be_a_multiple_of_step() {
    let config = SimConfig {
        step: 0.03,
        ..SimConfig::default()
    };
    assert!(Simulator::new(&NetworkCase::kundur(), config).is_err());
}

fn attack_inputs(levels: &[(f64, f64)]) -> Vec<Vec<MachineInputs>> {
    levels
        .iter()
        .map(|&(speed, volt)| {
            let mut inputs = idle();
            inputs[0].governor_speed = Some(speed);
            inputs[0].avr_voltage = Some(volt);
            inputs
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn runs_are_bit_identical(levels in prop::collection::vec((0.99f64..1.01, 0.95f64..1.05), 5)) {
        let run = || {
            let mut sim = kundur_sim(0.01);
            let ms: Vec<Measurements> = attack_inputs(&levels).iter().map(|i| sim.integrate_window(i).unwrap()).collect();
            (ms, sim.state().clone())
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn limited_states_stay_in_bounds(levels in prop::collection::vec((0.9f64..1.1, 0.8f64..1.2), 6)) {
        let mut sim = kundur_sim(0.01);
        for inputs in attack_inputs(&levels) {
            if sim.integrate_window(&inputs).is_err() {
                break;
            }
            let plant = sim.plant();
            let slot = &plant.slots[0];
            let gov = slot.governor.as_ref().unwrap();
            let valve = sim.state().x[plant.governor_range(0).unwrap()][0];
            prop_assert!(valve >= gov.vmin && valve <= gov.vmax, "valve {valve}");
            let exc = &slot.exciter.as_ref().unwrap().0;
            let vr = sim.state().x[plant.exciter_range(0).unwrap()][gridattack::model::exciter::VR];
            prop_assert!(vr >= exc.vrmin && vr <= exc.vrmax, "regulator {vr}");
        }
    }
}
