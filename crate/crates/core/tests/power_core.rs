use gridattack::model::exciter::{FEEDBACK, FIELD, LEAD_LAG, SENSED_V, VR};
use gridattack::model::governor::{TURBINE, VALVE};
use gridattack::model::*;
use gridattack::sim::{solve_power_flow, SimConfig, Simulator};
use num_complex::Complex64;
use proptest::prelude::*;

fn rk4<F: Fn(&[f64]) -> Vec<f64>>(x: &mut [f64], h: f64, f: F) {
    let k1 = f(x);
    let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let k2 = f(&x2);
    let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = f(&x3);
    let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = f(&x4);
    for i in 0..x.len() {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

fn settled_governor(pm: f64) -> (GovernorParams, Vec<f64>) {
    let mut p = NetworkCase::kundur().governors[0].clone();
    let x = governor_init(&mut p, pm).unwrap().to_vec();
    (p, x)
}

#[test]
fn governor_speed_step_matches_closed_form() {
    let pm0 = 7.0;
    let (p, mut x) = settled_governor(pm0);
    let dw = -0.01;
    // Valve lag followed by the turbine lead-lag, both first order.
    let a = -dw / p.r;
    let analytic = |t: f64| {
        let v = pm0 + a * (1.0 - (-t / p.t1).exp());
        let z = pm0 + a * (1.0 - (p.t1 * (-t / p.t1).exp() - p.t3 * (-t / p.t3).exp()) / (p.t1 - p.t3));
        p.t2 / p.t3 * (v - z) + z - p.dt * dw
    };
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    for k in 1..=10_000 {
        rk4(&mut x, h, |s| governor_derivatives(&p, s, 1.0 + dw, 1.0).unwrap().0.to_vec());
        if k % 100 == 0 {
            let pm = governor_derivatives(&p, &x, 1.0 + dw, 1.0).unwrap().1.pm;
            worst = worst.max((pm - analytic(k as f64 * h)).abs());
        }
    }
    assert!(worst < 1e-6, "max Pm error {worst:e}");
}

/// Independent DC-exciter right-hand side with no saturation.
fn exciter_oracle(p: &ExciterParams, x: &[f64], v: f64, v_ref: f64) -> Vec<f64> {
    let (vm, ll, vr, efd, vf) = (x[0], x[1], x[2], x[3], x[4]);
    let rate_feedback = p.kf * (efd - vf) / p.tf;
    let err = v_ref - vm - rate_feedback;
    let ll_out = ll + p.tc / p.tb * (err - ll);
    let mut dvr = (p.ka * ll_out - vr) / p.ta;
    if (vr >= p.vrmax && dvr > 0.0) || (vr <= p.vrmin && dvr < 0.0) {
        dvr = 0.0;
    }
    vec![
        (v - vm) / p.tr,
        (err - ll) / p.tb,
        dvr,
        (vr - p.ke * efd) / p.te,
        (efd - vf) / p.tf,
    ]
}

#[test]
fn exciter_voltage_step_matches_reference_integration() {
    let sim = Simulator::new(&NetworkCase::kundur(), SimConfig::default()).unwrap();
    let range = sim.plant().exciter_range(0).unwrap();
    let efd0 = sim.initial_state().x[range][FIELD];
    let mut p = NetworkCase::kundur().exciters[0].clone();
    assert_eq!((p.se1, p.e1), (0.0, 0.0), "oracle assumes no saturation");
    let x0 = exciter_init(&mut p, efd0, 1.0).unwrap().to_vec();
    let v_ref = p.v_ref;

    let mut lib = x0.clone();
    let mut oracle = x0;
    let mut worst: f64 = 0.0;
    for k in 1..=10_000 {
        rk4(&mut lib, 1e-3, |s| exciter_derivatives(&p, s, 0.95, v_ref, 0.0, 1.0).unwrap().0.to_vec());
        for _ in 0..10 {
            rk4(&mut oracle, 1e-4, |s| exciter_oracle(&p, s, 0.95, v_ref));
        }
        if k % 100 == 0 {
            let efd = exciter_derivatives(&p, &lib, 0.95, v_ref, 0.0, 1.0).unwrap().1.efd;
            worst = worst.max((efd - oracle[FIELD]).abs());
        }
        assert!(lib[VR] <= p.vrmax && lib[VR] >= p.vrmin);
    }
    assert!(worst < 1e-6, "max EFD error {worst:e}");
    assert!(lib[FIELD] > efd0, "a voltage dip raises the field");
}

#[test]
fn g1_operating_point_is_stationary() {
    let sim = Simulator::new(&NetworkCase::kundur(), SimConfig::default()).unwrap();
    let plant = sim.plant();
    let state = sim.initial_state();
    let slot = &plant.slots[0];
    let gov = governor_derivatives(slot.governor.as_ref().unwrap(), &state.x[plant.governor_range(0).unwrap()], 1.0, 1.0).unwrap();
    let exc_params = &slot.exciter.as_ref().unwrap().0;
    let exc = exciter_derivatives(exc_params, &state.x[plant.exciter_range(0).unwrap()], state.v[slot.bus], exc_params.v_ref, 0.0, 1.0).unwrap();
    let dx = machine_derivatives(
        &slot.params,
        plant.machine_states(state, 0),
        state.v[slot.bus],
        state.theta[slot.bus],
        gov.1.pm,
        exc.1.efd,
        plant.omega_base(),
    )
    .unwrap();
    for d in dx.iter().chain(&gov.0).chain(&exc.0) {
        assert!(d.abs() < 1e-8, "{dx:?} {:?} {:?}", gov.0, exc.0);
    }
}

#[test]
fn network_balances_at_solved_power_flow() {
    let case = NetworkCase::kundur();
    let pf = solve_power_flow(&case, 1e-12, 30).unwrap();
    let y = Admittance::with_constant_impedance_loads(&case, &pf.v).unwrap();
    let mut inj = vec![Complex64::new(0.0, 0.0); case.buses.len()];
    for (k, m) in case.machines.iter().enumerate() {
        let b = case.bus_index(m.bus).unwrap();
        let v = Complex64::from_polar(pf.v[b], pf.theta[b]);
        inj[b] += (Complex64::new(pf.machine_p[k], pf.machine_q[k]) / v).conj();
    }
    let r = network_mismatch(&y, &pf.v, &pf.theta, &inj).unwrap();
    let worst = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(worst < 1e-8, "{worst:e}");
}

proptest! {
    #[test]
    fn droop_is_linear_in_steady_state(dw in -0.002f64..0.002) {
        let pm0 = 7.0;
        let (p, _) = settled_governor(pm0);
        // Settled valve and turbine at the new valve reference.
        let x = [p.p_ref - dw / p.r, p.p_ref - dw / p.r];
        let (dx, out) = governor_derivatives(&p, &x, 1.0 + dw, 1.0).unwrap();
        prop_assert!(dx.iter().all(|d| d.abs() < 1e-9));
        prop_assert!((out.pm - pm0 - (-dw / p.r - p.dt * dw)).abs() < 1e-6);
    }

    #[test]
    fn pss_enters_affinely(vpss in -0.5f64..0.5, dv in -0.1f64..0.1) {
        let mut p = NetworkCase::kundur().exciters[1].clone();
        let x = exciter_init(&mut p, 1.7, 1.0).unwrap();
        let v_ref = p.v_ref;
        let d = |s: f64| exciter_derivatives(&p, &x, 1.0 + dv, v_ref, s, 1.0).unwrap();
        let (plus, minus, zero) = (d(vpss), d(-vpss), d(0.0));
        let mid = 0.5 * (plus.1.regulator_input + minus.1.regulator_input);
        prop_assert!((mid - zero.1.regulator_input).abs() < 1e-12);
        prop_assert!((plus.1.regulator_input - zero.1.regulator_input - vpss).abs() < 1e-12);
        for i in [SENSED_V, LEAD_LAG, FIELD, FEEDBACK] {
            prop_assert!((0.5 * (plus.0[i] + minus.0[i]) - zero.0[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn valve_never_driven_past_limits(dw in -0.5f64..0.5, at_top in any::<bool>()) {
        let (p, _) = settled_governor(7.0);
        let valve = if at_top { p.vmax } else { p.vmin };
        let (dx, _) = governor_derivatives(&p, &[valve, 7.0], 1.0 + dw, 1.0).unwrap();
        if at_top { prop_assert!(dx[VALVE] <= 0.0) } else { prop_assert!(dx[VALVE] >= 0.0) }
        prop_assert!(dx[TURBINE].is_finite());
    }
}
