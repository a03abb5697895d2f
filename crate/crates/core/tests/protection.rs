use gridattack::model::NetworkCase;
use gridattack::protection::*;
use gridattack::sim::{Dae, Measurements, SimConfig, Simulator};
use proptest::prelude::*;

fn readings(v: f64, f: f64, r: f64) -> Measurements {
    Measurements {
        time: 0.4,
        machine_v: vec![v],
        freq_hz: vec![f],
        rocof_hzps: vec![r],
        bus_v: vec![v],
    }
}

fn kundur() -> Simulator {
    Simulator::new(&NetworkCase::kundur(), SimConfig::default()).unwrap()
}

fn report_with(tripped: &[usize]) -> TripReport {
    TripReport {
        generators: (0..4)
            .map(|k| GeneratorTrip {
                causes: if tripped.contains(&k) { vec![TripCause::Rocof] } else { vec![] },
                first_trip_time: tripped.contains(&k).then_some(0.2),
            })
            .collect(),
    }
}

fn network_residual(sim: &Simulator) -> f64 {
    let plant = sim.plant();
    let state = sim.state();
    let mut f = vec![0.0; plant.n_diff()];
    let mut g = vec![0.0; plant.n_alg()];
    plant.eval(&state.x, &state.algebraic(), &mut f, &mut g);
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[test]
fn single_causes_are_tagged() {
    let s = RelaySettings::default();
    let cases = [
        (readings(1.0, 60.0, 0.0), vec![]),
        (readings(0.6, 60.0, 0.0), vec![TripCause::Voltage]),
        (readings(1.0, 60.0, 1.2), vec![TripCause::Rocof]),
        (readings(1.0, 57.0, 0.0), vec![TripCause::Frequency]),
    ];
    for (m, causes) in cases {
        let rep = evaluate_relays(&m, &s);
        assert_eq!(rep.generators[0].causes, causes);
        assert_eq!(rep.generators[0].tripped(), !causes.is_empty());
        assert_eq!(rep.generators[0].first_trip_time, (!causes.is_empty()).then_some(0.4));
    }
}

#[test]
fn bounds_themselves_do_not_trip() {
    let s = RelaySettings::default();
    for m in [readings(0.7, 60.0, 0.0), readings(1.3, 60.0, 0.0), readings(1.0, 57.4, 0.0), readings(1.0, 61.7, 0.0), readings(1.0, 60.0, -1.0)] {
        assert!(!evaluate_relays(&m, &s).any(), "{m:?}");
    }
}

#[test]
fn no_trips_leave_the_state_alone() {
    let mut sim = kundur();
    let before = sim.state().clone();
    apply_trips(&mut sim, &report_with(&[]), false).unwrap();
    assert_eq!(sim.state(), &before);
}

#[test]
fn suppression_leaves_the_state_alone() {
    let mut sim = kundur();
    let before = sim.state().clone();
    let report = report_with(&[0, 2]);
    let kept = report.clone();
    apply_trips(&mut sim, &report, true).unwrap();
    assert_eq!(sim.state(), &before);
    assert_eq!(report, kept);
    assert!(sim.plant().online.iter().all(|o| *o));
}

#[test]
fn tripping_g3_resolves_the_network() {
    let mut sim = kundur();
    let before = sim.state().v.clone();
    apply_trips(&mut sim, &report_with(&[2]), false).unwrap();
    assert_eq!(sim.plant().online, vec![true, true, false, true]);
    let moved = sim.state().v.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(moved > 1e-3, "voltages barely moved: {moved:e}");
    assert!(network_residual(&sim) < 1e-8);
    // Disconnection latches: the machine stays out through later windows.
    sim.integrate_window(&vec![Default::default(); 4]).unwrap();
    assert!(!sim.plant().online[2]);
}

#[test]
fn evaluating_relays_does_not_touch_the_simulation() {
    let sim = kundur();
    let before = sim.state().clone();
    let _ = evaluate_relays(sim.measurements(), &RelaySettings::default());
    assert_eq!(sim.state(), &before);
}

proptest! {
    #[test]
    fn widening_a_band_never_adds_a_trip(
        v in 0.5f64..1.6, f in 56.0f64..63.0, r in -3.0f64..3.0,
        widen in 0.0f64..0.5, which in 0usize..5,
    ) {
        let narrow = RelaySettings::default();
        let mut wide = narrow;
        match which {
            0 => wide.v_low -= widen,
            1 => wide.v_high += widen,
            2 => wide.w_low -= widen,
            3 => wide.w_high += widen,
            _ => wide.rocof_limit += widen,
        }
        let m = readings(v, f, r);
        if !evaluate_relays(&m, &narrow).any() {
            prop_assert!(!evaluate_relays(&m, &wide).any());
        }
    }

    #[test]
    fn trip_flag_matches_cause_list(v in 0.5f64..1.6, f in 56.0f64..63.0, r in -3.0f64..3.0) {
        let rep = evaluate_relays(&readings(v, f, r), &RelaySettings::default());
        let expected = !(0.7..=1.3).contains(&v) || !(57.4..=61.7).contains(&f) || r.abs() > 1.0;
        prop_assert_eq!(rep.generators[0].tripped(), expected);
    }
}
