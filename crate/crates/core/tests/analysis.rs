use gridattack::analysis::*;
use gridattack::env::{AttackEnv, Scenario};
use gridattack::model::NetworkCase;
use gridattack::sim::{Dae, Trajectory};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

const WB: f64 = 376.991_118_430_775_2;

/// Single machine against an infinite bus with the electrical power as the
/// algebraic variable.
struct Smib {
    h: f64,
    d: f64,
    pm: f64,
    pmax: f64,
}

impl Smib {
    fn delta0(&self) -> f64 {
        (self.pm / self.pmax).asin()
    }
}

impl Dae for Smib {
    fn n_diff(&self) -> usize {
        2
    }
    fn n_alg(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], y: &[f64], f: &mut [f64], g: &mut [f64]) {
        f[0] = WB * (x[1] - 1.0);
        f[1] = (self.pm - y[0] - self.d * (x[1] - 1.0)) / (2.0 * self.h);
        g[0] = y[0] - self.pmax * x[0].sin();
    }
}

fn smib() -> Smib {
    Smib { h: 3.5, d: 2.0, pm: 0.8, pmax: 1.6 }
}

fn smib_exact(s: &Smib) -> DMatrix<f64> {
    let k = s.pmax * s.delta0().cos();
    DMatrix::from_row_slice(2, 2, &[0.0, WB, -k / (2.0 * s.h), -s.d / (2.0 * s.h)])
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn sine(omega: f64, n: usize, ts: f64) -> Vec<f64> {
    (0..n).map(|k| (omega * k as f64 * ts).sin()).collect()
}

#[test]
fn smib_linearization_matches_closed_form() {
    let s = smib();
    let a = linearize(&s, &[s.delta0(), 1.0], &[s.pm], DEFAULT_PERTURBATION).unwrap();
    let exact = smib_exact(&s);
    for (got, want) in a.iter().zip(exact.iter()) {
        assert!((got - want).abs() <= 1e-4 * want.abs().max(1e-6), "{a} vs {exact}");
    }
    let modes = eigenmodes(&a).unwrap();
    let k = s.pmax * s.delta0().cos();
    let disc = (s.d / (2.0 * s.h)).powi(2) - 4.0 * WB * k / (2.0 * s.h);
    let expected = Complex64::new(-s.d / (4.0 * s.h), (-disc).sqrt() / 2.0);
    assert!(relative_distance(modes.dominant.unwrap(), expected) < 1e-6);
}

#[test]
fn linearization_error_shrinks_quadratically() {
    let s = smib();
    let x = [s.delta0(), 1.0];
    let exact = smib_exact(&s);
    let err = |eps: f64| max_abs_diff(&linearize(&s, &x, &[s.pm], eps).unwrap(), &exact);
    let (e1, e2) = (err(0.1), err(0.05));
    let ratio = e1 / e2;
    assert!((3.5..4.5).contains(&ratio), "errors {e1:e} {e2:e}");
}

#[test]
fn linearization_refuses_non_equilibria() {
    let s = smib();
    let err = linearize(&s, &[s.delta0() + 0.1, 1.0], &[s.pm], 1e-6).unwrap_err();
    assert!(matches!(err, gridattack::Error::Contract(_)));
}

#[test]
fn kundur_modes_are_stable_apart_from_the_angle_reference() {
    let modes = case_eigenmodes(&NetworkCase::kundur()).unwrap();
    assert_eq!(modes.len(), 52);
    let near_zero = modes.eigenvalues.iter().filter(|l| l.norm() < 1e-6).count();
    assert_eq!(near_zero, 1);
    for l in modes.eigenvalues.iter().filter(|l| l.norm() >= 1e-6) {
        assert!(l.re < 0.0, "{l}");
    }
    let dom = modes.dominant.unwrap();
    assert!((dom.im - 4.064_58).abs() < 1e-4 && (dom.re + 0.139_53).abs() < 1e-4, "{dom}");
}

#[test]
fn diagonal_and_rotation_examples() {
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0, -3.0]));
    let m = eigenmodes(&d).unwrap();
    let re: Vec<f64> = m.eigenvalues.iter().map(|l| l.re).collect();
    assert_eq!(re, vec![-1.0, -2.0, -3.0]);
    assert!(m.eigenvalues.iter().all(|l| l.im == 0.0));
    assert!(m.dominant.is_none());

    let r = DMatrix::from_row_slice(2, 2, &[-0.5, 3.0, -3.0, -0.5]);
    let m = eigenmodes(&r).unwrap();
    let top = m.dominant.unwrap();
    assert!((top - Complex64::new(-0.5, 3.0)).norm() < 1e-12);
    let zeta = m.damping_ratios[0];
    assert!((zeta - 0.5 / (0.25f64 + 9.0).sqrt()).abs() < 1e-12);
    assert!((m.frequencies_hz[0] - 3.0 / std::f64::consts::TAU).abs() < 1e-12);

    assert!(eigenmodes(&DMatrix::zeros(2, 3)).is_err());
}

#[test]
fn sinusoid_peaks_within_one_bin() {
    let s = fft_spectrum(&sine(4.0, 100, 0.2), 0.2).unwrap();
    assert!((s.peak_omega().unwrap() - 4.0).abs() <= s.bin_width());
    assert!((s.bin_width() - std::f64::consts::TAU / 20.0).abs() < 1e-12);
    assert_eq!(s.omega.len(), 51);
}

#[test]
fn constant_signal_has_no_peak() {
    let s = fft_spectrum(&[60.0; 64], 0.2).unwrap();
    assert!(s.magnitude.iter().all(|m| *m < 1e-12));
    assert!(s.peak.is_none());
}

#[test]
fn spectrum_rejects_bad_input() {
    assert!(fft_spectrum(&[1.0; 4], 0.2).is_err());
    assert!(fft_spectrum(&[1.0; 16], 0.0).is_err());
    let times = [0.0, 0.2, 0.4, 0.7, 0.8, 1.0, 1.2, 1.4, 1.6];
    let err = fft_spectrum_series(&times, &[0.0; 9]).unwrap_err();
    assert!(err.to_string().contains("uniformly"), "{err}");
    let times: Vec<f64> = (0..16).map(|k| k as f64 * 0.2).collect();
    let s = fft_spectrum_series(&times, &sine(4.0, 16, 0.2)).unwrap();
    assert!((s.sample_time - 0.2).abs() < 1e-12);
}

fn unattacked_trajectory() -> Trajectory {
    let mut env = AttackEnv::bundled(Scenario::bundled("gov-G1-narrow").unwrap()).unwrap();
    env.set_recording(true);
    env.reset(0);
    while !env.step(&[0.0]).unwrap().done {}
    env.take_trajectory().unwrap()
}

#[test]
fn metrics_of_an_unattacked_run_are_quiet() {
    let traj = unattacked_trajectory();
    let settings = Scenario::bundled("gov-G1-narrow").unwrap().relay;
    let m = trajectory_metrics(&traj, &settings);
    assert!(m.peak_rocof_hzps < 1e-3, "{}", m.peak_rocof_hzps);
    assert!(m.fastest_area.is_none());
    assert!(m.generators.iter().all(|g| g.first_trip_s.first().is_none()));
    assert!(m.generators.iter().all(|g| g.peak_freq_deviation_hz < 1e-3));
    assert!((m.duration_s - 20.0).abs() < 1e-9);
}

#[test]
fn metrics_are_idempotent_through_csv() {
    let traj = unattacked_trajectory();
    let settings = Scenario::bundled("gov-G1-narrow").unwrap().relay;
    let first = trajectory_metrics(&traj, &settings);
    assert_eq!(first, trajectory_metrics(&traj, &settings));
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let back = Trajectory::read_csv(&buf[..], &NetworkCase::kundur(), std::path::Path::new("mem.csv")).unwrap();
    assert_eq!(first, trajectory_metrics(&back, &settings));
}

proptest! {
    #[test]
    fn parseval_holds(signal in prop::collection::vec(-5.0f64..5.0, 8..80)) {
        let s = fft_spectrum(&signal, 0.2).unwrap();
        let mean = signal.iter().sum::<f64>() / signal.len() as f64;
        let energy: f64 = signal.iter().map(|v| (v - mean).powi(2)).sum();
        prop_assert!((s.energy() - energy).abs() <= 1e-9 * energy.max(1.0));
    }

    #[test]
    fn eigenvalues_close_under_conjugation_and_sum_to_the_trace(
        entries in prop::collection::vec(-3.0f64..3.0, 25),
    ) {
        let a = DMatrix::from_row_slice(5, 5, &entries);
        let m = eigenmodes(&a).unwrap();
        let sum: Complex64 = m.eigenvalues.iter().sum();
        prop_assert!((sum.re - a.trace()).abs() < 1e-9);
        prop_assert!(sum.im.abs() < 1e-9);
        for l in &m.eigenvalues {
            let partner = m.eigenvalues.iter().any(|q| (q - l.conj()).norm() < 1e-8);
            prop_assert!(partner, "{} has no conjugate", l);
        }
    }
}
