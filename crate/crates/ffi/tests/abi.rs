use std::ffi::{c_char, CString};
use std::ptr;

use gridattack_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { ga_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(511)].iter().map(|c| *c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn env(name: &str) -> *mut GaEnv {
    let name = CString::new(name).unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { ga_env_new(name.as_ptr(), &mut env) }, GaStatus::Ok);
    env
}

#[test]
fn midpoint_episode_through_the_c_interface() {
    let e = env("gov-G1-narrow");
    unsafe {
        assert_eq!(ga_env_observation_dim(e), 3);
        assert_eq!(ga_env_action_dim(e), 1);
        let mut obs = [1.0; 3];
        let (mut reward, mut done) = (0.0, false);
        assert_eq!(ga_env_step(e, [0.0].as_ptr(), 1, obs.as_mut_ptr(), 3, &mut reward, &mut done), GaStatus::Contract);
        assert!(last_error().contains("reset"), "{}", last_error());
        assert_eq!(ga_env_reset(e, 0, obs.as_mut_ptr(), 3), GaStatus::Ok);
        assert_eq!(obs, [0.0; 3]);
        let mut steps = 0;
        let mut total = 0.0;
        while !done {
            assert_eq!(ga_env_step(e, [0.0].as_ptr(), 1, obs.as_mut_ptr(), 3, &mut reward, &mut done), GaStatus::Ok);
            total += reward;
            steps += 1;
        }
        assert_eq!(steps, 100);
        assert!(total < 1e-4);
        ga_env_free(e);
    }
}

#[test]
fn errors_map_to_codes() {
    unsafe {
        let mut e = ptr::null_mut();
        let bad = CString::new("no-such").unwrap();
        assert_eq!(ga_env_new(bad.as_ptr(), &mut e), GaStatus::InvalidArgument);
        assert!(e.is_null());
        assert!(last_error().contains("no-such"));
        assert_eq!(ga_env_new(ptr::null(), &mut e), GaStatus::NullPointer);

        let e = env("avr-G1G3");
        let mut small = [0.0; 2];
        assert_eq!(ga_env_reset(e, 0, small.as_mut_ptr(), 2), GaStatus::BufferTooSmall);
        let mut obs = vec![0.0; ga_env_observation_dim(e)];
        assert_eq!(ga_env_reset(e, 0, obs.as_mut_ptr(), obs.len()), GaStatus::Ok);
        let (mut r, mut d) = (0.0, false);
        assert_eq!(ga_env_step(e, [0.0].as_ptr(), 1, obs.as_mut_ptr(), obs.len(), &mut r, &mut d), GaStatus::Contract);
        ga_env_free(e);
        ga_env_free(ptr::null_mut());

        let toml = CString::new("name = \"x\"\n[[injection]]\nkind = \"bogus\"\nmachine = 1\nlo = 0\nhi = 1\n").unwrap();
        let mut e = ptr::null_mut();
        assert_eq!(ga_env_from_toml(toml.as_ptr(), &mut e), GaStatus::Parse);
    }
}

#[test]
fn truncated_error_messages_stay_terminated() {
    unsafe {
        let mut e = ptr::null_mut();
        ga_env_new(ptr::null(), &mut e);
        let mut buf = [1 as c_char; 4];
        let n = ga_last_error(buf.as_mut_ptr(), 4);
        assert!(n > 3);
        assert_eq!(buf[3], 0);
        assert_eq!(ga_last_error(ptr::null_mut(), 0), n);
    }
}

#[test]
fn analysis_entry_points() {
    unsafe {
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(ga_dominant_mode(&mut re, &mut im), GaStatus::Ok);
        assert!((im - 4.0646).abs() < 1e-3 && re < 0.0);
        let signal: Vec<f64> = (0..100).map(|k| (4.0 * 0.2 * k as f64).sin()).collect();
        let mut w = 0.0;
        assert_eq!(ga_fft_peak(signal.as_ptr(), signal.len(), 0.2, &mut w), GaStatus::Ok);
        assert!((w - 4.0).abs() <= std::f64::consts::TAU / 20.0);
        assert_eq!(ga_fft_peak(signal.as_ptr(), 3, 0.2, &mut w), GaStatus::InvalidArgument);
    }
}

#[test]
fn policies_load_and_act() {
    use gridattack::env::Scenario;
    use gridattack::ppo::{Checkpoint, PolicyParams, PpoConfig, StdHead};
    use rand::SeedableRng;

    let dir = tempfile::TempDir::new().unwrap();
    let path = dir.path().join("ck.json");
    let s = Scenario::bundled("gov-G1-narrow").unwrap();
    let params = PolicyParams::new(3, 1, &[8], StdHead::Separate, 0.0, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
    let expected = gridattack::ppo::policy_forward(&params, &[0.1, 0.2, 0.3]).unwrap().mean;
    Checkpoint::new(&s, params, PpoConfig::default(), 0).save(&path).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(ga_policy_load(cpath.as_ptr(), &mut p), GaStatus::Ok);
        let mut a = [0.0];
        assert_eq!(ga_policy_act(p, [0.1, 0.2, 0.3].as_ptr(), 3, a.as_mut_ptr(), 1), GaStatus::Ok);
        assert_eq!(a.to_vec(), expected);
        assert_eq!(ga_policy_act(p, [0.1, 0.2].as_ptr(), 2, a.as_mut_ptr(), 1), GaStatus::ShapeMismatch);

        let ok = env("gov-G1-wide");
        assert_eq!(ga_policy_check(p, ok), GaStatus::Ok);
        let other = env("avr-G1G3");
        assert_eq!(ga_policy_check(p, other), GaStatus::ShapeMismatch);
        assert!(last_error().contains("avr-G1G3"));
        ga_env_free(ok);
        ga_env_free(other);
        ga_policy_free(p);

        let missing = CString::new(dir.path().join("nope.json").to_str().unwrap()).unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(ga_policy_load(missing.as_ptr(), &mut p), GaStatus::Io);
    }
}

#[test]
fn header_declares_the_interface_and_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/gridattack.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["ga_env_new", "ga_env_step", "ga_policy_act", "ga_last_error", "GA_STATUS_OK", "typedef struct GaEnv GaEnv"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    match std::process::Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c", header]).output() {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(_) => eprintln!("no C compiler found; skipping header compile check"),
    }
}
