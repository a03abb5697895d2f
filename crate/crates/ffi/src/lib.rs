//! C interface to the attack environment, trained policies and the
//! small-signal and spectral analysis.
//!
//! Every fallible function returns a [`GaStatus`]. On failure a description
//! is kept per thread and can be copied out with [`ga_last_error`]. Objects
//! are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gridattack::analysis::{case_eigenmodes, fft_spectrum};
use gridattack::env::{AttackEnv, Scenario};
use gridattack::model::NetworkCase;
use gridattack::ppo::{policy_forward, Checkpoint, PolicyParams};
use gridattack::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    /// The call was not valid in the object's current state.
    Contract = 4,
    /// The grid collapsed or an integration step failed.
    Simulation = 5,
    Io = 6,
    Parse = 7,
    Model = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> GaStatus {
    match e {
        Error::Shape { .. } => GaStatus::ShapeMismatch,
        Error::Contract(_) | Error::InvalidState(_) => GaStatus::Contract,
        Error::Collapse { .. } | Error::Integration { .. } => GaStatus::Simulation,
        Error::Io(_) => GaStatus::Io,
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) | Error::Config(_) => GaStatus::Parse,
        _ => GaStatus::Model,
    }
}

struct Failure(GaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: GaStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GaStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(GaStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GaStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(fail(GaStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(fail(GaStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(GaStatus::NullPointer, format!("{what} is null")))
}

fn copy_out(src: &[f64], dst: &mut [f64], what: &str) -> Result<(), Failure> {
    if dst.len() < src.len() {
        return Err(fail(GaStatus::BufferTooSmall, format!("{what} needs {} values, buffer holds {}", src.len(), dst.len())));
    }
    dst[..src.len()].copy_from_slice(src);
    Ok(())
}

/// Copy the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ga_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ga_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque attack environment.
pub struct GaEnv {
    env: AttackEnv,
}

/// Opaque trained policy.
pub struct GaPolicy {
    params: PolicyParams,
    scenario: String,
}

fn new_env(scenario: Scenario, out: *mut *mut GaEnv) -> Result<(), Failure> {
    let env = AttackEnv::new(scenario, NetworkCase::kundur())?;
    unsafe { *out = Box::into_raw(Box::new(GaEnv { env })) };
    Ok(())
}

/// Create an environment for a bundled scenario such as `"gov-G1-narrow"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_env_new(name: *const c_char, out: *mut *mut GaEnv) -> GaStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(GaStatus::NullPointer, "out is null"));
        }
        let name = text(name, "scenario name")?;
        let scenario = Scenario::bundled(name).map_err(|e| fail(GaStatus::InvalidArgument, e.to_string()))?;
        new_env(scenario, out)
    })
}

/// Create an environment from scenario TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_env_from_toml(toml: *const c_char, out: *mut *mut GaEnv) -> GaStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(GaStatus::NullPointer, "out is null"));
        }
        let scenario = Scenario::from_toml_str(text(toml, "scenario TOML")?)?;
        new_env(scenario, out)
    })
}

/// # Safety
/// `env` must be null or a handle from `ga_env_new`/`ga_env_from_toml` not
/// already freed.
#[no_mangle]
pub unsafe extern "C" fn ga_env_free(env: *mut GaEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Observation length; 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ga_env_observation_dim(env: *const GaEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.observation_dim())
}

/// Action length; 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ga_env_action_dim(env: *const GaEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.action_dim())
}

/// Start an episode and write the first observation.
///
/// # Safety
/// `env` must be a live handle and `obs` point to `obs_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ga_env_reset(env: *mut GaEnv, seed: u64, obs: *mut f64, obs_len: usize) -> GaStatus {
    guard(|| {
        let e = handle(env, "env")?;
        let dst = slice_mut(obs, obs_len, "observation buffer")?;
        if dst.len() < e.env.observation_dim() {
            return Err(fail(GaStatus::BufferTooSmall, "observation buffer is too small"));
        }
        let first = e.env.reset(seed);
        copy_out(&first, dst, "observation")
    })
}

/// Advance one action window. `action` is in normalized units `[-1, 1]`.
///
/// # Safety
/// `env` must be a live handle, `action` point to `action_len` doubles,
/// `obs` to `obs_len` writable doubles, and `reward` and `done` to writable
/// values.
#[no_mangle]
pub unsafe extern "C" fn ga_env_step(
    env: *mut GaEnv,
    action: *const f64,
    action_len: usize,
    obs: *mut f64,
    obs_len: usize,
    reward: *mut f64,
    done: *mut bool,
) -> GaStatus {
    guard(|| {
        let e = handle(env, "env")?;
        let a = slice(action, action_len, "action")?;
        let dst = slice_mut(obs, obs_len, "observation buffer")?;
        if reward.is_null() || done.is_null() {
            return Err(fail(GaStatus::NullPointer, "reward or done is null"));
        }
        if dst.len() < e.env.observation_dim() {
            return Err(fail(GaStatus::BufferTooSmall, "observation buffer is too small"));
        }
        let r = e.env.step(a)?;
        copy_out(&r.observation, dst, "observation")?;
        *reward = r.reward;
        *done = r.done;
        Ok(())
    })
}

/// Load a checkpoint written by `gridattack train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_policy_load(path: *const c_char, out: *mut *mut GaPolicy) -> GaStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(GaStatus::NullPointer, "out is null"));
        }
        let ck = Checkpoint::load(text(path, "path")?)?;
        *out = Box::into_raw(Box::new(GaPolicy { params: ck.params, scenario: ck.scenario.name }));
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a handle from `ga_policy_load` not already freed.
#[no_mangle]
pub unsafe extern "C" fn ga_policy_free(policy: *mut GaPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Check that `policy` fits the observation and action sizes of `env`.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn ga_policy_check(policy: *const GaPolicy, env: *const GaEnv) -> GaStatus {
    guard(|| {
        let p = policy.as_ref().ok_or_else(|| fail(GaStatus::NullPointer, "policy is null"))?;
        let e = env.as_ref().ok_or_else(|| fail(GaStatus::NullPointer, "env is null"))?;
        if p.params.obs_dim() != e.env.observation_dim() || p.params.act_dim() != e.env.action_dim() {
            return Err(fail(
                GaStatus::ShapeMismatch,
                format!(
                    "policy trained on {} ({} -> {}) does not fit {} ({} -> {})",
                    p.scenario,
                    p.params.obs_dim(),
                    p.params.act_dim(),
                    e.env.scenario().name,
                    e.env.observation_dim(),
                    e.env.action_dim()
                ),
            ));
        }
        Ok(())
    })
}

/// Deterministic (mean) action for an observation.
///
/// # Safety
/// `policy` must be a live handle, `obs` point to `obs_len` doubles and
/// `action` to `action_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ga_policy_act(
    policy: *const GaPolicy,
    obs: *const f64,
    obs_len: usize,
    action: *mut f64,
    action_len: usize,
) -> GaStatus {
    guard(|| {
        let p = policy.as_ref().ok_or_else(|| fail(GaStatus::NullPointer, "policy is null"))?;
        let o = slice(obs, obs_len, "observation")?;
        let dst = slice_mut(action, action_len, "action buffer")?;
        let out = policy_forward(&p.params, o)?;
        copy_out(&out.mean, dst, "action")
    })
}

/// Dominant oscillatory eigenvalue of the bundled grid at equilibrium.
///
/// # Safety
/// `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ga_dominant_mode(re: *mut f64, im: *mut f64) -> GaStatus {
    guard(|| {
        if re.is_null() || im.is_null() {
            return Err(fail(GaStatus::NullPointer, "re or im is null"));
        }
        let report = case_eigenmodes(&NetworkCase::kundur())?;
        let mode = report.dominant.ok_or_else(|| fail(GaStatus::Model, "no oscillatory mode"))?;
        *re = mode.re;
        *im = mode.im;
        Ok(())
    })
}

/// Angular frequency, rad/s, of the largest spectral peak of a uniformly
/// sampled signal. Writes 0 for a constant signal.
///
/// # Safety
/// `signal` must point to `len` doubles and `omega` be writable.
#[no_mangle]
pub unsafe extern "C" fn ga_fft_peak(signal: *const f64, len: usize, sample_time: f64, omega: *mut f64) -> GaStatus {
    guard(|| {
        let s = slice(signal, len, "signal")?;
        if omega.is_null() {
            return Err(fail(GaStatus::NullPointer, "omega is null"));
        }
        let spectrum = fft_spectrum(s, sample_time).map_err(|e| fail(GaStatus::InvalidArgument, e.to_string()))?;
        *omega = spectrum.peak_omega().unwrap_or(0.0);
        Ok(())
    })
}
