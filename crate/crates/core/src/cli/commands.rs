use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;

use super::config::{RunConfig, DEFAULT_SEED};
use super::manifest::{RunDir, RunManifest};
use super::{AnalyzeArgs, AnalyzeMode, CliError, EvalArgs, TrainArgs};
use crate::analysis::{eigenmodes, fft_spectrum_series, linearize_case, trajectory_metrics};
use crate::env::{AttackEnv, Scenario};
use crate::error::Error;
use crate::model::NetworkCase;
use crate::ppo::{policy_forward, train_with_progress, Checkpoint};
use crate::protection::RelaySettings;
use crate::sim::Trajectory;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn resolve_scenario(name_or_path: &str) -> Result<Scenario, CliError> {
    Scenario::resolve(name_or_path).map_err(usage)
}

fn num(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

pub fn cmd_train(args: &TrainArgs, arguments: Vec<String>) -> Result<RunManifest, CliError> {
    let case = NetworkCase::kundur();
    let scenario = resolve_scenario(&args.scenario)?;
    let mut cfg = RunConfig::resolve(scenario, args.config.as_deref(), &args.set, &case)?;
    if let Some(seed) = args.seed {
        cfg.ppo.seed = seed;
    }
    if let Some(n) = args.num_envs {
        cfg.ppo.num_envs = n;
    }
    cfg.ppo.validate().map_err(usage)?;

    let planned: Vec<String> = ["config.toml", "checkpoint.json", "checkpoint_final.json", "learning_curve.csv"]
        .map(String::from)
        .to_vec();
    let mut manifest = RunManifest::start("train", arguments);
    manifest.scenario = Some(cfg.scenario.name.clone());
    manifest.config_hash = Some(cfg.hash());
    manifest.seed = Some(cfg.ppo.seed);
    let mut run = RunDir::open(&args.output.out, &planned, args.output.force, manifest)?;

    match train_into(&mut run, &cfg, &case, args.quiet) {
        Ok(()) => run.succeed(),
        Err(e) => Err(run.fail(e)),
    }
}

fn train_into(run: &mut RunDir, cfg: &RunConfig, case: &NetworkCase, quiet: bool) -> Result<(), CliError> {
    std::fs::write(run.path("config.toml"), cfg.to_toml()).map_err(Error::from)?;
    run.wrote("config.toml");

    let scenario = cfg.scenario.clone();
    let window = cfg.ppo.average_window;
    let outcome = train_with_progress(
        |_| AttackEnv::new(scenario.clone(), case.clone()),
        &cfg.ppo,
        |steps, curve| {
            if !quiet {
                let ma = curve.points.last().map_or(f64::NAN, |p| p.moving_average);
                eprintln!("timesteps {steps:>8}  episodes {:>5}  moving average({window}) {ma:.3}", curve.len());
            }
        },
    )?;

    outcome.curve.save_csv(run.path("learning_curve.csv"))?;
    run.wrote("learning_curve.csv");
    let final_ck = Checkpoint::new(&cfg.scenario, outcome.params.clone(), cfg.ppo.clone(), outcome.timesteps);
    final_ck.save(run.path("checkpoint_final.json"))?;
    run.wrote("checkpoint_final.json");
    let best_ck = Checkpoint::new(&cfg.scenario, outcome.best_or_final().clone(), cfg.ppo.clone(), outcome.timesteps);
    best_ck.save(run.path("checkpoint.json"))?;
    run.wrote("checkpoint.json");

    let m = &mut run.manifest;
    m.record("timesteps", outcome.timesteps);
    m.record("episodes", outcome.curve.len());
    m.record("updates", outcome.updates.len());
    m.record("failed_episodes", outcome.failed_episodes);
    m.record(
        "final_moving_average",
        num(outcome.curve.points.last().map_or(f64::NAN, |p| p.moving_average)),
    );
    match &outcome.best {
        Some(b) => {
            m.record("best_moving_average", num(b.moving_average));
            m.record("best_episode", b.episode);
            m.record("checkpoint_policy", "best");
        }
        None => m.record("checkpoint_policy", "final"),
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, arguments: Vec<String>) -> Result<RunManifest, CliError> {
    if args.episodes == 0 {
        return Err(usage("--episodes must be at least 1"));
    }
    let ck = Checkpoint::load(&args.checkpoint)
        .map_err(|e| usage(format!("cannot load checkpoint {}: {e}", args.checkpoint.display())))?;
    let scenario = match &args.scenario {
        Some(s) => resolve_scenario(s)?,
        None => ck.scenario.clone(),
    };
    let case = NetworkCase::kundur();
    let env = AttackEnv::new(scenario.clone(), case).map_err(usage)?;
    ck.check_dims(&scenario.name, env.observation_dim(), env.action_dim()).map_err(usage)?;
    let seed = args.seed.unwrap_or(DEFAULT_SEED);

    let names = |i: usize| {
        [
            format!("trajectory_{i:03}.csv"),
            format!("metrics_{i:03}.json"),
            format!("trips_{i:03}.json"),
        ]
    };
    let planned: Vec<String> = (0..args.episodes).flat_map(names).collect();
    let mut manifest = RunManifest::start("eval", arguments);
    manifest.scenario = Some(scenario.name.clone());
    manifest.seed = Some(seed);
    let mut run = RunDir::open(&args.output.out, &planned, args.output.force, manifest)?;

    let mut env = env;
    match eval_into(&mut run, &mut env, &ck, &scenario, args.episodes, seed, names) {
        Ok(()) => run.succeed(),
        Err(e) => Err(run.fail(e)),
    }
}

fn eval_into(
    run: &mut RunDir,
    env: &mut AttackEnv,
    ck: &Checkpoint,
    scenario: &Scenario,
    episodes: usize,
    seed: u64,
    names: impl Fn(usize) -> [String; 3],
) -> Result<(), CliError> {
    env.set_recording(true);
    let mut rewards = Vec::new();
    let mut peaks = Vec::new();
    let mut fastest = Vec::new();
    for i in 0..episodes {
        let mut obs = env.reset(seed.wrapping_add(i as u64));
        let mut total = 0.0;
        loop {
            let out = policy_forward(&ck.params, &obs)?;
            let step = env.step(&out.mean)?;
            total += step.reward;
            if step.done {
                break;
            }
            obs = step.observation;
        }
        let traj = env.take_trajectory().expect("recording is on");
        let metrics = trajectory_metrics(&traj, &scenario.relay);
        let [t, m, r] = names(i);
        traj.save_csv(run.path(&t))?;
        run.wrote(&t);
        metrics.save_json(run.path(&m))?;
        run.wrote(&m);
        let trips = serde_json::to_string_pretty(env.episode_trips()).map_err(Error::from)?;
        std::fs::write(run.path(&r), trips + "\n").map_err(Error::from)?;
        run.wrote(&r);
        rewards.push(num(total));
        peaks.push(num(metrics.peak_rocof_hzps));
        fastest.push(json!(metrics.fastest_area));
    }
    let m = &mut run.manifest;
    m.record("episodes", episodes);
    m.record("checkpoint_scenario", ck.scenario.name.clone());
    m.record("episode_rewards", rewards);
    m.record("peak_rocof_hzps", peaks);
    m.record("fastest_area", fastest);
    Ok(())
}

pub fn cmd_analyze(args: &AnalyzeArgs, arguments: Vec<String>) -> Result<RunManifest, CliError> {
    let input = args.input.as_deref();
    if let Some(p) = input {
        if !p.exists() {
            return Err(usage(format!("input {} does not exist", p.display())));
        }
    }
    let (output, mode) = match args.mode {
        AnalyzeMode::Eigen => ("eigenvalues.csv", "eigen"),
        AnalyzeMode::Fft => ("spectrum.csv", "fft"),
        AnalyzeMode::Metrics => ("metrics.json", "metrics"),
    };
    let input = match (args.mode, input) {
        (AnalyzeMode::Eigen, i) => i,
        (_, Some(i)) => Some(i),
        (_, None) => return Err(usage(format!("--mode {mode} needs --input"))),
    };
    let relay = match &args.scenario {
        Some(s) => resolve_scenario(s)?.relay,
        None => RelaySettings::default(),
    };
    let case = match (args.mode, input) {
        (AnalyzeMode::Eigen, Some(p)) => NetworkCase::load(p).map_err(usage)?,
        _ => NetworkCase::kundur(),
    };

    let mut manifest = RunManifest::start("analyze", arguments);
    manifest.record("mode", mode);
    if let Some(p) = input {
        manifest.record("input", p.display().to_string());
    }
    let mut run = RunDir::open(&args.output.out, &[output.to_string()], args.output.force, manifest)?;
    let result = match args.mode {
        AnalyzeMode::Eigen => analyze_eigen(&mut run, &case, args.perturbation),
        AnalyzeMode::Fft => analyze_fft(&mut run, input.expect("checked"), args.channel.as_deref()),
        AnalyzeMode::Metrics => analyze_metrics(&mut run, input.expect("checked"), &case, &relay),
    };
    match result {
        Ok(()) => {
            run.wrote(output);
            run.succeed()
        }
        Err(e) => Err(run.fail(e)),
    }
}

fn analyze_eigen(run: &mut RunDir, case: &NetworkCase, eps: f64) -> Result<(), CliError> {
    let report = eigenmodes(&linearize_case(case, eps)?)?;
    report.save_csv(run.path("eigenvalues.csv"))?;
    let m = &mut run.manifest;
    m.record("eigenvalues", report.len());
    if let Some(d) = report.dominant {
        m.record("dominant_re", num(d.re));
        m.record("dominant_im", num(d.im));
        m.record("dominant_freq_hz", num(d.im / std::f64::consts::TAU));
        m.record("dominant_damping_ratio", num(-d.re / d.norm()));
    }
    Ok(())
}

fn analyze_fft(run: &mut RunDir, input: &Path, channel: Option<&str>) -> Result<(), CliError> {
    let (name, times, values) = read_series(input, channel)?;
    let spectrum = fft_spectrum_series(&times, &values)?;
    spectrum.save_csv(run.path("spectrum.csv"))?;
    let m = &mut run.manifest;
    m.record("channel", name);
    m.record("samples", spectrum.samples);
    m.record("sample_time_s", num(spectrum.sample_time));
    m.record("bin_width_radps", num(spectrum.bin_width()));
    m.record("peak_omega_radps", spectrum.peak_omega().map_or(serde_json::Value::Null, num));
    Ok(())
}

fn analyze_metrics(run: &mut RunDir, input: &Path, case: &NetworkCase, relay: &RelaySettings) -> Result<(), CliError> {
    let traj = Trajectory::load_csv(input, case)?;
    if traj.is_empty() {
        return Err(CliError::Runtime(Error::Parse {
            path: input.to_path_buf(),
            line: 2,
            msg: "trajectory has no rows".into(),
        }));
    }
    let metrics = trajectory_metrics(&traj, relay);
    metrics.save_json(run.path("metrics.json"))?;
    let m = &mut run.manifest;
    m.record("rows", traj.len());
    m.record("peak_rocof_hzps", num(metrics.peak_rocof_hzps));
    m.record("fastest_area", json!(metrics.fastest_area));
    Ok(())
}

/// Read the time column (first) and one value column of a CSV file.
///
/// Without `channel` the first `inj_` column is used, or else the second
/// column. `channel` matches a header exactly or after an `inj_` prefix.
pub fn read_series(path: &Path, channel: Option<&str>) -> crate::Result<(String, Vec<f64>, Vec<f64>)> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 2 {
        return Err(parse_err(1, "need a time column and at least one value column".into()));
    }
    let col = match channel {
        Some(c) => header
            .iter()
            .position(|h| h == c || h.strip_prefix("inj_") == Some(c))
            .ok_or_else(|| parse_err(1, format!("no column named {c:?}")))?,
        None => header.iter().position(|h| h.starts_with("inj_")).unwrap_or(1),
    };
    if col == 0 {
        return Err(parse_err(1, "the first column holds time, not a signal".into()));
    }
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let field = |k: usize| -> crate::Result<f64> {
            let s = rec.get(k).ok_or_else(|| parse_err(line, format!("missing column {}", k + 1)))?;
            s.trim().parse().map_err(|_| parse_err(line, format!("not a number: {s:?}")))
        };
        times.push(field(0)?);
        values.push(field(col)?);
    }
    Ok((header[col].clone(), times, values))
}

pub fn cmd_list_scenarios() -> String {
    let mut out = String::new();
    for s in Scenario::catalog() {
        let _ = writeln!(out, "{}", s.name);
        if !s.description.is_empty() {
            let _ = writeln!(out, "    {}", s.description);
        }
        for p in &s.injection {
            let unit = if p.kind.is_frequency() { "Hz" } else { "pu" };
            let _ = writeln!(out, "    {:<16} [{}, {}] {unit}", p.name(), p.lo, p.hi);
        }
    }
    out
}
