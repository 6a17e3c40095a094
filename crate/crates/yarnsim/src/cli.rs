//! Command-line entry points: `simulate`, `estimate`, `gradcheck`,
//! `control`.
//!
//! Exit codes: 0 success, 1 usage, 2 configuration, 3 numerical failure,
//! 4 gradcheck failure. `YARNSIM_THREADS` caps internal parallelism.

use crate::estimation::{estimate, learn_control, GroundTruth, Scenario, TrainConfig};
use crate::io::{config::ConfigFile, frames, obj, report, write_atomic, IoError};
use crate::params::{ModelConsts, Params};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_GRADCHECK: i32 = 4;

#[derive(Parser)]
#[command(
    name = "yarnsim",
    about = "Differentiable yarn-level woven-fabric simulator",
    disable_help_subcommand = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Forward-simulate a scenario and write the trajectory
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// override sim.steps
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Estimate yarn parameters from an observed trajectory
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// ground-truth trajectory (frame file)
        #[arg(long)]
        gt: PathBuf,
        /// report path; the loss history lands next to it as <out>.loss.csv
        #[arg(long)]
        out: PathBuf,
        /// override train.frames
        #[arg(long)]
        frames: Option<usize>,
        /// override train.seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Verify analytic Jacobians and end-to-end gradients
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        /// write the report here as well as to stdout
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Learn corner control forces for the throw task
    Control {
        #[arg(long)]
        config: PathBuf,
        /// forces file; the loss history lands next to it as <out>.loss.csv
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Parse args and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // help/version requests are not usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

struct CliError {
    code: i32,
    message: String,
}

fn config_err(e: IoError) -> CliError {
    CliError { code: EXIT_CONFIG, message: e.to_string() }
}

fn numerical_err(e: impl std::fmt::Display) -> CliError {
    CliError { code: EXIT_NUMERICAL, message: e.to_string() }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate { config, out, steps } => cmd_simulate(&config, &out, steps),
        Command::Estimate { config, gt, out, frames, seed } => {
            cmd_estimate(&config, &gt, &out, frames, seed)
        }
        Command::Gradcheck { config, out, seed } => cmd_gradcheck(&config, out.as_deref(), seed),
        Command::Control { config, out, seed } => cmd_control(&config, &out, seed),
    }
}

fn load_scenario(path: &Path) -> Result<(ConfigFile, Scenario, Params, ModelConsts), CliError> {
    let cfg = ConfigFile::load(path).map_err(config_err)?;
    let scenario = cfg.scenario().map_err(config_err)?;
    let params = cfg.params().map_err(config_err)?;
    let consts = cfg.consts;
    Ok((cfg, scenario, params, consts))
}

fn cmd_simulate(config: &Path, out: &Path, steps: Option<usize>) -> Result<(), CliError> {
    let (cfg, mut scenario, params, mc) = load_scenario(config)?;
    if let Some(s) = steps {
        scenario.n_steps = s;
    }
    let started = std::time::Instant::now();
    let start = crate::estimation::settled_start(&scenario, &params, &mc).map_err(numerical_err)?;
    let (fab, _, cons, ext) = scenario.build().map_err(numerical_err)?;
    let (traj, _) = crate::integrator::simulate(
        &fab,
        &start,
        &params,
        &mc,
        &ext,
        &cons,
        &crate::integrator::SimOptions { h: scenario.h, ..Default::default() },
        scenario.n_steps,
    )
    .map_err(numerical_err)?;
    frames::write(out, &fab, &traj).map_err(config_err)?;
    if let Some(obj_path) = &cfg.output.obj {
        let text = obj::centerlines(&fab, traj.last().expect("nonempty trajectory"));
        write_atomic(Path::new(obj_path), &text).map_err(config_err)?;
    }
    let min_du = traj
        .iter()
        .map(|st| fab.min_du(&st.q))
        .fold(f64::INFINITY, f64::min);
    println!(
        "simulated {} steps in {:.2?}; min Eulerian gap {:.3e}; wrote {}",
        scenario.n_steps,
        started.elapsed(),
        min_du,
        out.display()
    );
    Ok(())
}

fn cmd_estimate(
    config: &Path,
    gt_path: &Path,
    out: &Path,
    frames_override: Option<usize>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let (cfg, scenario, truth, mc) = load_scenario(config)?;
    let (fab, _, _, _) = scenario.build().map_err(numerical_err)?;
    let loaded = frames::load(gt_path, &fab).map_err(config_err)?;
    let mut gt: GroundTruth = loaded.ground_truth;
    let mut train: TrainConfig = cfg.train_config();
    if let Some(f) = frames_override {
        train.frames_used = f;
    }
    if let Some(s) = seed {
        train.seed = s;
    }
    if cfg.train.noise_sigma > 0.0 {
        gt = gt.with_observation_noise(cfg.train.noise_sigma, train.seed);
    }
    let result = estimate(&scenario, &gt, &train, &truth, &mc).map_err(numerical_err)?;
    let text = report::estimate_report(&result.keys, &result.params, &train.bounds, Some(&truth));
    write_atomic(out, &text).map_err(config_err)?;
    let loss_csv = report::loss_history_csv(&result.loss_history);
    write_atomic(&out.with_extension("loss.csv"), &loss_csv).map_err(config_err)?;
    print!("{text}");
    println!(
        "final training loss {:.3e}; report at {}",
        result.loss_history.last().copied().unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

fn cmd_gradcheck(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(), CliError> {
    let (_cfg, scenario, _params, _mc) = load_scenario(config)?;
    if scenario.spec.rows > 10 || scenario.spec.cols > 10 {
        return Err(CliError {
            code: EXIT_CONFIG,
            message: "gradcheck wants a small grid (at most 10x10)".into(),
        });
    }
    let seed = seed.unwrap_or(1234);
    let threads = crate::max_threads();
    let mut results = Vec::new();
    // per-force-model batteries are independent: fan out across threads
    let states = 100;
    let batteries: Vec<fn(usize, u64) -> Vec<crate::verify::CheckResult>> = vec![
        crate::verify::check_inertia,
        crate::verify::check_stretch,
        crate::verify::check_bend,
        crate::verify::check_shear,
        crate::verify::check_friction,
        crate::verify::check_collision,
        crate::verify::check_gravity,
        crate::verify::check_wind,
    ];
    let chunk = batteries.len().div_ceil(threads.max(1));
    let partials: Vec<Vec<crate::verify::CheckResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = batteries
            .chunks(chunk)
            .enumerate()
            .map(|(ci, group)| {
                scope.spawn(move || {
                    group
                        .iter()
                        .enumerate()
                        .flat_map(|(gi, f)| f(states, seed + (ci * chunk + gi) as u64))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("battery thread")).collect()
    });
    for p in partials {
        results.extend(p);
    }
    results.extend(crate::verify::check_contact(20, seed + 8));
    let steps = scenario.n_steps.min(10).max(3);
    results.extend(crate::verify::check_end_to_end(steps, seed + 9));
    let text = crate::verify::render(&results);
    print!("{text}");
    if let Some(path) = out {
        write_atomic(path, &text).map_err(config_err)?;
    }
    if crate::verify::all_passed(&results) {
        Ok(())
    } else {
        Err(CliError { code: EXIT_GRADCHECK, message: "gradient checks failed".into() })
    }
}

fn cmd_control(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let (cfg, scenario, params, mc) = load_scenario(config)?;
    if scenario.target().is_none() {
        return Err(CliError {
            code: EXIT_CONFIG,
            message: "control needs scenario.kind = \"throw_to_box\" with a target".into(),
        });
    }
    let _ = seed; // the control task is deterministic; flag accepted for interface parity
    let result = learn_control(&scenario, cfg.control.epochs, cfg.control.lr, &mc, &params)
        .map_err(numerical_err)?;
    write_atomic(out, &report::control_forces_csv(&result.forces)).map_err(config_err)?;
    write_atomic(
        &out.with_extension("loss.csv"),
        &report::loss_history_csv(&result.loss_history),
    )
    .map_err(config_err)?;
    let first = result.loss_history.first().copied().unwrap_or(f64::NAN);
    let last = result.loss_history.last().copied().unwrap_or(f64::NAN);
    println!(
        "control loss {:.4e} -> {:.4e} over {} epochs; forces at {}",
        first,
        last,
        result.loss_history.len(),
        out.display()
    );
    Ok(())
}
