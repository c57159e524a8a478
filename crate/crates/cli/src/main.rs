use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ppcontrol::harness::{run_control_method, run_experiment, scenario, tilting_check, ExperimentConfig, Method, Task};
use ppcontrol::mpc::run_mpc;
use ppcontrol::point_process::{fit_mle, EventSequence, ModelFamily};
use ppcontrol::rng::SeedStream;
use ppcontrol::sde::simulate_trajectory;
use ppcontrol::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ppcontrol",
    version,
    about = "Variational control of point-process driven systems"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces the configured seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured sample count.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Study {
    Opinion,
    Broadcast,
    Heldout,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured system without control.
    Simulate(RunArgs),
    /// Fit a model to an event CSV (`time,dim`).
    Fit {
        #[arg(long)]
        events: PathBuf,
        #[arg(long, default_value = "poisson")]
        family: String,
        #[arg(long)]
        dims: Option<usize>,
        /// Observation window `start,end`; defaults to the event span.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
    /// Run one control method and save its run.
    Control {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "kl-mpc")]
        method: String,
    },
    /// Run a study and write its report.
    Experiment {
        study: Study,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check the sampled estimator against the exact exponential-tilting answer.
    Selftest {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected start,end")?;
    let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(samples) = args.samples {
        cfg.control.samples = samples;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(args: &RunArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let seed = cfg.seeds[0];
    let sc = scenario(&cfg, seed)?;
    let end = sc.start.time() + cfg.control.horizon;
    let traj = simulate_trajectory(
        &sc.system,
        &sc.start,
        end,
        cfg.control.euler_step,
        ppcontrol::point_process::IntensityControl::None,
        &SeedStream::new(seed),
    )?;
    create_dir(&args.out)?;
    traj.events().save_csv(&args.out.join("events.csv"))?;
    traj.save_csv(&args.out.join("trajectory.csv"))?;
    println!(
        "simulated {} events over [{}, {}], state cost {:.6}",
        traj.events().len(),
        sc.start.time(),
        end,
        sc.cost.state_cost(&traj)?
    );
    Ok(())
}

fn fit(events: &Path, family: &str, dims: Option<usize>, window: Option<(f64, f64)>) -> Result<()> {
    let family: ModelFamily = family.parse()?;
    let seq = EventSequence::load_csv(events, dims, window)?;
    let fit = fit_mle(&seq, family)?;
    let m = &fit.model;
    println!("family: {family:?}");
    println!("window: [{}, {}] events {}", seq.start(), seq.end(), seq.len());
    println!("mu: {:?}", m.mu());
    if family == ModelFamily::Hawkes1d {
        println!("alpha: {}", m.alpha(0, 0));
        println!("omega: {}", m.omega());
    }
    println!("log_likelihood: {}", fit.log_likelihood);
    println!("converged: {} degenerate: {}", fit.converged, fit.degenerate);
    Ok(())
}

fn control(args: &RunArgs, method: &str) -> Result<()> {
    let cfg = load_config(args)?;
    let method: Method = method.parse()?;
    let seed = cfg.seeds[0];
    let sc = scenario(&cfg, seed)?;
    let stream = SeedStream::new(seed);
    let reference = if method == Method::Greedy {
        Some(run_mpc(&sc.system, &sc.cost, &sc.start, &cfg.control, &stream)?)
    } else {
        None
    };
    let run = run_control_method(
        method,
        &sc,
        &sc.start,
        &cfg,
        &cfg.baseline.greedy,
        reference.as_ref(),
        &stream,
    )?;
    run.save(&args.out)?;
    println!(
        "{method}: state cost {:.6} control cost {:.6} terminal/initial {:.6}",
        run.state_cost,
        run.control_cost,
        run.terminal_cost / run.initial_cost
    );
    Ok(())
}

fn experiment(study: Study, args: &RunArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let expected = match study {
        Study::Opinion => Task::Opinion,
        Study::Broadcast => Task::Broadcast,
        Study::Heldout => Task::Heldout,
    };
    if cfg.task != expected {
        return Err(Error::Config(format!(
            "config task is {} but {expected} was requested",
            cfg.task
        )));
    }
    let report = run_experiment(&cfg)?;
    report.save(&args.out)?;
    print!("{}", report.summary());
    let failed = report.records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        log::warn!("{failed} of {} runs failed; see report.csv", report.records.len());
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Fit {
            events,
            family,
            dims,
            window,
        } => fit(events, family, *dims, *window),
        Command::Control { run, method } => control(run, method),
        Command::Experiment { study, run } => experiment(*study, run),
        Command::Selftest { samples, seed } => {
            let check = tilting_check(*samples, *seed)?;
            let ok = check.passes(0.02);
            println!(
                "tilting oracle: estimate {:.5} exact {:.5} -> {}",
                check.estimate,
                check.exact,
                if ok { "pass" } else { "FAIL" }
            );
            if ok {
                Ok(())
            } else {
                Err(Error::Estimation("selftest estimate outside tolerance".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
