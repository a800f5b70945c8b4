mod args;
mod jobs;
mod manifest;
mod resolve;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use args::{Cli, Command};
use jobs::{manifest_path, Job};
use manifest::Manifest;

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

enum Failure {
    Usage(String),
    Core(cloudqnn::Error),
}

impl From<cloudqnn::Error> for Failure {
    fn from(e: cloudqnn::Error) -> Self {
        Failure::Core(e)
    }
}

fn exit_code(e: &cloudqnn::Error) -> u8 {
    use cloudqnn::Error::*;
    match e {
        Config(_) => EXIT_USAGE,
        NonFiniteLoss { .. } | Numerical(_) => EXIT_NUMERICAL,
        Io { .. } => EXIT_IO,
        Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { EXIT_USAGE } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot start thread pool: {e}")))?;
    }

    let mut replayed_from: Option<PathBuf> = None;
    let job = match cli.command {
        Command::Synth(a) => resolve::synth(a)?,
        Command::Train(a) => resolve::train(a)?,
        Command::Eval(a) => resolve::eval(a),
        Command::ShotSweep(a) => resolve::shot_sweep(a),
        Command::Shap(a) => resolve::shap(a)?,
        Command::Compare(a) => resolve::compare(a)?,
        Command::Replay(a) => {
            let mut job = Manifest::load(&a.manifest)?.job;
            if let Some(out) = a.out {
                job.set_out(out);
            }
            replayed_from = Some(a.manifest);
            job
        }
    };
    execute(&job, cli.force, replayed_from)
}

fn execute(job: &Job, force: bool, replayed_from: Option<PathBuf>) -> Result<(), Failure> {
    if !force {
        if let Some(existing) = job.outputs().into_iter().find(|p| p.exists()) {
            return Err(Failure::Usage(format!(
                "{} already exists (pass --force to overwrite)",
                existing.display()
            )));
        }
    }
    let started = Instant::now();
    log::info!("running {}", job.name());
    let outcome = job.run()?;
    let manifest = Manifest::new(job, outcome.summary, started.elapsed().as_secs_f64(), replayed_from);
    manifest.save(&manifest_path(job.out()))?;
    if let Some(report) = outcome.report {
        println!("{report}");
    }
    Ok(())
}
