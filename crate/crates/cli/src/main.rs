use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use robustune::coordinator::{replay, run_experiment, Clock, CoordinatorError, RunOptions, SimulatedClock, Summary, SystemClock};
use robustune::description::validate_description;
use robustune::doe::{full_factorial, DesignError};
use robustune::harness::build_target;
use robustune::model::{StrategySpec, TargetSpec};
use robustune::report::{generate_report, ReportError};
use robustune::store::{self, Store, StoreError};
use robustune::strategy::{build_strategy, StrategyError, TaguchiStrategy};
use robustune::{parse_experiment_description, DescriptionError, ExperimentDescription};

/// Grid designs larger than this are refused.
const GRID_CAP: usize = 1_000_000;

#[derive(Parser)]
#[command(name = "robustune", version, about = "Designed experiments for tuning configurable servers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an experiment description and summarize it.
    Validate { description: PathBuf },
    /// Print the design the strategy starts from, without running anything.
    Design { description: PathBuf },
    /// Run an experiment into a new output directory.
    Run {
        description: PathBuf,
        /// Free-form environment notes, copied into the store.
        environment: PathBuf,
        outdir: PathBuf,
        /// Stop once the Taguchi first phase is complete; `resume` continues.
        #[arg(long)]
        stop_after_phase1: bool,
        /// Stop after this many trials; `resume` continues.
        #[arg(long)]
        max_trials: Option<usize>,
    },
    /// Continue an interrupted or stopped experiment.
    Resume {
        outdir: PathBuf,
        #[arg(long)]
        max_trials: Option<usize>,
    },
    /// Summarize stored results.
    Analyze { outdir: PathBuf },
    /// Write report tables for stored results.
    Report {
        outdir: PathBuf,
        /// Where to write the tables; defaults to `<outdir>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Description(#[from] DescriptionError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Coordinator(#[from] CoordinatorError),
    #[error(transparent)]
    Report(#[from] ReportError),
    /// Flags that do not fit the description; exits like a clap usage error.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Unsupported(String),
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_description(path: &Path) -> Result<ExperimentDescription, CliError> {
    let d = parse_experiment_description(&read(path)?)?;
    validate_description(&d)?;
    Ok(d)
}

fn validate(path: &Path) -> Result<(), CliError> {
    let d = load_description(path)?;
    let target = match &d.target {
        TargetSpec::Commands { .. } => "external commands",
        TargetSpec::Synthetic(_) => "synthetic",
    };
    println!("{}: valid", path.display());
    println!(
        "{} control factors, {} noise factors, {} metrics",
        d.control_factors().count(),
        d.noise_factors().count(),
        d.metrics.len()
    );
    println!("strategy {}, target {target}, seed {}", d.strategy.name(), d.seed);
    Ok(())
}

fn design(path: &Path) -> Result<(), CliError> {
    let d = load_description(path)?;
    match &d.strategy {
        StrategySpec::Taguchi(t) => {
            let s = TaguchiStrategy::new(&d.factors, t.clone(), d.seed)?;
            println!("# array {}, {} replications", s.array().name, t.replications);
            print!("{}", s.current_design().to_tsv());
        }
        StrategySpec::Grid { replications } => {
            println!("# full factorial, {replications} replications");
            print!("{}", full_factorial(&d.factors, GRID_CAP)?.to_tsv());
        }
        other => {
            return Err(CliError::Unsupported(format!(
                "the {} strategy chooses points as it goes and has no fixed design",
                other.name()
            )))
        }
    }
    Ok(())
}

/// Synthetic targets run on simulated time, starting from `offset`.
fn clock_for(d: &ExperimentDescription, offset: f64) -> Box<dyn Clock> {
    match &d.target {
        TargetSpec::Synthetic(s) => {
            let mut c = SimulatedClock::new(s.trial_seconds);
            c.time = offset;
            Box::new(c)
        }
        TargetSpec::Commands { .. } => Box::new(SystemClock::starting_at(offset)),
    }
}

fn phase1_trials(d: &ExperimentDescription) -> Result<usize, CliError> {
    let StrategySpec::Taguchi(t) = &d.strategy else {
        return Err(CliError::Usage("--stop-after-phase1 needs the taguchi strategy".into()));
    };
    let s = TaguchiStrategy::new(&d.factors, t.clone(), d.seed)?;
    Ok(s.current_design().len() * t.replications)
}

fn finish(st: &Store, summary: &Summary) -> Result<(), CliError> {
    write(&st.dir().join("results.tsv"), &st.export_tab_separated())?;
    println!(
        "{} trials this session ({} failed), {} stored, {:.1} s",
        summary.trials,
        summary.failures,
        st.len(),
        summary.elapsed
    );
    if summary.budget_stop {
        println!("stopped: time limit reached");
    } else if summary.interrupted {
        println!("stopped early; continue with `robustune resume {}`", st.dir().display());
        return Ok(());
    }
    match generate_report(st.description(), st.records()) {
        Ok(bundle) => {
            bundle.write_to(&st.dir().join("report"))?;
            println!("report written to {}", st.dir().join("report").display());
        }
        Err(e) => log::warn!("no report: {e}"),
    }
    Ok(())
}

fn run(desc_path: &Path, env_path: &Path, outdir: &Path, stop_after_phase1: bool, max_trials: Option<usize>) -> Result<(), CliError> {
    let desc_text = read(desc_path)?;
    let d = parse_experiment_description(&desc_text)?;
    validate_description(&d)?;
    let env_text = read(env_path)?;
    let mut limit = max_trials;
    if stop_after_phase1 {
        let n = phase1_trials(&d)?;
        limit = Some(limit.map_or(n, |l| l.min(n)));
    }
    let mut strategy = build_strategy(&d)?;
    let mut st = Store::create(outdir, &desc_text, &env_text)?;
    let mut target = build_target(&d);
    let mut clock = clock_for(&d, 0.0);
    let summary = run_experiment(
        &d,
        strategy.as_mut(),
        target.as_mut(),
        &mut st,
        clock.as_mut(),
        0,
        &RunOptions { trial_limit: limit },
    )?;
    finish(&st, &summary)
}

fn resume(outdir: &Path, max_trials: Option<usize>) -> Result<(), CliError> {
    let (mut st, warnings) = Store::resume(outdir)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let d = st.description().clone();
    let done = st.records().to_vec();
    let mut strategy = build_strategy(&d)?;
    replay(strategy.as_mut(), &done)?;
    println!("resuming after {} stored trials", done.len());
    let mut target = build_target(&d);
    let mut clock = clock_for(&d, done.last().map_or(0.0, |r| r.timestamp));
    let summary = run_experiment(
        &d,
        strategy.as_mut(),
        target.as_mut(),
        &mut st,
        clock.as_mut(),
        done.len() as u64,
        &RunOptions { trial_limit: max_trials },
    )?;
    finish(&st, &summary)
}

fn analyze(outdir: &Path) -> Result<(), CliError> {
    let loaded = store::load(outdir)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let d = &loaded.description;
    let records = &loaded.records;
    let mut strategy = build_strategy(d)?;
    replay(strategy.as_mut(), records)?;
    let failed = records.iter().filter(|r| r.response.is_none()).count();
    println!("trials\t{}", records.len());
    println!("failed\t{failed}");
    println!("strategy\t{}", strategy.name());
    println!("finished\t{}", strategy.is_finished());
    if let Some((c, y)) = strategy.best() {
        println!("best\t{c}\t{y}");
    }
    if let Some(c) = strategy.recommendation() {
        println!("recommendation\t{c}");
    }
    Ok(())
}

fn report(outdir: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let loaded = store::load(outdir)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let bundle = generate_report(&loaded.description, &loaded.records)?;
    let out = out.unwrap_or_else(|| outdir.join("report"));
    bundle.write_to(&out)?;
    for (name, _) in &bundle.files {
        println!("{}", out.join(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { description } => validate(&description),
        Command::Design { description } => design(&description),
        Command::Run {
            description,
            environment,
            outdir,
            stop_after_phase1,
            max_trials,
        } => run(&description, &environment, &outdir, stop_after_phase1, max_trials),
        Command::Resume { outdir, max_trials } => resume(&outdir, max_trials),
        Command::Analyze { outdir } => analyze(&outdir),
        Command::Report { outdir, out } => report(&outdir, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, CliError::Usage(_)) { 2 } else { 1 })
        }
    }
}
