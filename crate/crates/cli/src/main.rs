use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use epcert::channel::PRESETS;
use epcert::protocol::RunOutcome;
use epcert::scenario::{replay_trial, run_analysis, run_scenario, MetricsReport, ScenarioConfig, SweepSpec};
use epcert::{Rational64, Scalar};

#[derive(Debug, Parser)]
#[command(name = "epcert", version, about = "Endpoint certification simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute a scenario file and print the metrics report
    Run(RunArgs),
    /// Evaluate a sweep file and print one CSV row per grid point
    Analyze(AnalyzeArgs),
    /// List the built-in channel presets
    Presets,
}

#[derive(Debug, Args)]
struct Common {
    /// Override the seed from the file
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of trials
    #[arg(long)]
    trials: Option<u64>,
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use exact rational time instead of f64
    #[arg(long)]
    exact: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    scenario: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Also write the per-run rows as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write chain, channel trace and registry of the first trial into DIR
    #[arg(long, value_name = "DIR")]
    dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    sweep: PathBuf,
    #[command(flatten)]
    common: Common,
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            match stdout.write_all(bytes).and_then(|()| stdout.flush()) {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                r => Ok(r?),
            }
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn report(config: &ScenarioConfig, exact: bool) -> Result<MetricsReport> {
    let r = if exact {
        run_scenario::<Rational64>(config)
    } else {
        run_scenario::<f64>(config)
    };
    Ok(r?)
}

fn dump<T: Scalar>(outcome: &RunOutcome<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let file = |name: &str| {
        let path = dir.join(name);
        fs::File::create(&path).with_context(|| format!("writing {}", path.display()))
    };
    outcome.ledger.write_dump(file("chain.csv")?)?;
    outcome.channel.write_trace(file("trace.csv")?)?;
    outcome.registry.write_export(file("registry.csv")?)?;
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let text = read(&args.scenario)?;
    let mut config = ScenarioConfig::from_toml(&text).with_context(|| args.scenario.display().to_string())?;
    if let Some(seed) = args.common.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.common.trials {
        config.trials = trials;
    }
    let report = report(&config, args.common.exact)?;

    let mut rows = Vec::new();
    if args.csv.is_some() {
        report.write_rows_csv(&mut rows)?;
    }
    if let Some(dir) = &args.dump {
        if args.common.exact {
            dump(&replay_trial::<Rational64>(&config, 0)?, dir)?;
        } else {
            dump(&replay_trial::<f64>(&config, 0)?, dir)?;
        }
    }
    if let Some(path) = &args.csv {
        fs::write(path, rows).with_context(|| format!("writing {}", path.display()))?;
    }
    emit(args.common.out.as_deref(), report.to_toml().as_bytes())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let text = read(&args.sweep)?;
    let spec = SweepSpec::from_toml(&text).with_context(|| args.sweep.display().to_string())?;
    let mut buf = Vec::new();
    let (trials, seed) = (args.common.trials, args.common.seed);
    if args.common.exact {
        run_analysis::<Rational64, _>(&spec, trials, seed, &mut buf)?;
    } else {
        run_analysis::<f64, _>(&spec, trials, seed, &mut buf)?;
    }
    emit(args.common.out.as_deref(), &buf)
}

fn presets() -> Result<()> {
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record([
        "name",
        "message",
        "per_message_time",
        "delivery_delay",
        "spoofable",
        "eavesdroppable",
        "cost_per_message",
        "suggested",
    ])?;
    for p in &PRESETS {
        let ratio = |(n, d): (i64, i64)| Rational64::new(n, d).to_string();
        w.write_record([
            p.name.to_string(),
            p.message.to_string(),
            ratio(p.per_message_time),
            ratio(p.delivery_delay),
            p.spoofable.to_string(),
            p.eavesdroppable.to_string(),
            p.cost_per_message.to_string(),
            p.suggested.to_string(),
        ])?;
    }
    Ok(w.flush()?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Analyze(args) => analyze(args),
        Command::Presets => presets(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
