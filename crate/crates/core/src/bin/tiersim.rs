use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use tiersim::workload::read_trace;
use tiersim::{compare, run_scenario, ScenarioConfig};

#[derive(Parser)]
#[command(name = "tiersim", version, about = "Two-tier memory placement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its time series and summary.
    Run {
        config: PathBuf,
        /// Series CSV path (overrides output.series; `-` for stdout).
        #[arg(long)]
        series: Option<PathBuf>,
        /// Summary CSV path (overrides output.summary).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run several policies on one workload and tabulate cost against a
    /// baseline.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        baseline: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a trace file and print per-process statistics.
    TraceValidate { file: PathBuf },
}

fn open_out(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        None => Box::new(io::stdout().lock()),
        Some(p) if p == Path::new("-") => Box::new(io::stdout().lock()),
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
    })
}

fn run(config: &Path, series: Option<PathBuf>, summary: Option<PathBuf>) -> anyhow::Result<()> {
    let cfg = ScenarioConfig::load(config)?;
    let report = run_scenario(&cfg)?;
    let series = series.or(cfg.series_path.clone());
    let summary = summary.or(cfg.summary_path.clone());
    let mut w = open_out(series.as_deref())?;
    report.write_series_csv(&mut w)?;
    w.flush()?;
    if let Some(p) = summary {
        let mut w = open_out(Some(&p))?;
        report.write_summary_csv(&mut w)?;
        w.flush()?;
    } else {
        for p in &report.processes {
            eprintln!("process {} ({}): total {} ns, {} promotions, {} stops, {} restarts", p.id, p.label, p.ledger.total(), p.ledger.promotions, p.ledger.stops, p.ledger.restarts);
        }
    }
    Ok(())
}

fn compare_cmd(configs: &[PathBuf], baseline: &Path, out: Option<PathBuf>) -> anyhow::Result<()> {
    let base = ScenarioConfig::load(baseline)?;
    let loaded: Vec<(String, ScenarioConfig)> =
        configs.iter().map(|p| Ok((p.display().to_string(), ScenarioConfig::load(p)?))).collect::<anyhow::Result<_>>()?;
    let others: Vec<(&str, &ScenarioConfig)> = loaded.iter().map(|(n, c)| (n.as_str(), c)).collect();
    let base_name = baseline.display().to_string();
    let table = compare((&base_name, &base), &others)?;
    let mut w = open_out(out.as_deref())?;
    table.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn trace_validate(file: &Path) -> anyhow::Result<()> {
    let records = read_trace(file)?;
    let mut per_pid = std::collections::BTreeMap::<u32, (u64, u64)>::new();
    for r in &records {
        let e = per_pid.entry(r.pid).or_default();
        e.0 += 1;
        e.1 = e.1.max(r.page + 1);
    }
    println!("{}: {} records", file.display(), records.len());
    for (pid, (n, rss)) in per_pid {
        println!("  pid {pid}: {n} accesses over {rss} pages");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, series, summary } => run(&config, series, summary),
        Command::Compare { configs, baseline, out } => compare_cmd(&configs, &baseline, out),
        Command::TraceValidate { file } => trace_validate(&file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
