use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crvideo::harness::{
    load_scenario, run_experiment, write_summary, write_trace, RunOptions, Sweep, SweepKey, SweepValue,
};
use crvideo::Error;

#[derive(Parser)]
#[command(name = "crvideo", version, about = "Video streaming over cognitive radio networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the summary CSV.
    Simulate {
        scenario: PathBuf,
        /// Summary CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use seeds 1..=N instead of the scenario's.
        #[arg(long)]
        seeds: Option<u64>,
        /// Comma-separated scheme names.
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
        /// Override the sweep, e.g. `gamma=0.1,0.2`.
        #[arg(long)]
        sweep: Option<String>,
        /// Also write the per-GoP or per-slot trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

fn parse_sweep(text: &str) -> Result<Sweep, Error> {
    let (key, values) = text
        .split_once('=')
        .ok_or_else(|| Error::Scenario(format!("--sweep expects key=v1,v2; got `{text}`")))?;
    let key = SweepKey::parse(key.trim())?;
    let values = values
        .split(',')
        .map(|v| {
            let v = v.trim();
            v.parse()
                .map(SweepValue::Number)
                .unwrap_or_else(|_| SweepValue::Text(v.to_string()))
        })
        .collect();
    Ok(Sweep { key, values })
}

fn sink(path: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn simulate(cmd: Command) -> Result<(), Error> {
    let Command::Simulate {
        scenario,
        out,
        seeds,
        schemes,
        sweep,
        trace,
    } = cmd;
    let mut sc = load_scenario(&scenario)?;
    if let Some(n) = seeds {
        sc.seeds = (1..=n).collect();
    }
    if let Some(s) = schemes {
        sc.schemes = s;
    }
    if let Some(s) = sweep {
        sc.sweep = Some(parse_sweep(&s)?);
    }
    sc.validate()?;
    let exp = run_experiment(&sc, &RunOptions { trace: trace.is_some() })?;
    write_summary(&exp, sink(out.as_ref())?)?;
    if let Some(t) = trace {
        write_trace(&exp, sink(Some(&t))?)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match simulate(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("crvideo: {e}");
            match e {
                Error::Scenario(_) | Error::InvalidParameter { .. } | Error::UnknownScheme { .. } | Error::Json(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(3),
            }
        }
    }
}
