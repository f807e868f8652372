use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ofdp_lab::report::{audit, compare, run, RunReport};
use ofdp_lab::scenario::{load_scenario, Scenario, ScenarioError};

const EXIT_IO: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "ofdp-lab", version, about = "Run and compare OpenFlow topology discovery scenarios")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a scenario and write its report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Writes the packet trace as one JSON object per line.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Tabulate two or more reports as CSV.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a scenario without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_IO,
            msg: format!("{}: {e}", path.display()),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match e {
            ScenarioError::Io { .. } => EXIT_IO,
            _ => EXIT_INVALID,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Ok(load_scenario(path)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

fn cmd_run(scenario: &Path, seed: Option<u64>, out: Option<&Path>, trace: Option<&Path>) -> Result<(), Failure> {
    let mut scn = load(scenario)?;
    if let Some(s) = seed {
        scn.spec.seed = s;
    }
    let result = run(&scn).map_err(|e| Failure {
        code: EXIT_RUNTIME,
        msg: e.to_string(),
    })?;
    if let Err(problems) = audit(&result.report, &result.trace) {
        return Err(Failure {
            code: EXIT_RUNTIME,
            msg: format!("report failed its own audit:\n  - {}", problems.join("\n  - ")),
        });
    }
    if let Some(path) = trace {
        let f = File::create(path).map_err(|e| Failure::io(path, e))?;
        let mut w = BufWriter::new(f);
        for entry in &result.trace {
            serde_json::to_writer(&mut w, entry).map_err(|e| Failure::io(path, e))?;
            w.write_all(b"\n").map_err(|e| Failure::io(path, e))?;
        }
        w.flush().map_err(|e| Failure::io(path, e))?;
    }
    let json = result.report.to_json();
    match out {
        Some(path) => write_file(path, json.as_bytes()),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn cmd_compare(paths: &[PathBuf], out: &Path) -> Result<(), Failure> {
    let mut reports = Vec::with_capacity(paths.len());
    for p in paths {
        let text = std::fs::read_to_string(p).map_err(|e| Failure::io(p, e))?;
        let r: RunReport = serde_json::from_str(&text).map_err(|e| Failure {
            code: EXIT_INVALID,
            msg: format!("{}: not a report: {e}", p.display()),
        })?;
        reports.push(r);
    }
    let csv = compare(&reports).map_err(|e| Failure {
        code: EXIT_INVALID,
        msg: e.to_string(),
    })?;
    write_file(out, csv.as_bytes())
}

fn cmd_validate(scenario: &Path) -> Result<(), Failure> {
    let scn = load(scenario)?;
    println!(
        "ok: {} switches, {} links, {} events, {} attackers",
        scn.truth.switch_count(),
        scn.truth.link_count(),
        scn.spec.events.len(),
        scn.spec.attackers.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run {
            scenario,
            seed,
            out,
            trace,
        } => cmd_run(scenario, *seed, out.as_deref(), trace.as_deref()),
        Cmd::Compare { reports, out } => cmd_compare(reports, out),
        Cmd::Validate { scenario } => cmd_validate(scenario),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
