use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use routesim_core::report::comparison_table;
use routesim_core::{compare, parse_scenario, reference, run_scenario, serialize_scenario};
use routesim_core::{Protocol, Scenario, SimOptions};

#[derive(Parser)]
#[command(name = "routesim", version, about = "Packet-level routing protocol simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its CSV and summary.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario's protocol.
        #[arg(long, value_parser = parse_protocol)]
        protocol: Option<Protocol>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run all four protocols on one scenario.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Built-in scenarios.
    Scenarios {
        #[command(subcommand)]
        action: ScenarioCmd,
    },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    List,
    /// Print a built-in in scenario-file format.
    Dump { name: String },
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    Protocol::parse(s).ok_or_else(|| format!("unknown protocol {s:?} (rip, ospf, isis, eigrp)"))
}

enum Failure {
    Parse(anyhow::Error),
    Runtime(anyhow::Error),
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Runtime)?;
    parse_scenario(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::Parse)
}

fn runtime<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Runtime(e.into()))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    runtime(fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())))
}

fn execute(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Run {
            scenario,
            protocol,
            out,
        } => {
            let mut s = load(&scenario)?;
            if let Some(p) = protocol {
                s.protocol = p;
            }
            ensure_dir(&out)?;
            let report = runtime(run_scenario(&s))?;
            runtime(report.write(&out).context("writing report"))?;
            print!("{}", report.summary());
        }
        Cmd::Compare { scenario, out } => {
            let s = load(&scenario)?;
            ensure_dir(&out)?;
            let reports = runtime(compare(&s, &SimOptions::default()))?;
            for r in &reports {
                runtime(r.write(&out).context("writing report"))?;
            }
            let table = comparison_table(&reports);
            let path = out.join(format!("{}.compare.txt", s.name));
            runtime(fs::write(&path, &table).with_context(|| format!("writing {}", path.display())))?;
            print!("{table}");
        }
        Cmd::Scenarios { action } => match action {
            ScenarioCmd::List => {
                for name in reference::NAMES {
                    println!("{name}");
                }
            }
            ScenarioCmd::Dump { name } => {
                let s = reference::by_name(&name)
                    .ok_or_else(|| Failure::Parse(anyhow::anyhow!("no built-in scenario named {name}")))?;
                print!("{}", serialize_scenario(&s));
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Parse(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
