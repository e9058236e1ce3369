// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tmu::harness::{parse_grid, run_with, sweep, RunOptions, SimConfig};
use tmu::trace::{read_trace, write_trace};
use tmu::tmu::Tmu;

#[derive(Parser)]
#[command(name = "tmu-sim", version, about = "AXI4 transaction monitoring unit simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Print the table contents just before each isolation.
        #[arg(long)]
        dump_ott: bool,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        report_out: Option<PathBuf>,
        /// Override a setting, `key=value`. May repeat.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run the cross product of a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay the guards over a recorded trace.
    Lint {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn load(config: Option<&PathBuf>, set: &[String]) -> Result<SimConfig, String> {
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            SimConfig::from_text(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => SimConfig::default(),
    };
    for s in set {
        let (k, v) = s.split_once('=').ok_or_else(|| format!("--set expects key=value, got `{s}`"))?;
        cfg.set(k, v).map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}

fn cmd_run(
    config: PathBuf,
    dump_ott: bool,
    trace_out: Option<PathBuf>,
    report_out: Option<PathBuf>,
    set: Vec<String>,
) -> Result<ExitCode, String> {
    let cfg = load(Some(&config), &set)?;
    let out = run_with(&cfg, RunOptions { capture_dumps: dump_ott }).map_err(|e| e.to_string())?;
    if dump_ott {
        for (cycle, dump) in &out.ott_dumps {
            println!("# table at cycle {cycle}");
            print!("{dump}");
        }
    }
    if let Some(p) = trace_out {
        let f = fs::File::create(&p).map_err(|e| format!("{}: {e}", p.display()))?;
        write_trace(f, &out.trace).map_err(|e| e.to_string())?;
    }
    let json = out.report.to_json();
    match report_out {
        Some(p) => fs::write(&p, json + "\n").map_err(|e| format!("{}: {e}", p.display()))?,
        None => println!("{json}"),
    }
    for e in &out.unreached {
        eprintln!("warning: {e}");
    }
    if !out.terminated {
        eprintln!("warning: stopped at max_cycles with transactions unfinished");
    }
    Ok(if out.unreached.is_empty() && out.terminated { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_sweep(config: PathBuf, grid: PathBuf, set: Vec<String>, out: Option<PathBuf>) -> Result<ExitCode, String> {
    let cfg = load(Some(&config), &set)?;
    let text = fs::read_to_string(&grid).map_err(|e| format!("{}: {e}", grid.display()))?;
    let grid = parse_grid(&text).map_err(|e| e.to_string())?;
    let results = sweep(&cfg, &grid);
    let failed = results.iter().filter(|p| p.report.is_err()).count();
    let json = serde_json::to_string_pretty(&results).map_err(|e| e.to_string())?;
    match out {
        Some(p) => fs::write(&p, json + "\n").map_err(|e| format!("{}: {e}", p.display()))?,
        None => println!("{json}"),
    }
    if failed > 0 {
        eprintln!("{failed} of {} points failed", results.len());
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_lint(trace: PathBuf, config: Option<PathBuf>, set: Vec<String>) -> Result<ExitCode, String> {
    let cfg = load(config.as_ref(), &set)?;
    let f = fs::File::open(&trace).map_err(|e| format!("{}: {e}", trace.display()))?;
    let samples = read_trace(f).map_err(|e| e.to_string())?;
    let mut tmu = Tmu::new(cfg.regs.clone(), cfg.capacity(), cfg.reset_latency).map_err(|e| e.to_string())?;
    for s in &samples {
        tmu.begin_cycle(s.cycle);
        tmu.observe(s);
    }
    for (cycle, v) in tmu.verdicts() {
        let slot = v.slot().map_or_else(|| "-".to_string(), |s| s.to_string());
        println!("{cycle},{},{slot}", v.label());
    }
    let n = tmu.verdicts().len();
    eprintln!("{} cycles, {n} finding(s)", samples.len());
    Ok(if n == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run { config, dump_ott, trace_out, report_out, set } => cmd_run(config, dump_ott, trace_out, report_out, set),
        Cmd::Sweep { config, grid, set, out } => cmd_sweep(config, grid, set, out),
        Cmd::Lint { trace, config, set } => cmd_lint(trace, config, set),
    };
    res.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(3)
    })
}
