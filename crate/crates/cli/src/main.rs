mod args;
mod commands;
mod config;
mod output;
mod verify;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::{Cli, Command};
use output::emit;

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("ROUGHINT_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("ROUGHINT_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run() -> anyhow::Result<ExitCode> {
    init_threads()?;
    let names: Vec<String> = Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let argv = config::merge_config(std::env::args_os().collect(), &names)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print()?;
            return Ok(ExitCode::from(code));
        }
    };
    let (outcome, out, extra_ok) = match &cli.command {
        Command::IntegrateYoung(a) => (commands::integrate_young(a)?, a.out.out.clone(), true),
        Command::IntegrateRough(a) => (commands::integrate_rough(a)?, a.out.out.clone(), true),
        Command::Lift(a) => (commands::lift(a)?, a.report.clone(), true),
        Command::Variability(a) => (commands::variability(a)?, a.out.out.clone(), true),
        Command::SegmentCheck(a) => (commands::segment_check(a)?, a.out.out.clone(), true),
        Command::FbmSample(a) => (commands::fbm_sample(a)?, a.meta.clone(), true),
        Command::GaussCheck(a) => (commands::gauss_check(a)?, a.out.out.clone(), true),
        Command::AlphaSweep(a) => (commands::alpha_sweep_cmd(a)?, a.out.out.clone(), true),
        Command::Verify(a) => {
            let (o, ok) = verify::run(a.suite, a.seed)?;
            (o, a.out.out.clone(), ok)
        }
    };
    emit(&outcome.to_json(), out.as_deref())?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for v in &outcome.violations {
        eprintln!("hypothesis violated: {v}");
    }
    Ok(if !extra_ok {
        ExitCode::from(1)
    } else if !outcome.hypotheses_ok() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
