use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cvpm::sim::{
    builtin_dcdc_scenario, export_sets, load_scenario, parse_scenario, render_trace,
    run_closed_loop, write_trace, Method, Scenario, SimError, TraceFormat,
};

const EXIT_OTHER: u8 = 1;
const EXIT_ASSUMPTION: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "cvpm", version, about = "Closed-loop simulation of the CVPM controller")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    Dcdc,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Qp,
    Montecarlo,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Scenario file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the trace.
    Run {
        #[command(flatten)]
        source: Source,
        /// Number of steps; events past the end are dropped.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Samples per Monte-Carlo estimate.
        #[arg(long)]
        mc_samples: Option<usize>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        /// Write the final set geometry as JSON.
        #[arg(long)]
        export_sets: Option<PathBuf>,
    },
    /// Print the assumption report for a scenario.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// Print a scenario as JSON, e.g. as a starting point for a config file.
    Dump {
        #[command(flatten)]
        source: Source,
    },
}

fn exit_code(e: &SimError) -> u8 {
    match e {
        SimError::Assumption { .. } => EXIT_ASSUMPTION,
        SimError::Abort { .. } => EXIT_SOLVER,
        _ => EXIT_OTHER,
    }
}

fn scenario(source: &Source, build: bool) -> Result<Scenario, SimError> {
    match (&source.config, source.builtin) {
        (Some(path), _) if build => load_scenario(path),
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| SimError::Io(path.display().to_string(), e))?;
            parse_scenario(&text)
        }
        (None, Some(Builtin::Dcdc)) => Ok(builtin_dcdc_scenario()),
        (None, None) => unreachable!("clap requires a source"),
    }
}

fn run(cmd: Command) -> Result<u8, SimError> {
    match cmd {
        Command::Run {
            source,
            steps,
            seed,
            method,
            mc_samples,
            out,
            format,
            export_sets: sets_path,
        } => {
            let mut s = scenario(&source, true)?;
            if let Some(t) = steps {
                let before = s.events.len();
                s = s.with_steps(t);
                if s.events.len() < before {
                    log::warn!("dropped {} event(s) beyond step {t}", before - s.events.len());
                }
            }
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(m) = method {
                s.method = match m {
                    MethodArg::Qp => Method::Qp,
                    MethodArg::Montecarlo => Method::Montecarlo,
                };
            }
            if let Some(n) = mc_samples {
                s.mc_samples = n;
            }
            let trace = run_closed_loop(&s)?;
            let format = match format {
                FormatArg::Csv => TraceFormat::Csv,
                FormatArg::Json => TraceFormat::Json,
            };
            match out {
                Some(path) => write_trace(&trace, path, format)?,
                None => print!("{}", render_trace(&trace, format)),
            }
            if let Some(path) = sets_path {
                export_sets(&trace, path)?;
            }
            let safe = trace.steps.iter().filter(|r| r.case == cvpm::controller::Case::Safe).count();
            log::info!(
                "{} steps, {safe} safe, final state {:?}",
                trace.steps.len(),
                trace.final_state
            );
            Ok(0)
        }
        Command::Validate { source } => {
            let s = scenario(&source, false)?;
            let report = s.assumption_report()?;
            for c in &report.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("[{tag}] assumption {} ({}): {}", c.id, c.name, c.evidence);
            }
            if let Some(t) = &report.target {
                println!(
                    "steady-state target x = {:?}, u = {:?} (reference residual {:.3e})",
                    t.x.as_slice(),
                    t.u.as_slice(),
                    t.reference_residual
                );
            }
            if let Some(slack) = report.rci_slack {
                println!("terminal invariance slack: {slack:.3e}");
            }
            if let Some(d) = &report.lqr_invariance {
                println!(
                    "LQR invariance of X_C1: {} of {} vertex pairs fail (worst violation {:.3e})",
                    d.failures, d.checked, d.worst_violation
                );
            }
            for w in &report.warnings {
                println!("warning: {w}");
            }
            Ok(if report.all_passed() { 0 } else { EXIT_ASSUMPTION })
        }
        Command::Dump { source } => {
            println!("{}", scenario(&source, false)?.to_json());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors exit with 1 so that 2 stays reserved for assumption failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_OTHER } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
