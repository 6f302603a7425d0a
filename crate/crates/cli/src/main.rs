use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use obreshkov::dae::BuiltinKind;
use obreshkov::order_lab::{DEFAULT_POINTS, DEFAULT_TOLERANCE};
use obreshkov_cli::{pencil_options_from_env, run, Command, InputSource, RunConfig, EXIT_INPUT_ERROR};

/// Obreshkov one-step integration of linear DAEs `C x' + G x = b(t)`.
#[derive(Parser)]
#[command(name = "obx", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct InputArgs {
    /// SPICE-like netlist file
    #[arg(long)]
    netlist: Option<PathBuf>,
    /// JSON system file with fields N, C, G, b_c, b_s, omega
    #[arg(long)]
    json: Option<PathBuf>,
    /// Synthesized benchmark: ode, index1, index2, index3, alg1, alg2, alg3
    #[arg(long)]
    builtin: Option<BuiltinKind>,
}

#[derive(Args)]
struct Input {
    #[command(flatten)]
    source: InputArgs,
    /// Seed for builtin systems
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl Input {
    fn into_source(self) -> InputSource {
        let InputArgs { netlist, json, builtin } = self.source;
        match (netlist, json, builtin) {
            (Some(p), _, _) => InputSource::Netlist(p),
            (_, Some(p), _) => InputSource::Json(p),
            (_, _, Some(kind)) => InputSource::Builtin { kind, seed: self.seed },
            _ => unreachable!("clap enforces exactly one input"),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Regularity, Weierstrass split and differentiation index
    Analyze {
        #[command(flatten)]
        input: Input,
        /// Also solve for the sinusoidal steady state
        #[arg(long)]
        ac: bool,
        /// Write the decomposition as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fixed-step time marching, trajectory as CSV
    March {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        h: f64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        /// Add the scaled derivative blocks h^i x^(i) as columns
        #[arg(long)]
        derivatives: bool,
        /// Comma-separated initial value (nonsingular C only); default is the steady state
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-step convergence study against the steady state
    OrderStudy {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        h_min: Option<f64>,
        #[arg(long)]
        h_max: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_POINTS)]
        points: usize,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Error samples as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Fitted slopes and predictions as JSON
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn config(cli: Cli) -> anyhow::Result<RunConfig> {
    let pencil = pencil_options_from_env()?;
    let (input, command) = match cli.command {
        Cmd::Analyze { input, ac, out } => (input, Command::Analyze { ac, out }),
        Cmd::March { input, l, m, h, steps, derivatives, x0, out } => (
            input,
            Command::March { l, m, h, steps: steps as usize, derivatives, x0, out },
        ),
        Cmd::OrderStudy { input, l, m, h_min, h_max, points, tolerance, csv, report } => (
            input,
            Command::OrderStudy { l, m, h_min, h_max, points, tolerance, csv, report },
        ),
    };
    Ok(RunConfig { input: input.into_source(), command, pencil })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = config(cli).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.exit_code as u8)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_INPUT_ERROR as u8)
        }
    }
}
