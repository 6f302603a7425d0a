//! Command implementations behind the `obx` binary. Each command returns
//! the text for stdout and an exit code; file artifacts are written here.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DVector;
use serde::Serialize;

use obreshkov::coefficients::ObreshkovScheme;
use obreshkov::dae::{builtin_system, BuiltinKind, LinearDae};
use obreshkov::integrator::{initial_state_from_steady_state, initial_state_from_value, march, StepState};
use obreshkov::netlist;
use obreshkov::order_lab::{run_study, FitStatus, StudyOptions, DEFAULT_POINTS, DEFAULT_TOLERANCE};
use obreshkov::pencil::{is_regular, weierstrass, DecompositionExport, PencilOptions};
use obreshkov::steady_state::{ac_solve, PhasorExport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_STUDY_FAILURE: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;

pub const RANK_TOL_ENV: &str = "OBX_RANK_TOL";

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Netlist(PathBuf),
    Json(PathBuf),
    Builtin { kind: BuiltinKind, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Analyze {
        ac: bool,
        out: Option<PathBuf>,
    },
    March {
        l: usize,
        m: usize,
        h: f64,
        steps: usize,
        derivatives: bool,
        x0: Option<Vec<f64>>,
        out: Option<PathBuf>,
    },
    OrderStudy {
        l: usize,
        m: usize,
        h_min: Option<f64>,
        h_max: Option<f64>,
        points: usize,
        tolerance: f64,
        csv: Option<PathBuf>,
        report: Option<PathBuf>,
    },
}

impl Command {
    pub fn order_study(l: usize, m: usize) -> Self {
        Command::OrderStudy {
            l,
            m,
            h_min: None,
            h_max: None,
            points: DEFAULT_POINTS,
            tolerance: DEFAULT_TOLERANCE,
            csv: None,
            report: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: InputSource,
    pub command: Command,
    pub pencil: PencilOptions,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            stdout,
            exit_code: EXIT_OK,
        }
    }
}

/// Reads the rank tolerance override, if any.
pub fn pencil_options_from_env() -> Result<PencilOptions> {
    let mut opts = PencilOptions::default();
    if let Ok(raw) = std::env::var(RANK_TOL_ENV) {
        let tol: f64 = raw
            .trim()
            .parse()
            .with_context(|| format!("{RANK_TOL_ENV}='{raw}' is not a number"))?;
        if !(tol > 0.0 && tol < 1.0) {
            bail!("{RANK_TOL_ENV} must lie in (0, 1), got {tol}");
        }
        opts.rank_tol = tol;
    }
    Ok(opts)
}

pub struct LoadedSystem {
    pub dae: LinearDae,
    pub description: String,
}

pub fn load_system(input: &InputSource) -> Result<LoadedSystem> {
    match input {
        InputSource::Netlist(path) => {
            let text = read(path)?;
            let parsed = netlist::parse(&text).with_context(|| format!("{}", path.display()))?;
            let dae = parsed
                .stamp()
                .with_context(|| format!("stamping {}", path.display()))?;
            Ok(LoadedSystem {
                description: format!("netlist {}", path.display()),
                dae,
            })
        }
        InputSource::Json(path) => {
            let text = read(path)?;
            let dae = LinearDae::from_json(&text).with_context(|| format!("{}", path.display()))?;
            Ok(LoadedSystem {
                description: format!("json {}", path.display()),
                dae,
            })
        }
        InputSource::Builtin { kind, seed } => Ok(LoadedSystem {
            dae: builtin_system(*kind, *seed).dae,
            description: format!("builtin {kind} (seed {seed})"),
        }),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn scheme(l: usize, m: usize) -> Result<ObreshkovScheme> {
    ObreshkovScheme::new(l, m).context("invalid scheme")
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    match &config.command {
        Command::Analyze { .. } => cmd_analyze(config),
        Command::March { .. } => cmd_march(config),
        Command::OrderStudy { .. } => cmd_order_study(config),
    }
}

#[derive(Serialize)]
struct AnalyzeReport {
    system: String,
    n: usize,
    regular: bool,
    shift: f64,
    residual_c: f64,
    residual_g: f64,
    decomposition: DecompositionExport,
    #[serde(skip_serializing_if = "Option::is_none")]
    ac: Option<PhasorExport>,
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.12e}")).collect();
    format!("[{}]", items.join(", "))
}

pub fn cmd_analyze(config: &RunConfig) -> Result<Outcome> {
    let Command::Analyze { ac, out } = &config.command else {
        bail!("not an analyze command");
    };
    let sys = load_system(&config.input)?;
    let dae = &sys.dae;
    let mut text = String::new();
    writeln!(text, "system: {}, N = {}", sys.description, dae.dim())?;
    let regular = is_regular(dae.c(), dae.g());
    writeln!(text, "regular: {}", if regular { "yes" } else { "no" })?;
    let d = weierstrass(dae.c(), dae.g(), config.pencil)?;
    let (rc, rg) = d.reconstruction_residual(dae.c(), dae.g());
    writeln!(text, "r = {}, s = {}", d.r, d.s)?;
    writeln!(text, "index k = {}", d.index)?;
    writeln!(text, "shift l0 = {:.6e}", d.shift)?;
    writeln!(text, "residual |PCQ - diag(I, N)| = {rc:.3e}")?;
    writeln!(text, "residual |PGQ - diag(J, I)| = {rg:.3e}")?;
    let phasor = if *ac {
        let ph = ac_solve(dae)?;
        writeln!(text, "omega = {}", ph.omega())?;
        writeln!(text, "X_c = {}", fmt_vec(ph.cos_amp()))?;
        writeln!(text, "X_s = {}", fmt_vec(ph.sin_amp()))?;
        writeln!(text, "phasor residual = {:.3e}", ph.residual(dae))?;
        Some(ph.to_export(dae))
    } else {
        None
    };
    if let Some(path) = out {
        let report = AnalyzeReport {
            system: sys.description.clone(),
            n: dae.dim(),
            regular,
            shift: d.shift,
            residual_c: rc,
            residual_g: rg,
            decomposition: d.to_export(),
            ac: phasor,
        };
        write(path, &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(Outcome::ok(text))
}

/// Trajectory CSV: `t, x_0, ...` and, with `derivatives`, the scaled blocks
/// `h^i x^(i)` as `s{i}_x{j}`.
pub fn trajectory_csv(states: &[StepState], derivatives: bool) -> String {
    let n = states.first().map_or(0, |s| s.value().len());
    let blocks = if derivatives {
        states.iter().map(|s| s.scaled.len()).min().unwrap_or(1)
    } else {
        1
    };
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|j| format!("x_{j}")));
    for i in 1..blocks {
        header.extend((0..n).map(|j| format!("s{i}_x{j}")));
    }
    let mut out = header.join(",");
    out.push('\n');
    for s in states {
        let mut row = vec![s.t.to_string()];
        for block in &s.scaled[..blocks] {
            row.extend(block.iter().map(|v| v.to_string()));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn cmd_march(config: &RunConfig) -> Result<Outcome> {
    let Command::March {
        l,
        m,
        h,
        steps,
        derivatives,
        x0,
        out,
    } = &config.command
    else {
        bail!("not a march command");
    };
    if *steps == 0 {
        bail!("--steps must be at least 1");
    }
    let sys = load_system(&config.input)?;
    let dae = &sys.dae;
    weierstrass(dae.c(), dae.g(), config.pencil)?;
    let scheme = scheme(*l, *m)?;
    let start = match x0 {
        Some(values) => {
            let x0 = DVector::from_column_slice(values);
            initial_state_from_value(dae, &x0, &scheme, *h, 0.0)?
        }
        None => initial_state_from_steady_state(&ac_solve(dae)?, &scheme, *h),
    };
    let mut states = vec![start.clone()];
    states.extend(march(dae, &scheme, &start, *h, *steps)?);
    let csv = trajectory_csv(&states, *derivatives);
    match out {
        Some(path) => {
            write(path, &csv)?;
            Ok(Outcome::ok(format!(
                "wrote {} rows to {}\n",
                states.len(),
                path.display()
            )))
        }
        None => Ok(Outcome::ok(csv)),
    }
}

pub fn cmd_order_study(config: &RunConfig) -> Result<Outcome> {
    let Command::OrderStudy {
        l,
        m,
        h_min,
        h_max,
        points,
        tolerance,
        csv,
        report,
    } = &config.command
    else {
        bail!("not an order-study command");
    };
    let sys = load_system(&config.input)?;
    let scheme = scheme(*l, *m)?;
    let opts = StudyOptions {
        h_min: *h_min,
        h_max: *h_max,
        points: *points,
        tolerance: *tolerance,
        pencil: config.pencil,
    };
    let result = run_study(&sys.dae, &scheme, &opts)?;
    if let Some(path) = csv {
        write(path, &result.to_csv())?;
    }
    if let Some(path) = report {
        write(path, &result.to_json())?;
    }

    let mut text = String::new();
    writeln!(text, "system: {}", sys.description)?;
    writeln!(text, "scheme (l, m) = ({l}, {m}), index k = {}", result.k)?;
    for fit in &result.orders {
        let slope = fit
            .slope
            .map_or_else(|| "-".to_string(), |s| format!("{s:.3}"));
        let status = match fit.status {
            FitStatus::Pass => "pass",
            FitStatus::Fail => "FAIL",
            FitStatus::BelowFloor => "below floor",
        };
        writeln!(
            text,
            "i = {}: slope {slope}, predicted {}, {status} ({} usable samples)",
            fit.i, fit.predicted, fit.usable_samples
        )?;
    }
    Ok(Outcome {
        stdout: text,
        exit_code: if result.all_pass() {
            EXIT_OK
        } else {
            EXIT_STUDY_FAILURE
        },
    })
}
