use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use stacked_minimal::asymptotics::{decay_report, pair_solve};
use stacked_minimal::config::{balance_report, catalog_with, Configuration, DEFAULT_HALF_WIDTH};
use stacked_minimal::elliptic::Lattice;
use stacked_minimal::error::Error;
use stacked_minimal::hecke::{self, solve_g_equals_c};
use stacked_minimal::immersion::{immerse, write_atomic, write_mesh, MeshOptions};
use stacked_minimal::solver::{auto_schedule, newton_continuation, system_for, SolveReport, SolverOptions};

#[derive(Parser)]
#[command(name = "stacked-minimal", version, about = "Stacked doubly periodic minimal surfaces by node opening")]
struct Cli {
    /// Stream solver residual histories to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roots of the Hecke form.
    #[command(subcommand)]
    Hecke(HeckeCmd),
    /// Stacking configurations.
    #[command(subcommand)]
    Config(ConfigCmd),
    /// Gluing solves and meshes.
    #[command(subcommand)]
    Surface(SurfaceCmd),
    /// Decay towards the periodic surface.
    #[command(subcommand)]
    Asymptotics(AsymptoticsCmd),
}

#[derive(Subcommand)]
enum HeckeCmd {
    /// All solutions of G(q) = C on one torus (JSON).
    Solve {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        tau: C64,
        #[arg(long = "C", value_parser = parse_complex, default_value = "0,0", allow_hyphen_values = true)]
        c: C64,
        /// Newton seeds per lattice direction.
        #[arg(long, default_value_t = hecke::DEFAULT_GRID)]
        grid: usize,
    },
    /// Root counts over a rectangle of moduli (CSV).
    Atlas {
        #[arg(long, value_parser = parse_pair, default_value = "-0.5,0.5", allow_hyphen_values = true)]
        re: (f64, f64),
        #[arg(long, value_parser = parse_pair, default_value = "0.6,2")]
        im: (f64, f64),
        /// Samples along Re tau and Im tau.
        #[arg(long, value_parser = parse_counts, default_value = "11,11")]
        steps: (usize, usize),
        #[arg(long = "C", value_parser = parse_complex, default_value = "0,0", allow_hyphen_values = true)]
        c: C64,
        #[arg(long, default_value_t = hecke::DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ConfigCmd {
    /// Balance report of a configuration file (`-` reads stdin).
    Check { file: String },
    /// Emits a catalog configuration.
    Catalog {
        name: String,
        /// Family parameter (Im tau, or the angle of tau).
        #[arg(long)]
        param: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_HALF_WIDTH)]
        half_width: usize,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value_t = stacked_minimal::opening::DEFAULT_N_MAX)]
    n_max: usize,
    /// Gauss-Legendre panels per contour edge.
    #[arg(long, default_value_t = 12)]
    panels: usize,
}

#[derive(Subcommand)]
enum SurfaceCmd {
    /// Solves the gluing equations (state JSON).
    Solve {
        config: String,
        #[arg(long)]
        t: f64,
        /// `auto` or a comma separated list ending at t.
        #[arg(long, default_value = "auto")]
        schedule: String,
        #[command(flatten)]
        solver: SolveArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Meshes a solved state (OBJ plus JSON sidecar).
    Mesh {
        state: PathBuf,
        /// Inclusive layer range `k0..k1`.
        #[arg(long, value_parser = parse_range, default_value = "0..1", allow_hyphen_values = true)]
        layers: (i64, i64),
        /// Horizontal translates per lattice direction.
        #[arg(long, default_value_t = 1)]
        copies: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = stacked_minimal::immersion::DEFAULT_GRID)]
        grid: usize,
        #[arg(long, default_value_t = stacked_minimal::immersion::DEFAULT_RINGS)]
        rings: usize,
        #[arg(long, default_value_t = stacked_minimal::immersion::DEFAULT_SPOKES)]
        spokes: usize,
    },
}

#[derive(Subcommand)]
enum AsymptoticsCmd {
    /// Decay of a defect configuration against its periodic comparator.
    Decay {
        periodic: String,
        defect: String,
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        solver: SolveArgs,
        /// Report JSON (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Table of `k, d_k, w_k`.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Stored by `surface solve`, read by `surface mesh`.
#[derive(Serialize, Deserialize)]
struct StateFile {
    configuration: Configuration,
    options: SolverOptions,
    report: SolveReport,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownCatalog { .. }
            | Error::InvalidConfiguration(_)
            | Error::InvalidTau(_)
            | Error::Domain { .. }
            | Error::Invalid(_)
            | Error::Json(_)
            | Error::Io(_) => Failure::Usage(e.to_string()),
            e => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(format!("schema error: {e}"))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let f = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok((f(a)?, f(b)?))
}

fn parse_complex(s: &str) -> Result<C64, String> {
    parse_pair(s).map(|(a, b)| C64::new(a, b))
}

fn parse_counts(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `n,m`, got `{s}`"))?;
    let f = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    Ok((f(a)?, f(b)?))
}

fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected `k0..k1`, got `{s}`"))?;
    let f = |x: &str| x.trim().parse::<i64>().map_err(|e| format!("`{x}`: {e}"));
    let (a, b) = (f(a)?, f(b.trim_start_matches('='))?);
    if b < a {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok((a, b))
}

fn read_input(path: &str) -> std::io::Result<String> {
    if path == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path)
    }
}

fn read_config(path: &str) -> Result<Configuration, Failure> {
    let text = read_input(path).map_err(|e| Failure::Usage(format!("{path}: {e}")))?;
    Configuration::from_json(&text).map_err(|e| Failure::Usage(format!("{path}: {e}")))
}

/// Writes to `out` atomically, or to stdout.
fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => Ok(write_atomic(p, text.as_bytes())?),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn solver_options(a: &SolveArgs) -> Result<SolverOptions, Failure> {
    if a.n_max < 2 || a.panels == 0 {
        return Err(Failure::Usage("n-max must be at least 2 and panels positive".into()));
    }
    Ok(SolverOptions { n_max: a.n_max, panels: a.panels, ..SolverOptions::default() })
}

fn check_t(t: f64) -> Outcome {
    if t.is_finite() && t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("t must lie in (0, 1), got {t}")))
    }
}

fn schedule(spec: &str, t: f64) -> Result<Vec<f64>, Failure> {
    if spec == "auto" {
        return Ok(auto_schedule(t));
    }
    let s = spec
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| Failure::Usage(format!("schedule entry `{x}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if s.windows(2).any(|w| w[1] <= w[0]) || s.first().is_some_and(|&x| x <= 0.0) {
        return Err(Failure::Usage("schedule must be positive and increasing".into()));
    }
    Ok(s)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Hecke(HeckeCmd::Solve { tau, c, grid }) => {
            let lat = Lattice::new(tau)?;
            let set = solve_g_equals_c(&lat, c, grid.max(2));
            emit(None, &serde_json::to_string_pretty(&set)?)
        }
        Command::Hecke(HeckeCmd::Atlas { re, im, steps, c, grid, out }) => {
            if im.0 <= 0.0 || im.1 <= 0.0 {
                return Err(Failure::Usage("the Im tau range must be positive".into()));
            }
            let rows = hecke::atlas(re, im, steps.0, steps.1, c, grid.max(2))?;
            let mut csv = String::from("tau_re,tau_im,count\n");
            for (tau, n) in rows {
                csv.push_str(&format!("{:?},{:?},{n}\n", tau.re, tau.im));
            }
            emit(out.as_deref(), csv.trim_end())
        }
        Command::Config(ConfigCmd::Check { file }) => {
            let cfg = read_config(&file)?;
            let rep = balance_report(&cfg)?;
            emit(None, &serde_json::to_string_pretty(&rep)?)
        }
        Command::Config(ConfigCmd::Catalog { name, param, half_width }) => {
            let cfg = catalog_with(&name, param, half_width)?;
            emit(None, &cfg.to_json()?)
        }
        Command::Surface(SurfaceCmd::Solve { config, t, schedule: spec, solver, out }) => {
            check_t(t)?;
            let cfg = read_config(&config)?;
            let opts = solver_options(&solver)?;
            let sched = schedule(&spec, t)?;
            let report = newton_continuation(&cfg, t, Some(&sched), &opts)?;
            log::info!("final residual {:.3e}", report.final_residual);
            let state = StateFile { configuration: cfg, options: opts, report };
            emit(out.as_deref(), &serde_json::to_string(&state)?)
        }
        Command::Surface(SurfaceCmd::Mesh { state, layers, copies, out, grid, rings, spokes }) => {
            let text = std::fs::read_to_string(&state).map_err(|e| Failure::Usage(format!("{}: {e}", state.display())))?;
            let st: StateFile = serde_json::from_str(&text)?;
            st.configuration.validate()?;
            if grid < 4 || rings == 0 || spokes < 8 {
                return Err(Failure::Usage("need grid >= 4, rings >= 1, spokes >= 8".into()));
            }
            let sys = system_for(&st.configuration, &st.report, &st.options)?;
            let im = immerse(&st.configuration, &sys, &st.report.series, layers.0, layers.1, &MeshOptions { grid, rings, spokes })?;
            let side = write_mesh(&im, copies, &out)?;
            log::info!("{} vertices, {} faces", side.vertex_count, side.face_count);
            emit(None, &serde_json::to_string_pretty(&side.diagnostics)?)
        }
        Command::Asymptotics(AsymptoticsCmd::Decay { periodic, defect, t, solver, out, csv }) => {
            check_t(t)?;
            let a = read_config(&periodic)?;
            let b = read_config(&defect)?;
            let opts = solver_options(&solver)?;
            let pair = pair_solve(&a, &b, t, &opts)?;
            let rep = decay_report(&pair)?;
            if let Some(p) = csv {
                write_atomic(&p, rep.to_csv().as_bytes())?;
            }
            emit(out.as_deref(), &serde_json::to_string_pretty(&rep)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = std::env::var("STACKED_MINIMAL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(1)
        }
    }
}
