use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use psystem::config::{emit_config, parse_config, parse_epsilons, RunConfig};
use psystem::field::{run_until, FieldState, StopCause};
use psystem::lifespan::{run_sweep, simulate, ScalingFit};
use psystem::oracle::dual_solver_difference;
use psystem::report::{path_csv, sweep_csv, timeseries_csv, to_json, write_file, FitSummary};
use psystem::{
    gradient_crosscheck, riccati_evolve, Error, PathTracer, RiccatiMode, RiccatiOptions, Sign,
    StepMonitor, Transcription,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_FIT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "psystem",
    version,
    about = "Damped p-system life-span experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario preset, used when no config file is given.
    #[arg(long)]
    scenario: Option<String>,
    /// Overrides initial.epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Significant digits in CSV output (overrides output.precision).
    #[arg(long)]
    precision: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation: timeseries.csv, report.json.
    Simulate(Common),
    /// Follow one characteristic from t = 0 and integrate its Riccati
    /// quantity: path.csv, riccati.json.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
        #[arg(long, value_enum, default_value_t = SignArg::Plus)]
        sign: SignArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Differential)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = TranscriptionArg::Rederived)]
        transcription: TranscriptionArg,
    },
    /// Life-span sweep over perturbation sizes: sweep.csv, fit.json.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated list, e.g. 0.2,0.1,0.05,0.025.
        #[arg(long)]
        epsilons: Option<String>,
    },
    /// Check the damping assumptions: damping.json.
    CheckDamping {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4000)]
        samples: usize,
    },
    /// Upwind solver against the conservative reference: oracle.json.
    OracleCompare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5)]
        t_compare: f64,
        /// Comma-separated node counts.
        #[arg(long, default_value = "2001,4001,8001")]
        grids: String,
        /// Half width of the comparison domain.
        #[arg(long, default_value_t = 10.0)]
        half_width: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Plus,
    Minus,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Differential,
    Volterra,
}

#[derive(Clone, Copy, ValueEnum)]
enum TranscriptionArg {
    Rederived,
    AsPrinted,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::Validation { .. } | Error::InvalidParameter(_) => {
                EXIT_VALIDATION
            }
            Error::FitFailure(_) | Error::InsufficientData(_) | Error::NoBlowup(_) => EXIT_FIT,
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match (&common.config, &common.scenario) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let mut cfg = parse_config(&text)?;
            if let Some(name) = &common.scenario {
                if cfg.scenario.as_deref() != Some(name.as_str()) {
                    return Err(Error::Validation {
                        key: "scenario".into(),
                        message: format!("--scenario {name} conflicts with the config file"),
                    }
                    .into());
                }
            }
            if let Some(e) = common.epsilon {
                cfg.initial.epsilon = e;
            }
            cfg
        }
        (None, Some(name)) => match common.epsilon {
            Some(e) => RunConfig::from_preset(name, e)?,
            None => RunConfig::from_scenario(name)?,
        },
        (None, None) => parse_config(&format!(
            "[initial]\nepsilon = {}\n",
            common.epsilon.unwrap_or(0.1)
        ))?,
    };
    if let Some(out) = &common.out {
        cfg.output.dir = out.display().to_string();
    }
    if let Some(p) = common.precision {
        cfg.output.precision = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    Path::new(&cfg.output.dir).join(name)
}

fn write(cfg: &RunConfig, name: &str, contents: &str) -> Result<(), Failure> {
    write_file(&out_path(cfg, name), contents)?;
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Result<String, Failure> {
    Ok(to_json(v)?)
}

fn cause_code(cause: StopCause) -> u8 {
    match cause {
        StopCause::Gradient | StopCause::Horizon => 0,
        StopCause::Vacuum | StopCause::Instability => EXIT_RUNTIME,
    }
}

fn cmd_simulate(common: &Common) -> Outcome {
    let cfg = load(common)?;
    let res = simulate(&cfg.simulation()?)?;
    write(&cfg, "config.toml", &emit_config(&cfg)?)?;
    write(
        &cfg,
        "timeseries.csv",
        &timeseries_csv(&res.series, cfg.output.precision),
    )?;
    write(&cfg, "report.json", &json(&res.report)?)?;
    let r = &res.report;
    match r.t_star_estimate {
        Some(t) => println!(
            "stopped: {} at t = {:.6}, T* ~ {t:.6}",
            r.stopped_cause.as_str(),
            r.t_stop
        ),
        None => println!(
            "stopped: {} at t = {:.6}",
            r.stopped_cause.as_str(),
            r.t_stop
        ),
    }
    if let Some(m) = &r.message {
        eprintln!("{m}");
    }
    if r.stopped_cause == StopCause::Gradient && r.t_star_estimate.is_none() {
        eprintln!(
            "T* fit failed: {}",
            r.fit_error.as_deref().unwrap_or("unknown")
        );
        return Ok(EXIT_FIT);
    }
    Ok(cause_code(r.stopped_cause))
}

#[derive(Serialize)]
struct TraceSummary {
    sign: Sign,
    x0: f64,
    mode: RiccatiMode,
    transcription: Transcription,
    stopped_cause: StopCause,
    t_stop: f64,
    samples: usize,
    exited: bool,
    max_a: f64,
    min_a: f64,
    blown_up: bool,
    blowup_t: Option<f64>,
    final_value: f64,
    /// Max relative deviation of the Riccati quantity from the grid gradient.
    gradient_deviation: f64,
}

fn cmd_trace(
    common: &Common,
    x0: f64,
    sign: Sign,
    mode: RiccatiMode,
    transcription: Transcription,
) -> Outcome {
    let cfg = load(common)?;
    let law = cfg.law()?;
    let spec = cfg.damping_spec()?;
    let state = FieldState::init(cfg.grid()?, &law, &cfg.initial_data())?;
    let dx = state.dx();
    let mut tracer = PathTracer::new(sign, x0);
    let out = {
        let mut monitors: Vec<&mut dyn StepMonitor> = vec![&mut tracer];
        run_until(
            state,
            &law,
            &spec,
            &cfg.solver_options(),
            cfg.solver.t_max,
            &mut monitors,
        )
    };
    let exited = tracer.exited();
    let path = tracer.into_path(&spec);
    let opts = RiccatiOptions {
        mode,
        transcription,
        g_stop: cfg.solver.g_stop,
    };
    let riccati = riccati_evolve(&path, &law, &spec, &opts)?;
    write(
        &cfg,
        "path.csv",
        &path_csv(&path, Some(&riccati), cfg.output.precision),
    )?;
    let summary = TraceSummary {
        sign,
        x0,
        mode,
        transcription,
        stopped_cause: out.cause,
        t_stop: out.state.t,
        samples: path.samples.len(),
        exited,
        max_a: path.max_a(),
        min_a: path.min_a(),
        blown_up: riccati.blown_up,
        blowup_t: riccati.blowup_t,
        final_value: riccati.value,
        gradient_deviation: gradient_crosscheck(&path, &riccati, dx),
    };
    write(&cfg, "riccati.json", &json(&summary)?)?;
    println!(
        "{} samples, A in [{:.6}, {:.6}]",
        summary.samples, summary.min_a, summary.max_a
    );
    Ok(cause_code(out.cause))
}

#[derive(Serialize)]
struct SweepJson<'a> {
    #[serde(flatten)]
    fit: Option<FitSummary>,
    error: Option<&'a str>,
}

fn cmd_sweep(common: &Common, epsilons: Option<&str>) -> Outcome {
    let mut cfg = load(common)?;
    if let Some(list) = epsilons {
        cfg.sweep.epsilons = parse_epsilons(list)?;
        cfg.validate()?;
    }
    let result = run_sweep(&cfg.sweep_plan()?)?;
    write(
        &cfg,
        "sweep.csv",
        &sweep_csv(&result.rows, cfg.output.precision),
    )?;
    let fit = result.fit.as_ref().map(FitSummary::from);
    write(
        &cfg,
        "fit.json",
        &json(&SweepJson {
            fit,
            error: result.fit_error.as_deref(),
        })?,
    )?;
    for r in &result.rows {
        let t = r
            .t_star
            .map_or_else(|| "-".to_string(), |t| format!("{t:.6}"));
        println!(
            "eps = {:<8} {:<11} T* = {t}",
            r.epsilon,
            r.stopped_cause.as_str()
        );
    }
    match &result.fit {
        Some(ScalingFit {
            model,
            exponent_or_rate,
            r_squared,
            ..
        }) => {
            println!("fit: {model:?} {exponent_or_rate:.6} (R^2 = {r_squared:.6})");
            Ok(0)
        }
        None => {
            eprintln!(
                "fit failed: {}",
                result.fit_error.as_deref().unwrap_or("unknown")
            );
            Ok(EXIT_FIT)
        }
    }
}

fn cmd_check_damping(common: &Common, samples: usize) -> Outcome {
    let cfg = load(common)?;
    let report = cfg.damping_spec()?.check_assumptions(samples);
    write(&cfg, "damping.json", &json(&report)?)?;
    match report.c_a {
        Some(c) => println!("C_a = {c:.9}, {} violation(s)", report.violations.len()),
        None => println!("C_a diverges, {} violation(s)", report.violations.len()),
    }
    Ok(0)
}

#[derive(Serialize)]
struct GridDiff {
    nx: usize,
    dx: f64,
    linf_u: f64,
    linf_v: f64,
}

#[derive(Serialize)]
struct OracleJson {
    t_compare: f64,
    linf_u: f64,
    linf_v: f64,
    grids: Vec<GridDiff>,
}

fn cmd_oracle_compare(common: &Common, t_compare: f64, grids: &str, half_width: f64) -> Outcome {
    let cfg = load(common)?;
    let law = cfg.law()?;
    let spec = cfg.damping_spec()?;
    let data = cfg.initial_data();
    let mut rows = Vec::new();
    for item in grids.split(',') {
        let nx: usize = item.trim().parse().map_err(|_| Error::Validation {
            key: "grids".into(),
            message: format!("'{}' is not a node count", item.trim()),
        })?;
        let grid = psystem::Grid1D::new(-half_width, half_width, nx)?;
        let d =
            dual_solver_difference(grid, &law, &spec, &data, t_compare, cfg.solver.cfl.min(0.9))?;
        rows.push(GridDiff {
            nx: d.nx,
            dx: d.dx,
            linf_u: d.linf_u,
            linf_v: d.linf_v,
        });
    }
    let finest = rows.last().ok_or_else(|| Error::Validation {
        key: "grids".into(),
        message: "empty".into(),
    })?;
    let out = OracleJson {
        t_compare,
        linf_u: finest.linf_u,
        linf_v: finest.linf_v,
        grids: rows,
    };
    write(&cfg, "oracle.json", &json(&out)?)?;
    for g in &out.grids {
        println!(
            "nx = {:<6} linf_u = {:.3e} linf_v = {:.3e}",
            g.nx, g.linf_u, g.linf_v
        );
    }
    Ok(0)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Simulate(common) => cmd_simulate(&common),
        Command::Trace {
            common,
            x0,
            sign,
            mode,
            transcription,
        } => {
            let sign = match sign {
                SignArg::Plus => Sign::Plus,
                SignArg::Minus => Sign::Minus,
            };
            let mode = match mode {
                ModeArg::Differential => RiccatiMode::Differential,
                ModeArg::Volterra => RiccatiMode::Volterra,
            };
            let tr = match transcription {
                TranscriptionArg::Rederived => Transcription::Rederived,
                TranscriptionArg::AsPrinted => Transcription::AsPrinted,
            };
            cmd_trace(&common, x0, sign, mode, tr)
        }
        Command::Sweep { common, epsilons } => cmd_sweep(&common, epsilons.as_deref()),
        Command::CheckDamping { common, samples } => cmd_check_damping(&common, samples),
        Command::OracleCompare {
            common,
            t_compare,
            grids,
            half_width,
        } => cmd_oracle_compare(&common, t_compare, &grids, half_width),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
