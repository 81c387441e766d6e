//! Run configuration (TOML) and the scenario preset table.
//!
//! A config is a handful of `[section]`s of `key = value` pairs. Anything
//! left out is filled from the named `scenario` preset, or from generic
//! defaults when no scenario is given. Parsing resolves every value, so a
//! [`RunConfig`] is always complete and [`emit_config`] writes it back out in
//! full.

use serde::{Deserialize, Serialize};

use crate::damping::{DampingFamily, DampingSpec};
use crate::error::{Error, Result};
use crate::field::{Grid1D, InitialData, SolverOptions};
use crate::gas::{GasLaw, DEFAULT_U_FLOOR};
use crate::lifespan::{
    domain_half_width, FitOptions, HorizonRule, ScalingModel, Simulation, SweepPlan,
};
use crate::profile::Profile;

/// What the life-span scaling of a scenario is expected to look like.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expectation {
    /// Power law `T* ~ ε^p` with `p` in `[lo, hi]`.
    Power { lo: f64, hi: f64 },
    /// `log T*` linear in `1/ε`.
    Exponential { min_r_squared: f64 },
    /// No blow-up before the horizon; the max gradient stays below
    /// `max_growth` times its initial value.
    Global { max_growth: f64 },
}

impl Expectation {
    pub fn model(&self) -> Option<ScalingModel> {
        match self {
            Expectation::Power { .. } => Some(ScalingModel::Power),
            Expectation::Exponential { .. } => Some(ScalingModel::Exponential),
            Expectation::Global { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioPreset {
    pub name: &'static str,
    pub family: DampingFamily,
    pub expected: Expectation,
    pub epsilons: &'static [f64],
    pub horizon: HorizonRule,
    pub dx: f64,
    pub cfl: f64,
    /// Resolution stop, see [`SolverOptions::front_cells`].
    pub front_cells: f64,
    pub growth: f64,
}

const LADDER: &[f64] = &[0.2, 0.1, 0.05, 0.025];

pub const PRESETS: &[ScenarioPreset] = &[
    ScenarioPreset {
        name: "euler_undamped",
        family: DampingFamily::Zero,
        expected: Expectation::Power {
            lo: -1.15,
            hi: -0.85,
        },
        epsilons: LADDER,
        horizon: HorizonRule::Power {
            coef: 1.0,
            exponent: -1.0,
        },
        dx: 0.01,
        cfl: 1.0,
        front_cells: 40.0,
        growth: 1.5,
    },
    ScenarioPreset {
        name: "time_power_supercrit",
        family: DampingFamily::TimePower {
            mu: 1.0,
            lambda1: 2.0,
        },
        expected: Expectation::Power { lo: -1.2, hi: -0.8 },
        epsilons: LADDER,
        horizon: HorizonRule::Power {
            coef: 4.0,
            exponent: -1.0,
        },
        dx: 0.005,
        cfl: 1.0,
        front_cells: 50.0,
        growth: 1.5,
    },
    ScenarioPreset {
        name: "time_critical_sub",
        family: DampingFamily::TimePower {
            mu: 1.0,
            lambda1: 1.0,
        },
        expected: Expectation::Power { lo: -2.3, hi: -1.7 },
        epsilons: LADDER,
        horizon: HorizonRule::Power {
            coef: 4.0,
            exponent: -2.0,
        },
        dx: 0.01,
        cfl: 1.0,
        front_cells: 12.0,
        growth: 1.5,
    },
    ScenarioPreset {
        name: "time_critical_eq",
        family: DampingFamily::TimePower {
            mu: 2.0,
            lambda1: 1.0,
        },
        expected: Expectation::Exponential {
            min_r_squared: 0.98,
        },
        epsilons: &[0.5, 0.4, 0.3],
        horizon: HorizonRule::Exponential {
            coef: 2.0,
            rate: 1.6,
        },
        dx: 0.0025,
        cfl: 1.0,
        front_cells: 12.0,
        growth: 1.5,
    },
    ScenarioPreset {
        name: "time_global",
        family: DampingFamily::TimePower {
            mu: 1.0,
            lambda1: 0.5,
        },
        expected: Expectation::Global { max_growth: 2.0 },
        epsilons: &[0.05],
        horizon: HorizonRule::Fixed { t_max: 200.0 },
        dx: 0.01,
        cfl: 1.0,
        front_cells: 12.0,
        growth: 1.5,
    },
    ScenarioPreset {
        name: "separated_sum",
        family: DampingFamily::SeparatedSum {
            lambda1: 2.0,
            lambda2: 2.0,
        },
        expected: Expectation::Power { lo: -1.2, hi: -0.8 },
        epsilons: LADDER,
        horizon: HorizonRule::Power {
            coef: 4.0,
            exponent: -1.0,
        },
        dx: 0.005,
        cfl: 1.0,
        front_cells: 50.0,
        growth: 1.5,
    },
    ScenarioPreset {
        name: "separated_product",
        family: DampingFamily::SeparatedProduct {
            lambda1: 0.6,
            lambda2: 0.6,
        },
        expected: Expectation::Power { lo: -1.2, hi: -0.8 },
        epsilons: LADDER,
        horizon: HorizonRule::Power {
            coef: 4.0,
            exponent: -1.0,
        },
        dx: 0.005,
        cfl: 1.0,
        front_cells: 50.0,
        growth: 1.5,
    },
];

pub fn preset(name: &str) -> Option<&'static ScenarioPreset> {
    PRESETS.iter().find(|p| p.name == name)
}

fn unknown_scenario(name: &str) -> Error {
    let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
    Error::validation(
        "scenario",
        format!("unknown scenario '{name}' (known: {})", known.join(", ")),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasSection {
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialSection {
    pub phi: Profile,
    pub psi: Profile,
    pub epsilon: f64,
    pub x0: f64,
    /// Positivity floor required of `u(0, x)`.
    pub delta0: f64,
    /// Compressive strength recorded in reports; `-ψ'(x0)` when not given.
    pub k_report: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSection {
    pub cfl: f64,
    pub g_stop: f64,
    pub front_cells: f64,
    pub u_floor: f64,
    pub t_max: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSection {
    pub growth: f64,
    pub min_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    pub horizon: HorizonRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    pub dir: String,
    /// Significant digits in CSV output.
    pub precision: usize,
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub gas: GasSection,
    pub initial: InitialSection,
    pub damping: DampingFamily,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub fit: FitSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

pub const DEFAULT_PRECISION: usize = 12;

// Values used when neither the file nor a scenario supplies them.
const DEFAULT_GAMMA: f64 = 2.0;
const DEFAULT_EPSILON: f64 = 0.1;
const DEFAULT_DELTA0: f64 = 0.1;
const DEFAULT_DX: f64 = 0.01;
const DEFAULT_T_MAX: f64 = 100.0;
const DEFAULT_CFL: f64 = 1.0;
const DEFAULT_G_STOP: f64 = 1e4;
const DEFAULT_FRONT_CELLS: f64 = 12.0;
const DEFAULT_GROWTH: f64 = 1.5;
const DEFAULT_MAX_STEPS: usize = 10_000_000;

// On-disk shape: every key optional, unknown keys rejected.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<String>,
    #[serde(default)]
    gas: RawGas,
    #[serde(default)]
    initial: RawInitial,
    damping: Option<RawDamping>,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    fit: RawFit,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGas {
    gamma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    phi: Option<RawProfile>,
    psi: Option<RawProfile>,
    epsilon: Option<f64>,
    x0: Option<f64>,
    delta0: Option<f64>,
    k_report: Option<f64>,
}

/// A preset name (`"neg_x_gauss"`, centred at `x0` with unit scale) or a
/// full table with a `kind` key.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawProfile {
    Name(String),
    Full(Profile),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDamping {
    family: String,
    mu: Option<f64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    x_min: Option<f64>,
    x_max: Option<f64>,
    nx: Option<i64>,
    dx: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    cfl: Option<f64>,
    g_stop: Option<f64>,
    front_cells: Option<f64>,
    u_floor: Option<f64>,
    t_max: Option<f64>,
    max_steps: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFit {
    growth: Option<f64>,
    min_samples: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    epsilons: Option<Vec<f64>>,
    horizon: Option<HorizonRule>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    precision: Option<i64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    1 + text.as_bytes()[..offset.min(text.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
}

fn parse_error(text: &str, e: toml::de::Error) -> Error {
    let line = e.span().map_or(1, |s| line_of(text, s.start));
    Error::Parse {
        line,
        message: e.message().trim().to_string(),
    }
}

fn profile_from_name(name: &str, key: &str, x0: f64) -> Result<Profile> {
    match name {
        "zero" => Ok(Profile::Zero),
        "neg_x_gauss" => Ok(Profile::neg_x_gauss(x0)),
        "gauss" => Ok(Profile::Gauss {
            amp: 1.0,
            center: x0,
            width: 1.0,
        }),
        "tanh" => Ok(Profile::Tanh {
            amp: 1.0,
            center: x0,
            width: 1.0,
        }),
        other => Err(Error::validation(
            key,
            format!("unknown profile '{other}' (known: zero, neg_x_gauss, gauss, tanh)"),
        )),
    }
}

fn damping_family(raw: &RawDamping) -> Result<DampingFamily> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| {
            Error::validation(
                &format!("damping.{name}"),
                format!("required for family {}", raw.family),
            )
        })
    };
    let reject = |v: Option<f64>, name: &str| match v {
        Some(_) => Err(Error::validation(
            &format!("damping.{name}"),
            format!("not a parameter of family {}", raw.family),
        )),
        None => Ok(()),
    };
    Ok(match raw.family.as_str() {
        "zero" => {
            reject(raw.mu, "mu")?;
            reject(raw.lambda1, "lambda1")?;
            reject(raw.lambda2, "lambda2")?;
            DampingFamily::Zero
        }
        "time_power" => {
            reject(raw.lambda2, "lambda2")?;
            DampingFamily::TimePower { mu: need(raw.mu, "mu")?, lambda1: need(raw.lambda1, "lambda1")? }
        }
        "space_power" => {
            reject(raw.mu, "mu")?;
            reject(raw.lambda1, "lambda1")?;
            DampingFamily::SpacePower { lambda2: need(raw.lambda2, "lambda2")? }
        }
        "separated_sum" | "separated_product" => {
            reject(raw.mu, "mu")?;
            let lambda1 = need(raw.lambda1, "lambda1")?;
            let lambda2 = need(raw.lambda2, "lambda2")?;
            if raw.family == "separated_sum" {
                DampingFamily::SeparatedSum { lambda1, lambda2 }
            } else {
                DampingFamily::SeparatedProduct { lambda1, lambda2 }
            }
        }
        other => {
            return Err(Error::validation(
                "damping.family",
                format!(
                    "unknown family '{other}' (known: zero, time_power, space_power, separated_sum, separated_product)"
                ),
            ))
        }
    })
}

fn non_negative_int(v: Option<i64>, key: &str) -> Result<Option<usize>> {
    match v {
        None => Ok(None),
        Some(n) if n >= 0 => Ok(Some(n as usize)),
        Some(n) => Err(Error::validation(
            key,
            format!("must be non-negative (got {n})"),
        )),
    }
}

/// Parse and validate a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<RunConfig> {
    let preset = match &raw.scenario {
        Some(name) => Some(preset(name).ok_or_else(|| unknown_scenario(name))?),
        None => None,
    };
    let x0 = raw.initial.x0.unwrap_or(0.0);
    let profile = |p: Option<RawProfile>, key: &str, default: &str| match p {
        None => profile_from_name(default, key, x0),
        Some(RawProfile::Name(n)) => profile_from_name(&n, key, x0),
        Some(RawProfile::Full(p)) => Ok(p),
    };
    let phi = profile(raw.initial.phi, "initial.phi", "zero")?;
    let psi = profile(raw.initial.psi, "initial.psi", "neg_x_gauss")?;
    let damping = match &raw.damping {
        Some(d) => damping_family(d)?,
        None => preset.map_or(DampingFamily::Zero, |p| p.family),
    };
    // never below the preset's own ladder, whose horizon may not extend further
    let epsilon = raw.initial.epsilon.unwrap_or_else(|| {
        let smallest = preset.map_or(0.0, |p| {
            p.epsilons.iter().copied().fold(f64::INFINITY, f64::min)
        });
        DEFAULT_EPSILON.max(smallest)
    });
    let horizon = raw
        .sweep
        .horizon
        .or(preset.map(|p| p.horizon))
        .unwrap_or(HorizonRule::Fixed {
            t_max: DEFAULT_T_MAX,
        });
    let t_max = raw.solver.t_max.unwrap_or_else(|| horizon.t_max(epsilon));
    let k_report = raw.initial.k_report.unwrap_or(-psi.derivative(x0));
    let initial = InitialSection {
        phi,
        psi,
        epsilon,
        x0,
        delta0: raw.initial.delta0.unwrap_or(DEFAULT_DELTA0),
        k_report,
    };

    let nx = non_negative_int(raw.grid.nx, "grid.nx")?;
    let grid = match (raw.grid.x_min, raw.grid.x_max, nx) {
        (Some(x_min), Some(x_max), Some(nx)) => {
            if raw.grid.dx.is_some() {
                return Err(Error::validation(
                    "grid.dx",
                    "give either dx or all of x_min, x_max, nx",
                ));
            }
            GridSection { x_min, x_max, nx }
        }
        (None, None, None) => {
            let dx = raw.grid.dx.or(preset.map(|p| p.dx)).unwrap_or(DEFAULT_DX);
            if !(dx > 0.0 && dx.is_finite()) {
                return Err(Error::validation(
                    "grid.dx",
                    format!("must be positive (got {dx})"),
                ));
            }
            let data = initial_data_of(&initial);
            let half = domain_half_width(&data, t_max.max(0.0));
            let g = Grid1D::symmetric(half, dx)
                .map_err(|e| Error::validation("grid.dx", e.to_string()))?;
            GridSection {
                x_min: g.x_min,
                x_max: g.x_max,
                nx: g.nx,
            }
        }
        (None, _, _) => {
            return Err(Error::validation(
                "grid.x_min",
                "missing (x_min, x_max and nx go together)",
            ))
        }
        (_, None, _) => {
            return Err(Error::validation(
                "grid.x_max",
                "missing (x_min, x_max and nx go together)",
            ))
        }
        (_, _, None) => {
            return Err(Error::validation(
                "grid.nx",
                "missing (x_min, x_max and nx go together)",
            ))
        }
    };

    let solver = SolverSection {
        cfl: raw
            .solver
            .cfl
            .or(preset.map(|p| p.cfl))
            .unwrap_or(DEFAULT_CFL),
        g_stop: raw.solver.g_stop.unwrap_or(DEFAULT_G_STOP),
        front_cells: raw
            .solver
            .front_cells
            .or(preset.map(|p| p.front_cells))
            .unwrap_or(DEFAULT_FRONT_CELLS),
        u_floor: raw.solver.u_floor.unwrap_or(DEFAULT_U_FLOOR),
        t_max,
        max_steps: non_negative_int(raw.solver.max_steps, "solver.max_steps")?
            .unwrap_or(DEFAULT_MAX_STEPS),
    };
    let defaults = FitOptions::default();
    let fit = FitSection {
        growth: raw
            .fit
            .growth
            .or(preset.map(|p| p.growth))
            .unwrap_or(DEFAULT_GROWTH),
        min_samples: non_negative_int(raw.fit.min_samples, "fit.min_samples")?
            .unwrap_or(defaults.min_samples),
    };
    let sweep = SweepSection {
        epsilons: raw
            .sweep
            .epsilons
            .or(preset.map(|p| p.epsilons.to_vec()))
            .unwrap_or_else(|| LADDER.to_vec()),
        horizon,
    };
    let output = OutputSection {
        dir: raw.output.dir.unwrap_or_else(|| "out".to_string()),
        precision: non_negative_int(raw.output.precision, "output.precision")?
            .unwrap_or(DEFAULT_PRECISION),
    };
    let cfg = RunConfig {
        scenario: raw.scenario,
        gas: GasSection {
            gamma: raw.gas.gamma.unwrap_or(DEFAULT_GAMMA),
        },
        initial,
        damping,
        grid,
        solver,
        fit,
        sweep,
        output,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn initial_data_of(init: &InitialSection) -> InitialData {
    InitialData {
        phi: init.phi,
        psi: init.psi,
        epsilon: init.epsilon,
        x0: init.x0,
        delta0: init.delta0,
    }
}

fn positive(v: f64, key: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(
            key,
            format!("must be positive and finite (got {v})"),
        ))
    }
}

fn check_profile(p: &Profile, key: &str) -> Result<()> {
    match *p {
        Profile::Zero => Ok(()),
        Profile::NegXGauss {
            scale: a,
            center,
            width,
        }
        | Profile::Gauss {
            amp: a,
            center,
            width,
        }
        | Profile::Tanh {
            amp: a,
            center,
            width,
        } => {
            if !(a.is_finite() && center.is_finite()) {
                return Err(Error::validation(
                    key,
                    "amplitude and center must be finite",
                ));
            }
            positive(width, &format!("{key}.width"))
        }
    }
}

impl RunConfig {
    /// A preset with every value at its default, for perturbation size
    /// `epsilon`.
    /// Preset with its default perturbation size.
    pub fn from_scenario(name: &str) -> Result<RunConfig> {
        resolve(RawConfig {
            scenario: Some(name.to_string()),
            ..Default::default()
        })
    }

    pub fn from_preset(name: &str, epsilon: f64) -> Result<RunConfig> {
        resolve(RawConfig {
            scenario: Some(name.to_string()),
            initial: RawInitial {
                epsilon: Some(epsilon),
                ..Default::default()
            },
            ..Default::default()
        })
    }

    pub fn preset(&self) -> Option<&'static ScenarioPreset> {
        self.scenario.as_deref().and_then(preset)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.gas.gamma;
        if !(g > 1.0 && g.is_finite()) {
            return Err(Error::validation(
                "gas.gamma",
                format!("gamma must exceed 1 (got {g})"),
            ));
        }
        let init = &self.initial;
        if !(init.epsilon >= 0.0 && init.epsilon.is_finite()) {
            return Err(Error::validation(
                "initial.epsilon",
                format!("must be non-negative (got {})", init.epsilon),
            ));
        }
        if !init.x0.is_finite() {
            return Err(Error::validation("initial.x0", "must be finite"));
        }
        if !(init.delta0 > 0.0 && init.delta0 <= 1.0) {
            return Err(Error::validation(
                "initial.delta0",
                format!("must lie in (0, 1] (got {})", init.delta0),
            ));
        }
        if !init.k_report.is_finite() {
            return Err(Error::validation("initial.k_report", "must be finite"));
        }
        check_profile(&init.phi, "initial.phi")?;
        check_profile(&init.psi, "initial.psi")?;
        DampingSpec::new(self.damping).map_err(|e| Error::validation("damping", e.to_string()))?;

        let gr = &self.grid;
        if gr.nx < 3 {
            return Err(Error::validation(
                "grid.nx",
                format!("need at least 3 nodes (got {})", gr.nx),
            ));
        }
        if !(gr.x_min.is_finite() && gr.x_max.is_finite() && gr.x_min < gr.x_max) {
            return Err(Error::validation("grid.x_max", "must exceed grid.x_min"));
        }
        let sv = &self.solver;
        if !(sv.cfl > 0.0 && sv.cfl <= 1.0) {
            return Err(Error::validation(
                "solver.cfl",
                format!("must lie in (0, 1] (got {})", sv.cfl),
            ));
        }
        positive(sv.g_stop, "solver.g_stop")?;
        positive(sv.t_max, "solver.t_max")?;
        if !(sv.front_cells >= 0.0 && sv.front_cells.is_finite()) {
            return Err(Error::validation(
                "solver.front_cells",
                "must be non-negative",
            ));
        }
        if !(sv.u_floor > 0.0 && sv.u_floor < init.delta0) {
            return Err(Error::validation(
                "solver.u_floor",
                format!("must lie in (0, initial.delta0) (got {})", sv.u_floor),
            ));
        }
        if sv.max_steps == 0 {
            return Err(Error::validation("solver.max_steps", "must be positive"));
        }
        if !(self.fit.growth >= 1.0 && self.fit.growth.is_finite()) {
            return Err(Error::validation("fit.growth", "must be at least 1"));
        }
        if self.fit.min_samples < 3 {
            return Err(Error::validation("fit.min_samples", "need at least 3"));
        }
        for (i, &e) in self.sweep.epsilons.iter().enumerate() {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::validation(
                    &format!("sweep.epsilons[{i}]"),
                    format!("must be positive (got {e})"),
                ));
            }
        }
        match self.sweep.horizon {
            HorizonRule::Fixed { t_max } => positive(t_max, "sweep.horizon.t_max")?,
            HorizonRule::Power { coef, exponent } => {
                positive(coef, "sweep.horizon.coef")?;
                if !exponent.is_finite() {
                    return Err(Error::validation(
                        "sweep.horizon.exponent",
                        "must be finite",
                    ));
                }
            }
            HorizonRule::Exponential { coef, rate } => {
                positive(coef, "sweep.horizon.coef")?;
                if !rate.is_finite() {
                    return Err(Error::validation("sweep.horizon.rate", "must be finite"));
                }
            }
        }
        if !(1..=17).contains(&self.output.precision) {
            return Err(Error::validation("output.precision", "must lie in 1..=17"));
        }

        // Domain sizing: the perturbation cannot reach the boundary before
        // t_max at any speed up to 4.
        let data = initial_data_of(init);
        let reach = domain_half_width(&data, sv.t_max) - init.x0.abs();
        let slack = 1e-9 * reach.max(1.0);
        if gr.x_max < init.x0 + reach - slack {
            return Err(Error::validation(
                "grid.x_max",
                format!(
                    "domain too small: need x_max >= {} for t_max = {}",
                    init.x0 + reach,
                    sv.t_max
                ),
            ));
        }
        if gr.x_min > init.x0 - reach + slack {
            return Err(Error::validation(
                "grid.x_min",
                format!(
                    "domain too small: need x_min <= {} for t_max = {}",
                    init.x0 - reach,
                    sv.t_max
                ),
            ));
        }

        // Positivity floor of the initial data.
        self.law()?;
        let min_u = data.min_u_on(&self.grid()?);
        if !(min_u >= init.delta0) {
            return Err(Error::validation(
                "initial.delta0",
                format!(
                    "initial data reach u = {min_u} below the floor delta0 = {}",
                    init.delta0
                ),
            ));
        }
        Ok(())
    }

    pub fn law(&self) -> Result<GasLaw> {
        GasLaw::with_u_floor(self.gas.gamma, self.solver.u_floor)
    }

    pub fn damping_spec(&self) -> Result<DampingSpec> {
        DampingSpec::new(self.damping)
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.grid.x_min, self.grid.x_max, self.grid.nx)
    }

    pub fn initial_data(&self) -> InitialData {
        initial_data_of(&self.initial)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            cfl: self.solver.cfl,
            g_stop: self.solver.g_stop,
            front_cells: self.solver.front_cells,
            max_steps: self.solver.max_steps,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            growth: self.fit.growth,
            min_samples: self.fit.min_samples,
            ..FitOptions::default()
        }
    }

    pub fn simulation(&self) -> Result<Simulation> {
        Ok(Simulation {
            law: self.law()?,
            damping: self.damping_spec()?,
            data: self.initial_data(),
            grid: self.grid()?,
            solver: self.solver_options(),
            t_max: self.solver.t_max,
            fit: self.fit_options(),
            history_stride: None,
        })
    }

    /// Sweep over `sweep.epsilons` at the grid spacing of `[grid]`; each member
    /// gets its horizon from `sweep.horizon` and a domain sized for it.
    pub fn sweep_plan(&self) -> Result<SweepPlan> {
        Ok(SweepPlan {
            base: self.simulation()?,
            epsilons: self.sweep.epsilons.clone(),
            horizon: self.sweep.horizon,
            dx: self.grid()?.dx(),
        })
    }
}

/// Render a resolved config as TOML; `parse_config` reads it back unchanged.
pub fn emit_config(cfg: &RunConfig) -> Result<String> {
    let mut value =
        toml::Value::try_from(cfg).map_err(|e| Error::validation("config", e.to_string()))?;
    // The damping table is written in its on-disk shape.
    if let Some(table) = value.as_table_mut() {
        let mut d = toml::Table::new();
        d.insert("family".into(), cfg.damping.name().into());
        match cfg.damping {
            DampingFamily::Zero => {}
            DampingFamily::TimePower { mu, lambda1 } => {
                d.insert("mu".into(), mu.into());
                d.insert("lambda1".into(), lambda1.into());
            }
            DampingFamily::SpacePower { lambda2 } => {
                d.insert("lambda2".into(), lambda2.into());
            }
            DampingFamily::SeparatedSum { lambda1, lambda2 }
            | DampingFamily::SeparatedProduct { lambda1, lambda2 } => {
                d.insert("lambda1".into(), lambda1.into());
                d.insert("lambda2".into(), lambda2.into());
            }
        }
        table.insert("damping".into(), toml::Value::Table(d));
    }
    toml::to_string(&value).map_err(|e| Error::validation("config", e.to_string()))
}

/// Comma-separated list of positive perturbation sizes, e.g. `0.2,0.1,0.05`.
pub fn parse_epsilons(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::validation("epsilons", "empty list"));
    }
    text.split(',')
        .enumerate()
        .map(|(i, item)| {
            let item = item.trim();
            let e: f64 = item.parse().map_err(|_| Error::Parse {
                line: 1,
                message: format!("item {}: '{item}' is not a number", i + 1),
            })?;
            if e > 0.0 && e.is_finite() {
                Ok(e)
            } else {
                Err(Error::validation(
                    &format!("epsilons[{i}]"),
                    format!("must be positive (got {e})"),
                ))
            }
        })
        .collect()
}
