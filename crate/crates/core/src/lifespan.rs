//! Life-span measurement: blow-up time extrapolation, `Φ` on the cone
//! regions, blow-up localization and ε-sweeps with scaling fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristics::{CharPath, RegionSpec, RegionTracker};
use crate::damping::DampingSpec;
use crate::error::{Error, Result};
use crate::field::{
    run_until, sup_norms_on_region, FieldState, Grid1D, InitialData, SolverOptions, StepMonitor,
    StopCause, TimeSeries,
};
use crate::gas::GasLaw;
use crate::history::{HistoryRecorder, SolverHistory};

/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "PSYSTEM_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakQuantity {
    Rx,
    Sx,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Required growth of the max gradient over its minimum along the run.
    pub growth: f64,
    /// Minimum number of grown samples.
    pub min_samples: usize,
    /// Candidate trailing windows, as fractions of the samples.
    pub windows: [f64; 3],
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            growth: 10.0,
            min_samples: 8,
            windows: [0.1, 0.2, 0.4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Root-mean-square residual.
    pub rms: f64,
    pub n: usize,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::InsufficientData(format!(
            "line fit needs at least 2 points (got {n})"
        )));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::FitFailure("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
        rms: (sse / nf).sqrt(),
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TStarFit {
    pub t_star: f64,
    /// Fraction of the samples in the selected trailing window.
    pub window: f64,
    pub fit: LineFit,
}

/// Blow-up time from the reciprocal of the max gradient: `1/g` is fitted by
/// a line over the trailing 10%, 20% and 40% of the samples, and the window
/// with the smallest residual (relative to the spread of `1/g` in it) gives
/// the `t`-intercept.
pub fn estimate_t_star(series: &TimeSeries, opts: &FitOptions) -> Result<TStarFit> {
    let rows = &series.rows;
    let t_stop = rows
        .last()
        .map(|r| r.t)
        .ok_or_else(|| Error::InsufficientData("empty time series".into()))?;
    let g_min = rows
        .iter()
        .map(|r| r.max_gradient())
        .fold(f64::INFINITY, f64::min);
    let grown = rows
        .iter()
        .filter(|r| r.max_gradient() > opts.growth * g_min)
        .count();
    if !(g_min > 0.0) || grown < opts.min_samples {
        return Err(Error::InsufficientData(format!(
            "{grown} samples above {}x the minimum gradient (need {})",
            opts.growth, opts.min_samples
        )));
    }
    let mut best: Option<(f64, TStarFit)> = None;
    for &frac in &opts.windows {
        let count = ((rows.len() as f64 * frac).ceil() as usize)
            .max(opts.min_samples)
            .min(rows.len());
        let tail = &rows[rows.len() - count..];
        let t: Vec<f64> = tail.iter().map(|r| r.t).collect();
        let y: Vec<f64> = tail.iter().map(|r| 1.0 / r.max_gradient()).collect();
        let Ok(fit) = linear_fit(&t, &y) else {
            continue;
        };
        if !(fit.slope < 0.0) {
            continue;
        }
        let spread = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - y.iter().cloned().fold(f64::INFINITY, f64::min);
        let score = if spread > 0.0 {
            fit.rms / spread
        } else {
            f64::INFINITY
        };
        let candidate = TStarFit {
            t_star: -fit.intercept / fit.slope,
            window: frac,
            fit,
        };
        if best.as_ref().map_or(true, |(s, _)| score < *s) {
            best = Some((score, candidate));
        }
    }
    let (_, mut fit) =
        best.ok_or_else(|| Error::FitFailure("1/g is not decreasing near the stop".into()))?;
    if !(fit.t_star >= 0.9 * t_stop) {
        return Err(Error::FitFailure(format!(
            "extrapolated blow-up time {} lies before the stopping time {t_stop}",
            fit.t_star
        )));
    }
    fit.t_star = fit.t_star.max(t_stop);
    Ok(fit)
}

/// `Φ(t) = sup|r| + sup|s|` over the region at every retained level.
pub fn phi_series(history: &SolverHistory, region: &RegionSpec) -> Vec<(f64, f64)> {
    let grid = history.grid;
    history
        .levels
        .iter()
        .map(|level| {
            let (mut sr, mut ss) = (0.0f64, 0.0f64);
            for (k, (r, s)) in level.r.iter().zip(&level.s).enumerate() {
                if region.contains(level.t, grid.x(level.lo + k)) {
                    sr = sr.max(r.abs());
                    ss = ss.max(s.abs());
                }
            }
            (level.t, sr + ss)
        })
        .collect()
}

/// Tracks the region boundaries with the solver and evaluates `Φ` on every
/// accepted level.
#[derive(Debug, Clone)]
pub struct PhiMonitor {
    tracker: RegionTracker,
    current: Option<f64>,
    pub series: Vec<(f64, f64)>,
}

impl PhiMonitor {
    pub fn new(x0: f64) -> Self {
        PhiMonitor {
            tracker: RegionTracker::new(x0),
            current: None,
            series: Vec::new(),
        }
    }

    fn record(&mut self, state: &FieldState) {
        let phi = sup_norms_on_region(state, &self.tracker.current()).phi();
        self.current = Some(phi);
        self.series.push((state.t, phi));
    }

    pub fn max_ratio(&self) -> Option<f64> {
        let phi0 = self.series.first()?.1;
        if !(phi0 > 0.0) {
            return None;
        }
        Some(self.series.iter().map(|p| p.1).fold(0.0, f64::max) / phi0)
    }

    pub fn max_phi(&self) -> f64 {
        self.series.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    pub fn into_region(self, spec: &DampingSpec) -> (RegionSpec, Vec<CharPath>, Vec<(f64, f64)>) {
        let (region, paths) = self.tracker.into_region(spec);
        (region, paths, self.series)
    }
}

impl StepMonitor for PhiMonitor {
    fn start(&mut self, state: &FieldState, law: &GasLaw, spec: &DampingSpec) {
        self.tracker.start(state, law, spec);
        self.series.clear();
        self.record(state);
    }

    fn observe(&mut self, prev: &FieldState, next: &FieldState, law: &GasLaw, spec: &DampingSpec) {
        self.tracker.observe(prev, next, law, spec);
        self.record(next);
    }

    fn phi_region(&self) -> Option<f64> {
        self.current
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub index: usize,
    pub x: f64,
    pub peak_quantity: PeakQuantity,
    pub peak_value: f64,
    /// Signed distance to the region edge, positive inside.
    pub depth: f64,
    pub inside_region: bool,
}

/// Node with the largest `|r_x|` or `|s_x|` and its position relative to the
/// region. Nodes within one grid spacing outside the edge count as inside,
/// since the edge itself is only known to grid accuracy.
pub fn localize_blowup(state: &FieldState, region: &RegionSpec) -> Localization {
    let mut best = (0, PeakQuantity::Sx, -1.0);
    for i in 0..state.grid.nx {
        if state.sx[i].abs() > best.2 {
            best = (i, PeakQuantity::Sx, state.sx[i].abs());
        }
        if state.rx[i].abs() > best.2 {
            best = (i, PeakQuantity::Rx, state.rx[i].abs());
        }
    }
    let x = state.grid.x(best.0);
    let depth = region.depth(state.t, x);
    Localization {
        index: best.0,
        x,
        peak_quantity: best.1,
        peak_value: best.2,
        depth,
        inside_region: depth >= -state.grid.dx(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub stopped_cause: StopCause,
    pub t_stop: f64,
    pub t_star_estimate: Option<f64>,
    pub blowup_node_x: Option<f64>,
    pub peak_quantity: Option<PeakQuantity>,
    pub phi_max_ratio: Option<f64>,
    pub inside_region: Option<bool>,
    pub region_depth: Option<f64>,
    pub fit_window: Option<f64>,
    pub fit_error: Option<String>,
    pub initial_max_gradient: f64,
    pub final_max_gradient: f64,
    pub min_c: f64,
    pub max_c: f64,
    /// `c/4 ≤ c(u) ≤ 4c` with `c = c(1)` held on every level.
    pub sound_speed_band_ok: bool,
    pub k_report: f64,
    pub steps: usize,
    pub message: Option<String>,
}

/// One fully specified simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulation {
    pub law: GasLaw,
    pub damping: DampingSpec,
    pub data: InitialData,
    pub grid: Grid1D,
    pub solver: SolverOptions,
    pub t_max: f64,
    pub fit: FitOptions,
    /// Keep every n-th level for post-hoc tracing.
    pub history_stride: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub report: BlowupReport,
    pub series: TimeSeries,
    pub state: FieldState,
    pub region: RegionSpec,
    pub boundary_paths: Vec<CharPath>,
    pub phi: Vec<(f64, f64)>,
    pub history: Option<SolverHistory>,
}

pub fn simulate(sim: &Simulation) -> Result<SimulationResult> {
    let state = FieldState::init(sim.grid, &sim.law, &sim.data)?;
    let mut phi = PhiMonitor::new(sim.data.x0);
    let mut recorder = sim
        .history_stride
        .map(|s| HistoryRecorder::new(sim.grid, s));
    let outcome = {
        let mut monitors: Vec<&mut dyn StepMonitor> = vec![&mut phi];
        if let Some(r) = recorder.as_mut() {
            monitors.push(r);
        }
        run_until(
            state,
            &sim.law,
            &sim.damping,
            &sim.solver,
            sim.t_max,
            &mut monitors,
        )
    };
    let phi_max_ratio = phi.max_ratio();
    let (region, boundary_paths, phi_values) = phi.into_region(&sim.damping);
    let rows = &outcome.series.rows;
    let (min_u, max_u) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| {
            (a.min(r.min_u), b.max(r.max_u))
        });
    let min_c = sim.law.sound_speed(max_u)?;
    let max_c = sim.law.sound_speed(min_u)?;
    let mut report = BlowupReport {
        stopped_cause: outcome.cause,
        t_stop: outcome.state.t,
        t_star_estimate: None,
        blowup_node_x: None,
        peak_quantity: None,
        phi_max_ratio,
        inside_region: None,
        region_depth: None,
        fit_window: None,
        fit_error: None,
        initial_max_gradient: rows.first().map_or(0.0, |r| r.max_gradient()),
        final_max_gradient: rows.last().map_or(0.0, |r| r.max_gradient()),
        min_c,
        max_c,
        sound_speed_band_ok: min_c >= 0.25 && max_c <= 4.0,
        k_report: sim.data.k_report(),
        steps: outcome.steps,
        message: outcome.detail.clone(),
    };
    if outcome.cause == StopCause::Gradient {
        match estimate_t_star(&outcome.series, &sim.fit) {
            Ok(fit) => {
                report.t_star_estimate = Some(fit.t_star);
                report.fit_window = Some(fit.window);
            }
            Err(e) => report.fit_error = Some(e.to_string()),
        }
        let loc = localize_blowup(&outcome.state, &region);
        report.blowup_node_x = Some(loc.x);
        report.peak_quantity = Some(loc.peak_quantity);
        report.inside_region = Some(loc.inside_region);
        report.region_depth = Some(loc.depth);
    }
    Ok(SimulationResult {
        report,
        series: outcome.series,
        state: outcome.state,
        region,
        boundary_paths,
        phi: phi_values,
        history: recorder.map(HistoryRecorder::finish),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    /// `log T* = a + b log ε`.
    Power,
    /// `log T* = a + b / ε`.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: ScalingModel,
    pub exponent_or_rate: f64,
    pub r_squared: f64,
    pub rows_used: usize,
    pub power: LineFit,
    pub exponential: LineFit,
}

/// R² margin by which the exponential model must beat the power model.
pub const POWER_PREFERENCE_MARGIN: f64 = 0.01;

/// Fit both scaling models to `(ε, T*)` pairs and select by R², preferring
/// the power model on near ties.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} blow-up rows, at least 3 are needed for a scaling fit",
            points.len()
        )));
    }
    let log_t: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let log_e: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let inv_e: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
    let power = linear_fit(&log_e, &log_t)?;
    let exponential = linear_fit(&inv_e, &log_t)?;
    let (model, chosen) = if exponential.r_squared > power.r_squared + POWER_PREFERENCE_MARGIN {
        (ScalingModel::Exponential, exponential)
    } else {
        (ScalingModel::Power, power)
    };
    Ok(ScalingFit {
        model,
        exponent_or_rate: chosen.slope,
        r_squared: chosen.r_squared,
        rows_used: points.len(),
        power,
        exponential,
    })
}

/// Horizon `t_max(ε)` for a sweep member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum HorizonRule {
    Fixed {
        t_max: f64,
    },
    /// `coef · ε^exponent`.
    Power {
        coef: f64,
        exponent: f64,
    },
    /// `coef · exp(rate/ε)`.
    Exponential {
        coef: f64,
        rate: f64,
    },
}

impl HorizonRule {
    pub fn t_max(&self, epsilon: f64) -> f64 {
        match *self {
            HorizonRule::Fixed { t_max } => t_max,
            HorizonRule::Power { coef, exponent } => coef * epsilon.powf(exponent),
            HorizonRule::Exponential { coef, rate } => coef * (rate / epsilon).exp(),
        }
    }
}

/// Half-width of a symmetric domain that keeps compactly supported data away
/// from the boundary until `t_max`: `|x₀| + 4 c(1) t_max + support radius`.
pub fn domain_half_width(data: &InitialData, t_max: f64) -> f64 {
    let radius = data
        .support()
        .map_or(0.0, |(lo, hi)| lo.abs().max(hi.abs()));
    data.x0.abs() + 4.0 * t_max + radius
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    /// Template; its `epsilon`, `grid` and `t_max` are replaced per member.
    pub base: Simulation,
    pub epsilons: Vec<f64>,
    pub horizon: HorizonRule,
    /// Grid spacing shared by all members.
    pub dx: f64,
}

impl SweepPlan {
    pub fn member(&self, epsilon: f64) -> Result<Simulation> {
        let mut sim = self.base;
        sim.data.epsilon = epsilon;
        sim.t_max = self.horizon.t_max(epsilon);
        let half = domain_half_width(&sim.data, sim.t_max);
        sim.grid = Grid1D::symmetric(half, self.dx)?;
        Ok(sim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub t_stop: f64,
    pub t_star: Option<f64>,
    pub stopped_cause: StopCause,
    pub phi_max_ratio: Option<f64>,
    pub phi_max: f64,
    pub inside_region: Option<bool>,
    pub nx: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub fit: Option<ScalingFit>,
    pub fit_error: Option<String>,
}

/// Worker count from the environment, defaulting to the available
/// parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn sweep_row(sim: &Simulation) -> Result<SweepRow> {
    let res = simulate(sim)?;
    let phi_max = res.phi.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(SweepRow {
        epsilon: sim.data.epsilon,
        t_stop: res.report.t_stop,
        t_star: res.report.t_star_estimate,
        stopped_cause: res.report.stopped_cause,
        phi_max_ratio: res.report.phi_max_ratio,
        phi_max,
        inside_region: res.report.inside_region,
        nx: sim.grid.nx,
        steps: res.report.steps,
    })
}

/// Run every member on `workers` threads. Members are independent, so the
/// rows do not depend on the worker count; they are returned in the order
/// of `plan.epsilons`.
pub fn run_sweep_with(plan: &SweepPlan, workers: usize) -> Result<SweepResult> {
    let members = plan
        .epsilons
        .iter()
        .map(|&e| plan.member(e))
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        members
            .par_iter()
            .map(sweep_row)
            .collect::<Result<Vec<_>>>()
    })?;
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.stopped_cause == StopCause::Gradient)
        .filter_map(|r| r.t_star.map(|t| (r.epsilon, t)))
        .collect();
    let (fit, fit_error) = match fit_scaling(&points) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(SweepResult {
        rows,
        fit,
        fit_error,
    })
}

pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    run_sweep_with(plan, worker_count())
}
