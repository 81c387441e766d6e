//! Upwind evolution of the Riemann invariants on a uniform grid.
//!
//! `r` travels with speed `-c` and `s` with `+c`:
//!
//! ```text
//! r_t - c r_x = -(a/2)(r + s)
//! s_t + c s_x = -(a/2)(r + s)
//! ```
//!
//! Transport is first-order upwind with the node speed frozen over the step;
//! the damping source is then applied implicitly (backward Euler), which for
//! this source is an exact 2×2 solve. The background state `r = s = 0` is an
//! exact fixed point, so only the window of nodes that can be non-zero is
//! updated; nodes outside it are never touched and stay bitwise at the
//! background.

use serde::{Deserialize, Serialize};

use crate::characteristics::RegionSpec;
use crate::damping::DampingSpec;
use crate::error::{Error, Result};
use crate::gas::{GasLaw, GasState};
use crate::profile::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
}

const MAX_CELLS: f64 = 1e10;

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        if nx < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 3 nodes (nx = {nx})"
            )));
        }
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid bounds must satisfy x_min < x_max (got {x_min}, {x_max})"
            )));
        }
        Ok(Grid1D { x_min, x_max, nx })
    }

    /// Symmetric grid `[-half_width, half_width]` with spacing as close to
    /// `dx` as an odd node count allows (so `x = 0` is a node).
    pub fn symmetric(half_width: f64, dx: f64) -> Result<Self> {
        let cells = (2.0 * half_width / dx).ceil();
        if !(cells <= MAX_CELLS) {
            return Err(Error::InvalidParameter(format!(
                "a grid of half-width {half_width} at dx = {dx} needs more than {MAX_CELLS} cells"
            )));
        }
        let cells = cells as usize;
        let cells = cells + cells % 2;
        Grid1D::new(-half_width, half_width, cells + 1)
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    /// Cell index and fractional offset for linear interpolation, `None`
    /// outside the grid.
    #[inline]
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !(x >= self.x_min && x <= self.x_max) {
            return None;
        }
        let p = (x - self.x_min) / self.dx();
        let i = (p.floor() as usize).min(self.nx - 2);
        Some((i, p - i as f64))
    }

    pub fn nearest(&self, x: f64) -> usize {
        let p = ((x - self.x_min) / self.dx()).round();
        p.clamp(0.0, (self.nx - 1) as f64) as usize
    }
}

/// Initial perturbation `(u, v)(0, x) = (1 + ε φ(x), ε ψ(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub phi: Profile,
    pub psi: Profile,
    pub epsilon: f64,
    /// Point where the steepness of `ψ` is measured.
    pub x0: f64,
    /// Required lower bound on `u(0, ·)`.
    pub delta0: f64,
}

impl InitialData {
    pub fn state_at(&self, x: f64) -> GasState {
        GasState {
            u: 1.0 + self.epsilon * self.phi.value(x),
            v: self.epsilon * self.psi.value(x),
        }
    }

    /// `K` such that `ψ_x(x₀) = -K`.
    pub fn k_report(&self) -> f64 {
        -self.psi.derivative(self.x0)
    }

    /// `[lo, hi]` outside which the perturbation vanishes, `None` when it
    /// vanishes everywhere or has no compact support.
    pub fn support(&self) -> Option<(f64, f64)> {
        if self.epsilon == 0.0 || !self.phi.is_compact() || !self.psi.is_compact() {
            return None;
        }
        match (self.phi.support(), self.psi.support()) {
            (None, None) => None,
            (Some(a), None) | (None, Some(a)) => Some(a),
            (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
        }
    }

    fn is_background(&self) -> bool {
        self.epsilon == 0.0 || (self.phi == Profile::Zero && self.psi == Profile::Zero)
    }

    /// Nodes that may carry a perturbation, `None` if none can.
    fn node_range(&self, grid: &Grid1D) -> Option<(usize, usize)> {
        if self.is_background() {
            return None;
        }
        let Some((lo, hi)) = self.support() else {
            return Some((0, grid.nx - 1));
        };
        if hi < grid.x_min || lo > grid.x_max {
            return None;
        }
        let first = ((lo - grid.x_min) / grid.dx()).floor().max(0.0) as usize;
        let last = ((hi - grid.x_min) / grid.dx())
            .ceil()
            .min((grid.nx - 1) as f64) as usize;
        Some((first, last))
    }

    /// Smallest `u(0, x)` over the grid nodes.
    pub fn min_u_on(&self, grid: &Grid1D) -> f64 {
        match self.node_range(grid) {
            None => 1.0,
            Some((lo, hi)) => (lo..=hi).map(|i| self.state_at(grid.x(i)).u).fold(
                if lo == 0 && hi == grid.nx - 1 {
                    f64::INFINITY
                } else {
                    1.0
                },
                f64::min,
            ),
        }
    }
}

/// Riemann invariants at one time level with the derived node caches.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub grid: Grid1D,
    pub t: f64,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub c: Vec<f64>,
    pub rx: Vec<f64>,
    pub sx: Vec<f64>,
    /// Nodes outside this inclusive range hold the background exactly.
    pub active: Option<(usize, usize)>,
    scratch: Scratch,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    r: Vec<f64>,
    s: Vec<f64>,
    u: Vec<f64>,
    c: Vec<f64>,
}

/// Interpolated field values at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSample {
    pub r: f64,
    pub s: f64,
    pub u: f64,
    pub c: f64,
    pub rx: f64,
    pub sx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub max_abs_rx: f64,
    pub max_abs_sx: f64,
    pub max_abs_ux: f64,
    pub max_abs_vx: f64,
    pub osc_r: f64,
    pub osc_s: f64,
    pub min_c: f64,
    pub max_c: f64,
}

impl Diagnostics {
    pub fn max_gradient(&self) -> f64 {
        self.max_abs_rx.max(self.max_abs_sx)
    }
}

#[inline]
fn centered(f: &[f64], i: usize, dx: f64) -> f64 {
    let n = f.len();
    if i == 0 {
        (f[1] - f[0]) / dx
    } else if i == n - 1 {
        (f[n - 1] - f[n - 2]) / dx
    } else {
        (f[i + 1] - f[i - 1]) / (2.0 * dx)
    }
}

impl FieldState {
    /// Background state `r = s = 0`, `u = c = 1` at time `t`.
    pub fn background(grid: Grid1D, t: f64) -> Self {
        let n = grid.nx;
        FieldState {
            grid,
            t,
            r: vec![0.0; n],
            s: vec![0.0; n],
            u: vec![1.0; n],
            v: vec![0.0; n],
            c: vec![1.0; n],
            rx: vec![0.0; n],
            sx: vec![0.0; n],
            active: None,
            scratch: Scratch::default(),
        }
    }

    pub fn init(grid: Grid1D, law: &GasLaw, data: &InitialData) -> Result<Self> {
        let min_u = data.min_u_on(&grid);
        if !(min_u >= data.delta0) || !(data.delta0 > 0.0) {
            return Err(Error::Vacuum(format!(
                "initial specific volume {min_u} is below delta0 = {}",
                data.delta0
            )));
        }
        let mut st = FieldState::background(grid, 0.0);
        let mut lo = usize::MAX;
        let mut hi = 0;
        let (first, last) = data.node_range(&grid).unwrap_or((1, 0));
        for i in first..=last {
            let gs = data.state_at(grid.x(i));
            let rp = law.riemann_from_state(gs)?;
            st.r[i] = rp.r;
            st.s[i] = rp.s;
            if rp.r != 0.0 || rp.s != 0.0 {
                lo = lo.min(i);
                hi = i;
            }
        }
        if lo <= hi {
            st.active = Some((lo, hi));
            let (u, c) = (&mut st.u, &mut st.c);
            for i in lo..=hi {
                let (ui, ci) = law.volume_and_speed(st.r[i], st.s[i])?;
                u[i] = ui;
                c[i] = ci;
                st.v[i] = 0.5 * (st.r[i] + st.s[i]);
            }
            st.refresh_gradients(lo, hi);
        }
        Ok(st)
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    /// Node range that may differ from the background, widened by `pad`.
    pub(crate) fn window(&self, pad: usize) -> Option<(usize, usize)> {
        self.active
            .map(|(lo, hi)| (lo.saturating_sub(pad), (hi + pad).min(self.grid.nx - 1)))
    }

    /// Copy `src` into `self` touching only nodes inside `src`'s window.
    /// Both states must share a grid and `self`'s window must lie inside
    /// `src`'s (windows only grow as the solver advances).
    fn sync_from(&mut self, src: &FieldState) {
        self.t = src.t;
        self.active = src.active;
        if let Some((lo, hi)) = src.window(2) {
            for (dst, from) in [
                (&mut self.r, &src.r),
                (&mut self.s, &src.s),
                (&mut self.u, &src.u),
                (&mut self.v, &src.v),
                (&mut self.c, &src.c),
                (&mut self.rx, &src.rx),
                (&mut self.sx, &src.sx),
            ] {
                dst[lo..=hi].copy_from_slice(&from[lo..=hi]);
            }
        }
    }

    fn covers_grid(&self) -> bool {
        matches!(self.active, Some((lo, hi)) if lo == 0 && hi == self.grid.nx - 1)
    }

    fn refresh_gradients(&mut self, lo: usize, hi: usize) {
        let dx = self.dx();
        let lo = lo.saturating_sub(1);
        let hi = (hi + 1).min(self.grid.nx - 1);
        let inv = 0.5 / dx;
        let (a, b) = (lo.max(1), hi.min(self.grid.nx - 2));
        for i in a..=b {
            self.rx[i] = (self.r[i + 1] - self.r[i - 1]) * inv;
            self.sx[i] = (self.s[i + 1] - self.s[i - 1]) * inv;
        }
        for i in [lo, hi] {
            if i < a || i > b {
                self.rx[i] = centered(&self.r, i, dx);
                self.sx[i] = centered(&self.s, i, dx);
            }
        }
    }

    pub fn max_speed(&self) -> f64 {
        let mut m = if self.covers_grid() { 0.0 } else { 1.0 };
        if let Some((lo, hi)) = self.active {
            for &c in &self.c[lo..=hi] {
                m = f64::max(m, c);
            }
        }
        m
    }

    /// Time step used by [`FieldState::step`]: `cfl·dx/max c`, capped by
    /// `0.5/max|a|` and by the distance to `t_limit`.
    pub fn stable_dt(&self, spec: &DampingSpec, cfl: f64, t_limit: f64) -> f64 {
        let mut dt = cfl * self.dx() / self.max_speed();
        let amax = spec.sup_abs_on(self.t, self.grid.x_min, self.grid.x_max);
        if amax > 0.0 {
            dt = dt.min(0.5 / amax);
        }
        dt.min(t_limit - self.t)
    }

    /// One step with the stable time step (no horizon clipping).
    pub fn step(&self, law: &GasLaw, spec: &DampingSpec, cfl: f64) -> Result<FieldState> {
        let mut next = self.clone();
        next.advance(law, spec, cfl, f64::INFINITY)?;
        Ok(next)
    }

    /// Advance in place by one step, never past `t_limit`. On error the
    /// state is left unchanged. Returns the step taken.
    pub fn advance(
        &mut self,
        law: &GasLaw,
        spec: &DampingSpec,
        cfl: f64,
        t_limit: f64,
    ) -> Result<f64> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl must lie in (0, 1] (got {cfl})"
            )));
        }
        let dt = self.stable_dt(spec, cfl, t_limit);
        if !(dt > 0.0) {
            return Err(Error::Instability(format!(
                "non-positive time step {dt} at t = {}",
                self.t
            )));
        }
        let t_new = self.t + dt;
        let Some((lo, hi)) = self.window(1) else {
            self.t = t_new;
            return Ok(dt);
        };

        let n = self.grid.nx;
        let dx = self.dx();
        let damped = !spec.is_zero();
        let uniform_a = (!spec.is_space_dependent()).then(|| spec.eval_a(t_new, 0.0));
        let scratch = &mut self.scratch;
        for buf in [
            &mut scratch.r,
            &mut scratch.s,
            &mut scratch.u,
            &mut scratch.c,
        ] {
            if buf.len() != n {
                buf.resize(n, 0.0);
            }
        }
        let lambda = dt / dx;
        let u_floor = law.u_floor();
        for i in lo..=hi {
            let ri = self.r[i];
            let si = self.s[i];
            let nu = self.c[i] * lambda;
            let r_right = if i + 1 < n { self.r[i + 1] } else { 0.0 };
            let s_left = if i > 0 { self.s[i - 1] } else { 0.0 };
            let mut rn = ri + nu * (r_right - ri);
            let mut sn = si - nu * (si - s_left);
            if damped {
                let a = match uniform_a {
                    Some(a) => a,
                    None => spec.eval_a(t_new, self.grid.x(i)),
                };
                let h = 0.5 * dt * a;
                let sigma = (rn + sn) / (1.0 + 2.0 * h);
                rn -= h * sigma;
                sn -= h * sigma;
            }
            let (u, c) = law.volume_and_speed_raw(rn, sn);
            if !(u > u_floor && u.is_finite() && c.is_finite() && rn.is_finite() && sn.is_finite())
            {
                let x = self.grid.x(i);
                if !rn.is_finite() || !sn.is_finite() {
                    return Err(Error::Instability(format!(
                        "non-finite invariants at x = {x} (t = {t_new})"
                    )));
                }
                return Err(match law.volume_and_speed(rn, sn) {
                    Err(Error::Vacuum(m)) => Error::Vacuum(format!("{m} at x = {x} (t = {t_new})")),
                    Err(other) => other,
                    Ok(_) => Error::Instability(format!(
                        "non-finite sound speed at x = {x} (t = {t_new})"
                    )),
                });
            }
            scratch.r[i] = rn;
            scratch.s[i] = sn;
            scratch.u[i] = u;
            scratch.c[i] = c;
        }
        self.r[lo..=hi].copy_from_slice(&scratch.r[lo..=hi]);
        self.s[lo..=hi].copy_from_slice(&scratch.s[lo..=hi]);
        self.u[lo..=hi].copy_from_slice(&scratch.u[lo..=hi]);
        self.c[lo..=hi].copy_from_slice(&scratch.c[lo..=hi]);
        for i in lo..=hi {
            self.v[i] = 0.5 * (self.r[i] + self.s[i]);
        }
        self.active = Some((lo, hi));
        self.refresh_gradients(lo, hi);
        self.t = t_new;
        Ok(dt)
    }

    /// Linear interpolation of the node fields at `x`.
    pub fn sample(&self, x: f64) -> Option<PointSample> {
        let (i, w) = self.grid.locate(x)?;
        let lerp = |f: &[f64]| f[i] + w * (f[i + 1] - f[i]);
        Some(PointSample {
            r: lerp(&self.r),
            s: lerp(&self.s),
            u: lerp(&self.u),
            c: lerp(&self.c),
            rx: lerp(&self.rx),
            sx: lerp(&self.sx),
        })
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let mut d = Diagnostics {
            t: self.t,
            min_u: 1.0,
            max_u: 1.0,
            max_abs_rx: 0.0,
            max_abs_sx: 0.0,
            max_abs_ux: 0.0,
            max_abs_vx: 0.0,
            osc_r: 0.0,
            osc_s: 0.0,
            min_c: 1.0,
            max_c: 1.0,
        };
        let Some((lo, hi)) = self.window(1) else {
            return d;
        };
        if self.covers_grid() {
            d.min_u = f64::INFINITY;
            d.max_u = f64::NEG_INFINITY;
            d.min_c = f64::INFINITY;
            d.max_c = f64::NEG_INFINITY;
        }
        let dx = self.dx();
        let (mut rmin, mut rmax, mut smin, mut smax) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        if self.covers_grid() {
            rmin = f64::INFINITY;
            rmax = f64::NEG_INFINITY;
            smin = f64::INFINITY;
            smax = f64::NEG_INFINITY;
        }
        for i in lo..=hi {
            d.min_u = d.min_u.min(self.u[i]);
            d.max_u = d.max_u.max(self.u[i]);
            d.min_c = d.min_c.min(self.c[i]);
            d.max_c = d.max_c.max(self.c[i]);
            d.max_abs_rx = d.max_abs_rx.max(self.rx[i].abs());
            d.max_abs_sx = d.max_abs_sx.max(self.sx[i].abs());
            d.max_abs_ux = d.max_abs_ux.max(centered(&self.u, i, dx).abs());
            d.max_abs_vx = d.max_abs_vx.max((0.5 * (self.rx[i] + self.sx[i])).abs());
            rmin = rmin.min(self.r[i]);
            rmax = rmax.max(self.r[i]);
            smin = smin.min(self.s[i]);
            smax = smax.max(self.s[i]);
        }
        d.osc_r = rmax - rmin;
        d.osc_s = smax - smin;
        d
    }
}

/// Sup norms over the grid nodes inside a region.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionNorms {
    pub sup_r: f64,
    pub sup_s: f64,
    pub sup_rx: f64,
    pub sup_sx: f64,
    pub sup_ux: f64,
    pub sup_vx: f64,
    /// No grid node lies in the region.
    pub empty: bool,
}

impl RegionNorms {
    pub fn phi(&self) -> f64 {
        self.sup_r + self.sup_s
    }
}

pub fn sup_norms_on_region(state: &FieldState, region: &RegionSpec) -> RegionNorms {
    let grid = state.grid;
    let mut norms = RegionNorms {
        empty: true,
        ..Default::default()
    };
    // Background nodes contribute zeros; only the window needs scanning, but
    // emptiness is decided over the whole grid.
    norms.empty = !region.intersects(state.t, grid.x_min, grid.x_max);
    let Some((lo, hi)) = state.window(1) else {
        return norms;
    };
    let dx = grid.dx();
    let slice = region.slice(state.t);
    for i in lo..=hi {
        if !slice.contains(grid.x(i)) {
            continue;
        }
        norms.sup_r = norms.sup_r.max(state.r[i].abs());
        norms.sup_s = norms.sup_s.max(state.s[i].abs());
        norms.sup_rx = norms.sup_rx.max(state.rx[i].abs());
        norms.sup_sx = norms.sup_sx.max(state.sx[i].abs());
        norms.sup_ux = norms.sup_ux.max(centered(&state.u, i, dx).abs());
        norms.sup_vx = norms.sup_vx.max((0.5 * (state.rx[i] + state.sx[i])).abs());
    }
    norms
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCause {
    Gradient,
    Vacuum,
    Horizon,
    Instability,
}

impl StopCause {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopCause::Gradient => "gradient",
            StopCause::Vacuum => "vacuum",
            StopCause::Horizon => "horizon",
            StopCause::Instability => "instability",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub cfl: f64,
    /// Absolute gradient threshold for the blow-up monitor.
    pub g_stop: f64,
    /// Resolution monitor: stop once the steepest invariant's front would
    /// span fewer than this many cells (`max|∂w|·dx·front_cells ≥ osc(w)`).
    /// Zero disables it.
    pub front_cells: f64,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            cfl: 0.9,
            g_stop: 1e4,
            front_cells: 0.0,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub max_abs_rx: f64,
    pub max_abs_sx: f64,
    pub max_abs_ux: f64,
    pub max_abs_vx: f64,
    pub phi_region: Option<f64>,
}

impl TimeSeriesRow {
    pub fn max_gradient(&self) -> f64 {
        self.max_abs_rx.max(self.max_abs_sx)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub rows: Vec<TimeSeriesRow>,
}

impl TimeSeries {
    pub const COLUMNS: [&'static str; 8] = [
        "t",
        "min_u",
        "max_u",
        "max_abs_rx",
        "max_abs_sx",
        "max_abs_ux",
        "max_abs_vx",
        "phi_region",
    ];
}

/// Observer of accepted steps; characteristic tracers, history recorders and
/// the `Φ` hook implement this.
pub trait StepMonitor {
    fn start(&mut self, _state: &FieldState, _law: &GasLaw, _spec: &DampingSpec) {}
    fn observe(&mut self, prev: &FieldState, next: &FieldState, law: &GasLaw, spec: &DampingSpec);
    /// Value for the `phi_region` column, if this monitor computes one.
    fn phi_region(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: FieldState,
    pub series: TimeSeries,
    pub cause: StopCause,
    /// Message of the error that stopped the run, if any.
    pub detail: Option<String>,
    pub steps: usize,
}

fn row_of(d: &Diagnostics, phi: Option<f64>) -> TimeSeriesRow {
    TimeSeriesRow {
        t: d.t,
        min_u: d.min_u,
        max_u: d.max_u,
        max_abs_rx: d.max_abs_rx,
        max_abs_sx: d.max_abs_sx,
        max_abs_ux: d.max_abs_ux,
        max_abs_vx: d.max_abs_vx,
        phi_region: phi,
    }
}

fn gradient_monitor_fires(d: &Diagnostics, opts: &SolverOptions, dx: f64) -> bool {
    if d.max_gradient() >= opts.g_stop {
        return true;
    }
    if opts.front_cells > 0.0 {
        let (g, osc) = if d.max_abs_sx >= d.max_abs_rx {
            (d.max_abs_sx, d.osc_s)
        } else {
            (d.max_abs_rx, d.osc_r)
        };
        return g > 0.0 && g * dx * opts.front_cells >= osc;
    }
    false
}

/// Step until `t_stop`, the gradient monitor, a vacuum/instability error, or
/// the step budget. One time-series row is recorded per accepted level,
/// including the initial one.
pub fn run_until(
    mut state: FieldState,
    law: &GasLaw,
    spec: &DampingSpec,
    opts: &SolverOptions,
    t_stop: f64,
    monitors: &mut [&mut dyn StepMonitor],
) -> RunOutcome {
    let phi_of = |ms: &[&mut dyn StepMonitor]| ms.iter().find_map(|m| m.phi_region());
    for m in monitors.iter_mut() {
        m.start(&state, law, spec);
    }
    let dx = state.dx();
    let mut series = TimeSeries::default();
    let d0 = state.diagnostics();
    series.rows.push(row_of(&d0, phi_of(monitors)));
    let mut steps = 0;
    let mut prev = state.clone();
    let (cause, detail) = loop {
        if state.t >= t_stop || steps >= opts.max_steps {
            break (StopCause::Horizon, None);
        }
        match state.advance(law, spec, opts.cfl, t_stop) {
            Ok(_) => {}
            Err(Error::Vacuum(m)) => break (StopCause::Vacuum, Some(m)),
            Err(e) => break (StopCause::Instability, Some(e.to_string())),
        }
        steps += 1;
        for m in monitors.iter_mut() {
            m.observe(&prev, &state, law, spec);
        }
        let d = state.diagnostics();
        series.rows.push(row_of(&d, phi_of(monitors)));
        if gradient_monitor_fires(&d, opts, dx) {
            break (StopCause::Gradient, None);
        }
        prev.sync_from(&state);
    };
    RunOutcome {
        state,
        series,
        cause,
        detail,
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::DampingFamily;
    use approx::assert_relative_eq;

    fn law2() -> GasLaw {
        GasLaw::new(2.0).unwrap()
    }

    fn data(eps: f64) -> InitialData {
        InitialData {
            phi: Profile::Zero,
            psi: Profile::neg_x_gauss(0.0),
            epsilon: eps,
            x0: 0.0,
            delta0: 0.1,
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(0.0, 1.0, 2).is_err());
        assert!(Grid1D::new(1.0, 1.0, 10).is_err());
        let g = Grid1D::new(-1.0, 1.0, 201).unwrap();
        assert_relative_eq!(g.dx(), 0.01);
        assert_eq!(g.nearest(0.0), 100);
        let (i, w) = g.locate(0.005).unwrap();
        assert_eq!(i, 100);
        assert_relative_eq!(w, 0.5, epsilon = 1e-9);
        assert!(g.locate(1.01).is_none());
        let s = Grid1D::symmetric(10.0, 0.1).unwrap();
        assert_eq!(s.nx % 2, 1);
        assert_eq!(s.x(s.nx / 2), 0.0);
    }

    #[test]
    fn zero_epsilon_is_background() {
        let grid = Grid1D::new(-5.0, 5.0, 101).unwrap();
        let st = FieldState::init(grid, &law2(), &data(0.0)).unwrap();
        assert!(st.r.iter().chain(&st.s).all(|&v| v == 0.0));
        assert!(st.u.iter().chain(&st.c).all(|&v| v == 1.0));
        assert!(st.active.is_none());
    }

    #[test]
    fn velocity_only_data_gives_equal_invariants() {
        let grid = Grid1D::new(-10.0, 10.0, 2001).unwrap();
        let d = data(0.1);
        let st = FieldState::init(grid, &law2(), &d).unwrap();
        for i in 0..grid.nx {
            let expected = 0.1 * d.psi.value(grid.x(i));
            assert_relative_eq!(st.r[i], expected, epsilon = 1e-15);
            assert_relative_eq!(st.s[i], expected, epsilon = 1e-15);
        }
        assert_eq!(d.k_report(), 1.0);
        let mid = grid.nearest(0.0);
        // s_x(0) = ε ψ'(0) = -0.1, second order in dx
        assert!((st.sx[mid] + 0.1).abs() < 0.1 * grid.dx().powi(2) * 3.0);
    }

    #[test]
    fn init_rejects_positivity_failure() {
        let grid = Grid1D::new(-5.0, 5.0, 101).unwrap();
        let d = InitialData {
            phi: Profile::Gauss {
                amp: -1.0,
                center: 0.0,
                width: 1.0,
            },
            psi: Profile::Zero,
            epsilon: 0.95,
            x0: 0.0,
            delta0: 0.1,
        };
        assert!(matches!(
            FieldState::init(grid, &law2(), &d),
            Err(Error::Vacuum(_))
        ));
    }

    #[test]
    fn background_is_steady_under_any_damping() {
        let grid = Grid1D::new(-5.0, 5.0, 101).unwrap();
        let st = FieldState::init(grid, &law2(), &data(0.0)).unwrap();
        let spec = DampingSpec::new(DampingFamily::SeparatedSum {
            lambda1: 2.0,
            lambda2: 2.0,
        })
        .unwrap();
        let mut cur = st;
        for _ in 0..20 {
            cur = cur.step(&law2(), &spec, 0.9).unwrap();
        }
        assert!(cur.t > 0.0);
        assert!(cur.r.iter().chain(&cur.s).all(|&v| v == 0.0));
        assert!(cur.u.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn time_step_respects_cfl_and_damping_cap() {
        let grid = Grid1D::new(-5.0, 5.0, 101).unwrap();
        let st = FieldState::init(grid, &law2(), &data(0.1)).unwrap();
        let dt = st.stable_dt(&DampingSpec::zero(), 0.5, f64::INFINITY);
        assert_relative_eq!(dt, 0.5 * 0.1 / st.max_speed());
        let strong = DampingSpec::new(DampingFamily::TimePower {
            mu: 100.0,
            lambda1: 0.0,
        })
        .unwrap();
        assert_relative_eq!(st.stable_dt(&strong, 0.9, f64::INFINITY), 0.005);
        assert_relative_eq!(st.stable_dt(&DampingSpec::zero(), 0.9, 0.01), 0.01);
        assert!(st.step(&law2(), &DampingSpec::zero(), 1.5).is_err());
    }

    #[test]
    fn max_principle_with_nonnegative_damping() {
        let grid = Grid1D::new(-20.0, 20.0, 2001).unwrap();
        let spec = DampingSpec::new(DampingFamily::SeparatedSum {
            lambda1: 2.0,
            lambda2: 2.0,
        })
        .unwrap();
        let mut st = FieldState::init(grid, &law2(), &data(0.1)).unwrap();
        let bound = |s: &FieldState| s.r.iter().chain(&s.s).fold(0.0f64, |m, v| m.max(v.abs()));
        let mut m = bound(&st);
        for _ in 0..300 {
            st.advance(&law2(), &spec, 0.9, f64::INFINITY).unwrap();
            let now = bound(&st);
            assert!(now <= m + 1e-10);
            m = now;
        }
    }

    #[test]
    fn simple_wave_keeps_r_near_zero() {
        // r ≡ 0 initially: pick u, v on the r = 0 manifold, v = η(u) - 2/(γ-1).
        let law = law2();
        let run = |nx: usize| {
            let grid = Grid1D::new(-10.0, 10.0, nx).unwrap();
            let mut st = FieldState::background(grid, 0.0);
            for i in 0..nx {
                let s = 0.05
                    * Profile::Gauss {
                        amp: 1.0,
                        center: 0.0,
                        width: 1.0,
                    }
                    .value(grid.x(i));
                st.s[i] = s;
            }
            // rebuild caches through a zero-length init path
            let data = st.clone();
            let mut st = data;
            let mut lo = usize::MAX;
            let mut hi = 0;
            for i in 0..nx {
                if st.s[i] != 0.0 {
                    lo = lo.min(i);
                    hi = i;
                }
                let (u, c) = law.volume_and_speed(st.r[i], st.s[i]).unwrap();
                st.u[i] = u;
                st.c[i] = c;
                st.v[i] = 0.5 * st.s[i];
            }
            st.active = Some((lo, hi));
            st.refresh_gradients(lo, hi);
            while st.t < 2.0 {
                st.advance(&law, &DampingSpec::zero(), 0.9, 2.0).unwrap();
            }
            st.r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let coarse = run(401);
        let fine = run(801);
        // r stays exactly zero: no source couples into it without damping.
        assert_eq!(coarse, 0.0);
        assert_eq!(fine, 0.0);
    }

    #[test]
    fn finite_speed_keeps_far_nodes_at_background() {
        let grid = Grid1D::new(-30.0, 30.0, 3001).unwrap();
        let spec = DampingSpec::new(DampingFamily::SeparatedSum {
            lambda1: 2.0,
            lambda2: 2.0,
        })
        .unwrap();
        let st = FieldState::init(grid, &law2(), &data(0.1)).unwrap();
        let out = run_until(st, &law2(), &spec, &SolverOptions::default(), 4.0, &mut []);
        assert_eq!(out.cause, StopCause::Horizon);
        // support radius 8, 4·c₁·t = 16 < 22
        assert_eq!(out.state.r[0], 0.0);
        assert_eq!(out.state.s[grid.nx - 1], 0.0);
        assert!((out.state.t - 4.0).abs() < 1e-12);
    }

    #[test]
    fn run_until_records_every_level() {
        let grid = Grid1D::new(-10.0, 10.0, 201).unwrap();
        let st = FieldState::init(grid, &law2(), &data(0.0)).unwrap();
        let out = run_until(
            st,
            &law2(),
            &DampingSpec::zero(),
            &SolverOptions::default(),
            10.0,
            &mut [],
        );
        assert_eq!(out.cause, StopCause::Horizon);
        assert_eq!(out.series.rows.len(), out.steps + 1);
        assert!(out.series.rows.iter().all(|r| r.max_gradient() == 0.0));
        assert_eq!(out.state.t, 10.0);
    }

    #[test]
    fn anti_damping_can_trigger_vacuum() {
        let grid = Grid1D::new(-10.0, 10.0, 401).unwrap();
        let d = InitialData {
            phi: Profile::Gauss {
                amp: -1.0,
                center: 0.0,
                width: 1.0,
            },
            psi: Profile::Zero,
            epsilon: 0.5,
            x0: 0.0,
            delta0: 0.1,
        };
        let spec = DampingSpec::new(DampingFamily::TimePower {
            mu: -20.0,
            lambda1: 0.0,
        })
        .unwrap();
        let law = GasLaw::with_u_floor(2.0, 0.2).unwrap();
        let st = FieldState::init(grid, &law, &d).unwrap();
        let out = run_until(st, &law, &spec, &SolverOptions::default(), 5.0, &mut []);
        assert_eq!(out.cause, StopCause::Vacuum);
        assert!(out.detail.is_some());
        assert!(out.state.u.iter().all(|&u| u > 0.2));
    }
}
