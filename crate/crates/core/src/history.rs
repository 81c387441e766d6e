//! Retained solver levels for post-hoc characteristic tracing.
//!
//! Only the window of nodes that differs from the background is stored per
//! level; everything outside it is reconstructed as `r = s = 0`, `u = c = 1`.

use crate::damping::DampingSpec;
use crate::error::{Error, Result};
use crate::field::{FieldState, Grid1D, PointSample, StepMonitor};
use crate::gas::GasLaw;

#[derive(Debug, Clone)]
pub struct HistoryLevel {
    pub t: f64,
    /// Grid index of the first stored node.
    pub lo: usize,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub c: Vec<f64>,
    pub rx: Vec<f64>,
    pub sx: Vec<f64>,
    pub c_max: f64,
}

const BACKGROUND: PointSample = PointSample {
    r: 0.0,
    s: 0.0,
    u: 1.0,
    c: 1.0,
    rx: 0.0,
    sx: 0.0,
};

impl HistoryLevel {
    pub fn from_state(state: &FieldState) -> Self {
        match state.window(1) {
            None => HistoryLevel {
                t: state.t,
                lo: 0,
                r: Vec::new(),
                s: Vec::new(),
                u: Vec::new(),
                c: Vec::new(),
                rx: Vec::new(),
                sx: Vec::new(),
                c_max: 1.0,
            },
            Some((lo, hi)) => HistoryLevel {
                t: state.t,
                lo,
                r: state.r[lo..=hi].to_vec(),
                s: state.s[lo..=hi].to_vec(),
                u: state.u[lo..=hi].to_vec(),
                c: state.c[lo..=hi].to_vec(),
                rx: state.rx[lo..=hi].to_vec(),
                sx: state.sx[lo..=hi].to_vec(),
                c_max: state.max_speed(),
            },
        }
    }

    fn node(&self, i: usize) -> PointSample {
        if i < self.lo || i >= self.lo + self.r.len() {
            return BACKGROUND;
        }
        let k = i - self.lo;
        PointSample {
            r: self.r[k],
            s: self.s[k],
            u: self.u[k],
            c: self.c[k],
            rx: self.rx[k],
            sx: self.sx[k],
        }
    }

    /// Linear interpolation in `x`; `None` outside the grid.
    pub fn sample(&self, grid: &Grid1D, x: f64) -> Option<PointSample> {
        let (i, w) = grid.locate(x)?;
        let a = self.node(i);
        let b = self.node(i + 1);
        Some(lerp_sample(&a, &b, w))
    }
}

pub(crate) fn lerp_sample(a: &PointSample, b: &PointSample, w: f64) -> PointSample {
    let l = |p: f64, q: f64| p + w * (q - p);
    PointSample {
        r: l(a.r, b.r),
        s: l(a.s, b.s),
        u: l(a.u, b.u),
        c: l(a.c, b.c),
        rx: l(a.rx, b.rx),
        sx: l(a.sx, b.sx),
    }
}

#[derive(Debug, Clone)]
pub struct SolverHistory {
    pub grid: Grid1D,
    /// Every `stride`-th accepted level is kept (plus the first and last).
    pub stride: usize,
    pub levels: Vec<HistoryLevel>,
}

impl SolverHistory {
    pub fn new(grid: Grid1D, stride: usize) -> Self {
        SolverHistory {
            grid,
            stride: stride.max(1),
            levels: Vec::new(),
        }
    }

    pub fn push(&mut self, state: &FieldState) {
        if let Some(last) = self.levels.last() {
            if last.t == state.t {
                return;
            }
        }
        self.levels.push(HistoryLevel::from_state(state));
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn t_first(&self) -> Option<f64> {
        self.levels.first().map(|l| l.t)
    }

    pub fn t_last(&self) -> Option<f64> {
        self.levels.last().map(|l| l.t)
    }

    /// Index of the stored level closest in time to `t`.
    pub fn nearest_level(&self, t: f64) -> Result<usize> {
        let (Some(t0), Some(t1)) = (self.t_first(), self.t_last()) else {
            return Err(Error::History("no levels were retained".into()));
        };
        let slack = 1e-9 * t1.abs().max(1.0);
        if t < t0 - slack || t > t1 + slack {
            return Err(Error::History(format!(
                "t = {t} outside the retained range [{t0}, {t1}]"
            )));
        }
        let k = self.levels.partition_point(|l| l.t < t);
        if k == 0 {
            return Ok(0);
        }
        if k == self.levels.len() {
            return Ok(k - 1);
        }
        Ok(if (self.levels[k].t - t) < (t - self.levels[k - 1].t) {
            k
        } else {
            k - 1
        })
    }

    /// Linear-in-`t`, linear-in-`x` interpolation between levels `k` and
    /// `k + 1` at fraction `theta`.
    pub fn sample_between(&self, k: usize, theta: f64, x: f64) -> Option<PointSample> {
        let a = self.levels[k].sample(&self.grid, x)?;
        if theta == 0.0 || k + 1 >= self.levels.len() {
            return Some(a);
        }
        let b = self.levels[k + 1].sample(&self.grid, x)?;
        Some(lerp_sample(&a, &b, theta))
    }

    /// Sup of `c` over the stored levels.
    pub fn c_max(&self) -> f64 {
        self.levels.iter().map(|l| l.c_max).fold(1.0, f64::max)
    }
}

/// Monitor that fills a [`SolverHistory`] while the solver runs.
#[derive(Debug, Clone)]
pub struct HistoryRecorder {
    pub history: SolverHistory,
    steps: usize,
    pending: Option<HistoryLevel>,
}

impl HistoryRecorder {
    pub fn new(grid: Grid1D, stride: usize) -> Self {
        HistoryRecorder {
            history: SolverHistory::new(grid, stride),
            steps: 0,
            pending: None,
        }
    }

    /// History including the final accepted level.
    pub fn finish(mut self) -> SolverHistory {
        if let Some(level) = self.pending.take() {
            self.history.levels.push(level);
        }
        self.history
    }
}

impl StepMonitor for HistoryRecorder {
    fn start(&mut self, state: &FieldState, _law: &GasLaw, _spec: &DampingSpec) {
        self.history.push(state);
    }

    fn observe(
        &mut self,
        _prev: &FieldState,
        next: &FieldState,
        _law: &GasLaw,
        _spec: &DampingSpec,
    ) {
        self.steps += 1;
        if self.steps % self.history.stride == 0 {
            self.pending = None;
            self.history.push(next);
        } else {
            self.pending = Some(HistoryLevel::from_state(next));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{run_until, InitialData, SolverOptions};
    use crate::profile::Profile;

    #[test]
    fn recorder_keeps_strided_levels_and_last() {
        let law = GasLaw::new(2.0).unwrap();
        let grid = Grid1D::new(-10.0, 10.0, 401).unwrap();
        let data = InitialData {
            phi: Profile::Zero,
            psi: Profile::neg_x_gauss(0.0),
            epsilon: 0.1,
            x0: 0.0,
            delta0: 0.1,
        };
        let st = FieldState::init(grid, &law, &data).unwrap();
        let mut rec = HistoryRecorder::new(grid, 3);
        let out = run_until(
            st,
            &law,
            &DampingSpec::zero(),
            &SolverOptions::default(),
            1.0,
            &mut [&mut rec],
        );
        let h = rec.finish();
        assert_eq!(h.t_first(), Some(0.0));
        assert_eq!(h.t_last(), Some(out.state.t));
        assert_eq!(
            h.levels.len(),
            1 + out.steps / 3 + usize::from(out.steps % 3 != 0)
        );
        // stored window reproduces the final state at nodes
        let last = h.levels.last().unwrap();
        for i in (0..grid.nx).step_by(7) {
            let p = last.sample(&grid, grid.x(i)).unwrap();
            assert!((p.r - out.state.r[i]).abs() < 1e-14);
            assert!((p.sx - out.state.sx[i]).abs() < 1e-12);
        }
        assert!(h.nearest_level(2.0).is_err());
        assert_eq!(h.nearest_level(0.0).unwrap(), 0);
    }
}
