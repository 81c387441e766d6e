//! Independent reference solutions: a conservative local Lax–Friedrichs
//! solver for `(u, v)`, the gradient-catastrophe time of a simple wave, and
//! the closed-form Riccati solution.

use serde::{Deserialize, Serialize};

use crate::damping::DampingSpec;
use crate::error::{Error, Result};
use crate::field::{FieldState, Grid1D, InitialData};
use crate::gas::GasLaw;
use crate::profile::Profile;

#[derive(Debug, Clone, PartialEq)]
pub struct ConservativeState {
    pub t: f64,
    pub grid: Grid1D,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl ConservativeState {
    pub fn init(grid: Grid1D, data: &InitialData) -> Result<Self> {
        let mut u = Vec::with_capacity(grid.nx);
        let mut v = Vec::with_capacity(grid.nx);
        for i in 0..grid.nx {
            let st = data.state_at(grid.x(i));
            if !(st.u >= data.delta0) {
                return Err(Error::Vacuum(format!(
                    "initial specific volume {} below delta0 = {} at x = {}",
                    st.u,
                    data.delta0,
                    grid.x(i)
                )));
            }
            u.push(st.u);
            v.push(st.v);
        }
        Ok(ConservativeState { t: 0.0, grid, u, v })
    }

    /// `Σ (u - 1) dx`, the mass carried by the perturbation.
    pub fn mass_excess(&self) -> f64 {
        self.u.iter().map(|u| u - 1.0).sum::<f64>() * self.grid.dx()
    }

    /// `Σ v dx`.
    pub fn momentum(&self) -> f64 {
        self.v.iter().sum::<f64>() * self.grid.dx()
    }
}

fn damp(v: &mut [f64], grid: &Grid1D, spec: &DampingSpec, t: f64, dt: f64) {
    if spec.is_zero() {
        return;
    }
    for (i, vi) in v.iter_mut().enumerate() {
        *vi *= (-spec.eval_a(t, grid.x(i)) * dt).exp();
    }
}

/// Conservative evolution to `t_stop`: local Lax–Friedrichs fluxes for the
/// transport part, with the linear damping `-a v` integrated exactly in
/// Strang half steps (`a` frozen at each half step's midpoint). Ghost cells
/// hold the background state.
pub fn lax_friedrichs_run(
    grid: Grid1D,
    law: &GasLaw,
    spec: &DampingSpec,
    data: &InitialData,
    t_stop: f64,
    cfl: f64,
) -> Result<ConservativeState> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "cfl must lie in (0, 1] (got {cfl})"
        )));
    }
    let mut st = ConservativeState::init(grid, data)?;
    let n = grid.nx;
    let dx = grid.dx();
    let p_bg = law.pressure(1.0)?;
    let mut c = vec![1.0; n];
    let mut p = vec![p_bg; n];
    let mut flux_u = vec![0.0; n + 1];
    let mut flux_v = vec![0.0; n + 1];
    while st.t < t_stop {
        let mut c_max = 1.0f64;
        for i in 0..n {
            let ui = st.u[i];
            if !(ui > law.u_floor()) || !ui.is_finite() {
                return Err(Error::Vacuum(format!(
                    "u = {ui} at x = {} (t = {})",
                    grid.x(i),
                    st.t
                )));
            }
            c[i] = law.sound_speed(ui)?;
            p[i] = law.pressure(ui)?;
            c_max = c_max.max(c[i]);
        }
        let mut dt = cfl * dx / c_max;
        let amax = spec.sup_abs_on(st.t, grid.x_min, grid.x_max);
        if amax > 0.0 {
            dt = dt.min(0.5 / amax);
        }
        dt = dt.min(t_stop - st.t);

        damp(&mut st.v, &grid, spec, st.t + 0.25 * dt, 0.5 * dt);
        // interface j sits between cells j-1 and j; cells -1 and n are ghosts
        for j in 0..=n {
            let (ul, vl, pl, cl) = if j == 0 {
                (1.0, 0.0, p_bg, 1.0)
            } else {
                (st.u[j - 1], st.v[j - 1], p[j - 1], c[j - 1])
            };
            let (ur, vr, pr, cr) = if j == n {
                (1.0, 0.0, p_bg, 1.0)
            } else {
                (st.u[j], st.v[j], p[j], c[j])
            };
            let alpha = cl.max(cr);
            flux_u[j] = 0.5 * (-vl - vr) - 0.5 * alpha * (ur - ul);
            flux_v[j] = 0.5 * (pl + pr) - 0.5 * alpha * (vr - vl);
        }
        let lambda = dt / dx;
        for i in 0..n {
            st.u[i] -= lambda * (flux_u[i + 1] - flux_u[i]);
            st.v[i] -= lambda * (flux_v[i + 1] - flux_v[i]);
        }
        damp(&mut st.v, &grid, spec, st.t + 0.75 * dt, 0.5 * dt);
        st.t += dt;
        if st.u.iter().chain(&st.v).any(|x| !x.is_finite()) {
            return Err(Error::Instability(format!(
                "non-finite state at t = {}",
                st.t
            )));
        }
    }
    Ok(st)
}

/// Max-norm differences of `(u, v)` between the invariant solver and the
/// conservative solver, both run to `t_compare` from the same data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualSolverDiff {
    pub nx: usize,
    pub dx: f64,
    pub linf_u: f64,
    pub linf_v: f64,
}

impl DualSolverDiff {
    pub fn linf(&self) -> f64 {
        self.linf_u.max(self.linf_v)
    }
}

pub fn dual_solver_difference(
    grid: Grid1D,
    law: &GasLaw,
    spec: &DampingSpec,
    data: &InitialData,
    t_compare: f64,
    cfl: f64,
) -> Result<DualSolverDiff> {
    let mut field = FieldState::init(grid, law, data)?;
    while field.t < t_compare {
        field.advance(law, spec, cfl, t_compare)?;
    }
    let cons = lax_friedrichs_run(grid, law, spec, data, t_compare, cfl)?;
    let mut d = DualSolverDiff {
        nx: grid.nx,
        dx: grid.dx(),
        linf_u: 0.0,
        linf_v: 0.0,
    };
    for i in 0..grid.nx {
        d.linf_u = d.linf_u.max((field.u[i] - cons.u[i]).abs());
        d.linf_v = d.linf_v.max((field.v[i] - cons.v[i]).abs());
    }
    Ok(d)
}

/// Simple wave with `r ≡ 0` and no damping: `s` is constant along plus
/// characteristics, whose speed `Λ(s) = c` depends on `s` alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleWaveOracle {
    pub law: GasLaw,
    /// `s₀(x) = amplitude · profile(x)`.
    pub profile: Profile,
    pub amplitude: f64,
    /// Dense sampling density per unit length of the profile's extent.
    pub samples_per_unit: usize,
}

impl SimpleWaveOracle {
    pub fn new(law: GasLaw, profile: Profile, amplitude: f64) -> Self {
        SimpleWaveOracle {
            law,
            profile,
            amplitude,
            samples_per_unit: 1000,
        }
    }

    fn w(&self, s: f64) -> Result<f64> {
        let w = 0.25 * (self.law.gamma() - 1.0) * s + 1.0;
        if w > 0.0 {
            Ok(w)
        } else {
            Err(Error::Vacuum(format!(
                "invariant s = {s} is outside the admissible range"
            )))
        }
    }

    /// Characteristic speed as a function of `s`.
    pub fn lambda(&self, s: f64) -> Result<f64> {
        let g = self.law.gamma();
        Ok(self.w(s)?.powf((g + 1.0) / (g - 1.0)))
    }

    pub fn lambda_prime(&self, s: f64) -> Result<f64> {
        let g = self.law.gamma();
        Ok(0.25 * (g + 1.0) * self.w(s)?.powf(2.0 / (g - 1.0)))
    }

    /// `d/dx Λ(s₀(x))`.
    pub fn speed_slope(&self, x: f64) -> Result<f64> {
        let s = self.amplitude * self.profile.value(x);
        Ok(self.lambda_prime(s)? * self.amplitude * self.profile.derivative(x))
    }

    fn extent(&self) -> (f64, f64) {
        match (self.profile.support(), self.profile) {
            (Some(s), _) => s,
            (None, Profile::Tanh { center, width, .. }) => {
                (center - 20.0 * width.abs(), center + 20.0 * width.abs())
            }
            (None, _) => (0.0, 0.0),
        }
    }
}

/// Gradient-catastrophe time `-1/min_x d/dx Λ(s₀(x))`: dense sampling
/// followed by golden-section refinement around the sampled minimum.
pub fn simple_wave_t_star(oracle: &SimpleWaveOracle) -> Result<f64> {
    let (lo, hi) = oracle.extent();
    if !(hi > lo) || oracle.amplitude == 0.0 {
        return Err(Error::NoBlowup("constant profile".into()));
    }
    let n = (((hi - lo) * oracle.samples_per_unit as f64).ceil() as usize).max(16);
    let h = (hi - lo) / n as f64;
    let mut best = (0, f64::INFINITY);
    for k in 0..=n {
        let g = oracle.speed_slope(lo + k as f64 * h)?;
        if g < best.1 {
            best = (k, g);
        }
    }
    if !(best.1 < 0.0) {
        return Err(Error::NoBlowup(
            "characteristic speed is nondecreasing in x".into(),
        ));
    }
    let mut a = lo + (best.0.max(1) - 1) as f64 * h;
    let mut b = lo + (best.0 + 1).min(n) as f64 * h;
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = oracle.speed_slope(x1)?;
    let mut f2 = oracle.speed_slope(x2)?;
    while b - a > 1e-12 * (1.0 + a.abs().max(b.abs())) {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = oracle.speed_slope(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = oracle.speed_slope(x2)?;
        }
    }
    let min = f1.min(f2).min(best.1);
    Ok(-1.0 / min)
}

/// `q₀ / (1 - coeff·q₀·t)`, the solution of `q' = coeff·q²`.
pub fn riccati_closed_form(q0: f64, coeff: f64, t: f64) -> Result<f64> {
    let denom = 1.0 - coeff * q0 * t;
    if denom == 0.0 || (denom.abs() < 1e-15 && coeff * q0 != 0.0) {
        return Err(Error::Pole(1.0 / (coeff * q0)));
    }
    Ok(q0 / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::DampingFamily;
    use approx::assert_relative_eq;

    fn law2() -> GasLaw {
        GasLaw::new(2.0).unwrap()
    }

    fn bump(eps: f64) -> InitialData {
        InitialData {
            phi: Profile::Gauss {
                amp: 0.5,
                center: 0.0,
                width: 1.0,
            },
            psi: Profile::neg_x_gauss(0.0),
            epsilon: eps,
            x0: 0.0,
            delta0: 0.1,
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(riccati_closed_form(1.0, 1.0, 0.5).unwrap(), 2.0);
        assert_eq!(riccati_closed_form(1.0, 1.0, 1.0), Err(Error::Pole(1.0)));
        assert_eq!(riccati_closed_form(-1.0, 1.0, 1.0).unwrap(), -0.5);
        assert!(riccati_closed_form(1.0, 1.0, 1.0 - 1e-9).unwrap() > 1e8);
    }

    #[test]
    fn steady_background_is_exact() {
        let grid = Grid1D::new(-5.0, 5.0, 201).unwrap();
        let spec = DampingSpec::new(DampingFamily::SeparatedSum {
            lambda1: 2.0,
            lambda2: 2.0,
        })
        .unwrap();
        let st = lax_friedrichs_run(grid, &law2(), &spec, &bump(0.0), 2.0, 0.9).unwrap();
        assert!(st.u.iter().all(|&u| u == 1.0));
        assert!(st.v.iter().all(|&v| v == 0.0));
        assert_eq!(st.t, 2.0);
    }

    #[test]
    fn undamped_run_conserves_mass_and_momentum() {
        let grid = Grid1D::new(-20.0, 20.0, 801).unwrap();
        let data = bump(0.1);
        let st0 = ConservativeState::init(grid, &data).unwrap();
        let st = lax_friedrichs_run(grid, &law2(), &DampingSpec::zero(), &data, 3.0, 0.9).unwrap();
        assert!((st.mass_excess() - st0.mass_excess()).abs() < 1e-10);
        assert!((st.momentum() - st0.momentum()).abs() < 1e-10);
    }

    #[test]
    fn dual_solvers_converge_together() {
        let law = law2();
        let data = bump(0.1);
        let diffs: Vec<f64> = [201, 401, 801]
            .iter()
            .map(|&nx| {
                let grid = Grid1D::new(-10.0, 10.0, nx).unwrap();
                dual_solver_difference(grid, &law, &DampingSpec::zero(), &data, 0.5, 0.9)
                    .unwrap()
                    .linf()
            })
            .collect();
        assert!(diffs[0] > diffs[1] && diffs[1] > diffs[2], "{diffs:?}");
        let ratio = diffs[1] / diffs[2];
        assert!((1.5..=2.5).contains(&ratio), "{diffs:?}");
    }

    #[test]
    fn simple_wave_t_star_closed_form_at_center() {
        let law = law2();
        // s₀ = ε·(-x e^{-x²}); the steepest compression sits near x = 0 where
        // Λ'(0) = 3/4, so T* ≈ 1/(0.75 ε).
        let o = SimpleWaveOracle::new(law, Profile::neg_x_gauss(0.0), 0.1);
        let t = simple_wave_t_star(&o).unwrap();
        assert!((t - 1.0 / 0.075).abs() / t < 0.01, "{t}");
        // minimum is at least as steep as the centre value
        assert!(t <= 1.0 / 0.075 + 1e-9);
    }

    #[test]
    fn simple_wave_no_blowup_cases() {
        let law = law2();
        let flat = SimpleWaveOracle::new(law, Profile::Zero, 0.1);
        assert!(matches!(simple_wave_t_star(&flat), Err(Error::NoBlowup(_))));
        let rarefaction = SimpleWaveOracle::new(
            law,
            Profile::Tanh {
                amp: 1.0,
                center: 0.0,
                width: 1.0,
            },
            0.1,
        );
        assert!(matches!(
            simple_wave_t_star(&rarefaction),
            Err(Error::NoBlowup(_))
        ));
        let compressive = SimpleWaveOracle::new(
            law,
            Profile::Tanh {
                amp: -1.0,
                center: 0.0,
                width: 1.0,
            },
            0.1,
        );
        let t = simple_wave_t_star(&compressive).unwrap();
        assert!(t < 1.0 / 0.075 && t > 0.99 / 0.075, "{t}");
    }

    #[test]
    fn simple_wave_t_star_is_resolution_independent() {
        let law = GasLaw::new(1.4).unwrap();
        let mut o = SimpleWaveOracle::new(
            law,
            Profile::NegXGauss {
                scale: 1.0,
                center: 0.3,
                width: 0.7,
            },
            0.2,
        );
        o.samples_per_unit = 1000;
        let a = simple_wave_t_star(&o).unwrap();
        o.samples_per_unit = 4000;
        let b = simple_wave_t_star(&o).unwrap();
        assert!(((a - b) / a).abs() < 1e-4);
    }

    #[test]
    fn lambda_derivative_matches_finite_difference() {
        for g in [1.4, 2.0, 3.0, 5.0] {
            let o = SimpleWaveOracle::new(GasLaw::new(g).unwrap(), Profile::Zero, 1.0);
            for s in [-0.3, 0.0, 0.2] {
                let h = 1e-6;
                let fd = (o.lambda(s + h).unwrap() - o.lambda(s - h).unwrap()) / (2.0 * h);
                assert_relative_eq!(fd, o.lambda_prime(s).unwrap(), max_relative = 1e-7);
            }
            // Λ(s) is the sound speed of the state with r = 0
            let law = GasLaw::new(g).unwrap();
            let st = law
                .state_from_riemann(crate::gas::RiemannPair { r: 0.0, s: 0.2 })
                .unwrap();
            assert_relative_eq!(
                o.lambda(0.2).unwrap(),
                law.sound_speed(st.u).unwrap(),
                max_relative = 1e-12
            );
        }
    }
}
