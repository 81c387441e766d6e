//! Thermodynamic closure of the isentropic p-system with the γ-law pressure
//! `p(u) = u^(-γ)/γ`.
//!
//! Riemann invariants are normalised so that both vanish on the background
//! state `(u, v) = (1, 0)`:
//!
//! ```text
//! r = v - η(u) + 2/(γ-1),   s = v + η(u) - 2/(γ-1),   η(u) = 2/(γ-1) u^(-(γ-1)/2)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_U_FLOOR: f64 = 1e-6;

/// Specific volume and velocity at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    pub u: f64,
    pub v: f64,
}

/// Riemann invariants `(r, s)`. `r` is transported by the minus family,
/// `s` by the plus family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannPair {
    pub r: f64,
    pub s: f64,
}

/// A power `x^p` that switches to `powi` when `p` is an integer.
#[derive(Debug, Clone, Copy)]
struct Power {
    p: f64,
    int: Option<i32>,
}

impl Power {
    fn new(p: f64) -> Self {
        let int = (p.fract() == 0.0 && p.abs() < 64.0).then_some(p as i32);
        Power { p, int }
    }

    #[inline]
    fn of(self, x: f64) -> f64 {
        match self.int {
            Some(0) => 1.0,
            Some(1) => x,
            Some(2) => x * x,
            Some(3) => x * x * x,
            Some(-1) => 1.0 / x,
            Some(-2) => 1.0 / (x * x),
            Some(-3) => 1.0 / (x * x * x),
            Some(n) => x.powi(n),
            None => x.powf(self.p),
        }
    }
}

/// γ-law gas. Every derived quantity closes over the same exponent.
#[derive(Debug, Clone, Copy)]
pub struct GasLaw {
    gamma: f64,
    u_floor: f64,
    // 2/(γ-1)
    shift: f64,
    u_of_w: Power,
    c_of_w: Power,
    c_of_u: Power,
}

impl PartialEq for GasLaw {
    fn eq(&self, other: &Self) -> bool {
        self.gamma == other.gamma && self.u_floor == other.u_floor
    }
}

impl GasLaw {
    pub fn new(gamma: f64) -> Result<Self> {
        Self::with_u_floor(gamma, DEFAULT_U_FLOOR)
    }

    pub fn with_u_floor(gamma: f64, u_floor: f64) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma must exceed 1 (got {gamma})"
            )));
        }
        if !(u_floor >= 0.0) || !u_floor.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "u_floor must be a finite non-negative number (got {u_floor})"
            )));
        }
        Ok(GasLaw {
            gamma,
            u_floor,
            shift: 2.0 / (gamma - 1.0),
            u_of_w: Power::new(-2.0 / (gamma - 1.0)),
            c_of_w: Power::new((gamma + 1.0) / (gamma - 1.0)),
            c_of_u: Power::new(-(gamma + 1.0) / 2.0),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn u_floor(&self) -> f64 {
        self.u_floor
    }

    /// The constant `2/(γ-1)` that normalises the invariants.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    fn check_u(&self, u: f64) -> Result<()> {
        if u > 0.0 && u.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "specific volume must be positive (u = {u})"
            )))
        }
    }

    pub fn pressure(&self, u: f64) -> Result<f64> {
        self.check_u(u)?;
        Ok(u.powf(-self.gamma) / self.gamma)
    }

    /// `c(u) = sqrt(-p'(u)) = u^(-(γ+1)/2)`.
    pub fn sound_speed(&self, u: f64) -> Result<f64> {
        self.check_u(u)?;
        Ok(self.c_of_u.of(u))
    }

    /// `dc/du = -(γ+1)/2 · u^(-(γ+3)/2)`.
    pub fn sound_speed_derivative(&self, u: f64) -> Result<f64> {
        self.check_u(u)?;
        Ok(-0.5 * (self.gamma + 1.0) * u.powf(-0.5 * (self.gamma + 3.0)))
    }

    /// `η(u) = ∫_u^∞ c(ξ) dξ`.
    pub fn eta(&self, u: f64) -> Result<f64> {
        self.check_u(u)?;
        Ok(self.shift * u.powf(-0.5 * (self.gamma - 1.0)))
    }

    pub fn riemann_from_state(&self, st: GasState) -> Result<RiemannPair> {
        let eta = self.eta(st.u)?;
        Ok(RiemannPair {
            r: st.v - eta + self.shift,
            s: st.v + eta - self.shift,
        })
    }

    /// `w = u^(-(γ-1)/2)` recovered from the invariants; positive iff the pair
    /// can be inverted.
    #[inline]
    fn w_of(&self, r: f64, s: f64) -> Result<f64> {
        let half_gap = 0.5 * (s - r) + self.shift;
        if !(half_gap > 0.0) {
            return Err(Error::Vacuum(format!(
                "(s - r)/2 + 2/(γ-1) = {half_gap} is not positive (r = {r}, s = {s})"
            )));
        }
        Ok(half_gap / self.shift)
    }

    pub fn state_from_riemann(&self, rp: RiemannPair) -> Result<GasState> {
        let (u, _) = self.volume_and_speed(rp.r, rp.s)?;
        Ok(GasState {
            u,
            v: 0.5 * (rp.r + rp.s),
        })
    }

    /// `(u, c)` without the vacuum guard; `u` is NaN when the pair cannot be
    /// inverted. Callers check `u` against [`GasLaw::u_floor`].
    #[inline]
    pub(crate) fn volume_and_speed_raw(&self, r: f64, s: f64) -> (f64, f64) {
        let half_gap = 0.5 * (s - r) + self.shift;
        if !(half_gap > 0.0) {
            return (f64::NAN, f64::NAN);
        }
        let w = half_gap / self.shift;
        (self.u_of_w.of(w), self.c_of_w.of(w))
    }

    /// `(u, c)` at a node from its invariants, with the vacuum guard applied.
    #[inline]
    pub fn volume_and_speed(&self, r: f64, s: f64) -> Result<(f64, f64)> {
        let w = self.w_of(r, s)?;
        let u = self.u_of_w.of(w);
        if !(u > self.u_floor) || !u.is_finite() {
            return Err(Error::Vacuum(format!(
                "u = {u} outside (u_floor = {}, ∞)",
                self.u_floor
            )));
        }
        Ok((u, self.c_of_w.of(w)))
    }

    /// `θ_γ(u)`: `4/(3-γ)(u^((3-γ)/4) - 1)` for γ ≠ 3 and `ln u` for γ = 3.
    /// Its derivative is `sqrt(c(u))`.
    pub fn theta_gamma(&self, u: f64) -> Result<f64> {
        self.check_u(u)?;
        if self.gamma == 3.0 {
            Ok(u.ln())
        } else {
            let k = 4.0 / (3.0 - self.gamma);
            Ok(k * u.powf((3.0 - self.gamma) / 4.0) - k)
        }
    }

    /// Coefficient `(γ+1)/4 · u^((γ-3)/4)` of the quadratic term in the
    /// weighted gradient equations.
    pub fn riccati_coefficient(&self, u: f64) -> Result<f64> {
        self.check_u(u)?;
        Ok(0.25 * (self.gamma + 1.0) * u.powf(0.25 * (self.gamma - 3.0)))
    }
}
