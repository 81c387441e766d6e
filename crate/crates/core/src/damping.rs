//! Damping coefficient `a(t, x)` with its separated bound `a₁(t) + a₂(x)`.
//!
//! Every family is even in `x` and built from powers of `(1+t)` and
//! `(1+|x|)`. `(1+|x|)^(-λ)` has a kink at the origin; the spatial derivative
//! there is taken to be the symmetric subgradient `0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DampingFamily {
    Zero,
    /// `μ (1+t)^(-λ₁)`
    TimePower {
        mu: f64,
        lambda1: f64,
    },
    /// `(1+|x|)^(-λ₂)`
    SpacePower {
        lambda2: f64,
    },
    /// `(1+t)^(-λ₁) + (1+|x|)^(-λ₂)`
    SeparatedSum {
        lambda1: f64,
        lambda2: f64,
    },
    /// `(1+t)^(-λ₁) (1+|x|)^(-λ₂)`
    SeparatedProduct {
        lambda1: f64,
        lambda2: f64,
    },
}

impl DampingFamily {
    pub fn name(&self) -> &'static str {
        match self {
            DampingFamily::Zero => "zero",
            DampingFamily::TimePower { .. } => "time_power",
            DampingFamily::SpacePower { .. } => "space_power",
            DampingFamily::SeparatedSum { .. } => "separated_sum",
            DampingFamily::SeparatedProduct { .. } => "separated_product",
        }
    }
}

/// An immutable damping coefficient together with its separated bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingSpec {
    family: DampingFamily,
    /// Constant `κ` with `|a| + |a_t| + |a_x| ≤ κ (a₁ + a₂)`.
    bound_factor: f64,
}

#[inline]
fn tp(t: f64, lambda: f64) -> f64 {
    (1.0 + t).powf(-lambda)
}

#[inline]
fn xp(x: f64, lambda: f64) -> f64 {
    (1.0 + x.abs()).powf(-lambda)
}

/// `d/dx (1+|x|)^(-λ)`, zero at the kink.
#[inline]
fn xp_prime(x: f64, lambda: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        -lambda * x.signum() * (1.0 + x.abs()).powf(-lambda - 1.0)
    }
}

impl DampingSpec {
    pub fn new(family: DampingFamily) -> Result<Self> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "damping.{name} must be finite (got {v})"
                )))
            }
        };
        let bound_factor = match family {
            DampingFamily::Zero => 1.0,
            DampingFamily::TimePower { mu, lambda1 } => {
                finite("mu", mu)?;
                finite("lambda1", lambda1)?;
                if lambda1 < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "damping.lambda1 must be non-negative (got {lambda1})"
                    )));
                }
                1.0 + lambda1
            }
            DampingFamily::SpacePower { lambda2 } => {
                finite("lambda2", lambda2)?;
                1.0 + lambda2.abs()
            }
            DampingFamily::SeparatedSum { lambda1, lambda2 } => {
                finite("lambda1", lambda1)?;
                finite("lambda2", lambda2)?;
                1.0 + lambda1.abs().max(lambda2.abs())
            }
            DampingFamily::SeparatedProduct { lambda1, lambda2 } => {
                finite("lambda1", lambda1)?;
                finite("lambda2", lambda2)?;
                if lambda1 < 0.0 || lambda2 < 0.0 {
                    return Err(Error::InvalidParameter(
                        "separated_product exponents must be non-negative".into(),
                    ));
                }
                1.0 + lambda1 + lambda2
            }
        };
        Ok(DampingSpec {
            family,
            bound_factor,
        })
    }

    pub fn zero() -> Self {
        DampingSpec {
            family: DampingFamily::Zero,
            bound_factor: 1.0,
        }
    }

    pub fn family(&self) -> DampingFamily {
        self.family
    }

    pub fn bound_factor(&self) -> f64 {
        self.bound_factor
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, DampingFamily::Zero)
            || matches!(self.family, DampingFamily::TimePower { mu, .. } if mu == 0.0)
    }

    /// Whether `a` depends on `x`.
    pub fn is_space_dependent(&self) -> bool {
        matches!(
            self.family,
            DampingFamily::SpacePower { .. }
                | DampingFamily::SeparatedSum { .. }
                | DampingFamily::SeparatedProduct { .. }
        )
    }

    #[inline]
    pub fn eval_a(&self, t: f64, x: f64) -> f64 {
        match self.family {
            DampingFamily::Zero => 0.0,
            DampingFamily::TimePower { mu, lambda1 } => mu * tp(t, lambda1),
            DampingFamily::SpacePower { lambda2 } => xp(x, lambda2),
            DampingFamily::SeparatedSum { lambda1, lambda2 } => tp(t, lambda1) + xp(x, lambda2),
            DampingFamily::SeparatedProduct { lambda1, lambda2 } => tp(t, lambda1) * xp(x, lambda2),
        }
    }

    pub fn eval_a_t(&self, t: f64, x: f64) -> f64 {
        match self.family {
            DampingFamily::Zero | DampingFamily::SpacePower { .. } => 0.0,
            DampingFamily::TimePower { mu, lambda1 } => -mu * lambda1 * tp(t, lambda1 + 1.0),
            DampingFamily::SeparatedSum { lambda1, .. } => -lambda1 * tp(t, lambda1 + 1.0),
            DampingFamily::SeparatedProduct { lambda1, lambda2 } => {
                -lambda1 * tp(t, lambda1 + 1.0) * xp(x, lambda2)
            }
        }
    }

    pub fn eval_a_x(&self, t: f64, x: f64) -> f64 {
        match self.family {
            DampingFamily::Zero | DampingFamily::TimePower { .. } => 0.0,
            DampingFamily::SpacePower { lambda2 } | DampingFamily::SeparatedSum { lambda2, .. } => {
                xp_prime(x, lambda2)
            }
            DampingFamily::SeparatedProduct { lambda1, lambda2 } => {
                tp(t, lambda1) * xp_prime(x, lambda2)
            }
        }
    }

    /// Time part of the separated bound, before the factor `κ`.
    pub fn a1(&self, t: f64) -> f64 {
        match self.family {
            DampingFamily::Zero | DampingFamily::SpacePower { .. } => 0.0,
            DampingFamily::TimePower { mu, lambda1 } => mu.abs() * tp(t, lambda1),
            DampingFamily::SeparatedSum { lambda1, .. } => tp(t, lambda1),
            DampingFamily::SeparatedProduct { lambda1, lambda2 } => {
                let total = lambda1 + lambda2;
                if total == 0.0 {
                    1.0
                } else {
                    lambda1 / total * tp(t, total)
                }
            }
        }
    }

    /// Space part of the separated bound, before the factor `κ`.
    pub fn a2(&self, x: f64) -> f64 {
        match self.family {
            DampingFamily::Zero | DampingFamily::TimePower { .. } => 0.0,
            DampingFamily::SpacePower { lambda2 } | DampingFamily::SeparatedSum { lambda2, .. } => {
                xp(x, lambda2)
            }
            DampingFamily::SeparatedProduct { lambda1, lambda2 } => {
                let total = lambda1 + lambda2;
                if total == 0.0 {
                    0.0
                } else {
                    lambda2 / total * xp(x, total)
                }
            }
        }
    }

    pub fn a2_prime(&self, x: f64) -> f64 {
        match self.family {
            DampingFamily::Zero | DampingFamily::TimePower { .. } => 0.0,
            DampingFamily::SpacePower { lambda2 } | DampingFamily::SeparatedSum { lambda2, .. } => {
                xp_prime(x, lambda2)
            }
            DampingFamily::SeparatedProduct { lambda1, lambda2 } => {
                let total = lambda1 + lambda2;
                if total == 0.0 {
                    0.0
                } else {
                    lambda2 / total * xp_prime(x, total)
                }
            }
        }
    }

    /// `sup |a(t, ·)|` over `[x_lo, x_hi]`. Every family is monotone in `|x|`,
    /// so the sup sits at the point nearest the origin or at an endpoint.
    pub fn sup_abs_on(&self, t: f64, x_lo: f64, x_hi: f64) -> f64 {
        if !self.is_space_dependent() {
            return self.eval_a(t, 0.0).abs();
        }
        let nearest = 0.0f64.clamp(x_lo, x_hi);
        self.eval_a(t, nearest)
            .abs()
            .max(self.eval_a(t, x_lo).abs())
            .max(self.eval_a(t, x_hi).abs())
    }

    /// `C_a = ∫₀^∞ a₁ + ∫_ℝ a₂`, by adaptive quadrature.
    pub fn integral_c_a(&self) -> Result<f64> {
        let opts = QuadOptions::default();
        let time_part = match self.family {
            DampingFamily::Zero | DampingFamily::SpacePower { .. } => 0.0,
            _ => quad::integrate_to_infinity(|t| self.a1(t), 0.0, opts)?,
        };
        let space_part = match self.family {
            DampingFamily::Zero | DampingFamily::TimePower { .. } => 0.0,
            _ => quad::integrate_real_line(|x| self.a2(x), opts)?,
        };
        Ok(time_part + space_part)
    }

    /// Samples `|a| + |a_t| + |a_x| ≤ κ (a₁ + a₂)` on a `(t, x)` lattice and
    /// `x a₂'(x) ≤ 0` on an `x` lattice; violations are collected, not thrown.
    pub fn check_assumptions(&self, sample_budget: usize) -> AssumptionReport {
        let mut violations = Vec::new();
        let mut notes = Vec::new();

        let c_a = match self.integral_c_a() {
            Ok(v) => Some(v),
            Err(e) => {
                violations.push(Violation {
                    kind: "as-b".into(),
                    t: None,
                    x: None,
                    lhs: None,
                    rhs: None,
                });
                notes.push(format!("C_a: {e}"));
                None
            }
        };

        let per_axis = ((sample_budget as f64).sqrt().floor() as usize).max(2);
        // Logarithmically spaced so both the origin and the far tails are hit.
        let t_axis: Vec<f64> = (0..per_axis)
            .map(|k| (k as f64 / (per_axis - 1) as f64 * (1e4f64).ln_1p()).exp_m1())
            .collect();
        let x_axis: Vec<f64> = {
            let half: Vec<f64> = (0..per_axis / 2 + 1)
                .map(|k| (k as f64 / (per_axis / 2).max(1) as f64 * (1e4f64).ln_1p()).exp_m1())
                .collect();
            let mut xs: Vec<f64> = half.iter().rev().map(|x| -x).collect();
            xs.extend(half.iter().skip(1));
            xs
        };

        for &t in &t_axis {
            for &x in &x_axis {
                let lhs =
                    self.eval_a(t, x).abs() + self.eval_a_t(t, x).abs() + self.eval_a_x(t, x).abs();
                let rhs = self.bound_factor * (self.a1(t) + self.a2(x));
                if lhs > rhs * (1.0 + 1e-12) + 1e-15 {
                    violations.push(Violation {
                        kind: "as-a".into(),
                        t: Some(t),
                        x: Some(x),
                        lhs: Some(lhs),
                        rhs: Some(rhs),
                    });
                }
            }
        }
        for &x in &x_axis {
            let lhs = x * self.a2_prime(x);
            if lhs > 1e-12 {
                violations.push(Violation {
                    kind: "as-c".into(),
                    t: None,
                    x: Some(x),
                    lhs: Some(lhs),
                    rhs: Some(0.0),
                });
            }
        }
        if self.is_space_dependent() {
            notes.push(
                "a_x(t, 0) taken as 0: (1+|x|)^(-λ) is Lipschitz but not C¹ at the origin".into(),
            );
        }
        AssumptionReport {
            c_a,
            violations,
            notes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: String,
    pub t: Option<f64>,
    pub x: Option<f64>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub c_a: Option<f64>,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

impl AssumptionReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}
