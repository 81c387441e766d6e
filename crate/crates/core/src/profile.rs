//! Named C¹ profiles for the initial perturbations `φ` and `ψ`.
//!
//! Gaussian-type profiles are cut to exact zero at eight widths from their
//! centre (where they are below `1e-27`), which makes the perturbation
//! compactly supported.

use serde::{Deserialize, Serialize};

const CUTOFF: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    /// `-scale · y · exp(-y²)`, `y = (x - center)/width`. Slope `-scale/width`
    /// at the centre.
    NegXGauss {
        scale: f64,
        center: f64,
        width: f64,
    },
    /// `amp · exp(-y²)`.
    Gauss {
        amp: f64,
        center: f64,
        width: f64,
    },
    /// `amp · tanh(y)`; not compactly supported, only meaningful for the
    /// simple-wave oracle.
    Tanh {
        amp: f64,
        center: f64,
        width: f64,
    },
}

impl Profile {
    pub fn neg_x_gauss(center: f64) -> Self {
        Profile::NegXGauss {
            scale: 1.0,
            center,
            width: 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Zero => "zero",
            Profile::NegXGauss { .. } => "neg_x_gauss",
            Profile::Gauss { .. } => "gauss",
            Profile::Tanh { .. } => "tanh",
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::NegXGauss {
                scale,
                center,
                width,
            } => {
                let y = (x - center) / width;
                if y.abs() > CUTOFF {
                    0.0
                } else {
                    -scale * y * (-y * y).exp()
                }
            }
            Profile::Gauss { amp, center, width } => {
                let y = (x - center) / width;
                if y.abs() > CUTOFF {
                    0.0
                } else {
                    amp * (-y * y).exp()
                }
            }
            Profile::Tanh { amp, center, width } => amp * ((x - center) / width).tanh(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::NegXGauss {
                scale,
                center,
                width,
            } => {
                let y = (x - center) / width;
                if y.abs() > CUTOFF {
                    0.0
                } else {
                    -scale / width * (1.0 - 2.0 * y * y) * (-y * y).exp()
                }
            }
            Profile::Gauss { amp, center, width } => {
                let y = (x - center) / width;
                if y.abs() > CUTOFF {
                    0.0
                } else {
                    -2.0 * amp / width * y * (-y * y).exp()
                }
            }
            Profile::Tanh { amp, center, width } => {
                let ch = ((x - center) / width).cosh();
                amp / (width * ch * ch)
            }
        }
    }

    /// Interval outside which the profile vanishes, `None` for the zero
    /// profile and for profiles without compact support.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Profile::Zero | Profile::Tanh { .. } => None,
            Profile::NegXGauss { center, width, .. } | Profile::Gauss { center, width, .. } => {
                let half = CUTOFF * width.abs();
                Some((center - half, center + half))
            }
        }
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self, Profile::Tanh { .. })
    }
}
