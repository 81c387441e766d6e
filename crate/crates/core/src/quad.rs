//! Adaptive Gauss–Kronrod quadrature for the smooth, monotone power-law
//! integrands that appear in the damping bounds and in `η`.

use crate::error::{Error, Result};

// 15-point Kronrod abscissae (positive half) and weights, with the embedded
// 7-point Gauss weights at the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integral and error estimate of one GK15 panel.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Options for the adaptive integrators.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    /// Maximum number of panel bisections on a finite interval.
    pub max_subdivisions: usize,
    /// Maximum number of doubling panels on a semi-infinite interval.
    pub max_tail_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-9,
            max_subdivisions: 2000,
            max_tail_panels: 1000,
        }
    }
}

/// Adaptive GK15 on `[a, b]`: the panel with the largest error is bisected
/// until the summed error estimate is below `opts.abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut panels = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..opts.max_subdivisions {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= opts.abs_tol {
            break;
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = gk15(&f, pa, mid);
        let (v2, e2) = gk15(&f, mid, pb);
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
    let total_err: f64 = panels.iter().map(|p| p.3).sum();
    let value: f64 = panels.iter().map(|p| p.2).sum();
    if !value.is_finite() {
        return Err(Error::Divergence(format!(
            "non-finite integral on [{a}, {b}]"
        )));
    }
    if total_err > opts.abs_tol.max(1e-12 * value.abs()) * 10.0 {
        return Err(Error::Divergence(format!(
            "error estimate {total_err:e} above tolerance on [{a}, {b}]"
        )));
    }
    Ok(value)
}

/// `∫_a^∞ f` for a non-negative integrand with a monotone tail.
///
/// The half-line is cut into panels whose widths double. Consecutive panel
/// integrals of a power law `x^(-λ)` shrink by `2^(1-λ)`, so the remainder
/// past panel `k` is bounded by the geometric sum `I_k ρ/(1-ρ)`; the tail is
/// truncated once that bound drops below the tolerance. A ratio that does
/// not settle below one within the panel budget is reported as divergence.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, opts: QuadOptions) -> Result<f64> {
    let mut total = 0.0;
    let mut lo = a;
    let mut width = 1.0;
    let mut prev: Option<f64> = None;
    for _ in 0..opts.max_tail_panels {
        let hi = lo + width;
        if !hi.is_finite() {
            break;
        }
        let panel = integrate(
            &f,
            lo,
            hi,
            QuadOptions {
                abs_tol: opts.abs_tol * 0.01,
                ..opts
            },
        )?;
        total += panel;
        if let Some(p) = prev {
            let (p, cur) = (p.abs(), panel.abs());
            if cur == 0.0 {
                return Ok(total);
            }
            if p > 0.0 {
                let rho = cur / p;
                if rho < 0.999 {
                    let tail = cur * rho / (1.0 - rho);
                    if tail < opts.abs_tol {
                        return Ok(total);
                    }
                }
            }
        }
        prev = Some(panel);
        lo = hi;
        width *= 2.0;
    }
    Err(Error::Divergence(format!(
        "tail of the integral from {a} did not fall below {:e} within {} panels",
        opts.abs_tol, opts.max_tail_panels
    )))
}

/// `∫_{-∞}^{∞} f`, split at zero.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, opts: QuadOptions) -> Result<f64> {
    let right = integrate_to_infinity(&f, 0.0, opts)?;
    let left = integrate_to_infinity(|x| f(-x), 0.0, opts)?;
    Ok(left + right)
}
