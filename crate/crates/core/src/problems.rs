//! Built-in problems with analytic intensities: a sine drift against a
//! straight line (`example1`) and against an exponential curve (`example2`).

use crate::bm_fpt::{CurvyParams, DEFAULT_EPSILON, DEFAULT_HORIZON};
use crate::error::{FptError, Result};
use crate::exact::{ExactProblem, Proposal};
use crate::model::{real_fn, GammaPair, Orientation, Threshold, UnitDiffusionSDE};
use crate::numerics;

/// `dX = (K + sin X) dt + dB`.
pub fn sine_drift(k: f64, x0: f64) -> UnitDiffusionSDE {
    UnitDiffusionSDE::new(
        real_fn(move |x| k + x.sin()),
        real_fn(|x| x.cos()),
        real_fn(move |x| k * x - x.cos()),
        x0,
    )
}

/// `sup (cos x + (K + sin x)^2) / 2`, which is `((K+1)^2 + 1)/2` once `K >= 1`.
pub fn sine_gamma2_sup(k: f64) -> f64 {
    if k >= 1.0 {
        return 0.5 * ((k + 1.0) * (k + 1.0) + 1.0);
    }
    numerics::linspace(0.0, 2.0 * std::f64::consts::PI, 20_001)
        .into_iter()
        .map(|x| 0.5 * (x.cos() + (k + x.sin()).powi(2)))
        .fold(f64::NEG_INFINITY, f64::max)
        * 1.05
}

/// Sine drift against the line `a t + b` from `x0 < b`.
///
/// Uses `gamma1(t) = -a (K + sin(a t + b))`; `kappa` defaults to
/// `-a (K+1) + sup gamma2`, valid for `a < 0`, `K >= 1`.
pub fn example1(k: f64, a: f64, b: f64, x0: f64, kappa: Option<f64>) -> Result<ExactProblem> {
    let sde = sine_drift(k, x0);
    let th = Threshold::linear(a, b, Orientation::AboveStart);
    let kappa = match kappa {
        Some(v) => v,
        None => {
            if !(a <= 0.0 && k >= 1.0) {
                return Err(FptError::Configuration(
                    "the analytic kappa needs a <= 0 and K >= 1; supply kappa".into(),
                ));
            }
            -a * (k + 1.0) + sine_gamma2_sup(k)
        }
    };
    let gp = GammaPair::new(
        real_fn(move |t| -a * (k + (a * t + b).sin())),
        real_fn(move |x| 0.5 * (x.cos() + (k + x.sin()).powi(2))),
    )
    .with_kappa(kappa)?;
    ExactProblem::new(sde, th, gp, Proposal::Linear)
}

/// Sine drift against `a exp(-b t)` from `x0 < a`, with curvy proposals.
///
/// `gamma1(t) = a b e^{-bt} (K + sin(a e^{-bt}))`; its supremum is taken on a
/// fine grid of `u = e^{-bt}` in `[0, 1]` (exactly `ab (K + sin a)` for the defaults).
pub fn example2(k: f64, a: f64, b: f64, x0: f64, epsilon: Option<f64>, kappa: Option<f64>) -> Result<ExactProblem> {
    if !(a > 0.0 && b > 0.0) {
        return Err(FptError::Configuration("example2 needs a > 0 and b > 0".into()));
    }
    let sde = sine_drift(k, x0);
    let th = Threshold::exponential(a, b, Orientation::AboveStart);
    let g1 = move |u: f64| a * b * u * (k + (a * u).sin());
    let kappa = match kappa {
        Some(v) => v,
        None => {
            let k1 = numerics::linspace(0.0, 1.0, 10_001)
                .into_iter()
                .map(g1)
                .fold(f64::NEG_INFINITY, f64::max);
            k1.max(0.0) + sine_gamma2_sup(k)
        }
    };
    let gp = GammaPair::new(
        real_fn(move |t| g1((-b * t).exp())),
        real_fn(move |x| 0.5 * (x.cos() + (k + x.sin()).powi(2))),
    )
    .with_kappa(kappa)?;
    let curvy = CurvyParams::new(epsilon.unwrap_or(DEFAULT_EPSILON), -a * b, DEFAULT_HORIZON)?;
    ExactProblem::new(sde, th, gp, Proposal::Curvy(curvy))
}
