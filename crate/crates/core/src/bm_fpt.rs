//! First-passage times of standard Brownian motion (started at 0) to constant,
//! linear and curvy thresholds. These are the proposal laws of the exact sampler.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{FptError, Result};
use crate::model::{Orientation, Threshold};

/// Default cap on the curvy iteration time.
pub const DEFAULT_HORIZON: f64 = 50.0;
/// Default stopping gap of the curvy iteration.
pub const DEFAULT_EPSILON: f64 = 1.0 / 16.0;

/// One first-passage draw with its bookkeeping counters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FptDraw {
    pub time: f64,
    pub finite: bool,
    /// Outer rejection iterations (1 for a bare proposal draw).
    pub proposals: u64,
    /// Exponential-clock events (exact sampler) or inner iterations (curvy sampler).
    pub clock_events: u64,
    /// The curvy iteration stopped at its horizon; `time` is the horizon.
    pub censored: bool,
}

impl FptDraw {
    pub fn finite(time: f64) -> Self {
        Self {
            time,
            finite: true,
            proposals: 1,
            clock_events: 0,
            censored: false,
        }
    }

    pub fn infinite() -> Self {
        Self {
            time: f64::INFINITY,
            finite: false,
            proposals: 1,
            clock_events: 0,
            censored: false,
        }
    }
}

/// Parameters of the curvy-threshold iteration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CurvyParams {
    pub epsilon: f64,
    /// Slope of the tilted lines, in the geometry where the threshold lies above the path.
    pub r: f64,
    pub horizon: f64,
}

impl CurvyParams {
    pub fn new(epsilon: f64, r: f64, horizon: f64) -> Result<Self> {
        let p = Self { epsilon, r, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.horizon > 0.0) || !self.r.is_finite() {
            return Err(FptError::Parameter(format!(
                "curvy parameters need epsilon > 0, horizon > 0, finite r (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Inverse Gaussian draw via the transformation-with-multiple-roots method.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mu: f64, lambda: f64, rng: &mut R) -> Result<f64> {
    if !(mu > 0.0) || !(lambda > 0.0) {
        return Err(FptError::Parameter(format!(
            "inverse Gaussian needs mu > 0 and lambda > 0 (got {mu}, {lambda})"
        )));
    }
    let v: f64 = rng.sample(StandardNormal);
    let u: f64 = rng.random();
    Ok(inverse_gaussian_from(mu, lambda, v, u))
}

/// Deterministic core of [`sample_inverse_gaussian`] given the normal `v` and uniform `u`.
///
/// The smaller root is written as `mu * 4 lambda w / (s + w)^2` to avoid the
/// cancellation of the textbook form when `lambda / mu` is large.
pub fn inverse_gaussian_from(mu: f64, lambda: f64, v: f64, u: f64) -> f64 {
    let w = mu * v * v;
    let s = (4.0 * lambda * w + w * w).sqrt();
    let denom = (s + w) * (s + w);
    if denom == 0.0 {
        return mu;
    }
    let x = mu * 4.0 * lambda * w / denom;
    if x <= 0.0 {
        // Underflow: the large root is then effectively infinite; keep the small one.
        return f64::MIN_POSITIVE;
    }
    if u <= mu / (mu + x) {
        x
    } else {
        mu * mu / x
    }
}

/// Closed-form CDF of IG(mu, lambda).
pub fn inverse_gaussian_cdf(mu: f64, lambda: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let r = (lambda / x).sqrt();
    let a = crate::numerics::normal_cdf(r * (x / mu - 1.0));
    // exp(2 lambda / mu) Phi(-r (x/mu + 1)) computed in log space.
    let z = -r * (x / mu + 1.0);
    let b = if z < -30.0 {
        // Mills-ratio tail to keep the product finite.
        let log_phi = -0.5 * z * z - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        (2.0 * lambda / mu + log_phi).exp()
    } else {
        (2.0 * lambda / mu).exp() * crate::numerics::normal_cdf(z)
    };
    (a + b).min(1.0)
}

/// `level^2 / g^2`: first passage of BM to a constant level given the normal draw `g`.
pub fn fpt_constant_from_normal(level: f64, g: f64) -> f64 {
    level * level / (g * g)
}

/// First passage of BM to the constant `level`.
pub fn sample_fpt_constant<R: Rng + ?Sized>(level: f64, rng: &mut R) -> Result<FptDraw> {
    if level < 0.0 || !level.is_finite() {
        return Err(FptError::Parameter(format!("level must be non-negative, got {level}")));
    }
    if level == 0.0 {
        return Ok(FptDraw::finite(0.0));
    }
    let g: f64 = rng.sample(StandardNormal);
    Ok(FptDraw::finite(fpt_constant_from_normal(level, g)))
}

/// First passage of BM to the line `a t + b`, `b > 0`. Infinite with probability
/// `1 - exp(-2ab)` when `ab > 0`.
pub fn sample_fpt_linear<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<FptDraw> {
    if !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(FptError::Parameter(format!("intercept must be positive, got {b}")));
    }
    if a == 0.0 {
        return sample_fpt_constant(b, rng);
    }
    if a < 0.0 {
        return Ok(FptDraw::finite(sample_inverse_gaussian(-b / a, b * b, rng)?));
    }
    let hit: f64 = rng.random();
    if hit < (-2.0 * a * b).exp() {
        Ok(FptDraw::finite(sample_inverse_gaussian(b / a, b * b, rng)?))
    } else {
        Ok(FptDraw::infinite())
    }
}

/// First passage to `a t + b` drawn from the exponentially tilted law
/// `exp(-s t) f(t) / Z`, where `f` is the (possibly defective) untilted density.
///
/// With `nu = sqrt(a^2 + 2 s)` the tilted law is IG(b / nu, b^2), or the
/// constant-level law when `nu = 0`. `s = 0` falls back to [`sample_fpt_linear`].
pub fn sample_fpt_linear_tilted<R: Rng + ?Sized>(a: f64, b: f64, s: f64, rng: &mut R) -> Result<FptDraw> {
    if s == 0.0 {
        return sample_fpt_linear(a, b, rng);
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(FptError::Parameter(format!("intercept must be positive, got {b}")));
    }
    let nu2 = a * a + 2.0 * s;
    if nu2 < 0.0 || !nu2.is_finite() {
        return Err(FptError::Unsupported(format!(
            "tilt {s} makes the proposal law non-normalizable for slope {a}"
        )));
    }
    if nu2 == 0.0 {
        return sample_fpt_constant(b, rng);
    }
    Ok(FptDraw::finite(sample_inverse_gaussian(b / nu2.sqrt(), b * b, rng)?))
}

/// Approximate first passage of BM to a curvy threshold by iterated tilted lines.
///
/// `th` is expressed relative to the BM start (so `beta(0) > 0` for `AboveStart`).
/// `BelowStart` thresholds are handled by reflection, with `p.r` read in the
/// reflected geometry. An unreachable tilted line gives an infinite draw; reaching
/// `p.horizon` gives a censored draw at the horizon.
pub fn sample_fpt_curvy<R: Rng + ?Sized>(th: &Threshold, p: &CurvyParams, rng: &mut R) -> Result<FptDraw> {
    p.validate()?;
    if th.orientation == Orientation::BelowStart {
        return sample_fpt_curvy(&th.reflected(), p, rng);
    }
    let inf_slope = th.inf_slope.ok_or_else(|| {
        FptError::Configuration("curvy proposals need a lower bound on the threshold slope".into())
    })?;
    if p.r > inf_slope {
        return Err(FptError::Configuration(format!(
            "line slope r = {} exceeds the threshold's slope lower bound {inf_slope}",
            p.r
        )));
    }
    let mut h = th.value(0.0);
    if !(h > 0.0) {
        return Err(FptError::Configuration(format!(
            "threshold must start above the path, got gap {h}"
        )));
    }
    let mut t = 0.0;
    let mut iterations = 0u64;
    loop {
        let step = sample_fpt_linear(p.r, h, rng)?;
        iterations += 1;
        if !step.finite {
            return Ok(FptDraw {
                clock_events: iterations,
                ..FptDraw::infinite()
            });
        }
        let t_new = t + step.time;
        if t_new >= p.horizon {
            return Ok(FptDraw {
                time: p.horizon,
                finite: true,
                proposals: 1,
                clock_events: iterations,
                censored: true,
            });
        }
        h = th.value(t_new) - th.value(t) - p.r * step.time;
        t = t_new;
        if h <= p.epsilon {
            return Ok(FptDraw {
                clock_events: iterations,
                ..FptDraw::finite(t)
            });
        }
    }
}
