//! SDE, threshold and thinning-intensity machinery.
//!
//! A problem is described by a unit-diffusion SDE `dX = alpha(X) dt + dB`, a
//! differentiable threshold `beta(t)`, and the pair of intensity functions
//!
//! ```text
//! gamma1(t) = -alpha(beta(t)) * beta'(t)
//! gamma2(x) = (alpha'(x) + alpha(x)^2) / 2
//! ```
//!
//! whose sum, bounded by `kappa`, drives the Poisson thinning in [`crate::exact`].

use std::fmt;
use std::sync::Arc;

use crate::error::{FptError, Result};
use crate::numerics;

/// A pure real function shared between threads.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Wraps a closure as a [`RealFn`].
pub fn real_fn<F>(f: F) -> RealFn
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Absolute tolerance of the quadratures behind the Lamperti map and `A`.
pub const QUAD_TOL: f64 = 1e-10;
/// Tolerance of the monotone root finder inverting the Lamperti map.
pub const ROOT_TOL: f64 = 1e-12;
/// Negative intensities down to this value are treated as roundoff and clamped to zero.
pub const NEGATIVE_SLACK: f64 = 1e-12;
/// Safety margin applied by [`estimate_kappa`].
pub const KAPPA_MARGIN: f64 = 0.05;

/// `dY = mu(Y) dt + sigma(Y) dB`, `Y_0 = y0`.
#[derive(Clone)]
pub struct GeneralSDE {
    pub mu: RealFn,
    pub sigma: RealFn,
    pub sigma_prime: RealFn,
    pub y0: f64,
}

/// `dX = alpha(X) dt + dB`, `X_0 = x0`, with `antiderivative' = alpha`.
#[derive(Clone)]
pub struct UnitDiffusionSDE {
    pub alpha: RealFn,
    pub alpha_prime: RealFn,
    pub antiderivative: RealFn,
    pub x0: f64,
}

impl fmt::Debug for UnitDiffusionSDE {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnitDiffusionSDE").field("x0", &self.x0).finish_non_exhaustive()
    }
}

impl UnitDiffusionSDE {
    pub fn new(alpha: RealFn, alpha_prime: RealFn, antiderivative: RealFn, x0: f64) -> Self {
        Self {
            alpha,
            alpha_prime,
            antiderivative,
            x0,
        }
    }

    /// Drift-free Brownian motion started at `x0`.
    pub fn brownian(x0: f64) -> Self {
        Self::new(real_fn(|_| 0.0), real_fn(|_| 0.0), real_fn(|_| 0.0), x0)
    }

    /// Constant drift `c`.
    pub fn constant_drift(c: f64, x0: f64) -> Self {
        Self::new(real_fn(move |_| c), real_fn(|_| 0.0), real_fn(move |x| c * x), x0)
    }

    pub fn with_start(&self, x0: f64) -> Self {
        Self { x0, ..self.clone() }
    }

    /// Mirror image `X -> -X`: drift `x -> -alpha(-x)`, start `-x0`.
    pub fn reflected(&self) -> Self {
        let (a, ap, aa) = (self.alpha.clone(), self.alpha_prime.clone(), self.antiderivative.clone());
        Self::new(
            real_fn(move |x| -a(-x)),
            real_fn(move |x| ap(-x)),
            real_fn(move |x| aa(-x)),
            -self.x0,
        )
    }

    /// Spot-checks `alpha_prime` and `antiderivative` against `alpha` by central
    /// differences on `n` grid points of `[lo, hi]`.
    pub fn check_derivatives(&self, lo: f64, hi: f64, n: usize) -> Result<()> {
        for x in numerics::linspace(lo, hi, n.max(2)) {
            let h = 1e-5 * x.abs().max(1.0);
            let fd_alpha = ((self.alpha)(x + h) - (self.alpha)(x - h)) / (2.0 * h);
            let ap = (self.alpha_prime)(x);
            if (fd_alpha - ap).abs() > 1e-6 * ap.abs().max(1.0) {
                return Err(FptError::Configuration(format!(
                    "alpha_prime({x}) = {ap} disagrees with finite difference {fd_alpha}"
                )));
            }
            let fd_anti = ((self.antiderivative)(x + h) - (self.antiderivative)(x - h)) / (2.0 * h);
            let a = (self.alpha)(x);
            if (fd_anti - a).abs() > 1e-6 * a.abs().max(1.0) {
                return Err(FptError::Configuration(format!(
                    "antiderivative is not a primitive of alpha at {x}: {fd_anti} vs {a}"
                )));
            }
        }
        Ok(())
    }
}

/// Where the threshold starts relative to the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Orientation {
    AboveStart,
    BelowStart,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::AboveStart => Orientation::BelowStart,
            Orientation::BelowStart => Orientation::AboveStart,
        }
    }
}

/// Closed-form knowledge about a threshold that the proposal samplers can exploit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdShape {
    Constant(f64),
    Linear { slope: f64, intercept: f64 },
    General,
}

/// A differentiable time-dependent threshold `beta(t)`.
#[derive(Clone)]
pub struct Threshold {
    pub beta: RealFn,
    pub beta_prime: RealFn,
    pub inf_slope: Option<f64>,
    pub sup_slope: Option<f64>,
    pub orientation: Orientation,
    pub shape: ThresholdShape,
}

impl fmt::Debug for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Threshold")
            .field("shape", &self.shape)
            .field("orientation", &self.orientation)
            .field("inf_slope", &self.inf_slope)
            .field("sup_slope", &self.sup_slope)
            .finish_non_exhaustive()
    }
}

impl Threshold {
    pub fn new(beta: RealFn, beta_prime: RealFn, orientation: Orientation) -> Self {
        Self {
            beta,
            beta_prime,
            inf_slope: None,
            sup_slope: None,
            orientation,
            shape: ThresholdShape::General,
        }
    }

    pub fn constant(level: f64, orientation: Orientation) -> Self {
        Self {
            beta: real_fn(move |_| level),
            beta_prime: real_fn(|_| 0.0),
            inf_slope: Some(0.0),
            sup_slope: Some(0.0),
            orientation,
            shape: ThresholdShape::Constant(level),
        }
    }

    /// `beta(t) = slope * t + intercept`.
    pub fn linear(slope: f64, intercept: f64, orientation: Orientation) -> Self {
        if slope == 0.0 {
            return Self::constant(intercept, orientation);
        }
        Self {
            beta: real_fn(move |t| slope * t + intercept),
            beta_prime: real_fn(move |_| slope),
            inf_slope: Some(slope),
            sup_slope: Some(slope),
            orientation,
            shape: ThresholdShape::Linear { slope, intercept },
        }
    }

    /// `beta(t) = a * exp(-b t)`, slopes bounded between `-a b` and `0` for `a b > 0`.
    pub fn exponential(a: f64, b: f64, orientation: Orientation) -> Self {
        let (lo, hi) = if a * b >= 0.0 { (-a * b, 0.0) } else { (0.0, -a * b) };
        Self::new(
            real_fn(move |t| a * (-b * t).exp()),
            real_fn(move |t| -a * b * (-b * t).exp()),
            orientation,
        )
        .with_slope_bounds(Some(lo), Some(hi))
    }

    pub fn with_slope_bounds(mut self, inf_slope: Option<f64>, sup_slope: Option<f64>) -> Self {
        self.inf_slope = inf_slope;
        self.sup_slope = sup_slope;
        self
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.beta)(t)
    }

    pub fn slope(&self, t: f64) -> f64 {
        (self.beta_prime)(t)
    }

    /// Threshold seen from time `t0` on and moved by `offset`: `t -> beta(t0 + t) + offset`.
    pub fn shifted(&self, t0: f64, offset: f64) -> Self {
        let shape = match self.shape {
            ThresholdShape::Constant(c) => ThresholdShape::Constant(c + offset),
            ThresholdShape::Linear { slope, intercept } => ThresholdShape::Linear {
                slope,
                intercept: slope * t0 + intercept + offset,
            },
            ThresholdShape::General => ThresholdShape::General,
        };
        if t0 == 0.0 && offset == 0.0 {
            return self.clone();
        }
        let (b, bp) = (self.beta.clone(), self.beta_prime.clone());
        Self {
            beta: real_fn(move |t| b(t0 + t) + offset),
            beta_prime: real_fn(move |t| bp(t0 + t)),
            shape,
            ..self.clone()
        }
    }

    /// Mirror image `-beta`, with slope bounds and orientation flipped.
    pub fn reflected(&self) -> Self {
        let (b, bp) = (self.beta.clone(), self.beta_prime.clone());
        let shape = match self.shape {
            ThresholdShape::Constant(c) => ThresholdShape::Constant(-c),
            ThresholdShape::Linear { slope, intercept } => ThresholdShape::Linear {
                slope: -slope,
                intercept: -intercept,
            },
            ThresholdShape::General => ThresholdShape::General,
        };
        Self {
            beta: real_fn(move |t| -b(t)),
            beta_prime: real_fn(move |t| -bp(t)),
            inf_slope: self.sup_slope.map(|s| -s),
            sup_slope: self.inf_slope.map(|s| -s),
            orientation: self.orientation.flipped(),
            shape,
        }
    }

    /// Verifies the declared orientation against a start point.
    pub fn check_orientation(&self, x0: f64) -> Result<()> {
        let b0 = self.value(0.0);
        let ok = match self.orientation {
            Orientation::AboveStart => b0 > x0,
            Orientation::BelowStart => b0 < x0,
        };
        if ok {
            Ok(())
        } else {
            Err(FptError::Configuration(format!(
                "threshold declared {:?} but beta(0) = {b0} and x0 = {x0}",
                self.orientation
            )))
        }
    }

    /// Finite-difference check of `beta_prime` (relative tolerance 1e-6) on `[0, t_max]`.
    pub fn check_derivative(&self, t_max: f64, n: usize) -> Result<()> {
        for t in numerics::linspace(0.0, t_max, n.max(2)) {
            let h = 1e-5 * t.abs().max(1.0);
            let (lo, hi) = if t - h < 0.0 { (t, t + 2.0 * h) } else { (t - h, t + h) };
            let fd = (self.value(hi) - self.value(lo)) / (hi - lo);
            let mid = 0.5 * (lo + hi);
            let bp = self.slope(mid);
            if (fd - bp).abs() > 1e-6 * bp.abs().max(1.0) {
                return Err(FptError::Configuration(format!(
                    "beta_prime({mid}) = {bp} disagrees with finite difference {fd}"
                )));
            }
        }
        Ok(())
    }
}

/// The thinning intensity `gamma1(t) + gamma2(x)` with its shifts and bound.
#[derive(Clone)]
pub struct GammaPair {
    base_gamma1: RealFn,
    base_gamma2: RealFn,
    pub shift1: f64,
    pub shift2: f64,
    pub kappa: Option<f64>,
}

impl fmt::Debug for GammaPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GammaPair")
            .field("shift1", &self.shift1)
            .field("shift2", &self.shift2)
            .field("kappa", &self.kappa)
            .finish_non_exhaustive()
    }
}

impl GammaPair {
    /// User-supplied (typically analytic) intensity functions.
    pub fn new(gamma1: RealFn, gamma2: RealFn) -> Self {
        Self {
            base_gamma1: gamma1,
            base_gamma2: gamma2,
            shift1: 0.0,
            shift2: 0.0,
            kappa: None,
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(FptError::Configuration(format!("kappa must be positive, got {kappa}")));
        }
        self.kappa = Some(kappa);
        Ok(self)
    }

    /// Shifted `gamma1`.
    pub fn gamma1(&self, t: f64) -> f64 {
        (self.base_gamma1)(t) - self.shift1
    }

    /// Shifted `gamma2`.
    pub fn gamma2(&self, x: f64) -> f64 {
        (self.base_gamma2)(x) - self.shift2
    }

    pub fn total_shift(&self) -> f64 {
        self.shift1 + self.shift2
    }

    pub fn kappa(&self) -> Result<f64> {
        self.kappa
            .ok_or_else(|| FptError::Configuration("kappa is not set".into()))
    }

    /// Evaluates the intensity and enforces `0 <= value <= kappa`.
    ///
    /// Values in `[-NEGATIVE_SLACK, 0)` are clamped to zero.
    pub fn intensity(&self, t: f64, x: f64) -> Result<f64> {
        let kappa = self.kappa()?;
        let v = self.gamma1(t) + self.gamma2(x);
        let violation = || FptError::Assumption {
            time: t,
            state: x,
            value: v,
            kappa,
        };
        if !v.is_finite() || v < -NEGATIVE_SLACK || v > kappa * (1.0 + 1e-12) {
            return Err(violation());
        }
        Ok(v.max(0.0))
    }

    /// Same intensity functions moved in time by `t0` (used by chained stages).
    pub fn delayed(&self, t0: f64) -> Self {
        if t0 == 0.0 {
            return self.clone();
        }
        let g1 = self.base_gamma1.clone();
        Self {
            base_gamma1: real_fn(move |t| g1(t0 + t)),
            ..self.clone()
        }
    }
}

/// Monotone change of variables `F(y) = int_{y_ref}^{y} dz / sigma(z)`.
#[derive(Clone)]
pub struct LampertiMap {
    sigma: RealFn,
    y_ref: f64,
    scale: f64,
}

impl LampertiMap {
    pub fn new(sigma: RealFn, y_ref: f64) -> Result<Self> {
        let s = sigma(y_ref);
        if !(s > 0.0) {
            return Err(FptError::DiffusionSign { state: y_ref, value: s });
        }
        Ok(Self { sigma, y_ref, scale: s })
    }

    /// Forward map; NaN when the integration range meets a non-positive diffusion.
    pub fn forward(&self, y: f64) -> f64 {
        self.try_forward(y).unwrap_or(f64::NAN)
    }

    /// Checked forward map: reports a non-positive diffusion met on the way.
    pub fn try_forward(&self, y: f64) -> Result<f64> {
        let bad = std::cell::Cell::new(None);
        let sigma = &self.sigma;
        let v = numerics::integrate(
            &|z: f64| {
                let s = sigma(z);
                if !(s > 0.0) && bad.get().is_none() {
                    bad.set(Some((z, s)));
                }
                1.0 / s
            },
            self.y_ref,
            y,
            QUAD_TOL,
        );
        match bad.get() {
            Some((state, value)) => Err(FptError::DiffusionSign { state, value }),
            None => Ok(v),
        }
    }

    pub fn inverse(&self, x: f64) -> Result<f64> {
        let mut guess = self.y_ref + x * self.scale;
        if !self.forward(guess).is_finite() {
            guess = self.y_ref;
        }
        numerics::solve_increasing(&|y: f64| self.forward(y), x, guess, ROOT_TOL)
    }
}

/// Transforms `dY = mu dt + sigma dB` into a unit-diffusion SDE via `X = F(Y)`.
///
/// The drift is `alpha(x) = mu(y)/sigma(y) - sigma'(y)/2` with `y = F^{-1}(x)`.
/// `alpha'` is taken by central differences and `A` by quadrature of `alpha`
/// from `x0`; both are therefore only as accurate as the nested numerics
/// (roughly 1e-7 for `alpha'`). Evaluations that meet a non-positive diffusion
/// or fail to invert return NaN, which the intensity guard turns into an error.
pub fn lamperti_transform(sde: &GeneralSDE, y_ref: f64) -> Result<UnitDiffusionSDE> {
    let map = LampertiMap::new(sde.sigma.clone(), y_ref)?;
    let s0 = (sde.sigma)(sde.y0);
    if !(s0 > 0.0) {
        return Err(FptError::DiffusionSign { state: sde.y0, value: s0 });
    }
    let x0 = map.try_forward(sde.y0)?;
    // Round-trip once so inversion problems surface at construction time.
    map.inverse(x0)?;

    let (mu, sigma, sigma_prime) = (sde.mu.clone(), sde.sigma.clone(), sde.sigma_prime.clone());
    let alpha = real_fn(move |x| match map.inverse(x) {
        Ok(y) => {
            let s = sigma(y);
            if s > 0.0 {
                mu(y) / s - 0.5 * sigma_prime(y)
            } else {
                f64::NAN
            }
        }
        Err(_) => f64::NAN,
    });
    let a1 = alpha.clone();
    let alpha_prime = real_fn(move |x| {
        let h = 1e-4 * x.abs().max(1.0);
        (a1(x + h) - a1(x - h)) / (2.0 * h)
    });
    let a2 = alpha.clone();
    let antiderivative = real_fn(move |x| numerics::integrate(&|s: f64| a2(s), x0, x, QUAD_TOL));
    Ok(UnitDiffusionSDE::new(alpha, alpha_prime, antiderivative, x0))
}

/// Builds `gamma1(t) = -alpha(beta(t)) beta'(t)` and `gamma2(x) = (alpha'(x) + alpha(x)^2)/2`.
/// Shifts start at zero and `kappa` is left unset.
pub fn make_gamma_pair(sde: &UnitDiffusionSDE, th: &Threshold) -> GammaPair {
    let (alpha, beta, beta_prime) = (sde.alpha.clone(), th.beta.clone(), th.beta_prime.clone());
    let gamma1 = real_fn(move |t| -alpha(beta(t)) * beta_prime(t));
    let (alpha, alpha_prime) = (sde.alpha.clone(), sde.alpha_prime.clone());
    let gamma2 = real_fn(move |x| {
        let a = alpha(x);
        0.5 * (alpha_prime(x) + a * a)
    });
    GammaPair::new(gamma1, gamma2)
}

/// Subtracts the lower bounds `k1`, `k2` from `gamma1`, `gamma2`.
///
/// A previously set `kappa` is reduced by `k1 + k2`; a non-positive result is
/// a configuration error.
pub fn shift_gamma_pair(gp: &GammaPair, k1: f64, k2: f64) -> Result<GammaPair> {
    if !k1.is_finite() || !k2.is_finite() {
        return Err(FptError::Parameter("shifts must be finite".into()));
    }
    let mut out = gp.clone();
    out.shift1 += k1;
    out.shift2 += k2;
    if let Some(kappa) = gp.kappa {
        let shifted = kappa - k1 - k2;
        if !(shifted > 0.0) {
            return Err(FptError::Configuration(format!(
                "shifted kappa {shifted} is not positive"
            )));
        }
        out.kappa = Some(shifted);
    }
    Ok(out)
}

/// Grid estimate of `sup gamma1(t) + gamma2(x)` over `[0, t_max] x [x_lo, x_hi]`,
/// inflated by [`KAPPA_MARGIN`].
pub fn estimate_kappa(gp: &GammaPair, t_max: f64, x_lo: f64, x_hi: f64, n_grid: usize) -> Result<f64> {
    if !(t_max > 0.0) || !(x_lo < x_hi) || n_grid < 2 {
        return Err(FptError::Parameter(format!(
            "estimate_kappa needs t_max > 0, x_lo < x_hi, n_grid >= 2 (got {t_max}, {x_lo}, {x_hi}, {n_grid})"
        )));
    }
    let max_over = |values: &mut dyn Iterator<Item = (f64, f64)>| -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for (at, v) in values {
            if !v.is_finite() {
                return Err(FptError::Domain(format!("non-finite intensity at {at}")));
            }
            best = best.max(v);
        }
        Ok(best)
    };
    let g1 = max_over(&mut numerics::linspace(0.0, t_max, n_grid).into_iter().map(|t| (t, gp.gamma1(t))))?;
    let g2 = max_over(&mut numerics::linspace(x_lo, x_hi, n_grid).into_iter().map(|x| (x, gp.gamma2(x))))?;
    Ok((1.0 + KAPPA_MARGIN) * (g1 + g2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sine_sde(k: f64) -> UnitDiffusionSDE {
        UnitDiffusionSDE::new(
            real_fn(move |x| k + x.sin()),
            real_fn(|x| x.cos()),
            real_fn(move |x| k * x - x.cos()),
            0.0,
        )
    }

    #[test]
    fn unit_diffusion_is_a_fixed_point_of_lamperti() {
        let sde = GeneralSDE {
            mu: real_fn(|y| 0.3 * y - 1.0),
            sigma: real_fn(|_| 1.0),
            sigma_prime: real_fn(|_| 0.0),
            y0: 0.7,
        };
        let u = lamperti_transform(&sde, 0.0).unwrap();
        assert!((u.x0 - 0.7).abs() < 1e-12);
        for x in [-2.0, 0.0, 1.5] {
            assert!(((u.alpha)(x) - (0.3 * x - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn geometric_diffusion_becomes_constant_drift() {
        // X = ln Y for dY = Y dB gives dX = -1/2 dt + dB.
        let sde = GeneralSDE {
            mu: real_fn(|_| 0.0),
            sigma: real_fn(|y| y),
            sigma_prime: real_fn(|_| 1.0),
            y0: 2.0,
        };
        let u = lamperti_transform(&sde, 1.0).unwrap();
        assert!((u.x0 - 2.0_f64.ln()).abs() < 1e-9);
        for x in [-1.0, 0.0, 0.4, 2.0] {
            assert!(((u.alpha)(x) + 0.5).abs() < 1e-9, "alpha({x}) = {}", (u.alpha)(x));
        }
        assert!(((u.antiderivative)(1.0) - (-0.5 * (1.0 - u.x0))).abs() < 1e-8);
    }

    #[test]
    fn lamperti_rejects_non_positive_sigma() {
        let sde = GeneralSDE {
            mu: real_fn(|_| 0.0),
            sigma: real_fn(|y| y),
            sigma_prime: real_fn(|_| 1.0),
            y0: -1.0,
        };
        assert!(matches!(lamperti_transform(&sde, 1.0), Err(FptError::DiffusionSign { .. })));
    }

    #[test]
    fn lamperti_round_trip() {
        let map = LampertiMap::new(real_fn(|y: f64| 0.5 + y * y), 0.0).unwrap();
        for y in numerics::linspace(-3.0, 3.0, 25) {
            let back = map.inverse(map.forward(y)).unwrap();
            assert!((back - y).abs() < 1e-9, "{y} -> {back}");
        }
    }

    #[test]
    fn example1_gamma1_at_zero() {
        let th = Threshold::linear(-1.0, 0.5, Orientation::AboveStart);
        let gp = make_gamma_pair(&sine_sde(1.6), &th);
        let want = 1.6 + 0.5_f64.sin();
        assert!((gp.gamma1(0.0) - want).abs() < 1e-12);
        assert!((gp.gamma1(0.0) - 2.0794).abs() < 1e-4);
    }

    #[test]
    fn example2_gamma1_at_zero() {
        let th = Threshold::exponential(1.0, 1.0, Orientation::AboveStart);
        let gp = make_gamma_pair(&sine_sde(1.6), &th);
        assert!((gp.gamma1(0.0) - (1.6 + 1.0_f64.sin())).abs() < 1e-12);
        assert!((gp.gamma1(0.0) - 2.4415).abs() < 1e-4);
    }

    #[test]
    fn constant_threshold_has_zero_gamma1() {
        let gp = make_gamma_pair(&sine_sde(1.6), &Threshold::constant(2.0, Orientation::AboveStart));
        for t in [0.0, 0.3, 7.0] {
            assert_eq!(gp.gamma1(t), 0.0);
        }
    }

    #[test]
    fn zero_shift_is_identity() {
        let th = Threshold::linear(-1.0, 0.5, Orientation::AboveStart);
        let gp = make_gamma_pair(&sine_sde(1.6), &th).with_kappa(6.48).unwrap();
        let sh = shift_gamma_pair(&gp, 0.0, 0.0).unwrap();
        assert_eq!(sh.kappa, gp.kappa);
        for (t, x) in [(0.0, 0.0), (0.4, -1.0), (2.0, 3.0)] {
            assert_eq!(sh.intensity(t, x).unwrap(), gp.intensity(t, x).unwrap());
        }
    }

    #[test]
    fn shift_makes_k0_gamma2_non_negative() {
        let gp = make_gamma_pair(&sine_sde(0.0), &Threshold::constant(1.0, Orientation::AboveStart));
        let grid = numerics::linspace(-10.0, 10.0, 4001);
        let k2 = grid.iter().map(|&x| gp.gamma2(x)).fold(f64::INFINITY, f64::min);
        assert!(k2 < 0.0);
        let sh = shift_gamma_pair(&gp, 0.0, k2).unwrap();
        assert!(grid.iter().all(|&x| sh.gamma2(x) >= 0.0));
    }

    #[test]
    fn shift_reducing_kappa_to_zero_is_rejected() {
        let gp = GammaPair::new(real_fn(|_| 1.0), real_fn(|_| 1.0)).with_kappa(2.0).unwrap();
        assert!(matches!(shift_gamma_pair(&gp, 1.0, 1.0), Err(FptError::Configuration(_))));
        assert_eq!(shift_gamma_pair(&gp, 0.5, 0.5).unwrap().kappa, Some(1.0));
    }

    #[test]
    fn example1_kappa_estimate_is_close_to_analytic_bound() {
        let th = Threshold::linear(-1.0, 0.5, Orientation::AboveStart);
        let gp = make_gamma_pair(&sine_sde(1.6), &th);
        let k = estimate_kappa(&gp, 10.0, -10.0, 10.0, 2001).unwrap();
        let analytic = 2.6 + 3.88;
        assert!(k >= analytic / 1.06 && k <= analytic * 1.06, "{k}");
    }

    #[test]
    fn constant_gammas_kappa() {
        let gp = GammaPair::new(real_fn(|_| 0.7), real_fn(|_| 1.3));
        let k = estimate_kappa(&gp, 1.0, 0.0, 1.0, 2).unwrap();
        assert!((k - 1.05 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_kappa_rejects_bad_ranges() {
        let gp = GammaPair::new(real_fn(|_| 0.7), real_fn(|_| 1.3));
        assert!(estimate_kappa(&gp, 0.0, 0.0, 1.0, 10).is_err());
        assert!(estimate_kappa(&gp, 1.0, 1.0, 1.0, 10).is_err());
        assert!(estimate_kappa(&gp, 1.0, 0.0, 1.0, 1).is_err());
        let bad = GammaPair::new(real_fn(|_| 0.0), real_fn(|x: f64| 1.0 / x));
        assert!(matches!(estimate_kappa(&bad, 1.0, 0.0, 1.0, 3), Err(FptError::Domain(_))));
    }

    #[test]
    fn guard_clamps_roundoff_and_rejects_violations() {
        let gp = GammaPair::new(real_fn(|t| t), real_fn(|_| 0.0)).with_kappa(1.0).unwrap();
        assert_eq!(gp.intensity(-1e-13, 0.0).unwrap(), 0.0);
        assert!(matches!(gp.intensity(-1e-6, 0.0), Err(FptError::Assumption { .. })));
        assert!(matches!(gp.intensity(1.5, 0.0), Err(FptError::Assumption { .. })));
        assert!(matches!(gp.intensity(f64::NAN, 0.0), Err(FptError::Assumption { .. })));
        let unset = GammaPair::new(real_fn(|t| t), real_fn(|_| 0.0));
        assert!(matches!(unset.intensity(0.5, 0.0), Err(FptError::Configuration(_))));
    }

    #[test]
    fn derivative_checks_catch_wrong_inputs() {
        assert!(sine_sde(1.6).check_derivatives(-5.0, 5.0, 50).is_ok());
        let wrong = UnitDiffusionSDE::new(real_fn(|x: f64| x.sin()), real_fn(|x: f64| x.sin()), real_fn(|x: f64| -x.cos()), 0.0);
        assert!(wrong.check_derivatives(-1.0, 1.0, 10).is_err());
        let th = Threshold::exponential(1.0, 1.0, Orientation::AboveStart);
        assert!(th.check_derivative(5.0, 100).is_ok());
        let bad = Threshold::new(real_fn(|t| t * t), real_fn(|t| t), Orientation::AboveStart);
        assert!(bad.check_derivative(2.0, 10).is_err());
    }

    #[test]
    fn orientation_is_checked_against_start() {
        let th = Threshold::linear(-1.0, 0.5, Orientation::AboveStart);
        assert!(th.check_orientation(0.0).is_ok());
        assert!(th.check_orientation(1.0).is_err());
        assert!(th.reflected().check_orientation(0.0).is_ok());
    }

    #[test]
    fn shifted_linear_keeps_shape() {
        let th = Threshold::linear(-1.0, 0.5, Orientation::AboveStart).shifted(0.25, -0.1);
        assert_eq!(th.shape, ThresholdShape::Linear { slope: -1.0, intercept: 0.15 });
        assert!((th.value(0.1) - 0.05).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn gamma_sum_matches_direct_evaluation(k in -3.0..3.0f64, c in -2.0..2.0f64,
                                               a in -2.0..2.0f64, b in -2.0..2.0f64, t in 0.0..5.0f64) {
            // alpha(x) = k + c sin x, beta(t) = a t + b
            let sde = UnitDiffusionSDE::new(
                real_fn(move |x| k + c * x.sin()),
                real_fn(move |x| c * x.cos()),
                real_fn(move |x| k * x - c * x.cos()),
                0.0,
            );
            let th = Threshold::linear(a, b, Orientation::AboveStart);
            let gp = make_gamma_pair(&sde, &th);
            let x = a * t + b;
            let alpha = k + c * x.sin();
            let direct = -alpha * a + 0.5 * (c * x.cos() + alpha * alpha);
            prop_assert!((gp.gamma1(t) + gp.gamma2(x) - direct).abs() < 1e-12);
        }

        #[test]
        fn kappa_estimate_monotone_under_nested_refinement(k in 1.6..3.0f64, a in -2.0..-0.1f64, n in 2usize..40) {
            let th = Threshold::linear(a, 0.5, Orientation::AboveStart);
            let gp = make_gamma_pair(&sine_sde(k), &th);
            let coarse = estimate_kappa(&gp, 4.0, -4.0, 4.0, n).unwrap();
            let fine = estimate_kappa(&gp, 4.0, -4.0, 4.0, 2 * n - 1).unwrap();
            prop_assert!(fine >= coarse - 1e-12);
        }
    }
}
