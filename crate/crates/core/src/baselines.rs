//! Grid-based first-passage estimators used as comparison baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bm_fpt::FptDraw;
use crate::error::{FptError, Result};
use crate::model::{Orientation, Threshold, UnitDiffusionSDE};

pub const DEFAULT_GRID_HORIZON: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    ImprovedEuler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridScheme {
    pub delta: f64,
    pub horizon: f64,
    pub scheme: Scheme,
}

impl GridScheme {
    pub fn new(delta: f64, horizon: f64, scheme: Scheme) -> Result<Self> {
        if !(delta > 0.0) || !(delta <= horizon) || !horizon.is_finite() {
            return Err(FptError::Parameter(format!(
                "grid needs 0 < delta <= horizon (got {delta}, {horizon})"
            )));
        }
        Ok(Self { delta, horizon, scheme })
    }
}

/// Probability that a Brownian bridge over a step of length `dt` touches the
/// threshold, given signed gaps `d1`, `d2` at the two ends.
pub fn crossing_probability(d1: f64, d2: f64, dt: f64) -> f64 {
    if d1 <= 0.0 || d2 <= 0.0 {
        return 1.0;
    }
    (-2.0 * d1 * d2 / dt).exp()
}

fn oriented(sde: &UnitDiffusionSDE, th: &Threshold) -> (UnitDiffusionSDE, Threshold) {
    match th.orientation {
        Orientation::AboveStart => (sde.clone(), th.clone()),
        Orientation::BelowStart => (sde.reflected(), th.reflected()),
    }
}

/// Outcome of walking one Euler path.
struct Walk {
    euler: FptDraw,
    improved: FptDraw,
}

/// Walks one path until the plain scheme crosses. Normals come from `normals`,
/// bridge uniforms from `uniforms`.
fn walk<R1, R2>(
    sde: &UnitDiffusionSDE,
    th: &Threshold,
    delta: f64,
    horizon: f64,
    normals: &mut R1,
    uniforms: &mut R2,
) -> Walk
where
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    let mut x = sde.x0;
    if x >= th.value(0.0) {
        return Walk {
            euler: FptDraw::finite(0.0),
            improved: FptDraw::finite(0.0),
        };
    }
    let steps = (horizon / delta).ceil() as u64;
    let sq = delta.sqrt();
    let mut improved: Option<f64> = None;
    for i in 0..steps {
        let t0 = i as f64 * delta;
        let t1 = (i + 1) as f64 * delta;
        let z: f64 = normals.sample(StandardNormal);
        let x1 = x + (sde.alpha)(x) * delta + sq * z;
        let b1 = th.value(t1);
        if x1 >= b1 {
            let imp = improved.unwrap_or(t1);
            return Walk {
                euler: FptDraw::finite(t1),
                improved: FptDraw::finite(imp),
            };
        }
        if improved.is_none() {
            let d1 = th.value(t0) - x;
            let d2 = b1 - x1;
            let u: f64 = uniforms.random();
            if u < crossing_probability(d1, d2, delta) {
                improved = Some(0.5 * (t0 + t1));
            }
        }
        x = x1;
    }
    Walk {
        euler: FptDraw::infinite(),
        improved: improved.map_or_else(FptDraw::infinite, FptDraw::finite),
    }
}

/// Euler-Maruyama first grid time at or beyond the threshold; infinite past the horizon.
pub fn euler_fpt<R: Rng + ?Sized>(sde: &UnitDiffusionSDE, th: &Threshold, g: &GridScheme, rng: &mut R) -> FptDraw {
    let (sde, th) = oriented(sde, th);
    let mut x = sde.x0;
    if x >= th.value(0.0) {
        return FptDraw::finite(0.0);
    }
    let steps = (g.horizon / g.delta).ceil() as u64;
    let sq = g.delta.sqrt();
    for i in 0..steps {
        let t1 = (i + 1) as f64 * g.delta;
        let z: f64 = rng.sample(StandardNormal);
        x += (sde.alpha)(x) * g.delta + sq * z;
        if x >= th.value(t1) {
            return FptDraw::finite(t1);
        }
    }
    FptDraw::infinite()
}

/// Euler-Maruyama with a Brownian-bridge crossing test between grid points;
/// a bridge crossing is reported at the step midpoint.
pub fn improved_euler_fpt<R: Rng + ?Sized>(
    sde: &UnitDiffusionSDE,
    th: &Threshold,
    g: &GridScheme,
    rng: &mut R,
) -> FptDraw {
    let (sde, th) = oriented(sde, th);
    let mut x = sde.x0;
    if x >= th.value(0.0) {
        return FptDraw::finite(0.0);
    }
    let steps = (g.horizon / g.delta).ceil() as u64;
    let sq = g.delta.sqrt();
    for i in 0..steps {
        let t0 = i as f64 * g.delta;
        let t1 = (i + 1) as f64 * g.delta;
        let z: f64 = rng.sample(StandardNormal);
        let x1 = x + (sde.alpha)(x) * g.delta + sq * z;
        let b1 = th.value(t1);
        if x1 >= b1 {
            return FptDraw::finite(t1);
        }
        let u: f64 = rng.random();
        if u < crossing_probability(th.value(t0) - x, b1 - x1, g.delta) {
            return FptDraw::finite(0.5 * (t0 + t1));
        }
        x = x1;
    }
    FptDraw::infinite()
}

/// Runs the scheme named in `g`.
pub fn grid_fpt<R: Rng + ?Sized>(sde: &UnitDiffusionSDE, th: &Threshold, g: &GridScheme, rng: &mut R) -> FptDraw {
    match g.scheme {
        Scheme::Euler => euler_fpt(sde, th, g, rng),
        Scheme::ImprovedEuler => improved_euler_fpt(sde, th, g, rng),
    }
}

/// Plain and improved Euler times on one shared path. Bridge uniforms come
/// from a separate stream seeded from `rng`, so the path is the plain Euler path.
pub fn coupled_pair<R: Rng + ?Sized>(
    sde: &UnitDiffusionSDE,
    th: &Threshold,
    delta: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<(FptDraw, FptDraw)> {
    GridScheme::new(delta, horizon, Scheme::Euler)?;
    let mut uniforms = ChaCha8Rng::seed_from_u64(rng.random());
    let (sde, th) = oriented(sde, th);
    let w = walk(&sde, &th, delta, horizon, rng, &mut uniforms);
    Ok((w.euler, w.improved))
}
