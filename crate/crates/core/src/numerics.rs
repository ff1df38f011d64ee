//! Small deterministic numerical kernels: adaptive quadrature and bracketed root finding.

use crate::error::{FptError, Result};

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Integrating "backwards" (`b < a`) returns the negated integral.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate(f, b, a, tol);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Solves `f(x) = target` for a strictly increasing `f`, starting from a guess.
///
/// The bracket is grown geometrically around `guess`, then refined with an
/// Illinois-style secant step that falls back to bisection.
pub fn solve_increasing<F: Fn(f64) -> f64>(f: &F, target: f64, guess: f64, tol: f64) -> Result<f64> {
    let g = |x: f64| f(x) - target;
    let g0 = g(guess);
    if !g0.is_finite() {
        return Err(FptError::Inversion(format!("non-finite value at guess {guess}")));
    }
    if g0 == 0.0 {
        return Ok(guess);
    }
    let mut step = 1.0_f64.max(guess.abs() * 0.1);
    let (mut lo, mut hi) = (guess, guess);
    let (mut glo, mut ghi) = (g0, g0);
    let mut evaluations = 0;
    // Grow the bracket geometrically; a non-finite value (outside the domain of
    // `f`) halves the step instead.
    while !(glo <= 0.0 && ghi >= 0.0) {
        if evaluations > 400 || step < tol {
            return Err(FptError::Inversion(format!(
                "could not bracket target {target} from guess {guess}"
            )));
        }
        evaluations += 1;
        let cand = if g0 > 0.0 { lo - step } else { hi + step };
        let gc = g(cand);
        if !gc.is_finite() {
            step *= 0.5;
            continue;
        }
        if g0 > 0.0 {
            hi = lo;
            ghi = glo;
            lo = cand;
            glo = gc;
        } else {
            lo = hi;
            glo = ghi;
            hi = cand;
            ghi = gc;
        }
        step *= 2.0;
    }

    let mut side = 0i8;
    for _ in 0..400 {
        if (hi - lo).abs() <= tol * (1.0 + lo.abs().max(hi.abs())) {
            return Ok(0.5 * (lo + hi));
        }
        let mut x = (lo * ghi - hi * glo) / (ghi - glo);
        if !x.is_finite() || x <= lo || x >= hi {
            x = 0.5 * (lo + hi);
        }
        let gx = g(x);
        if gx == 0.0 {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
            glo = gx;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            ghi = gx;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
    }
    Err(FptError::Inversion(format!(
        "root finder did not converge for target {target}"
    )))
}

/// Evenly spaced grid with `n` points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { hi } else { lo + h * i as f64 }).collect()
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let v = integrate(&|x: f64| 3.0 * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 8.0).abs() < 1e-12);
        let back = integrate(&|x: f64| 3.0 * x * x, 2.0, 0.0, 1e-12);
        assert!((back + 8.0).abs() < 1e-12);
    }

    #[test]
    fn integrates_reciprocal_to_log() {
        let v = integrate(&|z: f64| 1.0 / z, 1.0, 5.0, 1e-11);
        assert!((v - 5.0_f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn inverts_monotone_function() {
        let x = solve_increasing(&|y: f64| y.powi(3) + y, 10.0, 0.0, 1e-14).unwrap();
        assert!((x.powi(3) + x - 10.0).abs() < 1e-10);
        assert!((x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bracket_failure_is_reported() {
        let r = solve_increasing(&|y: f64| y.atan(), 5.0, 0.0, 1e-12);
        assert!(matches!(r, Err(FptError::Inversion(_))));
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(-1.0) - 0.158_655_253_931_457_07).abs() < 1e-15);
        assert!((normal_cdf(1.96) - 0.975_002_104_851_779_5).abs() < 1e-15);
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(-1.0, 1.0, 5);
        assert_eq!(g, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }
}
