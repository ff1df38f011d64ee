//! Kolmogorov-Smirnov tests, moment summaries and kernel density curves.

use serde::Serialize;

use crate::error::{FptError, Result};

/// A KS statistic with its asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Sample summary with the unbiased variance (zero for a single point).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

impl SummaryStats {
    pub fn from_sample(xs: &[f64]) -> Result<Self> {
        check_sample(xs)?;
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            n,
            mean: mean.clamp(min, max),
            variance,
            min,
            max,
        })
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }
}

fn check_sample(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(FptError::Parameter("sample is empty".into()));
    }
    if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
        return Err(FptError::Data(format!("sample contains non-finite value {x}")));
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K <= lambda) = sqrt(2 pi)/lambda * sum exp(-(2j-1)^2 pi^2 / (8 lambda^2))
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for j in 1..=100 {
            let k = (2 * j - 1) as f64;
            let term = (-k * k * c).exp();
            cdf += term;
            if term < 1e-12 {
                break;
            }
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for j in 1..=100 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            sum += if j % 2 == 1 { term } else { -term };
            if term < 1e-12 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Two-sample KS test. Inputs need not be sorted.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsResult> {
    check_sample(xs)?;
    check_sample(ys)?;
    let (a, b) = (sorted(xs), sorted(ys));
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(n_eff.sqrt() * d),
    })
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<KsResult> {
    check_sample(xs)?;
    let a = sorted(xs);
    let n = a.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in a.iter().enumerate() {
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(FptError::Data(format!("cdf({x}) = {f} is outside [0, 1]")));
        }
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(n.sqrt() * d),
    })
}

/// `(mean(approx) - mean(exact), var(approx) - var(exact))`.
pub fn moment_bias(approx: &[f64], exact: &[f64]) -> Result<(f64, f64)> {
    let a = SummaryStats::from_sample(approx)?;
    let e = SummaryStats::from_sample(exact)?;
    Ok((a.mean - e.mean, a.variance - e.variance))
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Rule-of-thumb bandwidth `0.9 min(sd, IQR/1.34) n^(-1/5)`.
pub fn silverman_bandwidth(xs: &[f64]) -> Result<f64> {
    let s = SummaryStats::from_sample(xs)?;
    let v = sorted(xs);
    let iqr = quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25);
    let sd = s.variance.sqrt();
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 0.0,
    };
    Ok(0.9 * spread * (v.len() as f64).powf(-0.2))
}

/// Evenly spaced grid covering the data plus three bandwidths on each side.
pub fn density_grid(xs: &[f64], bandwidth: f64, points: usize) -> Result<Vec<f64>> {
    let s = SummaryStats::from_sample(xs)?;
    Ok(crate::numerics::linspace(
        s.min - 3.0 * bandwidth,
        s.max + 3.0 * bandwidth,
        points.max(2),
    ))
}

/// Gaussian kernel density estimate evaluated on `grid`, rescaled to unit
/// trapezoid mass over the grid.
pub fn density_curve(xs: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Result<Vec<(f64, f64)>> {
    check_sample(xs)?;
    if grid.is_empty() {
        return Err(FptError::Parameter("density grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(FptError::Parameter("density grid must be sorted".into()));
    }
    let mut h = match bandwidth {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(FptError::Parameter(format!("bandwidth must be positive, got {h}"))),
        None => silverman_bandwidth(xs)?,
    };
    if h == 0.0 {
        h = if grid.len() > 1 {
            (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64
        } else {
            1.0
        };
        if h == 0.0 {
            h = 1.0;
        }
    }
    let norm = 1.0 / (xs.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut dens: Vec<f64> = grid
        .iter()
        .map(|&g| {
            xs.iter()
                .map(|&x| {
                    let z = (g - x) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    let mass: f64 = grid
        .windows(2)
        .zip(dens.windows(2))
        .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
        .sum();
    if mass > 0.0 {
        dens.iter_mut().for_each(|d| *d /= mass);
    }
    Ok(grid.iter().copied().zip(dens).collect())
}
