//! Running statistics, log-log slope fitting, and the couple of special
//! functions the samplers and distribution tests need.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("slope fit needs at least 4 levels, got {0}")]
    TooFewLevels(usize),
    #[error("slope fit needs positive levels and errors (log-log axes)")]
    NonPositiveData,
}

/// Welford accumulator for mean and standard error.
#[derive(Debug, Clone, Default)]
pub struct MeanVar {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn var(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        self.m2 / (self.n - 1) as f64
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        (self.var() / self.n as f64).sqrt()
    }
}

/// Ordinary least-squares fit of `log(error)` against `log(level)`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
}

pub fn fit_slope(levels: &[f64], errors: &[f64]) -> Result<SlopeFit, FitError> {
    assert_eq!(levels.len(), errors.len());
    if levels.len() < 4 {
        return Err(FitError::TooFewLevels(levels.len()));
    }
    if levels.iter().chain(errors).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(FitError::NonPositiveData);
    }
    let xs: Vec<f64> = levels.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: (ss_res / n).sqrt(),
    })
}

/// Gamma function by the Lanczos approximation (g = 7, n = 9 coefficients),
/// accurate to ~15 significant digits on the positive axis; the reflection
/// formula covers the rest.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = C[0];
        for (i, &c) in C.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        let t = x + G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// Standard normal CDF via the Abramowitz–Stegun rational approximation of
/// erf (absolute error < 1.5e−7 — far below any KS critical value used here).
pub fn normal_cdf(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.327_591_1 * z.abs());
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    let erf_abs = 1.0 - poly * (-z * z).exp();
    let erf = if z >= 0.0 { erf_abs } else { -erf_abs };
    0.5 * (1.0 + erf)
}

/// One-sample Kolmogorov–Smirnov distance of `data` against the CDF `f`.
pub fn ks_distance(data: &mut [f64], f: impl Fn(f64) -> f64) -> f64 {
    data.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = data.len() as f64;
    data.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = f(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_power_law_recovered() {
        let levels = [0.1, 0.05, 0.025, 0.0125];
        let errors: Vec<f64> = levels.iter().map(|h| 3.0 * h * h).collect();
        let fit = fit_slope(&levels, &errors).unwrap();
        assert_relative_eq!(fit.slope, 2.0, epsilon = 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn noisy_power_law_within_tolerance() {
        // 1% multiplicative perturbation with alternating sign.
        let levels: [f64; 5] = [0.1, 0.05, 0.025, 0.0125, 0.00625];
        let errors: Vec<f64> = levels
            .iter()
            .enumerate()
            .map(|(i, h)| h.powf(1.5) * if i % 2 == 0 { 1.01 } else { 0.99 })
            .collect();
        let fit = fit_slope(&levels, &errors).unwrap();
        assert!((fit.slope - 1.5).abs() < 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn too_few_levels_is_an_error() {
        assert!(fit_slope(&[1.0, 0.5, 0.25], &[1.0, 0.5, 0.25]).is_err());
    }

    #[test]
    fn gamma_matches_known_values() {
        assert_relative_eq!(gamma(1.0), 1.0, epsilon = 1e-13);
        assert_relative_eq!(gamma(5.0), 24.0, epsilon = 1e-12);
        assert_relative_eq!(gamma(0.5), std::f64::consts::PI.sqrt(), epsilon = 1e-13);
        // Γ(1/4) (used by the α = 1.5 subordinator rate constant).
        assert_relative_eq!(gamma(0.25), 3.625_609_908_221_908_3, epsilon = 1e-12);
    }

    #[test]
    fn normal_cdf_symmetry_and_tails() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-7);
        assert_relative_eq!(normal_cdf(1.96) + normal_cdf(-1.96), 1.0, epsilon = 1e-7);
        assert!((normal_cdf(1.0) - 0.841_344_746).abs() < 1e-6);
    }

    #[test]
    fn welford_matches_direct_computation() {
        let data = [1.0, 2.0, 4.0, 8.0];
        let mut acc = MeanVar::new();
        for &x in &data {
            acc.push(x);
        }
        assert_relative_eq!(acc.mean(), 3.75);
        assert_relative_eq!(acc.var(), 9.583333333333334, epsilon = 1e-12);
    }
}
