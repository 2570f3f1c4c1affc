//! Monte Carlo estimates, Kolmogorov–Smirnov tests and small regressions.

use serde::{Deserialize, Serialize};

/// Deterministic pairwise summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicas: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64], seed: u64) -> Self {
        assert!(xs.len() >= 2, "need at least two replicas");
        McEstimate {
            mean: mean(xs),
            stderr: (variance(xs) / xs.len() as f64).sqrt(),
            replicas: xs.len(),
            seed,
        }
    }

    /// A known value carried through the same interface (zero error, no replicas).
    pub fn exact(value: f64) -> Self {
        McEstimate {
            mean: value,
            stderr: 0.0,
            replicas: 0,
            seed: 0,
        }
    }

    /// Estimate of `E[exp(L)]` from samples of `L`, shifted by the maximum before
    /// exponentiating. All-zero input gives mean 1 and stderr 0 exactly.
    pub fn from_log_samples(ls: &[f64], seed: u64) -> Self {
        let shift = ls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = ls.iter().map(|l| (l - shift).exp()).collect();
        let e = McEstimate::from_samples(&scaled, seed);
        let k = shift.exp();
        McEstimate {
            mean: e.mean * k,
            stderr: e.stderr * k,
            ..e
        }
    }

    /// `(mean - exact)/stderr`; zero when both the deviation and stderr vanish.
    pub fn zscore(&self, exact: f64) -> f64 {
        let d = self.mean - exact;
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }

    pub fn upper(&self, k: f64) -> f64 {
        self.mean + k * self.stderr
    }

    pub fn lower(&self, k: f64) -> f64 {
        self.mean - k * self.stderr
    }
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // Series in the other representation converges fast for small x.
        let t = -std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let mut s = 0.0;
        for k in 0..20 {
            let j = (2 * k + 1) as f64;
            s += (t * j * j).exp();
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / x * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

fn ks_p(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    KsResult {
        statistic: d,
        p_value: ks_p(d, n),
        n: xs.len(),
    }
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    KsResult {
        statistic: d,
        p_value: ks_p(d, ne),
        n: n.min(m),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub residual_sd: f64,
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn ols(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let dof = (n - 2.0).max(1.0);
    let residual_sd = (rss / dof).sqrt();
    LinearFit {
        slope,
        intercept,
        slope_stderr: residual_sd / sxx.sqrt(),
        residual_sd,
    }
}

/// Empirical quantile with linear interpolation on sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.1).collect();
        assert!((pairwise_sum(&xs) - 49950.0).abs() < 1e-9);
    }

    #[test]
    fn exp_average_guard() {
        let e = McEstimate::from_log_samples(&[0.0; 10], 1);
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.zscore(1.0), 0.0);
        let big = McEstimate::from_log_samples(&[700.0, 701.0], 1);
        assert!(big.mean.is_finite());
    }

    #[test]
    fn kolmogorov_reference_values() {
        // scipy.special.kolmogorov
        assert!((kolmogorov_sf(1.0) - 0.269_999_671_677_354_6).abs() < 1e-12);
        assert!((kolmogorov_sf(0.5) - 0.963_945_243_664_875_1).abs() < 1e-12);
        assert!((kolmogorov_sf(0.25) - 0.999_999_973_176_189_9).abs() < 1e-12);
        assert!((kolmogorov_sf(2.0) - 0.000_670_925_255_779_695_3).abs() < 1e-14);
    }

    #[test]
    fn ks_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let r = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0));
        assert!(r.p_value > 1e-3);
        let shifted: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!(ks_one_sample(&shifted, |x| x.clamp(0.0, 1.0)).p_value < 1e-6);
        let ys: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_two_sample(&xs, &ys).p_value > 1e-3);
        assert!(ks_two_sample(&shifted, &ys).p_value < 1e-6);
    }

    #[test]
    fn ols_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = ols(&x, &y);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
    }
}
