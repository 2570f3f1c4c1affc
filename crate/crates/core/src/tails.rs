//! Moment generating function profiles, Chernoff upper bounds, the three-term lower
//! bound, and exponent regressions on Monte Carlo output.

use crate::error::{Error, Result};
use crate::polymer::{
    characteristic_e, log_partition, BoundaryDraw, BoundaryParams, EnvironmentSampler, ModelSpec,
};
use crate::quadrature::refine_max;
use crate::rng::{replicate, Component, SeedPath};
use crate::special::ln_gamma;
use crate::stats::{mean, ols, quantile_sorted, LinearFit, McEstimate};
use rand::seq::IndexedRandom;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

/// Estimates of `E[exp(λX)]` (and optionally `E[exp(-λX)]`) on an increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfProfile {
    pub lambdas: Vec<f64>,
    pub estimates: Vec<McEstimate>,
    /// `E[exp(-λX)]` on the same grid, when available.
    pub negative: Option<Vec<McEstimate>>,
    pub n_scale: f64,
    pub centered: bool,
}

impl MgfProfile {
    pub fn new(lambdas: Vec<f64>, estimates: Vec<McEstimate>, n_scale: f64, centered: bool) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::EmptyProfile);
        }
        if lambdas.len() != estimates.len() {
            return Err(Error::DimensionError(format!(
                "{} lambdas but {} estimates",
                lambdas.len(),
                estimates.len()
            )));
        }
        if lambdas.windows(2).any(|w| w[1] <= w[0]) || lambdas[0] < 0.0 {
            return Err(Error::GridTooCoarse("lambda grid must be nonnegative and increasing".into()));
        }
        Ok(MgfProfile {
            lambdas,
            estimates,
            negative: None,
            n_scale,
            centered,
        })
    }

    /// Profile with exactly known values `mgf(λ)`.
    pub fn analytic<F: Fn(f64) -> f64>(lambdas: Vec<f64>, mgf: F, n_scale: f64) -> Result<Self> {
        let est = lambdas.iter().map(|&l| McEstimate::exact(mgf(l))).collect();
        MgfProfile::new(lambdas, est, n_scale, true)
    }

    /// Centered profile of `X - mean(X)` from samples, both signs.
    pub fn from_samples(xs: &[f64], lambdas: Vec<f64>, n_scale: f64, seed: u64) -> Result<Self> {
        let m = mean(xs);
        let centered: Vec<f64> = xs.iter().map(|x| x - m).collect();
        let est = |sign: f64| -> Vec<McEstimate> {
            lambdas
                .iter()
                .map(|&l| {
                    let ls: Vec<f64> = centered.iter().map(|x| sign * l * x).collect();
                    McEstimate::from_log_samples(&ls, seed)
                })
                .collect()
        };
        let (pos, neg) = (est(1.0), est(-1.0));
        let mut p = MgfProfile::new(lambdas, pos, n_scale, true)?;
        p.negative = Some(neg);
        Ok(p)
    }

    /// Profile of `-X`.
    pub fn reflected(&self) -> Result<Self> {
        let neg = self.negative.clone().ok_or(Error::EmptyProfile)?;
        Ok(MgfProfile {
            lambdas: self.lambdas.clone(),
            estimates: neg,
            negative: Some(self.estimates.clone()),
            n_scale: self.n_scale,
            centered: self.centered,
        })
    }

    fn index_of(&self, lambda: f64) -> Result<usize> {
        self.lambdas
            .iter()
            .position(|&l| (l - lambda).abs() <= 1e-9 * lambda.abs().max(1e-12))
            .ok_or_else(|| Error::GridTooCoarse(format!("lambda = {lambda} is not a grid point")))
    }

    /// Conservative value `mean + 2·stderr`.
    pub fn upper_at(&self, lambda: f64) -> Result<f64> {
        Ok(self.estimates[self.index_of(lambda)?].upper(2.0))
    }

    /// Conservative value `mean - 2·stderr`.
    pub fn lower_at(&self, lambda: f64) -> Result<f64> {
        Ok(self.estimates[self.index_of(lambda)?].lower(2.0))
    }

    /// `(λ, ln mean, stderr of ln mean)` for positive λ with positive estimates.
    pub fn log_mgf(&self) -> Vec<(f64, f64, f64)> {
        self.lambdas
            .iter()
            .zip(&self.estimates)
            .filter(|(l, e)| **l > 0.0 && e.mean > 0.0)
            .map(|(&l, e)| (l, e.mean.ln(), e.stderr / e.mean))
            .collect()
    }
}

/// Geometric grid with ratio `√2` from `start` up to `limit`.
pub fn geometric_grid(start: f64, limit: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let l = start * std::f64::consts::SQRT_2.powi(k);
        if l > limit * (1.0 + 1e-12) {
            break;
        }
        out.push(l);
        k += 1;
    }
    out
}

/// `min_λ e^{-λu} · upper(λ)` over the grid.
pub fn chernoff_upper(profile: &MgfProfile, u: f64) -> Result<f64> {
    Ok(log_chernoff_upper(profile, u)?.exp())
}

/// Logarithm of [`chernoff_upper`], finite even where the bound underflows.
pub fn log_chernoff_upper(profile: &MgfProfile, u: f64) -> Result<f64> {
    let best = profile
        .lambdas
        .iter()
        .zip(&profile.estimates)
        .map(|(&l, e)| -l * u + e.upper(2.0).ln())
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::EmptyProfile)
    }
}

/// Lower bound on `P[X > u0]` from the split over `{X ≤ u0}`, `{u0 < X ≤ u1}`, `{X > u1}`:
/// `e^{-a u1} (E e^{aX} - e^{a u0} - (E e^{2aX})^{1/2} P[X > u1]^{1/2})`, with the first
/// moment at its lower confidence, the second at its upper confidence and the last
/// probability replaced by its Chernoff bound. Both `a` and `2a` must be grid points.
pub fn lower_tail_from_mgf(profile: &MgfProfile, u0: f64, u1: f64, a: f64) -> Result<f64> {
    let (sign, log_abs) = lower_tail_parts(profile, u0, u1, a)?;
    Ok(sign * log_abs.exp())
}

/// Log of the lower bound, or `None` when the bound is not positive.
pub fn log_lower_tail_from_mgf(profile: &MgfProfile, u0: f64, u1: f64, a: f64) -> Result<Option<f64>> {
    let (sign, log_abs) = lower_tail_parts(profile, u0, u1, a)?;
    Ok((sign > 0.0).then_some(log_abs))
}

fn lower_tail_parts(profile: &MgfProfile, u0: f64, u1: f64, a: f64) -> Result<(f64, f64)> {
    if !(u0 > 0.0 && u1 > u0 && a > 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "need 0 < u0 < u1 and a > 0 (u0={u0}, u1={u1}, a={a})"
        )));
    }
    let m1 = profile.lower_at(a)?;
    let lm2 = profile.upper_at(2.0 * a)?.ln();
    if !m1.is_finite() || !lm2.is_finite() {
        return Err(Error::PreconditionViolated(format!("MGF not finite at a = {a}")));
    }
    let lt = log_chernoff_upper(profile, u1)?.min(0.0);
    let others = [a * u0, 0.5 * (lm2 + lt)];
    let top = others[0].max(others[1]);
    let log_sub = top + others.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
    if m1 <= 0.0 {
        return Ok((-1.0, -a * u1 + log_sub));
    }
    let lm1 = m1.ln();
    let (sign, log_abs) = if lm1 > log_sub {
        (1.0, lm1 + (-(log_sub - lm1).exp()).ln_1p())
    } else {
        (-1.0, log_sub + (-(lm1 - log_sub).exp()).ln_1p())
    };
    Ok((sign, -a * u1 + log_abs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerTailPoint {
    pub u0: f64,
    pub u1: f64,
    pub a: f64,
    pub bound: f64,
    /// `ln bound` when positive.
    pub log_bound: Option<f64>,
}

/// Evaluates the lower bound at `a = λ` for each grid λ with `2λ` also on the grid,
/// with `u0 = N (a/C')²` and `u1 = C'' u0`.
pub fn lower_tail_window(profile: &MgfProfile, c_prime: f64, c_dprime: f64) -> Vec<LowerTailPoint> {
    profile
        .lambdas
        .iter()
        .filter(|&&l| l > 0.0 && profile.index_of(2.0 * l).is_ok())
        .filter_map(|&a| {
            let u0 = profile.n_scale * (a / c_prime).powi(2);
            let u1 = c_dprime * u0;
            let bound = lower_tail_from_mgf(profile, u0, u1, a).ok()?;
            let log_bound = log_lower_tail_from_mgf(profile, u0, u1, a).ok()?;
            Some(LowerTailPoint {
                u0,
                u1,
                a,
                bound,
                log_bound,
            })
        })
        .collect()
}

/// Empirical tail probabilities on `u = s N^{1/3}` with the matching Chernoff bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub s: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub empirical: Vec<f64>,
    pub stderr: Vec<f64>,
    pub chernoff: Vec<f64>,
    pub replicas: usize,
}

impl TailCurve {
    /// `xs` must already be centered.
    pub fn from_centered(xs: &[f64], s_grid: &[f64], profile: &MgfProfile) -> Result<Self> {
        let scale = profile.n_scale.cbrt();
        let n = xs.len() as f64;
        let mut out = TailCurve {
            s: s_grid.to_vec(),
            thresholds: Vec::new(),
            empirical: Vec::new(),
            stderr: Vec::new(),
            chernoff: Vec::new(),
            replicas: xs.len(),
        };
        for &s in s_grid {
            let u = s * scale;
            let p = xs.iter().filter(|&&x| x >= u).count() as f64 / n;
            out.thresholds.push(u);
            out.empirical.push(p);
            out.stderr.push((p * (1.0 - p) / n).sqrt());
            out.chernoff.push(if u > 0.0 { chernoff_upper(profile, u)? } else { 1.0 });
        }
        Ok(out)
    }

    /// Grid points where the empirical tail exceeds the bound by more than `k` binomial
    /// standard errors (using `1/n` in place of a zero frequency).
    pub fn violations(&self, k: f64) -> Vec<usize> {
        let floor = (1.0 / self.replicas as f64).sqrt() / (self.replicas as f64).sqrt();
        (0..self.s.len())
            .filter(|&i| self.empirical[i] > self.chernoff[i] + k * self.stderr[i].max(floor))
            .collect()
    }
}

fn check_window(spec: ModelSpec, params: BoundaryParams, m: usize, n: usize, big_n: f64, window: f64) -> Result<()> {
    if !spec.is_stationary(&params) {
        return Err(Error::PreconditionViolated("profile needs a + b = a3".into()));
    }
    let e = characteristic_e(spec, params, m as f64, n as f64)?;
    if e.abs() > window * big_n.powf(2.0 / 3.0) {
        return Err(Error::PreconditionViolated(format!(
            "|e| = {} exceeds A N^(2/3) = {}",
            e.abs(),
            window * big_n.powf(2.0 / 3.0)
        )));
    }
    Ok(())
}

/// `ln Z_{m,n}` for independent stationary environments.
pub fn log_z_samples(
    spec: ModelSpec,
    params: BoundaryParams,
    m: usize,
    n: usize,
    replicas: usize,
    path: &SeedPath,
) -> Result<Vec<f64>> {
    let sampler = EnvironmentSampler::new(spec, params, BoundaryDraw::Direct)?;
    replicate(replicas, |r| -> Result<f64> {
        Ok(log_partition(&sampler.sample(m, n, path, r)?).log_z_mn())
    })
    .into_iter()
    .collect()
}

/// Centered MGF profile of `ln Z`, the mean taken from the same replicas.
#[allow(clippy::too_many_arguments)]
pub fn mgf_profile_mc(
    spec: ModelSpec,
    params: BoundaryParams,
    m: usize,
    n: usize,
    big_n: f64,
    window: f64,
    lambdas: Vec<f64>,
    replicas: usize,
    path: &SeedPath,
) -> Result<MgfProfile> {
    check_window(spec, params, m, n, big_n, window)?;
    let xs = log_z_samples(spec, params, m, n, replicas, path)?;
    MgfProfile::from_samples(&xs, lambdas, big_n, path.master)
}

/// Tail curve of `ln Z - E ln Z` together with the profile used for its Chernoff bounds.
#[allow(clippy::too_many_arguments)]
pub fn tail_curve_mc(
    spec: ModelSpec,
    params: BoundaryParams,
    m: usize,
    n: usize,
    big_n: f64,
    window: f64,
    s_grid: &[f64],
    lambdas: Vec<f64>,
    replicas: usize,
    path: &SeedPath,
) -> Result<(TailCurve, MgfProfile, Vec<f64>)> {
    check_window(spec, params, m, n, big_n, window)?;
    let xs = log_z_samples(spec, params, m, n, replicas, path)?;
    let mu = mean(&xs);
    let centered: Vec<f64> = xs.iter().map(|x| x - mu).collect();
    let profile = MgfProfile::from_samples(&xs, lambdas, big_n, path.master)?;
    let curve = TailCurve::from_centered(&centered, s_grid, &profile)?;
    Ok((curve, profile, centered))
}

/// Regression of `ln ln MGF` on `ln λ` restricted to `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub fit: LinearFit,
    pub ci: (f64, f64),
    pub points: usize,
}

pub fn cubic_slope(profile: &MgfProfile, lo: f64, hi: f64) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = profile
        .log_mgf()
        .into_iter()
        .filter(|(l, lm, _)| *l >= lo * (1.0 - 1e-9) && *l <= hi * (1.0 + 1e-9) && *lm > 0.0)
        .map(|(l, lm, _)| (l.ln(), lm.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::GridTooCoarse(format!(
            "{} usable points in [{lo}, {hi}]",
            pts.len()
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let fit = ols(&x, &y);
    Ok(SlopeFit {
        fit,
        ci: (fit.slope - 1.96 * fit.slope_stderr, fit.slope + 1.96 * fit.slope_stderr),
        points: x.len(),
    })
}

/// Least-squares fit of `y = α + c s^κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub alpha: f64,
    pub c: f64,
    pub kappa: f64,
    pub rss: f64,
}

fn fit_at(s: &[f64], y: &[f64], kappa: f64) -> PowerFit {
    let x: Vec<f64> = s.iter().map(|v| v.powf(kappa)).collect();
    let f = ols(&x, y);
    let rss = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - f.intercept - f.slope * a).powi(2))
        .sum();
    PowerFit {
        alpha: f.intercept,
        c: f.slope,
        kappa,
        rss,
    }
}

/// Profiles the linear parameters out and minimises the residual over `κ ∈ [0.2, 6]`.
pub fn fit_power(s: &[f64], y: &[f64]) -> Result<PowerFit> {
    if s.len() < 3 || s.len() != y.len() || s.iter().any(|&v| v <= 0.0) {
        return Err(Error::GridTooCoarse("power fit needs three or more positive abscissae".into()));
    }
    let grid: Vec<f64> = (0..=116).map(|k| 0.2 + 0.05 * k as f64).collect();
    let (mut best, mut best_rss) = (grid[0], f64::INFINITY);
    for &k in &grid {
        let r = fit_at(s, y, k).rss;
        if r < best_rss {
            best = k;
            best_rss = r;
        }
    }
    let kappa = refine_max(&|k: f64| -fit_at(s, y, k).rss, (best - 0.05).max(0.2), (best + 0.05).min(6.0), 60);
    Ok(fit_at(s, y, kappa))
}

/// Tail exponent fitted on `-ln P[X ≥ s N^{1/3}]` with a percentile bootstrap interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailExponent {
    pub fit: PowerFit,
    pub ci: (f64, f64),
    pub s_window: Vec<f64>,
    pub resamples: usize,
}

fn tail_points(xs: &[f64], scale: f64, s_grid: &[f64], min_count: usize) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len() as f64;
    s_grid
        .iter()
        .filter(|&&s| s > 0.0)
        .filter_map(|&s| {
            let c = xs.iter().filter(|&&x| x >= s * scale).count();
            (c >= min_count && (c as f64) < n).then(|| (s, -(c as f64 / n).ln()))
        })
        .unzip()
}

/// `xs` centered samples; the window is every positive `s` with at least `min_count`
/// exceedances.
pub fn tail_exponent_fit(
    xs: &[f64],
    n_scale: f64,
    s_grid: &[f64],
    min_count: usize,
    resamples: usize,
    path: &SeedPath,
) -> Result<TailExponent> {
    let scale = n_scale.cbrt();
    let (s, y) = tail_points(xs, scale, s_grid, min_count);
    let fit = fit_power(&s, &y)?;
    let kappas: Vec<f64> = replicate(resamples, |r| {
        let mut rng = path.rng(r, Component::Auxiliary);
        let boot: Vec<f64> = (0..xs.len()).map(|_| *xs.choose(&mut rng).expect("nonempty")).collect();
        let m = mean(&boot);
        let c: Vec<f64> = boot.iter().map(|x| x - m).collect();
        let ys: Vec<f64> = s
            .iter()
            .map(|&v| {
                let k = c.iter().filter(|&&x| x >= v * scale).count().max(1);
                -(k as f64 / c.len() as f64).ln()
            })
            .collect();
        fit_power(&s, &ys).map(|f| f.kappa).unwrap_or(f64::NAN)
    });
    let mut ks: Vec<f64> = kappas.into_iter().filter(|k| k.is_finite()).collect();
    ks.sort_by(|a, b| a.total_cmp(b));
    let ci = if ks.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (quantile_sorted(&ks, 0.025), quantile_sorted(&ks, 0.975))
    };
    Ok(TailExponent {
        fit,
        ci,
        s_window: s,
        resamples: ks.len(),
    })
}

/// Exact cubic profile `e^{c N λ³}`.
pub fn synthetic_cubic_profile(lambdas: Vec<f64>, n_scale: f64, c: f64) -> Result<MgfProfile> {
    MgfProfile::analytic(lambdas, |l| (c * n_scale * l.powi(3)).exp(), n_scale)
}

/// Samples of `N^{1/3}(Y - E Y)` with `Y = G^{2/3}`, `G ~ Gamma(2/3)`, so that `Y` has
/// density proportional to `e^{-y^{3/2}}` and the tail of the scaled variable decays
/// like `exp(-u^{3/2} N^{-1/2})`.
pub fn matched_synthetic_samples(n_scale: f64, count: usize, path: &SeedPath) -> Vec<f64> {
    let ey = (ln_gamma(4.0 / 3.0) - ln_gamma(2.0 / 3.0)).exp();
    let g: Gamma<f64> = Gamma::new(2.0 / 3.0, 1.0).expect("valid shape");
    let scale = n_scale.cbrt();
    let mut rng = path.rng(0, Component::Auxiliary);
    (0..count)
        .map(|_| scale * (g.sample(&mut rng).powf(2.0 / 3.0) - ey))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fine_grid(hi: f64, step: f64) -> Vec<f64> {
        (1..=(hi / step).round() as usize).map(|k| k as f64 * step).collect()
    }

    #[test]
    fn normal_profile() {
        let p = MgfProfile::analytic(fine_grid(5.0, 1e-3), |l| (0.5 * l * l).exp(), 1.0).unwrap();
        assert!((chernoff_upper(&p, 2.0).unwrap() - 0.135_335_3).abs() < 1e-6);
        for u in [0.5, 1.0, 3.0] {
            assert!((chernoff_upper(&p, u).unwrap() - (-0.5 * u * u).exp()).abs() < 1e-6);
        }
        assert!(chernoff_upper(&p, 0.0).unwrap() >= 1.0);
    }

    #[test]
    fn refinement_only_decreases() {
        let coarse = MgfProfile::analytic(fine_grid(4.0, 0.5), |l| (0.5 * l * l).exp(), 1.0).unwrap();
        let fine = MgfProfile::analytic(fine_grid(4.0, 0.25), |l| (0.5 * l * l).exp(), 1.0).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..30 {
            let u = 0.1 * k as f64;
            let c = chernoff_upper(&coarse, u).unwrap();
            assert!(chernoff_upper(&fine, u).unwrap() <= c);
            assert!(c <= last);
            last = c;
        }
    }

    #[test]
    fn cubic_profile_gives_three_halves() {
        let n = 64.0;
        let p = MgfProfile::analytic(fine_grid(2.0, 1e-4), |l| 2.0 * (2.0 * n * l.powi(3)).exp(), n).unwrap();
        let s: Vec<f64> = (1..=12).map(|k| 0.5 * k as f64).collect();
        let y: Vec<f64> = s
            .iter()
            .map(|&v| -chernoff_upper(&p, v * n.cbrt()).unwrap().ln())
            .collect();
        let f = fit_power(&s, &y).unwrap();
        assert!((f.kappa - 1.5).abs() < 0.1, "{f:?}");
    }

    #[test]
    fn empty_and_misaligned() {
        assert!(matches!(MgfProfile::new(vec![], vec![], 1.0, true), Err(Error::EmptyProfile)));
        let p = synthetic_cubic_profile(geometric_grid(0.025, 1.0), 8.0, 1.0).unwrap();
        assert!(matches!(lower_tail_from_mgf(&p, 0.1, 0.4, 0.03), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn lower_bound_vacuous_far_out() {
        let p = synthetic_cubic_profile(geometric_grid(0.025, 2.0), 8.0, 1.0).unwrap();
        let a = p.lambdas[2];
        assert!(lower_tail_from_mgf(&p, 1e3, 4e3, a).unwrap() <= 0.0);
    }

    #[test]
    fn lower_bound_window_and_exponent() {
        let n = 8.0;
        let grid: Vec<f64> = (0..60).map(|k| 0.025 * 2f64.powf(k as f64 / 4.0)).collect();
        let p = synthetic_cubic_profile(grid, n, 1.0).unwrap();
        let pts = lower_tail_window(&p, 2.0, 36.0);
        let pos: Vec<_> = pts.iter().filter(|q| q.log_bound.is_some()).collect();
        assert!(pos.len() >= 5);
        let deep: Vec<_> = pos.iter().filter(|q| q.u0.powf(1.5) / n.sqrt() >= 0.5).collect();
        let s: Vec<f64> = deep.iter().map(|q| q.u0).collect();
        let y: Vec<f64> = deep.iter().map(|q| -q.log_bound.unwrap()).collect();
        let f = fit_power(&s, &y).unwrap();
        assert!((f.kappa - 1.5).abs() < 0.15, "{f:?}");
    }

    #[test]
    fn power_fit_recovers_exponent() {
        let s: Vec<f64> = (1..=8).map(|k| 0.25 * k as f64).collect();
        let y: Vec<f64> = s.iter().map(|v| 0.3 + 1.7 * v.powf(1.5)).collect();
        let f = fit_power(&s, &y).unwrap();
        assert!((f.kappa - 1.5).abs() < 1e-4 && (f.c - 1.7).abs() < 1e-3);
    }

    #[test]
    fn matched_synthetic_is_centered() {
        let xs = matched_synthetic_samples(8.0, 200_000, &SeedPath::new(1, "syn"));
        assert!(mean(&xs).abs() < 0.01);
    }
}
