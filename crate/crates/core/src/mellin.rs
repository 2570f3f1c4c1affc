//! Mellin-transform weight families `ρ_{f,a}(x) = x^{a-1} f(x) / M_f(a)`.
//!
//! Everything is computed on the log scale `y = ln x`, where the density is
//! proportional to `exp(a*y) f(exp(y))`. Normalisers, cumulants, CDF and inverse
//! CDF come from a [`TabulatedLaw`] built once at construction.

use crate::error::{Error, Result};
use crate::law::TabulatedLaw;
use crate::quadrature;
use crate::special::{ln_gamma, polygamma};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// One of the five weight functions `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightFamily {
    /// `exp(-β/x)`
    InvExp { beta: f64 },
    /// `exp(-βx)`
    Exp { beta: f64 },
    /// `(1-x)^{β-1}` on `0 < x < 1`
    BetaKernel { beta: f64 },
    /// `(1-1/x)^{p-1}` on `x > 1`
    InvBetaKernel { p: f64 },
    /// `(x/(x+1))^{c}`
    Ratio { c: f64 },
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0)
        .expect("gamma shape validated by the caller")
        .sample(rng)
}

impl WeightFamily {
    pub fn name(&self) -> &'static str {
        match self {
            WeightFamily::InvExp { .. } => "InvExp",
            WeightFamily::Exp { .. } => "Exp",
            WeightFamily::BetaKernel { .. } => "BetaKernel",
            WeightFamily::InvBetaKernel { .. } => "InvBetaKernel",
            WeightFamily::Ratio { .. } => "Ratio",
        }
    }

    fn parameter(&self) -> f64 {
        match *self {
            WeightFamily::InvExp { beta }
            | WeightFamily::Exp { beta }
            | WeightFamily::BetaKernel { beta } => beta,
            WeightFamily::InvBetaKernel { p } => p,
            WeightFamily::Ratio { c } => c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.parameter();
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::out_of_domain("family parameter", v, "(0, inf)"))
        }
    }

    /// Open interval `D(M_f)` of admissible `a`.
    pub fn domain(&self) -> (f64, f64) {
        match *self {
            WeightFamily::InvExp { .. } | WeightFamily::InvBetaKernel { .. } => {
                (f64::NEG_INFINITY, 0.0)
            }
            WeightFamily::Exp { .. } | WeightFamily::BetaKernel { .. } => (0.0, f64::INFINITY),
            WeightFamily::Ratio { c } => (-c, 0.0),
        }
    }

    pub fn in_domain(&self, a: f64) -> bool {
        let (lo, hi) = self.domain();
        a > lo && a < hi
    }

    pub fn check_domain(&self, a: f64) -> Result<()> {
        self.validate()?;
        if self.in_domain(a) {
            Ok(())
        } else {
            let (lo, hi) = self.domain();
            Err(Error::out_of_domain("a", a, format!("({lo}, {hi}) for {}", self.name())))
        }
    }

    /// `f(x)`; zero off the support.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            WeightFamily::InvExp { beta } => (-beta / x).exp(),
            WeightFamily::Exp { beta } => (-beta * x).exp(),
            WeightFamily::BetaKernel { beta } => {
                if x < 1.0 {
                    (1.0 - x).powf(beta - 1.0)
                } else {
                    0.0
                }
            }
            WeightFamily::InvBetaKernel { p } => {
                if x > 1.0 {
                    (1.0 - 1.0 / x).powf(p - 1.0)
                } else {
                    0.0
                }
            }
            WeightFamily::Ratio { c } => (x / (x + 1.0)).powf(c),
        }
    }

    /// Support of `ln X` as an open interval.
    pub fn log_support(&self) -> (f64, f64) {
        match self {
            WeightFamily::BetaKernel { .. } => (f64::NEG_INFINITY, 0.0),
            WeightFamily::InvBetaKernel { .. } => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// `ln f(e^y)`.
    pub fn log_kernel(&self, y: f64) -> f64 {
        match *self {
            WeightFamily::InvExp { beta } => -beta * (-y).exp(),
            WeightFamily::Exp { beta } => -beta * y.exp(),
            WeightFamily::BetaKernel { beta } => {
                if y < 0.0 {
                    (beta - 1.0) * (-y.exp_m1()).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            WeightFamily::InvBetaKernel { p } => {
                if y > 0.0 {
                    (p - 1.0) * (-(-y).exp_m1()).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            WeightFamily::Ratio { c } => -c * softplus(-y),
        }
    }

    /// Interior point at or near the maximiser of `a*y + ln f(e^y)`.
    fn mode_hint(&self, a: f64) -> f64 {
        match *self {
            WeightFamily::InvExp { beta } => -(-a / beta).ln(),
            WeightFamily::Exp { beta } => (a / beta).ln(),
            WeightFamily::BetaKernel { beta } => {
                if beta > 1.0 {
                    (a / (a + beta - 1.0)).ln()
                } else {
                    (a / (a + 1.0)).ln()
                }
            }
            WeightFamily::InvBetaKernel { p } => {
                if p > 1.0 {
                    ((p - 1.0) / -a).ln_1p()
                } else {
                    (1.0 / -a).ln_1p()
                }
            }
            WeightFamily::Ratio { c } => (-c / a - 1.0).ln(),
        }
    }

    /// Exact draw of `ln X` for `X ~ ρ_{f,a}` from gamma variates.
    pub fn sample_log_direct<R: Rng + ?Sized>(&self, a: f64, rng: &mut R) -> f64 {
        match *self {
            WeightFamily::InvExp { beta } => beta.ln() - gamma_draw(-a, rng).ln(),
            WeightFamily::Exp { beta } => gamma_draw(a, rng).ln() - beta.ln(),
            WeightFamily::BetaKernel { beta } => {
                let g1 = gamma_draw(a, rng);
                let g2 = gamma_draw(beta, rng);
                g1.ln() - (g1 + g2).ln()
            }
            WeightFamily::InvBetaKernel { p } => {
                let g1 = gamma_draw(-a, rng);
                let g2 = gamma_draw(p, rng);
                (g1 + g2).ln() - g1.ln()
            }
            WeightFamily::Ratio { c } => gamma_draw(a + c, rng).ln() - gamma_draw(-a, rng).ln(),
        }
    }

    /// `ln M_f(a)` from Gamma-function closed forms.
    pub fn closed_form_log_norm(&self, a: f64) -> f64 {
        match *self {
            WeightFamily::InvExp { beta } => a * beta.ln() + ln_gamma(-a),
            WeightFamily::Exp { beta } => ln_gamma(a) - a * beta.ln(),
            WeightFamily::BetaKernel { beta } => ln_gamma(a) + ln_gamma(beta) - ln_gamma(a + beta),
            WeightFamily::InvBetaKernel { p } => ln_gamma(-a) + ln_gamma(p) - ln_gamma(p - a),
            WeightFamily::Ratio { c } => ln_gamma(a + c) + ln_gamma(-a) - ln_gamma(c),
        }
    }

    /// `ψ_k(a)` for `k` in -1..=3 from polygamma closed forms.
    pub fn closed_form_psi(&self, a: f64, k: i32) -> f64 {
        if k == -1 {
            return self.closed_form_log_norm(a);
        }
        let n = k as u32;
        // d^{k+1}/da^{k+1} of g(-a) is (-1)^{k+1} g^{(k+1)}(-a)
        let refl = if k % 2 == 0 { -1.0 } else { 1.0 };
        let log_beta = |b: f64| if k == 0 { b.ln() } else { 0.0 };
        match *self {
            WeightFamily::InvExp { beta } => refl * polygamma(n, -a) + log_beta(beta),
            WeightFamily::Exp { beta } => polygamma(n, a) - log_beta(beta),
            WeightFamily::BetaKernel { beta } => polygamma(n, a) - polygamma(n, a + beta),
            WeightFamily::InvBetaKernel { p } => refl * (polygamma(n, -a) - polygamma(n, p - a)),
            WeightFamily::Ratio { c } => polygamma(n, a + c) + refl * polygamma(n, -a),
        }
    }
}

/// `ψ_k^f(a)` for `k = -1..=3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiValues {
    pub values: [f64; 5],
}

impl PsiValues {
    pub fn get(&self, k: i32) -> f64 {
        assert!((-1..=3).contains(&k), "psi index {k} out of range");
        self.values[(k + 1) as usize]
    }
}

/// `ρ_{f,a}` with its tabulated log-scale law.
#[derive(Debug, Clone)]
pub struct MellinDistribution {
    family: WeightFamily,
    a: f64,
    law: Arc<TabulatedLaw>,
    psi: PsiValues,
}

impl MellinDistribution {
    pub fn new(family: WeightFamily, a: f64) -> Result<Self> {
        family.check_domain(a)?;
        let logf = Arc::new(move |y: f64| a * y + family.log_kernel(y));
        let law = TabulatedLaw::new(logf, family.log_support(), family.mode_hint(a))?;
        let k = law.cumulants();
        let psi = PsiValues {
            values: [law.log_norm(), k[0], k[1], k[2], k[3]],
        };
        Ok(MellinDistribution {
            family,
            a,
            law: Arc::new(law),
            psi,
        })
    }

    pub fn family(&self) -> WeightFamily {
        self.family
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn log_norm(&self) -> f64 {
        self.psi.get(-1)
    }

    pub fn psi(&self, k: i32) -> f64 {
        self.psi.get(k)
    }

    pub fn psi_values(&self) -> PsiValues {
        self.psi
    }

    pub fn law(&self) -> &TabulatedLaw {
        &self.law
    }

    /// Density of `X` at `x`.
    pub fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let y = x.ln();
        (self.law.log_density(y) - y).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        self.law.cdf(x.ln())
    }

    /// Inverse CDF `H(a, u)` on the log scale.
    pub fn sample_log(&self, u: f64) -> Result<f64> {
        self.law.quantile(u)
    }

    /// Inverse CDF `H(a, u)`.
    pub fn sample(&self, u: f64) -> Result<f64> {
        Ok(self.sample_log(u)?.exp())
    }

    pub fn sample_log_direct<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.family.sample_log_direct(self.a, rng)
    }

    /// `L(a,x) = -Cov(ln X, 1{X<=x}) / (x ρ(x)) = ∂_a ln H(a, F(a,x))`.
    pub fn log_deriv_l(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.family.log_support();
        if !(x > 0.0) {
            return Err(Error::OutOfSupport(x));
        }
        let y = x.ln();
        if !(y > lo && y < hi) {
            return Err(Error::OutOfSupport(x));
        }
        let law = &self.law;
        let mean = self.psi(0);
        let ly = law.unnormalised_log_density(y);
        let (rlo, rhi) = law.effective_range();
        let reference = law.unnormalised_log_density(law.mean()).max(ly);
        let g = |s: f64| (s - mean) * (law.unnormalised_log_density(s) - ly).exp();
        let value = if y < mean {
            let from = if y <= rlo {
                quadrature::tail_limit(&|s| law.unnormalised_log_density(s), y, -1.0, reference, 80.0, lo)?
            } else {
                rlo
            };
            -quadrature::integrate(g, from, y, 0.0, 1e-12, 4000)?.value
        } else {
            let to = if y >= rhi {
                quadrature::tail_limit(&|s| law.unnormalised_log_density(s), y, 1.0, reference, 80.0, hi)?
            } else {
                rhi
            };
            quadrature::integrate(g, y, to, 0.0, 1e-12, 4000)?.value
        };
        Ok(value)
    }
}

/// Convenience wrapper: `M_f(a)` by quadrature.
pub fn mellin_norm(family: WeightFamily, a: f64) -> Result<f64> {
    Ok(MellinDistribution::new(family, a)?.log_norm().exp())
}

/// Convenience wrapper: `ψ_k^f(a)` by quadrature.
pub fn psi(family: WeightFamily, a: f64, k: i32) -> Result<f64> {
    if !(-1..=3).contains(&k) {
        return Err(Error::PreconditionViolated(format!("psi order {k} not in -1..=3")));
    }
    Ok(MellinDistribution::new(family, a)?.psi(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const EXP1: WeightFamily = WeightFamily::Exp { beta: 1.0 };
    const INVEXP1: WeightFamily = WeightFamily::InvExp { beta: 1.0 };

    fn families() -> Vec<(WeightFamily, Vec<f64>)> {
        vec![
            (WeightFamily::Exp { beta: 1.5 }, vec![0.3, 0.8, 1.0, 2.5, 6.0]),
            (WeightFamily::InvExp { beta: 0.7 }, vec![-0.3, -0.8, -1.0, -2.5, -6.0]),
            (WeightFamily::BetaKernel { beta: 2.0 }, vec![0.4, 1.0, 1.5, 3.0, 5.0]),
            (WeightFamily::InvBetaKernel { p: 2.0 }, vec![-0.4, -1.0, -1.5, -3.0, -5.0]),
            (WeightFamily::Ratio { c: 3.0 }, vec![-2.5, -2.0, -1.5, -1.0, -0.5]),
        ]
    }

    #[test]
    fn spec_examples() {
        assert!((mellin_norm(EXP1, 1.0).unwrap() - 1.0).abs() < 1e-10);
        assert!((mellin_norm(EXP1, 3.0).unwrap() - 2.0).abs() < 2e-10);
        let root_pi = std::f64::consts::PI.sqrt();
        assert!((mellin_norm(INVEXP1, -0.5).unwrap() - root_pi).abs() < 1e-10 * root_pi);
        assert!(matches!(mellin_norm(EXP1, -1.0), Err(Error::OutOfDomain { .. })));
        assert!((psi(EXP1, 1.0, 0).unwrap() + 0.577_215_7).abs() < 1e-7);
        assert!((psi(EXP1, 1.0, 1).unwrap() - 1.644_934_1).abs() < 1e-7);
        let d = MellinDistribution::new(EXP1, 1.0).unwrap();
        assert_eq!(d.cdf(f64::INFINITY), 1.0);
        assert!((d.cdf(2f64.ln()) - 0.5).abs() < 1e-12);
        assert!((d.sample(0.5).unwrap() - 2f64.ln()).abs() < 1e-12);
        let u = MellinDistribution::new(WeightFamily::BetaKernel { beta: 1.0 }, 1.0).unwrap();
        assert!((u.cdf(0.25) - 0.25).abs() < 1e-12);
        assert!((u.sample(0.73).unwrap() - 0.73).abs() < 1e-12);
    }

    #[test]
    fn reciprocal_sampling() {
        let inv = MellinDistribution::new(INVEXP1, -1.0).unwrap();
        let exp = MellinDistribution::new(EXP1, 1.0).unwrap();
        for &u in &[0.01, 0.2, 0.5, 0.9, 0.999] {
            let lhs = inv.sample(u).unwrap();
            let rhs = 1.0 / exp.sample(1.0 - u).unwrap();
            assert!((lhs - rhs).abs() < 1e-10 * rhs, "u={u}");
        }
    }

    #[test]
    fn normalisation_and_closed_forms() {
        for (fam, grid) in families() {
            for a in grid {
                let d = MellinDistribution::new(fam, a).unwrap();
                let lm = fam.closed_form_log_norm(a);
                assert!((d.log_norm() - lm).abs() < 1e-10, "{fam:?} a={a}");
                let mass = d.law().expect(|_| 1.0, 0.0).unwrap();
                assert!((mass - 1.0).abs() < 1e-9);
                for k in 0..=3 {
                    let exact = fam.closed_form_psi(a, k);
                    let tol = if k == 3 { 1e-6 } else { 1e-7 } * (1.0 + exact.abs());
                    assert!((d.psi(k) - exact).abs() < tol, "{fam:?} a={a} k={k}");
                }
                assert!(d.psi(1) > 0.0);
            }
        }
    }

    #[test]
    fn psi_matches_finite_differences_of_log_norm() {
        let h = 1e-3;
        for (fam, grid) in families() {
            let a = grid[2];
            let f = |x: f64| MellinDistribution::new(fam, x).unwrap().log_norm();
            let fd0 = (f(a + h) - f(a - h)) / (2.0 * h);
            let fd1 = (f(a + h) - 2.0 * f(a) + f(a - h)) / (h * h);
            let d = MellinDistribution::new(fam, a).unwrap();
            assert!((fd0 - d.psi(0)).abs() < 1e-6);
            assert!((fd1 - d.psi(1)).abs() < 1e-3);
        }
    }

    #[test]
    fn log_moments_by_direct_quadrature() {
        for (fam, grid) in families() {
            let d = MellinDistribution::new(fam, grid[1]).unwrap();
            let m1 = d.law().expect(|y| y, 0.0).unwrap();
            let m2 = d.law().expect(|y| y * y, 0.0).unwrap();
            assert!((m1 - d.psi(0)).abs() < 1e-8);
            assert!((m2 - m1 * m1 - d.psi(1)).abs() < 1e-8);
        }
    }

    #[test]
    fn l_is_positive_and_matches_coupling_derivative() {
        for (fam, grid) in families() {
            let a = grid[2];
            let d = MellinDistribution::new(fam, a).unwrap();
            for &u in &[0.05, 0.3, 0.5, 0.8, 0.97] {
                let x = d.sample(u).unwrap();
                let l = d.log_deriv_l(x).unwrap();
                assert!(l > 0.0, "{fam:?} u={u}");
                let h = 1e-4;
                let up = MellinDistribution::new(fam, a + h).unwrap().sample_log(u).unwrap();
                let dn = MellinDistribution::new(fam, a - h).unwrap().sample_log(u).unwrap();
                let fd = (up - dn) / (2.0 * h);
                assert!((fd - l).abs() < 1e-5 * (1.0 + l.abs()), "{fam:?} u={u}: {fd} vs {l}");
            }
        }
    }

    #[test]
    fn l_vanishes_at_the_top_of_the_support() {
        let d = MellinDistribution::new(WeightFamily::BetaKernel { beta: 2.0 }, 1.0).unwrap();
        let near = d.log_deriv_l(1.0 - 1e-9).unwrap();
        assert!(near >= 0.0 && near < 1e-6);
        assert!(matches!(d.log_deriv_l(1.5), Err(Error::OutOfSupport(_))));
        let e = MellinDistribution::new(EXP1, 1.0).unwrap();
        let l10 = e.log_deriv_l(10.0).unwrap();
        let l60 = e.log_deriv_l(60.0).unwrap();
        let far = e.log_deriv_l(10f64.exp()).unwrap();
        assert!(far < l60 && l60 < l10);
        assert!(far > 0.0 && far < 1e-3);
    }

    #[test]
    fn direct_sampler_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (fam, grid) in families() {
            let d = MellinDistribution::new(fam, grid[2]).unwrap();
            let n = 40_000;
            let xs: Vec<f64> = (0..n).map(|_| d.sample_log_direct(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let se = (d.psi(1) / n as f64).sqrt();
            assert!((mean - d.psi(0)).abs() < 5.0 * se, "{fam:?}");
        }
    }
}
