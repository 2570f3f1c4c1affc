use super::Potential;
use crate::error::{Error, Result};
use crate::law::TabulatedLaw;
use std::sync::Arc;

/// One-site stationary law `ν_θ(du) ∝ e^{-θu - V(u)} du`.
#[derive(Debug, Clone)]
pub struct NuTheta {
    potential: Potential,
    theta: f64,
    law: Arc<TabulatedLaw>,
}

impl NuTheta {
    pub fn new(potential: &Potential, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::out_of_domain("theta", theta, "(0, inf)"));
        }
        potential.validate()?;
        let p = potential.clone();
        let logf = Arc::new(move |u: f64| -theta * u - p.v(u));
        let law = TabulatedLaw::new(logf, (f64::NEG_INFINITY, f64::INFINITY), potential.mode(theta))?;
        Ok(NuTheta {
            potential: potential.clone(),
            theta,
            law: Arc::new(law),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// `ln Z(θ)`.
    pub fn log_z(&self) -> f64 {
        self.law.log_norm()
    }

    pub fn cdf(&self, u: f64) -> f64 {
        self.law.cdf(u)
    }

    /// Inverse CDF `H_θ`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.law.quantile(p)
    }

    /// `ψ^V_k(θ)`, the `(k+1)`-th cumulant of `-u`, for `k = -1..=3`.
    pub fn psi(&self, k: i32) -> Result<f64> {
        let c = self.law.cumulants();
        match k {
            -1 => Ok(self.log_z()),
            0 => Ok(-c[0]),
            1 => Ok(c[1]),
            2 => Ok(-c[2]),
            3 => Ok(c[3]),
            _ => Err(Error::out_of_domain("k", k as f64, "{-1, 0, 1, 2, 3}")),
        }
    }

    /// `ψ^V_2(θ) < 0`.
    pub fn curvature_ok(&self) -> bool {
        self.psi(2).map(|v| v < 0.0).unwrap_or(false)
    }

    pub fn law(&self) -> &TabulatedLaw {
        &self.law
    }
}

pub fn nu_sample(potential: &Potential, theta: f64, u: f64) -> Result<f64> {
    NuTheta::new(potential, theta)?.quantile(u)
}

pub fn psi_v(potential: &Potential, theta: f64, k: i32) -> Result<f64> {
    NuTheta::new(potential, theta)?.psi(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{ln_gamma, polygamma, ZETA3};

    #[test]
    fn exp_potential_oracles() {
        let nu = NuTheta::new(&Potential::Exp, 1.0).unwrap();
        assert!(nu.log_z().abs() < 1e-10);
        assert!((nu.quantile(0.5).unwrap() - 0.366_512_920_581_664_3).abs() < 1e-9);
        assert!((nu.psi(1).unwrap() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-8);
        assert!((nu.psi(2).unwrap() + 2.0 * ZETA3).abs() < 1e-7);
        assert!(nu.curvature_ok());
        for theta in [0.5, 0.8, 2.0, 3.5] {
            let nu = NuTheta::new(&Potential::Exp, theta).unwrap();
            assert!((nu.log_z() - ln_gamma(theta)).abs() < 1e-9, "{theta}");
            for k in 0..=2 {
                let exact = polygamma(k as u32, theta);
                assert!((nu.psi(k).unwrap() - exact).abs() < 1e-7, "{theta} {k}");
            }
        }
    }

    #[test]
    fn quantile_matches_gamma_change_of_variables() {
        // u = -ln s with s ~ Gamma(θ): F(u) = P[s >= e^{-u}]; at θ = 1 this is exp(-e^{-u}).
        let nu = NuTheta::new(&Potential::Exp, 1.0).unwrap();
        for p in [0.01, 0.2, 0.7, 0.99] {
            let u = nu.quantile(p).unwrap();
            assert!(((-(-u).exp()).exp() - p).abs() < 1e-10);
        }
    }

    #[test]
    fn mixture_has_negative_curvature() {
        let nu = NuTheta::new(&Potential::default_mixture(), 1.0).unwrap();
        assert!(nu.psi(1).unwrap() > 0.0);
        assert!(nu.curvature_ok());
    }
}
