use crate::error::{Error, Result};
use crate::mellin::WeightFamily;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    InvGamma,
    Gamma,
    Beta,
    InvBeta,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::InvGamma, Model::Gamma, Model::Beta, Model::InvBeta];

    pub fn name(&self) -> &'static str {
        match self {
            Model::InvGamma => "InvGamma",
            Model::Gamma => "Gamma",
            Model::Beta => "Beta",
            Model::InvBeta => "InvBeta",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "invgamma" | "loggamma" => Ok(Model::InvGamma),
            "gamma" | "strictweak" => Ok(Model::Gamma),
            "beta" => Ok(Model::Beta),
            "invbeta" => Ok(Model::InvBeta),
            _ => Err(Error::config("model", format!("unknown model `{s}`"))),
        }
    }
}

/// One of the four integrable models with its parameters `(θ, μ, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: Model,
    pub theta: f64,
    pub mu: f64,
    pub beta: f64,
}

impl ModelSpec {
    pub fn new(model: Model, theta: f64, mu: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("theta", theta), ("mu", mu), ("beta", beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::out_of_domain(name, v, "(0, inf)"));
            }
        }
        let bounded = matches!(model, Model::InvGamma | Model::InvBeta);
        if bounded && theta >= mu {
            return Err(Error::out_of_domain("theta", theta, format!("(0, {mu}) for {model}")));
        }
        Ok(ModelSpec {
            model,
            theta,
            mu,
            beta,
        })
    }

    pub fn f1(&self) -> WeightFamily {
        match self.model {
            Model::InvGamma => WeightFamily::InvExp { beta: self.beta },
            Model::Gamma => WeightFamily::Exp { beta: self.beta },
            Model::Beta => WeightFamily::BetaKernel { beta: self.beta },
            Model::InvBeta => WeightFamily::InvBetaKernel { p: self.beta },
        }
    }

    pub fn f2(&self) -> WeightFamily {
        match self.model {
            Model::InvGamma => WeightFamily::InvExp { beta: self.beta },
            Model::Gamma | Model::Beta => WeightFamily::InvBetaKernel { p: self.mu },
            Model::InvBeta => WeightFamily::Ratio {
                c: self.beta + self.mu,
            },
        }
    }

    pub fn a3(&self) -> f64 {
        match self.model {
            Model::InvGamma | Model::InvBeta => -self.mu,
            Model::Gamma | Model::Beta => self.mu,
        }
    }

    /// `(a1, a2)` at the model's own θ.
    pub fn stationary_params(&self) -> BoundaryParams {
        let a = match self.model {
            Model::InvGamma | Model::InvBeta => self.theta - self.mu,
            Model::Gamma | Model::Beta => self.mu + self.theta,
        };
        BoundaryParams { a, b: -self.theta }
    }

    /// Stationary pair with a given `a`: `(a, a3 - a)`.
    pub fn stationary_from_a(&self, a: f64) -> Result<BoundaryParams> {
        let p = BoundaryParams { a, b: self.a3() - a };
        self.check(&p)?;
        Ok(p)
    }

    pub fn check(&self, p: &BoundaryParams) -> Result<()> {
        self.f1().check_domain(p.a)?;
        self.f2().check_domain(p.b)
    }

    pub fn is_stationary(&self, p: &BoundaryParams) -> bool {
        (p.a + p.b - self.a3()).abs() < 1e-12
    }

    /// Logs of the bulk incoming weights `(Y1, Y2)` built from `X ~ ρ_{f1,a3}`.
    pub fn sample_bulk_logs<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let g = |shape: f64, rng: &mut R| -> f64 {
            Gamma::new(shape, 1.0).expect("positive shape").sample(rng)
        };
        match self.model {
            Model::InvGamma => {
                let lx = self.beta.ln() - g(self.mu, rng).ln();
                (lx, lx)
            }
            Model::Gamma => (g(self.mu, rng).ln() - self.beta.ln(), 0.0),
            Model::Beta => {
                let g1 = g(self.mu, rng);
                let g2 = g(self.beta, rng);
                let ls = (g1 + g2).ln();
                (g1.ln() - ls, g2.ln() - ls)
            }
            Model::InvBeta => {
                let g1 = g(self.mu, rng);
                let g2 = g(self.beta, rng);
                let l1 = g1.ln();
                ((g1 + g2).ln() - l1, g2.ln() - l1)
            }
        }
    }

    /// Maps `ln X` to `(ln Y1, ln Y2)`.
    pub fn ymap_log(&self, lx: f64) -> (f64, f64) {
        match self.model {
            Model::InvGamma => (lx, lx),
            Model::Gamma => (lx, 0.0),
            Model::Beta => (lx, (-lx.exp_m1()).ln()),
            Model::InvBeta => (lx, lx.exp_m1().ln()),
        }
    }
}

/// Boundary parameters `(a, b)` in `D(M_{f1}) × D(M_{f2})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParams {
    pub a: f64,
    pub b: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mellin::MellinDistribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn table_rows() {
        let s = ModelSpec::new(Model::InvGamma, 1.0, 2.0, 1.0).unwrap();
        let p = s.stationary_params();
        assert_eq!((p.a, p.b, s.a3()), (-1.0, -1.0, -2.0));
        assert!(s.is_stationary(&p));
        for m in Model::ALL {
            let s = ModelSpec::new(m, 1.0, 2.0, 1.0).unwrap();
            let p = s.stationary_params();
            assert!(s.is_stationary(&p), "{m}");
            s.check(&p).unwrap();
            s.f1().check_domain(s.a3()).unwrap();
        }
        assert!(ModelSpec::new(Model::InvBeta, 2.5, 2.0, 1.0).is_err());
        assert!(ModelSpec::new(Model::Gamma, 2.5, 2.0, 1.0).is_ok());
    }

    #[test]
    fn bulk_draw_matches_ymap_of_x() {
        // E[ln Y1] = psi0 of f1 at a3 for every model; ln Y2 is the image of the same X
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in Model::ALL {
            let s = ModelSpec::new(m, 1.0, 2.0, 1.5).unwrap();
            let d = MellinDistribution::new(s.f1(), s.a3()).unwrap();
            let n = 50_000;
            let mut sum = 0.0;
            for _ in 0..n {
                let (l1, l2) = s.sample_bulk_logs(&mut rng);
                let (m1, m2) = s.ymap_log(l1);
                assert!((m1 - l1).abs() < 1e-12);
                assert!((m2 - l2).abs() < 1e-7 * (1.0 + l2.abs()), "{m}: {m2} vs {l2}");
                sum += l1;
            }
            let mean = sum / n as f64;
            let se = (d.psi(1) / n as f64).sqrt();
            assert!((mean - d.psi(0)).abs() < 5.0 * se, "{m}");
        }
    }
}
