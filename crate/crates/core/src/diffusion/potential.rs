use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Convex decreasing confining potential for the diffusion system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    /// `V(x) = e^{-x}`.
    Exp,
    /// `V(x) = Σ w_i e^{-s_i x}` with positive weights and rates.
    LaplaceMixture { weights: Vec<f64>, rates: Vec<f64> },
}

impl Potential {
    /// `0.7 e^{-x} + 0.3 e^{-2x}`.
    pub fn default_mixture() -> Self {
        Potential::LaplaceMixture {
            weights: vec![0.7, 0.3],
            rates: vec![1.0, 2.0],
        }
    }

    pub fn mixture(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let p = Potential::LaplaceMixture { weights, rates };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if let Potential::LaplaceMixture { weights, rates } = self {
            if weights.is_empty() || weights.len() != rates.len() {
                return Err(Error::config("potential", "weights and rates must be nonempty and equal length"));
            }
            for (&w, &s) in weights.iter().zip(rates) {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::out_of_domain("weight", w, "(0, inf)"));
                }
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::out_of_domain("rate", s, "(0, inf)"));
                }
            }
        }
        Ok(())
    }

    /// `k`-th derivative, `k <= 3`.
    #[inline]
    pub fn deriv(&self, k: u32, x: f64) -> f64 {
        match self {
            Potential::Exp => {
                let e = (-x).exp();
                if k % 2 == 0 {
                    e
                } else {
                    -e
                }
            }
            Potential::LaplaceMixture { weights, rates } => {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * weights
                    .iter()
                    .zip(rates)
                    .map(|(w, s)| w * s.powi(k as i32) * (-s * x).exp())
                    .sum::<f64>()
            }
        }
    }

    #[inline]
    pub fn v(&self, x: f64) -> f64 {
        self.deriv(0, x)
    }

    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        self.deriv(1, x)
    }

    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        self.deriv(2, x)
    }

    #[inline]
    pub fn d3(&self, x: f64) -> f64 {
        self.deriv(3, x)
    }

    /// Maximiser of `-θx - V(x)`, i.e. the root of `V'(x) = -θ`.
    pub fn mode(&self, theta: f64) -> f64 {
        match self {
            Potential::Exp => -theta.ln(),
            Potential::LaplaceMixture { .. } => {
                let (mut lo, mut hi) = (-50.0, 50.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.d1(mid) + theta < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Short text descriptor used in dumps and reports.
    pub fn descriptor(&self) -> String {
        match self {
            Potential::Exp => "exp".to_string(),
            Potential::LaplaceMixture { weights, rates } => {
                let terms: Vec<String> = weights.iter().zip(rates).map(|(w, s)| format!("{w}*{s}")).collect();
                format!("mixture:{}", terms.join("+"))
            }
        }
    }

    /// Grid check of the structural assumptions on `[-x_max, x_max]`.
    pub fn certify(&self, x_max: f64, points: usize) -> PotentialCertificate {
        let big_c = 1.0;
        let mut cert = PotentialCertificate {
            nonnegative: true,
            decreasing: true,
            convex: true,
            growth_c: f64::INFINITY,
            growth_big_c: big_c,
            c0: f64::INFINITY,
            sandwich_big_c: 0.0,
        };
        for i in 0..points {
            let x = -x_max + 2.0 * x_max * i as f64 / (points - 1) as f64;
            let (v, v1, v2, v3) = (self.v(x), self.d1(x), self.d2(x), self.d3(x));
            cert.nonnegative &= v >= 0.0;
            cert.decreasing &= v1 <= 0.0;
            cert.convex &= v2 >= 0.0;
            if x <= -big_c {
                cert.growth_c = cert.growth_c.min(v / (x * x));
            }
            if v2 > 0.0 {
                cert.c0 = cert.c0.min(-v3 / v2).min(v2 / (-v3).max(f64::MIN_POSITIVE));
            }
        }
        cert
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

/// Constants found on a finite grid; they do not prove the global inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialCertificate {
    pub nonnegative: bool,
    pub decreasing: bool,
    pub convex: bool,
    /// Largest `c` with `V(x) >= c x²` for `x <= -growth_big_c` on the grid.
    pub growth_c: f64,
    pub growth_big_c: f64,
    /// Largest `c0` with `c0 V'' <= -V''' <= V''/c0` on the grid.
    pub c0: f64,
    /// Additive constant in the upper half of the sandwich; zero whenever `c0 > 0`
    /// already covers both sides on the grid.
    pub sandwich_big_c: f64,
}

impl PotentialCertificate {
    pub fn ok(&self) -> bool {
        self.nonnegative && self.decreasing && self.convex && self.growth_c > 0.0 && self.c0 > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        for p in [Potential::Exp, Potential::default_mixture()] {
            for x in [-1.5, 0.0, 0.7, 3.0] {
                let h = 1e-5;
                for k in 0..3 {
                    let fd = (p.deriv(k, x + h) - p.deriv(k, x - h)) / (2.0 * h);
                    assert!((fd - p.deriv(k + 1, x)).abs() < 1e-6 * (1.0 + fd.abs()), "{p} k={k} x={x}");
                }
            }
        }
    }

    #[test]
    fn certificates() {
        let c = Potential::Exp.certify(10.0, 401);
        assert!(c.ok());
        assert!((c.c0 - 1.0).abs() < 1e-12);
        let c = Potential::default_mixture().certify(10.0, 401);
        assert!(c.ok());
        assert!(c.c0 >= 0.5 - 1e-12 && c.c0 < 1.0);
    }

    #[test]
    fn mode_solves_first_order_condition() {
        let p = Potential::default_mixture();
        let m = p.mode(1.3);
        assert!((p.d1(m) + 1.3).abs() < 1e-10);
        assert!((Potential::Exp.mode(2.0) + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn invalid_mixture() {
        assert!(Potential::mixture(vec![1.0], vec![-1.0]).is_err());
        assert!(Potential::mixture(vec![], vec![]).is_err());
    }
}
