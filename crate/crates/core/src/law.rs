//! One-dimensional law given by an unnormalised log-density, tabulated once by
//! adaptive quadrature so that CDF evaluation and inversion are cheap.

use crate::error::{Error, Result};
use crate::quadrature::{self, gk21, Panel};
use std::fmt;
use std::sync::Arc;

pub type LogDensity = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const TAIL_DROP: f64 = 80.0;
const REL_TOL: f64 = 1e-13;
const MAX_PANELS: usize = 5000;

#[derive(Clone)]
pub struct TabulatedLaw {
    logf: LogDensity,
    support: (f64, f64),
    range: (f64, f64),
    shift: f64,
    panels: Vec<Panel>,
    cum: Vec<f64>,
    mass: f64,
    log_norm: f64,
    mean: f64,
    central: [f64; 3],
}

impl fmt::Debug for TabulatedLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabulatedLaw")
            .field("support", &self.support)
            .field("range", &self.range)
            .field("log_norm", &self.log_norm)
            .field("mean", &self.mean)
            .field("panels", &self.panels.len())
            .finish()
    }
}

impl TabulatedLaw {
    /// `support` is the open interval carrying the density (bounds may be infinite);
    /// `mode` must be an interior point near the maximiser of `logf`.
    pub fn new(logf: LogDensity, support: (f64, f64), mode: f64) -> Result<Self> {
        let (lo, hi) = support;
        if !(mode > lo && mode < hi) {
            return Err(Error::QuadratureFailure(format!(
                "mode hint {mode} not inside ({lo}, {hi})"
            )));
        }
        let peak = logf(mode);
        if !peak.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "log-density not finite at mode hint {mode}"
            )));
        }
        let left = quadrature::tail_limit(&*logf, mode, -1.0, peak, TAIL_DROP, lo)?;
        let right = quadrature::tail_limit(&*logf, mode, 1.0, peak, TAIL_DROP, hi)?;
        let f = |y: f64| (logf(y) - peak).exp();
        let integral = quadrature::integrate(f, left, right, 0.0, REL_TOL, MAX_PANELS)?;
        let mass = integral.value;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::QuadratureFailure(format!("bad total mass {mass}")));
        }
        let mut cum = Vec::with_capacity(integral.panels.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for p in &integral.panels {
            acc += p.value;
            cum.push(acc / mass);
        }
        let mut law = TabulatedLaw {
            logf,
            support,
            range: (left, right),
            shift: peak,
            panels: integral.panels,
            cum,
            mass,
            log_norm: peak + mass.ln(),
            mean: 0.0,
            central: [0.0; 3],
        };
        let mean = law.expect(|y| y, 1e-14 * (right - left))?;
        law.mean = mean;
        let var = law.expect(|y| (y - mean).powi(2), 0.0)?;
        let sd = var.sqrt();
        let mu3 = law.expect(|y| (y - mean).powi(3), 1e-12 * sd.powi(3))?;
        let mu4 = law.expect(|y| (y - mean).powi(4), 0.0)?;
        law.central = [var, mu3, mu4];
        Ok(law)
    }

    /// Log of the total mass of `exp(logf)`.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn log_density(&self, y: f64) -> f64 {
        if y <= self.support.0 || y >= self.support.1 {
            return f64::NEG_INFINITY;
        }
        (self.logf)(y) - self.log_norm
    }

    pub fn density(&self, y: f64) -> f64 {
        self.log_density(y).exp()
    }

    pub fn unnormalised_log_density(&self, y: f64) -> f64 {
        (self.logf)(y)
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Interval outside which the density is below e^-80 of its peak.
    pub fn effective_range(&self) -> (f64, f64) {
        self.range
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Central moments of order 2, 3, 4.
    pub fn central_moments(&self) -> [f64; 3] {
        self.central
    }

    /// Cumulants κ1..κ4.
    pub fn cumulants(&self) -> [f64; 4] {
        let [m2, m3, m4] = self.central;
        [self.mean, m2, m3, m4 - 3.0 * m2 * m2]
    }

    /// Expectation of `h(Y)` by adaptive quadrature over the effective range.
    pub fn expect<H: Fn(f64) -> f64>(&self, h: H, epsabs: f64) -> Result<f64> {
        self.partial_expect(h, self.range.0, self.range.1, epsabs)
    }

    /// ∫_{from}^{to} h(y) p(y) dy.
    pub fn partial_expect<H: Fn(f64) -> f64>(
        &self,
        h: H,
        from: f64,
        to: f64,
        epsabs: f64,
    ) -> Result<f64> {
        let shift = self.shift;
        let logf = &self.logf;
        let g = |y: f64| h(y) * (logf(y) - shift).exp();
        let r = quadrature::integrate(g, from, to, epsabs * self.mass, 1e-12, MAX_PANELS)?;
        Ok(r.value / self.mass)
    }

    fn panel_index(&self, y: f64) -> usize {
        let idx = self.panels.partition_point(|p| p.b <= y);
        idx.min(self.panels.len() - 1)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y <= self.range.0 {
            return 0.0;
        }
        if y >= self.range.1 {
            return 1.0;
        }
        let i = self.panel_index(y);
        let p = self.panels[i];
        let shift = self.shift;
        let logf = &self.logf;
        let (partial, _) = gk21(&|s: f64| (logf(s) - shift).exp(), p.a, y);
        (self.cum[i] + partial / self.mass).clamp(0.0, 1.0)
    }

    /// Inverse CDF: bisection inside the bracketing panel to 1e-6, then Newton.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::RootFindFailure(format!("quantile level {u} not in (0,1)")));
        }
        let i = self.cum.partition_point(|&c| c <= u).saturating_sub(1);
        let i = i.min(self.panels.len() - 1);
        let (mut lo, mut hi) = (self.panels[i].a, self.panels[i].b);
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut y = 0.5 * (lo + hi);
        let (blo, bhi) = (self.panels[i].a, self.panels[i].b);
        for _ in 0..60 {
            let r = self.cdf(y) - u;
            if r.abs() <= 1e-14 {
                return Ok(y);
            }
            let d = self.density(y);
            if !(d > 0.0) {
                break;
            }
            let step = r / d;
            let next = (y - step).clamp(blo, bhi);
            if (next - y).abs() <= 1e-15 * (1.0 + y.abs()) {
                return Ok(next);
            }
            y = next;
        }
        if (self.cdf(y) - u).abs() <= 1e-12 {
            Ok(y)
        } else {
            Err(Error::RootFindFailure(format!(
                "quantile({u}) did not converge, residual {:e}",
                self.cdf(y) - u
            )))
        }
    }
}
