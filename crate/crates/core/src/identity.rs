//! Exact exponential-moment identities for the stationary polymers, their
//! Taylor expansion, and the exit-point tail bounds built on them.

use crate::error::{Error, Result};
use crate::mellin::{MellinDistribution, WeightFamily};
use crate::polymer::{
    exit_law, log_partition, BoundaryDraw, BoundaryParams, EnvironmentSampler, ModelSpec,
};
use crate::quadrature::bisect;
use crate::rng::{replicate, SeedPath};
use crate::stats::McEstimate;
use serde::{Deserialize, Serialize};

/// Which boundary parameter is moved off stationarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Boundary `(a - λ, b)`.
    PerturbA,
    /// Boundary `(a, b - λ)`.
    PerturbB,
}

impl Side {
    pub fn name(&self) -> &'static str {
        match self {
            Side::PerturbA => "A",
            Side::PerturbB => "B",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EjsQuery {
    pub spec: ModelSpec,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub m: usize,
    pub n: usize,
    pub side: Side,
}

impl EjsQuery {
    pub fn new(
        spec: ModelSpec,
        params: BoundaryParams,
        lambda: f64,
        m: usize,
        n: usize,
        side: Side,
    ) -> Result<Self> {
        spec.check(&params)?;
        if !spec.is_stationary(&params) {
            return Err(Error::PreconditionViolated(format!(
                "a + b = {} differs from a3 = {}",
                params.a + params.b,
                spec.a3()
            )));
        }
        let (f1, f2) = (spec.f1(), spec.f2());
        let (x1, x2) = match side {
            Side::PerturbA => (params.a - lambda, params.b + lambda),
            Side::PerturbB => (params.a + lambda, params.b - lambda),
        };
        f1.check_domain(x1)?;
        f2.check_domain(x2)?;
        Ok(EjsQuery {
            spec,
            a: params.a,
            b: params.b,
            lambda,
            m,
            n,
            side,
        })
    }

    /// Boundary parameters of the perturbed environment.
    pub fn boundary(&self) -> BoundaryParams {
        match self.side {
            Side::PerturbA => BoundaryParams {
                a: self.a - self.lambda,
                b: self.b,
            },
            Side::PerturbB => BoundaryParams {
                a: self.a,
                b: self.b - self.lambda,
            },
        }
    }
}

fn log_m(f: WeightFamily, a: f64) -> Result<f64> {
    Ok(MellinDistribution::new(f, a)?.log_norm())
}

fn psi_at(f: WeightFamily, a: f64, k: i32) -> Result<f64> {
    Ok(MellinDistribution::new(f, a)?.psi(k))
}

/// Logarithm of the exact right-hand side.
pub fn ejs_log_rhs(q: &EjsQuery) -> Result<f64> {
    if q.lambda == 0.0 {
        return Ok(0.0);
    }
    let (f1, f2) = (q.spec.f1(), q.spec.f2());
    let (m, n, l) = (q.m as f64, q.n as f64, q.lambda);
    Ok(match q.side {
        Side::PerturbA => {
            m * (log_m(f1, q.a)? - log_m(f1, q.a - l)?) + n * (log_m(f2, q.b + l)? - log_m(f2, q.b)?)
        }
        Side::PerturbB => {
            m * (log_m(f1, q.a + l)? - log_m(f1, q.a)?) + n * (log_m(f2, q.b)? - log_m(f2, q.b - l)?)
        }
    })
}

pub fn ejs_rhs(q: &EjsQuery) -> Result<f64> {
    Ok(ejs_log_rhs(q)?.exp())
}

/// Monte Carlo estimate of `E[exp(λ ln Z)]` on the perturbed environment.
pub fn ejs_lhs_mc(q: &EjsQuery, replicas: usize, path: &SeedPath) -> Result<McEstimate> {
    let sampler = EnvironmentSampler::new(q.spec, q.boundary(), BoundaryDraw::Direct)?;
    let logs = replicate(replicas, |r| -> Result<f64> {
        let env = sampler.sample(q.m, q.n, path, r)?;
        Ok(q.lambda * log_partition(&env).log_z_mn())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_log_samples(&logs, path.master))
}

/// One row of the identity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EjsRow {
    pub model: String,
    pub a: f64,
    pub b: f64,
    pub m: usize,
    pub n: usize,
    pub lambda: f64,
    pub side: String,
    pub replicas: usize,
    pub lhs_mean: f64,
    pub lhs_stderr: f64,
    pub rhs_exact: f64,
    pub zscore: f64,
    pub seed: String,
}

impl EjsRow {
    pub const HEADER: &'static str =
        "model,a,b,m,n,lambda,side,replicas,lhs_mean,lhs_stderr,rhs_exact,zscore,seed";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.12e},{:.6e},{:.12e},{:.6},{}",
            self.model,
            self.a,
            self.b,
            self.m,
            self.n,
            self.lambda,
            self.side,
            self.replicas,
            self.lhs_mean,
            self.lhs_stderr,
            self.rhs_exact,
            self.zscore,
            self.seed
        )
    }
}

/// Runs one identity check and packages it as a table row.
pub fn ejs_check(q: &EjsQuery, replicas: usize, path: &SeedPath) -> Result<EjsRow> {
    let lhs = ejs_lhs_mc(q, replicas, path)?;
    let rhs = ejs_rhs(q)?;
    Ok(EjsRow {
        model: q.spec.model.name().to_string(),
        a: q.a,
        b: q.b,
        m: q.m,
        n: q.n,
        lambda: q.lambda,
        side: q.side.name().to_string(),
        replicas,
        lhs_mean: lhs.mean,
        lhs_stderr: lhs.stderr,
        rhs_exact: rhs,
        zscore: lhs.zscore(rhs),
        seed: path.lineage(None),
    })
}

/// `E[ln Z_{m,n}]` at a stationary pair: `m ψ0^{f1}(a) + n ψ0^{f2}(b)`.
pub fn mean_log_z(spec: ModelSpec, params: BoundaryParams, m: usize, n: usize) -> Result<f64> {
    Ok(m as f64 * psi_at(spec.f1(), params.a, 0)? + n as f64 * psi_at(spec.f2(), params.b, 0)?)
}

/// Log of the cubic expansion of `E[exp(λ(ln Z^{a-λ,b} - E ln Z^{a,b}))]`.
pub fn taylor_log_rhs(
    spec: ModelSpec,
    params: BoundaryParams,
    m: usize,
    n: usize,
    lambda: f64,
) -> Result<f64> {
    spec.check(&params)?;
    spec.f1().check_domain(params.a - lambda)?;
    let d1 = MellinDistribution::new(spec.f1(), params.a)?;
    let d2 = MellinDistribution::new(spec.f2(), params.b)?;
    let (mf, nf) = (m as f64, n as f64);
    let e = mf - nf * d2.psi(1) / d1.psi(1);
    Ok(-0.5 * lambda * lambda * d1.psi(1) * e
        + lambda.powi(3) / 6.0 * (mf * d1.psi(2) + nf * d2.psi(2)))
}

pub fn taylor_rhs(
    spec: ModelSpec,
    params: BoundaryParams,
    m: usize,
    n: usize,
    lambda: f64,
) -> Result<f64> {
    Ok(taylor_log_rhs(spec, params, m, n, lambda)?.exp())
}

/// Grid maximum of `|ψ3|` over `[lo, hi]` (21 points).
pub fn sup_abs_psi3(f: WeightFamily, lo: f64, hi: f64) -> Result<f64> {
    let mut best: f64 = 0.0;
    for k in 0..=20 {
        let x = lo + (hi - lo) * k as f64 / 20.0;
        best = best.max(psi_at(f, x, 3)?.abs());
    }
    Ok(best)
}

/// Evaluated exit-point bound together with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitBound {
    pub value: f64,
    /// Log of the bound.
    pub log_value: f64,
    /// Fourth-order remainder constant.
    pub c4: f64,
    /// Cubic coefficient `m ψ2^{f1}(a+2λ1) + n ψ2^{f2}(b-2λ1)`.
    pub cubic: f64,
    /// Exact Cauchy–Schwarz bound before Taylor expansion (always tighter).
    pub cauchy_schwarz: f64,
    /// True when the bound is `>= 1` and therefore carries no information.
    pub vacuous: bool,
}

/// `exp(-λ1³/2 (m ψ2^{f1}(a+2λ1) + n ψ2^{f2}(b-2λ1)) + C (m+n) λ1⁴ + C1 λ1²)`.
///
/// `C = 0.75 · max |ψ3|` over the two parameter intervals: the second differences in the
/// Cauchy–Schwarz step have fourth-order remainder `(18/24) λ1⁴ sup|ψ3|`, halved by the
/// square root, then doubled as a safety margin.
#[allow(clippy::too_many_arguments)]
pub fn exit_tail_bound_rhs(
    spec: ModelSpec,
    params: BoundaryParams,
    m: usize,
    n: usize,
    lambda1: f64,
    c1: f64,
    eps0: f64,
) -> Result<ExitBound> {
    spec.check(&params)?;
    if !spec.is_stationary(&params) {
        return Err(Error::PreconditionViolated("exit bound needs a + b = a3".into()));
    }
    if !(0.0..=eps0).contains(&lambda1) {
        return Err(Error::PreconditionViolated(format!(
            "lambda1 = {lambda1} outside [0, eps0 = {eps0}]"
        )));
    }
    if lambda1 == 0.0 {
        return Ok(ExitBound {
            value: 1.0,
            log_value: 0.0,
            c4: 0.0,
            cubic: 0.0,
            cauchy_schwarz: 1.0,
            vacuous: true,
        });
    }
    let (f1, f2) = (spec.f1(), spec.f2());
    let (a, b, l) = (params.a, params.b, lambda1);
    f1.check_domain(a + 2.0 * l)?;
    f2.check_domain(b - 2.0 * l)?;
    let (mf, nf) = (m as f64, n as f64);
    let d1 = MellinDistribution::new(f1, a + 2.0 * l)?;
    let d2 = MellinDistribution::new(f2, b - 2.0 * l)?;
    let mismatch = (mf * d1.psi(1) - nf * d2.psi(1)).abs();
    if mismatch > c1 {
        return Err(Error::PreconditionViolated(format!(
            "characteristic condition fails: |m ψ1 - n ψ1| = {mismatch} > C1 = {c1}"
        )));
    }
    let sup = sup_abs_psi3(f1, a, a + 2.0 * l)?.max(sup_abs_psi3(f2, b - 2.0 * l, b)?);
    let c4 = 0.75 * sup;
    let cubic = mf * d1.psi(2) + nf * d2.psi(2);
    let log_value = -0.5 * l.powi(3) * cubic + c4 * (mf + nf) * l.powi(4) + c1 * l * l;
    let cs = 0.5
        * (mf * (d1.log_norm() + log_m(f1, a)? - 2.0 * log_m(f1, a + l)?)
            + nf * (2.0 * log_m(f2, b - l)? - d2.log_norm() - log_m(f2, b)?));
    Ok(ExitBound {
        value: log_value.exp(),
        log_value,
        c4,
        cubic,
        cauchy_schwarz: cs.exp(),
        vacuous: log_value >= 0.0,
    })
}

/// Annealed quenched exit probabilities `Q[t1 > k]` for each replica.
pub fn exit_tail_samples(
    spec: ModelSpec,
    params: BoundaryParams,
    m: usize,
    n: usize,
    k: usize,
    replicas: usize,
    path: &SeedPath,
) -> Result<Vec<f64>> {
    let sampler = EnvironmentSampler::new(spec, params, BoundaryDraw::Direct)?;
    replicate(replicas, |r| -> Result<f64> {
        let env = sampler.sample(m, n, path, r)?;
        let lat = log_partition(&env);
        Ok(exit_law(&env, &lat)?.tail1(k))
    })
    .into_iter()
    .collect()
}

/// `ψ1^{f2}(b)/ψ1^{f1}(a) - ψ1^{f2}(b-2λ)/ψ1^{f1}(a+2λ)`.
fn ratio_drop(spec: ModelSpec, params: BoundaryParams, l: f64) -> Result<f64> {
    let r = |x: f64| -> Result<f64> {
        Ok(psi_at(spec.f2(), params.b - 2.0 * x, 1)? / psi_at(spec.f1(), params.a + 2.0 * x, 1)?)
    };
    Ok(r(0.0)? - r(l)?)
}

/// Derivative of [`ratio_drop`] at zero:
/// `2 (ψ2^{f2}(b) ψ1^{f1}(a) + ψ2^{f1}(a) ψ1^{f2}(b)) / ψ1^{f1}(a)²`.
pub fn lambda_slope(spec: ModelSpec, params: BoundaryParams) -> Result<f64> {
    let d1 = MellinDistribution::new(spec.f1(), params.a)?;
    let d2 = MellinDistribution::new(spec.f2(), params.b)?;
    Ok(2.0 * (d2.psi(2) * d1.psi(1) + d1.psi(2) * d2.psi(1)) / d1.psi(1).powi(2))
}

/// Root `λ1` of `ratio_drop(λ1) = w/n` on `(0, λmax)`, with `λmax` keeping both shifted
/// parameters a distance `1e-3` inside their domains.
pub fn solve_lambda1(spec: ModelSpec, params: BoundaryParams, n: usize, w: f64) -> Result<f64> {
    if w == 0.0 {
        return Ok(0.0);
    }
    if n == 0 || w < 0.0 {
        return Err(Error::PreconditionViolated(format!("need n >= 1 and w >= 0 (n={n}, w={w})")));
    }
    let margin = 1e-3;
    let (lo1, hi1) = spec.f1().domain();
    let (lo2, _) = spec.f2().domain();
    let _ = lo1;
    let lmax = ((hi1 - params.a - margin) / 2.0).min((params.b - lo2 - margin) / 2.0).min(5.0);
    let target = w / n as f64;
    let f = |l: f64| ratio_drop(spec, params, l).map(|v| v - target).unwrap_or(f64::NAN);
    bisect(f, 0.0, lmax, 1e-12, 200)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitTailW {
    pub w: f64,
    pub e: f64,
    pub k: usize,
    pub lambda1: f64,
    pub c1: f64,
    pub empirical: McEstimate,
    pub bound: ExitBound,
}

/// MC of `E[Q(t1 > 𝔢 + w)]` and the exit bound applied at the shifted size `(m-k, n)`.
#[allow(clippy::too_many_arguments)]
pub fn exit_tail_w(
    spec: ModelSpec,
    params: BoundaryParams,
    m: usize,
    n: usize,
    w: f64,
    eps0: f64,
    replicas: usize,
    path: &SeedPath,
) -> Result<ExitTailW> {
    spec.check(&params)?;
    if !spec.is_stationary(&params) {
        return Err(Error::PreconditionViolated("exit tail needs a + b = a3".into()));
    }
    let e = crate::polymer::characteristic_e(spec, params, m as f64, n as f64)?;
    if w < 0.0 || e + w < 0.0 {
        return Err(Error::PreconditionViolated(format!("need w >= 0 and e + w >= 0 (e={e}, w={w})")));
    }
    let k = (e + w).floor() as usize;
    if k >= m {
        return Err(Error::PreconditionViolated(format!("shift k = {k} leaves no columns (m = {m})")));
    }
    let lambda1 = solve_lambda1(spec, params, n, w)?;
    let mk = (m - k) as f64;
    let c1 = if lambda1 > 0.0 {
        let p1 = psi_at(spec.f1(), params.a + 2.0 * lambda1, 1)?;
        let p2 = psi_at(spec.f2(), params.b - 2.0 * lambda1, 1)?;
        (mk * p1 - n as f64 * p2).abs() * (1.0 + 1e-9) + 1e-12
    } else {
        0.0
    };
    let bound = exit_tail_bound_rhs(spec, params, m - k, n, lambda1, c1, eps0)?;
    let samples = exit_tail_samples(spec, params, m, n, k, replicas, path)?;
    Ok(ExitTailW {
        w,
        e,
        k,
        lambda1,
        c1,
        empirical: McEstimate::from_samples(&samples, path.master),
        bound,
    })
}

/// MC of `E[E^{Q}[exp(λ t1)]]`.
pub fn exit_mgf(
    spec: ModelSpec,
    params: BoundaryParams,
    m: usize,
    n: usize,
    lambda: f64,
    replicas: usize,
    path: &SeedPath,
) -> Result<McEstimate> {
    if lambda < 0.0 {
        return Err(Error::PreconditionViolated(format!("lambda = {lambda} < 0")));
    }
    if !spec.is_stationary(&params) {
        return Err(Error::PreconditionViolated("exit mgf needs a + b = a3".into()));
    }
    let sampler = EnvironmentSampler::new(spec, params, BoundaryDraw::Direct)?;
    let xs = replicate(replicas, |r| -> Result<f64> {
        let env = sampler.sample(m, n, path, r)?;
        let lat = log_partition(&env);
        let q = exit_law(&env, &lat)?;
        let total: f64 = q.q1.iter().sum();
        let tilted: f64 = q
            .q1
            .iter()
            .enumerate()
            .map(|(i, p)| (lambda * i as f64).exp() * p)
            .sum();
        Ok(tilted / total)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_samples(&xs, path.master))
}
