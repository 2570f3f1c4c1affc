use super::{DiffusionConfig, Integrator, Noise, NuTheta, Potential};
use crate::error::{Error, Result};
use crate::polymer::logaddexp;
use crate::quadrature::bisect;
use crate::rng::{replicate, SeedPath};
use crate::stats::McEstimate;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `φ(θ) = N ψ^V_{-1}(θ) - θ² t / 2`.
pub fn phi(potential: &Potential, theta: f64, n: usize, t: f64) -> Result<f64> {
    Ok(n as f64 * NuTheta::new(potential, theta)?.log_z() - 0.5 * theta * theta * t)
}

/// `𝔢(θ, t) = t - N ψ^V_1(θ)`.
pub fn characteristic_e_diffusion(potential: &Potential, theta: f64, n: usize, t: f64) -> Result<f64> {
    Ok(t - n as f64 * NuTheta::new(potential, theta)?.psi(1)?)
}

/// `E[W^θ_{N,t}] = θ t - N ψ^V_0(θ)`.
pub fn expected_w(potential: &Potential, theta: f64, n: usize, t: f64) -> Result<f64> {
    Ok(theta * t - n as f64 * NuTheta::new(potential, theta)?.psi(0)?)
}

/// Exact `φ(θ) - φ(η)` and its cubic expansion around `η`.
pub fn ejs_log_rhs_expansion(potential: &Potential, n: usize, eta: f64, theta: f64, t: f64) -> Result<(f64, f64)> {
    let exact = phi(potential, theta, n, t)? - phi(potential, eta, n, t)?;
    let nu = NuTheta::new(potential, eta)?;
    let d = theta - eta;
    let ew = eta * t - n as f64 * nu.psi(0)?;
    let e = t - n as f64 * nu.psi(1)?;
    let approx = -d * ew - 0.5 * d * d * e + d.powi(3) / 6.0 * n as f64 * nu.psi(2)?;
    Ok((exact, approx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionEjs {
    pub n: usize,
    pub eta: f64,
    pub theta: f64,
    pub t: f64,
    pub dt: f64,
    pub lhs: McEstimate,
    /// Same noise integrated with step `dt/2`.
    pub lhs_half: McEstimate,
    pub rhs: f64,
    pub zscore: f64,
    /// `|lhs - lhs_half| / stderr(lhs)`.
    pub halving_shift: f64,
    pub seed: String,
}

/// MC of `E[exp((η-θ) W_{N,t}(η, θ))]` against `exp(φ(θ) - φ(η))`.
#[allow(clippy::too_many_arguments)]
pub fn ejs_diffusion_check(
    potential: &Potential,
    n: usize,
    eta: f64,
    theta: f64,
    t: f64,
    dt: f64,
    replicas: usize,
    path: &SeedPath,
) -> Result<DiffusionEjs> {
    let cfg = DiffusionConfig::new(n, eta, theta, dt, t)?;
    let it = Integrator::new(potential, cfg)?;
    let pairs = replicate(replicas, |r| -> Result<(f64, f64)> {
        let noise = it.noise(path, r);
        Ok(((eta - theta) * it.final_w(&noise, 0)?, (eta - theta) * it.final_w(&noise, 1)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let lhs = McEstimate::from_log_samples(&a, path.master);
    let lhs_half = McEstimate::from_log_samples(&b, path.master);
    let rhs = (phi(potential, theta, n, t)? - phi(potential, eta, n, t)?).exp();
    let shift = if lhs.stderr > 0.0 {
        (lhs.mean - lhs_half.mean).abs() / lhs.stderr
    } else {
        0.0
    };
    Ok(DiffusionEjs {
        n,
        eta,
        theta,
        t,
        dt: cfg.effective_dt(),
        zscore: lhs.zscore(rhs),
        lhs,
        lhs_half,
        rhs,
        halving_shift: shift,
        seed: path.lineage(None),
    })
}

/// Coordinates at `T/2` and `T` and the final height for stationary runs (`η = θ`).
#[derive(Debug, Clone, PartialEq)]
pub struct StationaritySample {
    /// `half[j][r]` is `u_{j+1}(T/2)` in replica `r`.
    pub half: Vec<Vec<f64>>,
    pub end: Vec<Vec<f64>>,
    pub w: Vec<f64>,
}

pub fn stationarity_sample(
    potential: &Potential,
    n: usize,
    theta: f64,
    horizon: f64,
    dt: f64,
    replicas: usize,
    path: &SeedPath,
) -> Result<StationaritySample> {
    let cfg = DiffusionConfig::new(n, theta, theta, dt, horizon)?;
    let it = Integrator::new(potential, cfg)?;
    let steps = cfg.steps();
    let rows = replicate(replicas, |r| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let noise = it.noise(path, r);
        let traj = it.run(&noise, 0)?;
        let h = steps / 2;
        Ok((
            (1..=n).map(|j| traj.u_at(h, j)).collect(),
            (1..=n).map(|j| traj.u_at(steps, j)).collect(),
            traj.w_final(),
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut out = StationaritySample {
        half: vec![Vec::with_capacity(replicas); n],
        end: vec![Vec::with_capacity(replicas); n],
        w: Vec::with_capacity(replicas),
    };
    for (h, e, w) in rows {
        for j in 0..n {
            out.half[j].push(h[j]);
            out.end[j].push(e[j]);
        }
        out.w.push(w);
    }
    Ok(out)
}

/// Second-order finite differences of `W_{N,T}` in `(η, θ)` on shared noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionDerivatives {
    pub w: f64,
    pub d_eta: f64,
    pub d_theta: f64,
    pub d_eta_theta: f64,
    pub d_theta2: f64,
}

/// Nine integrators on the `(η ± δ, θ ± δ)` stencil sharing three initial laws.
#[derive(Debug, Clone)]
pub struct CoupledDiffusion {
    grid: Vec<Integrator>,
    delta: f64,
    centre: Integrator,
}

impl CoupledDiffusion {
    pub fn new(potential: &Potential, cfg: DiffusionConfig, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < cfg.eta && delta < cfg.theta) {
            return Err(Error::out_of_domain("delta", delta, "(0, min(eta, theta))"));
        }
        let mut grid = Vec::with_capacity(9);
        for de in [-1.0, 0.0, 1.0] {
            let eta = cfg.eta + de * delta;
            let nu = Arc::new(NuTheta::new(potential, eta)?);
            for dth in [-1.0, 0.0, 1.0] {
                let c = cfg.with_params(eta, cfg.theta + dth * delta);
                grid.push(Integrator::with_nu(potential, c, nu.clone())?);
            }
        }
        let centre = grid[4].clone();
        Ok(CoupledDiffusion { grid, delta, centre })
    }

    pub fn centre(&self) -> &Integrator {
        &self.centre
    }

    pub fn noise(&self, path: &SeedPath, replica: u64) -> Noise {
        self.centre.noise(path, replica)
    }

    pub fn derivatives(&self, noise: &Noise) -> Result<DiffusionDerivatives> {
        let w = |i: usize, j: usize| self.grid[3 * i + j].final_w(noise, 0);
        let (mm, m0, mp) = (w(0, 0)?, w(0, 1)?, w(0, 2)?);
        let (zm, zz, zp) = (w(1, 0)?, w(1, 1)?, w(1, 2)?);
        let (pm, p0, pp) = (w(2, 0)?, w(2, 1)?, w(2, 2)?);
        let d = self.delta;
        Ok(DiffusionDerivatives {
            w: zz,
            d_eta: (p0 - m0) / (2.0 * d),
            d_theta: (zp - zm) / (2.0 * d),
            d_eta_theta: (pp - pm - mp + mm) / (4.0 * d * d),
            d_theta2: (zp - 2.0 * zz + zm) / (d * d),
        })
    }
}

/// Chernoff bound for the wedge polymer at threshold `N u + θ0 t - N ψ^V_0(θ0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WedgeBound {
    pub theta0: f64,
    pub psi2: f64,
    /// Optimal tilt `a = (2u/|ψ2|)^{1/2}`.
    pub a: f64,
    /// Fourth-order constant `2 sup|ψ3| / (6 ψ2²)` over `[θ0, θ0 + a]`.
    pub c4: f64,
    pub log_value: f64,
    pub value: f64,
    /// `θ0 t - N ψ^V_0(θ0)`.
    pub centre: f64,
}

/// Root of `ψ^V_1(θ) = t/N` for `V = e^{-x}`.
pub fn wedge_theta0(n: usize, t: f64) -> Result<f64> {
    if n == 0 || !(t > 0.0) {
        return Err(Error::PreconditionViolated(format!("need N >= 1 and t > 0 (N={n}, t={t})")));
    }
    let target = t / n as f64;
    // ψ1 is decreasing from +inf to 0 on (0, inf); bracket in log-space
    let f = |x: f64| crate::special::trigamma(x.exp()) - target;
    Ok(bisect(f, -30.0, 30.0, 1e-14, 400)?.exp())
}

pub fn wedge_bound(n: usize, t: f64, u: f64) -> Result<WedgeBound> {
    if !(0.0..=n as f64).contains(&u) {
        return Err(Error::PreconditionViolated(format!("need 0 <= u <= N (u={u})")));
    }
    let theta0 = wedge_theta0(n, t)?;
    let nu = NuTheta::new(&Potential::Exp, theta0)?;
    let psi2 = nu.psi(2)?;
    if psi2 >= 0.0 {
        return Err(Error::PreconditionViolated(format!("psi2 = {psi2} is not negative")));
    }
    let centre = theta0 * t - n as f64 * nu.psi(0)?;
    if u == 0.0 {
        return Ok(WedgeBound {
            theta0,
            psi2,
            a: 0.0,
            c4: 0.0,
            log_value: 0.0,
            value: 1.0,
            centre,
        });
    }
    let a = (2.0 * u / psi2.abs()).sqrt();
    let mut sup: f64 = 0.0;
    for k in 0..=20 {
        let th = theta0 + a * k as f64 / 20.0;
        sup = sup.max(crate::special::polygamma(3, th).abs());
    }
    let c4 = 2.0 * sup / (6.0 * psi2 * psi2);
    let nf = n as f64;
    let log_value = -nf * (2.0 * 2f64.sqrt() / 3.0) * u.powf(1.5) / psi2.abs().sqrt() + c4 * nf * u * u;
    Ok(WedgeBound {
        theta0,
        psi2,
        a,
        c4,
        log_value,
        value: log_value.exp(),
        centre,
    })
}

/// `ln` of the wedge polymer partition function on the noise grid (`η = ∞`, `θ = 0`):
/// `∫_{0<s_0<…<s_{N-1}<t} exp(-B_0(s_0) + Σ_j B_j(s_j) - B_j(s_{j-1})) ds` by the
/// left-point recursion `Y_j(t_k) = (Y_j(t_{k-1}) + Y_{j-1}(t_{k-1}) dt) e^{ΔB_j}`.
pub fn wedge_log_partition(noise: &Noise) -> f64 {
    let n = noise.n;
    let dt_ln = noise.dt.ln();
    let mut y = vec![f64::NEG_INFINITY; n + 1];
    y[0] = 0.0;
    let mut b0 = 0.0;
    for k in 0..noise.steps {
        let row = noise.row(k);
        let prev = y.clone();
        b0 += row[0];
        y[0] = -b0;
        for j in 1..=n {
            y[j] = logaddexp(prev[j], prev[j - 1] + dt_ln) + row[j];
        }
    }
    y[n]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeCheck {
    pub bound: WedgeBound,
    pub u: f64,
    pub threshold: f64,
    pub empirical: McEstimate,
    pub dt: f64,
}

/// Optional simulation of `P[ln Z > N u + θ0 t - N ψ^V_0(θ0)]`.
pub fn wedge_mc(n: usize, t: f64, u: f64, dt: f64, replicas: usize, path: &SeedPath) -> Result<WedgeCheck> {
    let bound = wedge_bound(n, t, u)?;
    let steps = (t / dt).round().max(1.0) as usize;
    let h = t / steps as f64;
    let threshold = n as f64 * u + bound.centre;
    let hits: Vec<f64> = replicate(replicas, |r| {
        let noise = Noise::generate(n, steps, h, path, r);
        f64::from(u8::from(wedge_log_partition(&noise) > threshold))
    });
    Ok(WedgeCheck {
        bound,
        u,
        threshold,
        empirical: McEstimate::from_samples(&hits, path.master),
        dt: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{polygamma, ZETA3};
    use std::f64::consts::PI;

    #[test]
    fn phi_examples() {
        assert!(phi(&Potential::Exp, 1.0, 3, 0.0).unwrap().abs() < 1e-10);
        assert!(phi(&Potential::Exp, 2.0, 1, 0.0).unwrap().abs() < 1e-10);
        let e = characteristic_e_diffusion(&Potential::Exp, 1.0, 6, 0.0).unwrap();
        assert!((e + PI * PI).abs() < 1e-7);
        let t0 = 4.0 * PI * PI / 6.0;
        assert!(characteristic_e_diffusion(&Potential::Exp, 1.0, 4, t0).unwrap().abs() < 1e-7);
    }

    #[test]
    fn expansion_remainder_is_fourth_order() {
        let (n, eta, t) = (3, 1.0, 3.0 * PI * PI / 6.0);
        let rem = |d: f64| {
            let (exact, approx) = ejs_log_rhs_expansion(&Potential::Exp, n, eta, eta + d, t).unwrap();
            (exact - approx).abs()
        };
        let r = rem(0.2) / rem(0.1);
        assert!((r - 16.0).abs() < 3.0, "{r}");
    }

    #[test]
    fn wedge_hand_value() {
        let n = 2;
        let t = n as f64 * PI * PI / 6.0;
        let b = wedge_bound(n, t, 0.1).unwrap();
        assert!((b.theta0 - 1.0).abs() < 1e-10);
        let psi2 = -2.0 * ZETA3;
        assert!((b.psi2 - psi2).abs() < 1e-7);
        let c4 = 2.0 * polygamma(3, 1.0) / (6.0 * psi2 * psi2);
        let hand = -2.0 * (2.0 * 2f64.sqrt() / 3.0) * 0.1f64.powf(1.5) / psi2.abs().sqrt() + c4 * 2.0 * 0.01;
        assert!((b.log_value - hand).abs() < 1e-7, "{} {}", b.log_value, hand);
        assert_eq!(wedge_bound(n, t, 0.0).unwrap().value, 1.0);
    }

    #[test]
    fn equal_parameters_give_unit_lhs() {
        let r = ejs_diffusion_check(&Potential::Exp, 2, 1.0, 1.0, 0.5, 1e-2, 10, &SeedPath::new(1, "eq")).unwrap();
        assert_eq!(r.lhs.mean, 1.0);
        assert!((r.rhs - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wedge_partition_single_level() {
        // N = 1: ∫_0^t e^{-B0(s) + B1(t) - B1(s)} ds by left points
        let noise = Noise::generate(1, 50, 0.02, &SeedPath::new(2, "w"), 0);
        let b0 = noise.brownian_path(0);
        let b1 = noise.brownian_path(1);
        let direct: f64 = (0..50).map(|k| (-b0[k] + b1[50] - b1[k]).exp() * 0.02).sum();
        assert!((wedge_log_partition(&noise) - direct.ln()).abs() < 1e-12);
    }
}
