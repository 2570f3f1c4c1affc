use super::{NuTheta, Potential};
use crate::error::{Error, Result};
use crate::rng::{splitmix64, Component, SeedPath};
use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub n: usize,
    /// Parameter of the initial law `ν_η`.
    pub eta: f64,
    /// Drift parameter of the first coordinate.
    pub theta: f64,
    pub dt: f64,
    pub horizon: f64,
    /// Maximum number of step halvings before giving up.
    pub max_refine: u32,
    /// A step is rejected when any drift displacement exceeds this.
    pub max_drift_step: f64,
}

impl DiffusionConfig {
    pub fn new(n: usize, eta: f64, theta: f64, dt: f64, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("n", "need at least one coordinate"));
        }
        for (name, v) in [("eta", eta), ("theta", theta), ("dt", dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::out_of_domain(name, v, "(0, inf)"));
            }
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::out_of_domain("horizon", horizon, "[0, inf)"));
        }
        Ok(DiffusionConfig {
            n,
            eta,
            theta,
            dt,
            horizon,
            max_refine: 16,
            max_drift_step: 2.0,
        })
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Step actually used so that `steps · dt = horizon`.
    pub fn effective_dt(&self) -> f64 {
        let s = self.steps();
        if s == 0 {
            self.dt
        } else {
            self.horizon / s as f64
        }
    }

    pub fn with_params(&self, eta: f64, theta: f64) -> Self {
        DiffusionConfig { eta, theta, ..*self }
    }
}

/// Brownian increments for `B_0..B_N` on the base grid plus the initial uniforms.
/// Finer increments come from a Brownian bridge whose normals are a pure function of
/// `(step, node)`, so every refinement of the same noise is reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct Noise {
    pub n: usize,
    pub steps: usize,
    pub dt: f64,
    /// Row `k` holds the increments of `B_0..B_N` over step `k`.
    pub increments: Vec<f64>,
    pub uniforms: Vec<f64>,
    refine_key: u64,
    pub seed: u64,
    pub lineage: String,
}

impl Noise {
    pub fn generate(n: usize, steps: usize, dt: f64, path: &SeedPath, replica: u64) -> Self {
        let mut rng = path.rng(replica, Component::Noise);
        let sd = dt.sqrt();
        let increments = (0..steps * (n + 1))
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut init = path.rng(replica, Component::Initial);
        let uniforms = (0..n).map(|_| init.sample(Open01)).collect();
        let refine_key = path.rng(replica, Component::Refinement).next_u64();
        Noise {
            n,
            steps,
            dt,
            increments,
            uniforms,
            refine_key,
            seed: path.master,
            lineage: path.lineage(Some(replica)),
        }
    }

    #[inline]
    pub fn row(&self, step: usize) -> &[f64] {
        &self.increments[step * (self.n + 1)..(step + 1) * (self.n + 1)]
    }

    /// `B_0` at every base grid time.
    pub fn b0_path(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for k in 0..self.steps {
            acc += self.row(k)[0];
            out.push(acc);
        }
        out
    }

    /// `B_j` at every base grid time, `j = 0..=N`.
    pub fn brownian_path(&self, j: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for k in 0..self.steps {
            acc += self.row(k)[j];
            out.push(acc);
        }
        out
    }

    fn bridge_normals(&self, step: usize, node: u64, out: &mut [f64]) {
        let key = splitmix64(self.refine_key ^ splitmix64((step as u64).wrapping_mul(0x9E37_79B9) ^ splitmix64(node)));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }
}

/// Solution on the base grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionTrajectory {
    pub n: usize,
    pub eta: f64,
    pub theta: f64,
    pub dt: f64,
    pub horizon: f64,
    pub steps: usize,
    /// `u_j(t_k)`, row-major in `k`.
    pub u: Vec<f64>,
    pub b0: Vec<f64>,
    /// `W_{N,t_k}(η, θ)`.
    pub w: Vec<f64>,
    /// Number of rejected steps that were split.
    pub refinements: usize,
    pub potential: String,
    pub seed: u64,
    pub lineage: String,
}

impl DiffusionTrajectory {
    /// `u_j(t_k)` for `j = 1..=N`.
    #[inline]
    pub fn u_at(&self, k: usize, j: usize) -> f64 {
        self.u[k * self.n + (j - 1)]
    }

    pub fn w_final(&self) -> f64 {
        *self.w.last().expect("nonempty")
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Euler–Maruyama integrator with the coupled initial law `ν_η`.
#[derive(Debug, Clone)]
pub struct Integrator {
    potential: Potential,
    cfg: DiffusionConfig,
    nu_eta: Arc<NuTheta>,
}

impl Integrator {
    pub fn new(potential: &Potential, cfg: DiffusionConfig) -> Result<Self> {
        let nu = Arc::new(NuTheta::new(potential, cfg.eta)?);
        Ok(Integrator {
            potential: potential.clone(),
            cfg,
            nu_eta: nu,
        })
    }

    /// Reuses an already tabulated initial law; `nu.theta()` must equal `cfg.eta`.
    pub fn with_nu(potential: &Potential, cfg: DiffusionConfig, nu: Arc<NuTheta>) -> Result<Self> {
        if (nu.theta() - cfg.eta).abs() > 1e-15 * cfg.eta {
            return Err(Error::config("eta", format!("law built at {} but eta = {}", nu.theta(), cfg.eta)));
        }
        Ok(Integrator {
            potential: potential.clone(),
            cfg,
            nu_eta: nu,
        })
    }

    pub fn config(&self) -> &DiffusionConfig {
        &self.cfg
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn noise(&self, path: &SeedPath, replica: u64) -> Noise {
        Noise::generate(self.cfg.n, self.cfg.steps(), self.cfg.effective_dt(), path, replica)
    }

    fn check_noise(&self, noise: &Noise) -> Result<()> {
        if noise.n != self.cfg.n || noise.steps != self.cfg.steps() {
            return Err(Error::DimensionError(format!(
                "noise is {} x {} but the system needs {} x {}",
                noise.n,
                noise.steps,
                self.cfg.n,
                self.cfg.steps()
            )));
        }
        Ok(())
    }

    /// `u_j(0) = H_η(U_j)`.
    pub fn initial(&self, noise: &Noise) -> Result<Vec<f64>> {
        noise.uniforms.iter().map(|&p| self.nu_eta.quantile(p)).collect()
    }

    /// Full trajectory; `force_depth = k` splits every base step into `2^k` substeps.
    pub fn run(&self, noise: &Noise, force_depth: u32) -> Result<DiffusionTrajectory> {
        self.check_noise(noise)?;
        let n = self.cfg.n;
        let steps = noise.steps;
        let mut traj = DiffusionTrajectory {
            n,
            eta: self.cfg.eta,
            theta: self.cfg.theta,
            dt: noise.dt,
            horizon: self.cfg.horizon,
            steps,
            u: Vec::with_capacity((steps + 1) * n),
            b0: Vec::with_capacity(steps + 1),
            w: Vec::with_capacity(steps + 1),
            refinements: 0,
            potential: self.potential.descriptor(),
            seed: noise.seed,
            lineage: noise.lineage.clone(),
        };
        let refinements = self.evolve(noise, force_depth, |k, u, b0| {
            traj.u.extend_from_slice(u);
            traj.b0.push(b0);
            traj.w.push(u.iter().sum::<f64>() - b0 + self.cfg.theta * k as f64 * noise.dt);
        })?;
        traj.refinements = refinements;
        Ok(traj)
    }

    /// `W_{N,T}(η, θ)` only.
    pub fn final_w(&self, noise: &Noise, force_depth: u32) -> Result<f64> {
        self.check_noise(noise)?;
        let mut w = 0.0;
        let last = noise.steps;
        self.evolve(noise, force_depth, |k, u, b0| {
            if k == last {
                w = u.iter().sum::<f64>() - b0 + self.cfg.theta * self.cfg.horizon;
            }
        })?;
        Ok(w)
    }

    /// Coordinates at the requested base-grid steps.
    pub fn snapshots(&self, noise: &Noise, at: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.check_noise(noise)?;
        let mut out = vec![Vec::new(); at.len()];
        self.evolve(noise, 0, |k, u, _| {
            for (slot, &s) in out.iter_mut().zip(at) {
                if s == k {
                    *slot = u.to_vec();
                }
            }
        })?;
        Ok(out)
    }

    fn evolve<F: FnMut(usize, &[f64], f64)>(&self, noise: &Noise, force_depth: u32, mut observe: F) -> Result<usize> {
        let mut u = self.initial(noise)?;
        let mut b0 = 0.0;
        let mut refinements = 0;
        observe(0, &u, b0);
        for k in 0..noise.steps {
            let db = noise.row(k);
            let t = k as f64 * noise.dt;
            refinements += self.advance(&mut u, db, noise.dt, k, 1, 0, force_depth, noise, t)?;
            b0 += db[0];
            observe(k + 1, &u, b0);
        }
        Ok(refinements)
    }

    #[allow(clippy::too_many_arguments)]
    fn advance(
        &self,
        u: &mut [f64],
        db: &[f64],
        h: f64,
        step: usize,
        node: u64,
        depth: u32,
        force: u32,
        noise: &Noise,
        t: f64,
    ) -> Result<usize> {
        if depth >= force {
            if let Some(next) = self.trial(u, db, h) {
                u.copy_from_slice(&next);
                return Ok(0);
            }
            if depth >= self.cfg.max_refine {
                return Err(Error::NumericalBlowup {
                    time: t,
                    detail: format!("step rejected after {depth} halvings (h = {h:e})"),
                });
            }
        }
        let mut z = vec![0.0; db.len()];
        noise.bridge_normals(step, node, &mut z);
        let half_sd = (h / 4.0).sqrt();
        let first: Vec<f64> = db.iter().zip(&z).map(|(d, z)| 0.5 * d + half_sd * z).collect();
        let second: Vec<f64> = db.iter().zip(&first).map(|(d, f)| d - f).collect();
        let a = self.advance(u, &first, 0.5 * h, step, 2 * node, depth + 1, force, noise, t)?;
        let b = self.advance(u, &second, 0.5 * h, step, 2 * node + 1, depth + 1, force, noise, t + 0.5 * h)?;
        Ok(a + b + usize::from(depth >= force))
    }

    /// One explicit step; `None` if it must be refined.
    fn trial(&self, u: &[f64], db: &[f64], h: f64) -> Option<Vec<f64>> {
        let v = &self.potential;
        let mut out = Vec::with_capacity(u.len());
        let mut prev_d1 = 0.0;
        for (j, &x) in u.iter().enumerate() {
            let d1 = v.d1(x);
            let drift = if j == 0 {
                (-d1 - self.cfg.theta) * h
            } else {
                (-d1 + prev_d1) * h
            };
            if !drift.is_finite() || drift.abs() > self.cfg.max_drift_step {
                return None;
            }
            let next = x + drift + db[j + 1] - if j == 0 { -db[0] } else { db[j] };
            if !next.is_finite() {
                return None;
            }
            out.push(next);
            prev_d1 = d1;
        }
        Some(out)
    }
}

/// Convenience: draw noise for `replica` and integrate.
pub fn integrate(
    potential: &Potential,
    cfg: DiffusionConfig,
    path: &SeedPath,
    replica: u64,
) -> Result<DiffusionTrajectory> {
    let it = Integrator::new(potential, cfg)?;
    let noise = it.noise(path, replica);
    it.run(&noise, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reintegration_is_bit_identical() {
        let cfg = DiffusionConfig::new(3, 1.0, 1.0, 1e-2, 1.0).unwrap();
        let path = SeedPath::new(5, "reint");
        let a = integrate(&Potential::Exp, cfg, &path, 2).unwrap();
        let b = integrate(&Potential::Exp, cfg, &path, 2).unwrap();
        assert_eq!(a, b);
        let it = Integrator::new(&Potential::Exp, cfg).unwrap();
        let noise = it.noise(&path, 2);
        assert_eq!(it.final_w(&noise, 0).unwrap(), a.w_final());
    }

    #[test]
    fn height_at_time_zero_is_sum_of_initial() {
        let cfg = DiffusionConfig::new(2, 0.8, 1.0, 1e-2, 0.5).unwrap();
        let t = integrate(&Potential::default_mixture(), cfg, &SeedPath::new(1, "w0"), 0).unwrap();
        assert!((t.w[0] - t.u_at(0, 1) - t.u_at(0, 2)).abs() < 1e-15);
        assert_eq!(t.w.len(), t.steps + 1);
    }

    #[test]
    fn sum_of_increments_telescopes() {
        // Σ_j du_j = -V'(u_N) dt - θ dt + dB_0 + dB_N
        let cfg = DiffusionConfig::new(3, 1.0, 1.2, 1e-3, 0.2).unwrap();
        let it = Integrator::new(&Potential::Exp, cfg).unwrap();
        let noise = it.noise(&SeedPath::new(3, "tele"), 0);
        let t = it.run(&noise, 0).unwrap();
        for k in 0..t.steps {
            let s0: f64 = (1..=3).map(|j| t.u_at(k, j)).sum();
            let s1: f64 = (1..=3).map(|j| t.u_at(k + 1, j)).sum();
            let row = noise.row(k);
            let expect = (-Potential::Exp.d1(t.u_at(k, 3)) - 1.2) * t.dt + row[0] + row[3];
            assert!((s1 - s0 - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn halved_step_uses_same_brownian_endpoints() {
        let cfg = DiffusionConfig::new(2, 1.0, 1.0, 1e-2, 1.0).unwrap();
        let it = Integrator::new(&Potential::Exp, cfg).unwrap();
        let noise = it.noise(&SeedPath::new(9, "half"), 0);
        let a = it.run(&noise, 0).unwrap();
        let b = it.run(&noise, 1).unwrap();
        assert_eq!(a.b0, b.b0);
        assert!((a.w_final() - b.w_final()).abs() < 0.1);
        assert!(b.refinements == 0);
    }

    #[test]
    fn deep_negative_start_is_refined() {
        let mut cfg = DiffusionConfig::new(1, 1.0, 1.0, 0.1, 0.2).unwrap();
        cfg.max_drift_step = 0.5;
        let it = Integrator::new(&Potential::Exp, cfg).unwrap();
        let mut noise = it.noise(&SeedPath::new(1, "deep"), 0);
        noise.uniforms[0] = 1e-300;
        let t = it.run(&noise, 0).unwrap();
        assert!(t.refinements > 0);
        assert!(t.w.iter().all(|w| w.is_finite()));
        cfg.max_refine = 1;
        let it = Integrator::new(&Potential::Exp, cfg).unwrap();
        assert!(matches!(it.run(&noise, 0), Err(Error::NumericalBlowup { .. })));
    }
}
