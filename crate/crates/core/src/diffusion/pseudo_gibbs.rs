//! Pseudo-Gibbs expectations over ordered jump times built from `V''` along a stored
//! trajectory. Coordinate `u_{j+1}` is active on `[s_j, s_{j+1}]` (with `s_N = t`), so the
//! weight of `s_0 < … < s_{N-1}` is
//! `Π_j V''(u_{j+1}(s_j)) · exp(-Σ_j ∫_{s_j}^{s_{j+1}} V''(u_{j+1}))`.

use super::{DiffusionTrajectory, Potential};
use crate::error::{Error, Result};
use crate::rng::{Component, SeedPath};
use crate::stats::McEstimate;
use rand::Rng;

pub const DEFAULT_N_MAX: usize = 4;
const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// `V''(u_j)` and its running integral on the base grid of one trajectory.
#[derive(Debug, Clone)]
pub struct PseudoGibbs {
    n: usize,
    dt: f64,
    horizon: f64,
    steps: usize,
    /// `rate[j-1][k] = V''(u_j(t_k))`.
    rate: Vec<Vec<f64>>,
    /// `cum[j-1][k] = ∫_0^{t_k} V''(u_j)`, trapezoidal.
    cum: Vec<Vec<f64>>,
}

impl PseudoGibbs {
    pub fn new(traj: &DiffusionTrajectory, potential: &Potential, n_max: usize) -> Result<Self> {
        if traj.n > n_max {
            return Err(Error::DimensionTooLarge { n: traj.n, max: n_max });
        }
        if traj.steps == 0 {
            return Err(Error::InterpolationError("trajectory has no steps".into()));
        }
        let mut rate = Vec::with_capacity(traj.n);
        let mut cum = Vec::with_capacity(traj.n);
        for j in 1..=traj.n {
            let r: Vec<f64> = (0..=traj.steps).map(|k| potential.d2(traj.u_at(k, j))).collect();
            let mut c = Vec::with_capacity(r.len());
            let mut acc = 0.0;
            c.push(0.0);
            for k in 0..traj.steps {
                acc += 0.5 * traj.dt * (r[k] + r[k + 1]);
                c.push(acc);
            }
            rate.push(r);
            cum.push(c);
        }
        Ok(PseudoGibbs {
            n: traj.n,
            dt: traj.dt,
            horizon: traj.steps as f64 * traj.dt,
            steps: traj.steps,
            rate,
            cum,
        })
    }

    fn locate(&self, s: f64) -> Result<(usize, f64)> {
        if !(0.0..=self.horizon * (1.0 + 1e-12)).contains(&s) {
            return Err(Error::InterpolationError(format!("time {s} outside [0, {}]", self.horizon)));
        }
        let x = (s / self.dt).min(self.steps as f64);
        let k = (x.floor() as usize).min(self.steps - 1);
        Ok((k, x - k as f64))
    }

    #[inline]
    fn interp(table: &[f64], k: usize, w: f64) -> f64 {
        table[k] * (1.0 - w) + table[k + 1] * w
    }

    /// Weight of an increasing tuple `s_0 < … < s_{N-1}` in `(0, t)`.
    pub fn weight(&self, s: &[f64]) -> Result<f64> {
        let mut log_w = 0.0;
        let mut prod = 1.0;
        for j in 0..self.n {
            let (k, w) = self.locate(s[j])?;
            let end = if j + 1 < self.n { s[j + 1] } else { self.horizon };
            let (ke, we) = self.locate(end)?;
            prod *= Self::interp(&self.rate[j], k, w);
            log_w -= Self::interp(&self.cum[j], ke, we) - Self::interp(&self.cum[j], k, w);
        }
        Ok(prod * log_w.exp())
    }

    /// Randomised Halton quadrature over the simplex: `points` per shift, `shifts`
    /// independent Cranley–Patterson rotations; the error is the spread across shifts.
    pub fn expect_qmc<F: Fn(f64) -> f64>(
        &self,
        f: F,
        points: usize,
        shifts: usize,
        path: &SeedPath,
        replica: u64,
    ) -> Result<McEstimate> {
        let mut rng = path.rng(replica, Component::Auxiliary);
        let d = self.n;
        let mut fact = 1.0;
        for k in 2..=d {
            fact *= k as f64;
        }
        let volume = self.horizon.powi(d as i32) / fact;
        let mut per_shift = Vec::with_capacity(shifts);
        let mut x = vec![0.0; d];
        for _ in 0..shifts {
            let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let mut acc = 0.0;
            for i in 1..=points as u64 {
                for (c, xv) in x.iter_mut().enumerate() {
                    *xv = ((radical_inverse(i, PRIMES[c]) + shift[c]) % 1.0) * self.horizon;
                }
                x.sort_by(|a, b| a.total_cmp(b));
                acc += self.weight(&x)? * f(x[0]);
            }
            per_shift.push(volume * acc / points as f64);
        }
        Ok(McEstimate::from_samples(&per_shift, path.master))
    }

    /// Same expectation from the backward level recursion on the base grid.
    pub fn expect_recursion<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let m = self.steps;
        let last = self.n - 1;
        // a[k]: weight of being on the current level at t_k, scanning from t backwards
        let mut a: Vec<f64> = (0..=m)
            .map(|k| (-(self.cum[last][m] - self.cum[last][k])).exp())
            .collect();
        for lvl in (0..last).rev() {
            let upper = &self.rate[lvl + 1];
            let c = &self.cum[lvl];
            let mut next = vec![0.0; m + 1];
            for k in (0..m).rev() {
                let decay = (-(c[k + 1] - c[k])).exp();
                let g0 = upper[k] * a[k];
                let g1 = upper[k + 1] * a[k + 1] * decay;
                next[k] = next[k + 1] * decay + 0.5 * self.dt * (g0 + g1);
            }
            a = next;
        }
        let r = &self.rate[0];
        let g: Vec<f64> = (0..=m).map(|k| f(k as f64 * self.dt) * r[k] * a[k]).collect();
        (0..m).map(|k| 0.5 * self.dt * (g[k] + g[k + 1])).sum()
    }
}

/// Quasi-random pseudo-Gibbs expectation of `F(s_0)` for one stored trajectory.
pub fn pseudo_gibbs<F: Fn(f64) -> f64>(
    traj: &DiffusionTrajectory,
    potential: &Potential,
    f: F,
    points: usize,
    path: &SeedPath,
    replica: u64,
) -> Result<McEstimate> {
    PseudoGibbs::new(traj, potential, DEFAULT_N_MAX)?.expect_qmc(f, points, 16, path, replica)
}
