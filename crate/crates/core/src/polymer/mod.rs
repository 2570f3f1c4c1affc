//! Stationary integrable polymer environments and their partition functions.

mod lattice;
mod model;

pub use lattice::{
    characteristic_e, dump_lattice, exit_law, gibbs_derivative_a, gibbs_exp_exit, log_partition,
    logaddexp, nsew_increments, ExitLaw, Nsew, PartitionLattice,
};
pub use model::{BoundaryParams, Model, ModelSpec};

use crate::error::Result;
use crate::mellin::MellinDistribution;
use crate::rng::{Component, SeedPath};
use rand::distr::Open01;
use rand::Rng;
use std::sync::Arc;

/// How boundary weights are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryDraw {
    /// Inverse-CDF of stored uniforms, so that changing `(a, b)` couples the weights.
    Coupled,
    /// Exact gamma-based draws; faster, no coupling across parameters.
    Direct,
}

/// Sampled edge weights on the `(m+1) × (n+1)` grid, all stored as logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub spec: ModelSpec,
    pub params: BoundaryParams,
    pub m: usize,
    pub n: usize,
    /// `ln R1_{i,0}` for `i = 1..=m`.
    pub log_r1: Vec<f64>,
    /// `ln R2_{0,j}` for `j = 1..=n`.
    pub log_r2: Vec<f64>,
    /// `ln Y1` at interior vertex `(i, j)`, row-major in `i`.
    pub log_y1: Vec<f64>,
    pub log_y2: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub seed: u64,
    pub lineage: String,
}

impl Environment {
    #[inline]
    pub fn bulk_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && j >= 1 && i <= self.m && j <= self.n);
        (i - 1) * self.n + (j - 1)
    }

    /// `ln Y1` of the edge entering interior vertex `(i, j)` from the left.
    #[inline]
    pub fn y1(&self, i: usize, j: usize) -> f64 {
        self.log_y1[self.bulk_index(i, j)]
    }

    /// `ln Y2` of the edge entering interior vertex `(i, j)` from below.
    #[inline]
    pub fn y2(&self, i: usize, j: usize) -> f64 {
        self.log_y2[self.bulk_index(i, j)]
    }
}

/// Draws environments for fixed `(spec, a, b)`.
#[derive(Debug, Clone)]
pub struct EnvironmentSampler {
    spec: ModelSpec,
    params: BoundaryParams,
    draw: BoundaryDraw,
    d1: Option<Arc<MellinDistribution>>,
    d2: Option<Arc<MellinDistribution>>,
}

impl EnvironmentSampler {
    pub fn new(spec: ModelSpec, params: BoundaryParams, draw: BoundaryDraw) -> Result<Self> {
        spec.check(&params)?;
        let (d1, d2) = match draw {
            BoundaryDraw::Coupled => (
                Some(Arc::new(MellinDistribution::new(spec.f1(), params.a)?)),
                Some(Arc::new(MellinDistribution::new(spec.f2(), params.b)?)),
            ),
            BoundaryDraw::Direct => (None, None),
        };
        Ok(EnvironmentSampler {
            spec,
            params,
            draw,
            d1,
            d2,
        })
    }

    /// Coupled sampler reusing already tabulated boundary laws.
    pub fn with_laws(
        spec: ModelSpec,
        d1: Arc<MellinDistribution>,
        d2: Arc<MellinDistribution>,
    ) -> Result<Self> {
        let params = BoundaryParams { a: d1.a(), b: d2.a() };
        spec.check(&params)?;
        Ok(EnvironmentSampler {
            spec,
            params,
            draw: BoundaryDraw::Coupled,
            d1: Some(d1),
            d2: Some(d2),
        })
    }

    pub fn spec(&self) -> ModelSpec {
        self.spec
    }

    pub fn params(&self) -> BoundaryParams {
        self.params
    }

    pub fn law1(&self) -> Option<&MellinDistribution> {
        self.d1.as_deref()
    }

    pub fn sample(&self, m: usize, n: usize, path: &SeedPath, replica: u64) -> Result<Environment> {
        let mut h = path.rng(replica, Component::Horizontal);
        let mut v = path.rng(replica, Component::Vertical);
        let mut bulk = path.rng(replica, Component::Bulk);
        let (log_r1, log_r2, u1, u2) = match self.draw {
            BoundaryDraw::Coupled => {
                let d1 = self.d1.as_ref().expect("coupled sampler has laws");
                let d2 = self.d2.as_ref().expect("coupled sampler has laws");
                let u1: Vec<f64> = (0..m).map(|_| h.sample(Open01)).collect();
                let u2: Vec<f64> = (0..n).map(|_| v.sample(Open01)).collect();
                let r1 = u1.iter().map(|&u| d1.sample_log(u)).collect::<Result<Vec<_>>>()?;
                let r2 = u2.iter().map(|&u| d2.sample_log(u)).collect::<Result<Vec<_>>>()?;
                (r1, r2, u1, u2)
            }
            BoundaryDraw::Direct => {
                let f1 = self.spec.f1();
                let f2 = self.spec.f2();
                let r1 = (0..m).map(|_| f1.sample_log_direct(self.params.a, &mut h)).collect();
                let r2 = (0..n).map(|_| f2.sample_log_direct(self.params.b, &mut v)).collect();
                (r1, r2, vec![], vec![])
            }
        };
        let mut log_y1 = Vec::with_capacity(m * n);
        let mut log_y2 = Vec::with_capacity(m * n);
        for _ in 0..m * n {
            let (a, b) = self.spec.sample_bulk_logs(&mut bulk);
            log_y1.push(a);
            log_y2.push(b);
        }
        Ok(Environment {
            spec: self.spec,
            params: self.params,
            m,
            n,
            log_r1,
            log_r2,
            log_y1,
            log_y2,
            u1,
            u2,
            seed: path.master,
            lineage: path.lineage(Some(replica)),
        })
    }
}

/// Coupled environment for a single seed.
pub fn build_environment(
    spec: ModelSpec,
    params: BoundaryParams,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<Environment> {
    let sampler = EnvironmentSampler::new(spec, params, BoundaryDraw::Coupled)?;
    sampler.sample(m, n, &SeedPath::new(seed, "environment"), 0)
}

/// Finite-difference derivatives of `ln Z` in the boundary parameters, all computed
/// on coupled environments (same uniforms, same bulk).
#[derive(Debug, Clone)]
pub struct CoupledDerivatives {
    spec: ModelSpec,
    h: f64,
    d1: [Arc<MellinDistribution>; 3],
    d2: [Arc<MellinDistribution>; 3],
}

impl CoupledDerivatives {
    pub fn new(spec: ModelSpec, params: BoundaryParams, h: f64) -> Result<Self> {
        let law = |f: crate::mellin::WeightFamily, x: f64| -> Result<Arc<MellinDistribution>> {
            Ok(Arc::new(MellinDistribution::new(f, x)?))
        };
        let (a, b) = (params.a, params.b);
        Ok(CoupledDerivatives {
            spec,
            h,
            d1: [law(spec.f1(), a - h)?, law(spec.f1(), a)?, law(spec.f1(), a + h)?],
            d2: [law(spec.f2(), b - h)?, law(spec.f2(), b)?, law(spec.f2(), b + h)?],
        })
    }

    /// Environment with `a` shifted by `da*h` and `b` by `db*h`, `da, db ∈ {-1, 0, 1}`.
    pub fn environment(
        &self,
        da: i32,
        db: i32,
        m: usize,
        n: usize,
        path: &SeedPath,
        replica: u64,
    ) -> Result<Environment> {
        let s = EnvironmentSampler::with_laws(
            self.spec,
            self.d1[(da + 1) as usize].clone(),
            self.d2[(db + 1) as usize].clone(),
        )?;
        s.sample(m, n, path, replica)
    }

    fn log_z(&self, da: i32, db: i32, m: usize, n: usize, path: &SeedPath, r: u64) -> Result<f64> {
        Ok(log_partition(&self.environment(da, db, m, n, path, r)?).log_z_mn())
    }

    /// Central difference `∂_a ln Z`.
    pub fn d_a(&self, m: usize, n: usize, path: &SeedPath, replica: u64) -> Result<f64> {
        let up = self.log_z(1, 0, m, n, path, replica)?;
        let dn = self.log_z(-1, 0, m, n, path, replica)?;
        Ok((up - dn) / (2.0 * self.h))
    }

    /// Central difference `∂_b ln Z`.
    pub fn d_b(&self, m: usize, n: usize, path: &SeedPath, replica: u64) -> Result<f64> {
        let up = self.log_z(0, 1, m, n, path, replica)?;
        let dn = self.log_z(0, -1, m, n, path, replica)?;
        Ok((up - dn) / (2.0 * self.h))
    }

    /// Four-point mixed difference `∂_a ∂_b ln Z`.
    pub fn d_ab(&self, m: usize, n: usize, path: &SeedPath, replica: u64) -> Result<f64> {
        let pp = self.log_z(1, 1, m, n, path, replica)?;
        let pm = self.log_z(1, -1, m, n, path, replica)?;
        let mp = self.log_z(-1, 1, m, n, path, replica)?;
        let mm = self.log_z(-1, -1, m, n, path, replica)?;
        Ok((pp - pm - mp + mm) / (4.0 * self.h * self.h))
    }

    /// Tabulated law of `R1` at the centre point.
    pub fn law1(&self) -> &MellinDistribution {
        &self.d1[1]
    }
}

/// Central-difference `∂_a ln Z` on a coupled pair of environments at `a ± h`.
pub fn deriv_log_z_a(
    spec: ModelSpec,
    params: BoundaryParams,
    m: usize,
    n: usize,
    seed: u64,
    h: f64,
) -> Result<f64> {
    CoupledDerivatives::new(spec, params, h)?.d_a(m, n, &SeedPath::new(seed, "environment"), 0)
}
