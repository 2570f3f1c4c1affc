use super::{BoundaryParams, Environment, ModelSpec};
use crate::error::{Error, Result};
use crate::mellin::MellinDistribution;
use std::io::Write;

#[inline]
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// Forward table `ln Z_{i,j}` and backward bulk-only table `ln Z̃_{i,j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionLattice {
    pub m: usize,
    pub n: usize,
    log_z: Vec<f64>,
    log_zt: Vec<f64>,
}

impl PartitionLattice {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    pub fn log_z(&self, i: usize, j: usize) -> f64 {
        self.log_z[self.idx(i, j)]
    }

    pub fn log_z_mn(&self) -> f64 {
        self.log_z(self.m, self.n)
    }

    /// Bulk-only partition function from `(i, j)` to `(m, n)`, for `i, j >= 1`.
    pub fn log_z_tilde(&self, i: usize, j: usize) -> f64 {
        self.log_zt[self.idx(i, j)]
    }

    /// Row-major `(m+1) × (n+1)` table.
    pub fn table(&self) -> &[f64] {
        &self.log_z
    }
}

pub fn log_partition(env: &Environment) -> PartitionLattice {
    let (m, n) = (env.m, env.n);
    let w = n + 1;
    let mut z = vec![0.0; (m + 1) * w];
    for i in 1..=m {
        z[i * w] = z[(i - 1) * w] + env.log_r1[i - 1];
    }
    for j in 1..=n {
        z[j] = z[j - 1] + env.log_r2[j - 1];
    }
    for i in 1..=m {
        for j in 1..=n {
            let k = env.bulk_index(i, j);
            z[i * w + j] = logaddexp(
                z[(i - 1) * w + j] + env.log_y1[k],
                z[i * w + j - 1] + env.log_y2[k],
            );
        }
    }
    let mut zt = vec![f64::NEG_INFINITY; (m + 1) * w];
    if m >= 1 && n >= 1 {
        zt[m * w + n] = 0.0;
        for i in (1..=m).rev() {
            for j in (1..=n).rev() {
                if i == m && j == n {
                    continue;
                }
                let right = if i < m {
                    zt[(i + 1) * w + j] + env.y1(i + 1, j)
                } else {
                    f64::NEG_INFINITY
                };
                let up = if j < n {
                    zt[i * w + j + 1] + env.y2(i, j + 1)
                } else {
                    f64::NEG_INFINITY
                };
                zt[i * w + j] = logaddexp(right, up);
            }
        }
    }
    PartitionLattice {
        m,
        n,
        log_z: z,
        log_zt: zt,
    }
}

/// Quenched law of the exit points `t1`, `t2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitLaw {
    /// `Q(t1 = i)`, `i = 0..=m`.
    pub q1: Vec<f64>,
    /// `Q(t2 = j)`, `j = 0..=n`.
    pub q2: Vec<f64>,
}

impl ExitLaw {
    /// `Q(t1 > k)`.
    pub fn tail1(&self, k: usize) -> f64 {
        self.q1.iter().skip(k + 1).sum()
    }
}

pub fn exit_law(env: &Environment, lattice: &PartitionLattice) -> Result<ExitLaw> {
    let (m, n) = (env.m, env.n);
    if m == 0 || n == 0 {
        return Err(Error::DimensionError(format!(
            "exit law needs m, n >= 1 (got {m} x {n})"
        )));
    }
    let total = lattice.log_z_mn();
    let mut q1 = vec![0.0; m + 1];
    let mut q2 = vec![0.0; n + 1];
    for i in 1..=m {
        let s = lattice.log_z(i, 0);
        q1[i] = (s + env.y2(i, 1) + lattice.log_z_tilde(i, 1) - total).exp();
    }
    for j in 1..=n {
        let w = lattice.log_z(0, j);
        q2[j] = (w + env.y1(1, j) + lattice.log_z_tilde(1, j) - total).exp();
    }
    q1[0] = q2[1..].iter().sum();
    q2[0] = q1[1..].iter().sum();
    Ok(ExitLaw { q1, q2 })
}

/// `Σ_i g(i) Q(t1 = i)`.
pub fn gibbs_exp_exit<G: Fn(usize) -> f64>(
    env: &Environment,
    lattice: &PartitionLattice,
    g: G,
) -> Result<f64> {
    let law = exit_law(env, lattice)?;
    Ok(law.q1.iter().enumerate().map(|(i, q)| g(i) * q).sum())
}

/// Gibbs expectation `E[Σ_{i<=t1} L(a, R1_{i,0})]`, the analytic `∂_a ln Z`.
pub fn gibbs_derivative_a(
    env: &Environment,
    lattice: &PartitionLattice,
    law1: &MellinDistribution,
) -> Result<f64> {
    let (m, n) = (env.m, env.n);
    let mut ls = Vec::with_capacity(m);
    for &lr in &env.log_r1 {
        ls.push(law1.log_deriv_l(lr.exp())?);
    }
    if n == 0 {
        return Ok(ls.iter().sum());
    }
    if m == 0 {
        return Ok(0.0);
    }
    let q = exit_law(env, lattice)?;
    let mut acc = 0.0;
    let mut prefix = 0.0;
    for i in 1..=m {
        prefix += ls[i - 1];
        acc += q.q1[i] * prefix;
    }
    Ok(acc)
}

/// Log-increments along the four sides of the rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Nsew {
    pub west: Vec<f64>,
    pub north: Vec<f64>,
    pub south: Vec<f64>,
    pub east: Vec<f64>,
    /// False when `a + b != a3`; Burke marginals are then not claimed.
    pub stationary: bool,
}

pub fn nsew_increments(env: &Environment, lattice: &PartitionLattice) -> Nsew {
    let (m, n) = (env.m, env.n);
    let east = (1..=n)
        .map(|j| lattice.log_z(m, j) - lattice.log_z(m, j - 1))
        .collect();
    let north = (1..=m)
        .map(|i| lattice.log_z(i, n) - lattice.log_z(i - 1, n))
        .collect();
    Nsew {
        west: env.log_r2.clone(),
        north,
        south: env.log_r1.clone(),
        east,
        stationary: env.spec.is_stationary(&env.params),
    }
}

/// `𝔢(a, b, m, n) = m - n ψ1^{f2}(b) / ψ1^{f1}(a)`.
pub fn characteristic_e(spec: ModelSpec, params: BoundaryParams, m: f64, n: f64) -> Result<f64> {
    spec.check(&params)?;
    let p1 = MellinDistribution::new(spec.f1(), params.a)?.psi(1);
    let p2 = MellinDistribution::new(spec.f2(), params.b)?.psi(1);
    Ok(m - n * p2 / p1)
}

/// Text dump: `#` header with grid size, seed, model and parameters, then the
/// row-major `ln Z` table with one grid row per line.
pub fn dump_lattice<W: Write>(env: &Environment, lattice: &PartitionLattice, out: &mut W) -> Result<()> {
    writeln!(
        out,
        "# m={} n={} seed={} lineage={} model={} theta={} mu={} beta={} a={} b={}",
        env.m,
        env.n,
        env.seed,
        env.lineage,
        env.spec.model,
        env.spec.theta,
        env.spec.mu,
        env.spec.beta,
        env.params.a,
        env.params.b
    )?;
    for i in 0..=env.m {
        let row: Vec<String> = (0..=env.n).map(|j| format!("{:.17e}", lattice.log_z(i, j))).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
