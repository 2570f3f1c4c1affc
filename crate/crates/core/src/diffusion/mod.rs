//! Semi-discrete diffusion system driven by a convex decreasing potential `V`:
//! stationary one-site laws, an adaptive Euler–Maruyama integrator with shared-noise
//! coupling, pseudo-Gibbs expectations and the observables built on them.

mod dump;
mod integrate;
mod nu;
mod observables;
mod potential;
mod pseudo_gibbs;

pub use dump::{read_trajectory, write_trajectory, TrajectoryDump};
pub use integrate::{integrate, DiffusionConfig, DiffusionTrajectory, Integrator, Noise};
pub use nu::{nu_sample, psi_v, NuTheta};
pub use observables::{
    characteristic_e_diffusion, ejs_diffusion_check, ejs_log_rhs_expansion, expected_w, phi,
    stationarity_sample, wedge_bound, wedge_log_partition, wedge_mc, wedge_theta0, CoupledDiffusion,
    DiffusionDerivatives, DiffusionEjs, StationaritySample, WedgeBound, WedgeCheck,
};
pub use potential::{Potential, PotentialCertificate};
pub use pseudo_gibbs::{pseudo_gibbs, PseudoGibbs, DEFAULT_N_MAX};
