use kpzlab::diffusion::{
    ejs_diffusion_check, expected_w, integrate, read_trajectory, stationarity_sample, write_trajectory,
    CoupledDiffusion, DiffusionConfig, NuTheta, Potential, PseudoGibbs, DEFAULT_N_MAX,
};
use kpzlab::rng::SeedPath;
use kpzlab::stats::{ks_one_sample, McEstimate};
use std::f64::consts::PI;

#[test]
fn short_stationary_run_keeps_marginals() {
    for v in [Potential::Exp, Potential::default_mixture()] {
        let s = stationarity_sample(&v, 3, 1.0, 0.5, 1e-3, 600, &SeedPath::new(4, "stationary")).unwrap();
        let nu = NuTheta::new(&v, 1.0).unwrap();
        for col in s.half.iter().chain(&s.end) {
            let ks = ks_one_sample(col, |u| nu.cdf(u));
            assert!(ks.p_value > 1e-3, "{v:?}: p = {}", ks.p_value);
        }
        let est = McEstimate::from_samples(&s.w, 4);
        let exact = expected_w(&v, 1.0, 3, 0.5).unwrap();
        assert!(est.zscore(exact).abs() < 4.0, "{v:?}: {} vs {exact}", est.mean);
    }
}

#[test]
fn coupled_derivative_signs() {
    for v in [Potential::Exp, Potential::default_mixture()] {
        let cfg = DiffusionConfig::new(3, 0.8, 1.0, 1e-3, 1.0).unwrap();
        let cd = CoupledDiffusion::new(&v, cfg, 1e-3).unwrap();
        let path = SeedPath::new(8, "signs");
        for r in 0..10 {
            let d = cd.derivatives(&cd.noise(&path, r)).unwrap();
            let tol = 1e-6 * d.w.abs().max(1.0);
            assert!(d.d_eta <= tol, "{v:?} d_eta = {}", d.d_eta);
            assert!(d.d_theta >= -tol, "{v:?} d_theta = {}", d.d_theta);
            assert!(d.d_eta_theta >= -tol, "{v:?} d_eta_theta = {}", d.d_eta_theta);
            assert!(d.d_theta2 >= -tol, "{v:?} d_theta2 = {}", d.d_theta2);
        }
    }
}

#[test]
fn identity_holds_on_a_short_horizon() {
    let r = ejs_diffusion_check(&Potential::Exp, 2, 0.8, 1.0, PI * PI / 3.0, 2e-3, 2000, &SeedPath::new(1, "ejs"))
        .unwrap();
    assert!(r.zscore.abs() < 4.0, "z = {}", r.zscore);
    let eq = ejs_diffusion_check(&Potential::Exp, 2, 1.0, 1.0, 1.0, 1e-2, 10, &SeedPath::new(1, "eq")).unwrap();
    assert_eq!((eq.lhs.mean, eq.lhs.stderr, eq.rhs), (1.0, 0.0, 1.0));
}

#[test]
fn dump_round_trip_preserves_trajectory() {
    let cfg = DiffusionConfig::new(2, 1.0, 1.2, 1e-2, 0.5).unwrap();
    let traj = integrate(&Potential::default_mixture(), cfg, &SeedPath::new(3, "dump"), 7).unwrap();
    let mut buf = Vec::new();
    write_trajectory(&traj, &mut buf).unwrap();
    let back = read_trajectory(&mut buf.as_slice()).unwrap();
    assert_eq!((back.n, back.steps, back.eta, back.theta), (2, traj.steps, 1.0, 1.2));
    assert_eq!(back.u, traj.u);
    assert_eq!(back.w, traj.w);
    assert_eq!(back.potential, traj.potential);
    assert!(read_trajectory(&mut &buf[1..]).is_err());
}

#[test]
fn pseudo_gibbs_exit_tail_decreases_in_w() {
    let v = Potential::Exp;
    let cfg = DiffusionConfig::new(2, 1.0, 1.0, 1e-3, PI * PI / 3.0).unwrap();
    let traj = integrate(&v, cfg, &SeedPath::new(6, "pg"), 0).unwrap();
    let pg = PseudoGibbs::new(&traj, &v, DEFAULT_N_MAX).unwrap();
    let mass = pg.expect_recursion(|_| 1.0);
    assert!(mass > 0.0 && mass <= 1.0 + 1e-9, "mass {mass}");
    let tails: Vec<f64> = [0.0, 0.5, 1.0, 2.0]
        .iter()
        .map(|&w| pg.expect_recursion(|s| f64::from(u8::from(s > w))))
        .collect();
    assert!(tails.windows(2).all(|p| p[1] <= p[0]), "{tails:?}");
}
