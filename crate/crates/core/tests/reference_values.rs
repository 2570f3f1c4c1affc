//! Frozen reference values from independent closed forms (Gamma and polygamma).

use kpzlab::diffusion::{
    characteristic_e_diffusion, nu_sample, phi, psi_v, wedge_bound, wedge_theta0, Potential,
};
use kpzlab::identity::{ejs_rhs, EjsQuery, Side};
use kpzlab::mellin::{mellin_norm, psi, MellinDistribution, WeightFamily};
use kpzlab::polymer::{characteristic_e, BoundaryParams, Model, ModelSpec};
use kpzlab::special::{digamma, ln_gamma, polygamma, trigamma};
use kpzlab::tails::{chernoff_upper, MgfProfile};
use kpzlab::Error;
use std::f64::consts::PI;

const EXP: WeightFamily = WeightFamily::Exp { beta: 1.0 };
const INV_EXP: WeightFamily = WeightFamily::InvExp { beta: 1.0 };
const UNIFORM: WeightFamily = WeightFamily::BetaKernel { beta: 1.0 };

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

#[test]
fn special_function_values() {
    close(digamma(1.0), -0.577_215_664_901_532_9, 1e-13);
    close(trigamma(1.0), PI * PI / 6.0, 1e-13);
    close(polygamma(2, 1.0), -2.404_113_806_319_188_5, 1e-12);
    close(polygamma(3, 1.0), PI.powi(4) / 15.0, 1e-11);
    close(ln_gamma(0.5), 0.5 * PI.ln(), 1e-13);
}

#[test]
fn normalisers() {
    close(mellin_norm(EXP, 1.0).unwrap(), 1.0, 1e-10);
    close(mellin_norm(EXP, 3.0).unwrap(), 2.0, 2e-10);
    close(mellin_norm(INV_EXP, -0.5).unwrap(), 1.772_453_9, 1e-7);
    assert!(matches!(mellin_norm(EXP, -1.0), Err(Error::OutOfDomain { .. })));
}

#[test]
fn log_moment_cumulants() {
    close(psi(EXP, 1.0, 0).unwrap(), -0.577_215_7, 1e-7);
    close(psi(EXP, 1.0, 1).unwrap(), 1.644_934_1, 1e-7);
    for (f, a) in [(EXP, 2.5), (INV_EXP, -1.5), (UNIFORM, 0.7)] {
        close(psi(f, a, -1).unwrap(), mellin_norm(f, a).unwrap().ln(), 1e-9);
    }
}

#[test]
fn cdf_and_inverse() {
    let e = MellinDistribution::new(EXP, 1.0).unwrap();
    close(e.cdf(2f64.ln()), 0.5, 1e-9);
    close(e.cdf(1e6), 1.0, 1e-12);
    close(e.sample(0.5).unwrap(), 0.693_147_2, 1e-7);
    let u = MellinDistribution::new(UNIFORM, 1.0).unwrap();
    close(u.cdf(0.25), 0.25, 1e-9);
    close(u.sample(0.73).unwrap(), 0.73, 1e-9);
    let inv = MellinDistribution::new(INV_EXP, -1.0).unwrap();
    for p in [0.1, 0.37, 0.5, 0.9] {
        let x = inv.sample(p).unwrap();
        close(x * e.sample(1.0 - p).unwrap(), 1.0, 1e-8);
    }
}

#[test]
fn identity_right_hand_sides() {
    let s = ModelSpec::new(Model::InvGamma, 1.0, 2.0, 1.0).unwrap();
    let p = BoundaryParams { a: -1.0, b: -1.0 };
    let q = EjsQuery::new(s, p, 0.5, 1, 0, Side::PerturbA).unwrap();
    close(ejs_rhs(&q).unwrap(), 1.128_379_2, 1e-7);
    let q = EjsQuery::new(s, p, 0.5, 0, 1, Side::PerturbA).unwrap();
    close(ejs_rhs(&q).unwrap(), 1.772_453_9, 1e-7);
    let q = EjsQuery::new(s, p, 0.0, 3, 3, Side::PerturbB).unwrap();
    close(ejs_rhs(&q).unwrap(), 1.0, 1e-15);
    close(characteristic_e(s, p, 4.0, 0.0).unwrap(), 4.0, 1e-12);
    close(characteristic_e(s, p, 3.0, 3.0).unwrap(), 0.0, 1e-8);
}

#[test]
fn diffusion_reference_values() {
    let v = Potential::Exp;
    close(nu_sample(&v, 1.0, 0.5).unwrap(), 0.366_512_9, 1e-7);
    close(psi_v(&v, 1.0, -1).unwrap(), 0.0, 1e-9);
    close(psi_v(&v, 1.0, 1).unwrap(), 1.644_934_1, 1e-7);
    close(psi_v(&v, 1.0, 2).unwrap(), -2.404_113_8, 1e-7);
    close(phi(&v, 1.0, 3, 0.0).unwrap(), 0.0, 1e-9);
    close(phi(&v, 2.0, 1, 0.0).unwrap(), 0.0, 1e-9);
    close(characteristic_e_diffusion(&v, 1.0, 6, 0.0).unwrap(), -9.869_604_4, 1e-7);
    close(wedge_theta0(2, PI * PI / 3.0).unwrap(), 1.0, 1e-10);
    close(wedge_bound(2, PI * PI / 3.0, 0.0).unwrap().value, 1.0, 0.0);
}

#[test]
fn chernoff_on_normal_profile() {
    let grid: Vec<f64> = (0..=4000).map(|k| k as f64 * 1e-3).collect();
    let prof = MgfProfile::analytic(grid, |l| (0.5 * l * l).exp(), 1.0).unwrap();
    close(chernoff_upper(&prof, 2.0).unwrap(), 0.135_335_3, 1e-6);
    assert!(chernoff_upper(&prof, 0.0).unwrap() >= 1.0);
}
