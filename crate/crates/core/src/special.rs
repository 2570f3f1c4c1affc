//! Closed-form special functions: log-gamma, log-beta and polygamma of order 0..=3.
//!
//! Evaluated by upward recurrence to x >= 12 followed by the Stirling/asymptotic
//! series. Positive real arguments only, which is all the weight families need.

use std::f64::consts::PI;

// Bernoulli numbers B_2, B_4, ..., B_16.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

const SHIFT: f64 = 12.0;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Natural log of Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    let mut x = x;
    let mut acc = 0.0;
    while x < SHIFT {
        acc -= x.ln();
        x += 1.0;
    }
    let mut series = 0.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut pow = inv;
    for (k, b) in BERNOULLI.iter().enumerate() {
        let n = 2.0 * (k as f64 + 1.0);
        series += b / (n * (n - 1.0)) * pow;
        pow *= inv2;
    }
    acc + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Polygamma Ψ_n(x) = d^{n+1}/dx^{n+1} ln Γ(x), for n in 0..=3 and x > 0.
pub fn polygamma(n: u32, x: f64) -> f64 {
    assert!(n <= 3, "polygamma order {n} not supported");
    assert!(x > 0.0, "polygamma requires x > 0, got {x}");
    let nf = n as f64;
    let fact = [1.0, 1.0, 2.0, 6.0][n as usize];
    // Ψ_n(x) = Ψ_n(x+1) - (-1)^n n! / x^{n+1}
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let mut x = x;
    let mut acc = 0.0;
    while x < SHIFT {
        acc -= sign * fact / x.powi(n as i32 + 1);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let asym = match n {
        0 => {
            let mut s = x.ln() - 0.5 * inv;
            let mut pow = inv2;
            for (k, b) in BERNOULLI.iter().enumerate() {
                let m = 2.0 * (k as f64 + 1.0);
                s -= b / m * pow;
                pow *= inv2;
            }
            s
        }
        _ => {
            // (-1)^{n+1} Ψ_n(x) ~ (n-1)!/x^n + n!/(2x^{n+1})
            //                    + Σ B_{2k} (2k+n-1)!/((2k)! x^{2k+n})
            let fm1 = [1.0, 1.0, 1.0, 2.0][n as usize];
            let mut s = fm1 * inv.powi(n as i32) + 0.5 * fact * inv.powi(n as i32 + 1);
            let mut pow = inv.powi(n as i32 + 2);
            for (k, b) in BERNOULLI.iter().enumerate() {
                let two_k = 2.0 * (k as f64 + 1.0);
                // (2k+n-1)!/(2k)! = Π_{j=1}^{n-1} (2k+j)
                let mut ratio = 1.0;
                let mut j = 1.0;
                while j < nf {
                    ratio *= two_k + j;
                    j += 1.0;
                }
                s += b * ratio * pow;
                pow *= inv2;
            }
            if n % 2 == 1 {
                s
            } else {
                -s
            }
        }
    };
    acc + asym
}

pub fn digamma(x: f64) -> f64 {
    polygamma(0, x)
}

pub fn trigamma(x: f64) -> f64 {
    polygamma(1, x)
}

/// Riemann zeta at 3, used for Ψ_2(1) = -2ζ(3).
pub const ZETA3: f64 = 1.202_056_903_159_594_2;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(2.0)).abs() < 1e-14);
        assert!((ln_gamma(0.5) - 0.5 * PI.ln()).abs() < 1e-13);
        assert!((ln_gamma(10.0) - 362880f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(1e-3) - 6.907_178_885_383_853).abs() < 1e-11);
    }

    #[test]
    fn polygamma_at_one() {
        assert!((digamma(1.0) + EULER_GAMMA).abs() < 1e-14);
        assert!((trigamma(1.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((polygamma(2, 1.0) + 2.0 * ZETA3).abs() < 1e-13);
        assert!((polygamma(3, 1.0) - PI.powi(4) / 15.0).abs() < 1e-12);
    }

    #[test]
    fn polygamma_at_half() {
        let ln2 = 2f64.ln();
        assert!((digamma(0.5) + EULER_GAMMA + 2.0 * ln2).abs() < 1e-14);
        assert!((trigamma(0.5) - PI * PI / 2.0).abs() < 1e-13);
        assert!((polygamma(2, 0.5) + 14.0 * ZETA3).abs() < 1e-12);
        assert!((polygamma(3, 0.5) - PI.powi(4)).abs() < 1e-11);
    }

    #[test]
    fn recurrence_consistency() {
        for &x in &[0.3, 1.7, 5.5, 20.0, 150.0] {
            for n in 0..=3u32 {
                let fact = [1.0, 1.0, 2.0, 6.0][n as usize];
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let lhs = polygamma(n, x + 1.0) - polygamma(n, x);
                let rhs = sign * fact / x.powi(n as i32 + 1);
                assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn derivative_consistency() {
        let h = 1e-4;
        for &x in &[0.7, 3.2, 14.0] {
            let fd = (ln_gamma(x + h) - ln_gamma(x - h)) / (2.0 * h);
            assert!((fd - digamma(x)).abs() < 1e-7);
            for n in 0..3u32 {
                let fd = (polygamma(n, x + h) - polygamma(n, x - h)) / (2.0 * h);
                let d = polygamma(n + 1, x);
                assert!((fd - d).abs() < 1e-6 * (1.0 + d.abs()), "n={n} x={x}");
            }
        }
    }
}
