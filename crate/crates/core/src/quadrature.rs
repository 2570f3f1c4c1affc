//! Adaptive Gauss–Kronrod (10/21 point) quadrature and helpers for locating
//! the effective support of a log-density.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_980_224,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights attached to XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// A resolved subinterval of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    /// Panels sorted by left endpoint, covering the integration interval.
    pub panels: Vec<Panel>,
}

/// Single 21-point Kronrod rule with a QUADPACK-style error estimate.
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = resk * h;
    let resabs = resabs * h.abs();
    let resasc = resasc * h.abs();
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let eps50 = 50.0 * f64::EPSILON;
    if resabs > f64::MIN_POSITIVE / eps50 {
        err = err.max(eps50 * resabs);
    }
    (result, err)
}

#[derive(PartialEq)]
struct ByError(Panel);

impl Eq for ByError {}

impl PartialOrd for ByError {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ByError {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.error.total_cmp(&other.0.error)
    }
}

/// Globally adaptive integration of `f` over the finite interval `[a, b]`.
///
/// Stops once the summed error estimate is below `max(epsabs, epsrel*|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    epsabs: f64,
    epsrel: f64,
    max_panels: usize,
) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::QuadratureFailure(format!(
            "non-finite interval [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            panels: vec![],
        });
    }
    let (v, e) = gk21(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(ByError(Panel {
        a,
        b,
        value: v,
        error: e,
    }));
    let mut total = v;
    let mut total_err = e;
    while total_err > epsabs.max(epsrel * total.abs()) {
        if heap.len() >= max_panels {
            return Err(Error::QuadratureFailure(format!(
                "panel budget {max_panels} exhausted on [{a}, {b}]: value {total:e}, error {total_err:e}"
            )));
        }
        let ByError(worst) = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::QuadratureFailure(format!(
                "interval underflow near {mid} with error {total_err:e}"
            )));
        }
        let (v1, e1) = gk21(&f, worst.a, mid);
        let (v2, e2) = gk21(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(ByError(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        }));
        heap.push(ByError(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        }));
        if !total.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "non-finite partial integral on [{a}, {b}]"
            )));
        }
    }
    let mut panels: Vec<Panel> = heap.into_iter().map(|p| p.0).collect();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    // Re-sum in order so that the cumulative table and the total agree exactly.
    let value = panels.iter().map(|p| p.value).sum();
    let error = panels.iter().map(|p| p.error).sum();
    Ok(Integral {
        value,
        error,
        panels,
    })
}

/// Walks from `start` in direction `dir` (±1) with geometrically growing steps
/// until `logf` falls `drop` below `reference` or the `bound` is reached.
pub fn tail_limit<F: Fn(f64) -> f64 + ?Sized>(
    logf: &F,
    start: f64,
    dir: f64,
    reference: f64,
    drop: f64,
    bound: f64,
) -> Result<f64> {
    let mut step = 0.25;
    let mut y = start;
    for _ in 0..200 {
        let next = y + dir * step;
        let past_bound = if dir > 0.0 { next >= bound } else { next <= bound };
        if past_bound {
            return Ok(bound);
        }
        y = next;
        let v = logf(y);
        if v.is_nan() {
            return Err(Error::QuadratureFailure(format!("log-density NaN at {y}")));
        }
        if v < reference - drop {
            return Ok(y);
        }
        step *= 1.6;
    }
    Err(Error::QuadratureFailure(format!(
        "log-density does not decay from {start} in direction {dir}"
    )))
}

/// Golden-section refinement of a maximiser of a unimodal function within `[lo, hi]`.
pub fn refine_max<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, iters: usize) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::RootFindFailure(format!(
            "no sign change on [{lo}, {hi}]: f = {flo:e}, {fhi:e}"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_weights_sum_to_two() {
        let s: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        assert!((s - 2.0).abs() < 1e-14);
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((g - 2.0).abs() < 1e-14);
    }

    #[test]
    fn polynomial_exact() {
        let (v, _) = gk21(&|x: f64| x.powi(20), -1.0, 1.0);
        assert!((v - 2.0 / 21.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_integral() {
        let r = integrate(|x: f64| (-0.5 * x * x).exp(), -40.0, 40.0, 0.0, 1e-12, 500).unwrap();
        let exact = (2.0 * std::f64::consts::PI).sqrt();
        assert!((r.value - exact).abs() < 1e-12 * exact);
        assert!(r.panels.windows(2).all(|w| w[0].b == w[1].a));
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, 0.0, 1e-10, 2000).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, 0.0, 1e-14, 4);
        assert!(matches!(r, Err(Error::QuadratureFailure(_))));
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-14, 200).is_err());
    }
}
