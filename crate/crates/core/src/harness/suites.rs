use super::config::{ExperimentConfig, ExperimentKind};
use super::report::{Check, Table};
use crate::diffusion::{
    ejs_diffusion_check, ejs_log_rhs_expansion, expected_w, integrate, stationarity_sample, wedge_bound, wedge_mc,
    CoupledDiffusion, DiffusionConfig, NuTheta, Potential, PseudoGibbs, DEFAULT_N_MAX,
};
use crate::error::{Error, Result};
use crate::identity::{ejs_check, exit_tail_w, solve_lambda1, EjsQuery, EjsRow, Side};
use crate::mellin::{MellinDistribution, WeightFamily};
use crate::polymer::{
    characteristic_e, exit_law, log_partition, nsew_increments, BoundaryDraw, BoundaryParams, CoupledDerivatives,
    EnvironmentSampler, Model, ModelSpec,
};
use crate::rng::{replicate, SeedPath};
use crate::special::polygamma;
use crate::stats::{ks_one_sample, ks_two_sample, mean, McEstimate};
use crate::tails::{
    chernoff_upper, cubic_slope, geometric_grid, lower_tail_window, matched_synthetic_samples,
    synthetic_cubic_profile, tail_curve_mc, tail_exponent_fit, MgfProfile,
};

pub(crate) type Outcome = (Vec<Check>, Vec<Table>);

const SUITE: &str = "suite";

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Turns a module error raised while validating inputs into a field-level config error.
fn invalid<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::ConfigError { .. } => e,
        other => Error::config(field, other.to_string()),
    })
}

fn require(field: &str, ok: bool, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, message))
    }
}

/// Threshold that must be strictly positive.
fn positive(cfg: &ExperimentConfig, key: &str, default: f64) -> Result<f64> {
    let v: f64 = cfg.parse_or(SUITE, key, default)?;
    require(&format!("{SUITE}.{key}"), v > 0.0 && v.is_finite(), "must be positive")?;
    Ok(v)
}

fn probability(cfg: &ExperimentConfig, key: &str, default: f64) -> Result<f64> {
    let v: f64 = cfg.parse_or(SUITE, key, default)?;
    require(&format!("{SUITE}.{key}"), v > 0.0 && v < 1.0, "must lie in (0, 1)")?;
    Ok(v)
}

fn model_spec(cfg: &ExperimentConfig, model: Model) -> Result<ModelSpec> {
    let theta = cfg.parse_or("model", "theta", 1.0)?;
    let mu = cfg.parse_or("model", "mu", 2.0)?;
    let beta = cfg.parse_or("model", "beta", 1.0)?;
    invalid("model", ModelSpec::new(model, theta, mu, beta))
}

/// Model from `[model] name` with `a`, `b` defaulting to the stationary pair.
fn model_and_params(cfg: &ExperimentConfig) -> Result<(ModelSpec, BoundaryParams)> {
    let model: Model = cfg.parse_or("model", "name", Model::InvGamma)?;
    let spec = model_spec(cfg, model)?;
    let st = spec.stationary_params();
    let params = BoundaryParams {
        a: cfg.parse_or("model", "a", st.a)?,
        b: cfg.parse_or("model", "b", st.b)?,
    };
    invalid("model.a", spec.check(&params))?;
    Ok((spec, params))
}

fn potential_named(cfg: &ExperimentConfig, name: &str) -> Result<Potential> {
    match name {
        "exp" => Ok(Potential::Exp),
        "mixture" => match (cfg.raw("potential", "weights"), cfg.raw("potential", "rates")) {
            (None, None) => Ok(Potential::default_mixture()),
            _ => {
                let w = cfg.list_or::<f64>("potential", "weights", &[])?;
                let r = cfg.list_or::<f64>("potential", "rates", &[])?;
                invalid("potential", Potential::mixture(w, r))
            }
        },
        other => Err(Error::config("potential.name", format!("unknown potential `{other}`"))),
    }
}

fn potentials(cfg: &ExperimentConfig, default: &[&str]) -> Result<Vec<Potential>> {
    let default: Vec<String> = default.iter().map(|s| s.to_string()).collect();
    cfg.list_or::<String>("potential", "names", &default)?
        .iter()
        .map(|n| potential_named(cfg, n))
        .collect()
}

fn family(name: &str, param: f64) -> Result<WeightFamily> {
    let f = match name.to_ascii_lowercase().as_str() {
        "exp" => WeightFamily::Exp { beta: param },
        "invexp" => WeightFamily::InvExp { beta: param },
        "betakernel" => WeightFamily::BetaKernel { beta: param },
        "invbetakernel" => WeightFamily::InvBetaKernel { p: param },
        "ratio" => WeightFamily::Ratio { c: param },
        other => return Err(Error::config("suite.families", format!("unknown family `{other}`"))),
    };
    invalid("suite.family_param", f.validate())?;
    Ok(f)
}

fn collect<T>(v: Vec<Result<T>>) -> Result<Vec<T>> {
    v.into_iter().collect()
}

/// Default horizon `N ψ^V_1(θ)`, where the characteristic direction vanishes.
fn characteristic_horizon(cfg: &ExperimentConfig, pot: &Potential, theta: f64, n: usize) -> Result<f64> {
    match cfg.raw(SUITE, "horizon") {
        Some(_) => cfg.parse_or(SUITE, "horizon", 0.0),
        None => Ok(n as f64 * invalid("suite.theta", NuTheta::new(pot, theta))?.psi(1)?),
    }
}

pub(crate) fn run_suite(cfg: &ExperimentConfig) -> Result<Outcome> {
    let path = SeedPath::new(cfg.seed, cfg.kind.name());
    match cfg.kind {
        ExperimentKind::PsiCheck => psi_check(cfg, &path),
        ExperimentKind::EjsDiscrete => ejs_discrete(cfg, &path),
        ExperimentKind::Burke => burke(cfg, &path),
        ExperimentKind::DerivativeSigns => derivative_signs(cfg, &path),
        ExperimentKind::ExitTail => exit_tail(cfg, &path),
        ExperimentKind::MgfTails => mgf_tails(cfg, &path),
        ExperimentKind::TailMachinery => tail_machinery(cfg, &path),
        ExperimentKind::DiffusionStationarity => diffusion_stationarity(cfg, &path),
        ExperimentKind::EjsDiffusion => ejs_diffusion(cfg, &path),
        ExperimentKind::PseudoGibbs => pseudo_gibbs_suite(cfg, &path),
        ExperimentKind::DiffusionDerivs => diffusion_derivs(cfg, &path),
        ExperimentKind::WedgeBound => wedge(cfg, &path),
    }
}

fn psi_check(cfg: &ExperimentConfig, path: &SeedPath) -> Result<Outcome> {
    let names = cfg.list_or::<String>(SUITE, "families", &["exp".into(), "invexp".into(), "betakernel".into()])?;
    let param = cfg.parse_or(SUITE, "family_param", 1.5)?;
    let points = cfg.list_or(SUITE, "points", &[0.5, 1.0, 2.0, 3.5, 5.0])?;
    let orders = cfg.list_or(SUITE, "orders", &[-1i32, 0, 1, 2])?;
    let tol = positive(cfg, "tolerance", 1e-7)?;
    require("suite.points", points.iter().all(|&p| p > 0.0), "points must be positive")?;
    require("suite.orders", orders.iter().all(|k| (-1..=3).contains(k)), "orders must lie in -1..=3")?;
    let pmax = points.iter().cloned().fold(0.0, f64::max);
    let mut jobs = Vec::new();
    for name in &names {
        let f = family(name, param)?;
        for &p in &points {
            let a = match f {
                WeightFamily::Ratio { c } => -c * p / (pmax + 1.0),
                _ if f.domain().0 >= 0.0 => p,
                _ => -p,
            };
            invalid("suite.points", f.check_domain(a))?;
            jobs.push((f, a));
        }
    }
    let mut table = Table::new("psi", &["family", "param", "a", "k", "quadrature", "oracle", "abs_err", "seed"]);
    let mut worst: f64 = 0.0;
    let lineage = path.lineage(None);
    for (f, a) in jobs {
        let d = MellinDistribution::new(f, a)?;
        for &k in &orders {
            let q = d.psi(k);
            let o = f.closed_form_psi(a, k);
            let err = (q - o).abs();
            worst = worst.max(err);
            table.push([
                f.name().to_string(),
                param.to_string(),
                a.to_string(),
                k.to_string(),
                q.to_string(),
                o.to_string(),
                err.to_string(),
                lineage.clone(),
            ]);
        }
    }
    let mut checks = Vec::new();
    if !table.rows.is_empty() {
        checks.push(check("psi_oracle", worst <= tol, format!("max |err| = {worst:.3e} (tol {tol:e})")));
    }
    Ok((checks, vec![table]))
}

fn ejs_discrete(cfg: &ExperimentConfig, path: &SeedPath) -> Result<Outcome> {
    let models = cfg.list_or(SUITE, "models", &Model::ALL)?;
    let sizes = cfg.sizes_or(SUITE, "sizes", &[(1, 1), (3, 3), (6, 6), (1, 0), (0, 1)])?;
    let lambdas = cfg.list_or(SUITE, "lambdas", &[0.1, 0.25])?;
    let sides = cfg.list_or::<String>(SUITE, "sides", &["auto".into()])?;
    let replicas = cfg.parse_or(SUITE, "replicas", 200_000usize)?;
    let z_max = positive(cfg, "z_max", 4.0)?;
    let rel_max = positive(cfg, "rel_stderr_max", 0.01)?;
    require("suite.replicas", replicas >= 2, "need at least two replicas")?;
    require("suite.lambdas", lambdas.iter().all(|&l| l >= 0.0), "lambdas must be nonnegative")?;
    let auto = sides.iter().any(|s| s == "auto");
    let explicit: Vec<Side> = sides
        .iter()
        .filter(|s| s.as_str() != "auto")
        .map(|s| match s.as_str() {
            "A" | "a" => Ok(Side::PerturbA),
            "B" | "b" => Ok(Side::PerturbB),
            o => Err(Error::config("suite.sides", format!("unknown side `{o}`"))),
        })
        .collect::<Result<_>>()?;
    let mut queries = Vec::new();
    for &model in &models {
        let spec = model_spec(cfg, model)?;
        let params = spec.stationary_params();
        for &(m, n) in &sizes {
            for &l in &lambdas {
                let side_list = if auto { vec![Side::PerturbA, Side::PerturbB] } else { explicit.clone() };
                for side in side_list {
                    match EjsQuery::new(spec, params, l, m, n, side) {
                        Ok(q) => queries.push(q),
                        Err(_) if auto => {}
                        Err(e) => return Err(Error::config("suite.sides", e.to_string())),
                    }
                }
            }
        }
    }
    let mut table = Table::new("ejs", &EjsRow::HEADER.split(',').collect::<Vec<_>>());
    let (mut zmax, mut relmax): (f64, f64) = (0.0, 0.0);
    for q in &queries {
        let label = format!("{}/{}x{}/{}/{}", q.spec.model, q.m, q.n, q.lambda, q.side.name());
        let row = ejs_check(q, replicas, &path.child(&label))?;
        zmax = zmax.max(row.zscore.abs());
        relmax = relmax.max(row.lhs_stderr / row.rhs_exact);
        table.push(row.csv().split(',').map(str::to_string).collect::<Vec<_>>());
    }
    let mut checks = Vec::new();
    if !queries.is_empty() {
        checks.push(check("zscore", zmax <= z_max, format!("max |z| = {zmax:.3} over {} rows", queries.len())));
        checks.push(check("relative_stderr", relmax < rel_max, format!("max stderr/rhs = {relmax:.3e}")));
    }
    Ok((checks, vec![table]))
}

/// One east and one north log-increment per replica, cycling over positions.
fn boundary_increments(
    spec: ModelSpec,
    params: BoundaryParams,
    m: usize,
    n: usize,
    replicas: usize,
    path: &SeedPath,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sampler = EnvironmentSampler::new(spec, params, BoundaryDraw::Direct)?;
    let pairs = collect(replicate(replicas, |r| -> Result<(f64, f64)> {
        let env = sampler.sample(m, n, path, r)?;
        let nsew = nsew_increments(&env, &log_partition(&env));
        Ok((nsew.east[r as usize % n], nsew.north[r as usize % m]))
    }))?;
    Ok(pairs.into_iter().unzip())
}

fn burke(cfg: &ExperimentConfig, path: &SeedPath) -> Result<Outcome> {
    let (spec, params) = model_and_params(cfg)?;
    let m = cfg.parse_or(SUITE, "m", 4usize)?;
    let n = cfg.parse_or(SUITE, "n", 4usize)?;
    let replicas = cfg.parse_or(SUITE, "replicas", 10_000usize)?;
    let p_min = probability(cfg, "p_min", 1e-3)?;
    let shift = cfg.parse_or(SUITE, "control_shift", 0.5)?;
    require("suite.m", m >= 1 && n >= 1, "m and n must be positive")?;
    require("model", spec.is_stationary(&params), "Burke check needs a + b = a3")?;
    let control = BoundaryParams {
        a: params.a + shift,
        b: params.b,
    };
    invalid("suite.control_shift", spec.check(&control))?;
    require("suite.control_shift", !spec.is_stationary(&control), "control must break a + b = a3")?;

    let mut table = Table::new("burke", &["case", "a", "b", "side", "statistic", "p_value", "n", "seed"]);
    let mut pmin = [1.0f64; 2];
    for (ci, (case, p)) in [("stationary", params), ("control", control)].into_iter().enumerate() {
        let sub = path.child(case);
        let (east, north) = boundary_increments(spec, p, m, n, replicas, &sub)?;
        let l2 = MellinDistribution::new(spec.f2(), p.b)?;
        let l1 = MellinDistribution::new(spec.f1(), p.a)?;
        for (side, xs, law) in [("east", &east, &l2), ("north", &north, &l1)] {
            let ks = ks_one_sample(xs, |y| law.law().cdf(y));
            pmin[ci] = pmin[ci].min(ks.p_value);
            table.push([
                case.to_string(),
                p.a.to_string(),
                p.b.to_string(),
                side.to_string(),
                ks.statistic.to_string(),
                ks.p_value.to_string(),
                ks.n.to_string(),
                sub.lineage(None),
            ]);
        }
    }
    let checks = vec![
        check("burke_marginals", pmin[0] > p_min, format!("min p = {:.3e} (need > {p_min:e})", pmin[0])),
        check("negative_control", pmin[1] <= p_min, format!("control min p = {:.3e}", pmin[1])),
    ];
    Ok((checks, vec![table]))
}

fn derivative_signs(cfg: &ExperimentConfig, path: &SeedPath) -> Result<Outcome> {
    let (spec, params) = model_and_params(cfg)?;
    let sizes = cfg.sizes_or(SUITE, "sizes", &[(2, 2), (3, 6), (4, 4), (8, 8)])?;
    let seeds = cfg.parse_or(SUITE, "seeds", 100usize)?;
    let h = cfg.parse_or(SUITE, "h", 1e-3)?;
    let tol = positive(cfg, "tolerance", 1e-6)?;
    require("suite.sizes", sizes.iter().all(|&(m, n)| m >= 1 && n >= 1), "sizes must be at least 1x1")?;
    require("suite.h", h > 0.0, "h must be positive")?;
    let cd = invalid("suite.h", CoupledDerivatives::new(spec, params, h))?;

    let mut table = Table::new(
        "derivatives",
        &["m", "n", "replica", "log_z", "d_a", "d_ab", "exit_minus", "exit_plus", "seed"],
    );
    let mut viol = [0usize; 3];
    for &(m, n) in &sizes {
        let sub = path.child(&format!("{m}x{n}"));
        let rows = collect(replicate(seeds, |r| -> Result<[f64; 5]> {
            let lo = cd.environment(-1, 0, m, n, &sub, r)?;
            let hi = cd.environment(1, 0, m, n, &sub, r)?;
            let (llo, lhi) = (log_partition(&lo), log_partition(&hi));
            let d_a = (lhi.log_z_mn() - llo.log_z_mn()) / (2.0 * h);
            let g_lo = exit_law(&lo, &llo)?.tail1(0);
            let g_hi = exit_law(&hi, &lhi)?.tail1(0);
            let centre = log_partition(&cd.environment(0, 0, m, n, &sub, r)?).log_z_mn();
            Ok([centre, d_a, cd.d_ab(m, n, &sub, r)?, g_lo, g_hi])
        }))?;
        for (r, v) in rows.iter().enumerate() {
            let scale = v[0].abs().max(1.0);
            viol[0] += usize::from(v[1] < -tol * scale);
            viol[1] += usize::from(v[2] > tol * scale);
            viol[2] += usize::from(v[4] < v[3] - tol);
            let mut row = vec![m.to_string(), n.to_string(), r.to_string()];
            row.extend(v.iter().map(f64::to_string));
            row.push(sub.lineage(Some(r as u64)));
            table.push(row);
        }
    }
    let total = sizes.len() * seeds;
    let checks = vec![
        check("d_a_nonnegative", viol[0] == 0, format!("{} violations in {total}", viol[0])),
        check("d_ab_nonpositive", viol[1] == 0, format!("{} violations in {total}", viol[1])),
        check("exit_monotone", viol[2] == 0, format!("{} violations in {total}", viol[2])),
    ];
    Ok((checks, vec![table]))
}

fn exit_tail(cfg: &ExperimentConfig, path: &SeedPath) -> Result<Outcome> {
    let (spec, params) = model_and_params(cfg)?;
    let sizes = cfg.sizes_or(SUITE, "sizes", &[(6, 6), (8, 8)])?;
    let ws = cfg.list_or(SUITE, "ws", &[0.5, 1.5, 2.5])?;
    let eps0 = cfg.parse_or(SUITE, "eps0", 0.25)?;
    let replicas = cfg.parse_or(SUITE, "replicas", 20_000usize)?;
    let z = positive(cfg, "z_max", 4.0)?;
    let p_min = probability(cfg, "p_min", 1e-3)?;
    require("model", spec.is_stationary(&params), "exit bounds need a + b = a3")?;
    require("suite.replicas", replicas >= 2, "need at least two replicas")?;
    let shift: Vec<usize> = cfg.list_or(SUITE, "shift", &[6, 4, 2])?;
    require("suite.shift", shift.len() == 3, "shift is `m, n, k`")?;
    let (sm, sn, sk) = (shift[0], shift[1], shift[2]);
    require("suite.shift", sn >= 1 && sk < sm, "need n >= 1 and k < m")?;
    for &(m, n) in &sizes {
        require("suite.sizes", m >= 1 && n >= 1, "sizes must be at least 1x1")?;
        let e = invalid("suite.sizes", characteristic_e(spec, params, m as f64, n as f64))?;
        for &w in &ws {
            require("suite.ws", w >= 0.0 && e + w >= 0.0, "need w >= 0 and e + w >= 0")?;
            let k = (e + w).floor() as usize;
            require("suite.ws", k < m, "shift e + w leaves no columns")?;
            let l1 = invalid("suite.ws", solve_lambda1(spec, params, n, w))?;
            require("suite.eps0", l1 <= eps0, "lambda1 exceeds eps0; lower w or raise eps0")?;
        }
    }

    let mut table = Table::new(
        "exit_tail",
        &[
            "m", "n", "w", "e", "k", "lambda1", "c1", "empirical", "stderr", "bound", "cauchy_schwarz", "vacuous",
            "seed",
        ],
    );
    let mut worst = f64::NEG_INFINITY;
    for &(m, n) in &sizes {
        for &w in &ws {
            let sub = path.child(&format!("{m}x{n}/{w}"));
            let r = exit_tail_w(spec, params, m, n, w, eps0, replicas, &sub)?;
            worst = worst.max(r.empirical.mean - r.bound.value - z * r.empirical.stderr);
            table.push([
                m.to_string(),
                n.to_string(),
                w.to_string(),
                r.e.to_string(),
                r.k.to_string(),
                r.lambda1.to_string(),
                r.c1.to_string(),
                r.empirical.mean.to_string(),
                r.empirical.stderr.to_string(),
                r.bound.value.to_string(),
                r.bound.cauchy_schwarz.to_string(),
                r.bound.vacuous.to_string(),
                sub.lineage(None),
            ]);
        }
    }

    // Q_{m,n}[t1 > k] has the law of Q_{m-k,n}[t1 > 0]
    let (m, n, k) = (sm, sn, sk);
    let sampler = EnvironmentSampler::new(spec, params, BoundaryDraw::Direct)?;
    let tail_sample = |mm: usize, kk: usize, sub: SeedPath| {
        collect(replicate(replicas, |r| -> Result<f64> {
            let env = sampler.sample(mm, n, &sub, r)?;
            let lat = log_partition(&env);
            Ok(exit_law(&env, &lat)?.tail1(kk))
        }))
    };
    let sub = path.child("shift");
    let full = tail_sample(m, k, sub.child("full"))?;
    let reduced = tail_sample(m - k, 0, sub.child("reduced"))?;
    let ks = ks_two_sample(&full, &reduced);
    let mut ks_table = Table::new("shift_ks", &["m", "n", "k", "statistic", "p_value", "n_samples", "seed"]);
    ks_table.push([
        m.to_string(),
        n.to_string(),
        k.to_string(),
        ks.statistic.to_string(),
        ks.p_value.to_string(),
        ks.n.to_string(),
        sub.lineage(None),
    ]);
    let mut checks = Vec::new();
    if !table.rows.is_empty() {
        checks.push(check(
            "exit_bound",
            worst <= 0.0,
            format!("max(empirical - bound - {z} stderr) = {worst:.3e} over {} points", table.rows.len()),
        ));
        checks.push(check(
            "shift_stationarity",
            ks.p_value > p_min,
            format!("two-sample KS p = {:.3e} for ({m}, {n}, {k})", ks.p_value),
        ));
    }
    Ok((checks, vec![table, ks_table]))
}

fn mgf_table(profile: &MgfProfile, lineage: &str) -> Table {
    let mut t = Table::new("mgf", &["lambda", "mgf", "stderr", "seed"]);
    if let Some(neg) = &profile.negative {
        for (l, e) in profile.lambdas.iter().zip(neg).rev() {
            t.push([(-l).to_string(), e.mean.to_string(), e.stderr.to_string(), lineage.to_string()]);
        }
    }
    for (l, e) in profile.lambdas.iter().zip(&profile.estimates) {
        t.push([l.to_string(), e.mean.to_string(), e.stderr.to_string(), lineage.to_string()]);
    }
    t
}

fn mgf_tails(cfg: &ExperimentConfig, path: &SeedPath) -> Result<Outcome> {
    let (spec, params) = model_and_params(cfg)?;
    let m = cfg.parse_or(SUITE, "m", 64usize)?;
    let n = cfg.parse_or(SUITE, "n", m)?;
    let big_n = cfg.parse_or(SUITE, "big_n", m as f64)?;
    let window = cfg.parse_or(SUITE, "window", 1.0)?;
    let lambdas = geometric_grid(cfg.parse_or(SUITE, "lambda_start", 0.025)?, cfg.parse_or(SUITE, "lambda_limit", 0.8)?);
    let (lo, hi) = (cfg.parse_or(SUITE, "slope_lo", 0.05)?, cfg.parse_or(SUITE, "slope_hi", 0.2)?);
    let bounds = cfg.list_or(SUITE, "slope_bounds", &[2.5, 3.5])?;
    let s_grid = cfg.list_or(SUITE, "s_grid", &(1..=16).map(|k| 0.25 * k as f64).collect::<Vec<_>>())?;
    let replicas = cfg.parse_or(SUITE, "replicas", 100_000usize)?;
    let k_sigma = positive(cfg, "chernoff_k", 4.0)?;
    let target = cfg.parse_or(SUITE, "kappa_target", 1.5)?;
    let min_count = cfg.parse_or(SUITE, "min_count", 20usize)?;
    let resamples = cfg.parse_or(SUITE, "resamples", 200usize)?;
    require("model", spec.is_stationary(&params), "MGF profile needs a + b = a3")?;
    require("suite.slope_bounds", bounds.len() == 2 && bounds[0] < bounds[1], "need two increasing values")?;
    require("suite.replicas", replicas >= 2, "need at least two replicas")?;
    let e = invalid("suite.m", characteristic_e(spec, params, m as f64, n as f64))?;
    require("suite.window", e.abs() <= window * big_n.powf(2.0 / 3.0), "|e| exceeds A N^(2/3)")?;
    require("suite.lambda_start", !lambdas.is_empty(), "empty lambda grid")?;

    let (curve, profile, centered) =
        tail_curve_mc(spec, params, m, n, big_n, window, &s_grid, lambdas, replicas, path)?;
    let lineage = path.lineage(None);
    let mut tail = Table::new("tail", &["s", "tail", "err", "chernoff", "seed"]);
    for i in 0..curve.s.len() {
        tail.push([
            curve.s[i].to_string(),
            curve.empirical[i].to_string(),
            curve.stderr[i].to_string(),
            curve.chernoff[i].to_string(),
            lineage.clone(),
        ]);
    }
    let mut fits = Table::new("fits", &["quantity", "estimate", "ci_lo", "ci_hi", "points", "seed"]);
    let mut checks = Vec::new();
    for (name, p) in [("positive", profile.clone()), ("negative", profile.reflected()?)] {
        match cubic_slope(&p, lo, hi) {
            Ok(f) => {
                let s = f.fit.slope;
                fits.push([
                    format!("cubic_slope_{name}"),
                    s.to_string(),
                    f.ci.0.to_string(),
                    f.ci.1.to_string(),
                    f.points.to_string(),
                    lineage.clone(),
                ]);
                checks.push(check(
                    &format!("cubic_slope_{name}"),
                    s >= bounds[0] && s <= bounds[1],
                    format!("slope = {s:.3} (CI {:.3}..{:.3}), need [{}, {}]", f.ci.0, f.ci.1, bounds[0], bounds[1]),
                ));
            }
            Err(e) => checks.push(check(&format!("cubic_slope_{name}"), false, e.to_string())),
        }
    }
    let viol = curve.violations(k_sigma);
    checks.push(check(
        "chernoff_consistency",
        viol.is_empty(),
        format!("{} of {} grid points exceed the bound by more than {k_sigma} sigma", viol.len(), curve.s.len()),
    ));
    match tail_exponent_fit(&centered, big_n, &s_grid, min_count, resamples, &path.child("bootstrap")) {
        Ok(t) => {
            let ok = t.ci.0 <= target && target <= t.ci.1;
            fits.push([
                "tail_exponent".to_string(),
                t.fit.kappa.to_string(),
                t.ci.0.to_string(),
                t.ci.1.to_string(),
                t.s_window.len().to_string(),
                lineage.clone(),
            ]);
            checks.push(check(
                "tail_exponent_ci",
                ok,
                format!("kappa = {:.3}, CI [{:.3}, {:.3}], target {target}", t.fit.kappa, t.ci.0, t.ci.1),
            ));
        }
        Err(e) => checks.push(check("tail_exponent_ci", false, e.to_string())),
    }
    Ok((checks, vec![mgf_table(&profile, &lineage), tail, fits]))
}

fn tail_machinery(cfg: &ExperimentConfig, path: &SeedPath) -> Result<Outcome> {
    let u: f64 = cfg.parse_or(SUITE, "normal_u", 2.0)?;
    let step: f64 = cfg.parse_or(SUITE, "normal_step", 1e-3)?;
    let tol = positive(cfg, "tolerance", 1e-6)?;
    let n_scale = cfg.parse_or(SUITE, "n_scale", 8.0)?;
    let c = cfg.parse_or(SUITE, "cubic_c", 1.0)?;
    let c_prime = cfg.parse_or(SUITE, "c_prime", 2.0)?;
    let c_dprime = cfg.parse_or(SUITE, "c_dprime", 36.0)?;
    let samples = cfg.parse_or(SUITE, "samples", 1_000_000usize)?;
    let k_sigma = positive(cfg, "k_sigma", 4.0)?;
    require("suite.normal_u", u > 0.0 && step > 0.0 && step < u, "need 0 < normal_step < normal_u")?;
    require("suite.n_scale", n_scale > 0.0 && c > 0.0, "n_scale and cubic_c must be positive")?;
    require("suite.c_prime", c_prime > 0.0 && c_dprime > 1.0, "need C' > 0 and C'' > 1")?;
    require("suite.samples", samples >= 2, "need at least two samples")?;

    let top = (2.0 * u / step).ceil() as usize;
    let grid: Vec<f64> = (1..=top).map(|k| k as f64 * step).collect();
    let normal = MgfProfile::analytic(grid, |l| (0.5 * l * l).exp(), 1.0)?;
    let ch = chernoff_upper(&normal, u)?;
    let exact = (-0.5 * u * u).exp();
    let lineage = path.lineage(None);
    let mut nt = Table::new("normal", &["u", "chernoff", "exact", "seed"]);
    nt.push([u.to_string(), ch.to_string(), exact.to_string(), lineage.clone()]);

    let lambdas: Vec<f64> = (0..60).map(|k| 0.025 * 2f64.powf(k as f64 / 4.0)).collect();
    let profile = synthetic_cubic_profile(lambdas, n_scale, c)?;
    let pts = lower_tail_window(&profile, c_prime, c_dprime);
    let xs = matched_synthetic_samples(n_scale, samples, &path.child("synthetic"));
    let total = xs.len() as f64;
    let mut lt = Table::new(
        "lower_tail",
        &["u0", "u1", "a", "bound", "log_bound", "empirical", "stderr", "seed"],
    );
    let (mut positive, mut above) = (0usize, 0usize);
    for p in &pts {
        let hits = xs.iter().filter(|&&x| x > p.u0).count() as f64;
        let emp = hits / total;
        let se = (emp * (1.0 - emp) / total).sqrt().max(1.0 / total);
        if p.log_bound.is_some() {
            positive += 1;
            if p.bound > emp + k_sigma * se {
                above += 1;
            }
        }
        lt.push([
            p.u0.to_string(),
            p.u1.to_string(),
            p.a.to_string(),
            p.bound.to_string(),
            p.log_bound.map_or("".to_string(), |v| v.to_string()),
            emp.to_string(),
            se.to_string(),
            lineage.clone(),
        ]);
    }
    let checks = vec![
        check("chernoff_normal", (ch - exact).abs() <= tol, format!("{ch:.9} vs {exact:.9}")),
        check("lower_tail_positive", positive > 0, format!("{positive} of {} window points positive", pts.len())),
        check(
            "lower_below_empirical",
            positive > 0 && above == 0,
            format!("{above} positive bounds exceed the matched empirical tail by {k_sigma} sigma"),
        ),
    ];
    Ok((checks, vec![nt, lt]))
}

fn diffusion_stationarity(cfg: &ExperimentConfig, path: &SeedPath) -> Result<Outcome> {
    let pots = potentials(cfg, &["exp", "mixture"])?;
    let theta = cfg.parse_or(SUITE, "theta", 1.0)?;
    let n = cfg.parse_or(SUITE, "n", 8usize)?;
    let horizon = cfg.parse_or(SUITE, "horizon", 2.0)?;
    let dt = cfg.parse_or(SUITE, "dt", 1e-3)?;
    let replicas = cfg.parse_or(SUITE, "replicas", 2000usize)?;
    let p_min = probability(cfg, "p_min", 1e-3)?;
    let z = positive(cfg, "z_max", 4.0)?;
    invalid("suite", DiffusionConfig::new(n, theta, theta, dt, horizon))?;
    require("suite.replicas", replicas >= 2, "need at least two replicas")?;
    let nus = pots
        .iter()
        .map(|p| invalid("suite.theta", NuTheta::new(p, theta)))
        .collect::<Result<Vec<_>>>()?;

    let mut marg = Table::new("marginals", &["potential", "time", "coordinate", "statistic", "p_value", "seed"]);
    let mut height = Table::new("height", &["potential", "mean_w", "stderr", "expected", "zscore", "seed"]);
    let (mut pmin, mut zmax) = (1.0f64, 0.0f64);
    for (pot, nu) in pots.iter().zip(&nus) {
        let sub = path.child(&pot.descriptor());
        let s = stationarity_sample(pot, n, theta, horizon, dt, replicas, &sub)?;
        for (time, snap) in [(0.5 * horizon, &s.half), (horizon, &s.end)] {
            for (j, xs) in snap.iter().enumerate() {
                let ks = ks_one_sample(xs, |u| nu.cdf(u));
                pmin = pmin.min(ks.p_value);
                marg.push([
                    pot.descriptor(),
                    time.to_string(),
                    (j + 1).to_string(),
                    ks.statistic.to_string(),
                    ks.p_value.to_string(),
                    sub.lineage(None),
                ]);
            }
        }
        let w = McEstimate::from_samples(&s.w, cfg.seed);
        let ew = expected_w(pot, theta, n, horizon)?;
        let zs = w.zscore(ew);
        zmax = zmax.max(zs.abs());
        height.push([
            pot.descriptor(),
            w.mean.to_string(),
            w.stderr.to_string(),
            ew.to_string(),
            zs.to_string(),
            sub.lineage(None),
        ]);
    }
    let mut checks = Vec::new();
    if !pots.is_empty() {
        checks.push(check("ks_marginals", pmin > p_min, format!("min KS p = {pmin:.3e} over {} tests", marg.rows.len())));
        checks.push(check("mean_height", zmax <= z, format!("max |z| = {zmax:.3}")));
    }
    Ok((checks, vec![marg, height]))
}

fn ejs_diffusion(cfg: &ExperimentConfig, path: &SeedPath) -> Result<Outcome> {
    let pots = potentials(cfg, &["exp"])?;
    let ns = cfg.list_or(SUITE, "ns", &[2usize, 4])?;
    let theta = cfg.parse_or(SUITE, "theta", 1.0)?;
    let eta = cfg.parse_or(SUITE, "eta", 0.8)?;
    let dt = cfg.parse_or(SUITE, "dt", 5e-4)?;
    let replicas = cfg.parse_or(SUITE, "replicas", 10_000usize)?;
    let z = positive(cfg, "z_max", 4.0)?;
    let shift_max = positive(cfg, "shift_max", 1.0)?;
    require("suite.replicas", replicas >= 2, "need at least two replicas")?;
    let mut jobs = Vec::new();
    for pot in &pots {
        for &n in &ns {
            let t = characteristic_horizon(cfg, pot, theta, n)?;
            invalid("suite", DiffusionConfig::new(n, eta, theta, dt, t))?;
            jobs.push((pot.clone(), n, t));
        }
    }

    let mut table = Table::new(
        "ejs_diffusion",
        &[
            "potential", "n", "eta", "theta", "t", "dt", "replicas", "lhs_mean", "lhs_stderr", "lhs_half_mean",
            "rhs_exact", "zscore", "halving_shift", "log_rhs_expansion", "seed",
        ],
    );
    let (mut zmax, mut smax) = (0.0f64, 0.0f64);
    for (pot, n, t) in &jobs {
        let sub = path.child(&format!("{}/{n}", pot.descriptor()));
        let r = ejs_diffusion_check(pot, *n, eta, theta, *t, dt, replicas, &sub)?;
        let (_, approx) = ejs_log_rhs_expansion(pot, *n, eta, theta, *t)?;
        zmax = zmax.max(r.zscore.abs());
        smax = smax.max(r.halving_shift);
        table.push([
            pot.descriptor(),
            n.to_string(),
            eta.to_string(),
            theta.to_string(),
            t.to_string(),
            r.dt.to_string(),
            replicas.to_string(),
            r.lhs.mean.to_string(),
            r.lhs.stderr.to_string(),
            r.lhs_half.mean.to_string(),
            r.rhs.to_string(),
            r.zscore.to_string(),
            r.halving_shift.to_string(),
            approx.exp().to_string(),
            r.seed,
        ]);
    }
    let mut checks = Vec::new();
    if !jobs.is_empty() {
        checks.push(check("zscore", zmax <= z, format!("max |z| = {zmax:.3}")));
        checks.push(check("dt_halving", smax < shift_max, format!("max shift = {smax:.3} stderr")));
    }
    Ok((checks, vec![table]))
}

fn pseudo_gibbs_suite(cfg: &ExperimentConfig, path: &SeedPath) -> Result<Outcome> {
    let pot = potentials(cfg, &["exp"])?
        .into_iter()
        .next()
        .ok_or_else(|| Error::config("potential.names", "need one potential"))?;
    let mass_ns = cfg.list_or(SUITE, "mass_ns", &[2usize, 3])?;
    let deriv_n = cfg.parse_or(SUITE, "deriv_n", 2usize)?;
    let theta = cfg.parse_or(SUITE, "theta", 1.0)?;
    let eta = cfg.parse_or(SUITE, "eta", theta)?;
    let dt = cfg.parse_or(SUITE, "dt", 1e-3)?;
    let seeds = cfg.parse_or(SUITE, "seeds", 100usize)?;
    let points = cfg.parse_or(SUITE, "points", 4096usize)?;
    let shifts = cfg.parse_or(SUITE, "shifts", 16usize)?;
    let delta = cfg.parse_or(SUITE, "delta", 1e-3)?;
    let rel_tol = positive(cfg, "rel_tol", 0.1)?;
    let mass_k = positive(cfg, "mass_k", 3.0)?;
    require("suite.shifts", shifts >= 2 && points >= 1, "need at least two shifts and one point")?;
    require("suite.seeds", seeds >= 1, "need at least one seed")?;
    let mut mass_jobs = Vec::new();
    for &n in &mass_ns {
        require("suite.mass_ns", n <= DEFAULT_N_MAX, "N exceeds the quadrature limit")?;
        let t = characteristic_horizon(cfg, &pot, theta, n)?;
        mass_jobs.push((n, invalid("suite", DiffusionConfig::new(n, eta, theta, dt, t))?));
    }
    require("suite.deriv_n", deriv_n <= DEFAULT_N_MAX, "N exceeds the quadrature limit")?;
    let t = characteristic_horizon(cfg, &pot, theta, deriv_n)?;
    let dcfg = invalid("suite", DiffusionConfig::new(deriv_n, eta, theta, dt, t))?;
    let coupled = invalid("suite.delta", CoupledDiffusion::new(&pot, dcfg, delta))?;

    let mut mt = Table::new("mass", &["n", "replica", "mass", "stderr", "recursion", "seed"]);
    let mut mass_viol = 0usize;
    for (n, c) in &mass_jobs {
        let sub = path.child(&format!("mass/{n}"));
        let rows = collect(replicate(seeds, |r| -> Result<(McEstimate, f64)> {
            let traj = integrate(&pot, *c, &sub, r)?;
            let pg = PseudoGibbs::new(&traj, &pot, DEFAULT_N_MAX)?;
            Ok((pg.expect_qmc(|_| 1.0, points, shifts, &sub, r)?, pg.expect_recursion(|_| 1.0)))
        }))?;
        for (r, (m, rec)) in rows.iter().enumerate() {
            mass_viol += usize::from(m.mean > 1.0 + mass_k * m.stderr);
            mt.push([
                n.to_string(),
                r.to_string(),
                m.mean.to_string(),
                m.stderr.to_string(),
                rec.to_string(),
                sub.lineage(Some(r as u64)),
            ]);
        }
    }

    let sub = path.child("derivative");
    let rows = collect(replicate(seeds, |r| -> Result<(f64, McEstimate, f64)> {
        let noise = coupled.noise(&sub, r);
        let d = coupled.derivatives(&noise)?;
        let traj = coupled.centre().run(&noise, 0)?;
        let pg = PseudoGibbs::new(&traj, &pot, DEFAULT_N_MAX)?;
        let q = pg.expect_qmc(|s| s.max(0.0), points, shifts, &sub, r)?;
        Ok((d.d_theta, q, pg.expect_recursion(|s| s.max(0.0))))
    }))?;
    let mut dt_table = Table::new(
        "derivative",
        &["n", "replica", "fd_d_theta", "pg_s0", "pg_stderr", "pg_recursion", "seed"],
    );
    for (r, (fd, q, rec)) in rows.iter().enumerate() {
        dt_table.push([
            deriv_n.to_string(),
            r.to_string(),
            fd.to_string(),
            q.mean.to_string(),
            q.stderr.to_string(),
            rec.to_string(),
            sub.lineage(Some(r as u64)),
        ]);
    }
    let fd_mean = mean(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let pg_mean = mean(&rows.iter().map(|r| r.1.mean).collect::<Vec<_>>());
    let rel = (pg_mean - fd_mean).abs() / fd_mean.abs();
    let mut checks = Vec::new();
    if !mass_jobs.is_empty() {
        checks.push(check(
            "mass_bound",
            mass_viol == 0,
            format!("{mass_viol} of {} trajectories have mass above 1 + {mass_k} stderr", mt.rows.len()),
        ));
    }
    checks.push(check(
        "derivative_formula",
        rel <= rel_tol,
        format!("mean E[(s0)+] = {pg_mean:.5}, mean FD = {fd_mean:.5}, relative gap {rel:.2e}"),
    ));
    Ok((checks, vec![mt, dt_table]))
}

fn diffusion_derivs(cfg: &ExperimentConfig, path: &SeedPath) -> Result<Outcome> {
    let pots = potentials(cfg, &["exp", "mixture"])?;
    let n = cfg.parse_or(SUITE, "n", 4usize)?;
    let eta = cfg.parse_or(SUITE, "eta", 0.8)?;
    let theta = cfg.parse_or(SUITE, "theta", 1.0)?;
    let horizon = cfg.parse_or(SUITE, "horizon", 2.0)?;
    let dt = cfg.parse_or(SUITE, "dt", 1e-3)?;
    let delta = cfg.parse_or(SUITE, "delta", 1e-3)?;
    let seeds = cfg.parse_or(SUITE, "seeds", 100usize)?;
    let tol = positive(cfg, "tolerance", 1e-6)?;
    let c = invalid("suite", DiffusionConfig::new(n, eta, theta, dt, horizon))?;
    let coupled = pots
        .iter()
        .map(|p| invalid("suite.delta", CoupledDiffusion::new(p, c, delta)))
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(
        "signs",
        &["potential", "replica", "w", "d_eta", "d_theta", "d_eta_theta", "d_theta2", "seed"],
    );
    let mut viol = 0usize;
    for (pot, cd) in pots.iter().zip(&coupled) {
        let sub = path.child(&pot.descriptor());
        let rows = collect(replicate(seeds, |r| cd.derivatives(&cd.noise(&sub, r))))?;
        for (r, d) in rows.iter().enumerate() {
            let t = tol * d.w.abs().max(1.0);
            viol += usize::from(d.d_eta > t || d.d_theta < -t || d.d_eta_theta < -t || d.d_theta2 < -t);
            table.push([
                pot.descriptor(),
                r.to_string(),
                d.w.to_string(),
                d.d_eta.to_string(),
                d.d_theta.to_string(),
                d.d_eta_theta.to_string(),
                d.d_theta2.to_string(),
                sub.lineage(Some(r as u64)),
            ]);
        }
    }
    let mut checks = Vec::new();
    if !pots.is_empty() {
        checks.push(check(
            "derivative_signs",
            viol == 0,
            format!("{viol} of {} coupled seeds violate a sign", table.rows.len()),
        ));
    }
    Ok((checks, vec![table]))
}

fn wedge(cfg: &ExperimentConfig, path: &SeedPath) -> Result<Outcome> {
    let n = cfg.parse_or(SUITE, "n", 2usize)?;
    let t = characteristic_horizon(cfg, &Potential::Exp, 1.0, n)?;
    let u = cfg.parse_or(SUITE, "u", 0.1)?;
    let tol = positive(cfg, "tolerance", 1e-8)?;
    let run_mc = cfg.parse_or(SUITE, "mc", true)?;
    let mc_us = cfg.list_or(SUITE, "mc_us", &[0.1, 0.5, 1.0])?;
    let mc_replicas = cfg.parse_or(SUITE, "mc_replicas", 2000usize)?;
    let mc_dt = cfg.parse_or(SUITE, "mc_dt", 1e-3)?;
    let b = invalid("suite.u", wedge_bound(n, t, u))?;
    for &v in &mc_us {
        invalid("suite.mc_us", wedge_bound(n, t, v))?;
    }
    require("suite.mc_dt", mc_dt > 0.0 && mc_replicas >= 2, "need mc_dt > 0 and two replicas")?;

    // sup |ψ3| over [θ0, θ0 + a] sits at θ0 because |ψ3| decreases
    let psi2 = polygamma(2, b.theta0);
    let c4 = 2.0 * polygamma(3, b.theta0) / (6.0 * psi2 * psi2);
    let nf = n as f64;
    let hand = -nf * (2.0 * 2f64.sqrt() / 3.0) * u.powf(1.5) / psi2.abs().sqrt() + c4 * nf * u * u;
    let lineage = path.lineage(None);
    let mut table = Table::new(
        "wedge",
        &["n", "t", "u", "theta0", "psi2", "a", "c4", "log_bound", "bound", "hand_log_bound", "seed"],
    );
    table.push([
        n.to_string(),
        t.to_string(),
        u.to_string(),
        b.theta0.to_string(),
        b.psi2.to_string(),
        b.a.to_string(),
        b.c4.to_string(),
        b.log_value.to_string(),
        b.value.to_string(),
        hand.to_string(),
        lineage.clone(),
    ]);
    let mut tables = vec![table];
    if run_mc {
        let mut mc = Table::new(
            "wedge_mc",
            &["n", "t", "u", "threshold", "empirical", "stderr", "bound", "dt", "seed"],
        );
        for &v in &mc_us {
            let sub = path.child(&format!("mc/{v}"));
            let w = wedge_mc(n, t, v, mc_dt, mc_replicas, &sub)?;
            mc.push([
                n.to_string(),
                t.to_string(),
                v.to_string(),
                w.threshold.to_string(),
                w.empirical.mean.to_string(),
                w.empirical.stderr.to_string(),
                w.bound.value.to_string(),
                w.dt.to_string(),
                sub.lineage(None),
            ]);
        }
        tables.push(mc);
    }
    let err = (b.log_value - hand).abs();
    Ok((vec![check("hand_value", err <= tol, format!("|log bound - hand| = {err:.3e}"))], tables))
}
