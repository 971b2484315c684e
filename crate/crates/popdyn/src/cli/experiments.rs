//! The registered experiments, one per acceptance criterion.

use std::sync::Arc;

use crate::bd::{extinction_prob, mean_extinction_time, mean_extinction_time_linear_solve, simulate_bd_with, BdOptions, RateSpec};
use crate::catastrophe::{
    critical_drift_factor, quenched_laplace, regime_classify, sample_env_path, survival_curve, survival_rate_fit,
    CatastropheEnv, FractionLaw, Regime,
};
use crate::csbp::{feller_laplace_closed_form, laplace_exponent, simulate_csbp_lamperti, simulate_csbp_sde, BranchingMechanism};
use crate::error::Result;
use crate::gwtree::{many_to_one_check, simulate_gw_genealogy, BranchKernel, BranchingMarkovSpec, OffspringDist, TraitMotion};
use crate::kernel::rng::tags;
use crate::kernel::{integrate_jump_sde, replicate, sample_ppm, CompensatedPart, Domain, JumpPart, JumpSdeSpec, MarkIntensity, RngStream};
use crate::scaling::{convergence_harness, stationary_moments, ScaledFamily};
use crate::splitting::{
    auxiliary_identity_check, recovery_classify, simulate_splitting, total_mass_extinction, DivisionRate, Recovery,
    SplitOptions, SplitParams,
};
use crate::stats::{binomial, binomial_stderr_at, chi_square_gof, ks_two_sample, Summary};
use crate::structpop::{
    equilibrium_tracking, final_sizes, generator_moment_check, IbmParams, PointPopulation, TraitFn,
};

use super::config::ExperimentConfig;
use super::report::{num, CheckRow, Outcome, Table};

fn mc_check(id: &str, target: f64, s: &Summary, k: f64) -> CheckRow {
    CheckRow::numeric(id, target, s.mean, Some(s.stderr), s.within(target, k))
}

pub fn bd_extinction_linear(c: &ExperimentConfig) -> Result<Outcome> {
    let (lambda, mu, z0) = (c.f("bd.lambda"), c.f("bd.mu"), c.int("bd.z0") as u64);
    let spec = RateSpec::linear(lambda, mu)?;
    let formula = if lambda > mu { (mu / lambda).powi(z0 as i32) } else { 1.0 };
    let series = extinction_prob(&spec, z0, c.usize("bd.n_terms"))?;
    let opts = BdOptions { stop_above: Some(c.int("bd.stop_above") as u64), ..BdOptions::default() };
    let horizon = c.f("bd.horizon");
    let n = c.reps();
    let hits = replicate(c.seed, n, |s| {
        simulate_bd_with(&spec, z0, horizon, &opts, &mut s.rng(), |_, _, _| {}, |_, _| {}).absorbed
    })
    .into_iter()
    .filter(|&a| a)
    .count();
    let freq = binomial(hits, n);
    let se = binomial_stderr_at(formula, n);
    let mut t = Table::new("extinction", &["z0", "formula", "series", "frequency", "stderr"]);
    t.push_nums(&[z0 as f64, formula, series.value, freq.mean, se]);
    Ok(Outcome {
        checks: vec![
            CheckRow::numeric("series-vs-formula", formula, series.value, None, (series.value - formula).abs() <= 1e-9),
            CheckRow::numeric("mc-frequency", formula, freq.mean, Some(se), (freq.mean - formula).abs() <= 3.0 * se),
        ],
        tables: vec![t],
    })
}

pub fn bd_mean_extinction_time(c: &ExperimentConfig) -> Result<Outcome> {
    let spec = RateSpec::logistic(c.f("bd.lambda"), c.f("bd.mu"), c.f("bd.c"))?;
    let n0 = c.int("bd.n") as u64;
    let series = mean_extinction_time(&spec, n0, c.usize("bd.n_terms"))?;
    let solve = mean_extinction_time_linear_solve(&spec, n0, c.int("bd.top") as u64)?;
    let times = replicate(c.seed, c.reps(), |s| {
        simulate_bd_with(&spec, n0, f64::INFINITY, &BdOptions::default(), &mut s.rng(), |_, _, _| {}, |_, _| {})
            .absorption_time
            .unwrap_or(f64::NAN)
    });
    let mc = Summary::of(&times);
    let mut t = Table::new("mean_extinction_time", &["n", "series", "linear_solve", "mc_mean", "mc_stderr"]);
    t.push_nums(&[n0 as f64, series.value, solve, mc.mean, mc.stderr]);
    Ok(Outcome {
        checks: vec![
            CheckRow::numeric("series-vs-linear-solve", solve, series.value, None, (series.value - solve).abs() <= 1e-6),
            mc_check("mc-mean", series.value, &mc, 3.0),
        ],
        tables: vec![t],
    })
}

pub fn scaling_deterministic_limit(c: &ExperimentConfig) -> Result<Outcome> {
    let fam = ScaledFamily::Deterministic { lambda: c.f("scaling.lambda"), mu: c.f("scaling.mu"), c: c.f("scaling.c") };
    let ks = [c.int("scaling.k_small") as u64, c.int("scaling.k_mid") as u64, c.int("scaling.k_large") as u64];
    let rows = convergence_harness(&fam, &ks, c.f("scaling.x0"), c.f("scaling.horizon"), c.f("scaling.grid_step"), c.reps(), c.seed)?;
    let mut t = Table::new("distances", &["k", "distance", "stderr"]);
    let mut checks = Vec::new();
    for r in &rows {
        t.push_nums(&[r.k as f64, r.distance, r.stderr]);
    }
    for w in rows.windows(2) {
        let se = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        let gap = w[0].distance - w[1].distance;
        checks.push(CheckRow::numeric(format!("decrease-k{}-k{}", w[0].k, w[1].k), 2.0 * se, gap, Some(se), gap > 2.0 * se));
    }
    Ok(Outcome { checks, tables: vec![t] })
}

pub fn scaling_random_env(c: &ExperimentConfig) -> Result<Outcome> {
    let (r, cc, sigma) = (c.f("scaling.r"), c.f("scaling.c"), c.f("scaling.sigma"));
    let est = stationary_moments(
        r,
        cc,
        sigma,
        c.f("scaling.y0"),
        c.f("scaling.horizon"),
        c.f("scaling.step"),
        c.f("scaling.burn_in_fraction"),
        c.reps(),
        c.seed,
    )?;
    // Gamma(2r/σ² - 1, 2c/σ²): mean (2r - σ²)/(2c), variance mean·σ²/(2c).
    let shape = 2.0 * r / (sigma * sigma) - 1.0;
    let rate = 2.0 * cc / (sigma * sigma);
    let (mean, var) = (shape / rate, shape / (rate * rate));
    let mut t = Table::new("stationary", &["quantity", "target", "estimate", "stderr"]);
    t.push(vec!["mean".into(), num(mean), num(est.mean), num(est.mean_stderr)]);
    t.push(vec!["variance".into(), num(var), num(est.variance), num(est.variance_stderr)]);
    Ok(Outcome {
        checks: vec![
            CheckRow::numeric("mean-within-5pct", mean, est.mean, Some(est.mean_stderr), (est.mean / mean - 1.0).abs() <= 0.05),
            CheckRow::numeric(
                "variance-within-10pct",
                var,
                est.variance,
                Some(est.variance_stderr),
                (est.variance / var - 1.0).abs() <= 0.10,
            ),
        ],
        tables: vec![t],
    })
}

const LAPLACE_TIMES: [f64; 3] = [0.5, 1.0, 2.0];
const LAPLACE_LAMBDAS: [f64; 3] = [0.5, 1.0, 2.0];

pub fn csbp_laplace_cross(c: &ExperimentConfig) -> Result<Outcome> {
    let (r, g, z) = (c.f("csbp.r"), c.f("csbp.gamma"), c.f("csbp.z0"));
    let m = BranchingMechanism::feller(r, g)?;
    let horizon = LAPLACE_TIMES[2];
    let paths: Vec<Vec<f64>> = replicate(c.seed, c.reps(), |s| {
        simulate_csbp_sde(&m, z, horizon, c.f("csbp.step"), c.f("csbp.epsilon"), false, &mut s.rng())
            .map(|p| LAPLACE_TIMES.iter().map(|&t| p.value_at(t)).collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut checks = Vec::new();
    let mut t = Table::new("laplace", &["t", "lambda", "ode_u", "closed_form_u", "oracle", "mc", "stderr"]);
    let mut worst_ode = 0.0f64;
    for (ti, &time) in LAPLACE_TIMES.iter().enumerate() {
        for &l in &LAPLACE_LAMBDAS {
            let u = laplace_exponent(&m, time, l, 1e-12)?.value;
            let exact = feller_laplace_closed_form(r, g, time, l);
            worst_ode = worst_ode.max((u - exact).abs());
            let oracle = (-z * u).exp();
            let s = Summary::of(&paths.iter().map(|p| (-l * p[ti]).exp()).collect::<Vec<_>>());
            t.push_nums(&[time, l, u, exact, oracle, s.mean, s.stderr]);
            checks.push(mc_check(&format!("mc-laplace-t{time}-l{l}"), oracle, &s, 3.0));
        }
    }
    checks.insert(0, CheckRow::numeric("ode-vs-riccati-max-abs", 0.0, worst_ode, None, worst_ode <= 1e-9));
    Ok(Outcome { checks, tables: vec![t] })
}

pub fn csbp_lamperti(c: &ExperimentConfig) -> Result<Outcome> {
    let m = BranchingMechanism::stable(c.f("csbp.r"), c.f("csbp.gamma"), c.f("csbp.c"), c.f("csbp.alpha"))?;
    let (z, t_end, step, eps) = (c.f("csbp.z0"), c.f("csbp.t"), c.f("csbp.step"), c.f("csbp.epsilon"));
    let n = c.reps();
    let sde: Vec<f64> = replicate(c.seed, n, |s| simulate_csbp_sde(&m, z, t_end, step, eps, true, &mut s.rng()).map(|p| p.last()))
        .into_iter()
        .collect::<Result<_>>()?;
    let lam: Vec<f64> = replicate(c.seed.wrapping_add(1), n, |s| {
        simulate_csbp_lamperti(&m, z, t_end, step, eps, true, &mut s.derive(tags::AUX).rng()).map(|p| p.last())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut checks = Vec::new();
    let mut t = Table::new("lamperti", &["lambda", "sde", "sde_stderr", "lamperti", "lamperti_stderr", "oracle"]);
    for &l in &LAPLACE_LAMBDAS {
        let a = Summary::of(&sde.iter().map(|x| (-l * x).exp()).collect::<Vec<_>>());
        let b = Summary::of(&lam.iter().map(|x| (-l * x).exp()).collect::<Vec<_>>());
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        let oracle = (-z * laplace_exponent(&m, t_end, l, 1e-12)?.value).exp();
        t.push_nums(&[l, a.mean, a.stderr, b.mean, b.stderr, oracle]);
        checks.push(CheckRow::numeric(format!("sde-vs-lamperti-l{l}"), a.mean, b.mean, Some(se), (a.mean - b.mean).abs() <= 3.0 * se));
    }
    Ok(Outcome { checks, tables: vec![t] })
}

/// Regime from the two sign quantities, computed independently of the classifier.
fn expected_regime(r: f64, tau: f64, f: &FractionLaw) -> Regime {
    let drift = r + tau * f.mean_log();
    let slope = r + tau * f.mean_pow_log(1.0);
    let tol = 1e-12;
    if drift.abs() <= tol {
        Regime::Critical
    } else if drift > 0.0 {
        Regime::Supercritical
    } else if slope < -tol {
        Regime::StronglySubcritical
    } else if slope.abs() <= tol {
        Regime::IntermediateSubcritical
    } else {
        Regime::WeaklySubcritical
    }
}

pub fn catastrophe_regimes(c: &ExperimentConfig) -> Result<Outcome> {
    let f = FractionLaw::constant(c.f("catastrophe.fraction"))?;
    let tau = c.f("catastrophe.tau");
    let gamma = c.f("catastrophe.gamma");
    let y0 = c.f("catastrophe.y0");
    let presets = [
        ("strong", c.f("catastrophe.r_strong")),
        ("weak", c.f("catastrophe.r_weak")),
        ("critical", c.f("catastrophe.r_critical")),
        ("supercritical", c.f("catastrophe.r_super")),
    ];
    let mut checks = Vec::new();
    let mut regimes = Table::new("regimes", &["preset", "r", "regime", "drift_sign", "slope_sign", "predicted_exponent"]);
    for (name, r) in presets {
        let rep = regime_classify(r, tau, &f)?;
        let want = expected_regime(r, tau, &f);
        regimes.push(vec![
            name.into(),
            num(r),
            rep.regime.label().into(),
            num(rep.drift_sign),
            num(rep.slope_sign),
            rep.exponent.map(num).unwrap_or_default(),
        ]);
        checks.push(CheckRow::text(format!("regime-{name}"), want.label(), rep.regime.label(), rep.regime == want));
    }
    let env = CatastropheEnv::constant(tau, f.clone())?;
    let strong = regime_classify(presets[0].1, tau, &f)?;
    let curve = survival_curve(
        presets[0].1,
        gamma,
        &env,
        y0,
        c.f("catastrophe.strong_horizon"),
        c.f("catastrophe.strong_step"),
        1e-12,
        c.reps(),
        c.seed,
    )?;
    let fit = survival_rate_fit(&curve, &strong, c.f("catastrophe.tail_fraction"))?;
    checks.push(CheckRow::numeric("strong-decay-exponent-10pct", fit.predicted, fit.fitted, None, fit.relative_error <= 0.10));
    let crit = survival_curve(
        presets[2].1,
        gamma,
        &env,
        y0,
        c.f("catastrophe.critical_horizon"),
        c.f("catastrophe.critical_step"),
        1e-12,
        c.usize("catastrophe.critical_replicates"),
        c.seed.wrapping_add(1),
    )?;
    let drift = critical_drift_factor(&crit, c.f("catastrophe.tail_fraction"))?;
    checks.push(CheckRow::numeric("critical-t-p2-drift-factor", 2.0, drift, None, drift < 2.0));
    let mut tables = vec![regimes];
    if c.flag("catastrophe.keep_curves") {
        let mut curves = Table::new("survival", &["preset", "t", "p_hat", "stderr"]);
        for (name, cv) in [("strong", &curve), ("critical", &crit)] {
            for p in cv.iter() {
                curves.push(vec![name.into(), num(p.t), num(p.p_hat), num(p.stderr)]);
            }
        }
        tables.push(curves);
    }
    Ok(Outcome { checks, tables })
}

pub fn splitting_identities(c: &ExperimentConfig) -> Result<Outcome> {
    let (r, g, tau, x0) = (c.f("splitting.r"), c.f("splitting.gamma"), c.f("splitting.tau"), c.f("splitting.x0"));
    let f = FractionLaw::constant(c.f("splitting.fraction"))?;
    let params = SplitParams::new(r, g, DivisionRate::Constant(tau), f.clone())?;
    let n = c.reps();
    let mut checks = Vec::new();
    let mut t = Table::new("splitting", &["check", "target", "estimate", "stderr"]);

    let t_max = c.f("splitting.mean_horizon");
    let opts = SplitOptions { step: 0.5, keep_nodes: false, ..SplitOptions::default() };
    let totals: Vec<Vec<f64>> = replicate(c.seed, n, |s| {
        simulate_splitting(&params, x0, t_max, &opts, &s).map(|tree| {
            (1..=t_max.floor() as usize).map(|k| tree.alive_at(k as f64).map_or(f64::NAN, |snap| snap.total_load())).collect()
        })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    for k in 1..=t_max.floor() as usize {
        let s = Summary::of(&totals.iter().map(|v| v[k - 1]).collect::<Vec<_>>());
        let target = x0 * (r * k as f64).exp();
        t.push(vec![format!("mean-load-t{k}"), num(target), num(s.mean), num(s.stderr)]);
        checks.push(mc_check(&format!("mean-load-t{k}"), target, &s, 3.0));
    }

    let ext = total_mass_extinction(&params, x0, c.f("splitting.clearance_horizon"), c.f("splitting.escape_load"), n, c.seed.wrapping_add(1))?;
    t.push(vec!["clearance".into(), num(ext.target), num(ext.frequency), num(ext.stderr)]);
    checks.push(CheckRow::numeric(
        "total-clearance",
        ext.target,
        ext.frequency,
        Some(ext.stderr),
        (ext.frequency - ext.target).abs() <= 3.0 * ext.stderr,
    ));

    let infected = |x: f64| f64::from(u8::from(x > 0.0));
    let t_id = c.f("splitting.identity_t");
    let ok = auxiliary_identity_check(&params, &infected, x0, t_id, 2.0, n, c.seed.wrapping_add(2))?;
    let bad = auxiliary_identity_check(&params, &infected, x0, t_id, 1.0, n, c.seed.wrapping_add(2))?;
    for (id, chk) in [("many-to-one-2tau", &ok), ("falsify-1tau", &bad)] {
        t.push(vec![id.into(), num(chk.rhs.mean), num(chk.lhs.mean), num((chk.lhs.stderr.powi(2) + chk.rhs.stderr.powi(2)).sqrt())]);
    }
    checks.push(CheckRow::numeric("many-to-one-2tau", ok.rhs.mean, ok.lhs.mean, Some(ok.lhs.stderr.hypot(ok.rhs.stderr)), ok.agree));
    checks.push(CheckRow::numeric("falsify-1tau-z-above-5", 5.0, bad.z.abs(), None, bad.z.abs() > 5.0));

    for (id, rr, want) in [
        ("recovery-r-recovers", c.f("splitting.r_recover"), Recovery::RecoversAlmostSurely),
        ("recovery-r-proliferates", c.f("splitting.r_proliferate"), Recovery::ProliferationPossible),
    ] {
        let p = SplitParams::new(rr, g, DivisionRate::Constant(tau), f.clone())?;
        let got = recovery_classify(&p, x0)?.verdict;
        checks.push(CheckRow::text(id, format!("{want:?}"), format!("{got:?}"), got == want));
    }
    Ok(Outcome { checks, tables: vec![t] })
}

pub fn gwtree_many_to_one(c: &ExperimentConfig) -> Result<Outcome> {
    let p0 = c.f("gwtree.p0");
    let p = OffspringDist::new(vec![p0, 0.0, 1.0 - p0])?;
    let tau = c.f("gwtree.tau");
    let growth = tau * (p.mean() - 1.0);
    let n = c.reps();
    let t_max = c.f("gwtree.horizon");
    let times: Vec<f64> = (1..=t_max.floor() as usize).map(|k| k as f64).collect();
    let counts: Vec<Vec<f64>> = replicate(c.seed, n, |s| {
        simulate_gw_genealogy(tau, &p, t_max, usize::MAX, &s).map(|tr| times.iter().map(|&t| tr.count_at(t) as f64).collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut checks = Vec::new();
    let mut t = Table::new("many_to_one", &["functional_id", "lhs", "rhs", "stderr"]);
    for (i, &time) in times.iter().enumerate() {
        let s = Summary::of(&counts.iter().map(|v| v[i]).collect::<Vec<_>>());
        let target = (growth * time).exp();
        t.push(vec![format!("population-t{time}"), num(s.mean), num(target), num(s.stderr)]);
        checks.push(mc_check(&format!("mean-population-t{time}"), target, &s, 3.0));
    }
    let spec = BranchingMarkovSpec::new(
        tau,
        p.clone(),
        TraitMotion::LinearGaussian { a: 0.0, sigma: c.f("gwtree.sigma") },
        BranchKernel::CopyWithNoise { sigma: c.f("gwtree.birth_noise") },
    )?;
    let avg_sq = |path: &[f64]| path.iter().map(|x| x * x).sum::<f64>() / path.len() as f64;
    let t_id = c.f("gwtree.identity_t");
    let dt = c.f("gwtree.grid_dt");
    let ok = many_to_one_check(&spec, &avg_sq, 0.0, t_id, dt, p.mean(), n, c.seed.wrapping_add(1))?;
    let bad = many_to_one_check(&spec, &avg_sq, 0.0, t_id, dt, 1.0, n, c.seed.wrapping_add(1))?;
    for (id, chk) in [("path-mean-square", &ok), ("path-mean-square-unbiased-aux", &bad)] {
        t.push(vec![id.into(), num(chk.lhs.mean), num(chk.rhs.mean), num((chk.lhs.stderr.powi(2) + chk.rhs.stderr.powi(2)).sqrt())]);
    }
    checks.push(CheckRow::numeric("path-many-to-one", ok.rhs.mean, ok.lhs.mean, Some(ok.lhs.stderr.hypot(ok.rhs.stderr)), ok.agree));
    checks.push(CheckRow::numeric("size-bias-falsification-z-above-5", 5.0, bad.z.abs(), None, bad.z.abs() > 5.0));
    Ok(Outcome { checks, tables: vec![t] })
}

pub fn structpop_soundness(c: &ExperimentConfig) -> Result<Outcome> {
    let k = c.f("structpop.k");
    let p = IbmParams::asymmetric_competition(k, c.f("structpop.p"), c.f("structpop.sigma"))?;
    let init = PointPopulation::monomorphic(c.f("structpop.x0"), k.round() as usize, k);
    let horizon = c.f("structpop.horizon");
    let n = c.reps();
    let a = final_sizes(&p, &init, horizon, 1.0, n, c.seed)?;
    let b = final_sizes(&p, &init, horizon, 2.0, n, c.seed.wrapping_add(1))?;
    let ks = ks_two_sample(&a, &b);
    let one: TraitFn = Arc::new(|_| 1.0);
    let m = generator_moment_check(&p, one, &init, horizon, n, c.seed.wrapping_add(2))?;
    let large = IbmParams::asymmetric_competition(c.f("structpop.k_large"), 0.0, c.f("structpop.sigma"))?;
    let eq = equilibrium_tracking(
        &large,
        c.f("structpop.x_mono"),
        c.f("structpop.mono_horizon"),
        c.f("structpop.mono_burn_in"),
        c.seed.wrapping_add(3),
    )?;
    let (sa, sb) = (Summary::of(&a), Summary::of(&b));
    let mut t = Table::new("ibm", &["quantity", "value_a", "value_b", "stderr"]);
    t.push(vec!["final_size_c_hat_x1_x2".into(), num(sa.mean), num(sb.mean), num((sa.stderr.powi(2) + sb.stderr.powi(2)).sqrt())]);
    t.push(vec!["unit_martingale_residual".into(), num(m.residual), "0".into(), num(m.stderr)]);
    t.push(vec!["monomorphic_mass".into(), num(eq.mass), num(eq.target), String::new()]);
    Ok(Outcome {
        checks: vec![
            CheckRow::numeric("doubled-c-hat-ks-p-value", 0.01, ks.p_value, None, ks.p_value > 0.01),
            CheckRow::numeric("unit-martingale-residual", 0.0, m.residual, Some(m.stderr), m.residual_ok(3.0)),
            CheckRow::numeric("monomorphic-equilibrium-5pct", eq.target, eq.mass, None, eq.rel_error <= 0.05),
        ],
        tables: vec![t],
    })
}

pub fn property_suites(c: &ExperimentConfig) -> Result<Outcome> {
    let n = c.reps();
    let seed = c.seed;
    let mut checks = Vec::new();

    // Bit-identical reruns of every simulator.
    let stream = RngStream::new(seed, 7);
    let det = {
        let bd = RateSpec::logistic(2.0, 1.0, 0.1)?;
        let a = simulate_bd_with(&bd, 5, 5.0, &BdOptions::default(), &mut stream.rng(), |_, _, _| {}, |_, _| {});
        let b = simulate_bd_with(&bd, 5, 5.0, &BdOptions::default(), &mut stream.rng(), |_, _, _| {}, |_, _| {});
        let m = BranchingMechanism::stable(0.2, 0.5, 0.5, 1.5)?;
        let p1 = simulate_csbp_sde(&m, 1.0, 1.0, 0.01, 0.01, true, &mut stream.rng())?;
        let p2 = simulate_csbp_sde(&m, 1.0, 1.0, 0.01, 0.01, true, &mut stream.rng())?;
        let sp = SplitParams::new(1.0, 1.0, DivisionRate::Constant(1.0), FractionLaw::beta(2.0, 2.0)?)?;
        let t1 = simulate_splitting(&sp, 1.0, 3.0, &SplitOptions::default(), &stream)?;
        let t2 = simulate_splitting(&sp, 1.0, 3.0, &SplitOptions::default(), &stream)?;
        let ibm = IbmParams::asymmetric_competition(30.0, 0.1, 0.2)?;
        let init = PointPopulation::monomorphic(1.2, 30, 30.0);
        let i1 = crate::structpop::simulate_ibm(&ibm, &init, 1.0, &Default::default(), &stream)?;
        let i2 = crate::structpop::simulate_ibm(&ibm, &init, 1.0, &Default::default(), &stream)?;
        a == b && p1 == p2 && t1.snapshots == t2.snapshots && t1.nodes == t2.nodes && i1 == i2
    };
    checks.push(CheckRow::text("kernel-determinism", "identical", if det { "identical" } else { "differs" }, det));

    // Poisson counts of a point measure.
    let rate = c.f("properties.ppm_rate");
    let horizon = c.f("properties.ppm_horizon");
    let intensity = MarkIntensity::new(rate, |_r: &mut dyn rand::RngCore| ())?;
    let counts: Vec<usize> = replicate(seed, n, |s| sample_ppm(&intensity, horizon, &mut s.rng()).map(|p| p.len()))
        .into_iter()
        .collect::<Result<_>>()?;
    let mean = rate * horizon;
    let top = (mean + 4.0 * mean.sqrt()).ceil() as usize;
    let mut probs = Vec::with_capacity(top + 1);
    let mut pk = (-mean).exp();
    for k in 0..top {
        probs.push(pk);
        pk *= mean / (k + 1) as f64;
    }
    probs.push(1.0 - probs.iter().sum::<f64>());
    let mut observed = vec![0u64; top + 1];
    for &k in &counts {
        observed[k.min(top)] += 1;
    }
    let chi = chi_square_gof(&observed, &probs);
    checks.push(CheckRow::numeric("ppm-poisson-chi-square-p", 0.01, chi.p_value, None, chi.p_value > 0.01));

    // A compensated Poisson integral has mean zero.
    let comp_rate = c.f("properties.compensated_rate");
    let finals: Vec<f64> = replicate(seed.wrapping_add(1), n, |s| {
        let spec = JumpSdeSpec {
            compensated: Some(CompensatedPart {
                jumps: JumpPart {
                    rate: comp_rate,
                    sampler: Box::new(|r: &mut dyn rand::RngCore| {
                        use rand::Rng;
                        -(1.0 - r.random::<f64>()).ln()
                    }),
                    kernel: Box::new(|_, h| h),
                },
                compensator: Box::new(move |_| comp_rate),
            }),
            ..JumpSdeSpec::diffusion(Box::new(|_| 0.0), Box::new(|_| 0.0), Domain::Real)
        };
        integrate_jump_sde(&spec, 0.0, 1.0, 0.01, &mut s.rng()).map(|p| p.last())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let s = Summary::of(&finals);
    checks.push(mc_check("compensated-integral-mean-zero", 0.0, &s, 3.0));

    // Branching property: Z from 3 equals the sum of independent copies from 1 and 2.
    let m = BranchingMechanism::feller(0.3, 0.5)?;
    let run = |sd: u64, z: f64| -> Result<Vec<f64>> {
        replicate(sd, n, |s| simulate_csbp_sde(&m, z, 1.0, 0.01, 0.01, false, &mut s.rng()).map(|p| p.last()))
            .into_iter()
            .collect()
    };
    let whole = run(seed.wrapping_add(2), 3.0)?;
    let parts: Vec<f64> = run(seed.wrapping_add(3), 1.0)?.iter().zip(run(seed.wrapping_add(4), 2.0)?).map(|(a, b)| a + b).collect();
    let ks = ks_two_sample(&whole, &parts);
    checks.push(CheckRow::numeric("branching-property-ks-p", 0.01, ks.p_value, None, ks.p_value > 0.01));

    // Quenched Laplace transform is multiplicative in the initial mass.
    let half = FractionLaw::constant(0.5)?;
    let worst = (0..200u64)
        .map(|i| {
            let env = sample_env_path(0.3, 1.0, &half, 5.0, &mut RngStream::new(seed, i).derive(tags::ENVIRONMENT).rng());
            let (y, yp) = (0.3 + i as f64 * 0.01, 1.7);
            let whole = quenched_laplace(1.0, &env, y + yp, 0.8, 5.0);
            let prod = quenched_laplace(1.0, &env, y, 0.8, 5.0) * quenched_laplace(1.0, &env, yp, 0.8, 5.0);
            ((whole - prod) / whole).abs()
        })
        .fold(0.0, f64::max);
    checks.push(CheckRow::numeric("quenched-multiplicativity-rel", 0.0, worst, None, worst <= 1e-12));

    // Cell division conserves the load exactly.
    let sp = SplitParams::new(1.0, 1.0, DivisionRate::Constant(1.0), FractionLaw::beta(2.0, 2.0)?)?;
    let opts = SplitOptions { keep_nodes: true, ..SplitOptions::default() };
    let mut splits = 0usize;
    let mut broken = 0usize;
    for i in 0..20u64 {
        let tree = simulate_splitting(&sp, 1.0, 4.0, &opts, &RngStream::new(seed, i))?;
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
        for (j, node) in tree.nodes.iter().enumerate() {
            if let Some(par) = node.parent {
                kids[par].push(j);
            }
        }
        for (j, node) in tree.nodes.iter().enumerate() {
            if let Some(load) = node.load_at_split {
                splits += 1;
                let sum: f64 = kids[j].iter().map(|&k| tree.nodes[k].load_at_birth).sum();
                if kids[j].len() != 2 || sum != load {
                    broken += 1;
                }
            }
        }
    }
    checks.push(CheckRow::numeric("division-mass-conservation-violations", 0.0, broken as f64, None, broken == 0 && splits > 0));
    Ok(Outcome { checks, tables: Vec::new() })
}
