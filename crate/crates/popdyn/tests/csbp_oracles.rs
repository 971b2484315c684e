use popdyn::csbp::{
    classify, gw_scaling_demo, laplace_at_infinity, laplace_exponent, simulate_csbp_lamperti, simulate_csbp_sde,
    BranchingMechanism, OffspringLaw,
};
use popdyn::kernel::replicate;
use popdyn::stats::{ks_two_sample, linear_fit, Summary};

fn riccati(r: f64, gamma: f64, t: f64, lambda: f64) -> f64 {
    if r == 0.0 {
        return lambda / (1.0 + gamma * lambda * t);
    }
    let e = (r * t).exp();
    lambda * r * e / (r + gamma * lambda * (e - 1.0))
}

/// exp-sinh quadrature on (0, ∞), independent of the crate's Kronrod rule
fn exp_sinh(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut acc = 0.0;
    let n = (6.0 / h) as i64;
    for k in -n..=n {
        let t = k as f64 * h;
        let x = (half_pi * t.sinh()).exp();
        let w = half_pi * t.cosh() * x;
        let v = f(x) * w;
        if v.is_finite() {
            acc += v;
        }
    }
    acc * h
}

fn phi(u: f64) -> f64 {
    if u < 1e-3 {
        u * u * (0.5 - u * (1.0 / 6.0 - u * (1.0 / 24.0 - u / 120.0)))
    } else {
        (-u).exp_m1() + u
    }
}

#[test]
fn feller_laplace_matches_riccati() {
    for (r, g) in [(0.5, 1.0), (-0.7, 0.3), (0.0, 2.0)] {
        let m = BranchingMechanism::feller(r, g).unwrap();
        for t in [0.1, 0.5, 1.0, 2.0, 7.0] {
            for l in [0.01, 0.5, 1.0, 2.0, 50.0] {
                let u = laplace_exponent(&m, t, l, 1e-12).unwrap();
                let exact = riccati(r, g, t, l);
                assert!((u.value - exact).abs() <= 1e-9 * exact, "r={r} t={t} λ={l}: {} vs {exact}", u.value);
            }
        }
    }
}

#[test]
fn stable_laplace_matches_closed_form() {
    // ψ = κ λ^α gives u^{1-α} = λ^{1-α} + κ(α-1)t
    let alpha = 1.5;
    let m = BranchingMechanism::stable(0.0, 0.0, 0.7, alpha).unwrap();
    let kappa = m.psi_exact(1.0);
    for t in [0.5, 1.0, 3.0] {
        for l in [0.2, 1.0, 10.0] {
            let u = laplace_exponent(&m, t, l, 1e-12).unwrap();
            let exact = (l.powf(1.0 - alpha) + kappa * (alpha - 1.0) * t).powf(1.0 / (1.0 - alpha));
            assert!((u.value - exact).abs() <= 1e-9 * exact);
            assert!(u.identity_residual.unwrap().abs() < 1e-8);
        }
    }
}

#[test]
fn stable_psi_matches_reference_quadrature() {
    for alpha in [1.2, 1.5, 1.8] {
        let c = 1.3;
        let m = BranchingMechanism::stable(0.0, 0.0, c, alpha).unwrap();
        for lam in [0.3, 1.0, 12.0] {
            let reference = c * exp_sinh(|h| phi(lam * h) * h.powf(-1.0 - alpha), 1.0 / 64.0);
            let got = m.psi(lam, 1e-9).unwrap();
            assert!((got - reference).abs() <= 1e-8 * reference, "α={alpha} λ={lam}: {got} vs {reference}");
        }
    }
}

#[test]
fn fixed_point_is_reported() {
    let m = BranchingMechanism::feller(1.0, 1.0).unwrap();
    let u = laplace_exponent(&m, 40.0, 3.0, 1e-12).unwrap();
    assert!(u.fixed_point);
    assert!((u.value - 1.0).abs() < 1e-8);
    let at_root = laplace_exponent(&m, 2.0, 1.0, 1e-12).unwrap();
    assert!(at_root.fixed_point && at_root.value == 1.0);
}

#[test]
fn laplace_monotone_in_time() {
    let m = BranchingMechanism::stable(-0.2, 0.4, 0.5, 1.6).unwrap();
    let mut prev = 2.0;
    for k in 1..20 {
        let u = laplace_exponent(&m, k as f64 * 0.25, 2.0, 1e-12).unwrap().value;
        assert!(u < prev);
        prev = u;
    }
}

#[test]
fn sde_mean_is_exponential_and_martingale() {
    let m = BranchingMechanism::stable(0.4, 0.5, 0.5, 1.5).unwrap();
    let n = 4000;
    let paths = replicate(11, n, |s| simulate_csbp_sde(&m, 1.0, 2.0, 0.01, 0.01, true, &mut s.rng()).unwrap());
    for t in [0.5, 1.0, 2.0] {
        let xs: Vec<f64> = paths.iter().map(|p| p.value_at(t) * (-0.4 * t).exp()).collect();
        let s = Summary::of(&xs);
        assert!(s.within(1.0, 3.0), "t={t}: {s:?}");
    }
}

#[test]
fn sde_zero_start_stays_zero() {
    let m = BranchingMechanism::stable(1.0, 1.0, 1.0, 1.5).unwrap();
    let p = simulate_csbp_sde(&m, 0.0, 1.0, 0.01, 0.01, true, &mut popdyn::kernel::RngStream::new(1, 1).rng()).unwrap();
    assert!(p.values.iter().all(|&v| v == 0.0));
}

#[test]
fn branching_property_ks() {
    let m = BranchingMechanism::feller(0.3, 0.5).unwrap();
    let n = 10_000;
    let sim = |seed: u64, z: f64| {
        replicate(seed, n, |s| simulate_csbp_sde(&m, z, 1.0, 0.005, 0.01, false, &mut s.rng()).unwrap().last())
    };
    let whole = sim(1, 3.0);
    let a = sim(2, 1.0);
    let b = sim(3, 2.0);
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let ks = ks_two_sample(&whole, &sum);
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn laplace_log_linear_in_start() {
    let m = BranchingMechanism::feller(0.2, 1.0).unwrap();
    let (lam, t) = (1.0, 1.0);
    let zs = [1.0, 2.0, 4.0];
    let logs: Vec<f64> = zs
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let e = replicate(40 + i as u64, 20_000, |s| {
                let p = simulate_csbp_sde(&m, z, t, 0.01, 0.01, false, &mut s.rng()).unwrap();
                (-lam * p.last()).exp()
            });
            Summary::of(&e).mean.ln()
        })
        .collect();
    let mut x = vec![0.0];
    x.extend(zs);
    let mut y = vec![0.0];
    y.extend(&logs);
    let fit = linear_fit(&x, &y, None);
    assert!(fit.r_squared > 0.999, "{fit:?}");
    let u = laplace_exponent(&m, t, lam, 1e-12).unwrap().value;
    assert!((fit.slope + u).abs() < 0.02, "slope {} vs {}", fit.slope, -u);
}

#[test]
fn lamperti_absorption_matches_infinite_lambda_limit() {
    let (r, g) = (0.5, 1.0);
    let m = BranchingMechanism::feller(r, g).unwrap();
    let t = 1.0;
    let u_inf = laplace_at_infinity(&m, t, 1e-8).unwrap().unwrap();
    let exact = r * (r * t).exp() / (g * ((r * t).exp() - 1.0));
    assert!((u_inf - exact).abs() < 1e-6 * exact);
    let n = 20_000;
    let absorbed = replicate(5, n, |s| {
        let p = simulate_csbp_lamperti(&m, 1.0, t, 0.01, 0.01, false, &mut s.rng()).unwrap();
        f64::from(u8::from(p.last() == 0.0))
    });
    let s = Summary::of(&absorbed);
    let target = (-u_inf).exp();
    assert!(s.within(target, 3.0), "absorbed {} vs {target} (se {})", s.mean, s.stderr);
}

#[test]
fn stable_has_no_infinite_lambda_limit_for_linear_mechanism() {
    let m = BranchingMechanism::feller(-0.5, 0.0).unwrap();
    assert!(laplace_at_infinity(&m, 1.0, 1e-8).unwrap().is_none());
    assert!(!classify(&m).unwrap().absorption_possible);
}

#[test]
fn unstability_mass_leaves_compacts() {
    let m = BranchingMechanism::feller(0.3, 0.5).unwrap();
    let finals = replicate(9, 2000, |s| simulate_csbp_sde(&m, 1.0, 30.0, 0.02, 0.01, false, &mut s.rng()).unwrap().last());
    let inside = finals.iter().filter(|&&z| z > 0.1 && z < 10.0).count() as f64 / finals.len() as f64;
    assert!(inside < 0.02, "mass in [0.1, 10] = {inside}");
}

#[test]
fn gw_unit_offspring_is_exact() {
    let rows = gw_scaling_demo(OffspringLaw::Unit, &[10, 100], 1.0, 1.0, &[0.5, 1.0], 10, 1).unwrap();
    assert!(rows.iter().all(|r| r.distance < 1e-12 && r.exact_distance < 1e-12));
}

#[test]
fn gw_binary_and_stable_domain_converge() {
    let lambdas = [0.5, 1.0, 2.0];
    let rows = gw_scaling_demo(OffspringLaw::Binary, &[4, 16, 64, 256], 1.0, 1.0, &lambdas, 200, 3).unwrap();
    assert!(rows.windows(2).all(|w| w[1].exact_distance < w[0].exact_distance), "{rows:?}");
    let rows = gw_scaling_demo(OffspringLaw::StableDomain { alpha: 1.5 }, &[4, 16, 64, 256], 1.0, 1.0, &lambdas, 200, 3).unwrap();
    assert!(rows.windows(2).all(|w| w[1].exact_distance < w[0].exact_distance), "{rows:?}");
}

#[test]
fn lamperti_and_sde_agree_for_stable_mechanism() {
    let m = BranchingMechanism::stable(0.0, 0.0, 0.5, 1.5).unwrap();
    let n = 20_000;
    let sde = replicate(21, n, |s| simulate_csbp_sde(&m, 1.0, 1.0, 0.005, 0.005, true, &mut s.rng()).unwrap().last());
    let lam = replicate(22, n, |s| simulate_csbp_lamperti(&m, 1.0, 1.0, 0.005, 0.005, true, &mut s.rng()).unwrap().last());
    for l in [0.5, 1.0, 2.0] {
        let a = Summary::of(&sde.iter().map(|z| (-l * z).exp()).collect::<Vec<_>>());
        let b = Summary::of(&lam.iter().map(|z| (-l * z).exp()).collect::<Vec<_>>());
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        let oracle = (-laplace_exponent(&m, 1.0, l, 1e-12).unwrap().value).exp();
        println!("λ={l}: sde {} lamperti {} oracle {oracle} se {se}", a.mean, b.mean);
        assert!((a.mean - b.mean).abs() <= 3.0 * se);
    }
}
