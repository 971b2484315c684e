use popdyn::kernel::{replicate, RngStream};
use popdyn::scaling::*;
use popdyn::stats::Summary;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn deterministic_limit_distances_shrink() {
    let fam = ScaledFamily::Deterministic { lambda: 2.0, mu: 1.0, c: 0.5 };
    let rows = convergence_harness(&fam, &[50, 200, 800], 1.0, 10.0, 0.05, 400, 17).unwrap();
    for w in rows.windows(2) {
        assert!(w[0].distance > w[1].distance, "{rows:?}");
    }
    let (a, b) = (rows[0], rows[2]);
    assert!(a.distance - b.distance > 2.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt());
}

#[test]
fn accelerated_fluctuations_persist() {
    let fam = ScaledFamily::Accelerated { gamma: 0.5, lambda: 2.0, mu: 1.0, c: 0.5 };
    let rows = convergence_harness(&fam, &[20, 80], 1.0, 2.0, 0.05, 200, 18).unwrap();
    // distance stays of order one instead of shrinking like K^{-1/2}
    assert!(rows[1].distance > 0.5 * rows[0].distance, "{rows:?}");
    assert!(rows[1].distance > 0.2);
}

#[test]
fn stationary_gamma_moments() {
    let est = stationary_moments(1.0, 1.0, 1.0, 0.5, 200.0, 0.01, 0.2, 200, 5).unwrap();
    assert!((est.mean - 0.5).abs() < 0.025, "{est:?}");
    assert!((est.variance - 0.25).abs() < 0.025, "{est:?}");
}

#[test]
fn negative_growth_goes_extinct() {
    // r - σ²/2 < 0
    let finals: Vec<f64> = replicate(6, 200, |s| *random_env_paths(0.3, 1.0, 1.0, 1.0, 200.0, 0.01, &mut s.rng()).unwrap().exact.last().unwrap());
    let mut f = finals.clone();
    f.sort_by(f64::total_cmp);
    assert!(f[f.len() / 2] < 1e-3, "median {}", f[f.len() / 2]);
}

#[test]
fn euler_strong_error_shrinks_with_step() {
    let (r, c, sig, y0, t) = (1.0, 1.0, 1.0, 0.5, 2.0);
    let fine: f64 = 1.0 / 1024.0;
    let n = (t / fine) as usize;
    let mut errs = [Vec::new(), Vec::new(), Vec::new()];
    for i in 0..200u64 {
        let mut rng = RngStream::new(31, i).rng();
        let dw: Vec<f64> = (0..n).map(|_| fine.sqrt() * { let z: f64 = StandardNormal.sample(&mut rng); z }).collect();
        for (j, agg) in [16usize, 8, 4].iter().enumerate() {
            let coarse: Vec<f64> = dw.chunks(*agg).map(|ch| ch.iter().sum()).collect();
            let p = random_env_from_increments(r, c, sig, y0, fine * *agg as f64, &coarse).unwrap();
            let e = p.numeric.iter().zip(&p.exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            errs[j].push(e);
        }
    }
    let m: Vec<f64> = errs.iter().map(|e| Summary::of(e).mean).collect();
    assert!(m[0] > m[1] && m[1] > m[2], "{m:?}");
    // strong order at least one half
    assert!(m[0] / m[2] > 2.0f64.sqrt() * 0.9, "{m:?}");
}

#[test]
fn logistic_feller_absorbs() {
    let p = LogisticFeller { gamma: 1.0, lambda: 1.0, mu: 0.5, c: 1.0 };
    let absorbed: Vec<bool> = replicate(7, 200, |s| simulate_logistic_feller(&p, 1.0, 200.0, 0.01, &mut s.rng()).unwrap().absorbed_at.is_some());
    let frac = absorbed.iter().filter(|&&a| a).count() as f64 / 200.0;
    let short: Vec<bool> = replicate(7, 200, |s| simulate_logistic_feller(&p, 1.0, 2.0, 0.01, &mut s.rng()).unwrap().absorbed_at.is_some());
    let frac_short = short.iter().filter(|&&a| a).count() as f64 / 200.0;
    assert!(frac > 0.95 && frac >= frac_short, "{frac} {frac_short}");
}

#[test]
fn logistic_feller_moment_identity() {
    // E X_t - x0 = ∫ E[X_s (λ-μ) - c X_s²] ds
    let p = LogisticFeller { gamma: 0.5, lambda: 1.5, mu: 0.5, c: 0.4 };
    let (x0, t, h) = (1.0, 1.0, 1e-3);
    let out: Vec<(f64, f64)> = replicate(8, 20_000, |s| {
        let path = simulate_logistic_feller(&p, x0, t, h, &mut s.rng()).unwrap();
        let mut integral = 0.0;
        for w in path.times.windows(2).zip(path.values.windows(2)) {
            let (ts, xs) = w;
            let f = |x: f64| x * (p.lambda - p.mu) - p.c * x * x;
            integral += 0.5 * (f(xs[0]) + f(xs[1])) * (ts[1] - ts[0]);
        }
        (path.value_at(t) - x0 - integral, 0.0)
    });
    let r = Summary::of(&out.iter().map(|o| o.0).collect::<Vec<_>>());
    assert!(r.within(0.0, 3.0), "{r:?}");
}
