use std::sync::Arc;
use std::time::Instant;

use popdyn::stats::{ks_two_sample, Summary};
use popdyn::structpop::*;

fn one() -> TraitFn {
    Arc::new(|_| 1.0)
}

#[test]
fn doubling_dominating_rate_leaves_law_unchanged() {
    let p = IbmParams::asymmetric_competition(100.0, 0.03, 0.1).unwrap();
    let init = PointPopulation::monomorphic(1.2, 100, 100.0);
    let t0 = Instant::now();
    let a = final_sizes(&p, &init, 1.0, 1.0, 200, 11).unwrap();
    let b = final_sizes(&p, &init, 1.0, 2.0, 200, 12).unwrap();
    let ks = ks_two_sample(&a, &b);
    eprintln!("N_T {} vs {} ks p {} ({:?})", Summary::of(&a).mean, Summary::of(&b).mean, ks.p_value, t0.elapsed());
    assert!(ks.p_value > 0.01);
}

#[test]
fn unit_martingale_residual() {
    let p = IbmParams::asymmetric_competition(100.0, 0.03, 0.1).unwrap();
    let init = PointPopulation::monomorphic(1.2, 100, 100.0);
    let t0 = Instant::now();
    let m = generator_moment_check(&p, one(), &init, 1.0, 200, 21).unwrap();
    eprintln!("{m:?} ({:?})", t0.elapsed());
    assert!(m.residual_ok(3.0));
    let f: TraitFn = Arc::new(|x| x);
    let m = generator_moment_check(&p, f, &init, 1.0, 200, 22).unwrap();
    eprintln!("{m:?}");
    assert!(m.residual_ok(3.0));
}

#[test]
fn pure_birth_mean() {
    let p = IbmParams::logistic(1.0, 0.0, 0.0, 0.0, 10.0).unwrap();
    let init = PointPopulation::monomorphic(0.5, 5, 10.0);
    let n = final_sizes(&p, &init, 1.0, 1.0, 4000, 31).unwrap();
    let s = Summary::of(&n);
    assert!(s.within(5.0 * 1f64.exp(), 3.0), "{s:?}");
}

#[test]
fn quadratic_variation_matches_compensator() {
    let p = IbmParams::logistic(2.0, 1.0, 1.0, 0.5, 10.0).unwrap();
    let init = PointPopulation::monomorphic(0.5, 10, 10.0);
    let m = generator_moment_check(&p, one(), &init, 1.0, 4000, 41).unwrap();
    eprintln!("{m:?}");
    assert!(m.residual_ok(3.0));
    assert!(m.bracket_rel_error() < 0.10);
}

#[test]
fn monomorphic_equilibrium_large_k() {
    let p = IbmParams::asymmetric_competition(1000.0, 0.0, 0.1).unwrap();
    let t0 = Instant::now();
    let e = equilibrium_tracking(&p, 2.0, 8.0, 4.0, 51).unwrap();
    eprintln!("{e:?} ({:?})", t0.elapsed());
    assert!(e.rel_error < 0.05);
}

#[test]
fn monomorphic_limit_distance_shrinks() {
    let p = IbmParams::logistic(2.0, 1.0, 1.0, 0.5, 1.0).unwrap();
    let regime = LimitRegime::Monomorphic { trait_value: 0.5 };
    let rows = limit_ode_compare(&p, &regime, &[(0.5, 0.5)], &[25.0, 400.0], 5.0, 0.1, 20, 61).unwrap();
    eprintln!("{rows:?}");
    assert!(rows[0].distance - rows[1].distance > 2.0 * (rows[0].stderr + rows[1].stderr));
}

#[test]
fn dimorphic_limit_tracks_lotka_volterra() {
    let p = IbmParams::asymmetric_competition(1.0, 0.0, 0.1).unwrap();
    let regime = LimitRegime::Dimorphic { traits: [1.0, 2.0] };
    let init = [(1.0, 0.5), (2.0, 0.5)];
    let t0 = Instant::now();
    let rows = limit_ode_compare(&p, &regime, &init, &[25.0, 400.0], 8.0, 0.2, 10, 71).unwrap();
    eprintln!("{rows:?} ({:?})", t0.elapsed());
    assert!(rows[0].distance - rows[1].distance > 2.0 * (rows[0].stderr + rows[1].stderr));
    // One trait fixes in the limit system.
    let path = lotka_volterra(&p, &[1.0, 2.0], &[0.5, 0.5], 200.0, 0.01).unwrap();
    let end = path.last().unwrap();
    assert!(end[0].min(end[1]) < 1e-3 * end[0].max(end[1]), "{end:?}");
}

#[test]
fn mean_field_total_mass() {
    let p = IbmParams::logistic(2.0, 1.0, 1.0, 0.5, 1.0)
        .unwrap()
        .with_mutation(0.2, MutationLaw::BoxGaussian { sigma: 0.1 });
    let rows = limit_ode_compare(&p, &LimitRegime::MeanField, &[(0.5, 0.5)], &[25.0, 400.0], 5.0, 0.1, 20, 81).unwrap();
    eprintln!("{rows:?}");
    assert!(rows[0].distance - rows[1].distance > 2.0 * (rows[0].stderr + rows[1].stderr));
    assert!(rows[1].distance < 0.3);
}

#[test]
fn asymmetric_competition_size_grows_with_k() {
    let small = IbmParams::asymmetric_competition(50.0, 0.03, 0.1).unwrap();
    let large = IbmParams::asymmetric_competition(200.0, 0.03, 0.1).unwrap();
    let a = final_sizes(&small, &PointPopulation::monomorphic(1.2, 50, 50.0), 3.0, 1.0, 20, 91).unwrap();
    let b = final_sizes(&large, &PointPopulation::monomorphic(1.2, 200, 200.0), 3.0, 1.0, 10, 92).unwrap();
    let (ma, mb) = (Summary::of(&a).mean / 50.0, Summary::of(&b).mean / 200.0);
    eprintln!("masses {ma} {mb}");
    assert!((ma / mb - 1.0).abs() < 0.1);
}

fn accelerated(k: f64, eta: f64) -> IbmParams {
    IbmParams::asymmetric_competition(k, 0.3, 0.3)
        .unwrap()
        .with_acceleration(Acceleration { eta, gamma: one(), gamma_bar: 1.0 })
}

#[test]
fn superprocess_bracket() {
    let p = accelerated(100.0, 1.0);
    let t0 = Instant::now();
    let r = accelerated_run(&p, one(), &PointPopulation::monomorphic(1.2, 100, 100.0), 0.5, 4, 101).unwrap();
    eprintln!("{r:?} ({:?})", t0.elapsed());
    assert!((r.bracket / r.limit_bracket - 1.0).abs() < 0.15);
}

#[test]
fn slow_acceleration_bracket_vanishes() {
    let t0 = Instant::now();
    let a = accelerated_run(&accelerated(100.0, 0.5), one(), &PointPopulation::monomorphic(1.2, 100, 100.0), 0.5, 4, 111)
        .unwrap();
    let b = accelerated_run(&accelerated(400.0, 0.5), one(), &PointPopulation::monomorphic(1.2, 400, 400.0), 0.5, 2, 112)
        .unwrap();
    let slope = (b.bracket_per_mass() / a.bracket_per_mass()).ln() / 4f64.ln();
    eprintln!("{a:?}\n{b:?}\nslope {slope} ({:?})", t0.elapsed());
    assert!((-0.75..=-0.45).contains(&slope));
}

#[test]
fn eta_zero_adds_gamma_once() {
    let base = IbmParams::asymmetric_competition(50.0, 0.0, 0.1).unwrap();
    let acc = base.clone().with_acceleration(Acceleration { eta: 0.0, gamma: one(), gamma_bar: 1.0 });
    let mut shifted = base.clone();
    shifted.birth = Arc::new(|x| 5.0 - x);
    shifted.birth_bar = 5.0;
    shifted.death_base = one();
    shifted.death_bar = 2.0;
    let init = PointPopulation::monomorphic(1.2, 50, 50.0);
    let a = final_sizes(&acc, &init, 1.0, 1.0, 200, 121).unwrap();
    let b = final_sizes(&shifted, &init, 1.0, 1.0, 200, 122).unwrap();
    assert!(ks_two_sample(&a, &b).p_value > 0.01);
}
