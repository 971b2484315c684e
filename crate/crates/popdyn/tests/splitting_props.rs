use popdyn::catastrophe::{simulate_catastrophe_diffusion, CatastropheEnv, FractionLaw};
use popdyn::kernel::replicate;
use popdyn::splitting::{
    auxiliary_identity_check, moderate_infection_params, simulate_splitting, total_mass_extinction, DivisionRate,
    SplitOptions, SplitParams,
};
use popdyn::stats::{chi_square_two_sample, histogram, Summary};

fn params(r: f64, tau: f64) -> SplitParams {
    SplitParams::new(r, 1.0, DivisionRate::Constant(tau), FractionLaw::constant(0.5).unwrap()).unwrap()
}

#[test]
fn yule_count_and_total_load_means() {
    let p = params(1.0, 1.0);
    let opts = SplitOptions { step: 0.5, keep_nodes: false, ..SplitOptions::default() };
    let trees = replicate(1, 20_000, |s| simulate_splitting(&p, 1.0, 3.0, &opts, &s).unwrap());
    for t in [1.0, 2.0, 3.0] {
        let n: Vec<f64> = trees.iter().map(|tr| tr.alive_at(t).unwrap().cells() as f64 * (-t as f64).exp()).collect();
        let x: Vec<f64> = trees.iter().map(|tr| tr.alive_at(t).unwrap().total_load() * (-t as f64).exp()).collect();
        let (n, x) = (Summary::of(&n), Summary::of(&x));
        assert!(n.within(1.0, 3.0), "N at {t}: {n:?}");
        assert!(x.within(1.0, 3.0), "X at {t}: {x:?}");
    }
}

#[test]
fn total_mass_clearance_probability() {
    for (r, n) in [(1.0, 20_000), (2.0, 20_000)] {
        let check = total_mass_extinction(&params(r, 1.0), 1.0, 40.0, 40.0, n, 2).unwrap();
        assert!(check.undecided < n / 1000, "{check:?}");
        assert!((check.frequency - check.target).abs() <= 3.0 * check.stderr, "{check:?}");
    }
    let zero = total_mass_extinction(&params(1.0, 1.0), 0.0, 5.0, 40.0, 100, 2).unwrap();
    assert_eq!(zero.frequency, 1.0);
}

#[test]
fn identity_holds_at_twice_the_rate_only() {
    let p = params(1.0, 1.0);
    let infected = |x: f64| f64::from(u8::from(x > 0.0));
    let ok = auxiliary_identity_check(&p, &infected, 1.0, 2.0, 2.0, 20_000, 3).unwrap();
    assert!(ok.agree, "{ok:?}");
    let bad = auxiliary_identity_check(&p, &infected, 1.0, 2.0, 1.0, 20_000, 3).unwrap();
    assert!(bad.z.abs() > 5.0, "{bad:?}");
    let one = auxiliary_identity_check(&p, &|_| 1.0, 1.0, 2.0, 2.0, 5000, 4).unwrap();
    assert!(one.agree && (one.rhs.mean - 1.0).abs() < 1e-15);
}

#[test]
fn mean_measure_matches_auxiliary_law() {
    // histogram of loads weighted by e^{-τt} per tree vs the auxiliary process
    let p = params(0.5, 1.0);
    let t = 2.0;
    let (lo, hi, bins) = (0.0, 4.0, 8);
    let opts = SplitOptions { step: t, keep_nodes: false, ..SplitOptions::default() };
    // sample one uniformly chosen cell per tree with probability N_t e^{-τt} / 8 (bounded by 1 with high probability)
    let picks: Vec<f64> = replicate(5, 40_000, |s| {
        use rand::Rng;
        let tree = simulate_splitting(&p, 1.0, t, &opts, &s).unwrap();
        let loads = &tree.last().loads;
        let mut rng = s.derive(99).rng();
        let accept = loads.len() as f64 * (-t as f64).exp() / 8.0;
        if rng.random::<f64>() < accept {
            Some(loads[rng.random_range(0..loads.len())])
        } else {
            None
        }
    })
    .into_iter()
    .flatten()
    .filter(|&x| x > 0.0)
    .collect();
    let env = CatastropheEnv::constant(2.0, p.fraction.clone()).unwrap();
    let aux: Vec<f64> = replicate(6, 20_000, |s| simulate_catastrophe_diffusion(0.5, 1.0, &env, 1.0, t, t, &s).unwrap().path.last())
        .into_iter()
        .filter(|&x| x > 0.0)
        .collect();
    let ha = histogram(&picks, lo, hi, bins);
    let hb = histogram(&aux, lo, hi, bins);
    let chi = chi_square_two_sample(&ha, &hb);
    assert!(chi.p_value > 0.01, "{chi:?} {ha:?} {hb:?}");
}

#[test]
fn recovery_preset_infected_fraction_vanishes() {
    let p = params(1.0, 1.0);
    let opts = SplitOptions { step: 1.0, keep_nodes: false, max_cells: 200_000, ..SplitOptions::default() };
    let mut fracs = replicate(7, 200, |s| {
        let tree = simulate_splitting(&p, 1.0, 10.0, &opts, &s).unwrap();
        let last = tree.last();
        last.infected() as f64 / last.cells() as f64
    });
    fracs.sort_by(f64::total_cmp);
    assert!(fracs[fracs.len() / 2] < 0.05, "median {}", fracs[fracs.len() / 2]);
}

#[test]
fn moderate_infection_grows_on_positive_fraction() {
    let (r, g) = (1.0, 1.0);
    let p = moderate_infection_params(r, g).unwrap();
    // P(Feller from 1 hits 0 before 2), from the scale function
    let a: f64 = r / g;
    let q = (-a).exp() / (1.0 + (-a).exp());
    assert!(q < 0.5);
    let opts = SplitOptions { step: 0.005, keep_nodes: false, max_cells: 1000, snapshot_every: 100, ..SplitOptions::default() };
    let n = 200;
    let runs = replicate(8, n, |s| simulate_splitting(&p, 1.0, 6.0, &opts, &s).unwrap());
    let growing = runs.iter().filter(|t| t.last().infected() >= 20).count() as f64 / n as f64;
    // infected cells form a binary GW with offspring-2 probability 1 - q; survival 1 - q/(1-q)
    let survive = 1.0 - q / (1.0 - q);
    assert!(growing > 0.5 * survive, "growing {growing}, GW survival {survive}");
    for t in &runs {
        assert!(t.snapshots.iter().all(|s| s.loads.iter().all(|&x| x < 2.0)));
    }
}
