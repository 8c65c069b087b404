use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn builtins() -> Vec<(SharedFamily, Vec<f64>)> {
    vec![
        (Arc::new(Bernoulli), vec![0.05, 0.1, 0.3, 0.5, 0.7, 0.95]),
        (Arc::new(Poisson), vec![0.1, 0.5, 1.0, 3.0, 10.0]),
        (Arc::new(GaussianScale), vec![0.1, 0.5, 1.0, 2.5, 10.0]),
        (Arc::new(LocationNormal), vec![-10.0, -1.0, 0.0, 0.7, 10.0]),
    ]
}

fn laplace_like_table() -> Vec<(f64, f64)> {
    // two-sided exponential density with a flat top, tabulated on a grid
    let xs: Vec<f64> = (-40..=40).map(|k| k as f64 * 0.1).collect();
    let raw: Vec<f64> = xs.iter().map(|x: &f64| (-(x.abs() - 0.5).max(0.0) * 1.5).exp()).collect();
    let z: f64 = raw.windows(2).map(|w| 0.1 * 0.5 * (w[0] + w[1])).sum();
    xs.into_iter().zip(raw.into_iter().map(|r| r / z)).collect()
}

#[test]
fn normalization() {
    for (fam, grid) in builtins() {
        let tol = if fam.support_kind().is_discrete() { 1e-12 } else { 1e-8 };
        for &t in &grid {
            let mass = expectation(fam.as_ref(), t, |_| 1.0).unwrap();
            assert!((mass - 1.0).abs() < tol, "{} θ={t}: mass {mass}", fam.name());
        }
    }
}

#[test]
fn score_mean_zero_and_fisher_moment() {
    for (fam, grid) in builtins() {
        let tol = if fam.support_kind().is_discrete() { 1e-12 } else { 1e-6 };
        for &t in &grid {
            let m = expectation(fam.as_ref(), t, |x| fam.score(x, t)).unwrap();
            let scale = fam.fisher(t).sqrt();
            assert!(m.abs() < tol * scale.max(1.0), "{} θ={t}: mean {m}", fam.name());
            let i_num = fisher_numeric(fam.as_ref(), t).unwrap();
            let i = fisher_info(fam.as_ref(), t).unwrap();
            assert!((i_num - i).abs() < tol * i.max(1.0), "{} θ={t}: {i_num} vs {i}", fam.name());
        }
    }
}

#[test]
fn gamma_derivative_is_root_fisher() {
    for (fam, grid) in builtins() {
        for &t in &grid {
            let h = 1e-5 * t.abs().max(0.1);
            let d = (fam.gamma(t + h) - fam.gamma(t - h)) / (2.0 * h);
            let want = fam.fisher(t).sqrt();
            assert!((d - want).abs() < 1e-6 * want, "{} θ={t}: {d} vs {want}", fam.name());
        }
    }
}

#[test]
fn gamma_matches_quadrature_from_anchor() {
    for (fam, grid) in builtins() {
        for &t in &grid {
            let q = gamma_numeric(fam.as_ref(), t).unwrap();
            assert!((q - fam.gamma(t)).abs() < 1e-9, "{} θ={t}", fam.name());
            let back = fam.gamma_inverse(fam.gamma(t));
            assert!((back - t).abs() < 1e-12 * t.abs().max(1.0));
        }
    }
}

#[test]
fn gamma_increment_agrees_with_difference() {
    let custom = LocationCustom::from_table(&laplace_like_table()).unwrap();
    let mut all = builtins();
    all.push((Arc::new(custom), vec![-1.0, 0.0, 2.0]));
    for (fam, grid) in all {
        for &t in &grid {
            for s in [1e-3, 0.01, -0.01] {
                let d = fam.gamma(t + s) - fam.gamma(t);
                let inc = fam.gamma_increment(t, s);
                assert!((d - inc).abs() < 1e-10 * d.abs().max(1e-3), "{} θ={t} s={s}", fam.name());
            }
        }
    }
    assert_eq!(LocationNormal.gamma_increment(0.3, 0.1), 0.1);
}

#[test]
fn gamma_strictly_increasing() {
    for (fam, _) in builtins() {
        let (lo, hi) = fam.working_interval();
        let vals: Vec<f64> = (0..=200).map(|k| fam.gamma(lo + (hi - lo) * k as f64 / 200.0)).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]), "{}", fam.name());
    }
}

#[test]
fn fisher_examples() {
    assert_eq!(fisher_info(&Bernoulli, 0.5).unwrap(), 4.0);
    assert_eq!(fisher_info(&Poisson, 1.0).unwrap(), 1.0);
    assert_eq!(fisher_info(&GaussianScale, 1.0).unwrap(), 2.0);
    for t in [-3.0, 0.0, 5.0] {
        let num = fisher_numeric(&LocationNormal, t).unwrap();
        assert!((num - 1.0).abs() < 1e-10);
        assert_eq!(fisher_info(&LocationNormal, t).unwrap(), 1.0);
    }
    assert!(matches!(fisher_info(&Bernoulli, 1.5), Err(Error::Domain { .. })));
    assert!(matches!(fisher_info(&Poisson, -1.0), Err(Error::Domain { .. })));
}

#[test]
fn gamma_examples() {
    assert!((gamma_transform(&Bernoulli, 0.25).unwrap() - PI / 3.0).abs() < 1e-12);
    assert!((gamma_transform(&Poisson, 4.0).unwrap() - 4.0).abs() < 1e-12);
    assert!((gamma_transform(&LocationNormal, 0.7).unwrap() - 0.7).abs() < 1e-15);
    let e = std::f64::consts::E;
    assert!((gamma_transform(&GaussianScale, e).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    assert!(gamma_transform(&GaussianScale, 0.0).is_err());
}

#[test]
fn extended_tangent_examples() {
    assert_eq!(extended_tangent(&Bernoulli, 1.0, 0.5, 0.5).unwrap(), 2.0);
    let mut prev = f64::INFINITY;
    for h in [1e-2, 1e-3, 1e-4] {
        let v = extended_tangent(&Bernoulli, 1.0, 0.5, 0.5 + h).unwrap();
        let err = (v - 2.0).abs();
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 1e-3);
    let v = extended_tangent(&Poisson, 0.0, 1.0, 1.1).unwrap();
    let oracle = 20.0 * ((-0.05f64).exp() - 1.0);
    assert!((v - oracle).abs() < 1e-12);
    assert!((v + 0.97541).abs() < 1e-5);
    assert!(matches!(
        extended_tangent(&Bernoulli, 0.5, 0.3, 0.4),
        Err(Error::Singularity { .. })
    ));
}

#[test]
fn extended_tangent_first_order_convergence() {
    let cases: Vec<(SharedFamily, f64, f64)> = vec![
        (Arc::new(Bernoulli), 0.0, 0.3),
        (Arc::new(Poisson), 3.0, 2.0),
        (Arc::new(GaussianScale), 1.3, 0.8),
        (Arc::new(LocationNormal), 0.4, -0.2),
    ];
    for (fam, x, t) in cases {
        let s = fam.score(x, t);
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3, 1.25e-3]
            .iter()
            .map(|h| (extended_tangent(fam.as_ref(), x, t, t + h).unwrap() - s).abs())
            .collect();
        for w in errs.windows(2) {
            let ratio = w[1] / w[0];
            assert!((ratio - 0.5).abs() < 0.05, "{}: ratio {ratio}", fam.name());
        }
    }
}

#[test]
fn fisher_bounded_on_working_interval() {
    for (fam, _) in builtins() {
        let (lo, hi) = fam.working_interval();
        let r = check_regularity(fam.as_ref(), &ThetaGrid::new(lo, hi, 41), 0.0, 1.0).unwrap();
        assert!(r.r3_pass);
        assert!(r.r3_bounds.0 > 0.0 && r.r3_bounds.1 < 1e3);
    }
}

#[test]
fn regularity_examples() {
    let r = check_regularity(&Bernoulli, &ThetaGrid::new(0.1, 0.9, 33), 0.05, 1.0).unwrap();
    assert!(r.all_pass(), "{r:?}");
    assert!(r.pairs > 0 && r.r1_sup_estimate > 0.0 && r.r2_sup_estimate > 0.0);
    let r = check_regularity(&LocationNormal, &ThetaGrid::new(-1.0, 1.0, 21), 0.1, 1.0).unwrap();
    assert!(r.all_pass(), "{r:?}");
    let r = check_regularity(&Poisson, &ThetaGrid::single(1.0), 0.0, 1.0).unwrap();
    assert!(r.insufficient_pairs);
    assert_eq!((r.r1_sup_estimate, r.r2_sup_estimate), (0.0, 0.0));
    assert!(!r.r1_pass && !r.r2_pass && r.r3_pass);
    assert!(check_regularity(&Poisson, &ThetaGrid::new(1.0, 2.0, 0), 0.1, 1.0).is_err());
}

#[test]
fn regularity_deltas() {
    let (d1, d2) = default_deltas(1.0).unwrap();
    assert_eq!(d1, 0.75);
    assert_eq!(d2, 3.5);
    assert!(default_deltas(0.5).is_err());
}

#[test]
fn sampler_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 40_000;
    for (fam, grid) in builtins() {
        let t = grid[grid.len() / 2];
        let mean: f64 = (0..n).map(|_| fam.block_statistic(fam.sample(t, &mut rng))).sum::<f64>() / n as f64;
        let m = fam.mean_map(t);
        let sd = (fam.mean_map(t).abs() + 1.0) * 3.0 / (n as f64).sqrt();
        assert!((mean - m).abs() < 3.0 * sd, "{}: {mean} vs {m}", fam.name());
        assert!((fam.stabilize(m) - fam.gamma(t)).abs() < 1e-12);
        assert!((fam.mean_map_inverse(m) - t).abs() < 1e-12);
    }
}

#[test]
fn score_laws_match_moments() {
    for (fam, grid) in builtins() {
        let t = grid[1];
        match fam.score_law(t) {
            ScoreLaw::Atoms(a) => {
                let mass: f64 = a.iter().map(|x| x.1).sum();
                let var: f64 = a.iter().map(|x| x.0 * x.0 * x.1).sum();
                assert!((mass - 1.0).abs() < 1e-12);
                assert!((var - fam.fisher(t)).abs() < 1e-9 * fam.fisher(t));
                assert!(a.windows(2).all(|w| w[1].0 > w[0].0));
            }
            ScoreLaw::Continuous { cdf, sd, .. } => {
                assert!((sd * sd - fam.fisher(t)).abs() < 1e-12);
                let median_side = cdf(0.0);
                let direct = expectation(fam.as_ref(), t, |x| if fam.score(x, t) <= 0.0 { 1.0 } else { 0.0 }).unwrap();
                assert!((median_side - direct).abs() < 1e-6);
                assert!(cdf(-50.0 * sd) < 1e-12 && cdf(50.0 * sd) > 1.0 - 1e-12);
            }
        }
    }
}

#[test]
fn block_sum_laws_are_distributions() {
    let law = Bernoulli.block_sum_law(&[0.2, 0.5, 0.9]).unwrap();
    let BlockSumLaw::Lattice { offset, pmf } = law else { panic!() };
    assert_eq!(offset, 0);
    assert!((pmf[0] - 0.8 * 0.5 * 0.1).abs() < 1e-15);
    assert!((pmf[3] - 0.2 * 0.5 * 0.9).abs() < 1e-15);
    let BlockSumLaw::Lattice { offset, pmf } = Poisson.block_sum_law(&[400.0; 5]).unwrap() else { panic!() };
    assert!(offset > 0);
    let mass: f64 = pmf.iter().sum();
    let mean: f64 = pmf.iter().enumerate().map(|(k, p)| (offset + k as u64) as f64 * p).sum();
    assert!((mass - 1.0).abs() < 1e-12);
    assert!((mean - 2000.0).abs() < 1e-8);
}

#[test]
fn family_lookup() {
    for name in BUILTIN_NAMES {
        assert_eq!(family_by_name(name).unwrap().name(), name);
    }
    assert!(family_by_name("location_custom").is_err());
    assert!(family_by_name("cauchy").is_err());
}

#[test]
fn tabulated_location_family() {
    let fam = LocationCustom::from_table(&laplace_like_table()).unwrap();
    for t in [-1.0, 0.0, 2.5] {
        let mass = expectation(&fam, t, |_| 1.0).unwrap();
        assert!((mass - 1.0).abs() < 1e-8);
        let mean = expectation(&fam, t, |x| x).unwrap();
        assert!((mean - fam.mean_map(t)).abs() < 1e-8);
        let i = fisher_numeric(&fam, t).unwrap();
        assert!((i - fam.fisher(t)).abs() < 1e-6 * i);
        let m0 = expectation(&fam, t, |x| fam.score(x, t)).unwrap();
        assert!(m0.abs() < 1e-6);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 40_000;
    let xs: Vec<f64> = (0..n).map(|_| fam.sample(0.3, &mut rng)).collect();
    let below = xs.iter().filter(|&&x| x <= 0.3).count() as f64 / n as f64;
    assert!((below - 0.5).abs() < 0.015);
}

#[test]
fn tabulated_rejects_bad_tables() {
    assert!(LocationCustom::from_table(&[(0.0, 0.5), (1.0, 1.0)]).is_err());
    assert!(LocationCustom::from_table(&[(0.0, 0.5), (0.0, 1.0), (1.0, 0.5)]).is_err());
    assert!(LocationCustom::from_table(&[(0.0, 5.0), (1.0, 6.0), (2.0, 5.0)]).is_err());
    assert!(LocationCustom::from_table(&[(0.0, 0.5), (1.0, 0.4), (2.0, 0.1)]).is_err());
}

#[test]
fn tabulated_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    let body: String = laplace_like_table()
        .iter()
        .map(|(x, p)| format!("{x}, {p}\n"))
        .collect();
    std::fs::write(&path, format!("# x p\n{body}")).unwrap();
    let fam = LocationCustom::from_file(&path).unwrap();
    assert!(fam.fisher(0.0) > 0.0);
    std::fs::write(&path, "0 0.1\n1 oops\n").unwrap();
    match LocationCustom::from_file(&path) {
        Err(Error::Parse { location: Some(l), .. }) => assert!(l.ends_with(":2")),
        other => panic!("{other:?}"),
    }
}
