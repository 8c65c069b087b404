use super::*;
use crate::families::{Bernoulli, GaussianScale, LocationNormal, Poisson};

fn func(desc: &str, l: f64) -> RegressionFunction {
    RegressionFunction::parse(desc, 1.0, l).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

#[test]
fn original_sampler() {
    let f = func("constant(0.5)", 1.0);
    assert_eq!(sample_original(&Bernoulli, &f, 0, 1).unwrap().n(), 0);
    let d = sample_original(&Bernoulli, &f, 10_000, 1).unwrap();
    assert!((mean(&d.observations) - 0.5).abs() < 0.02);
    assert_eq!(d, sample_original(&Bernoulli, &f, 10_000, 1).unwrap());
    d.check_support(&Bernoulli).unwrap();
    let d = sample_original(&Poisson, &func("affine(1, 1)", 2.0), 10_000, 2).unwrap();
    assert!((mean(&d.observations) - 1.5).abs() < 0.05);
    assert!(matches!(
        sample_original(&Bernoulli, &func("affine(0.5, 0.6)", 2.0), 10, 1),
        Err(Error::Domain { .. })
    ));
}

#[test]
fn local_gaussian_sampler() {
    let f = func("constant(0.5)", 1.0);
    let zero = RegressionFunction::zero(1.0, 1.0).unwrap();
    let d = sample_local_gaussian(&Bernoulli, &f, &zero, 10_000, 0.1, 3).unwrap();
    assert!((var(&d.observations) / 0.25 - 1.0).abs() < 0.05);
    assert!(mean(&d.observations).abs() < 4.0 * 0.5 / 100.0);
    let f0 = func("constant(0)", 1.0);
    let h = func("constant(0.1)", 1.0);
    let d = sample_local_gaussian(&LocationNormal, &f0, &h, 10_000, 0.1, 4).unwrap();
    assert!((mean(&d.observations) - 0.1).abs() < 0.04);
    assert!((var(&d.observations) - 1.0).abs() < 0.05);
    let d = sample_local_gaussian(&GaussianScale, &func("constant(1)", 1.0), &zero, 10_000, 0.1, 5).unwrap();
    assert!((var(&d.observations) / 0.5 - 1.0).abs() < 0.05);
    assert!(matches!(
        sample_local_gaussian(&LocationNormal, &f0, &h, 10, 0.05, 4),
        Err(Error::Argument(_))
    ));
}

#[test]
fn global_gaussian_sampler() {
    let n = 10_000;
    let d = sample_global_gaussian(&Bernoulli, &func("constant(0.25)", 1.0), n, 6).unwrap();
    assert!((mean(&d.observations) - PI / 3.0).abs() < 4.0 / (n as f64).sqrt());
    let d = sample_global_gaussian(&Poisson, &func("constant(4)", 4.0), n, 7).unwrap();
    assert!((mean(&d.observations) - 4.0).abs() < 0.04);
    let d = sample_global_gaussian(&Poisson, &func("constant(4)", 4.0), 1, 7).unwrap();
    assert_eq!(d.n(), 1);
    assert_eq!(d.design, vec![1.0]);
}

#[test]
fn loglik_examples() {
    let f = func("constant(0.5)", 1.0);
    let zero = RegressionFunction::zero(1.0, 1.0).unwrap();
    let d = sample_original(&Bernoulli, &f, 50, 8).unwrap();
    assert_eq!(loglik_ratio_original(&Bernoulli, &f, &zero, &d).unwrap(), 0.0);
    let one = ExperimentDraw {
        observations: vec![1.0],
        design: vec![1.0],
        ..d.clone()
    };
    let h = func("constant(0.1)", 1.0);
    let v = loglik_ratio_original(&Bernoulli, &f, &h, &one).unwrap();
    assert!((v - (0.6f64 / 0.5).ln()).abs() < 1e-15);
    assert!((v - 0.18232).abs() < 1e-5);
    let g = f.plus(&h);
    let back = loglik_ratio_original(&Bernoulli, &g, &h.scaled(-1.0), &d).unwrap();
    let fwd = loglik_ratio_original(&Bernoulli, &f, &h, &d).unwrap();
    assert!((fwd + back).abs() < 1e-12);
}

#[test]
fn loglik_singularity() {
    let f = func("constant(0.5)", 1.0);
    let h = func("constant(0.1)", 1.0);
    let bad = ExperimentDraw {
        model: Model::Original,
        family: "bernoulli".into(),
        f: f.to_string(),
        h: None,
        seed: 0,
        design: vec![1.0],
        observations: vec![0.5],
    };
    assert!(matches!(
        loglik_ratio_original(&Bernoulli, &f, &h, &bad),
        Err(Error::Singularity { .. })
    ));
    assert!(bad.check_support(&Bernoulli).is_err());
}

#[test]
fn lase_zero_shift() {
    let f = func("constant(0.5)", 1.0);
    let zero = RegressionFunction::zero(1.0, 1.0).unwrap();
    let d = sample_original(&Bernoulli, &f, 100, 9).unwrap();
    assert_eq!(lase_terms(&Bernoulli, &f, &zero, &d).unwrap(), LaseTerms::default());
}

#[test]
fn lase_identities_and_vn() {
    let n = 10_000;
    let f = func("constant(0.5)", 1.0);
    let h = func(&format!("constant({})", 0.5 / (n as f64).sqrt()), 1.0);
    let ctx = LaseContext::new(&Bernoulli, &f, &h, n).unwrap();
    assert!((ctx.vn() / 0.125 - 1.0).abs() < 0.1);
    assert!((ctx.vn_target() - 0.125).abs() < 1e-12);
    for s in 0..5 {
        let d = sample_original(&Bernoulli, &f, n, s).unwrap();
        let t = ctx.terms(&d.observations).unwrap();
        assert!((t.exact_loglik - (2.0 * t.xn - 4.0 * t.vn + t.rho_prop)).abs() < 1e-10);
        assert!((t.exact_loglik - (t.linear - t.quadratic + t.remainder)).abs() < 1e-10);
    }
}

fn affinity_oracle(name: &str, t: f64, u: f64) -> f64 {
    match name {
        "bernoulli" => (t * u).sqrt() + ((1.0 - t) * (1.0 - u)).sqrt(),
        "poisson" => (-0.5 * (u.sqrt() - t.sqrt()).powi(2)).exp(),
        "gaussian_scale" => (2.0 * t * u / (t * t + u * u)).sqrt(),
        _ => (-(u - t).powi(2) / 8.0).exp(),
    }
}

#[test]
fn per_point_expectations() {
    let fams: Vec<&dyn ParametricFamily> = vec![&Bernoulli, &Poisson, &GaussianScale, &LocationNormal];
    for fam in fams {
        let (lo, hi) = fam.working_interval();
        let t = 0.5 * (lo + hi) * if fam.name() == "location_normal" { 0.1 } else { 0.3 };
        for h in [0.03, -0.01, 0.002] {
            let ctx = LaseContext::from_points(fam, vec![t], vec![h]).unwrap();
            let (m1, m2) = (ctx.root_means()[0], ctx.root_sq_means()[0]);
            // E√z = 1 − H², the Hellinger affinity
            let oracle = affinity_oracle(fam.name(), t, t + h) - 1.0;
            assert!((m1 - oracle).abs() < 1e-12, "{}: {m1} vs {oracle}", fam.name());
            assert!((2.0 * m1 + m2).abs() < 1e-12, "{}", fam.name());
            let ez = expectation(fam, t, |x| fam.log_ratio(x, t, t + h).exp()).unwrap();
            assert!((ez - 1.0).abs() < 1e-10, "{}", fam.name());
        }
    }
}

#[test]
fn lindeberg_examples() {
    let f = func("constant(0.5)", 1.0);
    // |ξ| = 2 at θ = 1/2; the indicator needs 2 ≥ ε n^{(1−α)/2}
    assert_eq!(lindeberg_sum(&Bernoulli, &f, 10_000, 0.6, 0.5).unwrap(), 0.0);
    assert!(lindeberg_sum(&Bernoulli, &f, 16, 0.6, 0.5).unwrap() > 0.0);
    let z = func("constant(0)", 1.0);
    let vals: Vec<f64> = [64, 256, 1024]
        .iter()
        .map(|&n| lindeberg_sum(&LocationNormal, &z, n, 0.5, 1.0).unwrap())
        .collect();
    assert!(vals[0] > 0.0 && vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    // E[s² 1{|s| ≥ c}] for s = n^{α/2} Z has the closed form n^α (2c'φ(c') + 2(1 − Φ(c'))), c' = c / n^{α/2}
    let (n, a, e) = (64.0f64, 0.5, 1.0);
    let c = e * n.sqrt() / n.powf(a / 2.0);
    let phi = (-0.5 * c * c).exp() / (2.0 * PI).sqrt();
    let tail = 0.5 * libm::erfc(c / 2f64.sqrt());
    let oracle = n.powf(a) * (2.0 * c * phi + 2.0 * tail);
    assert!((vals[0] - oracle).abs() < 1e-8 * oracle);
    assert_eq!(lindeberg_sum(&LocationNormal, &z, 64, 0.6, f64::INFINITY).unwrap(), 0.0);
}

#[test]
fn draw_text_round_trip() {
    let f = func("affine(2, 1)", 4.0);
    let d = sample_original(&Poisson, &f, 37, 11).unwrap();
    let back = ExperimentDraw::from_text(&d.to_text()).unwrap();
    assert_eq!(d, back);
    let g = sample_global_gaussian(&Poisson, &f, 20, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.txt");
    g.write(&p).unwrap();
    assert_eq!(ExperimentDraw::read(&p).unwrap(), g);
    let mut text = d.to_text();
    text = text.replace("# n: 37", "# n: 38");
    assert!(ExperimentDraw::from_text(&text).is_err());
    assert!(ExperimentDraw::from_text("# model: original\n1, 0.5\n").is_err());
}

#[test]
fn standard_pair_lies_in_neighborhood() {
    let fams: Vec<&dyn ParametricFamily> = vec![&Bernoulli, &Poisson, &GaussianScale, &LocationNormal];
    for fam in fams {
        let f = standard_f(fam).unwrap();
        for n in [256usize, 1024, 4096] {
            let r = crate::function_space::local_radius(n, 1.0);
            let h = standard_h(&f, r).unwrap();
            assert!(neighborhood_contains(&f, &h, r).unwrap(), "{} n={n}", fam.name());
        }
    }
}
