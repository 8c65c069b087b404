//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed; exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lecam_equiv::coupling::{CouplingContext, CouplingSettings};
use lecam_equiv::distances::{
    apx1_check, brute_force_hellinger_sq, hellinger_gaussian, hellinger_sq_1d, hellinger_sq_pmf,
    hellinger_sq_product, tv_pmf, Density,
};
use lecam_equiv::experiments::{loglik_ratio_points, sample_original, standard_f, standard_h, LaseContext};
use lecam_equiv::families::{
    fisher_numeric, gamma_transform, Bernoulli, GaussianScale, LocationNormal, ParametricFamily, Poisson,
};
use lecam_equiv::function_space::local_radius;
use lecam_equiv::harness::{compute_study, run_study, StudyConfig};
use lecam_equiv::stats::{ks_critical_two_sample, ks_two_sample};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

struct Closed {
    family: &'static dyn ParametricFamily,
    fisher: fn(f64) -> f64,
    gamma: fn(f64) -> f64,
}

fn builtins() -> [Closed; 4] {
    [
        Closed {
            family: &Bernoulli,
            fisher: |t| 1.0 / (t * (1.0 - t)),
            gamma: |t| 2.0 * t.sqrt().asin(),
        },
        Closed {
            family: &Poisson,
            fisher: |t| 1.0 / t,
            gamma: |t| 2.0 * t.sqrt(),
        },
        Closed {
            family: &GaussianScale,
            fisher: |t| 2.0 / (t * t),
            gamma: |t| std::f64::consts::SQRT_2 * t.ln(),
        },
        Closed {
            family: &LocationNormal,
            fisher: |_| 1.0,
            gamma: |t| t,
        },
    ]
}

fn grid(family: &dyn ParametricFamily, points: usize) -> Vec<f64> {
    let (lo, hi) = family.working_interval();
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn closed_form_transforms() -> Outcome {
    let (mut gamma_err, mut fisher_err) = (0.0_f64, 0.0_f64);
    for c in builtins() {
        for t in grid(c.family, 50) {
            let g = gamma_transform(c.family, t).map_err(|e| e.to_string())?;
            gamma_err = gamma_err.max((g - (c.gamma)(t)).abs());
            let i = fisher_numeric(c.family, t).map_err(|e| e.to_string())?;
            fisher_err = fisher_err.max((i - (c.fisher)(t)).abs());
        }
    }
    check(
        gamma_err <= 1e-10 && fisher_err <= 1e-6,
        format!("max |Γ error| {gamma_err:.2e}, max |I quadrature error| {fisher_err:.2e}"),
    )
}

fn gamma_derivative() -> Outcome {
    let mut worst = 0.0_f64;
    for c in builtins() {
        for t in grid(c.family, 50) {
            let step = 1e-5 * t.abs().max(1.0);
            let d = (c.family.gamma(t + step) - c.family.gamma(t - step)) / (2.0 * step);
            let root = c.family.fisher(t).sqrt();
            worst = worst.max((d - root).abs() / root);
        }
    }
    check(worst <= 1e-5, format!("max relative error {worst:.2e}"))
}

fn hellinger_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut product_err = 0.0_f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=10);
        let ps: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..0.98)).collect();
        let qs: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..0.98)).collect();
        let pmf = |p: &f64| vec![1.0 - p, *p];
        let comps: Vec<f64> = ps
            .iter()
            .zip(&qs)
            .map(|(p, q)| hellinger_sq_pmf(&pmf(p), &pmf(q)))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let formula = hellinger_sq_product(&comps).map_err(|e| e.to_string())?.value;
        let brute = brute_force_hellinger_sq(&ps.iter().map(pmf).collect::<Vec<_>>(), &qs.iter().map(pmf).collect::<Vec<_>>())
            .map_err(|e| e.to_string())?;
        product_err = product_err.max((formula - brute).abs());
    }
    let mut gauss_err = 0.0_f64;
    for _ in 0..50 {
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let quad = hellinger_sq_1d(Density::new(&LocationNormal, a), Density::new(&LocationNormal, b))
            .map_err(|e| e.to_string())?;
        gauss_err = gauss_err.max((quad - hellinger_gaussian(a, b)).abs());
    }
    let mut violations = 0;
    for _ in 0..500 {
        let k = rng.random_range(2..=12);
        let draw = |rng: &mut ChaCha8Rng| {
            let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let (p, q) = (draw(&mut rng), draw(&mut rng));
        let h = hellinger_sq_pmf(&p, &q).map_err(|e| e.to_string())?.sqrt();
        if tv_pmf(&p, &q).map_err(|e| e.to_string())? > std::f64::consts::SQRT_2 * h + 1e-15 {
            violations += 1;
        }
    }
    check(
        product_err <= 1e-12 && gauss_err <= 1e-8 && violations == 0,
        format!("product vs brute force {product_err:.2e}, Gaussian vs quadrature {gauss_err:.2e}, TV sandwich violations {violations}/500"),
    )
}

fn apx1_audit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    for _ in 0..1000 {
        let k = rng.random_range(2..=8);
        let scale = rng.random_range(0.1..3.0);
        let mut values: Vec<f64> = (0..k).map(|_| rng.random_range(-scale..scale)).collect();
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        let mean: f64 = values.iter().zip(&w).map(|(v, p)| v * p).sum::<f64>() / total;
        values.iter_mut().for_each(|v| *v -= mean);
        let law: Vec<(f64, f64)> = values.into_iter().zip(w.iter().map(|p| p / total)).collect();
        for j in 0..21 {
            let lambda = -1.0 + 0.1 * j as f64;
            if !apx1_check(&law, lambda).map_err(|e| e.to_string())?.holds {
                violations += 1;
            }
        }
    }
    check(violations == 0, format!("{violations} violations in 21000 checks"))
}

fn lase_identities() -> Outcome {
    let mut identity_err = 0.0_f64;
    let mut vn_rel = Vec::new();
    for family in [&Bernoulli as &dyn ParametricFamily, &Poisson] {
        let n = 1 << 12;
        let f = standard_f(family).map_err(|e| e.to_string())?;
        let h = standard_h(&f, local_radius(n, 1.0)).map_err(|e| e.to_string())?;
        let ctx = LaseContext::new(family, &f, &h, n).map_err(|e| e.to_string())?;
        for seed in 0..20 {
            let draw = sample_original(family, &f, n, seed).map_err(|e| e.to_string())?;
            let t = ctx.terms(&draw.observations).map_err(|e| e.to_string())?;
            let exact = loglik_ratio_points(family, &draw.observations, ctx.thetas(), ctx.shifts())
                .map_err(|e| e.to_string())?;
            identity_err = identity_err
                .max((exact - (2.0 * t.xn - 4.0 * t.vn + t.rho_prop)).abs())
                .max((exact - (t.linear - t.quadratic + t.remainder)).abs());
        }
        vn_rel.push((ctx.vn() - ctx.vn_target()).abs() / ctx.vn_target());
    }
    let vn_ok = vn_rel.iter().all(|&r| r <= 0.1);
    check(
        identity_err <= 1e-10 && vn_ok,
        format!("identity error {identity_err:.2e}, |V_n/target - 1| = {vn_rel:.4?}"),
    )
}

fn local_equivalence_trend() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (family, verdicts) in [
        ("bernoulli", "decreasing = true\nmin_drop = 0.3"),
        ("poisson", "decreasing = true\nmin_drop = 0.3"),
        ("location_normal", "zero = true"),
    ] {
        let text = format!(
            "[study]\nkind = local-hellinger\nn = 2^8, 2^10, 2^12\nreplicates = 400\nbatches = 20\nseed = 2024\n\
             [family]\nname = {family}\n[verdicts]\n{verdicts}\n"
        );
        let config = StudyConfig::from_text(&text, family).map_err(|e| e.to_string())?;
        let r = compute_study(&config).map_err(|e| e.to_string())?;
        ok &= r.passed();
        let meds: Vec<String> = r.medians.iter().map(|m| format!("{:.2e}", m.value)).collect();
        details.push(format!("{family} medians [{}]", meds.join(", ")));
    }
    check(ok, details.join("; "))
}

fn truncation_correctness() -> Outcome {
    let mut moment_err = 0.0_f64;
    let mut bound_ok = true;
    let mut draws = 0;
    for family in [&Bernoulli as &dyn ParametricFamily, &Poisson, &GaussianScale] {
        let n = 256;
        let f = standard_f(family).map_err(|e| e.to_string())?;
        let h = standard_h(&f, local_radius(n, 1.0)).map_err(|e| e.to_string())?;
        let ctx = CouplingContext::new(family, &f, &h, n, &CouplingSettings::default()).map_err(|e| e.to_string())?;
        let plan = ctx.plan();
        for i in 0..plan.len() {
            moment_err = moment_err.max((plan.second_moment(i) - plan.fisher[i]).abs() / plan.fisher[i].max(1.0));
        }
        let scale = plan.r_n.powf(1.0 - plan.alpha);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (_, out) = ctx.truncate_scores(&mut rng);
            bound_ok &= out.scores.iter().all(|s| (scale * s).abs() <= out.bound * (1.0 + 1e-12));
            draws += 1;
        }
    }
    let n = 1024;
    let f = standard_f(&Poisson).map_err(|e| e.to_string())?;
    let h = standard_h(&f, local_radius(n, 1.0)).map_err(|e| e.to_string())?;
    let settings = CouplingSettings {
        scheme: Some(lecam_equiv::coupling::CouplingScheme::PerCoordinate),
        ..Default::default()
    };
    let ctx = CouplingContext::new(&Poisson, &f, &h, n, &settings).map_err(|e| e.to_string())?;
    let crit = ks_critical_two_sample(n, n, 0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let passes = (0..100)
        .filter(|_| {
            let (tilde, _) = ctx.quantile_couple_scores(&mut rng);
            let (_, direct) = ctx.truncate_scores(&mut rng);
            ks_two_sample(&tilde, &direct.scores) <= crit
        })
        .count();
    check(
        bound_ok && moment_err <= 1e-10 && passes >= 95,
        format!(
            "bound held on {}/{draws} draws, max |E(ξ*)² - I| {moment_err:.2e}, KS passes {passes}/100",
            if bound_ok { draws } else { 0 }
        ),
    )
}

fn homoscedastic_check() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for family in ["bernoulli", "poisson", "gaussian_scale", "location_normal"] {
        let text = format!(
            "[study]\nkind = homoscedastic-check\nn = 2^8, 2^9, 2^10, 2^11, 2^12, 2^13, 2^14\n\
             [family]\nname = {family}\n[verdicts]\ndecreasing = true\nmax_final = 0.01\n"
        );
        let config = StudyConfig::from_text(&text, family).map_err(|e| e.to_string())?;
        let r = compute_study(&config).map_err(|e| e.to_string())?;
        ok &= r.passed();
        details.push(format!("{family} {:.2e}", r.medians.last().map_or(f64::NAN, |m| m.value)));
    }
    check(ok, format!("H² at n=2^14: {}", details.join(", ")))
}

fn globalization_audit() -> Outcome {
    let ks = "[study]\nkind = globalize\nn = 2^14\nreplicates = 50\nseed = 9\n[family]\nname = bernoulli\n\
              [functions]\nf = constant(0.5)\nlipschitz = 1\n[verdicts]\nmin_pass_fraction = 0.9\n";
    let r = compute_study(&StudyConfig::from_text(ks, "globalize").map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let fraction = r.medians[0].value;
    let risk = "[study]\nkind = risk-transfer\nn = 2^10, 2^12, 2^14\nreplicates = 50\nbatches = 5\nseed = 10\n\
                [family]\nname = bernoulli\n[verdicts]\ndecreasing = true\n";
    let t = compute_study(&StudyConfig::from_text(risk, "risk").map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let gaps: Vec<String> = t.medians.iter().map(|m| format!("{:.2e}", m.value)).collect();
    check(
        r.passed() && t.passed(),
        format!("KS pass fraction {fraction:.2}; median |risk difference| [{}]", gaps.join(", ")),
    )
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for text in [
        "[study]\nkind = local-hellinger\nn = 2^7, 2^9\nreplicates = 50\nbatches = 3\nseed = 5\n[family]\nname = poisson\n",
        "[study]\nkind = cc-audit\nn = 2^8\nreplicates = 100\nbatches = 2\nseed = 6\n[family]\nname = bernoulli\n",
        "[study]\nkind = globalize\nn = 2^10\nreplicates = 10\nseed = 7\n[family]\nname = poisson\n",
    ] {
        let config = StudyConfig::from_text(text, "repro").map_err(|e| e.to_string())?;
        let a = run_study(&config, &dir.path().join("a")).map_err(|e| e.to_string())?;
        let b = run_study(&config, &dir.path().join("b")).map_err(|e| e.to_string())?;
        for (x, y) in [(&a.rows_path, &b.rows_path), (&a.summary_path, &b.summary_path)] {
            let (x, y) = (std::fs::read(x).map_err(|e| e.to_string())?, std::fs::read(y).map_err(|e| e.to_string())?);
            if x != y {
                return Err(format!("{} differs between runs", a.rows_path.display()));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} CSV files byte-identical across reruns"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("closed-form transforms", closed_form_transforms, Duration::from_secs(5)),
        ("gamma derivative equals root Fisher information", gamma_derivative, Duration::from_secs(5)),
        ("Hellinger algebra", hellinger_algebra, Duration::from_secs(30)),
        ("exponential moment bound audit", apx1_audit, Duration::from_secs(10)),
        ("likelihood expansion identities", lase_identities, Duration::from_secs(60)),
        ("local equivalence trend", local_equivalence_trend, Duration::from_secs(600)),
        ("truncation correctness", truncation_correctness, Duration::from_secs(120)),
        ("homoscedastic transform check", homoscedastic_check, Duration::from_secs(10)),
        ("globalization audit", globalization_audit, Duration::from_secs(900)),
        ("reproducibility", reproducibility, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = elapsed > budget;
        let (status, detail) = match &outcome {
            Ok(d) if !over => ("PASS", d.clone()),
            Ok(d) => ("FAIL", format!("{d}; exceeded {budget:?}")),
            Err(d) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {:>2} {status} {name} ({:.1}s): {detail}", k + 1, elapsed.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
