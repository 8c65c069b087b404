use super::*;

fn config(text: &str) -> StudyConfig {
    StudyConfig::from_text(text, "test").unwrap()
}

const BERNOULLI_SMALL: &str = "
[study]
kind = local-hellinger
n = 2^6, 2^8
replicates = 40
batches = 3
seed = 11
[family]
name = bernoulli
";

#[test]
fn parses_sections_and_powers() {
    let c = config(&format!("{BERNOULLI_SMALL}\n[coupling]\nscheme = per-coordinate\n[verdicts]\nmin_drop = 0.3 # comment\n"));
    assert_eq!(c.n_grid, vec![64, 256]);
    assert_eq!(c.kind, StudyKind::LocalHellinger);
    assert_eq!(c.coupling.scheme, Some(crate::coupling::CouplingScheme::PerCoordinate));
    assert_eq!(c.verdicts.min_drop, Some(0.3));
}

#[test]
fn rejects_bad_configs() {
    let bad = [
        "[study]\nn = 256, 64\n[family]\nname = bernoulli\n",
        "[study]\nn = 256\nreplicates = 5\n[family]\nname = bernoulli\n",
        "[study]\nn = 256\n[family]\nname = bernoulli\ncolour = red\n",
        "[study]\nn = 256\nn = 512\n[family]\nname = bernoulli\n",
        "[study]\nkind = sideways\nn = 256\n[family]\nname = bernoulli\n",
        "[study]\nn = 256\n",
        "[study]\nn = 256\n[family]\nname = bernoulli\nbroken line\n",
    ];
    for text in bad {
        assert!(StudyConfig::from_text(text, "bad").is_err(), "{text}");
    }
    let c = config("[study]\nn = 256\n[family]\nname = cauchy\n");
    let err = compute_study(&c).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn local_hellinger_rows_and_summary() {
    let r = compute_study(&config(BERNOULLI_SMALL)).unwrap();
    assert_eq!(r.rows.rows.len(), 6);
    assert_eq!(r.medians.len(), 2);
    assert!(r.passed());
    let summary = r.summary();
    assert_eq!(summary.rows.len(), 2);
    assert!(summary.rows[0].starts_with("median,64,hellinger2,"));
}

#[test]
fn normal_location_is_exactly_zero() {
    let text = BERNOULLI_SMALL.replace("bernoulli", "location_normal") + "[verdicts]\nzero = true\ndecreasing = true\n";
    let r = compute_study(&config(&text)).unwrap();
    assert!(r.passed(), "{:?}", r.verdicts);
    assert!(r.medians.iter().all(|m| m.value < 1e-12), "{:?}", r.medians);
}

#[test]
fn failing_verdict_gives_exit_one() {
    let text = BERNOULLI_SMALL.to_string() + "[verdicts]\nmax_final = 1e-9\n";
    let r = compute_study(&config(&text)).unwrap();
    assert_eq!(r.exit_code(), 1);
}

#[test]
fn pipeline_failure_reports_coordinates() {
    // the shift leaves the local neighborhood
    let text = BERNOULLI_SMALL.to_string() + "[functions]\nh = constant(0.3)\n";
    let err = compute_study(&config(&text)).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("n=64"), "{err}");
}

#[test]
fn condition_audit_on_bernoulli_passes() {
    let r = compute_study(&config("[study]\nkind = condition-audit\n[family]\nname = bernoulli\n")).unwrap();
    assert_eq!(r.rows.rows.len(), 1);
    assert!(r.passed(), "{:?}", r.verdicts);
}

#[test]
fn homoscedastic_study_meets_bound() {
    let text = "[study]\nkind = homoscedastic-check\nn = 2^8, 2^10, 2^12, 2^14\n[family]\nname = poisson\n\
                [verdicts]\ndecreasing = true\nmax_final = 0.01\n";
    let r = compute_study(&config(text)).unwrap();
    assert!(r.passed(), "{:?}", r.verdicts);
}

#[test]
fn written_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(BERNOULLI_SMALL);
    let a = run_study(&c, &dir.path().join("a")).unwrap();
    let b = run_study(&c, &dir.path().join("b")).unwrap();
    for (x, y) in [(&a.rows_path, &b.rows_path), (&a.summary_path, &b.summary_path)] {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let text = std::fs::read_to_string(&a.rows_path).unwrap();
    assert!(text.starts_with("# lecam-equiv "));
    assert_eq!(text.lines().count(), 2 + 6);
}
