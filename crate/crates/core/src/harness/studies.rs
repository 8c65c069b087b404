use rayon::prelude::*;

use crate::coupling::{audit_cc_conditions, discrepancy, CoupledLikelihoodDraw, CouplingContext};
use crate::distances::{csv_field, mc_hellinger_coupled, REPORT_CSV_HEADER};
use crate::error::Error;
use crate::experiments::{sample_original, standard_h};
use crate::families::{check_regularity, ParametricFamily, ThetaGrid};
use crate::function_space::{design_points, local_radius, rate_gamma_bar, RegressionFunction, Shape};
use crate::globalization::{gaussianize, homoscedastic_transform_check, risk_transfer_demo};
use crate::seed::{derive_seed, stream, substream_seed};
use crate::stats::{ks_critical_one_sample, ks_one_sample, median, normal_cdf};

use super::verdict::{medians_by_n, trend_verdicts, zero_verdict, Verdict};
use super::{HarnessError, StudyConfig, StudyKind, StudyResult, Table};

/// Points on which sup-norm errors and losses are evaluated.
const LOSS_GRID_POINTS: usize = 256;
/// Level of the per-replicate KS test in the globalize study.
const KS_LEVEL: f64 = 0.01;

fn pipeline(n: usize, replicate: Option<usize>, seed: u64) -> impl FnOnce(Error) -> HarnessError {
    move |source| HarnessError::Pipeline {
        n: Some(n),
        replicate,
        seed,
        source,
    }
}

pub(super) fn run(config: &StudyConfig) -> Result<StudyResult, HarnessError> {
    let family = config.resolve_family()?;
    let family = family.as_ref();
    let (rows, medians, verdicts) = match config.kind {
        StudyKind::LocalHellinger => local_hellinger(config, family)?,
        StudyKind::CcAudit => cc_audit(config, family)?,
        StudyKind::Globalize => globalize(config, family)?,
        StudyKind::RiskTransfer => risk_transfer(config, family)?,
        StudyKind::ConditionAudit => condition_audit(config, family)?,
        StudyKind::HomoscedasticCheck => homoscedastic(config, family)?,
    };
    Ok(StudyResult {
        kind: config.kind,
        seed: config.seed,
        rows,
        medians,
        verdicts,
    })
}

type Parts = (Table, Vec<super::Median>, Vec<Verdict>);

/// Global replicate indices of batch `b`.
fn batch_replicates(config: &StudyConfig, b: usize) -> std::ops::Range<usize> {
    b * config.replicates..(b + 1) * config.replicates
}

fn local_shift(config: &StudyConfig, f: &RegressionFunction, n: usize) -> Result<RegressionFunction, HarnessError> {
    match config.resolve_h()? {
        Some(h) => Ok(h),
        None => Ok(standard_h(f, local_radius(n, config.coupling.radius_const))?),
    }
}

/// Coupled draws for one batch, reporting the first failing replicate.
fn coupled_batch(
    ctx: &CouplingContext<'_>,
    config: &StudyConfig,
    n: usize,
    b: usize,
) -> Result<Vec<CoupledLikelihoodDraw>, HarnessError> {
    let reps = batch_replicates(config, b);
    let seeds: Vec<u64> = reps.clone().map(|r| derive_seed(config.seed, n as u64, r as u64)).collect();
    ctx.draws(&seeds)
        .into_iter()
        .zip(reps.zip(&seeds))
        .map(|(d, (r, &seed))| d.map_err(pipeline(n, Some(r), seed)))
        .collect()
}

fn local_hellinger(config: &StudyConfig, family: &dyn ParametricFamily) -> Result<Parts, HarnessError> {
    let f = config.resolve_f_for(family)?;
    let mut table = Table::new(format!("batch,{REPORT_CSV_HEADER}"));
    let mut values = Vec::new();
    let mut estimates = Vec::new();
    for &n in &config.n_grid {
        let h = local_shift(config, &f, n)?;
        let ctx = CouplingContext::new(family, &f, &h, n, &config.coupling).map_err(pipeline(n, None, config.seed))?;
        for b in 0..config.batches {
            let draws = coupled_batch(&ctx, config, n, b)?;
            let seed = draws[0].seed;
            let report = mc_hellinger_coupled(&draws)
                .map_err(pipeline(n, None, seed))?
                .with_inputs(n, family.name(), &f.to_string(), &h.to_string(), Some(seed));
            table.rows.push(format!("{b},{}", report.csv_row()));
            values.push((n, report.value));
            estimates.push((n, report.value, report.mc_stderr.unwrap_or(0.0)));
        }
    }
    let medians = medians_by_n("hellinger2", &values);
    let mut verdicts = trend_verdicts(&config.verdicts, &medians);
    if config.verdicts.zero {
        verdicts.push(zero_verdict(&estimates));
    }
    Ok((table, medians, verdicts))
}

const CC_HEADER: &str = "batch,n,replicates,r_n,closeness,closeness_se,original_deviation,original_deviation_se,\
original_deviation_ess,gaussian_deviation,gaussian_deviation_se,gaussian_deviation_ess,target_scale,worst_ratio,\
hellinger2,hellinger2_se,chain_ratio,discrepancy_median,discrepancy_reference,warnings,seed";

fn cc_audit(config: &StudyConfig, family: &dyn ParametricFamily) -> Result<Parts, HarnessError> {
    let f = config.resolve_f_for(family)?;
    let mut table = Table::new(CC_HEADER);
    let (mut hell, mut chain, mut close, mut disc) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for &n in &config.n_grid {
        let h = local_shift(config, &f, n)?;
        let ctx = CouplingContext::new(family, &f, &h, n, &config.coupling).map_err(pipeline(n, None, config.seed))?;
        let r_n = ctx.radius();
        for b in 0..config.batches {
            let draws = coupled_batch(&ctx, config, n, b)?;
            let seed = draws[0].seed;
            let audit = audit_cc_conditions(&draws, r_n, &config.audit).map_err(pipeline(n, None, seed))?;
            let report = mc_hellinger_coupled(&draws).map_err(pipeline(n, None, seed))?;
            let a1 = config.audit.alpha1;
            let chain_ratio = report.value / (r_n.powf(2.0 * a1) + r_n.powf(a1));
            let d: Vec<f64> = draws.iter().map(discrepancy).collect();
            let d_med = median(&d);
            table.rows.push(format!(
                "{b},{n},{},{r_n},{},{},{},{},{},{},{},{},{},{},{},{},{chain_ratio},{d_med},{},{},{seed}",
                audit.replicates,
                audit.closeness.value,
                audit.closeness.stderr,
                audit.original_deviation.value,
                audit.original_deviation.stderr,
                opt(audit.original_deviation.ess),
                audit.gaussian_deviation.value,
                audit.gaussian_deviation.stderr,
                opt(audit.gaussian_deviation.ess),
                audit.target_scale,
                audit.worst_ratio(),
                report.value,
                report.mc_stderr.unwrap_or(0.0),
                crate::coupling::discrepancy_reference(n, f.beta),
                csv_field(&audit.warnings.join("; ")),
            ));
            hell.push((n, report.value));
            chain.push((n, chain_ratio));
            close.push((n, audit.closeness.value));
            disc.push((n, d_med));
        }
    }
    let hell_med = medians_by_n("hellinger2", &hell);
    let verdicts = trend_verdicts(&config.verdicts, &hell_med);
    let mut medians = hell_med;
    medians.extend(medians_by_n("closeness", &close));
    medians.extend(medians_by_n("chain_ratio", &chain));
    medians.extend(medians_by_n("discrepancy", &disc));
    Ok((table, medians, verdicts))
}

const GLOBALIZE_HEADER: &str = "n,replicate,seed,ks,ks_critical,pass,sup_error,clipped,degenerate";

fn globalize(config: &StudyConfig, family: &dyn ParametricFamily) -> Result<Parts, HarnessError> {
    let f = config.resolve_f_for(family)?;
    let lipschitz = f.lipschitz;
    let grid = design_points(LOSS_GRID_POINTS);
    let mut table = Table::new(GLOBALIZE_HEADER);
    let (mut passes, mut errors) = (Vec::new(), Vec::new());
    let total = config.replicates * config.batches;
    for &n in &config.n_grid {
        let centers: Vec<f64> = f.on_design(n).iter().map(|&t| family.gamma(t)).collect();
        let crit = ks_critical_one_sample(n, KS_LEVEL);
        let rows: Vec<Result<(String, bool, f64), HarnessError>> = (0..total)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(config.seed, n as u64, r as u64);
                let fail = || pipeline(n, Some(r), seed);
                let draw = sample_original(family, &f, n, seed).map_err(fail())?;
                let mut rng = stream(substream_seed(seed, 1));
                let g = gaussianize(family, &draw, f.beta, lipschitz, &mut rng).map_err(fail())?;
                let residuals: Vec<f64> = g.observations.iter().zip(&centers).map(|(y, c)| y - c).collect();
                let ks = ks_one_sample(&residuals, normal_cdf);
                let err = g.f_hat_odd.sup_error(&f, &grid);
                let pass = ks <= crit;
                let row = format!("{n},{r},{seed},{ks},{crit},{pass},{err},{},{}", g.clipped, g.degenerate);
                Ok((row, pass, err))
            })
            .collect();
        let mut hits = 0;
        for row in rows {
            let (line, pass, err) = row?;
            table.rows.push(line);
            hits += usize::from(pass);
            errors.push((n, err));
        }
        passes.push((n, hits as f64 / total as f64));
    }
    let need = config.verdicts.min_pass_fraction;
    let short: Vec<String> = passes
        .iter()
        .filter(|p| p.1 < need)
        .map(|p| format!("n={}: {:.3}", p.0, p.1))
        .collect();
    let detail = if short.is_empty() {
        format!("KS at level {KS_LEVEL} passes in at least {need} of replicates for every n")
    } else {
        format!("pass fraction below {need}: {}", short.join("; "))
    };
    let mut verdicts = vec![Verdict::new("ks_pass_fraction", short.is_empty(), detail)];
    let err_med = medians_by_n("sup_error", &errors);
    verdicts.extend(trend_verdicts(&config.verdicts, &err_med));
    let mut medians = medians_by_n("ks_pass_fraction", &passes);
    medians.extend(err_med);
    Ok((table, medians, verdicts))
}

const RISK_HEADER: &str =
    "batch,n,replicates,direct,direct_se,transferred,transferred_se,difference,difference_se,seed";

fn risk_transfer(config: &StudyConfig, family: &dyn ParametricFamily) -> Result<Parts, HarnessError> {
    let f = config.resolve_f_for(family)?;
    let grid = design_points(LOSS_GRID_POINTS);
    let mut table = Table::new(RISK_HEADER);
    let mut gaps = Vec::new();
    for &n in &config.n_grid {
        for b in 0..config.batches {
            let seed = substream_seed(config.seed, b as u64);
            let r = risk_transfer_demo(family, &f, n, &grid, seed, config.replicates).map_err(pipeline(n, None, seed))?;
            table.rows.push(format!(
                "{b},{n},{},{},{},{},{},{},{},{seed}",
                r.replicates,
                r.direct.mean,
                r.direct.stderr,
                r.transferred.mean,
                r.transferred.stderr,
                r.difference.mean,
                r.difference.stderr,
            ));
            gaps.push((n, r.difference.mean.abs()));
        }
    }
    let medians = medians_by_n("abs_difference", &gaps);
    let verdicts = trend_verdicts(&config.verdicts, &medians);
    Ok((table, medians, verdicts))
}

const REGULARITY_HEADER: &str = "family,grid,epsilon,delta_r1,delta_r2,r1_sup,r2_sup,fisher_min,fisher_max,\
pairs,insufficient_pairs,r1_pass,r2_pass,r3_pass,truncation";

fn condition_audit(config: &StudyConfig, family: &dyn ParametricFamily) -> Result<Parts, HarnessError> {
    let (wl, wu) = family.working_interval();
    let g = &config.regularity;
    let (lower, upper) = (g.lower.unwrap_or(wl), g.upper.unwrap_or(wu));
    let epsilon = g.epsilon.unwrap_or((upper - lower) / 10.0);
    let grid = ThetaGrid::new(lower, upper, g.points);
    let report = check_regularity(family, &grid, epsilon, config.beta).map_err(|source| HarnessError::Pipeline {
        n: None,
        replicate: None,
        seed: config.seed,
        source,
    })?;
    let mut table = Table::new(REGULARITY_HEADER);
    table.rows.push(format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        csv_field(family.name()),
        csv_field(&report.grid_spec),
        report.epsilon,
        report.delta_r1,
        report.delta_r2,
        report.r1_sup_estimate,
        report.r2_sup_estimate,
        report.r3_bounds.0,
        report.r3_bounds.1,
        report.pairs,
        report.insufficient_pairs,
        report.r1_pass,
        report.r2_pass,
        report.r3_pass,
        csv_field(&report.truncation),
    ));
    let failed: Vec<&str> = [("R1", report.r1_pass), ("R2", report.r2_pass), ("R3", report.r3_pass)]
        .into_iter()
        .filter(|c| !c.1)
        .map(|c| c.0)
        .collect();
    let detail = if failed.is_empty() {
        format!("all regularity conditions hold on {}", report.grid_spec)
    } else {
        format!("failed: {}", failed.join(" "))
    };
    let verdicts = vec![Verdict::new("regularity", report.all_pass(), detail)];
    Ok((table, Vec::new(), verdicts))
}

fn homoscedastic(config: &StudyConfig, family: &dyn ParametricFamily) -> Result<Parts, HarnessError> {
    let f = config.resolve_f_for(family)?;
    let explicit = config.resolve_h()?;
    let mut table = Table::new(REPORT_CSV_HEADER);
    let mut values = Vec::new();
    for &n in &config.n_grid {
        let h = match &explicit {
            Some(h) => h.clone(),
            None => RegressionFunction::new(
                vec![Shape::Sinusoid {
                    amplitude: rate_gamma_bar(n, f.beta, config.c_beta)?,
                    frequency: 1.0,
                    phase: 0.0,
                }],
                f.beta,
                f.lipschitz,
            )?,
        };
        let report = homoscedastic_transform_check(family, &f, &h, n).map_err(pipeline(n, None, config.seed))?;
        table.rows.push(report.csv_row());
        values.push((n, report.value));
    }
    let medians = medians_by_n("hellinger2", &values);
    let verdicts = trend_verdicts(&config.verdicts, &medians);
    Ok((table, medians, verdicts))
}
