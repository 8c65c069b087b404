//! Empirical versions of the three coupling conditions that together bound
//! the Hellinger distance between the coupled experiments, and the partial
//! sum discrepancy between coupled scores and Gaussians.

use std::f64::consts::PI;

use super::CoupledLikelihoodDraw;
use crate::error::{Error, Result};

/// Below this effective sample size the reweighted frequencies are flagged.
pub const MIN_EFFECTIVE_SAMPLE: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcSettings {
    pub alpha1: f64,
    /// `ε ∈ (0, 1)` in the moderate-deviation threshold `−ε log r_n`.
    pub epsilon: f64,
    /// `c₁` in the closeness threshold `c₁ r_n^{α₁}`.
    pub c1: f64,
}

impl Default for CcSettings {
    fn default() -> Self {
        CcSettings {
            alpha1: 0.75,
            epsilon: 0.5,
            c1: 1.0,
        }
    }
}

/// An estimated probability with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    pub value: f64,
    pub stderr: f64,
    /// Effective sample size of the importance weights, when reweighted.
    pub ess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcAudit {
    pub replicates: usize,
    pub r_n: f64,
    pub settings: CcSettings,
    /// `c₁ r_n^{α₁}`.
    pub closeness_threshold: f64,
    /// `−ε log r_n`.
    pub deviation_threshold: f64,
    /// `P_f(|log Λ¹ − log Λ²| ≥ c₁ r_n^{α₁})`.
    pub closeness: Frequency,
    /// `P_{f,h}(log Λ¹ > −ε log r_n)`.
    pub original_deviation: Frequency,
    /// `Q_{f,h}(log Λ² > −ε log r_n)`.
    pub gaussian_deviation: Frequency,
    /// `r_n^{2α₁}`.
    pub target_scale: f64,
    pub warnings: Vec<String>,
}

impl CcAudit {
    /// Largest frequency in units of the target scale.
    pub fn worst_ratio(&self) -> f64 {
        [self.closeness.value, self.original_deviation.value, self.gaussian_deviation.value]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v / self.target_scale))
    }
}

fn plain_frequency(hits: impl Iterator<Item = bool>, count: usize) -> Frequency {
    let k = hits.filter(|&b| b).count() as f64;
    let p = k / count as f64;
    Frequency {
        value: p,
        stderr: (p * (1.0 - p) / count as f64).sqrt(),
        ess: None,
    }
}

/// Self-normalized importance estimate of `P_h(A)` from draws under the
/// central measure, with weights `exp(log_weight)`.
fn reweighted_frequency(log_weights: &[f64], hits: &[bool]) -> Frequency {
    let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let sq: f64 = w.iter().map(|x| x * x).sum();
    let p = w.iter().zip(hits).filter(|(_, &h)| h).map(|(x, _)| x).sum::<f64>() / total;
    let var = w
        .iter()
        .zip(hits)
        .map(|(x, &h)| x * x * (if h { 1.0 } else { 0.0 } - p).powi(2))
        .sum::<f64>()
        / (total * total);
    Frequency {
        value: p,
        stderr: var.sqrt(),
        ess: Some(total * total / sq),
    }
}

/// Audit the three coupling conditions on draws generated under `P_f`.
pub fn audit_cc_conditions(draws: &[CoupledLikelihoodDraw], r_n: f64, settings: &CcSettings) -> Result<CcAudit> {
    if draws.len() < 100 {
        return Err(Error::argument(format!(
            "the coupling audit needs at least 100 draws, got {}",
            draws.len()
        )));
    }
    if !(r_n > 0.0 && r_n < 1.0) {
        return Err(Error::argument(format!("local radius must lie in (0, 1), got {r_n}")));
    }
    if !(settings.epsilon > 0.0 && settings.epsilon < 1.0) {
        return Err(Error::argument(format!("epsilon must lie in (0, 1), got {}", settings.epsilon)));
    }
    let closeness_threshold = settings.c1 * r_n.powf(settings.alpha1);
    let deviation_threshold = -settings.epsilon * r_n.ln();
    let closeness = plain_frequency(
        draws
            .iter()
            .map(|d| (d.log_lik_original - d.log_lik_gaussian).abs() >= closeness_threshold),
        draws.len(),
    );
    let orig: Vec<f64> = draws.iter().map(|d| d.log_lik_original).collect();
    let gauss: Vec<f64> = draws.iter().map(|d| d.log_lik_gaussian).collect();
    let over = |v: &[f64]| v.iter().map(|&l| l > deviation_threshold).collect::<Vec<_>>();
    let original_deviation = reweighted_frequency(&orig, &over(&orig));
    let gaussian_deviation = reweighted_frequency(&gauss, &over(&gauss));

    let mut warnings = Vec::new();
    for (label, f) in [("original", &original_deviation), ("gaussian", &gaussian_deviation)] {
        let ess = f.ess.unwrap_or(f64::INFINITY);
        if ess < MIN_EFFECTIVE_SAMPLE {
            warnings.push(format!(
                "{label} deviation frequency is unreliable: effective sample size {ess:.1} < {MIN_EFFECTIVE_SAMPLE}"
            ));
        }
    }
    Ok(CcAudit {
        replicates: draws.len(),
        r_n,
        settings: *settings,
        closeness_threshold,
        deviation_threshold,
        closeness,
        original_deviation,
        gaussian_deviation,
        target_scale: r_n.powf(2.0 * settings.alpha1),
        warnings,
    })
}

/// Test functions `ψ` on `[0, 1]` for the discrepancy statistic.
fn dictionary() -> Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
    let mut out: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> = vec![Box::new(|_| 1.0), Box::new(|t| t)];
    for k in 1..=4 {
        let w = 2.0 * PI * k as f64;
        out.push(Box::new(move |t| (w * t).sin()));
        out.push(Box::new(move |t| (w * t).cos()));
    }
    for s in [0.25, 0.5, 0.75] {
        out.push(Box::new(move |t| if t <= s { 1.0 } else { 0.0 }));
    }
    out
}

/// `max_ψ |n^{−1/2} Σ ψ(t_i)(ξ̃_i − ζ_i)|` over a fixed dictionary of
/// constants, trigonometric functions and step functions, i.e. the score
/// discrepancy `Σ h(t_i)(ξ̃_i − ζ_i)` for shifts `h = ψ/√n`.
pub fn discrepancy(draw: &CoupledLikelihoodDraw) -> f64 {
    let n = draw.scores_tilde.len();
    if n == 0 {
        return 0.0;
    }
    let scale = 1.0 / (n as f64).sqrt();
    dictionary()
        .iter()
        .map(|psi| {
            let s: f64 = draw
                .scores_tilde
                .iter()
                .zip(&draw.gaussians)
                .enumerate()
                .map(|(i, (a, b))| psi((i + 1) as f64 / n as f64) * (a - b))
                .sum();
            (scale * s).abs()
        })
        .fold(0.0, f64::max)
}

/// Theoretical discrepancy order `r_n^{1/(2β)} (log n)²` with `r_n = n^{−1/2}`.
pub fn discrepancy_reference(n: usize, beta: f64) -> f64 {
    let n = n as f64;
    n.powf(-0.25 / beta) * n.ln().powi(2)
}
