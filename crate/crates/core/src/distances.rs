//! Hellinger distance, total variation and deficiency bounds.
//!
//! Squared Hellinger distances `H² = ½ ∫ (√p − √q)²` are carried as `H²`
//! everywhere; square roots are only taken when a bound needs `H`.

use std::fmt;

use crate::coupling::CoupledLikelihoodDraw;
use crate::error::{Error, Result};
use crate::families::ParametricFamily;
use crate::quadrature::{self, QuadSettings};
use crate::stats::{jackknife_stderr_of_mean, mean};

/// Largest product space enumerated by the brute-force oracles.
pub const BRUTE_FORCE_CAPACITY: u128 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    HellingerSq,
    TotalVariation,
    DeficiencyUpper,
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::HellingerSq => "hellinger2",
            DistanceKind::TotalVariation => "tv",
            DistanceKind::DeficiencyUpper => "deficiency_upper",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Quadrature,
    BruteForce,
    MonteCarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed-form",
            Method::Quadrature => "quadrature",
            Method::BruteForce => "brute-force",
            Method::MonteCarlo => "monte-carlo",
        })
    }
}

pub const REPORT_CSV_HEADER: &str = "kind,method,n,value,stderr,replicates,family,f_desc,h_desc,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub kind: DistanceKind,
    pub method: Method,
    pub value: f64,
    /// Present exactly for Monte Carlo estimates.
    pub mc_stderr: Option<f64>,
    pub replicates: usize,
    pub n: usize,
    pub family: String,
    pub f_desc: String,
    pub h_desc: String,
    pub seed: Option<u64>,
}

impl DistanceReport {
    /// Report with empty input descriptors; `value` is clipped to `[0, 1]`.
    pub fn new(kind: DistanceKind, method: Method, value: f64, mc_stderr: Option<f64>, replicates: usize) -> Result<Self> {
        if value.is_nan() {
            return Err(Error::numeric("distance report", "value is NaN"));
        }
        if mc_stderr.is_some() != (method == Method::MonteCarlo) {
            return Err(Error::argument("a standard error is reported exactly for Monte Carlo estimates"));
        }
        Ok(DistanceReport {
            kind,
            method,
            // adding 0.0 turns a clamped -0.0 into +0.0
            value: value.clamp(0.0, 1.0) + 0.0,
            mc_stderr,
            replicates,
            n: 0,
            family: String::new(),
            f_desc: String::new(),
            h_desc: String::new(),
            seed: None,
        })
    }

    pub fn with_inputs(mut self, n: usize, family: &str, f_desc: &str, h_desc: &str, seed: Option<u64>) -> Self {
        self.n = n;
        self.family = family.to_string();
        self.f_desc = f_desc.to_string();
        self.h_desc = h_desc.to_string();
        self.seed = seed;
        self
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.method,
            self.n,
            self.value,
            self.mc_stderr.map(|s| s.to_string()).unwrap_or_default(),
            self.replicates,
            csv_field(&self.family),
            csv_field(&self.f_desc),
            csv_field(&self.h_desc),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
        )
    }
}

/// Quote a CSV field when it contains a separator or a quote.
pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// The distribution `P_θ` of a family.
#[derive(Debug, Clone, Copy)]
pub struct Density<'a> {
    pub family: &'a dyn ParametricFamily,
    pub theta: f64,
}

impl<'a> Density<'a> {
    pub fn new(family: &'a dyn ParametricFamily, theta: f64) -> Self {
        Density { family, theta }
    }

    fn pdf(&self, x: f64) -> f64 {
        self.family.density(x, self.theta)
    }
}

/// `½ ∫ (√p − √q)² dν` by summation or adaptive quadrature.
pub fn hellinger_sq_1d(p: Density<'_>, q: Density<'_>) -> Result<f64> {
    // discrete families share counting measure on the integers
    let discrete = p.family.support_kind().is_discrete();
    if discrete != q.family.support_kind().is_discrete() {
        return Err(Error::argument(format!(
            "{} and {} live on different supports",
            p.family.name(),
            q.family.name()
        )));
    }
    let integrand = |x: f64| 0.5 * (p.pdf(x).sqrt() - q.pdf(x).sqrt()).powi(2);
    let value = if !discrete {
        let mut breaks = p.family.integration_breaks(p.theta);
        breaks.extend(q.family.integration_breaks(q.theta));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        quadrature::integrate_with_breaks(integrand, &breaks, &QuadSettings::default())?.value
    } else {
        let mut pts = p.family.support_points(p.theta).unwrap_or_default();
        pts.extend(q.family.support_points(q.theta).unwrap_or_default());
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts.into_iter().map(integrand).sum()
    };
    Ok(value.clamp(0.0, 1.0))
}

/// `H²` between two probability vectors on the same finite set.
pub fn hellinger_sq_pmf(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::argument("probability vectors differ in length"));
    }
    let v: f64 = p.iter().zip(q).map(|(a, b)| 0.5 * (a.sqrt() - b.sqrt()).powi(2)).sum();
    Ok(v.clamp(0.0, 1.0))
}

/// Total variation `½ Σ |p − q|` on a finite set.
pub fn tv_pmf(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::argument("probability vectors differ in length"));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `H²(N(μ₁, 1), N(μ₂, 1)) = 1 − exp(−(μ₁ − μ₂)²/8)`.
pub fn hellinger_gaussian(mu1: f64, mu2: f64) -> f64 {
    -(-(mu1 - mu2).powi(2) / 8.0).exp_m1()
}

/// `H²(N(μ₁, σ₁²), N(μ₂, σ₂²))`.
pub fn hellinger_gaussian_scaled(mu1: f64, sd1: f64, mu2: f64, sd2: f64) -> f64 {
    let s = sd1 * sd1 + sd2 * sd2;
    let log_affinity = 0.5 * (2.0 * sd1 * sd2 / s).ln() - (mu1 - mu2).powi(2) / (4.0 * s);
    -log_affinity.exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductHellinger {
    /// `1 − ∏ (1 − H²_i)`.
    pub value: f64,
    /// `min(1, Σ H²_i)`.
    pub bound: f64,
}

/// `H²` of a product of independent components from the component `H²`s.
pub fn hellinger_sq_product(components: &[f64]) -> Result<ProductHellinger> {
    let mut log_affinity = 0.0;
    let mut sum = 0.0;
    for &h in components {
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::argument(format!("squared Hellinger component {h} is outside [0, 1]")));
        }
        log_affinity += (-h).ln_1p();
        sum += h;
    }
    Ok(ProductHellinger {
        value: -log_affinity.exp_m1(),
        bound: sum.min(1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeficiencyBound {
    /// `min(1, √2 H)`, which bounds `½ E|Λ¹ − Λ²|` and hence the deficiency
    /// between experiments whose likelihood processes are coupled this closely.
    pub tv_bound: f64,
    pub note: &'static str,
}

pub fn tv_and_deficiency_bound(h2: f64) -> Result<DeficiencyBound> {
    if !(0.0..=1.0).contains(&h2) {
        return Err(Error::argument(format!("squared Hellinger distance {h2} is outside [0, 1]")));
    }
    Ok(DeficiencyBound {
        tv_bound: (2.0 * h2).sqrt().min(1.0),
        note: "upper bound on the deficiency of coupled versions; exact deficiency is not computed",
    })
}

fn check_products(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::argument("product measures have different numbers of factors"));
    }
    let mut outcomes: u128 = 1;
    for (a, b) in p.iter().zip(q) {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::argument("paired factors must share a nonempty finite support"));
        }
        outcomes = outcomes.saturating_mul(a.len() as u128);
    }
    if outcomes > BRUTE_FORCE_CAPACITY {
        return Err(Error::Capacity {
            outcomes,
            capacity: BRUTE_FORCE_CAPACITY,
        });
    }
    Ok(())
}

/// Visit every outcome of the product space with its two probabilities.
fn enumerate(p: &[Vec<f64>], q: &[Vec<f64>], mut visit: impl FnMut(f64, f64)) {
    let mut idx = vec![0usize; p.len()];
    loop {
        let (mut a, mut b) = (1.0, 1.0);
        for (k, &j) in idx.iter().enumerate() {
            a *= p[k][j];
            b *= q[k][j];
        }
        visit(a, b);
        let mut k = 0;
        loop {
            if k == idx.len() {
                return;
            }
            idx[k] += 1;
            if idx[k] < p[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Exact `½ Σ_ω |Pⁿ(ω) − Qⁿ(ω)|` by enumeration of the product space.
pub fn brute_force_tv(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<f64> {
    check_products(p, q)?;
    let mut total = 0.0;
    enumerate(p, q, |a, b| total += (a - b).abs());
    Ok(0.5 * total)
}

/// Exact product-space `H²` by enumeration.
pub fn brute_force_hellinger_sq(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<f64> {
    check_products(p, q)?;
    let mut total = 0.0;
    enumerate(p, q, |a, b| total += 0.5 * (a.sqrt() - b.sqrt()).powi(2));
    Ok(total)
}

/// `½ (√e^a − √e^b)²` without forming the likelihoods themselves.
fn half_root_gap_sq(a: f64, b: f64) -> f64 {
    let gap = (-(a - b).abs() / 2.0).exp_m1();
    if gap == 0.0 {
        return 0.0;
    }
    0.5 * (a.max(b) + 2.0 * (-gap).ln()).exp()
}

/// Monte Carlo `H²` from coupled log-likelihood pairs drawn under the central
/// measure: the mean of `½ (√Λ¹ − √Λ²)²` with its jackknife standard error.
pub fn mc_hellinger(log_pairs: &[(f64, f64)]) -> Result<(f64, f64)> {
    if log_pairs.len() < 10 {
        return Err(Error::argument(format!(
            "at least 10 replicates are needed for a standard error, got {}",
            log_pairs.len()
        )));
    }
    let terms: Vec<f64> = log_pairs.iter().map(|&(a, b)| half_root_gap_sq(a, b)).collect();
    if terms.iter().any(|t| !t.is_finite()) {
        return Err(Error::numeric("mc_hellinger", "likelihood ratio overflowed"));
    }
    Ok((mean(&terms), jackknife_stderr_of_mean(&terms)))
}

pub fn mc_hellinger_coupled(draws: &[CoupledLikelihoodDraw]) -> Result<DistanceReport> {
    let pairs: Vec<(f64, f64)> = draws.iter().map(|d| (d.log_lik_original, d.log_lik_gaussian)).collect();
    let (value, stderr) = mc_hellinger(&pairs)?;
    let n = draws.first().map_or(0, |d| d.n);
    let mut report = DistanceReport::new(DistanceKind::HellingerSq, Method::MonteCarlo, value, Some(stderr), draws.len())?;
    report.n = n;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Apx1Check {
    /// `E e^{λξ}`.
    pub lhs: f64,
    /// `exp((e^a/2) λ² E ξ²)` with `a = max |ξ|`.
    pub rhs: f64,
    pub holds: bool,
}

/// Exponential moment bound for a bounded, centered, finitely supported law
/// given as `(value, probability)` atoms, at `|λ| ≤ 1`.
pub fn apx1_check(law: &[(f64, f64)], lambda: f64) -> Result<Apx1Check> {
    if lambda.abs() > 1.0 {
        return Err(Error::argument(format!("|lambda| must be at most 1, got {lambda}")));
    }
    let mass: f64 = law.iter().map(|a| a.1).sum();
    if law.is_empty() || (mass - 1.0).abs() > 1e-9 || law.iter().any(|a| a.1 < 0.0) {
        return Err(Error::argument("law must be a probability vector"));
    }
    let m: f64 = law.iter().map(|(v, p)| v * p).sum();
    let a = law.iter().fold(0.0_f64, |acc, x| acc.max(x.0.abs()));
    if m.abs() > 1e-9 * a.max(1.0) {
        return Err(Error::argument(format!("law must be centered, mean is {m}")));
    }
    let lhs: f64 = law.iter().map(|(v, p)| p * (lambda * v).exp()).sum();
    let second: f64 = law.iter().map(|(v, p)| p * v * v).sum();
    let rhs = (0.5 * a.exp() * lambda * lambda * second).exp();
    Ok(Apx1Check {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-12),
    })
}
