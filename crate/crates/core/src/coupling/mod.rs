//! Both likelihood processes on one probability space.
//!
//! Every draw is generated under the central measure `P_f`. The original
//! log-likelihood is `Σ h ξ̃ − ½ Σ h² I + ρ̃` and the Gaussian one is
//! `Σ h ζ − ½ Σ h² I`, where `(ξ̃, ζ)` come from one of three schemes:
//!
//! * [`CouplingScheme::Identity`]: the scores are exactly Gaussian, so `ζ = ξ`.
//! * [`CouplingScheme::Block`]: `ξ̃ = ξ*` are the bounded scores of the
//!   observations, `ρ̃` is their own remainder, and `ζ` is built from the exact
//!   law of each block sum.
//! * [`CouplingScheme::PerCoordinate`]: `ξ̃_i = F_i⁻¹(Φ(ε_i))`, `ζ_i = √I_i ε_i`,
//!   and `ρ̃` is transplanted from an independent draw of the original model.
//!   Marginals are exact but `Σ h (ξ̃ − ζ)` does not shrink with `n`.

mod audit;
mod block;
mod quantile;
mod truncation;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::{draw_observations, loglik_ratio_points};
use crate::families::{ensure_in_working, ParametricFamily};
use crate::function_space::{local_radius, neighborhood_contains, RegressionFunction};
use crate::seed::{derive_seed, stream};

pub use audit::{audit_cc_conditions, discrepancy, discrepancy_reference, CcAudit, CcSettings, Frequency};
pub use block::{block_ranges, BlockCoupler};
pub use quantile::ScoreQuantiles;
pub use truncation::{PointTruncation, TruncationOutput, TruncationPlan, TruncationSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingScheme {
    Identity,
    Block,
    PerCoordinate,
}

impl fmt::Display for CouplingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CouplingScheme::Identity => "identity",
            CouplingScheme::Block => "block",
            CouplingScheme::PerCoordinate => "per-coordinate",
        })
    }
}

impl FromStr for CouplingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" => Ok(CouplingScheme::Identity),
            "block" => Ok(CouplingScheme::Block),
            "per-coordinate" | "per_coordinate" | "quantile" => Ok(CouplingScheme::PerCoordinate),
            other => Err(Error::argument(format!("unknown coupling scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSettings {
    pub truncation: TruncationSettings,
    /// `c` in the local radius `r_n = c/√n`.
    pub radius_const: f64,
    /// `None` picks the best scheme the family supports.
    pub scheme: Option<CouplingScheme>,
    /// Block length is about `block_factor · n^{2/3}`.
    pub block_factor: f64,
}

impl Default for CouplingSettings {
    fn default() -> Self {
        CouplingSettings {
            truncation: TruncationSettings::default(),
            radius_const: 1.0,
            scheme: None,
            block_factor: 0.3,
        }
    }
}

/// One coupled pair of log-likelihood ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledLikelihoodDraw {
    pub n: usize,
    pub log_lik_original: f64,
    pub log_lik_gaussian: f64,
    pub scores_tilde: Vec<f64>,
    pub gaussians: Vec<f64>,
    pub remainder_tilde: f64,
    pub seed: u64,
    pub scheme: CouplingScheme,
}

impl CoupledLikelihoodDraw {
    /// CSV row `replicate, n, loglik_orig, loglik_gauss, remainder, seed`.
    pub fn csv_row(&self, replicate: usize) -> String {
        format!(
            "{replicate},{},{},{},{},{}",
            self.n, self.log_lik_original, self.log_lik_gaussian, self.remainder_tilde, self.seed
        )
    }
}

pub const DRAW_CSV_HEADER: &str = "replicate,n,loglik_orig,loglik_gauss,remainder,seed";

pub fn write_draws_csv(draws: &[CoupledLikelihoodDraw], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{DRAW_CSV_HEADER}")?;
    for (r, d) in draws.iter().enumerate() {
        writeln!(out, "{}", d.csv_row(r))?;
    }
    Ok(())
}

/// Everything about `(family, f, h, n)` that does not change between draws.
#[derive(Debug)]
pub struct CouplingContext<'a> {
    family: &'a dyn ParametricFamily,
    n: usize,
    r_n: f64,
    thetas: Vec<f64>,
    shifts: Vec<f64>,
    fisher: Vec<f64>,
    quadratic: f64,
    plan: TruncationPlan,
    scheme: CouplingScheme,
    blocks: Option<BlockCoupler>,
}

impl<'a> CouplingContext<'a> {
    pub fn new(
        family: &'a dyn ParametricFamily,
        f: &RegressionFunction,
        h: &RegressionFunction,
        n: usize,
        settings: &CouplingSettings,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::argument("sample size must be positive"));
        }
        let r_n = local_radius(n, settings.radius_const);
        let (lo, hi) = f.value_range();
        ensure_in_working(family, lo)?;
        ensure_in_working(family, hi)?;
        if !neighborhood_contains(f, h, r_n)? {
            return Err(Error::argument(format!(
                "h = {h} is not in the local neighborhood of radius {r_n:.4e}"
            )));
        }
        let thetas = f.on_design(n);
        let shifts = h.on_design(n);
        let fisher: Vec<f64> = thetas.iter().map(|&t| family.fisher(t)).collect();
        let quadratic = 0.5 * shifts.iter().zip(&fisher).map(|(s, i)| s * s * i).sum::<f64>();

        let scheme = match settings.scheme {
            Some(s) => s,
            None if family.gaussian_scores() => CouplingScheme::Identity,
            None if family.block_sum_law(&thetas[..1]).is_some() => CouplingScheme::Block,
            None => CouplingScheme::PerCoordinate,
        };
        if scheme == CouplingScheme::Identity && !family.gaussian_scores() {
            return Err(Error::argument(format!(
                "the identity coupling needs exactly Gaussian scores, which {} does not have",
                family.name()
            )));
        }
        let blocks = if scheme == CouplingScheme::Block {
            Some(BlockCoupler::new(family, &thetas, settings.block_factor).ok_or_else(|| {
                Error::argument(format!("{} has no exact block-sum law", family.name()))
            })?)
        } else {
            None
        };
        let plan = TruncationPlan::new(family, &thetas, r_n, &settings.truncation)?;
        Ok(CouplingContext {
            family,
            n,
            r_n,
            thetas,
            shifts,
            fisher,
            quadratic,
            plan,
            scheme,
            blocks,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.r_n
    }

    pub fn scheme(&self) -> CouplingScheme {
        self.scheme
    }

    pub fn plan(&self) -> &TruncationPlan {
        &self.plan
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn fisher(&self) -> &[f64] {
        &self.fisher
    }

    /// `½ Σ h(t_i)² I(f(t_i))`.
    pub fn quadratic(&self) -> f64 {
        self.quadratic
    }

    fn linear(&self, scores: &[f64]) -> f64 {
        self.shifts.iter().zip(scores).map(|(h, s)| h * s).sum()
    }

    fn raw_scores(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().zip(&self.thetas).map(|(&x, &t)| self.family.score(x, t)).collect()
    }

    /// Remainder `exact − Σ h ξ* + ½ Σ h² I` of an original-model sample.
    fn remainder(&self, xs: &[f64], bounded_scores: &[f64]) -> Result<f64> {
        let exact = loglik_ratio_points(self.family, xs, &self.thetas, &self.shifts)?;
        Ok(exact - self.linear(bounded_scores) + self.quadratic)
    }

    /// Bounded scores `ξ*` of a fresh sample from `P_f`.
    pub fn truncate_scores(&self, rng: &mut dyn RngCore) -> (Vec<f64>, TruncationOutput) {
        let xs = draw_observations(self.family, &self.thetas, rng);
        let raw = self.raw_scores(&xs);
        let out = self.plan.truncate(&raw, rng);
        (raw, out)
    }

    /// Per-coordinate quantile coupling: `(ξ̃, ζ)`.
    pub fn quantile_couple_scores(&self, rng: &mut dyn RngCore) -> (Vec<f64>, Vec<f64>) {
        let quantiles = ScoreQuantiles::new(&self.plan);
        self.quantile_couple_with(&quantiles, rng)
    }

    fn quantile_couple_with(&self, quantiles: &ScoreQuantiles<'_>, rng: &mut dyn RngCore) -> (Vec<f64>, Vec<f64>) {
        let eps: Vec<f64> = (0..self.n).map(|_| StandardNormal.sample(rng)).collect();
        let tilde = eps.iter().enumerate().map(|(i, &e)| quantiles.couple(i, e)).collect();
        let zetas = eps.iter().zip(&self.fisher).map(|(e, i)| i.sqrt() * e).collect();
        (tilde, zetas)
    }

    fn assemble(&self, scores_tilde: Vec<f64>, gaussians: Vec<f64>, remainder: f64, seed: u64) -> CoupledLikelihoodDraw {
        let log_lik_original = self.linear(&scores_tilde) - self.quadratic + remainder;
        let log_lik_gaussian = self.linear(&gaussians) - self.quadratic;
        CoupledLikelihoodDraw {
            n: self.n,
            log_lik_original,
            log_lik_gaussian,
            scores_tilde,
            gaussians,
            remainder_tilde: remainder,
            seed,
            scheme: self.scheme,
        }
    }

    fn draw_with(&self, quantiles: Option<&ScoreQuantiles<'_>>, seed: u64) -> Result<CoupledLikelihoodDraw> {
        let mut rng = stream(seed);
        match self.scheme {
            CouplingScheme::Identity => {
                let xs = draw_observations(self.family, &self.thetas, &mut rng);
                let scores = self.raw_scores(&xs);
                let remainder = self.remainder(&xs, &scores)?;
                Ok(self.assemble(scores.clone(), scores, remainder, seed))
            }
            CouplingScheme::Block => {
                let xs = draw_observations(self.family, &self.thetas, &mut rng);
                let raw = self.raw_scores(&xs);
                let bounded = self.plan.truncate(&raw, &mut rng).scores;
                let remainder = self.remainder(&xs, &bounded)?;
                let blocks = self.blocks.as_ref().expect("block scheme has blocks");
                let zetas = blocks.couple(self.family, &xs, &self.thetas, &self.fisher, &mut rng);
                Ok(self.assemble(bounded, zetas, remainder, seed))
            }
            CouplingScheme::PerCoordinate => {
                let owned;
                let quantiles = match quantiles {
                    Some(q) => q,
                    None => {
                        owned = ScoreQuantiles::new(&self.plan);
                        &owned
                    }
                };
                let (tilde, zetas) = self.quantile_couple_with(quantiles, &mut rng);
                // Remainder transplanted from an independent original-model sample.
                let xs = draw_observations(self.family, &self.thetas, &mut rng);
                let raw = self.raw_scores(&xs);
                let bounded = self.plan.truncate(&raw, &mut rng).scores;
                let remainder = self.remainder(&xs, &bounded)?;
                Ok(self.assemble(tilde, zetas, remainder, seed))
            }
        }
    }

    /// One coupled draw from the stream `seed`.
    pub fn draw(&self, seed: u64) -> Result<CoupledLikelihoodDraw> {
        self.draw_with(None, seed)
    }

    /// Replicates `0..replicates` with seeds `derive_seed(master, n, r)`, in order.
    pub fn batch(&self, master: u64, replicates: usize) -> Result<Vec<CoupledLikelihoodDraw>> {
        let seeds: Vec<u64> = (0..replicates)
            .map(|r| derive_seed(master, self.n as u64, r as u64))
            .collect();
        self.draws(&seeds).into_iter().collect()
    }

    /// One draw per seed, in seed order, each with its own outcome.
    pub fn draws(&self, seeds: &[u64]) -> Vec<Result<CoupledLikelihoodDraw>> {
        let quantiles = (self.scheme == CouplingScheme::PerCoordinate).then(|| ScoreQuantiles::new(&self.plan));
        seeds
            .par_iter()
            .map(|&seed| self.draw_with(quantiles.as_ref(), seed))
            .collect()
    }
}

/// One coupled draw for `(family, f, h, n)` from the stream `seed`.
pub fn build_coupled_draw(
    family: &dyn ParametricFamily,
    f: &RegressionFunction,
    h: &RegressionFunction,
    n: usize,
    settings: &CouplingSettings,
    seed: u64,
) -> Result<CoupledLikelihoodDraw> {
    CouplingContext::new(family, f, h, n, settings)?.draw(seed)
}
