//! One-parameter families `p(x, θ)` and the quantities the equivalence
//! machinery needs from them: score, Fisher information `I(θ)`, the
//! variance-stabilizing map `Γ` with `Γ' = √I`, and the laws of the score.

mod builtin;
mod regularity;
mod tabulated;

use std::fmt;
use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadSettings};

pub use builtin::{Bernoulli, GaussianScale, LocationNormal, Poisson};
pub use regularity::{check_regularity, default_deltas, RegularityReport, ThetaGrid};
pub use tabulated::LocationCustom;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportKind {
    ContinuousReal,
    NonnegativeInteger,
    Binary,
}

impl SupportKind {
    pub fn is_discrete(self) -> bool {
        !matches!(self, SupportKind::ContinuousReal)
    }
}

/// Distribution of the score `l̇(X, θ)` under `P_θ`.
#[derive(Clone)]
pub enum ScoreLaw {
    /// Finitely many atoms `(value, probability)`, sorted by value.
    Atoms(Vec<(f64, f64)>),
    /// Continuous law given by its distribution function.
    Continuous {
        cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        /// Standard deviation, `√I(θ)`.
        sd: f64,
        /// True when the law is exactly `N(0, I(θ))`.
        gaussian: bool,
    },
}

impl fmt::Debug for ScoreLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreLaw::Atoms(a) => f.debug_tuple("Atoms").field(&a.len()).finish(),
            ScoreLaw::Continuous { sd, gaussian, .. } => f
                .debug_struct("Continuous")
                .field("sd", sd)
                .field("gaussian", gaussian)
                .finish(),
        }
    }
}

/// Exact law of a block statistic `T = Σ_i block_coordinate(X_i, θ_i)`.
#[derive(Debug, Clone)]
pub enum BlockSumLaw {
    /// Integer-valued `T` with `P(T = offset + k) = pmf[k]`; mass outside
    /// the table is below the summation tail bound.
    Lattice { offset: u64, pmf: Vec<f64> },
    /// `T ~ χ²` with the given degrees of freedom.
    ChiSquare(usize),
}

/// A dominated one-parameter family with scalar parameter.
///
/// Implementations are immutable and shared across worker threads.
pub trait ParametricFamily: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// The open parameter interval `Θ`.
    fn theta_interval(&self) -> (f64, f64);

    /// Compact sub-interval of `Θ` on which `I` is bounded away from 0 and ∞.
    fn working_interval(&self) -> (f64, f64);

    fn support_kind(&self) -> SupportKind;

    fn log_density(&self, x: f64, theta: f64) -> f64;

    fn density(&self, x: f64, theta: f64) -> f64 {
        self.log_density(x, theta).exp()
    }

    /// `log p(x, u) − log p(x, θ)`.
    fn log_ratio(&self, x: f64, theta: f64, u: f64) -> f64 {
        self.log_density(x, u) - self.log_density(x, theta)
    }

    fn score(&self, x: f64, theta: f64) -> f64;

    fn fisher(&self, theta: f64) -> f64;

    fn gamma(&self, theta: f64) -> f64;

    fn gamma_inverse(&self, y: f64) -> f64;

    /// `Γ(θ + shift) − Γ(θ)`, overridden where a cancellation-free form exists.
    fn gamma_increment(&self, theta: f64, shift: f64) -> f64 {
        self.gamma(theta + shift) - self.gamma(theta)
    }

    /// Point `θ₀` with `Γ(θ₀) = 0`.
    fn gamma_anchor(&self) -> f64;

    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> f64;

    /// Support points carrying mass above the summation tail bound
    /// (discrete families only).
    fn support_points(&self, _theta: f64) -> Option<Vec<f64>> {
        None
    }

    /// Sorted integration breakpoints covering the truncated support
    /// (continuous families only).
    fn integration_breaks(&self, _theta: f64) -> Vec<f64> {
        Vec::new()
    }

    fn score_law(&self, theta: f64) -> ScoreLaw;

    /// True when the score under `P_θ` is exactly `N(0, I(θ))`.
    fn gaussian_scores(&self) -> bool {
        false
    }

    /// Per-observation statistic whose block mean estimates `mean_map(θ)`.
    fn block_statistic(&self, x: f64) -> f64 {
        x
    }

    fn mean_map(&self, theta: f64) -> f64;

    fn mean_map_inverse(&self, m: f64) -> f64;

    /// Variance-stabilizing map on the mean scale, `stabilize(mean_map(θ)) = Γ(θ)`.
    fn stabilize(&self, m: f64) -> f64;

    /// Coordinate entering the exact block-sum law used by the block coupling.
    fn block_coordinate(&self, x: f64, _theta: f64) -> f64 {
        x
    }

    /// Exact law of `Σ block_coordinate(X_i, θ_i)` for independent `X_i ~ P_{θ_i}`,
    /// when one is available.
    fn block_sum_law(&self, _thetas: &[f64]) -> Option<BlockSumLaw> {
        None
    }
}

pub type SharedFamily = Arc<dyn ParametricFamily>;

/// Names accepted by [`family_by_name`].
pub const BUILTIN_NAMES: [&str; 4] = ["bernoulli", "poisson", "gaussian_scale", "location_normal"];

/// Resolve a built-in family by its configuration name.
pub fn family_by_name(name: &str) -> Result<SharedFamily> {
    match name {
        "bernoulli" => Ok(Arc::new(Bernoulli)),
        "poisson" => Ok(Arc::new(Poisson)),
        "gaussian_scale" => Ok(Arc::new(GaussianScale)),
        "location_normal" => Ok(Arc::new(LocationNormal)),
        "location_custom" => Err(Error::argument(
            "location_custom needs a tabulated density file (see LocationCustom::from_file)",
        )),
        other => Err(Error::argument(format!("unknown family '{other}'"))),
    }
}

pub(crate) fn ensure_in_theta(family: &dyn ParametricFamily, theta: f64) -> Result<()> {
    let (lo, hi) = family.theta_interval();
    if theta.is_finite() && theta > lo && theta < hi {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "parameter interval",
            value: theta,
            lower: lo,
            upper: hi,
        })
    }
}

pub(crate) fn ensure_in_working(family: &dyn ParametricFamily, theta: f64) -> Result<()> {
    let (lo, hi) = family.working_interval();
    if theta.is_finite() && theta >= lo && theta <= hi {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "working interval",
            value: theta,
            lower: lo,
            upper: hi,
        })
    }
}

pub(crate) fn quad_settings() -> QuadSettings {
    QuadSettings::default()
}

/// `∫ g dμ` over the union of the (truncated) supports of `P_θ`, `θ ∈ thetas`.
pub fn integrate_measure<G: Fn(f64) -> f64>(
    family: &dyn ParametricFamily,
    thetas: &[f64],
    g: G,
) -> Result<f64> {
    if family.support_kind().is_discrete() {
        let mut pts: Vec<f64> = Vec::new();
        for &t in thetas {
            pts.extend(family.support_points(t).unwrap_or_default());
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Ok(pts.iter().map(|&x| g(x)).sum())
    } else {
        let mut breaks: Vec<f64> = Vec::new();
        for &t in thetas {
            breaks.extend(family.integration_breaks(t));
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        quadrature::integrate_with_breaks(g, &breaks, &quad_settings()).map(|r| r.value)
    }
}

/// `E_θ g(X)` by exact summation (discrete) or adaptive quadrature (continuous).
pub fn expectation<G: Fn(f64) -> f64>(family: &dyn ParametricFamily, theta: f64, g: G) -> Result<f64> {
    integrate_measure(family, &[theta], |x| {
        let p = family.density(x, theta);
        if p == 0.0 {
            0.0
        } else {
            p * g(x)
        }
    })
}

/// `I(θ)` (closed form for the built-ins).
pub fn fisher_info(family: &dyn ParametricFamily, theta: f64) -> Result<f64> {
    ensure_in_theta(family, theta)?;
    let i = family.fisher(theta);
    if i.is_finite() && i > 0.0 {
        Ok(i)
    } else {
        Err(Error::numeric("fisher_info", format!("I({theta}) = {i}")))
    }
}

/// `I(θ) = E_θ l̇²` by summation or quadrature, independent of the closed form.
pub fn fisher_numeric(family: &dyn ParametricFamily, theta: f64) -> Result<f64> {
    ensure_in_theta(family, theta)?;
    expectation(family, theta, |x| family.score(x, theta).powi(2))
}

pub fn gamma_transform(family: &dyn ParametricFamily, theta: f64) -> Result<f64> {
    ensure_in_theta(family, theta)?;
    Ok(family.gamma(theta))
}

/// `Γ(θ) = ∫_{θ₀}^{θ} √I(s) ds` from the family's anchor, by quadrature.
pub fn gamma_numeric(family: &dyn ParametricFamily, theta: f64) -> Result<f64> {
    ensure_in_theta(family, theta)?;
    let anchor = family.gamma_anchor();
    let (a, b, sign) = if theta >= anchor { (anchor, theta, 1.0) } else { (theta, anchor, -1.0) };
    let r = quadrature::integrate(|s| family.fisher(s).sqrt(), a, b, &quad_settings())?;
    Ok(sign * r.value)
}

/// Secant version of the score: `l̇(x, θ)` when `u = θ`, otherwise
/// `(2/(u−θ))(√(p(x,u)/p(x,θ)) − 1)`.
pub fn extended_tangent(family: &dyn ParametricFamily, x: f64, theta: f64, u: f64) -> Result<f64> {
    ensure_in_theta(family, theta)?;
    ensure_in_theta(family, u)?;
    if family.density(x, theta) == 0.0 {
        return Err(Error::Singularity { x, theta });
    }
    if u == theta {
        return Ok(family.score(x, theta));
    }
    let half_log = 0.5 * family.log_ratio(x, theta, u);
    Ok(2.0 / (u - theta) * half_log.exp_m1())
}

#[cfg(test)]
mod tests;
