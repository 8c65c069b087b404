use std::fmt;

use super::{ensure_in_theta, extended_tangent, integrate_measure, ParametricFamily};
use crate::error::{Error, Result};

/// Evenly spaced `θ` values on `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaGrid {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl ThetaGrid {
    pub fn new(lower: f64, upper: f64, points: usize) -> Self {
        ThetaGrid { lower, upper, points }
    }

    pub fn single(theta: f64) -> Self {
        ThetaGrid {
            lower: theta,
            upper: theta,
            points: 1,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.lower],
            m => (0..m)
                .map(|k| self.lower + (self.upper - self.lower) * k as f64 / (m - 1) as f64)
                .collect(),
        }
    }
}

impl fmt::Display for ThetaGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} points on [{}, {}]", self.points, self.lower, self.upper)
    }
}

/// Grid estimates of the regularity suprema. These are audits over finitely
/// many pairs, not certificates.
#[derive(Debug, Clone)]
pub struct RegularityReport {
    /// Largest `‖s(u) − s(θ) − (u−θ)ṡ(θ)‖ / |u−θ|^{1+δ₁}` over the pairs.
    pub r1_sup_estimate: f64,
    /// Largest `E_θ |l̇_θ(u)|^{2δ₂}` over the pairs, diagonal included.
    pub r2_sup_estimate: f64,
    /// `(min, max)` of `I(θ)` over the grid.
    pub r3_bounds: (f64, f64),
    pub grid_spec: String,
    pub delta_r1: f64,
    pub delta_r2: f64,
    pub epsilon: f64,
    pub r1_pass: bool,
    pub r2_pass: bool,
    pub r3_pass: bool,
    /// Off-diagonal pairs `θ ≠ u` with `|u − θ| ≤ ε` found on the grid.
    pub pairs: usize,
    pub insufficient_pairs: bool,
    /// Where the integrals were cut off.
    pub truncation: String,
}

impl RegularityReport {
    pub fn all_pass(&self) -> bool {
        self.r1_pass && self.r2_pass && self.r3_pass
    }
}

/// Default exponents: the midpoint of `(1/(2β), 1)` for the smoothness
/// remainder and `(2β+1)/(2β−1) + 1/2` for the moment bound.
pub fn default_deltas(beta: f64) -> Result<(f64, f64)> {
    if !(beta > 0.5 && beta.is_finite()) {
        return Err(Error::argument(format!("smoothness beta must exceed 1/2, got {beta}")));
    }
    let d1 = 0.5 * (1.0 / (2.0 * beta) + 1.0);
    let d2 = (2.0 * beta + 1.0) / (2.0 * beta - 1.0) + 0.5;
    Ok((d1, d2))
}

fn truncation_note(family: &dyn ParametricFamily, thetas: &[f64]) -> String {
    if family.support_kind().is_discrete() {
        let top = thetas
            .iter()
            .filter_map(|&t| family.support_points(t))
            .flat_map(|p| p.last().copied())
            .fold(f64::NEG_INFINITY, f64::max);
        format!("summation over support points up to x={top}")
    } else {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &t in thetas {
            let b = family.integration_breaks(t);
            if let (Some(a), Some(z)) = (b.first(), b.last()) {
                lo = lo.min(*a);
                hi = hi.max(*z);
            }
        }
        format!("quadrature on [{lo}, {hi}] (density below 1e-16 outside)")
    }
}

pub fn check_regularity(
    family: &dyn ParametricFamily,
    grid: &ThetaGrid,
    epsilon: f64,
    beta: f64,
) -> Result<RegularityReport> {
    let thetas = grid.values();
    if thetas.is_empty() {
        return Err(Error::argument("regularity grid is empty"));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::argument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    for &t in &thetas {
        ensure_in_theta(family, t)?;
    }
    let (delta_r1, delta_r2) = default_deltas(beta)?;

    let mut r1 = 0.0_f64;
    let mut r2 = 0.0_f64;
    let mut pairs = 0;
    for (i, &theta) in thetas.iter().enumerate() {
        for (j, &u) in thetas.iter().enumerate() {
            let gap = (u - theta).abs();
            if gap > epsilon {
                continue;
            }
            if i != j {
                pairs += 1;
                let sq = integrate_measure(family, &[theta, u], |x| {
                    let st = family.density(x, theta).sqrt();
                    let su = family.density(x, u).sqrt();
                    let lin = 0.5 * (u - theta) * family.score(x, theta) * st;
                    if st == 0.0 {
                        su * su
                    } else {
                        (su - st - lin).powi(2)
                    }
                })?;
                r1 = r1.max(sq.max(0.0).sqrt() / gap.powf(1.0 + delta_r1));
            }
            let moment = integrate_measure(family, &[theta], |x| {
                let p = family.density(x, theta);
                if p == 0.0 {
                    return 0.0;
                }
                extended_tangent(family, x, theta, u)
                    .map(|v| v.abs().powf(2.0 * delta_r2) * p)
                    .unwrap_or(0.0)
            })?;
            r2 = r2.max(moment);
        }
    }

    let infos: Vec<f64> = thetas.iter().map(|&t| family.fisher(t)).collect();
    let i_min = infos.iter().copied().fold(f64::INFINITY, f64::min);
    let i_max = infos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let insufficient_pairs = pairs == 0;
    if insufficient_pairs {
        r1 = 0.0;
        r2 = 0.0;
    }

    Ok(RegularityReport {
        r1_sup_estimate: r1,
        r2_sup_estimate: r2,
        r3_bounds: (i_min, i_max),
        grid_spec: grid.to_string(),
        delta_r1,
        delta_r2,
        epsilon,
        r1_pass: !insufficient_pairs && r1.is_finite(),
        r2_pass: !insufficient_pairs && r2.is_finite(),
        r3_pass: i_min > 0.0 && i_max.is_finite(),
        pairs,
        insufficient_pairs,
        truncation: truncation_note(family, &thetas),
    })
}
