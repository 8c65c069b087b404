//! Replacement of the scores by bounded variables with the same mean and
//! variance: `ξ* = η' + η'''` where `η'` is the centered truncated score and
//! `η'''` an independent three-point variable restoring the lost variance.

use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::families::{expectation, ParametricFamily, ScoreLaw};
use crate::quadrature::TAIL_DENSITY;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSettings {
    /// Exponent `α ∈ (1/(2β), 1)`.
    pub alpha: f64,
    /// Scores are cut at `kappa · r_n^{α−1}`; `kappa = 1` is the plain cut `|r_n ξ| ≤ r_n^α`.
    pub kappa: f64,
    /// Three-point amplitude constant: `x_n = c1 · r_n^{α−1}`.
    pub c1: f64,
}

impl Default for TruncationSettings {
    fn default() -> Self {
        TruncationSettings {
            alpha: 0.75,
            kappa: 1.0,
            c1: 2.0,
        }
    }
}

impl TruncationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::argument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.kappa > 0.0) || !(self.c1 > 0.0) {
            return Err(Error::argument("truncation constants kappa and c1 must be positive"));
        }
        Ok(())
    }
}

/// Law of the kept part `ξ' = ξ 1{|ξ| ≤ thr}`.
#[derive(Clone)]
pub(crate) enum KeptLaw {
    Atoms(Vec<(f64, f64)>),
    Continuous {
        cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        threshold: f64,
        /// `P(|ξ| > thr)`, moved to the atom at zero.
        tail_mass: f64,
        sd: f64,
    },
}

impl std::fmt::Debug for KeptLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KeptLaw::Atoms(a) => write!(f, "Atoms({})", a.len()),
            KeptLaw::Continuous { threshold, tail_mass, .. } => {
                write!(f, "Continuous(thr={threshold}, tail={tail_mass})")
            }
        }
    }
}

impl KeptLaw {
    /// `P(ξ' ≤ v)`.
    pub(crate) fn cdf(&self, v: f64) -> f64 {
        match self {
            KeptLaw::Atoms(a) => a.iter().take_while(|x| x.0 <= v).map(|x| x.1).sum(),
            KeptLaw::Continuous { cdf, threshold, tail_mass, .. } => {
                let lo = cdf(-threshold);
                let body = if v < -threshold {
                    0.0
                } else {
                    cdf(v.min(*threshold)) - lo
                };
                body + if v >= 0.0 { *tail_mass } else { 0.0 }
            }
        }
    }
}

/// Truncation data for one design point.
#[derive(Debug, Clone)]
pub struct PointTruncation {
    pub threshold: f64,
    /// `E ξ'`.
    pub kept_mean: f64,
    /// `E(η')²`.
    pub centered_second_moment: f64,
    pub tail_mass: f64,
    /// `v² = I − E(η')²`.
    pub v2: f64,
    /// Probability of each of `±x_n`.
    pub p: f64,
    /// False when no score mass lies beyond the threshold, so `ξ* = ξ`.
    pub active: bool,
    pub(crate) kept: KeptLaw,
}

/// Per-point truncation for fixed `(f, n)`.
#[derive(Debug, Clone)]
pub struct TruncationPlan {
    pub points: Vec<PointTruncation>,
    pub thetas: Vec<f64>,
    pub fisher: Vec<f64>,
    pub alpha: f64,
    pub r_n: f64,
    /// Three-point amplitude `x_n`.
    pub x_n: f64,
    /// `c` in `|r_n^{1−α} ξ*| ≤ c`, equal to `2κ + c1`.
    pub bound: f64,
}

/// Output of [`TruncationPlan::truncate`] for one draw.
#[derive(Debug, Clone)]
pub struct TruncationOutput {
    pub scores: Vec<f64>,
    pub bound: f64,
    pub alpha: f64,
    pub variance_targets: Vec<f64>,
    pub x_n: f64,
    pub p: Vec<f64>,
}

fn point_truncation(family: &dyn ParametricFamily, theta: f64, threshold: f64) -> Result<PointTruncation> {
    let fisher = family.fisher(theta);
    match family.score_law(theta) {
        ScoreLaw::Atoms(atoms) => {
            let tail: Vec<&(f64, f64)> = atoms.iter().filter(|a| a.0.abs() > threshold).collect();
            let tail_mass: f64 = tail.iter().map(|a| a.1).sum();
            if tail.is_empty() {
                return Ok(PointTruncation {
                    threshold,
                    kept_mean: 0.0,
                    centered_second_moment: fisher,
                    tail_mass: 0.0,
                    v2: 0.0,
                    p: 0.0,
                    active: false,
                    kept: KeptLaw::Atoms(atoms),
                });
            }
            let mut kept: Vec<(f64, f64)> = atoms
                .iter()
                .filter(|a| a.0.abs() <= threshold)
                .copied()
                .collect();
            match kept.iter_mut().find(|a| a.0 == 0.0) {
                Some(zero) => zero.1 += tail_mass,
                None => kept.push((0.0, tail_mass)),
            }
            kept.sort_by(|a, b| a.0.total_cmp(&b.0));
            let tail_first: f64 = tail.iter().map(|a| a.0 * a.1).sum();
            let tail_second: f64 = tail.iter().map(|a| a.0 * a.0 * a.1).sum();
            let kept_mean = -tail_first;
            let centered = kept.iter().map(|a| (a.0 - kept_mean).powi(2) * a.1).sum::<f64>();
            Ok(PointTruncation {
                threshold,
                kept_mean,
                centered_second_moment: centered,
                tail_mass,
                v2: tail_second + tail_first * tail_first,
                p: 0.0,
                active: true,
                kept: KeptLaw::Atoms(kept),
            })
        }
        ScoreLaw::Continuous { cdf, sd, .. } => {
            let tail_mass = (1.0 - cdf(threshold)) + cdf(-threshold);
            if tail_mass <= TAIL_DENSITY {
                return Ok(PointTruncation {
                    threshold,
                    kept_mean: 0.0,
                    centered_second_moment: fisher,
                    tail_mass: 0.0,
                    v2: 0.0,
                    p: 0.0,
                    active: false,
                    kept: KeptLaw::Continuous {
                        cdf,
                        threshold: f64::INFINITY,
                        tail_mass: 0.0,
                        sd,
                    },
                });
            }
            let in_tail = |x: f64| family.score(x, theta).abs() > threshold;
            let tail_first = expectation(family, theta, |x| if in_tail(x) { family.score(x, theta) } else { 0.0 })?;
            let tail_second =
                expectation(family, theta, |x| if in_tail(x) { family.score(x, theta).powi(2) } else { 0.0 })?;
            let v2 = tail_second + tail_first * tail_first;
            Ok(PointTruncation {
                threshold,
                kept_mean: -tail_first,
                centered_second_moment: fisher - v2,
                tail_mass,
                v2,
                p: 0.0,
                active: true,
                kept: KeptLaw::Continuous {
                    cdf,
                    threshold,
                    tail_mass,
                    sd,
                },
            })
        }
    }
}

impl TruncationPlan {
    pub fn new(family: &dyn ParametricFamily, thetas: &[f64], r_n: f64, settings: &TruncationSettings) -> Result<Self> {
        settings.validate()?;
        if !(r_n > 0.0 && r_n <= 1.0) {
            return Err(Error::argument(format!("local radius must lie in (0, 1], got {r_n}")));
        }
        let scale = r_n.powf(settings.alpha - 1.0);
        let threshold = settings.kappa * scale;
        let x_n = settings.c1 * scale;
        let mut points = Vec::with_capacity(thetas.len());
        let mut last: Option<(f64, PointTruncation)> = None;
        for &t in thetas {
            let pt = match &last {
                Some((lt, p)) if *lt == t => p.clone(),
                _ => {
                    let p = point_truncation(family, t, threshold)?;
                    last = Some((t, p.clone()));
                    p
                }
            };
            points.push(pt);
        }
        let mut worst_v2 = 0.0_f64;
        for pt in points.iter_mut() {
            pt.p = 0.5 * pt.v2 / (x_n * x_n);
            worst_v2 = worst_v2.max(pt.v2);
        }
        if let Some(pt) = points.iter().find(|pt| pt.p > 0.5) {
            return Err(Error::TruncationConstant {
                c1: settings.c1,
                p: pt.p,
                suggested: (worst_v2.sqrt() / scale * 1.01).max(settings.c1),
            });
        }
        Ok(TruncationPlan {
            points,
            thetas: thetas.to_vec(),
            fisher: thetas.iter().map(|&t| family.fisher(t)).collect(),
            alpha: settings.alpha,
            r_n,
            x_n,
            bound: 2.0 * settings.kappa + settings.c1,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn any_active(&self) -> bool {
        self.points.iter().any(|p| p.active)
    }

    /// Three-point kick: `−x_n`, `0`, `x_n` with probabilities `p`, `1 − 2p`, `p`.
    fn kick(&self, p: f64, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.random();
        if u < p {
            -self.x_n
        } else if u < 2.0 * p {
            self.x_n
        } else {
            0.0
        }
    }

    /// `ξ*_i` from raw scores `ξ_i`; one uniform is consumed per point.
    pub fn truncate(&self, raw_scores: &[f64], rng: &mut dyn RngCore) -> TruncationOutput {
        let scores = raw_scores
            .iter()
            .zip(&self.points)
            .map(|(&s, pt)| {
                let k = self.kick(pt.p, rng);
                if !pt.active {
                    return s;
                }
                let kept = if s.abs() <= pt.threshold { s } else { 0.0 };
                kept - pt.kept_mean + k
            })
            .collect();
        TruncationOutput {
            scores,
            bound: self.bound,
            alpha: self.alpha,
            variance_targets: self.fisher.clone(),
            x_n: self.x_n,
            p: self.points.iter().map(|p| p.p).collect(),
        }
    }

    /// Exact law of `ξ*_i` as sorted atoms, when the score law is discrete.
    pub fn atoms(&self, i: usize) -> Option<Vec<(f64, f64)>> {
        let pt = &self.points[i];
        let KeptLaw::Atoms(kept) = &pt.kept else {
            return None;
        };
        if !pt.active {
            return Some(kept.clone());
        }
        let mut out = Vec::with_capacity(3 * kept.len());
        for &(v, m) in kept {
            let c = v - pt.kept_mean;
            if pt.p > 0.0 {
                out.push((c - self.x_n, m * pt.p));
                out.push((c + self.x_n, m * pt.p));
            }
            out.push((c, m * (1.0 - 2.0 * pt.p)));
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(out.len());
        for (v, m) in out {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += m,
                _ => merged.push((v, m)),
            }
        }
        Some(merged)
    }

    /// `P(ξ*_i ≤ y)`.
    pub fn cdf(&self, i: usize, y: f64) -> f64 {
        let pt = &self.points[i];
        if !pt.active {
            return pt.kept.cdf(y);
        }
        let eta = |z: f64| pt.kept.cdf(z + pt.kept_mean);
        pt.p * eta(y + self.x_n) + (1.0 - 2.0 * pt.p) * eta(y) + pt.p * eta(y - self.x_n)
    }

    /// `E(ξ*_i)²` from the law of `ξ*_i` (atoms), or `E(η')² + 2p x_n²` otherwise.
    pub fn second_moment(&self, i: usize) -> f64 {
        match self.atoms(i) {
            Some(a) => a.iter().map(|(v, m)| v * v * m).sum(),
            None => {
                let pt = &self.points[i];
                pt.centered_second_moment + 2.0 * pt.p * self.x_n * self.x_n
            }
        }
    }

    pub(crate) fn kept_sd(&self, i: usize) -> f64 {
        match &self.points[i].kept {
            KeptLaw::Continuous { sd, .. } => *sd,
            KeptLaw::Atoms(a) => a.iter().map(|x| x.0 * x.0 * x.1).sum::<f64>().sqrt(),
        }
    }
}
