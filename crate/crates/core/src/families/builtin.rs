use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use super::{BlockSumLaw, ParametricFamily, ScoreLaw, SupportKind};
use crate::quadrature::TAIL_DENSITY;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Bound on the neglected tail mass when enumerating a discrete support.
pub(crate) const SUM_TAIL: f64 = 1e-17;

/// Half-width `w` (in units of `scale`) beyond which an `N(0, scale²)` density is below the tail level.
fn normal_tail_width(scale: f64) -> f64 {
    let arg = 1.0 / (TAIL_DENSITY * scale * (2.0 * PI).sqrt());
    if arg > 1.0 {
        (2.0 * arg.ln()).sqrt()
    } else {
        1.0
    }
}

fn normal_breaks(center: f64, scale: f64) -> Vec<f64> {
    let w = normal_tail_width(scale);
    let mut b = vec![-w, 0.0, w];
    for k in [1.0, 2.0, 4.0, 6.0] {
        if k < w {
            b.push(k);
            b.push(-k);
        }
    }
    b.sort_by(f64::total_cmp);
    b.into_iter().map(|z| center + scale * z).collect()
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Poisson(λ) pmf on `[offset, offset + len)`, covering all but `SUM_TAIL` of the mass.
fn poisson_table(lambda: f64) -> (u64, Vec<f64>) {
    if lambda == 0.0 {
        return (0, vec![1.0]);
    }
    let sd = lambda.sqrt();
    let lo = (lambda - 12.0 * sd - 40.0).floor().max(0.0) as u64;
    let ln_pmf = |t: u64| (t as f64) * lambda.ln() - lambda - ln_gamma(t as f64 + 1.0);
    let mut pmf = Vec::new();
    let mut t = lo;
    loop {
        let p = ln_pmf(t).exp();
        pmf.push(p);
        // Σ_{y>t} p(y) ≤ p(t)·r/(1−r) with r = λ/(t+1), once t+1 > λ
        let r = lambda / (t as f64 + 2.0);
        if (t as f64) > lambda && p * r / (1.0 - r) < SUM_TAIL {
            break;
        }
        t += 1;
    }
    (lo, pmf)
}

/// Binary observations with success probability `θ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bernoulli;

impl ParametricFamily for Bernoulli {
    fn name(&self) -> &str {
        "bernoulli"
    }
    fn theta_interval(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn working_interval(&self) -> (f64, f64) {
        (0.05, 0.95)
    }
    fn support_kind(&self) -> SupportKind {
        SupportKind::Binary
    }
    fn log_density(&self, x: f64, theta: f64) -> f64 {
        if x == 1.0 {
            theta.ln()
        } else if x == 0.0 {
            (-theta).ln_1p()
        } else {
            f64::NEG_INFINITY
        }
    }
    fn score(&self, x: f64, theta: f64) -> f64 {
        (x - theta) / (theta * (1.0 - theta))
    }
    fn fisher(&self, theta: f64) -> f64 {
        1.0 / (theta * (1.0 - theta))
    }
    fn gamma(&self, theta: f64) -> f64 {
        2.0 * theta.sqrt().asin()
    }
    fn gamma_inverse(&self, y: f64) -> f64 {
        (0.5 * y.clamp(0.0, PI)).sin().powi(2)
    }
    fn gamma_anchor(&self) -> f64 {
        0.0
    }
    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> f64 {
        if rng.random::<f64>() < theta {
            1.0
        } else {
            0.0
        }
    }
    fn support_points(&self, _theta: f64) -> Option<Vec<f64>> {
        Some(vec![0.0, 1.0])
    }
    fn score_law(&self, theta: f64) -> ScoreLaw {
        ScoreLaw::Atoms(vec![(-1.0 / (1.0 - theta), 1.0 - theta), (1.0 / theta, theta)])
    }
    fn mean_map(&self, theta: f64) -> f64 {
        theta
    }
    fn mean_map_inverse(&self, m: f64) -> f64 {
        m
    }
    fn stabilize(&self, m: f64) -> f64 {
        2.0 * m.clamp(0.0, 1.0).sqrt().asin()
    }
    fn block_sum_law(&self, thetas: &[f64]) -> Option<BlockSumLaw> {
        // Poisson-binomial distribution of the success count
        let mut pmf = vec![1.0];
        for &p in thetas {
            let mut next = vec![0.0; pmf.len() + 1];
            for (t, &q) in pmf.iter().enumerate() {
                next[t] += q * (1.0 - p);
                next[t + 1] += q * p;
            }
            pmf = next;
        }
        Some(BlockSumLaw::Lattice { offset: 0, pmf })
    }
}

/// Counts with mean `θ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Poisson;

impl ParametricFamily for Poisson {
    fn name(&self) -> &str {
        "poisson"
    }
    fn theta_interval(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn working_interval(&self) -> (f64, f64) {
        (0.1, 10.0)
    }
    fn support_kind(&self) -> SupportKind {
        SupportKind::NonnegativeInteger
    }
    fn log_density(&self, x: f64, theta: f64) -> f64 {
        if x < 0.0 || x.fract() != 0.0 {
            return f64::NEG_INFINITY;
        }
        let xlnt = if x == 0.0 { 0.0 } else { x * theta.ln() };
        xlnt - theta - ln_gamma(x + 1.0)
    }
    fn log_ratio(&self, x: f64, theta: f64, u: f64) -> f64 {
        if x < 0.0 || x.fract() != 0.0 {
            return f64::NAN;
        }
        let xl = if x == 0.0 { 0.0 } else { x * (u / theta).ln() };
        xl - (u - theta)
    }
    fn score(&self, x: f64, theta: f64) -> f64 {
        x / theta - 1.0
    }
    fn fisher(&self, theta: f64) -> f64 {
        1.0 / theta
    }
    fn gamma(&self, theta: f64) -> f64 {
        2.0 * theta.sqrt()
    }
    fn gamma_increment(&self, theta: f64, shift: f64) -> f64 {
        2.0 * shift / ((theta + shift).sqrt() + theta.sqrt())
    }
    fn gamma_inverse(&self, y: f64) -> f64 {
        (0.5 * y.max(0.0)).powi(2)
    }
    fn gamma_anchor(&self) -> f64 {
        0.0
    }
    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> f64 {
        rand_distr::Poisson::new(theta)
            .expect("positive Poisson mean")
            .sample(rng)
    }
    fn support_points(&self, theta: f64) -> Option<Vec<f64>> {
        let (lo, pmf) = poisson_table(theta);
        Some((0..pmf.len() as u64).map(|k| (lo + k) as f64).collect())
    }
    fn score_law(&self, theta: f64) -> ScoreLaw {
        let (lo, pmf) = poisson_table(theta);
        ScoreLaw::Atoms(
            pmf.iter()
                .enumerate()
                .map(|(k, &p)| (((lo + k as u64) as f64) / theta - 1.0, p))
                .collect(),
        )
    }
    fn mean_map(&self, theta: f64) -> f64 {
        theta
    }
    fn mean_map_inverse(&self, m: f64) -> f64 {
        m
    }
    fn stabilize(&self, m: f64) -> f64 {
        2.0 * m.max(0.0).sqrt()
    }
    fn block_sum_law(&self, thetas: &[f64]) -> Option<BlockSumLaw> {
        let (offset, pmf) = poisson_table(thetas.iter().sum());
        Some(BlockSumLaw::Lattice { offset, pmf })
    }
}

/// Centered normal observations with standard deviation `θ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianScale;

impl ParametricFamily for GaussianScale {
    fn name(&self) -> &str {
        "gaussian_scale"
    }
    fn theta_interval(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn working_interval(&self) -> (f64, f64) {
        (0.1, 10.0)
    }
    fn support_kind(&self) -> SupportKind {
        SupportKind::ContinuousReal
    }
    fn log_density(&self, x: f64, theta: f64) -> f64 {
        -LN_SQRT_2PI - theta.ln() - x * x / (2.0 * theta * theta)
    }
    fn log_ratio(&self, x: f64, theta: f64, u: f64) -> f64 {
        (theta / u).ln() - 0.5 * x * x * (1.0 / (u * u) - 1.0 / (theta * theta))
    }
    fn score(&self, x: f64, theta: f64) -> f64 {
        (x * x / (theta * theta) - 1.0) / theta
    }
    fn fisher(&self, theta: f64) -> f64 {
        2.0 / (theta * theta)
    }
    fn gamma(&self, theta: f64) -> f64 {
        SQRT_2 * theta.ln()
    }
    fn gamma_increment(&self, theta: f64, shift: f64) -> f64 {
        SQRT_2 * (shift / theta).ln_1p()
    }
    fn gamma_inverse(&self, y: f64) -> f64 {
        (y / SQRT_2).exp()
    }
    fn gamma_anchor(&self) -> f64 {
        1.0
    }
    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        theta * z
    }
    fn integration_breaks(&self, theta: f64) -> Vec<f64> {
        normal_breaks(0.0, theta)
    }
    fn score_law(&self, theta: f64) -> ScoreLaw {
        // l̇ ≤ v  ⇔  X²/θ² ≤ 1 + θv, and X²/θ² ~ χ²₁
        ScoreLaw::Continuous {
            cdf: Arc::new(move |v: f64| {
                let c = 1.0 + theta * v;
                if c <= 0.0 {
                    0.0
                } else {
                    libm::erf((0.5 * c).sqrt())
                }
            }),
            sd: SQRT_2 / theta,
            gaussian: false,
        }
    }
    fn block_statistic(&self, x: f64) -> f64 {
        x * x
    }
    fn mean_map(&self, theta: f64) -> f64 {
        theta * theta
    }
    fn mean_map_inverse(&self, m: f64) -> f64 {
        m.max(0.0).sqrt()
    }
    fn stabilize(&self, m: f64) -> f64 {
        m.ln() / SQRT_2
    }
    fn block_coordinate(&self, x: f64, theta: f64) -> f64 {
        (x / theta).powi(2)
    }
    fn block_sum_law(&self, thetas: &[f64]) -> Option<BlockSumLaw> {
        Some(BlockSumLaw::ChiSquare(thetas.len()))
    }
}

/// `X = θ + η` with standard normal noise `η`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocationNormal;

impl ParametricFamily for LocationNormal {
    fn name(&self) -> &str {
        "location_normal"
    }
    fn theta_interval(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn working_interval(&self) -> (f64, f64) {
        (-10.0, 10.0)
    }
    fn support_kind(&self) -> SupportKind {
        SupportKind::ContinuousReal
    }
    fn log_density(&self, x: f64, theta: f64) -> f64 {
        let z = x - theta;
        -LN_SQRT_2PI - 0.5 * z * z
    }
    fn log_ratio(&self, x: f64, theta: f64, u: f64) -> f64 {
        let d = u - theta;
        d * (x - theta) - 0.5 * d * d
    }
    fn score(&self, x: f64, theta: f64) -> f64 {
        x - theta
    }
    fn fisher(&self, _theta: f64) -> f64 {
        1.0
    }
    fn gamma(&self, theta: f64) -> f64 {
        theta
    }
    fn gamma_increment(&self, _theta: f64, shift: f64) -> f64 {
        shift
    }
    fn gamma_inverse(&self, y: f64) -> f64 {
        y
    }
    fn gamma_anchor(&self) -> f64 {
        0.0
    }
    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        theta + z
    }
    fn integration_breaks(&self, theta: f64) -> Vec<f64> {
        normal_breaks(theta, 1.0)
    }
    fn score_law(&self, _theta: f64) -> ScoreLaw {
        ScoreLaw::Continuous {
            cdf: Arc::new(std_normal_cdf),
            sd: 1.0,
            gaussian: true,
        }
    }
    fn gaussian_scores(&self) -> bool {
        true
    }
    fn mean_map(&self, theta: f64) -> f64 {
        theta
    }
    fn mean_map_inverse(&self, m: f64) -> f64 {
        m
    }
    fn stabilize(&self, m: f64) -> f64 {
        m
    }
    fn block_coordinate(&self, x: f64, theta: f64) -> f64 {
        x - theta
    }
}
