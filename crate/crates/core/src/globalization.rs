//! From local to global: a preliminary estimator, a block partition of the
//! design, and a randomized kernel mapping original observations to
//! synthetic Gaussian observations `Y_i ≈ Γ(f(t_i)) + ε_i`.

use std::ops::Range;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::distances::{hellinger_sq_product, DistanceKind, DistanceReport, Method};
use crate::error::{Error, Result};
use crate::experiments::{ExperimentDraw, Model, sample_original};
use crate::families::ParametricFamily;
use crate::function_space::{rate_gamma_bar, RegressionFunction, Shape};
use crate::seed::{derive_seed, stream, substream_seed};
use crate::stats::{jackknife_stderr_of_mean, mean};

/// Default `α` used for the block exponent `α′`.
pub const DEFAULT_ALPHA: f64 = 0.75;

/// [`DEFAULT_ALPHA`] when it lies in `(1/(2β), 1)`, otherwise the midpoint of that interval.
pub fn default_alpha(beta: f64) -> f64 {
    let floor = 0.5 / beta;
    if floor < DEFAULT_ALPHA {
        DEFAULT_ALPHA
    } else {
        0.5 * (floor + 1.0)
    }
}
/// Default interpolation weight `q` in `α′ = 1/(2β) + q(α − 1/(2β))`.
pub const DEFAULT_Q: f64 = 0.25;

/// Partition of the design `1..=n` into `M_n` consecutive blocks of width `1/M_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    pub n: usize,
    pub count: usize,
    /// `a_k = max{t_i ≤ k/M_n}` for `k = 1..=M_n`.
    pub boundaries: Vec<f64>,
    /// Zero-based index ranges of the blocks.
    pub ranges: Vec<Range<usize>>,
    pub delta: f64,
    pub alpha_prime: f64,
    pub q: f64,
}

impl BlockPartition {
    pub fn min_size(&self) -> usize {
        self.ranges.iter().map(|r| r.len()).min().unwrap_or(0)
    }

    pub fn max_size(&self) -> usize {
        self.ranges.iter().map(|r| r.len()).max().unwrap_or(0)
    }
}

fn partition_count(n: usize, beta: f64, alpha_prime: f64) -> Result<(f64, usize)> {
    let delta = rate_gamma_bar(n, beta, 1.0)?.powf(2.0 * alpha_prime);
    let count = if delta >= 1.0 { 1 } else { (1.0 / delta).floor() as usize };
    Ok((delta, count.max(1)))
}

/// `δ_n = γ̄_n^{2α′}`, `M_n = ⌊1/δ_n⌋` and the blocks `(a_{k−1}, a_k]`.
pub fn block_partition(n: usize, beta: f64, q: f64, alpha: f64) -> Result<BlockPartition> {
    if n < 4 {
        return Err(Error::argument(format!("block partition needs n >= 4, got {n}")));
    }
    if !(q > 0.0 && q <= 0.25) {
        return Err(Error::argument(format!("q must lie in (0, 1/4], got {q}")));
    }
    let floor = 0.5 / beta;
    if !(alpha > floor && alpha < 1.0) {
        return Err(Error::argument(format!("alpha must lie in (1/(2β), 1) = ({floor}, 1), got {alpha}")));
    }
    let alpha_prime = floor + q * (alpha - floor);
    let (delta, count) = partition_count(n, beta, alpha_prime)?;
    if count > n / 2 {
        let mut m = n + 1;
        while partition_count(m, beta, alpha_prime)?.1 > m / 2 {
            m += 1;
        }
        return Err(Error::argument(format!(
            "n = {n} is too small for beta = {beta}: {count} blocks exceed n/2; need n >= {m}"
        )));
    }
    let ranges: Vec<Range<usize>> = (0..count).map(|k| k * n / count..(k + 1) * n / count).collect();
    let boundaries = ranges.iter().map(|r| r.end as f64 / n as f64).collect();
    Ok(BlockPartition {
        n,
        count,
        boundaries,
        ranges,
        delta,
        alpha_prime,
        q,
    })
}

/// Window averages `(center, mean)` of `values` over equal windows of width
/// about `(log m / m)^{1/(2β+1)}`, `m = values.len()`.
fn window_means(design: &[f64], values: &[f64], beta: f64) -> Vec<(f64, f64)> {
    let m = values.len().max(2) as f64;
    let width = (m.ln() / m).powf(1.0 / (2.0 * beta + 1.0));
    let windows = ((1.0 / width).floor() as usize).max(1);
    let mut sums = vec![(0.0, 0usize); windows];
    for (&t, &v) in design.iter().zip(values) {
        let k = ((t * windows as f64) as usize).min(windows - 1);
        sums[k].0 += v;
        sums[k].1 += 1;
    }
    sums.iter()
        .enumerate()
        .filter(|(_, s)| s.1 > 0)
        .map(|(k, s)| ((k as f64 + 0.5) / windows as f64, s.0 / s.1 as f64))
        .collect()
}

fn clip(family: &dyn ParametricFamily, theta: f64, clipped: &mut usize) -> f64 {
    let (lo, hi) = family.working_interval();
    if theta.is_nan() || theta < lo || theta > hi {
        *clipped += 1;
        if theta.is_nan() {
            return 0.5 * (lo + hi);
        }
    }
    theta.clamp(lo, hi)
}

/// Local-average estimate `f̂` with the rate it is meant to achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct PreliminaryEstimate {
    pub f_hat: RegressionFunction,
    /// `γ̄_m` for the number of observations used.
    pub target_rate: f64,
    pub windows: usize,
    /// Window estimates moved back into the working interval.
    pub clipped: usize,
}

impl PreliminaryEstimate {
    /// `max_i |f̂(t_i) − f(t_i)|` over `grid`.
    pub fn sup_error(&self, f: &RegressionFunction, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&t| (self.f_hat.eval(t) - f.eval(t)).abs())
            .fold(0.0, f64::max)
    }
}

fn spline_estimate(
    family: &dyn ParametricFamily,
    knots: Vec<(f64, f64)>,
    m: usize,
    beta: f64,
    lipschitz: f64,
    clipped: usize,
) -> Result<PreliminaryEstimate> {
    if knots.is_empty() {
        return Err(Error::argument("no observations to estimate from"));
    }
    let windows = knots.len();
    let f_hat = RegressionFunction::new(vec![Shape::Spline(knots)], beta, lipschitz)?.within(family.working_interval());
    Ok(PreliminaryEstimate {
        f_hat,
        target_rate: rate_gamma_bar(m.max(2), beta, 1.0)?,
        windows,
        clipped,
    })
}

/// Window means of the block statistic mapped back through the mean map,
/// clipped to the working interval and linearly interpolated.
pub fn preliminary_estimate(
    family: &dyn ParametricFamily,
    design: &[f64],
    observations: &[f64],
    beta: f64,
    lipschitz: f64,
) -> Result<PreliminaryEstimate> {
    let stats: Vec<f64> = observations.iter().map(|&x| family.block_statistic(x)).collect();
    let mut clipped = 0;
    let knots = window_means(design, &stats, beta)
        .into_iter()
        .map(|(t, m)| (t, clip(family, family.mean_map_inverse(m), &mut clipped)))
        .collect();
    spline_estimate(family, knots, observations.len(), beta, lipschitz, clipped)
}

/// The same local-average estimator applied to Gaussian observations on the
/// `Γ` scale, mapped back with `Γ⁻¹`.
pub fn gaussian_scale_estimate(
    family: &dyn ParametricFamily,
    design: &[f64],
    observations: &[f64],
    beta: f64,
    lipschitz: f64,
) -> Result<PreliminaryEstimate> {
    let mut clipped = 0;
    let knots = window_means(design, observations, beta)
        .into_iter()
        .map(|(t, y)| (t, clip(family, family.gamma_inverse(y), &mut clipped)))
        .collect();
    spline_estimate(family, knots, observations.len(), beta, lipschitz, clipped)
}

/// Output of [`gaussianize`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianizedData {
    pub observations: Vec<f64>,
    pub design: Vec<f64>,
    /// Estimate from the odd half, used to transform the even half.
    pub f_hat_odd: PreliminaryEstimate,
    /// Estimate from the transformed even half, used to transform the odd half.
    pub f_hat_even: PreliminaryEstimate,
    pub partition: BlockPartition,
    pub kernel: String,
    pub split: String,
    /// Block statistics whose parameter fell outside the working interval.
    pub clipped: usize,
    /// True for a single-block partition or when some half-block holds fewer than two points.
    pub degenerate: bool,
}

impl GaussianizedData {
    /// Columnar file form with the `gaussianized` model header.
    pub fn to_draw(&self, family: &str, seed: u64) -> ExperimentDraw {
        ExperimentDraw {
            model: Model::Gaussianized,
            family: family.to_string(),
            f: self.f_hat_odd.f_hat.to_string(),
            h: None,
            seed,
            design: self.design.clone(),
            observations: self.observations.clone(),
        }
    }
}

/// `Y_i = Γ(f̂(t_i)) + (F(S_k) − avg_k Γ(f̂)) + (w_i − w̄_k)` on each block
/// `k`, where `S_k` is the mean block statistic of the selected points and
/// `w_i` are fresh standard normals.
fn block_kernel(
    family: &dyn ParametricFamily,
    draw: &ExperimentDraw,
    f_hat: &RegressionFunction,
    partition: &BlockPartition,
    parity: usize,
    out: &mut [f64],
    rng: &mut dyn RngCore,
) -> (usize, bool) {
    let mut clipped = 0;
    let mut degenerate = false;
    for range in &partition.ranges {
        let idx: Vec<usize> = range.clone().filter(|i| i % 2 == parity).collect();
        if idx.is_empty() {
            degenerate = true;
            continue;
        }
        degenerate |= idx.len() < 2;
        let k = idx.len() as f64;
        let stat = idx.iter().map(|&i| family.block_statistic(draw.observations[i])).sum::<f64>() / k;
        let theta = clip(family, family.mean_map_inverse(stat), &mut clipped);
        let stabilized = family.gamma(theta);
        let centers: Vec<f64> = idx.iter().map(|&i| family.gamma(f_hat.eval(draw.design[i]))).collect();
        let center_mean = centers.iter().sum::<f64>() / k;
        let noise: Vec<f64> = idx.iter().map(|_| StandardNormal.sample(rng)).collect();
        let noise_mean = noise.iter().sum::<f64>() / k;
        for (j, &i) in idx.iter().enumerate() {
            out[i] = centers[j] + (stabilized - center_mean) + (noise[j] - noise_mean);
        }
    }
    (clipped, degenerate)
}

/// Randomized map from an original-model draw to synthetic observations of
/// the homoscedastic Gaussian model. Only the design and the observations
/// of `draw` are read.
///
/// Odd positions (1-based) give `f̂` for the even half; the transformed even
/// half then gives the estimate used for the odd half.
pub fn gaussianize(
    family: &dyn ParametricFamily,
    draw: &ExperimentDraw,
    beta: f64,
    lipschitz: f64,
    rng: &mut dyn RngCore,
) -> Result<GaussianizedData> {
    let n = draw.n();
    if n < 4 {
        return Err(Error::argument(format!("gaussianize needs at least 4 observations, got {n}")));
    }
    draw.check_support(family)?;
    let partition = block_partition(n, beta, DEFAULT_Q, default_alpha(beta))?;
    let half = |parity: usize, v: &[f64]| -> (Vec<f64>, Vec<f64>) {
        (0..n)
            .filter(|i| i % 2 == parity)
            .map(|i| (draw.design[i], v[i]))
            .unzip()
    };
    // zero-based even positions are the odd 1-based indices
    let (t_odd, x_odd) = half(0, &draw.observations);
    let f_hat_odd = preliminary_estimate(family, &t_odd, &x_odd, beta, lipschitz)?;
    let mut y = vec![0.0; n];
    let (c1, d1) = block_kernel(family, draw, &f_hat_odd.f_hat, &partition, 1, &mut y, rng);
    let (t_even, y_even) = half(1, &y);
    let f_hat_even = gaussian_scale_estimate(family, &t_even, &y_even, beta, lipschitz)?;
    let (c2, d2) = block_kernel(family, draw, &f_hat_even.f_hat, &partition, 0, &mut y, rng);
    let single = partition.count == 1;
    Ok(GaussianizedData {
        observations: y,
        design: draw.design.clone(),
        f_hat_odd,
        f_hat_even,
        partition,
        kernel: "block-mean variance stabilization with Gaussian within-block randomization".to_string(),
        split: "odd -> even, gaussianized even -> odd".to_string(),
        clipped: c1 + c2,
        degenerate: d1 || d2 || single,
    })
}

/// Closed-form `H²` between `N(h(t_i)√I(f(t_i)), 1)` and
/// `N(Γ(f(t_i)+h(t_i)) − Γ(f(t_i)), 1)` product experiments.
pub fn homoscedastic_transform_check(
    family: &dyn ParametricFamily,
    f: &RegressionFunction,
    h: &RegressionFunction,
    n: usize,
) -> Result<DistanceReport> {
    let design = crate::function_space::design_points(n);
    let mut comps = Vec::with_capacity(n);
    for &t in &design {
        let (theta, shift) = (f.eval(t), h.eval(t));
        crate::families::fisher_info(family, theta)?;
        crate::families::fisher_info(family, theta + shift)?;
        let gamma_shift = family.gamma_increment(theta, shift);
        let linear = shift * family.fisher(theta).sqrt();
        comps.push(crate::distances::hellinger_gaussian(gamma_shift, linear));
    }
    let value = hellinger_sq_product(&comps)?.value;
    Ok(DistanceReport::new(DistanceKind::HellingerSq, Method::ClosedForm, value, None, 0)?.with_inputs(
        n,
        family.name(),
        &f.to_string(),
        &h.to_string(),
        None,
    ))
}

/// Mean bounded loss with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Risk {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskTransfer {
    pub n: usize,
    pub replicates: usize,
    /// Estimator applied to the original observations.
    pub direct: Risk,
    /// Estimator applied on the `Γ` scale to the gaussianized observations.
    pub transferred: Risk,
    /// Paired difference `direct − transferred`.
    pub difference: Risk,
}

fn risk(values: &[f64]) -> Risk {
    Risk {
        mean: mean(values),
        stderr: jackknife_stderr_of_mean(values),
    }
}

/// Paired risks of estimating `f` from original data and from its gaussianized
/// version, with loss `min(1, max_{t ∈ grid} |f̂(t) − f(t)|²)`.
pub fn risk_transfer_demo(
    family: &dyn ParametricFamily,
    f: &RegressionFunction,
    n: usize,
    grid: &[f64],
    master_seed: u64,
    replicates: usize,
) -> Result<RiskTransfer> {
    if replicates < 50 {
        return Err(Error::argument(format!("risk transfer needs at least 50 replicates, got {replicates}")));
    }
    if grid.is_empty() {
        return Err(Error::argument("loss grid is empty"));
    }
    let pairs: Vec<(f64, f64)> = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64)> {
            let seed = derive_seed(master_seed, n as u64, r as u64);
            let draw = sample_original(family, f, n, seed)?;
            let direct = preliminary_estimate(family, &draw.design, &draw.observations, f.beta, f.lipschitz)?;
            let mut rng = stream(substream_seed(seed, 1));
            let g = gaussianize(family, &draw, f.beta, f.lipschitz, &mut rng)?;
            let transferred = gaussian_scale_estimate(family, &g.design, &g.observations, f.beta, f.lipschitz)?;
            let loss = |e: &PreliminaryEstimate| e.sup_error(f, grid).powi(2).min(1.0);
            Ok((loss(&direct), loss(&transferred)))
        })
        .collect::<Result<_>>()?;
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let d: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    Ok(RiskTransfer {
        n,
        replicates,
        direct: risk(&a),
        transferred: risk(&b),
        difference: risk(&d),
    })
}
