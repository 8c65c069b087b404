//! The three experiments (original, local Gaussian, global Gaussian), their
//! samplers and log-likelihood ratios, and the terms of the stochastic
//! expansion of the original log-likelihood.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::families::{ensure_in_theta, expectation, ParametricFamily, SupportKind};
use crate::function_space::{design_points, neighborhood_contains, RegressionFunction, Shape};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Original,
    LocalGaussian,
    GlobalGaussian,
    Gaussianized,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Original => "original",
            Model::LocalGaussian => "local-gaussian",
            Model::GlobalGaussian => "global-gaussian",
            Model::Gaussianized => "gaussianized",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "original" => Ok(Model::Original),
            "local-gaussian" => Ok(Model::LocalGaussian),
            "global-gaussian" => Ok(Model::GlobalGaussian),
            "gaussianized" => Ok(Model::Gaussianized),
            other => Err(Error::parse(None, format!("unknown model '{other}'"))),
        }
    }
}

/// One realized dataset on the design `t_i = i/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDraw {
    pub model: Model,
    pub family: String,
    pub f: String,
    pub h: Option<String>,
    pub seed: u64,
    pub design: Vec<f64>,
    pub observations: Vec<f64>,
}

impl ExperimentDraw {
    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# family: {}\n# model: {}\n# n: {}\n# seed: {}\n# f: {}\n",
            self.family,
            self.model,
            self.n(),
            self.seed,
            self.f
        );
        if let Some(h) = &self.h {
            out.push_str(&format!("# h: {h}\n"));
        }
        out.push_str("# columns: i, t_i, x_i\n");
        for (i, (t, x)) in self.design.iter().zip(&self.observations).enumerate() {
            out.push_str(&format!("{}, {t}, {x}\n", i + 1));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header = std::collections::HashMap::new();
        let mut design = Vec::new();
        let mut observations = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            let loc = || Some(format!("line {}", k + 1));
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((key, value)) = rest.split_once(':') {
                    header.insert(key.trim().to_string(), value.trim().to_string());
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(Error::parse(loc(), format!("expected 3 columns, found {}", cols.len())));
            }
            let i: usize = cols[0]
                .parse()
                .map_err(|e| Error::parse(loc(), format!("index '{}': {e}", cols[0])))?;
            if i != design.len() + 1 {
                return Err(Error::parse(loc(), format!("index {i} out of sequence")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::parse(loc(), format!("'{s}': {e}")))
            };
            design.push(num(cols[1])?);
            observations.push(num(cols[2])?);
        }
        let get = |key: &str| {
            header
                .get(key)
                .cloned()
                .ok_or_else(|| Error::parse(None, format!("missing '# {key}:' header")))
        };
        let n: usize = get("n")?
            .parse()
            .map_err(|e| Error::parse(None, format!("n header: {e}")))?;
        if n != observations.len() {
            return Err(Error::parse(
                None,
                format!("header says n={n} but {} rows were read", observations.len()),
            ));
        }
        if design.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::parse(None, "design points must be strictly increasing"));
        }
        Ok(ExperimentDraw {
            model: get("model")?.parse()?,
            family: get("family")?,
            f: get("f")?,
            h: header.get("h").cloned(),
            seed: get("seed")?
                .parse()
                .map_err(|e| Error::parse(None, format!("seed header: {e}")))?,
            design,
            observations,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Checks that every observation lies in the support of `family`.
    pub fn check_support(&self, family: &dyn ParametricFamily) -> Result<()> {
        let kind = family.support_kind();
        for (i, &x) in self.observations.iter().enumerate() {
            let ok = x.is_finite()
                && match kind {
                    SupportKind::ContinuousReal => true,
                    SupportKind::NonnegativeInteger => x >= 0.0 && x.fract() == 0.0,
                    SupportKind::Binary => x == 0.0 || x == 1.0,
                };
            if !ok {
                return Err(Error::argument(format!(
                    "observation {} = {x} outside the support of {}",
                    i + 1,
                    family.name()
                )));
            }
        }
        Ok(())
    }
}

fn parameters_on_design(family: &dyn ParametricFamily, f: &RegressionFunction, n: usize) -> Result<Vec<f64>> {
    let thetas = f.on_design(n);
    for &t in &thetas {
        ensure_in_theta(family, t)?;
    }
    Ok(thetas)
}

/// `X_i ~ p(·, θ_i)` independently.
pub fn draw_observations(family: &dyn ParametricFamily, thetas: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
    thetas.iter().map(|&t| family.sample(t, rng)).collect()
}

pub fn standard_normals(n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn sample_original(
    family: &dyn ParametricFamily,
    f: &RegressionFunction,
    n: usize,
    seed: u64,
) -> Result<ExperimentDraw> {
    let thetas = parameters_on_design(family, f, n)?;
    let mut rng = seed::stream(seed);
    Ok(ExperimentDraw {
        model: Model::Original,
        family: family.name().to_string(),
        f: f.to_string(),
        h: None,
        seed,
        design: design_points(n),
        observations: draw_observations(family, &thetas, &mut rng),
    })
}

/// `Y_i = h(t_i) + I(f(t_i))^{-1/2} ε_i`, with `h` required to lie in `Σ_f^β(radius)`.
pub fn sample_local_gaussian(
    family: &dyn ParametricFamily,
    f: &RegressionFunction,
    h: &RegressionFunction,
    n: usize,
    radius: f64,
    seed: u64,
) -> Result<ExperimentDraw> {
    if !neighborhood_contains(f, h, radius)? {
        return Err(Error::argument(format!("h = {h} is not in the radius-{radius} neighborhood of f = {f}")));
    }
    let thetas = parameters_on_design(family, f, n)?;
    let mut rng = seed::stream(seed);
    let eps = standard_normals(n, &mut rng);
    let observations = design_points(n)
        .iter()
        .zip(&thetas)
        .zip(&eps)
        .map(|((&t, &th), &e)| h.eval(t) + e / family.fisher(th).sqrt())
        .collect();
    Ok(ExperimentDraw {
        model: Model::LocalGaussian,
        family: family.name().to_string(),
        f: f.to_string(),
        h: Some(h.to_string()),
        seed,
        design: design_points(n),
        observations,
    })
}

/// `Y_i = Γ(f(t_i)) + ε_i`.
pub fn sample_global_gaussian(
    family: &dyn ParametricFamily,
    f: &RegressionFunction,
    n: usize,
    seed: u64,
) -> Result<ExperimentDraw> {
    let thetas = parameters_on_design(family, f, n)?;
    let mut rng = seed::stream(seed);
    let eps = standard_normals(n, &mut rng);
    Ok(ExperimentDraw {
        model: Model::GlobalGaussian,
        family: family.name().to_string(),
        f: f.to_string(),
        h: None,
        seed,
        design: design_points(n),
        observations: thetas.iter().zip(&eps).map(|(&t, &e)| family.gamma(t) + e).collect(),
    })
}

fn shifted(family: &dyn ParametricFamily, f: &RegressionFunction, h: &RegressionFunction, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let fv = parameters_on_design(family, f, n)?;
    let hv: Vec<f64> = design_points(n).into_iter().map(|t| h.eval(t)).collect();
    for (a, b) in fv.iter().zip(&hv) {
        ensure_in_theta(family, a + b)?;
    }
    Ok((fv, hv))
}

/// `Σ_i log p(X_i, θ_i + h_i) − log p(X_i, θ_i)` for observations `xs`.
pub fn loglik_ratio_points(family: &dyn ParametricFamily, xs: &[f64], thetas: &[f64], shifts: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for ((&x, &t), &h) in xs.iter().zip(thetas).zip(shifts) {
        if h == 0.0 {
            continue;
        }
        if family.density(x, t) == 0.0 {
            return Err(Error::Singularity { x, theta: t });
        }
        let v = family.log_ratio(x, t, t + h);
        if !v.is_finite() {
            return Err(Error::Singularity { x, theta: t + h });
        }
        total += v;
    }
    Ok(total)
}

/// `log dP^n_{f+h} / dP^n_f` at the observations of `draw`.
pub fn loglik_ratio_original(
    family: &dyn ParametricFamily,
    f: &RegressionFunction,
    h: &RegressionFunction,
    draw: &ExperimentDraw,
) -> Result<f64> {
    let (fv, hv) = shifted(family, f, h, draw.n())?;
    loglik_ratio_points(family, &draw.observations, &fv, &hv)
}

/// `log dQ_{f,h} / dQ_{f,0} = Σ I_i (h_i Y_i − h_i²/2)` in the local Gaussian experiment.
pub fn loglik_ratio_local_gaussian(
    family: &dyn ParametricFamily,
    f: &RegressionFunction,
    h: &RegressionFunction,
    draw: &ExperimentDraw,
) -> Result<f64> {
    let (fv, hv) = shifted(family, f, h, draw.n())?;
    Ok(fv
        .iter()
        .zip(&hv)
        .zip(&draw.observations)
        .map(|((&t, &h), &y)| family.fisher(t) * (h * y - 0.5 * h * h))
        .sum())
}

/// Terms of the expansion of `log dP^n_{f+h}/dP^n_f`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaseTerms {
    /// `Σ h_i l̇(X_i, θ_i)`.
    pub linear: f64,
    /// `½ Σ h_i² I(θ_i)`.
    pub quadratic: f64,
    pub exact_loglik: f64,
    /// `exact − linear + quadratic`.
    pub remainder: f64,
    /// `Σ (√z_i − 1) − E(√z_i − 1)`.
    pub xn: f64,
    /// `½ Σ E(√z_i − 1)²`.
    pub vn: f64,
    /// `exact − 2 xn + 4 vn`.
    pub rho_prop: f64,
}

/// Per-point quantities for fixed `(f, h, n)`, reused across draws.
#[derive(Debug, Clone)]
pub struct LaseContext<'a> {
    family: &'a dyn ParametricFamily,
    thetas: Vec<f64>,
    shifts: Vec<f64>,
    fisher: Vec<f64>,
    /// `E_θ(√z − 1)` per point.
    root_mean: Vec<f64>,
    /// `E_θ(√z − 1)²` per point.
    root_sq_mean: Vec<f64>,
}

fn root_ratio_minus_one(family: &dyn ParametricFamily, x: f64, theta: f64, u: f64) -> f64 {
    (0.5 * family.log_ratio(x, theta, u)).exp_m1()
}

impl<'a> LaseContext<'a> {
    pub fn new(family: &'a dyn ParametricFamily, f: &RegressionFunction, h: &RegressionFunction, n: usize) -> Result<Self> {
        let (thetas, shifts) = shifted(family, f, h, n)?;
        Self::from_points(family, thetas, shifts)
    }

    pub fn from_points(family: &'a dyn ParametricFamily, thetas: Vec<f64>, shifts: Vec<f64>) -> Result<Self> {
        let mut root_mean = Vec::with_capacity(thetas.len());
        let mut root_sq_mean = Vec::with_capacity(thetas.len());
        let mut cache: Option<(f64, f64, f64, f64)> = None;
        for (&t, &h) in thetas.iter().zip(&shifts) {
            let (m1, m2) = match cache {
                _ if h == 0.0 => (0.0, 0.0),
                Some((ct, ch, a, b)) if ct == t && ch == h => (a, b),
                _ => {
                    let u = t + h;
                    let a = expectation(family, t, |x| root_ratio_minus_one(family, x, t, u))?;
                    let b = expectation(family, t, |x| root_ratio_minus_one(family, x, t, u).powi(2))?;
                    cache = Some((t, h, a, b));
                    (a, b)
                }
            };
            root_mean.push(m1);
            root_sq_mean.push(m2);
        }
        let fisher = thetas.iter().map(|&t| family.fisher(t)).collect();
        Ok(LaseContext {
            family,
            thetas,
            shifts,
            fisher,
            root_mean,
            root_sq_mean,
        })
    }

    pub fn n(&self) -> usize {
        self.thetas.len()
    }

    pub fn family(&self) -> &'a dyn ParametricFamily {
        self.family
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

    pub fn root_means(&self) -> &[f64] {
        &self.root_mean
    }

    pub fn root_sq_means(&self) -> &[f64] {
        &self.root_sq_mean
    }

    /// `½ Σ h_i² I(θ_i)`.
    pub fn quadratic(&self) -> f64 {
        0.5 * self.shifts.iter().zip(&self.fisher).map(|(h, i)| h * h * i).sum::<f64>()
    }

    pub fn vn(&self) -> f64 {
        0.5 * self.root_sq_mean.iter().sum::<f64>()
    }

    /// `⅛ Σ h_i² I(θ_i)`, the limit of `V_n`.
    pub fn vn_target(&self) -> f64 {
        0.25 * self.quadratic()
    }

    pub fn terms(&self, xs: &[f64]) -> Result<LaseTerms> {
        if xs.len() != self.n() {
            return Err(Error::argument(format!(
                "draw has {} observations, context expects {}",
                xs.len(),
                self.n()
            )));
        }
        let exact = loglik_ratio_points(self.family, xs, &self.thetas, &self.shifts)?;
        let mut linear = 0.0;
        let mut xn = 0.0;
        for (k, &x) in xs.iter().enumerate() {
            let (t, h) = (self.thetas[k], self.shifts[k]);
            if h == 0.0 {
                continue;
            }
            linear += h * self.family.score(x, t);
            xn += root_ratio_minus_one(self.family, x, t, t + h) - self.root_mean[k];
        }
        let quadratic = self.quadratic();
        let vn = self.vn();
        Ok(LaseTerms {
            linear,
            quadratic,
            exact_loglik: exact,
            remainder: exact - linear + quadratic,
            xn,
            vn,
            rho_prop: exact - 2.0 * xn + 4.0 * vn,
        })
    }
}

pub fn lase_terms(
    family: &dyn ParametricFamily,
    f: &RegressionFunction,
    h: &RegressionFunction,
    draw: &ExperimentDraw,
) -> Result<LaseTerms> {
    LaseContext::new(family, f, h, draw.n())?.terms(&draw.observations)
}

/// `(1/n) Σ_i E[(n^{α/2} ξ_i)² 1{|n^{α/2} ξ_i| ≥ ε√n}]` with `ξ_i = l̇(X_i, f(t_i))`.
pub fn lindeberg_sum(family: &dyn ParametricFamily, f: &RegressionFunction, n: usize, alpha: f64, epsilon: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::argument("lindeberg sum needs n >= 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) || !(epsilon > 0.0) {
        return Err(Error::argument(format!(
            "lindeberg sum needs 0 < alpha < 1 and epsilon > 0, got {alpha}, {epsilon}"
        )));
    }
    if epsilon.is_infinite() {
        return Ok(0.0);
    }
    let thetas = parameters_on_design(family, f, n)?;
    let nf = n as f64;
    let scale = nf.powf(alpha / 2.0);
    let level = epsilon * nf.sqrt();
    let mut total = 0.0;
    let mut last: Option<(f64, f64)> = None;
    for &t in &thetas {
        let v = match last {
            Some((lt, lv)) if lt == t => lv,
            _ => {
                let v = expectation(family, t, |x| {
                    let s = scale * family.score(x, t);
                    if s.abs() >= level {
                        s * s
                    } else {
                        0.0
                    }
                })?;
                last = Some((t, v));
                v
            }
        };
        total += v;
    }
    Ok(total / nf)
}

/// Lipschitz constant of the standard test function for each family.
pub fn standard_lipschitz(family: &str) -> f64 {
    match family {
        "poisson" | "gaussian_scale" => 4.0,
        _ => 2.0,
    }
}

/// Affine regression function inside the family's working interval, with `β = 1`.
pub fn standard_f(family: &dyn ParametricFamily) -> Result<RegressionFunction> {
    let (intercept, slope) = match family.name() {
        "bernoulli" => (0.45, 0.1),
        "poisson" => (2.0, 1.0),
        "gaussian_scale" => (1.5, 0.5),
        _ => (0.4, 0.2),
    };
    Ok(RegressionFunction::new(vec![Shape::Affine { intercept, slope }], 1.0, standard_lipschitz(family.name()))?
        .within(family.working_interval()))
}

/// `h(t) = radius · L/(2π+1) · sin(2πt)`, a member of `Σ_f^β(radius)` for the standard `f`.
pub fn standard_h(f: &RegressionFunction, radius: f64) -> Result<RegressionFunction> {
    let amplitude = radius * f.lipschitz / (2.0 * PI + 1.0);
    RegressionFunction::new(
        vec![Shape::Sinusoid {
            amplitude,
            frequency: 1.0,
            phase: 0.0,
        }],
        f.beta,
        f.lipschitz,
    )
}

#[cfg(test)]
mod tests;
