//! Hölder balls `H(β, L)`, the parameter set `Σ^β`, shifted neighborhoods
//! and the nonparametric rates.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Points of the fixed dyadic check grid on `[0, 1]`.
pub const CHECK_GRID_POINTS: usize = 1025;

const HOLDER_SLACK: f64 = 1e-9;
const NEIGHBORHOOD_SEED: u64 = 0x5eed_cafe;
const NEIGHBORHOOD_PAIRS: usize = 4096;

/// One closed-form building block of a regression function.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Constant(f64),
    Affine { intercept: f64, slope: f64 },
    /// `amplitude · sin(2π · frequency · t + phase)`.
    Sinusoid { amplitude: f64, frequency: f64, phase: f64 },
    /// Piecewise linear through `(t, value)` knots, constant beyond the ends.
    Spline(Vec<(f64, f64)>),
}

impl Shape {
    fn value(&self, t: f64) -> f64 {
        match self {
            Shape::Constant(c) => *c,
            Shape::Affine { intercept, slope } => intercept + slope * t,
            Shape::Sinusoid { amplitude, frequency, phase } => {
                amplitude * (2.0 * PI * frequency * t + phase).sin()
            }
            Shape::Spline(k) => {
                let j = k.partition_point(|p| p.0 <= t);
                if j == 0 {
                    k[0].1
                } else if j == k.len() {
                    k[k.len() - 1].1
                } else {
                    let (a, b) = (k[j - 1], k[j]);
                    a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
                }
            }
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        match self {
            Shape::Constant(_) => 0.0,
            Shape::Affine { slope, .. } => *slope,
            Shape::Sinusoid { amplitude, frequency, phase } => {
                let w = 2.0 * PI * frequency;
                amplitude * w * (w * t + phase).cos()
            }
            Shape::Spline(k) => {
                let mut j = k.partition_point(|p| p.0 <= t);
                if j == k.len() && t <= k[k.len() - 1].0 {
                    j -= 1;
                }
                if j == 0 || j == k.len() {
                    0.0
                } else {
                    (k[j].1 - k[j - 1].1) / (k[j].0 - k[j - 1].0)
                }
            }
        }
    }

    fn scaled(&self, c: f64) -> Shape {
        match self {
            Shape::Constant(v) => Shape::Constant(c * v),
            Shape::Affine { intercept, slope } => Shape::Affine {
                intercept: c * intercept,
                slope: c * slope,
            },
            Shape::Sinusoid { amplitude, frequency, phase } => Shape::Sinusoid {
                amplitude: c * amplitude,
                frequency: *frequency,
                phase: *phase,
            },
            Shape::Spline(k) => Shape::Spline(k.iter().map(|&(t, v)| (t, c * v)).collect()),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Constant(c) => write!(f, "constant({c})"),
            Shape::Affine { intercept, slope } => write!(f, "affine({intercept}, {slope})"),
            Shape::Sinusoid { amplitude, frequency, phase } => {
                write!(f, "sinusoid({amplitude}, {frequency}, {phase})")
            }
            Shape::Spline(k) => {
                let parts: Vec<String> = k.iter().map(|(t, v)| format!("{t}:{v}")).collect();
                write!(f, "spline({})", parts.join(", "))
            }
        }
    }
}

fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s {
        "pi" => PI,
        "-pi" => -PI,
        _ => s
            .parse::<f64>()
            .map_err(|e| Error::parse(None, format!("bad number '{s}': {e}")))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(None, format!("non-finite number '{s}'")))
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s
            .find('(')
            .ok_or_else(|| Error::parse(None, format!("expected kind(args) in '{s}'")))?;
        if !s.ends_with(')') {
            return Err(Error::parse(None, format!("missing ')' in '{s}'")));
        }
        let kind = s[..open].trim();
        let inner = &s[open + 1..s.len() - 1];
        let args: Vec<&str> = inner.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
        let nums = |want: usize| -> Result<Vec<f64>> {
            if args.len() != want {
                return Err(Error::parse(
                    None,
                    format!("{kind} takes {want} arguments, got {}", args.len()),
                ));
            }
            args.iter().map(|a| parse_number(a)).collect()
        };
        match kind {
            "constant" => Ok(Shape::Constant(nums(1)?[0])),
            "affine" => {
                let v = nums(2)?;
                Ok(Shape::Affine { intercept: v[0], slope: v[1] })
            }
            "sinusoid" => {
                let v = match args.len() {
                    2 => {
                        let mut v = nums(2)?;
                        v.push(0.0);
                        v
                    }
                    _ => nums(3)?,
                };
                Ok(Shape::Sinusoid {
                    amplitude: v[0],
                    frequency: v[1],
                    phase: v[2],
                })
            }
            "spline" => {
                let mut knots = Vec::with_capacity(args.len());
                for a in &args {
                    let (t, v) = a
                        .split_once(':')
                        .ok_or_else(|| Error::parse(None, format!("spline knot '{a}' is not t:value")))?;
                    knots.push((parse_number(t)?, parse_number(v)?));
                }
                if knots.len() < 2 {
                    return Err(Error::parse(None, "spline needs at least two knots"));
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::parse(None, "spline knots must have increasing t"));
                }
                Ok(Shape::Spline(knots))
            }
            other => Err(Error::parse(None, format!("unknown function kind '{other}'"))),
        }
    }
}

/// A function `f: [0, 1] → R` given as a sum of shapes, with its declared
/// Hölder parameters and the interval its values must stay in.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFunction {
    terms: Vec<Shape>,
    pub beta: f64,
    pub lipschitz: f64,
    pub range: (f64, f64),
}

impl RegressionFunction {
    pub fn new(terms: Vec<Shape>, beta: f64, lipschitz: f64) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::argument("regression function needs at least one term"));
        }
        if !(beta > 0.5 && beta <= 2.0) {
            return Err(Error::argument(format!("beta must lie in (1/2, 2], got {beta}")));
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::argument(format!("L must be positive, got {lipschitz}")));
        }
        Ok(RegressionFunction {
            terms,
            beta,
            lipschitz,
            range: (f64::NEG_INFINITY, f64::INFINITY),
        })
    }

    pub fn parse(descriptor: &str, beta: f64, lipschitz: f64) -> Result<Self> {
        let mut terms = Vec::new();
        for part in split_top_level(descriptor) {
            terms.push(part.parse()?);
        }
        Self::new(terms, beta, lipschitz)
    }

    pub fn zero(beta: f64, lipschitz: f64) -> Result<Self> {
        Self::new(vec![Shape::Constant(0.0)], beta, lipschitz)
    }

    /// Restrict the declared range, typically to a family's working interval.
    pub fn within(mut self, range: (f64, f64)) -> Self {
        self.range = range;
        self
    }

    pub fn terms(&self) -> &[Shape] {
        &self.terms
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|s| s.value(t)).sum()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.terms.iter().map(|s| s.derivative(t)).sum()
    }

    /// Values at the design points `i/n`, `i = 1..=n`.
    pub fn on_design(&self, n: usize) -> Vec<f64> {
        design_points(n).into_iter().map(|t| self.eval(t)).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        RegressionFunction {
            terms: self.terms.iter().map(|s| s.scaled(c)).collect(),
            ..self.clone()
        }
    }

    /// `self + other`, keeping this function's parameters and range.
    pub fn plus(&self, other: &RegressionFunction) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        RegressionFunction { terms, ..self.clone() }
    }

    /// `(β₀, β₁)` with `β₀` a nonnegative integer, `β₁ ∈ (0, 1]`, `β₀ + β₁ = β`.
    pub fn holder_split(&self) -> (u32, f64) {
        if self.beta <= 1.0 {
            (0, self.beta)
        } else {
            (1, self.beta - 1.0)
        }
    }

    fn check_grid(&self) -> Vec<f64> {
        let mut g: Vec<f64> = (0..CHECK_GRID_POINTS)
            .map(|k| k as f64 / (CHECK_GRID_POINTS - 1) as f64)
            .collect();
        for s in &self.terms {
            if let Shape::Spline(k) = s {
                g.extend(k.iter().map(|p| p.0).filter(|t| (0.0..=1.0).contains(t)));
            }
        }
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    /// `sup |f|` on the check grid.
    pub fn sup_norm(&self) -> f64 {
        self.check_grid()
            .into_iter()
            .map(|t| self.eval(t).abs())
            .fold(0.0, f64::max)
    }

    /// `(min f, max f)` on the check grid.
    pub fn value_range(&self) -> (f64, f64) {
        self.check_grid()
            .into_iter()
            .map(|t| self.eval(t))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

impl fmt::Display for RegressionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" + "))
    }
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            '+' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

/// Design points `t_i = i/n`, `i = 1..=n`.
pub fn design_points(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderReport {
    /// Largest `|f^{(β₀)}(t) − f^{(β₀)}(s)| / |t − s|^{β₁}` seen.
    pub max_ratio: f64,
    pub sup_norm: f64,
    pub beta0: u32,
    pub beta1: f64,
    pub pairs_checked: usize,
    pub grid_points: usize,
    pub pass: bool,
}

/// Randomized plus dyadic-grid audit of membership in `H(β, L)`.
pub fn holder_check(f: &RegressionFunction, pair_count: usize, rng: &mut dyn RngCore) -> HolderReport {
    let (beta0, beta1) = f.holder_split();
    let d = |t: f64| if beta0 == 0 { f.eval(t) } else { f.derivative(t) };
    let ratio = |t: f64, s: f64| {
        let gap = (t - s).abs();
        if gap == 0.0 {
            0.0
        } else {
            (d(t) - d(s)).abs() / gap.powf(beta1)
        }
    };
    let grid = f.check_grid();
    let vals: Vec<f64> = grid.iter().map(|&t| d(t)).collect();
    let mut max_ratio = 0.0_f64;
    let mut pairs = 0;
    let mut step = 1;
    while step < grid.len() {
        for i in 0..grid.len() - step {
            let gap = grid[i + step] - grid[i];
            max_ratio = max_ratio.max((vals[i + step] - vals[i]).abs() / gap.powf(beta1));
            pairs += 1;
        }
        step *= 2;
    }
    for _ in 0..pair_count.max(1) {
        let (t, s): (f64, f64) = (rng.random(), rng.random());
        max_ratio = max_ratio.max(ratio(t, s));
        pairs += 1;
    }
    let sup_norm = f.sup_norm();
    let bound = f.lipschitz * (1.0 + HOLDER_SLACK);
    HolderReport {
        max_ratio,
        sup_norm,
        beta0,
        beta1,
        pairs_checked: pairs,
        grid_points: grid.len(),
        pass: max_ratio <= bound && sup_norm <= bound,
    }
}

/// Membership of `h` in `Σ_f^β(r)`: `‖h‖_∞ ≤ r` on the check grid and `f + h`
/// in the Hölder ball with values inside `f`'s declared range.
pub fn neighborhood_contains(f: &RegressionFunction, h: &RegressionFunction, r: f64) -> Result<bool> {
    if f.beta != h.beta || f.lipschitz != h.lipschitz {
        return Err(Error::argument(format!(
            "neighborhood needs shared (beta, L): ({}, {}) vs ({}, {})",
            f.beta, f.lipschitz, h.beta, h.lipschitz
        )));
    }
    if h.sup_norm() > r {
        return Ok(false);
    }
    let g = f.plus(h);
    let mut rng = ChaCha8Rng::seed_from_u64(NEIGHBORHOOD_SEED);
    if !holder_check(&g, NEIGHBORHOOD_PAIRS, &mut rng).pass {
        return Ok(false);
    }
    let (lo, hi) = g.value_range();
    Ok(lo >= f.range.0 && hi <= f.range.1)
}

/// `γ̄_n = c(β) (log n / n)^{β/(2β+1)}`.
pub fn rate_gamma_bar(n: usize, beta: f64, c_beta: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::argument(format!("rate needs n >= 2, got {n}")));
    }
    if !(beta > 0.5) || !(c_beta > 0.0) {
        return Err(Error::argument(format!(
            "rate needs beta > 1/2 and c > 0, got beta={beta}, c={c_beta}"
        )));
    }
    let nf = n as f64;
    Ok(c_beta * (nf.ln() / nf).powf(beta / (2.0 * beta + 1.0)))
}

/// `γ_n = γ̄_n (log n)^{power}` with `power ≥ 0`.
pub fn rate_gamma(n: usize, beta: f64, c_beta: f64, log_power: f64) -> Result<f64> {
    if !(log_power >= 0.0) {
        return Err(Error::argument(format!("log power must be >= 0, got {log_power}")));
    }
    Ok(rate_gamma_bar(n, beta, c_beta)? * (n as f64).ln().powf(log_power))
}

/// Local radius `r_n = c / √n`.
pub fn local_radius(n: usize, c: f64) -> f64 {
    c / (n as f64).sqrt()
}
