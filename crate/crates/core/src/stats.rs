//! Small statistical helpers: medians, standard errors, normal functions and
//! Kolmogorov–Smirnov statistics.

use std::f64::consts::SQRT_2;

use statrs::function::erf::erfc_inv;

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Standard normal quantile; `p` is clamped to the open unit interval.
pub fn normal_quantile(p: f64) -> f64 {
    let p = p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    let mut z = -SQRT_2 * erfc_inv(2.0 * p);
    // polish with Newton steps on the accurate distribution function
    for _ in 0..2 {
        let dens = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if dens < 1e-300 {
            break;
        }
        let err = if z < 0.0 {
            normal_cdf(z) - p
        } else {
            (1.0 - p) - normal_cdf(-z)
        };
        z -= err / dens;
    }
    z
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (denominator `R − 1`).
pub fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)).sqrt()
}

/// Jackknife standard error of the sample mean (equal to `sd/√R`).
pub fn jackknife_stderr_of_mean(values: &[f64]) -> f64 {
    let r = values.len() as f64;
    let total: f64 = values.iter().sum();
    let loo: Vec<f64> = values.iter().map(|v| (total - v) / (r - 1.0)).collect();
    let m = mean(&loo);
    ((r - 1.0) / r * loo.iter().map(|x| (x - m).powi(2)).sum::<f64>()).sqrt()
}

/// `sup_x |F_n(x) − F(x)|` for a continuous reference distribution function.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample statistic `sup_x |F_n(x) − G_m(x)|`; ties are handled exactly.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0_f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic Kolmogorov constant `c(α) = √(−ln(α/2)/2)`.
pub fn kolmogorov_constant(alpha: f64) -> f64 {
    (-(0.5 * alpha).ln() / 2.0).sqrt()
}

/// One-sample critical value with Stephens' finite-sample correction.
pub fn ks_critical_one_sample(n: usize, alpha: f64) -> f64 {
    let r = (n as f64).sqrt();
    kolmogorov_constant(alpha) / (r + 0.12 + 0.11 / r)
}

pub fn ks_critical_two_sample(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    kolmogorov_constant(alpha) * ((n + m) / (n * m)).sqrt()
}
