use std::path::Path;

use rand::{Rng, RngCore};

use super::{ParametricFamily, ScoreLaw, SupportKind};
use crate::error::{Error, Result};
use crate::quadrature::TAIL_DENSITY;

/// Tolerance on the trapezoid mass of a user-supplied table.
const TABLE_MASS_TOL: f64 = 1e-2;

/// Location family `p(x, θ) = g(x − θ)` with `g` read from a table.
///
/// Between knots `log g` is linear; beyond the first and last knot it is
/// extended with the end slopes, so `g` is positive on the whole line. The
/// interpolant is renormalized to integrate to one exactly.
#[derive(Debug, Clone)]
pub struct LocationCustom {
    knots: Vec<f64>,
    ln_g: Vec<f64>,
    /// Slope of `log g` on each of the `knots.len() + 1` pieces, tails included.
    slopes: Vec<f64>,
    /// Probability mass of each piece.
    masses: Vec<f64>,
    cumulative: Vec<f64>,
    fisher: f64,
    mean: f64,
}

fn segment_mass(g0: f64, slope: f64, width: f64) -> f64 {
    let sw = slope * width;
    if sw.abs() < 1e-8 {
        g0 * width * (1.0 + 0.5 * sw)
    } else {
        g0 * sw.exp_m1() / slope
    }
}

/// Mean offset from the left end of a piece with density `∝ e^{s t}`, `t ∈ [0, w]`.
fn segment_mean(slope: f64, width: f64) -> f64 {
    let sw = slope * width;
    if sw.abs() < 1e-5 {
        0.5 * width + slope * width * width / 12.0
    } else {
        width / (-(-sw).exp_m1()) - 1.0 / slope
    }
}

impl LocationCustom {
    /// Read a two-column table `x p(x)` (whitespace or comma separated, `#` comments).
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let loc = || Some(format!("{}:{}", path.display(), k + 1));
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(Error::parse(loc(), format!("expected 2 columns, found {}", fields.len())));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::parse(loc(), format!("'{s}': {e}")))
            };
            rows.push((parse(fields[0])?, parse(fields[1])?));
        }
        Self::from_table(&rows)
    }

    pub fn from_table(rows: &[(f64, f64)]) -> Result<Self> {
        if rows.len() < 3 {
            return Err(Error::argument("density table needs at least 3 rows"));
        }
        for w in rows.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::argument(format!(
                    "density table x values must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(x, p)) = rows.iter().find(|r| !(r.1 > 0.0 && r.1.is_finite() && r.0.is_finite())) {
            return Err(Error::argument(format!("density table needs finite x and p > 0 (row {x}, {p})")));
        }
        let trapezoid: f64 = rows
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        if (trapezoid - 1.0).abs() > TABLE_MASS_TOL {
            return Err(Error::argument(format!(
                "density table has trapezoid mass {trapezoid}, expected 1"
            )));
        }

        let knots: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut ln_g: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
        let n = knots.len();
        let inner: Vec<f64> = (0..n - 1)
            .map(|k| (ln_g[k + 1] - ln_g[k]) / (knots[k + 1] - knots[k]))
            .collect();
        let (left, right) = (inner[0], inner[n - 2]);
        if !(left > 0.0 && right < 0.0) {
            return Err(Error::argument(
                "density table must increase at its first row and decrease at its last",
            ));
        }
        let mut slopes = Vec::with_capacity(n + 1);
        slopes.push(left);
        slopes.extend_from_slice(&inner);
        slopes.push(right);

        let mass_of = |ln_g: &[f64]| -> Vec<f64> {
            let mut m = Vec::with_capacity(n + 1);
            m.push(ln_g[0].exp() / left);
            for k in 0..n - 1 {
                m.push(segment_mass(ln_g[k].exp(), inner[k], knots[k + 1] - knots[k]));
            }
            m.push(ln_g[n - 1].exp() / -right);
            m
        };
        let total: f64 = mass_of(&ln_g).iter().sum();
        for v in ln_g.iter_mut() {
            *v -= total.ln();
        }
        let masses = mass_of(&ln_g);
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cumulative.push(acc);
        }

        let fisher = slopes.iter().zip(&masses).map(|(s, m)| s * s * m).sum();
        let mut mean = masses[0] * (knots[0] - 1.0 / left) + masses[n] * (knots[n - 1] - 1.0 / right);
        for k in 0..n - 1 {
            mean += masses[k + 1] * (knots[k] + segment_mean(inner[k], knots[k + 1] - knots[k]));
        }

        Ok(LocationCustom {
            knots,
            ln_g,
            slopes,
            masses,
            cumulative,
            fisher,
            mean,
        })
    }

    /// Index of the piece containing `y`: 0 is the left tail, `knots.len()` the right tail.
    fn piece(&self, y: f64) -> usize {
        self.knots.partition_point(|&k| k <= y)
    }

    fn ln_noise_density(&self, y: f64) -> f64 {
        let j = self.piece(y);
        let (x0, l0) = if j == 0 {
            (self.knots[0], self.ln_g[0])
        } else {
            (self.knots[j - 1], self.ln_g[j - 1])
        };
        l0 + self.slopes[j] * (y - x0)
    }

    /// Mean of the noise distribution `g`.
    pub fn noise_mean(&self) -> f64 {
        self.mean
    }
}

impl ParametricFamily for LocationCustom {
    fn name(&self) -> &str {
        "location_custom"
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
        self.ln_noise_density(x - theta)
    }
    fn score(&self, x: f64, theta: f64) -> f64 {
        -self.slopes[self.piece(x - theta)]
    }
    fn fisher(&self, _theta: f64) -> f64 {
        self.fisher
    }
    fn gamma(&self, theta: f64) -> f64 {
        self.fisher.sqrt() * theta
    }
    fn gamma_increment(&self, _theta: f64, shift: f64) -> f64 {
        self.fisher.sqrt() * shift
    }
    fn gamma_inverse(&self, y: f64) -> f64 {
        y / self.fisher.sqrt()
    }
    fn gamma_anchor(&self) -> f64 {
        0.0
    }
    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> f64 {
        let total = *self.cumulative.last().expect("nonempty table");
        let v = rng.random::<f64>() * total;
        let j = self.cumulative.partition_point(|&c| c <= v).min(self.masses.len() - 1);
        // open interval avoids log(0)
        let u = 1.0 - rng.random::<f64>();
        let last = self.knots.len();
        let y = if j == 0 {
            self.knots[0] + u.ln() / self.slopes[0]
        } else if j == last {
            self.knots[last - 1] + u.ln() / self.slopes[last]
        } else {
            let (x0, w, s) = (self.knots[j - 1], self.knots[j] - self.knots[j - 1], self.slopes[j]);
            if (s * w).abs() < 1e-12 {
                x0 + u * w
            } else {
                x0 + (u * (s * w).exp_m1()).ln_1p() / s
            }
        };
        theta + y
    }
    fn integration_breaks(&self, theta: f64) -> Vec<f64> {
        let n = self.knots.len();
        let reach = |ln_end: f64, slope: f64| {
            let gap = TAIL_DENSITY.ln() - ln_end;
            if gap < 0.0 {
                gap / slope
            } else {
                0.0
            }
        };
        let lo = self.knots[0] + reach(self.ln_g[0], self.slopes[0]);
        let hi = self.knots[n - 1] + reach(self.ln_g[n - 1], self.slopes[n]);
        let mut b = Vec::with_capacity(n + 2);
        b.push(theta + lo);
        b.extend(self.knots.iter().map(|k| theta + k));
        b.push(theta + hi);
        b.dedup();
        b
    }
    fn score_law(&self, _theta: f64) -> ScoreLaw {
        let mut atoms: Vec<(f64, f64)> = self
            .slopes
            .iter()
            .zip(&self.masses)
            .map(|(s, m)| (-s, *m))
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, m) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += m,
                _ => merged.push((v, m)),
            }
        }
        ScoreLaw::Atoms(merged)
    }
    fn mean_map(&self, theta: f64) -> f64 {
        theta + self.mean
    }
    fn mean_map_inverse(&self, m: f64) -> f64 {
        m - self.mean
    }
    fn stabilize(&self, m: f64) -> f64 {
        self.gamma(m - self.mean)
    }
    fn block_coordinate(&self, x: f64, theta: f64) -> f64 {
        x - theta
    }
}
