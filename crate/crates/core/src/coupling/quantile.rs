//! Per-coordinate quantile coupling of the bounded scores with Gaussians:
//! `ξ̃_i = F_i⁻¹(Φ(ε_i))` where `F_i` is the law of `ξ*_i`.

use super::truncation::TruncationPlan;
use crate::stats::normal_cdf;

/// Generalized inverse of the law of `ξ*_i` for every point of a plan.
#[derive(Debug, Clone)]
pub struct ScoreQuantiles<'a> {
    plan: &'a TruncationPlan,
    /// Cumulative atom tables `(value, F(value))` for discrete laws.
    tables: Vec<Option<Vec<(f64, f64)>>>,
}

impl<'a> ScoreQuantiles<'a> {
    pub fn new(plan: &'a TruncationPlan) -> Self {
        let mut tables: Vec<Option<Vec<(f64, f64)>>> = Vec::with_capacity(plan.len());
        for i in 0..plan.len() {
            let reuse = i > 0 && plan.thetas[i - 1] == plan.thetas[i];
            if reuse {
                let prev = tables[i - 1].clone();
                tables.push(prev);
                continue;
            }
            tables.push(plan.atoms(i).map(|atoms| {
                let mut acc = 0.0;
                atoms
                    .into_iter()
                    .map(|(v, m)| {
                        acc += m;
                        (v, acc)
                    })
                    .collect()
            }));
        }
        ScoreQuantiles { plan, tables }
    }

    /// `inf{y : F_i(y) ≥ u}`.
    ///
    /// Since `u = Φ(ε)` has a continuous law, the generalized inverse already
    /// reproduces the atoms of `F_i` with their exact masses and ties between
    /// equal values of `F_i` occur with probability zero, so no randomized
    /// tie-splitting is needed.
    pub fn quantile(&self, i: usize, u: f64) -> f64 {
        match &self.tables[i] {
            Some(table) => {
                let k = table.partition_point(|&(_, c)| c < u);
                table[k.min(table.len() - 1)].0
            }
            None => self.bisect(i, u),
        }
    }

    fn bisect(&self, i: usize, u: f64) -> f64 {
        let plan = self.plan;
        let pt = &plan.points[i];
        let span = if pt.active {
            pt.threshold + pt.kept_mean.abs() + plan.x_n
        } else {
            40.0 * plan.kept_sd(i)
        };
        let (mut lo, mut hi) = (-span - 1.0, span + 1.0);
        if plan.cdf(i, lo) >= u {
            return lo;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-13 * (1.0 + mid.abs()) {
                break;
            }
            if plan.cdf(i, mid) >= u {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// `ξ̃_i` for a standard normal `ε_i`.
    pub fn couple(&self, i: usize, epsilon: f64) -> f64 {
        self.quantile(i, normal_cdf(epsilon))
    }
}
