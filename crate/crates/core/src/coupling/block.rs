//! Block coupling: the Gaussian scores of a block are built from the exact
//! law of the block sum of the observations, so block partial sums of the
//! scores and of their Gaussian counterparts move together.

use std::ops::Range;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::families::{BlockSumLaw, ParametricFamily};
use crate::stats::normal_quantile;

/// Contiguous blocks of roughly `factor · n^{2/3}` indices covering `0..n`.
pub fn block_ranges(n: usize, factor: f64) -> Vec<Range<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let len = (factor * (n as f64).powf(2.0 / 3.0)).round().max(1.0) as usize;
    let count = (n / len).max(1);
    (0..count).map(|j| j * n / count..(j + 1) * n / count).collect()
}

#[derive(Debug, Clone)]
enum SumLaw {
    Lattice {
        offset: u64,
        pmf: Vec<f64>,
        /// `P(T < offset + k)`.
        below: Vec<f64>,
        /// `P(T > offset + k)`.
        above: Vec<f64>,
    },
    ChiSquare(usize),
}

impl SumLaw {
    fn from_law(law: BlockSumLaw) -> Self {
        match law {
            BlockSumLaw::ChiSquare(k) => SumLaw::ChiSquare(k),
            BlockSumLaw::Lattice { offset, pmf } => {
                let mut below = Vec::with_capacity(pmf.len());
                let mut acc = 0.0;
                for &m in &pmf {
                    below.push(acc);
                    acc += m;
                }
                let mut above = vec![0.0; pmf.len()];
                let mut acc = 0.0;
                for k in (0..pmf.len()).rev() {
                    above[k] = acc;
                    acc += pmf[k];
                }
                SumLaw::Lattice {
                    offset,
                    pmf,
                    below,
                    above,
                }
            }
        }
    }

    /// Standard normal variable with `Φ(z) = F(t⁻) + V·P(T = t)`, computed from
    /// whichever tail is smaller.
    fn gaussianize(&self, t: f64, v: f64) -> f64 {
        let (lower, upper) = match self {
            SumLaw::ChiSquare(k) => {
                let a = *k as f64 / 2.0;
                let x = (t / 2.0).max(0.0);
                (gamma_lr(a, x), gamma_ur(a, x))
            }
            SumLaw::Lattice {
                offset,
                pmf,
                below,
                above,
            } => {
                let idx = (t.round() - *offset as f64).clamp(0.0, (pmf.len() - 1) as f64) as usize;
                let m = pmf[idx];
                (below[idx] + v * m, above[idx] + (1.0 - v) * m)
            }
        };
        let tiny = f64::MIN_POSITIVE;
        if lower <= upper {
            normal_quantile(lower.max(tiny))
        } else {
            -normal_quantile(upper.max(tiny))
        }
    }
}

/// Exact block-sum laws for one `(f, n)`.
#[derive(Debug, Clone)]
pub struct BlockCoupler {
    ranges: Vec<Range<usize>>,
    laws: Vec<SumLaw>,
}

impl BlockCoupler {
    /// `None` when the family has no exact block-sum law.
    pub fn new(family: &dyn ParametricFamily, thetas: &[f64], factor: f64) -> Option<Self> {
        let ranges = block_ranges(thetas.len(), factor);
        let laws = ranges
            .iter()
            .map(|r| family.block_sum_law(&thetas[r.clone()]).map(SumLaw::from_law))
            .collect::<Option<Vec<_>>>()?;
        Some(BlockCoupler { ranges, laws })
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    /// Gaussian scores `ζ_i ~ N(0, I_i)`, independent across `i`, coupled to
    /// the observations through the block sums.
    pub fn couple(
        &self,
        family: &dyn ParametricFamily,
        xs: &[f64],
        thetas: &[f64],
        fisher: &[f64],
        rng: &mut dyn RngCore,
    ) -> Vec<f64> {
        let mut zetas = vec![0.0; xs.len()];
        for (range, law) in self.ranges.iter().zip(&self.laws) {
            let t: f64 = range.clone().map(|i| family.block_coordinate(xs[i], thetas[i])).sum();
            let v: f64 = rng.random();
            let info: f64 = fisher[range.clone()].iter().sum();
            let block_sum = info.sqrt() * law.gaussianize(t, v);
            let mut w_sum = 0.0;
            for i in range.clone() {
                let z: f64 = rng.sample(StandardNormal);
                zetas[i] = fisher[i].sqrt() * z;
                w_sum += zetas[i];
            }
            let gap = block_sum - w_sum;
            for i in range.clone() {
                zetas[i] += fisher[i] / info * gap;
            }
        }
        zetas
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_cover_everything_once() {
        for n in [1usize, 7, 256, 1000, 4096] {
            let r = block_ranges(n, 0.3);
            assert_eq!(r.first().unwrap().start, 0);
            assert_eq!(r.last().unwrap().end, n);
            for w in r.windows(2) {
                assert_eq!(w[0].end, w[1].start);
            }
            let lens: Vec<usize> = r.iter().map(|x| x.len()).collect();
            let (lo, hi) = (lens.iter().min().unwrap(), lens.iter().max().unwrap());
            assert!(hi - lo <= 1 || r.len() == 1);
        }
        assert_eq!(block_ranges(4096, 0.3)[0].len(), 77);
    }

    #[test]
    fn chi_square_tails_are_accurate() {
        // P(χ²₂ ≤ x) = 1 − e^{−x/2}.
        for x in [0.01, 0.5, 2.0, 9.0, 40.0] {
            let lower = gamma_lr(1.0, x / 2.0);
            let upper = gamma_ur(1.0, x / 2.0);
            assert!((lower + (-x / 2.0f64).exp_m1()).abs() < 1e-14, "{x}");
            assert!((upper / (-x / 2.0f64).exp() - 1.0).abs() < 1e-12, "{x}");
        }
        let law = SumLaw::ChiSquare(2);
        let z = law.gaussianize(2.0 * std::f64::consts::LN_2, 0.3);
        assert!(z.abs() < 1e-12);
    }

    #[test]
    fn lattice_transform_is_uniform_on_atoms() {
        let law = SumLaw::from_law(BlockSumLaw::Lattice {
            offset: 3,
            pmf: vec![0.25, 0.5, 0.25],
        });
        let z = law.gaussianize(4.0, 0.5);
        assert!(z.abs() < 1e-12);
        let z = law.gaussianize(3.0, 0.0);
        assert!(z < -30.0);
        let z = law.gaussianize(5.0, 0.5);
        assert!((z - normal_quantile(0.875)).abs() < 1e-12);
    }
}
