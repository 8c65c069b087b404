use crate::distances::csv_field;
use crate::stats::median;

use super::Verdicts;

/// Steps between consecutive medians smaller than this count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Median {
    pub n: usize,
    pub statistic: String,
    pub value: f64,
}

impl Median {
    pub fn csv_row(&self) -> String {
        format!("median,{},{},{},,", self.n, csv_field(&self.statistic), self.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub(crate) fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        }
    }

    pub fn csv_row(&self) -> String {
        format!("verdict,,{},,{},{}", csv_field(&self.name), self.pass, csv_field(&self.detail))
    }
}

/// Per-n medians of `(n, value)` observations, in first-seen order of `n`.
pub(crate) fn medians_by_n(statistic: &str, obs: &[(usize, f64)]) -> Vec<Median> {
    let mut ns: Vec<usize> = obs.iter().map(|o| o.0).collect();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let vals: Vec<f64> = obs.iter().filter(|o| o.0 == n).map(|o| o.1).collect();
            Median {
                n,
                statistic: statistic.to_string(),
                value: median(&vals),
            }
        })
        .collect()
}

/// Trend checks on one statistic's medians, as configured.
pub(crate) fn trend_verdicts(settings: &Verdicts, medians: &[Median]) -> Vec<Verdict> {
    let mut out = Vec::new();
    let Some((first, last)) = medians.first().zip(medians.last()) else {
        return out;
    };
    let stat = &first.statistic;
    if settings.decreasing {
        let bad: Vec<String> = medians
            .windows(2)
            .filter(|w| w[1].value - w[0].value >= 0.0 && (w[1].value - w[0].value).abs() > TIE_TOLERANCE)
            .map(|w| format!("{}->{}", w[0].n, w[1].n))
            .collect();
        let detail = if bad.is_empty() {
            format!("median {stat} decreasing in n")
        } else {
            format!("median {stat} not decreasing at {}", bad.join(" "))
        };
        out.push(Verdict::new("decreasing", bad.is_empty(), detail));
    }
    if let Some(drop) = settings.min_drop {
        let achieved = if first.value > 0.0 { 1.0 - last.value / first.value } else { 0.0 };
        out.push(Verdict::new(
            "min_drop",
            achieved >= drop,
            format!("relative drop {achieved:.4} from n={} to n={} (required {drop})", first.n, last.n),
        ));
    }
    if let Some(bound) = settings.max_final {
        out.push(Verdict::new(
            "max_final",
            last.value < bound,
            format!("median {stat} at n={} is {:.6e} (bound {bound})", last.n, last.value),
        ));
    }
    out
}

/// All estimates within three standard errors of zero.
pub(crate) fn zero_verdict(estimates: &[(usize, f64, f64)]) -> Verdict {
    let worst = estimates
        .iter()
        .filter(|e| e.1 > 3.0 * e.2 + TIE_TOLERANCE)
        .map(|e| format!("n={}: {:.3e} ± {:.3e}", e.0, e.1, e.2))
        .collect::<Vec<_>>();
    let detail = if worst.is_empty() {
        format!("all {} estimates within 3 stderr of zero", estimates.len())
    } else {
        worst.join("; ")
    };
    Verdict::new("zero", worst.is_empty(), detail)
}
