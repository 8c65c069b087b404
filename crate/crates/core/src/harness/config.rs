//! Study configuration: flat `key = value` lines grouped under `[section]`
//! headers, with `#` comments.
//!
//! ```text
//! [study]
//! kind = local-hellinger
//! n = 2^8, 2^10, 2^12
//! replicates = 400
//! batches = 20
//! seed = 20240611
//!
//! [family]
//! name = bernoulli
//!
//! [verdicts]
//! decreasing = true
//! min_drop = 0.3
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::coupling::{CcSettings, CouplingScheme, CouplingSettings};
use crate::error::{Error, Result};
use crate::experiments::{standard_f, standard_lipschitz};
use crate::families::{family_by_name, LocationCustom, ParametricFamily, SharedFamily};
use crate::function_space::RegressionFunction;
use crate::globalization::{default_alpha, DEFAULT_Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    LocalHellinger,
    CcAudit,
    Globalize,
    RiskTransfer,
    ConditionAudit,
    HomoscedasticCheck,
}

impl StudyKind {
    pub const ALL: [StudyKind; 6] = [
        StudyKind::LocalHellinger,
        StudyKind::CcAudit,
        StudyKind::Globalize,
        StudyKind::RiskTransfer,
        StudyKind::ConditionAudit,
        StudyKind::HomoscedasticCheck,
    ];
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyKind::LocalHellinger => "local-hellinger",
            StudyKind::CcAudit => "cc-audit",
            StudyKind::Globalize => "globalize",
            StudyKind::RiskTransfer => "risk-transfer",
            StudyKind::ConditionAudit => "condition-audit",
            StudyKind::HomoscedasticCheck => "homoscedastic-check",
        })
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StudyKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s.trim())
            .ok_or_else(|| Error::argument(format!("unknown study kind '{}'", s.trim())))
    }
}

/// Pass/fail checks evaluated on per-n medians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdicts {
    /// Medians strictly decreasing in `n`, steps within `1e-12` counting as ties.
    pub decreasing: bool,
    /// Required relative drop from the first to the last median.
    pub min_drop: Option<f64>,
    /// Upper bound on the last median.
    pub max_final: Option<f64>,
    /// Every estimate within three standard errors of zero.
    pub zero: bool,
    /// Minimum fraction of passing replicates (globalize).
    pub min_pass_fraction: f64,
}

impl Default for Verdicts {
    fn default() -> Self {
        Verdicts {
            decreasing: false,
            min_drop: None,
            max_final: None,
            zero: false,
            min_pass_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityGrid {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub points: usize,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub family: String,
    pub family_file: Option<PathBuf>,
    /// `None` selects the family's standard test function.
    pub f: Option<String>,
    /// `None` selects the standard shift for the study.
    pub h: Option<String>,
    pub beta: f64,
    pub lipschitz: Option<f64>,
    pub c_beta: f64,
    pub q: f64,
    pub alpha: Option<f64>,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub batches: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub coupling: CouplingSettings,
    pub audit: CcSettings,
    pub regularity: RegularityGrid,
    pub verdicts: Verdicts,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            kind: StudyKind::LocalHellinger,
            family: String::new(),
            family_file: None,
            f: None,
            h: None,
            beta: 1.0,
            lipschitz: None,
            c_beta: 1.0,
            q: DEFAULT_Q,
            alpha: None,
            n_grid: Vec::new(),
            replicates: 100,
            batches: 1,
            seed: 0,
            out_dir: None,
            coupling: CouplingSettings::default(),
            audit: CcSettings::default(),
            regularity: RegularityGrid {
                lower: None,
                upper: None,
                points: 21,
                epsilon: None,
            },
            verdicts: Verdicts::default(),
        }
    }
}

fn parse_num<T: FromStr>(loc: &str, key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| Error::parse(Some(loc.to_string()), format!("{key} = '{v}': {e}")))
}

fn parse_bool(loc: &str, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::parse(Some(loc.to_string()), format!("{key} = '{v}': expected true or false"))),
    }
}

/// An integer or a power `b^k`.
fn parse_size(loc: &str, v: &str) -> Result<usize> {
    if let Some((b, k)) = v.split_once('^') {
        let b: usize = parse_num(loc, "n", b.trim())?;
        let k: u32 = parse_num(loc, "n", k.trim())?;
        b.checked_pow(k)
            .ok_or_else(|| Error::parse(Some(loc.to_string()), format!("n = {v} overflows")))
    } else {
        parse_num(loc, "n", v)
    }
}

impl StudyConfig {
    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut c = StudyConfig::default();
        let mut section = String::new();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let loc = format!("{origin}:{}", k + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(Some(loc.clone()), format!("expected 'key = value', found '{line}'")))?;
            let (key, v) = (key.trim(), value.trim());
            let full = format!("{section}.{key}");
            if let Some(prev) = seen.insert(full.clone(), k + 1) {
                return Err(Error::parse(Some(loc), format!("{full} already set on line {prev}")));
            }
            match full.as_str() {
                "study.kind" => c.kind = v.parse().map_err(|e: Error| Error::parse(Some(loc.clone()), e.to_string()))?,
                "study.n" => {
                    c.n_grid = v.split(',').map(|s| parse_size(&loc, s.trim())).collect::<Result<_>>()?;
                }
                "study.replicates" => c.replicates = parse_num(&loc, key, v)?,
                "study.batches" => c.batches = parse_num(&loc, key, v)?,
                "study.seed" => c.seed = parse_num(&loc, key, v)?,
                "study.out" => c.out_dir = Some(PathBuf::from(v)),
                "family.name" => c.family = v.to_string(),
                "family.file" => c.family_file = Some(PathBuf::from(v)),
                "functions.f" => c.f = Some(v.to_string()),
                "functions.h" => c.h = (v != "standard").then(|| v.to_string()),
                "functions.beta" => c.beta = parse_num(&loc, key, v)?,
                "functions.lipschitz" => c.lipschitz = Some(parse_num(&loc, key, v)?),
                "functions.c_beta" => c.c_beta = parse_num(&loc, key, v)?,
                "functions.q" => c.q = parse_num(&loc, key, v)?,
                "functions.alpha" => c.alpha = Some(parse_num(&loc, key, v)?),
                "coupling.scheme" => {
                    c.coupling.scheme = match v {
                        "auto" => None,
                        s => Some(s.parse::<CouplingScheme>().map_err(|e| Error::parse(Some(loc.clone()), e.to_string()))?),
                    }
                }
                "coupling.radius" => c.coupling.radius_const = parse_num(&loc, key, v)?,
                "coupling.kappa" => c.coupling.truncation.kappa = parse_num(&loc, key, v)?,
                "coupling.c1" => c.coupling.truncation.c1 = parse_num(&loc, key, v)?,
                "coupling.block_factor" => c.coupling.block_factor = parse_num(&loc, key, v)?,
                "audit.alpha1" => c.audit.alpha1 = parse_num(&loc, key, v)?,
                "audit.epsilon" => c.audit.epsilon = parse_num(&loc, key, v)?,
                "audit.c1" => c.audit.c1 = parse_num(&loc, key, v)?,
                "regularity.lower" => c.regularity.lower = Some(parse_num(&loc, key, v)?),
                "regularity.upper" => c.regularity.upper = Some(parse_num(&loc, key, v)?),
                "regularity.points" => c.regularity.points = parse_num(&loc, key, v)?,
                "regularity.epsilon" => c.regularity.epsilon = Some(parse_num(&loc, key, v)?),
                "verdicts.decreasing" => c.verdicts.decreasing = parse_bool(&loc, key, v)?,
                "verdicts.min_drop" => c.verdicts.min_drop = Some(parse_num(&loc, key, v)?),
                "verdicts.max_final" => c.verdicts.max_final = Some(parse_num(&loc, key, v)?),
                "verdicts.zero" => c.verdicts.zero = parse_bool(&loc, key, v)?,
                "verdicts.min_pass_fraction" => c.verdicts.min_pass_fraction = parse_num(&loc, key, v)?,
                _ => return Err(Error::parse(Some(loc), format!("unknown key '{full}'"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.family.is_empty() {
            return Err(Error::argument("family.name is required"));
        }
        if self.kind != StudyKind::ConditionAudit {
            if self.n_grid.is_empty() {
                return Err(Error::argument("study.n needs at least one sample size"));
            }
            if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::argument("study.n must be strictly increasing"));
            }
            if self.replicates < 10 {
                return Err(Error::argument(format!("study.replicates must be at least 10, got {}", self.replicates)));
            }
        }
        if self.batches == 0 {
            return Err(Error::argument("study.batches must be positive"));
        }
        if !(self.beta > 0.5 && self.beta <= 2.0) {
            return Err(Error::argument(format!("beta must lie in (1/2, 2], got {}", self.beta)));
        }
        Ok(())
    }

    pub fn resolve_family(&self) -> Result<SharedFamily> {
        match (self.family.as_str(), &self.family_file) {
            ("location_custom", Some(path)) => Ok(std::sync::Arc::new(LocationCustom::from_file(path)?)),
            ("location_custom", None) => Err(Error::argument("location_custom needs family.file")),
            (name, _) => family_by_name(name),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz.unwrap_or_else(|| standard_lipschitz(&self.family))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or_else(|| default_alpha(self.beta))
    }

    pub fn resolve_f_for(&self, family: &dyn ParametricFamily) -> Result<RegressionFunction> {
        match &self.f {
            None if self.beta == 1.0 && self.lipschitz.is_none() => standard_f(family),
            None => Err(Error::argument("functions.f is required unless beta = 1 with the standard L")),
            Some(desc) => Ok(RegressionFunction::parse(desc, self.beta, self.lipschitz())?
                .within(family.working_interval())),
        }
    }

    /// Explicit `h`, if one was configured.
    pub fn resolve_h(&self) -> Result<Option<RegressionFunction>> {
        self.h
            .as_deref()
            .map(|d| RegressionFunction::parse(d, self.beta, self.lipschitz()))
            .transpose()
    }
}
