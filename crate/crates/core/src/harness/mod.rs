//! Batch driver: runs a configured study over a grid of sample sizes, writes
//! CSV tables and a summary of per-n medians with trend verdicts.
//!
//! Every CSV starts with one `#` line naming the crate version and the study;
//! all remaining bytes are a deterministic function of the configuration.

mod config;
mod studies;
mod verdict;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::error::Error;

pub use config::{RegularityGrid, StudyConfig, StudyKind, Verdicts};
pub use verdict::{Median, Verdict, TIE_TOLERANCE};

/// Environment variable consulted for the output directory when none is configured.
pub const OUT_DIR_ENV: &str = "LECAM_EQUIV_OUT";

pub const SUMMARY_CSV_HEADER: &str = "record,n,statistic,value,pass,detail";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(#[source] Error),

    #[error(
        "pipeline failed at n={}, replicate={}, seed={seed}: {source}",
        n.map(|n| n.to_string()).unwrap_or_else(|| "-".into()),
        replicate.map(|r| r.to_string()).unwrap_or_else(|| "-".into())
    )]
    Pipeline {
        n: Option<usize>,
        replicate: Option<usize>,
        seed: u64,
        #[source]
        source: Error,
    },

    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit code: 2 for configuration and output problems, 3 for pipeline failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Output { .. } => 2,
            HarnessError::Pipeline { .. } => 3,
        }
    }
}

impl From<Error> for HarnessError {
    fn from(e: Error) -> Self {
        HarnessError::Config(e)
    }
}

/// One CSV table: column header and formatted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: String,
    pub rows: Vec<String>,
}

impl Table {
    fn new(header: impl Into<String>) -> Self {
        Table {
            header: header.into(),
            rows: Vec::new(),
        }
    }

    pub fn write(&self, version_line: &str, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "{version_line}")?;
        writeln!(out, "{}", self.header)?;
        for row in &self.rows {
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

/// Results of a study before anything is written.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub kind: StudyKind,
    pub seed: u64,
    pub rows: Table,
    pub medians: Vec<Median>,
    pub verdicts: Vec<Verdict>,
}

impl StudyResult {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// 0 when every verdict passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn version_line(&self) -> String {
        format!("# lecam-equiv {} study={}", env!("CARGO_PKG_VERSION"), self.kind)
    }

    pub fn summary(&self) -> Table {
        let mut t = Table::new(SUMMARY_CSV_HEADER);
        t.rows.extend(self.medians.iter().map(Median::csv_row));
        t.rows.extend(self.verdicts.iter().map(Verdict::csv_row));
        t
    }
}

/// Files produced by [`run_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    pub result: StudyResult,
    pub rows_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Output directory: the configured one, else `$LECAM_EQUIV_OUT`, else `./lecam-out`.
pub fn default_out_dir(config: &StudyConfig) -> PathBuf {
    config
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("lecam-out"))
}

/// Run the study in memory.
pub fn compute_study(config: &StudyConfig) -> Result<StudyResult, HarnessError> {
    config.validate()?;
    studies::run(config)
}

/// Run the study and write `<kind>.csv` and `<kind>-summary.csv` into `out_dir`.
pub fn run_study(config: &StudyConfig, out_dir: &Path) -> Result<StudyOutput, HarnessError> {
    let result = compute_study(config)?;
    let output_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Output { path, source }
    };
    fs::create_dir_all(out_dir).map_err(output_err(out_dir))?;
    let rows_path = out_dir.join(format!("{}.csv", result.kind));
    let summary_path = out_dir.join(format!("{}-summary.csv", result.kind));
    let version = result.version_line();
    for (table, path) in [(&result.rows, &rows_path), (&result.summary(), &summary_path)] {
        let mut buf = Vec::new();
        table.write(&version, &mut buf).map_err(output_err(path))?;
        fs::write(path, buf).map_err(output_err(path))?;
    }
    Ok(StudyOutput {
        result,
        rows_path,
        summary_path,
    })
}

#[cfg(test)]
mod tests;
