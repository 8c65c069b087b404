use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use lecam_equiv::experiments::{sample_original, standard_f, ExperimentDraw};
use lecam_equiv::families::{check_regularity, family_by_name, LocationCustom, SharedFamily, ThetaGrid};
use lecam_equiv::function_space::RegressionFunction;
use lecam_equiv::globalization::gaussianize;
use lecam_equiv::harness::{default_out_dir, run_study, HarnessError, StudyConfig};
use lecam_equiv::seed::{stream, substream_seed};
use lecam_equiv::Error;

#[derive(Parser)]
#[command(name = "lecam-equiv", version, about = "Gaussian approximation studies for regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study from a configuration file.
    Run {
        config: PathBuf,
        /// Output directory (defaults to the configured one, then $LECAM_EQUIV_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Override the configured master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print Fisher information and Γ on a grid and audit the regularity conditions.
    CheckFamily {
        name: String,
        /// Tabulated density for location_custom.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 11)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
    },
    /// Map an original-model draw file to the homoscedastic Gaussian model.
    Gaussianize {
        draw: PathBuf,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        lipschitz: f64,
    },
    /// Draw one original-model dataset.
    Sample {
        family: String,
        #[arg(long)]
        n: usize,
        /// Regression function descriptor (the family's standard function when absent).
        #[arg(long)]
        f: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        lipschitz: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Grid size for the regularity audit, fine enough to hold pairs within `ε`.
const REGULARITY_POINTS: usize = 41;

fn resolve_family(name: &str, file: Option<&PathBuf>) -> Result<SharedFamily, Error> {
    match file {
        Some(path) if name == "location_custom" => Ok(Arc::new(LocationCustom::from_file(path)?)),
        _ => family_by_name(name),
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(config: PathBuf, out: Option<PathBuf>, jobs: Option<usize>, seed: Option<u64>) -> Result<i32, HarnessError> {
    let mut config = StudyConfig::read(&config)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let out = out.unwrap_or_else(|| default_out_dir(&config));
    let output = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| HarnessError::Config(Error::Argument(format!("--jobs {j}: {e}"))))?
            .install(|| run_study(&config, &out))?,
        None => run_study(&config, &out)?,
    };
    let result = &output.result;
    for m in &result.medians {
        println!("n={:<8} median {} = {:.6e}", m.n, m.statistic, m.value);
    }
    for v in &result.verdicts {
        println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    println!("wrote {} and {}", output.rows_path.display(), output.summary_path.display());
    Ok(result.exit_code())
}

fn check_family(name: &str, file: Option<&PathBuf>, points: usize, beta: f64) -> Result<i32, Error> {
    let family = resolve_family(name, file)?;
    let (lo, hi) = family.working_interval();
    let grid = ThetaGrid::new(lo, hi, points);
    println!("theta,fisher,gamma");
    for t in grid.values() {
        println!("{t},{},{}", family.fisher(t), family.gamma(t));
    }
    let audit_grid = ThetaGrid::new(lo, hi, REGULARITY_POINTS);
    let report = check_regularity(family.as_ref(), &audit_grid, (hi - lo) / 10.0, beta)?;
    println!(
        "R1 {} (sup {:.3e}, delta {:.3}); R2 {} (sup {:.3e}, delta {:.3}); R3 {} (I in [{:.4}, {:.4}])",
        report.r1_pass,
        report.r1_sup_estimate,
        report.delta_r1,
        report.r2_pass,
        report.r2_sup_estimate,
        report.delta_r2,
        report.r3_pass,
        report.r3_bounds.0,
        report.r3_bounds.1
    );
    Ok(if report.all_pass() { 0 } else { 1 })
}

fn gaussianize_file(draw: &PathBuf, out: Option<&PathBuf>, seed: u64, beta: f64, lipschitz: f64) -> Result<i32, Error> {
    let input = ExperimentDraw::read(draw)?;
    let family = family_by_name(&input.family)?;
    let mut rng = stream(substream_seed(seed, 1));
    let g = gaussianize(family.as_ref(), &input, beta, lipschitz, &mut rng)?;
    if g.degenerate {
        eprintln!("warning: degenerate block partition for n={}", input.n());
    }
    if g.clipped > 0 {
        eprintln!("warning: {} block estimates clipped to the working interval", g.clipped);
    }
    emit(&g.to_draw(&input.family, seed).to_text(), out)?;
    Ok(0)
}

fn sample(family: &str, n: usize, f: Option<&str>, beta: f64, lipschitz: f64, seed: u64, out: Option<&PathBuf>) -> Result<i32, Error> {
    let family = family_by_name(family)?;
    let f = match f {
        Some(desc) => RegressionFunction::parse(desc, beta, lipschitz)?,
        None => standard_f(family.as_ref())?,
    };
    emit(&sample_original(family.as_ref(), &f, n, seed)?.to_text(), out)?;
    Ok(0)
}

fn main() -> ExitCode {
    let outcome = match Cli::parse().command {
        Command::Run { config, out, jobs, seed } => run(config, out, jobs, seed),
        Command::CheckFamily {
            name,
            file,
            points,
            beta,
        } => check_family(&name, file.as_ref(), points, beta).map_err(HarnessError::Config),
        Command::Gaussianize {
            draw,
            out,
            seed,
            beta,
            lipschitz,
        } => gaussianize_file(&draw, out.as_ref(), seed, beta, lipschitz).map_err(HarnessError::Config),
        Command::Sample {
            family,
            n,
            f,
            beta,
            lipschitz,
            seed,
            out,
        } => sample(&family, n, f.as_deref(), beta, lipschitz, seed, out.as_ref()).map_err(HarnessError::Config),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
