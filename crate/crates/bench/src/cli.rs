//! Argument definitions and command implementations of the `nzs` binary.

use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use nzs_core::diagnostics::{deviation_gain, potential_gap, ResidualMethod, DEFAULT_ASCENT_STEPS};
use nzs_core::game::JointPoint;
use nzs_core::instances::{gen_sparse_experiment, reformulate_bilinear};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::instance_file::InstanceFile;
use crate::run::{run_method, Method, SolveRecord, DEFAULT_EPS, DEFAULT_MAX_ITER};
use crate::sweep::{run_sweep, summarize, summary_csv, table_csv, RunManifest, Scale, SweepConfig, Table};

#[derive(Debug, Parser)]
#[command(name = "nzs", version, about = "Near-zero-sum game solvers and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random sparse payoff instance.
    Generate(GenerateArgs),
    /// Solve one instance at one transaction fee.
    Solve(SolveArgs),
    /// Sweep fees, seeds and methods and write CSV tables.
    Bench(BenchArgs),
    /// Report the potential gap and deviation gain of a point.
    Gap(GapArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub m: usize,
    #[arg(long, default_value_t = 100_000)]
    pub nnz: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    /// Scale the matrix to unit spectral norm.
    #[arg(long, num_args = 0..=1, default_value_t = true, default_missing_value = "true", action = ArgAction::Set)]
    pub normalize: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub instance: PathBuf,
    /// Transaction fee as a fraction, or a percentage such as `0.03%`.
    #[arg(long, default_value = "0", value_parser = parse_fee)]
    pub rho: f64,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub table: Table,
    #[arg(long, value_enum, default_value = "desk")]
    pub scale: Scale,
    /// Comma-separated seeds; defaults to 0, 111, ..., 999.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Comma-separated fees; defaults to the table's grid.
    #[arg(long = "rho-list", value_delimiter = ',', value_parser = parse_fee)]
    pub rho_list: Option<Vec<f64>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Directory receiving `table.csv`, `summary.csv` and `manifest.json`.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// JSON file with `x` and `y` arrays; solve reports qualify.
    #[arg(long)]
    pub point: PathBuf,
    #[arg(long, default_value = "0", value_parser = parse_fee)]
    pub rho: f64,
    #[arg(long, default_value_t = DEFAULT_ASCENT_STEPS)]
    pub steps: usize,
}

/// Accepts `0.0003` or `0.03%`.
pub fn parse_fee(s: &str) -> std::result::Result<f64, String> {
    let (num, scale) = match s.trim().strip_suffix('%') {
        Some(p) => (p, 0.01),
        None => (s.trim(), 1.0),
    };
    let v: f64 = num.parse().map_err(|e| format!("invalid fee {s:?}: {e}"))?;
    let v = v * scale;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("fee {s:?} outside [0, 1]"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PointFile {
    x: Vec<f64>,
    y: Vec<f64>,
}

/// Output of the `gap` command. The potential is that of the convex
/// reformulation; the deviation gain is measured in the original game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapOutput {
    pub rho: f64,
    pub delta_lower: f64,
    pub delta_upper: f64,
    pub deviation_gain: f64,
    pub gain_exact: bool,
}

pub fn generate(args: &GenerateArgs) -> Result<InstanceFile> {
    let e = gen_sparse_experiment(args.n, args.m, args.nnz, args.seed, args.mu, args.nu, args.normalize)
        .map_err(|e| BenchError::Usage(e.to_string()))?;
    let file = InstanceFile::from_experiment(&e, args.normalize);
    file.write(&args.out)?;
    Ok(file)
}

/// Writes the report, then fails with [`BenchError::NotConverged`] if the
/// solve did not converge.
pub fn solve(args: &SolveArgs) -> Result<SolveRecord> {
    let inst = InstanceFile::read(&args.instance)?;
    if !(args.eps > 0.0) {
        return Err(BenchError::Usage("eps must be positive".into()));
    }
    let record = run_method(args.method, &inst.experiment(), args.rho, args.eps, args.max_iter)?;
    let json = serde_json::to_string_pretty(&record).expect("report serializes");
    match &args.out {
        Some(p) => write_text(p, &json)?,
        None => println!("{json}"),
    }
    if !record.converged {
        return Err(BenchError::NotConverged {
            method: args.method.to_string(),
            iterations: record.iterations,
        });
    }
    Ok(record)
}

pub struct BenchOutput {
    pub manifest: RunManifest,
    pub table: String,
    pub summary: String,
}

/// Runs the sweep and writes its three output files. Failed cells do not
/// stop the sweep; they are listed in the manifest.
pub fn bench(args: &BenchArgs, command_line: Vec<String>) -> Result<BenchOutput> {
    let mut cfg = SweepConfig::new(args.table, args.scale);
    if let Some(s) = &args.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(r) = &args.rho_list {
        cfg.rhos = r.clone();
    }
    if let Some(m) = &args.methods {
        cfg.methods = m.clone();
    }
    cfg.eps = args.eps;
    cfg.max_iter = args.max_iter;
    let result = run_sweep(&cfg)?;
    let table = table_csv(&result.cells);
    let summary = summary_csv(&summarize(&result.cells));
    let manifest = RunManifest::new(command_line, &result);
    std::fs::create_dir_all(&args.out_dir).map_err(|e| BenchError::io(&args.out_dir, e))?;
    write_text(&args.out_dir.join("table.csv"), &table)?;
    write_text(&args.out_dir.join("summary.csv"), &summary)?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&args.out_dir.join("manifest.json"), &json)?;
    Ok(BenchOutput {
        manifest,
        table,
        summary,
    })
}

pub fn gap(args: &GapArgs) -> Result<GapOutput> {
    let inst = InstanceFile::read(&args.instance)?;
    let text = std::fs::read_to_string(&args.point).map_err(|e| BenchError::io(&args.point, e))?;
    let p: PointFile = serde_json::from_str(&text).map_err(|source| BenchError::Json {
        path: args.point.display().to_string(),
        source,
    })?;
    let z = JointPoint::from_vecs(p.x, p.y).map_err(|e| BenchError::Usage(e.to_string()))?;
    let base = inst.experiment().game(args.rho)?;
    let original = base.to_game()?;
    if z.dims() != (original.dim_x(), original.dim_y()) || !original.is_feasible(&z) {
        return Err(BenchError::Usage("point is not a feasible strategy pair for this instance".into()));
    }
    let reformulated = reformulate_bilinear(&base)?.to_game()?;
    let bounds = potential_gap(&reformulated, &z, args.steps)?;
    let (gain, method) = deviation_gain(&original, &z)?;
    Ok(GapOutput {
        rho: args.rho,
        delta_lower: bounds.lower,
        delta_upper: bounds.upper,
        deviation_gain: gain,
        gain_exact: method == ResidualMethod::ExactLmo,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: Cli, command_line: Vec<String>) -> i32 {
    let outcome = match &cli.command {
        Command::Generate(a) => generate(a).map(|f| {
            eprintln!("wrote {} ({} x {}, {} entries)", a.out.display(), f.meta.m, f.meta.n, f.meta.nnz);
            0
        }),
        Command::Solve(a) => solve(a).map(|_| 0),
        Command::Bench(a) => bench(a, command_line).map(|out| {
            print!("{}", out.summary);
            if out.manifest.failures.is_empty() {
                0
            } else {
                for f in &out.manifest.failures {
                    eprintln!("failed cell {f}");
                }
                1
            }
        }),
        Command::Gap(a) => gap(a).map(|g| {
            println!("{}", serde_json::to_string_pretty(&g).expect("gap serializes"));
            0
        }),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fees_parse_as_fractions_or_percentages() {
        assert_eq!(parse_fee("0").unwrap(), 0.0);
        assert!((parse_fee("0.03%").unwrap() - 3e-4).abs() < 1e-18);
        assert_eq!(parse_fee("0.01").unwrap(), 0.01);
        assert!(parse_fee("-1").is_err());
        assert!(parse_fee("abc").is_err());
    }
}
