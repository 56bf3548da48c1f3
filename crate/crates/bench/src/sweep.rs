//! Fee sweeps over seeds and methods, CSV tables and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use nzs_core::instances::{gen_sparse_experiment, SparseExperiment};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::instance_file::{sha256_hex, InstanceFile};
use crate::run::{run_method, Method, SolveRecord, DEFAULT_EPS, DEFAULT_MAX_ITER};

pub const CSV_HEADER: &str =
    "method,rho,seed,queries_h,queries_g,queries_cert,iterations,certified_sq_distance,wall_ms";
pub const SUMMARY_HEADER: &str =
    "method,rho,runs,failed,mean_queries_h,two_sigma_queries_h,mean_queries_g,mean_iterations";

pub const DEFAULT_MU: f64 = 1e-4;

/// Environment variable capping the number of concurrently solved cells.
pub const THREADS_ENV: &str = "NZS_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    /// Fee sweep with `nu = 1`.
    T1,
    /// Single fee with `nu = 0.01`.
    T4,
}

impl Table {
    pub fn nu(self) -> f64 {
        match self {
            Table::T1 => 1.0,
            Table::T4 => 0.01,
        }
    }

    /// Fees as fractions: 0, 0.03%, ..., 0.18% for `t1`; 0 for `t4`.
    pub fn default_rhos(self) -> Vec<f64> {
        match self {
            Table::T1 => (0..=6).map(|i| (3 * i) as f64 / 10_000.0).collect(),
            Table::T4 => vec![0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// `n = m = 1000`, 10 000 stored entries.
    Desk,
    /// `n = m = 10 000`, 100 000 stored entries.
    Paper,
}

impl Scale {
    /// `(n, m, nnz)`.
    pub fn dims(self) -> (usize, usize, usize) {
        match self {
            Scale::Desk => (1000, 1000, 10_000),
            Scale::Paper => (10_000, 10_000, 100_000),
        }
    }
}

/// Seeds 0, 111, ..., 999.
pub fn default_seeds() -> Vec<u64> {
    (0..=999).step_by(111).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub table: Table,
    pub scale: Scale,
    pub seeds: Vec<u64>,
    pub rhos: Vec<f64>,
    pub methods: Vec<Method>,
    pub mu: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub threads: usize,
}

impl SweepConfig {
    pub fn new(table: Table, scale: Scale) -> Self {
        SweepConfig {
            table,
            scale,
            seeds: default_seeds(),
            rhos: table.default_rhos(),
            methods: Method::ALL.to_vec(),
            mu: DEFAULT_MU,
            eps: DEFAULT_EPS,
            max_iter: DEFAULT_MAX_ITER,
            threads: thread_cap(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() || self.rhos.is_empty() || self.methods.is_empty() {
            return Err(BenchError::Usage("seeds, fees and methods must be non-empty".into()));
        }
        if let Some(r) = self.rhos.iter().find(|r| !(**r >= 0.0 && **r <= 1.0)) {
            return Err(BenchError::Usage(format!("fee {r} outside [0, 1]")));
        }
        if !(self.eps > 0.0) || self.threads == 0 {
            return Err(BenchError::Usage("eps and thread count must be positive".into()));
        }
        Ok(())
    }
}

/// `NZS_THREADS` if set to a positive integer, else the available parallelism.
pub fn thread_cap() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub method: Method,
    pub rho: f64,
    pub seed: u64,
    pub outcome: std::result::Result<SolveRecord, String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// Sorted by method, fee and seed.
    pub cells: Vec<Cell>,
    /// SHA-256 of each seed's instance file.
    pub instance_hashes: BTreeMap<u64, String>,
    pub wall_ms: f64,
}

/// Instance of `seed` at the configured scale.
pub fn experiment_for(config: &SweepConfig, seed: u64) -> Result<SparseExperiment> {
    let (n, m, nnz) = config.scale.dims();
    Ok(gen_sparse_experiment(n, m, nnz, seed, config.mu, config.table.nu(), true)?)
}

/// Solves every (method, fee, seed) cell. A failing cell is recorded and the
/// sweep continues.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| BenchError::Usage(format!("thread pool: {e}")))?;
    let experiments: Vec<(SparseExperiment, String)> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| {
                let e = experiment_for(config, seed)?;
                let hash = sha256_hex(&InstanceFile::from_experiment(&e, true).to_bytes()?);
                Ok((e, hash))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let n_exp = experiments.len();
    let jobs: Vec<(Method, f64, usize)> = config
        .methods
        .iter()
        .flat_map(|&method| {
            config
                .rhos
                .iter()
                .flat_map(move |&rho| (0..n_exp).map(move |i| (method, rho, i)))
        })
        .collect();
    let mut cells: Vec<Cell> = pool.install(|| {
        jobs.par_iter()
            .map(|&(method, rho, i)| {
                let e = &experiments[i].0;
                let outcome = run_method(method, e, rho, config.eps, config.max_iter)
                    .and_then(|r| {
                        if r.converged {
                            Ok(r)
                        } else {
                            Err(BenchError::NotConverged {
                                method: method.to_string(),
                                iterations: r.iterations,
                            })
                        }
                    })
                    .map_err(|e| e.to_string());
                Cell {
                    method,
                    rho,
                    seed: e.seed,
                    outcome,
                }
            })
            .collect()
    });
    cells.sort_by(|a, b| {
        (a.method, a.rho, a.seed)
            .partial_cmp(&(b.method, b.rho, b.seed))
            .expect("fees are finite")
    });
    let instance_hashes = experiments.iter().map(|(e, h)| (e.seed, h.clone())).collect();
    Ok(SweepResult {
        config: config.clone(),
        cells,
        instance_hashes,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// One row per cell; a failed cell carries `failed` in every numeric column.
pub fn table_csv(cells: &[Cell]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cells {
        let _ = write!(out, "{},{},{},", c.method, c.rho, c.seed);
        match &c.outcome {
            Ok(r) => {
                let cert = r.certified_sq_distance.map_or(String::new(), |d| format!("{d:e}"));
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{:.3}",
                    r.queries_h, r.queries_g, r.queries_cert, r.iterations, cert, r.wall_ms
                );
            }
            Err(_) => out.push_str("failed,failed,failed,failed,failed,failed\n"),
        }
    }
    out
}

/// Aggregate of one (method, fee) column over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub rho: f64,
    pub runs: usize,
    pub failed: usize,
    pub mean_queries_h: f64,
    /// Twice the sample standard deviation.
    pub two_sigma_queries_h: f64,
    pub mean_queries_g: f64,
    pub mean_iterations: f64,
}

pub fn summarize(cells: &[Cell]) -> Vec<CellSummary> {
    let mut groups: Vec<((Method, f64), Vec<&Cell>)> = Vec::new();
    for c in cells {
        match groups.iter_mut().find(|(k, _)| *k == (c.method, c.rho)) {
            Some((_, v)) => v.push(c),
            None => groups.push(((c.method, c.rho), vec![c])),
        }
    }
    groups
        .into_iter()
        .map(|((method, rho), group)| {
            let ok: Vec<&SolveRecord> = group.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
            let h: Vec<f64> = ok.iter().map(|r| r.queries_h as f64).collect();
            let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            let mean_h = mean(&h);
            let sd = if h.len() > 1 {
                (h.iter().map(|v| (v - mean_h).powi(2)).sum::<f64>() / (h.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            CellSummary {
                method,
                rho,
                runs: ok.len(),
                failed: group.len() - ok.len(),
                mean_queries_h: mean_h,
                two_sigma_queries_h: 2.0 * sd,
                mean_queries_g: mean(&ok.iter().map(|r| r.queries_g as f64).collect::<Vec<_>>()),
                mean_iterations: mean(&ok.iter().map(|r| r.iterations as f64).collect::<Vec<_>>()),
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[CellSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.1},{:.1},{:.1},{:.1}",
            r.method, r.rho, r.runs, r.failed, r.mean_queries_h, r.two_sigma_queries_h, r.mean_queries_g, r.mean_iterations
        );
    }
    out
}

/// Query totals of one (method, fee) column, summed over converged cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerTotal {
    pub method: Method,
    pub rho: String,
    pub cells: usize,
    pub queries_h: u64,
    pub queries_g: u64,
    pub queries_cert: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: SweepConfig,
    /// Seed to instance-file SHA-256.
    pub instance_hashes: BTreeMap<u64, String>,
    /// Method to a description of its solver settings.
    pub solver_configs: BTreeMap<String, String>,
    pub wall_ms: f64,
    pub ledger_totals: Vec<LedgerTotal>,
    /// `method/rho/seed` of each failed cell with its error.
    pub failures: Vec<String>,
}

impl RunManifest {
    pub fn new(command_line: Vec<String>, result: &SweepResult) -> Self {
        let cfg = &result.config;
        let solver_configs = cfg
            .methods
            .iter()
            .map(|m| {
                let desc = match m {
                    Method::Icl => format!(
                        "convex reformulation, restarted accelerated inner solver, eps {}, max inner iterations {}",
                        cfg.eps, cfg.max_iter
                    ),
                    Method::Ogda => format!("gamma = 1/(2L), eps {}, max iterations {}", cfg.eps, cfg.max_iter),
                    Method::Eg => format!("gamma = 1/(sqrt(2) L), eps {}, max iterations {}", cfg.eps, cfg.max_iter),
                };
                (m.to_string(), desc)
            })
            .collect();
        let mut ledger_totals: Vec<LedgerTotal> = Vec::new();
        let mut failures = Vec::new();
        for c in &result.cells {
            let rho = c.rho.to_string();
            let pos = match ledger_totals.iter().position(|t| t.method == c.method && t.rho == rho) {
                Some(p) => p,
                None => {
                    ledger_totals.push(LedgerTotal {
                        method: c.method,
                        rho,
                        cells: 0,
                        queries_h: 0,
                        queries_g: 0,
                        queries_cert: 0,
                    });
                    ledger_totals.len() - 1
                }
            };
            match &c.outcome {
                Ok(r) => {
                    let t = &mut ledger_totals[pos];
                    t.cells += 1;
                    t.queries_h += r.queries_h;
                    t.queries_g += r.queries_g;
                    t.queries_cert += r.queries_cert;
                }
                Err(e) => failures.push(format!("{}/{}/{}: {e}", c.method, c.rho, c.seed)),
            }
        }
        RunManifest {
            command_line,
            config: cfg.clone(),
            instance_hashes: result.instance_hashes.clone(),
            solver_configs,
            wall_ms: result.wall_ms,
            ledger_totals,
            failures,
        }
    }
}
