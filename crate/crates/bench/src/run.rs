//! Single solves of a sparse experiment at one transaction fee.

use std::time::Instant;

use nzs_core::game::JointPoint;
use nzs_core::icl::{solve_icl, IclOptions};
use nzs_core::instances::{reformulate_bilinear, SparseExperiment};
use nzs_core::saddle::{solve_eg, solve_ogda, SolveReport, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const DEFAULT_EPS: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Icl,
    Ogda,
    Eg,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Icl, Method::Ogda, Method::Eg];

    pub fn name(self) -> &'static str {
        match self {
            Method::Icl => "icl",
            Method::Ogda => "ogda",
            Method::Eg => "eg",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one solve, as written to report files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub method: Method,
    pub rho: f64,
    pub eps: f64,
    pub seed: u64,
    /// Zero-sum-part queries for ICL; full-operator queries for the baselines.
    pub queries_h: u64,
    pub queries_g: u64,
    pub queries_cert: u64,
    pub iterations: usize,
    pub certified_sq_distance: Option<f64>,
    pub wall_ms: f64,
    pub converged: bool,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SolveRecord {
    /// Gradient queries charged to the algorithm itself.
    pub fn algorithmic_queries(&self) -> u64 {
        self.queries_h + self.queries_g
    }

    pub fn point(&self) -> Result<JointPoint> {
        Ok(JointPoint::from_vecs(self.x.clone(), self.y.clone())?)
    }
}

/// Solves `experiment` at fee `rho` to squared accuracy `eps`.
///
/// ICL runs on the convex reformulation; the baselines run on the game as given.
pub fn run_method(
    method: Method,
    experiment: &SparseExperiment,
    rho: f64,
    eps: f64,
    max_iter: usize,
) -> Result<SolveRecord> {
    let game = experiment.game(rho)?;
    let started = Instant::now();
    let report: SolveReport = match method {
        Method::Icl => {
            let spec = reformulate_bilinear(&game)?.to_game()?;
            let opts = IclOptions {
                max_inner_iter: max_iter,
                ..IclOptions::default()
            };
            solve_icl(&spec, eps, &opts)?.solve
        }
        Method::Ogda => solve_ogda(&game.to_game()?, &SolverConfig::new(eps, max_iter))?,
        Method::Eg => solve_eg(&game.to_game()?, &SolverConfig::new(eps, max_iter))?,
    };
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let l = &report.ledger;
    let queries_h = match method {
        Method::Icl => l.h_queries,
        Method::Ogda | Method::Eg => l.f_queries,
    };
    Ok(SolveRecord {
        method,
        rho,
        eps,
        seed: experiment.seed,
        queries_h,
        queries_g: l.g_queries,
        queries_cert: l.cert_queries,
        iterations: report.iterations,
        certified_sq_distance: report.certified_sq_distance,
        wall_ms,
        converged: report.converged(),
        x: report.point.x.as_slice().to_vec(),
        y: report.point.y.as_slice().to_vec(),
    })
}
