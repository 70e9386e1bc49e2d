//! Scenario runs, metrics, ablations and the results file.

mod ablation;
mod freeze;

pub use ablation::{
    run_ablation_density, run_ablation_depth, write_density_csv, write_depth_csv, DensityRow, DepthRow,
};
pub use freeze::{detect_freeze, FreezeDetector, FreezeReport};

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esdf::CostVolumeMode;
use crate::planner::{navigate, NavConfig, NavResult, Outcome, Pipeline};
use crate::worldsim::Scene;

pub const THREADS_ENV: &str = "SPLATNAV_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "splatblox_all_points")]
    SplatbloxAllPoints,
    #[serde(rename = "splatblox_means_only")]
    SplatbloxMeansOnly,
    #[serde(rename = "geometric_only")]
    GeometricOnly,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::SplatbloxAllPoints, Method::SplatbloxMeansOnly, Method::GeometricOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::SplatbloxAllPoints => "splatblox_all_points",
            Method::SplatbloxMeansOnly => "splatblox_means_only",
            Method::GeometricOnly => "geometric_only",
        }
    }

    pub fn pipeline(self) -> Pipeline {
        match self {
            Method::SplatbloxAllPoints => Pipeline::Semantic(CostVolumeMode::SampledPoints { fraction: 1.0 }),
            Method::SplatbloxMeansOnly => Pipeline::Semantic(CostVolumeMode::MeansOnly),
            Method::GeometricOnly => Pipeline::GeometricOnly,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_id: String,
    pub method: Method,
    pub seed: u64,
    pub outcome: Outcome,
    pub frozen: bool,
    #[serde(rename = "path_length_m")]
    pub path_length: f64,
    #[serde(rename = "straight_line_m")]
    pub straight_line: f64,
    /// Only for reached runs.
    pub ntl: Option<f64>,
    /// Time to reach the goal, seconds; only for reached runs.
    #[serde(rename = "trg_s")]
    pub trg: Option<f64>,
}

impl RunRecord {
    pub fn from_result(scene: &Scene, method: Method, seed: u64, res: &NavResult) -> Self {
        let straight_line = (scene.goal - scene.start.position()).norm();
        let path_length = res.path_length();
        let reached = res.outcome == Outcome::Reached;
        RunRecord {
            scenario_id: scene.name.clone(),
            method,
            seed,
            outcome: res.outcome,
            frozen: res.outcome == Outcome::Frozen,
            path_length,
            straight_line,
            ntl: (reached && straight_line > 0.0).then(|| path_length / straight_line),
            trg: reached.then(|| res.duration()),
        }
    }

    fn sort_key(&self) -> (&str, Method, u64) {
        (&self.scenario_id, self.method, self.seed)
    }
}

pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

pub fn write_results_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!("checked io kind"),
        }
    } else {
        Error::Parse(format!("csv: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSummary {
    pub runs: usize,
    /// Success rate, percent.
    pub sr: f64,
    /// Freezing rate, percent.
    pub fr: f64,
    /// Mean over reached runs; `None` when nothing was reached.
    pub ntl: Option<f64>,
    pub trg: Option<f64>,
}

pub fn compute_metrics(records: &[RunRecord]) -> Result<MetricsSummary> {
    if records.is_empty() {
        return Err(Error::EmptyInput("run records"));
    }
    let n = records.len() as f64;
    let reached: Vec<&RunRecord> = records.iter().filter(|r| r.outcome == Outcome::Reached).collect();
    let frozen = records.iter().filter(|r| r.frozen).count() as f64;
    let mean = |f: fn(&RunRecord) -> Option<f64>| {
        let vals: Vec<f64> = reached.iter().filter_map(|r| f(r)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    Ok(MetricsSummary {
        runs: records.len(),
        sr: 100.0 * reached.len() as f64 / n,
        fr: 100.0 * frozen / n,
        ntl: mean(|r| r.ntl),
        trg: mean(|r| r.trg),
    })
}

/// Thread pool honoring `SPLATNAV_THREADS`.
pub(crate) fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer (got {v:?})")))?;
        if n == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn run_once(scene: &Scene, method: Method, seed: u64, cfg: &NavConfig) -> Result<RunRecord> {
    let res = navigate(scene, &scene.start, &scene.goal, cfg, method.pipeline(), seed)?;
    Ok(RunRecord::from_result(scene, method, seed, &res))
}

/// Every (scene, method, seed) combination, in parallel, sorted.
pub fn run_matrix(scenes: &[Scene], methods: &[Method], seeds: &[u64], cfg: &NavConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let jobs: Vec<(&Scene, Method, u64)> = scenes
        .iter()
        .flat_map(|s| methods.iter().flat_map(move |&m| seeds.iter().map(move |&k| (s, m, k))))
        .collect();
    let mut records = with_pool(|| {
        jobs.par_iter()
            .map(|&(s, m, k)| run_once(s, m, k, cfg))
            .collect::<Result<Vec<_>>>()
    })??;
    sort_records(&mut records);
    Ok(records)
}

/// Geometry-only runs: the LiDAR field drives the controller everywhere.
pub fn run_baseline_geometric(scene: &Scene, seeds: &[u64], cfg: &NavConfig) -> Result<Vec<RunRecord>> {
    run_matrix(std::slice::from_ref(scene), &[Method::GeometricOnly], seeds, cfg)
}
