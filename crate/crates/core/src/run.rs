//! Run orchestration and file output.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{Analytic, ConfigError, Model, ResolvedRun};
use crate::distributions::{GenDirParams, MomentSet};
use crate::integrator::{simulate, with_threads, IntegrationError, SimulationOutput};
use crate::kernel::{potential_residual, KernelError};
use crate::param_map::distribution_to_sde;
use crate::simplex::SimplexPoint;
use crate::stats::{compare, compare_means, ComparisonReport, MomentRecord, MomentTimeSeries, StatsError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Outcome of a simulation run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output: SimulationOutput,
    pub window: MomentRecord,
    pub comparison: ComparisonReport,
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

/// `t,mean_1..mean_N,var_1..var_N,cov_i_j` for `i < j`.
pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("mean_{i}")));
    cols.extend((1..=n).map(|i| format!("var_{i}")));
    for i in 1..=n {
        for j in i + 1..=n {
            cols.push(format!("cov_{i}_{j}"));
        }
    }
    cols.join(",")
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the moment time series as CSV with 17 significant digits.
pub fn write_timeseries_csv(mut w: impl Write, ts: &MomentTimeSeries) -> io::Result<()> {
    let n = ts.records().first().map_or(0, |r| r.dim());
    writeln!(w, "{}", csv_header(n))?;
    for r in ts.records() {
        let mut row = vec![fmt17(r.t)];
        row.extend(r.mean.iter().map(|&v| fmt17(v)));
        row.extend((0..n).map(|i| fmt17(r.variance(i).unwrap_or(f64::NAN))));
        for i in 0..n {
            for j in i + 1..n {
                row.push(fmt17(r.covariance(i, j).unwrap_or(f64::NAN)));
            }
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes `trajectories.csv`: `t,particle,y_1..y_K`.
pub fn write_trajectories_csv(mut w: impl Write, out: &SimulationOutput) -> io::Result<()> {
    let k = out.final_state.dim();
    let mut header = vec!["t".to_string(), "particle".to_string()];
    header.extend((1..=k).map(|i| format!("y_{i}")));
    writeln!(w, "{}", header.join(","))?;
    for s in &out.trajectories {
        for (p, y) in s.coords.chunks_exact(k).enumerate() {
            let mut row = vec![fmt17(s.t), p.to_string()];
            row.extend(y.iter().map(|&v| fmt17(v)));
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

fn matrix(m: &MomentSet) -> Vec<Vec<f64>> {
    (0..m.dim()).map(|i| (0..m.dim()).map(|j| m.cov(i, j)).collect()).collect()
}

fn record_matrix(r: &MomentRecord) -> Option<Vec<Vec<f64>>> {
    r.cov.as_ref()?;
    let n = r.dim();
    Some((0..n).map(|i| (0..n).map(|j| r.covariance(i, j).unwrap_or(f64::NAN)).collect()).collect())
}

fn params_json(p: &GenDirParams) -> Value {
    json!({ "alpha": p.alpha(), "beta": p.beta(), "gamma": p.gamma() })
}

fn model_json(model: &Model) -> Value {
    match model {
        Model::GenDir { process, params } => {
            let c = process.coefficients();
            let rows: Vec<Vec<f64>> =
                (0..c.c.size()).map(|i| (i..c.c.size()).map(|j| c.c.get(i, j)).collect()).collect();
            json!({
                "coefficients": { "b": c.b, "S": c.s, "kappa": c.kappa, "c": rows },
                "distribution": params_json(params),
            })
        }
        Model::Dirichlet { sde, invariant } => json!({
            "coefficients": { "b": sde.b, "S": sde.s, "kappa": sde.kappa },
            "distribution": { "omega": invariant.omega() },
        }),
        Model::WrightFisher(w) => json!({ "omega": w.omega() }),
        Model::Jacobi(j) => json!({ "a": j.a, "c": j.c, "pi": j.pi() }),
        Model::Beta(b) => {
            let inv = b.invariant();
            json!({
                "coefficients": { "b": b.b, "S": b.s, "kappa": b.kappa },
                "distribution": { "alpha": inv.alpha, "beta": inv.beta },
            })
        }
    }
}

/// Simulates, compares the window average against the stationary moments and
/// assembles the summary. Nothing is written to disk.
pub fn execute(run: &ResolvedRun, threads: usize) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let process = run.model.as_process();
    let output = with_threads(threads, || simulate(process, &run.integrator, &run.init))??;
    let wall = start.elapsed().as_secs_f64();
    let window = output.series.window_average(run.window.0, run.window.1)?;
    let analytic = run.model.analytic();
    let (comparison, analytic_json) = match &analytic {
        Analytic::Full(m) => (compare(&window, m, &run.tolerances)?, json!({ "mean": m.mean(), "cov": matrix(m) })),
        Analytic::MeanOnly(mean) => {
            (compare_means(&window, mean, &run.tolerances)?, json!({ "mean": mean, "cov": Value::Null }))
        }
    };
    let d = &output.diagnostics;
    let cfg = &run.integrator;
    let summary = json!({
        "process": run.model.kind().name(),
        "K": run.model.dim(),
        "N": run.model.dim() + 1,
        "seed": cfg.seed,
        "integrator": cfg,
        "model": model_json(&run.model),
        "analytic": analytic_json,
        "empirical": {
            "window": [run.window.0, run.window.1],
            "records": output.series.records().iter().filter(|r| r.t >= run.window.0 - 1e-9 && r.t <= run.window.1 + 1e-9).count(),
            "mean": window.mean,
            "cov": record_matrix(&window),
            "se": window.se,
        },
        "comparison": comparison,
        "diagnostics": {
            "particle_steps": d.steps.particle_steps,
            "redraws": d.steps.redraws,
            "clamped": d.steps.clamped,
            "clamped_fraction": d.clamped_fraction(),
            "checked_states": d.checked_states,
            "max_unit_sum_ulps": d.max_unit_sum_ulps,
            "min_coordinate": d.min_coordinate,
            "max_coordinate": d.max_coordinate,
        },
        "wall_time_s": wall,
    });
    Ok(RunReport { output, window, comparison, summary, files: Vec::new() })
}

/// Removes files written so far unless disarmed.
struct Cleanup(Vec<PathBuf>);

impl Drop for Cleanup {
    fn drop(&mut self) {
        for p in &self.0 {
            let _ = fs::remove_file(p);
        }
    }
}

fn write_file(
    path: &Path,
    guard: &mut Cleanup,
    f: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
) -> Result<(), RunError> {
    let io_err = |source| RunError::Io { path: path.to_path_buf(), source };
    let file = fs::File::create(path).map_err(io_err)?;
    guard.0.push(path.to_path_buf());
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Runs and writes `timeseries.csv`, `summary.json` and, when trajectories are
/// kept, `trajectories.csv` into `out_dir`. Partial outputs are removed on failure.
pub fn run_simulate(run: &ResolvedRun, out_dir: &Path, threads: usize) -> Result<RunReport, RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io { path: out_dir.to_path_buf(), source })?;
    let mut report = execute(run, threads)?;
    let mut guard = Cleanup(Vec::new());
    let series = out_dir.join("timeseries.csv");
    write_file(&series, &mut guard, |w| write_timeseries_csv(w, &report.output.series))?;
    if !report.output.trajectories.is_empty() {
        write_file(&out_dir.join("trajectories.csv"), &mut guard, |w| write_trajectories_csv(w, &report.output))?;
    }
    let summary = out_dir.join("summary.json");
    write_file(&summary, &mut guard, |w| {
        serde_json::to_writer_pretty(&mut *w, &report.summary).map_err(io::Error::other)?;
        writeln!(w)
    })?;
    report.files = std::mem::take(&mut guard.0);
    Ok(report)
}

/// Result of a randomized potential-condition check.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub dim: usize,
    pub sets: usize,
    pub points: usize,
    pub max_residual: f64,
}

/// Random valid generalized Dirichlet parameters with `alpha, beta` in `[0.5, 10]`.
pub fn random_params(rng: &mut impl Rng, k: usize) -> GenDirParams {
    let alpha = (0..k).map(|_| rng.random_range(0.5..10.0)).collect();
    let beta = (0..k).map(|_| rng.random_range(0.5..10.0)).collect();
    GenDirParams::new(alpha, beta).expect("positive by construction")
}

/// Smallest coordinate (remainder included) of [`random_interior_point`].
pub const INTERIOR_MARGIN: f64 = 1e-3;

/// A uniform point of the simplex conditioned on every component of the
/// completed point being at least [`INTERIOR_MARGIN`].
pub fn random_interior_point(rng: &mut impl Rng, k: usize) -> SimplexPoint {
    loop {
        let e: Vec<f64> = (0..=k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = e.iter().sum();
        let y: Vec<f64> = e[..k].iter().map(|v| v / total).collect();
        let tail = y.iter().fold(1.0, |r, v| r - v);
        if y.iter().all(|&v| v >= INTERIOR_MARGIN) && tail >= INTERIOR_MARGIN {
            return SimplexPoint::new(y).expect("interior by construction");
        }
    }
}

/// Maximum `|grad(-phi) - (2a - dB)/B|` over random coefficient sets and points.
pub fn verify_potential(k: usize, sets: usize, points: usize, seed: u64) -> Result<VerifyReport, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual = 0.0f64;
    for _ in 0..sets {
        let params = random_params(&mut rng, k);
        let kappa: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..2.0)).collect();
        let coeffs = distribution_to_sde(&params, &kappa).map_err(KernelError::from)?;
        for _ in 0..points {
            let y = random_interior_point(&mut rng, k);
            for r in potential_residual(&coeffs, &y)? {
                max_residual = max_residual.max(r.abs());
            }
        }
    }
    Ok(VerifyReport { dim: k, sets, points, max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    #[test]
    fn header_layout() {
        assert_eq!(csv_header(3), "t,mean_1,mean_2,mean_3,var_1,var_2,var_3,cov_1_2,cov_1_3,cov_2_3");
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn verify_small() {
        let r = verify_potential(3, 2, 50, 7).unwrap();
        assert!(r.max_residual < 1e-8, "{r:?}");
    }

    #[test]
    fn failed_run_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
[distribution]
alpha = [5, 2]
beta = [5, 3]
[integrator]
dt = 0.01
t_end = 0.1
particles = 8
seed = 3
[output]
window = [5, 6]
"#;
        let run = RunConfig::from_toml(text).unwrap().resolve().unwrap();
        assert!(matches!(run_simulate(&run, dir.path(), 1), Err(RunError::Stats(StatsError::EmptyWindow { .. }))));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
