use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gendir::config::{appendix_b_preset, parse_list, parse_number, ProcessKind, RunConfig};
use gendir::distributions::{GenDirParams, MomentSet};
use gendir::param_map::{distribution_to_sde, sde_to_distribution, SdeCoefficients, UpperTriangular};
use gendir::run::{run_simulate, verify_potential, RunError, RunReport};
use gendir::simplex::SimplexPoint;

const EXIT_VALIDATION: u8 = 1;
const EXIT_COMPARISON: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "gendir", version, about = "Generalized Dirichlet diffusions on the simplex")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble and compare stationary moments.
    Simulate(SimulateArgs),
    /// Print analytic means and covariances.
    Moments(ParamArgs),
    /// Evaluate the log-density at points (`;`-separated, coordinates comma-separated).
    Density {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, required = true)]
        points: String,
    },
    /// Convert between SDE coefficients and distribution parameters.
    Map(MapArgs),
    /// Check the potential condition at random points.
    #[command(name = "verify-potential", alias = "verify")]
    Verify {
        #[arg(long = "K", short = 'K', default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value_t = 1)]
        sets: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run the three shipped two-component cases and check them.
    #[command(name = "reproduce-appendix-b")]
    Reproduce {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        particles: Option<usize>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset; only `appendix-b` exists.
    #[arg(long, requires = "case")]
    preset: Option<String>,
    /// Preset case, 1 to 3.
    #[arg(long)]
    case: Option<usize>,
    /// Overrides the process kind of the configuration.
    #[arg(long)]
    process: Option<String>,
    /// Output directory (default: the configuration's `output.dir`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0: all cores); results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Overrides the integrator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the particle count.
    #[arg(long)]
    particles: Option<usize>,
    /// Overrides the end time; the averaging window becomes its second half.
    #[arg(long)]
    t_end: Option<String>,
    /// Exit with status 2 when the stationary comparison fails.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, required = true)]
    alpha: String,
    #[arg(long, required = true)]
    beta: String,
}

#[derive(Args)]
struct MapArgs {
    /// `b=.. S=.. kappa=.. cIJ=..` with comma-separated values.
    #[arg(long, num_args = 1.., conflicts_with = "from_dist")]
    from_sde: Vec<String>,
    /// `alpha=.. beta=..`.
    #[arg(long, num_args = 1..)]
    from_dist: Vec<String>,
    /// Diffusion scales for the inverse map (default all ones).
    #[arg(long)]
    kappa: Option<String>,
}

enum Failure {
    Validation(String),
    Comparison(String),
    Io(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Io { .. } => Failure::Io(e.to_string()),
            RunError::Config(gendir::config::ConfigError::Read { .. }) => Failure::Io(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Moments(p) => moments(&p),
        Command::Density { params, points } => density(&params, &points),
        Command::Map(a) => map(&a),
        Command::Verify { k, points, sets, seed } => verify(k, points, sets, seed),
        Command::Reproduce { out, threads, particles } => reproduce(&out, threads, particles),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Comparison(m)) => {
            eprintln!("comparison failed: {m}");
            ExitCode::from(EXIT_COMPARISON)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn print_report(report: &RunReport) {
    let w = &report.window;
    let d = &report.output.diagnostics;
    println!("window mean: {:?}", w.mean);
    for c in &report.comparison.checks {
        println!(
            "  {:<10} analytic {:>12.6e}  empirical {:>12.6e}  rel {:>8.3}%  {}",
            c.name,
            c.analytic,
            c.empirical,
            100.0 * c.rel_dev,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
    println!(
        "particle-steps {}  redraws {}  clamped {} ({:.2e})",
        d.steps.particle_steps,
        d.steps.redraws,
        d.steps.clamped,
        d.clamped_fraction()
    );
    for f in &report.files {
        println!("wrote {}", f.display());
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let mut cfg = match (&a.config, &a.preset) {
        (Some(path), None) => RunConfig::from_file(path).map_err(RunError::from)?,
        (None, Some(name)) if name == "appendix-b" => {
            let case = a.case.unwrap_or(0);
            appendix_b_preset(case).ok_or_else(|| invalid(format!("--case must be 1, 2 or 3, got {case}")))?
        }
        (None, Some(name)) => return Err(invalid(format!("unknown preset {name:?}"))),
        _ => return Err(invalid("give --config FILE or --preset appendix-b --case N")),
    };
    if let Some(p) = &a.process {
        cfg.process = ProcessKind::parse(p).ok_or_else(|| invalid(format!("unknown process {p:?}")))?;
    }
    if let Some(s) = a.seed {
        cfg.integrator.seed = s;
    }
    if let Some(p) = a.particles {
        cfg.integrator.particles = p;
    }
    if let Some(t) = &a.t_end {
        cfg.integrator.t_end = gendir::config::Number(parse_number(t).map_err(invalid)?);
        cfg.output.window = None;
    }
    let run = cfg.resolve().map_err(RunError::from)?;
    let out = a.out.or(run.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let report = run_simulate(&run, &out, a.threads)?;
    print_report(&report);
    if a.check && !report.comparison.pass {
        let names: Vec<&str> = report.comparison.failures().map(|c| c.name.as_str()).collect();
        return Err(Failure::Comparison(names.join(", ")));
    }
    Ok(())
}

fn reproduce(out: &std::path::Path, threads: usize, particles: Option<usize>) -> Result<(), Failure> {
    let mut failed = Vec::new();
    for case in 1..=3 {
        let mut cfg = appendix_b_preset(case).expect("shipped case");
        if let Some(p) = particles {
            cfg.integrator.particles = p;
        }
        let run = cfg.resolve().map_err(RunError::from)?;
        println!("case {case}");
        let report = run_simulate(&run, &out.join(format!("case{case}")), threads)?;
        print_report(&report);
        if !report.comparison.pass {
            failed.push(format!("case {case}"));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Comparison(failed.join(", ")))
    }
}

fn params(p: &ParamArgs) -> Result<GenDirParams, Failure> {
    let alpha = parse_list(&p.alpha).map_err(invalid)?;
    let beta = parse_list(&p.beta).map_err(invalid)?;
    GenDirParams::new(alpha, beta).map_err(invalid)
}

fn print_moments(m: &MomentSet) {
    println!("mean: {}", join(m.mean()));
    for i in 0..m.dim() {
        let row: Vec<f64> = (0..m.dim()).map(|j| m.cov(i, j)).collect();
        println!("cov[{}]: {}", i + 1, join(&row));
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
}

fn moments(p: &ParamArgs) -> Result<(), Failure> {
    let p = params(p)?;
    let m = p.moments();
    print_moments(&m);
    println!("var: {}", join(&(0..m.dim()).map(|i| m.variance(i)).collect::<Vec<_>>()));
    println!("completed:");
    let full = m.completed();
    print_moments(&full);
    Ok(())
}

fn density(p: &ParamArgs, points: &str) -> Result<(), Failure> {
    let p = params(p)?;
    for raw in points.split(';').filter(|s| !s.trim().is_empty()) {
        let y = SimplexPoint::new(parse_list(raw).map_err(invalid)?).map_err(invalid)?;
        let ld = p.log_density(&y).map_err(invalid)?;
        println!(
            "{}\t{}\t{}{}",
            join(y.coords()),
            ld.value,
            ld.value.exp(),
            if ld.on_boundary { "\tboundary" } else { "" }
        );
    }
    Ok(())
}

fn key_values(items: &[String]) -> Result<Vec<(String, Vec<f64>)>, Failure> {
    items
        .iter()
        .map(|item| {
            let (k, v) = item.split_once('=').ok_or_else(|| invalid(format!("expected key=values, got {item:?}")))?;
            Ok((k.trim().to_string(), parse_list(v).map_err(invalid)?))
        })
        .collect()
}

fn map(a: &MapArgs) -> Result<(), Failure> {
    if !a.from_sde.is_empty() {
        let kv = key_values(&a.from_sde)?;
        let get = |name: &str| {
            kv.iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| invalid(format!("missing {name}=")))
        };
        let (b, s, kappa) = (get("b")?, get("S")?, get("kappa")?);
        let k = b.len();
        let mut c = UpperTriangular::zeros(k.saturating_sub(1));
        for (key, v) in &kv {
            let Some(idx) = key.strip_prefix('c') else { continue };
            let (i, j) = parse_c_index(idx, k).ok_or_else(|| invalid(format!("bad coefficient name {key:?}")))?;
            if v.len() != 1 {
                return Err(invalid(format!("{key} takes one value")));
            }
            c.set(i, j, v[0]);
        }
        let coeffs = SdeCoefficients::new(b, s, kappa, c).map_err(invalid)?;
        let p = sde_to_distribution(&coeffs).map_err(invalid)?;
        println!("alpha: {}", join(p.alpha()));
        println!("beta: {}", join(p.beta()));
        println!("gamma: {}", join(&p.gamma()));
        return Ok(());
    }
    if !a.from_dist.is_empty() {
        let kv = key_values(&a.from_dist)?;
        let get = |name: &str| {
            kv.iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| invalid(format!("missing {name}=")))
        };
        let p = GenDirParams::new(get("alpha")?, get("beta")?).map_err(invalid)?;
        let kappa = match &a.kappa {
            Some(s) => parse_list(s).map_err(invalid)?,
            None => vec![1.0; p.dim()],
        };
        let c = distribution_to_sde(&p, &kappa).map_err(invalid)?;
        println!("b: {}", join(&c.b));
        println!("S: {}", join(&c.s));
        println!("kappa: {}", join(&c.kappa));
        for i in 0..c.c.size() {
            for j in i..c.c.size() {
                println!("c{}{}: {}", i + 1, j + 1, c.c.get(i, j));
            }
        }
        return Ok(());
    }
    Err(invalid("give --from-sde or --from-dist"))
}

/// `"12"` -> `(0, 1)`; with more than nine rows use `"i_j"`.
fn parse_c_index(s: &str, k: usize) -> Option<(usize, usize)> {
    let (i, j) = match s.split_once('_') {
        Some((i, j)) => (i.parse::<usize>().ok()?, j.parse::<usize>().ok()?),
        None if s.len() == 2 => (s[..1].parse().ok()?, s[1..].parse().ok()?),
        None => return None,
    };
    (1 <= i && i <= j && j < k).then(|| (i - 1, j - 1))
}

fn verify(k: usize, points: usize, sets: usize, seed: u64) -> Result<(), Failure> {
    if k == 0 {
        return Err(invalid("--K must be at least 1"));
    }
    let r = verify_potential(k, sets, points, seed)?;
    println!("K = {k}, {sets} coefficient set(s) x {points} point(s)");
    println!("max residual: {:e}", r.max_residual);
    if r.max_residual > 1e-8 {
        return Err(Failure::Comparison(format!("max residual {:e} exceeds 1e-8", r.max_residual)));
    }
    Ok(())
}
