//! Run configuration: TOML parsing, validation with field paths, and the
//! built-in presets.
//!
//! ```toml
//! process = "gendir"            # gendir | dirichlet | wright-fisher | jacobi | beta
//!
//! [coefficients]                # or [distribution] with alpha, beta, kappa
//! b = ["1/10", "3/2"]
//! S = ["5/8", "2/5"]
//! kappa = ["1/80", "3/10"]
//! c = [["-1/4"]]                # row i lists c_ij for j = i..K-1
//!
//! [integrator]
//! dt = 0.025
//! t_end = 300
//! particles = 10000
//! seed = 1
//!
//! [init]
//! kind = "point"                # or "exact-sample"
//! point = [0, 0]
//!
//! [output]
//! window = [150, 300]
//! ```
//!
//! Every number may be written as a TOML integer or float, or as a string holding
//! a decimal or a ratio `"p/q"`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;
use thiserror::Error;

use crate::distributions::{DirichletParams, GenDirParams, MomentSet};
use crate::integrator::{InitialCondition, IntegratorConfig, Process};
use crate::kernel::GenDirProcess;
use crate::param_map::{distribution_to_sde, sde_to_distribution, SdeCoefficients, UpperTriangular};
use crate::related::{BetaSde, DirichletSde, Jacobi, WrightFisher};
use crate::simplex::SimplexPoint;
use crate::stats::Tolerances;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Field { path: String, message: String },
}

fn field(path: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError::Field { path: path.into(), message: message.to_string() }
}

/// Parses a decimal or `p/q` string.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            if q == 0.0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            p / q
        }
        None => s.parse().map_err(|_| format!("not a number: {s:?}"))?,
    };
    if !v.is_finite() {
        return Err(format!("not finite: {s:?}"));
    }
    Ok(v)
}

/// Comma-separated list of numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(parse_number).collect()
}

/// A number written as an integer, float, decimal string or ratio string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Number(pub f64);

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Number;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a string like \"3/10\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Number, E> {
                Ok(Number(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Number, E> {
                Ok(Number(v as f64))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Number, E> {
                Ok(Number(v))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Number, E> {
                parse_number(v).map(Number).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

fn values(v: &[Number]) -> Vec<f64> {
    v.iter().map(|n| n.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessKind {
    #[default]
    Gendir,
    Dirichlet,
    WrightFisher,
    Jacobi,
    Beta,
}

impl ProcessKind {
    pub fn name(self) -> &'static str {
        match self {
            ProcessKind::Gendir => "gendir",
            ProcessKind::Dirichlet => "dirichlet",
            ProcessKind::WrightFisher => "wright-fisher",
            ProcessKind::Jacobi => "jacobi",
            ProcessKind::Beta => "beta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Gendir, Self::Dirichlet, Self::WrightFisher, Self::Jacobi, Self::Beta]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CoefficientBlock {
    pub b: Vec<Number>,
    #[serde(rename = "S")]
    pub s: Vec<Number>,
    pub kappa: Vec<Number>,
    #[serde(default)]
    pub c: Vec<Vec<Number>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionBlock {
    pub alpha: Vec<Number>,
    pub beta: Vec<Number>,
    /// Defaults to all ones.
    pub kappa: Option<Vec<Number>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrightFisherBlock {
    pub omega: Vec<Number>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobiBlock {
    pub a: Number,
    pub c: Number,
    pub pi: Vec<Number>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorBlock {
    pub dt: Number,
    pub t_end: Number,
    pub particles: usize,
    pub seed: u64,
    pub record_stride: Option<u64>,
    pub boundary_retries: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    #[default]
    Point,
    ExactSample,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitBlock {
    #[serde(default)]
    pub kind: InitKind,
    /// Defaults to the origin.
    pub point: Option<Vec<Number>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TolerancesBlock {
    pub mean: Option<Number>,
    pub var: Option<Number>,
    pub cov: Option<Number>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    /// Averaging window `[from, to]`; defaults to the second half of the run.
    pub window: Option<[Number; 2]>,
    #[serde(default)]
    pub tolerances: TolerancesBlock,
    /// Leading particles whose coordinates are written to `trajectories.csv`.
    pub trajectory_particles: Option<usize>,
}

/// A run configuration as written in the file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub process: ProcessKind,
    pub coefficients: Option<CoefficientBlock>,
    pub distribution: Option<DistributionBlock>,
    pub wright_fisher: Option<WrightFisherBlock>,
    pub jacobi: Option<JacobiBlock>,
    pub integrator: IntegratorBlock,
    #[serde(default)]
    pub init: InitBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    /// Validates everything and builds the runnable objects.
    pub fn resolve(&self) -> Result<ResolvedRun, ConfigError> {
        let model = self.resolve_model()?;
        let k = model.dim();
        let ib = &self.integrator;
        let defaults = IntegratorConfig::default();
        let integrator = IntegratorConfig {
            dt: ib.dt.0,
            t_end: ib.t_end.0,
            particles: ib.particles,
            seed: ib.seed,
            boundary_retries: ib.boundary_retries.unwrap_or(defaults.boundary_retries),
            record_stride: ib.record_stride.unwrap_or(defaults.record_stride),
            trajectory_particles: self.output.trajectory_particles.unwrap_or(0),
        };
        integrator.validate().map_err(|e| field("integrator", e))?;

        let init = match self.init.kind {
            InitKind::Point => {
                let point = match &self.init.point {
                    Some(p) => {
                        if p.len() != k {
                            return Err(field("init.point", format!("needs {k} coordinates, found {}", p.len())));
                        }
                        SimplexPoint::new(values(p)).map_err(|e| field("init.point", e))?
                    }
                    None => SimplexPoint::origin(k).map_err(|e| field("init.point", e))?,
                };
                if !model.as_process().admissible(point.coords()) {
                    return Err(field("init.point", "not an admissible state for this process"));
                }
                InitialCondition::Point(point)
            }
            InitKind::ExactSample => {
                if self.init.point.is_some() {
                    return Err(field("init.point", "not used with kind = \"exact-sample\""));
                }
                let target = model
                    .exact_target()
                    .ok_or_else(|| field("init.kind", "exact sampling needs a known invariant distribution"))?;
                InitialCondition::ExactSample(target)
            }
        };

        let t_end = integrator.t_end;
        let window = match &self.output.window {
            Some([a, b]) => {
                if !(a.0 <= b.0 && a.0 >= 0.0) {
                    return Err(field("output.window", "expected 0 <= from <= to"));
                }
                (a.0, b.0)
            }
            None => (0.5 * t_end, t_end),
        };
        let td = Tolerances::default();
        let tb = &self.output.tolerances;
        let tolerances = Tolerances {
            mean_rel: tb.mean.map_or(td.mean_rel, |n| n.0),
            var_rel: tb.var.map_or(td.var_rel, |n| n.0),
            cov_rel: tb.cov.map_or(td.cov_rel, |n| n.0),
        };
        Ok(ResolvedRun { model, integrator, init, window, tolerances, out_dir: self.output.dir.clone() })
    }

    fn forbid(&self, present: bool, name: &str) -> Result<(), ConfigError> {
        if present {
            return Err(field(name, format!("not used by process \"{}\"", self.process.name())));
        }
        Ok(())
    }

    fn resolve_model(&self) -> Result<Model, ConfigError> {
        let kind = self.process;
        if kind != ProcessKind::WrightFisher {
            self.forbid(self.wright_fisher.is_some(), "wright_fisher")?;
        }
        if kind != ProcessKind::Jacobi {
            self.forbid(self.jacobi.is_some(), "jacobi")?;
        }
        if kind != ProcessKind::Gendir {
            self.forbid(self.distribution.is_some(), "distribution")?;
        }
        match kind {
            ProcessKind::Gendir => {
                let coeffs = match (&self.coefficients, &self.distribution) {
                    (Some(c), None) => coefficient_block(c)?,
                    (None, Some(d)) => distribution_block(d)?,
                    (Some(_), Some(_)) => {
                        return Err(field("coefficients", "give either [coefficients] or [distribution], not both"))
                    }
                    (None, None) => {
                        return Err(field("coefficients", "missing; give [coefficients] or [distribution]"))
                    }
                };
                let params = sde_to_distribution(&coeffs).map_err(|e| field("coefficients", e))?;
                let process = GenDirProcess::new(coeffs).map_err(|e| field("coefficients", e))?;
                Ok(Model::GenDir { process, params })
            }
            ProcessKind::Dirichlet | ProcessKind::Beta => {
                let c = self.coefficients.as_ref().ok_or_else(|| field("coefficients", "missing"))?;
                if !c.c.is_empty() {
                    return Err(field("coefficients.c", format!("not used by process \"{}\"", kind.name())));
                }
                let (b, s, kappa) = (values(&c.b), values(&c.s), values(&c.kappa));
                if kind == ProcessKind::Beta {
                    if b.len() != 1 || s.len() != 1 || kappa.len() != 1 {
                        return Err(field("coefficients", "the beta process takes exactly one b, S and kappa"));
                    }
                    let sde = BetaSde::new(b[0], s[0], kappa[0]).map_err(|e| field("coefficients", e))?;
                    return Ok(Model::Beta(sde));
                }
                let sde = DirichletSde::new(b, s, kappa).map_err(|e| field("coefficients", e))?;
                let invariant = sde.invariant().map_err(|e| field("coefficients", e))?;
                Ok(Model::Dirichlet { sde, invariant })
            }
            ProcessKind::WrightFisher => {
                self.forbid(self.coefficients.is_some(), "coefficients")?;
                let w = self.wright_fisher.as_ref().ok_or_else(|| field("wright_fisher", "missing"))?;
                Ok(Model::WrightFisher(WrightFisher::new(values(&w.omega)).map_err(|e| field("wright_fisher", e))?))
            }
            ProcessKind::Jacobi => {
                self.forbid(self.coefficients.is_some(), "coefficients")?;
                let j = self.jacobi.as_ref().ok_or_else(|| field("jacobi", "missing"))?;
                Ok(Model::Jacobi(Jacobi::new(j.a.0, j.c.0, values(&j.pi)).map_err(|e| field("jacobi", e))?))
            }
        }
    }
}

fn coefficient_block(c: &CoefficientBlock) -> Result<SdeCoefficients, ConfigError> {
    let rows: Vec<Vec<f64>> = c.c.iter().map(|r| values(r)).collect();
    let k = c.b.len();
    let upper = if k >= 1 && rows.len() + 1 == k {
        UpperTriangular::from_upper_rows(rows)
    } else {
        Err(crate::param_map::MapError::Shape(format!(
            "expected {} rows for K = {k}, found {}",
            k.saturating_sub(1),
            rows.len()
        )))
    }
    .map_err(|e| field("coefficients.c", e))?;
    SdeCoefficients::new(values(&c.b), values(&c.s), values(&c.kappa), upper).map_err(|e| field("coefficients", e))
}

fn distribution_block(d: &DistributionBlock) -> Result<SdeCoefficients, ConfigError> {
    let params = GenDirParams::new(values(&d.alpha), values(&d.beta)).map_err(|e| field("distribution", e))?;
    let kappa = match &d.kappa {
        Some(k) => values(k),
        None => vec![1.0; params.dim()],
    };
    distribution_to_sde(&params, &kappa).map_err(|e| field("distribution", e))
}

/// Stationary reference moments of a process.
#[derive(Debug, Clone, PartialEq)]
pub enum Analytic {
    /// Means and covariances of all `N` components.
    Full(MomentSet),
    /// Only the stationary means are known.
    MeanOnly(Vec<f64>),
}

/// A validated process together with its invariant, where known.
#[derive(Debug, Clone)]
pub enum Model {
    GenDir { process: GenDirProcess, params: GenDirParams },
    Dirichlet { sde: DirichletSde, invariant: DirichletParams },
    WrightFisher(WrightFisher),
    Jacobi(Jacobi),
    Beta(BetaSde),
}

impl Model {
    pub fn kind(&self) -> ProcessKind {
        match self {
            Model::GenDir { .. } => ProcessKind::Gendir,
            Model::Dirichlet { .. } => ProcessKind::Dirichlet,
            Model::WrightFisher(_) => ProcessKind::WrightFisher,
            Model::Jacobi(_) => ProcessKind::Jacobi,
            Model::Beta(_) => ProcessKind::Beta,
        }
    }

    pub fn as_process(&self) -> &dyn Process {
        match self {
            Model::GenDir { process, .. } => process,
            Model::Dirichlet { sde, .. } => sde,
            Model::WrightFisher(p) => p,
            Model::Jacobi(p) => p,
            Model::Beta(p) => p,
        }
    }

    pub fn dim(&self) -> usize {
        self.as_process().dim()
    }

    /// The invariant as a generalized Dirichlet, when it is one.
    pub fn exact_target(&self) -> Option<GenDirParams> {
        match self {
            Model::GenDir { params, .. } => Some(params.clone()),
            Model::Dirichlet { invariant, .. } => Some(invariant.to_gen_dir()),
            Model::WrightFisher(w) => Some(w.invariant().to_gen_dir()),
            Model::Beta(b) => {
                let inv = b.invariant();
                GenDirParams::new(vec![inv.alpha], vec![inv.beta]).ok()
            }
            Model::Jacobi(_) => None,
        }
    }

    pub fn analytic(&self) -> Analytic {
        match self {
            Model::Jacobi(j) => Analytic::MeanOnly(j.pi().to_vec()),
            other => Analytic::Full(other.exact_target().expect("known invariant").moments().completed()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub model: Model,
    pub integrator: IntegratorConfig,
    pub init: InitialCondition,
    pub window: (f64, f64),
    pub tolerances: Tolerances,
    pub out_dir: Option<PathBuf>,
}

/// Horizon and averaging window of the built-in stationary presets. The slowest
/// relaxation time of the shipped cases is about 27 time units, so the ensemble
/// is averaged over `[150, 300]`.
pub const PRESET_T_END: f64 = 300.0;
pub const PRESET_WINDOW: (f64, f64) = (150.0, 300.0);
pub const PRESET_SEED: u64 = 20_120_511;

/// `c11` of the three shipped two-component cases.
pub const PRESET_C11: [&str; 3] = ["1/80", "-1/80", "-1/4"];

/// The three two-component cases with `b = (1/10, 3/2)`, `S = (5/8, 2/5)`,
/// `kappa = (1/80, 3/10)`, started at the origin.
pub fn appendix_b_preset(case: usize) -> Option<RunConfig> {
    let c11 = *PRESET_C11.get(case.checked_sub(1)?)?;
    let text = format!(
        r#"
process = "gendir"

[coefficients]
b = ["1/10", "3/2"]
S = ["5/8", "2/5"]
kappa = ["1/80", "3/10"]
c = [["{c11}"]]

[integrator]
dt = 0.025
t_end = {PRESET_T_END}
particles = 10000
seed = {PRESET_SEED}
record_stride = 40

[init]
kind = "point"
point = [0, 0]

[output]
window = [{}, {}]
"#,
        PRESET_WINDOW.0, PRESET_WINDOW.1
    );
    Some(RunConfig::from_toml(&text).expect("preset is valid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn numbers() {
        assert_eq!(parse_number("3/10").unwrap(), 0.3);
        assert_eq!(parse_number("-1/80").unwrap(), -0.0125);
        assert_eq!(parse_number(" 2.5 ").unwrap(), 2.5);
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("x").is_err());
        assert_eq!(parse_list("5,2").unwrap(), vec![5.0, 2.0]);
    }

    #[test]
    fn presets_resolve() {
        for (case, beta1) in [(1, 5.0), (2, 7.0), (3, 26.0)] {
            let run = appendix_b_preset(case).unwrap().resolve().unwrap();
            let Model::GenDir { params, .. } = &run.model else { panic!("wrong model") };
            assert_relative_eq!(params.alpha()[0], 5.0, max_relative = 1e-12);
            assert_relative_eq!(params.alpha()[1], 2.0, max_relative = 1e-12);
            assert_relative_eq!(params.beta()[0], beta1, max_relative = 1e-12);
            assert_relative_eq!(params.beta()[1], 3.0, max_relative = 1e-12);
            assert_eq!(run.integrator.steps(), 12_000);
        }
        assert!(appendix_b_preset(0).is_none());
        assert!(appendix_b_preset(4).is_none());
    }

    #[test]
    fn bad_s_names_bound() {
        let text = appendix_b_preset_text().replace(r#"S = ["5/8", "2/5"]"#, r#"S = [1.2, "2/5"]"#);
        let err = RunConfig::from_toml(&text).unwrap().resolve().unwrap_err().to_string();
        assert!(err.contains("coefficients") && err.contains("0 < S < 1"), "{err}");
    }

    #[test]
    fn exclusive_blocks() {
        let text = format!("{}\n[distribution]\nalpha = [5, 2]\nbeta = [5, 3]\n", appendix_b_preset_text());
        let err = RunConfig::from_toml(&text).unwrap().resolve().unwrap_err().to_string();
        assert!(err.contains("not both"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = appendix_b_preset_text().replace("seed =", "sed =");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn distribution_block_with_default_kappa() {
        let text = r#"
[distribution]
alpha = [5, 2]
beta = [5, 3]
[integrator]
dt = 0.01
t_end = 1
particles = 10
seed = 3
"#;
        let run = RunConfig::from_toml(text).unwrap().resolve().unwrap();
        let Analytic::Full(m) = run.model.analytic() else { panic!() };
        assert_relative_eq!(m.mean()[0], 0.5, max_relative = 1e-14);
        assert_relative_eq!(m.mean()[2], 0.3, max_relative = 1e-14);
        assert_eq!(run.window, (0.5, 1.0));
    }

    fn appendix_b_preset_text() -> String {
        r#"
[coefficients]
b = ["1/10", "3/2"]
S = ["5/8", "2/5"]
kappa = ["1/80", "3/10"]
c = [["1/80"]]
[integrator]
dt = 0.025
t_end = 1
particles = 10
seed = 1
"#
        .to_string()
    }
}
