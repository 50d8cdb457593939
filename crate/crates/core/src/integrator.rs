//! Euler-Maruyama integration of a particle ensemble on the simplex.
//!
//! Each particle advances as `y' = y + a(y) dt + G(y) dW` with `dW` drawn from
//! the counter-based streams of [`crate::rng`]. A proposal that leaves the
//! admissible set is redrawn from a fresh retry stream up to
//! `boundary_retries` times, then projected inside with margin
//! [`BOUNDARY_MARGIN`] and counted as clamped.
//!
//! Particles are processed in fixed chunks of [`PARTICLE_CHUNK`]; per-chunk
//! statistics are combined by a fixed pairwise tree, so results are
//! bit-identical for any number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::distributions::GenDirParams;
use crate::kernel::KernelError;
use crate::rng::{Domain, NormalStream, MAX_ATTEMPTS};
use crate::simplex::{project_with_margin, remainder_total, unit_sum_error_ulps, SimplexPoint};
use crate::stats::{MomentTimeSeries, OnlineMoments, StatsError};

pub const PARTICLE_CHUNK: usize = 256;
pub const BOUNDARY_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("invalid integrator configuration: {0}")]
    Config(String),
    #[error("initial condition has dimension {found}, process needs {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("non-finite state for particle {particle} at step {step}")]
    NonFinite { particle: u64, step: u64 },
    #[error("particle {particle} at step {step}: {source}")]
    Kernel { particle: u64, step: u64, source: KernelError },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// A diffusion on the simplex that the integrator can advance.
pub trait Process: Sync {
    /// Number of free coordinates `K`.
    fn dim(&self) -> usize;

    /// Number of independent Wiener components.
    fn noise_dim(&self) -> usize;

    /// When true, `noise` in [`Process::evaluate`] holds the diagonal of the
    /// noise factor (length `dim`), otherwise the full `dim x noise_dim`
    /// factor, row-major.
    fn diagonal_noise(&self) -> bool {
        false
    }

    fn evaluate(
        &self,
        y: &[f64],
        scratch: &mut Vec<f64>,
        drift: &mut [f64],
        noise: &mut [f64],
    ) -> Result<(), KernelError>;

    /// Whether a proposed state may be accepted.
    fn admissible(&self, y: &[f64]) -> bool {
        y.iter().all(|&v| v >= 0.0) && remainder_total(y) >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub particles: usize,
    pub seed: u64,
    pub boundary_retries: u32,
    /// Steps between moment records.
    pub record_stride: u64,
    /// Number of leading particles whose coordinates are kept at each record.
    pub trajectory_particles: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 0.025,
            t_end: 300.0,
            particles: 10_000,
            seed: 1,
            boundary_retries: 10,
            record_stride: 40,
            trajectory_particles: 0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), IntegrationError> {
        let bad = |m: &str| Err(IntegrationError::Config(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive and finite");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be non-negative and finite");
        }
        if self.particles == 0 {
            return bad("at least one particle is required");
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1");
        }
        if self.boundary_retries >= MAX_ATTEMPTS {
            return bad("boundary_retries is too large");
        }
        if self.steps() > u64::from(u32::MAX) {
            return bad("too many time steps");
        }
        Ok(())
    }

    /// Number of steps, `t_end / dt` rounded to the nearest integer.
    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}

#[derive(Debug, Clone)]
pub enum InitialCondition {
    /// Every particle at the same point.
    Point(SimplexPoint),
    /// Independent exact draws from a generalized Dirichlet target.
    ExactSample(GenDirParams),
    /// Explicit per-particle points; the count must equal the particle count.
    Points(Vec<SimplexPoint>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    dim: usize,
    coords: Vec<f64>,
    pub t: f64,
    pub step_index: u64,
}

impl EnsembleState {
    pub fn at_point(point: &SimplexPoint, particles: usize) -> Self {
        let dim = point.dim();
        let mut coords = Vec::with_capacity(dim * particles);
        for _ in 0..particles {
            coords.extend_from_slice(point.coords());
        }
        Self { dim, coords, t: 0.0, step_index: 0 }
    }

    pub fn from_points(points: &[SimplexPoint]) -> Result<Self, IntegrationError> {
        let dim = points.first().map(|p| p.dim()).ok_or(IntegrationError::Config("no particles".into()))?;
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            if p.dim() != dim {
                return Err(IntegrationError::Dimension { expected: dim, found: p.dim() });
            }
            coords.extend_from_slice(p.coords());
        }
        Ok(Self { dim, coords, t: 0.0, step_index: 0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point(&self, i: usize) -> SimplexPoint {
        SimplexPoint::from_trusted(self.particle(i).to_vec())
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn particles(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StepDiagnostics {
    pub particle_steps: u64,
    /// Extra draws beyond the first attempt.
    pub redraws: u64,
    /// Particles projected back after exhausting the retries.
    pub clamped: u64,
}

impl std::ops::AddAssign for StepDiagnostics {
    fn add_assign(&mut self, o: Self) {
        self.particle_steps += o.particle_steps;
        self.redraws += o.redraws;
        self.clamped += o.clamped;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunDiagnostics {
    pub steps: StepDiagnostics,
    /// Particle states examined at record times.
    pub checked_states: u64,
    /// Largest `|sum(full point) - 1|` seen at record times, in units of `f64::EPSILON`.
    pub max_unit_sum_ulps: f64,
    pub min_coordinate: f64,
    pub max_coordinate: f64,
}

impl Default for RunDiagnostics {
    fn default() -> Self {
        Self {
            steps: StepDiagnostics::default(),
            checked_states: 0,
            max_unit_sum_ulps: 0.0,
            min_coordinate: f64::INFINITY,
            max_coordinate: f64::NEG_INFINITY,
        }
    }
}

impl RunDiagnostics {
    pub fn clamped_fraction(&self) -> f64 {
        if self.steps.particle_steps == 0 {
            0.0
        } else {
            self.steps.clamped as f64 / self.steps.particle_steps as f64
        }
    }

    fn absorb(&mut self, o: &RunDiagnostics) {
        self.checked_states += o.checked_states;
        self.max_unit_sum_ulps = self.max_unit_sum_ulps.max(o.max_unit_sum_ulps);
        self.min_coordinate = self.min_coordinate.min(o.min_coordinate);
        self.max_coordinate = self.max_coordinate.max(o.max_coordinate);
    }
}

/// Coordinates of the leading particles at one record time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub series: MomentTimeSeries,
    pub final_state: EnsembleState,
    pub diagnostics: RunDiagnostics,
    pub trajectories: Vec<TrajectorySample>,
}

struct Workspace {
    drift: Vec<f64>,
    noise: Vec<f64>,
    normals: Vec<f64>,
    proposal: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    fn for_process<P: Process + ?Sized>(p: &P) -> Self {
        let k = p.dim();
        let m = p.noise_dim();
        Self {
            drift: vec![0.0; k],
            noise: vec![0.0; if p.diagonal_noise() { k } else { k * m }],
            normals: vec![0.0; m],
            proposal: vec![0.0; k],
            scratch: Vec::new(),
        }
    }
}

fn advance_particle<P: Process + ?Sized>(
    process: &P,
    cfg: &IntegratorConfig,
    particle: u64,
    step: u64,
    y: &mut [f64],
    ws: &mut Workspace,
    diag: &mut StepDiagnostics,
) -> Result<(), IntegrationError> {
    diag.particle_steps += 1;
    if cfg.dt == 0.0 {
        return Ok(());
    }
    let k = y.len();
    let m = process.noise_dim();
    process.evaluate(y, &mut ws.scratch, &mut ws.drift, &mut ws.noise).map_err(|source| IntegrationError::Kernel {
        particle,
        step,
        source,
    })?;
    let sqrt_dt = cfg.dt.sqrt();
    for attempt in 0..=cfg.boundary_retries {
        NormalStream::new(cfg.seed, Domain::Increment, particle, step, attempt).fill_normals(&mut ws.normals);
        for i in 0..k {
            let noise = if process.diagonal_noise() {
                ws.noise[i] * ws.normals[i]
            } else {
                let row = &ws.noise[i * m..(i + 1) * m];
                row.iter().zip(&ws.normals).map(|(g, z)| g * z).sum()
            };
            ws.proposal[i] = y[i] + ws.drift[i] * cfg.dt + noise * sqrt_dt;
        }
        if ws.proposal.iter().any(|v| !v.is_finite()) {
            return Err(IntegrationError::NonFinite { particle, step });
        }
        if process.admissible(&ws.proposal) {
            y.copy_from_slice(&ws.proposal);
            diag.redraws += u64::from(attempt);
            return Ok(());
        }
    }
    diag.redraws += u64::from(cfg.boundary_retries);
    diag.clamped += 1;
    project_with_margin(&mut ws.proposal, BOUNDARY_MARGIN);
    y.copy_from_slice(&ws.proposal);
    Ok(())
}

/// Advances every particle by one step of size `cfg.dt` (a zero step leaves the
/// particles unchanged).
pub fn em_step<P: Process + ?Sized>(
    process: &P,
    state: &mut EnsembleState,
    cfg: &IntegratorConfig,
) -> Result<StepDiagnostics, IntegrationError> {
    if state.dim != process.dim() {
        return Err(IntegrationError::Dimension { expected: process.dim(), found: state.dim });
    }
    let k = state.dim;
    let step = state.step_index;
    let parts: Vec<Result<StepDiagnostics, IntegrationError>> = state
        .coords
        .par_chunks_mut(PARTICLE_CHUNK * k)
        .enumerate()
        .map(|(chunk, coords)| {
            let mut ws = Workspace::for_process(process);
            let mut diag = StepDiagnostics::default();
            for (offset, y) in coords.chunks_exact_mut(k).enumerate() {
                let particle = (chunk * PARTICLE_CHUNK + offset) as u64;
                advance_particle(process, cfg, particle, step, y, &mut ws, &mut diag)?;
            }
            Ok(diag)
        })
        .collect();
    let mut total = StepDiagnostics::default();
    for p in parts {
        total += p?;
    }
    state.step_index += 1;
    state.t += cfg.dt;
    Ok(total)
}

/// Ensemble moments of the completed points plus invariant checks.
fn observe(state: &EnsembleState) -> Result<(OnlineMoments, RunDiagnostics), IntegrationError> {
    let k = state.dim;
    let parts: Vec<(OnlineMoments, RunDiagnostics)> = state
        .coords
        .par_chunks(PARTICLE_CHUNK * k)
        .map(|coords| {
            let mut acc = OnlineMoments::new(k + 1);
            let mut diag = RunDiagnostics::default();
            let mut full = vec![0.0; k + 1];
            for y in coords.chunks_exact(k) {
                full[..k].copy_from_slice(y);
                full[k] = remainder_total(y);
                acc.accumulate(&full).expect("dimension fixed");
                diag.checked_states += 1;
                diag.max_unit_sum_ulps = diag.max_unit_sum_ulps.max(unit_sum_error_ulps(y));
                for &v in &full {
                    diag.min_coordinate = diag.min_coordinate.min(v);
                    diag.max_coordinate = diag.max_coordinate.max(v);
                }
            }
            (acc, diag)
        })
        .collect();
    let mut diag = RunDiagnostics::default();
    let mut accs = Vec::with_capacity(parts.len());
    for (a, d) in parts {
        diag.absorb(&d);
        accs.push(a);
    }
    let acc = OnlineMoments::merge_tree(accs).ok_or(StatsError::Empty)?;
    Ok((acc, diag))
}

/// Independent stick-breaking draws `y_i = v_i prod_{k<i} (1 - v_k)`, `v_i ~ Beta(alpha_i, beta_i)`.
fn exact_sample_state<P: Process + ?Sized>(
    process: &P,
    target: &GenDirParams,
    cfg: &IntegratorConfig,
) -> Result<EnsembleState, IntegrationError> {
    let k = target.dim();
    let betas: Vec<Beta<f64>> = target
        .alpha()
        .iter()
        .zip(target.beta())
        .map(|(&a, &b)| Beta::new(a, b).map_err(|e| IntegrationError::Config(e.to_string())))
        .collect::<Result<_, _>>()?;
    let mut coords = vec![0.0; k * cfg.particles];
    coords.par_chunks_mut(k).enumerate().for_each(|(i, y)| {
        let seed = NormalStream::new(cfg.seed, Domain::Initial, i as u64, 0, 0).derived_seed();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stick = 1.0;
        for (yi, beta) in y.iter_mut().zip(&betas) {
            let v = beta.sample(&mut rng);
            *yi = v * stick;
            stick *= 1.0 - v;
        }
        if !process.admissible(y) {
            project_with_margin(y, BOUNDARY_MARGIN);
        }
    });
    Ok(EnsembleState { dim: k, coords, t: 0.0, step_index: 0 })
}

fn initial_state<P: Process + ?Sized>(
    process: &P,
    cfg: &IntegratorConfig,
    init: &InitialCondition,
) -> Result<EnsembleState, IntegrationError> {
    let state = match init {
        InitialCondition::Point(p) => EnsembleState::at_point(p, cfg.particles),
        InitialCondition::Points(ps) => {
            if ps.len() != cfg.particles {
                return Err(IntegrationError::Config(format!(
                    "{} initial points for {} particles",
                    ps.len(),
                    cfg.particles
                )));
            }
            EnsembleState::from_points(ps)?
        }
        InitialCondition::ExactSample(target) => exact_sample_state(process, target, cfg)?,
    };
    if state.dim != process.dim() {
        return Err(IntegrationError::Dimension { expected: process.dim(), found: state.dim });
    }
    Ok(state)
}

/// Runs `cfg.steps()` steps from `init`, recording ensemble moments of the
/// completed `N = K + 1` vector at step 0, every `record_stride` steps and at the
/// final step.
pub fn simulate<P: Process + ?Sized>(
    process: &P,
    cfg: &IntegratorConfig,
    init: &InitialCondition,
) -> Result<SimulationOutput, IntegrationError> {
    cfg.validate()?;
    let mut state = initial_state(process, cfg, init)?;
    let steps = cfg.steps();
    let mut series = MomentTimeSeries::new();
    let mut diagnostics = RunDiagnostics::default();
    let mut trajectories = Vec::new();
    let mut record = |state: &EnsembleState, diagnostics: &mut RunDiagnostics| -> Result<(), IntegrationError> {
        let (acc, d) = observe(state)?;
        diagnostics.absorb(&d);
        series.push(acc.finalize(state.t)?)?;
        let n = cfg.trajectory_particles.min(state.len());
        if n > 0 {
            trajectories.push(TrajectorySample { t: state.t, coords: state.coords[..n * state.dim].to_vec() });
        }
        Ok(())
    };
    record(&state, &mut diagnostics)?;
    for n in 1..=steps {
        let d = em_step(process, &mut state, cfg)?;
        diagnostics.steps += d;
        // Re-derive the clock from the step count to avoid accumulated drift.
        state.t = n as f64 * cfg.dt;
        if n % cfg.record_stride == 0 || n == steps {
            record(&state, &mut diagnostics)?;
        }
    }
    Ok(SimulationOutput { series, final_state: state, diagnostics, trajectories })
}

/// Runs `f` on a dedicated pool of `threads` workers (0 means the rayon default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R, IntegrationError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| IntegrationError::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}
