//! Neighbouring diffusions on the simplex: the standard Dirichlet SDE, the
//! multivariate Wright-Fisher and Jacobi processes, and the univariate beta
//! SDE. They serve as cross-checks of the generalized kernel.

use thiserror::Error;

use crate::distributions::{BetaParams, DirichletParams, ParamError};
use crate::integrator::Process;
use crate::kernel::KernelError;
use crate::simplex::{remainder_total, GeometryError, SimplexPoint};

/// Relative tolerance for the consistency of the Dirichlet SDE tail exponents.
const CHAIN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelatedError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{name} must lie in {range}, got {value}")]
    OutOfRange { name: &'static str, range: &'static str, value: f64 },
    #[error("{name}[{}] must lie in (0, 1), got {value}", index + 1)]
    NotUnitInterval { name: &'static str, index: usize, value: f64 },
    #[error("pi must sum to 1, sums to {0}")]
    NotNormalized(f64),
    #[error("b_i (1 - S_i) / kappa_i must agree across components: {0:?}")]
    InconsistentTail(Vec<f64>),
}

/// Dense row-major noise factor `G`, so the increment is `G dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl NoiseMatrix {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// `G G^T`, the diffusion matrix.
    pub fn outer(&self) -> Vec<f64> {
        let n = self.rows;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                out[i * n + k] = (0..self.cols).map(|j| self.get(i, j) * self.get(k, j)).sum();
            }
        }
        out
    }
}

fn positive(name: &'static str, v: &[f64]) -> Result<(), ParamError> {
    for (index, &value) in v.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(ParamError::NotPositive { name, index, value });
        }
    }
    Ok(())
}

fn unit_interval(name: &'static str, v: &[f64]) -> Result<(), RelatedError> {
    for (index, &value) in v.iter().enumerate() {
        if !(value > 0.0 && value < 1.0) {
            return Err(RelatedError::NotUnitInterval { name, index, value });
        }
    }
    Ok(())
}

fn same_len(name: &'static str, expected: usize, found: usize) -> Result<(), ParamError> {
    if expected != found {
        return Err(ParamError::LengthMismatch { name, expected, found });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Dirichlet SDE

/// `dY_i = (b_i/2)[S_i Y_N - (1 - S_i) Y_i] dt + sqrt(kappa_i Y_i Y_N) dW_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSde {
    pub b: Vec<f64>,
    pub s: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl DirichletSde {
    pub fn new(b: Vec<f64>, s: Vec<f64>, kappa: Vec<f64>) -> Result<Self, RelatedError> {
        if b.is_empty() {
            return Err(ParamError::TooShort { name: "b", min: 1, found: 0 }.into());
        }
        same_len("S", b.len(), s.len())?;
        same_len("kappa", b.len(), kappa.len())?;
        positive("b", &b)?;
        positive("kappa", &kappa)?;
        unit_interval("S", &s)?;
        Ok(Self { b, s, kappa })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// The Dirichlet invariant `omega_i = b_i S_i / kappa_i`, `omega_N = b_i (1 - S_i) / kappa_i`,
    /// provided the last expression is the same for every `i`.
    pub fn invariant(&self) -> Result<DirichletParams, RelatedError> {
        let tails: Vec<f64> = (0..self.dim()).map(|i| self.b[i] * (1.0 - self.s[i]) / self.kappa[i]).collect();
        let (lo, hi) = tails.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &t| (lo.min(t), hi.max(t)));
        if hi - lo > CHAIN_TOLERANCE * hi {
            return Err(RelatedError::InconsistentTail(tails));
        }
        let mut omega: Vec<f64> = (0..self.dim()).map(|i| self.b[i] * self.s[i] / self.kappa[i]).collect();
        omega.push(tails[0]);
        Ok(DirichletParams::new(omega)?)
    }

    fn fill(&self, y: &[f64], drift: &mut [f64], diffusion: &mut [f64]) {
        let tail = remainder_total(y).max(0.0);
        for i in 0..y.len() {
            drift[i] = 0.5 * self.b[i] * (self.s[i] * tail - (1.0 - self.s[i]) * y[i]);
            diffusion[i] = self.kappa[i] * y[i].max(0.0) * tail;
        }
    }
}

/// Drift and diagonal diffusion of the Dirichlet SDE.
pub fn dirichlet_sde_drift_diff(
    b: &[f64],
    s: &[f64],
    kappa: &[f64],
    y: &SimplexPoint,
) -> Result<(Vec<f64>, Vec<f64>), RelatedError> {
    let sde = DirichletSde::new(b.to_vec(), s.to_vec(), kappa.to_vec())?;
    same_len("y", sde.dim(), y.dim())?;
    let mut drift = vec![0.0; y.dim()];
    let mut diffusion = vec![0.0; y.dim()];
    sde.fill(y.coords(), &mut drift, &mut diffusion);
    Ok((drift, diffusion))
}

impl Process for DirichletSde {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn noise_dim(&self) -> usize {
        self.b.len()
    }

    fn diagonal_noise(&self) -> bool {
        true
    }

    fn evaluate(&self, y: &[f64], _: &mut Vec<f64>, drift: &mut [f64], noise: &mut [f64]) -> Result<(), KernelError> {
        self.fill(y, drift, noise);
        for v in noise.iter_mut() {
            *v = v.sqrt();
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Wright-Fisher

/// `dY_i = (omega_i - omega Y_i)/2 dt + sum_j sqrt(Y_i (delta_ij - Y_j)) dW_ij`, with
/// `omega = sum omega_j` over all `N` types.
#[derive(Debug, Clone, PartialEq)]
pub struct WrightFisher {
    omega: Vec<f64>,
    total: f64,
}

/// Literal Wright-Fisher coefficients; `clipped` counts radicands below zero
/// that were replaced by zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WrightFisherTerms {
    pub drift: Vec<f64>,
    pub noise: NoiseMatrix,
    pub clipped: usize,
}

impl WrightFisher {
    pub fn new(omega: Vec<f64>) -> Result<Self, RelatedError> {
        if omega.len() < 2 {
            return Err(ParamError::TooShort { name: "omega", min: 2, found: omega.len() }.into());
        }
        positive("omega", &omega)?;
        let total = omega.iter().sum();
        Ok(Self { omega, total })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Number of free coordinates, `N - 1`.
    pub fn dim(&self) -> usize {
        self.omega.len() - 1
    }

    pub fn invariant(&self) -> DirichletParams {
        DirichletParams::new(self.omega.clone()).expect("validated at construction")
    }

    fn fill_drift(&self, y: &[f64], drift: &mut [f64]) {
        for (i, d) in drift.iter_mut().enumerate() {
            *d = 0.5 * (self.omega[i] - self.total * y[i]);
        }
    }
}

/// Drift and the `K x K` noise factor exactly as written, radicands clipped at zero.
pub fn wright_fisher_drift_diff(p: &WrightFisher, y: &SimplexPoint) -> Result<WrightFisherTerms, RelatedError> {
    let k = p.dim();
    same_len("y", k, y.dim())?;
    let yv = y.coords();
    let mut drift = vec![0.0; k];
    p.fill_drift(yv, &mut drift);
    let mut noise = NoiseMatrix::zeros(k, k);
    let mut clipped = 0;
    for i in 0..k {
        for j in 0..k {
            let delta = if i == j { 1.0 } else { 0.0 };
            let r = yv[i] * (delta - yv[j]);
            if r < 0.0 {
                clipped += 1;
            }
            noise.set(i, j, r.max(0.0).sqrt());
        }
    }
    Ok(WrightFisherTerms { drift, noise, clipped })
}

/// A factor `G` with `G G^T = Y_i (delta_ij - Y_j)` over `N` Wiener components:
/// `G_ij = (delta_ij - Y_i) sqrt(Y_j)`, `j = 1..N`.
pub fn wright_fisher_exact_factor(y: &SimplexPoint) -> NoiseMatrix {
    let full = y.full_point();
    let k = y.dim();
    let mut g = NoiseMatrix::zeros(k, k + 1);
    fill_wf_factor(&full, &mut g.data);
    g
}

fn fill_wf_factor(full: &[f64], out: &mut [f64]) {
    let n = full.len();
    for i in 0..n - 1 {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            out[i * n + j] = (delta - full[i]) * full[j].max(0.0).sqrt();
        }
    }
}

impl Process for WrightFisher {
    fn dim(&self) -> usize {
        self.omega.len() - 1
    }

    fn noise_dim(&self) -> usize {
        self.omega.len()
    }

    fn evaluate(
        &self,
        y: &[f64],
        scratch: &mut Vec<f64>,
        drift: &mut [f64],
        noise: &mut [f64],
    ) -> Result<(), KernelError> {
        self.fill_drift(y, drift);
        scratch.clear();
        scratch.extend_from_slice(y);
        scratch.push(remainder_total(y));
        fill_wf_factor(scratch, noise);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Jacobi

/// `dY_i = a (Y_i - pi_i) dt + sqrt(c Y_i) dW_i - Y_i sum_{j<N} sqrt(c Y_j) dW_j`,
/// with `a < 0`, `c > 0` and `pi` on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobi {
    pub a: f64,
    pub c: f64,
    pi: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: f64, c: f64, pi: Vec<f64>) -> Result<Self, RelatedError> {
        if !(a < 0.0 && a.is_finite()) {
            return Err(RelatedError::OutOfRange { name: "a", range: "(-inf, 0)", value: a });
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(RelatedError::OutOfRange { name: "c", range: "(0, inf)", value: c });
        }
        if pi.len() < 2 {
            return Err(ParamError::TooShort { name: "pi", min: 2, found: pi.len() }.into());
        }
        positive("pi", &pi)?;
        let sum: f64 = pi.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(RelatedError::NotNormalized(sum));
        }
        Ok(Self { a, c, pi })
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    fn fill_noise(&self, full: &[f64], rows: usize, out: &mut [f64]) {
        let m = full.len() - 1;
        for i in 0..rows {
            for j in 0..m {
                let root = (self.c * full[j].max(0.0)).sqrt();
                let own = if i == j { root } else { 0.0 };
                out[i * m + j] = own - full[i] * root;
            }
        }
    }
}

/// Drift for all `N` coordinates and the `N x (N-1)` noise factor, as written.
pub fn jacobi_drift_diff(p: &Jacobi, y: &[f64]) -> Result<(Vec<f64>, NoiseMatrix), RelatedError> {
    let n = p.pi.len();
    same_len("y", n, y.len())?;
    let drift = y.iter().zip(&p.pi).map(|(&v, &pi)| p.a * (v - pi)).collect();
    let mut noise = NoiseMatrix::zeros(n, n - 1);
    p.fill_noise(y, n, &mut noise.data);
    Ok((drift, noise))
}

impl Process for Jacobi {
    fn dim(&self) -> usize {
        self.pi.len() - 1
    }

    fn noise_dim(&self) -> usize {
        self.pi.len() - 1
    }

    fn evaluate(
        &self,
        y: &[f64],
        scratch: &mut Vec<f64>,
        drift: &mut [f64],
        noise: &mut [f64],
    ) -> Result<(), KernelError> {
        for (i, d) in drift.iter_mut().enumerate() {
            *d = self.a * (y[i] - self.pi[i]);
        }
        scratch.clear();
        scratch.extend_from_slice(y);
        scratch.push(remainder_total(y));
        self.fill_noise(scratch, y.len(), noise);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Beta SDE

/// `dY = (b/2)(S - Y) dt + sqrt(kappa Y (1 - Y)) dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSde {
    pub b: f64,
    pub s: f64,
    pub kappa: f64,
}

impl BetaSde {
    pub fn new(b: f64, s: f64, kappa: f64) -> Result<Self, RelatedError> {
        positive("b", &[b])?;
        positive("kappa", &[kappa])?;
        unit_interval("S", &[s])?;
        Ok(Self { b, s, kappa })
    }

    /// `Beta(b S / kappa, b (1 - S) / kappa)`.
    pub fn invariant(&self) -> BetaParams {
        BetaParams::new(self.b * self.s / self.kappa, self.b * (1.0 - self.s) / self.kappa)
            .expect("validated at construction")
    }
}

pub fn beta_sde_drift_diff(p: &BetaSde, y: f64) -> Result<(f64, f64), RelatedError> {
    if !(0.0..=1.0).contains(&y) {
        return Err(RelatedError::OutOfRange { name: "y", range: "[0, 1]", value: y });
    }
    Ok((0.5 * p.b * (p.s - y), p.kappa * y * (1.0 - y)))
}

impl Process for BetaSde {
    fn dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn diagonal_noise(&self) -> bool {
        true
    }

    fn evaluate(&self, y: &[f64], _: &mut Vec<f64>, drift: &mut [f64], noise: &mut [f64]) -> Result<(), KernelError> {
        let v = y[0].clamp(0.0, 1.0);
        drift[0] = 0.5 * self.b * (self.s - y[0]);
        noise[0] = (self.kappa * v * (1.0 - v)).sqrt();
        Ok(())
    }
}
