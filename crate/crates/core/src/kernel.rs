//! Drift and diffusion of the generalized Dirichlet SDE and the
//! potential-solution residual that certifies its invariant density.
//!
//! For `i = 1..K`
//!
//! ```text
//! a_i  = (U_i / 2) { b_i [S_i Y_N - (1 - S_i) y_i] + y_i Y_N sum_{j=i}^{K-1} c_ij / Y_j }
//! B_ii = kappa_i y_i Y_N U_i,      B_ij = 0 for i != j
//! ```
//!
//! where `Y_j` are the remainders and `U_i` the scaling factors of
//! [`crate::simplex`].

use thiserror::Error;

use crate::distributions::GenDirParams;
use crate::integrator::Process;
use crate::param_map::{sde_to_distribution, MapError, SdeCoefficients, ValidationError};
use crate::simplex::{
    fill_remainders, fill_scaling_factors, remainder_total, GeometryError, SimplexPoint, GEOMETRY_EPS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("point is not strictly inside the simplex")]
    NotInterior,
}

impl From<ValidationError> for KernelError {
    fn from(e: ValidationError) -> Self {
        KernelError::Map(MapError::Invalid(e))
    }
}

fn check_dim(c: &SdeCoefficients, y: &SimplexPoint) -> Result<(), KernelError> {
    if c.dim() != y.dim() {
        return Err(GeometryError::DimensionMismatch { expected: c.dim(), found: y.dim() }.into());
    }
    Ok(())
}

/// Remainders and scaling factors at one point.
struct Frame {
    rem: Vec<f64>,
    scale: Vec<f64>,
}

impl Frame {
    fn at(y: &[f64]) -> Result<Self, GeometryError> {
        let k = y.len();
        let mut rem = vec![0.0; k];
        let mut scale = vec![0.0; k];
        fill_remainders(y, &mut rem);
        fill_scaling_factors(&rem, &mut scale)?;
        Ok(Self { rem, scale })
    }
}

#[inline]
fn drift_into(c: &SdeCoefficients, y: &[f64], rem: &[f64], scale: &[f64], out: &mut [f64]) {
    let k = y.len();
    let tail = rem[k - 1].max(0.0);
    for i in 0..k {
        let mut v = c.b[i] * (c.s[i] * tail - (1.0 - c.s[i]) * y[i]);
        if y[i] != 0.0 {
            let coupling: f64 = (i..k - 1).map(|j| c.c.get(i, j) / rem[j]).sum();
            v += y[i] * tail * coupling;
        }
        out[i] = 0.5 * scale[i] * v;
    }
}

#[inline]
fn diffusion_into(c: &SdeCoefficients, y: &[f64], rem: &[f64], scale: &[f64], out: &mut [f64]) {
    let tail = rem[y.len() - 1].max(0.0);
    for (i, o) in out.iter_mut().enumerate() {
        *o = (c.kappa[i] * y[i].max(0.0) * tail * scale[i]).max(0.0);
    }
}

/// Drift vector `a(y)`.
pub fn drift(c: &SdeCoefficients, y: &SimplexPoint) -> Result<Vec<f64>, KernelError> {
    check_dim(c, y)?;
    let f = Frame::at(y.coords())?;
    let mut out = vec![0.0; y.dim()];
    drift_into(c, y.coords(), &f.rem, &f.scale, &mut out);
    Ok(out)
}

/// Diagonal of the diffusion matrix `B`; the noise amplitude is `sqrt(B_ii)`.
pub fn diffusion_diag(c: &SdeCoefficients, y: &SimplexPoint) -> Result<Vec<f64>, KernelError> {
    check_dim(c, y)?;
    let f = Frame::at(y.coords())?;
    let mut out = vec![0.0; y.dim()];
    diffusion_into(c, y.coords(), &f.rem, &f.scale, &mut out);
    Ok(out)
}

/// `dB_jj / dY_j` for each `j`, analytically:
/// `kappa_j U_j (Y_N - y_j) + kappa_j y_j Y_N U_j sum_{m=j}^{K-1} 1 / Y_m`.
pub fn diffusion_diag_derivative(c: &SdeCoefficients, y: &SimplexPoint) -> Result<Vec<f64>, KernelError> {
    check_dim(c, y)?;
    let k = y.dim();
    let f = Frame::at(y.coords())?;
    let tail = f.rem[k - 1];
    let yv = y.coords();
    Ok((0..k)
        .map(|j| {
            let inv_sum: f64 = (j..k - 1).map(|m| 1.0 / f.rem[m]).sum();
            c.kappa[j] * f.scale[j] * ((tail - yv[j]) + yv[j] * tail * inv_sum)
        })
        .collect())
}

/// Gradient of `-phi = sum (alpha_i - 1) ln y_i + sum gamma_i ln Y_i`:
/// `(alpha_j - 1) / y_j - sum_{i=j}^{K} gamma_i / Y_i`.
pub fn potential_gradient(p: &GenDirParams, y: &SimplexPoint) -> Result<Vec<f64>, KernelError> {
    let k = p.dim();
    if y.dim() != k {
        return Err(GeometryError::DimensionMismatch { expected: k, found: y.dim() }.into());
    }
    if !y.is_interior() {
        return Err(KernelError::NotInterior);
    }
    let rem = y.remainders();
    let rem = rem.as_slice();
    let gamma = p.gamma();
    // Suffix sums of gamma_i / Y_i.
    let mut out = vec![0.0; k];
    let mut acc = 0.0;
    for j in (0..k).rev() {
        acc += gamma[j] / rem[j];
        out[j] = (p.alpha()[j] - 1.0) / y.coords()[j] - acc;
    }
    Ok(out)
}

/// `grad(-phi)_j - (2 a_j - dB_jj/dY_j) / B_jj` for the target implied by `c`.
/// Vanishes identically when the invariant of the SDE is the generalized Dirichlet.
pub fn potential_residual(c: &SdeCoefficients, y: &SimplexPoint) -> Result<Vec<f64>, KernelError> {
    let target = sde_to_distribution(c)?;
    potential_residual_for(&target, c, y)
}

/// Residual of the potential condition against an explicitly given target.
/// Unlike [`potential_residual`] the coefficients need not map to `target`.
pub fn potential_residual_for(
    target: &GenDirParams,
    c: &SdeCoefficients,
    y: &SimplexPoint,
) -> Result<Vec<f64>, KernelError> {
    let grad = potential_gradient(target, y)?;
    let a = drift(c, y)?;
    let b = diffusion_diag(c, y)?;
    let db = diffusion_diag_derivative(c, y)?;
    Ok((0..y.dim()).map(|j| grad[j] - (2.0 * a[j] - db[j]) / b[j]).collect())
}

/// The generalized Dirichlet SDE as an integrable [`Process`].
#[derive(Debug, Clone)]
pub struct GenDirProcess {
    coeffs: SdeCoefficients,
}

impl GenDirProcess {
    pub fn new(coeffs: SdeCoefficients) -> Result<Self, ValidationError> {
        coeffs.validate()?;
        Ok(Self { coeffs })
    }

    pub fn coefficients(&self) -> &SdeCoefficients {
        &self.coeffs
    }
}

impl Process for GenDirProcess {
    fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    fn noise_dim(&self) -> usize {
        self.coeffs.dim()
    }

    fn diagonal_noise(&self) -> bool {
        true
    }

    fn evaluate(
        &self,
        y: &[f64],
        scratch: &mut Vec<f64>,
        drift: &mut [f64],
        noise: &mut [f64],
    ) -> Result<(), KernelError> {
        let k = y.len();
        scratch.resize(2 * k, 0.0);
        let (rem, scale) = scratch.split_at_mut(k);
        fill_remainders(y, rem);
        fill_scaling_factors(rem, scale)?;
        drift_into(&self.coeffs, y, rem, scale, drift);
        diffusion_into(&self.coeffs, y, rem, scale, noise);
        for v in noise.iter_mut() {
            *v = v.sqrt();
        }
        Ok(())
    }

    /// Inner faces `Y_j = 0`, `j < K`, are singular for the drift and are excluded.
    fn admissible(&self, y: &[f64]) -> bool {
        let k = y.len();
        let mut rem = 1.0;
        for (i, &v) in y.iter().enumerate() {
            if !(v >= 0.0) {
                return false;
            }
            rem -= v;
            if i + 1 < k && !(rem > GEOMETRY_EPS) {
                return false;
            }
        }
        remainder_total(y) >= 0.0
    }
}
