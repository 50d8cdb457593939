//! Generalized Dirichlet, Dirichlet and beta distributions on the simplex.
//!
//! Densities are evaluated in log space. Moment formulas are generic over
//! [`Scalar`] so they can be checked in exact rational arithmetic.

use libm::lgamma;
use thiserror::Error;

use crate::scalar::{sum, Scalar};
use crate::simplex::{fill_remainders, GeometryError, SimplexPoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} must have at least {min} entries, found {found}")]
    TooShort { name: &'static str, min: usize, found: usize },
    #[error("{name} has {found} entries but {expected} are required")]
    LengthMismatch { name: &'static str, expected: usize, found: usize },
    #[error("{name}[{index}] = {value} must be positive and finite")]
    NotPositive { name: &'static str, index: usize, value: f64 },
}

fn check_positive<T: Scalar>(name: &'static str, v: &[T]) -> Result<(), ParamError> {
    for (index, &x) in v.iter().enumerate() {
        if !(x.is_positive() && x.is_finite_value()) {
            return Err(ParamError::NotPositive { name, index, value: x.as_f64() });
        }
    }
    Ok(())
}

/// Log-density value with a flag for points on the simplex boundary, where the
/// value may be `+inf`, `-inf` or (for conflicting exponents) NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDensity {
    pub value: f64,
    pub on_boundary: bool,
}

/// `a * ln(x)` with the boundary conventions `0 * ln 0 = 0` and `a * ln 0 = -a * inf`.
fn xlogy(a: f64, x: f64) -> f64 {
    if x > 0.0 {
        a * x.ln()
    } else if a == 0.0 {
        0.0
    } else if a > 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    }
}

/// Lochner's generalized Dirichlet parameters `(alpha_i, beta_i)`, `i = 1..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenDirParams<T: Scalar = f64> {
    alpha: Vec<T>,
    beta: Vec<T>,
}

impl<T: Scalar> GenDirParams<T> {
    pub fn new(alpha: Vec<T>, beta: Vec<T>) -> Result<Self, ParamError> {
        if alpha.is_empty() {
            return Err(ParamError::TooShort { name: "alpha", min: 1, found: 0 });
        }
        if beta.len() != alpha.len() {
            return Err(ParamError::LengthMismatch { name: "beta", expected: alpha.len(), found: beta.len() });
        }
        check_positive("alpha", &alpha)?;
        check_positive("beta", &beta)?;
        Ok(Self { alpha, beta })
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    /// Exponents of the remainders: `gamma_i = beta_i - alpha_{i+1} - beta_{i+1}`,
    /// `gamma_K = beta_K - 1`.
    pub fn gamma(&self) -> Vec<T> {
        let k = self.dim();
        (0..k)
            .map(
                |i| {
                    if i + 1 < k {
                        self.beta[i] - self.alpha[i + 1] - self.beta[i + 1]
                    } else {
                        self.beta[i] - T::one()
                    }
                },
            )
            .collect()
    }

    /// True when `gamma_1 = ... = gamma_{K-1} = 0` exactly.
    pub fn is_dirichlet(&self) -> bool {
        let g = self.gamma();
        g[..g.len() - 1].iter().all(|&x| x == T::zero())
    }

    /// The standard Dirichlet with `omega = (alpha_1..alpha_K, beta_K)`.
    /// Only meaningful under the `gamma = 0` reduction.
    pub fn dirichlet_omega(&self) -> Vec<T> {
        let mut omega = self.alpha.clone();
        omega.push(self.beta[self.dim() - 1]);
        omega
    }

    pub fn moments(&self) -> MomentSet<T> {
        let k = self.dim();
        let one = T::one();
        let mut mean = Vec::with_capacity(k);
        // Per-row bracket factors of the covariance.
        let mut diag_factor = Vec::with_capacity(k);
        let mut off_factor = Vec::with_capacity(k);
        let mut tail = one; // prod_{j<i} beta_j / (alpha_j + beta_j)
        let mut m_prev = one; // prod_{k<i} (beta_k + 1) / (alpha_k + beta_k + 1)
        for i in 0..k {
            let (a, b) = (self.alpha[i], self.beta[i]);
            let mi = a / (a + b) * tail;
            mean.push(mi);
            diag_factor.push((a + one) / (a + b + one) * m_prev - mi);
            off_factor.push(a / (a + b + one) * m_prev - mi);
            tail = tail * (b / (a + b));
            m_prev = m_prev * ((b + one) / (a + b + one));
        }
        let mut cov = vec![T::zero(); k * k];
        for i in 0..k {
            cov[i * k + i] = mean[i] * diag_factor[i];
            for j in i + 1..k {
                let v = mean[j] * off_factor[i];
                cov[i * k + j] = v;
                cov[j * k + i] = v;
            }
        }
        MomentSet { mean, cov }
    }

    /// Signs of the covariances `cov_ij`, `i < j`.
    pub fn covariance_signs(&self) -> CovarianceSigns {
        let m = self.moments();
        let k = self.dim();
        let mut signs = Vec::with_capacity(k * (k - 1) / 2);
        for i in 0..k {
            for j in i + 1..k {
                signs.push(sign_of(m.cov(i, j)));
            }
        }
        let s = CovarianceSigns { dim: k, signs };
        debug_assert!(s.rows_constant());
        debug_assert!(s.first_row_nonpositive());
        s
    }
}

impl GenDirParams<f64> {
    pub fn log_normalizer(&self) -> f64 {
        self.alpha.iter().zip(&self.beta).map(|(&a, &b)| lgamma(a + b) - lgamma(a) - lgamma(b)).sum()
    }

    pub fn log_density(&self, y: &SimplexPoint) -> Result<LogDensity, GeometryError> {
        let k = self.dim();
        if y.dim() != k {
            return Err(GeometryError::DimensionMismatch { expected: k, found: y.dim() });
        }
        let mut rem = vec![0.0; k];
        fill_remainders(y.coords(), &mut rem);
        let gamma = self.gamma();
        let mut value = self.log_normalizer();
        let mut on_boundary = false;
        for i in 0..k {
            let yi = y.coords()[i].max(0.0);
            let ri = rem[i].max(0.0);
            on_boundary |= yi <= 0.0 || ri <= 0.0;
            value += xlogy(self.alpha[i] - 1.0, yi) + xlogy(gamma[i], ri);
        }
        Ok(LogDensity { value, on_boundary })
    }
}

/// Standard Dirichlet over `N = K + 1` components.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams<T: Scalar = f64> {
    omega: Vec<T>,
}

impl<T: Scalar> DirichletParams<T> {
    pub fn new(omega: Vec<T>) -> Result<Self, ParamError> {
        if omega.len() < 2 {
            return Err(ParamError::TooShort { name: "omega", min: 2, found: omega.len() });
        }
        check_positive("omega", &omega)?;
        Ok(Self { omega })
    }

    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    /// Number of free coordinates, `K = N - 1`.
    pub fn dim(&self) -> usize {
        self.omega.len() - 1
    }

    pub fn total(&self) -> T {
        sum(self.omega.iter().copied())
    }

    /// Equivalent generalized Dirichlet parameters: `alpha_i = omega_i`,
    /// `beta_i = omega_{i+1} + ... + omega_N`, so every `gamma_i`, `i < K`, is zero.
    pub fn to_gen_dir(&self) -> GenDirParams<T> {
        let k = self.dim();
        let mut beta = vec![T::zero(); k];
        let mut acc = self.omega[k];
        for i in (0..k).rev() {
            beta[i] = acc;
            acc = acc + self.omega[i];
        }
        GenDirParams { alpha: self.omega[..k].to_vec(), beta }
    }

    pub fn moments(&self) -> MomentSet<T> {
        let k = self.dim();
        let w = self.total();
        let denom = w * w * (w + T::one());
        let mean = self.omega[..k].iter().map(|&o| o / w).collect();
        let mut cov = vec![T::zero(); k * k];
        for i in 0..k {
            for j in 0..k {
                let (oi, oj) = (self.omega[i], self.omega[j]);
                cov[i * k + j] = if i == j { oi * (w - oi) / denom } else { T::zero() - oi * oj / denom };
            }
        }
        MomentSet { mean, cov }
    }
}

impl DirichletParams<f64> {
    pub fn log_density(&self, y: &SimplexPoint) -> Result<LogDensity, GeometryError> {
        let k = self.dim();
        if y.dim() != k {
            return Err(GeometryError::DimensionMismatch { expected: k, found: y.dim() });
        }
        let full = y.full_point();
        let mut value = lgamma(self.total()) - self.omega.iter().map(|&o| lgamma(o)).sum::<f64>();
        let mut on_boundary = false;
        for (&o, &x) in self.omega.iter().zip(&full) {
            let x = x.max(0.0);
            on_boundary |= x <= 0.0;
            value += xlogy(o - 1.0, x);
        }
        Ok(LogDensity { value, on_boundary })
    }
}

/// Univariate beta distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams<T: Scalar = f64> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> BetaParams<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self, ParamError> {
        check_positive("alpha", &[alpha])?;
        check_positive("beta", &[beta])?;
        Ok(Self { alpha, beta })
    }

    /// `(mean, variance)`.
    pub fn moments(&self) -> (T, T) {
        let s = self.alpha + self.beta;
        let mean = self.alpha / s;
        let var = self.alpha * self.beta / (s * s * (s + T::one()));
        (mean, var)
    }
}

impl BetaParams<f64> {
    pub fn log_density(&self, y: f64) -> LogDensity {
        let (a, b) = (self.alpha, self.beta);
        let y = y.clamp(0.0, 1.0);
        let value = lgamma(a + b) - lgamma(a) - lgamma(b) + xlogy(a - 1.0, y) + xlogy(b - 1.0, 1.0 - y);
        LogDensity { value, on_boundary: y <= 0.0 || y >= 1.0 }
    }
}

/// First and second central moments of `K` components.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet<T: Scalar = f64> {
    mean: Vec<T>,
    /// Row-major symmetric `K x K`.
    cov: Vec<T>,
}

impl<T: Scalar> MomentSet<T> {
    /// Builds a moment set from means and a row-major `K x K` covariance.
    pub fn from_parts(mean: Vec<T>, cov: Vec<T>) -> Option<Self> {
        (cov.len() == mean.len() * mean.len()).then_some(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self, i: usize, j: usize) -> T {
        self.cov[i * self.dim() + j]
    }

    pub fn variance(&self, i: usize) -> T {
        self.cov(i, i)
    }

    /// Extends the moments to all `N = K + 1` components using
    /// `Y_N = 1 - sum(Y_i)`.
    pub fn completed(&self) -> MomentSet<T> {
        let k = self.dim();
        let n = k + 1;
        let zero = T::zero();
        let mut mean = self.mean.clone();
        mean.push(T::one() - sum(self.mean.iter().copied()));
        let mut cov = vec![zero; n * n];
        for i in 0..k {
            for j in 0..k {
                cov[i * n + j] = self.cov(i, j);
            }
        }
        let mut total = zero;
        for i in 0..k {
            let row: T = sum((0..k).map(|j| self.cov(i, j)));
            cov[i * n + k] = zero - row;
            cov[k * n + i] = zero - row;
            total = total + row;
        }
        cov[k * n + k] = total;
        MomentSet { mean, cov }
    }

    pub fn to_f64(&self) -> MomentSet<f64> {
        MomentSet {
            mean: self.mean.iter().map(|x| x.as_f64()).collect(),
            cov: self.cov.iter().map(|x| x.as_f64()).collect(),
        }
    }
}

fn sign_of<T: Scalar>(x: T) -> i8 {
    if x > T::zero() {
        1
    } else if x < T::zero() {
        -1
    } else {
        0
    }
}

/// Signs of the off-diagonal covariances, packed by rows `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CovarianceSigns {
    dim: usize,
    signs: Vec<i8>,
}

impl CovarianceSigns {
    fn offset(&self, i: usize) -> usize {
        // Entries in rows 0..i of the strict upper triangle.
        i * self.dim - i * (i + 1) / 2
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sign of `cov_ij` for `i < j` (zero-based).
    pub fn sign(&self, i: usize, j: usize) -> i8 {
        assert!(i < j && j < self.dim, "need i < j < K");
        self.signs[self.offset(i) + (j - i - 1)]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        let start = self.offset(i);
        &self.signs[start..start + (self.dim - i - 1)]
    }

    /// For each `i`, the sign of `cov_ij` is the same for all `j > i`.
    pub fn rows_constant(&self) -> bool {
        (0..self.dim).all(|i| self.row(i).windows(2).all(|w| w[0] == w[1]))
    }

    /// The first component is never positively correlated with the others.
    pub fn first_row_nonpositive(&self) -> bool {
        self.dim < 2 || self.row(0).iter().all(|&s| s <= 0)
    }

    pub fn all_nonpositive(&self) -> bool {
        self.signs.iter().all(|&s| s <= 0)
    }
}

pub fn gd_log_density(p: &GenDirParams, y: &SimplexPoint) -> Result<LogDensity, GeometryError> {
    p.log_density(y)
}

pub fn dirichlet_log_density(p: &DirichletParams, y: &SimplexPoint) -> Result<LogDensity, GeometryError> {
    p.log_density(y)
}

pub fn gd_moments<T: Scalar>(p: &GenDirParams<T>) -> MomentSet<T> {
    p.moments()
}

pub fn dirichlet_moments<T: Scalar>(p: &DirichletParams<T>) -> MomentSet<T> {
    p.moments()
}

pub fn beta_moments<T: Scalar>(p: &BetaParams<T>) -> (T, T) {
    p.moments()
}

pub fn covariance_sign_structure<T: Scalar>(p: &GenDirParams<T>) -> CovarianceSigns {
    p.covariance_signs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gd(a: &[f64], b: &[f64]) -> GenDirParams {
        GenDirParams::new(a.to_vec(), b.to_vec()).unwrap()
    }

    fn pt(y: &[f64]) -> SimplexPoint {
        SimplexPoint::new(y.to_vec()).unwrap()
    }

    #[test]
    fn uniform_beta_has_zero_log_density() {
        let d = gd(&[1.0], &[1.0]).log_density(&pt(&[0.5])).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(!d.on_boundary);
    }

    #[test]
    fn log_density_matches_high_precision_value() {
        // mpmath, 40 digits, term-by-term evaluation.
        let d = gd(&[5.0, 2.0], &[5.0, 3.0]).log_density(&pt(&[0.3, 0.4])).unwrap();
        assert_relative_eq!(d.value, 0.790_498_911_343_807_7, max_relative = 1e-13);
        let d = gd(&[2.5, 1.5, 3.25], &[7.75, 4.5, 2.2]).log_density(&pt(&[0.15, 0.25, 0.35])).unwrap();
        assert_relative_eq!(d.value, 2.993_575_778_434_781_3, max_relative = 1e-13);
    }

    #[test]
    fn dirichlet_log_density_examples() {
        let d = DirichletParams::new(vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(d.log_density(&pt(&[0.5])).unwrap().value, 0.0, epsilon = 1e-15);
        let d = DirichletParams::new(vec![2.0, 2.0, 2.0]).unwrap();
        let v = d.log_density(&pt(&[1.0 / 3.0, 1.0 / 3.0])).unwrap().value;
        assert_relative_eq!(v, (120.0f64 / 27.0).ln(), max_relative = 1e-14);
    }

    #[test]
    fn boundary_points_are_flagged() {
        let p = gd(&[2.0, 1.0], &[3.0, 2.0]);
        let d = p.log_density(&pt(&[0.0, 0.5])).unwrap();
        assert!(d.on_boundary);
        assert_eq!(d.value, f64::NEG_INFINITY);
        let p = gd(&[0.5], &[1.0]);
        let d = p.log_density(&pt(&[0.0])).unwrap();
        assert_eq!(d.value, f64::INFINITY);
        assert!(p.log_density(&pt(&[0.1, 0.1])).is_err());
    }

    #[test]
    fn table_moments_case_one() {
        let m = gd(&[5.0, 2.0], &[5.0, 3.0]).moments();
        assert_relative_eq!(m.mean()[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(m.mean()[1], 0.2, max_relative = 1e-15);
        assert_relative_eq!(m.variance(0), 1.0 / 44.0, max_relative = 1e-14);
        assert_relative_eq!(m.variance(1), 4.0 / 275.0, max_relative = 1e-14);
        assert_relative_eq!(m.cov(0, 1), -1.0 / 110.0, max_relative = 1e-14);
        assert_eq!(m.cov(0, 1), m.cov(1, 0));
    }

    #[test]
    fn dirichlet_moment_examples() {
        let m = DirichletParams::new(vec![1.0, 1.0]).unwrap().moments();
        assert_relative_eq!(m.mean()[0], 0.5);
        assert_relative_eq!(m.variance(0), 1.0 / 12.0, max_relative = 1e-15);
        let m = DirichletParams::new(vec![2.0, 2.0, 2.0]).unwrap().moments();
        assert_relative_eq!(m.cov(0, 1), -1.0 / 63.0, max_relative = 1e-15);
    }

    #[test]
    fn beta_moment_examples() {
        let (m, v) = BetaParams::new(1.0, 1.0).unwrap().moments();
        assert_eq!((m, v), (0.5, 1.0 / 12.0));
        let (m, v) = BetaParams::new(5.0, 5.0).unwrap().moments();
        assert_relative_eq!(m, 0.5);
        assert_relative_eq!(v, 1.0 / 44.0, max_relative = 1e-15);
        let (m, v) = BetaParams::new(2.0, 3.0).unwrap().moments();
        assert_relative_eq!(m, 0.4, max_relative = 1e-15);
        assert_relative_eq!(v, 0.04, max_relative = 1e-15);
    }

    #[test]
    fn dirichlet_reduction_of_moments() {
        let g = gd(&[5.0, 2.0], &[5.0, 3.0]);
        assert!(g.is_dirichlet());
        let a = g.moments();
        let b = DirichletParams::new(g.dirichlet_omega()).unwrap().moments();
        for i in 0..2 {
            assert_relative_eq!(a.mean()[i], b.mean()[i], max_relative = 1e-14);
            for j in 0..2 {
                assert_relative_eq!(a.cov(i, j), b.cov(i, j), max_relative = 1e-13);
            }
        }
        assert_eq!(DirichletParams::new(vec![5.0, 2.0, 3.0]).unwrap().to_gen_dir(), g);
    }

    #[test]
    fn univariate_collapse() {
        let m = gd(&[2.5], &[4.0]).moments();
        let (bm, bv) = BetaParams::new(2.5, 4.0).unwrap().moments();
        assert_relative_eq!(m.mean()[0], bm, max_relative = 1e-15);
        assert_relative_eq!(m.variance(0), bv, max_relative = 1e-14);
    }

    #[test]
    fn completed_moments_close_the_sum() {
        let m = gd(&[5.0, 2.0], &[7.0, 3.0]).moments().completed();
        assert_eq!(m.dim(), 3);
        assert_relative_eq!(m.mean().iter().sum::<f64>(), 1.0, max_relative = 1e-15);
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| m.cov(i, j)).sum();
            assert!(row.abs() < 1e-16);
        }
        // Y_3 = 1 - Y_1 - Y_2 has the Dirichlet-like tail beta(a2,b2) product.
        assert_relative_eq!(m.mean()[2], 7.0 / 12.0 * 3.0 / 5.0, max_relative = 1e-14);
    }

    #[test]
    fn sign_structure_examples() {
        let s = gd(&[5.0, 2.0], &[5.0, 3.0]).covariance_signs();
        assert_eq!(s.sign(0, 1), -1);
        let s = DirichletParams::new(vec![1.0, 2.0, 3.0, 4.0, 0.5]).unwrap().to_gen_dir().covariance_signs();
        assert!(s.all_nonpositive());
        // Large beta_2 relative to its tail gives positive correlation in row 2.
        let s = gd(&[1.0, 1.0, 1.0, 1.0], &[9.0, 0.2, 1.0, 1.0]).covariance_signs();
        assert!(s.rows_constant());
        assert!(s.first_row_nonpositive());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            GenDirParams::new(vec![1.0, -2.0], vec![1.0, 1.0]),
            Err(ParamError::NotPositive { name: "alpha", index: 1, .. })
        ));
        assert!(GenDirParams::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(GenDirParams::<f64>::new(vec![], vec![]).is_err());
        assert!(DirichletParams::new(vec![1.0]).is_err());
        assert!(BetaParams::new(0.0, 1.0).is_err());
    }
}
