//! Correspondence between SDE coefficients `(b, S, kappa, c)` and the
//! generalized Dirichlet parameters `(alpha, beta)`.
//!
//! The forward map is a function; the inverse needs the free `kappa` vector
//! supplied explicitly because distribution parameters do not pin down every
//! coefficient.

use std::fmt;

use thiserror::Error;

use crate::distributions::{GenDirParams, ParamError};
use crate::scalar::Scalar;

/// Relative tolerance on the chained equalities.
pub const MAP_TOLERANCE: f64 = 1e-10;

/// Dense `n x n` matrix with a structural zero strict lower triangle,
/// `n = K - 1`. Indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperTriangular<T: Scalar = f64> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> UpperTriangular<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    /// Builds from rows where row `i` lists the entries `j = i..n`.
    pub fn from_upper_rows(rows: Vec<Vec<T>>) -> Result<Self, MapError> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n - i {
                return Err(MapError::Shape(format!(
                    "row {} of c must hold {} upper-triangular entries, found {}",
                    i + 1,
                    n - i,
                    row.len()
                )));
            }
            for (off, v) in row.into_iter().enumerate() {
                m.set(i, i + off, v);
            }
        }
        Ok(m)
    }

    /// Builds from full square rows; entries below the diagonal must be zero.
    pub fn from_square_rows(rows: Vec<Vec<T>>) -> Result<Self, MapError> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(MapError::Shape(format!("row {} of c must have {} entries", i + 1, n)));
            }
            for (j, v) in row.into_iter().enumerate() {
                if j < i && v != T::zero() {
                    return Err(MapError::Shape(format!(
                        "c{}{} lies below the diagonal and must be zero",
                        i + 1,
                        j + 1
                    )));
                }
                if j >= i {
                    m.set(i, j, v);
                }
            }
        }
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if i > j {
            T::zero()
        } else {
            self.data[i * self.n + j]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(i <= j && j < self.n, "c is upper triangular");
        self.data[i * self.n + j] = v;
    }
}

/// Coefficients of the generalized Dirichlet SDE.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeCoefficients<T: Scalar = f64> {
    pub b: Vec<T>,
    pub s: Vec<T>,
    pub kappa: Vec<T>,
    pub c: UpperTriangular<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Bound {
        field: &'static str,
        index: usize,
        value: f64,
        requirement: &'static str,
    },
    /// `c_{1j}/kappa_1 = ... = c_{jj}/kappa_j` fails for column `j` (zero-based).
    CChain {
        column: usize,
        spread: f64,
        ratios: Vec<f64>,
    },
    /// `b_i (1 - S_i) / kappa_i` differs across `i`.
    BetaTailChain {
        spread: f64,
        values: Vec<f64>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Bound { field, index, value, requirement } => {
                write!(f, "{field}[{}] = {value} violates {requirement}", index + 1)
            }
            Violation::CChain { column, spread, ratios } => write!(
                f,
                "chain c_1{j}/kappa_1 = ... = c_{j}{j}/kappa_{j} broken for column {j}: ratios {ratios:?}, relative spread {spread:.3e}",
                j = column + 1
            ),
            Violation::BetaTailChain { spread, values } => write!(
                f,
                "chain b_i(1-S_i)/kappa_i equal for all i broken: values {values:?}, relative spread {spread:.3e}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid SDE coefficients: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("recovered beta_{} = {value} is not positive; the target is not normalizable", .index + 1)]
    NonNormalizable { index: usize, value: f64 },
    #[error(transparent)]
    Params(#[from] ParamError),
}

fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        0.0
    } else {
        (max - min) / scale
    }
}

impl<T: Scalar> SdeCoefficients<T> {
    pub fn new(b: Vec<T>, s: Vec<T>, kappa: Vec<T>, c: UpperTriangular<T>) -> Result<Self, MapError> {
        let k = b.len();
        if k == 0 {
            return Err(MapError::Shape("at least one component is required".into()));
        }
        for (name, len) in [("S", s.len()), ("kappa", kappa.len())] {
            if len != k {
                return Err(MapError::Shape(format!("{name} has {len} entries, b has {k}")));
            }
        }
        if c.size() != k - 1 {
            return Err(MapError::Shape(format!("c must be {0}x{0} for K = {k}, found {1}x{1}", k - 1, c.size())));
        }
        Ok(Self { b, s, kappa, c })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Checks the coefficient bounds and both chained equalities.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut violations = Vec::new();
        let zero = T::zero();
        let one = T::one();
        for i in 0..self.dim() {
            let (b, s, kp) = (self.b[i], self.s[i], self.kappa[i]);
            if !(b > zero && b.is_finite_value()) {
                violations.push(Violation::Bound { field: "b", index: i, value: b.as_f64(), requirement: "b > 0" });
            }
            if !(s > zero && s < one) {
                violations.push(Violation::Bound { field: "S", index: i, value: s.as_f64(), requirement: "0 < S < 1" });
            }
            if !(kp > zero && kp.is_finite_value()) {
                violations.push(Violation::Bound {
                    field: "kappa",
                    index: i,
                    value: kp.as_f64(),
                    requirement: "kappa > 0",
                });
            }
        }
        for i in 0..self.c.size() {
            for j in i..self.c.size() {
                if !self.c.get(i, j).is_finite_value() {
                    violations.push(Violation::Bound {
                        field: "c",
                        index: i * self.c.size() + j,
                        value: self.c.get(i, j).as_f64(),
                        requirement: "finite c",
                    });
                }
            }
        }
        if !violations.is_empty() {
            return Err(ValidationError { violations });
        }
        for j in 0..self.c.size() {
            let ratios: Vec<f64> = (0..=j).map(|i| (self.c.get(i, j) / self.kappa[i]).as_f64()).collect();
            let spread = relative_spread(&ratios);
            if !(spread <= MAP_TOLERANCE) {
                violations.push(Violation::CChain { column: j, spread, ratios });
            }
        }
        let values: Vec<f64> =
            (0..self.dim()).map(|i| (self.b[i] * (one - self.s[i]) / self.kappa[i]).as_f64()).collect();
        let spread = relative_spread(&values);
        if !(spread <= MAP_TOLERANCE) {
            violations.push(Violation::BetaTailChain { spread, values });
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ValidationError { violations })
        }
    }

    /// Coefficients with `c_ij = kappa_i`, whose invariant is a standard Dirichlet.
    pub fn dirichlet_choice(&self) -> Self {
        let n = self.c.size();
        let mut c = UpperTriangular::zeros(n);
        for i in 0..n {
            for j in i..n {
                c.set(i, j, self.kappa[i]);
            }
        }
        Self { b: self.b.clone(), s: self.s.clone(), kappa: self.kappa.clone(), c }
    }
}

/// Forward map: `alpha_i = b_i S_i / kappa_i`, `gamma_j = 1 - c_jj / kappa_j`,
/// `gamma_K = b_1 (1 - S_1) / kappa_1 - 1`, and `beta` by back-substitution.
pub fn sde_to_distribution<T: Scalar>(c: &SdeCoefficients<T>) -> Result<GenDirParams<T>, MapError> {
    c.validate()?;
    let k = c.dim();
    let one = T::one();
    let alpha: Vec<T> = (0..k).map(|i| c.b[i] * c.s[i] / c.kappa[i]).collect();
    let mut beta = vec![T::zero(); k];
    beta[k - 1] = c.b[0] * (one - c.s[0]) / c.kappa[0];
    for i in (0..k - 1).rev() {
        let gamma = one - c.c.get(i, i) / c.kappa[i];
        beta[i] = gamma + alpha[i + 1] + beta[i + 1];
    }
    if let Some((index, &v)) = beta.iter().enumerate().find(|(_, &v)| !(v > T::zero())) {
        return Err(MapError::NonNormalizable { index, value: v.as_f64() });
    }
    Ok(GenDirParams::new(alpha, beta)?)
}

/// Inverse map for a caller-chosen `kappa`:
/// `b_i = kappa_i (alpha_i + beta_K)`, `S_i = alpha_i / (alpha_i + beta_K)`,
/// `c_ij = kappa_i (1 - gamma_j)`.
pub fn distribution_to_sde<T: Scalar>(p: &GenDirParams<T>, kappa: &[T]) -> Result<SdeCoefficients<T>, MapError> {
    let k = p.dim();
    if kappa.len() != k {
        return Err(MapError::Shape(format!("kappa has {} entries, expected {k}", kappa.len())));
    }
    if let Some((index, &v)) = kappa.iter().enumerate().find(|(_, &v)| !(v.is_positive() && v.is_finite_value())) {
        return Err(ParamError::NotPositive { name: "kappa", index, value: v.as_f64() }.into());
    }
    let beta_k = p.beta()[k - 1];
    let gamma = p.gamma();
    let b = (0..k).map(|i| kappa[i] * (p.alpha()[i] + beta_k)).collect();
    let s = (0..k).map(|i| p.alpha()[i] / (p.alpha()[i] + beta_k)).collect();
    let mut c = UpperTriangular::zeros(k - 1);
    for i in 0..k - 1 {
        for j in i..k - 1 {
            c.set(i, j, kappa[i] * (T::one() - gamma[j]));
        }
    }
    SdeCoefficients::new(b, s, kappa.to_vec(), c)
}

pub fn validate<T: Scalar>(c: &SdeCoefficients<T>) -> Result<(), ValidationError> {
    c.validate()
}

pub fn dirichlet_choice<T: Scalar>(c: &SdeCoefficients<T>) -> SdeCoefficients<T> {
    c.dirichlet_choice()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table_coefficients(c11: f64) -> SdeCoefficients {
        let c = UpperTriangular::from_upper_rows(vec![vec![c11]]).unwrap();
        SdeCoefficients::new(vec![0.1, 1.5], vec![0.625, 0.4], vec![1.0 / 80.0, 0.3], c).unwrap()
    }

    #[test]
    fn table_coefficients_are_valid() {
        table_coefficients(1.0 / 80.0).validate().unwrap();
    }

    #[test]
    fn broken_tail_chain_is_reported() {
        let mut c = table_coefficients(1.0 / 80.0);
        c.s[1] = 0.5;
        let err = c.validate().unwrap_err();
        assert_eq!(err.violations.len(), 1);
        match &err.violations[0] {
            Violation::BetaTailChain { values, .. } => {
                assert_relative_eq!(values[0], 3.0, max_relative = 1e-14);
                assert_relative_eq!(values[1], 2.5, max_relative = 1e-14);
            }
            v => panic!("unexpected violation {v:?}"),
        }
        assert!(err.to_string().contains("b_i(1-S_i)/kappa_i"));
    }

    #[test]
    fn univariate_has_trivial_chains() {
        let c = SdeCoefficients::new(vec![0.7], vec![0.2], vec![3.0], UpperTriangular::zeros(0)).unwrap();
        c.validate().unwrap();
    }

    #[test]
    fn bounds_are_named() {
        let mut c = table_coefficients(1.0 / 80.0);
        c.s[0] = 1.2;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("0 < S < 1"), "{msg}");
    }

    #[test]
    fn c_chain_violation_names_the_column() {
        let p = GenDirParams::new(vec![1.0, 2.0, 3.0], vec![6.0, 5.0, 2.0]).unwrap();
        let mut c = distribution_to_sde(&p, &[0.5, 1.0, 2.0]).unwrap();
        c.validate().unwrap();
        let v = c.c.get(0, 1);
        c.c.set(0, 1, v * 1.1);
        let err = c.validate().unwrap_err();
        assert!(matches!(err.violations[0], Violation::CChain { column: 1, .. }));
    }

    #[test]
    fn forward_map_table_cases() {
        for (c11, beta1) in [(1.0 / 80.0, 5.0), (-1.0 / 80.0, 7.0), (-0.25, 26.0)] {
            let p = sde_to_distribution(&table_coefficients(c11)).unwrap();
            assert_relative_eq!(p.alpha()[0], 5.0, max_relative = 1e-14);
            assert_relative_eq!(p.alpha()[1], 2.0, max_relative = 1e-14);
            assert_relative_eq!(p.beta()[0], beta1, max_relative = 1e-14);
            assert_relative_eq!(p.beta()[1], 3.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn non_normalizable_target() {
        // c11 / kappa1 = 10 gives gamma1 = -9 and beta1 = -4.
        let err = sde_to_distribution(&table_coefficients(10.0 / 80.0)).unwrap_err();
        assert!(matches!(err, MapError::NonNormalizable { index: 0, .. }));
    }

    #[test]
    fn inverse_map_examples() {
        let p = GenDirParams::new(vec![5.0, 2.0], vec![5.0, 3.0]).unwrap();
        let c = distribution_to_sde(&p, &[1.0 / 80.0, 0.3]).unwrap();
        assert_relative_eq!(c.b[0], 0.1, max_relative = 1e-15);
        assert_relative_eq!(c.b[1], 1.5, max_relative = 1e-15);
        assert_relative_eq!(c.s[0], 0.625);
        assert_relative_eq!(c.s[1], 0.4);
        assert_relative_eq!(c.c.get(0, 0), 1.0 / 80.0);

        let p = GenDirParams::new(vec![5.0, 2.0], vec![26.0, 3.0]).unwrap();
        let c = distribution_to_sde(&p, &[1.0 / 80.0, 0.3]).unwrap();
        assert_relative_eq!(c.c.get(0, 0), -0.25, max_relative = 1e-15);

        let p = GenDirParams::new(vec![1.0], vec![1.0]).unwrap();
        let c = distribution_to_sde(&p, &[1.0]).unwrap();
        assert_eq!((c.b[0], c.s[0]), (2.0, 0.5));
    }

    #[test]
    fn dirichlet_choice_zeroes_inner_gammas() {
        let c = table_coefficients(-0.25).dirichlet_choice();
        assert_eq!(c.c.get(0, 0), 1.0 / 80.0);
        let p = sde_to_distribution(&c).unwrap();
        assert_relative_eq!(p.beta()[0], 5.0, max_relative = 1e-14);

        let p: GenDirParams = GenDirParams::new(vec![1.5, 2.0, 0.5], vec![9.0, 4.0, 2.0]).unwrap();
        let c = distribution_to_sde(&p, &[0.3, 0.2, 0.1]).unwrap().dirichlet_choice();
        let g = sde_to_distribution(&c).unwrap().gamma();
        assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
    }

    #[test]
    fn different_kappa_same_target() {
        let p: GenDirParams = GenDirParams::new(vec![1.5, 2.0, 0.5], vec![9.0, 4.0, 2.0]).unwrap();
        let c1 = distribution_to_sde(&p, &[1.0, 1.0, 1.0]).unwrap();
        let c2 = distribution_to_sde(&p, &[0.5, 2.0, 3.0]).unwrap();
        assert_ne!(c1, c2);
        let (p1, p2) = (sde_to_distribution(&c1).unwrap(), sde_to_distribution(&c2).unwrap());
        for i in 0..3 {
            assert_relative_eq!(p1.alpha()[i], p2.alpha()[i], max_relative = 1e-13);
            assert_relative_eq!(p1.beta()[i], p2.beta()[i], max_relative = 1e-13);
        }
    }

    #[test]
    fn shape_errors() {
        assert!(UpperTriangular::from_upper_rows(vec![vec![1.0], vec![2.0]]).is_err());
        assert!(UpperTriangular::from_square_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).is_err());
        let c = UpperTriangular::<f64>::zeros(2);
        assert!(SdeCoefficients::new(vec![1.0, 1.0], vec![0.5, 0.5], vec![1.0, 1.0], c).is_err());
    }
}
