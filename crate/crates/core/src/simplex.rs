//! Geometry of the open unit simplex.
//!
//! A state holds the `K` free coordinates `y_1..y_K`; the last component
//! `Y_N = 1 - sum(y)` is always derived and never stored, so the unit-sum
//! constraint holds by construction.

use thiserror::Error;

/// Absolute tolerance separating boundary contact from round-off.
pub const GEOMETRY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("a simplex point needs at least one coordinate")]
    Empty,
    #[error("coordinate {} is not finite ({value})", .index + 1)]
    NonFinite { index: usize, value: f64 },
    #[error("coordinate {} = {value} is negative", .index + 1)]
    NegativeCoordinate { index: usize, value: f64 },
    #[error("partial sum through coordinate {} exceeds one (remainder {remainder})", .index + 1)]
    PartialSumExceedsOne { index: usize, remainder: f64 },
    #[error("remainder {} = {value} is on a singular face", .index + 1)]
    SingularFace { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A point of the closed unit simplex given by its `K` free coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    y: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(y: Vec<f64>) -> Result<Self, GeometryError> {
        check_coordinates(&y)?;
        Ok(Self { y })
    }

    /// The origin `y = 0` of dimension `k`, where `Y_N = 1`.
    pub fn origin(k: usize) -> Result<Self, GeometryError> {
        Self::new(vec![0.0; k])
    }

    pub(crate) fn from_trusted(y: Vec<f64>) -> Self {
        debug_assert!(check_coordinates(&y).is_ok());
        Self { y }
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.y
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.y
    }

    pub fn remainders(&self) -> Remainders {
        remainders(self)
    }

    pub fn full_point(&self) -> Vec<f64> {
        full_point(self)
    }

    /// True when every coordinate and every remainder is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.y.iter().all(|&v| v > 0.0) && self.remainders().0.iter().all(|&r| r > 0.0)
    }
}

/// `Y_i = 1 - (y_1 + ... + y_i)` for `i = 1..K`; the last entry is `Y_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Remainders(Vec<f64>);

impl Remainders {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The implied last component `Y_N`.
    pub fn last(&self) -> f64 {
        *self.0.last().expect("remainders are never empty")
    }
}

/// `U_i = 1 / (Y_i * Y_{i+1} * ... * Y_{K-1})`, with `U_K = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFactors(Vec<f64>);

impl ScalingFactors {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn remainders(p: &SimplexPoint) -> Remainders {
    let mut out = vec![0.0; p.dim()];
    fill_remainders(&p.y, &mut out);
    Remainders(out)
}

pub fn scaling_factors(r: &Remainders) -> Result<ScalingFactors, GeometryError> {
    let mut out = vec![0.0; r.0.len()];
    fill_scaling_factors(&r.0, &mut out)?;
    Ok(ScalingFactors(out))
}

/// `(y_1, ..., y_K, Y_N)`.
pub fn full_point(p: &SimplexPoint) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.dim() + 1);
    out.extend_from_slice(&p.y);
    out.push(remainder_total(&p.y));
    out
}

pub(crate) fn check_coordinates(y: &[f64]) -> Result<(), GeometryError> {
    if y.is_empty() {
        return Err(GeometryError::Empty);
    }
    let mut rem = 1.0;
    for (index, &value) in y.iter().enumerate() {
        if !value.is_finite() {
            return Err(GeometryError::NonFinite { index, value });
        }
        if value < -GEOMETRY_EPS {
            return Err(GeometryError::NegativeCoordinate { index, value });
        }
        rem -= value;
        if rem < -GEOMETRY_EPS {
            return Err(GeometryError::PartialSumExceedsOne { index, remainder: rem });
        }
    }
    Ok(())
}

/// Running subtraction; `out[i] = 1 - sum(y[..=i])`.
pub(crate) fn fill_remainders(y: &[f64], out: &mut [f64]) {
    debug_assert_eq!(y.len(), out.len());
    let mut rem = 1.0;
    for (o, &v) in out.iter_mut().zip(y) {
        rem -= v;
        *o = rem;
    }
}

pub(crate) fn remainder_total(y: &[f64]) -> f64 {
    y.iter().fold(1.0, |rem, &v| rem - v)
}

/// Fills `U` from remainders via `U_K = 1`, `U_i = U_{i+1} / Y_i`.
pub(crate) fn fill_scaling_factors(rem: &[f64], out: &mut [f64]) -> Result<(), GeometryError> {
    let k = rem.len();
    debug_assert_eq!(k, out.len());
    out[k - 1] = 1.0;
    for i in (0..k - 1).rev() {
        if rem[i] <= GEOMETRY_EPS {
            return Err(GeometryError::SingularFace { index: i, value: rem[i] });
        }
        out[i] = out[i + 1] / rem[i];
    }
    Ok(())
}

/// Sum of the completed point minus one, in units of `f64::EPSILON`.
pub fn unit_sum_error_ulps(y: &[f64]) -> f64 {
    let total = y.iter().sum::<f64>() + remainder_total(y);
    (total - 1.0).abs() / f64::EPSILON
}

/// Euclidean projection onto `{y_i >= margin, Y_N >= margin}`.
pub(crate) fn project_with_margin(y: &mut [f64], margin: f64) {
    let k = y.len();
    let cap = 1.0 - (k as f64 + 1.0) * margin;
    let shifted: Vec<f64> = y.iter().map(|&v| v - margin).collect();
    let clamped_sum: f64 = shifted.iter().map(|&v| v.max(0.0)).sum();
    if clamped_sum <= cap {
        for (o, s) in y.iter_mut().zip(&shifted) {
            *o = s.max(0.0) + margin;
        }
        return;
    }
    // Project onto {z >= 0, sum z = cap} by the sort-and-threshold rule. The
    // active components sit within `cap` of each other, so everything is
    // written in pairwise differences; forming `s - theta` directly cancels
    // catastrophically once a proposal is far outside the simplex.
    let mut sorted = shifted.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let spread = |upto: usize, x: f64| sorted[..upto].iter().map(|&s| s - x).sum::<f64>();
    let mut active = 1;
    for j in 1..k {
        if cap - spread(j + 1, sorted[j]) > 0.0 {
            active = j + 1;
        } else {
            break;
        }
    }
    for (o, &s) in y.iter_mut().zip(&shifted) {
        let z = (cap - spread(active, s)) / active as f64;
        *o = z.max(0.0) + margin;
    }
    // Round-off can leave the total a hair above the cap.
    let excess = -remainder_total(y) + margin;
    if excess > 0.0 {
        if let Some(imax) = (0..k).max_by(|&a, &b| y[a].total_cmp(&y[b])) {
            y[imax] -= excess;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt(y: &[f64]) -> SimplexPoint {
        SimplexPoint::new(y.to_vec()).unwrap()
    }

    #[test]
    fn remainders_examples() {
        let r = remainders(&pt(&[0.2, 0.3, 0.1]));
        let expected = [0.8, 0.5, 0.4];
        for (a, b) in r.as_slice().iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(remainders(&pt(&[0.0, 0.0])).as_slice(), &[1.0, 1.0]);
        assert_eq!(remainders(&pt(&[0.25])).as_slice(), &[0.75]);
    }

    #[test]
    fn scaling_factor_examples() {
        let u = scaling_factors(&remainders(&pt(&[0.2, 0.3, 0.1]))).unwrap();
        let expected = [2.5, 2.0, 1.0];
        for (a, b) in u.as_slice().iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
        assert_eq!(scaling_factors(&remainders(&pt(&[0.6]))).unwrap().as_slice(), &[1.0]);
        assert_eq!(scaling_factors(&remainders(&pt(&[0.0, 0.0]))).unwrap().as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn scaling_factors_reject_inner_face() {
        let err = scaling_factors(&remainders(&pt(&[1.0, 0.0]))).unwrap_err();
        assert!(matches!(err, GeometryError::SingularFace { index: 0, .. }));
        let err = scaling_factors(&remainders(&pt(&[0.2, 0.8, 0.0]))).unwrap_err();
        assert!(matches!(err, GeometryError::SingularFace { index: 1, .. }));
        // The last remainder never enters U.
        assert!(scaling_factors(&remainders(&pt(&[0.5, 0.5]))).is_ok());
    }

    #[test]
    fn full_point_examples() {
        let f = full_point(&pt(&[0.3, 0.4]));
        assert_relative_eq!(f[2], 0.3, epsilon = 1e-15);
        assert_eq!(full_point(&pt(&[0.0, 0.0])), vec![0.0, 0.0, 1.0]);
        let f = full_point(&pt(&[0.2, 0.3, 0.1]));
        assert_relative_eq!(f[3], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn invalid_points() {
        assert_eq!(SimplexPoint::new(vec![]), Err(GeometryError::Empty));
        assert!(matches!(SimplexPoint::new(vec![0.1, -0.01]), Err(GeometryError::NegativeCoordinate { index: 1, .. })));
        assert!(matches!(SimplexPoint::new(vec![0.7, 0.4]), Err(GeometryError::PartialSumExceedsOne { index: 1, .. })));
        assert!(SimplexPoint::new(vec![f64::NAN]).is_err());
        // Round-off sized violations are tolerated.
        assert!(SimplexPoint::new(vec![-1e-14, 1.0]).is_ok());
    }

    #[test]
    fn projection_lands_inside() {
        let mut y = vec![0.9, 0.3, -0.2];
        project_with_margin(&mut y, 1e-12);
        assert!(y.iter().all(|&v| v >= 1e-12));
        assert!(remainder_total(&y) >= 1e-12 * 0.99);
        let mut y = vec![0.2, -1e-9];
        project_with_margin(&mut y, 1e-12);
        assert_relative_eq!(y[0], 0.2, epsilon = 1e-12);
        assert_eq!(y[1], 1e-12);
    }

    proptest::proptest! {
        /// Even wildly overshooting proposals land inside with every remainder positive.
        #[test]
        fn projection_survives_large_proposals(
            v in proptest::collection::vec((-12i32..30, -1.0f64..1.0), 1..6),
        ) {
            let mut y: Vec<f64> = v.iter().map(|&(e, m)| m * 10f64.powi(e)).collect();
            project_with_margin(&mut y, 1e-12);
            let mut rem = 1.0;
            for &x in &y {
                proptest::prop_assert!((1e-12..=1.0).contains(&x), "{:?}", y);
                rem -= x;
                proptest::prop_assert!(rem > GEOMETRY_EPS * 0.5, "{:?}", y);
            }
        }
    }
}
