//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Beta, Distribution};

/// Stick-breaking draw: `V_i ~ Beta(alpha_i, beta_i)`, `Y_i = V_i prod_{k<i} (1 - V_k)`.
pub fn stick_breaking(alpha: &[f64], beta: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let mut stick = 1.0;
    alpha
        .iter()
        .zip(beta)
        .map(|(&a, &b)| {
            let v = Beta::new(a, b).unwrap().sample(rng);
            let y = v * stick;
            stick *= 1.0 - v;
            y
        })
        .collect()
}

/// Two-pass sample mean and population covariance (row-major).
pub fn two_pass(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let d = samples[0].len();
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; d * d];
    for s in samples {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += (s[i] - mean[i]) * (s[j] - mean[j]);
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= n);
    (mean, cov)
}

/// Exact mean and covariance (row-major) of the stick-breaking construction,
/// from independent `V_i ~ Beta(alpha_i, beta_i)`:
/// `E[Y_i Y_j] = E[V_i (1 - V_i)] E[V_j] prod_{k<i} E[(1 - V_k)^2] prod_{i<k<j} E[1 - V_k]`.
pub fn stick_breaking_moments(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = alpha.len();
    let ev: Vec<f64> = alpha.iter().zip(beta).map(|(&a, &b)| a / (a + b)).collect();
    let ev2: Vec<f64> = alpha.iter().zip(beta).map(|(&a, &b)| a * (a + 1.0) / ((a + b) * (a + b + 1.0))).collect();
    let one_minus = |i: usize| 1.0 - ev[i];
    let one_minus_sq = |i: usize| 1.0 - 2.0 * ev[i] + ev2[i];
    let mean: Vec<f64> = (0..k).map(|i| ev[i] * (0..i).map(one_minus).product::<f64>()).collect();
    let mut cov = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let lead: f64 = (0..i).map(one_minus_sq).product();
            let second = if i == j {
                ev2[i] * lead
            } else {
                (ev[i] - ev2[i]) * lead * (i + 1..j).map(one_minus).product::<f64>() * ev[j]
            };
            cov[i * k + j] = second - mean[i] * mean[j];
            cov[j * k + i] = cov[i * k + j];
        }
    }
    (mean, cov)
}

/// Gauss-Legendre nodes and weights on `[0, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Unnormalized log density written out directly.
pub fn log_kernel(alpha: &[f64], beta: &[f64], y: &[f64]) -> f64 {
    let k = y.len();
    let mut rem = 1.0;
    let mut v = 0.0;
    for i in 0..k {
        rem -= y[i];
        let gamma = if i + 1 < k { beta[i] - alpha[i + 1] - beta[i + 1] } else { beta[i] - 1.0 };
        v += (alpha[i] - 1.0) * y[i].ln() + gamma * rem.ln();
    }
    v
}

pub fn lbeta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// Coefficient set for the reference formulas, `c` as a dense `(K-1) x (K-1)` array.
pub struct Coeffs {
    pub b: Vec<f64>,
    pub s: Vec<f64>,
    pub kappa: Vec<f64>,
    pub c: Vec<Vec<f64>>,
}

fn remainder(y: &[f64], upto: usize) -> f64 {
    1.0 - y[..=upto].iter().sum::<f64>()
}

/// `U_i = prod_{j=i}^{K-1} 1 / Y_j` as a direct product.
fn scale(y: &[f64], i: usize) -> f64 {
    (i..y.len() - 1).map(|j| 1.0 / remainder(y, j)).product()
}

pub fn ref_drift(c: &Coeffs, y: &[f64]) -> Vec<f64> {
    let k = y.len();
    let tail = remainder(y, k - 1);
    (0..k)
        .map(|i| {
            let coupling: f64 = (i..k - 1).map(|j| c.c[i][j] / remainder(y, j)).sum();
            0.5 * scale(y, i) * (c.b[i] * (c.s[i] * tail - (1.0 - c.s[i]) * y[i]) + y[i] * tail * coupling)
        })
        .collect()
}

pub fn ref_diffusion(c: &Coeffs, y: &[f64]) -> Vec<f64> {
    let k = y.len();
    let tail = remainder(y, k - 1);
    (0..k).map(|i| c.kappa[i] * y[i] * tail * scale(y, i)).collect()
}

/// Fourth-order central difference of `f` along coordinate `j`.
fn d_dy(f: impl Fn(&[f64]) -> f64, y: &[f64], j: usize, h: f64) -> f64 {
    let at = |dx: f64| {
        let mut z = y.to_vec();
        z[j] += dx;
        f(&z)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

/// Potential-condition residual with every derivative taken numerically.
pub fn fd_residual(alpha: &[f64], beta: &[f64], c: &Coeffs, y: &[f64]) -> Vec<f64> {
    let k = y.len();
    let margin = (0..k).map(|i| y[i].min(remainder(y, i))).fold(f64::INFINITY, f64::min);
    let h = 1e-4 * margin;
    let a = ref_drift(c, y);
    let b = ref_diffusion(c, y);
    (0..k)
        .map(|j| {
            let grad = d_dy(|z| log_kernel(alpha, beta, z), y, j, h);
            let db = d_dy(|z| ref_diffusion(c, z)[j], y, j, h);
            grad - (2.0 * a[j] - db) / b[j]
        })
        .collect()
}

/// Drift and diffusion for three components, spelled out term by term.
pub fn three_component(c: &Coeffs, y: &[f64]) -> ([f64; 3], [f64; 3]) {
    let (y1, y2, y3) = (y[0], y[1], y[2]);
    let r1 = 1.0 - y1;
    let r2 = 1.0 - y1 - y2;
    let r3 = 1.0 - y1 - y2 - y3;
    let (b, s, k) = (&c.b, &c.s, &c.kappa);
    let a1 = (b[0] / 2.0) / (r1 * r2) * (s[0] * r3 - (1.0 - s[0]) * y1)
        + y1 * r3 / (r1 * r2) * ((c.c[0][0] / 2.0) / r1 + (c.c[0][1] / 2.0) / r2);
    let a2 = (b[1] / 2.0) / r2 * (s[1] * r3 - (1.0 - s[1]) * y2) + (c.c[1][1] / 2.0) * y2 * r3 / (r2 * r2);
    let a3 = (b[2] / 2.0) * (s[2] * r3 - (1.0 - s[2]) * y3);
    let b11 = k[0] * y1 * r3 / (r1 * r2);
    let b22 = k[1] * y2 * r3 / r2;
    let b33 = k[2] * y3 * r3;
    ([a1, a2, a3], [b11, b22, b33])
}

/// Magnitude of the largest term in the three-component drift, used to scale
/// comparisons where the drift itself may cancel to near zero.
pub fn three_component_scale(c: &Coeffs, y: &[f64]) -> [f64; 3] {
    let (y1, y2, y3) = (y[0], y[1], y[2]);
    let r1 = 1.0 - y1;
    let r2 = 1.0 - y1 - y2;
    let r3 = 1.0 - y1 - y2 - y3;
    let (b, s) = (&c.b, &c.s);
    [
        (b[0] / (r1 * r2)) * (s[0] * r3 + (1.0 - s[0]) * y1)
            + y1 * r3 / (r1 * r2) * (c.c[0][0].abs() / r1 + c.c[0][1].abs() / r2),
        b[1] / r2 * (s[1] * r3 + (1.0 - s[1]) * y2) + c.c[1][1].abs() * y2 * r3 / (r2 * r2),
        b[2] * (s[2] * r3 + (1.0 - s[2]) * y3),
    ]
}

/// Exact stationary moments of the three two-component cases as `(num, den)`:
/// means, variances and the covariance of the first two components.
pub struct CaseMoments {
    pub mean: [(i128, i128); 2],
    pub var: [(i128, i128); 2],
    pub cov: (i128, i128),
}

pub const CASES: [CaseMoments; 3] = [
    CaseMoments { mean: [(1, 2), (1, 5)], var: [(1, 44), (4, 275)], cov: (-1, 110) },
    CaseMoments { mean: [(5, 12), (7, 30)], var: [(35, 1872), (609, 35100)], cov: (-35, 4680) },
    CaseMoments { mean: [(5, 31), (52, 155)], var: [(65, 15376), (11141, 384400)], cov: (-13, 7688) },
];

/// `c11` for the three cases, `(num, den)`.
pub const CASE_C11: [(i128, i128); 3] = [(1, 80), (-1, 80), (-1, 4)];
/// `beta_1` of the three cases.
pub const CASE_BETA1: [i128; 3] = [5, 7, 26];

pub fn ratio_f64((n, d): (i128, i128)) -> f64 {
    n as f64 / d as f64
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
