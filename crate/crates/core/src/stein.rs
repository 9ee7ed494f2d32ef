//! Monte-Carlo checks of Stein's identity and its extensions to correlated
//! Gaussian quadruples.

use std::fmt;

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::let_estimator::{f_blu, f_tanh};

pub const MIN_SAMPLES: usize = 10_000;
/// Pass threshold in standard errors.
pub const PASS_SIGMAS: f64 = 3.0;
const BATCH: usize = 1 << 14;

/// Zero-mean Gaussian vector `(eta_1, eta_2, eta~_1, eta~_2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianQuad {
    cov: Matrix4<f64>,
    root: Matrix4<f64>,
}

const E1: usize = 0;
const E2: usize = 1;
const T1: usize = 2;
const T2: usize = 3;

impl GaussianQuad {
    /// Accepts a symmetric matrix whose smallest eigenvalue is at least
    /// `-1e-10` times the largest.
    pub fn new(cov: [[f64; 4]; 4]) -> Result<Self> {
        let cov = Matrix4::from_fn(|i, j| cov[i][j]);
        let asym = (cov - cov.transpose()).amax();
        if !cov.iter().all(|v| v.is_finite()) || asym > 1e-12 * cov.amax().max(1.0) {
            return Err(Error::InvalidArgument("covariance must be finite and symmetric".into()));
        }
        let eig = SymmetricEigen::new(cov);
        let lo = eig.eigenvalues.min();
        let hi = eig.eigenvalues.max();
        if lo < -1e-10 * hi.max(0.0) {
            return Err(Error::InvalidCovariance { min_eigenvalue: lo });
        }
        let sqrt = Matrix4::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        let root = eig.eigenvectors * sqrt * eig.eigenvectors.transpose();
        Ok(Self { cov, root })
    }

    /// Random covariance `B B^T` with standard normal `B` scaled by `1/2`.
    pub fn random(rng: &mut impl Rng) -> Self {
        let b = Matrix4::from_fn(|_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
        let c = b * b.transpose();
        Self::new(std::array::from_fn(|i| std::array::from_fn(|j| c[(i, j)]))).expect("Gram matrices are PSD")
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.cov[(i, j)]
    }

    fn sample(&self, rng: &mut impl Rng) -> Vector4<f64> {
        let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        self.root * z
    }
}

/// Scalar test function with its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TestFunction {
    Identity,
    Cubic,
    /// Kinks at `+-t` carry derivative 0.
    SoftThreshold { t: f64 },
    BluExp { omega: f64, sigma: f64 },
    TanhGate { xi: f64, omega_p: f64, sigma: f64 },
}

impl TestFunction {
    pub fn eval(&self, rho: f64) -> (f64, f64) {
        match *self {
            TestFunction::Identity => (rho, 1.0),
            TestFunction::Cubic => (rho * rho * rho, 3.0 * rho * rho),
            TestFunction::SoftThreshold { t } => {
                if rho > t {
                    (rho - t, 1.0)
                } else if rho < -t {
                    (rho + t, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            TestFunction::BluExp { omega, sigma } => f_blu(rho, omega, sigma),
            TestFunction::TanhGate { xi, omega_p, sigma } => f_tanh(rho, xi, omega_p, sigma),
        }
    }

    /// The five functions of the standard suite.
    pub fn standard_suite() -> [TestFunction; 5] {
        [
            TestFunction::Identity,
            TestFunction::Cubic,
            TestFunction::SoftThreshold { t: 0.5 },
            TestFunction::BluExp { omega: 3.0, sigma: 0.8 },
            TestFunction::TanhGate { xi: 3.5, omega_p: 2.25, sigma: 0.8 },
        ]
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Identity => write!(f, "identity"),
            TestFunction::Cubic => write!(f, "cubic"),
            TestFunction::SoftThreshold { t } => write!(f, "soft({t})"),
            TestFunction::BluExp { omega, .. } => write!(f, "blu({omega})"),
            TestFunction::TanhGate { xi, omega_p, .. } => write!(f, "tanh({xi},{omega_p})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SteinIdentity {
    /// `E[T(rho) eta] = sigma^2 E[T'(rho)]`.
    P1,
    /// `E[T1 eta~1] = E[T1'] E[eta1 eta~1]`.
    E1,
    E3,
    E4,
    E5,
}

impl SteinIdentity {
    pub const ALL: [SteinIdentity; 5] =
        [SteinIdentity::P1, SteinIdentity::E1, SteinIdentity::E3, SteinIdentity::E4, SteinIdentity::E5];

    /// `(lhs, rhs)` for one draw, with covariances taken from `quad`.
    fn sample_terms(self, x: &Vector4<f64>, ups: [f64; 2], th: (&TestFunction, &TestFunction), q: &GaussianQuad) -> (f64, f64) {
        let (a, da) = th.0.eval(ups[0] + x[E1]);
        let c = |i, j| q.cov(i, j);
        match self {
            SteinIdentity::P1 => (a * x[E1], c(E1, E1) * da),
            SteinIdentity::E1 => (a * x[T1], da * c(E1, T1)),
            SteinIdentity::E3 => (a * x[T1] * x[T2], da * x[T2] * c(E1, T1) + a * c(T1, T2)),
            SteinIdentity::E4 => {
                let t22 = x[T2] * x[T2];
                (
                    a * x[T1] * t22,
                    da * t22 * c(E1, T1) + 2.0 * da * c(T1, T2) * c(T2, E1),
                )
            }
            SteinIdentity::E5 => {
                let (b, db) = th.1.eval(ups[1] + x[E2]);
                (
                    a * b * x[T1] * x[T2],
                    a * b * c(T1, T2)
                        + da * b * x[T2] * c(E1, T1)
                        + a * db * x[T1] * c(E2, T2)
                        + da * db * (c(E1, T2) * c(E2, T1) - c(E1, T1) * c(E2, T2)),
                )
            }
        }
    }
}

impl fmt::Display for SteinIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Two-sided Monte-Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Standard error of `lhs - rhs`.
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    lhs: f64,
    rhs: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, lhs: f64, rhs: f64) {
        let d = lhs - rhs;
        self.n += 1.0;
        self.lhs += lhs;
        self.rhs += rhs;
        let delta = d - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (d - self.mean);
    }

    fn merge(a: Self, b: Self) -> Self {
        if a.n == 0.0 {
            return b;
        }
        if b.n == 0.0 {
            return a;
        }
        let n = a.n + b.n;
        let delta = b.mean - a.mean;
        Moments {
            n,
            lhs: a.lhs + b.lhs,
            rhs: a.rhs + b.rhs,
            mean: a.mean + delta * b.n / n,
            m2: a.m2 + b.m2 + delta * delta * a.n * b.n / n,
        }
    }
}

/// Estimates both sides of `id` with common random numbers; deterministic per
/// seed.
pub fn check_identity(
    id: SteinIdentity,
    quad: &GaussianQuad,
    upsilon: [f64; 2],
    thetas: (&TestFunction, &TestFunction),
    n_samples: usize,
    seed: u64,
) -> Result<IdentityCheck> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "{n_samples} samples, at least {MIN_SAMPLES} required"
        )));
    }
    let batches = n_samples.div_ceil(BATCH);
    let m = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = BATCH.min(n_samples - b * BATCH);
            let mut acc = Moments::default();
            for _ in 0..count {
                let x = quad.sample(&mut rng);
                let (l, r) = id.sample_terms(&x, upsilon, thetas, quad);
                acc.push(l, r);
            }
            acc
        })
        .reduce(Moments::default, Moments::merge);
    let stderr = (m.m2 / (m.n - 1.0)).sqrt() / m.n.sqrt();
    Ok(IdentityCheck {
        lhs: m.lhs / m.n,
        rhs: m.rhs / m.n,
        stderr,
        pass: m.mean.abs() <= PASS_SIGMAS * stderr,
    })
}

/// One row of [`run_suite`].
#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub identity: SteinIdentity,
    pub function: String,
    pub covariance: usize,
    pub check: IdentityCheck,
}

/// Every identity against every function of the standard suite and
/// `covariances` random covariances, `n_samples` draws each.
pub fn run_suite(covariances: usize, n_samples: usize, seed: u64) -> Result<Vec<SuiteRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quads: Vec<(GaussianQuad, [f64; 2])> = (0..covariances)
        .map(|_| (GaussianQuad::random(&mut rng), [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
        .collect();
    let funcs = TestFunction::standard_suite();
    let mut rows = Vec::new();
    let mut k = 0u64;
    for (ci, (quad, ups)) in quads.iter().enumerate() {
        for f in &funcs {
            for id in SteinIdentity::ALL {
                k += 1;
                let check = check_identity(id, quad, *ups, (f, f), n_samples, seed.wrapping_add(k))?;
                rows.push(SuiteRow { identity: id, function: f.to_string(), covariance: ci, check });
            }
        }
    }
    Ok(rows)
}
