//! Normal equations of the LET weights and their solution.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::degradation::{pilot_inverse, DegradationModel};
use crate::error::{Error, Result};
use crate::frame::{analyze, gamma_bar, subband_noise_std, synthesize, FrameCoefficients, FrameTransform};
use crate::grid::SpatialField;
use crate::let_estimator::{apply_theta, beta_fields, derivative_sums, LetSpec};
use crate::risk::{check_orthonormal, sure_estimate, RiskReport};

/// Relative ridges tried after the requested one fails.
pub const RIDGE_LADDER: [f64; 2] = [1e-8, 1e-6];
/// A system counts as positive definite when `eig_min > PIVOT_TOLERANCE * eig_max`.
pub const PIVOT_TOLERANCE: f64 = 1e-14;
const REFINEMENT_STEPS: usize = 50;

/// `gram a = rhs` with `gram` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalSystem {
    pub gram: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `(subband, function)` of each unknown.
    pub index: Vec<(usize, usize)>,
}

impl NormalSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn gram_at(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.dim() + j]
    }

    /// `a^T gram a - 2 a^T rhs`.
    pub fn quadratic_form(&self, a: &[f64]) -> f64 {
        let n = self.dim();
        let mut q = 0.0;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| self.gram_at(i, j) * a[j]).sum();
            q += a[i] * (row - 2.0 * self.rhs[i]);
        }
        q
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.gram)
    }

    /// Sub-system restricted to the unknowns of subband `m`.
    pub fn restrict(&self, m: usize) -> NormalSystem {
        let keep: Vec<usize> = (0..self.dim()).filter(|&k| self.index[k].0 == m).collect();
        NormalSystem {
            gram: keep
                .iter()
                .flat_map(|&i| keep.iter().map(move |&j| (i, j)))
                .map(|(i, j)| self.gram_at(i, j))
                .collect(),
            rhs: keep.iter().map(|&k| self.rhs[k]).collect(),
            index: keep.iter().map(|&k| self.index[k]).collect(),
        }
    }
}

/// Gram matrix `<beta_k, beta_k'>` and right-hand side
/// `<beta_k, r~> - gamma * fprime_sums[k]`.
pub fn assemble(
    betas: &[SpatialField],
    pilot: &SpatialField,
    fprime_sums: &[f64],
    gamma: f64,
    index: Vec<(usize, usize)>,
) -> Result<NormalSystem> {
    let n = betas.len();
    if fprime_sums.len() != n || index.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: if fprime_sums.len() != n { fprime_sums.len() } else { index.len() },
        });
    }
    for b in betas {
        b.shape().check_same(pilot.shape())?;
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| if j < i { 0.0 } else { betas[i].dot(&betas[j]) }).collect())
        .collect();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            gram[i * n + j] = rows[i][j];
            gram[j * n + i] = rows[i][j];
        }
    }
    let rhs = betas
        .iter()
        .zip(fprime_sums)
        .map(|(b, f)| b.dot(pilot) - gamma * f)
        .collect();
    Ok(NormalSystem { gram, rhs, index })
}

/// Solved weights with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSolution {
    pub weights: Vec<f64>,
    /// Relative ridge used by the accepted factorization.
    pub ridge: f64,
    /// `eig_max / eig_min` of the equilibrated matrix.
    pub condition: f64,
}

/// Solves `(gram + ridge * diag(gram)) a = rhs`, climbing the ridge
/// ladder when the matrix is not positive definite. When a larger ridge is
/// needed, the answer is refined against the requested system.
pub fn solve(system: &NormalSystem, ridge: f64) -> Result<WeightSolution> {
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge = {ridge}")));
    }
    let n = system.dim();
    if n == 0 {
        return Ok(WeightSolution { weights: vec![], ridge, condition: 1.0 });
    }
    let gram = system.matrix();
    let rhs = DVector::from_column_slice(&system.rhs);
    if !gram.iter().chain(rhs.iter()).all(|v| v.is_finite()) {
        return Err(Error::SingularSystem("non-finite entries".into()));
    }
    // functions with no energy get weight zero
    let live: Vec<bool> = (0..n).map(|i| gram[(i, i)] > 0.0).collect();
    if !live.iter().any(|&l| l) {
        return Err(Error::SingularSystem(format!("{n}x{n} system is zero")));
    }
    // symmetric diagonal equilibration; ridges are relative to the diagonal
    let scale = DVector::from_iterator(n, (0..n).map(|i| if live[i] { gram[(i, i)].sqrt().recip() } else { 0.0 }));
    let equilibrated = DMatrix::from_fn(n, n, |i, j| match (live[i], live[j]) {
        (true, true) => gram[(i, j)] * scale[i] * scale[j],
        _ if i == j => 1.0,
        _ => 0.0,
    });
    let shifted = |rho: f64| {
        let mut m = equilibrated.clone();
        for i in 0..n {
            m[(i, i)] += rho;
        }
        m
    };
    let target = shifted(ridge);
    let b = rhs.component_mul(&scale);
    let ladder = std::iter::once(ridge).chain(RIDGE_LADDER.iter().copied().filter(|&r| r > ridge));
    for rho in ladder {
        let m = shifted(rho);
        let eig = m.clone().symmetric_eigenvalues();
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        if !(hi > 0.0 && lo > PIVOT_TOLERANCE * hi) {
            debug!("normal system not positive definite at ridge {rho:e} (eig {lo:e}..{hi:e})");
            continue;
        }
        let Some(chol) = m.cholesky() else { continue };
        let mut y = chol.solve(&b);
        if rho > ridge {
            warn!("normal system regularized with relative ridge {rho:e}");
        }
        // refine against the requested system while the residual keeps shrinking
        let mut residual = &b - &target * &y;
        for _ in 0..REFINEMENT_STEPS {
            if residual.norm() <= 1e-15 * b.norm() {
                break;
            }
            let next = &y + chol.solve(&residual);
            let next_residual = &b - &target * &next;
            if next_residual.norm() >= residual.norm() {
                break;
            }
            y = next;
            residual = next_residual;
        }
        let weights = y.component_mul(&scale);
        return Ok(WeightSolution { weights: weights.iter().copied().collect(), ridge: rho, condition: hi / lo });
    }
    Err(Error::SingularSystem(format!("{n}x{n} system not positive definite at any ridge")))
}

/// Everything needed to evaluate the risk of a weight vector.
#[derive(Debug, Clone)]
pub struct LetProblem<'a> {
    pub frame: &'a FrameTransform,
    pub model: &'a DegradationModel,
    pub spec: LetSpec,
    pub coeffs: FrameCoefficients,
    pub sigmas: Vec<f64>,
    pub gamma_bars: Vec<f64>,
    pub pilot: SpatialField,
}

impl<'a> LetProblem<'a> {
    pub fn new(r: &SpatialField, frame: &'a FrameTransform, model: &'a DegradationModel, spec: &LetSpec) -> Result<Self> {
        let coeffs = analyze(r, frame, model)?;
        if spec.subbands() != coeffs.bands().len() {
            return Err(Error::LengthMismatch { expected: coeffs.bands().len(), found: spec.subbands() });
        }
        Ok(Self {
            frame,
            model,
            spec: spec.clone(),
            coeffs,
            sigmas: subband_noise_std(frame, model),
            gamma_bars: gamma_bar(frame, model)?,
            pilot: pilot_inverse(r, model)?,
        })
    }

    pub fn normal_system(&self) -> Result<NormalSystem> {
        let betas = beta_fields(&self.coeffs, self.frame, self.model, &self.spec, &self.sigmas)?;
        let sums = derivative_sums(&self.coeffs, &self.spec, &self.sigmas, &self.gamma_bars)?;
        assemble(&betas, &self.pilot, &sums, self.model.gamma(), self.spec.index_map())
    }

    /// Estimate, `Theta'` and risk report for flat weights `a`.
    pub fn evaluate(&self, a: &[f64]) -> Result<(SpatialField, FrameCoefficients, RiskReport)> {
        let spec = self.spec.clone().with_flat_weights(a)?;
        let (values, derivs) = apply_theta(&self.coeffs, &spec, &self.sigmas)?;
        let s_hat = synthesize(&values, self.frame, self.model)?;
        let report = sure_estimate(&s_hat, &self.pilot, &derivs, &self.gamma_bars, self.model)?;
        Ok((s_hat, derivs, report))
    }

    /// Constant part of `D * E_hat(a)` beside [`NormalSystem::quadratic_form`].
    pub fn risk_constant(&self) -> f64 {
        self.pilot.norm_sq() - self.model.gamma() * self.model.inverse_power_sum(2)
    }
}

/// Result of [`optimize_let`].
#[derive(Debug, Clone)]
pub struct LetFit {
    pub spec: LetSpec,
    pub estimate: SpatialField,
    pub theta_prime: FrameCoefficients,
    pub report: RiskReport,
    pub solution: WeightSolution,
}

/// Fits the LET weights of `spec` to `r` by minimizing the risk estimate.
pub fn optimize_let(
    r: &SpatialField,
    frame: &FrameTransform,
    model: &DegradationModel,
    spec: &LetSpec,
) -> Result<LetFit> {
    let problem = LetProblem::new(r, frame, model, spec)?;
    let solution = solve(&problem.normal_system()?, 0.0)?;
    finish(&problem, solution)
}

fn finish(problem: &LetProblem<'_>, solution: WeightSolution) -> Result<LetFit> {
    let (estimate, theta_prime, report) = problem.evaluate(&solution.weights)?;
    Ok(LetFit {
        spec: problem.spec.clone().with_flat_weights(&solution.weights)?,
        estimate,
        theta_prime,
        report,
        solution,
    })
}

/// Fits each subband on its own; valid when the synthesis family is
/// orthonormal on the observable space.
pub fn solve_subband_orthonormal(
    r: &SpatialField,
    frame: &FrameTransform,
    model: &DegradationModel,
    spec: &LetSpec,
) -> Result<LetFit> {
    check_orthonormal(frame, model)?;
    let problem = LetProblem::new(r, frame, model, spec)?;
    let full = problem.normal_system()?;
    let mut weights = vec![0.0; full.dim()];
    let (mut ridge, mut condition) = (0.0f64, 1.0f64);
    for m in 0..spec.subbands() {
        let sub = full.restrict(m);
        let sol = solve(&sub, 0.0)?;
        ridge = ridge.max(sol.ridge);
        condition = condition.max(sol.condition);
        let mut it = sol.weights.iter();
        for (k, w) in weights.iter_mut().enumerate() {
            if full.index[k].0 == m {
                *w = *it.next().unwrap();
            }
        }
    }
    finish(&problem, WeightSolution { weights, ridge, condition })
}

/// `sum_k a_k beta_k`.
pub fn combine(betas: &[SpatialField], a: &[f64]) -> Result<SpatialField> {
    let first = betas.first().ok_or_else(|| Error::InvalidArgument("no fields to combine".into()))?;
    let mut out = SpatialField::zeros(first.shape());
    for (b, &w) in betas.iter().zip(a) {
        out.add_scaled(w, b)?;
    }
    Ok(out)
}
