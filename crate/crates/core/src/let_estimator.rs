//! Linear expansions of thresholds: per-subband estimating functions
//! `Theta(rho) = sum_i a_i f_i(rho)` and the fields they synthesize.

use rayon::prelude::*;

use crate::degradation::DegradationModel;
use crate::error::{Error, Result};
use crate::frame::{FrameCoefficients, FrameTransform};
use crate::grid::{dft_inverse, project_frequencies, SpatialField};

/// Default `omega` of [`ElementaryFunction::BluExp`].
pub const DEFAULT_OMEGA: f64 = 3.0;
/// Default `xi` of [`ElementaryFunction::TanhGate`].
pub const DEFAULT_XI: f64 = 3.5;
/// Default `omega'` of [`ElementaryFunction::TanhGate`].
pub const DEFAULT_OMEGA_P: f64 = 2.25;

/// Ratios `|rho| / (omega sigma)` above this value use `f = rho` exactly.
const BLU_CUTOFF: f64 = 6.0;

/// `(1 - exp(-(rho / (omega sigma))^8)) rho` and its derivative.
pub fn f_blu(rho: f64, omega: f64, sigma: f64) -> (f64, f64) {
    let scale = omega * sigma;
    if scale == 0.0 {
        return (rho, 1.0);
    }
    let t = rho / scale;
    if t.abs() > BLU_CUTOFF {
        return (rho, 1.0);
    }
    let t2 = t * t;
    let t4 = t2 * t2;
    let u = t4 * t4;
    let e = (-u).exp();
    let gate = -(-u).exp_m1();
    (gate * rho, gate + 8.0 * u * e)
}

/// `(tanh((rho + xi sigma) / (omega' sigma)) - tanh((rho - xi sigma) / (omega' sigma))) rho`
/// and its derivative.
pub fn f_tanh(rho: f64, xi: f64, omega_p: f64, sigma: f64) -> (f64, f64) {
    let scale = omega_p * sigma;
    if scale == 0.0 {
        return (0.0, 0.0);
    }
    let a = (rho + xi * sigma) / scale;
    let b = (rho - xi * sigma) / scale;
    let (ta, tb) = (a.tanh(), b.tanh());
    let sech2 = |x: f64| {
        let c = x.cosh();
        1.0 / (c * c)
    };
    let gate = ta - tb;
    (gate * rho, gate + rho / scale * (sech2(a) - sech2(b)))
}

/// Building block of a LET.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementaryFunction {
    Identity,
    BluExp { omega: f64 },
    TanhGate { xi: f64, omega_p: f64 },
}

impl ElementaryFunction {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ElementaryFunction::Identity => true,
            ElementaryFunction::BluExp { omega } => omega > 0.0 && omega.is_finite(),
            ElementaryFunction::TanhGate { xi, omega_p } => {
                xi > 0.0 && omega_p > 0.0 && xi.is_finite() && omega_p.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidEstimator(format!("{self:?} has non-positive parameters")))
        }
    }

    /// `(f(rho), f'(rho))` for a subband with noise deviation `sigma`.
    pub fn eval(&self, rho: f64, sigma: f64) -> (f64, f64) {
        match *self {
            ElementaryFunction::Identity => (rho, 1.0),
            ElementaryFunction::BluExp { omega } => f_blu(rho, omega, sigma),
            ElementaryFunction::TanhGate { xi, omega_p } => f_tanh(rho, xi, omega_p, sigma),
        }
    }
}

/// Elementary functions and (once solved) weights for every subband.
#[derive(Debug, Clone, PartialEq)]
pub struct LetSpec {
    functions: Vec<Vec<ElementaryFunction>>,
    weights: Option<Vec<Vec<f64>>>,
}

impl LetSpec {
    pub fn new(functions: Vec<Vec<ElementaryFunction>>) -> Result<Self> {
        if functions.is_empty() || functions.iter().any(|f| f.is_empty()) {
            return Err(Error::InvalidEstimator(
                "every subband needs at least one function".into(),
            ));
        }
        for f in functions.iter().flatten() {
            f.validate()?;
        }
        Ok(Self {
            functions,
            weights: None,
        })
    }

    /// The same functions in each of `subbands` subbands.
    pub fn uniform(subbands: usize, functions: &[ElementaryFunction]) -> Result<Self> {
        Self::new(vec![functions.to_vec(); subbands])
    }

    /// Identity plus the exponential gate.
    pub fn blu(subbands: usize, omega: f64) -> Result<Self> {
        Self::uniform(
            subbands,
            &[ElementaryFunction::Identity, ElementaryFunction::BluExp { omega }],
        )
    }

    /// Identity plus the tanh gate.
    pub fn tanh(subbands: usize, xi: f64, omega_p: f64) -> Result<Self> {
        Self::uniform(
            subbands,
            &[ElementaryFunction::Identity, ElementaryFunction::TanhGate { xi, omega_p }],
        )
    }

    /// `Theta = id` with unit weights.
    pub fn identity(subbands: usize) -> Result<Self> {
        Self::uniform(subbands, &[ElementaryFunction::Identity])?.with_weights(vec![vec![1.0]; subbands])
    }

    /// `Theta = 0`.
    pub fn zero(subbands: usize) -> Result<Self> {
        Self::uniform(subbands, &[ElementaryFunction::Identity])?.with_weights(vec![vec![0.0]; subbands])
    }

    pub fn functions(&self) -> &[Vec<ElementaryFunction>] {
        &self.functions
    }

    pub fn weights(&self) -> Option<&[Vec<f64>]> {
        self.weights.as_deref()
    }

    pub fn subbands(&self) -> usize {
        self.functions.len()
    }

    /// Number of weights `sum_m I_m`.
    pub fn weight_count(&self) -> usize {
        self.functions.iter().map(|f| f.len()).sum()
    }

    /// `(m, i)` for every flat weight index.
    pub fn index_map(&self) -> Vec<(usize, usize)> {
        self.functions
            .iter()
            .enumerate()
            .flat_map(|(m, f)| (0..f.len()).map(move |i| (m, i)))
            .collect()
    }

    pub fn with_weights(mut self, weights: Vec<Vec<f64>>) -> Result<Self> {
        if weights.len() != self.functions.len()
            || weights.iter().zip(&self.functions).any(|(w, f)| w.len() != f.len())
        {
            return Err(Error::LengthMismatch {
                expected: self.weight_count(),
                found: weights.iter().map(|w| w.len()).sum(),
            });
        }
        self.weights = Some(weights);
        Ok(self)
    }

    /// Sets weights from a vector ordered as [`LetSpec::index_map`].
    pub fn with_flat_weights(self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.weight_count() {
            return Err(Error::LengthMismatch {
                expected: self.weight_count(),
                found: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        let weights = self
            .functions
            .iter()
            .map(|f| it.by_ref().take(f.len()).collect())
            .collect();
        self.with_weights(weights)
    }

    pub fn flat_weights(&self) -> Option<Vec<f64>> {
        self.weights
            .as_ref()
            .map(|w| w.iter().flatten().copied().collect())
    }

    fn check(&self, coeffs: &FrameCoefficients, sigmas: &[f64]) -> Result<()> {
        let m = coeffs.bands().len();
        if self.functions.len() != m || sigmas.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                found: if self.functions.len() != m {
                    self.functions.len()
                } else {
                    sigmas.len()
                },
            });
        }
        Ok(())
    }
}

/// `(Theta(r_l), Theta'(r_l))` for every coefficient.
pub fn apply_theta(
    coeffs: &FrameCoefficients,
    spec: &LetSpec,
    sigmas: &[f64],
) -> Result<(FrameCoefficients, FrameCoefficients)> {
    spec.check(coeffs, sigmas)?;
    let weights = spec.weights.as_ref().ok_or(Error::WeightsUnset)?;
    let (values, derivs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = coeffs
        .bands()
        .par_iter()
        .enumerate()
        .map(|(m, band)| {
            let fs = &spec.functions[m];
            let ws = &weights[m];
            band.iter()
                .map(|&rho| {
                    fs.iter().zip(ws).fold((0.0, 0.0), |(v, d), (f, &a)| {
                        let (fv, fd) = f.eval(rho, sigmas[m]);
                        (v + a * fv, d + a * fd)
                    })
                })
                .unzip()
        })
        .unzip();
    Ok((FrameCoefficients::new(values), FrameCoefficients::new(derivs)))
}

/// `sum_{l in K_m} f'_{m,i}(r_l) gamma_bar_m` for every `(m, i)`.
pub fn derivative_sums(
    coeffs: &FrameCoefficients,
    spec: &LetSpec,
    sigmas: &[f64],
    gamma_bars: &[f64],
) -> Result<Vec<f64>> {
    spec.check(coeffs, sigmas)?;
    Ok(spec
        .index_map()
        .into_par_iter()
        .map(|(m, i)| {
            let f = spec.functions[m][i];
            coeffs.band(m).iter().map(|&r| f.eval(r, sigmas[m]).1).sum::<f64>() * gamma_bars[m]
        })
        .collect())
}

/// `beta_{m,i} = Pi sum_{l in K_m} f_{m,i}(r_l) psi~_l`, ordered as
/// [`LetSpec::index_map`].
pub fn beta_fields(
    coeffs: &FrameCoefficients,
    frame: &FrameTransform,
    model: &DegradationModel,
    spec: &LetSpec,
    sigmas: &[f64],
) -> Result<Vec<SpatialField>> {
    spec.check(coeffs, sigmas)?;
    let partition = frame.partition();
    spec.index_map()
        .into_par_iter()
        .map(|(m, i)| {
            let f = spec.functions[m][i];
            let values: Vec<f64> = coeffs.band(m).iter().map(|&r| f.eval(r, sigmas[m]).0).collect();
            let spec = partition.subband_synthesis(m, &values);
            dft_inverse(&project_frequencies(&spec, model.observable())?)
        })
        .collect()
}
