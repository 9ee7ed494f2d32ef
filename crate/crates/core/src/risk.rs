//! Unbiased estimate of the observable risk, its variance, and the choice of
//! the observable frequency set.

use log::warn;
use serde::Serialize;

use crate::degradation::{inverse_filter, observable_cut, DegradationModel};
use crate::error::{Error, Result};
use crate::frame::{cross_double_sum, FrameCoefficients, FrameFlavor, FrameTransform};
use crate::grid::{dft_forward, mean_square, SpatialField, SpectrumField};
use crate::let_estimator::{apply_theta, LetSpec};

/// Number of bisection steps of [`select_chi`].
pub const CHI_BISECTION_STEPS: usize = 20;
/// Reliability factor of [`select_chi`]: accept when `E > factor * sqrt(V)`.
pub const CHI_RELIABILITY: f64 = 10.0;

/// Observable risk estimate and its ingredients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    /// `E(s_hat - r~)`.
    pub data_term: f64,
    pub delta_hat: f64,
    /// `data_term + delta_hat`.
    pub e_hat: f64,
    pub variance_hat: Option<f64>,
    pub chi: f64,
    pub card_q: usize,
    /// `(2 gamma / D) gamma_bar_m sum_{l in K_m} Theta'(r_l)` per subband.
    pub penalty_by_subband: Vec<f64>,
}

/// Risk estimate of `s_hat` given the pilot inverse and the derivatives of the
/// estimating functions.
pub fn sure_estimate(
    s_hat: &SpatialField,
    pilot: &SpatialField,
    theta_prime: &FrameCoefficients,
    gamma_bars: &[f64],
    model: &DegradationModel,
) -> Result<RiskReport> {
    s_hat.shape().check_same(model.shape())?;
    pilot.shape().check_same(model.shape())?;
    if theta_prime.bands().len() != gamma_bars.len() {
        return Err(Error::LengthMismatch {
            expected: gamma_bars.len(),
            found: theta_prime.bands().len(),
        });
    }
    let card_q = model.observable().count();
    if card_q == 0 {
        return Err(Error::EmptyObservableSet { chi: model.chi() });
    }
    let d = model.shape().len() as f64;
    let gamma = model.gamma();
    let data_term = mean_square(&s_hat.sub(pilot)?);
    let per_band: Vec<f64> = theta_prime
        .bands()
        .iter()
        .zip(gamma_bars)
        .map(|(b, g)| b.iter().sum::<f64>() * g)
        .collect();
    let delta_hat =
        gamma / d * (2.0 * per_band.iter().sum::<f64>() - model.inverse_power_sum(2));
    Ok(RiskReport {
        data_term,
        delta_hat,
        e_hat: data_term + delta_hat,
        variance_hat: None,
        chi: model.chi(),
        card_q,
        penalty_by_subband: per_band.iter().map(|v| 2.0 * gamma / d * v).collect(),
    })
}

/// Plug-in estimate of `Var[E_o - E_hat]` from the doubly deconvolved fields
/// and the cross double sum `sum_l sum_i Theta'_l Theta'_i gb_{l,i} gb_{i,l}`.
pub fn sure_variance_estimate(
    s_hat_h: &SpatialField,
    pilot_h: &SpatialField,
    cross_sum: f64,
    model: &DegradationModel,
) -> Result<f64> {
    if model.observable().count() == 0 {
        return Err(Error::EmptyObservableSet { chi: model.chi() });
    }
    let d = model.shape().len() as f64;
    let g = model.gamma();
    Ok(4.0 * g / d * mean_square(&s_hat_h.sub(pilot_h)?) + 4.0 * g * g / (d * d) * cross_sum
        - 2.0 * g * g / (d * d) * model.inverse_power_sum(4))
}

/// Variance estimate computed from the estimate, the pilot and `Theta'`.
pub fn sure_variance(
    s_hat: &SpatialField,
    pilot: &SpatialField,
    theta_prime: &FrameCoefficients,
    frame: &FrameTransform,
    model: &DegradationModel,
    truncation_radius: Option<usize>,
) -> Result<f64> {
    let cross = cross_double_sum(frame, model, theta_prime, truncation_radius)?;
    sure_variance_estimate(
        &inverse_filter(s_hat, model)?,
        &inverse_filter(pilot, model)?,
        cross,
        model,
    )
}

/// `lambda = 3 gamma / (var(r) - gamma)`, or 0 when the denominator is not
/// positive.
pub fn lambda_heuristic(r: &SpatialField, gamma: f64) -> f64 {
    let denom = r.variance() - gamma;
    if denom <= 0.0 {
        warn!("observation variance {:.4} does not exceed gamma {gamma:.4}; using lambda = 0", r.variance());
        return 0.0;
    }
    3.0 * gamma / denom
}

/// Risk of the identity estimator `Theta = id` for any exact frame, in closed
/// form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRisk {
    pub e_hat: f64,
    /// Plug-in variance estimate.
    pub variance: f64,
    /// Variance bound used by the reliability rule.
    pub v_max: f64,
    pub card_q: usize,
}

impl ProbeRisk {
    /// A noise-free probe (`v_max = 0`) is always reliable.
    pub fn is_reliable(&self) -> bool {
        self.v_max == 0.0 || self.e_hat > CHI_RELIABILITY * self.v_max.sqrt()
    }
}

/// Identity-probe risk at threshold `chi`; `None` when the observable set is empty.
///
/// With `Theta = id` the estimate is `Pi r_check` whatever the frame, so every
/// term reduces to a sum over the observable bins.
pub fn identity_probe(
    r_spectrum: &SpectrumField,
    response: &SpectrumField,
    gamma: f64,
    lambda: f64,
    chi: f64,
) -> Option<ProbeRisk> {
    let d = r_spectrum.len() as f64;
    let cut = observable_cut(response, chi);
    let mut card_q = 0;
    let (mut data, mut data_h, mut s1, mut s2, mut sc, mut s4) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (r, h) in r_spectrum.values().iter().zip(response.values()) {
        let h2 = h.norm_sqr();
        if h2.sqrt() <= cut {
            continue;
        }
        card_q += 1;
        let w = 1.0 / (h2 + lambda);
        // conj(G) R - R / H = -lambda R / (H (|H|^2 + lambda))
        let diff = lambda * lambda * r.norm_sqr() * w * w / h2;
        data += diff;
        data_h += diff / h2;
        s1 += w;
        s2 += 1.0 / h2;
        sc += w * w;
        s4 += 1.0 / (h2 * h2);
    }
    if card_q == 0 {
        return None;
    }
    let e_hat = data / (d * d) + gamma / d * (2.0 * s1 - s2);
    let first = 4.0 * gamma / d * data_h / (d * d);
    let g2 = gamma * gamma / (d * d);
    Some(ProbeRisk {
        e_hat,
        variance: first + 4.0 * g2 * sc - 2.0 * g2 * s4,
        v_max: first + 4.0 * g2 * sc + 2.0 * g2 * s4,
        card_q,
    })
}

/// Outcome of [`select_chi`].
#[derive(Debug, Clone)]
pub struct ChiSelection {
    pub chi: f64,
    pub model: DegradationModel,
    pub probe: ProbeRisk,
}

/// Smallest threshold `chi` (to bisection resolution) such that the identity
/// probe satisfies `E_hat > 10 sqrt(V_max)`.
pub fn select_chi(
    r: &SpatialField,
    response: &SpectrumField,
    gamma: f64,
    frame_flavor: &FrameFlavor,
    lambda: f64,
) -> Result<ChiSelection> {
    r.shape().check_same(response.shape())?;
    if !frame_flavor.is_exact() {
        return Err(Error::InvalidFrame(
            "threshold search needs a frame with exact reconstruction".into(),
        ));
    }
    let max_response = response.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(max_response > 0.0) {
        return Err(Error::InvalidArgument("blur response is identically zero".into()));
    }
    let rs = dft_forward(r);
    let probe = |chi: f64| identity_probe(&rs, response, gamma, lambda, chi);
    let accept = |chi: f64| probe(chi).filter(ProbeRisk::is_reliable);

    let finish = |chi: f64, p: ProbeRisk| -> Result<ChiSelection> {
        let model = DegradationModel::new(response.clone(), gamma, chi)?;
        Ok(ChiSelection { chi, model, probe: p })
    };
    if let Some(p) = accept(0.0) {
        return finish(0.0, p);
    }
    let top = max_response * (1.0 - 0.5f64.powi(CHI_BISECTION_STEPS as i32));
    let mut best = accept(top).ok_or(Error::NoAdmissibleChi { max_response })?;
    let (mut lo, mut hi) = (0.0, top);
    for _ in 0..CHI_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        match accept(mid) {
            Some(p) => {
                hi = mid;
                best = p;
            }
            None => lo = mid,
        }
    }
    finish(hi, best)
}

/// Threshold on a uniform grid of `steps` points in `[0, max|H|)` that maximizes
/// `E_hat / sqrt(V_max)`; the fallback when [`select_chi`] finds nothing.
pub fn most_reliable_chi(
    r: &SpatialField,
    response: &SpectrumField,
    gamma: f64,
    lambda: f64,
    steps: usize,
) -> Result<ChiSelection> {
    r.shape().check_same(response.shape())?;
    let max_response = response.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(max_response > 0.0) || steps == 0 {
        return Err(Error::InvalidArgument("blur response is identically zero".into()));
    }
    let rs = dft_forward(r);
    let score = |p: &ProbeRisk| if p.v_max > 0.0 { p.e_hat / p.v_max.sqrt() } else { f64::INFINITY };
    let mut best: Option<(f64, ProbeRisk)> = None;
    for k in 0..steps {
        let chi = max_response * k as f64 / steps as f64;
        if let Some(p) = identity_probe(&rs, response, gamma, lambda, chi) {
            if best.as_ref().is_none_or(|(_, b)| score(&p) > score(b)) {
                best = Some((chi, p));
            }
        }
    }
    let (chi, probe) = best.ok_or(Error::NoAdmissibleChi { max_response })?;
    let model = DegradationModel::new(response.clone(), gamma, chi)?;
    Ok(ChiSelection { chi, model, probe })
}

/// Coefficients `<r~, psi~_l>` of the pilot against the synthesis family.
pub fn pilot_coefficients(pilot: &SpatialField, frame: &FrameTransform) -> Result<FrameCoefficients> {
    frame.partition().correlate_dual(&dft_forward(pilot))
}

/// Per-subband criterion
/// `sum_{l in K_m} (Theta(r_l) - r~_l)^2 + 2 gamma gamma_bar_m sum_{l in K_m} Theta'(r_l)`.
///
/// Requires an orthonormal synthesis family on the observable space.
#[allow(clippy::too_many_arguments)]
pub fn subband_criterion(
    coeffs: &FrameCoefficients,
    pilot_coeffs: &FrameCoefficients,
    spec: &LetSpec,
    sigmas: &[f64],
    gamma_bars: &[f64],
    m: usize,
    frame: &FrameTransform,
    model: &DegradationModel,
) -> Result<f64> {
    check_orthonormal(frame, model)?;
    let (values, derivs) = apply_theta(coeffs, spec, sigmas)?;
    let fit: f64 = values
        .band(m)
        .iter()
        .zip(pilot_coeffs.band(m))
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(fit + 2.0 * model.gamma() * gamma_bars[m] * derivs.band(m).iter().sum::<f64>())
}

pub(crate) fn check_orthonormal(frame: &FrameTransform, model: &DegradationModel) -> Result<()> {
    if !frame.flavor().is_orthonormal() {
        return Err(Error::NotOrthonormalFlavor(format!("{} is redundant", frame.flavor())));
    }
    if !model.observable().is_full() {
        return Err(Error::NotOrthonormalFlavor(
            "projection onto a strict frequency subset breaks orthonormality".into(),
        ));
    }
    Ok(())
}
