//! Scores, noise-level estimation and the Wiener baseline.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{dft_forward, dft_inverse, dft_inverse_complex, mean_square, SpatialField, SpectrumField};
use crate::wavelet::{axis_atoms, separable_spectrum, WaveletFilter};

/// Normal consistency constant of the median absolute deviation.
pub const MAD_SCALE: f64 = 0.6745;

/// `10 log10(E[s^2] / E[(s - s_hat)^2])`; `+inf` when the fields are equal.
pub fn snr_db(s: &SpatialField, s_hat: &SpatialField) -> Result<f64> {
    let signal = mean_square(s);
    if signal == 0.0 {
        return Err(Error::InvalidArgument("SNR of an all-zero reference".into()));
    }
    let err = mean_square(&s.sub(s_hat)?);
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / err).log10())
}

fn median(mut v: Vec<f64>) -> f64 {
    let n = v.len();
    let (_, m, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// `(median|d| / 0.6745)^2` over the finest all-high-pass orthonormal sym8
/// coefficients of `r`, taken on the even lattice.
pub fn mad_noise_estimate(r: &SpatialField) -> Result<f64> {
    let shape = r.shape();
    if shape.dims().iter().any(|&n| n < 4) {
        return Err(Error::InvalidArgument(format!("MAD needs at least 4 samples per axis, got {:?}", shape.dims())));
    }
    let filter = WaveletFilter::by_name("sym8")?;
    let atoms: Vec<_> = shape.dims().iter().map(|&n| axis_atoms(&filter, n, 1, 1.0)).collect();
    let lows: Vec<&[Complex64]> = atoms.iter().map(|(l, _)| l[1].as_slice()).collect();
    let highs: Vec<&[Complex64]> = atoms.iter().map(|(_, h)| h[1].as_slice()).collect();
    let psi = separable_spectrum(shape, &lows, &highs, (1 << shape.ndim()) - 1);
    let mut spec = dft_forward(r);
    for (v, p) in spec.values_mut().iter_mut().zip(psi.values()) {
        *v *= p.conj();
    }
    let corr = dft_inverse_complex(&spec);
    let mut d = Vec::with_capacity(shape.len() >> shape.ndim());
    shape.for_each(|flat, c| {
        if c.iter().all(|&x| x % 2 == 0) {
            d.push(corr.values()[flat].re.abs());
        }
    });
    Ok((median(d) / MAD_SCALE).powi(2))
}

/// Per-sample signal power proxy `max(var(r) - gamma, eps)`.
pub fn signal_power_estimate(r: &SpatialField, gamma: f64) -> f64 {
    (r.variance() - gamma).max(1e-12)
}

/// `S_hat = H* R / (|H|^2 + gamma / power)`; bins with a zero denominator are
/// set to zero.
pub fn wiener_baseline(r: &SpatialField, h: &SpectrumField, gamma: f64, power: f64) -> Result<SpatialField> {
    r.shape().check_same(h.shape())?;
    if !(gamma >= 0.0) || !(power > 0.0) {
        return Err(Error::InvalidArgument(format!("wiener: gamma = {gamma}, power = {power}")));
    }
    let ratio = gamma / power;
    let mut spec = dft_forward(r);
    for (v, hv) in spec.values_mut().iter_mut().zip(h.values()) {
        let den = hv.norm_sqr() + ratio;
        *v = if den > 0.0 { hv.conj() * *v / den } else { Complex64::new(0.0, 0.0) };
    }
    dft_inverse(&spec)
}
