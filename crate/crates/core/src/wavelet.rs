//! Orthogonal wavelet filters and the spectra of periodized wavelet atoms.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridShape, SpectrumField};

const HAAR: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];

// Reconstruction low-pass filters (decomposition filters reversed).
const SQRT3: f64 = 1.732_050_807_568_877_2;
const DB2_NORM: f64 = 0.176_776_695_296_636_9; // 1 / (4 sqrt 2)
const DB2: [f64; 4] = [
    (1.0 + SQRT3) * DB2_NORM,
    (3.0 + SQRT3) * DB2_NORM,
    (3.0 - SQRT3) * DB2_NORM,
    (1.0 - SQRT3) * DB2_NORM,
];

const SYM4: [f64; 8] = [
    0.03222310060405147,
    -0.012603967262031297,
    -0.09921954357663353,
    0.29785779560530606,
    0.8037387518051321,
    0.497618667632775,
    -0.02963552764600248,
    -0.07576571478950223,
];

const SYM8: [f64; 16] = [
    0.0018899503327677557,
    -0.0003029205147239093,
    -0.014952258337062168,
    0.0038087520138940525,
    0.04913717967373053,
    -0.027219029917102653,
    -0.051945838107884015,
    0.36444189483617395,
    0.7771857516996273,
    0.4813596512590584,
    -0.061273359067807426,
    -0.14329423835127328,
    0.007607487324975407,
    0.03169508781152608,
    -0.0005421323317996466,
    -0.0033824159510053493,
];

/// Two-channel orthogonal filter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    name: &'static str,
    lowpass: &'static [f64],
}

impl WaveletFilter {
    pub const NAMES: [&'static str; 4] = ["haar", "db2", "sym4", "sym8"];

    pub fn by_name(name: &str) -> Result<Self> {
        let (name, lowpass): (&'static str, &'static [f64]) = match name.to_ascii_lowercase().as_str() {
            "haar" | "db1" => ("haar", &HAAR),
            "db2" => ("db2", &DB2),
            "sym4" => ("sym4", &SYM4),
            "sym8" => ("sym8", &SYM8),
            _ => return Err(Error::UnknownFilter(name.to_string())),
        };
        Ok(Self { name, lowpass })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Synthesis low-pass `h`, with `sum h = sqrt 2`.
    pub fn lowpass(&self) -> &[f64] {
        self.lowpass
    }

    /// Synthesis high-pass `g[n] = (-1)^n h[L-1-n]`.
    pub fn highpass(&self) -> Vec<f64> {
        let l = self.lowpass.len();
        (0..l)
            .map(|n| {
                let v = self.lowpass[l - 1 - n];
                if n % 2 == 0 {
                    v
                } else {
                    -v
                }
            })
            .collect()
    }
}

/// `sum_k taps[k] exp(-2 pi i k up p / n)` for `p = 0..n`.
fn response_1d(taps: &[f64], n: usize, up: usize) -> Vec<Complex64> {
    let twiddle: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64))
        .collect();
    (0..n)
        .map(|p| {
            taps.iter()
                .enumerate()
                .map(|(k, &t)| t * twiddle[(k * up % n) * p % n])
                .sum()
        })
        .collect()
}

/// Per-axis spectra of the level-`j` scaling and wavelet atoms on a length-`n`
/// periodic axis. `scale` multiplies every filter stage.
pub(crate) fn axis_atoms(
    filter: &WaveletFilter,
    n: usize,
    levels: usize,
    scale: f64,
) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
    let high = filter.highpass();
    let mut lows = Vec::with_capacity(levels + 1);
    let mut highs = Vec::with_capacity(levels + 1);
    let mut acc = vec![Complex64::new(1.0, 0.0); n];
    lows.push(acc.clone());
    highs.push(vec![Complex64::new(0.0, 0.0); n]);
    for j in 1..=levels {
        let up = 1usize << (j - 1);
        let h = response_1d(filter.lowpass(), n, up);
        let g = response_1d(&high, n, up);
        highs.push(acc.iter().zip(&g).map(|(a, b)| a * b * scale).collect());
        acc = acc.iter().zip(&h).map(|(a, b)| a * b * scale).collect();
        lows.push(acc.clone());
    }
    (lows, highs)
}

/// Separable spectrum selecting, on axis `a`, `highs[a]` if bit `a` of
/// `orientation` is set and `lows[a]` otherwise.
pub(crate) fn separable_spectrum(
    shape: &GridShape,
    lows: &[&[Complex64]],
    highs: &[&[Complex64]],
    orientation: usize,
) -> SpectrumField {
    SpectrumField::from_fn(shape, |c| {
        c.iter()
            .enumerate()
            .map(|(a, &p)| {
                if orientation >> a & 1 == 1 {
                    highs[a][p]
                } else {
                    lows[a][p]
                }
            })
            .product()
    })
}

/// Largest admissible depth for `shape`.
pub fn max_levels(shape: &GridShape) -> usize {
    let m = *shape.dims().iter().min().unwrap();
    (usize::BITS - 1 - m.leading_zeros()) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_are_orthonormal() {
        for name in WaveletFilter::NAMES {
            let f = WaveletFilter::by_name(name).unwrap();
            let h = f.lowpass();
            let g = f.highpass();
            let sum: f64 = h.iter().sum();
            assert!((sum - 2f64.sqrt()).abs() < 1e-12, "{name}");
            for k in 0..h.len() / 2 {
                let hh: f64 = (0..h.len() - 2 * k).map(|n| h[n] * h[n + 2 * k]).sum();
                let gg: f64 = (0..h.len() - 2 * k).map(|n| g[n] * g[n + 2 * k]).sum();
                let want = if k == 0 { 1.0 } else { 0.0 };
                assert!((hh - want).abs() < 1e-12, "{name} {k} {hh}");
                assert!((gg - want).abs() < 1e-12);
            }
            for k in -(h.len() as i64)..h.len() as i64 {
                let hg: f64 = (0..h.len() as i64)
                    .filter_map(|n| {
                        let m = n + 2 * k;
                        (0..h.len() as i64).contains(&m).then(|| h[n as usize] * g[m as usize])
                    })
                    .sum();
                assert!(hg.abs() < 1e-12);
            }
        }
        assert!(matches!(
            WaveletFilter::by_name("coif3"),
            Err(Error::UnknownFilter(_))
        ));
    }

    #[test]
    fn sym8_has_eight_vanishing_moments() {
        let g = WaveletFilter::by_name("sym8").unwrap().highpass();
        for k in 0..8 {
            let m: f64 = g.iter().enumerate().map(|(n, v)| (n as f64).powi(k) * v).sum();
            assert!(m.abs() < 1e-6 * 16f64.powi(k), "moment {k}: {m}");
        }
    }

    #[test]
    fn power_complementarity() {
        let f = WaveletFilter::by_name("sym8").unwrap();
        let n = 32;
        let h = response_1d(f.lowpass(), n, 1);
        let g = response_1d(&f.highpass(), n, 1);
        for p in 0..n {
            let total = h[p].norm_sqr() + g[p].norm_sqr();
            assert!((total - 2.0).abs() < 1e-12, "{p} {total}");
        }
    }

    #[test]
    fn depth_limits() {
        assert_eq!(max_levels(&GridShape::new(vec![16, 64]).unwrap()), 4);
        assert_eq!(max_levels(&GridShape::new(vec![40]).unwrap()), 5);
        assert_eq!(max_levels(&GridShape::new(vec![1]).unwrap()), 0);
    }
}
