//! Blur responses, periodic degradation and the observable frequency set.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{
    dft_forward, dft_inverse, FrequencySet, GridShape, SpatialField, SpectrumField,
};

/// Gaussian kernels are cut at this many standard deviations.
pub const GAUSSIAN_TRUNCATION: f64 = 4.0;

/// Convolution kernel family.
#[derive(Debug, Clone, PartialEq)]
pub enum BlurSpec {
    /// Box average; one odd size per axis, or a single size for every axis.
    Uniform(Vec<usize>),
    /// Isotropic Gaussian with the given standard deviation in samples.
    Gaussian(f64),
    /// Separable raised-cosine low-pass with cut-off fraction `F_c`.
    Cosine(f64),
    Dirac,
    /// Arbitrary real kernel whose middle sample sits at the origin.
    Kernel(SpatialField),
}

impl BlurSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            BlurSpec::Uniform(sizes) => {
                if sizes.is_empty() || sizes.iter().any(|&s| s == 0 || s % 2 == 0) {
                    return Err(Error::InvalidBlur(format!(
                        "uniform sizes must be odd and positive, got {sizes:?}"
                    )));
                }
            }
            BlurSpec::Gaussian(sigma) => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidBlur(format!("gaussian sigma {sigma}")));
                }
            }
            BlurSpec::Cosine(fc) => {
                if !(0.0..0.5).contains(fc) {
                    return Err(Error::InvalidBlur(format!(
                        "cosine cut-off {fc} outside [0, 1/2)"
                    )));
                }
            }
            BlurSpec::Dirac => {}
            BlurSpec::Kernel(k) => {
                if !k.is_finite() {
                    return Err(Error::InvalidBlur("kernel has non-finite taps".into()));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for BlurSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlurSpec::Uniform(s) => {
                let parts: Vec<String> = s.iter().map(|v| v.to_string()).collect();
                write!(f, "uniform:{}", parts.join("x"))
            }
            BlurSpec::Gaussian(s) => write!(f, "gaussian:{s}"),
            BlurSpec::Cosine(c) => write!(f, "cosine:{c}"),
            BlurSpec::Dirac => write!(f, "dirac"),
            BlurSpec::Kernel(k) => {
                let parts: Vec<String> = k.shape().dims().iter().map(|v| v.to_string()).collect();
                write!(f, "kernel:{}", parts.join("x"))
            }
        }
    }
}

fn parse_number(s: &str) -> Result<f64> {
    let bad = || Error::InvalidBlur(format!("cannot parse '{s}' as a number"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            Ok(a / b)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

impl FromStr for BlurSpec {
    type Err = Error;

    /// Accepts `dirac`, `uniform:5`, `uniform:5x7`, `gaussian:2`, `cosine:3/32`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s.as_str(), None),
        };
        let need = |a: Option<&'_ str>| -> Result<String> {
            a.map(str::to_string)
                .ok_or_else(|| Error::InvalidBlur(format!("'{kind}' needs a parameter")))
        };
        let spec = match kind {
            "dirac" | "none" => BlurSpec::Dirac,
            "uniform" | "box" => {
                let sizes = need(arg)?
                    .split('x')
                    .map(|v| {
                        v.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::InvalidBlur(format!("bad size '{v}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                BlurSpec::Uniform(sizes)
            }
            "gaussian" => BlurSpec::Gaussian(parse_number(&need(arg)?)?),
            "cosine" => BlurSpec::Cosine(parse_number(&need(arg)?)?),
            _ => return Err(Error::InvalidBlur(format!("unknown blur '{s}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn per_axis_sizes(sizes: &[usize], shape: &GridShape) -> Result<Vec<usize>> {
    match sizes.len() {
        1 => Ok(vec![sizes[0]; shape.ndim()]),
        n if n == shape.ndim() => Ok(sizes.to_vec()),
        n => Err(Error::InvalidBlur(format!(
            "{n} uniform sizes for a {}-dimensional grid",
            shape.ndim()
        ))),
    }
}

fn check_extent(extent: &[usize], shape: &GridShape) -> Result<()> {
    if extent.iter().zip(shape.dims()).any(|(&k, &d)| k > d) {
        return Err(Error::KernelLargerThanGrid {
            kernel: extent.to_vec(),
            grid: shape.dims().to_vec(),
        });
    }
    Ok(())
}

/// Wraps a separable kernel given by per-axis centered taps onto the grid.
fn separable_kernel(shape: &GridShape, taps: &[Vec<f64>]) -> SpatialField {
    let mut kernel = SpatialField::zeros(shape);
    let radii: Vec<i64> = taps.iter().map(|t| (t.len() / 2) as i64).collect();
    let mut offset = vec![0i64; taps.len()];
    let total: usize = taps.iter().map(|t| t.len()).product();
    for mut n in 0..total {
        let mut w = 1.0;
        for a in (0..taps.len()).rev() {
            let i = n % taps[a].len();
            n /= taps[a].len();
            w *= taps[a][i];
            offset[a] = i as i64 - radii[a];
        }
        kernel.values_mut()[shape.wrap(&offset)] += w;
    }
    kernel
}

fn cosine_axis(p: usize, d: usize, fc: f64) -> f64 {
    let p = if 2 * p > d { d - p } else { p } as f64;
    let d = d as f64;
    if p <= fc * d {
        1.0
    } else {
        (PI * (p - fc * d) / ((1.0 - 2.0 * fc) * d)).cos()
    }
}

/// Frequency response `H` of a blur on `shape`.
pub fn make_blur_response(spec: &BlurSpec, shape: &GridShape) -> Result<SpectrumField> {
    spec.validate()?;
    match spec {
        BlurSpec::Dirac => Ok(SpectrumField::ones(shape)),
        BlurSpec::Uniform(sizes) => {
            let sizes = per_axis_sizes(sizes, shape)?;
            check_extent(&sizes, shape)?;
            let taps: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![1.0 / s as f64; s]).collect();
            Ok(dft_forward(&separable_kernel(shape, &taps)))
        }
        BlurSpec::Gaussian(sigma) => {
            let radius = (GAUSSIAN_TRUNCATION * sigma).ceil() as usize;
            let extent = vec![2 * radius + 1; shape.ndim()];
            check_extent(&extent, shape)?;
            let axis: Vec<f64> = (0..=2 * radius)
                .map(|i| {
                    let t = i as f64 - radius as f64;
                    (-t * t / (2.0 * sigma * sigma)).exp()
                })
                .collect();
            let sum: f64 = axis.iter().sum();
            let axis: Vec<f64> = axis.iter().map(|v| v / sum).collect();
            let taps = vec![axis; shape.ndim()];
            Ok(dft_forward(&separable_kernel(shape, &taps)))
        }
        BlurSpec::Cosine(fc) => Ok(SpectrumField::from_fn(shape, |c| {
            let h: f64 = c
                .iter()
                .zip(shape.dims())
                .map(|(&p, &d)| cosine_axis(p, d, *fc))
                .product();
            Complex64::new(h, 0.0)
        })),
        BlurSpec::Kernel(k) => {
            if k.shape().ndim() != shape.ndim() {
                return Err(Error::ShapeMismatch {
                    expected: shape.dims().to_vec(),
                    found: k.shape().dims().to_vec(),
                });
            }
            check_extent(k.shape().dims(), shape)?;
            let mut wrapped = SpatialField::zeros(shape);
            let centers: Vec<i64> = k.shape().dims().iter().map(|&d| ((d - 1) / 2) as i64).collect();
            k.shape().for_each(|i, c| {
                let off: Vec<i64> = c.iter().zip(&centers).map(|(&x, &m)| x as i64 - m).collect();
                wrapped.values_mut()[shape.wrap(&off)] += k.values()[i];
            });
            Ok(dft_forward(&wrapped))
        }
    }
}

fn blurred_spectrum(s: &SpatialField, h: &SpectrumField) -> Result<SpectrumField> {
    s.shape().check_same(h.shape())?;
    dft_forward(s).mul(h)
}

/// Noise-free blurred signal `h * s`.
pub fn blur(s: &SpatialField, h: &SpectrumField) -> Result<SpatialField> {
    dft_inverse(&blurred_spectrum(s, h)?)
}

/// Noise variance giving the requested blurred signal-to-noise ratio.
pub fn gamma_for_bsnr(s: &SpatialField, h: &SpectrumField, bsnr_db: f64) -> Result<f64> {
    let u = blurred_spectrum(s, h)?;
    let d = s.len() as f64;
    let energy = u.norm_sq() / d;
    if energy <= 0.0 {
        return Err(Error::ZeroBlurredSignal);
    }
    Ok(energy / (d * 10f64.powf(bsnr_db / 10.0)))
}

/// Blurred signal-to-noise ratio in dB.
pub fn bsnr_db(s: &SpatialField, h: &SpectrumField, gamma: f64) -> Result<f64> {
    let u = blurred_spectrum(s, h)?;
    let d = s.len() as f64;
    Ok(10.0 * (u.norm_sq() / d / (d * gamma)).log10())
}

/// White Gaussian noise of variance `gamma` drawn in raster order from
/// ChaCha20 seeded by `seed`.
pub fn noise_field(shape: &GridShape, gamma: f64, seed: u64) -> Result<SpatialField> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise variance {gamma}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let std = gamma.sqrt();
    let values = (0..shape.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            std * z
        })
        .collect();
    SpatialField::new(shape.clone(), values)
}

/// `r = h * s + n`.
pub fn degrade(s: &SpatialField, h: &SpectrumField, gamma: f64, seed: u64) -> Result<SpatialField> {
    let noise = noise_field(s.shape(), gamma, seed)?;
    let mut r = if h.values().iter().all(|&v| v == Complex64::new(1.0, 0.0)) {
        s.clone()
    } else {
        blur(s, h)?
    };
    if gamma > 0.0 {
        r.add_scaled(1.0, &noise)?;
    }
    Ok(r)
}

/// `{p : |H(p)| > chi}`.
pub fn compute_observable_set(h: &SpectrumField, chi: f64) -> Result<FrequencySet> {
    if !(chi >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold chi = {chi}")));
    }
    let cut = observable_cut(h, chi);
    let mask: Vec<bool> = h.values().iter().map(|v| v.norm() > cut).collect();
    if !mask.iter().any(|&b| b) {
        return Err(Error::EmptyObservableSet { chi });
    }
    FrequencySet::new(h.shape().clone(), mask)
}

pub(crate) fn observable_cut(h: &SpectrumField, chi: f64) -> f64 {
    let peak = h.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    chi.max(SPECTRAL_ZERO_TOLERANCE * peak)
}

/// Bins with `|H| <= SPECTRAL_ZERO_TOLERANCE * max|H|` count as zeros of the response.
pub const SPECTRAL_ZERO_TOLERANCE: f64 = 1e-12;

/// Blur response, noise level and observable set.
#[derive(Debug, Clone)]
pub struct DegradationModel {
    response: SpectrumField,
    gamma: f64,
    chi: f64,
    observable: FrequencySet,
}

impl DegradationModel {
    pub fn new(response: SpectrumField, gamma: f64, chi: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise variance {gamma}")));
        }
        let observable = compute_observable_set(&response, chi)?;
        Ok(Self {
            response,
            gamma,
            chi,
            observable,
        })
    }

    pub fn with_chi(&self, chi: f64) -> Result<Self> {
        Self::new(self.response.clone(), self.gamma, chi)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.response.clone(), gamma, self.chi)
    }

    pub fn response(&self) -> &SpectrumField {
        &self.response
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn observable(&self) -> &FrequencySet {
        &self.observable
    }

    pub fn shape(&self) -> &GridShape {
        self.response.shape()
    }

    /// `sum_{p in Q} |H(p)|^{-power}`.
    pub fn inverse_power_sum(&self, power: i32) -> f64 {
        self.observable
            .iter()
            .map(|p| self.response.values()[p].norm().powi(-power))
            .sum()
    }

    pub(crate) fn is_identity(&self) -> bool {
        self.observable.is_full()
            && self
                .response
                .values()
                .iter()
                .all(|&v| v == Complex64::new(1.0, 0.0))
    }
}

/// Field whose spectrum is `X / H` on the observable set and zero elsewhere.
pub fn inverse_filter(x: &SpatialField, model: &DegradationModel) -> Result<SpatialField> {
    x.shape().check_same(model.shape())?;
    if model.is_identity() {
        return Ok(x.clone());
    }
    let mut spec = dft_forward(x);
    let h = model.response().values();
    for (p, v) in spec.values_mut().iter_mut().enumerate() {
        *v = if model.observable().contains(p) {
            *v / h[p]
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    dft_inverse(&spec)
}

/// Pilot inverse `r~` (spectrum `R / H` on the observable set).
pub fn pilot_inverse(r: &SpatialField, model: &DegradationModel) -> Result<SpatialField> {
    inverse_filter(r, model)
}

/// Doubly deconvolved pilot `r~_H` (spectrum `R / H^2` on the observable set).
pub fn pilot_inverse_doubled(r: &SpatialField, model: &DegradationModel) -> Result<SpatialField> {
    inverse_filter(&inverse_filter(r, model)?, model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{project_frequencies, project_field};
    use proptest::prelude::*;

    fn shape(d: &[usize]) -> GridShape {
        GridShape::new(d.to_vec()).unwrap()
    }

    fn smooth(shape: &GridShape) -> SpatialField {
        SpatialField::from_fn(shape, |c| {
            c.iter()
                .enumerate()
                .map(|(a, &x)| ((a + 1) as f64 * 0.37 * x as f64).sin() * 20.0 + 50.0)
                .sum()
        })
    }

    #[test]
    fn dirac_is_flat() {
        let h = make_blur_response(&BlurSpec::Dirac, &shape(&[4, 4])).unwrap();
        assert!(h.values().iter().all(|&v| v == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn uniform_five_taps_on_ten() {
        let h = make_blur_response(&BlurSpec::Uniform(vec![5]), &shape(&[10])).unwrap();
        for p in 0..10 {
            let expected = if p == 0 {
                1.0
            } else {
                let pf = p as f64;
                (PI * pf / 2.0).sin() / (5.0 * (PI * pf / 10.0).sin())
            };
            assert!((h.values()[p].re - expected).abs() < 1e-12, "p={p}");
            assert!(h.values()[p].im.abs() < 1e-12);
        }
        let q = compute_observable_set(&h, 0.0).unwrap();
        let p_set: Vec<usize> = q.complement().iter().collect();
        assert_eq!(p_set, vec![2, 4, 6, 8]);
        assert_eq!(q.count(), 6);
    }

    #[test]
    fn cosine_example() {
        let h = make_blur_response(&BlurSpec::Cosine(3.0 / 32.0), &shape(&[64])).unwrap();
        for p in 0..=6 {
            assert_eq!(h.values()[p].re, 1.0);
        }
        let at32 = (PI * (32.0 - 6.0) / ((1.0 - 6.0 / 32.0) * 64.0)).cos();
        assert!((h.values()[32].re - at32).abs() < 1e-15);
        assert!((h.values()[7].re - h.values()[57].re).abs() < 1e-15);
        let h2 = make_blur_response(&BlurSpec::Cosine(0.1), &shape(&[16, 20])).unwrap();
        let h16 = make_blur_response(&BlurSpec::Cosine(0.1), &shape(&[16])).unwrap();
        let h20 = make_blur_response(&BlurSpec::Cosine(0.1), &shape(&[20])).unwrap();
        let s = shape(&[16, 20]);
        s.for_each(|i, c| {
            let want = h16.values()[c[0]].re * h20.values()[c[1]].re;
            assert!((h2.values()[i].re - want).abs() < 1e-15);
        });
    }

    #[test]
    fn normalized_kernels_have_unit_dc() {
        let s = shape(&[32, 32]);
        for spec in [
            BlurSpec::Uniform(vec![5]),
            BlurSpec::Uniform(vec![7, 3]),
            BlurSpec::Gaussian(2.0),
            BlurSpec::Gaussian(0.5),
            BlurSpec::Cosine(0.2),
            BlurSpec::Dirac,
        ] {
            let h = make_blur_response(&spec, &s).unwrap();
            assert!((h.values()[0] - 1.0).norm() < 1e-12, "{spec}");
            assert!(h.hermitian_defect() < 1e-12);
            // centered symmetric kernels have real responses
            assert!(h.values().iter().all(|v| v.im.abs() < 1e-12));
        }
    }

    #[test]
    fn explicit_kernel_matches_uniform() {
        let s = shape(&[12, 12]);
        let k = SpatialField::constant(&shape(&[3, 3]), 1.0 / 9.0);
        let a = make_blur_response(&BlurSpec::Kernel(k), &s).unwrap();
        let b = make_blur_response(&BlurSpec::Uniform(vec![3]), &s).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn oversized_kernels_are_rejected() {
        let s = shape(&[8, 8]);
        assert!(matches!(
            make_blur_response(&BlurSpec::Uniform(vec![9]), &s),
            Err(Error::KernelLargerThanGrid { .. })
        ));
        assert!(matches!(
            make_blur_response(&BlurSpec::Gaussian(2.0), &s),
            Err(Error::KernelLargerThanGrid { .. })
        ));
        assert!(BlurSpec::Uniform(vec![4]).validate().is_err());
        assert!(BlurSpec::Cosine(0.5).validate().is_err());
    }

    #[test]
    fn parse_round_trip() {
        for text in ["dirac", "uniform:5", "uniform:5x7", "gaussian:2", "cosine:0.09375"] {
            let spec: BlurSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert_eq!("cosine:3/32".parse::<BlurSpec>().unwrap(), BlurSpec::Cosine(3.0 / 32.0));
        assert!("uniform:4".parse::<BlurSpec>().is_err());
        assert!("motion:3".parse::<BlurSpec>().is_err());
    }

    #[test]
    fn bsnr_calibration() {
        // ||h*s||^2 = 400 on D = 4 with BSNR 10 dB gives gamma = 10.
        let s = SpatialField::constant(&shape(&[4]), 10.0);
        let h = SpectrumField::ones(s.shape());
        assert!((gamma_for_bsnr(&s, &h, 10.0).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(gamma_for_bsnr(&s, &h, f64::INFINITY).unwrap(), 0.0);
        let zero = SpatialField::zeros(s.shape());
        assert!(matches!(gamma_for_bsnr(&zero, &h, 10.0), Err(Error::ZeroBlurredSignal)));

        let big = smooth(&shape(&[64, 64]));
        let h = make_blur_response(&BlurSpec::Uniform(vec![5]), big.shape()).unwrap();
        let g = gamma_for_bsnr(&big, &h, 30.0).unwrap();
        assert!((bsnr_db(&big, &h, g).unwrap() - 30.0).abs() < 0.01);
    }

    #[test]
    fn degrade_is_deterministic_and_calibrated() {
        let s = shape(&[64, 64]);
        let x = smooth(&s);
        let h = SpectrumField::ones(&s);
        assert_eq!(degrade(&x, &h, 0.0, 1).unwrap(), x);
        let z = SpatialField::zeros(&s);
        let r = degrade(&z, &h, 1.0, 5).unwrap();
        let v = mean_sq(&r);
        assert!((0.9..=1.1).contains(&v), "{v}");
        let hb = make_blur_response(&BlurSpec::Gaussian(1.5), &s).unwrap();
        assert_eq!(degrade(&x, &hb, 2.0, 9).unwrap(), degrade(&x, &hb, 2.0, 9).unwrap());
        assert_ne!(degrade(&x, &hb, 2.0, 9).unwrap(), degrade(&x, &hb, 2.0, 10).unwrap());
    }

    fn mean_sq(x: &SpatialField) -> f64 {
        crate::grid::mean_square(x)
    }

    #[test]
    fn degraded_spectrum_on_observable_set() {
        let s = shape(&[16, 16]);
        let x = smooth(&s);
        let h = make_blur_response(&BlurSpec::Uniform(vec![5]), &s).unwrap();
        let q = compute_observable_set(&h, 0.05).unwrap();
        let r = degrade(&x, &h, 3.0, 4).unwrap();
        let n = noise_field(&s, 3.0, 4).unwrap();
        let lhs = project_frequencies(&dft_forward(&r), &q).unwrap();
        let u = dft_forward(&x).mul(&h).unwrap();
        let nn = dft_forward(&n);
        for p in q.iter() {
            let want = u.values()[p] + nn.values()[p];
            assert!((lhs.values()[p] - want).norm() < 1e-9);
        }
    }

    #[test]
    fn observable_set_edges() {
        let h = SpectrumField::ones(&shape(&[5, 5]));
        assert!(compute_observable_set(&h, 0.0).unwrap().is_full());
        assert!(matches!(
            compute_observable_set(&h, 1.0),
            Err(Error::EmptyObservableSet { .. })
        ));
        assert!(compute_observable_set(&h, -1.0).is_err());
    }

    #[test]
    fn pilot_inverse_cases() {
        let s = shape(&[16, 16]);
        let x = smooth(&s);
        let id = DegradationModel::new(SpectrumField::ones(&s), 1.0, 0.0).unwrap();
        let r = degrade(&x, id.response(), 1.0, 3).unwrap();
        assert_eq!(pilot_inverse(&r, &id).unwrap(), r);
        assert_eq!(pilot_inverse_doubled(&r, &id).unwrap(), r);

        // Invertible Gaussian response on a coarse grid.
        let h = make_blur_response(&BlurSpec::Gaussian(0.6), &s).unwrap();
        let model = DegradationModel::new(h.clone(), 0.0, 0.0).unwrap();
        let clean = blur(&x, &h).unwrap();
        let back = pilot_inverse(&clean, &model).unwrap();
        let rel = back.sub(&x).unwrap().norm_sq().sqrt() / x.norm_sq().sqrt();
        assert!(rel < 1e-8, "{rel}");

        // With spectral zeros the pilot recovers the projected signal.
        let h = make_blur_response(&BlurSpec::Uniform(vec![5]), &shape(&[20, 20])).unwrap();
        let model = DegradationModel::new(h.clone(), 0.0, 1e-9).unwrap();
        let y = smooth(&shape(&[20, 20]));
        let back = pilot_inverse(&blur(&y, &h).unwrap(), &model).unwrap();
        let want = project_field(&y, model.observable()).unwrap();
        assert!(back.max_abs_diff(&want) < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn observable_set_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0, size in 1usize..4) {
            let h = make_blur_response(&BlurSpec::Uniform(vec![2 * size + 1]), &shape(&[24, 24])).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let q_lo = compute_observable_set(&h, lo * 0.99).unwrap();
            if let Ok(q_hi) = compute_observable_set(&h, hi * 0.99) {
                prop_assert!(q_hi.is_subset_of(&q_lo));
            }
        }
    }
}
