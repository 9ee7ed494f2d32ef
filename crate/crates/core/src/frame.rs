//! Analysis/synthesis frames with a Wiener-like prefilter, and the constants
//! that couple frame atoms with the blur response.
//!
//! Every subband `m` is generated by the shifts of one atom `psi_m` along a
//! [`ShiftLattice`]. The analysis family is `phi_l = g * psi_m(. - k_l)`, the
//! synthesis family uses the dual generators, and all products are evaluated
//! in the Fourier domain.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::degradation::DegradationModel;
use crate::error::{Error, Result};
use crate::grid::{
    dft_forward, dft_forward_complex, dft_inverse, dft_inverse_complex, real_part_checked,
    FrequencySet, GridShape, SpatialField, SpectrumField,
};
use crate::wavelet::{axis_atoms, max_levels, separable_spectrum, WaveletFilter};

/// Relative tolerance on the imaginary part of the frame constants.
const CONSTANT_IMAG_TOLERANCE: f64 = 1e-8;

/// Which frame to build.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameFlavor {
    /// Standard basis of the grid.
    Canonical,
    /// Periodized orthonormal wavelet basis.
    Orthonormal { levels: usize, filter: String },
    /// Union of shifted copies of the orthonormal wavelet basis.
    ShiftedUnion {
        levels: usize,
        filter: String,
        shifts: Vec<Vec<usize>>,
    },
    /// Undecimated (a trous) wavelet frame, tight with bound 1.
    Undecimated { levels: usize, filter: String },
    /// User supplied partition.
    Custom { orthonormal: bool },
}

impl FrameFlavor {
    /// Parses a flavor keyword (`undecimated`, `orthonormal`, `shifted`, `canonical`).
    pub fn from_parts(kind: &str, levels: usize, filter: &str) -> Result<Self> {
        let filter = filter.to_string();
        match kind.to_ascii_lowercase().as_str() {
            "undecimated" | "ti" | "atrous" => Ok(FrameFlavor::Undecimated { levels, filter }),
            "orthonormal" | "dwt" => Ok(FrameFlavor::Orthonormal { levels, filter }),
            "shifted" | "shifted-union" => Ok(FrameFlavor::ShiftedUnion {
                levels,
                filter,
                shifts: Vec::new(),
            }),
            "canonical" | "identity" => Ok(FrameFlavor::Canonical),
            other => Err(Error::InvalidFrame(format!("unknown frame flavor '{other}'"))),
        }
    }

    /// True when the synthesis family is an orthonormal basis.
    pub fn is_orthonormal(&self) -> bool {
        match self {
            FrameFlavor::Canonical | FrameFlavor::Orthonormal { .. } => true,
            FrameFlavor::Custom { orthonormal } => *orthonormal,
            _ => false,
        }
    }

    /// True when the frame reconstructs every field exactly.
    pub fn is_exact(&self) -> bool {
        !matches!(self, FrameFlavor::Custom { .. })
    }
}

impl fmt::Display for FrameFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameFlavor::Canonical => write!(f, "canonical"),
            FrameFlavor::Orthonormal { levels, filter } => write!(f, "orthonormal:{filter}:{levels}"),
            FrameFlavor::ShiftedUnion { levels, filter, shifts } => {
                write!(f, "shifted:{filter}:{levels}:{}", shifts.len().max(1))
            }
            FrameFlavor::Undecimated { levels, filter } => write!(f, "undecimated:{filter}:{levels}"),
            FrameFlavor::Custom { .. } => write!(f, "custom"),
        }
    }
}

/// Shifts `offset + stride * k` for every offset and every `k`, enumerated
/// offset-major then row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftLattice {
    stride: Vec<usize>,
    offsets: Vec<Vec<usize>>,
}

impl ShiftLattice {
    pub fn new(shape: &GridShape, stride: Vec<usize>, offsets: Vec<Vec<usize>>) -> Result<Self> {
        if stride.len() != shape.ndim()
            || stride.iter().zip(shape.dims()).any(|(&s, &d)| s == 0 || d % s != 0)
        {
            return Err(Error::InvalidFrame(format!(
                "stride {stride:?} incompatible with grid {:?}",
                shape.dims()
            )));
        }
        if offsets.is_empty() || offsets.iter().any(|o| o.len() != shape.ndim()) {
            return Err(Error::InvalidFrame("invalid lattice offsets".into()));
        }
        Ok(Self { stride, offsets })
    }

    /// Every grid point once.
    pub fn dense(shape: &GridShape) -> Self {
        Self {
            stride: vec![1; shape.ndim()],
            offsets: vec![vec![0; shape.ndim()]],
        }
    }

    pub fn stride(&self) -> &[usize] {
        &self.stride
    }

    pub fn offsets(&self) -> &[Vec<usize>] {
        &self.offsets
    }

    /// Flat grid positions of the shifts in enumeration order.
    pub fn positions(&self, shape: &GridShape) -> Vec<usize> {
        let counts: Vec<usize> = shape
            .dims()
            .iter()
            .zip(&self.stride)
            .map(|(&d, &s)| d / s)
            .collect();
        let sub = GridShape::new(counts).expect("lattice counts are positive");
        let mut out = Vec::with_capacity(self.offsets.len() * sub.len());
        for offset in &self.offsets {
            sub.for_each(|_, k| {
                let c: Vec<i64> = k
                    .iter()
                    .zip(&self.stride)
                    .zip(offset)
                    .map(|((&k, &s), &o)| (o + s * k) as i64)
                    .collect();
                out.push(shape.wrap(&c));
            });
        }
        out
    }
}

/// Dual generator of a subband.
#[derive(Debug, Clone, PartialEq)]
pub enum DualGenerator {
    /// Primal generator times a constant.
    Scaled(f64),
    Explicit(SpectrumField),
}

/// One shift-invariant family of atoms.
#[derive(Debug, Clone)]
pub struct Subband {
    label: String,
    generator: SpectrumField,
    dual: DualGenerator,
    lattice: ShiftLattice,
    positions: Vec<usize>,
}

impl Subband {
    pub fn new(
        label: impl Into<String>,
        generator: SpectrumField,
        dual: DualGenerator,
        lattice: ShiftLattice,
    ) -> Result<Self> {
        if let DualGenerator::Explicit(d) = &dual {
            generator.shape().check_same(d.shape())?;
        }
        let positions = lattice.positions(generator.shape());
        Ok(Self {
            label: label.into(),
            generator,
            dual,
            lattice,
            positions,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `Psi_m`.
    pub fn generator(&self) -> &SpectrumField {
        &self.generator
    }

    pub fn lattice(&self) -> &ShiftLattice {
        &self.lattice
    }

    /// Flat grid positions `k_l` of the atoms.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `Psi~_m(p)`.
    pub fn dual_at(&self, p: usize) -> Complex64 {
        match &self.dual {
            DualGenerator::Scaled(c) => self.generator.values()[p] * *c,
            DualGenerator::Explicit(d) => d.values()[p],
        }
    }

    pub fn dual_spectrum(&self) -> SpectrumField {
        match &self.dual {
            DualGenerator::Scaled(c) => self.generator.map(|v| v * *c),
            DualGenerator::Explicit(d) => d.clone(),
        }
    }
}

/// Frame coefficients grouped by subband.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCoefficients {
    bands: Vec<Vec<f64>>,
}

impl FrameCoefficients {
    pub fn new(bands: Vec<Vec<f64>>) -> Self {
        Self { bands }
    }

    pub fn zeros(partition: &SubbandPartition) -> Self {
        Self {
            bands: partition.subbands.iter().map(|s| vec![0.0; s.len()]).collect(),
        }
    }

    /// Splits a flat vector according to `partition`.
    pub fn from_flat(partition: &SubbandPartition, flat: &[f64]) -> Result<Self> {
        if flat.len() != partition.atom_count() {
            return Err(Error::LengthMismatch {
                expected: partition.atom_count(),
                found: flat.len(),
            });
        }
        let mut bands = Vec::with_capacity(partition.len());
        let mut start = 0;
        for s in &partition.subbands {
            bands.push(flat[start..start + s.len()].to_vec());
            start += s.len();
        }
        Ok(Self { bands })
    }

    pub fn bands(&self) -> &[Vec<f64>] {
        &self.bands
    }

    pub fn band(&self, m: usize) -> &[f64] {
        &self.bands[m]
    }

    pub fn band_mut(&mut self, m: usize) -> &mut Vec<f64> {
        &mut self.bands[m]
    }

    /// Number of coefficients.
    pub fn total_len(&self) -> usize {
        self.bands.iter().map(|b| b.len()).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.bands.iter().flatten().copied().collect()
    }

    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        Self {
            bands: self
                .bands
                .iter()
                .enumerate()
                .map(|(m, b)| b.iter().map(|&v| f(m, v)).collect())
                .collect(),
        }
    }
}

/// The subbands of a frame.
#[derive(Debug, Clone)]
pub struct SubbandPartition {
    shape: GridShape,
    subbands: Vec<Subband>,
    starts: Vec<usize>,
}

impl SubbandPartition {
    pub fn new(shape: GridShape, subbands: Vec<Subband>) -> Result<Self> {
        if subbands.is_empty() {
            return Err(Error::InvalidFrame("a frame needs at least one subband".into()));
        }
        for s in &subbands {
            shape.check_same(s.generator.shape())?;
        }
        let mut starts = Vec::with_capacity(subbands.len());
        let mut total = 0;
        for s in &subbands {
            starts.push(total);
            total += s.len();
        }
        Ok(Self {
            shape,
            subbands,
            starts,
        })
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn subbands(&self) -> &[Subband] {
        &self.subbands
    }

    /// Number of subbands `M`.
    pub fn len(&self) -> usize {
        self.subbands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subbands.is_empty()
    }

    /// Number of atoms `L`.
    pub fn atom_count(&self) -> usize {
        self.subbands.iter().map(|s| s.len()).sum()
    }

    /// Subband and in-band index of flat atom index `l`.
    pub fn locate(&self, l: usize) -> (usize, usize) {
        let m = self.starts.partition_point(|&s| s <= l) - 1;
        (m, l - self.starts[m])
    }

    fn check_coefficients(&self, coeffs: &FrameCoefficients) -> Result<()> {
        if coeffs.bands.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: coeffs.bands.len(),
            });
        }
        for (b, s) in coeffs.bands.iter().zip(&self.subbands) {
            if b.len() != s.len() {
                return Err(Error::LengthMismatch {
                    expected: s.len(),
                    found: b.len(),
                });
            }
        }
        Ok(())
    }

    fn correlate_with(
        &self,
        x: &SpectrumField,
        generator: impl Fn(&Subband, usize) -> Complex64 + Sync,
    ) -> Result<FrameCoefficients> {
        self.shape.check_same(x.shape())?;
        let tol = 1e-6 * x.sup_norm().max(f64::MIN_POSITIVE);
        let bands = self
            .subbands
            .par_iter()
            .map(|s| {
                let prod = SpectrumField::new(
                    self.shape.clone(),
                    x.values()
                        .iter()
                        .enumerate()
                        .map(|(p, v)| v * generator(s, p).conj())
                        .collect(),
                )?;
                let corr = real_part_checked(dft_inverse_complex(&prod), tol * gen_sup(s))?;
                Ok(s.positions.iter().map(|&k| corr.values()[k]).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(FrameCoefficients { bands })
    }

    /// `<x, psi_m(. - k_l)>` for the field with spectrum `x`.
    pub fn correlate(&self, x: &SpectrumField) -> Result<FrameCoefficients> {
        self.correlate_with(x, |s, p| s.generator.values()[p])
    }

    /// `<x, psi~_m(. - k_l)>` for the field with spectrum `x`.
    pub fn correlate_dual(&self, x: &SpectrumField) -> Result<FrameCoefficients> {
        self.correlate_with(x, |s, p| s.dual_at(p))
    }

    /// Spectrum of the coefficients of subband `m` placed on its lattice.
    pub fn lattice_spectrum(&self, m: usize, values: &[f64]) -> SpectrumField {
        let s = &self.subbands[m];
        let mut t = SpectrumField::zeros(&self.shape);
        for (&k, &v) in s.positions.iter().zip(values) {
            t.values_mut()[k] += v;
        }
        dft_forward_complex(&t)
    }

    /// Spectrum of `sum_{l in K_m} c_l psi~_l`.
    pub fn subband_synthesis(&self, m: usize, values: &[f64]) -> SpectrumField {
        let mut t = self.lattice_spectrum(m, values);
        let s = &self.subbands[m];
        for (p, v) in t.values_mut().iter_mut().enumerate() {
            *v *= s.dual_at(p);
        }
        t
    }

    /// Spectrum of `sum_l c_l psi~_l` (no projection).
    pub fn synthesize_spectrum(&self, coeffs: &FrameCoefficients) -> Result<SpectrumField> {
        self.check_coefficients(coeffs)?;
        let zero = || SpectrumField::zeros(&self.shape);
        Ok((0..self.len())
            .into_par_iter()
            .map(|m| self.subband_synthesis(m, &coeffs.bands[m]))
            .reduce(zero, |mut a, b| {
                for (x, y) in a.values_mut().iter_mut().zip(b.values()) {
                    *x += y;
                }
                a
            }))
    }

    /// Spatial atom `psi_l`.
    pub fn atom(&self, l: usize) -> Result<SpatialField> {
        let (m, i) = self.locate(l);
        let s = &self.subbands[m];
        shifted(&s.generator, s.positions[i])
    }

    /// Spatial dual atom `psi~_l`.
    pub fn dual_atom(&self, l: usize) -> Result<SpatialField> {
        let (m, i) = self.locate(l);
        let s = &self.subbands[m];
        shifted(&s.dual_spectrum(), s.positions[i])
    }
}

fn gen_sup(s: &Subband) -> f64 {
    s.generator.sup_norm().max(1.0)
}

fn shifted(generator: &SpectrumField, k: usize) -> Result<SpatialField> {
    let base = dft_inverse(generator)?;
    let shape = base.shape().clone();
    let mut out = SpatialField::zeros(&shape);
    for x in 0..shape.len() {
        out.values_mut()[shape.add(x, k)] = base.values()[x];
    }
    Ok(out)
}

fn validate_depth(shape: &GridShape, levels: usize, decimated: bool) -> Result<()> {
    let ok = levels <= max_levels(shape)
        && (!decimated || shape.dims().iter().all(|&d| d % (1 << levels) == 0));
    if !ok {
        return Err(Error::UnsupportedDepth {
            levels,
            dims: shape.dims().to_vec(),
        });
    }
    Ok(())
}

fn orientation_label(level: usize, orientation: usize, ndim: usize, approx: bool) -> String {
    let bands: String = (0..ndim)
        .map(|a| if orientation >> a & 1 == 1 { 'H' } else { 'L' })
        .collect();
    if approx {
        format!("a{level}-{bands}")
    } else {
        format!("d{level}-{bands}")
    }
}

/// Wavelet subbands ordered finest level first, approximation last.
fn wavelet_partition(
    shape: &GridShape,
    filter: &str,
    levels: usize,
    decimated: bool,
    offsets: &[Vec<usize>],
    dual_scale: f64,
) -> Result<SubbandPartition> {
    let filter = WaveletFilter::by_name(filter)?;
    validate_depth(shape, levels, decimated)?;
    let scale = if decimated { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
    let per_axis: Vec<_> = shape
        .dims()
        .iter()
        .map(|&n| axis_atoms(&filter, n, levels, scale))
        .collect();
    let ndim = shape.ndim();
    let lattice_for = |level: usize| {
        if decimated {
            ShiftLattice::new(shape, vec![1 << level; ndim], offsets.to_vec())
        } else {
            Ok(ShiftLattice::dense(shape))
        }
    };
    let mut subbands = Vec::new();
    for j in 1..=levels {
        let lows: Vec<&[_]> = per_axis.iter().map(|(l, _)| l[j].as_slice()).collect();
        let highs: Vec<&[_]> = per_axis.iter().map(|(_, h)| h[j].as_slice()).collect();
        for o in 1..(1usize << ndim) {
            subbands.push(Subband::new(
                orientation_label(j, o, ndim, false),
                separable_spectrum(shape, &lows, &highs, o),
                DualGenerator::Scaled(dual_scale),
                lattice_for(j)?,
            )?);
        }
    }
    let lows: Vec<&[_]> = per_axis.iter().map(|(l, _)| l[levels].as_slice()).collect();
    subbands.push(Subband::new(
        orientation_label(levels, 0, ndim, true),
        separable_spectrum(shape, &lows, &lows, 0),
        DualGenerator::Scaled(dual_scale),
        lattice_for(levels)?,
    )?);
    SubbandPartition::new(shape.clone(), subbands)
}

fn default_shifts(ndim: usize) -> Vec<Vec<usize>> {
    (0..1usize << ndim)
        .map(|b| (0..ndim).map(|a| b >> a & 1).collect())
        .collect()
}

/// Builds the synthesis partition and its frame bound.
pub fn build_partition(flavor: &FrameFlavor, shape: &GridShape) -> Result<(SubbandPartition, f64)> {
    match flavor {
        FrameFlavor::Canonical => {
            let sub = Subband::new(
                "identity",
                SpectrumField::ones(shape),
                DualGenerator::Scaled(1.0),
                ShiftLattice::dense(shape),
            )?;
            Ok((SubbandPartition::new(shape.clone(), vec![sub])?, 1.0))
        }
        FrameFlavor::Orthonormal { levels, filter } => {
            let zero = vec![vec![0; shape.ndim()]];
            Ok((wavelet_partition(shape, filter, *levels, true, &zero, 1.0)?, 1.0))
        }
        FrameFlavor::ShiftedUnion { levels, filter, shifts } => {
            let shifts = if shifts.is_empty() {
                default_shifts(shape.ndim())
            } else {
                shifts.clone()
            };
            let a = shifts.len() as f64;
            Ok((wavelet_partition(shape, filter, *levels, true, &shifts, 1.0 / a)?, a))
        }
        FrameFlavor::Undecimated { levels, filter } => {
            Ok((wavelet_partition(shape, filter, *levels, false, &[], 1.0)?, 1.0))
        }
        FrameFlavor::Custom { .. } => Err(Error::InvalidFrame(
            "custom frames are built with FrameTransform::from_partition".into(),
        )),
    }
}

/// Frame together with its prefilter `G = H / (|H|^2 + lambda)` on `Q`.
#[derive(Debug, Clone)]
pub struct FrameTransform {
    flavor: FrameFlavor,
    partition: SubbandPartition,
    prefilter: SpectrumField,
    lambda: f64,
    frame_bound: f64,
}

/// Builds a frame of the given flavor for `model`.
pub fn build_frame(
    flavor: &FrameFlavor,
    model: &DegradationModel,
    lambda: f64,
) -> Result<FrameTransform> {
    let (partition, bound) = build_partition(flavor, model.shape())?;
    FrameTransform::from_partition(partition, flavor.clone(), bound, model, lambda)
}

/// `G = H / (|H|^2 + lambda)` on the observable set, zero elsewhere.
pub fn prefilter(model: &DegradationModel, lambda: f64) -> Result<SpectrumField> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda}")));
    }
    let q = model.observable();
    SpectrumField::new(
        model.shape().clone(),
        model
            .response()
            .values()
            .iter()
            .enumerate()
            .map(|(p, &h)| {
                if q.contains(p) {
                    h / (h.norm_sqr() + lambda)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect(),
    )
}

impl FrameTransform {
    pub fn from_partition(
        partition: SubbandPartition,
        flavor: FrameFlavor,
        frame_bound: f64,
        model: &DegradationModel,
        lambda: f64,
    ) -> Result<Self> {
        partition.shape().check_same(model.shape())?;
        Ok(Self {
            flavor,
            partition,
            prefilter: prefilter(model, lambda)?,
            lambda,
            frame_bound,
        })
    }

    pub fn flavor(&self) -> &FrameFlavor {
        &self.flavor
    }

    pub fn partition(&self) -> &SubbandPartition {
        &self.partition
    }

    /// `G`.
    pub fn prefilter(&self) -> &SpectrumField {
        &self.prefilter
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn frame_bound(&self) -> f64 {
        self.frame_bound
    }

    pub fn shape(&self) -> &GridShape {
        self.partition.shape()
    }

    /// Spatial analysis atom `phi_l` (spectrum `G Psi_l`).
    pub fn analysis_atom(&self, l: usize) -> Result<SpatialField> {
        let (m, i) = self.partition.locate(l);
        let s = &self.partition.subbands[m];
        shifted(&s.generator.mul(&self.prefilter)?, s.positions[i])
    }

    /// Spatial projected dual atom `Pi psi~_l`.
    pub fn synthesis_atom(&self, l: usize, q: &FrequencySet) -> Result<SpatialField> {
        let (m, i) = self.partition.locate(l);
        let s = &self.partition.subbands[m];
        let spec = crate::grid::project_frequencies(&s.dual_spectrum(), q)?;
        shifted(&spec, s.positions[i])
    }
}

/// Coefficients `r_l = <r, phi_l>`, computed as the correlation of `G* R`
/// with each generator.
pub fn analyze(
    r: &SpatialField,
    frame: &FrameTransform,
    model: &DegradationModel,
) -> Result<FrameCoefficients> {
    r.shape().check_same(model.shape())?;
    frame.shape().check_same(model.shape())?;
    let mut spec = dft_forward(r);
    for (v, g) in spec.values_mut().iter_mut().zip(frame.prefilter.values()) {
        *v *= g.conj();
    }
    frame.partition.correlate(&spec)
}

/// `Pi (sum_l c_l psi~_l)`.
pub fn synthesize(
    coeffs: &FrameCoefficients,
    frame: &FrameTransform,
    model: &DegradationModel,
) -> Result<SpatialField> {
    let spec = frame.partition.synthesize_spectrum(coeffs)?;
    let spec = crate::grid::project_frequencies(&spec, model.observable())?;
    dft_inverse(&spec)
}

fn subband_constants(
    frame: &FrameTransform,
    model: &DegradationModel,
    weight: impl Fn(Complex64) -> Complex64 + Sync,
) -> Result<Vec<f64>> {
    frame.shape().check_same(model.shape())?;
    let d = model.shape().len() as f64;
    let h = model.response().values();
    let g = frame.prefilter.values();
    frame
        .partition
        .subbands
        .par_iter()
        .map(|s| {
            let sum: Complex64 = model
                .observable()
                .iter()
                .map(|p| g[p] * s.generator.values()[p] * s.dual_at(p).conj() * weight(h[p]))
                .sum::<Complex64>()
                / d;
            let tolerance = CONSTANT_IMAG_TOLERANCE * (sum.re.abs() + 1.0);
            if sum.im.abs() > tolerance {
                return Err(Error::ImaginaryResidueTooLarge {
                    residue: sum.im.abs(),
                    tolerance,
                });
            }
            Ok(sum.re)
        })
        .collect()
}

/// `gamma_bar_m = (1/D) sum_Q G Psi_m conj(Psi~_m) / H`, one per subband.
pub fn gamma_bar(frame: &FrameTransform, model: &DegradationModel) -> Result<Vec<f64>> {
    subband_constants(frame, model, |h| 1.0 / h)
}

/// `kappa_m = (1/D) sum_Q G Psi_m conj(Psi~_m) / (H |H|^2)`, one per subband.
pub fn kappa(frame: &FrameTransform, model: &DegradationModel) -> Result<Vec<f64>> {
    subband_constants(frame, model, |h| 1.0 / (h * h.norm_sqr()))
}

/// Standard deviation of the analysis coefficients of pure noise, per subband.
pub fn subband_noise_std(frame: &FrameTransform, model: &DegradationModel) -> Vec<f64> {
    let d = model.shape().len() as f64;
    let g = frame.prefilter.values();
    frame
        .partition
        .subbands
        .iter()
        .map(|s| {
            let e: f64 = model
                .observable()
                .iter()
                .map(|p| g[p].norm_sqr() * s.generator.values()[p].norm_sqr())
                .sum();
            (model.gamma() * e / d).sqrt()
        })
        .collect()
}

/// Cross-correlation sequence `c_{m,m'}(delta) = gamma_bar_{l,i}` for
/// `l in K_m`, `i in K_m'` and `k_i - k_l = delta`.
fn cross_sequence(
    frame: &FrameTransform,
    model: &DegradationModel,
    m: usize,
    m2: usize,
) -> Result<SpatialField> {
    let h = model.response().values();
    let g = frame.prefilter.values();
    let a = &frame.partition.subbands[m];
    let b = &frame.partition.subbands[m2];
    let zero = Complex64::new(0.0, 0.0);
    let spec = SpectrumField::new(
        model.shape().clone(),
        (0..h.len())
            .map(|p| {
                if model.observable().contains(p) {
                    g[p] * a.generator.values()[p] * b.dual_at(p).conj() / h[p]
                } else {
                    zero
                }
            })
            .collect(),
    )?;
    // c(delta) = (1/D) sum_p C(p) exp(2 pi i delta p / D)
    dft_inverse(&spec)
}

fn within_radius(shape: &GridShape, delta: usize, radius: Option<usize>) -> bool {
    match radius {
        None => true,
        Some(r) => shape
            .coords(delta)
            .iter()
            .zip(shape.dims())
            .all(|(&c, &d)| c.min(d - c) <= r),
    }
}

/// Per-pair correlation tables of the cross constants.
#[derive(Debug, Clone)]
pub struct CrossTables {
    subbands: usize,
    radius: Option<usize>,
    tables: Vec<SpatialField>,
}

/// Materializes every `c_{m,m'}`; memory grows as `M^2 D`.
pub fn gamma_bar_cross(
    frame: &FrameTransform,
    model: &DegradationModel,
    truncation_radius: Option<usize>,
) -> Result<CrossTables> {
    let m_count = frame.partition.len();
    let tables = (0..m_count * m_count)
        .into_par_iter()
        .map(|k| {
            let mut t = cross_sequence(frame, model, k / m_count, k % m_count)?;
            if truncation_radius.is_some() {
                let shape = t.shape().clone();
                for (delta, v) in t.values_mut().iter_mut().enumerate() {
                    if !within_radius(&shape, delta, truncation_radius) {
                        *v = 0.0;
                    }
                }
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossTables {
        subbands: m_count,
        radius: truncation_radius,
        tables,
    })
}

impl CrossTables {
    pub fn radius(&self) -> Option<usize> {
        self.radius
    }

    /// `c_{m,m'}`.
    pub fn table(&self, m: usize, m2: usize) -> &SpatialField {
        &self.tables[m * self.subbands + m2]
    }

    /// `gamma_bar_{l,i}` for flat atom indices.
    pub fn value(&self, partition: &SubbandPartition, l: usize, i: usize) -> f64 {
        let (m, a) = partition.locate(l);
        let (m2, b) = partition.locate(i);
        let shape = partition.shape();
        let kl = partition.subbands[m].positions[a];
        let ki = partition.subbands[m2].positions[b];
        self.table(m, m2).values()[shape.add(ki, shape.mirror(kl))]
    }

    /// `sum_l sum_i t_l t_i gamma_bar_{l,i} gamma_bar_{i,l}`.
    pub fn double_sum(&self, partition: &SubbandPartition, weights: &FrameCoefficients) -> Result<f64> {
        partition.check_coefficients(weights)?;
        let spectra = lattice_spectra(partition, weights);
        let m_count = partition.len();
        let pairs: Vec<(usize, usize)> = (0..m_count)
            .flat_map(|m| (m..m_count).map(move |m2| (m, m2)))
            .collect();
        Ok(pairs
            .par_iter()
            .map(|&(m, m2)| {
                let w = product_sequence(self.table(m, m2), self.table(m2, m), None);
                pair_term(&spectra, m, m2, &w)
            })
            .sum())
    }
}

fn lattice_spectra(partition: &SubbandPartition, weights: &FrameCoefficients) -> Vec<SpectrumField> {
    (0..partition.len())
        .into_par_iter()
        .map(|m| partition.lattice_spectrum(m, weights.band(m)))
        .collect()
}

/// `w(delta) = c12(delta) c21(-delta)`, optionally windowed.
fn product_sequence(c12: &SpatialField, c21: &SpatialField, radius: Option<usize>) -> SpatialField {
    let shape = c12.shape();
    let mut w = SpatialField::zeros(shape);
    for (delta, v) in w.values_mut().iter_mut().enumerate() {
        if within_radius(shape, delta, radius) {
            *v = c12.values()[delta] * c21.values()[shape.mirror(delta)];
        }
    }
    w
}

/// Contribution of the unordered pair `{m, m2}`:
/// `sum_{x,y} t_m(x) t_m2(y) w(y - x)`, doubled when `m != m2`.
fn pair_term(spectra: &[SpectrumField], m: usize, m2: usize, w: &SpatialField) -> f64 {
    let wf = dft_forward(w);
    let d = w.len() as f64;
    let s: f64 = spectra[m]
        .values()
        .iter()
        .zip(spectra[m2].values())
        .zip(wf.values())
        .map(|((a, b), c)| (a.conj() * b * c.conj()).re)
        .sum::<f64>()
        / d;
    if m == m2 {
        s
    } else {
        2.0 * s
    }
}

/// `sum_l sum_i t_l t_i gamma_bar_{l,i} gamma_bar_{i,l}` without materializing
/// all tables; memory stays `O(M D)`.
pub fn cross_double_sum(
    frame: &FrameTransform,
    model: &DegradationModel,
    weights: &FrameCoefficients,
    truncation_radius: Option<usize>,
) -> Result<f64> {
    let partition = &frame.partition;
    partition.check_coefficients(weights)?;
    let spectra = lattice_spectra(partition, weights);
    let m_count = partition.len();
    let pairs: Vec<(usize, usize)> = (0..m_count)
        .flat_map(|m| (m..m_count).map(move |m2| (m, m2)))
        .collect();
    pairs
        .par_iter()
        .map(|&(m, m2)| {
            let c12 = cross_sequence(frame, model, m, m2)?;
            let w = if m == m2 {
                product_sequence(&c12, &c12, truncation_radius)
            } else {
                let c21 = cross_sequence(frame, model, m2, m)?;
                product_sequence(&c12, &c21, truncation_radius)
            };
            Ok(pair_term(&spectra, m, m2, &w))
        })
        .sum::<Result<f64>>()
}

/// Window radius of twice the support of the coarsest wavelet atom.
pub fn default_truncation_radius(flavor: &FrameFlavor) -> Option<usize> {
    let (levels, filter) = match flavor {
        FrameFlavor::Orthonormal { levels, filter }
        | FrameFlavor::Undecimated { levels, filter }
        | FrameFlavor::ShiftedUnion { levels, filter, .. } => (*levels, filter),
        _ => return None,
    };
    let taps = WaveletFilter::by_name(filter).ok()?.lowpass().len();
    Some(2 * ((taps - 1) * ((1 << levels) - 1) + 1))
}
