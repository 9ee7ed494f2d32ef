//! Periodic grids, real and complex fields, and the DFT.
//!
//! The forward transform is unnormalized,
//! `X(p) = sum_x x(x) exp(-2 pi i <x, p / D>)`, and the inverse carries the
//! `1/D` factor. Every risk formula in this crate relies on that convention.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Default relative tolerance on the imaginary residue of [`dft_inverse`].
pub const IMAGINARY_TOLERANCE: f64 = 1e-6;

/// Shape of a d-dimensional periodic grid, stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridShape {
    dims: Vec<usize>,
}

impl GridShape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidShape(dims));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Number of grid points `D`.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for a in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.dims[a + 1];
        }
        strides
    }

    pub fn coords(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        let mut rem = flat;
        for a in (0..self.dims.len()).rev() {
            out[a] = rem % self.dims[a];
            rem /= self.dims[a];
        }
        out
    }

    pub fn flat(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&c, &d)| acc * d + c % d)
    }

    /// Flat index of `c` reduced modulo the grid.
    pub fn wrap(&self, coords: &[i64]) -> usize {
        coords.iter().zip(&self.dims).fold(0, |acc, (&c, &d)| {
            acc * d + c.rem_euclid(d as i64) as usize
        })
    }

    /// Flat index of `-p mod D`.
    pub fn mirror(&self, flat: usize) -> usize {
        let mut out = 0;
        let mut scale = 1;
        let mut rem = flat;
        for &d in self.dims.iter().rev() {
            let c = rem % d;
            rem /= d;
            out += ((d - c) % d) * scale;
            scale *= d;
        }
        out
    }

    /// Flat index of `(p + q) mod D`.
    pub fn add(&self, p: usize, q: usize) -> usize {
        let mut out = 0;
        let mut scale = 1;
        let (mut rp, mut rq) = (p, q);
        for &d in self.dims.iter().rev() {
            let c = (rp % d + rq % d) % d;
            rp /= d;
            rq /= d;
            out += c * scale;
            scale *= d;
        }
        out
    }

    /// Calls `f(flat, coords)` for every grid point in raster order.
    pub fn for_each(&self, mut f: impl FnMut(usize, &[usize])) {
        let mut coords = vec![0usize; self.dims.len()];
        for flat in 0..self.len() {
            f(flat, &coords);
            for a in (0..coords.len()).rev() {
                coords[a] += 1;
                if coords[a] < self.dims[a] {
                    break;
                }
                coords[a] = 0;
            }
        }
    }

    pub(crate) fn check_same(&self, other: &GridShape) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch {
                expected: self.dims.clone(),
                found: other.dims.clone(),
            });
        }
        Ok(())
    }
}

/// Real field on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    shape: GridShape,
    values: Vec<f64>,
}

impl SpatialField {
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                found: values.len(),
            });
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: &GridShape) -> Self {
        Self {
            values: vec![0.0; shape.len()],
            shape: shape.clone(),
        }
    }

    pub fn constant(shape: &GridShape, c: f64) -> Self {
        Self {
            values: vec![c; shape.len()],
            shape: shape.clone(),
        }
    }

    pub fn from_fn(shape: &GridShape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut values = Vec::with_capacity(shape.len());
        shape.for_each(|_, c| values.push(f(c)));
        Self {
            shape: shape.clone(),
            values,
        }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dot(&self, other: &SpatialField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn sub(&self, other: &SpatialField) -> Result<SpatialField> {
        self.shape.check_same(&other.shape)?;
        Ok(Self {
            shape: self.shape.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &SpatialField) -> Result<()> {
        self.shape.check_same(&other.shape)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> SpatialField {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SpatialField {
        Self {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Biased sample variance `mean(x^2) - mean(x)^2`.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs_diff(&self, other: &SpatialField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Complex field on a periodic grid, usually a DFT.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumField {
    shape: GridShape,
    values: Vec<Complex64>,
}

impl SpectrumField {
    pub fn new(shape: GridShape, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                found: values.len(),
            });
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: &GridShape) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); shape.len()],
            shape: shape.clone(),
        }
    }

    pub fn ones(shape: &GridShape) -> Self {
        Self {
            values: vec![Complex64::new(1.0, 0.0); shape.len()],
            shape: shape.clone(),
        }
    }

    pub fn from_fn(shape: &GridShape, mut f: impl FnMut(&[usize]) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(shape.len());
        shape.for_each(|_, c| values.push(f(c)));
        Self {
            shape: shape.clone(),
            values,
        }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &SpectrumField) -> Result<SpectrumField> {
        self.shape.check_same(&other.shape)?;
        Ok(Self {
            shape: self.shape.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn conj(&self) -> SpectrumField {
        self.map(|v| v.conj())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> SpectrumField {
        Self {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Largest `|V(p) - conj(V(-p))|`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.values.len())
            .map(|p| (self.values[p] - self.values[self.shape.mirror(p)].conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Membership mask over the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencySet {
    shape: GridShape,
    mask: Vec<bool>,
}

impl FrequencySet {
    pub fn new(shape: GridShape, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                found: mask.len(),
            });
        }
        Ok(Self { shape, mask })
    }

    pub fn full(shape: &GridShape) -> Self {
        Self {
            mask: vec![true; shape.len()],
            shape: shape.clone(),
        }
    }

    pub fn empty(shape: &GridShape) -> Self {
        Self {
            mask: vec![false; shape.len()],
            shape: shape.clone(),
        }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn contains(&self, p: usize) -> bool {
        self.mask[p]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Cardinality.
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }

    pub fn complement(&self) -> FrequencySet {
        Self {
            shape: self.shape.clone(),
            mask: self.mask.iter().map(|b| !b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &FrequencySet) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(p, &b)| b.then_some(p))
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized in-place multidimensional FFT.
pub(crate) fn fft_in_place(shape: &GridShape, data: &mut [Complex64], inverse: bool) {
    let strides = shape.strides();
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        for (axis, &n) in shape.dims().iter().enumerate() {
            if n == 1 {
                continue;
            }
            let fft = if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            };
            let stride = strides[axis];
            if stride == 1 {
                fft.process(data);
                continue;
            }
            let block = n * stride;
            let mut buf = vec![Complex64::new(0.0, 0.0); block];
            for chunk in data.chunks_mut(block) {
                for i in 0..n {
                    for j in 0..stride {
                        buf[j * n + i] = chunk[i * stride + j];
                    }
                }
                fft.process(&mut buf);
                for i in 0..n {
                    for j in 0..stride {
                        chunk[i * stride + j] = buf[j * n + i];
                    }
                }
            }
        }
    });
}

/// Forward DFT of a real field.
pub fn dft_forward(x: &SpatialField) -> SpectrumField {
    let mut data: Vec<Complex64> = x.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(x.shape(), &mut data, false);
    SpectrumField {
        shape: x.shape().clone(),
        values: data,
    }
}

/// Forward DFT of a complex array.
pub fn dft_forward_complex(x: &SpectrumField) -> SpectrumField {
    let mut out = x.clone();
    fft_in_place(&out.shape, &mut out.values, false);
    out
}

/// Inverse DFT keeping the complex result.
pub fn dft_inverse_complex(spectrum: &SpectrumField) -> SpectrumField {
    let mut out = spectrum.clone();
    fft_in_place(&out.shape, &mut out.values, true);
    let scale = 1.0 / out.values.len() as f64;
    for v in &mut out.values {
        *v *= scale;
    }
    out
}

/// Inverse DFT of a Hermitian spectrum, using [`IMAGINARY_TOLERANCE`].
pub fn dft_inverse(spectrum: &SpectrumField) -> Result<SpatialField> {
    dft_inverse_with_tolerance(spectrum, IMAGINARY_TOLERANCE)
}

/// Inverse DFT; fails when the largest imaginary part of the output exceeds
/// `rel_tol` times the spectrum sup-norm.
pub fn dft_inverse_with_tolerance(spectrum: &SpectrumField, rel_tol: f64) -> Result<SpatialField> {
    let complex = dft_inverse_complex(spectrum);
    real_part_checked(complex, rel_tol * spectrum.sup_norm())
}

pub(crate) fn real_part_checked(x: SpectrumField, tolerance: f64) -> Result<SpatialField> {
    let residue = x.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if residue > tolerance {
        return Err(Error::ImaginaryResidueTooLarge { residue, tolerance });
    }
    Ok(SpatialField {
        shape: x.shape,
        values: x.values.into_iter().map(|v| v.re).collect(),
    })
}

/// Zeroes every bin outside `q`.
pub fn project_frequencies(x: &SpectrumField, q: &FrequencySet) -> Result<SpectrumField> {
    x.shape.check_same(&q.shape)?;
    let zero = Complex64::new(0.0, 0.0);
    Ok(SpectrumField {
        shape: x.shape.clone(),
        values: x
            .values
            .iter()
            .zip(&q.mask)
            .map(|(&v, &keep)| if keep { v } else { zero })
            .collect(),
    })
}

/// Projection of a real field onto the frequencies in `q`.
pub fn project_field(x: &SpatialField, q: &FrequencySet) -> Result<SpatialField> {
    if q.is_full() {
        x.shape.check_same(&q.shape)?;
        return Ok(x.clone());
    }
    dft_inverse(&project_frequencies(&dft_forward(x), q)?)
}

/// `(1/D) sum_x x(x)^2`.
pub fn mean_square(x: &SpatialField) -> f64 {
    x.norm_sq() / x.len() as f64
}
