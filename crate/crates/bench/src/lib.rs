//! Shared fixtures for the benchmarks in `benches/`.

use sure_deconv::degradation::{degrade, make_blur_response};
use sure_deconv::{BlurSpec, DegradationModel, GridShape, SpatialField};

/// Piecewise-smooth test scene on the `[0, 255]` scale.
pub fn scene(n: usize) -> SpatialField {
    let shape = GridShape::new(vec![n, n]).expect("shape");
    let c = n as f64 / 2.0;
    SpatialField::from_fn(&shape, |p| {
        let (y, x) = (p[0] as f64 - c, p[1] as f64 - c);
        let disc = if x * x + y * y < (0.3 * n as f64).powi(2) { 80.0 } else { 0.0 };
        let bars = if (p[1] / 8) % 2 == 0 { 40.0 } else { 0.0 };
        60.0 + disc + bars + 30.0 * (x / n as f64 * 6.0).sin() * (y / n as f64 * 4.0).cos()
    })
}

/// Blurred, noisy observation of [`scene`] with the model used to restore it.
pub fn observation(n: usize, blur: &BlurSpec, gamma: f64, chi: f64) -> (SpatialField, DegradationModel) {
    let s = scene(n);
    let h = make_blur_response(blur, s.shape()).expect("blur");
    let r = degrade(&s, &h, gamma, 1).expect("degrade");
    (r, DegradationModel::new(h, gamma, chi).expect("model"))
}
