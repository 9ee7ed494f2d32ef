#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sure_deconv::degradation::{degrade, inverse_filter, make_blur_response, noise_field, pilot_inverse};
use sure_deconv::frame::{analyze, build_frame, gamma_bar, kappa, subband_noise_std, synthesize};
use sure_deconv::grid::{dft_forward, dft_inverse};
use sure_deconv::risk::pilot_coefficients;
use sure_deconv::solver::LetProblem;
use sure_deconv::{
    optimize_let, BlurSpec, DegradationModel, FrameFlavor, FrameTransform, GridShape, LetSpec, SpatialField,
    SpectrumField,
};

pub type Check = Result<(), String>;

pub fn grid(dims: &[usize]) -> GridShape {
    GridShape::new(dims.to_vec()).unwrap()
}

/// Smooth background, a bright disc and a few bars.
pub fn scene(shape: &GridShape) -> SpatialField {
    let dims = shape.dims().to_vec();
    let n = dims[0] as f64;
    SpatialField::from_fn(shape, |c| {
        let y = c[0] as f64 - n / 2.0;
        let x = c.get(1).map_or(0.0, |&v| v as f64 - dims.get(1).copied().unwrap_or(1) as f64 / 2.0);
        let disc = if x * x + y * y < (0.3 * n).powi(2) { 70.0 } else { 0.0 };
        let bars = if (c.get(1).copied().unwrap_or(0) / 3) % 2 == 0 { 30.0 } else { 0.0 };
        70.0 + disc + bars + 40.0 * (x / 5.0).sin() * (y / 7.0).cos()
    })
}

pub fn random_field(shape: &GridShape, rng: &mut ChaCha8Rng) -> SpatialField {
    SpatialField::from_fn(shape, |_| rng.random_range(-10.0..10.0))
}

/// Real, zero-phase response with `|H|` drawn from `[lo, hi]`.
pub fn random_response(shape: &GridShape, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> SpectrumField {
    let raw: Vec<f64> = (0..shape.len()).map(|_| rng.random_range(lo..=hi)).collect();
    let values = (0..shape.len())
        .map(|p| Complex64::new(0.5 * (raw[p] + raw[shape.mirror(p)]), 0.0))
        .collect();
    SpectrumField::new(shape.clone(), values).unwrap()
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub s: SpatialField,
    pub r: SpatialField,
    pub model: DegradationModel,
    pub flavor: FrameFlavor,
    pub lambda: f64,
}

impl Instance {
    pub fn frame(&self) -> FrameTransform {
        build_frame(&self.flavor, &self.model, self.lambda).unwrap()
    }
}

/// Small random deconvolution problem; `orthonormal` forces an orthonormal
/// basis on the full frequency set.
pub fn instance(seed: u64, orthonormal: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = if rng.random_bool(0.5) { 16 } else { 32 };
    let shape = grid(&[n, n]);
    let filters = ["haar", "db2", "sym4"];
    let filter = filters[rng.random_range(0..filters.len())];
    let levels = rng.random_range(1..=2);
    let (blur, chi) = match rng.random_range(0..if orthonormal { 2 } else { 4 }) {
        0 => (BlurSpec::Dirac, 0.0),
        1 => (BlurSpec::Gaussian(rng.random_range(0.4..0.8)), 0.0),
        2 => (BlurSpec::Gaussian(rng.random_range(0.8..1.6)), 0.05),
        _ => (BlurSpec::Uniform(vec![3, 3]), 0.08),
    };
    let flavor = match if orthonormal { 0 } else { rng.random_range(0..3) } {
        0 => FrameFlavor::Orthonormal { levels, filter: filter.into() },
        1 => FrameFlavor::Undecimated { levels, filter: filter.into() },
        _ => FrameFlavor::ShiftedUnion { levels, filter: filter.into(), shifts: Vec::new() },
    };
    let gamma = [1.0, 9.0, 25.0][rng.random_range(0..3)];
    let lambda = if orthonormal { 0.0 } else { [0.0, 0.01, 0.1][rng.random_range(0..3)] };
    // orthonormal instances use a faint scene so the two LET terms stay well separated
    let s = if orthonormal { scene(&shape).map(|v| (v - 110.0) / 8.0) } else { scene(&shape) };
    let h = make_blur_response(&blur, &shape).unwrap();
    let r = degrade(&s, &h, gamma, seed).unwrap();
    Instance { s, r, model: DegradationModel::new(h, gamma, chi).unwrap(), flavor, lambda }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn check_dft(x: &SpatialField) -> Check {
    let d = x.len() as f64;
    let spec = dft_forward(x);
    let energy = d * x.norm_sq();
    if (spec.norm_sq() - energy).abs() > 1e-9 * energy.max(1e-300) {
        return Err(format!("Parseval: {} vs {}", spec.norm_sq(), energy));
    }
    let defect = spec.hermitian_defect();
    if defect > 1e-9 * spec.sup_norm().max(1.0) {
        return Err(format!("Hermitian defect {defect}"));
    }
    let back = dft_inverse(&spec).map_err(|e| e.to_string())?;
    let err = back.sub(x).unwrap().norm_sq().sqrt();
    if err > 1e-10 * x.norm_sq().sqrt().max(1e-300) {
        return Err(format!("round trip error {err}"));
    }
    Ok(())
}

/// With `H = 1` and no regularization, `synthesize(analyze(x)) = x`.
pub fn check_reconstruction(flavor: &FrameFlavor, x: &SpatialField) -> Check {
    let model = DegradationModel::new(SpectrumField::ones(x.shape()), 1.0, 0.0).unwrap();
    let frame = build_frame(flavor, &model, 0.0).map_err(|e| e.to_string())?;
    let back = synthesize(&analyze(x, &frame, &model).unwrap(), &frame, &model).unwrap();
    let err = back.sub(x).unwrap().norm_sq().sqrt();
    if err > 1e-9 * x.norm_sq().sqrt() {
        return Err(format!("{flavor}: reconstruction error {err}"));
    }
    Ok(())
}

/// Per-atom constants computed by brute force from the spatial atoms agree
/// with the per-subband values, for a few atoms of every subband.
pub fn check_atom_constants(inst: &Instance) -> Check {
    let frame = inst.frame();
    let model = &inst.model;
    let gamma = model.gamma();
    let shape = model.shape().clone();
    let d = shape.len();
    // columns of the inverse filter and of its cube
    let mut once = Vec::with_capacity(d);
    let mut thrice = Vec::with_capacity(d);
    for y in 0..d {
        let mut delta = SpatialField::zeros(&shape);
        delta.values_mut()[y] = 1.0;
        let a = inverse_filter(&delta, model).unwrap();
        thrice.push(inverse_filter(&inverse_filter(&a, model).unwrap(), model).unwrap());
        once.push(a);
    }
    let gb = gamma_bar(&frame, model).map_err(|e| e.to_string())?;
    let kp = kappa(&frame, model).map_err(|e| e.to_string())?;
    let sig = subband_noise_std(&frame, model);
    let partition = frame.partition();
    let mut start = 0;
    for (m, band) in partition.subbands().iter().enumerate() {
        let len = band.len();
        for l in [start, start + len / 2, start + len - 1] {
            let phi = frame.analysis_atom(l).unwrap();
            let psi = frame.synthesis_atom(l, model.observable()).unwrap();
            let g: f64 = (0..d).map(|y| phi.values()[y] * once[y].dot(&psi)).sum();
            let k: f64 = (0..d).map(|y| phi.values()[y] * thrice[y].dot(&psi)).sum();
            let s = (gamma * phi.norm_sq()).sqrt();
            let scale = 1e-10 * (1.0 + gb[m].abs());
            if (g - gb[m]).abs() > scale {
                return Err(format!("gamma_bar atom {l} (band {m}): {g} vs {}", gb[m]));
            }
            if (k - kp[m]).abs() > 1e-10 * (1.0 + kp[m].abs()) {
                return Err(format!("kappa atom {l} (band {m}): {k} vs {}", kp[m]));
            }
            if rel(s, sig[m]) > 1e-10 && (s - sig[m]).abs() > 1e-12 {
                return Err(format!("sigma atom {l} (band {m}): {s} vs {}", sig[m]));
            }
        }
        start += len;
    }
    Ok(())
}

/// `E_hat(a)` from direct evaluation equals the quadratic form, and the
/// fitted weights are a stationary point.
pub fn check_solver(inst: &Instance, seed: u64) -> Check {
    let frame = inst.frame();
    let spec = LetSpec::blu(frame.partition().len(), 3.0).unwrap();
    let problem = LetProblem::new(&inst.r, &frame, &inst.model, &spec).map_err(|e| e.to_string())?;
    let sys = problem.normal_system().map_err(|e| e.to_string())?;
    let d = inst.r.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..3 {
        let a: Vec<f64> = (0..sys.dim()).map(|_| rng.random_range(-1.0..2.0)).collect();
        let direct = problem.evaluate(&a).unwrap().2.e_hat;
        let quad = (sys.quadratic_form(&a) + problem.risk_constant()) / d;
        if (direct - quad).abs() > 1e-9 * direct.abs().max(quad.abs()).max(1.0) {
            return Err(format!("quadratic form {quad} vs direct {direct}"));
        }
    }
    let fit = optimize_let(&inst.r, &frame, &inst.model, &spec).map_err(|e| e.to_string())?;
    let a = &fit.solution.weights;
    for k in 0..a.len() {
        let h = 1e-4 * (1.0 + a[k].abs());
        let mut p = a.clone();
        p[k] += h;
        let up = problem.evaluate(&p).unwrap().2.e_hat;
        p[k] -= 2.0 * h;
        let down = problem.evaluate(&p).unwrap().2.e_hat;
        let grad = (up - down) / (2.0 * h);
        if grad.abs() > 1e-6 * (1.0 + fit.report.e_hat.abs()) {
            return Err(format!("gradient {grad} at weight {k} (E_hat {})", fit.report.e_hat));
        }
    }
    Ok(())
}

/// Monte-Carlo `E[n_l n~_l] = gamma gamma_bar_l`, pooled per subband; returns
/// the largest z-score.
pub fn noise_correlation_z(inst: &Instance, draws: u64) -> f64 {
    let frame = inst.frame();
    let model = &inst.model;
    let gb = gamma_bar(&frame, model).unwrap();
    let m_count = gb.len();
    let mut samples = vec![Vec::with_capacity(draws as usize); m_count];
    for k in 0..draws {
        let n = noise_field(model.shape(), model.gamma(), 1_000_000 + k).unwrap();
        let a = analyze(&n, &frame, model).unwrap();
        let b = pilot_coefficients(&pilot_inverse(&n, model).unwrap(), &frame).unwrap();
        for (m, out) in samples.iter_mut().enumerate() {
            let (x, y) = (a.band(m), b.band(m));
            out.push(x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>() / x.len() as f64);
        }
    }
    (0..m_count)
        .map(|m| {
            let (mean, se) = mean_se(&samples[m]);
            let target = model.gamma() * gb[m];
            if se == 0.0 {
                if (mean - target).abs() < 1e-9 * (1.0 + target.abs()) { 0.0 } else { f64::INFINITY }
            } else {
                (mean - target).abs() / se
            }
        })
        .fold(0.0, f64::max)
}

pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn sample_variance(v: &[f64]) -> f64 {
    let (mean, _) = mean_se(v);
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}
