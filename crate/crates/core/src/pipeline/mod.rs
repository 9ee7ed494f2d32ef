//! End-to-end restoration: load, degrade, estimate the noise, pick the
//! observable set, fit the LET weights, score.

pub mod config;
pub mod image_io;
pub mod metrics;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::degradation::{bsnr_db, degrade, gamma_for_bsnr, make_blur_response, DegradationModel};
use crate::error::{Error, Result};
use crate::frame::build_frame;
use crate::grid::{SpatialField, SpectrumField};
use crate::risk::{lambda_heuristic, most_reliable_chi, select_chi, sure_variance, RiskReport};
use crate::solver::{optimize_let, LetProblem};

pub use config::{ChiMode, EstimatorKind, ExperimentConfig, LambdaMode, NoiseVarMode, DEFAULT_CROP};
pub use image_io::{center_crop, load_image, save_image};
pub use metrics::{mad_noise_estimate, signal_power_estimate, snr_db, wiener_baseline};

/// Grid size of the fallback threshold scan.
pub const FALLBACK_CHI_STEPS: usize = 64;

/// One restoration run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub image: String,
    pub blur: String,
    pub bsnr_db: f64,
    pub method: String,
    pub seed: u64,
    /// Restored SNR; absent without a clean reference.
    pub snr_db: Option<f64>,
    pub snr_input_db: Option<f64>,
    pub e_hat: Option<f64>,
    pub variance_hat: Option<f64>,
    pub chi: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: f64,
    pub runtime_s: f64,
}

/// Estimate of one observation and its diagnostics.
#[derive(Debug, Clone)]
pub struct Restoration {
    /// Unclamped estimate.
    pub estimate: SpatialField,
    pub model: Option<DegradationModel>,
    pub lambda: Option<f64>,
    pub report: Option<RiskReport>,
    pub weights: Vec<f64>,
}

/// Output of [`run_restore`].
#[derive(Debug, Clone)]
pub struct RestoreOutcome {
    pub clean: Option<SpatialField>,
    pub observed: SpatialField,
    pub restoration: Restoration,
    pub row: ScoreRow,
}

impl RestoreOutcome {
    pub fn estimate(&self) -> &SpatialField {
        &self.restoration.estimate
    }
}

/// Loads the configured input and applies the crop.
pub fn prepare_image(cfg: &ExperimentConfig) -> Result<SpatialField> {
    let path = cfg.input.as_ref().ok_or_else(|| Error::Config("no input image".into()))?;
    let img = load_image(path)?;
    match cfg.crop {
        Some(size) => center_crop(&img, size),
        None => Ok(img),
    }
}

/// Restores `r` observed through `h` with noise variance `gamma`.
pub fn restore(r: &SpatialField, h: &SpectrumField, gamma: f64, cfg: &ExperimentConfig) -> Result<Restoration> {
    if cfg.estimator == EstimatorKind::Wiener {
        let estimate = wiener_baseline(r, h, gamma, signal_power_estimate(r, gamma))?;
        return Ok(Restoration { estimate, model: None, lambda: None, report: None, weights: vec![] });
    }
    let lambda = match cfg.lambda {
        LambdaMode::Heuristic => lambda_heuristic(r, gamma),
        LambdaMode::Fixed(l) => l,
    };
    let flavor = cfg.flavor()?;
    let model = match cfg.chi {
        ChiMode::Auto => match select_chi(r, h, gamma, &flavor, lambda) {
            Ok(sel) => sel.model,
            Err(Error::NoAdmissibleChi { .. }) => {
                let sel = most_reliable_chi(r, h, gamma, lambda, FALLBACK_CHI_STEPS)?;
                warn!("no threshold passes the reliability rule, using chi = {:.4}", sel.chi);
                sel.model
            }
            Err(e) => return Err(e),
        },
        ChiMode::Fixed(chi) => DegradationModel::new(h.clone(), gamma, chi)?,
    };
    let frame = build_frame(&flavor, &model, lambda)?;
    let spec = cfg.let_spec(frame.partition().len())?.expect("LET estimator");
    let problem = LetProblem::new(r, &frame, &model, &spec)?;
    let (mut estimate, theta_prime, mut report, weights) = match cfg.estimator {
        EstimatorKind::Blu | EstimatorKind::Tanh => {
            let fit = optimize_let(r, &frame, &model, &spec)?;
            (fit.estimate, fit.theta_prime, fit.report, fit.solution.weights)
        }
        _ => {
            let w = spec.flat_weights().ok_or(Error::WeightsUnset)?;
            let (e, d, rep) = problem.evaluate(&w)?;
            (e, d, rep, w)
        }
    };
    report.variance_hat =
        Some(sure_variance(&estimate, &problem.pilot, &theta_prime, &frame, &model, cfg.cross_radius)?);
    if cfg.estimator == EstimatorKind::Identity && gamma == 0.0 && lambda == 0.0 && model.is_identity() {
        // noiseless identity: the estimate is the observation itself
        estimate = r.clone();
    }
    Ok(Restoration { estimate, model: Some(model), lambda: Some(lambda), report: Some(report), weights })
}

/// Degrades `image` (when configured), restores it and scores the result.
pub fn run_restore_on(cfg: &ExperimentConfig, image: &SpatialField) -> Result<RestoreOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let h = make_blur_response(&cfg.blur, image.shape())?;
    let (clean, observed, true_gamma) = if cfg.degrade {
        let gamma = match (cfg.gamma, cfg.bsnr_db) {
            (Some(g), _) => g,
            (None, Some(b)) => gamma_for_bsnr(image, &h, b)?,
            (None, None) => unreachable!("validated"),
        };
        (Some(image.clone()), degrade(image, &h, gamma, cfg.seed)?, cfg.gamma.or(Some(gamma)))
    } else {
        (None, image.clone(), cfg.gamma)
    };
    let gamma = match cfg.noise_var {
        NoiseVarMode::Known => true_gamma.ok_or_else(|| Error::Config("noise variance unknown".into()))?,
        NoiseVarMode::Mad => mad_noise_estimate(&observed)?,
    };
    let restoration = restore(&observed, &h, gamma, cfg)?;
    let bsnr = match (&clean, true_gamma) {
        (Some(s), Some(g)) => bsnr_db(s, &h, g)?,
        _ => cfg.bsnr_db.unwrap_or(f64::NAN),
    };
    let row = ScoreRow {
        image: cfg.image_id(),
        blur: cfg.blur.to_string(),
        bsnr_db: cfg.bsnr_db.unwrap_or(bsnr),
        method: cfg.method_id(),
        seed: cfg.seed,
        snr_db: clean.as_ref().map(|s| snr_db(s, &restoration.estimate)).transpose()?,
        snr_input_db: clean.as_ref().map(|s| snr_db(s, &observed)).transpose()?,
        e_hat: restoration.report.as_ref().map(|r| r.e_hat),
        variance_hat: restoration.report.as_ref().and_then(|r| r.variance_hat),
        chi: restoration.model.as_ref().map(|m| m.chi()),
        lambda: restoration.lambda,
        gamma,
        runtime_s: start.elapsed().as_secs_f64(),
    };
    info!(
        "{} {} seed {}: SNR {:?} dB (input {:?})",
        row.image, row.method, row.seed, row.snr_db, row.snr_input_db
    );
    Ok(RestoreOutcome { clean, observed, restoration, row })
}

/// Loads the configured image and runs [`run_restore_on`].
pub fn run_restore(cfg: &ExperimentConfig) -> Result<RestoreOutcome> {
    let image = prepare_image(cfg)?;
    run_restore_on(cfg, &image)
}

/// Median over the seeds of one table cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub image: String,
    pub blur: String,
    pub bsnr_db: f64,
    pub method: String,
    pub runs: usize,
    /// Runs that ended in an error; the medians cover the others.
    pub failed: usize,
    pub snr_db: Option<f64>,
    pub snr_input_db: Option<f64>,
    pub e_hat: Option<f64>,
    pub chi: Option<f64>,
    pub runtime_s: f64,
}

/// Median of the finite-or-infinite values, `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Aggregates per-seed rows of one cell; `errors` counts failed runs.
pub fn aggregate(cfg: &ExperimentConfig, rows: &[ScoreRow], errors: usize) -> TableRow {
    let pick = |f: fn(&ScoreRow) -> Option<f64>| median(&rows.iter().filter_map(f).collect::<Vec<_>>());
    TableRow {
        image: cfg.image_id(),
        blur: cfg.blur.to_string(),
        bsnr_db: cfg.bsnr_db.or_else(|| rows.first().map(|r| r.bsnr_db)).unwrap_or(f64::NAN),
        method: cfg.method_id(),
        runs: rows.len() + errors,
        failed: errors,
        snr_db: pick(|r| r.snr_db),
        snr_input_db: pick(|r| r.snr_input_db),
        e_hat: pick(|r| r.e_hat),
        chi: pick(|r| r.chi),
        runtime_s: rows.iter().map(|r| r.runtime_s).sum(),
    }
}

/// Runs every cell over seeds `seed .. seed + seeds`; failures are counted,
/// not propagated.
pub fn run_table(cells: &[ExperimentConfig]) -> Result<Vec<TableRow>> {
    if cells.is_empty() {
        return Err(Error::Config("no table cells".into()));
    }
    let images = cells.iter().map(prepare_image).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.seeds as u64).map(move |k| (i, c.seed + k)))
        .collect();
    let results: Vec<(usize, Result<ScoreRow>)> = jobs
        .into_par_iter()
        .map(|(i, seed)| {
            let cfg = ExperimentConfig { seed, ..cells[i].clone() };
            (i, run_restore_on(&cfg, &images[i]).map(|o| o.row))
        })
        .collect();
    Ok(cells
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let mut rows = Vec::new();
            let mut errors = 0;
            for (j, r) in &results {
                if *j == i {
                    match r {
                        Ok(row) => rows.push(row.clone()),
                        Err(e) => {
                            log::warn!("{} {}: {e}", cfg.image_id(), cfg.method_id());
                            errors += 1;
                        }
                    }
                }
            }
            aggregate(cfg, &rows, errors)
        })
        .collect())
}

/// Writes serializable rows as CSV with a header.
pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Report(e.to_string()))?;
    Ok(())
}

pub fn write_csv_file<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    write_csv(rows, f)
}

#[derive(Serialize)]
struct ReportLine<'a> {
    #[serde(flatten)]
    row: &'a ScoreRow,
    risk: Option<&'a RiskReport>,
    weights: &'a [f64],
}

/// Appends one JSON object per outcome.
pub fn write_report_lines(outcomes: &[&RestoreOutcome], mut out: impl Write) -> Result<()> {
    for o in outcomes {
        let line = ReportLine { row: &o.row, risk: o.restoration.report.as_ref(), weights: &o.restoration.weights };
        serde_json::to_writer(&mut out, &line)?;
        writeln!(out).map_err(|e| Error::Report(e.to_string()))?;
    }
    Ok(())
}
