use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use sure_deconv::degradation::{degrade, gamma_for_bsnr, make_blur_response};
use sure_deconv::pipeline::{
    load_image, prepare_image, run_restore, run_table, save_image, snr_db, write_csv, write_csv_file,
    write_report_lines, ExperimentConfig,
};
use sure_deconv::stein::{run_suite, PASS_SIGMAS};
use sure_deconv::Error;

/// Environment variable naming the default configuration file.
const CONFIG_ENV: &str = "SURE_DECONV_CONFIG";
/// Failures tolerated by `verify-stein` before it reports an error.
const STEIN_TOLERATED_FAILURES: usize = 2;

mod exit {
    pub const CONFIG: u8 = 2;
    pub const IO: u8 = 3;
    pub const INPUT: u8 = 4;
    pub const NUMERICAL: u8 = 5;
    pub const REPORT: u8 = 6;
    pub const VERIFICATION: u8 = 7;
}

fn exit_code(e: &Error) -> u8 {
    use Error::*;
    match e {
        Config(_) | UnknownFilter(_) | InvalidFrame(_) | UnsupportedDepth { .. } | InvalidEstimator(_)
        | InvalidBlur(_) | NotOrthonormalFlavor(_) => exit::CONFIG,
        Io { .. } | Image { .. } => exit::IO,
        InvalidShape(_) | ShapeMismatch { .. } | LengthMismatch { .. } | KernelLargerThanGrid { .. }
        | ZeroBlurredSignal | InvalidArgument(_) | WeightsUnset => exit::INPUT,
        ImaginaryResidueTooLarge { .. } | EmptyObservableSet { .. } | NoAdmissibleChi { .. }
        | SingularSystem(_) | InvalidCovariance { .. } => exit::NUMERICAL,
        Report(_) => exit::REPORT,
    }
}

#[derive(Parser)]
#[command(name = "sure-deconv", version, about = "SURE-LET deconvolution of blurred, noisy images")]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Knobs {
    /// Blur: uniform:5x5, gaussian:2, cosine:3/32, dirac.
    #[arg(long)]
    blur: Option<String>,
    /// Target blurred SNR in dB.
    #[arg(long, conflicts_with = "gamma")]
    bsnr: Option<String>,
    /// Noise variance.
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// undecimated, orthonormal, shifted or canonical.
    #[arg(long)]
    frame: Option<String>,
    /// Wavelet filter: haar, db2, sym4, sym8.
    #[arg(long)]
    filter: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    /// blu, tanh, identity, zero or wiener.
    #[arg(long)]
    estimator: Option<String>,
    /// `auto` or a threshold.
    #[arg(long)]
    chi: Option<String>,
    /// `heuristic` or a value.
    #[arg(long)]
    lambda: Option<String>,
    /// known or mad.
    #[arg(long = "noise-var")]
    noise_var: Option<String>,
    /// Centered crop size.
    #[arg(long, conflicts_with = "full")]
    crop: Option<usize>,
    /// Process the whole image.
    #[arg(long)]
    full: bool,
    /// Extra `key=value` overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Blur a clean image and add noise.
    Degrade {
        input: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Restore an observed image (or a simulated one with --simulate).
    Restore {
        input: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
        /// Treat the input as clean: degrade it first and score the result.
        #[arg(long)]
        simulate: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Score row as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Risk report as JSON lines.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score an estimate against a reference, or simulate and score a restoration.
    Evaluate {
        reference: PathBuf,
        /// Estimate to compare with the reference.
        #[arg(long)]
        estimate: Option<PathBuf>,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Median SNR over seeds for every image x BSNR x estimator cell.
    Table {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        #[command(flatten)]
        knobs: Knobs,
        /// Comma-separated BSNR values.
        #[arg(long = "bsnr-list", value_delimiter = ',')]
        bsnr_list: Vec<f64>,
        /// Comma-separated estimators.
        #[arg(long = "methods", value_delimiter = ',')]
        methods: Vec<String>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Monte-Carlo check of the Stein identities.
    VerifyStein {
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 5)]
        covariances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct SteinRow {
    identity: String,
    function: String,
    covariance: usize,
    lhs: f64,
    rhs: f64,
    stderr: f64,
    pass: bool,
}

fn base_config(path: Option<&Path>) -> sure_deconv::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

impl Knobs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> sure_deconv::Result<()> {
        let pairs = [
            ("blur", self.blur.clone()),
            ("bsnr", self.bsnr.clone()),
            ("gamma", self.gamma.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("frame", self.frame.clone()),
            ("filter", self.filter.clone()),
            ("levels", self.levels.map(|v| v.to_string())),
            ("estimator", self.estimator.clone()),
            ("chi", self.chi.clone()),
            ("lambda", self.lambda.clone()),
            ("noise_var", self.noise_var.clone()),
            ("crop", self.crop.map(|v| v.to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        if self.full {
            cfg.crop = None;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set(k, v)?;
        }
        Ok(())
    }
}

fn create(path: &Path) -> sure_deconv::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn run(cli: Cli) -> sure_deconv::Result<u8> {
    let base = base_config(cli.config.as_deref())?;
    match cli.command {
        Command::Degrade { input, knobs, out } => {
            let mut cfg = ExperimentConfig { input: Some(input), ..base };
            knobs.apply(&mut cfg)?;
            cfg.validate()?;
            let s = prepare_image(&cfg)?;
            let h = make_blur_response(&cfg.blur, s.shape())?;
            let gamma = match (cfg.gamma, cfg.bsnr_db) {
                (Some(g), _) => g,
                (None, Some(b)) => gamma_for_bsnr(&s, &h, b)?,
                (None, None) => return Err(Error::Config("degrade needs --bsnr or --gamma".into())),
            };
            save_image(&out, &degrade(&s, &h, gamma, cfg.seed)?)?;
            println!("gamma={gamma}");
        }
        Command::Restore { input, knobs, simulate, out, csv, report } => {
            let mut cfg = ExperimentConfig { input: Some(input), degrade: simulate, ..base };
            if !simulate {
                cfg.bsnr_db = None;
            }
            knobs.apply(&mut cfg)?;
            let outcome = run_restore(&cfg)?;
            if let Some(p) = out.as_ref().or(cfg.out.as_ref()) {
                save_image(p, outcome.estimate())?;
            }
            if let Some(p) = csv.as_ref().or(cfg.csv.as_ref()) {
                write_csv_file(std::slice::from_ref(&outcome.row), p)?;
            }
            if let Some(p) = report.as_ref().or(cfg.report.as_ref()) {
                write_report_lines(&[&outcome], create(p)?)?;
            }
            write_csv(&[outcome.row], io::stdout().lock())?;
        }
        Command::Evaluate { reference, estimate, knobs, csv } => {
            if let Some(est) = estimate {
                let s = load_image(&reference)?;
                let e = load_image(&est)?;
                println!("snr_db={}", snr_db(&s, &e)?);
                return Ok(0);
            }
            let mut cfg = ExperimentConfig { input: Some(reference), degrade: true, ..base };
            knobs.apply(&mut cfg)?;
            let outcome = run_restore(&cfg)?;
            if let Some(p) = csv.as_ref().or(cfg.csv.as_ref()) {
                write_csv_file(std::slice::from_ref(&outcome.row), p)?;
            }
            write_csv(&[outcome.row], io::stdout().lock())?;
        }
        Command::Table { images, knobs, bsnr_list, methods, seeds, csv } => {
            let mut proto = ExperimentConfig { degrade: true, ..base };
            knobs.apply(&mut proto)?;
            if let Some(n) = seeds {
                proto.seeds = n;
            }
            let bsnrs = if bsnr_list.is_empty() { vec![proto.bsnr_db] } else { bsnr_list.into_iter().map(Some).collect() };
            let methods = if methods.is_empty() { vec![proto.estimator.to_string()] } else { methods };
            let mut cells = Vec::new();
            for img in &images {
                for b in &bsnrs {
                    for m in &methods {
                        let mut c = ExperimentConfig { input: Some(img.clone()), ..proto.clone() };
                        if let Some(b) = b {
                            c.set("bsnr", &b.to_string())?;
                        }
                        c.set("estimator", m)?;
                        c.validate()?;
                        cells.push(c);
                    }
                }
            }
            let rows = run_table(&cells)?;
            let failed: usize = rows.iter().map(|r| r.failed).sum();
            if let Some(p) = csv.as_ref().or(proto.csv.as_ref()) {
                write_csv_file(&rows, p)?;
            }
            write_csv(&rows, io::stdout().lock())?;
            if failed > 0 {
                warn!("{failed} runs failed");
            }
        }
        Command::VerifyStein { samples, covariances, seed, csv } => {
            let rows = run_suite(covariances, samples, seed)?;
            let failures = rows.iter().filter(|r| !r.check.pass).count();
            let mut out = io::stdout().lock();
            for r in &rows {
                writeln!(
                    out,
                    "{:<3} {:<14} cov{} lhs={:+.6} rhs={:+.6} se={:.2e} {}",
                    r.identity,
                    r.function,
                    r.covariance,
                    r.check.lhs,
                    r.check.rhs,
                    r.check.stderr,
                    if r.check.pass { "pass" } else { "FAIL" }
                )
                .map_err(|e| Error::Report(e.to_string()))?;
            }
            writeln!(out, "{failures} of {} checks outside {PASS_SIGMAS} standard errors", rows.len())
                .map_err(|e| Error::Report(e.to_string()))?;
            if let Some(p) = csv {
                let flat: Vec<SteinRow> = rows
                    .iter()
                    .map(|r| SteinRow {
                        identity: r.identity.to_string(),
                        function: r.function.clone(),
                        covariance: r.covariance,
                        lhs: r.check.lhs,
                        rhs: r.check.rhs,
                        stderr: r.check.stderr,
                        pass: r.check.pass,
                    })
                    .collect();
                write_csv_file(&flat, &p)?;
            }
            if failures > STEIN_TOLERATED_FAILURES {
                return Ok(exit::VERIFICATION);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            info!("exit code {}", exit_code(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
