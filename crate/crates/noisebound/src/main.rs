use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use noisebound::config::{DatasetSource, ExperimentConfig, ExperimentKind, GaussianNoise, ModelSource};
use noisebound::data::{blob_images, make_multiclass_blobs, IMAGE_SIDE};
use noisebound::error::{Error, Result};
use noisebound::experiments::{adversarial, build_model, calibrate_constants, default_search, run_experiment, run_lp_experiment};
use noisebound::io::{
    encode_idx_images, encode_idx_labels, read_covariance, read_dataset_csv, read_images, read_model, write_dataset_csv,
    write_images, write_model,
};
use noisebound_core::bounds::{gaussian_bounds, lp_bounds, BoundReport};
use noisebound_core::models::Dataset;
use noisebound_core::noise::sample_lp_ball;
use noisebound_core::quantize::quantize_image;
use noisebound_core::rng::{derive_seed, substream};
use noisebound_core::robustness::{robustness_radius, SearchMode, DEFAULT_SAMPLES};
use noisebound_core::{BoundConstants, Classifier, CovarianceSpec, Exponent, Model, NoiseModel, RobustnessQuery};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "noisebound", version, about = "Robustness of classifiers to random noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw noise vectors, one CSV row each.
    Sample(SampleArgs),
    /// Minimal adversarial perturbation of one point.
    Adversarial(AdversarialArgs),
    /// Empirical robustness radius of one point.
    Radius(RadiusArgs),
    /// Closed-form bounds for a hyperplane classifier.
    Bounds(BoundsArgs),
    /// Quantize images to a given bit depth.
    Quantize(QuantizeArgs),
    /// Run a full experiment pipeline and write a report.
    Experiment(ExperimentArgs),
    /// Fit `C0`, `c0` and `zeta0` from an lp experiment.
    Calibrate(CalibrateArgs),
    /// Write a synthetic dataset.
    Generate(GenerateArgs),
    /// Train a model on a dataset CSV.
    Train(TrainArgs),
}

#[derive(Args)]
struct NoiseArgs {
    /// Uniform noise in the unit lp ball (`inf` allowed).
    #[arg(long, conflicts_with_all = ["sigma", "white"])]
    p: Option<Exponent>,
    /// Gaussian noise with this covariance (CSV or NCMAT1 binary).
    #[arg(long, conflicts_with = "white")]
    sigma: Option<PathBuf>,
    /// Gaussian noise with covariance I/d.
    #[arg(long)]
    white: bool,
}

impl NoiseArgs {
    fn resolve(&self, d: usize) -> Result<NoiseModel> {
        match (&self.p, &self.sigma, self.white) {
            (Some(p), None, false) => Ok(NoiseModel::Lp(*p)),
            (None, Some(path), false) => {
                let sigma = read_covariance(path)?;
                if sigma.dim() != d {
                    return Err(Error::data(format!("covariance is {0}×{0}, expected d = {d}", sigma.dim())));
                }
                Ok(NoiseModel::gaussian(sigma))
            }
            (None, None, true) => Ok(NoiseModel::gaussian(CovarianceSpec::white(d)?)),
            _ => Err(Error::config("give exactly one of --p, --sigma or --white")),
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PointArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "data")]
    point: Option<String>,
    /// Dataset CSV to take the point from.
    #[arg(long, requires = "index")]
    data: Option<PathBuf>,
    #[arg(long)]
    index: Option<usize>,
}

impl PointArgs {
    fn load(&self) -> Result<(Model, Vec<f64>)> {
        let model = read_model(&self.model)?;
        let x = match (&self.point, &self.data, self.index) {
            (Some(text), None, _) => parse_vector(text)?,
            (None, Some(path), Some(i)) => {
                let data = read_dataset_csv(path)?;
                data.samples()
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::data(format!("index {i} out of range for {} points", data.len())))?
            }
            _ => return Err(Error::config("give --point, or --data with --index")),
        };
        if x.len() != model.dim() {
            return Err(Error::data(format!("point has {} coordinates, model expects {}", x.len(), model.dim())));
        }
        Ok((model, x))
    }
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::config(format!("bad number `{t}`"))))
        .collect()
}

#[derive(Args)]
struct AdversarialArgs {
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, default_value = "2")]
    p: Exponent,
}

#[derive(Args)]
struct RadiusArgs {
    #[command(flatten)]
    point: PointArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 0.015)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    n_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Search bracket; defaults to one derived from the minimal perturbation.
    #[arg(long, requires = "alpha_hi")]
    alpha_lo: Option<f64>,
    #[arg(long, requires = "alpha_lo")]
    alpha_hi: Option<f64>,
    /// Scan a grid over the bracket instead of bisecting.
    #[arg(long)]
    grid: bool,
}

#[derive(Args)]
struct BoundsArgs {
    /// Comma-separated hyperplane normal.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "model")]
    weights: Option<String>,
    /// Linear model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 0.015)]
    epsilon: f64,
    #[arg(long = "C0")]
    big_c0: Option<f64>,
    #[arg(long = "c0")]
    small_c0: Option<f64>,
    /// Constants JSON written by `calibrate`.
    #[arg(long, conflicts_with_all = ["big_c0", "small_c0"])]
    constants: Option<PathBuf>,
    /// Use the alternative lower bound.
    #[arg(long)]
    alt_lower: bool,
}

#[derive(Args)]
struct QuantizeArgs {
    /// Dataset CSV or NCMAT1 matrix with one image per row, values in 0..=255.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    bits: u32,
    #[arg(long)]
    dither: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Written in the layout of the input.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Lp,
    Gaussian,
    Quantization,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Lp => ExperimentKind::Lp,
            KindArg::Gaussian => ExperimentKind::Gaussian,
            KindArg::Quantization => ExperimentKind::Quantization,
        }
    }
}

/// Flags mirroring the configuration; a `--config` file overrides them.
#[derive(Args, Default)]
struct ConfigFlags {
    /// JSON configuration applied on top of the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    test_points: Option<usize>,
    /// Comma-separated exponents, e.g. `1,2,inf`.
    #[arg(long = "p")]
    p_grid: Option<String>,
    /// Dimension of the synthetic blobs.
    #[arg(long)]
    dim: Option<usize>,
    /// Number of synthetic points, training and test together.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    classes: Option<usize>,
    /// Dataset CSV instead of synthetic data.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model JSON instead of training one.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Signal-dependent Gaussian noise with this support threshold.
    #[arg(long)]
    signal_threshold: Option<f64>,
    /// Gaussian covariance file.
    #[arg(long)]
    sigma: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    dither: bool,
    #[arg(long = "C0")]
    big_c0: Option<f64>,
    #[arg(long = "c0")]
    small_c0: Option<f64>,
    #[arg(long)]
    zeta0: Option<f64>,
}

impl ConfigFlags {
    fn build(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::for_kind(kind);
        if let Some(v) = self.epsilon {
            c.epsilon = v;
        }
        if let Some(v) = self.n_samples {
            c.n_samples = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.test_points {
            c.test_points = v;
        }
        if let Some(text) = &self.p_grid {
            c.p_grid = text
                .split(',')
                .map(|t| t.trim().parse::<Exponent>().map_err(Error::config))
                .collect::<Result<_>>()?;
        }
        match &mut c.dataset {
            DatasetSource::Blobs {
                d,
                n,
                separation,
                classes,
                seed,
            } => {
                *d = self.dim.unwrap_or(*d);
                *n = self.n.unwrap_or(*n);
                *separation = self.separation.unwrap_or(*separation);
                *classes = self.classes.unwrap_or(*classes);
                *seed = self.seed.unwrap_or(*seed);
            }
            DatasetSource::BlobImages { n, seed } => {
                *n = self.n.unwrap_or(*n);
                *seed = self.seed.unwrap_or(*seed);
            }
            _ => {}
        }
        if let Some(path) = &self.data {
            c.dataset = DatasetSource::Csv { path: path.clone() };
        }
        if let Some(path) = &self.model {
            c.model = ModelSource::File { path: path.clone() };
        }
        match (self.signal_threshold, &self.sigma) {
            (Some(_), Some(_)) => return Err(Error::config("give at most one of --signal-threshold and --sigma")),
            (Some(threshold), None) => c.noise = GaussianNoise::SignalDependent { threshold },
            (None, Some(path)) => c.noise = GaussianNoise::File { path: path.clone() },
            (None, None) => {}
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if self.eta.is_some() {
            c.eta = self.eta;
        }
        c.dither |= self.dither;
        if let Some(v) = self.big_c0 {
            c.constants.big_c0 = v;
        }
        if let Some(v) = self.small_c0 {
            c.constants.small_c0 = v;
        }
        if let Some(v) = self.zeta0 {
            c.constants.zeta0 = v;
        }
        match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
                let overrides: Value = serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
                c.merged_with(&overrides)
            }
            None => {
                c.validate()?;
                Ok(c)
            }
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    kind: KindArg,
    #[command(flatten)]
    flags: ConfigFlags,
    /// Report CSV; the summary goes next to it as `<name>.summary.json`.
    /// Without it the CSV goes to stdout and the summary to stderr.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Relative slack added around the observed ratios.
    #[arg(long, default_value_t = 0.1)]
    margin: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(subcommand)]
    what: GenerateKind,
}

#[derive(Subcommand)]
enum GenerateKind {
    /// Isotropic Gaussian clusters.
    Blobs {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 6.0)]
        separation: f64,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// 16×16 grey-level images of a blob left or right of centre.
    Images {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset CSV, or the IDX image file when `--labels` is given.
        #[arg(long)]
        output: PathBuf,
        /// Write IDX, with labels to this file.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Logistic,
    Mlp,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Logistic)]
    kind: ModelKind,
    /// Hidden layer widths for the MLP, comma-separated.
    #[arg(long, default_value = "16")]
    hidden: String,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn print_json(value: &Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(Error::data)?;
    writeln!(out)?;
    Ok(())
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn bound_json(b: &BoundReport) -> Value {
    json!({
        "lower": b.lower,
        "upper": b.upper,
        "estimate": b.estimate,
        "factor": b.factor,
        "epsilon": b.epsilon,
        "valid": b.valid,
        "eta_required": b.eta_required,
    })
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Sample(a) => {
            let noise = a.noise.resolve(a.dim)?;
            let mut out = sink(a.output.as_deref())?;
            let mut v = vec![0.0; a.dim];
            for i in 0..a.count {
                let mut rng = substream(a.seed, i as u64);
                match &noise {
                    NoiseModel::Lp(p) => v = sample_lp_ball(*p, a.dim, &mut rng)?,
                    other => other.sample_into(&mut rng, &mut v)?,
                }
                let line: Vec<String> = v.iter().map(f64::to_string).collect();
                writeln!(out, "{}", line.join(","))?;
            }
            out.flush()?;
        }
        Command::Adversarial(a) => {
            let (model, x) = a.point.load()?;
            let label = model.label(&x)?;
            let adv = adversarial(&model, &x, a.p)?;
            print_json(&json!({
                "label": label,
                "target_class": adv.target_class,
                "p": a.p.to_string(),
                "norm": adv.norm,
                "iterations": adv.iterations,
                "converged": adv.converged,
                "r_star": adv.r_star,
            }))?;
        }
        Command::Radius(a) => {
            let (model, x) = a.point.load()?;
            let noise = a.noise.resolve(model.dim())?;
            let (lo, hi) = match (a.alpha_lo, a.alpha_hi) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => {
                    let p = match noise {
                        NoiseModel::Lp(p) => p,
                        NoiseModel::Gaussian(_) => Exponent::TWO,
                    };
                    let r = adversarial(&model, &x, p)?.norm;
                    match default_search(&model, if p == Exponent::TWO && matches!(noise, NoiseModel::Gaussian(_)) { 0.1 * r } else { r }, model.dim()) {
                        SearchMode::Bisection { alpha_lo, alpha_hi, .. } => (alpha_lo, alpha_hi),
                        SearchMode::Grid { alpha_min, alpha_max, .. } => (alpha_min, alpha_max),
                    }
                }
            };
            let search = if a.grid || (a.alpha_lo.is_none() && matches!(model, Model::Mlp(_))) {
                SearchMode::grid(lo, hi)
            } else {
                SearchMode::bisection(lo, hi)
            };
            let result = robustness_radius(
                &model,
                &RobustnessQuery {
                    x,
                    noise,
                    epsilon: a.epsilon,
                    n_samples: a.n_samples,
                    seed: a.seed,
                    search,
                },
            )?;
            print_json(&json!({
                "radius": result.radius,
                "p_hat": result.p_hat_at_radius,
                "wilson_ci": [result.wilson_ci.0, result.wilson_ci.1],
                "evaluations": result.trace.len(),
            }))?;
        }
        Command::Bounds(a) => {
            let w = match (&a.weights, &a.model) {
                (Some(text), None) => parse_vector(text)?,
                (None, Some(path)) => match read_model(path)? {
                    Model::Linear(m) => m.weights().to_vec(),
                    _ => return Err(Error::config("bounds needs a binary linear model")),
                },
                _ => return Err(Error::config("give --weights or --model")),
            };
            let report = match a.noise.resolve(w.len())? {
                NoiseModel::Lp(p) => {
                    let mut k = match &a.constants {
                        Some(path) => {
                            let text = std::fs::read_to_string(path)?;
                            serde_json::from_str::<BoundConstants>(&text).map_err(Error::config)?
                        }
                        None => BoundConstants::default(),
                    };
                    k.big_c0 = a.big_c0.unwrap_or(k.big_c0);
                    k.small_c0 = a.small_c0.unwrap_or(k.small_c0);
                    k.validate().map_err(Error::config)?;
                    lp_bounds(&w, p, a.epsilon, &k, a.alt_lower)?
                }
                NoiseModel::Gaussian(sigma) => gaussian_bounds(&w, &sigma, a.epsilon)?,
            };
            print_json(&bound_json(&report))?;
        }
        Command::Quantize(a) => {
            let set = read_images(&a.input)?;
            let mut clamped = 0;
            let images = set
                .images()
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let q = quantize_image(x, a.bits, a.dither, derive_seed(a.seed, i as u64))?;
                    clamped += q.clamped as usize;
                    Ok(q.values)
                })
                .collect::<Result<Vec<_>>>()?;
            write_images(&a.output, &set, images)?;
            if clamped > 0 {
                eprintln!("warning: {clamped} image(s) had values outside [0, 255] and were clamped");
            }
        }
        Command::Experiment(a) => {
            let mut config = a.flags.build(a.kind.into())?;
            if let Some(path) = a.output {
                config.output = Some(path);
            }
            let report = run_experiment(&config)?;
            match &config.output {
                Some(path) => report.save(path)?,
                None => {
                    report.write_csv(std::io::stdout().lock())?;
                    eprintln!("{}", report.summary_json()?);
                }
            }
        }
        Command::Calibrate(a) => {
            let config = a.flags.build(ExperimentKind::Lp)?;
            let report = run_lp_experiment(&config)?;
            let constants = calibrate_constants(&report, a.margin)?;
            let text = serde_json::to_string_pretty(&constants).map_err(Error::data)? + "\n";
            match a.output {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
        }
        Command::Generate(a) => match a.what {
            GenerateKind::Blobs {
                dim,
                n,
                separation,
                classes,
                seed,
                output,
            } => write_dataset_csv(&output, &make_multiclass_blobs(dim, n, classes, separation, seed)?)?,
            GenerateKind::Images { n, seed, output, labels } => {
                let data = blob_images(n, seed)?;
                match labels {
                    Some(label_path) => {
                        std::fs::write(&output, encode_idx_images(data.samples(), IMAGE_SIDE, IMAGE_SIDE)?)?;
                        std::fs::write(label_path, encode_idx_labels(data.labels())?)?;
                    }
                    None => write_dataset_csv(&output, &data)?,
                }
            }
        },
        Command::Train(a) => {
            let data: Dataset = read_dataset_csv(&a.data)?;
            let source = match a.kind {
                ModelKind::Logistic => ModelSource::Logistic {
                    epochs: a.epochs.unwrap_or(300),
                    learning_rate: a.learning_rate,
                },
                ModelKind::Mlp => ModelSource::Mlp {
                    hidden: a
                        .hidden
                        .split(',')
                        .filter(|t| !t.trim().is_empty())
                        .map(|t| t.trim().parse::<usize>().map_err(|_| Error::config(format!("bad width `{t}`"))))
                        .collect::<Result<_>>()?,
                    epochs: a.epochs.unwrap_or(1000),
                    learning_rate: a.learning_rate,
                },
            };
            let (model, accuracy) = build_model(&source, &data, a.seed)?;
            write_model(&a.output, &model)?;
            if let Some(acc) = accuracy {
                eprintln!("training accuracy: {acc:.4}");
            }
        }
    }
    Ok(())
}
