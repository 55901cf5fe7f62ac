//! End-to-end pipelines: build data and model, measure radii, and compare
//! them with the closed-form bounds and predictors.

use noisebound_core::bounds::{
    calibrate_zeta0, gaussian_bounds, laf_gaussian_bounds, laf_lp_bounds, lp_bounds,
    multiclass_lp_bounds, robustness_estimate, BoundReport, CalibrationPair,
};
use noisebound_core::geometry::{
    iterative_min_perturbation, linear_min_perturbation, multiclass_linear_min_perturbation, AdversarialResult,
    IterativeConfig,
};
use noisebound_core::models::{
    gradient, train_logistic, train_mlp, Dataset, LogisticConfig, MlpConfig,
};
use noisebound_core::noise::signal_dependent_sigma;
use noisebound_core::quantize::min_bits_preserving_label;
use noisebound_core::rng::derive_seed;
use noisebound_core::robustness::{robustness_radius, RobustnessResult, SearchMode};
use noisebound_core::{
    BoundConstants, Classifier, CovarianceSpec, Exponent, Model, MulticlassLinearModel, NoiseModel, RobustnessQuery,
};
use rayon::prelude::*;

use crate::config::{DatasetSource, ExperimentConfig, ExperimentKind, GaussianNoise, ModelSource};
use crate::data::{blob_images, make_multiclass_blobs};
use crate::error::{Error, Result};
use crate::io::{read_covariance, read_dataset_csv, read_idx, read_model};
use crate::report::{ExperimentReport, ReportRow};

/// Relative bracket width at which bisection stops.
const BISECTION_TOL: f64 = 1e-3;

/// A trained (or loaded) model and the points it is evaluated on.
pub struct Prepared {
    pub model: Model,
    pub train_accuracy: Option<f64>,
    pub test: Dataset,
}

pub fn load_dataset(source: &DatasetSource) -> Result<Dataset> {
    match source {
        DatasetSource::Blobs {
            d,
            n,
            separation,
            classes,
            seed,
        } => make_multiclass_blobs(*d, *n, *classes, *separation, *seed),
        DatasetSource::BlobImages { n, seed } => blob_images(*n, *seed),
        DatasetSource::Csv { path } => read_dataset_csv(path),
        DatasetSource::Idx { images, labels } => read_idx(images, labels),
    }
}

/// Trains (or loads) the configured model.
pub fn build_model(source: &ModelSource, train: &Dataset, seed: u64) -> Result<(Model, Option<f64>)> {
    let numeric = |e: noisebound_core::Error| match e {
        noisebound_core::Error::InvalidDataset(m) => Error::Data(m),
        other => Error::Numeric(other),
    };
    match source {
        ModelSource::Logistic { epochs, learning_rate } if train.classes() == 2 => {
            let config = LogisticConfig {
                learning_rate: *learning_rate,
                epochs: *epochs,
                seed,
            };
            let (m, s) = train_logistic(train, &config).map_err(numeric)?;
            Ok((m.into(), Some(s.accuracy)))
        }
        ModelSource::Logistic { epochs, learning_rate } => {
            let config = MlpConfig {
                hidden: Vec::new(),
                learning_rate: *learning_rate,
                epochs: *epochs,
                seed,
            };
            let (net, s) = train_mlp(train, &config).map_err(numeric)?;
            let layer = &net.layers()[0];
            let rows = layer.weights().chunks(layer.inputs()).map(<[f64]>::to_vec).collect();
            let model = MulticlassLinearModel::new(rows, layer.biases().to_vec())?;
            Ok((model.into(), Some(s.accuracy)))
        }
        ModelSource::Mlp {
            hidden,
            epochs,
            learning_rate,
        } => {
            let config = MlpConfig {
                hidden: hidden.clone(),
                learning_rate: *learning_rate,
                epochs: *epochs,
                seed,
            };
            let (m, s) = train_mlp(train, &config).map_err(numeric)?;
            Ok((m.into(), Some(s.accuracy)))
        }
        ModelSource::File { path } => Ok((read_model(path)?, None)),
    }
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let data = load_dataset(&config.dataset)?;
    let trained = !matches!(config.model, ModelSource::File { .. });
    if trained && data.len() <= config.test_points {
        return Err(Error::config(format!(
            "dataset has {} points, not enough to hold out {} test points and train",
            data.len(),
            config.test_points
        )));
    }
    let cut = data.len().saturating_sub(config.test_points);
    let (train, test) = data.split_at(cut);
    let (model, train_accuracy) = build_model(&config.model, &train, derive_seed(config.seed, 0x7a1))?;
    if model.dim() != test.dim() {
        return Err(Error::data(format!(
            "model expects dimension {}, data has {}",
            model.dim(),
            test.dim()
        )));
    }
    Ok(Prepared {
        model,
        train_accuracy,
        test,
    })
}

/// Minimal perturbation: closed form for hyperplane models, iterative search
/// otherwise.
pub fn adversarial(model: &Model, x: &[f64], p: Exponent) -> Result<AdversarialResult> {
    Ok(match model {
        Model::Linear(m) => linear_min_perturbation(m, x, p)?,
        Model::MulticlassLinear(m) => multiclass_linear_min_perturbation(m, x, p)?,
        Model::Mlp(m) => iterative_min_perturbation(m, x, p, &IterativeConfig::default())?,
    })
}

fn is_linear(model: &Model) -> bool {
    !matches!(model, Model::Mlp(_))
}

/// Bisection from `start` for hyperplane models, a grid up to `start·√d` otherwise.
pub fn default_search(model: &Model, start: f64, d: usize) -> SearchMode {
    if is_linear(model) {
        SearchMode::Bisection {
            alpha_lo: start,
            alpha_hi: 2.0 * start,
            tol: BISECTION_TOL,
        }
    } else {
        SearchMode::grid(start, start * (d as f64).sqrt().max(2.0))
    }
}

/// Boundary normal at the adversarial point, used by the LAF bounds.
fn normal_at_boundary(model: &Model, x: &[f64], adv: &AdversarialResult) -> Result<Vec<f64>> {
    let k = model.label(x)?;
    let xstar: Vec<f64> = x.iter().zip(&adv.r_star).map(|(a, b)| a + b).collect();
    Ok(gradient(model, &xstar, Some((adv.target_class, k)))?)
}

fn lp_bound(
    model: &Model,
    x: &[f64],
    adv: &AdversarialResult,
    config: &ExperimentConfig,
) -> Result<BoundReport> {
    let p = adv.p;
    Ok(match model {
        Model::Linear(m) => lp_bounds(m.weights(), p, config.epsilon, &config.constants, false)?,
        Model::MulticlassLinear(m) => multiclass_lp_bounds(m, x, p, config.epsilon, &config.constants)?,
        Model::Mlp(_) => laf_lp_bounds(
            &normal_at_boundary(model, x, adv)?,
            p,
            config.epsilon,
            config.gamma,
            config.eta.unwrap_or(f64::INFINITY),
            adv.norm,
            &config.constants,
        )?,
    })
}

fn gaussian_bound(
    model: &Model,
    x: &[f64],
    adv: &AdversarialResult,
    sigma: &CovarianceSpec,
    config: &ExperimentConfig,
) -> Result<BoundReport> {
    Ok(match model {
        Model::Linear(m) => gaussian_bounds(m.weights(), sigma, config.epsilon)?,
        Model::MulticlassLinear(m) => {
            let k = m.strict_label(x)?;
            gaussian_bounds(&m.weight_difference(k, adv.target_class), sigma, config.epsilon)?
        }
        Model::Mlp(_) => laf_gaussian_bounds(
            &normal_at_boundary(model, x, adv)?,
            sigma,
            config.epsilon,
            config.gamma,
            config.eta.unwrap_or(f64::INFINITY),
            adv.norm,
        )?,
    })
}

fn fmt_extra(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

fn radius_row(
    point_id: usize,
    setting: String,
    epsilon: f64,
    adv: &AdversarialResult,
    radius: &RobustnessResult,
    bound: &BoundReport,
    estimate: f64,
) -> ReportRow {
    let lower = bound.lower * adv.norm;
    let upper = bound.upper * adv.norm;
    ReportRow {
        point_id,
        setting,
        eps: epsilon,
        r_star: adv.norm,
        radius: radius.radius,
        lower,
        upper,
        estimate,
        within_bounds: lower <= radius.radius && radius.radius <= upper,
        extra: String::new(),
        p: Some(adv.p),
        factor: bound.factor,
        whiteness: None,
    }
    .with_extra(fmt_extra(&[
        ("factor", bound.factor.to_string()),
        ("p_hat", radius.p_hat_at_radius.to_string()),
        ("valid", bound.valid.to_string()),
    ]))
}

#[derive(Default)]
struct PointOutcome {
    rows: Vec<ReportRow>,
    skipped: Vec<String>,
}

fn eval_parallel<F>(test: &Dataset, f: F) -> Result<(Vec<ReportRow>, Vec<String>)>
where
    F: Fn(usize, &[f64]) -> Result<PointOutcome> + Sync,
{
    let outcomes: Vec<Result<PointOutcome>> = test
        .samples()
        .par_iter()
        .enumerate()
        .map(|(id, x)| f(id, x))
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        let outcome = outcome?;
        rows.extend(outcome.rows);
        skipped.extend(outcome.skipped);
    }
    Ok((rows, skipped))
}

/// Skips a point for a per-point numeric condition instead of failing the run.
fn skippable(e: &Error) -> Option<String> {
    match e {
        Error::Numeric(inner) => match inner {
            noisebound_core::Error::OnBoundary
            | noisebound_core::Error::ArgmaxTie(..)
            | noisebound_core::Error::EmptySupport
            | noisebound_core::Error::NullDirection
            | noisebound_core::Error::ZeroWeight => Some(inner.to_string()),
            _ => None,
        },
        _ => None,
    }
}

/// Uniform ℓp noise for every `p` in the grid.
pub fn run_lp_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let prepared = prepare(config)?;
    run_lp_on(config, &prepared)
}

pub fn run_lp_on(config: &ExperimentConfig, prepared: &Prepared) -> Result<ExperimentReport> {
    let model = &prepared.model;
    let d = model.dim();
    let (rows, skipped) = eval_parallel(&prepared.test, |id, x| {
        let mut out = PointOutcome::default();
        let point_seed = derive_seed(config.seed, id as u64);
        for (j, &p) in config.p_grid.iter().enumerate() {
            let attempt = || -> Result<Option<ReportRow>> {
                let adv = adversarial(model, x, p)?;
                if !adv.converged {
                    return Ok(None);
                }
                let bound = lp_bound(model, x, &adv, config)?;
                let query = RobustnessQuery {
                    x: x.to_vec(),
                    noise: NoiseModel::Lp(p),
                    epsilon: config.epsilon,
                    n_samples: config.n_samples,
                    seed: derive_seed(point_seed, j as u64),
                    search: default_search(model, adv.norm, d),
                };
                let radius = robustness_radius(model, &query)?;
                let estimate = robustness_estimate(p, d, adv.norm, config.constants.zeta0)?;
                Ok(Some(radius_row(id, p.to_string(), config.epsilon, &adv, &radius, &bound, estimate)))
            };
            match attempt() {
                Ok(Some(row)) => out.rows.push(row),
                Ok(None) => out.skipped.push(format!("point {id}, p={p}: adversarial search did not converge")),
                Err(e) => match skippable(&e) {
                    Some(reason) => out.skipped.push(format!("point {id}, p={p}: {reason}")),
                    None => return Err(e),
                },
            }
        }
        Ok(out)
    })?;
    Ok(ExperimentReport::new(ExperimentKind::Lp, config, prepared, rows, skipped))
}

/// Gaussian noise with a white, signal-dependent or fixed covariance.
pub fn run_gaussian_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.epsilon >= 1.0 / 3.0 {
        return Err(Error::config("the Gaussian bounds need epsilon < 1/3"));
    }
    let prepared = prepare(config)?;
    run_gaussian_on(config, &prepared)
}

pub fn run_gaussian_on(config: &ExperimentConfig, prepared: &Prepared) -> Result<ExperimentReport> {
    let model = &prepared.model;
    let d = model.dim();
    let fixed = match &config.noise {
        GaussianNoise::White => Some(CovarianceSpec::white(d)?),
        GaussianNoise::File { path } => {
            let sigma = read_covariance(path)?;
            if sigma.dim() != d {
                return Err(Error::data(format!("covariance is {}×{0}, data has d = {d}", sigma.dim())));
            }
            Some(sigma)
        }
        GaussianNoise::SignalDependent { .. } => None,
    };
    let (rows, skipped) = eval_parallel(&prepared.test, |id, x| {
        let mut out = PointOutcome::default();
        let attempt = || -> Result<Option<ReportRow>> {
            let (sigma, whiteness, setting) = match (&config.noise, &fixed) {
                (GaussianNoise::SignalDependent { threshold }, _) => {
                    let s = signal_dependent_sigma(x, *threshold)?;
                    (s.sigma, Some(s.whiteness), format!("signal_dependent:{threshold}"))
                }
                (GaussianNoise::White, Some(s)) => (s.clone(), None, "white".to_string()),
                (_, Some(s)) => (s.clone(), None, "file".to_string()),
                (_, None) => unreachable!("fixed covariance is loaded above"),
            };
            let adv = adversarial(model, x, Exponent::TWO)?;
            if !adv.converged {
                return Ok(None);
            }
            let bound = gaussian_bound(model, x, &adv, &sigma, config)?;
            let query = RobustnessQuery {
                x: x.to_vec(),
                noise: NoiseModel::gaussian(sigma),
                epsilon: config.epsilon,
                n_samples: config.n_samples,
                seed: derive_seed(config.seed, id as u64),
                search: default_search(model, 0.1 * adv.norm, d),
            };
            let radius = robustness_radius(model, &query)?;
            let mut row = radius_row(id, setting, config.epsilon, &adv, &radius, &bound, bound.factor * adv.norm);
            row.whiteness = whiteness;
            if let Some(w) = whiteness {
                row.extra = format!("{};whiteness={w}", row.extra);
            }
            Ok(Some(row))
        };
        match attempt() {
            Ok(Some(row)) => out.rows.push(row),
            Ok(None) => out.skipped.push(format!("point {id}: adversarial search did not converge")),
            Err(e) => match skippable(&e) {
                Some(reason) => out.skipped.push(format!("point {id}: {reason}")),
                None => return Err(e),
            },
        }
        Ok(out)
    })?;
    Ok(ExperimentReport::new(ExperimentKind::Gaussian, config, prepared, rows, skipped))
}

/// Predicted versus measured bit depth on 8-bit images.
pub fn run_quantization_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let prepared = prepare(config)?;
    run_quantization_on(config, &prepared)
}

pub fn run_quantization_on(config: &ExperimentConfig, prepared: &Prepared) -> Result<ExperimentReport> {
    let model = &prepared.model;
    if prepared.test.samples().iter().flatten().any(|v| !(0.0..=255.0).contains(v)) {
        return Err(Error::data("quantization needs pixel values in [0, 255]"));
    }
    let (rows, skipped) = eval_parallel(&prepared.test, |id, x| {
        let mut out = PointOutcome::default();
        let attempt = || -> Result<Option<ReportRow>> {
            let adv = adversarial(model, x, Exponent::Infinity)?;
            if !adv.converged {
                return Ok(None);
            }
            let q = min_bits_preserving_label(
                model,
                x,
                adv.norm,
                config.constants.zeta0,
                config.dither,
                derive_seed(config.seed, id as u64),
            )?;
            let depth = q.predicted_depth as f64;
            Ok(Some(ReportRow {
                point_id: id,
                setting: "bits".into(),
                eps: config.epsilon,
                r_star: adv.norm,
                radius: q.measured_bits as f64,
                lower: depth - 1.0,
                upper: depth + 1.0,
                estimate: q.predicted_bits,
                within_bounds: q.agreed_within_one_bit,
                extra: fmt_extra(&[
                    ("log2_r_star", adv.norm.log2().to_string()),
                    ("levels", q.predicted_levels.to_string()),
                    ("depth", q.predicted_depth.to_string()),
                ]),
                p: Some(Exponent::Infinity),
                factor: f64::NAN,
                whiteness: None,
            }))
        };
        match attempt() {
            Ok(Some(row)) => out.rows.push(row),
            Ok(None) => out.skipped.push(format!("point {id}: adversarial search did not converge")),
            Err(e) => match skippable(&e) {
                Some(reason) => out.skipped.push(format!("point {id}: {reason}")),
                None => return Err(e),
            },
        }
        Ok(out)
    })?;
    Ok(ExperimentReport::new(ExperimentKind::Quantization, config, prepared, rows, skipped))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    match config.experiment {
        ExperimentKind::Lp => run_lp_experiment(config),
        ExperimentKind::Gaussian => run_gaussian_experiment(config),
        ExperimentKind::Quantization => run_quantization_experiment(config),
    }
}

/// Least-squares `ζ₀` over the finite-radius rows of an ℓp report.
pub fn fitted_zeta0(rows: &[ReportRow], d: usize) -> Option<f64> {
    let pairs: Vec<CalibrationPair> = rows
        .iter()
        .filter(|r| r.radius.is_finite())
        .filter_map(|r| {
            Some(CalibrationPair {
                empirical_radius: r.radius,
                p: r.p?,
                d,
                r_star_norm: r.r_star,
            })
        })
        .collect();
    calibrate_zeta0(&pairs).ok()
}

/// Radius over `‖r*‖` divided by the geometry factor, per finite row.
pub fn normalized_ratios(rows: &[ReportRow]) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.radius.is_finite() && r.factor.is_finite())
        .map(|r| r.radius / r.r_star / r.factor)
        .collect()
}

/// Fits `C₀, c₀` so the ℓp band covers every observed normalized ratio with
/// the given relative margin, and `ζ₀` by least squares.
pub fn calibrate_constants(report: &ExperimentReport, margin: f64) -> Result<BoundConstants> {
    let ratios = normalized_ratios(&report.rows);
    let zeta0 = fitted_zeta0(&report.rows, report.summary.dimension)
        .ok_or_else(|| Error::data("no finite radii to calibrate on"))?;
    Ok(BoundConstants::calibrate(&ratios, report.summary.epsilon, margin, zeta0)?)
}
