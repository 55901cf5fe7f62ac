use noisebound::config::{DatasetSource, ExperimentConfig, ExperimentKind, GaussianNoise, ModelSource};
use noisebound::data::{blob_images, make_blobs, make_multiclass_blobs, IMAGE_SIDE};
use noisebound::experiments::{run_experiment, run_gaussian_experiment};
use noisebound::report::{ExperimentReport, CSV_HEADER};
use noisebound_core::models::{train_logistic, LogisticConfig};
use noisebound_core::Exponent;

fn logistic_accuracy(separation: f64) -> f64 {
    let data = make_blobs(20, 2000, separation, 11).unwrap();
    train_logistic(&data, &LogisticConfig::default()).unwrap().1.accuracy
}

#[test]
fn well_separated_blobs_are_learnable() {
    assert!(logistic_accuracy(6.0) >= 0.95);
}

#[test]
fn coincident_blobs_are_not() {
    let acc = logistic_accuracy(0.0);
    assert!((acc - 0.5).abs() <= 0.05, "accuracy {acc}");
}

#[test]
fn generators_are_deterministic() {
    assert_eq!(make_blobs(7, 50, 2.0, 3).unwrap(), make_blobs(7, 50, 2.0, 3).unwrap());
    assert_ne!(make_blobs(7, 50, 2.0, 3).unwrap(), make_blobs(7, 50, 2.0, 4).unwrap());
    assert_eq!(blob_images(6, 1).unwrap(), blob_images(6, 1).unwrap());
    let many = make_multiclass_blobs(4, 30, 3, 5.0, 0).unwrap();
    assert_eq!(many.classes(), 3);
    assert!(make_blobs(1, 10, 1.0, 0).is_err());
    assert!(make_blobs(3, 1, 1.0, 0).is_err());
}

#[test]
fn images_stay_in_pixel_range() {
    let data = blob_images(40, 2).unwrap();
    assert_eq!(data.dim(), IMAGE_SIDE * IMAGE_SIDE);
    assert!(data.samples().iter().flatten().all(|v| (0.0..=255.0).contains(v)));
    assert_eq!(data.labels().iter().filter(|&&l| l == 1).count(), 20);
}

fn small_lp() -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSource::Blobs {
            d: 30,
            n: 400,
            separation: 4.0,
            classes: 2,
            seed: 5,
        },
        p_grid: vec![Exponent::ONE, Exponent::TWO, Exponent::Infinity],
        n_samples: 1000,
        test_points: 8,
        seed: 17,
        ..ExperimentConfig::default()
    }
}

fn check_rows(report: &ExperimentReport) {
    for row in &report.rows {
        assert!(row.is_consistent(), "{row:?}");
        assert!(row.lower <= row.upper, "{row:?}");
    }
    let ids: Vec<usize> = report.rows.iter().map(|r| r.point_id).collect();
    assert!(ids.windows(2).all(|w| w[0] <= w[1]), "rows ordered by point id");
}

#[test]
fn lp_reports_are_byte_identical_across_runs() {
    let config = small_lp();
    let a = run_experiment(&config).unwrap();
    let b = run_experiment(&config).unwrap();
    assert_eq!(a.csv_string().unwrap(), b.csv_string().unwrap());
    assert_eq!(a.rows.len(), 8 * 3);
    check_rows(&a);
    let header = a.csv_string().unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, CSV_HEADER.join(","));
}

#[test]
fn one_row_per_point_for_a_single_p() {
    let config = ExperimentConfig {
        p_grid: vec![Exponent::TWO],
        test_points: 1,
        ..small_lp()
    };
    let report = run_experiment(&config).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.summary.test_points, 1);
}

#[test]
fn p2_median_ratio_matches_the_calibrated_estimate() {
    let config = ExperimentConfig {
        p_grid: vec![Exponent::TWO],
        test_points: 30,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&config).unwrap();
    let zeta = report.summary.calibrated_zeta0.unwrap();
    let median = report.summary.per_setting[0].median_ratio.unwrap();
    let center = 20.0 * zeta;
    assert!(
        (0.7 * center..=1.3 * center).contains(&median),
        "median ratio {median}, √d·ζ₀ = {center}"
    );
}

#[test]
fn multiclass_and_mlp_pipelines_run() {
    let multi = ExperimentConfig {
        dataset: DatasetSource::Blobs {
            d: 6,
            n: 300,
            separation: 5.0,
            classes: 3,
            seed: 1,
        },
        test_points: 5,
        ..small_lp()
    };
    let report = run_experiment(&multi).unwrap();
    check_rows(&report);
    assert!(report.rows.len() + report.summary.skipped == 15);

    let mlp = ExperimentConfig {
        model: ModelSource::Mlp {
            hidden: vec![6],
            epochs: 100,
            learning_rate: 0.5,
        },
        p_grid: vec![Exponent::TWO],
        test_points: 4,
        gamma: 0.1,
        ..small_lp()
    };
    let report = run_experiment(&mlp).unwrap();
    check_rows(&report);
    assert_eq!(report.rows.len() + report.summary.skipped, 4);
}

#[test]
fn gaussian_signal_dependent_bins_whiteness() {
    let config = ExperimentConfig {
        experiment: ExperimentKind::Gaussian,
        dataset: DatasetSource::BlobImages { n: 120, seed: 3 },
        noise: GaussianNoise::SignalDependent { threshold: 60.0 },
        epsilon: 0.15,
        n_samples: 500,
        test_points: 10,
        ..ExperimentConfig::for_kind(ExperimentKind::Gaussian)
    };
    let config = ExperimentConfig {
        model: ModelSource::Logistic {
            epochs: 100,
            learning_rate: 0.01,
        },
        ..config
    };
    let report = run_gaussian_experiment(&config).unwrap();
    check_rows(&report);
    assert_eq!(report.rows.len() + report.summary.skipped, 10);
    assert!(report.rows.iter().all(|r| r.whiteness.is_some()));
    let binned: usize = report.summary.whiteness_bins.iter().map(|b| b.count).sum();
    assert_eq!(binned, report.rows.iter().filter(|r| r.radius.is_finite()).count());
}

#[test]
fn gaussian_rejects_large_epsilon() {
    let config = ExperimentConfig {
        epsilon: 0.4,
        ..ExperimentConfig::for_kind(ExperimentKind::Gaussian)
    };
    assert_eq!(run_gaussian_experiment(&config).unwrap_err().exit_code(), 2);
}

#[test]
fn quantization_reports_log_r_star() {
    let config = ExperimentConfig {
        dataset: DatasetSource::BlobImages { n: 200, seed: 0 },
        test_points: 6,
        ..ExperimentConfig::for_kind(ExperimentKind::Quantization)
    };
    let report = run_experiment(&config).unwrap();
    check_rows(&report);
    for row in &report.rows {
        assert!(row.extra.contains(&format!("log2_r_star={}", row.r_star.log2())));
        assert!((1.0..=9.0).contains(&row.radius));
    }
    assert!(report.summary.agreement_rate.is_some());
}

#[test]
fn huge_margin_images_need_one_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    // Mean brightness threshold halfway between the two constant images.
    let d = 4;
    let model = noisebound_core::LinearModel::new(vec![1.0; d], -2.0 * 127.5).unwrap();
    noisebound::io::write_model(&path, &model.into()).unwrap();
    let data_path = dir.path().join("d.csv");
    let samples: Vec<Vec<f64>> = (0..6).map(|i| vec![if i % 2 == 0 { 0.0 } else { 255.0 }; d]).collect();
    let labels = (0..6).map(|i| i % 2).collect();
    let data = noisebound_core::models::Dataset::new(samples, labels, 2).unwrap();
    noisebound::io::write_dataset_csv(&data_path, &data).unwrap();
    let config = ExperimentConfig {
        experiment: ExperimentKind::Quantization,
        dataset: DatasetSource::Csv { path: data_path },
        model: ModelSource::File { path },
        test_points: 6,
        ..ExperimentConfig::for_kind(ExperimentKind::Quantization)
    };
    let report = run_experiment(&config).unwrap();
    assert_eq!(report.rows.len(), 6);
    assert!(report.rows.iter().all(|r| r.radius == 1.0));
}
