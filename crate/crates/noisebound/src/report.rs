//! Per-point report rows, aggregates and their on-disk forms.

use std::io::Write;
use std::path::Path;

use noisebound_core::{BoundConstants, Exponent};
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::experiments::{fitted_zeta0, Prepared};

pub const CSV_HEADER: [&str; 10] = [
    "point_id",
    "p_or_sigma",
    "eps",
    "r_star",
    "radius",
    "lower",
    "upper",
    "estimate",
    "within_bounds",
    "extra",
];

/// One (point, setting) measurement. `lower`, `upper` and `estimate` are in
/// the same units as `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub point_id: usize,
    /// The `p` of the noise ball, or a covariance descriptor.
    pub setting: String,
    pub eps: f64,
    pub r_star: f64,
    pub radius: f64,
    pub lower: f64,
    pub upper: f64,
    pub estimate: f64,
    pub within_bounds: bool,
    /// `key=value` pairs separated by `;`.
    pub extra: String,
    pub p: Option<Exponent>,
    /// Bound factor multiplying `‖r*‖`; NaN where it does not apply.
    pub factor: f64,
    pub whiteness: Option<f64>,
}

impl ReportRow {
    pub fn with_extra(mut self, extra: String) -> Self {
        self.extra = extra;
        self
    }

    pub fn ratio(&self) -> f64 {
        self.radius / self.r_star
    }

    /// Whether the stored flag agrees with the stored numbers.
    pub fn is_consistent(&self) -> bool {
        self.within_bounds == (self.lower <= self.radius && self.radius <= self.upper)
    }

    fn record(&self) -> [String; 10] {
        [
            self.point_id.to_string(),
            self.setting.clone(),
            self.eps.to_string(),
            self.r_star.to_string(),
            self.radius.to_string(),
            self.lower.to_string(),
            self.upper.to_string(),
            self.estimate.to_string(),
            self.within_bounds.to_string(),
            self.extra.clone(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingSummary {
    pub setting: String,
    pub rows: usize,
    pub infinite_radii: usize,
    pub median_radius: Option<f64>,
    /// Median of `radius / ‖r*‖`.
    pub median_ratio: Option<f64>,
    pub within_bounds_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhitenessBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: ExperimentKind,
    pub dimension: usize,
    pub epsilon: f64,
    pub test_points: usize,
    pub rows: usize,
    pub skipped: usize,
    pub skipped_reasons: Vec<String>,
    /// Rows whose radius is `+∞`; they are left out of every aggregate below.
    pub infinite_radii: usize,
    pub training_accuracy: Option<f64>,
    pub within_bounds_rate: Option<f64>,
    pub calibrated_zeta0: Option<f64>,
    /// Share of rows whose estimate, rescaled to the calibrated `ζ₀`, lies
    /// within 30% of the radius.
    pub estimate_within_30pct_rate: Option<f64>,
    pub per_setting: Vec<SettingSummary>,
    pub whiteness_bins: Vec<WhitenessBin>,
    pub agreement_rate: Option<f64>,
    pub constants: BoundConstants,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub summary: Summary,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn rate<'a>(rows: impl Iterator<Item = &'a ReportRow>, pred: impl Fn(&ReportRow) -> bool) -> Option<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for r in rows {
        total += 1;
        hit += pred(r) as usize;
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

fn finite(rows: &[ReportRow]) -> impl Iterator<Item = &ReportRow> {
    rows.iter().filter(|r| r.radius.is_finite())
}

fn per_setting(rows: &[ReportRow]) -> Vec<SettingSummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.setting.as_str()) {
            order.push(&r.setting);
        }
    }
    order
        .into_iter()
        .map(|setting| {
            let group: Vec<ReportRow> = rows.iter().filter(|r| r.setting == setting).cloned().collect();
            let mut radii: Vec<f64> = finite(&group).map(|r| r.radius).collect();
            let mut ratios: Vec<f64> = finite(&group).map(ReportRow::ratio).collect();
            SettingSummary {
                setting: setting.to_string(),
                rows: group.len(),
                infinite_radii: group.len() - radii.len(),
                median_radius: median(&mut radii),
                median_ratio: median(&mut ratios),
                within_bounds_rate: rate(finite(&group), |r| r.within_bounds),
            }
        })
        .collect()
}

/// Equal-width bins over the observed whiteness range with the mean ratio in each.
pub fn whiteness_bins(rows: &[ReportRow], bins: usize) -> Vec<WhitenessBin> {
    let points: Vec<(f64, f64)> = finite(rows).filter_map(|r| Some((r.whiteness?, r.ratio()))).collect();
    if points.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut sums = vec![(0usize, 0.0); bins];
    for &(w, ratio) in &points {
        let i = if width > 0.0 {
            (((w - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        sums[i].0 += 1;
        sums[i].1 += ratio;
    }
    sums.into_iter()
        .enumerate()
        .map(|(i, (count, sum))| WhitenessBin {
            lo: lo + i as f64 * width,
            hi: if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width },
            count,
            mean_ratio: (count > 0).then(|| sum / count as f64),
        })
        .collect()
}

impl ExperimentReport {
    pub fn new(
        kind: ExperimentKind,
        config: &ExperimentConfig,
        prepared: &Prepared,
        rows: Vec<ReportRow>,
        skipped_reasons: Vec<String>,
    ) -> Self {
        let dimension = prepared.test.dim();
        let infinite_radii = rows.iter().filter(|r| !r.radius.is_finite()).count();
        let (calibrated_zeta0, estimate_within_30pct_rate) = if kind == ExperimentKind::Lp {
            let zeta = fitted_zeta0(&rows, dimension);
            let scale = zeta.map(|z| z / config.constants.zeta0);
            let within = scale.and_then(|s| {
                rate(finite(&rows), |r| (s * r.estimate - r.radius).abs() <= 0.3 * r.radius)
            });
            (zeta, within)
        } else {
            (None, None)
        };
        let summary = Summary {
            experiment: kind,
            dimension,
            epsilon: config.epsilon,
            test_points: prepared.test.len(),
            rows: rows.len(),
            skipped: skipped_reasons.len(),
            skipped_reasons,
            infinite_radii,
            training_accuracy: prepared.train_accuracy,
            within_bounds_rate: rate(finite(&rows), |r| r.within_bounds),
            calibrated_zeta0,
            estimate_within_30pct_rate,
            per_setting: per_setting(&rows),
            whiteness_bins: if kind == ExperimentKind::Gaussian {
                whiteness_bins(&rows, config.whiteness_bins)
            } else {
                Vec::new()
            },
            agreement_rate: (kind == ExperimentKind::Quantization)
                .then(|| rate(rows.iter(), |r| r.within_bounds))
                .flatten(),
            constants: config.constants,
        };
        ExperimentReport { rows, summary }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row.record()).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn summary_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.summary).map_err(crate::error::Error::data)
    }

    /// Writes `<stem>.csv` and `<stem>.summary.json` next to each other.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(csv_path)?)?;
        std::fs::write(summary_path(csv_path), self.summary_json()? + "\n")?;
        Ok(())
    }
}

pub fn summary_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("summary.json")
}

fn csv_error(e: csv::Error) -> crate::error::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::error::Error::data(format!("{other:?}")),
    }
}
