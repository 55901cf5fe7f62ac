//! Dataset, covariance and model file formats.
//!
//! * Dataset CSV: header `label,f0,...,f{d-1}`, one point per row.
//! * IDX: big-endian; images are magic `0x00000803`, then count, rows and
//!   columns as `u32`, then one unsigned byte per pixel; labels are magic
//!   `0x00000801`, then count, then one byte per label.
//! * Covariance: either plain CSV (one matrix row per line, no header) or the
//!   `NCMAT1` binary layout: the 6 ASCII bytes `NCMAT1`, rows and columns as
//!   little-endian `u64`, then the entries as little-endian `f64`, row-major.
//! * Models: versioned JSON, see [`ModelFile`].

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use noisebound_core::models::{Activation, Dataset, DenseLayer};
use noisebound_core::{CovarianceSpec, LinearModel, MlpModel, Model, MulticlassLinearModel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;
const MATRIX_MAGIC: &[u8; 6] = b"NCMAT1";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Input dataset encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Csv,
    Idx,
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    parse_dataset_csv(BufReader::new(open(path)?))
}

/// Parses the dataset CSV layout; errors name the offending line.
pub fn parse_dataset_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = csv.headers().map_err(|e| Error::data(format!("line 1: {e}")))?.clone();
    if header.get(0).map(str::trim) != Some("label") || header.len() < 2 {
        return Err(Error::data("line 1: header must be `label,f0,...`"));
    }
    for (i, name) in header.iter().enumerate().skip(1) {
        if name.trim() != format!("f{}", i - 1) {
            return Err(Error::data(format!("line 1: expected column `f{}`, found `{name}`", i - 1)));
        }
    }
    let d = header.len() - 1;
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in csv.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::data(format!("line {line}: {e}")))?;
        if record.len() != d + 1 {
            return Err(Error::data(format!(
                "line {line}: expected {} fields, found {}",
                d + 1,
                record.len()
            )));
        }
        let label: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::data(format!("line {line}: bad label `{}`", &record[0])))?;
        let x = record
            .iter()
            .skip(1)
            .map(|f| {
                let v: f64 = f.trim().parse().map_err(|_| Error::data(format!("line {line}: bad value `{f}`")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::data(format!("line {line}: non-finite value")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        samples.push(x);
        labels.push(label);
    }
    Dataset::from_labelled(samples, labels).map_err(Error::data)
}

pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = csv::Writer::from_path(path).map_err(|e| Error::data(e.to_string()))?;
    write_dataset_records(&mut out, data)
}

pub fn write_dataset_records<W: Write>(out: &mut csv::Writer<W>, data: &Dataset) -> Result<()> {
    let csv_err = |e: csv::Error| Error::data(e.to_string());
    let mut header = vec!["label".to_string()];
    header.extend((0..data.dim()).map(|i| format!("f{i}")));
    out.write_record(&header).map_err(csv_err)?;
    for (x, label) in data.iter() {
        let mut row = vec![label.to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn read_u32_be(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::data(format!("truncated IDX header ({what})")))
}

/// Images as flattened row-major pixel vectors, plus `(rows, cols)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Vec<Vec<f64>>, usize, usize)> {
    let magic = read_u32_be(bytes, 0, "magic")?;
    if magic != IDX_IMAGES {
        return Err(Error::data(format!("bad IDX image magic {magic:#010x}")));
    }
    let count = read_u32_be(bytes, 4, "count")? as usize;
    let rows = read_u32_be(bytes, 8, "rows")? as usize;
    let cols = read_u32_be(bytes, 12, "cols")? as usize;
    let d = rows * cols;
    let body = &bytes[16..];
    if body.len() != count * d {
        return Err(Error::data(format!(
            "IDX image payload has {} bytes, header promises {}",
            body.len(),
            count * d
        )));
    }
    let images = body.chunks(d.max(1)).take(count).map(|c| c.iter().map(|&b| b as f64).collect()).collect();
    Ok((images, rows, cols))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = read_u32_be(bytes, 0, "magic")?;
    if magic != IDX_LABELS {
        return Err(Error::data(format!("bad IDX label magic {magic:#010x}")));
    }
    let count = read_u32_be(bytes, 4, "count")? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::data(format!(
            "IDX label payload has {} bytes, header promises {count}",
            body.len()
        )));
    }
    Ok(body.iter().map(|&b| b as usize).collect())
}

pub fn read_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let (x, _, _) = parse_idx_images(&fs::read(images).map_err(|e| Error::data(format!("{}: {e}", images.display())))?)?;
    let y = parse_idx_labels(&fs::read(labels).map_err(|e| Error::data(format!("{}: {e}", labels.display())))?)?;
    if x.len() != y.len() {
        return Err(Error::data(format!("{} images but {} labels", x.len(), y.len())));
    }
    Dataset::from_labelled(x, y).map_err(Error::data)
}

/// Encodes images (pixel values rounded and clamped to bytes) in IDX layout.
pub fn encode_idx_images(images: &[Vec<f64>], rows: usize, cols: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IDX_IMAGES, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        if img.len() != rows * cols {
            return Err(Error::data("image size does not match rows × cols"));
        }
        out.extend(img.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
    }
    Ok(out)
}

pub fn encode_idx_labels(labels: &[usize]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        out.push(u8::try_from(l).map_err(|_| Error::data("IDX labels must fit in a byte"))?);
    }
    Ok(out)
}

/// Reads a covariance matrix, detecting the binary layout by its magic.
pub fn read_covariance(path: &Path) -> Result<CovarianceSpec> {
    let bytes = fs::read(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let (dim, entries) = if bytes.starts_with(MATRIX_MAGIC) {
        parse_matrix_binary(&bytes)?
    } else {
        parse_matrix_csv(&bytes)?
    };
    CovarianceSpec::from_dense(dim, entries).map_err(Error::data)
}

fn parse_matrix_binary(bytes: &[u8]) -> Result<(usize, Vec<f64>)> {
    let (rows, cols, entries) = parse_rect_binary(bytes)?;
    if rows != cols {
        return Err(Error::data(format!("covariance must be square, got {rows}×{cols}")));
    }
    Ok((rows, entries))
}

fn parse_rect_binary(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let dims = bytes.get(6..22).ok_or_else(|| Error::data("truncated matrix header"))?;
    let rows = u64::from_le_bytes(dims[..8].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(dims[8..].try_into().expect("8 bytes")) as usize;
    let body = &bytes[22..];
    if rows.checked_mul(cols).and_then(|n| n.checked_mul(8)) != Some(body.len()) {
        return Err(Error::data("matrix payload length does not match its header"));
    }
    let entries = body.chunks(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((rows, cols, entries))
}

/// Images as rows of a dataset CSV (labels kept) or of a binary matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageSet {
    Labelled(Dataset),
    Matrix(Vec<Vec<f64>>),
}

impl ImageSet {
    pub fn images(&self) -> &[Vec<f64>] {
        match self {
            ImageSet::Labelled(d) => d.samples(),
            ImageSet::Matrix(m) => m,
        }
    }
}

pub fn read_images(path: &Path) -> Result<ImageSet> {
    let bytes = fs::read(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(MATRIX_MAGIC) {
        let (rows, cols, entries) = parse_rect_binary(&bytes)?;
        if rows == 0 || cols == 0 {
            return Err(Error::data("empty image matrix"));
        }
        Ok(ImageSet::Matrix(entries.chunks(cols).map(<[f64]>::to_vec).collect()))
    } else {
        Ok(ImageSet::Labelled(parse_dataset_csv(bytes.as_slice())?))
    }
}

/// Writes `images` in the same layout `like` was read from.
pub fn write_images(path: &Path, like: &ImageSet, images: Vec<Vec<f64>>) -> Result<()> {
    match like {
        ImageSet::Labelled(d) => write_dataset_csv(path, &Dataset::new(images, d.labels().to_vec(), d.classes()).map_err(Error::data)?),
        ImageSet::Matrix(_) => {
            let cols = images.first().map_or(0, Vec::len);
            let mut out = Vec::with_capacity(22 + images.len() * cols * 8);
            out.extend_from_slice(MATRIX_MAGIC);
            out.extend_from_slice(&(images.len() as u64).to_le_bytes());
            out.extend_from_slice(&(cols as u64).to_le_bytes());
            for v in images.iter().flatten() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            fs::write(path, out)?;
            Ok(())
        }
    }
}

fn parse_matrix_csv(bytes: &[u8]) -> Result<(usize, Vec<f64>)> {
    let mut entries = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (i, line) in BufReader::new(bytes).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|_| Error::data(format!("line {}: bad value `{f}`", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(Error::data(format!("line {}: ragged matrix row", i + 1)));
        }
        entries.extend(row);
        rows += 1;
    }
    if cols != Some(rows) {
        return Err(Error::data("covariance must be square"));
    }
    Ok((rows, entries))
}

pub fn encode_matrix_binary(dim: usize, entries: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(22 + entries.len() * 8);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    for v in entries {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_covariance(path: &Path, sigma: &CovarianceSpec, binary: bool) -> Result<()> {
    if binary {
        fs::write(path, encode_matrix_binary(sigma.dim(), sigma.matrix()))?;
    } else {
        let d = sigma.dim();
        let text: String = sigma
            .matrix()
            .chunks(d)
            .map(|row| row.iter().map(f64::to_string).collect::<Vec<_>>().join(",") + "\n")
            .collect();
        fs::write(path, text)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Serialized form of a [`Model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Linear { weights: Vec<f64>, bias: f64 },
    MulticlassLinear { weights: Vec<Vec<f64>>, biases: Vec<f64> },
    Mlp { activation: String, layers: Vec<LayerFile> },
}

/// `{"version": 1, "kind": ..., "dim": d, "classes": L, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub dim: usize,
    pub classes: usize,
    #[serde(flatten)]
    pub model: ModelSpec,
}

impl ModelFile {
    pub fn from_model(model: &Model) -> Self {
        use noisebound_core::Classifier;
        let spec = match model {
            Model::Linear(m) => ModelSpec::Linear {
                weights: m.weights().to_vec(),
                bias: m.bias(),
            },
            Model::MulticlassLinear(m) => ModelSpec::MulticlassLinear {
                weights: (0..m.num_classes()).map(|k| m.class_weights(k).to_vec()).collect(),
                biases: m.biases().to_vec(),
            },
            Model::Mlp(m) => ModelSpec::Mlp {
                activation: m.activation().name().to_string(),
                layers: m
                    .layers()
                    .iter()
                    .map(|l| LayerFile {
                        inputs: l.inputs(),
                        outputs: l.outputs(),
                        weights: l.weights().to_vec(),
                        biases: l.biases().to_vec(),
                    })
                    .collect(),
            },
        };
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            dim: model.dim(),
            classes: model.num_classes(),
            model: spec,
        }
    }

    pub fn into_model(self) -> Result<Model> {
        use noisebound_core::Classifier;
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::data(format!("unsupported model format version {}", self.version)));
        }
        let model: Model = match self.model {
            ModelSpec::Linear { weights, bias } => LinearModel::new(weights, bias).map_err(Error::data)?.into(),
            ModelSpec::MulticlassLinear { weights, biases } => {
                MulticlassLinearModel::new(weights, biases).map_err(Error::data)?.into()
            }
            ModelSpec::Mlp { activation, layers } => {
                let activation = match activation.as_str() {
                    "tanh" => Activation::Tanh,
                    other => return Err(Error::data(format!("unknown activation `{other}`"))),
                };
                let layers = layers
                    .into_iter()
                    .map(|l| DenseLayer::new(l.inputs, l.outputs, l.weights, l.biases))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(Error::data)?;
                MlpModel::new(layers, activation).map_err(Error::data)?.into()
            }
        };
        if model.dim() != self.dim || model.num_classes() != self.classes {
            return Err(Error::data("model header disagrees with its parameters"));
        }
        Ok(model)
    }
}

pub fn read_model(path: &Path) -> Result<Model> {
    let file: ModelFile = serde_json::from_reader(BufReader::new(open(path)?))
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    file.into_model()
}

pub fn write_model(path: &Path, model: &Model) -> Result<()> {
    let text = serde_json::to_string_pretty(&ModelFile::from_model(model)).map_err(Error::data)?;
    fs::write(path, text + "\n")?;
    Ok(())
}
