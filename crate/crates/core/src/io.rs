//! Dataset files: a Matrix Market matrix (`PREFIX.mtx`) and a JSON sidecar
//! (`PREFIX.json`) carrying ground truth and generation metadata.
//!
//! Matrices are written in the `array integer general` layout (column-major,
//! one value per line). The reader also accepts `real` values and the
//! `coordinate` layout so files from other tools load.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::models::{self, BinaryDataset, BsbmParams, MixtureModel};

/// Sidecar contents. Every field is optional so unlabeled data can carry one too.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    #[serde(default)]
    pub truth: Option<Vec<usize>>,
    #[serde(default)]
    pub model: Option<MixtureModel>,
    #[serde(default)]
    pub bsbm: Option<BsbmParams>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// `Δμ²` of the model, recorded for convenience.
    #[serde(default)]
    pub delta_mu_sq: Option<f64>,
}

impl Sidecar {
    pub fn from_dataset(ds: &BinaryDataset) -> Self {
        let delta_mu_sq = ds
            .model()
            .filter(|m| m.k() >= 2)
            .and_then(|m| models::separation(m).ok())
            .map(|d| d * d);
        Self {
            truth: ds.truth().map(<[usize]>::to_vec),
            model: ds.model().cloned(),
            bsbm: ds.bsbm().cloned(),
            seed: ds.seed(),
            delta_mu_sq,
        }
    }
}

pub fn matrix_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, "mtx")
}

pub fn sidecar_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, "json")
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn write_matrix_market<W: Write>(out: W, a: &DenseMatrix) -> Result<()> {
    let integral = a.as_slice().iter().all(|v| v.fract() == 0.0);
    let mut w = BufWriter::new(out);
    writeln!(
        w,
        "%%MatrixMarket matrix array {} general",
        if integral { "integer" } else { "real" }
    )?;
    writeln!(w, "{} {}", a.rows(), a.cols())?;
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            let v = a[(i, j)];
            if integral {
                writeln!(w, "{}", v as i64)?;
            } else {
                writeln!(w, "{v:?}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_market<R: BufRead>(input: R) -> Result<DenseMatrix> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty Matrix Market file".into()))??;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::Parse(format!("bad Matrix Market header: {header:?}")));
    }
    let layout = tokens[2].as_str();
    let field = tokens[3].as_str();
    if tokens[4] != "general" {
        return Err(Error::Parse(format!("unsupported symmetry {:?}", tokens[4])));
    }
    if !matches!(field, "integer" | "real" | "pattern") || (field == "pattern" && layout == "array") {
        return Err(Error::Parse(format!("unsupported field {field:?}")));
    }

    let mut body = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        body.push(line);
    }
    let mut it = body.iter();
    let dims_line = it.next().ok_or_else(|| Error::Parse("missing size line".into()))?;
    let dims: Vec<usize> = dims_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad size line {dims_line:?}"))))
        .collect::<Result<_>>()?;

    let parse_value = |t: &str| -> Result<f64> {
        t.parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad value {t:?}")))
    };

    match layout {
        "array" => {
            let [rows, cols] = dims[..] else {
                return Err(Error::Parse(format!("array size line needs 2 values: {dims_line:?}")));
            };
            let values: Vec<f64> = it
                .flat_map(|l| l.split_whitespace())
                .map(parse_value)
                .collect::<Result<_>>()?;
            if values.len() != rows * cols {
                return Err(Error::Parse(format!(
                    "expected {} values, found {}",
                    rows * cols,
                    values.len()
                )));
            }
            let mut a = DenseMatrix::zeros(rows, cols);
            for (idx, v) in values.into_iter().enumerate() {
                a[(idx % rows, idx / rows)] = v;
            }
            DenseMatrix::new(rows, cols, a.into_vec())
        }
        "coordinate" => {
            let [rows, cols, nnz] = dims[..] else {
                return Err(Error::Parse(format!("coordinate size line needs 3 values: {dims_line:?}")));
            };
            let mut a = DenseMatrix::zeros(rows, cols);
            let mut count = 0;
            for l in it {
                let t: Vec<&str> = l.split_whitespace().collect();
                let want = if field == "pattern" { 2 } else { 3 };
                if t.len() != want {
                    return Err(Error::Parse(format!("bad entry line {l:?}")));
                }
                let i: usize = t[0].parse().map_err(|_| Error::Parse(format!("bad row index in {l:?}")))?;
                let j: usize = t[1].parse().map_err(|_| Error::Parse(format!("bad column index in {l:?}")))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(Error::Parse(format!("entry ({i}, {j}) out of bounds")));
                }
                a[(i - 1, j - 1)] = if field == "pattern" { 1.0 } else { parse_value(t[2])? };
                count += 1;
            }
            if count != nnz {
                return Err(Error::Parse(format!("expected {nnz} entries, found {count}")));
            }
            DenseMatrix::new(rows, cols, a.into_vec())
        }
        other => Err(Error::Parse(format!("unsupported layout {other:?}"))),
    }
}

/// Writes `PREFIX.mtx` and `PREFIX.json`.
pub fn write_dataset(prefix: &Path, ds: &BinaryDataset) -> Result<()> {
    write_matrix_market(fs::File::create(matrix_path(prefix))?, ds.matrix())?;
    let mut text = serde_json::to_string_pretty(&Sidecar::from_dataset(ds))?;
    text.push('\n');
    fs::write(sidecar_path(prefix), text)?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("sidecar {}: {e}", path.display())))
}

/// Reads `PREFIX.mtx` and, when present, `PREFIX.json`.
pub fn read_dataset(prefix: &Path) -> Result<BinaryDataset> {
    let file = fs::File::open(matrix_path(prefix))?;
    let matrix = read_matrix_market(BufReader::new(file))?;
    let mut ds = BinaryDataset::new(matrix)?;
    let side = sidecar_path(prefix);
    if side.exists() {
        let sc = read_sidecar(&side)?;
        if let Some(model) = sc.model {
            ds = ds.with_model(model)?;
        }
        if let Some(truth) = sc.truth {
            ds = ds.with_truth(truth)?;
        }
        if let Some(p) = sc.bsbm {
            ds = ds.with_bsbm(p);
        }
        if let Some(seed) = sc.seed {
            ds = ds.with_seed(seed);
        }
    }
    Ok(ds)
}
