//! JSON problem-instance files.
//!
//! ```json
//! {
//!   "A": [[1.0, 0.0], [0.0, 1.0]],
//!   "b": [1.0, 2.0],
//!   "blocks": [[0], [1]],
//!   "penalty": {"kind": "log", "lambda": 0.0005, "eps_bar": 0.1}
//! }
//! ```
//!
//! `A` is either row-major nested arrays or `{"path", "rows", "cols"}`
//! naming a little-endian float64 blob (row-major, path relative to the JSON
//! file). A matrix right-hand side `"B"` (nested, `n×t`) replaces `"b"` and
//! selects the column-major matrix least-squares loss. Block indices are
//! 0-based. `"x_true"` is optional and only carried along for reporting.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockPartition, LeastSquares, MatrixLeastSquares, Penalty, Problem, SmoothLoss};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PenaltySpec {
    Log { lambda: f64, eps_bar: f64 },
    SmoothedLp { lambda: f64, p: f64 },
}

impl PenaltySpec {
    pub fn build(&self) -> Result<Penalty> {
        match *self {
            PenaltySpec::Log { lambda, eps_bar } => Penalty::log(lambda, eps_bar),
            PenaltySpec::SmoothedLp { lambda, p } => Penalty::smoothed_lp(lambda, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobRef {
    pub path: PathBuf,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixField {
    Nested(Vec<Vec<f64>>),
    Blob(BlobRef),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    #[serde(rename = "A")]
    a: MatrixField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    b_matrix: Option<Vec<Vec<f64>>>,
    blocks: Vec<Vec<usize>>,
    penalty: PenaltySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_true: Option<Vec<f64>>,
}

/// Right-hand side of the least-squares loss.
#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Vector(Vec<f64>),
    Matrix(Array2<f64>),
}

/// In-memory instance data, convertible to a [`Problem`].
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceData {
    pub a: Array2<f64>,
    pub rhs: Rhs,
    pub blocks: Vec<Vec<usize>>,
    pub penalty: PenaltySpec,
    pub x_true: Option<Vec<f64>>,
}

impl InstanceData {
    pub fn dim(&self) -> usize {
        match &self.rhs {
            Rhs::Vector(_) => self.a.ncols(),
            Rhs::Matrix(b) => self.a.ncols() * b.ncols(),
        }
    }

    pub fn to_problem(&self) -> Result<Problem> {
        let loss: Arc<dyn SmoothLoss> = match &self.rhs {
            Rhs::Vector(b) => Arc::new(LeastSquares::new(self.a.clone(), b.clone())?),
            Rhs::Matrix(b) => Arc::new(MatrixLeastSquares::new(self.a.clone(), b.clone())?),
        };
        let partition = BlockPartition::new(self.blocks.clone(), self.dim())?;
        Problem::new(loss, self.penalty.build()?, partition)
    }

    /// Serialise to `path`. With `blob` set, `A` goes to `<path>.A.bin` next to
    /// the JSON file. Both files are written atomically.
    pub fn write(&self, path: &Path, blob: bool) -> Result<()> {
        let a = if blob {
            let blob_path = sibling(path, "A.bin");
            let mut bytes = Vec::with_capacity(self.a.len() * 8);
            for v in self.a.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            write_atomic(&blob_path, &bytes)?;
            MatrixField::Blob(BlobRef {
                path: PathBuf::from(blob_path.file_name().expect("sibling has a file name")),
                rows: self.a.nrows(),
                cols: self.a.ncols(),
            })
        } else {
            MatrixField::Nested(nested(&self.a))
        };
        let (b, b_matrix) = match &self.rhs {
            Rhs::Vector(b) => (Some(b.clone()), None),
            Rhs::Matrix(b) => (None, Some(nested(b))),
        };
        let file = InstanceFile {
            a,
            b,
            b_matrix,
            blocks: self.blocks.clone(),
            penalty: self.penalty,
            x_true: self.x_true.clone(),
        };
        let mut text = serde_json::to_string(&file).map_err(|e| Error::Parse(e.to_string()))?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json(&text, dir)
    }

    /// Parse instance JSON; blob paths resolve against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: InstanceFile = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Parse(format!("instance field '{}': {}", e.path(), e.inner())))?;
        let a = match file.a {
            MatrixField::Nested(rows) => from_nested("A", &rows)?,
            MatrixField::Blob(r) => read_blob(&base_dir.join(&r.path), r.rows, r.cols)?,
        };
        let rhs = match (file.b, file.b_matrix) {
            (Some(b), None) => Rhs::Vector(b),
            (None, Some(rows)) => Rhs::Matrix(from_nested("B", &rows)?),
            _ => return Err(Error::Parse("instance needs exactly one of 'b' and 'B'".into())),
        };
        Ok(Self { a, rhs, blocks: file.blocks, penalty: file.penalty, x_true: file.x_true })
    }
}

fn nested(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_nested(field: &str, rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(Error::Parse(format!("instance field '{field}' is empty")));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::Parse(format!(
            "instance field '{field}': row {i} has {} entries, expected {cols}",
            rows[i].len()
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), cols), flat).map_err(|e| Error::Parse(e.to_string()))
}

fn read_blob(path: &Path, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let bytes = fs::read(path)?;
    let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(8));
    if expected != Some(bytes.len()) || rows == 0 || cols == 0 {
        return Err(Error::Parse(format!(
            "blob {} holds {} bytes, expected {rows}x{cols} float64 values",
            path.display(),
            bytes.len()
        )));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Parse(e.to_string()))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

/// Write through a temporary file in the target directory, then rename, so a
/// failed write never leaves a partial file at `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample() -> InstanceData {
        InstanceData {
            a: array![[1.0, 2.0, 0.5], [0.0, -1.0, 3.0]],
            rhs: Rhs::Vector(vec![1.0, 0.25]),
            blocks: vec![vec![0, 2], vec![1]],
            penalty: PenaltySpec::Log { lambda: 0.1, eps_bar: 0.5 },
            x_true: Some(vec![0.0, 1.0, 0.0]),
        }
    }

    #[test]
    fn round_trip_nested_and_blob() {
        let dir = tempfile::tempdir().unwrap();
        let data = sample();
        for blob in [false, true] {
            let path = dir.path().join(format!("inst{blob}.json"));
            data.write(&path, blob).unwrap();
            assert_eq!(InstanceData::read(&path).unwrap(), data);
        }
        assert!(dir.path().join("insttrue.json.A.bin").exists());
    }

    #[test]
    fn matrix_rhs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut data = sample();
        data.rhs = Rhs::Matrix(array![[1.0, 2.0], [3.0, 4.0]]);
        data.blocks = vec![(0..3).collect(), (3..6).collect()];
        let path = dir.path().join("m.json");
        data.write(&path, false).unwrap();
        let back = InstanceData::read(&path).unwrap();
        assert_eq!(back, data);
        assert_eq!(back.to_problem().unwrap().dim(), 6);
    }

    #[test]
    fn parse_errors_name_the_field() {
        let text =
            r#"{"A": [[1.0]], "b": [1.0], "blocks": [[0]], "penalty": {"kind": "log", "lambda": "x", "eps_bar": 1}}"#;
        let msg = InstanceData::from_json(text, Path::new(".")).unwrap_err().to_string();
        assert!(msg.contains("penalty"), "{msg}");
        let text = r#"{"A": [[1.0, 2.0], [1.0]], "b": [1.0, 2.0], "blocks": [[0, 1]], "penalty": {"kind": "log", "lambda": 1, "eps_bar": 1}}"#;
        assert!(InstanceData::from_json(text, Path::new(".")).is_err());
        let text = r#"{"A": [[1.0]], "blocks": [[0]], "penalty": {"kind": "log", "lambda": 1, "eps_bar": 1}}"#;
        assert!(InstanceData::from_json(text, Path::new(".")).is_err());
    }

    #[test]
    fn bad_partition_is_rejected_on_build() {
        let mut data = sample();
        data.blocks = vec![vec![0, 1]];
        assert!(data.to_problem().is_err());
    }
}
