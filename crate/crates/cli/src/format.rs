//! The tensor interchange file: a small JSON document carrying one complex
//! tensor plus enough metadata to rebuild a network spec.
//!
//! Design choices: text over binary because desk-scale tensors are tiny and
//! diffability wins; entries as `[re, im]` pairs in row-major order so the
//! file is readable without tooling; shortest-round-trip float printing so a
//! parse/serialize cycle is bit-identical for finite values.
//!
//! Axis conventions match the library: chain site tensors are
//! `(phys, left, right)`, torus tensors are `(phys, left, down, right, up)`,
//! matrices are `(row, col)`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ndarray::{Array3, Array5};
use serde::{Deserialize, Serialize};
use tncanon_core::{ComplexMatrix, C64};

pub const FORMAT_VERSION: u32 = 1;

/// What the entries describe, which fixes the expected shape rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorKind {
    Mps,
    Peps,
    Matrix,
}

impl TensorKind {
    fn rank(self) -> usize {
        match self {
            TensorKind::Mps => 3,
            TensorKind::Peps => 5,
            TensorKind::Matrix => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            TensorKind::Mps => "mps",
            TensorKind::Peps => "peps",
            TensorKind::Matrix => "matrix",
        }
    }
}

/// Optional descriptive fields. None of them affect the numerics; commands
/// take lattice sizes from flags so a file never silently changes a verdict.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_h: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_v: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<String>,
    /// Anything else a producer wants to record (seeds, provenance).
    #[serde(default, flatten, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl Metadata {
    fn is_empty(&self) -> bool {
        self.name.is_none()
            && self.d.is_none()
            && self.d_h.is_none()
            && self.d_v.is_none()
            && self.boundary.is_none()
            && self.extra.is_empty()
    }
}

/// One tensor on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    pub format_version: u32,
    pub kind: TensorKind,
    pub shape: Vec<usize>,
    /// Complex entries as `[re, im]`, row-major over `shape`.
    pub entries: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Metadata::is_empty")]
    pub metadata: Metadata,
}

/// Everything that can go wrong between a path and a validated tensor.
/// All of it maps to the parse exit code.
#[derive(Debug)]
pub enum FormatError {
    Io { path: String, message: String },
    Json { path: String, message: String },
    Invalid { path: String, message: String },
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::Io { path, message } => write!(f, "{path}: {message}"),
            FormatError::Json { path, message } => write!(f, "{path}: {message}"),
            FormatError::Invalid { path, message } => write!(f, "{path}: {message}"),
        }
    }
}

impl std::error::Error for FormatError {}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

impl TensorFile {
    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let text = std::fs::read_to_string(path).map_err(|e| FormatError::Io {
            path: path_str(path),
            message: e.to_string(),
        })?;
        // serde_json errors already carry "at line L column C".
        let file: TensorFile = serde_json::from_str(&text).map_err(|e| FormatError::Json {
            path: path_str(path),
            message: e.to_string(),
        })?;
        file.validate(path)?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| FormatError::Json {
            path: path_str(path),
            message: e.to_string(),
        })?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| FormatError::Io {
            path: path_str(path),
            message: e.to_string(),
        })
    }

    fn invalid(&self, path: &Path, message: String) -> FormatError {
        FormatError::Invalid {
            path: path_str(path),
            message,
        }
    }

    fn validate(&self, path: &Path) -> Result<(), FormatError> {
        if self.format_version != FORMAT_VERSION {
            return Err(self.invalid(
                path,
                format!(
                    "unrecognized format version {} (this build reads {FORMAT_VERSION})",
                    self.format_version
                ),
            ));
        }
        if self.shape.len() != self.kind.rank() {
            return Err(self.invalid(
                path,
                format!(
                    "kind {} needs {} axes, shape has {}",
                    self.kind.name(),
                    self.kind.rank(),
                    self.shape.len()
                ),
            ));
        }
        if self.shape.iter().any(|&s| s == 0) {
            return Err(self.invalid(path, "shape has a zero axis".into()));
        }
        let total: usize = self.shape.iter().product();
        if self.entries.len() != total {
            return Err(self.invalid(
                path,
                format!(
                    "shape {:?} holds {total} entries, file has {}",
                    self.shape,
                    self.entries.len()
                ),
            ));
        }
        if let Some(k) = self
            .entries
            .iter()
            .position(|e| !e[0].is_finite() || !e[1].is_finite())
        {
            return Err(self.invalid(path, format!("non-finite entry at flat index {k}")));
        }
        if self.kind == TensorKind::Peps
            && (self.shape[1] != self.shape[3] || self.shape[2] != self.shape[4])
        {
            return Err(self.invalid(
                path,
                format!(
                    "torus tensor needs matching leg pairs, shape is {:?} (axes are phys, left, down, right, up)",
                    self.shape
                ),
            ));
        }
        Ok(())
    }

    fn complex_entries(&self) -> Vec<C64> {
        self.entries.iter().map(|e| C64::new(e[0], e[1])).collect()
    }

    pub fn to_matrix(&self, path: &Path) -> Result<ComplexMatrix, FormatError> {
        if self.kind != TensorKind::Matrix {
            return Err(self.invalid(
                path,
                format!("expected a matrix file, found kind {}", self.kind.name()),
            ));
        }
        ComplexMatrix::from_shape_vec((self.shape[0], self.shape[1]), self.complex_entries())
            .map_err(|e| self.invalid(path, e.to_string()))
    }

    pub fn to_mps_site(&self, path: &Path) -> Result<Array3<C64>, FormatError> {
        if self.kind != TensorKind::Mps {
            return Err(self.invalid(
                path,
                format!("expected an mps file, found kind {}", self.kind.name()),
            ));
        }
        Array3::from_shape_vec(
            (self.shape[0], self.shape[1], self.shape[2]),
            self.complex_entries(),
        )
        .map_err(|e| self.invalid(path, e.to_string()))
    }

    pub fn to_peps_tensor(&self, path: &Path) -> Result<Array5<C64>, FormatError> {
        if self.kind != TensorKind::Peps {
            return Err(self.invalid(
                path,
                format!("expected a peps file, found kind {}", self.kind.name()),
            ));
        }
        Array5::from_shape_vec(
            (
                self.shape[0],
                self.shape[1],
                self.shape[2],
                self.shape[3],
                self.shape[4],
            ),
            self.complex_entries(),
        )
        .map_err(|e| self.invalid(path, e.to_string()))
    }

    pub fn from_matrix(m: &ComplexMatrix, name: &str) -> Self {
        TensorFile {
            format_version: FORMAT_VERSION,
            kind: TensorKind::Matrix,
            shape: vec![m.nrows(), m.ncols()],
            entries: m.iter().map(|z| [z.re, z.im]).collect(),
            metadata: Metadata {
                name: Some(name.to_string()),
                ..Metadata::default()
            },
        }
    }

    pub fn from_mps_site(a: &Array3<C64>, name: &str) -> Self {
        let sh = a.shape();
        TensorFile {
            format_version: FORMAT_VERSION,
            kind: TensorKind::Mps,
            shape: sh.to_vec(),
            entries: a.iter().map(|z| [z.re, z.im]).collect(),
            metadata: Metadata {
                name: Some(name.to_string()),
                d: Some(sh[0]),
                boundary: Some("periodic".to_string()),
                ..Metadata::default()
            },
        }
    }

    pub fn from_peps_tensor(a: &Array5<C64>, name: &str) -> Self {
        let sh = a.shape();
        TensorFile {
            format_version: FORMAT_VERSION,
            kind: TensorKind::Peps,
            shape: sh.to_vec(),
            entries: a.iter().map(|z| [z.re, z.im]).collect(),
            metadata: Metadata {
                name: Some(name.to_string()),
                d: Some(sh[0]),
                d_h: Some(sh[1]),
                d_v: Some(sh[2]),
                ..Metadata::default()
            },
        }
    }
}
