//! Wire formats shared by the CLI and the C API. Complex entries are
//! `[re, im]` pairs; bare numbers are accepted as reals. Indices are 1-based
//! on the wire.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c, CMat, Field, C64};
use crate::mapmodel::{MapError, MapSpec};
use crate::pattern::{Pattern, Remainder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JsonError {
    #[error("malformed JSON: {0}")]
    Parse(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

impl From<serde_json::Error> for JsonError {
    fn from(e: serde_json::Error) -> Self {
        JsonError::Parse(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Pair([f64; 2]),
    Real(f64),
}

impl Scalar {
    pub fn value(self) -> C64 {
        match self {
            Scalar::Pair([a, b]) => c(a, b),
            Scalar::Real(a) => c(a, 0.0),
        }
    }
}

impl From<C64> for Scalar {
    fn from(v: C64) -> Self {
        Scalar::Pair([v.re, v.im])
    }
}

pub fn pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub field: Field,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Scalar>,
}

impl MatrixJson {
    pub fn from_mat(m: &CMat, field: Field) -> MatrixJson {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| Scalar::from(m[(i, j)]))).collect();
        MatrixJson { field, rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_mat(&self) -> Result<CMat, JsonError> {
        if self.data.len() != self.rows * self.cols {
            return Err(JsonError::Shape(format!(
                "{} entries for a {}x{} matrix",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        let vals: Vec<C64> = self.data.iter().map(|s| s.value()).collect();
        if self.field == Field::Real && vals.iter().any(|v| v.im != 0.0) {
            return Err(JsonError::Shape("imaginary entry in a real matrix".into()));
        }
        Ok(CMat::from_row_slice(self.rows, self.cols, &vals))
    }
}

/// A map given by exactly one of its matricization or its Choi matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFile {
    pub n: usize,
    pub q: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<Field>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matricization: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choi: Option<MatrixJson>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapForm {
    Matricization,
    Choi,
}

impl MapFile {
    pub fn parse(text: &str) -> Result<MapFile, JsonError> {
        Ok(serde_json::from_str(text)?)
    }

    /// `field` overrides the file's field when given.
    pub fn to_spec(&self, field: Option<Field>) -> Result<MapSpec, JsonError> {
        let (m, form) = match (&self.matricization, &self.choi) {
            (Some(m), None) => (m, MapForm::Matricization),
            (None, Some(m)) => (m, MapForm::Choi),
            _ => return Err(JsonError::Shape("give exactly one of matricization or choi".into())),
        };
        let field = field.or(self.field).unwrap_or(m.field);
        let mat = m.to_mat()?;
        Ok(match form {
            MapForm::Matricization => MapSpec::from_matricization(self.n, self.q, field, mat)?,
            MapForm::Choi => MapSpec::from_choi(self.n, self.q, field, mat)?,
        })
    }

    pub fn from_spec(spec: &MapSpec, form: MapForm) -> MapFile {
        let field = spec.field();
        let (matricization, choi) = match form {
            MapForm::Matricization => (Some(MatrixJson::from_mat(spec.matricization(), field)), None),
            MapForm::Choi => (None, Some(MatrixJson::from_mat(spec.choi(), field))),
        };
        MapFile { n: spec.n(), q: spec.q(), field: Some(field), matricization, choi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternJson {
    pub n: usize,
    pub q: usize,
    pub positions: Vec<[usize; 2]>,
    /// `zero`, `single` or `hetero`.
    pub remainder: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<Scalar>>,
}

impl PatternJson {
    pub fn from_pattern(p: &Pattern) -> PatternJson {
        let positions = p.positions.iter().map(|&(i, j)| [i + 1, j + 1]).collect();
        let (remainder, alpha) = match &p.remainder {
            Remainder::AllZero => ("zero", None),
            Remainder::SingleL0 { alpha } => ("single", Some(alpha.iter().map(|&a| Scalar::from(a)).collect())),
            Remainder::Heterogeneous => ("hetero", None),
        };
        PatternJson { n: p.n, q: p.q, positions, remainder: remainder.to_string(), alpha }
    }

    pub fn to_pattern(&self) -> Result<Pattern, JsonError> {
        let positions: Vec<(usize, usize)> = self
            .positions
            .iter()
            .map(|&[i, j]| {
                if i == 0 || j == 0 || i > self.n || j > self.q {
                    Err(JsonError::Shape(format!("position ({i}, {j}) outside 1..={} x 1..={}", self.n, self.q)))
                } else {
                    Ok((i - 1, j - 1))
                }
            })
            .collect::<Result<_, _>>()?;
        let remainder = match (self.remainder.as_str(), &self.alpha) {
            ("zero", _) => Remainder::AllZero,
            ("hetero", _) => Remainder::Heterogeneous,
            ("single", Some(a)) => {
                if a.len() != positions.len() {
                    return Err(JsonError::Shape(format!("alpha has {} entries for m = {}", a.len(), positions.len())));
                }
                Remainder::SingleL0 { alpha: a.iter().map(|s| s.value()).collect() }
            }
            ("single", None) => return Err(JsonError::Shape("single remainder needs alpha".into())),
            (other, _) => return Err(JsonError::Shape(format!("unknown remainder {other:?}"))),
        };
        let p = Pattern::new(self.n, self.q, positions, remainder);
        if !p.is_valid() {
            return Err(JsonError::Shape("positions must be distinct".into()));
        }
        Ok(p)
    }
}
