//! JSON problem files.
//!
//! ```json
//! {
//!   "m": 2, "n": 2,
//!   "A": [1.0, 2.0, 3.0, 4.0],
//!   "f": [{"h": "square", "b": 1.0}, {"h": "square"}],
//!   "g": [{"h": "abs", "c": 0.1}, {"h": "abs", "c": 0.1}]
//! }
//! ```
//!
//! `A` is either a row-major array of `m * n` numbers or a path (relative to
//! the problem file) to a Matrix Market or raw binary matrix.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::binary::{read_binary_matrix, write_binary_matrix, MAGIC};
use super::mtx::read_matrix_market;
use crate::error::{Error, Result};
use crate::model::{FunctionTerm, GraphFormProblem, SeparableFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Inline(Vec<f64>),
    Path(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub m: usize,
    pub n: usize,
    #[serde(rename = "A")]
    pub a: MatrixSource,
    pub f: Vec<FunctionTerm>,
    pub g: Vec<FunctionTerm>,
}

fn field_err(name: &str, field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Parse {
        source_name: name.to_string(),
        message: format!("field `{field}`: {msg}"),
    }
}

impl ProblemFile {
    pub fn from_problem(p: &GraphFormProblem) -> Self {
        let a = p.matrix();
        let mut data = Vec::with_capacity(a.len());
        for i in 0..a.nrows() {
            data.extend(a.row(i).iter());
        }
        ProblemFile {
            m: p.m(),
            n: p.n(),
            a: MatrixSource::Inline(data),
            f: p.f().terms.clone(),
            g: p.g().terms.clone(),
        }
    }

    /// Validates and builds the problem. Matrix paths resolve against
    /// `base_dir`; `name` labels error messages.
    pub fn into_problem(self, name: &str, base_dir: &Path) -> Result<GraphFormProblem> {
        let (m, n) = (self.m, self.n);
        let a = match self.a {
            MatrixSource::Inline(data) => {
                if data.len() != m * n {
                    return Err(field_err(
                        name,
                        "A",
                        format!("expected m * n = {} values, found {}", m * n, data.len()),
                    ));
                }
                if data.iter().any(|v| !v.is_finite()) {
                    return Err(field_err(name, "A", "contains non-finite values"));
                }
                DMatrix::from_row_slice(m, n, &data)
            }
            MatrixSource::Path(p) => {
                let path = base_dir.join(&p);
                let a = load_matrix(&path).map_err(|e| field_err(name, "A", e))?;
                if a.shape() != (m, n) {
                    return Err(field_err(
                        name,
                        "A",
                        format!("matrix file is {} x {}, but m = {m}, n = {n}", a.nrows(), a.ncols()),
                    ));
                }
                a
            }
        };
        for (field, terms, want, dim) in [("f", &self.f, m, "m"), ("g", &self.g, n, "n")] {
            if terms.len() != want {
                return Err(field_err(
                    name,
                    field,
                    format!("expected {dim} = {want} terms, found {}", terms.len()),
                ));
            }
            for (i, t) in terms.iter().enumerate() {
                t.validate().map_err(|r| field_err(name, &format!("{field}[{i}]"), r))?;
            }
        }
        GraphFormProblem::new(a, SeparableFunction::new(self.f), SeparableFunction::new(self.g))
    }
}

pub fn parse_problem(text: &str, name: &str, base_dir: &Path) -> Result<GraphFormProblem> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        source_name: name.to_string(),
        message: e.to_string(),
    })?;
    file.into_problem(name, base_dir)
}

pub fn read_problem_file(path: &Path) -> Result<GraphFormProblem> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    parse_problem(&text, &path.display().to_string(), &base)
}

/// Writes `p` with the matrix inline.
pub fn write_problem_file(path: &Path, p: &GraphFormProblem) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &ProblemFile::from_problem(p)).map_err(|e| Error::Io(e.into()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes `p` with the matrix in a raw binary file next to it.
pub fn write_problem_file_with_matrix(path: &Path, matrix_path: &Path, p: &GraphFormProblem) -> Result<()> {
    write_binary_matrix(BufWriter::new(File::create(matrix_path)?), p.matrix())?;
    let rel = match (matrix_path.parent(), path.parent()) {
        (Some(a), Some(b)) if a == b => matrix_path.file_name().map(PathBuf::from),
        _ => None,
    }
    .unwrap_or_else(|| matrix_path.to_path_buf());
    let mut file = ProblemFile::from_problem(p);
    file.a = MatrixSource::Path(rel.display().to_string());
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &file).map_err(|e| Error::Io(e.into()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Loads a Matrix Market or raw binary matrix, detected by the magic bytes.
pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let name = path.display().to_string();
    let mut bytes = Vec::new();
    File::open(path)
        .map_err(|e| Error::Parse {
            source_name: name.clone(),
            message: e.to_string(),
        })?
        .read_to_end(&mut bytes)?;
    if bytes.starts_with(MAGIC) {
        read_binary_matrix(&bytes[..], &name)
    } else {
        read_matrix_market(BufReader::new(&bytes[..]), &name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BaseFunction;

    const LASSO: &str = r#"{
        "m": 2, "n": 2,
        "A": [1.0, 2.0, 3.0, 4.0],
        "f": [{"h": "square", "b": 1.0}, {"h": "square"}],
        "g": [{"h": "abs", "c": 0.1}, {"h": "abs", "c": 0.1}]
    }"#;

    #[test]
    fn parses_with_defaults() {
        let p = parse_problem(LASSO, "t", Path::new(".")).unwrap();
        assert_eq!(p.matrix()[(1, 0)], 3.0);
        let t = p.f().terms[0];
        assert_eq!((t.h, t.a, t.b, t.c, t.d, t.e), (BaseFunction::Square, 1.0, 1.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn wrong_g_length_names_field() {
        let bad = LASSO.replace(r#", {"h": "abs", "c": 0.1}]"#, "]");
        let e = parse_problem(&bad, "t", Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("field `g`") && e.contains("n = 2"), "{e}");
    }

    #[test]
    fn wrong_a_length_and_bad_term() {
        let e = parse_problem(&LASSO.replace(", 4.0]", "]"), "t", Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("field `A`"), "{e}");
        let e = parse_problem(&LASSO.replace(r#""c": 0.1}]"#, r#""c": -1}]"#), "t", Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(e.contains("field `g[1]`"), "{e}");
        let e = parse_problem(&LASSO.replace("abs", "abx"), "t", Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("line"), "{e}");
    }

    #[test]
    fn round_trip_inline() {
        let p = parse_problem(LASSO, "t", Path::new(".")).unwrap();
        let text = serde_json::to_string(&ProblemFile::from_problem(&p)).unwrap();
        let q = parse_problem(&text, "t", Path::new(".")).unwrap();
        assert_eq!(p.matrix(), q.matrix());
        assert_eq!(p.f(), q.f());
        assert_eq!(p.g(), q.g());
    }
}
