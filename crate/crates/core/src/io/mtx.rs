//! Matrix Market reader and writer for real dense (`array`) and sparse
//! (`coordinate`) matrices.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Array,
    Coordinate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

struct Parser<'a> {
    name: &'a str,
    line: usize,
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            source_name: self.name.to_string(),
            message: format!("line {}: {}", self.line, msg.into()),
        }
    }

    fn num<T: std::str::FromStr>(&self, tok: Option<&str>, what: &str) -> Result<T> {
        let tok = tok.ok_or_else(|| self.err(format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| self.err(format!("cannot parse {what} from `{tok}`")))
    }
}

/// Reads a Matrix Market matrix into a dense matrix. `name` is used in
/// error messages.
pub fn read_matrix_market<R: BufRead>(reader: R, name: &str) -> Result<DMatrix<f64>> {
    let mut p = Parser { name, line: 0 };
    let mut lines = reader.lines();

    let header = loop {
        p.line += 1;
        match lines.next() {
            Some(l) => {
                let l = l?;
                if !l.trim().is_empty() {
                    break l;
                }
            }
            None => return Err(p.err("empty file")),
        }
    };
    let toks: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if toks.len() < 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(p.err("expected `%%MatrixMarket matrix <layout> <field> <symmetry>` header"));
    }
    let layout = match toks[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(p.err(format!("unsupported layout `{other}`"))),
    };
    let field = match toks[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(p.err(format!("unsupported field `{other}`"))),
    };
    let symmetry = match toks[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(p.err(format!("unsupported symmetry `{other}`"))),
    };
    if layout == Layout::Array && field == Field::Pattern {
        return Err(p.err("pattern field requires coordinate layout"));
    }

    // Data lines, skipping comments and blanks.
    let mut next_data = |p: &mut Parser| -> Result<Option<String>> {
        for l in lines.by_ref() {
            p.line += 1;
            let l = l?;
            let t = l.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            return Ok(Some(t.to_string()));
        }
        Ok(None)
    };

    let size = next_data(&mut p)?.ok_or_else(|| p.err("missing size line"))?;
    let mut it = size.split_whitespace();
    let rows: usize = p.num(it.next(), "row count")?;
    let cols: usize = p.num(it.next(), "column count")?;
    if symmetry != Symmetry::General && rows != cols {
        return Err(p.err("symmetric storage requires a square matrix"));
    }
    let mut a = DMatrix::zeros(rows, cols);

    match layout {
        Layout::Array => {
            // column-major, lower triangle only when symmetric
            let mut cells = Vec::new();
            for j in 0..cols {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::SkewSymmetric => j + 1,
                };
                for i in start..rows {
                    cells.push((i, j));
                }
            }
            for (i, j) in cells {
                let l = next_data(&mut p)?
                    .ok_or_else(|| p.err(format!("expected {} values, file ended early", rows * cols)))?;
                let v: f64 = p.num(l.split_whitespace().next(), "value")?;
                set(&mut a, i, j, v, symmetry);
            }
        }
        Layout::Coordinate => {
            let nnz: usize = p.num(it.next(), "entry count")?;
            for _ in 0..nnz {
                let l = next_data(&mut p)?
                    .ok_or_else(|| p.err(format!("expected {nnz} entries, file ended early")))?;
                let mut t = l.split_whitespace();
                let i: usize = p.num(t.next(), "row index")?;
                let j: usize = p.num(t.next(), "column index")?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(p.err(format!("index ({i}, {j}) outside {rows} x {cols}")));
                }
                let v = match field {
                    Field::Pattern => 1.0,
                    _ => p.num(t.next(), "value")?,
                };
                let (i, j) = (i - 1, j - 1);
                if symmetry == Symmetry::General {
                    a[(i, j)] += v;
                } else {
                    let cur = a[(i, j)];
                    set(&mut a, i, j, cur + v, symmetry);
                }
            }
        }
    }
    if next_data(&mut p)?.is_some() {
        return Err(p.err("trailing data after the last entry"));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(p.err("matrix contains non-finite values"));
    }
    Ok(a)
}

fn set(a: &mut DMatrix<f64>, i: usize, j: usize, v: f64, sym: Symmetry) {
    a[(i, j)] = v;
    match sym {
        Symmetry::General => {}
        Symmetry::Symmetric => a[(j, i)] = v,
        Symmetry::SkewSymmetric => a[(j, i)] = -v,
    }
}

/// Writes `a` as a general real `array`, using shortest round-trip formatting.
pub fn write_matrix_market_array<W: Write>(mut w: W, a: &DMatrix<f64>) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", a.nrows(), a.ncols())?;
    for v in a.iter() {
        writeln!(w, "{v:?}")?;
    }
    Ok(())
}

/// Writes the nonzeros of `a` as a general real `coordinate` matrix.
pub fn write_matrix_market_coordinate<W: Write>(mut w: W, a: &DMatrix<f64>) -> Result<()> {
    let nnz = a.iter().filter(|v| **v != 0.0).count();
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), nnz)?;
    for (j, col) in a.column_iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            if *v != 0.0 {
                writeln!(w, "{} {} {v:?}", i + 1, j + 1)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<DMatrix<f64>> {
        read_matrix_market(s.as_bytes(), "test")
    }

    #[test]
    fn dense_column_major() {
        let a = read("%%MatrixMarket matrix array real general\n% c\n2 3\n1\n4\n2\n5\n3\n6\n").unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    }

    #[test]
    fn coordinate_with_duplicates_and_pattern() {
        let a = read("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.5\n2 1 -2\n1 1 0.5\n").unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, -2.0, 0.0]));
        let a = read("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 2\n").unwrap();
        assert_eq!(a[(0, 1)], 1.0);
    }

    #[test]
    fn symmetric_variants() {
        let a = read("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 3\n2 1 7\n").unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[3.0, 7.0, 7.0, 0.0]));
        let a = read("%%MatrixMarket matrix array real skew-symmetric\n2 2\n5\n").unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, -5.0, 5.0, 0.0]));
        let a = read("%%MatrixMarket matrix array integer symmetric\n2 2\n1\n2\n3\n").unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
    }

    #[test]
    fn errors_name_the_line() {
        let e = read("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = read("%%MatrixMarket matrix array real general\n2 2\n1\n2\nx\n4\n").unwrap_err();
        assert!(e.to_string().contains("line 5"), "{e}");
        assert!(read("%%MatrixMarket matrix array real general\n2 2\n1\n").is_err());
        assert!(read("hello\n").is_err());
        assert!(read("").is_err());
    }

    #[test]
    fn round_trips() {
        let a = DMatrix::from_row_slice(2, 3, &[0.1, 0.0, -3.25, 1e-300, 7.0, 0.0]);
        let mut buf = Vec::new();
        write_matrix_market_array(&mut buf, &a).unwrap();
        assert_eq!(read(std::str::from_utf8(&buf).unwrap()).unwrap(), a);
        buf.clear();
        write_matrix_market_coordinate(&mut buf, &a).unwrap();
        assert_eq!(read(std::str::from_utf8(&buf).unwrap()).unwrap(), a);
    }
}
