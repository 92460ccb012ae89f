//! Matrix Market (array and coordinate) and CSV ingestion; array-format output.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::CliError;
use crate::densemat::DenseMatrix;
use crate::scalar::{Scalar, ScalarKind};

/// A parsed input; the element kind is uniform per file.
#[derive(Debug, Clone, PartialEq)]
pub enum InputMatrix {
    Real(DenseMatrix<f64>),
    Complex(DenseMatrix<Complex64>),
}

impl InputMatrix {
    pub fn n(&self) -> usize {
        match self {
            Self::Real(a) => a.n(),
            Self::Complex(a) => a.n(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Array,
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Complex,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
    Hermitian,
}

fn parse_err(line: usize, col: usize, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

/// Whitespace-separated tokens of one line with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s + 1, &line[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn num<T: std::str::FromStr>(tok: (usize, &str), line: usize, what: &str) -> Result<T, CliError> {
    tok.1
        .parse()
        .map_err(|_| parse_err(line, tok.0, format!("invalid {what} '{}'", tok.1)))
}

fn parse_header(line: &str) -> Result<(Layout, Field, Symmetry), CliError> {
    let t = tokens(line);
    if t.len() != 5 || !t[0].1.eq_ignore_ascii_case("%%MatrixMarket") {
        return Err(parse_err(1, 1, "missing '%%MatrixMarket matrix <format> <field> <symmetry>' header"));
    }
    if !t[1].1.eq_ignore_ascii_case("matrix") {
        return Err(parse_err(1, t[1].0, format!("unsupported object '{}'", t[1].1)));
    }
    let layout = match t[2].1.to_ascii_lowercase().as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(parse_err(1, t[2].0, format!("unknown format '{other}'"))),
    };
    let field = match t[3].1.to_ascii_lowercase().as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "complex" => Field::Complex,
        "pattern" => Field::Pattern,
        other => return Err(parse_err(1, t[3].0, format!("unknown field '{other}'"))),
    };
    let sym = match t[4].1.to_ascii_lowercase().as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        "hermitian" => Symmetry::Hermitian,
        other => return Err(parse_err(1, t[4].0, format!("unknown symmetry '{other}'"))),
    };
    if layout == Layout::Array && field == Field::Pattern {
        return Err(parse_err(1, t[3].0, "pattern field requires coordinate format"));
    }
    if sym == Symmetry::Hermitian && field != Field::Complex {
        return Err(parse_err(1, t[4].0, "hermitian symmetry requires complex field"));
    }
    Ok((layout, field, sym))
}

/// Parses Matrix Market text into a square dense matrix.
pub fn read_matrix_market(text: &str) -> Result<InputMatrix, CliError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, 1, "empty input"))?;
    let (layout, field, sym) = parse_header(header)?;
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim_start();
        !t.is_empty() && !t.starts_with('%')
    });

    let (size_line, size) = body.next().ok_or_else(|| parse_err(2, 1, "missing size line"))?;
    let st = tokens(size);
    let want = if layout == Layout::Coordinate { 3 } else { 2 };
    if st.len() != want {
        return Err(parse_err(size_line, 1, format!("size line needs {want} integers")));
    }
    let rows: usize = num(st[0], size_line, "row count")?;
    let cols: usize = num(st[1], size_line, "column count")?;
    if rows != cols {
        return Err(CliError::Dimension(format!("matrix must be square, got {rows}x{cols}")));
    }
    if rows == 0 {
        return Err(CliError::Dimension("matrix must have at least one row".into()));
    }
    if sym != Symmetry::General && rows != cols {
        return Err(CliError::Dimension("symmetric storage requires a square matrix".into()));
    }
    let n = rows;
    let width = match field {
        Field::Complex => 2,
        Field::Pattern => 0,
        _ => 1,
    };
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    let value = |t: &[(usize, &str)], line: usize| -> Result<Complex64, CliError> {
        let v = match field {
            Field::Pattern => Complex64::new(1.0, 0.0),
            Field::Integer => Complex64::new(num::<i64>(t[0], line, "integer")? as f64, 0.0),
            Field::Real => Complex64::new(num(t[0], line, "real")?, 0.0),
            Field::Complex => Complex64::new(num(t[0], line, "real part")?, num(t[1], line, "imaginary part")?),
        };
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(parse_err(line, t[0].0, "non-finite value"));
        }
        Ok(v)
    };
    let mut place = |i: usize, j: usize, v: Complex64| {
        data[i * n + j] = v;
        if i != j {
            match sym {
                Symmetry::General => {}
                Symmetry::Symmetric => data[j * n + i] = v,
                Symmetry::SkewSymmetric => data[j * n + i] = -v,
                Symmetry::Hermitian => data[j * n + i] = v.conj(),
            }
        }
    };

    match layout {
        Layout::Coordinate => {
            let nnz: usize = num(st[2], size_line, "entry count")?;
            let mut seen = 0;
            for (ln, l) in body.by_ref() {
                let t = tokens(l);
                if t.len() != 2 + width {
                    return Err(parse_err(ln, 1, format!("expected {} fields, found {}", 2 + width, t.len())));
                }
                let i: usize = num(t[0], ln, "row index")?;
                let j: usize = num(t[1], ln, "column index")?;
                if i == 0 || i > n {
                    return Err(parse_err(ln, t[0].0, format!("row index {i} outside 1..={n}")));
                }
                if j == 0 || j > n {
                    return Err(parse_err(ln, t[1].0, format!("column index {j} outside 1..={n}")));
                }
                if sym != Symmetry::General && j > i {
                    return Err(parse_err(ln, t[0].0, "symmetric storage lists the lower triangle only"));
                }
                place(i - 1, j - 1, value(&t[2..], ln)?);
                seen += 1;
                if seen == nnz {
                    break;
                }
            }
            if seen != nnz {
                return Err(parse_err(size_line, st[2].0, format!("declared {nnz} entries, found {seen}")));
            }
        }
        Layout::Array => {
            // Column-major; symmetric variants store the lower triangle (strictly
            // lower for skew-symmetric).
            let mut slots = Vec::with_capacity(n * n);
            for j in 0..n {
                let first = match sym {
                    Symmetry::General => 0,
                    Symmetry::SkewSymmetric => j + 1,
                    _ => j,
                };
                slots.extend((first..n).map(|i| (i, j)));
            }
            let mut k = 0;
            for (ln, l) in body.by_ref() {
                if k == slots.len() {
                    return Err(parse_err(ln, 1, "more values than the declared size"));
                }
                let t = tokens(l);
                if t.len() != width {
                    return Err(parse_err(ln, 1, format!("expected {width} fields, found {}", t.len())));
                }
                let (i, j) = slots[k];
                place(i, j, value(&t, ln)?);
                k += 1;
            }
            if k != slots.len() {
                return Err(parse_err(size_line, 1, format!("declared {} values, found {k}", slots.len())));
            }
        }
    }
    if let Some((ln, _)) = body.next() {
        return Err(parse_err(ln, 1, "trailing data after the last entry"));
    }
    Ok(if field == Field::Complex {
        InputMatrix::Complex(DenseMatrix::from_fn(n, |i, j| data[i * n + j]))
    } else {
        InputMatrix::Real(DenseMatrix::from_fn(n, |i, j| data[i * n + j].re))
    })
}

/// Parses a headerless CSV of real numbers, one matrix row per record.
pub fn read_csv(text: &str) -> Result<InputMatrix, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, 1, e.to_string())
        })?;
        let line = rec.position().map_or(rows.len() + 1, |p| p.line() as usize);
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, f)| {
                let v: f64 = f
                    .parse()
                    .map_err(|_| parse_err(line, c + 1, format!("invalid real '{f}' in field {}", c + 1)))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(parse_err(line, c + 1, "non-finite value"))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Dimension("matrix must have at least one row".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != rows.len()) {
        return Err(CliError::Dimension(format!(
            "matrix must be square: {} rows but row {} has {} entries",
            rows.len(),
            i + 1,
            r.len()
        )));
    }
    DenseMatrix::from_rows(&rows)
        .map(InputMatrix::Real)
        .map_err(|e| CliError::Dimension(e.to_string()))
}

/// Array-format Matrix Market text with 17 significant digits per value.
pub fn write_matrix_market<S: Scalar>(a: &DenseMatrix<S>) -> String {
    let n = a.n();
    let field = match S::KIND {
        ScalarKind::Real => "real",
        ScalarKind::Complex => "complex",
    };
    let mut out = format!("%%MatrixMarket matrix array {field} general\n{n} {n}\n");
    for j in 0..n {
        for i in 0..n {
            let v = a[(i, j)];
            match S::KIND {
                ScalarKind::Real => writeln!(out, "{:.16e}", v.re()),
                ScalarKind::Complex => writeln!(out, "{:.16e} {:.16e}", v.re(), v.im()),
            }
            .expect("writing to a String");
        }
    }
    out
}
