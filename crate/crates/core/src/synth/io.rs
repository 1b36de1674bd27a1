use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Parses headerless comma-separated rows of equal arity.
pub fn parse_samples(text: &str) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    let mut arity = None;
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = *arity.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(Error::RaggedRow {
                line: lineno,
                expected,
                found: fields.len(),
            });
        }
        for field in fields {
            let v = field.parse::<f64>().map_err(|_| Error::NonNumericField {
                line: lineno,
                field: field.to_string(),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = arity.ok_or(Error::EmptyDataset)?;
    Ok(Array2::from_shape_vec((rows, cols), data).expect("rows share one arity"))
}

/// Reads a sample file; `d` is inferred from the first row.
pub fn load_samples(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_samples(&text)
}

/// Renders rows in the sample-file format (shortest round-trip decimals).
pub fn format_samples(data: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in data.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_samples(path: impl AsRef<Path>, data: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_samples(data)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_by_two() {
        let m = parse_samples("1,2\n3,4\n").unwrap();
        assert_eq!(m, array![[1.0, 2.0], [3.0, 4.0]]);
    }

    #[test]
    fn empty_file() {
        let err = parse_samples("").unwrap_err();
        assert_eq!(err.to_string(), "empty dataset");
    }

    #[test]
    fn ragged_names_line() {
        let err = parse_samples("1,2\n3\n").unwrap_err();
        assert!(matches!(err, Error::RaggedRow { line: 2, .. }));
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn non_numeric_field() {
        let err = parse_samples("1,2\n3,x\n").unwrap_err();
        assert!(matches!(err, Error::NonNumericField { line: 2, .. }));
    }

    #[test]
    fn format_round_trips() {
        let m = array![[0.1, -2.5e-12], [1e300, 3.0]];
        assert_eq!(parse_samples(&format_samples(&m)).unwrap(), m);
    }
}
