//! Delimiter-separated file formats.
//!
//! Data files hold one observation per row with `p` numeric columns. The
//! delimiter is sniffed from the first content line (comma, tab, semicolon,
//! or whitespace). A single leading header row is detected by a non-numeric
//! first line and skipped. Lines starting with `#` are comments; matrix
//! files carry a `# rows=P cols=P` comment that is validated when present.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::data::DataMatrix;
use crate::error::DataError;
use crate::sim::ErrorReport;

/// Parsed table plus any `# rows= cols=` declaration found in comments.
struct Table {
    rows: Vec<Vec<f64>>,
    declared: Option<(usize, usize)>,
}

fn sniff_delimiter(line: &str) -> char {
    for cand in [',', '\t', ';'] {
        if line.contains(cand) {
            return cand;
        }
    }
    ' '
}

fn split_fields(line: &str, delim: char) -> Vec<&str> {
    if delim == ' ' {
        line.split_whitespace().collect()
    } else {
        line.split(delim).map(str::trim).collect()
    }
}

fn parse_comment_shape(line: &str) -> Option<(usize, usize)> {
    let mut rows = None;
    let mut cols = None;
    for token in line.trim_start_matches('#').split_whitespace() {
        if let Some(v) = token.strip_prefix("rows=") {
            rows = v.parse::<usize>().ok();
        } else if let Some(v) = token.strip_prefix("cols=") {
            cols = v.parse::<usize>().ok();
        }
    }
    match (rows, cols) {
        (Some(r), Some(c)) => Some((r, c)),
        _ => None,
    }
}

fn parse_table(text: &str) -> Result<Table, DataError> {
    let mut declared = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut delim: Option<char> = None;
    let mut expected_fields: Option<usize> = None;
    let mut saw_content = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if declared.is_none() {
                declared = parse_comment_shape(line);
            }
            continue;
        }
        let d = *delim.get_or_insert_with(|| sniff_delimiter(line));
        let fields = split_fields(line, d);
        if fields.is_empty() {
            continue;
        }

        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if let Some(expected) = expected_fields {
                    if values.len() != expected {
                        return Err(DataError::Ragged {
                            line: line_no,
                            expected,
                            actual: values.len(),
                        });
                    }
                } else {
                    expected_fields = Some(values.len());
                }
                for (col, v) in values.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(DataError::NonFinite {
                            row: rows.len(),
                            col,
                        });
                    }
                }
                rows.push(values);
                saw_content = true;
            }
            Err(e) => {
                // A non-numeric first content line is a header; anywhere
                // else it is an error.
                if !saw_content && rows.is_empty() {
                    saw_content = true;
                    continue;
                }
                return Err(DataError::Parse {
                    line: line_no,
                    msg: format!("could not parse numeric field: {e}"),
                });
            }
        }
    }

    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(Table { rows, declared })
}

/// Parses observation data from a string.
pub fn parse_data_str(text: &str) -> Result<DataMatrix, DataError> {
    let table = parse_table(text)?;
    DataMatrix::from_rows(&table.rows)
}

/// Parses a matrix from a string, validating the `# rows= cols=` comment
/// when present.
pub fn parse_matrix_str(text: &str) -> Result<Array2<f64>, DataError> {
    let table = parse_table(text)?;
    let actual_rows = table.rows.len();
    let actual_cols = table.rows[0].len();
    if let Some((rows, cols)) = table.declared {
        if rows != actual_rows || cols != actual_cols {
            return Err(DataError::HeaderMismatch {
                rows,
                cols,
                actual_rows,
                actual_cols,
            });
        }
    }
    let flat: Vec<f64> = table.rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((actual_rows, actual_cols), flat)
        .expect("consistent row lengths checked during parsing"))
}

/// Reads an observation matrix from a file.
pub fn read_data_matrix(path: &Path) -> Result<DataMatrix, DataError> {
    parse_data_str(&fs::read_to_string(path)?)
}

/// Reads a matrix from a file.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>, DataError> {
    parse_matrix_str(&fs::read_to_string(path)?)
}

/// Renders a matrix with its `# rows= cols=` comment line.
pub fn format_matrix(m: &Array2<f64>) -> String {
    let mut out = format!("# rows={} cols={}\n", m.nrows(), m.ncols());
    for row in m.rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Writes a matrix to a file.
pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<(), DataError> {
    fs::write(path, format_matrix(m))?;
    Ok(())
}

/// Writes an experiment report to a file.
pub fn write_report(path: &Path, report: &ErrorReport) -> Result<(), DataError> {
    fs::write(path, report.to_csv())?;
    Ok(())
}
