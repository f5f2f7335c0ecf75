//! CSV exchange of point sets. Floats are written as `{:.16e}`, which
//! round-trips every double exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Writes a header row followed by one row per record.
pub fn write_csv<W: Write, I>(out: W, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::DimensionMismatch {
                expected: header.len(),
                got: row.len(),
            });
        }
        w.write_record(row.iter().map(|v| format_float(*v))).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

pub fn write_csv_file<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(std::io::BufWriter::new(file), header, rows)
}

/// Column headers `prefix1, …, prefixN`.
pub fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Reads one point per row. A first row that does not parse as numbers is
/// taken as a header. All rows must have the same width.
pub fn read_points<R: Read>(input: R) -> Result<Vec<DVector<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut points: Vec<DVector<f64>> = Vec::new();
    let mut width = None;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", line + 1))),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("row {}: non-finite value", line + 1)));
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Parse(format!("row {}: expected {w} columns, got {}", line + 1, values.len())))
            }
            _ => {}
        }
        points.push(DVector::from_vec(values));
    }
    Ok(points)
}

pub fn read_points_file(path: &Path) -> Result<Vec<DVector<f64>>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_points(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![vec![0.1, -1.0 / 3.0], vec![1e-300, 6.02214076e23]];
        let mut buf = Vec::new();
        write_csv(&mut buf, &["z1", "z2"], rows.clone()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("z1,z2\n"));
        let back = read_points(text.as_bytes()).unwrap();
        for (a, b) in back.iter().zip(&rows) {
            assert_eq!(a.as_slice(), b.as_slice());
        }
    }

    #[test]
    fn header_is_optional() {
        assert_eq!(read_points("1,2\n3,4\n".as_bytes()).unwrap().len(), 2);
        assert_eq!(read_points("a,b\n1,2\n".as_bytes()).unwrap().len(), 1);
        assert!(read_points("a,b\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(read_points("1,2\n3\n".as_bytes()).is_err());
        assert!(read_points("1,2\nx,4\n".as_bytes()).is_err());
        assert!(read_points("1,NaN\n".as_bytes()).is_err());
    }

    #[test]
    fn width_checked_on_write() {
        assert!(write_csv(Vec::new(), &["a"], vec![vec![1.0, 2.0]]).is_err());
    }
}
