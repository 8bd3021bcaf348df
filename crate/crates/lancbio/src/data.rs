//! Labelled feature tables from CSV and IDX files.

use std::path::Path;

use lancbio_core::problems::{Dataset, ProblemError};
use thiserror::Error;

use crate::idx::{load_idx, IdxError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}, line {line}: {message}")]
    Malformed {
        path: String,
        line: u64,
        message: String,
    },
    #[error(transparent)]
    Shape(#[from] ProblemError),
    #[error("{path}: no data rows")]
    Empty { path: String },
}

/// Reads a CSV table with a header row. Every column but the last is a
/// feature; the last is an integer class label.
pub fn load_csv_dataset(path: &Path) -> Result<Dataset, DataError> {
    let name = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| DataError::Csv {
            path: name.clone(),
            source,
        })?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for record in reader.records() {
        let record = record.map_err(|source| DataError::Csv {
            path: name.clone(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |message: String| DataError::Malformed {
            path: name.clone(),
            line,
            message,
        };
        if record.len() < 2 {
            return Err(malformed("need at least one feature and a label".into()));
        }
        let d = record.len() - 1;
        if *dim.get_or_insert(d) != d {
            return Err(malformed(format!(
                "expected {} columns, found {}",
                dim.unwrap() + 1,
                record.len()
            )));
        }
        for field in record.iter().take(d) {
            let v: f64 = field
                .parse()
                .map_err(|_| malformed(format!("bad feature value `{field}`")))?;
            features.push(v);
        }
        let label = &record[d];
        labels.push(
            label
                .parse()
                .map_err(|_| malformed(format!("bad label `{label}`")))?,
        );
    }
    let dim = dim.ok_or(DataError::Empty { path: name })?;
    Ok(Dataset::new(features, labels, dim)?)
}

/// IDX image/label pair as a dataset with pixels in `[0, 1]`.
pub fn load_idx_dataset(images: &Path, labels: &Path) -> Result<Dataset, DataError> {
    let (img, lab) = load_idx(images, labels)?;
    let dim = img.dim();
    Ok(Dataset::new(img.pixels, lab, dim)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn reads_features_and_labels() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,b,label\n0.5,1,2\n-1,2e-1,0").unwrap();
        let d = load_csv_dataset(f.path()).unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.features(), &[0.5, 1.0, -1.0, 0.2]);
        assert_eq!(d.labels(), &[2, 0]);
    }

    #[test]
    fn rejects_ragged_rows_with_line_number() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,b,label\n0.5,1,2\n1,0").unwrap();
        let err = load_csv_dataset(f.path()).unwrap_err();
        assert!(
            matches!(
                err,
                DataError::Csv { .. } | DataError::Malformed { line: 3, .. }
            ),
            "{err}"
        );
    }

    #[test]
    fn rejects_fractional_label() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,label\n0.5,1.5").unwrap();
        assert!(matches!(
            load_csv_dataset(f.path()),
            Err(DataError::Malformed { line: 2, .. })
        ));
    }
}
