//! Tabular data loading, validation and 0-1 normalization.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label id marking a point that no cluster rule covers.
pub const UNASSIGNED: i64 = -1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate header name {name:?}")]
    DuplicateHeader { name: String },
    #[error("label column {name:?} not found in header")]
    LabelColumnMissing { name: String },
    #[error("non-numeric value {value:?} at row {row}, column {column:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row} has {got} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("file has no data rows")]
    Empty,
    #[error("file has no feature columns")]
    NoFeatures,
}

/// Original column range recorded by [`normalize`], used to map interval
/// bounds back to the units of the input file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub min: f64,
    pub max: f64,
}

impl FeatureScale {
    /// Map a normalized coordinate back to original units.
    pub fn denormalize(&self, x: f64) -> f64 {
        self.min + x * (self.max - self.min)
    }

    /// Map an original-unit value to the normalized coordinate.
    pub fn normalize(&self, x: f64) -> f64 {
        if self.max > self.min {
            (x - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }
}

/// An N x p matrix of finite feature values, row-major.
#[derive(Debug, Clone)]
pub struct Dataset {
    points: Vec<f64>,
    pub feature_names: Vec<String>,
    n_points: usize,
    n_features: usize,
    /// Present once the dataset has been normalized; one entry per column.
    pub scales: Option<Vec<FeatureScale>>,
}

impl Dataset {
    /// Build a dataset from row-major values. Panics on shape mismatch;
    /// callers construct from already-validated data.
    pub fn from_rows(feature_names: Vec<String>, rows: &[Vec<f64>]) -> Self {
        let n_points = rows.len();
        let n_features = feature_names.len();
        let mut points = Vec::with_capacity(n_points * n_features);
        for row in rows {
            assert_eq!(row.len(), n_features, "row width mismatch");
            points.extend_from_slice(row);
        }
        Self {
            points,
            feature_names,
            n_points,
            n_features,
            scales: None,
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Value of feature `f` for point `i`.
    pub fn value(&self, i: usize, f: usize) -> f64 {
        self.points[i * self.n_features + f]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn column(&self, f: usize) -> Vec<f64> {
        (0..self.n_points).map(|i| self.value(i, f)).collect()
    }

    /// Squared Euclidean distance between points `i` and `j`.
    pub fn dist_sq(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist_sq(i, j).sqrt()
    }
}

/// Cluster or class id per point; [`UNASSIGNED`] marks uncovered points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    pub labels: Vec<i64>,
}

impl LabelVector {
    pub fn new(labels: Vec<i64>) -> Self {
        debug_assert!(labels.iter().all(|&l| l >= 0 || l == UNASSIGNED));
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Indices of points with a real (non-reserved) label.
    pub fn assigned_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != UNASSIGNED)
            .map(|(i, _)| i)
            .collect()
    }

    /// Distinct real labels, ascending.
    pub fn distinct(&self) -> Vec<i64> {
        let mut ids: Vec<i64> = self
            .labels
            .iter()
            .copied()
            .filter(|&l| l != UNASSIGNED)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Load a CSV file with a header row. Every non-label column must parse as a
/// finite real number. If `label_column` names a column, it is removed from
/// the features and returned as dense integer ids in order of first
/// appearance.
pub fn load_csv(
    path: &Path,
    label_column: Option<&str>,
) -> Result<(Dataset, Option<LabelVector>), DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);

    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    for (i, name) in headers.iter().enumerate() {
        if headers[..i].contains(name) {
            return Err(DataError::DuplicateHeader { name: name.clone() });
        }
    }

    let label_idx = match label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::LabelColumnMissing {
                    name: name.to_string(),
                })?,
        ),
        None => None,
    };

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(DataError::NoFeatures);
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(DataError::RaggedRow {
                row: row_no + 1,
                got: record.len(),
                expected: headers.len(),
            });
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (col, cell) in record.iter().enumerate() {
            if Some(col) == label_idx {
                raw_labels.push(cell.trim().to_string());
                continue;
            }
            let parsed = cell.trim().parse::<f64>();
            match parsed {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(DataError::NonNumericCell {
                        row: row_no + 1,
                        column: headers[col].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }

    let labels = label_idx.map(|_| {
        // Dense ids in order of first appearance; deterministic by construction.
        let mut seen: Vec<String> = Vec::new();
        let ids = raw_labels
            .iter()
            .map(|raw| match seen.iter().position(|s| s == raw) {
                Some(id) => id as i64,
                None => {
                    seen.push(raw.clone());
                    (seen.len() - 1) as i64
                }
            })
            .collect();
        LabelVector::new(ids)
    });

    Ok((Dataset::from_rows(feature_names, &rows), labels))
}

/// Rescale every column to [0, 1] via (x - min) / (max - min). Constant
/// columns map to all zeros so downstream division never sees a zero range.
/// Records the original per-column ranges in `scales`.
pub fn normalize(raw: &Dataset) -> Dataset {
    let mut scales = Vec::with_capacity(raw.n_features());
    let mut points = vec![0.0; raw.points.len()];
    for f in 0..raw.n_features() {
        let col = raw.column(f);
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = FeatureScale { min, max };
        for i in 0..raw.n_points() {
            points[i * raw.n_features() + f] = scale.normalize(raw.value(i, f));
        }
        scales.push(scale);
    }
    Dataset {
        points,
        feature_names: raw.feature_names.clone(),
        n_points: raw.n_points,
        n_features: raw.n_features,
        scales: Some(scales),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn load_without_label() {
        let f = write_csv("a,b\n1,2\n3,4\n5,6\n");
        let (ds, labels) = load_csv(f.path(), None).unwrap();
        assert_eq!(ds.n_points(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.value(1, 0), 3.0);
        assert!(labels.is_none());
    }

    #[test]
    fn load_with_label_column() {
        let f = write_csv("a,b\n1,2\n3,4\n5,6\n");
        let (ds, labels) = load_csv(f.path(), Some("b")).unwrap();
        assert_eq!(ds.n_features(), 1);
        assert_eq!(ds.feature_names, vec!["a"]);
        assert_eq!(labels.unwrap().labels, vec![0, 1, 2]);
    }

    #[test]
    fn label_ids_by_first_appearance() {
        let f = write_csv("x,cls\n1,rosa\n2,kama\n3,rosa\n4,canadian\n");
        let (_, labels) = load_csv(f.path(), Some("cls")).unwrap();
        assert_eq!(labels.unwrap().labels, vec![0, 1, 0, 2]);
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let f = write_csv("a,b\n1,abc\n");
        let err = load_csv(f.path(), None).unwrap_err();
        match err {
            DataError::NonNumericCell { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "b");
            }
            other => panic!("expected NonNumericCell, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_header_rejected() {
        let f = write_csv("a,a\n1,2\n");
        assert!(matches!(
            load_csv(f.path(), None),
            Err(DataError::DuplicateHeader { .. })
        ));
    }

    #[test]
    fn missing_label_column_rejected() {
        let f = write_csv("a,b\n1,2\n");
        assert!(matches!(
            load_csv(f.path(), Some("cls")),
            Err(DataError::LabelColumnMissing { .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_csv(Path::new("/nonexistent/x.csv"), None),
            Err(DataError::Io { .. })
        ));
    }

    #[test]
    fn normalize_endpoints() {
        let ds = Dataset::from_rows(vec!["a".into()], &[vec![2.0], vec![4.0], vec![6.0]]);
        let norm = normalize(&ds);
        assert_eq!(norm.column(0), vec![0.0, 0.5, 1.0]);
        let s = &norm.scales.as_ref().unwrap()[0];
        assert_eq!((s.min, s.max), (2.0, 6.0));
    }

    #[test]
    fn normalize_constant_column_to_zero() {
        let ds = Dataset::from_rows(vec!["a".into()], &[vec![5.0], vec![5.0], vec![5.0]]);
        let norm = normalize(&ds);
        assert_eq!(norm.column(0), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_identity_on_unit_range() {
        let ds = Dataset::from_rows(vec!["a".into()], &[vec![0.0], vec![1.0]]);
        assert_eq!(normalize(&ds).column(0), vec![0.0, 1.0]);
    }

    #[test]
    fn normalize_idempotent_and_rank_preserving() {
        let vals = [3.7, -1.2, 9.9, 0.0, 4.4, 4.4, 8.1];
        let rows: Vec<Vec<f64>> = vals.iter().map(|&v| vec![v, -v]).collect();
        let ds = Dataset::from_rows(vec!["a".into(), "b".into()], &rows);
        let once = normalize(&ds);
        let twice = normalize(&once);
        for f in 0..2 {
            let a = once.column(f);
            let b = twice.column(f);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "not idempotent: {x} vs {y}");
            }
            // rank order preserved
            for i in 0..vals.len() {
                for j in 0..vals.len() {
                    let raw_lt = ds.value(i, f) < ds.value(j, f);
                    let norm_lt = a[i] < a[j];
                    assert_eq!(raw_lt, norm_lt);
                }
            }
        }
    }
}
