use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Context, Error, Result};
use crate::impute::MaskedData;
use crate::numerics::Matrix;
use crate::rng::SeedStream;

/// A complete feature matrix with a binary outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub provenance: String,
}

impl Dataset {
    pub fn to_masked(&self) -> Result<MaskedData> {
        MaskedData::from_raw(
            self.x.rows(),
            self.x.cols(),
            self.x.as_slice().to_vec(),
            self.y.clone(),
            Some(self.feature_names.clone()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_rows: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub class_sep: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { n_rows: 2000, n_features: 25, n_informative: 25, class_sep: 1.0, seed: 0 }
    }
}

/// Standard deviation of the noise added to mixed (non-informative)
/// features, which keeps the feature matrix full rank.
const MIX_NOISE: f64 = 0.1;
const LABEL_FLIP: f64 = 0.01;

/// Two-class data in the style of the usual `make_classification` recipe.
///
/// Each class owns one or two Gaussian clusters centred on distinct vertices
/// of the hypercube `[-class_sep, class_sep]^{n_informative}`, each with a
/// random linear covariance. The remaining features are random linear
/// combinations of the informative ones plus a little noise. 1% of labels are
/// flipped, and rows are shuffled. Classes are balanced before flipping.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let &SyntheticSpec { n_rows, n_features, n_informative, class_sep, seed } = spec;
    if n_informative == 0 || n_informative > n_features {
        return Err(Error::invalid(format!("need 1 <= n_informative <= n_features, got {n_informative} of {n_features}")));
    }
    if n_rows < 2 {
        return Err(Error::invalid("need at least 2 rows"));
    }
    if !(class_sep.is_finite() && class_sep > 0.0) {
        return Err(Error::invalid(format!("class_sep {class_sep} must be positive")));
    }
    let mut rng = SeedStream::new(seed).rng();
    let per_class = if n_informative >= 2 { 2 } else { 1 };
    let n_clusters = 2 * per_class;

    // Distinct hypercube vertices, drawn as random bit patterns.
    let mut vertices: Vec<Vec<bool>> = Vec::new();
    while vertices.len() < n_clusters {
        let v: Vec<bool> = (0..n_informative).map(|_| rng.random::<bool>()).collect();
        if !vertices.contains(&v) {
            vertices.push(v);
        }
    }
    let covariances: Vec<Vec<f64>> = (0..n_clusters)
        .map(|_| (0..n_informative * n_informative).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mixing: Vec<f64> =
        (0..n_informative * (n_features - n_informative)).map(|_| rng.random_range(-1.0..1.0)).collect();

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let cluster = i % n_clusters;
        let label = (cluster % 2) as f64;
        let z: Vec<f64> = (0..n_informative).map(|_| StandardNormal.sample(&mut rng)).collect();
        let cov = &covariances[cluster];
        let mut row: Vec<f64> = (0..n_informative)
            .map(|a| {
                let centre = if vertices[cluster][a] { class_sep } else { -class_sep };
                centre + (0..n_informative).map(|b| z[b] * cov[b * n_informative + a]).sum::<f64>()
            })
            .collect();
        for m in 0..n_features - n_informative {
            let mixed: f64 = (0..n_informative).map(|a| row[a] * mixing[a * (n_features - n_informative) + m]).sum();
            let noise: f64 = StandardNormal.sample(&mut rng);
            row.push(mixed + MIX_NOISE * noise);
        }
        let label = if rng.random::<f64>() < LABEL_FLIP { 1.0 - label } else { label };
        rows.push((row, label));
    }
    rows.shuffle(&mut rng);

    let x = Matrix::from_fn(n_rows, n_features, |i, j| rows[i].0[j]);
    Ok(Dataset {
        x,
        y: rows.iter().map(|r| r.1).collect(),
        feature_names: (0..n_features).map(|j| format!("x{j}")).collect(),
        provenance: format!(
            "synthetic(n_rows={n_rows}, n_features={n_features}, n_informative={n_informative}, class_sep={class_sep}, seed={seed})"
        ),
    })
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(Error::from)
        .with_context(|| path.display().to_string())
}

/// Reads a CSV with a header row. Empty feature cells become missing; the
/// outcome column must be complete and binary.
pub fn load_csv(path: impl AsRef<Path>, outcome_column: &str) -> Result<MaskedData> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let target = headers
        .iter()
        .position(|h| h == outcome_column)
        .ok_or_else(|| Error::invalid(format!("{}: no column named {outcome_column:?}", path.display())))?;
    let names: Vec<String> = headers.iter().enumerate().filter(|&(j, _)| j != target).map(|(_, h)| h.clone()).collect();

    let mut values = Vec::new();
    let mut outcome = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        for (j, field) in record.iter().enumerate() {
            if j == target {
                let y = match field {
                    "" => return Err(Error::invalid(format!("row {row}: missing outcome"))),
                    "0" | "0.0" => 0.0,
                    "1" | "1.0" => 1.0,
                    other => return Err(Error::invalid(format!("row {row}: outcome {other:?} is not 0 or 1"))),
                };
                outcome.push(y);
            } else if field.is_empty() {
                values.push(f64::NAN);
            } else {
                let v: f64 = field.parse().map_err(|e| Error::Parse {
                    row,
                    column: headers[j].clone(),
                    message: format!("{field:?}: {e}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse { row, column: headers[j].clone(), message: format!("{field:?} is not finite") });
                }
                values.push(v);
            }
        }
    }
    MaskedData::from_raw(outcome.len(), names.len(), values, outcome, Some(names))
}

/// Reads a fully numeric CSV with a header row into a matrix.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<(Matrix, Vec<String>)> {
    let mut reader = open_csv(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        for (j, field) in record?.iter().enumerate() {
            let v: f64 = field.parse().map_err(|e| Error::Parse {
                row: r + 1,
                column: headers[j].clone(),
                message: format!("{field:?}: {e}"),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    Ok((Matrix::new(rows, headers.len(), values)?, headers))
}

/// Writes features (empty cells where `NaN`) followed by the outcome column.
pub fn write_csv(
    path: impl AsRef<Path>,
    values: &[f64],
    cols: usize,
    feature_names: &[String],
    outcome: &[f64],
    outcome_column: &str,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(Error::from).with_context(|| path.display().to_string())?;
    w.write_record(feature_names.iter().map(String::as_str).chain([outcome_column]))?;
    for (row, y) in values.chunks(cols).zip(outcome) {
        let mut fields: Vec<String> = row.iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() }).collect();
        fields.push(format!("{y}"));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_masked_csv(path: impl AsRef<Path>, data: &MaskedData, outcome_column: &str) -> Result<()> {
    write_csv(path, data.raw_values(), data.cols(), data.feature_names(), data.outcome(), outcome_column)
}
