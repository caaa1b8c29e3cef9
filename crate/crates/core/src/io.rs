//! Dataset ingestion and bundled data.
//!
//! Input tables are comma-delimited with a header row. One column holds the
//! counts; an optional weight column holds row frequencies and expands a
//! frequency table into one observation per unit of weight. Every other column
//! is a numeric covariate, used in header order after a prepended intercept.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::baselines::UnivariateSample;
use crate::data::Dataset;
use crate::error::{LgnbError, Result};

/// Red mites on apple leaves: `(count, number of leaves)`.
pub const REDMITES_FREQUENCIES: [(u64, u64); 8] = [(0, 70), (1, 38), (2, 17), (3, 10), (4, 9), (5, 3), (6, 2), (7, 1)];

/// The red mites sample, 172 mites on 150 leaves.
pub fn bundled_redmites() -> UnivariateSample {
    UnivariateSample::from_frequencies(&REDMITES_FREQUENCIES)
}

/// Names accepted by [`bundled_dataset`].
pub const BUNDLED: [&str; 1] = ["redmites"];

/// A bundled dataset as an intercept-only regression dataset.
pub fn bundled_dataset(name: &str) -> Option<Dataset> {
    match name {
        "redmites" => {
            let y = bundled_redmites().y().to_vec();
            let covariates = vec![Vec::new(); y.len()];
            Dataset::from_covariates(y, &covariates).ok()
        }
        _ => None,
    }
}

/// A parsed table before it is turned into a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub y: Vec<u64>,
    pub covariate_names: Vec<String>,
    /// One row of covariates per observation.
    pub covariates: Vec<Vec<f64>>,
}

impl CountTable {
    pub fn into_dataset(self) -> Result<Dataset> {
        if self.y.is_empty() {
            return Err(LgnbError::Ingestion {
                location: "table".into(),
                message: "no observations".into(),
            });
        }
        Dataset::from_covariates(self.y, &self.covariates)?.with_names(self.covariate_names)
    }

    pub fn into_sample(self) -> UnivariateSample {
        UnivariateSample::new(self.y)
    }
}

fn ingestion(location: String, message: impl Into<String>) -> LgnbError {
    LgnbError::Ingestion {
        location,
        message: message.into(),
    }
}

fn parse_count(cell: &str, what: &str, location: impl Fn() -> String) -> Result<u64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| ingestion(location(), format!("{what} {cell:?} is not a number")))?;
    if v < 0.0 {
        return Err(ingestion(location(), format!("negative {what} {v}")));
    }
    if !v.is_finite() || v.fract() != 0.0 || v > 2f64.powi(53) {
        return Err(ingestion(location(), format!("{what} {v} is not a whole number")));
    }
    Ok(v as u64)
}

/// Parse a table from any reader. `response` names the count column; when it is
/// `None` the first column is used.
pub fn read_table<R: Read>(reader: R, response: Option<&str>, weight: Option<&str>) -> Result<CountTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| ingestion("header".into(), e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ingestion("header".into(), format!("missing column {name:?}")))
    };
    if headers.is_empty() {
        return Err(ingestion("header".into(), "no columns"));
    }
    let y_col = match response {
        Some(name) => find(name)?,
        None => 0,
    };
    let w_col = weight.map(find).transpose()?;
    if w_col == Some(y_col) {
        return Err(ingestion("header".into(), "response and weight are the same column"));
    }
    let cov_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != y_col && Some(c) != w_col).collect();
    let mut table = CountTable {
        y: Vec::new(),
        covariate_names: cov_cols.iter().map(|&c| headers[c].to_string()).collect(),
        covariates: Vec::new(),
    };
    for (k, record) in rdr.records().enumerate() {
        // header is line 1
        let line = k + 2;
        let record = record.map_err(|e| ingestion(format!("line {line}"), e.to_string()))?;
        let headers = &headers;
        let at = |c: usize| move || format!("line {line}, column {:?}", &headers[c]);
        let cell = |c: usize| record.get(c).unwrap_or("");
        let y = parse_count(cell(y_col), "count", at(y_col))?;
        let reps = match w_col {
            Some(c) => parse_count(cell(c), "weight", at(c))?,
            None => 1,
        };
        let mut row = Vec::with_capacity(cov_cols.len());
        for &c in &cov_cols {
            let v: f64 = cell(c)
                .parse()
                .map_err(|_| ingestion(at(c)(), format!("{:?} is not a number", cell(c))))?;
            if !v.is_finite() {
                return Err(ingestion(at(c)(), format!("{v} is not finite")));
            }
            row.push(v);
        }
        for _ in 0..reps {
            table.y.push(y);
            table.covariates.push(row.clone());
        }
    }
    Ok(table)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| ingestion(path.display().to_string(), e.to_string()))
}

/// Load a regression dataset; the intercept column is prepended.
pub fn load_csv(path: impl AsRef<Path>, response: Option<&str>, weight: Option<&str>) -> Result<Dataset> {
    read_table(open(path.as_ref())?, response, weight)?.into_dataset()
}

/// Load the count column (expanded by `weight`) as an iid sample.
pub fn load_csv_sample(path: impl AsRef<Path>, response: Option<&str>, weight: Option<&str>) -> Result<UnivariateSample> {
    Ok(read_table(open(path.as_ref())?, response, weight)?.into_sample())
}

/// Lower-case hex SHA-256 of a file.
pub fn sha256_hex(path: impl AsRef<Path>) -> Result<String> {
    let mut file = open(path.as_ref())?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher)?;
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// [`load_csv`] after checking the file against an expected SHA-256.
pub fn load_csv_verified(
    path: impl AsRef<Path>,
    expected_sha256: &str,
    response: Option<&str>,
    weight: Option<&str>,
) -> Result<Dataset> {
    let actual = sha256_hex(path.as_ref())?;
    if !actual.eq_ignore_ascii_case(expected_sha256.trim()) {
        return Err(ingestion(
            path.as_ref().display().to_string(),
            format!("checksum mismatch: expected {expected_sha256}, got {actual}"),
        ));
    }
    load_csv(path, response, weight)
}
