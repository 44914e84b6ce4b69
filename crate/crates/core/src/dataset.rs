//! Tabular feature datasets.
//!
//! A dataset file is plain CSV: `n` numeric feature columns followed by a
//! trailing integer `COD` column that identifies each row. A single header
//! row is optional and is recognised when none of its cells parse as
//! numbers.
//!
//! ```
//! use metricscope_core::dataset::Dataset;
//!
//! let ds = Dataset::from_csv_str("a,b,COD\n1,2,1\n3,4,2").unwrap();
//! assert_eq!(ds.dimension(), 2);
//! assert_eq!(ds.len(), 2);
//! assert_eq!(ds.stats()[1].max, 4.0);
//! ```

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row identifier taken from the `COD` column.
pub type Cod = i64;

/// One dataset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub cod: Cod,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(cod: Cod, values: Vec<f64>) -> Self {
        Self { cod, values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl AttributeStats {
    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

/// An immutable, validated table of feature vectors.
#[derive(Debug, Clone)]
pub struct Dataset {
    attributes: Vec<String>,
    rows: Vec<FeatureVector>,
    positions: HashMap<Cod, usize>,
    stats: Vec<AttributeStats>,
}

impl Dataset {
    /// Builds a dataset from already-parsed rows, enforcing the same
    /// invariants as the CSV loader.
    pub fn from_rows(attributes: Vec<String>, rows: Vec<FeatureVector>) -> Result<Self> {
        let n = attributes.len();
        if n == 0 {
            return Err(Error::Structure {
                row: 0,
                message: "a dataset needs at least one feature column".into(),
            });
        }
        if rows.is_empty() {
            return Err(Error::Structure {
                row: 0,
                message: "a dataset needs at least one row".into(),
            });
        }
        let mut positions = HashMap::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.values.len() != n {
                return Err(Error::Structure {
                    row: i + 1,
                    message: format!("expected {} features, found {}", n, row.values.len()),
                });
            }
            if let Some(col) = row.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: i + 1,
                    column: col + 1,
                    message: "feature value is not finite".into(),
                });
            }
            if positions.insert(row.cod, i).is_some() {
                return Err(Error::Integrity(format!("duplicate COD {}", row.cod)));
            }
        }
        let stats = compute_stats(n, &rows);
        Ok(Self {
            attributes,
            rows,
            positions,
            stats,
        })
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::from_csv_reader(text.as_bytes())
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn from_csv_reader<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(source);

        let mut attributes: Option<Vec<String>> = None;
        let mut width: Option<usize> = None;
        let mut rows = Vec::new();

        for (i, record) in reader.records().enumerate() {
            let line = i + 1;
            let record = record.map_err(|e| Error::Structure {
                row: line,
                message: e.to_string(),
            })?;
            if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
                continue;
            }

            if i == 0 && is_header(&record) {
                let names: Vec<String> = record.iter().map(str::to_owned).collect();
                check_header(&names)?;
                width = Some(names.len());
                attributes = Some(names[..names.len() - 1].to_vec());
                continue;
            }

            let expected = *width.get_or_insert(record.len());
            if record.len() != expected {
                return Err(Error::Structure {
                    row: line,
                    message: format!("expected {} fields, found {}", expected, record.len()),
                });
            }
            if expected < 2 {
                return Err(Error::Structure {
                    row: line,
                    message: "rows need at least one feature and a trailing COD".into(),
                });
            }
            rows.push(parse_row(&record, line)?);
        }

        let width = width.ok_or_else(|| Error::Structure {
            row: 0,
            message: "empty input".into(),
        })?;
        let attributes =
            attributes.unwrap_or_else(|| (0..width - 1).map(|i| format!("x{i}")).collect());
        Self::from_rows(attributes, rows)
    }

    pub fn dimension(&self) -> usize {
        self.attributes.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    /// Resolves an attribute by name (case-insensitive) or by 0-based index.
    pub fn attribute_index(&self, key: &str) -> Option<usize> {
        if let Some(i) = self
            .attributes
            .iter()
            .position(|a| a.eq_ignore_ascii_case(key))
        {
            return Some(i);
        }
        key.parse::<usize>().ok().filter(|&i| i < self.dimension())
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn stats(&self) -> &[AttributeStats] {
        &self.stats
    }

    pub fn position(&self, cod: Cod) -> Option<usize> {
        self.positions.get(&cod).copied()
    }

    pub fn contains(&self, cod: Cod) -> bool {
        self.positions.contains_key(&cod)
    }

    pub fn get_row(&self, cod: Cod) -> Result<&FeatureVector> {
        self.position(cod)
            .map(|i| &self.rows[i])
            .ok_or_else(|| Error::not_found("COD", cod))
    }

    /// Up to `limit` rows starting at `offset`, in file order.
    pub fn page_rows(&self, offset: usize, limit: usize) -> &[FeatureVector] {
        let start = offset.min(self.rows.len());
        let end = start.saturating_add(limit).min(self.rows.len());
        &self.rows[start..end]
    }

    /// Rows for the given CODs, in the order given.
    pub fn select(&self, cods: &[Cod]) -> Result<Vec<FeatureVector>> {
        cods.iter().map(|&c| self.get_row(c).cloned()).collect()
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(sink);
        let mut header = self.attributes.clone();
        header.push("COD".into());
        w.write_record(&header).map_err(csv_io)?;
        for row in &self.rows {
            let mut fields: Vec<String> = row.values.iter().map(f64::to_string).collect();
            fields.push(row.cod.to_string());
            w.write_record(&fields).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn is_header(record: &csv::StringRecord) -> bool {
    record.iter().all(|cell| cell.parse::<f64>().is_err())
}

fn check_header(names: &[String]) -> Result<()> {
    if names.len() < 2 {
        return Err(Error::Structure {
            row: 1,
            message: "header needs at least one feature and a trailing COD".into(),
        });
    }
    let last = names.len() - 1;
    if let Some(pos) = names.iter().position(|n| n.eq_ignore_ascii_case("cod")) {
        if pos != last {
            return Err(Error::Structure {
                row: 1,
                message: format!("COD must be the last column, found at column {}", pos + 1),
            });
        }
    } else {
        return Err(Error::Structure {
            row: 1,
            message: "header has no COD column".into(),
        });
    }
    Ok(())
}

fn parse_row(record: &csv::StringRecord, line: usize) -> Result<FeatureVector> {
    let last = record.len() - 1;
    let mut values = Vec::with_capacity(last);
    for (col, cell) in record.iter().take(last).enumerate() {
        if cell.is_empty() {
            return Err(Error::Parse {
                row: line,
                column: col + 1,
                message: "missing value".into(),
            });
        }
        let v: f64 = cell.parse().map_err(|_| Error::Parse {
            row: line,
            column: col + 1,
            message: format!("non-numeric feature {cell:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                row: line,
                column: col + 1,
                message: format!("non-finite feature {cell:?}"),
            });
        }
        values.push(v);
    }
    let cod_cell = record.get(last).unwrap_or_default();
    let cod: Cod = cod_cell.parse().map_err(|_| Error::Parse {
        row: line,
        column: last + 1,
        message: format!("COD must be an integer, found {cod_cell:?}"),
    })?;
    Ok(FeatureVector { cod, values })
}

fn compute_stats(n: usize, rows: &[FeatureVector]) -> Vec<AttributeStats> {
    (0..n)
        .map(|j| {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            let mut sum = 0.0;
            for row in rows {
                let v = row.values[j];
                min = min.min(v);
                max = max.max(v);
                sum += v;
            }
            // summation error can push the mean a few ulps outside the bounds
            let mean = (sum / rows.len() as f64).clamp(min, max);
            AttributeStats { min, max, mean }
        })
        .collect()
}
