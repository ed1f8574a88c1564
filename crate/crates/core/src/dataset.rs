//! Column-major real-valued tables with per-column rank indexes.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Stable sort permutation of one column: `order[r]` is the record holding
/// the `r`-th smallest value, ties broken by ascending record index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankIndex {
    order: Vec<usize>,
}

impl RankIndex {
    pub fn new(values: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        // `sort_by` is stable, so equal values keep record order.
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        RankIndex { order }
    }

    /// Zero-based record indices in ascending value order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The column's values in sorted order.
    pub fn sorted_values(&self, values: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&r| values[r]).collect()
    }
}

/// Immutable table of `m` records over `n` named real-valued dimensions.
///
/// All columns share one length `m >= 2`, every value is finite, and names
/// are unique and non-empty. Rank indexes are built once at construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    ranks: Vec<RankIndex>,
}

#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub has_header: bool,
    pub delimiter: u8,
    /// Drop rows containing an empty or NaN cell instead of rejecting the file.
    pub drop_na: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: true,
            delimiter: b',',
            drop_na: false,
        }
    }
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::NoColumns);
        }
        if names.len() != columns.len() {
            return Err(Error::InvalidParameter(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::EmptyColumnName(i + 1));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        let m = columns[0].len();
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != m {
                return Err(Error::LengthMismatch {
                    name: name.clone(),
                    expected: m,
                    found: col.len(),
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: row + 1,
                    column: name.clone(),
                    value: col[row].to_string(),
                });
            }
        }
        if m < 2 {
            return Err(Error::TooFewRecords { found: m });
        }
        let ranks = columns.iter().map(|c| RankIndex::new(c)).collect();
        Ok(Dataset {
            names,
            columns,
            ranks,
        })
    }

    /// Builds a dataset with synthesized names `col1..colN`.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let names = (1..=columns.len()).map(|i| format!("col{i}")).collect();
        Self::new(names, columns)
    }

    pub fn load_csv(path: impl AsRef<Path>, options: CsvOptions) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file, options)
    }

    pub fn read_csv<R: Read>(reader: R, options: CsvOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(options.has_header)
            .delimiter(options.delimiter)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut names: Option<Vec<String>> = if options.has_header {
            Some(rdr.headers()?.iter().map(str::to_owned).collect())
        } else {
            None
        };
        let mut columns: Vec<Vec<f64>> = names
            .as_ref()
            .map(|n| vec![Vec::new(); n.len()])
            .unwrap_or_default();

        let mut row_buf = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row = record
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(i + 1);
            let width = match &names {
                Some(n) => n.len(),
                None => {
                    let n: Vec<String> = (1..=record.len()).map(|c| format!("col{c}")).collect();
                    columns = vec![Vec::new(); n.len()];
                    names = Some(n);
                    record.len()
                }
            };
            if record.len() != width {
                return Err(Error::Ragged {
                    row,
                    expected: width,
                    found: record.len(),
                });
            }
            let names = names.as_ref().expect("names set above");
            row_buf.clear();
            let mut missing = false;
            for (c, cell) in record.iter().enumerate() {
                if cell.is_empty() {
                    if options.drop_na {
                        missing = true;
                        break;
                    }
                    return Err(Error::Parse {
                        row,
                        column: names[c].clone(),
                        value: String::new(),
                    });
                }
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column: names[c].clone(),
                    value: cell.to_owned(),
                })?;
                if v.is_nan() && options.drop_na {
                    missing = true;
                    break;
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row,
                        column: names[c].clone(),
                        value: cell.to_owned(),
                    });
                }
                row_buf.push(v);
            }
            if missing {
                continue;
            }
            for (col, &v) in columns.iter_mut().zip(&row_buf) {
                col.push(v);
            }
        }

        let names = names.unwrap_or_default();
        if columns.first().map_or(0, Vec::len) < 2 {
            let found = columns.first().map_or(0, Vec::len);
            if names.is_empty() {
                return Err(Error::TooFewRecords { found: 0 });
            }
            return Err(Error::TooFewRecords { found });
        }
        Self::new(names, columns)
    }

    /// Writes the table with a header row. Values use Rust's shortest
    /// round-trip float formatting, so reloading is bit-exact.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.names)?;
        let mut row = Vec::with_capacity(self.n());
        for r in 0..self.m() {
            row.clear();
            row.extend(self.columns.iter().map(|c| format!("{:?}", c[r])));
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|source| Error::Io {
            path: "<writer>".into(),
            source,
        })?;
        Ok(())
    }

    /// Record count.
    pub fn m(&self) -> usize {
        self.columns[0].len()
    }

    /// Dimension count.
    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: usize) -> Result<&str> {
        self.names
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| Error::UnknownColumn(id.to_string()))
    }

    pub fn column_id(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_owned()))
    }

    pub fn column(&self, id: usize) -> Result<&[f64]> {
        self.columns
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownColumn(id.to_string()))
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn rank_index(&self, id: usize) -> Result<&RankIndex> {
        self.ranks
            .get(id)
            .ok_or_else(|| Error::UnknownColumn(id.to_string()))
    }
}
