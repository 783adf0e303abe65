use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::schema::{FeatureSchema, GENDER};
use crate::error::{Error, Result};

/// Value stored in masked cells. The mask is authoritative; the sentinel only
/// keeps a masked cell from ever looking like real data.
pub const MISSING: f64 = f64::NAN;

/// Named numeric columns with an explicit missingness mask.
///
/// Storage is column-major: every pipeline stage works column by column.
#[derive(Debug, Clone)]
pub struct UserFeatureTable {
    schema: FeatureSchema,
    n_rows: usize,
    values: Vec<Vec<f64>>,
    missing: Vec<Vec<bool>>,
}

/// Equality ignores whatever sits behind masked cells and compares observed
/// values bit for bit.
impl PartialEq for UserFeatureTable {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.n_rows == other.n_rows
            && self.missing == other.missing
            && self.values.iter().zip(&other.values).zip(&self.missing).all(|((a, b), m)| {
                a.iter()
                    .zip(b)
                    .zip(m)
                    .all(|((x, y), masked)| *masked || x.to_bits() == y.to_bits())
            })
    }
}

impl UserFeatureTable {
    /// Builds a table from per-column values where `None` marks a missing cell.
    pub fn from_options(schema: FeatureSchema, columns: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::invalid(format!(
                "{} columns supplied for a schema of {}",
                columns.len(),
                schema.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(columns.len());
        let mut missing = Vec::with_capacity(columns.len());
        for (col, spec) in columns.into_iter().zip(schema.columns()) {
            if col.len() != n_rows {
                return Err(Error::invalid(format!("column `{}` has {} rows, expected {n_rows}", spec.name, col.len())));
            }
            missing.push(col.iter().map(Option::is_none).collect());
            values.push(col.into_iter().map(|v| v.unwrap_or(MISSING)).collect());
        }
        Ok(UserFeatureTable { schema, n_rows, values, missing })
    }

    /// Builds a fully observed table. NaN values are treated as missing.
    pub fn from_columns(schema: FeatureSchema, columns: Vec<Vec<f64>>) -> Result<Self> {
        let opts = columns
            .into_iter()
            .map(|c| c.into_iter().map(|v| if v.is_nan() { None } else { Some(v) }).collect())
            .collect();
        Self::from_options(schema, opts)
    }

    pub fn empty(schema: FeatureSchema) -> Self {
        let m = schema.len();
        UserFeatureTable {
            schema,
            n_rows: 0,
            values: vec![Vec::new(); m],
            missing: vec![Vec::new(); m],
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    /// Observed value, or `None` for a masked cell.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        if self.missing[col][row] {
            None
        } else {
            Some(self.values[col][row])
        }
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[col][row]
    }

    /// Raw column storage, sentinels included. Pair with [`Self::column_mask`].
    pub fn column_raw(&self, col: usize) -> &[f64] {
        &self.values[col]
    }

    pub fn column_mask(&self, col: usize) -> &[bool] {
        &self.missing[col]
    }

    pub fn missing_count(&self, col: usize) -> usize {
        self.missing[col].iter().filter(|m| **m).count()
    }

    pub fn has_missing(&self, col: usize) -> bool {
        self.missing[col].iter().any(|m| *m)
    }

    /// Values of a fully observed column.
    pub fn column_values(&self, name: &str) -> Result<&[f64]> {
        let c = self.schema.require(name)?;
        if self.has_missing(c) {
            return Err(Error::invalid(format!("column `{name}` has missing values")));
        }
        Ok(&self.values[c])
    }

    /// Returns a copy with one column's values and mask replaced.
    pub fn with_column(&self, col: usize, values: Vec<f64>, missing: Vec<bool>) -> Result<Self> {
        if values.len() != self.n_rows || missing.len() != self.n_rows {
            return Err(Error::invalid("replacement column has wrong length"));
        }
        let mut out = self.clone();
        out.values[col] = values
            .into_iter()
            .zip(&missing)
            .map(|(v, m)| if *m { MISSING } else { v })
            .collect();
        out.missing[col] = missing;
        Ok(out)
    }

    /// Table restricted to the named columns, in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let schema = self.schema.subset(names)?;
        let idx: Vec<usize> = names.iter().map(|n| self.schema.require(n.as_ref())).collect::<Result<_>>()?;
        Ok(UserFeatureTable {
            schema,
            n_rows: self.n_rows,
            values: idx.iter().map(|&i| self.values[i].clone()).collect(),
            missing: idx.iter().map(|&i| self.missing[i].clone()).collect(),
        })
    }

    /// Table without the named columns.
    pub fn drop_columns(&self, names: &BTreeSet<String>) -> Self {
        let keep: Vec<String> = self.schema.names().filter(|n| !names.contains(*n)).map(str::to_string).collect();
        self.select(&keep).expect("kept columns exist")
    }

    /// Rows at the given indices, in order.
    pub fn take_rows(&self, rows: &[usize]) -> Self {
        UserFeatureTable {
            schema: self.schema.clone(),
            n_rows: rows.len(),
            values: self.values.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect(),
            missing: self.missing.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect(),
        }
    }

    /// Dense row-major-indexed matrix of the named, fully observed columns.
    pub fn to_matrix<S: AsRef<str>>(&self, names: &[S]) -> Result<DMatrix<f64>> {
        let idx: Vec<usize> = names.iter().map(|n| self.schema.require(n.as_ref())).collect::<Result<_>>()?;
        for (&c, n) in idx.iter().zip(names) {
            if self.has_missing(c) {
                return Err(Error::invalid(format!("column `{}` has missing values", n.as_ref())));
            }
        }
        Ok(DMatrix::from_fn(self.n_rows, idx.len(), |r, j| self.values[idx[j]][r]))
    }

    /// Reads a delimiter-separated file with a header row.
    pub fn load(path: impl AsRef<Path>, schema: &FeatureSchema, delimiter: u8) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref())?;
        Self::read(f, schema, delimiter)
    }

    /// Parses delimiter-separated text. Blank and non-numeric cells in numeric
    /// columns become missing; a missing schema column is a schema error.
    pub fn read<R: Read>(reader: R, schema: &FeatureSchema, delimiter: u8) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let positions: Vec<usize> = schema
            .names()
            .map(|n| {
                headers
                    .iter()
                    .position(|h| h.trim() == n)
                    .ok_or_else(|| Error::Schema(n.to_string()))
            })
            .collect::<Result<_>>()?;
        let gender = schema.index_of(GENDER);
        let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); schema.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
            for (c, &pos) in positions.iter().enumerate() {
                let cell = rec.get(pos).ok_or_else(|| Error::Parse {
                    row,
                    message: format!("missing field {pos}"),
                })?;
                let v = if Some(c) == gender { parse_gender(cell) } else { parse_number(cell) };
                columns[c].push(v);
            }
        }
        Self::from_options(schema.clone(), columns)
    }

    pub fn save(&self, path: impl AsRef<Path>, delimiter: u8) -> Result<()> {
        let f = std::fs::File::create(path.as_ref())?;
        self.write(f, delimiter)
    }

    /// Writes the table; missing cells become empty fields. Values use the
    /// shortest round-tripping decimal form, so reading back is exact.
    pub fn write<W: Write>(&self, writer: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        w.write_record(self.schema.names())?;
        let mut buf = Vec::with_capacity(self.n_cols());
        for r in 0..self.n_rows {
            buf.clear();
            for c in 0..self.n_cols() {
                buf.push(match self.get(r, c) {
                    Some(v) => format!("{v}"),
                    None => String::new(),
                });
            }
            w.write_record(&buf)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    let t = cell.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Gender arrives either numeric or as a label; labels are encoded 0/1.
fn parse_gender(cell: &str) -> Option<f64> {
    match cell.trim().to_ascii_lowercase().as_str() {
        "" => None,
        "female" | "f" => Some(1.0),
        "male" | "m" => Some(0.0),
        other => other.parse::<f64>().ok().filter(|v| *v == 0.0 || *v == 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{ColumnRole, ColumnSpec, Rq};

    fn rq1_schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            ColumnSpec::new("Reputation", ColumnRole::Predictor, &[Rq::Rq1]),
            ColumnSpec::new("Answers", ColumnRole::Target, &[Rq::Rq1]),
        ])
        .unwrap()
    }

    #[test]
    fn blank_cell_is_masked() {
        let text = "Reputation,Answers\n10,1\n20,\n30,3\n";
        let t = UserFeatureTable::read(text.as_bytes(), &rq1_schema(), b',').unwrap();
        assert_eq!(t.n_rows(), 3);
        assert!(t.is_missing(1, 1));
        let masked: usize = (0..2).map(|c| t.missing_count(c)).sum();
        assert_eq!(masked, 1);
        assert_eq!(t.get(2, 1), Some(3.0));
    }

    #[test]
    fn header_only_gives_empty_table() {
        let t = UserFeatureTable::read("Reputation,Answers\n".as_bytes(), &rq1_schema(), b',').unwrap();
        assert_eq!(t.n_rows(), 0);
        assert_eq!(t.n_cols(), 2);
    }

    #[test]
    fn missing_column_names_it() {
        let err = UserFeatureTable::read("Answers\n1\n".as_bytes(), &rq1_schema(), b',').unwrap_err();
        assert!(matches!(err, Error::Schema(ref c) if c == "Reputation"), "{err}");
    }

    #[test]
    fn ragged_row_reports_index() {
        let err = UserFeatureTable::read("Reputation,Answers\n1,2\n3\n".as_bytes(), &rq1_schema(), b',').unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }), "{err}");
    }

    #[test]
    fn non_numeric_becomes_missing_and_gender_is_encoded() {
        let schema = FeatureSchema::new(vec![
            ColumnSpec::new("Gender", ColumnRole::Predictor, &[]),
            ColumnSpec::new("Views", ColumnRole::Predictor, &[]),
        ])
        .unwrap();
        let t = UserFeatureTable::read("Gender;Views\nfemale;abc\nmale;4\n".as_bytes(), &schema, b';').unwrap();
        assert_eq!(t.get(0, 0), Some(1.0));
        assert_eq!(t.get(1, 0), Some(0.0));
        assert!(t.is_missing(0, 1));
    }

    #[test]
    fn write_then_read_round_trips() {
        let t = UserFeatureTable::from_options(
            rq1_schema(),
            vec![vec![Some(0.1), None, Some(-3.25e-12)], vec![Some(1.0 / 3.0), Some(2.0), None]],
        )
        .unwrap();
        let mut buf = Vec::new();
        t.write(&mut buf, b',').unwrap();
        let back = UserFeatureTable::read(buf.as_slice(), &rq1_schema(), b',').unwrap();
        for c in 0..2 {
            assert_eq!(back.column_mask(c), t.column_mask(c));
            for r in 0..3 {
                assert_eq!(back.get(r, c).map(f64::to_bits), t.get(r, c).map(f64::to_bits));
            }
        }
    }
}
