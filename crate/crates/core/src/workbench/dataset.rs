use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use crate::bayes::RegressionData;
use crate::error::{LipsError, Result};

/// Which column holds the response.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ResponseSelector {
    /// Header name, or a 0-based column index when no header matches.
    Column(String),
    Last,
}

impl ResponseSelector {
    pub fn parse(s: &str) -> Self {
        Self::Column(s.to_string())
    }

    fn resolve(&self, header: &[String]) -> Result<usize> {
        match self {
            Self::Last => header
                .len()
                .checked_sub(1)
                .ok_or_else(|| LipsError::Config("file has no columns".into())),
            Self::Column(name) => {
                if let Some(i) = header.iter().position(|h| h == name) {
                    return Ok(i);
                }
                match name.parse::<usize>() {
                    Ok(i) if i < header.len() => Ok(i),
                    _ => Err(LipsError::Config(format!("no response column `{name}`"))),
                }
            }
        }
    }
}

/// A numeric table with one response column.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Predictor names, in column order.
    pub names: Vec<String>,
    pub response: String,
    /// Raw predictor rows.
    pub rows: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub y_mean: f64,
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    let trimmed = cell.trim();
    let err = |message: &str| LipsError::Parse {
        row,
        column: column.to_string(),
        message: message.to_string(),
    };
    if trimmed.is_empty() {
        return Err(err("missing value"));
    }
    let v: f64 = trimmed
        .parse()
        .map_err(|_| err(&format!("`{trimmed}` is not a number")))?;
    if !v.is_finite() {
        return Err(err("value is not finite"));
    }
    Ok(v)
}

/// Header plus numeric body. `row` in errors counts data rows from 1.
fn read_table<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut seen = HashSet::new();
    for (i, h) in header.iter().enumerate() {
        if h.is_empty() {
            return Err(LipsError::Parse {
                row: 0,
                column: i.to_string(),
                message: "empty column name".into(),
            });
        }
        if !seen.insert(h) {
            return Err(LipsError::Parse {
                row: 0,
                column: h.clone(),
                message: "duplicate column name".into(),
            });
        }
    }
    let mut body = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| LipsError::Parse {
            row: r + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        let row = record
            .iter()
            .zip(&header)
            .map(|(cell, name)| parse_cell(cell, r + 1, name))
            .collect::<Result<Vec<f64>>>()?;
        body.push(row);
    }
    Ok((header, body))
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

impl Dataset {
    pub fn new(names: Vec<String>, response: String, rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let p = names.len();
        if rows.len() != y.len() {
            return Err(LipsError::Domain(format!("{} rows but {} responses", rows.len(), y.len())));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(LipsError::Domain(format!("row {i} has {} values, expected {p}", rows[i].len())));
        }
        if rows.is_empty() {
            return Err(LipsError::Domain("dataset has no rows".into()));
        }
        let n = rows.len();
        let x_mean = (0..p).map(|j| mean(rows.iter().map(|r| r[j]), n)).collect();
        let y_mean = mean(y.iter().copied(), n);
        Ok(Self {
            names,
            response,
            rows,
            y,
            x_mean,
            y_mean,
        })
    }

    pub fn from_reader<R: Read>(reader: R, response: &ResponseSelector) -> Result<Self> {
        let (header, body) = read_table(reader)?;
        let r = response.resolve(&header)?;
        let names: Vec<String> = header.iter().enumerate().filter(|(i, _)| *i != r).map(|(_, h)| h.clone()).collect();
        let mut rows = Vec::with_capacity(body.len());
        let mut y = Vec::with_capacity(body.len());
        for mut row in body {
            y.push(row.remove(r));
            rows.push(row);
        }
        Self::new(names, header[r].clone(), rows, y)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    /// Columns with their means removed.
    pub fn centered_columns(&self) -> Vec<Vec<f64>> {
        (0..self.p())
            .map(|j| self.rows.iter().map(|r| r[j] - self.x_mean[j]).collect())
            .collect()
    }

    pub fn regression_data(&self) -> Result<RegressionData> {
        RegressionData::new(&self.rows, &self.y)
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            self.names.clone(),
            self.response.clone(),
            idx.iter().map(|&i| self.rows[i].clone()).collect(),
            idx.iter().map(|&i| self.y[i]).collect(),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.names.iter().chain(std::iter::once(&self.response)))?;
        for (row, y) in self.rows.iter().zip(&self.y) {
            w.write_record(row.iter().chain(std::iter::once(y)).map(|v| super::fmt_g(*v)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a CSV with a header.
pub fn load_csv(path: &Path, response: &ResponseSelector) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    Dataset::from_reader(file, response)
}

/// Rows for prediction, matched to `names` by header. The response column is
/// returned too when present.
pub fn load_new_rows(path: &Path, names: &[String], response: &str) -> Result<(Vec<Vec<f64>>, Option<Vec<f64>>)> {
    let file = std::fs::File::open(path)?;
    let (header, body) = read_table(file)?;
    let cols = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| LipsError::Config(format!("new rows lack predictor column `{n}`")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let r = header.iter().position(|h| h == response);
    let rows = body.iter().map(|row| cols.iter().map(|&c| row[c]).collect()).collect();
    let y = r.map(|r| body.iter().map(|row| row[r]).collect());
    Ok((rows, y))
}
