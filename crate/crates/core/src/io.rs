//! CSV ingestion and draw persistence.
//!
//! Draws file, one row per stored sweep:
//!
//! ```text
//! iter,K,K_plus,eta_1..eta_Kmax,mu_1_1..mu_Kmax_r,sigma_1_1_1..,N_1..N_Kmax,log_lik
//! ```
//!
//! `Kmax` is the largest `K` among the rows. Each block is padded with empty
//! cells up to `Kmax`, and the row's `K` column says how many cells of each
//! block to read. `Σ_k` is stored as its lower triangle, row by row.
//! Component and observation labels in every file are 1-based.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::model::{Dataset, ModelError};
use crate::postprocess::Partition;
use crate::sampler::{SweepRecord, TracePoint};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column '{column}': cannot parse '{value}'")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("no column '{0}'")]
    MissingColumn(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Write(#[from] std::io::Error),
}

/// A column given by header name or by 0-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    /// Digits are read as a position, anything else as a name.
    pub fn parse(s: &str) -> Self {
        s.trim()
            .parse()
            .map(ColumnRef::Index)
            .unwrap_or_else(|_| ColumnRef::Name(s.trim().to_string()))
    }

    fn resolve(&self, headers: &csv::StringRecord) -> Result<usize, IoError> {
        match self {
            ColumnRef::Index(i) if *i < headers.len() => Ok(*i),
            ColumnRef::Index(i) => Err(IoError::MissingColumn(i.to_string())),
            ColumnRef::Name(n) => headers
                .iter()
                .position(|h| h.trim() == n)
                .ok_or_else(|| IoError::MissingColumn(n.clone())),
        }
    }
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::parse(s)
    }
}

/// How to read a data set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSpec {
    /// Feature columns; `None` takes every column except the label column.
    pub columns: Option<Vec<ColumnRef>>,
    pub label_col: Option<ColumnRef>,
    pub delimiter: u8,
}

impl Default for CsvSpec {
    fn default() -> Self {
        Self {
            columns: None,
            label_col: None,
            delimiter: b',',
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| IoError::File {
            path: path.display().to_string(),
            source,
        })
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<File>, IoError> {
    File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|source| IoError::File {
            path: path.display().to_string(),
            source,
        })
}

pub fn read_dataset(path: &Path, spec: &CsvSpec) -> Result<Dataset, IoError> {
    read_dataset_from_reader(open(path)?, spec)
}

pub fn read_dataset_from_reader<R: Read>(reader: R, spec: &CsvSpec) -> Result<Dataset, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let label = spec
        .label_col
        .as_ref()
        .map(|c| c.resolve(&headers))
        .transpose()?;
    let cols: Vec<usize> = match &spec.columns {
        Some(cs) => cs
            .iter()
            .map(|c| c.resolve(&headers))
            .collect::<Result<_, _>>()?,
        None => (0..headers.len()).filter(|&j| Some(j) != label).collect(),
    };
    if cols.is_empty() {
        return Err(IoError::Format("no feature columns".into()));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for &j in &cols {
            let cell = rec.get(j).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| IoError::Parse {
                row: row + 1,
                column: headers[j].to_string(),
                value: cell.to_string(),
            })?;
            values.push(v);
        }
        if let Some(l) = label {
            labels.push(rec.get(l).unwrap_or("").to_string());
        }
        n += 1;
    }
    let y = DMatrix::from_row_slice(n, cols.len(), &values);
    let names = cols.iter().map(|&j| headers[j].to_string()).collect();
    Ok(Dataset::new(y, names, label.map(|_| labels))?)
}

/// Read one column of a CSV file as strings.
pub fn read_column<R: Read>(reader: R, column: &ColumnRef) -> Result<Vec<String>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let j = column.resolve(&rdr.headers()?.clone())?;
    rdr.records()
        .map(|r| Ok(r?.get(j).unwrap_or("").to_string()))
        .collect()
}

pub fn read_column_file(path: &Path, column: &ColumnRef) -> Result<Vec<String>, IoError> {
    read_column(open(path)?, column)
}

fn tri_len(r: usize) -> usize {
    r * (r + 1) / 2
}

pub fn draws_header(k_max: usize, r: usize) -> Vec<String> {
    let mut h: Vec<String> = vec!["iter".into(), "K".into(), "K_plus".into()];
    h.extend((1..=k_max).map(|k| format!("eta_{k}")));
    for k in 1..=k_max {
        h.extend((1..=r).map(|j| format!("mu_{k}_{j}")));
    }
    for k in 1..=k_max {
        for i in 1..=r {
            h.extend((1..=i).map(|j| format!("sigma_{k}_{i}_{j}")));
        }
    }
    h.extend((1..=k_max).map(|k| format!("N_{k}")));
    h.push("log_lik".into());
    h
}

/// Write stored sweeps; `r` is the data dimension.
pub fn write_draws<W: Write>(out: W, records: &[SweepRecord], r: usize) -> Result<(), IoError> {
    let k_max = records.iter().map(|x| x.k).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(draws_header(k_max, r))?;
    let t = tri_len(r);
    for rec in records {
        let k = rec.k;
        let mut row: Vec<String> =
            vec![rec.iter.to_string(), k.to_string(), rec.k_plus.to_string()];
        let pad =
            |row: &mut Vec<String>, n: usize| row.extend(std::iter::repeat_n(String::new(), n));
        row.extend(rec.eta.iter().map(|x| x.to_string()));
        pad(&mut row, k_max - k);
        for m in &rec.mu {
            row.extend(m.iter().map(|x| x.to_string()));
        }
        pad(&mut row, (k_max - k) * r);
        for s in &rec.sigma {
            for i in 0..r {
                row.extend((0..=i).map(|j| s[(i, j)].to_string()));
            }
        }
        pad(&mut row, (k_max - k) * t);
        row.extend(rec.counts.iter().map(|x| x.to_string()));
        pad(&mut row, k_max - k);
        row.push(rec.log_lik.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Stored sweeps read back from a draws file.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawsFile {
    pub r: usize,
    pub k_max: usize,
    pub records: Vec<SweepRecord>,
}

fn cell<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    headers: &csv::StringRecord,
    row: usize,
) -> Result<T, IoError> {
    let v = rec.get(idx).unwrap_or("");
    v.parse().map_err(|_| IoError::Parse {
        row,
        column: headers.get(idx).unwrap_or("?").to_string(),
        value: v.to_string(),
    })
}

pub fn read_draws<R: Read>(reader: R) -> Result<DrawsFile, IoError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let k_max = headers.iter().filter(|h| h.starts_with("eta_")).count();
    let r = headers.iter().filter(|h| h.starts_with("mu_1_")).count();
    if headers.len() < 4 || &headers[0] != "iter" || &headers[1] != "K" || &headers[2] != "K_plus" {
        return Err(IoError::Format("not a draws file".into()));
    }
    let t = tri_len(r);
    let expected = 3 + k_max * (2 + r + t) + 1;
    if headers.len() != expected || (k_max > 0 && r == 0) {
        return Err(IoError::Format(format!(
            "header has {} columns, expected {expected} for K = {k_max}, r = {r}",
            headers.len()
        )));
    }
    let (eta0, mu0) = (3, 3 + k_max);
    let sig0 = mu0 + k_max * r;
    let n0 = sig0 + k_max * t;
    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = row + 1;
        if rec.len() != expected {
            return Err(IoError::Format(format!(
                "row {row} has {} cells",
                rec.len()
            )));
        }
        let k: usize = cell(&rec, 1, &headers, row)?;
        if k > k_max {
            return Err(IoError::Format(format!(
                "row {row}: K = {k} exceeds {k_max}"
            )));
        }
        let eta = (0..k)
            .map(|c| cell(&rec, eta0 + c, &headers, row))
            .collect::<Result<_, _>>()?;
        let mu = (0..k)
            .map(|c| {
                (0..r)
                    .map(|j| cell(&rec, mu0 + c * r + j, &headers, row))
                    .collect::<Result<Vec<f64>, _>>()
                    .map(DVector::from_vec)
            })
            .collect::<Result<_, _>>()?;
        let sigma = (0..k)
            .map(|c| {
                let mut m = DMatrix::zeros(r, r);
                let mut idx = sig0 + c * t;
                for i in 0..r {
                    for j in 0..=i {
                        let v: f64 = cell(&rec, idx, &headers, row)?;
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                        idx += 1;
                    }
                }
                Ok(m)
            })
            .collect::<Result<_, IoError>>()?;
        let counts: Vec<usize> = (0..k)
            .map(|c| cell(&rec, n0 + c, &headers, row))
            .collect::<Result<_, _>>()?;
        records.push(SweepRecord {
            iter: cell(&rec, 0, &headers, row)?,
            k,
            k_plus: cell(&rec, 2, &headers, row)?,
            eta,
            mu,
            sigma,
            counts,
            s: None,
            log_lik: cell(&rec, expected - 1, &headers, row)?,
        });
    }
    Ok(DrawsFile { r, k_max, records })
}

pub fn read_draws_file(path: &Path) -> Result<DrawsFile, IoError> {
    read_draws(open(path)?)
}

/// `iter,s_1..s_N` with 1-based labels, for records that carry assignments.
pub fn write_assignments<W: Write>(out: W, records: &[SweepRecord]) -> Result<(), IoError> {
    let n = records
        .iter()
        .find_map(|r| r.s.as_ref().map(Vec::len))
        .ok_or_else(|| IoError::Format("records carry no assignments".into()))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iter".to_string()];
    header.extend((1..=n).map(|i| format!("s_{i}")));
    w.write_record(&header)?;
    for rec in records {
        let s = rec
            .s
            .as_ref()
            .ok_or_else(|| IoError::Format(format!("sweep {} has no assignments", rec.iter)))?;
        let mut row = vec![rec.iter.to_string()];
        row.extend(s.iter().map(|l| (l + 1).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Returns `(iter, 0-based labels)` per row.
pub fn read_assignments<R: Read>(reader: R) -> Result<Vec<(usize, Vec<usize>)>, IoError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("iter") {
        return Err(IoError::Format("not an assignments file".into()));
    }
    rdr.records()
        .enumerate()
        .map(|(row, rec)| {
            let rec = rec?;
            let iter = cell(&rec, 0, &headers, row + 1)?;
            let s = (1..rec.len())
                .map(|j| {
                    let l: usize = cell(&rec, j, &headers, row + 1)?;
                    l.checked_sub(1)
                        .ok_or_else(|| IoError::Format("label 0 in 1-based file".into()))
                })
                .collect::<Result<_, _>>()?;
            Ok((iter, s))
        })
        .collect()
}

pub fn read_assignments_file(path: &Path) -> Result<Vec<(usize, Vec<usize>)>, IoError> {
    read_assignments(open(path)?)
}

/// Attach assignments to records by iteration number.
pub fn attach_assignments(
    records: &mut [SweepRecord],
    assignments: Vec<(usize, Vec<usize>)>,
) -> Result<(), IoError> {
    if records.len() != assignments.len() {
        return Err(IoError::Format(format!(
            "{} draws but {} assignment rows",
            records.len(),
            assignments.len()
        )));
    }
    for (rec, (iter, s)) in records.iter_mut().zip(assignments) {
        if rec.iter != iter {
            return Err(IoError::Format(format!(
                "assignment row for sweep {iter} does not match draw {}",
                rec.iter
            )));
        }
        rec.s = Some(s);
    }
    Ok(())
}

/// Long-format trace: `iter,series,value`. Series are `K`, `K_plus`,
/// `log_lik`, then `mu_k_1` and `N_k` per component.
pub fn write_trace<W: Write>(out: W, trace: &[TracePoint]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "series", "value"])?;
    for t in trace {
        let it = t.iter.to_string();
        w.write_record([it.as_str(), "K", &t.k.to_string()])?;
        w.write_record([it.as_str(), "K_plus", &t.k_plus.to_string()])?;
        w.write_record([it.as_str(), "log_lik", &t.log_lik.to_string()])?;
        for (k, (m, n)) in t.mu_first.iter().zip(&t.counts).enumerate() {
            w.write_record([it.as_str(), &format!("mu_{}_1", k + 1), &m.to_string()])?;
            w.write_record([it.as_str(), &format!("N_{}", k + 1), &n.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One `label` column, 1-based.
pub fn write_partition<W: Write>(out: W, p: &Partition) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label"])?;
    for l in p.labels() {
        w.write_record([(l + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a partition from a column of integer or string labels.
pub fn read_partition<R: Read>(
    reader: R,
    column: &ColumnRef,
) -> Result<(Partition, Vec<String>), IoError> {
    Ok(Partition::from_names(&read_column(reader, column)?))
}

pub fn read_partition_file(
    path: &Path,
    column: &ColumnRef,
) -> Result<(Partition, Vec<String>), IoError> {
    read_partition(open(path)?, column)
}
