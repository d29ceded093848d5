//! CSV persistence. Every file has a header row and LF line endings; floats
//! are written in shortest round-trip form, so reading a file back yields
//! the exact values written. Missing values are `NA`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{CasbahError, Result};
use crate::model::ObservedDataset;

pub const MISSING: &str = "NA";

/// Columns of a data file that are never covariates.
pub const RESERVED_COLUMNS: [&str; 4] = ["id", "t", "p", "y"];

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return MISSING.into();
    }
    let a = x.abs();
    if (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| MISSING.to_string(), fmt_f64)
}

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CasbahError + '_ {
    move |source| CasbahError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> CasbahError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CasbahError::Io { path: path.display().to_string(), source },
        other => CasbahError::input(format!("{}: {other:?}", path.display())),
    }
}

pub struct CsvOut {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut out = Self {
            path: path.to_path_buf(),
            inner: csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file)),
        };
        out.row(header)?;
        Ok(out)
    }

    pub fn row<S: AsRef<[u8]>>(&mut self, fields: &[S]) -> Result<()> {
        self.inner.write_record(fields).map_err(|e| csv_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(io_err(&self.path))
    }
}

/// Streams the rows of a CSV file as string records, with the header.
pub struct CsvIn {
    path: PathBuf,
    pub header: Vec<String>,
    reader: csv::Reader<File>,
}

impl CsvIn {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(io_err(path))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let header = reader.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
        Ok(Self { path: path.to_path_buf(), header, reader })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CasbahError::input(format!("{}: missing column `{name}`", self.path.display())))
    }

    /// Calls `f(row_number, record)` for every data row; rows are 1-based.
    pub fn for_each<F: FnMut(usize, &csv::StringRecord) -> Result<()>>(&mut self, mut f: F) -> Result<()> {
        let mut record = csv::StringRecord::new();
        let mut row = 0;
        loop {
            match self.reader.read_record(&mut record) {
                Ok(true) => {
                    row += 1;
                    f(row, &record)?;
                }
                Ok(false) => return Ok(()),
                Err(e) => return Err(csv_err(&self.path, e)),
            }
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn field<'a>(record: &'a csv::StringRecord, col: usize, row: usize, name: &str) -> Result<&'a str> {
    record
        .get(col)
        .ok_or_else(|| CasbahError::input(format!("row {row}: missing value in column `{name}`")))
}

pub fn parse_f64_field(record: &csv::StringRecord, col: usize, row: usize, name: &str) -> Result<f64> {
    let s = field(record, col, row, name)?;
    let v: f64 = s
        .parse()
        .map_err(|_| CasbahError::input(format!("row {row}, column `{name}`: `{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(CasbahError::input(format!("row {row}, column `{name}`: value must be finite")));
    }
    Ok(v)
}

/// Parses a value that may be `NA`.
pub fn parse_opt_field(record: &csv::StringRecord, col: usize, row: usize, name: &str) -> Result<Option<f64>> {
    if field(record, col, row, name)? == MISSING {
        return Ok(None);
    }
    parse_f64_field(record, col, row, name).map(Some)
}

pub fn parse_int_field<T: std::str::FromStr>(record: &csv::StringRecord, col: usize, row: usize, name: &str) -> Result<T> {
    let s = field(record, col, row, name)?;
    s.parse()
        .map_err(|_| CasbahError::input(format!("row {row}, column `{name}`: `{s}` is not an integer")))
}

/// A data file: unit ids, covariate names and the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub ids: Vec<String>,
    pub covariate_names: Vec<String>,
    pub data: ObservedDataset,
}

/// Reads `t, p, y` and the covariates; `id` is optional and defaults to the
/// 1-based row number. `t` must be 0 or 1.
pub fn read_dataset(path: &Path, covariates: Option<&[String]>) -> Result<DataFile> {
    let mut input = CsvIn::open(path)?;
    let (ct, cp, cy) = (input.column("t")?, input.column("p")?, input.column("y")?);
    let cid = input.header.iter().position(|h| h == "id");
    let covariate_names: Vec<String> = match covariates {
        Some(names) => names.to_vec(),
        None => input.header.iter().filter(|h| !RESERVED_COLUMNS.contains(&h.as_str())).cloned().collect(),
    };
    let cx = covariate_names.iter().map(|n| input.column(n)).collect::<Result<Vec<_>>>()?;
    let (mut ids, mut t, mut p, mut y, mut x) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    input.for_each(|row, rec| {
        ids.push(match cid {
            Some(c) => field(rec, c, row, "id")?.to_string(),
            None => row.to_string(),
        });
        let tv = field(rec, ct, row, "t")?;
        t.push(match tv {
            "0" => false,
            "1" => true,
            other => return Err(CasbahError::input(format!("row {row}, column `t`: expected 0 or 1, got `{other}`"))),
        });
        p.push(parse_f64_field(rec, cp, row, "p")?);
        y.push(parse_f64_field(rec, cy, row, "y")?);
        for (&c, name) in cx.iter().zip(&covariate_names) {
            x.push(parse_f64_field(rec, c, row, name)?);
        }
        Ok(())
    })?;
    let n = t.len();
    let xm = DMatrix::from_row_slice(n, covariate_names.len(), &x);
    Ok(DataFile { ids, covariate_names, data: ObservedDataset::new(xm, t, p, y)? })
}

pub fn write_dataset(path: &Path, file: &DataFile) -> Result<()> {
    let mut header: Vec<&str> = RESERVED_COLUMNS.to_vec();
    header.extend(file.covariate_names.iter().map(String::as_str));
    let mut out = CsvOut::create(path, &header)?;
    let d = &file.data;
    for i in 0..d.n() {
        let mut row = vec![
            file.ids[i].clone(),
            u8::from(d.treated[i]).to_string(),
            fmt_f64(d.p_obs[i]),
            fmt_f64(d.y_obs[i]),
        ];
        row.extend(d.x.row(i).iter().map(|&v| fmt_f64(v)));
        out.row(&row)?;
    }
    out.finish()
}

/// Centres every covariate and scales it by its sample sd (constant columns
/// are only centred).
pub fn standardize(data: &mut ObservedDataset) {
    let n = data.n();
    if n < 2 {
        return;
    }
    for mut col in data.x.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
        for v in col.iter_mut() {
            *v -= mean;
            if sd > 0.0 {
                *v /= sd;
            }
        }
    }
}
