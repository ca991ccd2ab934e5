use super::CliError;
use crate::aux::ProbitData;
use crate::sim::TimeSeries;
use nalgebra::DMatrix;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

pub use crate::mc::SCHEMA_VERSION;

/// A numeric CSV with a header row.
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut rd = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let header: Vec<String> = rd
            .headers()
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns = vec![Vec::new(); header.len()];
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            for (j, field) in rec.iter().enumerate() {
                let v = field
                    .parse::<f64>()
                    .map_err(|_| CliError::usage(format!("{}: row {} column {}: '{field}' is not a number", path.display(), i + 2, j + 1)))?;
                columns[j].push(v);
            }
        }
        Ok(Self { header, columns })
    }

    pub fn column(&self, name: &str) -> Result<&[f64], CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|j| self.columns[j].as_slice())
            .ok_or_else(|| CliError::usage(format!("no column '{name}' (have {})", self.header.join(", "))))
    }

    /// The named column, or the first one.
    pub fn series(&self, name: Option<&str>) -> Result<TimeSeries, CliError> {
        let values = match name {
            Some(n) => self.column(n)?.to_vec(),
            None => self.columns.first().cloned().ok_or_else(|| CliError::usage("data file has no columns"))?,
        };
        TimeSeries::new(values).map_err(|e| CliError::usage(e.to_string()))
    }

    /// Binary outcome from `name` (default: first non-`x_` column) and covariates from the `x_*` columns.
    pub fn probit(&self, name: Option<&str>) -> Result<ProbitData, CliError> {
        let xs: Vec<usize> = (0..self.header.len()).filter(|&j| self.header[j].starts_with("x_")).collect();
        if xs.is_empty() {
            return Err(CliError::usage("probit data needs covariate columns named x_1, x_2, ..."));
        }
        let y = match name {
            Some(n) => self.column(n)?,
            None => {
                let j = (0..self.header.len())
                    .find(|j| !xs.contains(j))
                    .ok_or_else(|| CliError::usage("probit data has no outcome column"))?;
                self.columns[j].as_slice()
            }
        };
        let y = y
            .iter()
            .map(|&v| match v {
                v if v == 0.0 => Ok(0u8),
                v if v == 1.0 => Ok(1u8),
                v => Err(CliError::usage(format!("probit outcome must be 0 or 1, got {v}"))),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        let x = DMatrix::from_fn(y.len(), xs.len(), |i, j| self.columns[xs[j]][i]);
        ProbitData::new(y, Arc::new(x)).map_err(|e| CliError::usage(e.to_string()))
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.columns.first().map_or(0, Vec::len);
        DMatrix::from_fn(n, self.columns.len(), |i, j| self.columns[j][i])
    }
}

pub fn write_csv(out: Option<&Path>, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| CliError::usage(format!("writing csv: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::usage(format!("writing csv: {e}")))
}

pub fn write_json(out: Option<&Path>, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json values serialize") + "\n";
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn fmt(v: f64) -> String {
    format!("{v}")
}
