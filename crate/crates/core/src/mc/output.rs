use super::density::kernel_density;
use super::run::McRun;
use crate::error::{IndiiError, Result};
use std::fs;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

fn csv_err(e: csv::Error) -> IndiiError {
    IndiiError::Io(e.to_string())
}

fn fmt(v: f64) -> String {
    format!("{v:.10e}")
}

/// `summary.json`, `bindings.csv`, `raw.csv` and one `density_<param>.csv` per
/// parameter of the first estimator.
pub fn write_outputs(run: &McRun, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let p = dir.join("summary.json");
    fs::write(&p, serde_json::to_string_pretty(&run.summary).map_err(|e| IndiiError::Io(e.to_string()))? + "\n")?;
    written.push(p);

    let p = dir.join("bindings.csv");
    let mut w = csv::Writer::from_path(&p).map_err(csv_err)?;
    w.write_record(["constraint", "binding_pct", "func_violation_pct"]).map_err(csv_err)?;
    for b in &run.summary.bindings {
        w.write_record([b.label.clone(), format!("{:.2}", b.binding_pct), format!("{:.2}", b.func_violation_pct)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    written.push(p);

    let p = dir.join("raw.csv");
    let mut w = csv::Writer::from_path(&p).map_err(csv_err)?;
    let ok = run.records.iter().find(|r| r.ok());
    let d_beta = ok.map_or(0, |r| r.beta_r.len());
    let q = run.constraint_labels.len();
    let est_names: Vec<String> = ok.map_or(vec![], |r| r.estimates.iter().map(|e| e.name.clone()).collect());
    let mut header = vec!["rep".to_string(), "error".to_string()];
    for i in 0..d_beta {
        header.push(format!("beta_r_{}", i + 1));
    }
    for i in 0..d_beta {
        header.push(format!("beta_hat_{}", i + 1));
    }
    for j in 0..q {
        header.push(format!("bind_{}", j + 1));
        header.push(format!("violate_{}", j + 1));
    }
    header.push("score_xi".into());
    header.push("score_p".into());
    for e in &est_names {
        for name in &run.param_names {
            header.push(format!("{e}:{name}"));
        }
        header.push(format!("{e}:objective"));
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in &run.records {
        let mut row = vec![r.rep.to_string(), r.error.clone().unwrap_or_default()];
        let pad = |v: &[f64], n: usize, row: &mut Vec<String>| {
            for i in 0..n {
                row.push(v.get(i).map(|x| fmt(*x)).unwrap_or_default());
            }
        };
        pad(&r.beta_r, d_beta, &mut row);
        pad(&r.beta_hat, d_beta, &mut row);
        for j in 0..q {
            row.push(r.binding.get(j).map(|b| (*b as u8).to_string()).unwrap_or_default());
            row.push(r.func_violation.get(j).map(|b| (*b as u8).to_string()).unwrap_or_default());
        }
        row.push(r.score_test.map(|s| fmt(s.xi)).unwrap_or_default());
        row.push(r.score_test.map(|s| fmt(s.p_value)).unwrap_or_default());
        for name in &est_names {
            match r.estimates.iter().find(|e| &e.name == name) {
                Some(e) => {
                    pad(&e.theta, run.param_names.len(), &mut row);
                    row.push(fmt(e.objective));
                }
                None => row.extend(std::iter::repeat(String::new()).take(run.param_names.len() + 1)),
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    written.push(p);

    if let Some(first) = est_names.first() {
        for (i, name) in run.param_names.iter().enumerate() {
            let samples: Vec<f64> = run
                .records
                .iter()
                .filter_map(|r| r.estimates.iter().find(|e| &e.name == first).map(|e| e.theta[i]))
                .collect();
            match kernel_density(&samples, None, 0.015) {
                Ok(d) => {
                    let p = dir.join(format!("density_{name}.csv"));
                    let mut w = csv::Writer::from_path(&p).map_err(csv_err)?;
                    w.write_record(["x", "density"]).map_err(csv_err)?;
                    for (x, y) in d.grid.iter().zip(&d.density) {
                        w.write_record([fmt(*x), fmt(*y)]).map_err(csv_err)?;
                    }
                    w.flush()?;
                    written.push(p);
                }
                Err(e) => log::warn!("no density for {name}: {e}"),
            }
        }
    }
    Ok(written)
}
