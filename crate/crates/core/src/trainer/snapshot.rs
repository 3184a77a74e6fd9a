//! Model snapshot directory: `manifest.json` plus one CSV per global
//! parameter (row-major, shortest round-trip decimals).

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyper::{HyperParams, Mode};
use crate::state::GlobalState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub num_users: usize,
    pub vocab_size: usize,
    pub k: usize,
    pub hyper: HyperParams,
    pub iteration: usize,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub manifest: Manifest,
    pub global: GlobalState,
}

const FILES: [&str; 4] = ["gamma.csv", "tau.csv", "nu.csv", "lambda.csv"];

pub fn save_snapshot(
    dir: &Path,
    global: &GlobalState,
    hyper: &HyperParams,
    mode: Mode,
    iteration: usize,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        num_users: global.num_users(),
        vocab_size: global.vocab_size(),
        k: global.k(),
        hyper: hyper.clone(),
        iteration,
        mode,
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    for (name, m) in FILES.iter().zip([&global.gamma, &global.tau, &global.nu, &global.lambda]) {
        write_matrix(&dir.join(name), m)?;
    }
    Ok(())
}

fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in m.rows() {
        w.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut n = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != cols {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected {cols} columns, found {}", rec.len()),
            });
        }
        for field in rec.iter() {
            let v: f64 = field.trim().parse().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("bad number {field:?}: {e}"),
            })?;
            data.push(v);
        }
        n += 1;
    }
    if n != rows {
        return Err(Error::Shape(format!("{} has {n} rows, expected {rows}", path.display())));
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Shape(e.to_string()))
}

pub fn load_snapshot(dir: &Path) -> Result<Snapshot> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    manifest.hyper.validate()?;
    let (u, v, k) = (manifest.num_users, manifest.vocab_size, manifest.k);
    if manifest.hyper.k != k {
        return Err(Error::Shape(format!("manifest K = {k} but hyperparameters have K = {}", manifest.hyper.k)));
    }
    let global = GlobalState {
        gamma: read_matrix(&dir.join(FILES[0]), u, k)?,
        tau: read_matrix(&dir.join(FILES[1]), k, v)?,
        nu: read_matrix(&dir.join(FILES[2]), k, k)?,
        lambda: read_matrix(&dir.join(FILES[3]), k, k)?,
    };
    global.validate()?;
    Ok(Snapshot { manifest, global })
}
