//! Trajectory CSV and JSON output. Every file is written to a sibling
//! temporary path and renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use dynlab_core::dynamics::{Trajectory, TrajectoryRow};
use serde::Serialize;

use crate::Error;

/// Seventeen significant digits: enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// A numeric table: header plus rows of optional values (empty cells).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>, Error> {
        let k = self
            .index(name)
            .ok_or_else(|| Error::Data(format!("no column {name:?}")))?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    /// The column with empty cells dropped.
    pub fn values(&self, name: &str) -> Result<Vec<f64>, Error> {
        Ok(self.column(name)?.into_iter().flatten().collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, Error> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|x| fmt_opt(*x)))?;
        }
        w.into_inner().map_err(|e| Error::Data(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        write_atomic(path, &self.to_csv()?)
    }

    pub fn read(path: &Path) -> Result<Self, Error> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&bytes)
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self, Error> {
        let mut r = csv::Reader::from_reader(bytes);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut table = Table::new(header);
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>()
                            .map(Some)
                            .map_err(|_| Error::Data(format!("not a number: {cell:?}")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            table.push(row);
        }
        Ok(table)
    }
}

/// Fixed column order for trajectory files.
pub fn trajectory_header(gen_dim: usize, disc_dim: usize) -> Vec<String> {
    let mut h = vec!["iteration".to_string(), "substep".to_string()];
    h.extend((0..gen_dim).map(|k| format!("gen_{k}")));
    h.extend((0..disc_dim).map(|k| format!("disc_{k}")));
    for name in [
        "gen_grad_norm",
        "disc_grad_norm",
        "loss",
        "delta0",
        "distance",
        "kl",
        "validation_loss",
    ] {
        h.push(name.to_string());
    }
    h
}

fn trajectory_row(r: &TrajectoryRow) -> Vec<Option<f64>> {
    let mut row = vec![Some(r.iteration as f64), r.substep.map(|s| s as f64)];
    row.extend(r.gen.iter().map(|x| Some(*x)));
    row.extend(r.disc.iter().map(|x| Some(*x)));
    let d = &r.diagnostics;
    row.extend([
        Some(r.gen_grad_norm),
        Some(r.disc_grad_norm),
        Some(d.loss),
        d.delta0,
        d.distance,
        d.kl,
        d.validation_loss,
    ]);
    row
}

pub fn trajectory_table(traj: &Trajectory) -> Table {
    let (g, d) = traj.rows.first().map_or((0, 0), |r| (r.gen.len(), r.disc.len()));
    let mut t = Table::new(trajectory_header(g, d));
    for r in &traj.rows {
        t.push(trajectory_row(r));
    }
    t
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), Error> {
    trajectory_table(traj).write(path)
}
