use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a metrics file. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub variant: String,
    pub usvs: usize,
    pub uavs: usize,
    pub gss: usize,
    pub seed: u64,
    pub iteration: usize,
    pub mean_reward: f64,
    pub mean_delay_s: f64,
    pub wall_clock_s: f64,
}

impl MetricsRow {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mean_reward", self.mean_reward),
            ("mean_delay_s", self.mean_delay_s),
            ("wall_clock_s", self.wall_clock_s),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{name} of {} iteration {}", self.variant, self.iteration)));
            }
        }
        Ok(())
    }
}

/// Append-only CSV writer. The header goes in only when the file is empty;
/// every row is flushed before `append` returns.
pub struct MetricsAppender {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl MetricsAppender {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let empty = file.metadata()?.len() == 0;
        let writer = csv::WriterBuilder::new().has_headers(empty).from_writer(file);
        Ok(Self { path, writer })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, row: &MetricsRow) -> Result<()> {
        row.validate()?;
        self.writer.serialize(row)?;
        self.writer.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}
