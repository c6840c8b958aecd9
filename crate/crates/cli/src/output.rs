//! Output directory helpers: provenance headers, CSV tables and the run log.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use brecs::io::write_csv_with_comments;
use nalgebra::DMatrix;
use serde::Serialize;

/// Writes artifacts into one directory and keeps the run log.
pub struct OutputDir {
    root: PathBuf,
    provenance: Vec<String>,
    log: Vec<String>,
    start: Instant,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, provenance: Vec<String>) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            provenance,
            log: Vec::new(),
            start: Instant::now(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::info!("{msg}");
        self.log.push(format!(
            "[{:>9.3}s] {msg}",
            self.start.elapsed().as_secs_f64()
        ));
    }

    /// CSV with the provenance lines as `#` comments.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        write_csv_with_comments(&self.path(name), &self.provenance, &header, rows)
            .with_context(|| format!("cannot write {name}"))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// A `p x q` grid with row labels in the first column.
    pub fn grid(
        &mut self,
        name: &str,
        row_names: &[String],
        col_names: &[String],
        m: &DMatrix<f64>,
    ) -> Result<()> {
        let mut header = vec!["covariate"];
        header.extend(col_names.iter().map(String::as_str));
        let rows: Vec<Vec<String>> = m
            .row_iter()
            .zip(row_names)
            .map(|(r, name)| {
                std::iter::once(name.clone())
                    .chain(r.iter().map(|v| num(*v)))
                    .collect()
            })
            .collect();
        self.table(name, &header, &rows)
    }

    /// A plain numeric matrix with column names.
    pub fn matrix(&mut self, name: &str, col_names: &[String], m: &DMatrix<f64>) -> Result<()> {
        let header: Vec<&str> = col_names.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = m
            .row_iter()
            .map(|r| r.iter().map(|v| num(*v)).collect())
            .collect();
        self.table(name, &header, &rows)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.text(name, &(text + "\n"))
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        fs::write(self.path(name), body).with_context(|| format!("cannot write {name}"))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `run.log`; call last.
    pub fn finish(mut self) -> Result<()> {
        let files = self.written.join(", ");
        self.note(format!("wrote {files}"));
        let mut body = self
            .provenance
            .iter()
            .map(|p| format!("# {p}\n"))
            .collect::<String>();
        for line in &self.log {
            body.push_str(line);
            body.push('\n');
        }
        fs::write(self.path("run.log"), body).context("cannot write run.log")
    }
}

/// Shortest representation that parses back to the same double.
pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
