//! CSV tables and the single writer all artifacts go through.

use std::fs;
use std::path::{Path, PathBuf};

use adiaphase::C64;

use crate::CliError;

/// Stands in for values at singular points.
pub const MASKED: &str = "masked";

/// 17 significant digits, or `masked` for anything non-finite.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        MASKED.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Header with `name_re`, `name_im` for every complex column name.
    pub fn with_complex_columns(leading: &[&str], complex: &[&str]) -> Self {
        let mut header: Vec<String> = leading.iter().map(|s| s.to_string()).collect();
        for c in complex {
            header.push(format!("{c}_re"));
            header.push(format!("{c}_im"));
        }
        Self::new(header)
    }

    pub fn columns(&self) -> usize {
        self.header.len()
    }

    pub fn push(&mut self, row: Row) {
        assert_eq!(row.0.len(), self.header.len(), "row width");
        self.rows.push(row.0);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Builder for one formatted CSV row.
#[derive(Debug, Default, Clone)]
pub struct Row(Vec<String>);

impl Row {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num(mut self, x: f64) -> Self {
        self.0.push(fmt_num(x));
        self
    }

    pub fn complex(self, z: C64) -> Self {
        self.num(z.re).num(z.im)
    }

    pub fn maybe_complex(mut self, z: Option<C64>) -> Self {
        match z {
            Some(z) => self.complex(z),
            None => {
                self.0.push(MASKED.into());
                self.0.push(MASKED.into());
                self
            }
        }
    }
}

/// Writes artifacts one at a time and remembers their paths relative to
/// the output root.
#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| output_error(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn prepare(&mut self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
        }
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        self.written.push(rel.to_string_lossy().replace('\\', "/"));
        Ok(())
    }

    pub fn csv(&mut self, path: &Path, table: &Table) -> Result<(), CliError> {
        self.prepare(path)?;
        let err = |e: csv::Error| output_error(path, e);
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(&table.header).map_err(err)?;
        for row in &table.rows {
            w.write_record(row).map_err(err)?;
        }
        w.flush().map_err(|e| output_error(path, e))
    }

    pub fn text(&mut self, path: &Path, text: &str) -> Result<(), CliError> {
        self.prepare(path)?;
        fs::write(path, text).map_err(|e| output_error(path, e))
    }
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}
