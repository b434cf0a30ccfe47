//! CSV emission with a provenance header, written atomically.

use std::path::Path;

use neurocomm::spkt::write_atomic;

use crate::error::CliResult;

pub struct Csv {
    text: String,
}

impl Csv {
    /// Starts a table with the `# neurocomm ...` line and the column names.
    pub fn new(provenance: &str, columns: &[&str]) -> Self {
        Self {
            text: format!("{provenance}\n{}\n", columns.join(",")),
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        let cells: Vec<&str> = cells.iter().map(AsRef::as_ref).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_text(path, &self.text)
    }
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(neurocomm::Error::from)?;
    }
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub fn num(v: f64) -> String {
    format!("{v:.6}")
}
