use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Cli, Format};
use crate::error::CliError;

/// Output directory that records every file written to it, so the manifest
/// can list them.
pub struct Outputs {
    dir: PathBuf,
    pub format: Format,
    written: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path, format: Format) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            written: Vec::new(),
        })
    }

    /// `stem.csv` or `stem.json` by the selected format.
    pub fn name(&self, stem: &str) -> String {
        match self.format {
            Format::Csv => format!("{stem}.csv"),
            Format::Json => format!("{stem}.json"),
        }
    }

    pub fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let io_err = |source| CliError::Write {
            path: path.clone(),
            source,
        };
        let mut out = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut out)?;
        out.flush().map_err(io_err)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        self.write(name, |out| {
            serde_json::to_writer_pretty(&mut *out, value)
                .map_err(|e| CliError::Write {
                    path: path.clone(),
                    source: e.into(),
                })?;
            writeln!(out).map_err(|source| CliError::Write { path, source })
        })
    }

    /// Writes `manifest.json` last: resolved config, library version, the
    /// files written and a short result summary. No timestamps, so repeated
    /// runs give identical bytes.
    pub fn finish(mut self, cli: &Cli, summary: Value) -> Result<(), CliError> {
        let config = match serde_json::to_value(&cli.command) {
            Ok(Value::Object(map)) => map.into_iter().next().map(|(_, v)| v).unwrap_or(Value::Null),
            _ => Value::Null,
        };
        let manifest = json!({
            "command": cli.command.name(),
            "config": config,
            "library_version": hankel_core::VERSION,
            "outputs": self.written.clone(),
            "summary": summary,
        });
        self.json("manifest.json", &manifest)
    }
}
