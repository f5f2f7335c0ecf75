use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{io_error, CliResult};

/// The output directory of one command run. Every file written is listed in
/// the manifest.
pub struct OutDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(io_error(root))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn csv<I>(&mut self, name: &str, header: &[String], rows: I) -> CliResult<()>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        lms_core::io::write_csv_file(&self.path(name), &header, rows)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        self.text(name, &to_pretty(value))
    }

    pub fn text(&mut self, name: &str, body: &str) -> CliResult<()> {
        let path = self.path(name);
        std::fs::write(&path, body).map_err(io_error(&path))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

pub fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

pub struct Manifest<'a> {
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub resolved: Value,
    pub started: Instant,
}

impl Manifest<'_> {
    pub fn write(self, out: &mut OutDir) -> CliResult<()> {
        let files = out.files().to_vec();
        let value = json!({
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "resolved": self.resolved,
            "versions": {
                "lms": env!("CARGO_PKG_VERSION"),
            },
            "threads": rayon::current_num_threads(),
            "outputs": files,
            "wall_time_seconds": self.started.elapsed().as_secs_f64(),
        });
        out.text("manifest.json", &to_pretty(&value))
    }
}
