//! Output handling shared by all commands, and the run manifest.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use omsqueeze::config::Config;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::table::{svg_from_csv, PlotSpec, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    /// CSV plus an SVG drawn from it.
    Svg,
}

pub struct Context {
    pub config: Config,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub format: Format,
    pub log_y: bool,
    outputs: Vec<String>,
}

impl Context {
    pub fn new(config: Config, seed: u64, out_dir: PathBuf, format: Format, log_y: bool) -> CliResult<Self> {
        std::fs::create_dir_all(&out_dir)?;
        Ok(Self {
            config,
            seed,
            out_dir,
            format,
            log_y,
            outputs: Vec::new(),
        })
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        std::fs::write(self.out_dir.join(name), contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes `stem.csv`, `stem.json`, or `stem.csv` + `stem.svg`.
    pub fn emit_table(&mut self, stem: &str, table: &Table, plot: Option<PlotSpec>) -> CliResult<()> {
        match self.format {
            Format::Json => self.write_json(&format!("{stem}.json"), &table.to_json()),
            Format::Csv => self.write(&format!("{stem}.csv"), &table.to_csv()),
            Format::Svg => {
                let csv = table.to_csv();
                self.write(&format!("{stem}.csv"), &csv)?;
                if let Some(mut spec) = plot {
                    spec.log_y |= self.log_y;
                    let svg = svg_from_csv(&csv, &spec).map_err(CliError::Other)?;
                    self.write(&format!("{stem}.svg"), &svg)?;
                }
                Ok(())
            }
        }
    }

    pub fn write_manifest(&self, command: &str, args: &[String], started: f64, exit_code: i32) -> CliResult<()> {
        let manifest = RunManifest {
            tool: "omsqueeze".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args: args.to_vec(),
            seed: self.seed,
            config: self.config.clone(),
            started_unix: started,
            finished_unix: now(),
            exit_code,
            outputs: self.outputs.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(self.out_dir.join(manifest_name(command)), text + "\n")?;
        Ok(())
    }
}

pub fn manifest_name(command: &str) -> String {
    format!("{command}.manifest.json")
}

pub fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Everything needed to repeat a run: the parsed configuration, the root
/// seed and the command line. Only the timestamps change between runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub config: Config,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub exit_code: i32,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Reads a TOML configuration, or the configuration stored in a manifest
/// (`.json`), which also supplies the seed.
pub fn load_config(path: &Path) -> CliResult<(Config, Option<u64>)> {
    if path.extension().is_some_and(|e| e == "json") {
        let m = RunManifest::load(path)?;
        m.config.validate()?;
        Ok((m.config, Some(m.seed)))
    } else {
        Ok((Config::load(path).map_err(|e| match e {
            omsqueeze::Error::Io(io) => CliError::Config(format!("{}: {io}", path.display())),
            other => other.into(),
        })?, None))
    }
}

pub fn null_if_nan(v: f64) -> Value {
    if v.is_finite() { Value::from(v) } else { Value::Null }
}
