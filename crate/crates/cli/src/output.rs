use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// First line of every output file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
}

impl Header {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Header { tool: "anderson-edge".into(), version: env!("CARGO_PKG_VERSION").into(), command: command.into(), config: config.clone() }
    }

    fn json(&self) -> String {
        serde_json::to_string(&serde_json::json!({ "header": self })).expect("header serializes")
    }

    /// Reads the header back from a JSON-lines or CSV output file.
    pub fn read(path: &Path) -> Result<Header> {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let mut line = String::new();
        BufReader::new(file).read_line(&mut line)?;
        let json = line.trim_end().strip_prefix("# ").unwrap_or(line.trim_end());
        let mut v: serde_json::Value = serde_json::from_str(json).with_context(|| format!("{} has no header line", path.display()))?;
        let Some(h) = v.get_mut("header") else {
            bail!("{} has no header line", path.display());
        };
        Ok(serde_json::from_value(h.take())?)
    }
}

pub struct Jsonl {
    w: BufWriter<File>,
}

impl Jsonl {
    pub fn create(dir: &Path, name: &str, header: &Header) -> Result<Self> {
        let mut w = BufWriter::new(create(dir, name)?);
        writeln!(w, "{}", header.json())?;
        Ok(Jsonl { w })
    }

    pub fn record<T: Serialize>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer(&mut self.w, value)?;
        self.w.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

pub struct Csv {
    w: csv::Writer<BufWriter<File>>,
}

impl Csv {
    pub fn create(dir: &Path, name: &str, header: &Header, columns: &[&str]) -> Result<Self> {
        let mut file = BufWriter::new(create(dir, name)?);
        writeln!(file, "# {}", header.json())?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(columns)?;
        Ok(Csv { w })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

fn create(dir: &Path, name: &str) -> Result<File> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path: PathBuf = dir.join(name);
    File::create(&path).with_context(|| format!("cannot create {}", path.display()))
}

/// Shortest round-trip formatting of a float.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
