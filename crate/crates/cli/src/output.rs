use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

/// Output directory of one run. Every file written through it is listed in
/// `manifest.json`, which [`Run::finish`] writes last.
pub struct Run {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Run {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    /// Writes a CSV with a fixed header; every row must match its length.
    pub fn csv<I>(&mut self, name: &str, header: &[String], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(self.create(name)?);
        w.write_record(header)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Hands a writer to a library routine that emits its own CSV.
    pub fn with_writer(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut dyn Write) -> polarscale::Result<()>,
    ) -> Result<()> {
        let mut w = self.create(name)?;
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// Writes `manifest.json`: the subcommand, seed, parsed arguments and the
    /// numerical defaults in force. The output directory is left out so that
    /// runs in different places stay byte-identical.
    pub fn finish(
        mut self,
        subcommand: &str,
        seed: u64,
        args: &impl Serialize,
        defaults: Value,
    ) -> Result<()> {
        let mut outputs = self.outputs.clone();
        outputs.sort();
        let manifest = json!({
            "tool": "polarscale",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "seed": seed,
            "args": args,
            "defaults": defaults,
            "outputs": outputs,
        });
        self.json("manifest.json", &manifest)
    }
}

pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}
