//! Single writer for run artifacts and the manifest.

use hoslab_core::csv::{fmt_f64, Table};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST: &str = "manifest.csv";
pub const MANIFEST_HEADER: [&str; 3] = ["section", "key", "value"];

pub struct Output {
    dir: PathBuf,
    artifacts: Vec<(String, String)>,
    checks: Vec<(String, bool)>,
    metrics: Vec<(String, String)>,
    timings: Vec<(String, f64)>,
}

impl Output {
    pub fn new(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            checks: Vec::new(),
            metrics: Vec::new(),
            timings: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn table(&mut self, name: &str, table: &Table) -> io::Result<()> {
        let text = table.render();
        std::fs::write(self.dir.join(name), &text)?;
        let digest = Sha256::digest(text.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.artifacts.retain(|(n, _)| n != name);
        self.artifacts.push((name.to_string(), hex));
        Ok(())
    }

    pub fn check(&mut self, name: &str, pass: bool) {
        self.checks.push((name.to_string(), pass));
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.push((name.to_string(), fmt_f64(value)));
    }

    /// Run `f` and record its wall-clock time under `name`.
    pub fn timed<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        self.timings.push((name.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn checks(&self) -> &[(String, bool)] {
        &self.checks
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, p)| *p)
    }

    pub fn artifact_names(&self) -> Vec<&str> {
        self.artifacts.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Write the manifest: tool, config echo, checks, metrics, artifacts, timings.
    pub fn finish(mut self, command: &str, config: &BTreeMap<String, String>) -> io::Result<bool> {
        let mut t = Table::new(MANIFEST_HEADER);
        let row = |s: &str, k: &str, v: &str| vec![s.to_string(), k.to_string(), v.to_string()];
        t.push(row("tool", "name", env!("CARGO_PKG_NAME")));
        t.push(row("tool", "version", env!("CARGO_PKG_VERSION")));
        t.push(row("tool", "command", command));
        for (k, v) in config {
            t.push(row("config", k, &v.replace(',', ";")));
        }
        for (k, p) in &self.checks {
            t.push(row("check", k, if *p { "pass" } else { "fail" }));
        }
        let pass = self.passed();
        t.push(row("check", "verdict", if pass { "pass" } else { "fail" }));
        for (k, v) in &self.metrics {
            t.push(row("metric", k, v));
        }
        for (k, h) in &self.artifacts {
            t.push(row("artifact", k, h));
        }
        t.push(row("artifact", MANIFEST, "self"));
        for (k, s) in &self.timings {
            t.push(row("timing", k, &format!("{s:.3}")));
        }
        std::fs::write(self.dir.join(MANIFEST), t.render())?;
        self.artifacts.clear();
        Ok(pass)
    }
}
