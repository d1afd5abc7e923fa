use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use multiport::io;

/// Machine-readable record of one invocation.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub seed: Option<u64>,
    pub parameters: BTreeMap<String, Value>,
    /// SHA-256 of every input file, keyed by the path given.
    pub inputs: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, Value>,
    pub wall_clock_s: f64,
}

pub struct Recorder {
    report: RunReport,
    start: Instant,
}

impl Recorder {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            report: RunReport {
                command,
                seed: None,
                parameters: BTreeMap::new(),
                inputs: BTreeMap::new(),
                metrics: BTreeMap::new(),
                wall_clock_s: 0.0,
            },
            start: Instant::now(),
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.report.seed = Some(seed);
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.report.parameters.insert(key.into(), to_value(value));
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        self.report.metrics.insert(key.into(), to_value(value));
    }

    /// Reads an input file, recording its digest.
    pub fn input(&mut self, path: &Path) -> multiport::Result<String> {
        let text = io::read_text(path)?;
        self.report
            .inputs
            .insert(path.display().to_string(), io::sha256_hex(text.as_bytes()));
        Ok(text)
    }

    pub fn finish(mut self, path: Option<&Path>) -> multiport::Result<()> {
        self.report.wall_clock_s = self.start.elapsed().as_secs_f64();
        if let Some(p) = path {
            io::write_json(p, &self.report)?;
        }
        Ok(())
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}
