//! Per-run record of configuration, stage wall times and outputs.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::failure::Result;
use crate::imageio::write_json;

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool_version: &'static str,
    pub library_version: &'static str,
    pub command: String,
    pub config: PipelineConfig,
    pub timings: Vec<Timing>,
    pub total_seconds: f64,
    pub outputs: Vec<String>,
    /// Command-specific results.
    pub details: serde_json::Value,
}

/// Collects stage timings and outputs while a command runs.
pub struct Recorder {
    command: String,
    start: Instant,
    lap: Instant,
    timings: Vec<Timing>,
    outputs: Vec<String>,
}

impl Recorder {
    pub fn new(command: &str) -> Self {
        let now = Instant::now();
        Self {
            command: command.to_string(),
            start: now,
            lap: now,
            timings: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Closes the current stage.
    pub fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.push(stage, (now - self.lap).as_secs_f64());
        self.lap = now;
    }

    /// Records a stage timed elsewhere; the current stage clock restarts.
    pub fn push(&mut self, stage: &str, seconds: f64) {
        self.timings.push(Timing {
            stage: stage.to_string(),
            seconds,
        });
        self.lap = Instant::now();
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(self, path: &Path, config: &PipelineConfig, details: serde_json::Value) -> Result<()> {
        let manifest = Manifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            library_version: plenoptic::VERSION,
            command: self.command,
            config: config.clone(),
            timings: self.timings,
            total_seconds: self.start.elapsed().as_secs_f64(),
            outputs: self.outputs,
            details,
        };
        log::info!("manifest {}", path.display());
        write_json(path, &manifest)
    }
}
