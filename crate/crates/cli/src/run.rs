//! Output bookkeeping shared by every command: the run manifest, the `#`
//! header that points at it, and the warning counters checked by `--strict`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use discrete_guidance::ctmc::mass_drift_warnings;
use discrete_guidance::io::{Cell, Table};

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Counters {
    pub overflow_clips: u64,
    pub degenerate_trajectories: u64,
    pub mass_drift: u64,
}

impl Counters {
    fn named(&self) -> [(&'static str, u64); 3] {
        [
            ("overflow_clips", self.overflow_clips),
            ("degenerate_trajectories", self.degenerate_trajectories),
            ("mass_drift_warnings", self.mass_drift),
        ]
    }
}

pub struct Run {
    command: String,
    argv: Vec<String>,
    manifest: PathBuf,
    seed: Option<u64>,
    started: SystemTime,
    drift_at_start: u64,
    pub counters: Counters,
    outputs: Vec<PathBuf>,
}

fn unix_ms(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// `<out>.manifest.csv` next to a single output file.
pub fn manifest_for(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.csv");
    PathBuf::from(name)
}

impl Run {
    pub fn new(command: &str, manifest: PathBuf) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().skip(1).collect(),
            manifest,
            seed: None,
            started: SystemTime::now(),
            drift_at_start: mass_drift_warnings(),
            counters: Counters::default(),
            outputs: Vec::new(),
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Comment lines that open every CSV written by this run.
    pub fn header(&self) -> Vec<String> {
        vec![format!("manifest={}", self.manifest.display()), format!("command={}", self.command)]
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    /// Writes the manifest and reports the counters that exceed `strict`.
    pub fn finish(mut self, strict: Option<u64>) -> Result<Vec<String>> {
        self.counters.mass_drift = mass_drift_warnings().saturating_sub(self.drift_at_start);
        let mut table = Table::new(["key", "value"]);
        let mut rows: Vec<(String, Cell)> = vec![
            ("command".into(), self.command.clone().into()),
            ("flags".into(), self.argv.join(" ").into()),
            ("seed".into(), self.seed.map_or(Cell::Text("none".into()), |s| s.into())),
            ("version".into(), env!("CARGO_PKG_VERSION").into()),
            ("start_unix_ms".into(), unix_ms(self.started).into()),
            ("end_unix_ms".into(), unix_ms(SystemTime::now()).into()),
        ];
        rows.extend(self.counters.named().iter().map(|&(k, v)| (k.to_string(), v.into())));
        rows.extend(self.outputs.iter().map(|p| ("output".to_string(), p.display().to_string().into())));
        for (k, v) in rows {
            table.push(vec![k.into(), v])?;
        }
        let manifest = self.manifest.clone();
        self.write(&manifest, &table.to_csv(&[]))?;
        let limit = strict.unwrap_or(u64::MAX);
        Ok(self
            .counters
            .named()
            .iter()
            .filter(|&&(_, v)| v > limit)
            .map(|(k, v)| format!("{k}={v} exceeds the strict limit {limit}"))
            .collect())
    }
}
