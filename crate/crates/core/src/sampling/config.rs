use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Euler,
    TauLeaping,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Euler => "euler",
            SamplerKind::TauLeaping => "tau",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euler" => Ok(SamplerKind::Euler),
            "tau" | "tau-leaping" | "tauleaping" => Ok(SamplerKind::TauLeaping),
            other => Err(Error::Parse(format!("unknown sampler `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Uniform steps from the horizon down to `t_end`.
    pub steps: usize,
    pub trajectories: usize,
    pub seed: u64,
    /// Last grid time; positions still masked there get one exact final draw.
    pub t_end: f64,
    /// Extra grid times at which the empirical state is recorded.
    pub snapshots: Vec<f64>,
    /// Skip the final draw and report the state at `t_end` as is.
    pub keep_masked_at_end: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Euler,
            steps: 50,
            trajectories: 10_000,
            seed: 0,
            t_end: 1e-3,
            snapshots: Vec::new(),
            keep_masked_at_end: false,
        }
    }
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind, steps: usize, trajectories: usize, seed: u64) -> Self {
        Self { kind, steps, trajectories, seed, ..Self::default() }
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_snapshots(mut self, snapshots: Vec<f64>) -> Self {
        self.snapshots = snapshots;
        self
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        if self.steps == 0 || self.trajectories == 0 {
            return Err(Error::InvalidConfig("steps and trajectories must be at least 1".into()));
        }
        if !(self.t_end >= 0.0 && self.t_end < horizon) {
            return Err(Error::InvalidConfig(format!(
                "t_end must lie in [0, {horizon}), got {}",
                self.t_end
            )));
        }
        if let Some(s) = self.snapshots.iter().find(|&&s| !(s >= self.t_end && s <= horizon)) {
            return Err(Error::InvalidConfig(format!(
                "snapshot time {s} outside [{}, {horizon}]",
                self.t_end
            )));
        }
        Ok(())
    }
}
