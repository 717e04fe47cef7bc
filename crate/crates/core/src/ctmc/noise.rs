use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// `sigma_bar(t) = -ln(1 - delta t)`.
    LogLinear { delta: f64 },
    /// `sigma_bar(t) = sigma t`.
    Constant { sigma: f64 },
}

/// Noise rate `sigma_t` and its integral `sigma_bar_t` on `[0, horizon]`.
///
/// The forward generator at time `t` is `sigma_t * B` for a fixed base matrix
/// `B`, so every exact propagation only needs differences of `sigma_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    kind: NoiseKind,
    horizon: f64,
}

impl NoiseSchedule {
    pub fn log_linear(delta: f64, horizon: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "log-linear delta must lie in (0, 1), got {delta}"
            )));
        }
        check_horizon(horizon)?;
        if delta * horizon >= 1.0 {
            return Err(Error::InvalidSchedule(format!(
                "log-linear schedule needs horizon < 1/delta (delta = {delta}, horizon = {horizon})"
            )));
        }
        Ok(Self {
            kind: NoiseKind::LogLinear { delta },
            horizon,
        })
    }

    pub fn constant(sigma: f64, horizon: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "constant rate must be positive, got {sigma}"
            )));
        }
        check_horizon(horizon)?;
        Ok(Self {
            kind: NoiseKind::Constant { sigma },
            horizon,
        })
    }

    /// Parses `loglinear:<delta>` or `const:<sigma>`.
    pub fn parse(spec: &str, horizon: f64) -> Result<Self> {
        let (name, arg) = spec
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("noise schedule `{spec}` needs a `kind:value` form")))?;
        let value: f64 = arg
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad number in noise schedule `{spec}`")))?;
        match name.trim().to_ascii_lowercase().as_str() {
            "loglinear" | "log-linear" => Self::log_linear(value, horizon),
            "const" | "constant" => Self::constant(value, horizon),
            other => Err(Error::Parse(format!("unknown noise schedule `{other}`"))),
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_log_linear(&self) -> bool {
        matches!(self.kind, NoiseKind::LogLinear { .. })
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::ScheduleDomain {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    pub fn sigma(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self.kind {
            NoiseKind::LogLinear { delta } => delta / (1.0 - delta * t),
            NoiseKind::Constant { sigma } => sigma,
        })
    }

    pub fn sigma_bar(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self.kind {
            NoiseKind::LogLinear { delta } => -(-delta * t).ln_1p(),
            NoiseKind::Constant { sigma } => sigma * t,
        })
    }

    /// Per-token probability of still being unmasked, `e^{-sigma_bar(t)}`.
    pub fn keep_prob(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self.kind {
            NoiseKind::LogLinear { delta } => 1.0 - delta * t,
            NoiseKind::Constant { sigma } => (-sigma * t).exp(),
        })
    }

    /// Per-token masking probability, `1 - e^{-sigma_bar(t)}`, without cancellation.
    pub fn mask_prob(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self.kind {
            NoiseKind::LogLinear { delta } => delta * t,
            NoiseKind::Constant { sigma } => -(-sigma * t).exp_m1(),
        })
    }

    /// Reverse unmasking prefactor `sigma_t e^{-sigma_bar} / (1 - e^{-sigma_bar})`.
    ///
    /// Infinite at `t = 0`. Equals `1/t` for every log-linear schedule.
    pub fn unmask_prefactor(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self.kind {
            NoiseKind::LogLinear { .. } => 1.0 / t,
            NoiseKind::Constant { sigma } => sigma / (sigma * t).exp_m1(),
        })
    }

    /// `(1 - e^{-sigma_bar(s)}) / (1 - e^{-sigma_bar(t)})` for `s <= t`.
    pub fn mask_ratio(&self, s: f64, t: f64) -> Result<f64> {
        if s > t {
            return Err(Error::InvalidInterval(format!("expected s <= t, got s={s}, t={t}")));
        }
        let num = self.mask_prob(s)?;
        let den = self.mask_prob(t)?;
        if den == 0.0 {
            return Ok(1.0);
        }
        Ok(num / den)
    }

    /// Integral of the unmasking prefactor over `[s, t]`, i.e. `-ln(mask_ratio(s, t))`.
    pub fn integrated_prefactor(&self, s: f64, t: f64) -> Result<f64> {
        Ok(-self.mask_ratio(s, t)?.ln())
    }

    /// Inverse of [`Self::mask_prob`].
    pub fn time_for_mask_prob(&self, m: f64) -> Result<f64> {
        let t = match self.kind {
            NoiseKind::LogLinear { delta } => m / delta,
            NoiseKind::Constant { sigma } => -(-m).ln_1p() / sigma,
        };
        self.check_time(t)?;
        Ok(t)
    }

    pub fn describe(&self) -> String {
        match self.kind {
            NoiseKind::LogLinear { delta } => format!("loglinear:{delta}"),
            NoiseKind::Constant { sigma } => format!("const:{sigma}"),
        }
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidSchedule(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    Ok(())
}
