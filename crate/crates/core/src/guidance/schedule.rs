use crate::{Error, Result};

/// Guidance strength as a function of generation progress `u` in `[0, 1]`,
/// where `u = 0` is the fully noised start and `u = 1` the end of sampling.
#[derive(Debug, Clone, PartialEq)]
pub enum GuidanceSchedule {
    Constant(f64),
    /// Breakpoints `0 = b_0 < ... < b_k = 1` and one weight per interval
    /// `[b_i, b_{i+1})`.
    PiecewiseConstant { breakpoints: Vec<f64>, weights: Vec<f64> },
    /// `w` on `[0, r]`, zero afterwards.
    LeftInterval { w: f64, r: f64 },
    /// `w` on `[l, 1]`, zero before.
    RightInterval { w: f64, l: f64 },
    /// `min(w, w u / r)`.
    RampUp { w: f64, r: f64 },
    /// `min(w, w (1 - u) / (1 - l))`.
    RampDown { w: f64, l: f64 },
}

/// Diffusion time for progress `u`: `t = T (1 - u)`.
pub fn progress_to_time(u: f64, horizon: f64) -> f64 {
    horizon * (1.0 - u)
}

/// Progress for diffusion time `t`: `u = 1 - t / T`.
pub fn time_to_progress(t: f64, horizon: f64) -> f64 {
    1.0 - t / horizon
}

fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::InvalidSchedule(format!("{what} must be finite")))
    }
}

impl GuidanceSchedule {
    pub fn constant(w: f64) -> Result<Self> {
        Ok(Self::Constant(finite(w, "w")?))
    }

    /// Accepts either the full breakpoint list (`0, ..., 1`, one more entry
    /// than `weights`) or the interior breakpoints only (one fewer).
    pub fn piecewise(breakpoints: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSchedule("piecewise schedule needs weights".into()));
        }
        for &w in &weights {
            finite(w, "weight")?;
        }
        let full = if breakpoints.len() == weights.len() + 1 {
            breakpoints
        } else if breakpoints.len() + 1 == weights.len() {
            let mut b = Vec::with_capacity(weights.len() + 1);
            b.push(0.0);
            b.extend(breakpoints);
            b.push(1.0);
            b
        } else {
            return Err(Error::InvalidSchedule(format!(
                "{} breakpoints do not fit {} weights",
                breakpoints.len(),
                weights.len()
            )));
        };
        if full[0] != 0.0 || *full.last().unwrap() != 1.0 {
            return Err(Error::InvalidSchedule("breakpoints must start at 0 and end at 1".into()));
        }
        if full.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::InvalidSchedule("breakpoints must be strictly increasing".into()));
        }
        Ok(Self::PiecewiseConstant { breakpoints: full, weights })
    }

    pub fn left_interval(w: f64, r: f64) -> Result<Self> {
        check_unit(r, "r")?;
        Ok(Self::LeftInterval { w: finite(w, "w")?, r })
    }

    pub fn right_interval(w: f64, l: f64) -> Result<Self> {
        check_unit(l, "l")?;
        Ok(Self::RightInterval { w: finite(w, "w")?, l })
    }

    pub fn ramp_up(w: f64, r: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidSchedule(format!("ramp-up r must lie in (0, 1], got {r}")));
        }
        Ok(Self::RampUp { w: finite(w, "w")?, r })
    }

    pub fn ramp_down(w: f64, l: f64) -> Result<Self> {
        if !(l >= 0.0 && l < 1.0) {
            return Err(Error::InvalidSchedule(format!("ramp-down l must lie in [0, 1), got {l}")));
        }
        Ok(Self::RampDown { w: finite(w, "w")?, l })
    }

    pub fn eval(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Self::Constant(w) => *w,
            Self::PiecewiseConstant { breakpoints, weights } => {
                let k = breakpoints[1..].partition_point(|&b| b <= u);
                weights[k.min(weights.len() - 1)]
            }
            Self::LeftInterval { w, r } => {
                if u <= *r {
                    *w
                } else {
                    0.0
                }
            }
            Self::RightInterval { w, l } => {
                if u >= *l {
                    *w
                } else {
                    0.0
                }
            }
            Self::RampUp { w, r } => w.min(w * u / r),
            Self::RampDown { w, l } => w.min(w * (1.0 - u) / (1.0 - l)),
        }
    }

    /// Strength at diffusion time `t` of a run over `[0, horizon]`.
    pub fn at_time(&self, t: f64, horizon: f64) -> f64 {
        self.eval(time_to_progress(t, horizon))
    }

    /// Diffusion-time partition `t_min = t_0 < ... < t_k = horizon` and the
    /// weight on each `(t_i, t_{i+1}]`, for schedules that are piecewise
    /// constant. Ramps return `None`.
    pub fn piecewise_segments(&self, horizon: f64, t_min: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let cuts: Vec<f64> = match self {
            Self::Constant(_) => vec![],
            Self::PiecewiseConstant { breakpoints, .. } => {
                breakpoints[1..breakpoints.len() - 1].to_vec()
            }
            Self::LeftInterval { r, .. } => vec![*r],
            Self::RightInterval { l, .. } => vec![*l],
            Self::RampUp { .. } | Self::RampDown { .. } => return None,
        };
        let mut times = vec![t_min];
        for &b in cuts.iter().rev() {
            let t = progress_to_time(b, horizon);
            if t > t_min && t < horizon {
                times.push(t);
            }
        }
        times.push(horizon);
        let weights = times[1..]
            .iter()
            .map(|&t| self.eval(time_to_progress(t, horizon)))
            .collect();
        Some((times, weights))
    }

    /// Parses `const:w`, `piecewise:b1,b2,...;w0,w1,...`, `left:w,r`,
    /// `right:w,l`, `rampup:w,r` or `rampdown:w,l`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, rest) = spec
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("schedule `{spec}` lacks a `kind:` prefix")))?;
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .filter(|x| !x.trim().is_empty())
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number `{x}` in schedule `{spec}`")))
                })
                .collect()
        };
        let pair = |s: &str| -> Result<(f64, f64)> {
            match nums(s)?.as_slice() {
                [a, b] => Ok((*a, *b)),
                _ => Err(Error::Parse(format!("schedule `{spec}` needs two numbers"))),
            }
        };
        match kind.trim().to_ascii_lowercase().as_str() {
            "const" | "constant" => match nums(rest)?.as_slice() {
                [w] => Self::constant(*w),
                _ => Err(Error::Parse(format!("schedule `{spec}` needs one number"))),
            },
            "piecewise" => {
                let (b, w) = rest
                    .split_once(';')
                    .ok_or_else(|| Error::Parse(format!("piecewise schedule `{spec}` needs `;`")))?;
                Self::piecewise(nums(b)?, nums(w)?)
            }
            "left" => pair(rest).and_then(|(w, r)| Self::left_interval(w, r)),
            "right" => pair(rest).and_then(|(w, l)| Self::right_interval(w, l)),
            "rampup" => pair(rest).and_then(|(w, r)| Self::ramp_up(w, r)),
            "rampdown" => pair(rest).and_then(|(w, l)| Self::ramp_down(w, l)),
            other => Err(Error::Parse(format!("unknown schedule kind `{other}`"))),
        }
    }

    /// Inverse of [`GuidanceSchedule::parse`].
    pub fn describe(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Self::Constant(w) => format!("const:{w}"),
            Self::PiecewiseConstant { breakpoints, weights } => {
                format!("piecewise:{};{}", join(breakpoints), join(weights))
            }
            Self::LeftInterval { w, r } => format!("left:{w},{r}"),
            Self::RightInterval { w, l } => format!("right:{w},{l}"),
            Self::RampUp { w, r } => format!("rampup:{w},{r}"),
            Self::RampDown { w, l } => format!("rampdown:{w},{l}"),
        }
    }
}

fn check_unit(x: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidSchedule(format!("{what} must lie in [0, 1], got {x}")))
    }
}

impl std::fmt::Display for GuidanceSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_values() {
        assert_eq!(GuidanceSchedule::Constant(3.5).eval(0.2), 3.5);
        let up = GuidanceSchedule::ramp_up(2.0, 0.5).unwrap();
        assert_eq!(up.eval(0.25), 1.0);
        assert_eq!(up.eval(0.75), 2.0);
        let right = GuidanceSchedule::right_interval(3.0, 0.6).unwrap();
        assert_eq!(right.eval(0.5), 0.0);
        assert_eq!(right.eval(0.7), 3.0);
        let left = GuidanceSchedule::left_interval(3.0, 0.4).unwrap();
        assert_eq!(left.eval(0.4), 3.0);
        assert_eq!(left.eval(0.41), 0.0);
        let down = GuidanceSchedule::ramp_down(2.0, 0.5).unwrap();
        assert_eq!(down.eval(0.25), 2.0);
        assert_eq!(down.eval(0.75), 1.0);
    }

    #[test]
    fn piecewise_forms() {
        let a = GuidanceSchedule::parse("piecewise:0.3,0.6;1,2,4").unwrap();
        let b = GuidanceSchedule::parse("piecewise:0,0.3,0.6,1;1,2,4").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.eval(0.0), 1.0);
        assert_eq!(a.eval(0.3), 2.0);
        assert_eq!(a.eval(0.59), 2.0);
        assert_eq!(a.eval(1.0), 4.0);
        assert!(GuidanceSchedule::parse("piecewise:0.6,0.3;1,2,4").is_err());
        assert!(GuidanceSchedule::parse("piecewise:0.3;1,2,4").is_err());
    }

    #[test]
    fn parse_round_trip() {
        for s in ["const:2", "left:3,0.4", "right:3,0.6", "rampup:2,0.5", "rampdown:1.5,0.25", "piecewise:0,0.5,1;1,3"] {
            let g = GuidanceSchedule::parse(s).unwrap();
            assert_eq!(g.describe(), s);
            assert_eq!(GuidanceSchedule::parse(&g.describe()).unwrap(), g);
        }
        assert_eq!(GuidanceSchedule::parse("rampup:2,0.5").unwrap(), GuidanceSchedule::RampUp { w: 2.0, r: 0.5 });
        assert!(GuidanceSchedule::parse("bogus:1").is_err());
        assert!(GuidanceSchedule::parse("rampup:2,0").is_err());
        assert!(GuidanceSchedule::parse("const").is_err());
    }

    #[test]
    fn segments_in_diffusion_time() {
        let g = GuidanceSchedule::parse("piecewise:0.25,0.5;1,2,4").unwrap();
        let (times, weights) = g.piecewise_segments(1.0, 0.001).unwrap();
        assert_eq!(times, vec![0.001, 0.5, 0.75, 1.0]);
        assert_eq!(weights, vec![4.0, 2.0, 1.0]);
        for (k, &w) in weights.iter().enumerate() {
            let mid = 0.5 * (times[k] + times[k + 1]);
            assert_eq!(g.at_time(mid, 1.0), w);
        }
        assert!(GuidanceSchedule::ramp_up(1.0, 0.5).unwrap().piecewise_segments(1.0, 0.0).is_none());
        let (t, w) = GuidanceSchedule::Constant(2.0).piecewise_segments(2.0, 0.01).unwrap();
        assert_eq!((t, w), (vec![0.01, 2.0], vec![2.0]));
    }

    #[test]
    fn progress_conversion() {
        assert_eq!(progress_to_time(0.0, 2.0), 2.0);
        assert_eq!(progress_to_time(1.0, 2.0), 0.0);
        assert_eq!(time_to_progress(0.5, 2.0), 0.75);
    }
}
