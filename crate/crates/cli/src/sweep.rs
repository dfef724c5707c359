use std::fmt;
use std::str::FromStr;

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// Pump areal density m/S, cm⁻².
    MDensity,
    /// Signal occupation.
    N,
    /// Wave vector in units of q_res.
    Q,
    /// Electron number.
    Electrons,
    /// Pump − signal − ω_LO, meV.
    Detuning,
    /// Vacuum Rabi splitting 2Ω_R, meV.
    RabiSplitting,
}

impl SweepVariable {
    pub const ALL: [SweepVariable; 6] = [
        SweepVariable::MDensity,
        SweepVariable::N,
        SweepVariable::Q,
        SweepVariable::Electrons,
        SweepVariable::Detuning,
        SweepVariable::RabiSplitting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::MDensity => "m_density",
            SweepVariable::N => "n",
            SweepVariable::Q => "q",
            SweepVariable::Electrons => "N",
            SweepVariable::Detuning => "detuning",
            SweepVariable::RabiSplitting => "rabi_splitting",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|v| v.name()).collect();
            UsageError(format!("unknown sweep variable `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub scale: Scale,
}

/// One swept variable plus the config overrides held fixed across the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub range: Range,
    pub fixed: Vec<(String, String)>,
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, range: Range, fixed: Vec<(String, String)>) -> Result<Self, UsageError> {
        let Range { min, max, points, scale } = range;
        if !(min.is_finite() && max.is_finite()) {
            return Err(UsageError(format!("sweep bounds must be finite, got {min}..{max}")));
        }
        if min >= max {
            return Err(UsageError(format!("sweep needs min < max, got {min}..{max}")));
        }
        if points < 2 {
            return Err(UsageError(format!("sweep needs at least 2 points, got {points}")));
        }
        if scale == Scale::Log && min <= 0.0 {
            return Err(UsageError(format!("log sweep needs min > 0, got {min}")));
        }
        Ok(Self { variable, range, fixed })
    }

    /// Parses `VAR=MIN:MAX:POINTS[:linear|log]`.
    pub fn parse(text: &str, fixed: Vec<(String, String)>) -> Result<Self, UsageError> {
        let bad = || UsageError(format!("sweep `{text}` is not of the form VAR=MIN:MAX:POINTS[:linear|log]"));
        let (var, rest) = text.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let points = parts[2].trim().parse::<usize>().map_err(|_| bad())?;
        let scale = match parts.get(3).map(|s| s.trim()) {
            None | Some("linear") => Scale::Linear,
            Some("log") => Scale::Log,
            Some(_) => return Err(bad()),
        };
        let range = Range { min: num(parts[0])?, max: num(parts[1])?, points, scale };
        Self::new(var.trim().parse()?, range, fixed)
    }

    /// Fails unless the swept variable is one of `allowed`.
    pub fn require(&self, command: &str, allowed: &[SweepVariable]) -> Result<(), UsageError> {
        if allowed.contains(&self.variable) {
            return Ok(());
        }
        let names: Vec<_> = allowed.iter().map(|v| v.name()).collect();
        Err(UsageError(format!("{command} cannot sweep `{}` (allowed: {})", self.variable, names.join(", "))))
    }

    /// Grid points in order; both endpoints are hit exactly.
    pub fn values(&self) -> Vec<f64> {
        let Range { min, max, points, scale } = self.range;
        let last = points - 1;
        (0..points)
            .map(|i| {
                if i == last {
                    return max;
                }
                let t = i as f64 / last as f64;
                match scale {
                    Scale::Linear => min + (max - min) * t,
                    Scale::Log => min * (max / min).powf(t),
                }
            })
            .collect()
    }

    pub fn describe(&self) -> String {
        let Range { min, max, points, scale } = self.range;
        let scale = match scale {
            Scale::Linear => "linear",
            Scale::Log => "log",
        };
        format!("{}={min}:{max}:{points}:{scale}", self.variable)
    }
}
