//! Run configuration: built-in defaults, optionally overridden by a TOML
//! file, then by command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detect::NoiseMethod;
use crate::preprocess::FilterSpec;
use crate::theory::ElementParams;
use crate::{Error, Result};

pub const DAYS_PER_YEAR: f64 = 365.25;

/// A duration as written in a config value: `12` or `12s` are samples,
/// `12d`, `2w`, `3m`, `1y` are time units (days), and the number may be a
/// fraction such as `1/3y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Period {
    Samples(f64),
    Days(f64),
}

impl Period {
    pub fn parse(text: &str) -> std::result::Result<Period, String> {
        let t = text.trim();
        let (number, unit) = match t.char_indices().last() {
            Some((i, c)) if c.is_ascii_alphabetic() => (&t[..i], Some(c.to_ascii_lowercase())),
            _ => (t, None),
        };
        let value = parse_number(number.trim()).ok_or_else(|| format!("cannot parse `{text}` as a period"))?;
        if !(value.is_finite() && value > 0.0) {
            return Err(format!("period `{text}` must be positive"));
        }
        Ok(match unit {
            None | Some('s') => Period::Samples(value),
            Some('d') => Period::Days(value),
            Some('w') => Period::Days(7.0 * value),
            Some('m') => Period::Days(DAYS_PER_YEAR / 12.0 * value),
            Some('y') => Period::Days(DAYS_PER_YEAR * value),
            Some(u) => return Err(format!("unknown period unit `{u}` in `{text}` (use s, d, w, m or y)")),
        })
    }

    pub fn samples(self, dt: f64) -> f64 {
        match self {
            Period::Samples(v) => v,
            Period::Days(v) => v / dt,
        }
    }

    pub fn days(self, dt: f64) -> f64 {
        match self {
            Period::Samples(v) => v * dt,
            Period::Days(v) => v,
        }
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
        None => s.parse().ok(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMethodName {
    MonteCarlo,
    AnalyticWhite,
}

impl std::str::FromStr for NoiseMethodName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "monte-carlo" => Ok(NoiseMethodName::MonteCarlo),
            "analytic-white" => Ok(NoiseMethodName::AnalyticWhite),
            other => Err(format!("unknown noise method `{other}` (monte-carlo or analytic-white)")),
        }
    }
}

/// Fully resolved run parameters. Period-valued fields keep their textual
/// form so the echoed config reads the way it was written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub beta: f64,
    pub gamma: f64,
    pub mu: f64,
    pub min_period: String,
    pub max_period: String,
    pub voxels_per_octave: u32,
    pub alpha: f64,
    pub noise_method: NoiseMethodName,
    pub mc_trials: usize,
    pub seed: u64,
    pub filter: bool,
    pub cutoff_period: String,
    pub filter_order: u32,
    pub dt: String,
    pub max_gap: f64,
    pub decay_multiplier: f64,
    pub date_column: String,
    pub value_column: String,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            beta: 3.0,
            gamma: 1.0,
            mu: 3.0,
            min_period: "4".into(),
            max_period: "128".into(),
            voxels_per_octave: 16,
            alpha: 0.05,
            noise_method: NoiseMethodName::MonteCarlo,
            mc_trials: 200,
            seed: 42,
            filter: true,
            cutoff_period: "1/3y".into(),
            filter_order: 3,
            dt: "1d".into(),
            max_gap: 10.0,
            decay_multiplier: crate::cwt::DEFAULT_DECAY_MULTIPLIER,
            date_column: "date".into(),
            value_column: "value".into(),
        }
    }
}

/// Partial configuration: a config file or a set of command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub mu: Option<f64>,
    pub min_period: Option<String>,
    pub max_period: Option<String>,
    pub voxels_per_octave: Option<u32>,
    pub alpha: Option<f64>,
    pub noise_method: Option<NoiseMethodName>,
    pub mc_trials: Option<usize>,
    pub seed: Option<u64>,
    pub filter: Option<bool>,
    pub cutoff_period: Option<String>,
    pub filter_order: Option<u32>,
    pub dt: Option<String>,
    pub max_gap: Option<f64>,
    pub decay_multiplier: Option<f64>,
    pub date_column: Option<String>,
    pub value_column: Option<String>,
}

macro_rules! apply_fields {
    ($cfg:expr, $o:expr, $($f:ident),*) => {
        $( if let Some(v) = &$o.$f { $cfg.$f = v.clone(); } )*
    };
}

impl AnalysisConfig {
    pub fn apply(mut self, o: &ConfigOverrides) -> Self {
        apply_fields!(
            self, o, beta, gamma, mu, min_period, max_period, voxels_per_octave, alpha, noise_method,
            mc_trials, seed, filter, cutoff_period, filter_order, dt, max_gap, decay_multiplier,
            date_column, value_column
        );
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("{v} must be positive")))
            }
        };
        positive("beta", self.beta)?;
        positive("gamma", self.gamma)?;
        positive("mu", self.mu)?;
        positive("decay_multiplier", self.decay_multiplier)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", format!("{} must lie in (0, 1)", self.alpha)));
        }
        if self.voxels_per_octave == 0 {
            return Err(Error::config("voxels_per_octave", "must be at least 1"));
        }
        if self.mc_trials == 0 {
            return Err(Error::config("mc_trials", "must be at least 1"));
        }
        if self.filter_order == 0 {
            return Err(Error::config("filter_order", "must be at least 1"));
        }
        if !(self.max_gap >= 1.0) {
            return Err(Error::config("max_gap", format!("{} must be at least 1", self.max_gap)));
        }
        let dt = self.dt_days()?;
        let lo = self.min_period_samples()?;
        let hi = self.max_period_samples()?;
        if lo >= hi {
            return Err(Error::config(
                "max_period",
                format!("{hi} samples is not above min_period ({lo} samples)"),
            ));
        }
        let cutoff = self.period("cutoff_period", &self.cutoff_period)?;
        if self.filter && cutoff.samples(dt) <= 2.0 {
            return Err(Error::config(
                "cutoff_period",
                format!("{} samples is at or below the Nyquist period", cutoff.samples(dt)),
            ));
        }
        Ok(())
    }

    fn period(&self, field: &str, text: &str) -> Result<Period> {
        Period::parse(text).map_err(|m| Error::config(field, m))
    }

    /// Sample interval in days; a bare number means days.
    pub fn dt_days(&self) -> Result<f64> {
        let t = self.dt.trim();
        let p = if t.ends_with(|c: char| c.is_ascii_alphabetic()) {
            self.period("dt", t)?
        } else {
            Period::Days(parse_number(t).ok_or_else(|| Error::config("dt", format!("cannot parse `{t}`")))?)
        };
        match p {
            Period::Days(d) if d > 0.0 && d.is_finite() => Ok(d),
            _ => Err(Error::config("dt", "must be a positive time interval (e.g. 1d)")),
        }
    }

    pub fn min_period_samples(&self) -> Result<f64> {
        Ok(self.period("min_period", &self.min_period)?.samples(self.dt_days()?))
    }

    pub fn max_period_samples(&self) -> Result<f64> {
        Ok(self.period("max_period", &self.max_period)?.samples(self.dt_days()?))
    }

    pub fn element_params(&self) -> Result<ElementParams> {
        ElementParams::new(self.beta, self.mu, self.gamma)
    }

    pub fn noise_method(&self) -> NoiseMethod {
        match self.noise_method {
            NoiseMethodName::AnalyticWhite => NoiseMethod::AnalyticWhite,
            NoiseMethodName::MonteCarlo => NoiseMethod::MonteCarlo {
                trials: self.mc_trials,
                seed: self.seed,
            },
        }
    }

    /// High-pass specification in cycles per day, or `None` when filtering is
    /// disabled.
    pub fn filter_spec(&self) -> Result<Option<FilterSpec>> {
        if !self.filter {
            return Ok(None);
        }
        let days = self.period("cutoff_period", &self.cutoff_period)?.days(self.dt_days()?);
        Ok(Some(FilterSpec::highpass(self.filter_order, 1.0 / days)))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn parse_overrides(text: &str, origin: &str) -> Result<ConfigOverrides> {
    toml::from_str(text).map_err(|e| Error::config(origin, e.to_string()))
}

/// Defaults, then the file at `path` (if any), then `flags`; validated.
pub fn load_config(path: Option<&Path>, flags: &ConfigOverrides) -> Result<AnalysisConfig> {
    let mut cfg = AnalysisConfig::default();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        cfg = cfg.apply(&parse_overrides(&text, &p.display().to_string())?);
    }
    let cfg = cfg.apply(flags);
    cfg.validate()?;
    Ok(cfg)
}
