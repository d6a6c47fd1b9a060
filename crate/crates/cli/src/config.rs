//! Option resolution: command-line flags win over config-file entries, which
//! win over the environment seed and built-in defaults.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Environment variable consulted for the default master seed.
pub const SEED_ENV: &str = "LORASYM_SEED";

/// `key = value` pairs from an optional config file; `#` starts a comment.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    entries: HashMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut entries = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key = value", lineno + 1))?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    /// Typed lookup; config keys use the same names as the long flags.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow!("config key '{key}': {e}")),
        }
    }

    pub fn get_raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// Flag, then config, then default.
pub fn resolve<T: FromStr + Clone>(
    flag: Option<T>,
    config: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(v) = config.get::<T>(key)? {
        return Ok(v);
    }
    Ok(default)
}

/// Seed precedence adds the environment between config and default.
pub fn resolve_seed(flag: Option<u64>, config: &ConfigFile) -> Result<u64> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(v) = config.get::<u64>("seed")? {
        return Ok(v);
    }
    if let Ok(raw) = std::env::var(SEED_ENV) {
        return raw.parse::<u64>().map_err(|e| anyhow!("{SEED_ENV}: {e}"));
    }
    Ok(0)
}

/// Inclusive `start:stop:step` grid in dB; a bare number is a single point.
pub fn parse_snr_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        [single] => vec![single
            .trim()
            .parse::<f64>()
            .with_context(|| format!("snr value '{single}'"))?],
        [start, stop, step] => {
            let start: f64 = start.trim().parse().context("snr start")?;
            let stop: f64 = stop.trim().parse().context("snr stop")?;
            let step: f64 = step.trim().parse().context("snr step")?;
            if step.is_nan() || step <= 0.0 {
                bail!("snr step must be positive, got {step}");
            }
            if stop < start {
                bail!("snr grid must be increasing: {start}:{stop}:{step}");
            }
            let count = ((stop - start) / step + 1.0 + 1e-9).floor() as usize;
            (0..count).map(|i| start + step * i as f64).collect()
        }
        _ => bail!("expected 'start:stop:step' or a single value, got '{spec}'"),
    };
    if grid.is_empty() {
        bail!("snr grid is empty");
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        bail!("snr grid must be strictly increasing");
    }
    Ok(grid)
}

/// Trial counts accept scientific notation (`2e5`) and plain integers.
pub fn parse_trials(spec: &str) -> Result<u64> {
    if let Ok(v) = spec.parse::<u64>() {
        if v == 0 {
            bail!("trial count must be at least 1");
        }
        return Ok(v);
    }
    let v: f64 = spec
        .parse()
        .with_context(|| format!("trial count '{spec}'"))?;
    if !v.is_finite() || !(1.0..=1e15).contains(&v) {
        bail!("trial count out of range: {spec}");
    }
    Ok(v.round() as u64)
}

/// Comma-separated spreading factors.
pub fn parse_sf_list(spec: &str) -> Result<Vec<u32>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .with_context(|| format!("spreading factor '{s}'"))
        })
        .collect()
}
