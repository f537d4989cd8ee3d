//! Plain `key = value` run configuration.
//!
//! Keys mirror [`SqueezerParams`] plus the acquisition settings. Blank lines
//! and lines starting with `#` are ignored. Later assignments win, so a file
//! can be layered over the built-in defaults and then overridden again.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{LockQuadrature, ModelError, SqueezerParams};

pub const CONFIG_ENV: &str = "TMSQ_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`")]
    BadValue { line: usize, key: String, value: String },
    #[error(transparent)]
    Params(#[from] ModelError),
    #[error("acquisition setting `{0}`")]
    Acquisition(String),
}

/// Physical parameters together with how the record is acquired.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SqueezerParams,
    pub sample_rate: f64,
    pub samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: SqueezerParams::paper_like(),
            sample_rate: 50.0e6,
            samples: 1 << 23,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.apply_str(&text)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: body.to_string(),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                SetError::Unknown => ConfigError::UnknownKey {
                    line,
                    key: key.trim().to_string(),
                },
                SetError::Value => ConfigError::BadValue {
                    line,
                    key: key.trim().to_string(),
                    value: value.trim().to_string(),
                },
            })?;
        }
        Ok(())
    }

    /// Applies one assignment, e.g. from a `--set key=value` flag.
    pub fn apply_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        self.apply_str(pair)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), SetError> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, SetError> {
            v.parse().map_err(|_| SetError::Value)
        }
        let p = &mut self.params;
        match key {
            "sample_rate_hz" => self.sample_rate = num(value)?,
            "samples" => self.samples = num(value)?,
            "r0" => p.r0 = num(value)?,
            "gain_bandwidth_hz" => p.gain_bandwidth = num(value)?,
            "profile_order" => p.profile_order = num(value)?,
            "eta_probe" => p.eta_probe = num(value)?,
            "eta_conjugate" => p.eta_conjugate = num(value)?,
            "group_delay_s" => p.group_delay = num(value)?,
            "lock_quadrature" => {
                p.lock = match value {
                    "X" | "x" => LockQuadrature::X,
                    "P" | "p" => LockQuadrature::P,
                    _ => return Err(SetError::Value),
                }
            }
            "lock_jitter_rad" => p.lock_jitter = num(value)?,
            "electronic_noise" => p.electronic_noise = num(value)?,
            "highpass_hz" => p.highpass = num(value)?,
            "adc_bits" => p.adc_bits = num(value)?,
            "adc_fullscale" => p.adc_fullscale = num(value)?,
            _ => return Err(SetError::Unknown),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(ConfigError::Acquisition(format!(
                "sample_rate_hz = {} must be > 0",
                self.sample_rate
            )));
        }
        if !self.samples.is_power_of_two() || self.samples < crate::synth::MIN_SAMPLES {
            return Err(ConfigError::Acquisition(format!(
                "samples = {} must be a power of two >= 16384",
                self.samples
            )));
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("sample_rate_hz".to_string(), format_f64(self.sample_rate)),
            ("samples".to_string(), self.samples.to_string()),
        ];
        out.extend(params_to_pairs(&self.params));
        out
    }

    /// The effective configuration in the same syntax [`apply_str`] reads.
    ///
    /// [`apply_str`]: RunConfig::apply_str
    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

enum SetError {
    Unknown,
    Value,
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn params_to_pairs(p: &SqueezerParams) -> Vec<(String, String)> {
    [
        ("r0", format_f64(p.r0)),
        ("gain_bandwidth_hz", format_f64(p.gain_bandwidth)),
        ("profile_order", p.profile_order.to_string()),
        ("eta_probe", format_f64(p.eta_probe)),
        ("eta_conjugate", format_f64(p.eta_conjugate)),
        ("group_delay_s", format_f64(p.group_delay)),
        ("lock_quadrature", p.lock.as_str().to_string()),
        ("lock_jitter_rad", format_f64(p.lock_jitter)),
        ("electronic_noise", format_f64(p.electronic_noise)),
        ("highpass_hz", format_f64(p.highpass)),
        ("adc_bits", p.adc_bits.to_string()),
        ("adc_fullscale", format_f64(p.adc_fullscale)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Reads parameters back from `param.*` entries of trace metadata.
pub fn params_from_meta(meta: &BTreeMap<String, String>) -> Option<SqueezerParams> {
    let mut cfg = RunConfig::default();
    let mut found = false;
    for (k, v) in meta {
        if let Some(key) = k.strip_prefix("param.") {
            cfg.set(key, v).ok()?;
            found = true;
        }
    }
    found.then_some(cfg.params)
}

/// First 16 hex digits of the SHA-256 of the canonical parameter text.
pub fn params_digest(p: &SqueezerParams) -> String {
    let mut h = Sha256::new();
    for (k, v) in params_to_pairs(p) {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.params = SqueezerParams::apparatus();
        cfg.params.lock = LockQuadrature::P;
        let mut back = RunConfig {
            params: SqueezerParams::vacuum(&SqueezerParams::paper_like()),
            sample_rate: 1.0,
            samples: 1,
        };
        back.apply_str(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn later_assignments_win_and_comments_skip() {
        let mut cfg = RunConfig::default();
        cfg.apply_str("# comment\n\neta_probe = 0.5\neta_probe=0.6\n").unwrap();
        assert_eq!(cfg.params.eta_probe, 0.6);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.apply_str("\nfoo = 1"), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(cfg.apply_str("r0 = abc"), Err(ConfigError::BadValue { line: 1, .. })));
        assert!(matches!(cfg.apply_str("r0 1"), Err(ConfigError::Syntax { line: 1, .. })));
        cfg.apply_str("samples = 1000").unwrap();
        assert!(matches!(cfg.validate(), Err(ConfigError::Acquisition(_))));
    }

    #[test]
    fn digest_tracks_parameters() {
        let a = SqueezerParams::paper_like();
        let b = SqueezerParams { r0: 0.5, ..a.clone() };
        assert_eq!(params_digest(&a), params_digest(&a.clone()));
        assert_ne!(params_digest(&a), params_digest(&b));
        assert_eq!(params_digest(&a).len(), 16);
    }

    #[test]
    fn shipped_presets_match_constructors() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
        let cfg = RunConfig::from_file(&dir.join("paper-like.conf")).unwrap();
        assert_eq!(cfg, RunConfig::default());
        let mut cfg = RunConfig::default();
        cfg.apply_file(&dir.join("paper-like.conf")).unwrap();
        cfg.apply_file(&dir.join("apparatus.conf")).unwrap();
        assert_eq!(cfg.params, SqueezerParams::apparatus());
    }

    #[test]
    fn params_recovered_from_metadata() {
        let p = SqueezerParams::apparatus();
        let meta: BTreeMap<String, String> = params_to_pairs(&p)
            .into_iter()
            .map(|(k, v)| (format!("param.{k}"), v))
            .collect();
        assert_eq!(params_from_meta(&meta), Some(p));
        assert_eq!(params_from_meta(&BTreeMap::new()), None);
    }
}
