//! Hardware and architecture parameters of a repeater chain, their validation,
//! and the flat JSON configuration format.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// All scalar parameters of the repeater architecture.
///
/// Field names double as the configuration keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Single-photon source emission probability per pulse.
    pub eta_p: f64,
    /// Storage efficiency of a photon into an ensemble.
    pub eta_s: f64,
    /// T -> S conversion (anti-Stokes emission) efficiency.
    pub eta_e1: f64,
    /// S -> photon retrieval efficiency.
    pub eta_e2: f64,
    /// Single-photon detector efficiency.
    pub eta_d: f64,
    /// Source repetition rate in Hz.
    pub r_hz: f64,
    /// Total communication distance in km.
    pub l_km: f64,
    /// Fiber attenuation length in km.
    pub l_att_km: f64,
    /// Speed of light in fiber, km/s.
    pub c_km_s: f64,
    /// Number of swap levels; the chain has `2^n` elementary links.
    pub n: u32,
    /// Dark-count probability per detector per detection window.
    pub p_d: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self::paper_defaults()
    }
}

impl ProtocolParams {
    /// The operating point used for the headline numbers: a 1280 km chain of
    /// 16 elementary links fed by a 39.2 MHz source.
    pub const fn paper_defaults() -> Self {
        Self {
            eta_p: 0.9,
            eta_s: 0.9,
            eta_e1: 0.05,
            eta_e2: 0.9,
            eta_d: 0.9,
            r_hz: 39.2e6,
            l_km: 1280.0,
            l_att_km: 22.0,
            c_km_s: 2.0e5,
            n: 4,
            p_d: 5e-6,
        }
    }

    /// Every efficiency set to one, no dark counts. Useful for limit checks.
    pub fn ideal() -> Self {
        Self {
            eta_p: 1.0,
            eta_s: 1.0,
            eta_e1: 1.0,
            eta_e2: 1.0,
            eta_d: 1.0,
            p_d: 0.0,
            ..Self::paper_defaults()
        }
    }

    pub fn with_n(self, n: u32) -> Self {
        Self { n, ..self }
    }

    /// Number of elementary links, `2^n`.
    pub fn links(&self) -> u64 {
        1u64.checked_shl(self.n).unwrap_or(0)
    }

    /// Elementary link length `L / 2^n`. Division by a power of two is exact
    /// in binary floating point, so `l0_km() * 2^n == l_km` unless it underflows.
    pub fn l0_km(&self) -> f64 {
        self.l_km * 2f64.powi(-(self.n.min(i32::MAX as u32) as i32))
    }

    /// One-way light travel time across an elementary link, seconds.
    pub fn link_delay_s(&self) -> f64 {
        self.l0_km() / self.c_km_s
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut violations = Vec::new();
        let mut check = |field: &'static str, ok: bool, rule: &'static str, value: f64| {
            if !ok {
                violations.push(Violation { field, rule, value });
            }
        };

        for (field, value) in [
            ("eta_p", self.eta_p),
            ("eta_s", self.eta_s),
            ("eta_e1", self.eta_e1),
            ("eta_e2", self.eta_e2),
            ("eta_d", self.eta_d),
        ] {
            check(field, (0.0..=1.0).contains(&value), "must lie in [0, 1]", value);
        }
        check("p_d", (0.0..1.0).contains(&self.p_d), "must lie in [0, 1)", self.p_d);
        for (field, value) in [
            ("r_hz", self.r_hz),
            ("l_km", self.l_km),
            ("l_att_km", self.l_att_km),
            ("c_km_s", self.c_km_s),
        ] {
            check(field, value > 0.0 && value.is_finite(), "must be positive and finite", value);
        }
        if self.l_km > 0.0 {
            let l0 = self.l0_km();
            check("n", l0 > 0.0 && self.n < 64, "elementary length L/2^n must be positive", self.n as f64);
        }

        if violations.is_empty() {
            Ok(())
        } else {
            Err(ValidationError { violations })
        }
    }

    /// Sets a field by its configuration key.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), ConfigError> {
        let slot = match key {
            "eta_p" => &mut self.eta_p,
            "eta_s" => &mut self.eta_s,
            "eta_e1" => &mut self.eta_e1,
            "eta_e2" => &mut self.eta_e2,
            "eta_d" => &mut self.eta_d,
            "r_hz" => &mut self.r_hz,
            "l_km" => &mut self.l_km,
            "l_att_km" => &mut self.l_att_km,
            "c_km_s" => &mut self.c_km_s,
            "p_d" => &mut self.p_d,
            "n" => {
                if value < 0.0 || value.fract() != 0.0 || value > u32::MAX as f64 {
                    return Err(ConfigError::NotAnInteger { key: key.to_string(), value });
                }
                self.n = value as u32;
                return Ok(());
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        };
        *slot = value;
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "eta_p" => self.eta_p,
            "eta_s" => self.eta_s,
            "eta_e1" => self.eta_e1,
            "eta_e2" => self.eta_e2,
            "eta_d" => self.eta_d,
            "r_hz" => self.r_hz,
            "l_km" => self.l_km,
            "l_att_km" => self.l_att_km,
            "c_km_s" => self.c_km_s,
            "p_d" => self.p_d,
            "n" => self.n as f64,
            _ => return None,
        })
    }

    /// Configuration keys in declaration order.
    pub const KEYS: [&'static str; 11] = [
        "eta_p", "eta_s", "eta_e1", "eta_e2", "eta_d", "r_hz", "l_km", "l_att_km", "c_km_s", "n",
        "p_d",
    ];

    pub fn to_config(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

/// Parses a configuration document. Missing keys keep their default values.
/// An empty (or whitespace-only) document yields the defaults.
pub fn load_config(document: &str) -> Result<ProtocolParams, ConfigError> {
    let params: ProtocolParams = if document.trim().is_empty() {
        ProtocolParams::default()
    } else {
        serde_json::from_str(document).map_err(|e| {
            let msg = e.to_string();
            // serde reports unknown fields as "unknown field `x`, expected ..."
            if let Some(key) = msg
                .strip_prefix("unknown field `")
                .and_then(|rest| rest.split('`').next())
            {
                ConfigError::UnknownKey(key.to_string())
            } else {
                ConfigError::Parse { line: e.line(), column: e.column(), message: msg }
            }
        })?
    };
    params.validate()?;
    Ok(params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: &'static str,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} {}", self.field, self.value, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl ValidationError {
    pub fn fields(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.violations.iter().map(|v| v.field)
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid parameters: ")?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` must be a nonnegative integer, got {value}")]
    NotAnInteger { key: String, value: f64 },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}
