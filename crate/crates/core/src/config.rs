//! Flat `key=value` run configuration shared by the command-line front end
//! and the metadata embedded in every dataset.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::error::Result;
use crate::generator::GeneratorMode;
use crate::params::{make_params, DecaySpec, DecayValue, OffDiagonalRule, OscillationParams};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}{key}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub key: String,
    pub message: String,
    pub line: Option<usize>,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into(), line: None }
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub energy_ev: f64,
    pub dm2_ev2: f64,
    pub theta_rad: f64,
    pub phi_rad: f64,
    pub eta: f64,
    pub decay: [DecayValue; 3],
    pub offdiag: OffDiagonalRule,
    /// `None` means the command's own default.
    pub mode: Option<GeneratorMode>,
    pub t_max: f64,
    pub nodes: usize,
    pub closed_chain: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            energy_ev: 1e7,
            dm2_ev2: 8e-5,
            theta_rad: 0.188 * PI,
            phi_rad: 0.0,
            eta: 1.0,
            decay: [DecayValue::TimesV0(0.095), DecayValue::TimesV0(0.15), DecayValue::TimesV0(0.15)],
            offdiag: OffDiagonalRule::Sqrt,
            mode: None,
            t_max: 2e12,
            nodes: 2001,
            closed_chain: false,
        }
    }
}

/// Keys understood by [`RunConfig::set`].
pub const RUN_KEYS: [&str; 13] = [
    "energy-ev",
    "dm2-ev2",
    "theta-rad",
    "phi-rad",
    "eta",
    "c11",
    "c22",
    "c33",
    "offdiag",
    "mode",
    "t-max-ev-inv",
    "nodes",
    "closed-chain",
];

fn parse_f64(key: &str, value: &str) -> std::result::Result<f64, ConfigError> {
    let x: f64 = value.trim().parse().map_err(|_| ConfigError::new(key, format!("expected a number, got {value:?}")))?;
    if !x.is_finite() {
        return Err(ConfigError::new(key, format!("{value:?} is not finite")));
    }
    Ok(x)
}

pub fn parse_decay_value(key: &str, value: &str) -> std::result::Result<DecayValue, ConfigError> {
    let v = value.trim();
    match v.strip_suffix("v0").or_else(|| v.strip_suffix("V0")) {
        Some(k) => Ok(DecayValue::TimesV0(parse_f64(key, k)?)),
        None => Ok(DecayValue::Absolute(parse_f64(key, v)?)),
    }
}

pub fn format_decay_value(v: DecayValue) -> String {
    match v {
        DecayValue::TimesV0(k) => format!("{k:?}v0"),
        DecayValue::Absolute(x) => format!("{x:?}"),
    }
}

pub fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, ConfigError> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(ConfigError::new(key, format!("expected true or false, got {other:?}"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), ConfigError> {
        match key {
            "energy-ev" => self.energy_ev = parse_f64(key, value)?,
            "dm2-ev2" => self.dm2_ev2 = parse_f64(key, value)?,
            "theta-rad" => self.theta_rad = parse_f64(key, value)?,
            "phi-rad" => self.phi_rad = parse_f64(key, value)?,
            "eta" => self.eta = parse_f64(key, value)?,
            "c11" => self.decay[0] = parse_decay_value(key, value)?,
            "c22" => self.decay[1] = parse_decay_value(key, value)?,
            "c33" => self.decay[2] = parse_decay_value(key, value)?,
            "offdiag" => {
                self.offdiag = match value.trim() {
                    "sqrt" => OffDiagonalRule::Sqrt,
                    "zero" => OffDiagonalRule::Zero,
                    other => return Err(ConfigError::new(key, format!("expected sqrt or zero, got {other:?}"))),
                }
            }
            "mode" => {
                self.mode = Some(
                    GeneratorMode::from_name(value.trim())
                        .ok_or_else(|| ConfigError::new(key, format!("expected paper, derived or flavor, got {:?}", value.trim())))?,
                )
            }
            "t-max-ev-inv" => {
                let t = parse_f64(key, value)?;
                if t < 0.0 {
                    return Err(ConfigError::new(key, "must be non-negative"));
                }
                self.t_max = t;
            }
            "nodes" => {
                let n: usize = value.trim().parse().map_err(|_| ConfigError::new(key, format!("expected a positive integer, got {value:?}")))?;
                if n == 0 {
                    return Err(ConfigError::new(key, "must be at least 1"));
                }
                self.nodes = n;
            }
            "closed-chain" => self.closed_chain = parse_bool(key, value)?,
            _ => return Err(ConfigError::new(key, "unknown key")),
        }
        Ok(())
    }

    pub fn mode_or(&self, default: GeneratorMode) -> GeneratorMode {
        self.mode.unwrap_or(default)
    }

    pub fn decay_spec(&self) -> DecaySpec {
        DecaySpec { diagonal: self.decay, off_diagonal: self.offdiag }
    }

    pub fn params(&self) -> Result<OscillationParams> {
        make_params(self.energy_ev, self.dm2_ev2, self.theta_rad, self.phi_rad, self.eta, &self.decay_spec())
    }

    /// Resolved entries in a form [`RunConfig::set`] reads back bit for bit.
    pub fn entries(&self, mode: GeneratorMode) -> Vec<(String, String)> {
        let offdiag = match self.offdiag {
            OffDiagonalRule::Sqrt => "sqrt",
            OffDiagonalRule::Zero => "zero",
        };
        vec![
            ("energy-ev".into(), format!("{:?}", self.energy_ev)),
            ("dm2-ev2".into(), format!("{:?}", self.dm2_ev2)),
            ("theta-rad".into(), format!("{:?}", self.theta_rad)),
            ("phi-rad".into(), format!("{:?}", self.phi_rad)),
            ("eta".into(), format!("{:?}", self.eta)),
            ("c11".into(), format_decay_value(self.decay[0])),
            ("c22".into(), format_decay_value(self.decay[1])),
            ("c33".into(), format_decay_value(self.decay[2])),
            ("offdiag".into(), offdiag.into()),
            ("mode".into(), mode.name().into()),
            ("t-max-ev-inv".into(), format!("{:?}", self.t_max)),
            ("nodes".into(), self.nodes.to_string()),
            ("closed-chain".into(), self.closed_chain.to_string()),
        ]
    }
}

/// Reads `key=value` pairs from a config file, a CSV dataset or a JSON dataset.
///
/// Plain files: one pair per line, `#` comments and blank lines ignored.
/// When `#config:` lines are present only those are read. JSON input must
/// carry the pairs in `meta.config`.
pub fn parse_config_text(text: &str) -> std::result::Result<Vec<(String, String)>, ConfigError> {
    Ok(parse_config_lines(text)?.into_iter().map(|(k, v, _)| (k, v)).collect())
}

/// As [`parse_config_text`], also returning the source line of each pair.
pub fn parse_config_lines(text: &str) -> std::result::Result<Vec<(String, String, Option<usize>)>, ConfigError> {
    if text.trim_start().starts_with('{') {
        return Ok(parse_json_config(text)?.into_iter().map(|(k, v)| (k, v, None)).collect());
    }
    let embedded = text.lines().any(|l| l.starts_with("#config:"));
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = if embedded {
            match raw.strip_prefix("#config:") {
                Some(rest) => rest.trim(),
                None => continue,
            }
        } else {
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            l
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::new(line, "expected key=value").at_line(i + 1))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(ConfigError::new("", "empty key").at_line(i + 1));
        }
        out.push((key.to_string(), v.trim().to_string(), Some(i + 1)));
    }
    Ok(out)
}

fn parse_json_config(text: &str) -> std::result::Result<Vec<(String, String)>, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::new("json", e.to_string()).at_line(e.line()))?;
    let config = value
        .get("meta")
        .and_then(|m| m.get("config"))
        .and_then(|c| c.as_object())
        .ok_or_else(|| ConfigError::new("meta.config", "JSON input has no embedded config object"))?;
    config
        .iter()
        .map(|(k, v)| match v {
            serde_json::Value::String(s) => Ok((k.clone(), s.clone())),
            other => Ok((k.clone(), other.to_string())),
        })
        .collect()
}

/// Renders pairs as `key=value` lines.
pub fn render_pairs(pairs: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k}={v}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_round_trip() {
        let mut cfg = RunConfig { phi_rad: 0.1 + 0.2, decay: [DecayValue::Absolute(1.5e-13), DecayValue::TimesV0(0.1), DecayValue::TimesV0(0.0)], ..RunConfig::default() };
        cfg.closed_chain = true;
        let entries = cfg.entries(GeneratorMode::FlavorFrame);
        let mut back = RunConfig::default();
        for (k, v) in parse_config_text(&render_pairs(&entries)).unwrap() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, RunConfig { mode: Some(GeneratorMode::FlavorFrame), ..cfg });
    }

    #[test]
    fn embedded_lines_take_precedence() {
        let text = "#config: eta=2\n#meta: eta=5\nphi,r\n0,1\n";
        assert_eq!(parse_config_text(text).unwrap(), vec![("eta".to_string(), "2".to_string())]);
        let json = r#"{"meta": {"config": {"nodes": "11", "mode": "paper"}}, "columns": [], "rows": []}"#;
        let pairs = parse_config_text(json).unwrap();
        assert!(pairs.contains(&("nodes".into(), "11".into())));
    }

    #[test]
    fn errors_carry_line_and_key() {
        let err = parse_config_text("eta=1\n\nbogus line\n").unwrap_err();
        assert_eq!(err.line, Some(3));
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.set("eta", "abc").unwrap_err().key, "eta");
        assert!(cfg.set("nodes", "0").is_err());
        assert!(cfg.set("mode", "weird").is_err());
        assert!(cfg.set("colour", "red").is_err());
        assert!(matches!(parse_decay_value("c11", "0.2v0"), Ok(DecayValue::TimesV0(x)) if x == 0.2));
    }
}
