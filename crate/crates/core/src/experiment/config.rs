use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{UiError, UiResult};
use crate::optics::Amplitude;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    TwoRef,
    MultiRef,
    Weak,
    RecoveryRounds,
    SameUnknown,
    SplittingCompare,
    NoiseRates,
    OptimalitySweep,
    GaussianIntegralCheck,
}

impl Protocol {
    pub const ALL: [Protocol; 9] = [
        Protocol::TwoRef,
        Protocol::MultiRef,
        Protocol::Weak,
        Protocol::RecoveryRounds,
        Protocol::SameUnknown,
        Protocol::SplittingCompare,
        Protocol::NoiseRates,
        Protocol::OptimalitySweep,
        Protocol::GaussianIntegralCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::TwoRef => "two_ref",
            Protocol::MultiRef => "multi_ref",
            Protocol::Weak => "weak",
            Protocol::RecoveryRounds => "recovery_rounds",
            Protocol::SameUnknown => "same_unknown",
            Protocol::SplittingCompare => "splitting_compare",
            Protocol::NoiseRates => "noise_rates",
            Protocol::OptimalitySweep => "optimality_sweep",
            Protocol::GaussianIntegralCheck => "gaussian_integral_check",
        }
    }

    /// Scalar parameters that a sweep may vary.
    pub fn sweepable(self) -> &'static [&'static str] {
        match self {
            Protocol::TwoRef => &["delta", "t1"],
            Protocol::MultiRef => &["scale"],
            Protocol::Weak => &["delta"],
            Protocol::RecoveryRounds => &["delta"],
            Protocol::SameUnknown => &["delta"],
            Protocol::SplittingCompare => &["delta"],
            Protocol::NoiseRates => &["sigma", "xi"],
            Protocol::OptimalitySweep => &["delta"],
            Protocol::GaussianIntegralCheck => &["sigma", "a", "b"],
        }
    }

    /// Every parameter key the protocol reads.
    pub fn known_keys(self) -> &'static [&'static str] {
        match self {
            Protocol::TwoRef => &[
                "n_a", "n_b", "n_c", "t1", "delta", "alpha1", "alpha2", "priors",
            ],
            Protocol::MultiRef => &["m", "n_a", "n_b", "ref_amps", "scale"],
            Protocol::Weak => &["delta", "rounds"],
            Protocol::RecoveryRounds => &["delta", "rounds", "recursion"],
            Protocol::SameUnknown => &["delta"],
            Protocol::SplittingCompare => &["delta", "rounds", "recursion"],
            Protocol::NoiseRates => &["n_a", "n_b", "sigma", "xi"],
            Protocol::OptimalitySweep => &["delta"],
            Protocol::GaussianIntegralCheck => &["a", "b", "sigma", "x", "m_max", "grid"],
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = UiError;

    fn from_str(s: &str) -> UiResult<Self> {
        let norm = s.replace('-', "_");
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| UiError::config("protocol", format!("unknown protocol `{s}`")))
    }
}

/// One swept parameter: `steps + 1` evenly spaced points from `min` to `max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 0 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / self.steps as f64;
        (0..=self.steps)
            .map(|i| {
                if i == self.steps {
                    self.max
                } else {
                    self.min + i as f64 * h
                }
            })
            .collect()
    }
}

/// A complete, serialisable experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    #[serde(default)]
    pub parameters: Map<String, Value>,
    /// Monte Carlo shots per point; 0 evaluates closed forms only.
    #[serde(default)]
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

impl ExperimentConfig {
    pub fn new(protocol: Protocol) -> Self {
        Self {
            protocol,
            parameters: Map::new(),
            shots: 0,
            seed: 0,
            sweep: None,
        }
    }

    pub fn from_json(text: &str) -> UiResult<Self> {
        serde_json::from_str(text)
            .map_err(|e| UiError::config(json_error_key(&e, text), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn with_sweep(mut self, parameter: &str, min: f64, max: f64, steps: usize) -> Self {
        self.sweep = Some(Sweep {
            parameter: parameter.to_string(),
            min,
            max,
            steps,
        });
        self
    }

    /// Default parameters and sweep for each protocol.
    pub fn default_for(protocol: Protocol) -> Self {
        let cfg = Self::new(protocol);
        match protocol {
            Protocol::TwoRef => cfg.with_sweep("delta", 0.0, 4.0, 40),
            Protocol::MultiRef => cfg
                .with_param("m", 3)
                .with_param(
                    "ref_amps",
                    serde_json::json!([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]),
                )
                .with_sweep("scale", 0.0, 2.0, 20),
            Protocol::Weak => cfg.with_sweep("delta", 0.0, 4.0, 40),
            Protocol::RecoveryRounds => cfg.with_sweep("delta", 0.0, 6.0, 120),
            Protocol::SameUnknown => cfg.with_sweep("delta", 0.0, 4.0, 40),
            Protocol::SplittingCompare => cfg.with_sweep("delta", 0.1, 4.0, 39),
            Protocol::NoiseRates => cfg.with_param("sigma", 0.25).with_sweep("xi", 0.1, 5.0, 49),
            Protocol::OptimalitySweep => cfg.with_sweep("delta", 0.1, 4.0, 39),
            Protocol::GaussianIntegralCheck => cfg,
        }
    }

    /// Rejects unknown keys and unsweepable sweep axes up front.
    pub fn validate(&self) -> UiResult<()> {
        let known = self.protocol.known_keys();
        if let Some(key) = self
            .parameters
            .keys()
            .find(|k| !known.contains(&k.as_str()))
        {
            return Err(UiError::config(
                format!("parameters.{key}"),
                format!("not a parameter of {}", self.protocol),
            ));
        }
        if let Some(sweep) = &self.sweep {
            if !self
                .protocol
                .sweepable()
                .contains(&sweep.parameter.as_str())
            {
                return Err(UiError::config(
                    "sweep.parameter",
                    format!(
                        "`{}` cannot be swept for {}; choose one of {:?}",
                        sweep.parameter,
                        self.protocol,
                        self.protocol.sweepable()
                    ),
                ));
            }
            if !(sweep.min.is_finite() && sweep.max.is_finite()) {
                return Err(UiError::config("sweep.min", "sweep bounds must be finite"));
            }
        }
        Ok(())
    }
}

/// Best-effort key name for a JSON decoding error.
fn json_error_key(e: &serde_json::Error, text: &str) -> String {
    let msg = e.to_string();
    for marker in ["missing field `", "unknown field `", "unknown variant `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            let name = rest.split('`').next().unwrap_or_default();
            if marker == "unknown variant `" {
                return "protocol".into();
            }
            return name.to_string();
        }
    }
    if e.is_syntax() || e.is_eof() || text.trim().is_empty() {
        return "<document>".into();
    }
    "<document>".into()
}

/// Parameter lookup with key-named errors.
#[derive(Clone, Debug)]
pub struct Params<'a> {
    map: &'a Map<String, Value>,
    overrides: Vec<(String, f64)>,
}

impl<'a> Params<'a> {
    pub fn new(map: &'a Map<String, Value>) -> Self {
        Self {
            map,
            overrides: Vec::new(),
        }
    }

    pub fn with_override(mut self, key: &str, value: f64) -> Self {
        self.overrides.push((key.to_string(), value));
        self
    }

    fn key(name: &str) -> String {
        format!("parameters.{name}")
    }

    pub fn has(&self, name: &str) -> bool {
        self.overrides.iter().any(|(k, _)| k == name) || self.map.contains_key(name)
    }

    pub fn f64(&self, name: &str) -> UiResult<f64> {
        if let Some((_, v)) = self.overrides.iter().find(|(k, _)| k == name) {
            return Ok(*v);
        }
        let v = self
            .map
            .get(name)
            .ok_or_else(|| UiError::config(Self::key(name), "required"))?;
        v.as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| UiError::config(Self::key(name), format!("expected a number, got {v}")))
    }

    pub fn f64_or(&self, name: &str, default: f64) -> UiResult<f64> {
        if self.has(name) {
            self.f64(name)
        } else {
            Ok(default)
        }
    }

    pub fn usize_or(&self, name: &str, default: usize) -> UiResult<usize> {
        if !self.has(name) {
            return Ok(default);
        }
        let x = self.f64(name)?;
        if x < 0.0 || x.fract() != 0.0 {
            return Err(UiError::config(
                Self::key(name),
                format!("expected a non-negative integer, got {x}"),
            ));
        }
        Ok(x as usize)
    }

    pub fn usize_list_or(&self, name: &str, default: &[usize]) -> UiResult<Vec<usize>> {
        let Some(v) = self.map.get(name) else {
            return Ok(default.to_vec());
        };
        let err = || {
            UiError::config(
                Self::key(name),
                format!("expected a list of non-negative integers, got {v}"),
            )
        };
        match v {
            Value::Array(items) => items
                .iter()
                .map(|x| x.as_u64().map(|n| n as usize).ok_or_else(err))
                .collect(),
            other => other.as_u64().map(|n| vec![n as usize]).ok_or_else(err),
        }
    }

    pub fn f64_list_or(&self, name: &str, default: &[f64]) -> UiResult<Vec<f64>> {
        let Some(v) = self.map.get(name) else {
            return Ok(default.to_vec());
        };
        let err = || {
            UiError::config(
                Self::key(name),
                format!("expected a list of numbers, got {v}"),
            )
        };
        let items = v.as_array().ok_or_else(err)?;
        items.iter().map(|x| x.as_f64().ok_or_else(err)).collect()
    }

    fn parse_amp(v: &Value) -> Option<Amplitude> {
        match v {
            Value::Array(pair) if pair.len() == 2 => {
                Some(Amplitude::new(pair[0].as_f64()?, pair[1].as_f64()?))
            }
            Value::Number(n) => Some(Amplitude::new(n.as_f64()?, 0.0)),
            _ => None,
        }
    }

    pub fn amp(&self, name: &str) -> UiResult<Amplitude> {
        let v = self
            .map
            .get(name)
            .ok_or_else(|| UiError::config(Self::key(name), "required"))?;
        Self::parse_amp(v)
            .ok_or_else(|| UiError::config(Self::key(name), format!("expected [re, im], got {v}")))
    }

    pub fn amp_list(&self, name: &str) -> UiResult<Vec<Amplitude>> {
        let v = self
            .map
            .get(name)
            .ok_or_else(|| UiError::config(Self::key(name), "required"))?;
        let err = || {
            UiError::config(
                Self::key(name),
                format!("expected a list of [re, im] pairs, got {v}"),
            )
        };
        v.as_array()
            .ok_or_else(err)?
            .iter()
            .map(|x| Self::parse_amp(x).ok_or_else(err))
            .collect()
    }

    pub fn string_or(&self, name: &str, default: &str) -> UiResult<String> {
        match self.map.get(name) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(v) => Err(UiError::config(
                Self::key(name),
                format!("expected a string, got {v}"),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
            assert_eq!(p.name().replace('_', "-").parse::<Protocol>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.name()));
        }
        assert!("bogus".parse::<Protocol>().is_err());
    }

    #[test]
    fn sweep_points_inclusive() {
        let s = Sweep {
            parameter: "delta".into(),
            min: 0.0,
            max: 6.0,
            steps: 120,
        };
        let pts = s.points();
        assert_eq!(pts.len(), 121);
        assert_eq!(pts[0], 0.0);
        assert_eq!(pts[120], 6.0);
        assert!((pts[60] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn config_errors_name_the_key() {
        let err = ExperimentConfig::from_json(r#"{"parameters": {}}"#).unwrap_err();
        assert_eq!(err, UiError::config("protocol", err_msg(&err)));
        let err = ExperimentConfig::from_json(r#"{"protocol": "nope"}"#).unwrap_err();
        assert!(matches!(err, UiError::Config { ref key, .. } if key == "protocol"));
        let err = ExperimentConfig::from_json(r#"{"protocol": "weak", "shotz": 3}"#).unwrap_err();
        assert!(matches!(err, UiError::Config { ref key, .. } if key == "shotz"));

        let cfg = ExperimentConfig::new(Protocol::Weak).with_param("sigma", 0.1);
        assert!(
            matches!(cfg.validate(), Err(UiError::Config { ref key, .. }) if key == "parameters.sigma")
        );
        let cfg = ExperimentConfig::new(Protocol::Weak).with_sweep("rounds", 1.0, 4.0, 3);
        assert!(
            matches!(cfg.validate(), Err(UiError::Config { ref key, .. }) if key == "sweep.parameter")
        );
    }

    fn err_msg(e: &UiError) -> String {
        match e {
            UiError::Config { message, .. } => message.clone(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn params_lookup() {
        let cfg = ExperimentConfig::new(Protocol::TwoRef)
            .with_param("n_a", 2)
            .with_param("alpha1", serde_json::json!([0.5, -1.0]))
            .with_param("t1", "x");
        let p = Params::new(&cfg.parameters);
        assert_eq!(p.usize_or("n_a", 1).unwrap(), 2);
        assert_eq!(p.usize_or("n_b", 1).unwrap(), 1);
        assert_eq!(p.amp("alpha1").unwrap(), Amplitude::new(0.5, -1.0));
        assert!(
            matches!(p.f64("t1"), Err(UiError::Config { ref key, .. }) if key == "parameters.t1")
        );
        assert!(
            matches!(p.amp("alpha2"), Err(UiError::Config { ref key, .. }) if key == "parameters.alpha2")
        );
        let p = p.with_override("t1", 0.3);
        assert_eq!(p.f64("t1").unwrap(), 0.3);
    }

    #[test]
    fn json_round_trip() {
        for p in Protocol::ALL {
            let cfg = ExperimentConfig::default_for(p);
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
        }
    }
}
