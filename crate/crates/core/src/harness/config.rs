use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::replicate::{ClaimSpec, PathMeasure};
use crate::signals::SignalFunctional;
use crate::utility::UtilityModel;
use crate::walks::{make_step_distribution, StepDistribution, StepSpec};

/// Thread-count override; unset or `0` means one worker per core.
pub const THREADS_ENV: &str = "INSIDER_LAB_THREADS";

/// Flat JSON experiment description. Every key except `n` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// `rademacher`, `skewed_three_point` or `explicit`.
    pub dist: String,
    /// Atoms `[value, probability]` when `dist` is `explicit`.
    pub atoms: Option<Vec<(f64, f64)>>,
    /// `terminal_value`, `running_max` or `future_ratio`.
    pub signal: String,
    /// Anchor date of the future ratio; defaults to `t`.
    pub anchor_t: Option<f64>,
    /// `log` or `power`.
    pub utility: String,
    pub gamma: Option<f64>,
    pub shift: f64,
    pub x: Vec<f64>,
    pub t: f64,
    pub n: Vec<usize>,
    pub seed: u64,
    pub trials: usize,
    pub eps: f64,
    /// `capped_call`, `cash_or_nothing`, `constant` or `collar`.
    pub claim: String,
    pub strike: f64,
    pub cap: f64,
    pub cash: f64,
    pub floor: f64,
    pub ceiling: f64,
    pub path_measure: PathMeasure,
    /// Tolerance for the preservation and identity suites.
    pub tolerance: f64,
    pub record_wall_time: bool,
    pub threads: Option<usize>,
    pub output: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dist: "rademacher".into(),
            atoms: None,
            signal: "terminal_value".into(),
            anchor_t: None,
            utility: "log".into(),
            gamma: None,
            shift: 0.0,
            x: vec![1.0],
            t: 0.5,
            n: Vec::new(),
            seed: 0,
            trials: 10_000,
            eps: 0.05,
            claim: "capped_call".into(),
            strike: 1.0,
            cap: 10.0,
            cash: 1.0,
            floor: 0.5,
            ceiling: 2.0,
            path_measure: PathMeasure::Physical,
            tolerance: 1e-12,
            record_wall_time: false,
            threads: None,
            output: None,
        }
    }
}

/// A validated configuration with parsed domain objects.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub raw: ExperimentConfig,
    pub dist: StepDistribution,
    pub signal: SignalFunctional,
    pub model: UtilityModel,
    pub claim: ClaimSpec,
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| LabError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn step_spec(&self) -> Result<StepSpec> {
        match self.dist.as_str() {
            "explicit" => self
                .atoms
                .clone()
                .map(StepSpec::Explicit)
                .ok_or_else(|| bad("dist = explicit needs an atoms list")),
            name => StepSpec::from_name(name).map_err(|e| bad(e.to_string())),
        }
    }

    pub fn signal_functional(&self) -> Result<SignalFunctional> {
        match self.signal.as_str() {
            "terminal_value" | "terminal" => Ok(SignalFunctional::TerminalValue),
            "running_max" => Ok(SignalFunctional::RunningMax),
            "future_ratio" => Ok(SignalFunctional::FutureRatio {
                anchor_t: self.anchor_t.unwrap_or(self.t),
            }),
            other => Err(bad(format!("unknown signal {other:?}"))),
        }
    }

    pub fn utility_model(&self) -> Result<UtilityModel> {
        let model = match self.utility.as_str() {
            "log" => UtilityModel::log(),
            "power" => {
                let g = self.gamma.ok_or_else(|| bad("power utility needs gamma"))?;
                UtilityModel::power(g).map_err(|e| bad(e.to_string()))?
            }
            other => return Err(bad(format!("unknown utility {other:?}"))),
        };
        Ok(model.with_shift(self.shift))
    }

    pub fn claim_spec(&self) -> Result<ClaimSpec> {
        let claim = match self.claim.as_str() {
            "capped_call" => ClaimSpec::CappedCall {
                strike: self.strike,
                cap: self.cap,
            },
            "cash_or_nothing" => ClaimSpec::CashOrNothing {
                strike: self.strike,
                cash: self.cash,
            },
            "constant" => ClaimSpec::Constant { value: self.cash },
            "collar" => ClaimSpec::Collar {
                floor: self.floor,
                ceiling: self.ceiling,
            },
            other => return Err(bad(format!("unknown claim {other:?}"))),
        };
        claim.validate().map_err(|e| bad(e.to_string()))?;
        Ok(claim)
    }

    /// Checks every field and builds the domain objects.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        if self.n.is_empty() {
            return Err(bad("n list is empty"));
        }
        if self.n[0] == 0 || self.n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad(format!("n list must be positive and strictly increasing: {:?}", self.n)));
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(bad(format!("t = {} outside (0, 1]", self.t)));
        }
        if self.x.is_empty() || self.x.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(bad(format!("wealth grid must be non-empty and positive: {:?}", self.x)));
        }
        if !(self.eps > 0.0) || !(self.tolerance > 0.0) {
            return Err(bad("eps and tolerance must be positive"));
        }
        let dist = make_step_distribution(&self.step_spec()?).map_err(|e| bad(e.to_string()))?;
        let signal = self.signal_functional()?;
        if let SignalFunctional::FutureRatio { anchor_t } = signal {
            if !(anchor_t > 0.0 && anchor_t < 1.0) {
                return Err(bad(format!("anchor_t = {anchor_t} outside (0, 1)")));
            }
        }
        Ok(ResolvedConfig {
            raw: self.clone(),
            dist,
            signal,
            model: self.utility_model()?,
            claim: self.claim_spec()?,
        })
    }

    /// Worker count: the environment override, then `threads`, else auto (0).
    pub fn thread_count(&self) -> usize {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .or(self.threads)
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal() {
        let c = ExperimentConfig::from_json(r#"{"n": [2, 4]}"#).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.signal, SignalFunctional::TerminalValue);
        assert_eq!(r.model, UtilityModel::log());
    }

    #[test]
    fn rejects_bad_fields() {
        for text in [
            r#"{"n": [4, 2]}"#,
            r#"{"n": []}"#,
            r#"{"n": [2], "utility": "power"}"#,
            r#"{"n": [2], "dist": "uniform"}"#,
            r#"{"n": [2], "t": 1.5}"#,
            r#"{"n": [2], "x": [-1.0]}"#,
        ] {
            let r = ExperimentConfig::from_json(text).and_then(|c| c.resolve());
            assert!(matches!(r, Err(LabError::Config(_))), "{text}");
        }
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"n": [2], "bogus": 1}"#),
            Err(LabError::Config(_))
        ));
    }

    #[test]
    fn future_ratio_anchor_defaults_to_t() {
        let c = ExperimentConfig::from_json(r#"{"n": [4], "signal": "future_ratio", "t": 0.25}"#).unwrap();
        assert_eq!(c.resolve().unwrap().signal, SignalFunctional::FutureRatio { anchor_t: 0.25 });
    }
}
