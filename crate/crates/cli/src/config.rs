use std::path::{Path, PathBuf};
use std::str::FromStr;

use alarm_pipeline::synth::SynthCorpusSpec;
use alarm_pipeline::tuning::TuningConstraints;
use alarm_pipeline::{Error, FilterConfig, FilterWidth, GridSpec, Result, StackConfig};
use serde::{Deserialize, Serialize};

/// `start:stop:step`, inclusive of `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl RangeSpec {
    fn tuple(&self) -> (f64, f64, f64) {
        (self.start, self.stop, self.step)
    }
}

impl FromStr for RangeSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(format!("expected start:stop:step, got `{s}`"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
        Ok(Self {
            start: num(start)?,
            stop: num(stop)?,
            step: num(step)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintConfig {
    pub min_alarm_precision: f64,
    /// Percentage points below the identity-filter baseline.
    pub max_sensitivity_drop: f64,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self {
            min_alarm_precision: 0.80,
            max_sensitivity_drop: 10.0,
        }
    }
}

impl ConstraintConfig {
    pub fn build(&self) -> Result<TuningConstraints> {
        TuningConstraints::new(self.min_alarm_precision, self.max_sensitivity_drop)
    }
}

/// Everything a subcommand needs. Loaded from `--config`, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub annotations: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    /// CSV of `database_id,TP_a,FP_a,FN_a` for evaluation from counts alone.
    pub counts_only: Option<PathBuf>,
    pub stack: StackConfig,
    pub filter: FilterConfig,
    pub w_grid: RangeSpec,
    pub t_grid: RangeSpec,
    pub constraints: ConstraintConfig,
    pub betas: Vec<f64>,
    /// `F_beta` used to pick per-database optima.
    pub tuning_beta: f64,
    pub folds: usize,
    pub synth: Option<SynthCorpusSpec>,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            annotations: None,
            predictions: None,
            counts_only: None,
            stack: StackConfig::default(),
            filter: FilterConfig {
                width: FilterWidth::Seconds(0.87),
                threshold: 0.4,
            },
            w_grid: RangeSpec {
                start: 0.05,
                stop: 2.0,
                step: 0.05,
            },
            t_grid: RangeSpec {
                start: 0.1,
                stop: 0.9,
                step: 0.1,
            },
            constraints: ConstraintConfig::default(),
            betas: vec![0.5, 2.0],
            tuning_beta: 0.5,
            folds: 5,
            synth: None,
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            line: e.line() as u64,
            message: e.to_string(),
        })
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::from_ranges(self.w_grid.tuple(), self.t_grid.tuple())
    }

    pub fn validate(&self) -> Result<()> {
        self.stack.validate()?;
        self.filter.validate()?;
        if self.betas.is_empty() || self.betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "betas must be positive, got {:?}",
                self.betas
            )));
        }
        if !(self.tuning_beta.is_finite() && self.tuning_beta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tuning_beta must be positive, got {}",
                self.tuning_beta
            )));
        }
        Ok(())
    }

    /// Betas to report, with the tuning beta included.
    pub fn report_betas(&self) -> Vec<f64> {
        let mut betas = self.betas.clone();
        if !betas.contains(&self.tuning_beta) {
            betas.push(self.tuning_beta);
        }
        betas
    }

    pub fn synth_spec(&self) -> SynthCorpusSpec {
        match &self.synth {
            Some(spec) => spec.clone(),
            None => SynthCorpusSpec::tuning_benchmark(self.seed),
        }
    }

    /// The config fields that can change `command`'s results, as canonical
    /// JSON. File locations are left out; input contents are hashed separately.
    pub fn semantic_json(&self, command: &str) -> serde_json::Value {
        let mut full = serde_json::to_value(self).expect("config serializes");
        let map = full.as_object_mut().expect("config is an object");
        let synthetic = command == "synth" || (command == "tune" && self.annotations.is_none());
        if synthetic {
            map.insert(
                "synth".into(),
                serde_json::to_value(self.synth_spec()).expect("spec serializes"),
            );
        }
        let keys: &[&str] = match command {
            "evaluate" if self.counts_only.is_some() => &["betas"],
            "evaluate" => &["stack", "filter", "betas"],
            "sweep" => &["stack", "w_grid", "t_grid", "betas"],
            "tune" if synthetic => &[
                "stack",
                "w_grid",
                "t_grid",
                "betas",
                "constraints",
                "tuning_beta",
                "synth",
            ],
            "tune" => &[
                "stack",
                "w_grid",
                "t_grid",
                "betas",
                "constraints",
                "tuning_beta",
            ],
            "offsets" => &["stack", "filter"],
            "synth" => &["synth"],
            "folds" => &["folds", "seed"],
            _ => &[],
        };
        let picked: serde_json::Map<String, serde_json::Value> = keys
            .iter()
            .filter_map(|k| map.remove(*k).map(|v| ((*k).to_owned(), v)))
            .collect();
        serde_json::Value::Object(picked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        let r: RangeSpec = "0.1:0.9:0.1".parse().unwrap();
        assert_eq!(
            r,
            RangeSpec {
                start: 0.1,
                stop: 0.9,
                step: 0.1
            }
        );
        assert!("0.1:0.9".parse::<RangeSpec>().is_err());
        assert!("a:b:c".parse::<RangeSpec>().is_err());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 9, "betas": [1.0]}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.folds, 5);
        assert_eq!(cfg.report_betas(), vec![1.0, 0.5]);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sead": 9}"#).is_err());
    }

    #[test]
    fn semantic_json_ignores_locations() {
        let a = RunConfig::default();
        let b = RunConfig {
            out: "elsewhere".into(),
            predictions: Some("x".into()),
            ..RunConfig::default()
        };
        assert_eq!(a.semantic_json("sweep"), b.semantic_json("sweep"));
        let c = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        assert_ne!(a.semantic_json("folds"), c.semantic_json("folds"));
        assert_ne!(a.semantic_json("synth"), c.semantic_json("synth"));
    }

    #[test]
    fn semantic_json_keeps_only_fields_the_command_reads() {
        let a = RunConfig::default();
        let seeded = RunConfig {
            seed: 7,
            ..RunConfig::default()
        };
        assert_eq!(
            a.semantic_json("evaluate"),
            seeded.semantic_json("evaluate")
        );
        let other_grid = RunConfig {
            t_grid: "0.2:0.8:0.2".parse().unwrap(),
            ..RunConfig::default()
        };
        assert_eq!(
            a.semantic_json("evaluate"),
            other_grid.semantic_json("evaluate")
        );
        assert_ne!(a.semantic_json("sweep"), other_grid.semantic_json("sweep"));
        let loaded = RunConfig {
            annotations: Some("a.jsonl".into()),
            ..RunConfig::default()
        };
        // tune on a supplied corpus ignores the generator seed
        assert_eq!(
            loaded.semantic_json("tune"),
            RunConfig {
                seed: 3,
                ..loaded.clone()
            }
            .semantic_json("tune")
        );
        assert_ne!(a.semantic_json("tune"), seeded.semantic_json("tune"));
    }
}
