//! The experiment file: one JSON document with `model`, `target`, `box` and
//! `run` sections.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use spacefill::models::{EnzymeModel, EnzymeSettings, ExponentialModel, IdentityModel, TorusModel};
use spacefill::{InverseSquaredDistance, Model, ParamBox, RunConfig, TargetDensity, UniformTarget};

use crate::error::{CliError, CliResult};
use crate::external::ExternalModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub model: ModelConfig,
    #[serde(default)]
    pub target: TargetConfig,
    /// Overrides the model's own parameter box.
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub param_box: Option<BoxConfig>,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelConfig {
    Torus(TorusModel),
    #[serde(alias = "expo")]
    Exponential(ExponentialModel),
    Enzyme(EnzymeSettings),
    Identity {
        dim: usize,
    },
    External(ExternalCommand),
}

/// A user executable speaking the line protocol of [`ExternalModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalCommand {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    pub dim_in: usize,
    pub dim_out: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TargetConfig {
    #[default]
    Uniform,
    InverseSquaredDistance {
        center: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// A model ready to run, with the handle needed for its side statistics.
pub struct Resolved {
    pub model: Arc<dyn Model>,
    pub target: Arc<dyn TargetDensity>,
    pub param_box: ParamBox,
    /// `run` with `k` and `b` filled in.
    pub run: RunConfig,
    pub enzyme: Option<Arc<EnzymeModel>>,
}

impl Experiment {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    /// Validates every section and builds the model and target.
    pub fn resolve(&self) -> CliResult<Resolved> {
        let mut enzyme = None;
        let (model, default_box): (Arc<dyn Model>, Option<ParamBox>) = match &self.model {
            ModelConfig::Torus(t) => (
                Arc::new(TorusModel::new(t.major, t.minor)?),
                Some(TorusModel::param_box()),
            ),
            ModelConfig::Exponential(e) => (
                Arc::new(ExponentialModel::new(e.t)?),
                Some(ExponentialModel::param_box()),
            ),
            ModelConfig::Enzyme(s) => {
                let m = Arc::new(EnzymeModel::new(*s)?);
                enzyme = Some(m.clone());
                (m, Some(EnzymeModel::param_box()))
            }
            ModelConfig::Identity { dim } => {
                if *dim == 0 {
                    return Err(CliError::config("model.dim must be positive"));
                }
                (
                    Arc::new(IdentityModel { dim: *dim }),
                    Some(ParamBox::unit(*dim)),
                )
            }
            ModelConfig::External(cfg) => (Arc::new(ExternalModel::new(cfg.clone())?), None),
        };
        let param_box = match (&self.param_box, default_box) {
            (Some(b), _) => ParamBox::new(b.lower.clone(), b.upper.clone())?,
            (None, Some(b)) => b,
            (None, None) => return Err(CliError::config("missing field `box` for this model")),
        };
        if param_box.dim() != model.dim_in() {
            return Err(CliError::config(format!(
                "box has {} dimensions but the model takes {} parameters",
                param_box.dim(),
                model.dim_in()
            )));
        }
        let target: Arc<dyn TargetDensity> = match &self.target {
            TargetConfig::Uniform => Arc::new(UniformTarget),
            TargetConfig::InverseSquaredDistance { center } => {
                if center.len() != model.dim_out() {
                    return Err(CliError::config(format!(
                        "target.center has {} coordinates, the model outputs {}",
                        center.len(),
                        model.dim_out()
                    )));
                }
                Arc::new(InverseSquaredDistance {
                    center: center.clone(),
                })
            }
        };
        let run = self.run.resolve(&param_box)?;
        Ok(Resolved {
            model,
            target,
            param_box,
            run,
            enzyme,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use spacefill::Algorithm;

    const TORUS: &str = r#"{
        "model": {"type": "torus", "R": 1.0, "r": 0.9},
        "run": {"algorithm": "jacobian", "N": 100, "q": 0.1, "h": 0.5, "max_iterations": 3}
    }"#;

    #[test]
    fn parses_a_minimal_torus_file() {
        let exp = Experiment::from_json(TORUS).unwrap();
        assert_eq!(
            exp.model,
            ModelConfig::Torus(TorusModel {
                major: 1.0,
                minor: 0.9
            })
        );
        assert_eq!(exp.target, TargetConfig::Uniform);
        let r = exp.resolve().unwrap();
        assert_eq!(r.run.algorithm, Algorithm::Jacobian);
        assert_eq!(r.run.b, Some(f64::INFINITY));
        assert_eq!(r.param_box.dim(), 2);
    }

    #[test]
    fn missing_key_is_named() {
        let text = TORUS.replace(r#""h": 0.5, "#, "");
        let err = Experiment::from_json(&text).unwrap_err();
        assert!(
            matches!(&err, CliError::Config(m) if m.contains("`h`")),
            "{err}"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = TORUS.replace(r#""r": 0.9"#, r#""r": 0.9, "radius": 2"#);
        assert!(Experiment::from_json(&text).is_err());
        let text = TORUS.replace(r#""q": 0.1"#, r#""q": 0.1, "qq": 1"#);
        assert!(Experiment::from_json(&text).is_err());
    }

    #[test]
    fn enzyme_defaults_and_knn_alias() {
        let text = r#"{
            "model": {"type": "enzyme", "input_after": 0.7},
            "run": {"algorithm": "knn", "N": 50, "q": 0.1, "h": 0.03, "k": 5, "b": "inf", "max_iterations": 1}
        }"#;
        let exp = Experiment::from_json(text).unwrap();
        let ModelConfig::Enzyme(s) = &exp.model else {
            panic!("not enzyme")
        };
        assert_eq!(s.input_after, 0.7);
        assert_eq!(s.f_a, 0.5);
        let r = exp.resolve().unwrap();
        assert_eq!(r.run.algorithm, Algorithm::DerivativeFree);
        assert!(r.run.b.unwrap().is_infinite());
        assert!(r.enzyme.is_some());
    }

    #[test]
    fn equal_enzyme_inputs_fail_validation() {
        let text = r#"{
            "model": {"type": "enzyme", "input_before": 0.5, "input_after": 0.5},
            "run": {"algorithm": "knn", "N": 50, "q": 0.1, "h": 0.03, "max_iterations": 1}
        }"#;
        let err = Experiment::from_json(text)
            .unwrap()
            .resolve()
            .err()
            .unwrap();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn external_needs_a_box() {
        let text = r#"{
            "model": {"type": "external", "command": ["cat"], "dim_in": 1, "dim_out": 1},
            "run": {"algorithm": "knn", "N": 50, "q": 0.1, "h": 0.1, "max_iterations": 1}
        }"#;
        let err = Experiment::from_json(text)
            .unwrap()
            .resolve()
            .err()
            .unwrap();
        assert!(err.to_string().contains("`box`"));
    }

    #[test]
    fn target_center_dimension_is_checked() {
        let text = TORUS.replace(
            r#""run""#,
            r#""target": {"type": "inverse_squared_distance", "center": [0.0, 0.0]}, "run""#,
        );
        assert!(Experiment::from_json(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let exp = Experiment::from_json(TORUS).unwrap();
        let text = serde_json::to_string(&exp).unwrap();
        assert_eq!(Experiment::from_json(&text).unwrap(), exp);
    }
}
