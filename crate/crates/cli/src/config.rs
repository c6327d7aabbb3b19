use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Evolve,
    Trajectories,
    Relax,
    Rankine,
    ClebschCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 5] =
        [Experiment::Evolve, Experiment::Trajectories, Experiment::Relax, Experiment::Rankine, Experiment::ClebschCheck];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Evolve => "evolve",
            Experiment::Trajectories => "trajectories",
            Experiment::Relax => "relax",
            Experiment::Rankine => "rankine",
            Experiment::ClebschCheck => "clebsch-check",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Experiment::Evolve => "split-step evolution of a Gaussian packet (quantum or classical mode)",
            Experiment::Trajectories => "guided or second-order trajectories in a closed-form field",
            Experiment::Relax => "coarse-grained H and KS distance of an ensemble in a periodic mode box",
            Experiment::Rankine => "Rankine vortex radial profile, Bessel match and orbit portrait",
            Experiment::ClebschCheck => "Clebsch-potential identities on the Rankine pair and random fields",
        }
    }

    pub fn stochastic(self) -> bool {
        matches!(self, Experiment::Relax | Experiment::ClebschCheck)
    }
}

/// Contents of a config file. `parameters` is checked against the
/// experiment's own schema once flags have been merged in.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub parameters: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    /// Folds `--key value` pairs into `parameters`. Keys are kebab-case on
    /// the command line and snake_case in the file. Values that parse as
    /// JSON keep their type; anything else is a string.
    pub fn apply_flags(&mut self, flags: &[String]) -> Result<(), CliError> {
        let mut it = flags.iter();
        while let Some(flag) = it.next() {
            let Some(key) = flag.strip_prefix("--") else {
                return Err(CliError::Validation(format!("expected --key, got '{flag}'")));
            };
            let (key, raw) = match key.split_once('=') {
                Some((k, v)) => (k.to_owned(), v.to_owned()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| CliError::Validation(format!("flag --{key} needs a value")))?;
                    (key.to_owned(), v.clone())
                }
            };
            let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
            self.parameters.insert(key.replace('-', "_"), value);
        }
        Ok(())
    }

    pub fn params<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        serde_json::from_value(Value::Object(self.parameters.clone()))
            .map_err(|e| CliError::Validation(format!("parameters.{}: {e}", self.experiment.name())))
    }
}
