//! Engine configuration: a flat `key = value` file whose entries command-line
//! flags override.
//!
//! ```text
//! # comments and blank lines are ignored
//! seed = 7
//! threshold_auth = 0.9
//! epochs = 40
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::TrainConfig;
use crate::pipeline::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineConfig {
    /// Required by every command that draws random numbers.
    pub seed: Option<u64>,
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub bundle: Option<PathBuf>,
    pub thresholds: PipelineConfig,
    pub train: TrainConfig,
    pub user: Option<String>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            model: None,
            data: None,
            bundle: None,
            thresholds: PipelineConfig::default(),
            train: TrainConfig::default(),
            user: None,
        }
    }
}

pub const KEYS: [&str; 12] = [
    "seed",
    "model",
    "data",
    "bundle",
    "user",
    "threshold_auth",
    "threshold_gesture",
    "epochs",
    "batch_size",
    "learning_rate",
    "patience",
    "validation_fraction",
];

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}` expects a number, got `{value}`")))
}

impl EngineConfig {
    /// Applies one setting; used for both file entries and flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = Some(number(key, value)?),
            "model" => self.model = Some(value.into()),
            "data" => self.data = Some(value.into()),
            "bundle" => self.bundle = Some(value.into()),
            "user" => self.user = Some(value.to_string()),
            "threshold_auth" => self.thresholds.auth_threshold = number(key, value)?,
            "threshold_gesture" => self.thresholds.gesture_threshold = number(key, value)?,
            "epochs" => self.train.epochs = number(key, value)?,
            "batch_size" => self.train.batch_size = number(key, value)?,
            "learning_rate" => self.train.optimizer.learning_rate = number(key, value)?,
            "patience" => self.train.patience = number(key, value)?,
            "validation_fraction" => self.train.validation_fraction = number(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.merge_text(text)?;
        Ok(config)
    }

    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: "expected `key = value`".into(),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        self.train.validate()
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required (--seed or `seed =` in the config)".into()))
    }

    /// Training settings with the engine seed applied.
    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            seed: self.require_seed()?,
            ..self.train.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_apply() {
        let c = EngineConfig::parse(
            "# engine\nseed = 7\n\nthreshold_auth=0.95\nepochs = 12\nbundle = out/b\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.thresholds.auth_threshold, 0.95);
        assert_eq!(c.thresholds.gesture_threshold, 0.80);
        assert_eq!(c.train.epochs, 12);
        assert_eq!(c.bundle, Some(PathBuf::from("out/b")));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn later_settings_win() {
        let mut c = EngineConfig::parse("seed = 1\n").unwrap();
        c.set("seed", "2").unwrap();
        assert_eq!(c.require_seed().unwrap(), 2);
    }

    #[test]
    fn bad_lines_report_line_number() {
        assert!(matches!(
            EngineConfig::parse("seed = 1\nnonsense\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            EngineConfig::parse("colour = red\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(EngineConfig::parse("seed = -3\n").is_err());
    }

    #[test]
    fn thresholds_must_be_open_unit_interval() {
        let c = EngineConfig::parse("threshold_gesture = 1.5\n").unwrap();
        assert!(c.validate().is_err());
        assert!(EngineConfig::default().require_seed().is_err());
    }
}
