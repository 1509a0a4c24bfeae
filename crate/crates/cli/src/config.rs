//! Experiment configuration for `mrf-inn run`.

use std::path::{Path, PathBuf};

use mrf_inn::evaluation::{DEFAULT_REPETITIONS, DEFAULT_SNR_LEVELS};
use mrf_inn::inn::ModelKind;
use mrf_inn::training::TrainConfig;
use mrf_inn::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Schedule TOML; the reference schedule when absent.
    pub schedule: Option<PathBuf>,
    /// Grid TOMLs; the built-in training and testing grids when absent.
    pub training_grid: Option<PathBuf>,
    pub testing_grid: Option<PathBuf>,
    /// Stratified subsample size of the training grid; the full grid when absent.
    pub training_entries: Option<usize>,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    #[serde(default = "default_snr_levels")]
    pub snr_levels: Vec<f64>,
    #[serde(default = "default_repetitions")]
    pub snr_repetitions: usize,
    /// Random subset of the test set used by the sweep; all entries when absent.
    pub snr_max_entries: Option<usize>,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_validation_fraction() -> f64 {
    0.2
}

fn default_models() -> Vec<String> {
    ModelKind::ALL.iter().map(|k| k.name().to_string()).collect()
}

fn default_snr_levels() -> Vec<f64> {
    DEFAULT_SNR_LEVELS.to_vec()
}

fn default_repetitions() -> usize {
    DEFAULT_REPETITIONS
}

impl RunConfig {
    /// Parses, resolves relative paths against the file's directory and checks
    /// that every referenced input exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut config: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.out_dir = base.join(&config.out_dir);
        for input in [&mut config.schedule, &mut config.training_grid, &mut config.testing_grid]
            .into_iter()
            .flatten()
        {
            *input = base.join(&*input);
            if !input.exists() {
                return Err(Error::Config(format!("referenced file {} does not exist", input.display())));
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.kinds()?;
        self.train.validate()?;
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation_fraction {} outside (0, 1)",
                self.validation_fraction
            )));
        }
        if self.snr_repetitions == 0 {
            return Err(Error::Config("snr_repetitions must be >= 1".into()));
        }
        Ok(())
    }

    pub fn kinds(&self) -> Result<Vec<ModelKind>> {
        if self.models.is_empty() {
            return Err(Error::Config("no models listed".into()));
        }
        self.models.iter().map(|m| m.parse()).collect()
    }

    pub fn inputs(&self) -> Vec<PathBuf> {
        [&self.schedule, &self.training_grid, &self.testing_grid]
            .into_iter()
            .flatten()
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "out_dir = \"out\"\n[train]\nepochs = 3\n").unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.out_dir, dir.path().join("out"));
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.batch_size, TrainConfig::default().batch_size);
        assert_eq!(c.kinds().unwrap(), ModelKind::ALL.to_vec());

        std::fs::write(&path, "out_dir = \"out\"\nbogus = 1\n").unwrap();
        assert!(matches!(RunConfig::load(&path), Err(Error::Config(_))));
        std::fs::write(&path, "out_dir = \"out\"\n[train]\nlr = 0.1\n").unwrap();
        assert!(matches!(RunConfig::load(&path), Err(Error::Config(_))));
        std::fs::write(&path, "out_dir = \"out\"\nschedule = \"missing.toml\"\n").unwrap();
        assert!(matches!(RunConfig::load(&path), Err(Error::Config(_))));
        std::fs::write(&path, "out_dir = \"out\"\nmodels = [\"cnn\"]\n").unwrap();
        assert!(matches!(RunConfig::load(&path), Err(Error::Config(_))));
    }
}
