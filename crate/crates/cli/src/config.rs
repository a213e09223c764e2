use std::fs;
use std::path::Path;

use oncoie::corpus::{SplitConfig, SyntheticSpec, DEFAULT_KEYWORDS};
use oncoie::mrc::MrcConfig;
use oncoie::taggers::{TaggerConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Options for every subcommand, loadable from one JSON file. Flags
/// override the file; the result is echoed into each output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds generation, initialisation and shuffling unless a section sets
    /// its own.
    pub seed: Option<u64>,
    pub synthetic: SyntheticSpec,
    pub keywords: Vec<String>,
    pub split: SplitConfig,
    pub tagger: TaggerConfig,
    pub train: TrainConfig,
    pub mrc: MrcConfig,
    /// Minimum votes for `ensemble`; majority when unset.
    pub vote_threshold: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            synthetic: SyntheticSpec::default(),
            keywords: DEFAULT_KEYWORDS.iter().map(|k| k.to_string()).collect(),
            split: SplitConfig::default(),
            tagger: TaggerConfig::default(),
            train: TrainConfig::default(),
            mrc: MrcConfig::default(),
            vote_threshold: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Pushes the shared seed into every section.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.synthetic.seed = seed;
        self.tagger.seed = seed;
        self.train.seed = seed;
        self.mrc.seed = seed;
    }

    pub fn keywords(&self) -> Vec<&str> {
        self.keywords.iter().map(String::as_str).collect()
    }

    pub fn echo(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(oncoie::Error::from)?;
        let text = serde_json::to_string_pretty(self).map_err(oncoie::Error::from)?;
        fs::write(dir.join("run_config.json"), text + "\n").map_err(oncoie::Error::from)?;
        Ok(())
    }
}
