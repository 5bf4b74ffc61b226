//! JSON overrides for `fit`, merged under command-line flags.

use std::path::Path;

use serde::Deserialize;

/// Every field is optional; a flag given on the command line wins.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub loss: Option<String>,
    pub rank: Option<usize>,
    pub sampler: Option<String>,
    pub samples: Option<usize>,
    pub nonzeros: Option<usize>,
    pub zeros: Option<usize>,
    pub oversample: Option<f64>,
    pub learning_rate: Option<f64>,
    pub epoch_iters: Option<usize>,
    pub max_bad_epochs: Option<usize>,
    pub decay: Option<f64>,
    pub max_epochs: Option<usize>,
    pub estimator_samples: Option<usize>,
    pub seed: Option<u64>,
}

impl FitFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
