//! Run configuration file: TOML with one table per command family. Command
//! line flags override file values.
//!
//! ```toml
//! [general]
//! seed = 7
//! out_dir = "runs/a"
//!
//! [metrics]
//! pck_delta = 2.0
//! beat_sigma = 0.1
//! fgd_window = 34
//! fgd_components = 32
//!
//! [beats]
//! window = 0.05
//! hop = 0.0333333
//! onset_threshold = 0.3
//! joints = "body"
//!
//! [camn]
//! steps = 500
//! lr = 2e-4
//! batch_size = 16
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{read_text, CliError, Result};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "BEATKIT_CONFIG";

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub general: General,
    pub metrics: Metrics,
    pub beats: Beats,
    pub convert: Convert,
    pub camn: CamnOverrides,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct General {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Metrics {
    pub pck_delta: f64,
    pub beat_sigma: f64,
    pub fgd_window: usize,
    pub fgd_stride: usize,
    pub fgd_components: usize,
}

impl Default for Metrics {
    fn default() -> Metrics {
        Metrics {
            pck_delta: beat_core::metrics::DEFAULT_PCK_DELTA,
            beat_sigma: beat_core::metrics::DEFAULT_BEAT_SIGMA,
            fgd_window: 34,
            fgd_stride: 10,
            fgd_components: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Beats {
    pub window: f64,
    pub hop: f64,
    pub onset_threshold: f64,
    pub joints: String,
}

impl Default for Beats {
    fn default() -> Beats {
        let p = beat_core::beatsig::EnvelopeParams::default();
        Beats {
            window: p.window_s,
            hop: p.hop_s,
            onset_threshold: beat_core::beatsig::DEFAULT_ONSET_THRESHOLD,
            joints: "body".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Convert {
    pub fps: Option<f64>,
    pub sample_rate: Option<u32>,
}

/// Values applied on top of the paper or toy network configuration.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CamnOverrides {
    pub steps: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub crop: Option<usize>,
    pub alpha: Option<f64>,
    pub beta0: Option<f64>,
    pub beta1: Option<f64>,
    pub samples_per_frame: Option<usize>,
    pub context: Option<usize>,
    pub words: Option<PathBuf>,
}

impl CamnOverrides {
    pub fn apply(&self, c: &mut camn::CamnConfig) {
        if let Some(v) = self.lr {
            c.lr = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.beta0 {
            c.beta0 = v;
        }
        if let Some(v) = self.beta1 {
            c.beta1 = v;
        }
        if let Some(v) = self.samples_per_frame {
            c.samples_per_frame = v;
        }
        if let Some(v) = self.context {
            c.context = v;
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| CliError::parse(format!("config: {e}")))
    }

    /// Loads `explicit`, else the file named by [`CONFIG_ENV`], else defaults.
    pub fn load(explicit: Option<&Path>) -> Result<RunConfig> {
        let path = explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        match path {
            Some(p) => RunConfig::parse(&read_text(&p)?).map_err(|e| e.in_file(&p)),
            None => Ok(RunConfig::default()),
        }
    }
}
