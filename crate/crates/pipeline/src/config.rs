//! The single JSON configuration document.
//!
//! Sections: `radar`, `jammers`, `classes`, `dataset`, `training`. Every
//! section is optional and falls back to the desk-scale defaults; unknown
//! keys anywhere are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use hrrp_core::filters::MIN_SEGMENTS;
use hrrp_core::jamming::{default_scenario, CompoundJammingConfig};
use hrrp_core::radar_sim::{RadarParams, ScheduleMode};
use hrrp_core::scene::{builtin_classes, validate_classes, TargetClass};
use hrrp_neural::{AdamConfig, NetworkConfig};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, PipelineError, Result};

/// Front end placed before the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Learned attention inside the network.
    Cfa,
    /// Wiener gains from the true signal and jamming PSDs.
    WienerOracle,
    /// Wiener gains from PSDs estimated on training and jam-only captures.
    WienerEstimated,
    /// The classifier sees the jammed spectrum as is.
    None,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Cfa, Mode::WienerOracle, Mode::WienerEstimated, Mode::None];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Cfa => "cfa",
            Mode::WienerOracle => "wiener_oracle",
            Mode::WienerEstimated => "wiener_estimated",
            Mode::None => "none",
        }
    }

    pub fn is_wiener(self) -> bool {
        matches!(self, Mode::WienerOracle | Mode::WienerEstimated)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode {s:?} (expected cfa, wiener_oracle, wiener_estimated or none)"))
    }
}

/// Per-sample scaling applied to the spectrum before it enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputNorm {
    /// Unit mean bin power.
    #[default]
    Rms,
    /// Peak bin magnitude 1.
    Max,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub samples_per_class: usize,
    /// One shard per entry.
    pub sjr_db: Vec<f64>,
    pub train_fraction: f64,
    /// Master seed used by `sweep-sjr` (other commands take `--seed`).
    pub seed: u64,
    pub normalization: InputNorm,
    pub range_m: f64,
    /// Radial speeds are drawn uniformly from `[-max, max]`.
    pub max_speed_mps: f64,
    pub schedule: ScheduleMode,
    /// Jam-only captures available to the estimated Wiener baseline.
    pub jam_only_captures: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            samples_per_class: 300,
            sjr_db: vec![-30.0, -40.0, -50.0, -60.0],
            train_fraction: 0.8,
            seed: 2024,
            normalization: InputNorm::Rms,
            range_m: 3000.0,
            max_speed_mps: 300.0,
            schedule: ScheduleMode::Random,
            jam_only_captures: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Learning-rate multiplier for the CFA parameters.
    pub cfa_lr_scale: f64,
    pub network: NetworkConfig,
    /// Front ends trained by `sweep-sjr`.
    pub modes: Vec<Mode>,
    /// Stop after this many epochs without a test-accuracy improvement.
    pub patience: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 120,
            batch: 64,
            seed: 0,
            adam: AdamConfig::default(),
            cfa_lr_scale: 1.0,
            network: NetworkConfig::default(),
            modes: vec![Mode::Cfa, Mode::WienerEstimated],
            patience: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub radar: RadarParams,
    pub jammers: CompoundJammingConfig,
    pub classes: Vec<TargetClass>,
    pub dataset: DatasetConfig,
    pub training: TrainingConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    radar: RadarParams,
    jammers: Option<CompoundJammingConfig>,
    classes: Option<Vec<TargetClass>>,
    #[serde(default)]
    dataset: DatasetConfig,
    #[serde(default)]
    training: TrainingConfig,
}

impl Default for Config {
    fn default() -> Self {
        let radar = RadarParams::default();
        Self {
            jammers: default_scenario(&radar),
            radar,
            classes: builtin_classes(),
            dataset: DatasetConfig::default(),
            training: TrainingConfig::default(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let config = Self {
            jammers: raw.jammers.unwrap_or_else(|| default_scenario(&raw.radar)),
            classes: raw.classes.unwrap_or_else(builtin_classes),
            radar: raw.radar,
            dataset: raw.dataset,
            training: raw.training,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(PipelineError::Config(m));
        self.radar.validate()?;
        self.jammers.validate(&self.radar)?;
        validate_classes(&self.classes)?;
        let d = &self.dataset;
        let t = &self.training;
        if self.classes.len() > u8::MAX as usize + 1 {
            return cfg(format!("{} classes do not fit a u8 label", self.classes.len()));
        }
        if t.network.classifier.n_classes != self.classes.len() {
            return cfg(format!(
                "classifier has {} outputs but {} classes are configured",
                t.network.classifier.n_classes,
                self.classes.len()
            ));
        }
        if t.network.n_bins != self.radar.n_bins() {
            return cfg(format!("network expects {} bins, radar produces {}", t.network.n_bins, self.radar.n_bins()));
        }
        if d.samples_per_class < 2 {
            return cfg("dataset.samples_per_class must be >= 2".into());
        }
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return cfg(format!("dataset.train_fraction must lie in (0, 1), got {}", d.train_fraction));
        }
        if d.sjr_db.is_empty() || d.sjr_db.iter().any(|s| !s.is_finite()) {
            return cfg("dataset.sjr_db must list at least one finite value".into());
        }
        let mut sorted = d.sjr_db.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return cfg("dataset.sjr_db contains duplicates".into());
        }
        if !(d.range_m > 0.0 && d.range_m.is_finite()) {
            return cfg(format!("dataset.range_m must be > 0, got {}", d.range_m));
        }
        if !(d.max_speed_mps >= 0.0 && d.max_speed_mps.is_finite()) {
            return cfg(format!("dataset.max_speed_mps must be >= 0, got {}", d.max_speed_mps));
        }
        if d.jam_only_captures < MIN_SEGMENTS {
            return cfg(format!("dataset.jam_only_captures must be >= {MIN_SEGMENTS}"));
        }
        if t.epochs == 0 || t.batch < 2 {
            return cfg("training.epochs must be >= 1 and training.batch >= 2".into());
        }
        if t.adam.lr.is_nan()
            || t.adam.lr <= 0.0
            || !(0.0..1.0).contains(&t.adam.beta1)
            || !(0.0..1.0).contains(&t.adam.beta2)
        {
            return cfg(format!("invalid Adam settings {:?}", t.adam));
        }
        if !(t.cfa_lr_scale > 0.0 && t.cfa_lr_scale.is_finite()) {
            return cfg(format!("training.cfa_lr_scale must be > 0, got {}", t.cfa_lr_scale));
        }
        if t.modes.is_empty() {
            return cfg("training.modes must not be empty".into());
        }
        Ok(())
    }
}
