use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activity::ActivityClass;
use crate::error::{Error, Result};
use crate::nnet::TrainConfig;
use crate::radar::RadarParams;
use crate::segment::TriggerConfig;
use crate::tfproc::{DEFAULT_DYNAMIC_RANGE_DB, DEFAULT_HOP, DEFAULT_WINDOW_LEN};

/// How many examples of each class to synthesise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneRecipe {
    pub counts: BTreeMap<ActivityClass, usize>,
    /// Minimum frame IoU for a detected event to take a ground-truth label.
    pub match_iou: f64,
}

impl Default for SceneRecipe {
    fn default() -> Self {
        Self::proportional(90)
    }
}

impl SceneRecipe {
    /// Counts proportional to the reference trial counts, scaled to about
    /// `total`, with at least two examples per class.
    pub fn proportional(total: usize) -> Self {
        let sum: usize = ActivityClass::ALL.iter().map(|c| c.reference_trial_count()).sum();
        let counts = ActivityClass::ALL
            .iter()
            .map(|&c| {
                let share = (total * c.reference_trial_count()) as f64 / sum as f64;
                (c, (share.round() as usize).max(2))
            })
            .collect();
        Self {
            counts,
            match_iou: 0.3,
        }
    }

    /// `per_class` examples of every class.
    pub fn uniform(per_class: usize) -> Self {
        Self {
            counts: ActivityClass::ALL.iter().map(|&c| (c, per_class)).collect(),
            match_iou: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.values().all(|&n| n == 0) {
            return Err(Error::invalid("scene recipe requests no examples"));
        }
        if let Some((c, n)) = self.counts.iter().find(|(_, &n)| n == 1) {
            return Err(Error::invalid(format!(
                "class {c} requests {n} example; use 0 or at least 2"
            )));
        }
        if !(self.match_iou > 0.0 && self.match_iou <= 1.0) {
            return Err(Error::invalid(format!("match IoU {} outside (0, 1]", self.match_iou)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrogramSettings {
    /// Range gate, m.
    pub min_range: f64,
    pub max_range: f64,
    pub window_len: usize,
    pub hop: usize,
    pub dynamic_range_db: f64,
}

impl Default for SpectrogramSettings {
    fn default() -> Self {
        Self {
            min_range: 0.5,
            max_range: 4.0,
            window_len: DEFAULT_WINDOW_LEN,
            hop: DEFAULT_HOP,
            dynamic_range_db: DEFAULT_DYNAMIC_RANGE_DB,
        }
    }
}

impl SpectrogramSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_range >= 0.0 && self.max_range > self.min_range) {
            return Err(Error::invalid(format!(
                "range gate [{}, {}] is empty",
                self.min_range, self.max_range
            )));
        }
        if self.window_len < 2 || self.hop == 0 || !(self.dynamic_range_db > 0.0) {
            return Err(Error::invalid("window length, hop and dynamic range must be positive"));
        }
        Ok(())
    }
}

/// STA/LTA settings. Unset thresholds are calibrated from the noise-only cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriggerSettings {
    pub sta_len: usize,
    pub lta_len: usize,
    pub sigma1: Option<f64>,
    pub sigma2: f64,
    pub sigma3: Option<f64>,
    pub margin_divisor: usize,
}

impl Default for TriggerSettings {
    fn default() -> Self {
        let d = TriggerConfig::default();
        Self {
            sta_len: d.sta_len,
            lta_len: d.lta_len,
            sigma1: None,
            sigma2: d.sigma2,
            sigma3: None,
            margin_divisor: d.margin_divisor,
        }
    }
}

impl TriggerSettings {
    /// Full trigger configuration, calibrating missing thresholds from
    /// `noise_signal`.
    pub fn resolve(&self, noise_signal: &[f64]) -> Result<TriggerConfig> {
        let mut cfg = TriggerConfig::calibrated(noise_signal, self.sta_len, self.lta_len)?;
        cfg.sigma1 = self.sigma1.unwrap_or(cfg.sigma1);
        cfg.sigma3 = self.sigma3.unwrap_or(cfg.sigma3);
        cfg.sigma2 = self.sigma2;
        cfg.margin_divisor = self.margin_divisor;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        TriggerConfig {
            sta_len: self.sta_len,
            lta_len: self.lta_len,
            sigma1: self.sigma1.unwrap_or(2.0),
            sigma2: self.sigma2,
            sigma3: self.sigma3.unwrap_or(1.0),
            margin_divisor: self.margin_divisor,
            ..TriggerConfig::default()
        }
        .validate()
    }
}

/// Everything a pipeline run depends on. Outputs are a pure function of this
/// value apart from `output_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub radar: RadarParams,
    pub scenes: SceneRecipe,
    pub spectrogram: SpectrogramSettings,
    pub trigger: TriggerSettings,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            radar: RadarParams::default(),
            scenes: SceneRecipe::default(),
            spectrogram: SpectrogramSettings::default(),
            trigger: TriggerSettings::default(),
            train: TrainConfig::default(),
            output_dir: PathBuf::from("mdchar-out"),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read configuration {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.scenes.validate()?;
        self.spectrogram.validate()?;
        self.trigger.validate()?;
        self.train.validate()?;
        if self.spectrogram.window_len > self.radar.num_pulses {
            return Err(Error::invalid(format!(
                "window of {} pulses exceeds the {} pulses per scene",
                self.spectrogram.window_len, self.radar.num_pulses
            )));
        }
        if self.train.arch.branches != crate::radar::LOOK_OFFSETS.len() {
            return Err(Error::invalid(format!(
                "classifier needs one branch per look direction ({}), got {}",
                crate::radar::LOOK_OFFSETS.len(),
                self.train.arch.branches
            )));
        }
        if self.train.arch.classes != ActivityClass::COUNT {
            return Err(Error::invalid(format!(
                "classifier must have {} outputs, got {}",
                ActivityClass::COUNT,
                self.train.arch.classes
            )));
        }
        crate::tfproc::range_bins_for(&self.radar, self.spectrogram.min_range, self.spectrogram.max_range)?;
        Ok(())
    }
}

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Synth,
    Spectrograms,
    Segment,
    Train,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Synth, Stage::Spectrograms, Stage::Segment, Stage::Train];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Spectrograms => "spectrograms",
            Stage::Segment => "segment",
            Stage::Train => "train",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s || st.name().trim_end_matches('s') == s)
            .ok_or_else(|| Error::invalid(format!("unknown stage '{s}' (synth, spectrograms, segment, train)")))
    }
}
