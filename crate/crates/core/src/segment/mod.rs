//! Event segmentation of extended micro-Doppler spectrograms.
//!
//! Percentile envelopes reduce each frame to a few frequency indices; the
//! Doppler offset of the central envelope drives an STA/LTA trigger whose
//! intervals are widened by pre/post-event margins and cropped out.

mod crop;
mod events_csv;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tfproc::Spectrogram;

pub use crop::{crop_and_pad, crop_pad_resize, resize_bilinear, PaddedImage, CANVAS_SIZE, CNN_INPUT_SIZE};
pub use events_csv::{read_events_csv, write_events_csv, EventRecord};

pub const LOWER_PERCENTILE: f64 = 0.03;
pub const CENTRAL_PERCENTILE: f64 = 0.50;
pub const UPPER_PERCENTILE: f64 = 0.97;

/// Percentile envelopes of a spectrogram, one entry per frame. Envelope
/// values are row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSet {
    pub upper: Vec<usize>,
    pub central: Vec<usize>,
    pub lower: Vec<usize>,
    /// Total power of each frame.
    pub intensity: Vec<f64>,
}

/// Smallest row whose ascending cumulative power reaches `fraction` of the
/// frame total; the zero-Doppler row for an empty frame.
pub fn percentile_crossing(frame: &[f64], fraction: f64) -> usize {
    let total: f64 = frame.iter().sum();
    if total <= 0.0 {
        return frame.len() / 2;
    }
    let target = fraction * total;
    let mut acc = 0.0;
    for (k, p) in frame.iter().enumerate() {
        acc += p;
        if acc >= target {
            return k;
        }
    }
    frame.len() - 1
}

/// Largest row whose descending cumulative power (summed from the top row
/// down) reaches `fraction` of the frame total.
pub fn percentile_crossing_descending(frame: &[f64], fraction: f64) -> usize {
    let total: f64 = frame.iter().rev().sum();
    if total <= 0.0 {
        return frame.len() / 2;
    }
    let target = fraction * total;
    let mut acc = 0.0;
    for (k, p) in frame.iter().enumerate().rev() {
        acc += p;
        if acc >= target {
            return k;
        }
    }
    0
}

pub fn envelopes(spec: &Spectrogram) -> EnvelopeSet {
    let mut set = EnvelopeSet {
        upper: Vec::with_capacity(spec.frames),
        central: Vec::with_capacity(spec.frames),
        lower: Vec::with_capacity(spec.frames),
        intensity: Vec::with_capacity(spec.frames),
    };
    for t in 0..spec.frames {
        let frame = spec.frame(t);
        set.intensity.push(frame.iter().sum());
        set.lower.push(percentile_crossing(frame, LOWER_PERCENTILE));
        set.central.push(percentile_crossing(frame, CENTRAL_PERCENTILE));
        set.upper.push(percentile_crossing(frame, UPPER_PERCENTILE));
    }
    set
}

/// Mean of the central envelopes found from the bottom and from the top of
/// each frame.
pub fn central_envelope_avg(spec: &Spectrogram) -> Vec<f64> {
    (0..spec.frames)
        .map(|t| {
            let frame = spec.frame(t);
            let up = percentile_crossing(frame, CENTRAL_PERCENTILE) as f64;
            let down = percentile_crossing_descending(frame, CENTRAL_PERCENTILE) as f64;
            0.5 * (up + down)
        })
        .collect()
}

/// Doppler offset magnitude `|c[n] - center_row|` fed to the trigger.
pub fn trigger_signal(central: &[f64], center_row: usize) -> Vec<f64> {
    central.iter().map(|c| (c - center_row as f64).abs()).collect()
}

/// Short- and long-term averages and their ratio for
/// `n in first..first + sta.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaLta {
    pub first: usize,
    pub sta: Vec<f64>,
    pub lta: Vec<f64>,
    pub ratio: Vec<f64>,
}

pub const DEFAULT_GUARD: f64 = 1e-9;

/// `STA(n)` averages the `N1` samples after `n`; `LTA(n)` averages the
/// `N2 + 1` samples `n - N2 ..= n`. Defined for `n in N2 ..= T - N1 - 1`.
pub fn sta_lta(signal: &[f64], sta_len: usize, lta_len: usize, guard: f64) -> Result<StaLta> {
    let t = signal.len();
    if sta_len == 0 || lta_len == 0 {
        return Err(Error::invalid("STA and LTA windows must be at least one frame"));
    }
    if sta_len + lta_len + 1 > t {
        return Err(Error::invalid(format!(
            "signal of {t} frames is shorter than STA ({sta_len}) + LTA ({lta_len}) + 1"
        )));
    }
    let first = lta_len;
    let last = t - sta_len - 1;
    let count = last - first + 1;
    let mut sta = Vec::with_capacity(count);
    let mut lta = Vec::with_capacity(count);
    let mut ratio = Vec::with_capacity(count);

    let mut short: f64 = signal[first + 1..=first + sta_len].iter().sum();
    let mut long: f64 = signal[first - lta_len..=first].iter().sum();
    for n in first..=last {
        if n > first {
            short += signal[n + sta_len] - signal[n];
            long += signal[n] - signal[n - lta_len - 1];
        }
        let s = short / sta_len as f64;
        let l = long / (lta_len + 1) as f64;
        sta.push(s);
        lta.push(l);
        ratio.push(s / (l + guard));
    }
    Ok(StaLta {
        first,
        sta,
        lta,
        ratio,
    })
}

/// STA/LTA windows, thresholds and margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerConfig {
    /// STA window N1, frames.
    pub sta_len: usize,
    /// LTA window N2, frames.
    pub lta_len: usize,
    /// STA level that can start an event.
    pub sigma1: f64,
    /// Ratio threshold for both starting and ending.
    pub sigma2: f64,
    /// STA level below which an event can end.
    pub sigma3: f64,
    /// Pre/post margins are the raw event length divided by this.
    pub margin_divisor: usize,
    pub guard: f64,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            sta_len: 8,
            lta_len: 32,
            sigma1: 3.0,
            sigma2: 2.0,
            sigma3: 2.0,
            margin_divisor: 20,
            guard: DEFAULT_GUARD,
        }
    }
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sta_len == 0 || self.sta_len >= self.lta_len {
            return Err(Error::invalid(format!(
                "need 0 < N1 < N2, got N1={} N2={}",
                self.sta_len, self.lta_len
            )));
        }
        if !(self.sigma1 > self.sigma3 && self.sigma3 > 0.0) {
            return Err(Error::invalid(format!(
                "need sigma1 > sigma3 > 0, got {} and {}",
                self.sigma1, self.sigma3
            )));
        }
        if !(self.sigma2 > 1.0) {
            return Err(Error::invalid(format!("need sigma2 > 1, got {}", self.sigma2)));
        }
        if self.margin_divisor == 0 || !(self.guard > 0.0) {
            return Err(Error::invalid("margin divisor and guard must be positive"));
        }
        Ok(())
    }

    /// Thresholds from the trigger signal of a motion-free recording:
    /// `sigma1 = mean + 3 sd`, `sigma3 = mean + 2 sd`, `sigma2 = 2`.
    pub fn calibrated(noise_signal: &[f64], sta_len: usize, lta_len: usize) -> Result<Self> {
        if noise_signal.len() < 2 {
            return Err(Error::invalid("calibration needs at least two frames"));
        }
        let n = noise_signal.len() as f64;
        let mean = noise_signal.iter().sum::<f64>() / n;
        let var = noise_signal.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        let sigma3 = (mean + 2.0 * sd).max(1e-6);
        let sigma1 = (mean + 3.0 * sd).max(sigma3 + 1e-6);
        let cfg = Self {
            sta_len,
            lta_len,
            sigma1,
            sigma2: 2.0,
            sigma3,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A detected event in frame indices. `[start, end)` is the margin-extended
/// crop; `raw_start`/`raw_end` are the trigger and detrigger frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventInterval {
    pub start: usize,
    pub end: usize,
    pub raw_start: usize,
    pub raw_end: usize,
}

impl EventInterval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Intersection over union of two half-open intervals.
pub fn interval_iou(a: (usize, usize), b: (usize, usize)) -> f64 {
    let inter = a.1.min(b.1).saturating_sub(a.0.max(b.0));
    let union = a.1.max(b.1) - a.0.min(b.0);
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Merges overlapping intervals; the output is sorted and disjoint.
pub fn merge_events(mut events: Vec<EventInterval>) -> Vec<EventInterval> {
    events.sort_by_key(|e| (e.start, e.end));
    let mut merged: Vec<EventInterval> = Vec::with_capacity(events.len());
    for ev in events {
        match merged.last_mut() {
            Some(last) if ev.start < last.end => {
                last.end = last.end.max(ev.end);
                last.raw_start = last.raw_start.min(ev.raw_start);
                last.raw_end = last.raw_end.max(ev.raw_end);
            }
            _ => merged.push(ev),
        }
    }
    merged
}

/// Runs the trigger state machine over `signal` (the Doppler-offset signal
/// from [`trigger_signal`]). Signals too short for one STA/LTA evaluation
/// yield no events.
pub fn detect_events(signal: &[f64], cfg: &TriggerConfig) -> Result<Vec<EventInterval>> {
    cfg.validate()?;
    let t = signal.len();
    if cfg.sta_len + cfg.lta_len + 1 > t {
        return Ok(Vec::new());
    }
    let sl = sta_lta(signal, cfg.sta_len, cfg.lta_len, cfg.guard)?;
    let mut raw = Vec::new();
    let mut open: Option<usize> = None;
    for (i, (&sta, &ratio)) in sl.sta.iter().zip(&sl.ratio).enumerate() {
        let n = sl.first + i;
        match open {
            None if sta > cfg.sigma1 && ratio > cfg.sigma2 => open = Some(n),
            Some(start) if sta < cfg.sigma3 && ratio < cfg.sigma2 => {
                raw.push((start, n));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        raw.push((start, t));
    }
    let events = raw
        .into_iter()
        .map(|(raw_start, raw_end)| {
            let margin = (raw_end - raw_start) / cfg.margin_divisor;
            EventInterval {
                start: raw_start.saturating_sub(margin),
                end: (raw_end + margin).min(t),
                raw_start,
                raw_end,
            }
        })
        .collect();
    Ok(merge_events(events))
}
