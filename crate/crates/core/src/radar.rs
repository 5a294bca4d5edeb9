//! Radar and array geometry constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// FMCW radar and receive-array parameters.
///
/// `samples_per_pulse` must equal `adc_rate * pri`; every pulse is fully
/// sampled and there is no dead time between chirps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarParams {
    /// Carrier frequency, Hz.
    pub carrier_freq: f64,
    /// Chirp bandwidth, Hz.
    pub bandwidth: f64,
    /// Pulse repetition interval, s.
    pub pri: f64,
    /// ADC sampling rate, samples/s.
    pub adc_rate: f64,
    /// Fast-time samples per pulse (P).
    pub samples_per_pulse: usize,
    /// Number of pulses (Q).
    pub num_pulses: usize,
    /// Receive elements (M).
    pub num_elements: usize,
    /// Inter-element spacing d, m.
    pub element_spacing: f64,
    /// Per-sample complex noise variance.
    pub noise_variance: f64,
}

impl Default for RadarParams {
    fn default() -> Self {
        let carrier_freq = 7.7e10;
        Self {
            carrier_freq,
            bandwidth: 4e9,
            pri: 1e-3,
            adc_rate: 5.12e5,
            samples_per_pulse: 512,
            num_pulses: 12_000,
            num_elements: 4,
            element_spacing: SPEED_OF_LIGHT / carrier_freq / 2.0,
            noise_variance: 0.1,
        }
    }
}

impl RadarParams {
    /// Same radar with a shorter fast-time record: the ADC rate is scaled so
    /// that `P = adc_rate * pri` keeps holding and range-bin spacing is unchanged.
    pub fn with_samples_per_pulse(mut self, samples_per_pulse: usize) -> Self {
        self.samples_per_pulse = samples_per_pulse;
        self.adc_rate = samples_per_pulse as f64 / self.pri;
        self
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Total fast-time samples N = P * Q.
    pub fn total_samples(&self) -> usize {
        self.samples_per_pulse * self.num_pulses
    }

    /// Chirp slope B / PRI, Hz/s.
    pub fn chirp_slope(&self) -> f64 {
        self.bandwidth / self.pri
    }

    /// Beat frequency of a point target at `range` metres.
    pub fn beat_frequency(&self, range: f64) -> f64 {
        2.0 * self.bandwidth * range / (SPEED_OF_LIGHT * self.pri)
    }

    /// Metres per range-map bin.
    pub fn range_bin_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
            * (self.adc_rate * self.pri / self.samples_per_pulse as f64)
    }

    /// Doppler frequency (Hz) of a scatterer approaching at `radial_speed` m/s.
    pub fn doppler_frequency(&self, radial_speed: f64) -> f64 {
        2.0 * radial_speed / self.wavelength()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_freq", self.carrier_freq),
            ("bandwidth", self.bandwidth),
            ("pri", self.pri),
            ("adc_rate", self.adc_rate),
            ("element_spacing", self.element_spacing),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::invalid(format!(
                "noise_variance must be non-negative, got {}",
                self.noise_variance
            )));
        }
        if self.num_elements == 0 || self.samples_per_pulse == 0 || self.num_pulses == 0 {
            return Err(Error::invalid(
                "num_elements, samples_per_pulse and num_pulses must be >= 1",
            ));
        }
        let expected = self.adc_rate * self.pri;
        if (expected - self.samples_per_pulse as f64).abs() > 1e-6 * expected.max(1.0) {
            return Err(Error::invalid(format!(
                "samples_per_pulse ({}) must equal adc_rate * pri ({expected})",
                self.samples_per_pulse
            )));
        }
        Ok(())
    }
}

/// Converts a user-facing offset from broadside (0, +30, -30 degrees) into
/// the array azimuth convention where broadside is 90 degrees.
pub fn azimuth_from_broadside_offset(offset_deg: f64) -> f64 {
    90.0 - offset_deg
}

pub fn broadside_offset_from_azimuth(azimuth_deg: f64) -> f64 {
    90.0 - azimuth_deg
}

/// Look directions processed by the pipeline, as broadside offsets.
pub const LOOK_OFFSETS: [f64; 3] = [0.0, 30.0, -30.0];

/// Short tag used in file names for a broadside offset.
pub fn look_tag(offset_deg: f64) -> String {
    if offset_deg == 0.0 {
        "b0".to_string()
    } else if offset_deg > 0.0 {
        format!("p{}", offset_deg.round() as i64)
    } else {
        format!("m{}", (-offset_deg).round() as i64)
    }
}
