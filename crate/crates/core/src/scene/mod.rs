//! Synthetic multi-person radar scenes.
//!
//! A scene is a set of people at fixed azimuths, each performing a timeline of
//! activity episodes. [`synthesize_cube`] renders the scene into dechirped
//! FMCW samples for every receive element.

mod cube_file;
mod profile;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activity::ActivityClass;
use crate::beamform::steering_vector;
use crate::error::{Error, Result};
use crate::radar::RadarParams;

pub use cube_file::{read_cube, read_ground_truth, write_cube, write_ground_truth, CUBE_MAGIC};
pub use profile::{
    activity_profile, activity_profile_with, motion_velocity, MotionStyle, Trajectory,
    DEFAULT_INITIAL_RANGE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BodyPart {
    Torso,
    Limb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub amplitude: Complex64,
    pub part: BodyPart,
}

/// One activity performed over `[start, start + duration)` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub activity: ActivityClass,
    pub start: f64,
    pub duration: f64,
    pub style: MotionStyle,
}

impl Episode {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// A person standing at a fixed azimuth; between episodes they stand still.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonMotion {
    /// Azimuth in degrees, broadside = 90.
    pub azimuth_deg: f64,
    pub initial_range: f64,
    pub episodes: Vec<Episode>,
    pub scatterers: Vec<Scatterer>,
}

impl PersonMotion {
    /// A person with the default torso + limb scatterer pair.
    pub fn new(azimuth_deg: f64, initial_range: f64, episodes: Vec<Episode>) -> Self {
        Self {
            azimuth_deg,
            initial_range,
            episodes,
            scatterers: vec![
                Scatterer {
                    amplitude: Complex64::new(1.0, 0.0),
                    part: BodyPart::Torso,
                },
                Scatterer {
                    amplitude: Complex64::new(0.35, 0.0),
                    part: BodyPart::Limb,
                },
            ],
        }
    }

    /// A person at rest for the whole observation.
    pub fn static_at(azimuth_deg: f64, initial_range: f64) -> Self {
        Self::new(azimuth_deg, initial_range, Vec::new())
    }

    pub fn validate(&self, observation_time: f64) -> Result<()> {
        if !(self.azimuth_deg > 0.0 && self.azimuth_deg < 180.0) {
            return Err(Error::invalid(format!(
                "azimuth {} outside (0, 180) degrees",
                self.azimuth_deg
            )));
        }
        if !(self.initial_range.is_finite() && self.initial_range > 0.0) {
            return Err(Error::invalid(format!(
                "initial range must be positive, got {}",
                self.initial_range
            )));
        }
        if self.scatterers.is_empty() {
            return Err(Error::invalid("person has no scatterers"));
        }
        let mut last_end = 0.0;
        for ep in &self.episodes {
            if !(ep.duration > 0.0 && ep.start >= last_end && ep.end() <= observation_time + 1e-9) {
                return Err(Error::invalid(format!(
                    "episode {:?} at {}s+{}s overlaps another or leaves the {observation_time}s observation",
                    ep.activity, ep.start, ep.duration
                )));
            }
            last_end = ep.end();
        }
        Ok(())
    }

    /// Per-scatterer trajectories sampled once per pulse.
    pub fn trajectories(&self, pri: f64, num_pulses: usize) -> Vec<Trajectory> {
        let mut torso = vec![0.0; num_pulses];
        let mut limb = vec![0.0; num_pulses];
        for ep in &self.episodes {
            let first = (ep.start / pri).ceil().max(0.0) as usize;
            let last = ((ep.end() / pri).floor() as usize).min(num_pulses.saturating_sub(1));
            for q in first..=last {
                let tau = q as f64 * pri - ep.start;
                let (vt, vl) = motion_velocity(ep.activity.motion(), &ep.style, tau, ep.duration);
                torso[q] = vt;
                limb[q] = vl;
            }
        }
        let torso = Trajectory::from_velocity(pri, self.initial_range, torso);
        let limb = Trajectory::from_velocity(pri, self.initial_range, limb);
        self.scatterers
            .iter()
            .map(|s| match s.part {
                BodyPart::Torso => torso.clone(),
                BodyPart::Limb => limb.clone(),
            })
            .collect()
    }

    /// Episode boundaries as half-open pulse intervals `[start, end)`.
    pub fn event_pulses(&self, pri: f64, num_pulses: usize) -> Vec<(usize, usize)> {
        self.episodes
            .iter()
            .map(|ep| {
                let start = ((ep.start / pri).round() as usize).min(num_pulses - 1);
                let end = ((ep.end() / pri).round() as usize).clamp(start + 1, num_pulses);
                (start, end)
            })
            .collect()
    }
}

/// Ground truth for one person in a cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonTruth {
    pub person: PersonMotion,
    /// Broadside offset of the person, degrees.
    pub broadside_offset_deg: f64,
    /// Activity of each event, aligned with `event_pulses`.
    pub labels: Vec<ActivityClass>,
    /// Half-open slow-time (pulse) intervals of each activity.
    pub event_pulses: Vec<(usize, usize)>,
}

/// Raw dechirped samples, `N = P * Q` rows by `M` element columns, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataCube {
    pub params: RadarParams,
    pub samples: Vec<Complex64>,
    pub ground_truth: Vec<PersonTruth>,
}

impl RawDataCube {
    pub fn rows(&self) -> usize {
        self.samples.len() / self.params.num_elements.max(1)
    }

    pub fn row(&self, n: usize) -> &[Complex64] {
        let m = self.params.num_elements;
        &self.samples[n * m..(n + 1) * m]
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let expected = self.params.total_samples() * self.params.num_elements;
        if self.samples.len() != expected {
            return Err(Error::invalid(format!(
                "cube holds {} samples, params imply {expected}",
                self.samples.len()
            )));
        }
        Ok(())
    }
}

/// Renders `persons` into a raw data cube. Identical inputs give identical
/// cubes; noise comes from a ChaCha stream seeded with `seed`.
pub fn synthesize_cube(persons: &[PersonMotion], params: &RadarParams, seed: u64) -> Result<RawDataCube> {
    params.validate()?;
    let observation = params.num_pulses as f64 * params.pri;
    for person in persons {
        person.validate(observation)?;
    }
    let (p_len, q_len, m_len) = (params.samples_per_pulse, params.num_pulses, params.num_elements);
    let mut samples = vec![Complex64::new(0.0, 0.0); p_len * q_len * m_len];
    let lambda = params.wavelength();

    for person in persons {
        let steer = steering_vector(person.azimuth_deg, params)?;
        let tracks = person.trajectories(params.pri, q_len);
        for (scat, track) in person.scatterers.iter().zip(&tracks) {
            for q in 0..q_len {
                let r = track.range[q];
                let beat = 2.0 * PI * params.beat_frequency(r) / params.adc_rate;
                let doppler = -4.0 * PI * r / lambda;
                let row0 = q * p_len;
                for p in 0..p_len {
                    let echo = scat.amplitude * Complex64::from_polar(1.0, beat * p as f64 + doppler);
                    let row = &mut samples[(row0 + p) * m_len..(row0 + p + 1) * m_len];
                    for (s, a) in row.iter_mut().zip(&steer.values) {
                        *s += echo * a;
                    }
                }
            }
        }
    }

    if params.noise_variance > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = (params.noise_variance / 2.0).sqrt();
        for s in samples.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *s += Complex64::new(re * scale, im * scale);
        }
    }

    let ground_truth = persons
        .iter()
        .map(|person| PersonTruth {
            person: person.clone(),
            broadside_offset_deg: crate::radar::broadside_offset_from_azimuth(person.azimuth_deg),
            labels: person.episodes.iter().map(|e| e.activity).collect(),
            event_pulses: person.event_pulses(params.pri, q_len),
        })
        .collect();

    Ok(RawDataCube {
        params: *params,
        samples,
        ground_truth,
    })
}
