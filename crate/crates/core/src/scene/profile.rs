//! Kinematic stand-ins for the recorded activities.
//!
//! Each body is two point scatterers: a torso carrying the bulk motion and a
//! limb whose radial velocity oscillates around (walking) or opposes (in-place
//! motions) the torso. Positive velocity means the range is increasing.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::activity::{ActivityClass, Motion};
use crate::error::{Error, Result};

/// Default distance between subject and radar, m.
pub const DEFAULT_INITIAL_RANGE: f64 = 2.0;

/// Per-episode kinematic parameters. Randomising these gives intra-class
/// variability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionStyle {
    /// Torso walking speed, m/s.
    pub walk_speed: f64,
    /// Limb swing frequency while walking, Hz.
    pub gait_freq: f64,
    /// Peak limb swing velocity relative to the torso, m/s.
    pub limb_swing: f64,
    /// Scale applied to the in-place (sit/stand/bend) velocity pulses.
    pub pulse_scale: f64,
}

impl Default for MotionStyle {
    fn default() -> Self {
        Self {
            walk_speed: 0.45,
            gait_freq: 1.8,
            limb_swing: 0.25,
            pulse_scale: 1.0,
        }
    }
}

/// Ramp time at either end of a walking episode, s.
const WALK_RAMP: f64 = 0.3;
/// Fraction of walking speed held at the very start and end of an episode.
const WALK_FLOOR: f64 = 0.25;

/// Sampled radial motion of one scatterer.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// Range at `t = i * dt`, m.
    pub range: Vec<f64>,
    /// Radial velocity at `t = i * dt`, m/s.
    pub velocity: Vec<f64>,
}

impl Trajectory {
    /// Integrates `velocity` (trapezoidal rule) starting from `initial_range`.
    pub fn from_velocity(dt: f64, initial_range: f64, velocity: Vec<f64>) -> Self {
        let mut range = Vec::with_capacity(velocity.len());
        let mut r = initial_range;
        for (i, &v) in velocity.iter().enumerate() {
            if i > 0 {
                r += 0.5 * dt * (velocity[i - 1] + v);
            }
            range.push(r);
        }
        Self {
            dt,
            range,
            velocity,
        }
    }

    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

fn walk_envelope(tau: f64, duration: f64) -> f64 {
    let ramp = WALK_RAMP.min(duration / 2.0);
    let edge = tau.min(duration - tau).max(0.0);
    let taper = if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge / ramp).cos()
    };
    WALK_FLOOR + (1.0 - WALK_FLOOR) * taper
}

/// Biphasic half-sine pulse with zero net displacement: `first` for the first
/// `split` of the episode, then the opposite sign with an amplitude that
/// cancels the first lobe's area.
fn biphasic(u: f64, split: f64, first: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return 0.0;
    }
    let second = -first * split / (1.0 - split);
    if u < split {
        first * (PI * u / split).sin()
    } else {
        second * (PI * (u - split) / (1.0 - split)).sin()
    }
}

/// Torso and limb radial velocity at local time `tau` within an episode of
/// length `duration`. Outside `[0, duration]` both are zero.
pub fn motion_velocity(motion: Motion, style: &MotionStyle, tau: f64, duration: f64) -> (f64, f64) {
    if !(0.0..=duration).contains(&tau) {
        return (0.0, 0.0);
    }
    let u = tau / duration;
    let k = style.pulse_scale;
    match motion {
        Motion::WalkForward | Motion::WalkBack => {
            let sign = if motion == Motion::WalkForward { -1.0 } else { 1.0 };
            let env = walk_envelope(tau, duration);
            let torso = sign * style.walk_speed * env;
            let limb = torso + style.limb_swing * env * (2.0 * PI * style.gait_freq * tau).sin();
            (torso, limb)
        }
        // Hips drop back and away, then the upper body settles forward.
        Motion::SitDown => {
            let torso = biphasic(u, 0.55, 0.6 * k);
            (torso, -0.8 * torso)
        }
        // Lean toward the radar to rise, then straighten up.
        Motion::StandUp => {
            let torso = biphasic(u, 0.4, -0.7 * k);
            (torso, -0.8 * torso)
        }
        // Upper body sweeps toward the radar and back; arms lead the torso.
        Motion::BendDown => {
            let torso = biphasic(u, 0.5, -0.55 * k);
            let limb = biphasic(u, 0.5, -0.8 * k);
            (torso, limb)
        }
    }
}

fn check_step(duration: f64, dt: f64) -> Result<usize> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid(format!("duration must be positive, got {duration}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let steps = (duration / dt).round();
    if steps < 1.0 || ((steps * dt) - duration).abs() > 1e-9 * duration {
        return Err(Error::invalid(format!("dt {dt} does not divide duration {duration}")));
    }
    Ok(steps as usize)
}

/// Torso and limb trajectories for one activity, sampled on `0, dt, ..., duration`,
/// starting at [`DEFAULT_INITIAL_RANGE`] with the default style.
pub fn activity_profile(activity: ActivityClass, duration: f64, dt: f64) -> Result<Vec<Trajectory>> {
    activity_profile_with(activity, &MotionStyle::default(), DEFAULT_INITIAL_RANGE, duration, dt)
}

pub fn activity_profile_with(
    activity: ActivityClass,
    style: &MotionStyle,
    initial_range: f64,
    duration: f64,
    dt: f64,
) -> Result<Vec<Trajectory>> {
    let steps = check_step(duration, dt)?;
    let motion = activity.motion();
    let (torso, limb): (Vec<f64>, Vec<f64>) = (0..=steps)
        .map(|i| motion_velocity(motion, style, (i as f64 * dt).min(duration), duration))
        .unzip();
    Ok(vec![
        Trajectory::from_velocity(dt, initial_range, torso),
        Trajectory::from_velocity(dt, initial_range, limb),
    ])
}
