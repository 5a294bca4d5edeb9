//! Turns per-class example counts into concrete scenes.
//!
//! Broadside classes are performed by one person, two episodes per scene.
//! A +30 and a -30 episode share a two-person scene, one person acting in
//! each time slot so that no two labelled events overlap in time. Every
//! episode starts after the long-term average has filled and ends before the
//! short-term window runs off the end of the record.

use rand::Rng;
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use crate::activity::ActivityClass;
use crate::error::{Error, Result};
use crate::radar::azimuth_from_broadside_offset;
use crate::scene::{motion_velocity, Episode, MotionStyle, PersonMotion, DEFAULT_INITIAL_RANGE};

const WALK_DURATION: (f64, f64) = (1.8, 2.3);
const IN_PLACE_DURATION: (f64, f64) = (1.6, 2.1);
const STYLE_SCALE: (f64, f64) = (0.85, 1.15);
const GAIT_FREQ: (f64, f64) = (1.6, 2.0);
/// Extra random delay of the first slot and of the gap, s.
const JITTER: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePlan {
    pub id: String,
    pub persons: Vec<PersonMotion>,
}

/// Time window episodes may occupy, and the quiet gap between two slots.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Timing {
    earliest: f64,
    latest: f64,
    gap: f64,
}

fn timing(cfg: &PipelineConfig) -> Timing {
    let s = &cfg.spectrogram;
    let t = &cfg.trigger;
    let pri = cfg.radar.pri;
    let frames = (cfg.radar.num_pulses.saturating_sub(s.window_len)) / s.hop + 1;
    let frame_time = |f: usize| (f * s.hop + s.window_len / 2) as f64 * pri;
    Timing {
        earliest: frame_time(t.lta_len + 6),
        latest: frame_time(frames.saturating_sub(t.sta_len + 4)),
        gap: (3 * t.lta_len / 4) as f64 * s.hop as f64 * pri,
    }
}

fn random_style(rng: &mut ChaCha8Rng) -> MotionStyle {
    let base = MotionStyle::default();
    let k = rng.gen_range(STYLE_SCALE.0..STYLE_SCALE.1);
    MotionStyle {
        walk_speed: base.walk_speed * k,
        gait_freq: rng.gen_range(GAIT_FREQ.0..GAIT_FREQ.1),
        limb_swing: base.limb_swing * k,
        pulse_scale: k,
    }
}

fn random_duration(class: ActivityClass, rng: &mut ChaCha8Rng) -> f64 {
    let (lo, hi) = if class.motion().is_walking() {
        WALK_DURATION
    } else {
        IN_PLACE_DURATION
    };
    // whole milliseconds keep episode edges on pulse boundaries
    (rng.gen_range(lo..hi) * 1000.0).round() / 1000.0
}

/// Lays out up to two episodes in consecutive slots. Returns `None` for a
/// slot that does not fit.
fn schedule(classes: &[ActivityClass], timing: Timing, rng: &mut ChaCha8Rng) -> Vec<Option<Episode>> {
    let mut t = timing.earliest + rng.gen_range(0.0..JITTER);
    classes
        .iter()
        .map(|&activity| {
            let duration = random_duration(activity, rng);
            let style = random_style(rng);
            let start = (t * 1000.0).round() / 1000.0;
            if start + duration > timing.latest {
                return None;
            }
            t = start + duration + timing.gap + rng.gen_range(0.0..JITTER);
            Some(Episode {
                activity,
                start,
                duration,
                style,
            })
        })
        .collect()
}

/// Initial range that centres the torso's excursion on the default range.
fn centred_initial_range(episodes: &[Episode], pri: f64) -> f64 {
    let (mut r, mut lo, mut hi) = (0.0_f64, 0.0_f64, 0.0_f64);
    for ep in episodes {
        let steps = (ep.duration / pri).round() as usize;
        for i in 0..steps {
            let (v, _) = motion_velocity(ep.activity.motion(), &ep.style, i as f64 * pri, ep.duration);
            r += v * pri;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    DEFAULT_INITIAL_RANGE - 0.5 * (lo + hi)
}

fn person(offset: f64, episodes: Vec<Episode>, pri: f64) -> PersonMotion {
    let range = centred_initial_range(&episodes, pri);
    PersonMotion::new(azimuth_from_broadside_offset(offset), range, episodes)
}

/// Deterministic scene list for `cfg.scenes`, seeded by `cfg.seed`.
pub fn plan_scenes(cfg: &PipelineConfig) -> Result<Vec<ScenePlan>> {
    cfg.scenes.validate()?;
    let timing = timing(cfg);
    let pri = cfg.radar.pri;
    if timing.earliest + WALK_DURATION.1.max(IN_PLACE_DURATION.1) + JITTER > timing.latest {
        return Err(Error::invalid(format!(
            "observation of {} pulses is too short for an episode after the {}-frame LTA warm-up",
            cfg.radar.num_pulses, cfg.trigger.lta_len
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005C_E9E5);

    let mut buckets: [Vec<ActivityClass>; 3] = Default::default();
    for (&class, &n) in &cfg.scenes.counts {
        let b = match class.broadside_offset() {
            o if o > 0.0 => 1,
            o if o < 0.0 => 2,
            _ => 0,
        };
        buckets[b].extend(std::iter::repeat_n(class, n));
    }
    for b in &mut buckets {
        b.shuffle(&mut rng);
    }

    let mut scenes: Vec<Vec<PersonMotion>> = Vec::new();
    // one person, consecutive episodes; unplaced classes go back in the queue
    let single = |queue: &mut Vec<ActivityClass>, offset: f64, rng: &mut ChaCha8Rng, out: &mut Vec<Vec<PersonMotion>>| {
        queue.reverse();
        while let Some(first) = queue.pop() {
            let mut classes = vec![first];
            if let Some(second) = queue.pop() {
                classes.push(second);
            }
            let slots = schedule(&classes, timing, rng);
            let mut episodes = Vec::new();
            for (class, slot) in classes.iter().zip(slots) {
                match slot {
                    Some(ep) => episodes.push(ep),
                    None => queue.push(*class),
                }
            }
            out.push(vec![person(offset, episodes, pri)]);
        }
    };
    let [mut broadside, mut plus, mut minus] = buckets;
    single(&mut broadside, 0.0, &mut rng, &mut scenes);

    let pairs = plus.len().min(minus.len());
    let rest_plus = plus.split_off(pairs);
    let rest_minus = minus.split_off(pairs);
    for (p, m) in plus.into_iter().zip(minus) {
        let plus_first = rng.gen_bool(0.5);
        let order = if plus_first { [p, m] } else { [m, p] };
        let slots = schedule(&order, timing, &mut rng);
        let mut slots = slots.into_iter();
        let (a, b) = (slots.next().flatten(), slots.next().flatten());
        let (ep_plus, ep_minus) = if plus_first { (a, b) } else { (b, a) };
        let ep_minus = match ep_minus {
            Some(ep) => Some(ep),
            // the second slot did not fit: give the -30 person its own scene
            None => {
                scenes.push(vec![person(-30.0, schedule(&[m], timing, &mut rng).into_iter().flatten().collect(), pri)]);
                None
            }
        };
        let ep_plus = match ep_plus {
            Some(ep) => Some(ep),
            None => {
                scenes.push(vec![person(30.0, schedule(&[p], timing, &mut rng).into_iter().flatten().collect(), pri)]);
                None
            }
        };
        scenes.push(vec![
            person(30.0, ep_plus.into_iter().collect(), pri),
            person(-30.0, ep_minus.into_iter().collect(), pri),
        ]);
    }
    let (mut rest_plus, mut rest_minus) = (rest_plus, rest_minus);
    single(&mut rest_plus, 30.0, &mut rng, &mut scenes);
    single(&mut rest_minus, -30.0, &mut rng, &mut scenes);

    Ok(scenes
        .into_iter()
        .enumerate()
        .map(|(i, persons)| ScenePlan {
            id: format!("scene_{i:04}"),
            persons,
        })
        .collect())
}
