//! End-to-end runs: synthesise scenes, form beamformed spectrograms, segment
//! them into labelled events, then train and evaluate the classifier.
//!
//! Each stage reads only the previous stage's directory under the run root,
//! so a run can be resumed from any stage:
//!
//! ```text
//! <root>/config.json
//!        cubes/          scene_NNNN.mdc, scene_NNNN.truth.json, calib.mdc
//!        spectrograms/   scene_NNNN_{b0,p30,m30}.{png,json}
//!        events/         events.csv, thresholds.json
//!        images/         <example>_{b0,p30,m30}.png, <example>.json
//!        model/          model.mdn, report.json, confusion.csv
//!        manifest.json
//!        plots/          overlays and the confusion heatmap (not in the manifest)
//! ```

mod config;
mod examples_io;
mod manifest;
mod plan;
mod plots;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{PipelineConfig, SceneRecipe, SpectrogramSettings, Stage, TriggerSettings};
pub use examples_io::{load_labeled_examples, read_examples, write_example, ExampleSidecar};
pub use manifest::{sha256_file, Manifest, ManifestEntry, MANIFEST_FILE};
pub use plan::{plan_scenes, ScenePlan};
pub use plots::{emit_plots, overlay_image, PlotReport, BAND_COLOR, BAND_ROWS};

use crate::activity::ActivityClass;
use crate::beamform::beamform;
use crate::error::{Error, Result};
use crate::nnet::{self, load_model, save_model, CnnModel, Evaluation, TrainConfig};
use crate::radar::{azimuth_from_broadside_offset, look_tag, LOOK_OFFSETS};
use crate::scene::{read_cube, read_ground_truth, synthesize_cube, write_cube, write_ground_truth, PersonTruth, RawDataCube};
use crate::segment::{
    central_envelope_avg, crop_pad_resize, detect_events, interval_iou, trigger_signal, write_events_csv,
    EventInterval, EventRecord, TriggerConfig,
};
use crate::tfproc::{
    collapse_range, hann, range_bins_for, range_map, read_spectrogram, reshape_pulses, spectrogram, to_image,
    write_spectrogram, Spectrogram, SpectrogramMeta,
};

/// Stem of the noise-only calibration cube.
pub const CALIB_STEM: &str = "calib";

/// Directory layout of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn cubes(&self) -> PathBuf {
        self.root.join("cubes")
    }

    pub fn spectrograms(&self) -> PathBuf {
        self.root.join("spectrograms")
    }

    pub fn events(&self) -> PathBuf {
        self.root.join("events")
    }

    pub fn images(&self) -> PathBuf {
        self.root.join("images")
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("model")
    }

    pub fn plots(&self) -> PathBuf {
        self.root.join("plots")
    }

    pub fn calib_cube(&self) -> PathBuf {
        self.cubes().join(format!("{CALIB_STEM}.mdc"))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Removes and recreates `dir` so reruns never mix old and new artifacts.
fn fresh_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    create_dir(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == ext))
        .collect();
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn scene_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64 + 1)
}

/// Writes one cube and its ground truth per planned scene, plus a noise-only
/// calibration cube. Returns the scene cube paths.
pub fn synth_stage(cfg: &PipelineConfig, cubes_dir: &Path) -> Result<Vec<PathBuf>> {
    let plans = plan_scenes(cfg)?;
    fresh_dir(cubes_dir)?;
    let mut paths = Vec::with_capacity(plans.len());
    for (i, plan) in plans.iter().enumerate() {
        let cube = synthesize_cube(&plan.persons, &cfg.radar, scene_seed(cfg.seed, i))?;
        let path = cubes_dir.join(format!("{}.mdc", plan.id));
        write_cube(&path, &cube)?;
        write_ground_truth(&cubes_dir.join(format!("{}.truth.json", plan.id)), &cube.ground_truth)?;
        paths.push(path);
    }
    let calib = synthesize_cube(&[], &cfg.radar, scene_seed(cfg.seed, usize::MAX - 1))?;
    write_cube(&cubes_dir.join(format!("{CALIB_STEM}.mdc")), &calib)?;
    Ok(paths)
}

/// Beamforms `cube` toward a broadside offset and forms its spectrogram.
pub fn beam_spectrogram(cube: &RawDataCube, offset_deg: f64, settings: &SpectrogramSettings) -> Result<Spectrogram> {
    let params = &cube.params;
    let y = beamform(cube, azimuth_from_broadside_offset(offset_deg))?;
    let rm = range_map(reshape_pulses(y, params.samples_per_pulse)?);
    let (lo, hi) = range_bins_for(params, settings.min_range, settings.max_range)?;
    let v = collapse_range(&rm, lo, hi)?;
    spectrogram(&v, &hann(settings.window_len), settings.hop)
}

/// Spectrograms of one cube file for each offset, written as
/// `<out>/<cube stem>_<tag>.{png,json}`. Returns the JSON paths.
pub fn cube_spectrograms(cube_path: &Path, offsets: &[f64], settings: &SpectrogramSettings, out: &Path) -> Result<Vec<PathBuf>> {
    let cube = read_cube(cube_path)?;
    let id = stem(cube_path);
    let range_bins = range_bins_for(&cube.params, settings.min_range, settings.max_range)?;
    offsets
        .iter()
        .map(|&offset| {
            let spec = beam_spectrogram(&cube, offset, settings)?;
            let meta = SpectrogramMeta {
                id: id.clone(),
                look_offset_deg: offset,
                sample_period: cube.params.pri,
                range_bins,
                dynamic_range_db: settings.dynamic_range_db,
            };
            let (_, json) = write_spectrogram(out, &format!("{id}_{}", look_tag(offset)), &spec, &meta)?;
            Ok(json)
        })
        .collect()
}

/// Spectrograms at every look direction for every scene cube in `cubes_dir`.
pub fn spectrogram_stage(cubes_dir: &Path, spec_dir: &Path, settings: &SpectrogramSettings) -> Result<Vec<PathBuf>> {
    fresh_dir(spec_dir)?;
    let mut out = Vec::new();
    for cube in files_with_ext(cubes_dir, "mdc")? {
        if stem(&cube) == CALIB_STEM {
            continue;
        }
        out.extend(cube_spectrograms(&cube, &LOOK_OFFSETS, settings, spec_dir)?);
    }
    Ok(out)
}

/// Trigger thresholds from the broadside beam of a noise-only cube.
pub fn calibrate_trigger(calib_cube: &Path, settings: &SpectrogramSettings, trigger: &TriggerSettings) -> Result<TriggerConfig> {
    let cube = read_cube(calib_cube)?;
    let spec = beam_spectrogram(&cube, 0.0, settings)?;
    let signal = trigger_signal(&central_envelope_avg(&spec), spec.center_row());
    trigger.resolve(&signal)
}

/// Detected events of one spectrogram.
pub fn spectrogram_events(spec: &Spectrogram, cfg: &TriggerConfig) -> Result<Vec<EventInterval>> {
    detect_events(&trigger_signal(&central_envelope_avg(spec), spec.center_row()), cfg)
}

/// Ground-truth events of the people at `offset`, in frames.
fn truth_frames(truth: &[PersonTruth], offset: f64, spec: &Spectrogram) -> Vec<(ActivityClass, (usize, usize))> {
    let half = spec.window.len() as f64 / 2.0;
    let to_frame = |q: usize| (((q as f64 - half) / spec.hop as f64).round().max(0.0) as usize).min(spec.frames);
    truth
        .iter()
        .filter(|p| (p.broadside_offset_deg - offset).abs() < 1e-6)
        .flat_map(|p| {
            p.labels
                .iter()
                .zip(&p.event_pulses)
                .map(|(&label, &(a, b))| (label, (to_frame(a), to_frame(b))))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Greedy one-to-one matching of detections to ground truth by IoU.
fn match_events(
    events: &[EventInterval],
    truth: &[(ActivityClass, (usize, usize))],
    min_iou: f64,
) -> Vec<Option<ActivityClass>> {
    let mut used = vec![false; truth.len()];
    events
        .iter()
        .map(|ev| {
            let best = truth
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, (_, iv))| (j, interval_iou((ev.start, ev.end), *iv)))
                .filter(|&(_, iou)| iou >= min_iou)
                .fold(None, |best: Option<(usize, f64)>, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                });
            best.map(|(j, _)| {
                used[j] = true;
                truth[j].0
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub thresholds: TriggerConfig,
    pub events: usize,
    pub examples: usize,
    pub labelled: usize,
}

/// Segments every scene's spectrograms into events and exports one example
/// (crops of all look directions over the event) per event. With
/// `truth_dir`, events are labelled from `<scene>.truth.json` and unmatched
/// events are left out of the examples.
#[allow(clippy::too_many_arguments)]
pub fn segment_stage(
    spec_dir: &Path,
    calib_cube: &Path,
    truth_dir: Option<&Path>,
    events_dir: &Path,
    images_dir: &Path,
    settings: &SpectrogramSettings,
    trigger: &TriggerSettings,
    match_iou: f64,
) -> Result<SegmentSummary> {
    let cfg = calibrate_trigger(calib_cube, settings, trigger)?;
    fresh_dir(events_dir)?;
    fresh_dir(images_dir)?;
    write_json(&events_dir.join("thresholds.json"), &cfg)?;

    let mut scenes: BTreeMap<String, Vec<(String, Spectrogram, SpectrogramMeta)>> = BTreeMap::new();
    for json in files_with_ext(spec_dir, "json")? {
        let (spec, meta) = read_spectrogram(&json)?;
        scenes.entry(meta.id.clone()).or_default().push((stem(&json), spec, meta));
    }

    let mut records = Vec::new();
    let mut summary = SegmentSummary {
        thresholds: cfg,
        events: 0,
        examples: 0,
        labelled: 0,
    };
    for (scene, beams) in &scenes {
        let beam_at = |offset: f64| beams.iter().find(|(_, _, m)| (m.look_offset_deg - offset).abs() < 1e-6);
        let ordered = LOOK_OFFSETS
            .iter()
            .map(|&o| beam_at(o).ok_or_else(|| Error::format(format!("scene {scene} has no {} spectrogram", look_tag(o)))))
            .collect::<Result<Vec<_>>>()?;
        let images: Vec<_> = ordered.iter().map(|(_, s, m)| to_image(s, m.dynamic_range_db)).collect();
        let truth = match truth_dir {
            Some(dir) => Some(read_ground_truth(&dir.join(format!("{scene}.truth.json")))?),
            None => None,
        };
        for (stem_name, spec, meta) in &ordered {
            let events = spectrogram_events(spec, &cfg)?;
            summary.events += events.len();
            records.extend(events.iter().map(|ev| EventRecord::new(stem_name, meta.look_offset_deg, ev)));
            let labels = match &truth {
                Some(t) => match_events(&events, &truth_frames(t, meta.look_offset_deg, spec), match_iou),
                None => vec![None; events.len()],
            };
            for (k, (ev, label)) in events.iter().zip(labels).enumerate() {
                if truth.is_some() && label.is_none() {
                    continue;
                }
                let id = format!("{scene}_{}_e{k:02}", look_tag(meta.look_offset_deg));
                let tensors = images.iter().map(|img| crop_pad_resize(img, ev)).collect::<Result<Vec<_>>>()?;
                let sidecar = ExampleSidecar {
                    id: id.clone(),
                    scene: scene.clone(),
                    look_offset_deg: meta.look_offset_deg,
                    interval: *ev,
                    label,
                    images: LOOK_OFFSETS.iter().map(|&o| format!("{id}_{}.png", look_tag(o))).collect(),
                };
                write_example(images_dir, &sidecar, &tensors)?;
                summary.examples += 1;
                summary.labelled += usize::from(label.is_some());
            }
        }
    }
    write_events_csv(&events_dir.join("events.csv"), &records)?;
    Ok(summary)
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub examples: usize,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub loss_history: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Held-out confusion, row-normalised percentages.
    pub test_confusion_percent: Vec<Vec<f64>>,
    pub train_confusion: Vec<Vec<usize>>,
    pub test_confusion: Vec<Vec<usize>>,
}

/// Trains on the labelled examples in `images_dir` and writes `model.mdn`,
/// `report.json` and the held-out `confusion.csv` into `model_dir`.
pub fn train_stage(images_dir: &Path, model_dir: &Path, cfg: &TrainConfig) -> Result<TrainReport> {
    let examples = load_labeled_examples(images_dir)?;
    if examples.is_empty() {
        return Err(Error::format(format!("no labelled examples in {}", images_dir.display())));
    }
    let outcome = nnet::train(&examples, cfg)?;
    fresh_dir(model_dir)?;
    save_model(&model_dir.join("model.mdn"), &outcome.model)?;
    outcome.test_eval.write_confusion_csv(&model_dir.join("confusion.csv"))?;
    let ids = |idx: &[usize]| idx.iter().map(|&i| examples[i].id.clone()).collect::<Vec<_>>();
    let report = TrainReport {
        config: cfg.clone(),
        examples: examples.len(),
        train_ids: ids(&outcome.split.train),
        test_ids: ids(&outcome.split.test),
        loss_history: outcome.loss_history.clone(),
        train_accuracy: outcome.train_eval.accuracy(),
        test_accuracy: outcome.test_eval.accuracy(),
        test_confusion_percent: outcome.test_eval.row_percentages(),
        train_confusion: outcome.train_eval.counts.clone(),
        test_confusion: outcome.test_eval.counts.clone(),
    };
    write_json(&model_dir.join("report.json"), &report)?;
    Ok(report)
}

/// Evaluates a saved model on every labelled example in `images_dir`.
pub fn eval_stage(model_path: &Path, images_dir: &Path) -> Result<Evaluation> {
    let model: CnnModel<f32> = load_model(model_path)?;
    let examples = load_labeled_examples(images_dir)?;
    if examples.is_empty() {
        return Err(Error::format(format!("no labelled examples in {}", images_dir.display())));
    }
    let refs: Vec<_> = examples.iter().collect();
    nnet::evaluate(&model, &refs)
}

/// Runs the stages from `from` onward under `cfg.output_dir` and writes the
/// manifest. Earlier stages' outputs must already exist.
pub fn run_pipeline(cfg: &PipelineConfig, from: Stage) -> Result<Manifest> {
    cfg.validate()?;
    let layout = RunLayout::new(&cfg.output_dir);
    std::fs::create_dir_all(&layout.root).map_err(|e| {
        Error::invalid(format!("cannot create output directory {}: {e}", layout.root.display()))
    })?;
    let stored = PipelineConfig {
        output_dir: PathBuf::from("."),
        ..cfg.clone()
    };
    write_json(&layout.root.join("config.json"), &stored)?;

    if from <= Stage::Synth {
        synth_stage(cfg, &layout.cubes())?;
    }
    if from <= Stage::Spectrograms {
        spectrogram_stage(&layout.cubes(), &layout.spectrograms(), &cfg.spectrogram)?;
    }
    if from <= Stage::Segment {
        segment_stage(
            &layout.spectrograms(),
            &layout.calib_cube(),
            Some(&layout.cubes()),
            &layout.events(),
            &layout.images(),
            &cfg.spectrogram,
            &cfg.trigger,
            cfg.scenes.match_iou,
        )?;
    }
    train_stage(&layout.images(), &layout.model(), &cfg.train)?;

    let manifest = Manifest::build(&layout.root)?;
    manifest.write(&layout.root)?;
    Ok(manifest)
}
