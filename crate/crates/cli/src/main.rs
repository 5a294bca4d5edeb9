use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mdchar::beamform::beamformed_cube;
use mdchar::nnet::TrainConfig;
use mdchar::pipeline::{
    cube_spectrograms, emit_plots, eval_stage, run_pipeline, segment_stage, synth_stage, train_stage, Manifest,
    PipelineConfig, RunLayout, SceneRecipe, Stage, MANIFEST_FILE,
};
use mdchar::radar::{azimuth_from_broadside_offset, LOOK_OFFSETS};
use mdchar::scene::{read_cube, write_cube};
use mdchar::Error;

/// Multi-person radar activity recognition from micro-Doppler spectrograms.
#[derive(Parser)]
#[command(name = "mdchar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise the scene cubes of a dataset recipe.
    Synth(SynthArgs),
    /// Beamform a cube toward one look direction into a single-element cube.
    Beamform(BeamformArgs),
    /// Beamformed micro-Doppler spectrograms of one cube.
    Spectrogram(SpectrogramArgs),
    /// Segment spectrograms into events and cropped example images.
    Segment(SegmentArgs),
    /// Train the classifier on labelled example images.
    Train(TrainArgs),
    /// Evaluate a trained model on labelled example images.
    Eval(EvalArgs),
    /// Run the full chain and write a manifest.
    Pipeline(PipelineArgs),
    /// Render envelope overlays and the confusion heatmap of a finished run.
    Plot(PlotArgs),
}

/// Shared configuration flags; explicit flags override the JSON file.
#[derive(Args)]
struct ConfigArgs {
    /// Pipeline configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run root; overrides the configuration file.
    #[arg(long, env = "MDCHAR_OUTPUT_ROOT")]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Examples per class (uniform recipe) instead of the configured recipe.
    #[arg(long)]
    per_class: Option<usize>,
    /// Fast-time samples per pulse; the ADC rate follows.
    #[arg(long)]
    samples_per_pulse: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

impl ConfigArgs {
    fn load(&self) -> mdchar::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_json_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.train.seed = seed;
        }
        if let Some(n) = self.per_class {
            cfg.scenes = SceneRecipe {
                match_iou: cfg.scenes.match_iou,
                ..SceneRecipe::uniform(n)
            };
        }
        if let Some(p) = self.samples_per_pulse {
            cfg.radar = cfg.radar.with_samples_per_pulse(p);
        }
        self.apply_train(&mut cfg.train);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_train(&self, train: &mut TrainConfig) {
        if let Some(e) = self.epochs {
            train.epochs = e;
        }
        if let Some(b) = self.batch_size {
            train.batch_size = b;
        }
        if let Some(lr) = self.learning_rate {
            train.adam.learning_rate = lr;
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct BeamformArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Degrees from broadside: 0, +30 or -30.
    #[arg(long, allow_negative_numbers = true)]
    look_angle: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrogramArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Degrees from broadside; repeat for several beams. Defaults to 0, +30 and -30.
    #[arg(long, allow_negative_numbers = true)]
    look_angle: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Configuration JSON supplying the spectrogram settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    /// Directory of spectrogram JSON sidecars.
    #[arg(long = "in")]
    input: PathBuf,
    /// Noise-only cube used to calibrate the trigger thresholds.
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Directory of `<scene>.truth.json` files used to label events.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Example image directory; defaults to `<out>/images`.
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    images: PathBuf,
    /// Write the row-normalised confusion matrix here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// First stage to run; earlier outputs are reused.
    #[arg(long, default_value = "synth")]
    from: Stage,
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Run root holding `manifest.json`.
    #[arg(long, env = "MDCHAR_OUTPUT_ROOT")]
    root: PathBuf,
}

fn config_or_default(path: &Option<PathBuf>) -> mdchar::Result<PipelineConfig> {
    match path {
        Some(p) => {
            let cfg = PipelineConfig::from_json_file(p)?;
            cfg.validate()?;
            Ok(cfg)
        }
        None => Ok(PipelineConfig::default()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    match serde_json::to_string_pretty(value) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("warning: could not format summary: {e}"),
    }
}

fn print_plots(root: &Path, manifest: &Manifest) -> mdchar::Result<()> {
    let report = emit_plots(root, manifest)?;
    println!("plots: {} overlays, heatmap: {}", report.overlays.len(), report.heatmap.is_some());
    for m in &report.missing {
        eprintln!("missing artifact: {m}");
    }
    Ok(())
}

fn run(cli: Cli) -> mdchar::Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let cfg = a.cfg.load()?;
            let layout = RunLayout::new(&cfg.output_dir);
            let cubes = synth_stage(&cfg, &layout.cubes())?;
            println!("wrote {} scene cubes and a calibration cube to {}", cubes.len(), layout.cubes().display());
        }
        Command::Beamform(a) => {
            let cube = read_cube(&a.input)?;
            let out = beamformed_cube(&cube, azimuth_from_broadside_offset(a.look_angle))?;
            write_cube(&a.out, &out)?;
            println!("{}", a.out.display());
        }
        Command::Spectrogram(a) => {
            let cfg = config_or_default(&a.config)?;
            let offsets = if a.look_angle.is_empty() { LOOK_OFFSETS.to_vec() } else { a.look_angle };
            std::fs::create_dir_all(&a.out).map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
            for json in cube_spectrograms(&a.input, &offsets, &cfg.spectrogram, &a.out)? {
                println!("{}", json.display());
            }
        }
        Command::Segment(a) => {
            let cfg = config_or_default(&a.config)?;
            let images = a.images.unwrap_or_else(|| a.out.join("images"));
            let summary = segment_stage(
                &a.input,
                &a.calib,
                a.truth.as_deref(),
                &a.out,
                &images,
                &cfg.spectrogram,
                &cfg.trigger,
                cfg.scenes.match_iou,
            )?;
            print_json(&summary);
        }
        Command::Train(a) => {
            let cfg = a.cfg.load()?;
            let report = train_stage(&a.images, &a.out, &cfg.train)?;
            println!(
                "{} examples, train accuracy {:.4}, held-out accuracy {:.4}",
                report.examples, report.train_accuracy, report.test_accuracy
            );
        }
        Command::Eval(a) => {
            let eval = eval_stage(&a.model, &a.images)?;
            println!("{} examples, accuracy {:.4}", eval.total, eval.accuracy());
            if let Some(out) = a.out {
                eval.write_confusion_csv(&out)?;
            }
        }
        Command::Pipeline(a) => {
            let cfg = a.cfg.load()?;
            let started = Instant::now();
            let manifest = run_pipeline(&cfg, a.from)?;
            println!(
                "{} artifacts in {} ({:.1} s)",
                manifest.files.len(),
                cfg.output_dir.display(),
                started.elapsed().as_secs_f64()
            );
            if !a.no_plots {
                print_plots(&cfg.output_dir, &manifest)?;
            }
        }
        Command::Plot(a) => {
            let manifest = Manifest::read(&a.root.join(MANIFEST_FILE))?;
            print_plots(&a.root, &manifest)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
