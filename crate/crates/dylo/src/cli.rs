//! Command-line interface: dataset generation, training, grid search,
//! evaluation, single-image detection, and benchmarking.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{default_scenarios, run_bench, BenchConfig};
use crate::boxes::DetBox;
use crate::checkpoint;
use crate::data::{
    image_to_tensor, remap_annotation, unmap_detection, Dataset, Image, LabelStrategy,
};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, nms, EvalReport, DEFAULT_CONF_THRESHOLD, DEFAULT_IOU_THRESHOLD, MATCH_IOU,
};
use crate::nn::{decode, Detector, ModelConfig};
use crate::optim::{default_grid, grid_search, train, TrainConfig};
use crate::synth::{generate, SynthConfig};
use crate::tensor::Tape;

#[derive(Parser)]
#[command(
    name = "dylo",
    version,
    about = "Surface-defect detector: synthetic data, training, evaluation, inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset of machined parts with injected defects
    GenData(GenDataArgs),
    /// Train a detector on a manifest-listed dataset
    Train(TrainArgs),
    /// Sweep learning rate and weight decay, then report the best run
    Grid(GridArgs),
    /// Score a checkpoint against a dataset split
    Eval(EvalArgs),
    /// Detect defects in one image and print the boxes
    Detect(DetectArgs),
    /// Time the inference pipeline over standard scenarios
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Directory the images, labels, and manifest are written into
    #[arg(long)]
    out: PathBuf,
    /// JSON file with generator settings (all fields optional)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override: base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override: images per part/defect pairing
    #[arg(long)]
    per_pair: Option<usize>,
    /// Override: square image edge in pixels
    #[arg(long)]
    img_size: Option<usize>,
    /// Override: labeling strategy (severity_based, type_based, no_roi)
    #[arg(long)]
    strategy: Option<LabelStrategy>,
    /// Override: training share of each stratum, in (0, 1)
    #[arg(long)]
    train_ratio: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Path to the dataset manifest JSON
    #[arg(long)]
    data: PathBuf,
    /// Directory for the metrics log and the best checkpoint
    #[arg(long)]
    out: PathBuf,
    /// JSON file with network settings
    #[arg(long)]
    model_config: Option<PathBuf>,
    /// JSON file with training settings
    #[arg(long)]
    train_config: Option<PathBuf>,
    /// Override: epoch budget
    #[arg(long)]
    epochs: Option<usize>,
    /// Override: batch size
    #[arg(long)]
    batch_size: Option<usize>,
    /// Override: learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Override: weight decay
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Override: run seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GridArgs {
    /// Path to the dataset manifest JSON
    #[arg(long)]
    data: PathBuf,
    /// Directory for per-run metric logs
    #[arg(long)]
    out: PathBuf,
    /// JSON file with network settings
    #[arg(long)]
    model_config: Option<PathBuf>,
    /// JSON file with training settings shared by every run
    #[arg(long)]
    train_config: Option<PathBuf>,
    /// Learning rates to sweep
    #[arg(long, value_delimiter = ',')]
    rates: Vec<f64>,
    /// Weight decays to sweep
    #[arg(long, value_delimiter = ',')]
    decays: Vec<f64>,
    /// Override: epoch budget per run
    #[arg(long)]
    epochs: Option<usize>,
    /// Override: run seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Path to the dataset manifest JSON
    #[arg(long)]
    data: PathBuf,
    /// Trained model checkpoint
    #[arg(long)]
    checkpoint: PathBuf,
    /// Split to score
    #[arg(long, default_value = "val")]
    split: String,
    /// Print the report as JSON instead of a table
    #[arg(long)]
    json: bool,
    /// Confidence threshold for keeping detections
    #[arg(long, default_value_t = DEFAULT_CONF_THRESHOLD)]
    conf: f64,
    /// Overlap threshold for suppressing duplicates
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    nms_iou: f64,
    /// Overlap a detection needs with a truth box to count as correct
    #[arg(long, default_value_t = MATCH_IOU)]
    match_iou: f64,
}

#[derive(Args)]
struct DetectArgs {
    /// Trained model checkpoint
    #[arg(long)]
    checkpoint: PathBuf,
    /// Image to scan (binary PPM/PGM)
    #[arg(long)]
    image: PathBuf,
    /// Confidence threshold for keeping detections
    #[arg(long, default_value_t = DEFAULT_CONF_THRESHOLD)]
    conf: f64,
    /// Overlap threshold for suppressing duplicates
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    nms_iou: f64,
    /// Manifest whose class names label the output
    #[arg(long)]
    data: Option<PathBuf>,
    /// Write a copy of the image with boxes drawn to this path
    #[arg(long)]
    annotated: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Checkpoint to benchmark; omitted, a freshly initialized default
    /// network is timed instead
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Timed runs per scenario
    #[arg(long, default_value_t = 30)]
    iterations: usize,
    /// Untimed runs before measurement
    #[arg(long, default_value_t = 5)]
    warmup: usize,
    /// Seed for the scenario imagery
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Entry point shared by the binary and in-process tests. `args` excludes
/// the program name.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let argv = std::iter::once("dylo".to_string()).chain(args);
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn cmd_gen_data(a: GenDataArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => load_json(p)?,
        None => SynthConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.per_pair {
        cfg.per_pair = v;
    }
    if let Some(v) = a.img_size {
        cfg.img_size = v;
    }
    if let Some(v) = a.strategy {
        cfg.strategy = v;
    }
    if let Some(v) = a.train_ratio {
        cfg.train_ratio = v;
    }
    let manifest = generate(&a.out, &cfg)?;
    let count = |s: &str| manifest.entries.iter().filter(|e| e.split == s).count();
    println!(
        "wrote {} images to {} ({} train / {} val, {} classes, strategy {})",
        manifest.entries.len(),
        a.out.display(),
        count("train"),
        count("val"),
        manifest.num_classes(),
        manifest.strategy
    );
    Ok(())
}

/// Shared setup for train/grid: open the dataset, resolve configs, apply
/// overrides. A model config that came from defaults (not a file) adopts
/// the dataset's class count.
fn training_setup(
    data: &Path,
    model_config: &Option<PathBuf>,
    train_config: &Option<PathBuf>,
) -> Result<(Dataset, ModelConfig, TrainConfig)> {
    let dataset = Dataset::open(data)?;
    let model_cfg = match model_config {
        Some(p) => load_json::<ModelConfig>(p)?,
        None => ModelConfig {
            num_classes: dataset.num_classes(),
            ..ModelConfig::default()
        },
    };
    let train_cfg = match train_config {
        Some(p) => load_json::<TrainConfig>(p)?,
        None => TrainConfig::default(),
    };
    Ok((dataset, model_cfg, train_cfg))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let (dataset, model_cfg, mut train_cfg) =
        training_setup(&a.data, &a.model_config, &a.train_config)?;
    if let Some(v) = a.epochs {
        train_cfg.max_epochs = v;
    }
    if let Some(v) = a.batch_size {
        train_cfg.batch_size = v;
    }
    if let Some(v) = a.lr {
        train_cfg.learning_rate = v;
    }
    if let Some(v) = a.weight_decay {
        train_cfg.weight_decay = v;
    }
    if let Some(v) = a.seed {
        train_cfg.seed = v;
    }
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let log = a.out.join("log.csv");
    let ckpt = a.out.join("best.ckpt");
    println!(
        "training on {} ({} train / {} val images, {} classes)",
        a.data.display(),
        dataset.entries("train").len(),
        dataset.entries("val").len(),
        dataset.num_classes()
    );
    let (outcome, _model) = train::<f32>(
        &dataset,
        &model_cfg,
        &train_cfg,
        Some(&log),
        Some(&ckpt),
        |s| {
            println!(
                "epoch {:>4}  lr {:.2e}  train {:.4}  val {:.4}  mAP {:.4}",
                s.epoch, s.learning_rate, s.train_loss, s.val_loss, s.val_map
            );
        },
    )?;
    match outcome.best_epoch {
        Some(e) => println!(
            "best epoch {e} with val mAP {:.4}; checkpoint at {}",
            outcome.best_val_map,
            ckpt.display()
        ),
        None => println!("no epoch scored above zero val mAP; no checkpoint written"),
    }
    if outcome.stopped_early {
        println!("stopped early after {} epochs", outcome.history.len());
    }
    println!("metrics log at {}", log.display());
    Ok(())
}

fn cmd_grid(a: GridArgs) -> Result<()> {
    let (dataset, model_cfg, mut train_cfg) =
        training_setup(&a.data, &a.model_config, &a.train_config)?;
    if let Some(v) = a.epochs {
        train_cfg.max_epochs = v;
    }
    if let Some(v) = a.seed {
        train_cfg.seed = v;
    }
    let (default_rates, default_decays) = default_grid();
    let rates = if a.rates.is_empty() { default_rates } else { a.rates };
    let decays = if a.decays.is_empty() { default_decays } else { a.decays };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let out = grid_search::<f32>(&dataset, &model_cfg, &train_cfg, &rates, &decays, Some(&a.out))?;
    println!(
        "{:<4} {:>10} {:>8} {:>10} {:>10}",
        "run", "lr", "wd", "val_loss", "val_mAP"
    );
    for (i, run) in out.runs.iter().enumerate() {
        let marker = if i == out.best { " *" } else { "" };
        println!(
            "{:<4} {:>10} {:>8} {:>10.4} {:>10.4}{marker}",
            i, run.point.learning_rate, run.point.weight_decay, run.final_val_loss, run.final_val_map
        );
    }
    let b = &out.runs[out.best];
    println!(
        "best: lr {} wd {} (final val mAP {:.4}); logs in {}",
        b.point.learning_rate,
        b.point.weight_decay,
        b.final_val_map,
        a.out.display()
    );
    Ok(())
}

/// Score every image of one split with the model; detections and truths
/// both live in the letterboxed network frame.
fn score_split(
    model: &Detector<f32>,
    dataset: &Dataset,
    split: &str,
    conf: f64,
    nms_iou: f64,
    match_iou: f64,
) -> Result<EvalReport> {
    let entries = dataset.entries(split);
    if entries.is_empty() {
        return Err(Error::Data(format!("the dataset has no '{split}' entries")));
    }
    let mcfg = &model.config;
    let mut scored: Vec<(Vec<DetBox>, Vec<DetBox>)> = Vec::with_capacity(entries.len());
    for entry in entries {
        let sample = dataset.load_sample(entry)?;
        let (input, lb) = image_to_tensor::<f32>(&sample.image, mcfg.input_size, mcfg.input_channels)?;
        let truth: Vec<DetBox> = sample.boxes.iter().map(|b| remap_annotation(b, &lb)).collect();
        let mut tape = Tape::inference();
        let preds = model.forward(&mut tape, &input)?;
        let raw = decode(&preds, conf)?;
        scored.push((nms(&raw, conf, nms_iou), truth));
    }
    evaluate(&scored, &dataset.manifest.class_names, match_iou)
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let dataset = Dataset::open(&a.data)?;
    let (model, model_cfg, meta) = checkpoint::load::<f32>(&a.checkpoint)?;
    if model_cfg.num_classes != dataset.num_classes() {
        return Err(Error::Config(format!(
            "checkpoint was trained for {} classes but the dataset defines {}",
            model_cfg.num_classes,
            dataset.num_classes()
        )));
    }
    let report = score_split(&model, &dataset, &a.split, a.conf, a.nms_iou, a.match_iou)?;
    if a.json {
        println!("{}", report.to_json());
    } else {
        println!(
            "checkpoint {} (epoch {}, val mAP {:.4} at save time)",
            a.checkpoint.display(),
            meta.epoch,
            meta.best_val_map
        );
        print!("{}", report.render_table());
    }
    Ok(())
}

fn draw_box(img: &mut Image, b: &DetBox, color: [u8; 3]) {
    let x1 = b.x1().round().max(0.0) as usize;
    let y1 = b.y1().round().max(0.0) as usize;
    let x2 = (b.x2().round() as usize).min(img.width.saturating_sub(1));
    let y2 = (b.y2().round() as usize).min(img.height.saturating_sub(1));
    if x1 > x2 || y1 > y2 {
        return;
    }
    for x in x1..=x2 {
        img.put(x, y1, &color);
        img.put(x, y2, &color);
    }
    for y in y1..=y2 {
        img.put(x1, y, &color);
        img.put(x2, y, &color);
    }
}

fn cmd_detect(a: DetectArgs) -> Result<()> {
    let (model, model_cfg, _meta) = checkpoint::load::<f32>(&a.checkpoint)?;
    let class_names: Vec<String> = match &a.data {
        Some(p) => {
            let ds = Dataset::open(p)?;
            if ds.num_classes() != model_cfg.num_classes {
                return Err(Error::Config(format!(
                    "manifest defines {} classes but the checkpoint expects {}",
                    ds.num_classes(),
                    model_cfg.num_classes
                )));
            }
            ds.manifest.class_names.clone()
        }
        None => (0..model_cfg.num_classes).map(|i| format!("class{i}")).collect(),
    };
    let img = Image::read_pnm(&a.image)?;
    let (input, lb) = image_to_tensor::<f32>(&img, model_cfg.input_size, model_cfg.input_channels)?;
    let mut tape = Tape::inference();
    let preds = model.forward(&mut tape, &input)?;
    let raw = decode(&preds, a.conf)?;
    let dets: Vec<DetBox> = nms(&raw, a.conf, a.nms_iou)
        .iter()
        .map(|d| unmap_detection(d, &lb))
        .collect();
    if dets.is_empty() {
        println!("no defects above confidence {:.2}", a.conf);
    }
    for d in &dets {
        println!(
            "{} {:.3} {:.1} {:.1} {:.1} {:.1}",
            class_names[d.class_id],
            d.score,
            d.x1(),
            d.y1(),
            d.x2(),
            d.y2()
        );
    }
    if let Some(out) = &a.annotated {
        let mut canvas = if img.channels == 3 {
            img.clone()
        } else {
            let mut c = Image::new(img.width, img.height, 3, 0);
            for y in 0..img.height {
                for x in 0..img.width {
                    let v = img.get(x, y, 0);
                    c.put(x, y, &[v, v, v]);
                }
            }
            c
        };
        for d in &dets {
            draw_box(&mut canvas, d, [255, 32, 32]);
        }
        canvas.write_pnm(out)?;
        println!("annotated image written to {}", out.display());
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let model: Detector<f32> = match &a.checkpoint {
        Some(p) => checkpoint::load::<f32>(p)?.0,
        None => Detector::new(&ModelConfig::default())?,
    };
    let cfg = BenchConfig {
        warmup: a.warmup,
        iterations: a.iterations,
    };
    let scenarios = default_scenarios(a.seed);
    let report = run_bench(&model, &scenarios, &cfg)?;
    print!("{}", report.render_table());
    Ok(())
}
