//! Inference benchmark: times the full detection path — preprocessing,
//! forward pass, box decoding, and suppression — over canned scenes and
//! reports per-scenario latency percentiles and throughput.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::annotation::Severity;
use crate::data::{image_to_tensor, Image};
use crate::error::{Error, Result};
use crate::eval::{nms, DEFAULT_CONF_THRESHOLD, DEFAULT_IOU_THRESHOLD};
use crate::nn::{decode, Detector};
use crate::synth::{apply_defect, background_at, render_part, DefectType, PartKind};
use crate::tensor::Tape;

/// One image to time, under a short display name.
#[derive(Clone, Debug)]
pub struct BenchScenario {
    pub name: String,
    pub image: Image,
}

#[derive(Clone, Copy, Debug)]
pub struct BenchConfig {
    /// Untimed runs before measurement starts.
    pub warmup: usize,
    /// Timed runs per scenario.
    pub iterations: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            warmup: 5,
            iterations: 30,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("the benchmark needs at least one timed run".into()));
        }
        Ok(())
    }
}

/// Latency summary for one scenario.
#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub name: String,
    pub avg_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    /// Sustained throughput implied by the average latency.
    pub fps: f64,
    /// Detections the final timed run produced.
    pub detections: usize,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub rows: Vec<ScenarioResult>,
}

impl BenchReport {
    /// Fixed-width text table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:>9} {:>9} {:>9} {:>7} {:>6}\n",
            "scenario", "avg_ms", "p50_ms", "p95_ms", "fps", "boxes"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<14} {:>9.2} {:>9.2} {:>9.2} {:>7.1} {:>6}\n",
                r.name, r.avg_ms, r.p50_ms, r.p95_ms, r.fps, r.detections
            ));
        }
        out
    }
}

/// Nearest-rank percentile of an ascending-sorted, non-empty slice:
/// the smallest element with at least `q` percent of the data at or
/// below it.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty slice");
    let n = sorted.len();
    let rank = ((q / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Throughput implied by an average per-frame latency in milliseconds.
pub fn fps_from_avg_ms(avg_ms: f64) -> f64 {
    1000.0 / avg_ms
}

/// Reduce raw per-run times (milliseconds, any order) to a result row.
pub fn summarize(name: &str, times_ms: &[f64], detections: usize) -> ScenarioResult {
    assert!(!times_ms.is_empty(), "summarize needs at least one time");
    let mut sorted = times_ms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let avg = sorted.iter().sum::<f64>() / sorted.len() as f64;
    ScenarioResult {
        name: name.to_string(),
        avg_ms: avg,
        p50_ms: percentile(&sorted, 50.0),
        p95_ms: percentile(&sorted, 95.0),
        fps: fps_from_avg_ms(avg),
        detections,
    }
}

fn paste(dst: &mut Image, src: &Image, x0: usize, y0: usize) {
    for y in 0..src.height.min(dst.height.saturating_sub(y0)) {
        for x in 0..src.width.min(dst.width.saturating_sub(x0)) {
            for c in 0..dst.channels {
                dst.set(x0 + x, y0 + y, c, src.get(x, y, c));
            }
        }
    }
}

fn defect_image(
    kind: PartKind,
    defect: DefectType,
    severity: Severity,
    size: usize,
    seed: u64,
) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = render_part(kind, size, &mut rng);
    let (img, _) = apply_defect(&scene, defect, severity, &mut rng)
        .expect("benchmark scenario uses a compatible part/defect pair");
    img
}

/// The standard scenario set:
/// - `simple`: one part, one modest defect, 256 px;
/// - `complex`: heavily textured rust damage, 256 px;
/// - `multi_target`: four defective parts tiled into one 256-px frame;
/// - `high_res`: a 1920x1080 frame with the part occupying a corner.
pub fn default_scenarios(seed: u64) -> Vec<BenchScenario> {
    let simple = defect_image(PartKind::Bearing, DefectType::Scratch, Severity::Moderate, 256, seed);
    let complex = defect_image(PartKind::Bolt, DefectType::Rust, Severity::Severe, 256, seed ^ 1);

    let mut multi = Image::new(256, 256, 3, 0);
    let quads = [
        (PartKind::Bearing, DefectType::Crack, 0usize, 0usize),
        (PartKind::Gear, DefectType::BrokenTooth, 128, 0),
        (PartKind::Bolt, DefectType::Deformation, 0, 128),
        (PartKind::Gear, DefectType::Wear, 128, 128),
    ];
    for (i, &(kind, defect, x, y)) in quads.iter().enumerate() {
        let tile = defect_image(kind, defect, Severity::Severe, 128, seed ^ (2 + i as u64));
        paste(&mut multi, &tile, x, y);
    }

    let mut high = Image::new(1920, 1080, 3, 0);
    for y in 0..high.height {
        for x in 0..high.width {
            high.put(x, y, &background_at(x, y, seed ^ 0xB6));
        }
    }
    let part = defect_image(PartKind::Gear, DefectType::BrokenTooth, Severity::Severe, 512, seed ^ 6);
    paste(&mut high, &part, 96, 96);

    vec![
        BenchScenario { name: "simple".into(), image: simple },
        BenchScenario { name: "complex".into(), image: complex },
        BenchScenario { name: "multi_target".into(), image: multi },
        BenchScenario { name: "high_res".into(), image: high },
    ]
}

/// Time the full pipeline on each scenario. Warmup runs are discarded;
/// each timed run measures preprocess + forward + decode + suppression
/// end to end.
pub fn run_bench(
    model: &Detector<f32>,
    scenarios: &[BenchScenario],
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    cfg.validate()?;
    let mcfg = &model.config;
    let mut rows = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        let run = || -> Result<usize> {
            let (input, _) = image_to_tensor::<f32>(&sc.image, mcfg.input_size, mcfg.input_channels)?;
            let mut tape = Tape::inference();
            let preds = model.forward(&mut tape, &input)?;
            let raw = decode(&preds, DEFAULT_CONF_THRESHOLD)?;
            Ok(nms(&raw, DEFAULT_CONF_THRESHOLD, DEFAULT_IOU_THRESHOLD).len())
        };
        for _ in 0..cfg.warmup {
            run()?;
        }
        let mut times = Vec::with_capacity(cfg.iterations);
        let mut detections = 0usize;
        for _ in 0..cfg.iterations {
            let t0 = Instant::now();
            detections = run()?;
            times.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        rows.push(summarize(&sc.name, &times, detections));
    }
    Ok(BenchReport { rows })
}
