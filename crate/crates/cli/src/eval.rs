//! Evaluation studies behind `pathgan eval`.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pathgan::classifier::{train_classifier, ClassifierConfig, ClassifierError, PathClassifier};
use pathgan::gan::{GanArchitecture, GanError, GanModel, GanTrainConfig, GanTrainer};
use pathgan::gridworld::{deviation_score, GridMap, PathDataset, PathFrame};
use pathgan::localization::{
    build_fingerprint_dataset, distance_error_cdf, train_localizer, BeaconLayout, ErrorCdf,
    LocalizationError, Propagation,
};
use pathgan::Real;

/// Noise stream used to score checkpoints; fixed per seed so every
/// checkpoint sees the same latent vectors.
const EVAL_NOISE_STREAM: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationRow {
    pub seed: u64,
    pub epoch: usize,
    pub mean: f64,
    pub max: f64,
    pub nonzero: usize,
    pub samples: usize,
}

/// Deviation statistics of `samples` frames generated from a fixed noise batch.
pub fn deviation_stats<T: Real>(
    model: &GanModel<T>,
    map: &GridMap,
    samples: usize,
    noise_seed: u64,
) -> Result<(f64, f64, usize), GanError> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    rng.set_stream(EVAL_NOISE_STREAM);
    let z = model.sample_noise(samples, &mut rng);
    let raw = model.generate_raw(z.view())?;
    let (rows, cols) = model.shape();
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut nonzero = 0;
    for row in raw.rows() {
        let frame = PathFrame::from_raw(rows, cols, row.as_slice().expect("contiguous"))?;
        let d = deviation_score(&frame, map)?;
        sum += d;
        max = max.max(d);
        nonzero += usize::from(d > 0.0);
    }
    Ok((sum / samples.max(1) as f64, max, nonzero))
}

/// Train one GAN through increasing epoch checkpoints, scoring the sampling
/// model at each.
/// Returns the rows and the model at the last checkpoint.
pub fn deviation_curve<T: Real>(
    map: &GridMap,
    dataset: &PathDataset,
    arch: &GanArchitecture,
    config: &GanTrainConfig,
    checkpoints: &[usize],
    samples: usize,
) -> Result<(Vec<DeviationRow>, GanModel<T>), GanError> {
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints[0] == 0
    {
        return Err(GanError::InvalidConfig(
            "epoch checkpoints must be positive and strictly increasing".into(),
        ));
    }
    let model = GanModel::with_architecture(map.rows(), map.cols(), arch, config.seed)?;
    let mut trainer = GanTrainer::new(model, config.clone())?;
    let mut done = 0;
    let mut rows = Vec::with_capacity(checkpoints.len());
    for &epoch in checkpoints {
        trainer.train_epochs(dataset, epoch - done)?;
        done = epoch;
        let (mean, max, nonzero) =
            deviation_stats(&trainer.sampling_model(), map, samples, config.seed)?;
        rows.push(DeviationRow {
            seed: config.seed,
            epoch,
            mean,
            max,
            nonzero,
            samples,
        });
    }
    Ok((rows, trainer.into_model()))
}

pub fn deviation_csv(rows: &[DeviationRow]) -> String {
    let mut s = String::from("seed,epoch,samples,mean_deviation,max_deviation,nonzero_frames\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:.8},{:.8},{}\n",
            r.seed, r.epoch, r.samples, r.mean, r.max, r.nonzero
        ));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchRow {
    pub batch_size: usize,
    pub seed: u64,
    pub test_error: f64,
}

/// Test error of classifiers trained at each batch size for each seed.
pub fn batch_size_study(
    dataset: &PathDataset,
    base: &ClassifierConfig,
    batch_sizes: &[usize],
    seeds: &[u64],
) -> Result<Vec<BatchRow>, ClassifierError> {
    let mut rows = Vec::new();
    for &batch_size in batch_sizes {
        for &seed in seeds {
            let cfg = ClassifierConfig {
                batch_size,
                seed,
                ..base.clone()
            };
            let (clf, split) = train_classifier::<f64>(dataset, &cfg)?;
            rows.push(BatchRow {
                batch_size,
                seed,
                test_error: clf.error_rate_on(dataset, &split.test)?,
            });
        }
    }
    Ok(rows)
}

/// Mean test error per batch size, in first-seen order.
pub fn mean_error_by_batch(rows: &[BatchRow]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64, usize)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|e| e.0 == r.batch_size) {
            Some(e) => {
                e.1 += r.test_error;
                e.2 += 1;
            }
            None => out.push((r.batch_size, r.test_error, 1)),
        }
    }
    out.into_iter().map(|(b, s, n)| (b, s / n as f64)).collect()
}

pub fn batch_size_csv(rows: &[BatchRow]) -> String {
    let mut s = String::from("batch_size,seed,test_error\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{:.6}\n",
            r.batch_size, r.seed, r.test_error
        ));
    }
    s
}

pub fn batch_summary_csv(summary: &[(usize, f64)]) -> String {
    let mut s = String::from("batch_size,mean_test_error\n");
    for (b, e) in summary {
        s.push_str(&format!("{b},{e:.6}\n"));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationSetup {
    pub samples: usize,
    pub propagation: Propagation,
    pub split: f64,
    pub k: usize,
    pub cell_size_m: f64,
    pub seed: u64,
}

/// CDF of held-out errors for one simulated dataset.
pub fn localization_run(
    map: &GridMap,
    layout: &BeaconLayout,
    setup: &LocalizationSetup,
) -> Result<ErrorCdf, LocalizationError> {
    let data =
        build_fingerprint_dataset(map, layout, setup.samples, &setup.propagation, setup.seed)?;
    let (loc, test) = train_localizer(&data, setup.split, setup.k, setup.seed)?;
    distance_error_cdf(&loc, &test, setup.cell_size_m)
}

/// Mean held-out error at each shadowing level, all else fixed.
pub fn sigma_sweep(
    map: &GridMap,
    layout: &BeaconLayout,
    setup: &LocalizationSetup,
    sigmas: &[f64],
) -> Result<Vec<(f64, f64)>, LocalizationError> {
    sigmas
        .iter()
        .map(|&s| {
            let run = LocalizationSetup {
                propagation: setup.propagation.with_sigma(s),
                ..setup.clone()
            };
            Ok((s, localization_run(map, layout, &run)?.mean))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub calls: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    pub fn from_millis(mut v: Vec<f64>) -> Self {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let at = |q: f64| v[((n as f64 - 1.0) * q).round() as usize];
        Self {
            calls: n,
            mean_ms: v.iter().sum::<f64>() / n as f64,
            p50_ms: at(0.5),
            p95_ms: at(0.95),
            max_ms: v[n - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingReport {
    pub generation: LatencyStats,
    pub classification: LatencyStats,
    pub total: LatencyStats,
}

impl TimingReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("stage,calls,mean_ms,p50_ms,p95_ms,max_ms\n");
        for (name, st) in [
            ("generation", &self.generation),
            ("classification", &self.classification),
            ("total", &self.total),
        ] {
            s.push_str(&format!(
                "{name},{},{:.6},{:.6},{:.6},{:.6}\n",
                st.calls, st.mean_ms, st.p50_ms, st.p95_ms, st.max_ms
            ));
        }
        s
    }
}

/// Wall-clock latency of single-sample generation and classification.
pub fn timing_study<T: Real>(
    gan: &GanModel<T>,
    classifier: &PathClassifier<T>,
    calls: usize,
    seed: u64,
) -> Result<TimingReport, CommandsError> {
    if calls == 0 {
        return Err(CommandsError::Gan(GanError::InvalidConfig(
            "calls must be at least 1".into(),
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gen = Vec::with_capacity(calls);
    let mut cls = Vec::with_capacity(calls);
    let mut total = Vec::with_capacity(calls);
    for _ in 0..calls {
        let z = gan.sample_noise(1, &mut rng);
        let t0 = Instant::now();
        let (_, raw) = gan.generate_frame(z.as_slice().expect("contiguous"))?;
        let t1 = Instant::now();
        let (class_id, _) = classifier.classify_raw(raw.as_slice().expect("contiguous"))?;
        let t2 = Instant::now();
        std::hint::black_box(class_id);
        gen.push((t1 - t0).as_secs_f64() * 1e3);
        cls.push((t2 - t1).as_secs_f64() * 1e3);
        total.push((t2 - t0).as_secs_f64() * 1e3);
    }
    Ok(TimingReport {
        generation: LatencyStats::from_millis(gen),
        classification: LatencyStats::from_millis(cls),
        total: LatencyStats::from_millis(total),
    })
}

#[derive(Debug, thiserror::Error)]
pub enum CommandsError {
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}
