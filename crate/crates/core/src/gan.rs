//! Generator/discriminator pair over signed path frames, and the adversarial
//! training loop.
//!
//! Frames are trained in signed form (`+1` on the path, `-1` elsewhere) so the
//! real data and the generator's tanh output share a range.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gridworld::{GridError, GridMap, PathDataset, PathFrame};
use crate::neuralcore::{
    Activation, AdamConfig, AdamState, Checkpoint, CheckpointError, Gradients, LossSpec,
    MlpNetwork, NetError,
};
use crate::Real;

pub const NOISE_DIM: usize = 100;

#[derive(Debug, Error)]
pub enum GanError {
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("non-finite loss at step {step} (d_loss {d_loss}, g_loss {g_loss})")]
    NonFiniteLoss { step: u64, d_loss: f64, g_loss: f64 },
    #[error("frame width {found} does not match model width {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// Layer widths and hidden activations of both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct GanArchitecture {
    pub noise_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub generator_activation: Activation,
    pub discriminator_hidden: Vec<usize>,
    pub discriminator_activation: Activation,
    /// Frames the discriminator judges jointly; its input is `pack` frames
    /// concatenated, all real or all generated.
    pub discriminator_pack: usize,
}

impl Default for GanArchitecture {
    /// Generator 100 -> 256 -> 512 -> 1024 -> frame (tanh throughout);
    /// discriminator frame -> 512 -> 256 -> 1 (sigmoid throughout).
    fn default() -> Self {
        Self {
            noise_dim: NOISE_DIM,
            generator_hidden: vec![256, 512, 1024],
            generator_activation: Activation::Tanh,
            discriminator_hidden: vec![512, 256],
            discriminator_activation: Activation::Sigmoid,
            discriminator_pack: 1,
        }
    }
}

impl GanArchitecture {
    /// Default widths with a leaky-rectifier discriminator judging pairs of
    /// frames, which keeps every path class in the generator's output.
    pub fn stabilized() -> Self {
        Self {
            discriminator_activation: Activation::LeakyRelu,
            discriminator_pack: 2,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub step: u64,
    pub d_loss: f64,
    pub g_loss: f64,
    pub d_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanModel<T> {
    pub generator: MlpNetwork<T>,
    pub discriminator: MlpNetwork<T>,
    rows: usize,
    cols: usize,
    pack: usize,
    pub training_log: Vec<TrainRecord>,
}

/// Default-architecture GAN for `map`, initialised from `seed`.
pub fn build_gan<T: Real>(map: &GridMap, seed: u64) -> GanModel<T> {
    GanModel::with_architecture(map.rows(), map.cols(), &GanArchitecture::default(), seed)
        .expect("default architecture is valid")
}

impl<T: Real> GanModel<T> {
    pub fn with_architecture(
        rows: usize,
        cols: usize,
        arch: &GanArchitecture,
        seed: u64,
    ) -> Result<Self, GanError> {
        let frame_dim = rows * cols;
        if arch.discriminator_pack == 0 {
            return Err(GanError::InvalidConfig(
                "discriminator pack must be at least 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gen_layers: Vec<_> = arch
            .generator_hidden
            .iter()
            .map(|&w| (w, arch.generator_activation))
            .chain([(frame_dim, Activation::Tanh)])
            .collect();
        let disc_layers: Vec<_> = arch
            .discriminator_hidden
            .iter()
            .map(|&w| (w, arch.discriminator_activation))
            .chain([(1, Activation::Sigmoid)])
            .collect();
        let generator = MlpNetwork::init(arch.noise_dim, &gen_layers, &mut rng)?;
        let discriminator =
            MlpNetwork::init(frame_dim * arch.discriminator_pack, &disc_layers, &mut rng)?;
        Self::from_networks(rows, cols, generator, discriminator)
    }

    pub fn from_networks(
        rows: usize,
        cols: usize,
        generator: MlpNetwork<T>,
        discriminator: MlpNetwork<T>,
    ) -> Result<Self, GanError> {
        let frame_dim = rows * cols;
        let d_in = discriminator.input_width();
        if generator.output_width() != frame_dim {
            return Err(GanError::ShapeMismatch {
                expected: frame_dim,
                found: generator.output_width(),
            });
        }
        if frame_dim == 0 || d_in == 0 || d_in % frame_dim != 0 {
            return Err(GanError::ShapeMismatch {
                expected: frame_dim,
                found: d_in,
            });
        }
        if discriminator.output_width() != 1 {
            return Err(GanError::InvalidConfig(
                "discriminator must output one value".into(),
            ));
        }
        Ok(Self {
            generator,
            discriminator,
            rows,
            cols,
            pack: d_in / frame_dim,
            training_log: Vec::new(),
        })
    }

    pub fn noise_dim(&self) -> usize {
        self.generator.input_width()
    }

    pub fn frame_dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Frames per discriminator input.
    pub fn pack(&self) -> usize {
        self.pack
    }

    /// Concatenate consecutive groups of `pack` frames into discriminator rows.
    pub fn pack_rows(&self, frames: ArrayView2<T>) -> Result<Array2<T>, GanError> {
        let (n, dim) = frames.dim();
        if dim != self.frame_dim() {
            return Err(GanError::ShapeMismatch {
                expected: self.frame_dim(),
                found: dim,
            });
        }
        if n % self.pack != 0 {
            return Err(GanError::InvalidConfig(format!(
                "{n} frames do not split into packs of {}",
                self.pack
            )));
        }
        Ok(frames
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((n / self.pack, dim * self.pack))
            .expect("standard layout"))
    }

    /// `n` noise vectors drawn from uniform(-1, 1).
    pub fn sample_noise<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<T> {
        Array2::from_shape_simple_fn((n, self.noise_dim()), || {
            T::lit(rng.random_range(-1.0..1.0))
        })
    }

    /// Raw generator output, one row per noise row.
    pub fn generate_raw(&self, z: ArrayView2<T>) -> Result<Array2<T>, GanError> {
        Ok(self.generator.predict(z)?)
    }

    /// Generated frame (cells with raw value > 0) and the raw output vector.
    pub fn generate_frame(&self, z: &[T]) -> Result<(PathFrame, Array1<T>), GanError> {
        let z = ArrayView2::from_shape((1, z.len()), z).map_err(|_| GanError::ShapeMismatch {
            expected: self.noise_dim(),
            found: z.len(),
        })?;
        let raw = self.generate_raw(z)?.index_axis_move(Axis(0), 0);
        let frame = PathFrame::from_raw(self.rows, self.cols, raw.as_slice().expect("contiguous"))?;
        Ok((frame, raw))
    }

    /// Frame from noise drawn with `seed`.
    pub fn generate_seeded(&self, seed: u64) -> (PathFrame, Array1<T>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = self.sample_noise(1, &mut rng);
        self.generate_frame(z.as_slice().expect("contiguous"))
            .expect("noise has the generator's width")
    }

    /// Probability that each row (signed encoding) came from the training data.
    /// With packing, each frame is judged as a pack of copies of itself.
    pub fn discriminate_batch(&self, batch: ArrayView2<T>) -> Result<Array1<T>, GanError> {
        if batch.ncols() != self.frame_dim() {
            return Err(GanError::ShapeMismatch {
                expected: self.frame_dim(),
                found: batch.ncols(),
            });
        }
        let input = if self.pack == 1 {
            batch.to_owned()
        } else {
            ndarray::concatenate(Axis(1), &vec![batch; self.pack]).expect("equal row counts")
        };
        Ok(self
            .discriminator
            .predict(input.view())?
            .index_axis_move(Axis(1), 0))
    }

    pub fn discriminate(&self, raw: &[T]) -> Result<T, GanError> {
        let view = ArrayView2::from_shape((1, raw.len()), raw).expect("one row");
        Ok(self.discriminate_batch(view)?[0])
    }

    pub fn discriminate_frame(&self, frame: &PathFrame) -> Result<T, GanError> {
        let signed = frame.to_signed::<T>();
        self.discriminate(signed.as_slice().expect("contiguous"))
    }

    pub fn to_checkpoint(&self, seed: u64) -> Checkpoint<T> {
        let mut ck = Checkpoint::new("gan", seed);
        ck.step = self.training_log.last().map_or(0, |r| r.step);
        ck.meta.push(("rows".into(), self.rows.to_string()));
        ck.meta.push(("cols".into(), self.cols.to_string()));
        ck.networks
            .push(("generator".into(), self.generator.clone()));
        ck.networks
            .push(("discriminator".into(), self.discriminator.clone()));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint<T>) -> Result<Self, GanError> {
        if ck.kind != "gan" {
            return Err(CheckpointError::Invalid(format!(
                "expected a gan checkpoint, got {:?}",
                ck.kind
            ))
            .into());
        }
        Self::from_networks(
            ck.meta_parse("rows")?,
            ck.meta_parse("cols")?,
            ck.network("generator")?.clone(),
            ck.network("discriminator")?.clone(),
        )
    }

    /// Training log as `step,d_loss,g_loss,d_acc` CSV.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("step,d_loss,g_loss,d_acc\n");
        for r in &self.training_log {
            s.push_str(&format!(
                "{},{:.6},{:.6},{:.4}\n",
                r.step, r.d_loss, r.g_loss, r.d_acc
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeneratorObjective {
    /// Ascend `log D(G(z))`.
    #[default]
    NonSaturating,
    /// Descend `log(1 - D(G(z)))` as in the minimax value function.
    Minimax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpochMode {
    /// One epoch is one mini-batch iteration.
    #[default]
    SingleBatch,
    /// One epoch is `ceil(len / batch_size)` iterations.
    FullPass,
}

/// Learning-rate multiplier over training.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Full rate until `from_epoch`, then linear down to `final_scale` at the last epoch.
    Linear { from_epoch: usize, final_scale: f64 },
}

impl LrSchedule {
    pub fn scale(&self, epoch: f64, total_epochs: usize) -> f64 {
        match *self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Linear {
                from_epoch,
                final_scale,
            } => {
                let start = from_epoch as f64;
                let end = total_epochs as f64;
                let t = if end > start {
                    ((epoch - start) / (end - start)).clamp(0.0, 1.0)
                } else if epoch >= end {
                    1.0
                } else {
                    0.0
                };
                1.0 + (final_scale - 1.0) * t
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub objective: GeneratorObjective,
    pub epoch_mode: EpochMode,
    pub generator_adam: AdamConfig,
    pub discriminator_adam: AdamConfig,
    /// Discriminator target for real frames; below 1 is one-sided label smoothing.
    pub real_label: f64,
    pub lr_schedule: LrSchedule,
    /// Decay of an exponential moving average of the generator weights; the
    /// averaged generator is the one sampled from.
    pub generator_ema: Option<f64>,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15000,
            batch_size: 32,
            seed: 0,
            objective: GeneratorObjective::NonSaturating,
            epoch_mode: EpochMode::SingleBatch,
            generator_adam: AdamConfig::default(),
            discriminator_adam: AdamConfig::default(),
            real_label: 1.0,
            lr_schedule: LrSchedule::Constant,
            generator_ema: None,
        }
    }
}

impl GanTrainConfig {
    /// Default settings with the learning rate decayed linearly to a tenth
    /// over the last 3000 of 5000 epochs and a 0.999 generator average;
    /// pairs with [`GanArchitecture::stabilized`].
    pub fn stabilized() -> Self {
        Self {
            lr_schedule: LrSchedule::Linear {
                from_epoch: 2000,
                final_scale: 0.1,
            },
            generator_ema: Some(0.999),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GanError> {
        if self.batch_size == 0 {
            return Err(GanError::InvalidConfig(
                "batch size must be at least 1".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(GanError::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.real_label > 0.5 && self.real_label <= 1.0) {
            return Err(GanError::InvalidConfig(format!(
                "real label {} outside (0.5, 1]",
                self.real_label
            )));
        }
        if let Some(beta) = self.generator_ema {
            if !(0.0..1.0).contains(&beta) {
                return Err(GanError::InvalidConfig(format!(
                    "generator average decay {beta} outside [0, 1)"
                )));
            }
        }
        if let LrSchedule::Linear { final_scale, .. } = self.lr_schedule {
            if !(final_scale.is_finite() && (0.0..=1.0).contains(&final_scale)) {
                return Err(GanError::InvalidConfig(format!(
                    "learning-rate final scale {final_scale} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn iterations_per_epoch(&self, dataset_len: usize) -> usize {
        match self.epoch_mode {
            EpochMode::SingleBatch => 1,
            EpochMode::FullPass => dataset_len.div_ceil(self.batch_size).max(1),
        }
    }
}

/// Real and fake halves of the discriminator objective, kept apart.
#[derive(Debug, Clone)]
pub struct DiscriminatorGradients<T> {
    pub real_loss: T,
    pub fake_loss: T,
    pub real_grads: Gradients<T>,
    pub fake_grads: Gradients<T>,
    /// Fraction of real scored > 0.5 plus fake scored < 0.5.
    pub accuracy: f64,
}

impl<T: Real> DiscriminatorGradients<T> {
    /// Gradient of `-(1/m) sum [log D(x) + log(1 - D(G(z)))]`.
    pub fn total(&self) -> Gradients<T> {
        let mut g = self.real_grads.clone();
        g.add_assign(&self.fake_grads);
        g
    }
}

pub fn discriminator_gradients<T: Real>(
    discriminator: &MlpNetwork<T>,
    real: ArrayView2<T>,
    fake: ArrayView2<T>,
    real_label: T,
) -> Result<DiscriminatorGradients<T>, GanError> {
    let bce = LossSpec::binary();
    let half =
        |batch: ArrayView2<T>, is_real: bool| -> Result<(T, Gradients<T>, usize), GanError> {
            let label = if is_real { real_label } else { T::zero() };
            let pass = discriminator.forward(batch)?;
            let targets = Array2::from_elem((batch.nrows(), 1), label);
            let (loss, d) = bce.loss_and_grad(pass.output().view(), targets.view())?;
            let half = T::lit(0.5);
            let correct = pass
                .output()
                .iter()
                .filter(|&&p| if is_real { p > half } else { p < half })
                .count();
            Ok((
                loss,
                discriminator.backward(&pass, d.view())?.grads,
                correct,
            ))
        };
    let (real_loss, real_grads, real_ok) = half(real, true)?;
    let (fake_loss, fake_grads, fake_ok) = half(fake, false)?;
    let total = (real.nrows() + fake.nrows()).max(1);
    Ok(DiscriminatorGradients {
        real_loss,
        fake_loss,
        real_grads,
        fake_grads,
        accuracy: (real_ok + fake_ok) as f64 / total as f64,
    })
}

/// Generator loss and gradient for noise batch `z`, backpropagated through a
/// frozen discriminator.
pub fn generator_gradients<T: Real>(
    model: &GanModel<T>,
    z: ArrayView2<T>,
    objective: GeneratorObjective,
) -> Result<(T, Gradients<T>), GanError> {
    let g_pass = model.generator.forward(z)?;
    let packed = model.pack_rows(g_pass.output().view())?;
    let d_pass = model.discriminator.forward(packed.view())?;
    let n = packed.nrows();
    let bce = LossSpec::binary();
    let (loss, d_out) = match objective {
        GeneratorObjective::NonSaturating => {
            bce.loss_and_grad(d_pass.output().view(), Array2::ones((n, 1)).view())?
        }
        GeneratorObjective::Minimax => {
            let (l, d) = bce.loss_and_grad(d_pass.output().view(), Array2::zeros((n, 1)).view())?;
            (-l, -d)
        }
    };
    let through_d = model.discriminator.backward(&d_pass, d_out.view())?;
    let frame_grad = through_d
        .input_grad
        .into_shape_with_order((z.nrows(), model.frame_dim()))
        .expect("packed gradient unpacks");
    let grads = model.generator.backward(&g_pass, frame_grad.view())?.grads;
    Ok((loss, grads))
}

/// Generator objective value on `z` with the clamp used in training.
pub fn generator_objective_value<T: Real>(
    generator: &MlpNetwork<T>,
    discriminator: &MlpNetwork<T>,
    z: ArrayView2<T>,
    objective: GeneratorObjective,
) -> Result<T, GanError> {
    let frames = generator.predict(z)?;
    let pack = discriminator.input_width() / generator.output_width().max(1);
    let packed = frames
        .into_shape_with_order((z.nrows() / pack.max(1), discriminator.input_width()))
        .map_err(|_| {
            GanError::InvalidConfig(format!(
                "{} frames do not split into packs of {pack}",
                z.nrows()
            ))
        })?;
    let p = discriminator.predict(packed.view())?;
    let n = p.nrows();
    let bce = LossSpec::binary();
    Ok(match objective {
        GeneratorObjective::NonSaturating => {
            bce.loss_and_grad(p.view(), Array2::ones((n, 1)).view())?.0
        }
        GeneratorObjective::Minimax => {
            -bce.loss_and_grad(p.view(), Array2::zeros((n, 1)).view())?.0
        }
    })
}

const LIVE_GENERATOR: &str = "generator_live";

/// Resumable adversarial training state.
#[derive(Debug, Clone)]
pub struct GanTrainer<T> {
    model: GanModel<T>,
    d_opt: AdamState<T>,
    g_opt: AdamState<T>,
    rng: ChaCha8Rng,
    config: GanTrainConfig,
    step: u64,
    ema: Option<MlpNetwork<T>>,
}

impl<T: Real> GanTrainer<T> {
    pub fn new(model: GanModel<T>, config: GanTrainConfig) -> Result<Self, GanError> {
        config.validate()?;
        if config.batch_size % model.pack() != 0 {
            return Err(GanError::InvalidConfig(format!(
                "batch size {} is not a multiple of the discriminator pack {}",
                config.batch_size,
                model.pack()
            )));
        }
        let d_opt = AdamState::new(&model.discriminator, config.discriminator_adam);
        let g_opt = AdamState::new(&model.generator, config.generator_adam);
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let ema = config.generator_ema.map(|_| model.generator.clone());
        Ok(Self {
            model,
            d_opt,
            g_opt,
            rng,
            config,
            step: 0,
            ema,
        })
    }

    /// The networks being optimized.
    pub fn model(&self) -> &GanModel<T> {
        &self.model
    }

    /// The averaged generator, when enabled.
    pub fn averaged_generator(&self) -> Option<&MlpNetwork<T>> {
        self.ema.as_ref()
    }

    /// The model to sample from: the averaged generator if enabled, else the
    /// live one.
    pub fn sampling_model(&self) -> GanModel<T> {
        let mut m = self.model.clone();
        if let Some(ema) = &self.ema {
            m.generator = ema.clone();
        }
        m
    }

    /// Consumes the trainer, returning [`GanTrainer::sampling_model`].
    pub fn into_model(mut self) -> GanModel<T> {
        if let Some(ema) = self.ema.take() {
            self.model.generator = ema;
        }
        self.model
    }

    pub fn config(&self) -> &GanTrainConfig {
        &self.config
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// One discriminator update followed by one generator update.
    ///
    /// `real_pool` holds every training frame in signed encoding; `m` rows are
    /// drawn from it with replacement.
    pub fn iteration(&mut self, real_pool: ArrayView2<T>) -> Result<TrainRecord, GanError> {
        if real_pool.nrows() == 0 {
            return Err(GanError::EmptyDataset);
        }
        if real_pool.ncols() != self.model.frame_dim() {
            return Err(GanError::ShapeMismatch {
                expected: self.model.frame_dim(),
                found: real_pool.ncols(),
            });
        }
        let epoch = self.step as f64 / self.config.iterations_per_epoch(real_pool.nrows()) as f64;
        let scale = self.config.lr_schedule.scale(epoch, self.config.epochs);
        self.d_opt.config.learning_rate = self.config.discriminator_adam.learning_rate * scale;
        self.g_opt.config.learning_rate = self.config.generator_adam.learning_rate * scale;
        let m = self.config.batch_size;
        let z = self.model.sample_noise(m, &mut self.rng);
        let picks: Vec<usize> = (0..m)
            .map(|_| self.rng.random_range(0..real_pool.nrows()))
            .collect();
        let real = self
            .model
            .pack_rows(real_pool.select(Axis(0), &picks).view())?;
        let fake = self
            .model
            .pack_rows(self.model.generator.predict(z.view())?.view())?;
        let d = discriminator_gradients(
            &self.model.discriminator,
            real.view(),
            fake.view(),
            T::lit(self.config.real_label),
        )?;
        let d_loss = (d.real_loss + d.fake_loss).as_f64() * 0.5;
        if !d_loss.is_finite() {
            return Err(GanError::NonFiniteLoss {
                step: self.step + 1,
                d_loss,
                g_loss: f64::NAN,
            });
        }
        self.d_opt.step(&mut self.model.discriminator, &d.total())?;

        let z = self.model.sample_noise(m, &mut self.rng);
        let (g_loss, g_grads) = generator_gradients(&self.model, z.view(), self.config.objective)?;
        let g_loss = g_loss.as_f64();
        if !g_loss.is_finite() {
            return Err(GanError::NonFiniteLoss {
                step: self.step + 1,
                d_loss,
                g_loss,
            });
        }
        self.g_opt.step(&mut self.model.generator, &g_grads)?;
        if let (Some(ema), Some(beta)) = (self.ema.as_mut(), self.config.generator_ema) {
            let (b, a) = (T::lit(beta), T::lit(1.0 - beta));
            for (e, l) in ema
                .layers_mut()
                .iter_mut()
                .zip(self.model.generator.layers())
            {
                e.weights
                    .zip_mut_with(&l.weights, |x, &y| *x = *x * b + y * a);
                e.biases
                    .zip_mut_with(&l.biases, |x, &y| *x = *x * b + y * a);
            }
        }

        self.step += 1;
        let record = TrainRecord {
            step: self.step,
            d_loss,
            g_loss,
            d_acc: d.accuracy,
        };
        self.model.training_log.push(record);
        Ok(record)
    }

    /// Run `epochs` epochs over `dataset`.
    pub fn train_epochs(&mut self, dataset: &PathDataset, epochs: usize) -> Result<(), GanError> {
        if dataset.is_empty() {
            return Err(GanError::EmptyDataset);
        }
        let pool = dataset.signed_matrix::<T>();
        let iterations = epochs * self.config.iterations_per_epoch(dataset.len());
        for _ in 0..iterations {
            self.iteration(pool.view())?;
        }
        Ok(())
    }

    /// Sampling model, optimizer moments and RNG position. With averaging on,
    /// `generator` holds the averaged weights and `generator_live` the
    /// optimized ones.
    pub fn checkpoint(&self) -> Checkpoint<T> {
        let mut ck = self.sampling_model().to_checkpoint(self.config.seed);
        if self.ema.is_some() {
            ck.networks
                .push((LIVE_GENERATOR.into(), self.model.generator.clone()));
        }
        ck.step = self.step;
        ck.rng_word_pos = self.rng.get_word_pos();
        ck.optimizers.push(("generator".into(), self.g_opt.clone()));
        ck.optimizers
            .push(("discriminator".into(), self.d_opt.clone()));
        ck
    }

    /// Continue from a checkpoint written by [`GanTrainer::checkpoint`].
    pub fn resume(ck: &Checkpoint<T>, config: GanTrainConfig) -> Result<Self, GanError> {
        config.validate()?;
        let mut model = GanModel::from_checkpoint(ck)?;
        let saved_average = match ck.network(LIVE_GENERATOR) {
            Ok(live) => Some(std::mem::replace(&mut model.generator, live.clone())),
            Err(_) => None,
        };
        let ema = config
            .generator_ema
            .map(|_| saved_average.unwrap_or_else(|| model.generator.clone()));
        if config.batch_size % model.pack() != 0 {
            return Err(GanError::InvalidConfig(format!(
                "batch size {} is not a multiple of the discriminator pack {}",
                config.batch_size,
                model.pack()
            )));
        }
        let g_opt = ck
            .optimizer("generator")
            .cloned()
            .ok_or_else(|| CheckpointError::Missing("generator optimizer".into()))?;
        let d_opt = ck
            .optimizer("discriminator")
            .cloned()
            .ok_or_else(|| CheckpointError::Missing("discriminator optimizer".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(ck.seed);
        rng.set_word_pos(ck.rng_word_pos);
        Ok(Self {
            model,
            d_opt,
            g_opt,
            rng,
            config: GanTrainConfig {
                seed: ck.seed,
                ..config
            },
            step: ck.step,
            ema,
        })
    }
}

/// Train `model` on `dataset` for `cfg.epochs` epochs.
pub fn train_gan<T: Real>(
    model: GanModel<T>,
    dataset: &PathDataset,
    cfg: &GanTrainConfig,
) -> Result<GanModel<T>, GanError> {
    let mut trainer = GanTrainer::new(model, cfg.clone())?;
    trainer.train_epochs(dataset, cfg.epochs)?;
    Ok(trainer.into_model())
}
