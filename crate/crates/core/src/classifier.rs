//! Softmax classifier mapping a path frame to its (source, destination) class.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gridworld::{PathClassTable, PathDataset, PathFrame};
use crate::neuralcore::{
    Activation, AdamConfig, AdamState, Checkpoint, CheckpointError, LossSpec, MlpNetwork, NetError,
};
use crate::Real;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("class {0} has fewer than two samples")]
    EmptyClass(usize),
    #[error("split leaves class {class_id} without {side} samples")]
    DegenerateSplit { class_id: usize, side: &'static str },
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
    #[error("cannot evaluate on an empty set")]
    EmptySet,
    #[error("input width {found} does not match classifier width {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// Fraction of each class assigned to the training split.
    pub split: f64,
    pub seed: u64,
    pub hidden: usize,
    pub hidden_activation: Activation,
    pub adam: AdamConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            batch_size: 10,
            epochs: 200,
            split: 0.7,
            seed: 0,
            hidden: 256,
            hidden_activation: Activation::Tanh,
            adam: AdamConfig::default()
                .with_learning_rate(1e-3)
                .with_beta1(0.9),
        }
    }
}

impl ClassifierConfig {
    fn validate(&self) -> Result<(), ClassifierError> {
        if self.batch_size == 0 || self.epochs == 0 || self.hidden == 0 {
            return Err(ClassifierError::InvalidConfig(
                "batch size, epochs and hidden width must be positive".into(),
            ));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(ClassifierError::InvalidConfig(format!(
                "split {} outside (0, 1)",
                self.split
            )));
        }
        Ok(())
    }
}

/// Sample indices of a train/test partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class shuffled split: `round(n_c * split)` of class `c` go to training.
pub fn stratified_split(
    dataset: &PathDataset,
    split: f64,
    seed: u64,
) -> Result<DatasetSplit, ClassifierError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in dataset.class_table().entries() {
        let mut idx = dataset.indices_of(class.id);
        if idx.len() < 2 {
            return Err(ClassifierError::EmptyClass(class.id));
        }
        idx.shuffle(&mut rng);
        let n_train = (idx.len() as f64 * split).round() as usize;
        if n_train == 0 {
            return Err(ClassifierError::DegenerateSplit {
                class_id: class.id,
                side: "training",
            });
        }
        if n_train >= idx.len() {
            return Err(ClassifierError::DegenerateSplit {
                class_id: class.id,
                side: "test",
            });
        }
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(DatasetSplit { train, test })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathClassifier<T> {
    net: MlpNetwork<T>,
    class_table: PathClassTable,
    config: ClassifierConfig,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Train on a stratified split of `dataset`; returns the classifier and the split.
pub fn train_classifier<T: Real>(
    dataset: &PathDataset,
    config: &ClassifierConfig,
) -> Result<(PathClassifier<T>, DatasetSplit), ClassifierError> {
    config.validate()?;
    let split = stratified_split(dataset, config.split, config.seed)?;
    let clf = train_on_indices(dataset, &split.train, config)?;
    Ok((clf, split))
}

/// Train on the samples at `indices` only.
pub fn train_on_indices<T: Real>(
    dataset: &PathDataset,
    indices: &[usize],
    config: &ClassifierConfig,
) -> Result<PathClassifier<T>, ClassifierError> {
    config.validate()?;
    if indices.is_empty() {
        return Err(ClassifierError::EmptySet);
    }
    let classes = dataset.class_table().len();
    let dim = dataset.frame_dim().ok_or(ClassifierError::EmptySet)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut net = MlpNetwork::init(
        dim,
        &[
            (config.hidden, config.hidden_activation),
            (classes, Activation::Softmax),
        ],
        &mut rng,
    )?;
    let mut adam = AdamState::new(&net, config.adam);
    let loss = LossSpec::categorical();
    let inputs = dataset.signed_rows::<T>(indices);
    let mut targets = Array2::<T>::zeros((indices.len(), classes));
    for (r, &k) in indices.iter().enumerate() {
        targets[[r, dataset.labels()[k]]] = T::one();
    }

    let mut order: Vec<usize> = (0..indices.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let x = inputs.select(Axis(0), chunk);
            let y = targets.select(Axis(0), chunk);
            let pass = net.forward(x.view())?;
            let (l, d) = loss.loss_and_grad(pass.output().view(), y.view())?;
            let grads = net.backward(&pass, d.view())?.grads;
            adam.step(&mut net, &grads)?;
            total += l.as_f64() * chunk.len() as f64;
        }
        epoch_losses.push(total / indices.len() as f64);
    }
    Ok(PathClassifier {
        net,
        class_table: dataset.class_table().clone(),
        config: config.clone(),
        epoch_losses,
    })
}

fn argmax<T: Real>(row: impl IntoIterator<Item = T>) -> usize {
    let mut best = (0, T::neg_infinity());
    for (k, v) in row.into_iter().enumerate() {
        if v > best.1 {
            best = (k, v);
        }
    }
    best.0
}

impl<T: Real> PathClassifier<T> {
    pub fn net(&self) -> &MlpNetwork<T> {
        &self.net
    }

    pub fn class_table(&self) -> &PathClassTable {
        &self.class_table
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn input_width(&self) -> usize {
        self.net.input_width()
    }

    fn check_width(&self, found: usize) -> Result<(), ClassifierError> {
        if found != self.input_width() {
            return Err(ClassifierError::ShapeMismatch {
                expected: self.input_width(),
                found,
            });
        }
        Ok(())
    }

    /// Class probabilities, one row per input row (signed encoding).
    pub fn probabilities(&self, batch: ArrayView2<T>) -> Result<Array2<T>, ClassifierError> {
        self.check_width(batch.ncols())?;
        Ok(self.net.predict(batch)?)
    }

    /// Pre-softmax scores.
    pub fn logits(&self, batch: ArrayView2<T>) -> Result<Array2<T>, ClassifierError> {
        self.check_width(batch.ncols())?;
        let pass = self.net.forward(batch)?;
        Ok(pass.pre.last().expect("at least one layer").clone())
    }

    /// Class id and probability vector for a raw (signed or tanh-range) vector.
    pub fn classify_raw(&self, raw: &[T]) -> Result<(usize, Array1<T>), ClassifierError> {
        let view = ArrayView2::from_shape((1, raw.len()), raw).expect("one row");
        let probs = self.probabilities(view)?.index_axis_move(Axis(0), 0);
        Ok((argmax(probs.iter().copied()), probs))
    }

    pub fn classify_frame(&self, frame: &PathFrame) -> Result<(usize, Array1<T>), ClassifierError> {
        let signed = frame.to_signed::<T>();
        self.classify_raw(signed.as_slice().expect("contiguous"))
    }

    pub fn predict_batch(&self, batch: ArrayView2<T>) -> Result<Vec<usize>, ClassifierError> {
        Ok(self
            .probabilities(batch)?
            .rows()
            .into_iter()
            .map(|r| argmax(r.iter().copied()))
            .collect())
    }

    /// Fraction of `frames` whose predicted class differs from `labels`.
    pub fn error_rate(
        &self,
        frames: &[&PathFrame],
        labels: &[usize],
    ) -> Result<f64, ClassifierError> {
        if frames.is_empty() {
            return Err(ClassifierError::EmptySet);
        }
        if frames.len() != labels.len() {
            return Err(ClassifierError::InvalidConfig(format!(
                "{} frames but {} labels",
                frames.len(),
                labels.len()
            )));
        }
        let dim = frames[0].rows() * frames[0].cols();
        let mut batch = Array2::from_elem((frames.len(), dim), -T::one());
        for (r, f) in frames.iter().enumerate() {
            self.check_width(f.as_slice().len())?;
            for (c, &on) in f.as_slice().iter().enumerate() {
                if on {
                    batch[[r, c]] = T::one();
                }
            }
        }
        let predicted = self.predict_batch(batch.view())?;
        let wrong = predicted.iter().zip(labels).filter(|(p, l)| p != l).count();
        Ok(wrong as f64 / frames.len() as f64)
    }

    /// Error rate on the dataset samples at `indices`.
    pub fn error_rate_on(
        &self,
        dataset: &PathDataset,
        indices: &[usize],
    ) -> Result<f64, ClassifierError> {
        let frames: Vec<&PathFrame> = indices.iter().map(|&k| &dataset.frames()[k]).collect();
        let labels: Vec<usize> = indices.iter().map(|&k| dataset.labels()[k]).collect();
        self.error_rate(&frames, &labels)
    }

    pub fn to_checkpoint(&self) -> Checkpoint<T> {
        let mut ck = Checkpoint::new("classifier", self.config.seed);
        ck.step = self.epoch_losses.len() as u64;
        let mut table = Vec::new();
        self.class_table
            .write_csv(&mut table)
            .expect("writing to a Vec cannot fail");
        ck.meta.push((
            "class_table".into(),
            String::from_utf8(table).expect("ASCII"),
        ));
        ck.meta
            .push(("batch_size".into(), self.config.batch_size.to_string()));
        ck.meta
            .push(("epochs".into(), self.config.epochs.to_string()));
        ck.meta
            .push(("split".into(), self.config.split.to_string()));
        ck.networks.push(("classifier".into(), self.net.clone()));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint<T>) -> Result<Self, ClassifierError> {
        if ck.kind != "classifier" {
            return Err(CheckpointError::Invalid(format!(
                "expected a classifier checkpoint, got {:?}",
                ck.kind
            ))
            .into());
        }
        let table_csv = ck
            .meta("class_table")
            .ok_or_else(|| CheckpointError::Missing("class_table".into()))?;
        let class_table = PathClassTable::read_csv(table_csv.as_bytes())
            .map_err(|e| CheckpointError::Invalid(e.to_string()))?;
        let net = ck.network("classifier")?.clone();
        if net.output_width() != class_table.len() {
            return Err(
                CheckpointError::Invalid("output width does not match class table".into()).into(),
            );
        }
        let hidden = net.layers()[0].output_width();
        let hidden_activation = net.layers()[0].activation;
        Ok(Self {
            net,
            class_table,
            config: ClassifierConfig {
                batch_size: ck.meta_parse("batch_size")?,
                epochs: ck.meta_parse("epochs")?,
                split: ck.meta_parse("split")?,
                seed: ck.seed,
                hidden,
                hidden_activation,
                ..ClassifierConfig::default()
            },
            epoch_losses: Vec::new(),
        })
    }
}
