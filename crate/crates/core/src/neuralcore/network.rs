use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::{check_shape, Activation, NetError};
use crate::Real;

/// Fully connected layer computing `act(x W^T + b)`; `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Array2<T>,
    pub biases: Array1<T>,
    pub activation: Activation,
}

impl<T: Real> DenseLayer<T> {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weights: Array2::zeros((output, input)),
            biases: Array1::zeros(output),
            activation,
        }
    }

    /// Uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bound = (6.0 / (input + output) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((output, input), || {
            T::lit(rng.random_range(-bound..bound))
        });
        Self {
            weights,
            biases: Array1::zeros(output),
            activation,
        }
    }

    pub fn input_width(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork<T> {
    layers: Vec<DenseLayer<T>>,
}

/// Cached per-layer values from [`MlpNetwork::forward`].
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    pub input: Array2<T>,
    pub pre: Vec<Array2<T>>,
    pub post: Vec<Array2<T>>,
}

impl<T> ForwardPass<T> {
    pub fn output(&self) -> &Array2<T> {
        self.post.last().unwrap_or(&self.input)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient<T> {
    pub weights: Array2<T>,
    pub biases: Array1<T>,
}

/// Per-parameter gradients laid out like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGradient<T>>,
}

/// Result of a backward pass.
#[derive(Debug, Clone)]
pub struct Backprop<T> {
    pub grads: Gradients<T>,
    /// Gradient with respect to the network input batch.
    pub input_grad: Array2<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &MlpNetwork<T>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    biases: Array1::zeros(l.biases.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.zip_mut_with(&b.weights, |x, &y| *x = *x + y);
            a.biases.zip_mut_with(&b.biases, |x, &y| *x = *x + y);
        }
    }

    pub fn scale(&mut self, factor: T) {
        for l in &mut self.layers {
            l.weights.mapv_inplace(|v| v * factor);
            l.biases.mapv_inplace(|v| v * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.values().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Flat index in the same order as [`MlpNetwork::param`].
    pub fn get(&self, index: usize) -> T {
        let mut k = index;
        for l in &self.layers {
            if k < l.weights.len() {
                return l.weights.as_slice().expect("standard layout")[k];
            }
            k -= l.weights.len();
            if k < l.biases.len() {
                return l.biases[k];
            }
            k -= l.biases.len();
        }
        panic!("gradient index {index} out of range");
    }

    pub fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }
}

impl<T: Real> MlpNetwork<T> {
    pub fn new(layers: Vec<DenseLayer<T>>) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::InvalidArchitecture("no layers".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(NetError::InvalidArchitecture(format!(
                    "layer {k} outputs {} but layer {} expects {}",
                    pair[0].output_width(),
                    k + 1,
                    pair[1].input_width()
                )));
            }
        }
        for (k, l) in layers.iter().enumerate() {
            if l.biases.len() != l.output_width() {
                return Err(NetError::InvalidArchitecture(format!(
                    "layer {k} has {} biases for {} outputs",
                    l.biases.len(),
                    l.output_width()
                )));
            }
            if l.activation == Activation::Softmax && k + 1 != layers.len() {
                return Err(NetError::InvalidArchitecture(format!(
                    "softmax on hidden layer {k}"
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Randomly initialised network; `layers` lists `(width, activation)` per layer.
    pub fn init<R: Rng + ?Sized>(
        input: usize,
        layers: &[(usize, Activation)],
        rng: &mut R,
    ) -> Result<Self, NetError> {
        let mut built = Vec::with_capacity(layers.len());
        let mut width = input;
        for &(out, act) in layers {
            built.push(DenseLayer::init(width, out, act, rng));
            width = out;
        }
        Self::new(built)
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    /// Mutable access for optimizers; layer shapes must not be changed.
    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].output_width()
    }

    /// Input width followed by each layer's output width.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width())
            .chain(self.layers.iter().map(DenseLayer::output_width))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights
                .iter()
                .chain(l.biases.iter())
                .all(|v| v.is_finite())
        })
    }

    fn check_input(&self, batch: &ArrayView2<T>) -> Result<(), NetError> {
        check_shape(
            "network input",
            (batch.nrows(), self.input_width()),
            batch.dim(),
        )?;
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFiniteInput);
        }
        Ok(())
    }

    /// Forward pass caching everything `backward` needs.
    pub fn forward(&self, batch: ArrayView2<T>) -> Result<ForwardPass<T>, NetError> {
        self.check_input(&batch)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Array2<T>> = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let x = post.last().map_or(batch, |p| p.view());
            let z = x.dot(&l.weights.t()) + &l.biases;
            post.push(l.activation.apply(z.view()));
            pre.push(z);
        }
        Ok(ForwardPass {
            input: batch.to_owned(),
            pre,
            post,
        })
    }

    /// Output only, without caching intermediate values.
    pub fn predict(&self, batch: ArrayView2<T>) -> Result<Array2<T>, NetError> {
        self.check_input(&batch)?;
        let mut x: Option<Array2<T>> = None;
        for l in &self.layers {
            let z = x.as_ref().map_or(batch, |a| a.view()).dot(&l.weights.t()) + &l.biases;
            x = Some(l.activation.apply(z.view()));
        }
        Ok(x.expect("at least one layer"))
    }

    /// Backpropagate `output_grad` (d loss / d output) through a cached pass.
    pub fn backward(
        &self,
        pass: &ForwardPass<T>,
        output_grad: ArrayView2<T>,
    ) -> Result<Backprop<T>, NetError> {
        if pass.pre.len() != self.layers.len() {
            return Err(NetError::InvalidArchitecture(
                "forward pass was produced by a different network".into(),
            ));
        }
        check_shape("output gradient", pass.output().dim(), output_grad.dim())?;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = output_grad.to_owned();
        for (k, l) in self.layers.iter().enumerate().rev() {
            check_shape(
                "cached activation",
                (pass.input.nrows(), l.output_width()),
                pass.pre[k].dim(),
            )?;
            let delta =
                l.activation
                    .backprop(pass.pre[k].view(), pass.post[k].view(), upstream.view());
            let x = if k == 0 {
                &pass.input
            } else {
                &pass.post[k - 1]
            };
            grads.push(LayerGradient {
                weights: delta.t().dot(x),
                biases: delta.sum_axis(Axis(0)),
            });
            upstream = delta.dot(&l.weights);
        }
        grads.reverse();
        Ok(Backprop {
            grads: Gradients { layers: grads },
            input_grad: upstream,
        })
    }

    /// Parameter by flat index: each layer's weights (row-major) then biases.
    pub fn param(&self, index: usize) -> T {
        let (layer, is_bias, k) = self.locate(index);
        let l = &self.layers[layer];
        if is_bias {
            l.biases[k]
        } else {
            l.weights.as_slice().expect("standard layout")[k]
        }
    }

    pub fn set_param(&mut self, index: usize, value: T) {
        let (layer, is_bias, k) = self.locate(index);
        let l = &mut self.layers[layer];
        if is_bias {
            l.biases[k] = value;
        } else {
            l.weights.as_slice_mut().expect("standard layout")[k] = value;
        }
    }

    fn locate(&self, index: usize) -> (usize, bool, usize) {
        let mut k = index;
        for (n, l) in self.layers.iter().enumerate() {
            if k < l.weights.len() {
                return (n, false, k);
            }
            k -= l.weights.len();
            if k < l.biases.len() {
                return (n, true, k);
            }
            k -= l.biases.len();
        }
        panic!("parameter index {index} out of range");
    }
}
