use super::{check_shape, Gradients, MlpNetwork, NetError};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    /// GAN-style defaults: `lr = 2e-4`, `beta1 = 0.5`.
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn with_beta1(mut self, beta1: f64) -> Self {
        self.beta1 = beta1;
        self
    }
}

/// First and second moment estimates for every parameter of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Gradients<T>,
    pub second_moment: Gradients<T>,
}

impl<T: Real> AdamState<T> {
    pub fn new(net: &MlpNetwork<T>, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first_moment: Gradients::zeros_like(net),
            second_moment: Gradients::zeros_like(net),
        }
    }

    /// One bias-corrected Adam update of `net` in place.
    ///
    /// Non-finite gradients are rejected before anything is modified.
    pub fn step(&mut self, net: &mut MlpNetwork<T>, grads: &Gradients<T>) -> Result<(), NetError> {
        if grads.layers.len() != net.layers().len()
            || self.first_moment.layers.len() != net.layers().len()
        {
            return Err(NetError::InvalidArchitecture(format!(
                "optimizer for {} layers given {} gradients for a {}-layer network",
                self.first_moment.layers.len(),
                grads.layers.len(),
                net.layers().len()
            )));
        }
        for ((l, g), m) in net
            .layers()
            .iter()
            .zip(&grads.layers)
            .zip(&self.first_moment.layers)
        {
            check_shape("adam gradient", l.weights.dim(), g.weights.dim())?;
            check_shape("adam gradient", (l.biases.len(), 1), (g.biases.len(), 1))?;
            check_shape("adam moment", l.weights.dim(), m.weights.dim())?;
        }
        if !grads.is_finite() {
            return Err(NetError::NonFiniteGradient);
        }

        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let b1 = T::lit(c.beta1);
        let b2 = T::lit(c.beta2);
        let one = T::one();
        let corr1 = T::lit(1.0 - c.beta1.powi(t));
        let corr2 = T::lit(1.0 - c.beta2.powi(t));
        let lr = T::lit(c.learning_rate);
        let eps = T::lit(c.epsilon);
        let update = |p: &mut T, g: T, m: &mut T, v: &mut T| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / corr1;
            let v_hat = *v / corr2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (((layer, g), m), v) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first_moment.layers)
            .zip(&mut self.second_moment.layers)
        {
            ndarray::Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.biases)
                .and(&g.biases)
                .and(&mut m.biases)
                .and(&mut v.biases)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralcore::{Activation, DenseLayer};
    use ndarray::{array, Array1};

    fn single(w: [[f64; 2]; 1], b: f64) -> MlpNetwork<f64> {
        MlpNetwork::new(vec![DenseLayer {
            weights: array![[w[0][0], w[0][1]]],
            biases: array![b],
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    fn grads(w: [f64; 2], b: f64) -> Gradients<f64> {
        Gradients {
            layers: vec![crate::neuralcore::LayerGradient {
                weights: array![[w[0], w[1]]],
                biases: Array1::from(vec![b]),
            }],
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters_and_decays_moments() {
        let mut net = single([[1.0, -2.0]], 0.5);
        let before = net.clone();
        let mut adam = AdamState::new(&net, AdamConfig::default());
        adam.step(&mut net, &grads([1.0, 1.0], 1.0)).unwrap();
        let m_after_one = adam.first_moment.layers[0].weights[[0, 0]];
        let mut frozen = net.clone();
        adam.step(&mut frozen, &grads([0.0, 0.0], 0.0)).unwrap();
        assert!(adam.first_moment.layers[0].weights[[0, 0]] < m_after_one);
        // With nonzero moments a zero gradient still moves parameters; from a
        // fresh state it must not.
        let mut fresh = AdamState::new(&before, AdamConfig::default());
        let mut net2 = before.clone();
        fresh.step(&mut net2, &grads([0.0, 0.0], 0.0)).unwrap();
        assert_eq!(net2, before);
        assert_eq!(fresh.step, 1);
    }

    #[test]
    fn first_step_is_normalised_gradient() {
        let cfg = AdamConfig::default();
        let mut net = single([[0.0, 0.0]], 0.0);
        let g = [0.3, -4.0];
        let mut adam = AdamState::new(&net, cfg);
        adam.step(&mut net, &grads(g, 1e-9)).unwrap();
        for (k, &gk) in g.iter().enumerate() {
            let expected = -cfg.learning_rate * gk / (gk.abs() + cfg.epsilon);
            assert!((net.layers()[0].weights[[0, k]] - expected).abs() < 1e-15);
        }
        // |g| comparable to epsilon shrinks the step.
        let b = net.layers()[0].biases[0];
        let expected_b = -cfg.learning_rate * 1e-9 / (1e-9 + cfg.epsilon);
        assert!((b - expected_b).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_steps_approach_learning_rate() {
        let cfg = AdamConfig::default().with_learning_rate(1e-3);
        let mut net = single([[0.0, 0.0]], 0.0);
        let mut adam = AdamState::new(&net, cfg);
        let g = grads([2.5, -0.01], 7.0);
        let mut prev = net.clone();
        for _ in 0..500 {
            prev = net.clone();
            adam.step(&mut net, &g).unwrap();
        }
        let dw0 = net.layers()[0].weights[[0, 0]] - prev.layers()[0].weights[[0, 0]];
        let dw1 = net.layers()[0].weights[[0, 1]] - prev.layers()[0].weights[[0, 1]];
        assert!((dw0 + 1e-3).abs() < 1e-9, "{dw0}");
        assert!((dw1 - 1e-3).abs() < 1e-8, "{dw1}");
    }

    #[test]
    fn non_finite_gradient_rejected_without_update() {
        let mut net = single([[1.0, 1.0]], 0.0);
        let before = net.clone();
        let mut adam = AdamState::new(&net, AdamConfig::default());
        assert_eq!(
            adam.step(&mut net, &grads([f64::NAN, 0.0], 0.0)),
            Err(NetError::NonFiniteGradient)
        );
        assert_eq!(net, before);
        assert_eq!(adam.step, 0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut net = single([[1.0, 1.0]], 0.0);
        let mut adam = AdamState::new(&net, AdamConfig::default());
        let bad = Gradients {
            layers: vec![crate::neuralcore::LayerGradient {
                weights: array![[1.0, 2.0, 3.0]],
                biases: array![0.0],
            }],
        };
        assert!(matches!(
            adam.step(&mut net, &bad),
            Err(NetError::ShapeMismatch { .. })
        ));
    }
}
