use ndarray::ArrayView2;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Gradients, LossSpec, MlpNetwork, NetError};
use crate::Real;

/// Up to `samples` distinct parameter indices out of `count`, sorted.
pub fn sample_param_indices(count: usize, samples: usize, seed: u64) -> Vec<usize> {
    if samples >= count {
        return (0..count).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, count, samples).into_vec();
    picked.sort_unstable();
    picked
}

/// Max relative error between `analytic` and central differences of
/// `objective` over the parameters at `indices`.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn compare_gradients<T, F>(
    net: &MlpNetwork<T>,
    analytic: &Gradients<T>,
    mut objective: F,
    h: f64,
    indices: &[usize],
) -> f64
where
    T: Real,
    F: FnMut(&MlpNetwork<T>) -> T,
{
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for &k in indices {
        let original = probe.param(k);
        probe.set_param(k, original + T::lit(h));
        let plus = objective(&probe).as_f64();
        probe.set_param(k, original - T::lit(h));
        let minus = objective(&probe).as_f64();
        probe.set_param(k, original);
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic.get(k).as_f64();
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    worst
}

/// Finite-difference check of `backward` for `loss(net(batch), targets)`
/// on a seeded subsample of `samples` parameters.
pub fn gradient_check<T: Real>(
    net: &MlpNetwork<T>,
    batch: ArrayView2<T>,
    targets: ArrayView2<T>,
    loss: &LossSpec,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<f64, NetError> {
    let pass = net.forward(batch)?;
    let (_, dloss) = loss.loss_and_grad(pass.output().view(), targets)?;
    let analytic = net.backward(&pass, dloss.view())?.grads;
    let indices = sample_param_indices(net.param_count(), samples, seed);
    let objective = |n: &MlpNetwork<T>| {
        let out = n.predict(batch).expect("shape already checked");
        loss.loss_and_grad(out.view(), targets)
            .expect("targets already checked")
            .0
    };
    Ok(compare_gradients(net, &analytic, objective, h, &indices))
}
