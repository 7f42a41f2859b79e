use ndarray::{Array2, ArrayView2, Axis, Zip};

use crate::Real;

/// Negative-side slope of [`Activation::LeakyRelu`].
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Sigmoid,
    /// Row-wise; only valid on the final layer.
    Softmax,
    LeakyRelu,
    Identity,
}

impl Activation {
    pub fn apply<T: Real>(self, pre: ArrayView2<T>) -> Array2<T> {
        match self {
            Activation::Tanh => pre.mapv(T::tanh),
            Activation::Sigmoid => pre.mapv(sigmoid),
            Activation::Identity => pre.to_owned(),
            Activation::LeakyRelu => {
                let slope = T::lit(LEAKY_SLOPE);
                pre.mapv(|x| if x > T::zero() { x } else { slope * x })
            }
            Activation::Softmax => {
                let mut out = pre.to_owned();
                for mut row in out.axis_iter_mut(Axis(0)) {
                    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
                    row.mapv_inplace(|x| (x - max).exp());
                    let sum: T = row.iter().copied().sum();
                    row.mapv_inplace(|x| x / sum);
                }
                out
            }
        }
    }

    /// Gradient with respect to the pre-activation given the gradient with
    /// respect to the activation output.
    pub fn backprop<T: Real>(
        self,
        pre: ArrayView2<T>,
        post: ArrayView2<T>,
        grad_post: ArrayView2<T>,
    ) -> Array2<T> {
        let one = T::one();
        match self {
            Activation::Tanh => Zip::from(&post)
                .and(&grad_post)
                .map_collect(|&y, &g| g * (one - y * y)),
            Activation::Sigmoid => Zip::from(&post)
                .and(&grad_post)
                .map_collect(|&y, &g| g * y * (one - y)),
            Activation::Identity => grad_post.to_owned(),
            Activation::LeakyRelu => {
                let slope = T::lit(LEAKY_SLOPE);
                Zip::from(&pre).and(&grad_post).map_collect(|&x, &g| {
                    if x > T::zero() {
                        g
                    } else {
                        slope * g
                    }
                })
            }
            Activation::Softmax => {
                // J^T g = s * (g - <g, s>) per row
                let mut out = Array2::zeros(post.raw_dim());
                Zip::from(out.rows_mut())
                    .and(post.rows())
                    .and(grad_post.rows())
                    .for_each(|mut o, s, g| {
                        let dot: T = s.iter().zip(g.iter()).map(|(&a, &b)| a * b).sum();
                        Zip::from(&mut o)
                            .and(&s)
                            .and(&g)
                            .for_each(|o, &s, &g| *o = s * (g - dot));
                    });
                out
            }
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Sigmoid => 1,
            Activation::Softmax => 2,
            Activation::LeakyRelu => 3,
            Activation::Identity => 4,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Tanh,
            1 => Activation::Sigmoid,
            2 => Activation::Softmax,
            3 => Activation::LeakyRelu,
            4 => Activation::Identity,
            _ => return None,
        })
    }
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
