use ndarray::{Array2, ArrayView2, Zip};

use super::{check_shape, NetError};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Mean over every entry of `-[y ln p + (1 - y) ln(1 - p)]`, `y` in `[0, 1]`.
    BinaryCrossentropy,
    /// Mean over rows of `-sum_c y_c ln p_c` with one-hot targets.
    CategoricalCrossentropy,
}

/// Crossentropy with predictions clamped to `[clip, 1 - clip]` before the log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    kind: LossKind,
    clip: f64,
}

impl LossSpec {
    pub const DEFAULT_CLIP: f64 = 1e-7;

    pub fn new(kind: LossKind, clip: f64) -> Result<Self, NetError> {
        if !(clip > 0.0 && clip < 0.5) {
            return Err(NetError::InvalidClip(clip));
        }
        Ok(Self { kind, clip })
    }

    pub fn binary() -> Self {
        Self {
            kind: LossKind::BinaryCrossentropy,
            clip: Self::DEFAULT_CLIP,
        }
    }

    pub fn categorical() -> Self {
        Self {
            kind: LossKind::CategoricalCrossentropy,
            clip: Self::DEFAULT_CLIP,
        }
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    /// Scalar loss and its gradient with respect to `predictions`.
    ///
    /// Entries outside the clamp range get a zero gradient, matching the
    /// derivative of the clamped loss.
    pub fn loss_and_grad<T: Real>(
        &self,
        predictions: ArrayView2<T>,
        targets: ArrayView2<T>,
    ) -> Result<(T, Array2<T>), NetError> {
        check_shape("loss targets", predictions.dim(), targets.dim())?;
        self.check_targets(targets)?;
        let lo = T::lit(self.clip);
        let hi = T::one() - lo;
        let one = T::one();
        let mut total = T::zero();
        let mut grad = Array2::zeros(predictions.raw_dim());
        let denom = match self.kind {
            LossKind::BinaryCrossentropy => predictions.len().max(1),
            LossKind::CategoricalCrossentropy => predictions.nrows().max(1),
        };
        let scale = T::one() / T::from_usize(denom).expect("count fits");
        Zip::from(&mut grad)
            .and(&predictions)
            .and(&targets)
            .for_each(|g, &p, &y| {
                let inside = p >= lo && p <= hi;
                let pc = p.max(lo).min(hi);
                match self.kind {
                    LossKind::BinaryCrossentropy => {
                        total = total - (y * pc.ln() + (one - y) * (one - pc).ln());
                        if inside {
                            *g = (-y / pc + (one - y) / (one - pc)) * scale;
                        }
                    }
                    LossKind::CategoricalCrossentropy => {
                        if y != T::zero() {
                            total = total - y * pc.ln();
                            if inside {
                                *g = -y / pc * scale;
                            }
                        }
                    }
                }
            });
        Ok((total * scale, grad))
    }

    fn check_targets<T: Real>(&self, targets: ArrayView2<T>) -> Result<(), NetError> {
        if let Some(v) = targets
            .iter()
            .find(|&&v| !(v >= T::zero() && v <= T::one()))
        {
            return Err(NetError::InvalidTarget(format!(
                "target {v} outside [0, 1]"
            )));
        }
        if self.kind == LossKind::CategoricalCrossentropy {
            for (r, row) in targets.rows().into_iter().enumerate() {
                if row.iter().filter(|&&v| v == T::one()).count() != 1 {
                    return Err(NetError::InvalidTarget(format!("row {r} is not one-hot")));
                }
            }
        }
        Ok(())
    }
}
