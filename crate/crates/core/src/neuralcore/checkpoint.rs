//! Binary checkpoint container.
//!
//! All integers and floats are little-endian. Strings are a `u32` byte length
//! followed by UTF-8. Layout, version 1:
//!
//! ```text
//! magic        b"PGCK"
//! version      u16 (= 1)
//! scalar_width u8  (4 = f32, 8 = f64)
//! kind         string
//! seed         u64
//! step         u64
//! rng_word_pos u128
//! meta         u32 count, then (key string, value string) pairs
//! networks     u32 count, then per network:
//!                name string, u32 layer count, then per layer:
//!                  activation u8, out u32, in u32,
//!                  weights out*in scalars (row-major), biases out scalars
//! optimizers   u32 count, then per optimizer:
//!                name string, lr f64, beta1 f64, beta2 f64, epsilon f64, step u64,
//!                u32 layer count, then per layer:
//!                  out u32, in u32, first moment weights, first moment biases,
//!                  second moment weights, second moment biases
//! ```
//!
//! Activation codes: 0 tanh, 1 sigmoid, 2 softmax, 3 leaky relu, 4 identity.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use thiserror::Error;

use super::{Activation, AdamConfig, AdamState, DenseLayer, Gradients, LayerGradient, MlpNetwork};
use crate::Real;

const MAGIC: &[u8; 4] = b"PGCK";
const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("checkpoint stores {found}-byte scalars, expected {expected}")]
    ScalarWidth { expected: u8, found: u8 },
    #[error("checkpoint truncated")]
    Truncated,
    #[error("invalid checkpoint: {0}")]
    Invalid(String),
    #[error("checkpoint is missing {0:?}")]
    Missing(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything needed to restore or resume a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub kind: String,
    pub seed: u64,
    pub step: u64,
    pub rng_word_pos: u128,
    pub meta: Vec<(String, String)>,
    pub networks: Vec<(String, MlpNetwork<T>)>,
    pub optimizers: Vec<(String, AdamState<T>)>,
}

impl<T: Real> Checkpoint<T> {
    pub fn new(kind: impl Into<String>, seed: u64) -> Self {
        Self {
            kind: kind.into(),
            seed,
            step: 0,
            rng_word_pos: 0,
            meta: Vec::new(),
            networks: Vec::new(),
            optimizers: Vec::new(),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn meta_parse<V: std::str::FromStr>(&self, key: &str) -> Result<V, CheckpointError> {
        self.meta(key)
            .ok_or_else(|| CheckpointError::Missing(key.into()))?
            .parse()
            .map_err(|_| CheckpointError::Invalid(format!("meta {key:?} does not parse")))
    }

    pub fn network(&self, name: &str) -> Result<&MlpNetwork<T>, CheckpointError> {
        self.networks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, net)| net)
            .ok_or_else(|| CheckpointError::Missing(name.into()))
    }

    pub fn optimizer(&self, name: &str) -> Option<&AdamState<T>> {
        self.optimizers
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(T::WIDTH);
        put_str(&mut out, &self.kind);
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.rng_word_pos.to_le_bytes());
        put_u32(&mut out, self.meta.len());
        for (k, v) in &self.meta {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        put_u32(&mut out, self.networks.len());
        for (name, net) in &self.networks {
            put_str(&mut out, name);
            put_u32(&mut out, net.layers().len());
            for l in net.layers() {
                out.push(l.activation.code());
                put_u32(&mut out, l.output_width());
                put_u32(&mut out, l.input_width());
                l.weights.iter().for_each(|&v| v.write_le(&mut out));
                l.biases.iter().for_each(|&v| v.write_le(&mut out));
            }
        }
        put_u32(&mut out, self.optimizers.len());
        for (name, st) in &self.optimizers {
            put_str(&mut out, name);
            for v in [
                st.config.learning_rate,
                st.config.beta1,
                st.config.beta2,
                st.config.epsilon,
            ] {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            out.extend_from_slice(&st.step.to_le_bytes());
            put_u32(&mut out, st.first_moment.layers.len());
            for (m, v) in st.first_moment.layers.iter().zip(&st.second_moment.layers) {
                put_u32(&mut out, m.weights.nrows());
                put_u32(&mut out, m.weights.ncols());
                for g in [m, v] {
                    g.weights.iter().for_each(|&x| x.write_le(&mut out));
                    g.biases.iter().for_each(|&x| x.write_le(&mut out));
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Cursor { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let width = r.take(1)?[0];
        if width != T::WIDTH {
            return Err(CheckpointError::ScalarWidth {
                expected: T::WIDTH,
                found: width,
            });
        }
        let kind = r.string()?;
        let seed = u64::from_le_bytes(r.array()?);
        let step = u64::from_le_bytes(r.array()?);
        let rng_word_pos = u128::from_le_bytes(r.array()?);
        let mut meta = Vec::new();
        for _ in 0..r.u32()? {
            meta.push((r.string()?, r.string()?));
        }
        let mut networks = Vec::new();
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let mut layers = Vec::new();
            for _ in 0..r.u32()? {
                let code = r.take(1)?[0];
                let activation = Activation::from_code(code)
                    .ok_or_else(|| CheckpointError::Invalid(format!("activation code {code}")))?;
                let out = r.u32()? as usize;
                let inp = r.u32()? as usize;
                layers.push(DenseLayer {
                    weights: r.matrix::<T>(out, inp)?,
                    biases: r.vector::<T>(out)?,
                    activation,
                });
            }
            let net =
                MlpNetwork::new(layers).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
            networks.push((name, net));
        }
        let mut optimizers = Vec::new();
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let mut hyper = [0f64; 4];
            for h in &mut hyper {
                *h = f64::from_bits(u64::from_le_bytes(r.array()?));
            }
            let step = u64::from_le_bytes(r.array()?);
            let mut first = Vec::new();
            let mut second = Vec::new();
            for _ in 0..r.u32()? {
                let out = r.u32()? as usize;
                let inp = r.u32()? as usize;
                for dst in [&mut first, &mut second] {
                    dst.push(LayerGradient {
                        weights: r.matrix::<T>(out, inp)?,
                        biases: r.vector::<T>(out)?,
                    });
                }
            }
            optimizers.push((
                name,
                AdamState {
                    config: AdamConfig {
                        learning_rate: hyper[0],
                        beta1: hyper[1],
                        beta2: hyper[2],
                        epsilon: hyper[3],
                    },
                    step,
                    first_moment: Gradients { layers: first },
                    second_moment: Gradients { layers: second },
                },
            ));
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Invalid("trailing bytes".into()));
        }
        Ok(Self {
            kind,
            seed,
            step,
            rng_word_pos,
            meta,
            networks,
            optimizers,
        })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read<R: Read>(mut reader: R) -> Result<Self, CheckpointError> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("count fits in u32").to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        Ok(self.take(N)?.try_into().expect("slice has length N"))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| CheckpointError::Invalid("string is not UTF-8".into()))
    }

    fn scalars<T: Real>(&mut self, n: usize) -> Result<Vec<T>, CheckpointError> {
        let w = T::WIDTH as usize;
        let raw = self.take(n.checked_mul(w).ok_or(CheckpointError::Truncated)?)?;
        Ok(raw.chunks_exact(w).map(T::read_le).collect())
    }

    fn matrix<T: Real>(&mut self, rows: usize, cols: usize) -> Result<Array2<T>, CheckpointError> {
        let data = self.scalars(rows.checked_mul(cols).ok_or(CheckpointError::Truncated)?)?;
        Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| CheckpointError::Invalid(e.to_string()))
    }

    fn vector<T: Real>(&mut self, n: usize) -> Result<Array1<T>, CheckpointError> {
        Ok(Array1::from(self.scalars(n)?))
    }
}
