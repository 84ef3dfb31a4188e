//! Flat binary network checkpoints.
//!
//! ```text
//! magic    b"QNNCKPT1"
//! version  u32 LE (= 1)
//! layers   u32 LE
//! per layer: variant id u8, shape-int count u32 LE, shape ints u64 LE
//! payload  every parameter as f64 LE, layer order, weight before bias
//! ```
//!
//! Variant ids and their shape ints: 1 Dense `[in, out]`, 2 Conv2d
//! `[in, out, k, stride, pad]`, 3 ConvTranspose2d `[in, out, k, stride, pad,
//! out_pad]`, 4 MaxPool2d `[k]`, 5 ReLU, 6 Sigmoid, 7 Flatten, 8 Reshape `[dims…]`.

use std::io::Read;

use super::layers::{Conv2d, ConvTranspose2d, Dense, Layer};
use super::sequential::Sequential;
use crate::binio::{put_f64s, put_u32, put_u64, ByteReader};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"QNNCKPT1";
pub const VERSION: u32 = 1;
const MAX_DIM: u64 = 1 << 24;

fn layer_header(layer: &Layer) -> (u8, Vec<usize>) {
    match layer {
        Layer::Dense(d) => (1, vec![d.in_features, d.out_features]),
        Layer::Conv2d(c) => (2, vec![c.in_channels, c.out_channels, c.kernel, c.stride, c.padding]),
        Layer::ConvTranspose2d(c) => (
            3,
            vec![c.in_channels, c.out_channels, c.kernel, c.stride, c.padding, c.output_padding],
        ),
        Layer::MaxPool2d(k) => (4, vec![*k]),
        Layer::Relu => (5, vec![]),
        Layer::Sigmoid => (6, vec![]),
        Layer::Flatten => (7, vec![]),
        Layer::Reshape(s) => (8, s.clone()),
    }
}

impl Sequential {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, self.layers.len() as u32);
        for layer in &self.layers {
            let (id, dims) = layer_header(layer);
            out.push(id);
            put_u32(&mut out, dims.len() as u32);
            for d in dims {
                put_u64(&mut out, d as u64);
            }
        }
        for group in self.params() {
            put_f64s(&mut out, group);
        }
        out
    }

    /// Reads one checkpoint from `reader`, leaving any following bytes unread.
    pub fn read_checkpoint<R: Read>(reader: &mut ByteReader<R>) -> Result<Self> {
        reader.expect_magic(MAGIC)?;
        let at = reader.offset();
        let version = reader.u32_le()?;
        if version != VERSION {
            return Err(Error::format(at, format!("unsupported checkpoint version {version}")));
        }
        let count = reader.u32_le()? as usize;
        let mut headers = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let at = reader.offset();
            let id = reader.u8()?;
            let n = reader.u32_le()? as usize;
            if n > 16 {
                return Err(Error::format(at, format!("layer header with {n} shape ints")));
            }
            let mut dims = Vec::with_capacity(n);
            for _ in 0..n {
                dims.push(reader.len_le(MAX_DIM, "layer dimension")?);
            }
            headers.push((at, id, dims));
        }
        let mut layers = Vec::with_capacity(headers.len());
        for (at, id, d) in headers {
            let arity = |n: usize| -> Result<()> {
                if d.len() != n {
                    return Err(Error::format(at, format!("layer id {id} expects {n} shape ints, got {}", d.len())));
                }
                Ok(())
            };
            let layer = match id {
                1 => {
                    arity(2)?;
                    Layer::Dense(Dense {
                        in_features: d[0],
                        out_features: d[1],
                        weight: vec![0.0; d[0] * d[1]],
                        bias: vec![0.0; d[1]],
                    })
                }
                2 => {
                    arity(5)?;
                    Layer::Conv2d(Conv2d {
                        in_channels: d[0],
                        out_channels: d[1],
                        kernel: d[2],
                        stride: d[3],
                        padding: d[4],
                        weight: vec![0.0; d[0] * d[1] * d[2] * d[2]],
                        bias: vec![0.0; d[1]],
                    })
                }
                3 => {
                    arity(6)?;
                    Layer::ConvTranspose2d(ConvTranspose2d {
                        in_channels: d[0],
                        out_channels: d[1],
                        kernel: d[2],
                        stride: d[3],
                        padding: d[4],
                        output_padding: d[5],
                        weight: vec![0.0; d[0] * d[1] * d[2] * d[2]],
                        bias: vec![0.0; d[1]],
                    })
                }
                4 => {
                    arity(1)?;
                    Layer::MaxPool2d(d[0])
                }
                5 => Layer::Relu,
                6 => Layer::Sigmoid,
                7 => Layer::Flatten,
                8 => Layer::Reshape(d),
                other => return Err(Error::format(at, format!("unknown layer id {other}"))),
            };
            layers.push(layer);
        }
        let mut net = Sequential::new(layers);
        for group in net.params_mut() {
            for v in group.iter_mut() {
                *v = reader.f64_le()?;
            }
        }
        Ok(net)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let net = Self::read_checkpoint(&mut r)?;
        r.expect_end()?;
        Ok(net)
    }
}
