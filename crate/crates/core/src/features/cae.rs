use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{mse_loss, Conv2d, ConvTranspose2d, Dense, Grads, Layer, Optimizer, OptimizerSpec, Sequential, Tensor};
use crate::rng::substream;

pub const CAE_SIDE: usize = 28;

/// Autoencoder shape. Only the bottleneck width is free; the surrounding
/// layers are fixed for 28×28 single-channel inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaeSpec {
    pub latent_dim: usize,
}

impl CaeSpec {
    pub fn new(latent_dim: usize) -> Result<Self> {
        if latent_dim == 0 {
            return Err(Error::config("latent dimension must be positive"));
        }
        Ok(Self { latent_dim })
    }

    /// Conv(1→16, s2) → ReLU → Conv(16→4, s2) → ReLU → Flatten → Dense(196→d).
    pub fn encoder<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Sequential {
        Sequential::new(vec![
            Layer::Conv2d(Conv2d::new(1, 16, 3, 2, 1, rng)),
            Layer::Relu,
            Layer::Conv2d(Conv2d::new(16, 4, 3, 2, 1, rng)),
            Layer::Relu,
            Layer::Flatten,
            Layer::Dense(Dense::new(196, self.latent_dim, rng)),
        ])
    }

    /// Dense(d→196) → 4×7×7 → ConvT(4→16) → ReLU → ConvT(16→1) → Sigmoid.
    pub fn decoder<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Sequential {
        Sequential::new(vec![
            Layer::Dense(Dense::new(self.latent_dim, 196, rng)),
            Layer::Reshape(vec![4, 7, 7]),
            Layer::ConvTranspose2d(ConvTranspose2d::new(4, 16, 3, 2, 1, 1, rng)),
            Layer::Relu,
            Layer::ConvTranspose2d(ConvTranspose2d::new(16, 1, 3, 2, 1, 1, rng)),
            Layer::Sigmoid,
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaeTrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub optimizer: OptimizerSpec,
    pub seed: u64,
}

impl Default for CaeTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch: 50,
            optimizer: OptimizerSpec::adam(0.001, 1e-5),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cae {
    pub spec: CaeSpec,
    pub encoder: Sequential,
    pub decoder: Sequential,
}

fn as_image(pixels: &[f64]) -> Result<Tensor> {
    if pixels.len() != CAE_SIDE * CAE_SIDE {
        return Err(Error::shape(format!(
            "autoencoder expects {}x{} images, got {} pixels",
            CAE_SIDE,
            CAE_SIDE,
            pixels.len()
        )));
    }
    Tensor::new(vec![1, CAE_SIDE, CAE_SIDE], pixels.to_vec())
}

impl Cae {
    pub fn new(spec: CaeSpec, seed: u64) -> Self {
        let mut rng = substream(seed, "init");
        let encoder = spec.encoder(&mut rng);
        let decoder = spec.decoder(&mut rng);
        Self { spec, encoder, decoder }
    }

    pub fn encode(&self, pixels: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encoder.infer(&as_image(pixels)?)?.into_data())
    }

    pub fn encode_batch(&self, images: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        images.par_iter().map(|im| self.encode(im)).collect()
    }

    pub fn reconstruct(&self, pixels: &[f64]) -> Result<Vec<f64>> {
        let z = self.encoder.infer(&as_image(pixels)?)?;
        Ok(self.decoder.infer(&z)?.into_data())
    }

    /// Reconstruction loss of one image and the gradients of both halves.
    fn sample_grads(&self, pixels: &[f64]) -> Result<(f64, Grads, Grads)> {
        let x = as_image(pixels)?;
        let (z, enc_cache) = self.encoder.forward(&x)?;
        let (y, dec_cache) = self.decoder.forward(&z)?;
        let (loss, g) = mse_loss(&y, &x)?;
        let (dec_grads, gz) = self.decoder.backward(&dec_cache, &g)?;
        let (enc_grads, _) = self.encoder.backward(&enc_cache, &gz)?;
        Ok((loss, enc_grads, dec_grads))
    }

    pub fn mean_loss(&self, images: &[Vec<f64>]) -> Result<f64> {
        let losses = images
            .par_iter()
            .map(|im| {
                let x = as_image(im)?;
                let y = self.decoder.infer(&self.encoder.infer(&x)?)?;
                Ok(mse_loss(&y, &x)?.0)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(losses.iter().sum::<f64>() / images.len().max(1) as f64)
    }
}

/// Trains an autoencoder on `images` (flattened 28×28, values in `[0, 1]`)
/// and returns it with the mean training loss of every epoch.
pub fn train_cae(spec: CaeSpec, images: &[Vec<f64>], cfg: &CaeTrainConfig) -> Result<(Cae, Vec<f64>)> {
    train_cae_with(spec, images, cfg, |_, _| {})
}

/// [`train_cae`] with a callback invoked after each epoch as `(epoch, loss)`.
pub fn train_cae_with(
    spec: CaeSpec,
    images: &[Vec<f64>],
    cfg: &CaeTrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(Cae, Vec<f64>)> {
    if images.is_empty() {
        return Err(Error::config("cannot train an autoencoder on an empty dataset"));
    }
    if cfg.batch == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    if let Some(bad) = images.iter().position(|im| im.len() != CAE_SIDE * CAE_SIDE) {
        return Err(Error::shape(format!("image {bad} is not {CAE_SIDE}x{CAE_SIDE}")));
    }
    let mut cae = Cae::new(spec, cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer)?;
    let mut shuffle = substream(cfg.seed, "shuffle");
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch) {
            let per_sample = batch
                .par_iter()
                .map(|&i| cae.sample_grads(&images[i]))
                .collect::<Result<Vec<_>>>()?;
            let mut enc = cae.encoder.zero_grads();
            let mut dec = cae.decoder.zero_grads();
            for (loss, e, d) in &per_sample {
                total += loss;
                enc.add_assign(e);
                dec.add_assign(d);
            }
            let scale = 1.0 / batch.len() as f64;
            enc.scale(scale);
            dec.scale(scale);
            let grads: Vec<Vec<f64>> = enc.0.into_iter().chain(dec.0).collect();
            let mut params: Vec<&mut [f64]> = cae.encoder.params_mut();
            params.extend(cae.decoder.params_mut());
            opt.step(&mut params, &grads)?;
        }
        let mean = total / images.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite(format!("autoencoder loss at epoch {}", epoch + 1)));
        }
        history.push(mean);
        on_epoch(epoch + 1, mean);
    }
    Ok((cae, history))
}
