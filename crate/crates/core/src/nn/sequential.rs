use super::layers::{Layer, LayerCache};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Parameter gradients, one flat vector per parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<Vec<f64>>);

impl Grads {
    pub fn zeros_like(groups: &[&[f64]]) -> Self {
        Grads(groups.iter().map(|g| vec![0.0; g.len()]).collect())
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.0.iter_mut().flatten() {
            *v *= factor;
        }
    }
}

/// Activations recorded by [`Sequential::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache(Vec<LayerCache>);

/// A stack of layers applied in order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ForwardCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let (next, cache) = layer.forward(&cur)?;
            caches.push(cache);
            cur = next;
        }
        Ok((cur, ForwardCache(caches)))
    }

    /// Forward pass without keeping activations.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur)?.0;
        }
        Ok(cur)
    }

    /// Reverse-mode pass. Returns parameter gradients (in [`Sequential::params`]
    /// order) and the gradient with respect to the network input.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Tensor) -> Result<(Grads, Tensor)> {
        if cache.0.len() != self.layers.len() {
            return Err(Error::State(format!(
                "forward cache holds {} entries for {} layers",
                cache.0.len(),
                self.layers.len()
            )));
        }
        let mut per_layer: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.layers.len());
        let mut g = upstream.clone();
        for (layer, c) in self.layers.iter().zip(&cache.0).rev() {
            let (gx, pg) = layer.backward(c, &g)?;
            per_layer.push(pg);
            g = gx;
        }
        per_layer.reverse();
        Ok((Grads(per_layer.into_iter().flatten().collect()), g))
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads {
        Grads::zeros_like(&self.params())
    }
}
