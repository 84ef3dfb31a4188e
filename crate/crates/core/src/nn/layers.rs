use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

fn uniform_init<R: Rng + ?Sized>(rng: &mut R, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// Fully connected layer, `weight` is `out × in` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(in_features: usize, out_features: usize, rng: &mut R) -> Self {
        Self {
            in_features,
            out_features,
            weight: uniform_init(rng, in_features * out_features, in_features),
            bias: vec![0.0; out_features],
        }
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape() != [self.in_features] {
            return Err(Error::shape(format!(
                "Dense({}→{}) got input {:?}",
                self.in_features,
                self.out_features,
                x.shape()
            )));
        }
        let out = self
            .weight
            .chunks_exact(self.in_features)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x.data()).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        Ok(Tensor::vector(out))
    }

    fn backward(&self, x: &Tensor, g: &Tensor) -> (Tensor, Vec<Vec<f64>>) {
        let mut gw = vec![0.0; self.weight.len()];
        let mut gx = vec![0.0; self.in_features];
        for (o, &go) in g.data().iter().enumerate() {
            let row = &self.weight[o * self.in_features..(o + 1) * self.in_features];
            let grow = &mut gw[o * self.in_features..(o + 1) * self.in_features];
            for i in 0..self.in_features {
                grow[i] = go * x.data()[i];
                gx[i] += go * row[i];
            }
        }
        (Tensor::vector(gx), vec![gw, g.data().to_vec()])
    }
}

/// 2-D convolution over `[C, H, W]`; `weight` is `[out, in, k, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight: uniform_init(rng, out_channels * fan_in, fan_in),
            bias: vec![0.0; out_channels],
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (hp, wp) = (h + 2 * self.padding, w + 2 * self.padding);
        if hp < self.kernel || wp < self.kernel || self.stride == 0 {
            return Err(Error::shape(format!(
                "Conv2d kernel {} does not fit {h}x{w} with padding {}",
                self.kernel, self.padding
            )));
        }
        Ok(((hp - self.kernel) / self.stride + 1, (wp - self.kernel) / self.stride + 1))
    }

    fn dims(&self, x: &Tensor) -> Result<(usize, usize, usize, usize)> {
        let (c, h, w) = x.chw()?;
        if c != self.in_channels || x.shape().len() != 3 {
            return Err(Error::shape(format!(
                "Conv2d expects [{}, H, W], got {:?}",
                self.in_channels,
                x.shape()
            )));
        }
        let (ho, wo) = self.output_hw(h, w)?;
        Ok((h, w, ho, wo))
    }

    /// Input pixel under kernel tap `(ky, kx)` for output `(oy, ox)`, if inside.
    #[inline]
    fn tap(&self, o: usize, k: usize, limit: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < limit).then_some(pos as usize)
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (h, w, ho, wo) = self.dims(x)?;
        let k = self.kernel;
        let xd = x.data();
        let mut out = vec![0.0; self.out_channels * ho * wo];
        for o in 0..self.out_channels {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = self.bias[o];
                    for c in 0..self.in_channels {
                        let wbase = (o * self.in_channels + c) * k * k;
                        for ky in 0..k {
                            let Some(iy) = self.tap(oy, ky, h) else { continue };
                            for kx in 0..k {
                                let Some(ix) = self.tap(ox, kx, w) else { continue };
                                acc += self.weight[wbase + ky * k + kx] * xd[(c * h + iy) * w + ix];
                            }
                        }
                    }
                    out[(o * ho + oy) * wo + ox] = acc;
                }
            }
        }
        Tensor::new(vec![self.out_channels, ho, wo], out)
    }

    fn backward(&self, x: &Tensor, g: &Tensor) -> Result<(Tensor, Vec<Vec<f64>>)> {
        let (h, w, ho, wo) = self.dims(x)?;
        let k = self.kernel;
        let xd = x.data();
        let gd = g.data();
        let mut gx = vec![0.0; xd.len()];
        let mut gw = vec![0.0; self.weight.len()];
        let mut gb = vec![0.0; self.out_channels];
        for o in 0..self.out_channels {
            for oy in 0..ho {
                for ox in 0..wo {
                    let go = gd[(o * ho + oy) * wo + ox];
                    gb[o] += go;
                    for c in 0..self.in_channels {
                        let wbase = (o * self.in_channels + c) * k * k;
                        for ky in 0..k {
                            let Some(iy) = self.tap(oy, ky, h) else { continue };
                            for kx in 0..k {
                                let Some(ix) = self.tap(ox, kx, w) else { continue };
                                let xi = (c * h + iy) * w + ix;
                                gw[wbase + ky * k + kx] += go * xd[xi];
                                gx[xi] += go * self.weight[wbase + ky * k + kx];
                            }
                        }
                    }
                }
            }
        }
        Ok((Tensor::new(x.shape().to_vec(), gx)?, vec![gw, gb]))
    }
}

/// Transposed 2-D convolution over `[C, H, W]`; `weight` is `[in, out, k, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvTranspose2d {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
        rng: &mut R,
    ) -> Self {
        // fan-in follows weight.size(1)·k·k, the usual convention for transposed convs
        let fan_in = out_channels * kernel * kernel;
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            output_padding,
            weight: uniform_init(rng, in_channels * fan_in, fan_in),
            bias: vec![0.0; out_channels],
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let grow = |n: usize| (n - 1) * self.stride + self.kernel + self.output_padding;
        let (gh, gw) = (grow(h), grow(w));
        if h == 0 || w == 0 || gh <= 2 * self.padding || gw <= 2 * self.padding {
            return Err(Error::shape(format!(
                "ConvTranspose2d produces an empty output from {h}x{w}"
            )));
        }
        Ok((gh - 2 * self.padding, gw - 2 * self.padding))
    }

    fn dims(&self, x: &Tensor) -> Result<(usize, usize, usize, usize)> {
        let (c, h, w) = x.chw()?;
        if c != self.in_channels || x.shape().len() != 3 {
            return Err(Error::shape(format!(
                "ConvTranspose2d expects [{}, H, W], got {:?}",
                self.in_channels,
                x.shape()
            )));
        }
        let (ho, wo) = self.output_hw(h, w)?;
        Ok((h, w, ho, wo))
    }

    #[inline]
    fn scatter(&self, i: usize, k: usize, limit: usize) -> Option<usize> {
        let pos = (i * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < limit).then_some(pos as usize)
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (h, w, ho, wo) = self.dims(x)?;
        let k = self.kernel;
        let xd = x.data();
        let mut out = vec![0.0; self.out_channels * ho * wo];
        for (o, plane) in out.chunks_exact_mut(ho * wo).enumerate() {
            plane.fill(self.bias[o]);
        }
        for c in 0..self.in_channels {
            for iy in 0..h {
                for ix in 0..w {
                    let v = xd[(c * h + iy) * w + ix];
                    for o in 0..self.out_channels {
                        let wbase = (c * self.out_channels + o) * k * k;
                        for ky in 0..k {
                            let Some(oy) = self.scatter(iy, ky, ho) else { continue };
                            for kx in 0..k {
                                let Some(ox) = self.scatter(ix, kx, wo) else { continue };
                                out[(o * ho + oy) * wo + ox] += self.weight[wbase + ky * k + kx] * v;
                            }
                        }
                    }
                }
            }
        }
        Tensor::new(vec![self.out_channels, ho, wo], out)
    }

    fn backward(&self, x: &Tensor, g: &Tensor) -> Result<(Tensor, Vec<Vec<f64>>)> {
        let (h, w, ho, wo) = self.dims(x)?;
        let k = self.kernel;
        let xd = x.data();
        let gd = g.data();
        let mut gx = vec![0.0; xd.len()];
        let mut gw = vec![0.0; self.weight.len()];
        let gb = gd.chunks_exact(ho * wo).map(|p| p.iter().sum()).collect();
        for c in 0..self.in_channels {
            for iy in 0..h {
                for ix in 0..w {
                    let xi = (c * h + iy) * w + ix;
                    let v = xd[xi];
                    let mut acc = 0.0;
                    for o in 0..self.out_channels {
                        let wbase = (c * self.out_channels + o) * k * k;
                        for ky in 0..k {
                            let Some(oy) = self.scatter(iy, ky, ho) else { continue };
                            for kx in 0..k {
                                let Some(ox) = self.scatter(ix, kx, wo) else { continue };
                                let go = gd[(o * ho + oy) * wo + ox];
                                gw[wbase + ky * k + kx] += v * go;
                                acc += self.weight[wbase + ky * k + kx] * go;
                            }
                        }
                    }
                    gx[xi] = acc;
                }
            }
        }
        Ok((Tensor::new(x.shape().to_vec(), gx)?, vec![gw, gb]))
    }
}

/// One network layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    ConvTranspose2d(ConvTranspose2d),
    /// Non-overlapping `k×k` max pooling on `[C, H, W]` or `[H, W]`.
    MaxPool2d(usize),
    Relu,
    Sigmoid,
    Flatten,
    Reshape(Vec<usize>),
}

/// What a layer keeps from its forward pass for the backward pass.
#[derive(Debug, Clone)]
pub enum LayerCache {
    Input(Tensor),
    Output(Tensor),
    Argmax { input_shape: Vec<usize>, index: Vec<usize> },
    Shape(Vec<usize>),
}

impl Layer {
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, LayerCache)> {
        match self {
            Layer::Dense(d) => Ok((d.forward(x)?, LayerCache::Input(x.clone()))),
            Layer::Conv2d(c) => Ok((c.forward(x)?, LayerCache::Input(x.clone()))),
            Layer::ConvTranspose2d(c) => Ok((c.forward(x)?, LayerCache::Input(x.clone()))),
            Layer::MaxPool2d(k) => {
                let (out, index) = maxpool_forward(x, *k)?;
                Ok((
                    out,
                    LayerCache::Argmax {
                        input_shape: x.shape().to_vec(),
                        index,
                    },
                ))
            }
            Layer::Relu => {
                let out = x.data().iter().map(|v| v.max(0.0)).collect();
                Ok((Tensor::new(x.shape().to_vec(), out)?, LayerCache::Input(x.clone())))
            }
            Layer::Sigmoid => {
                let out = Tensor::new(x.shape().to_vec(), x.data().iter().map(|&v| sigmoid(v)).collect())?;
                Ok((out.clone(), LayerCache::Output(out)))
            }
            Layer::Flatten => Ok((
                x.clone().reshape(vec![x.len()])?,
                LayerCache::Shape(x.shape().to_vec()),
            )),
            Layer::Reshape(shape) => Ok((
                x.clone().reshape(shape.clone())?,
                LayerCache::Shape(x.shape().to_vec()),
            )),
        }
    }

    /// Returns the input gradient and, for parameterised layers, the
    /// parameter gradients in [`Layer::params`] order.
    pub fn backward(&self, cache: &LayerCache, g: &Tensor) -> Result<(Tensor, Vec<Vec<f64>>)> {
        let mismatch = || Error::State(format!("cache does not belong to layer {}", self.name()));
        match (self, cache) {
            (Layer::Dense(d), LayerCache::Input(x)) => {
                check_grad_len(g, d.out_features)?;
                Ok(d.backward(x, g))
            }
            (Layer::Conv2d(c), LayerCache::Input(x)) => c.backward(x, g),
            (Layer::ConvTranspose2d(c), LayerCache::Input(x)) => c.backward(x, g),
            (Layer::MaxPool2d(_), LayerCache::Argmax { input_shape, index }) => {
                check_grad_len(g, index.len())?;
                let mut gx = Tensor::zeros(input_shape.clone());
                for (&src, &go) in index.iter().zip(g.data()) {
                    gx.data_mut()[src] += go;
                }
                Ok((gx, vec![]))
            }
            (Layer::Relu, LayerCache::Input(x)) => {
                check_grad_len(g, x.len())?;
                let gx = x
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&v, &go)| if v > 0.0 { go } else { 0.0 })
                    .collect();
                Ok((Tensor::new(x.shape().to_vec(), gx)?, vec![]))
            }
            (Layer::Sigmoid, LayerCache::Output(y)) => {
                check_grad_len(g, y.len())?;
                let gx = y
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&s, &go)| go * s * (1.0 - s))
                    .collect();
                Ok((Tensor::new(y.shape().to_vec(), gx)?, vec![]))
            }
            (Layer::Flatten | Layer::Reshape(_), LayerCache::Shape(shape)) => {
                Ok((g.clone().reshape(shape.clone())?, vec![]))
            }
            _ => Err(mismatch()),
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        match self {
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            Layer::Conv2d(c) => vec![&c.weight, &c.bias],
            Layer::ConvTranspose2d(c) => vec![&c.weight, &c.bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            Layer::Conv2d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::ConvTranspose2d(c) => vec![&mut c.weight, &mut c.bias],
            _ => vec![],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "Dense",
            Layer::Conv2d(_) => "Conv2d",
            Layer::ConvTranspose2d(_) => "ConvTranspose2d",
            Layer::MaxPool2d(_) => "MaxPool2d",
            Layer::Relu => "ReLU",
            Layer::Sigmoid => "Sigmoid",
            Layer::Flatten => "Flatten",
            Layer::Reshape(_) => "Reshape",
        }
    }
}

fn check_grad_len(g: &Tensor, expected: usize) -> Result<()> {
    if g.len() != expected {
        return Err(Error::shape(format!(
            "upstream gradient has {} values, expected {expected}",
            g.len()
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Max over non-overlapping `k×k` windows; trailing rows/cols that do not fill
/// a window are dropped. Returns the flat argmax input index of each output.
pub(crate) fn maxpool_forward(x: &Tensor, k: usize) -> Result<(Tensor, Vec<usize>)> {
    let (c, h, w) = x.chw()?;
    if k == 0 || h < k || w < k {
        return Err(Error::shape(format!("MaxPool2d({k}) does not fit {h}x{w}")));
    }
    let (ho, wo) = (h / k, w / k);
    let xd = x.data();
    let mut out = Vec::with_capacity(c * ho * wo);
    let mut index = Vec::with_capacity(c * ho * wo);
    for ch in 0..c {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = usize::MAX;
                for dy in 0..k {
                    for dx in 0..k {
                        let i = (ch * h + oy * k + dy) * w + ox * k + dx;
                        if best == usize::MAX || xd[i] > xd[best] {
                            best = i;
                        }
                    }
                }
                out.push(xd[best]);
                index.push(best);
            }
        }
    }
    let shape = if x.shape().len() == 2 {
        vec![ho, wo]
    } else {
        vec![c, ho, wo]
    };
    Ok((Tensor::new(shape, out)?, index))
}
