//! The two-stage residual pan-sharpening network.
//!
//! Stage 1 stacks layers `1..L−1` (conv + ReLU) over the `S+1`-band input and
//! adds the input back through a skip connection. Stage 2 is a single linear
//! convolution projecting the `S+1` bands of the stage-1 output onto the `S`
//! multispectral bands.

mod checkpoint;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::conv::conv2d_backward_params;
use crate::tensor::{add, conv2d_backward, conv2d_forward, relu_backward, relu_forward, ConvKernel, Shape, Tensor};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};

pub const DEFAULT_LAYERS: usize = 11;
pub const DEFAULT_HIDDEN_CHANNELS: usize = 64;
pub const DEFAULT_FILTER_SIZE: usize = 7;

/// Topology of the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Total layer count `L`, including the projection layer.
    pub layers: usize,
    /// Multispectral band count `S`.
    pub bands: usize,
    /// Width of layers `1..L−2`.
    pub hidden_channels: usize,
    /// `(h, w)` of every layer's filters, in layer order.
    pub filter_sizes: Vec<(usize, usize)>,
    /// Apply ReLU to layer `L−1` before the skip addition.
    pub relu_before_skip: bool,
}

impl NetworkSpec {
    /// Same square filter size in every layer.
    pub fn uniform(layers: usize, bands: usize, hidden_channels: usize, filter_size: usize) -> Self {
        NetworkSpec {
            layers,
            bands,
            hidden_channels,
            filter_sizes: vec![(filter_size, filter_size); layers],
            relu_before_skip: true,
        }
    }

    /// `L = 11`, 64 hidden channels, 7×7 filters.
    pub fn standard(bands: usize) -> Self {
        Self::uniform(DEFAULT_LAYERS, bands, DEFAULT_HIDDEN_CHANNELS, DEFAULT_FILTER_SIZE)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers < 2 {
            return Err(Error::Config(format!("network needs at least 2 layers, got {}", self.layers)));
        }
        if self.bands == 0 || self.hidden_channels == 0 {
            return Err(Error::Config("band and channel counts must be positive".into()));
        }
        if self.filter_sizes.len() != self.layers {
            return Err(Error::Config(format!(
                "{} filter sizes given for {} layers",
                self.filter_sizes.len(),
                self.layers
            )));
        }
        if let Some((i, &(h, w))) = self
            .filter_sizes
            .iter()
            .enumerate()
            .find(|(_, &(h, w))| h % 2 == 0 || w % 2 == 0 || h == 0 || w == 0)
        {
            return Err(Error::Config(format!("layer {} filter size {h}x{w} is not odd", i + 1)));
        }
        Ok(())
    }

    pub fn input_channels(&self) -> usize {
        self.bands + 1
    }

    /// Channel count `C_l` for `l = 0..=L`.
    ///
    /// `C_0 = C_{L−1} = S+1` so the residual branch can be added to the input,
    /// `C_L = S`, everything in between is `hidden_channels`.
    pub fn channels(&self, l: usize) -> usize {
        assert!(l <= self.layers, "layer index {l} out of range");
        if l == 0 || l == self.layers - 1 {
            self.bands + 1
        } else if l == self.layers {
            self.bands
        } else {
            self.hidden_channels
        }
    }

    /// Weight shape of layer `l` (1-based) as `c_out × c_in × kh × kw`.
    pub fn layer_shape(&self, l: usize) -> Shape {
        let (kh, kw) = self.filter_sizes[l - 1];
        Shape::new(self.channels(l), self.channels(l - 1), kh, kw)
    }

    /// Whether layer `l` (1-based) is followed by ReLU.
    pub fn has_relu(&self, l: usize) -> bool {
        l < self.layers - 1 || (l == self.layers - 1 && self.relu_before_skip)
    }

    pub fn param_count(&self) -> usize {
        (1..=self.layers)
            .map(|l| {
                let s = self.layer_shape(l);
                s.len() + s.n
            })
            .sum()
    }

    pub fn ensure_bands(&self, bands: usize) -> Result<()> {
        if self.bands != bands {
            return Err(Error::Config(format!(
                "network was built for {} bands but the data has {bands}",
                self.bands
            )));
        }
        Ok(())
    }
}

/// Weights and biases of layers `1..=L`, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T = f32> {
    pub layers: Vec<ConvKernel<T>>,
}

/// Parameter gradients share the parameter layout.
pub type Gradients<T = f32> = NetworkParams<T>;

impl<T: Real> NetworkParams<T> {
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layers = (1..=spec.layers)
            .map(|l| {
                let s = spec.layer_shape(l);
                ConvKernel::zeros(s.n, s.c, s.h, s.w)
            })
            .collect::<Result<_>>()?;
        Ok(NetworkParams { layers })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(ConvKernel::param_count).sum()
    }

    /// Checks every layer against the shapes `spec` prescribes.
    pub fn check_spec(&self, spec: &NetworkSpec) -> Result<()> {
        spec.validate()?;
        if self.layers.len() != spec.layers {
            return Err(Error::Config(format!(
                "parameters hold {} layers, spec needs {}",
                self.layers.len(),
                spec.layers
            )));
        }
        for (i, k) in self.layers.iter().enumerate() {
            let expected = spec.layer_shape(i + 1);
            if k.weights().shape() != expected {
                return Err(Error::ShapeMismatch {
                    op: "network layer",
                    expected,
                    actual: k.weights().shape(),
                });
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> NetworkParams<U> {
        NetworkParams {
            layers: self.layers.iter().map(ConvKernel::cast).collect(),
        }
    }

    /// All parameters flattened in checkpoint order (weights then bias, per layer).
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for k in &self.layers {
            out.extend_from_slice(k.weights().data());
            out.extend_from_slice(k.bias());
        }
        out
    }

    /// Inverse of [`NetworkParams::flatten`].
    pub fn unflatten(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Config(format!(
                "expected {} parameter values, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut rest = values;
        for k in &mut self.layers {
            let (w, tail) = rest.split_at(k.weights().len());
            k.weights_mut().data_mut().copy_from_slice(w);
            let (b, tail) = tail.split_at(k.bias().len());
            k.bias_mut().copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }
}

/// Fan-in scaled Gaussian weights (`σ = sqrt(2 / (C_{l−1}·h·w))`), zero biases.
pub fn init_network<T: Real>(spec: &NetworkSpec, seed: u64) -> Result<NetworkParams<T>> {
    let mut params = NetworkParams::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in &mut params.layers {
        let s = k.weights().shape();
        let std = (2.0 / (s.c * s.h * s.w) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive standard deviation");
        for w in k.weights_mut().data_mut() {
            *w = T::from_f64_lossy(normal.sample(&mut rng));
        }
    }
    Ok(params)
}

/// Activations of one layer. `post` is `None` when the layer has no ReLU.
#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    pub pre: Tensor<T>,
    pub post: Option<Tensor<T>>,
}

impl<T: Real> LayerCache<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.post.as_ref().unwrap_or(&self.pre)
    }
}

/// Everything backpropagation needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T = f32> {
    pub input: Tensor<T>,
    /// One entry per layer `1..=L`.
    pub layers: Vec<LayerCache<T>>,
    /// `G + F_{L−1}`.
    pub stage1: Tensor<T>,
}

fn check_input<T: Real>(spec: &NetworkSpec, g: &Tensor<T>) -> Result<()> {
    if g.shape().c != spec.input_channels() {
        return Err(Error::Config(format!(
            "network input needs {} channels (S+1), got {}",
            spec.input_channels(),
            g.shape().c
        )));
    }
    Ok(())
}

/// Runs the network and keeps every intermediate activation.
pub fn forward<T: Real>(params: &NetworkParams<T>, spec: &NetworkSpec, g: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
    params.check_spec(spec)?;
    check_input(spec, g)?;
    let mut caches = Vec::with_capacity(spec.layers);
    for l in 1..spec.layers {
        let input = caches.last().map_or(g, LayerCache::output);
        let pre = conv2d_forward(input, &params.layers[l - 1])?;
        let post = spec.has_relu(l).then(|| relu_forward(&pre));
        caches.push(LayerCache { pre, post });
    }
    let stage1 = add(g, caches.last().expect("at least one body layer").output())?;
    let out = conv2d_forward(&stage1, &params.layers[spec.layers - 1])?;
    caches.push(LayerCache {
        pre: out.clone(),
        post: None,
    });
    Ok((
        out,
        ForwardCache {
            input: g.clone(),
            layers: caches,
            stage1,
        },
    ))
}

/// Forward pass without a cache, for inference.
pub fn predict<T: Real>(params: &NetworkParams<T>, spec: &NetworkSpec, g: &Tensor<T>) -> Result<Tensor<T>> {
    params.check_spec(spec)?;
    check_input(spec, g)?;
    let mut x = g.clone();
    for l in 1..spec.layers {
        x = conv2d_forward(&x, &params.layers[l - 1])?;
        if spec.has_relu(l) {
            x = relu_forward(&x);
        }
    }
    let stage1 = add(g, &x)?;
    conv2d_forward(&stage1, &params.layers[spec.layers - 1])
}

/// Chain-rule gradients of every layer given `∂loss/∂F`.
pub fn backward<T: Real>(
    params: &NetworkParams<T>,
    spec: &NetworkSpec,
    cache: &ForwardCache<T>,
    grad_out: &Tensor<T>,
) -> Result<Gradients<T>> {
    params.check_spec(spec)?;
    if cache.layers.len() != spec.layers {
        return Err(Error::Config(format!(
            "forward cache holds {} layers, network has {}",
            cache.layers.len(),
            spec.layers
        )));
    }
    let l_count = spec.layers;
    let mut grads: Vec<Option<ConvKernel<T>>> = vec![None; l_count];

    let last = conv2d_backward(&cache.stage1, &params.layers[l_count - 1], grad_out)?;
    grads[l_count - 1] = Some(ConvKernel::new(last.weights, last.bias)?);

    // ∂loss/∂F_{L−1} equals ∂loss/∂F^Stage1; the same value reaches G via the skip.
    let mut upstream = last.input;
    for l in (1..l_count).rev() {
        let layer = &cache.layers[l - 1];
        let d_pre = if spec.has_relu(l) {
            relu_backward(&layer.pre, &upstream)?
        } else {
            upstream
        };
        let input = if l == 1 { &cache.input } else { cache.layers[l - 2].output() };
        if l == 1 {
            let (w, b) = conv2d_backward_params(input, &params.layers[0], &d_pre)?;
            grads[0] = Some(ConvKernel::new(w, b)?);
            break;
        }
        let g = conv2d_backward(input, &params.layers[l - 1], &d_pre)?;
        grads[l - 1] = Some(ConvKernel::new(g.weights, g.bias)?);
        upstream = g.input;
    }

    Ok(NetworkParams {
        layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
    })
}
