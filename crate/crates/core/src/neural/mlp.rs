use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::loss::{loss_gradient, LossKind};
use crate::oracle::LabelMask;
use crate::samplers::RandomStream;
use crate::scalar::Scalar;

/// Hidden-layer nonlinearity. Codes: 0 relu, 1 tanh.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            _ => Err(Error::UnknownCode { kind: "activation", code }),
        }
    }

    #[inline]
    fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => x.max(S::zero()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn slope<S: Scalar>(self, out: S) -> S {
        match self {
            Activation::Relu => {
                if out > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Tanh => S::one() - out * out,
        }
    }
}

/// Hidden widths written `128x128`; an empty string means no hidden layer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct HiddenLayers(pub Vec<usize>);

impl fmt::Display for HiddenLayers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

impl FromStr for HiddenLayers {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(HiddenLayers(Vec::new()));
        }
        s.split(['x', ',', ' '])
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<usize>().map_err(|_| Error::InvalidArgument(format!("bad hidden layers {s:?}"))))
            .collect::<Result<Vec<_>>>()
            .map(HiddenLayers)
    }
}

impl From<HiddenLayers> for String {
    fn from(h: HiddenLayers) -> String {
        h.to_string()
    }
}

impl TryFrom<String> for HiddenLayers {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Twenty-six hidden-layer configurations: one layer of width 4..=2048, and
/// two or three equal layers of width 4..=512, each in powers of two.
pub fn default_size_grid() -> Vec<HiddenLayers> {
    let widths = |hi: u32| (2..=hi).map(|p| 1usize << p);
    let mut grid: Vec<HiddenLayers> = widths(11).map(|w| HiddenLayers(vec![w])).collect();
    for depth in [2, 3] {
        grid.extend(widths(9).map(|w| HiddenLayers(vec![w; depth])));
    }
    grid
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_dim: usize,
    pub hidden: HiddenLayers,
    pub output_dim: usize,
    #[serde(default)]
    pub activation: Activation,
    pub init_seed: u64,
}

impl NetConfig {
    pub fn new(input_dim: usize, hidden: &[usize], output_dim: usize, init_seed: u64) -> Self {
        NetConfig {
            input_dim,
            hidden: HiddenLayers(hidden.to_vec()),
            output_dim,
            activation: Activation::Relu,
            init_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.0.len() > 3 {
            return Err(Error::InvalidArgument("at most three hidden layers".into()));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.0.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be positive".into()));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every dense layer.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden.0);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// A fully connected layer. `weights` is `fan_in × fan_out`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<S> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense { fan_in, fan_out, weights: vec![S::zero(); fan_in * fan_out], bias: vec![S::zero(); fan_out] }
    }
}

/// Multilayer perceptron whose output is a softmax over ballots.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<S> {
    config: NetConfig,
    layers: Vec<Dense<S>>,
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<S> {
    pub layers: Vec<Dense<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn flat(&self) -> Vec<S> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }
}

#[inline]
fn axpy<S: Scalar>(a: S, x: &[S], y: &mut [S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot<S: Scalar>(x: &[S], y: &[S]) -> S {
    // eight independent lanes so the loop vectorizes
    let mut acc = [S::zero(); 8];
    let (xc, yc) = (x.chunks_exact(8), y.chunks_exact(8));
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for l in 0..8 {
            acc[l] += a[l] * b[l];
        }
    }
    let mut total = acc.iter().copied().sum::<S>();
    for (a, b) in xr.iter().zip(yr) {
        total += *a * *b;
    }
    total
}

/// Numerically stable softmax, in place.
pub fn softmax_in_place<S: Scalar>(z: &mut [S]) {
    let hi = z.iter().copied().fold(S::neg_infinity(), S::max);
    let mut total = S::zero();
    for v in z.iter_mut() {
        *v = (*v - hi).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

impl<S: Scalar> Mlp<S> {
    /// Weights and biases uniform on `±1/sqrt(fan_in)`, drawn from
    /// `config.init_seed`.
    pub fn new(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let mut stream = RandomStream::new(config.init_seed);
        let layers = config
            .shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut draw = || S::of((2.0 * stream.uniform() - 1.0) * bound);
                let weights = (0..fan_in * fan_out).map(|_| draw()).collect();
                let bias = (0..fan_out).map(|_| draw()).collect();
                Dense { fan_in, fan_out, weights, bias }
            })
            .collect();
        Ok(Mlp { config, layers })
    }

    /// All parameters zero; the output is uniform.
    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let layers = config.shapes().into_iter().map(|(i, o)| Dense::zeros(i, o)).collect();
        Ok(Mlp { config, layers })
    }

    pub fn from_layers(config: NetConfig, layers: Vec<Dense<S>>) -> Result<Self> {
        config.validate()?;
        let shapes = config.shapes();
        let consistent = shapes.len() == layers.len()
            && shapes.iter().zip(&layers).all(|(&(i, o), l)| {
                l.fan_in == i && l.fan_out == o && l.weights.len() == i * o && l.bias.len() == o
            });
        if !consistent {
            return Err(Error::InvalidArgument("layer shapes disagree with the configuration".into()));
        }
        Ok(Mlp { config, layers })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Dense<S>] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.config.param_count()
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    /// Activations of every layer for a row-major batch; the last entry holds
    /// the logits.
    fn activations(&self, inputs: &[S], batch: usize) -> Vec<Vec<S>> {
        let act = self.config.activation;
        let mut outs: Vec<Vec<S>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let prev: &[S] = if l == 0 { inputs } else { &outs[l - 1] };
            let mut z = vec![S::zero(); batch * layer.fan_out];
            for (row, zrow) in prev.chunks_exact(layer.fan_in).zip(z.chunks_exact_mut(layer.fan_out)) {
                zrow.copy_from_slice(&layer.bias);
                for (i, &a) in row.iter().enumerate() {
                    if a != S::zero() {
                        axpy(a, &layer.weights[i * layer.fan_out..(i + 1) * layer.fan_out], zrow);
                    }
                }
            }
            if l + 1 < self.layers.len() {
                for v in z.iter_mut() {
                    *v = act.apply(*v);
                }
            }
            outs.push(z);
        }
        outs
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: len });
        }
        Ok(())
    }

    pub fn logits(&self, features: &[S]) -> Result<Vec<S>> {
        self.check_dim(features.len())?;
        Ok(self.activations(features, 1).pop().expect("at least one layer"))
    }

    /// Probability of each ballot.
    pub fn forward(&self, features: &[S]) -> Result<Vec<S>> {
        let mut z = self.logits(features)?;
        softmax_in_place(&mut z);
        Ok(z)
    }

    /// Logits for a row-major batch of feature vectors.
    pub fn logits_batch(&self, inputs: &[S]) -> Result<Vec<S>> {
        if inputs.len() % self.input_dim() != 0 {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: inputs.len() });
        }
        let batch = inputs.len() / self.input_dim();
        Ok(self.activations(inputs, batch).pop().expect("at least one layer"))
    }

    /// Index of the most probable ballot, lowest index on ties.
    pub fn argmax(&self, features: &[S]) -> Result<usize> {
        Ok(argmax_first(&self.logits(features)?))
    }

    /// Mean masked loss over the batch and its exact gradient.
    ///
    /// `inputs` is row-major `masks.len() × input_dim`.
    pub fn loss_and_gradients(&self, inputs: &[S], masks: &[&LabelMask], kind: LossKind) -> Result<(S, Gradients<S>)> {
        let batch = masks.len();
        if batch == 0 || inputs.len() != batch * self.input_dim() {
            return Err(Error::DimensionMismatch { expected: batch * self.input_dim(), found: inputs.len() });
        }
        let outs = self.activations(inputs, batch);
        let out_dim = self.output_dim();
        let scale = S::one() / S::of(batch as f64);

        let mut total = S::zero();
        let mut delta = vec![S::zero(); batch * out_dim];
        for ((z, d), mask) in outs[outs.len() - 1].chunks_exact(out_dim).zip(delta.chunks_exact_mut(out_dim)).zip(masks) {
            total += loss_gradient(z, mask, kind, d)?;
            for v in d.iter_mut() {
                *v *= scale;
            }
        }

        let act = self.config.activation;
        let mut grads: Vec<Dense<S>> = self.layers.iter().map(|l| Dense::zeros(l.fan_in, l.fan_out)).collect();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let prev: &[S] = if l == 0 { inputs } else { &outs[l - 1] };
            let g = &mut grads[l];
            for (arow, drow) in prev.chunks_exact(layer.fan_in).zip(delta.chunks_exact(layer.fan_out)) {
                axpy(S::one(), drow, &mut g.bias);
                for (i, &a) in arow.iter().enumerate() {
                    if a != S::zero() {
                        axpy(a, drow, &mut g.weights[i * layer.fan_out..(i + 1) * layer.fan_out]);
                    }
                }
            }
            if l > 0 {
                let mut below = vec![S::zero(); batch * layer.fan_in];
                for ((brow, drow), arow) in
                    below.chunks_exact_mut(layer.fan_in).zip(delta.chunks_exact(layer.fan_out)).zip(prev.chunks_exact(layer.fan_in))
                {
                    for i in 0..layer.fan_in {
                        let slope = act.slope(arow[i]);
                        if slope != S::zero() {
                            brow[i] = slope * dot(drow, &layer.weights[i * layer.fan_out..(i + 1) * layer.fan_out]);
                        }
                    }
                }
                delta = below;
            }
        }
        Ok((total * scale, Gradients { layers: grads }))
    }

    /// Mean masked loss over a batch without gradients.
    pub fn loss(&self, inputs: &[S], masks: &[&LabelMask], kind: LossKind) -> Result<S> {
        let logits = self.logits_batch(inputs)?;
        let mut scratch = vec![S::zero(); self.output_dim()];
        let mut total = S::zero();
        for (z, mask) in logits.chunks_exact(self.output_dim()).zip(masks) {
            total += loss_gradient(z, mask, kind, &mut scratch)?;
        }
        Ok(total / S::of(masks.len() as f64))
    }

    /// Flattened parameters in layer order, weights before biases.
    pub fn flat_params(&self) -> Vec<S> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    /// Mutable access to parameter `index` of [`Mlp::flat_params`].
    pub fn param_mut(&mut self, mut index: usize) -> &mut S {
        for layer in &mut self.layers {
            let w = layer.weights.len();
            if index < w {
                return &mut layer.weights[index];
            }
            index -= w;
            if index < layer.bias.len() {
                return &mut layer.bias[index];
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense<S>] {
        &mut self.layers
    }
}

/// First index of the maximum; NaNs never win.
pub fn argmax_first<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}
