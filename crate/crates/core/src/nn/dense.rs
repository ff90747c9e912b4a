use super::matrix::{accumulate_outer, affine, times_transpose, Matrix};
use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
            Activation::Linear => v,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        }
    }
}

/// One affine layer followed by an element-wise activation.
///
/// `weight` is `(input, output)` so that `y = act(x * W + b)` for row vectors `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Layer {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let data = (0..input * output)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Layer {
            weight: Matrix::from_vec(input, output, data).expect("sized above"),
            bias: vec![0.0; output],
            activation,
        }
    }
}

/// Feed-forward network of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

/// Activations cached by [`DenseNet::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `activations[0]` is the network input, `activations[l + 1]` the output of layer `l`.
    activations: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
}

impl Tape {
    pub fn batch_size(&self) -> usize {
        self.activations[0].rows()
    }

    pub fn input(&self) -> &Matrix {
        &self.activations[0]
    }

    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("tape always holds the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients mirroring the shapes of a [`DenseNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Gradients {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weight: Matrix::zeros(l.input_dim(), l.output_dim()),
                    bias: vec![0.0; l.output_dim()],
                })
                .collect(),
        }
    }

    /// Element-wise accumulation of another gradient with identical shapes.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight
                .data_mut()
                .iter_mut()
                .zip(b.weight.data())
                .for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.data().iter().chain(&l.bias))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Index of the first layer holding a non-finite entry.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| !l.weight.is_finite() || l.bias.iter().any(|v| !v.is_finite()))
    }
}

impl DenseNet {
    pub fn from_layers(layers: Vec<Layer>) -> Result<DenseNet> {
        if layers.is_empty() {
            return Err(Error::Validation("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(Error::shape(format!("layer {i} bias"), l.output_dim(), l.bias.len()));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::shape(
                    format!("layer {} input", i + 1),
                    pair[0].output_dim(),
                    pair[1].input_dim(),
                ));
            }
        }
        Ok(DenseNet { layers })
    }

    /// Multi-layer perceptron with `hidden` widths, Glorot-initialized.
    pub fn mlp<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        output: usize,
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut R,
    ) -> DenseNet {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(hidden);
        dims.push(output);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| {
                let act = if i == last {
                    output_activation
                } else {
                    hidden_activation
                };
                Layer::glorot(d[0], d[1], act, rng)
            })
            .collect();
        DenseNet { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access for optimizers and gradient checks; shapes must not change.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    /// FNV-1a over the bit patterns of every parameter.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for l in &self.layers {
            for v in l.weight.data().iter().chain(&l.bias) {
                for b in v.to_bits().to_le_bytes() {
                    h ^= u64::from(b);
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }

    /// Exponential moving average step: `self = decay * self + (1 - decay) * other`.
    pub fn ema_update(&mut self, other: &DenseNet, decay: f64) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape("layer count", self.layers.len(), other.layers.len()));
        }
        for (i, (a, b)) in self.layers.iter_mut().zip(&other.layers).enumerate() {
            if a.weight.data().len() != b.weight.data().len() || a.bias.len() != b.bias.len() {
                let count = |l: &Layer| l.weight.data().len() + l.bias.len();
                return Err(Error::shape(format!("layer {i} parameters"), count(a), count(b)));
            }
            for (x, &y) in a.weight.data_mut().iter_mut().chain(a.bias.iter_mut()).zip(b.weight.data().iter().chain(&b.bias)) {
                *x = decay * *x + (1.0 - decay) * y;
            }
        }
        Ok(())
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::shape("layer 0 input", self.input_dim(), input.cols()));
        }
        if input.rows() == 0 {
            return Err(Error::Validation("empty batch".into()));
        }
        Ok(())
    }

    /// Forward pass without caching.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.check_input(input)?;
        let mut x = None::<Matrix>;
        for l in &self.layers {
            let src = x.as_ref().unwrap_or(input);
            let mut z = affine(src, &l.weight, &l.bias);
            if l.activation != Activation::Linear {
                z.data_mut()
                    .iter_mut()
                    .for_each(|v| *v = l.activation.apply(*v));
            }
            x = Some(z);
        }
        Ok(x.expect("non-empty"))
    }

    /// Forward pass recording everything [`DenseNet::backward`] needs.
    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, Tape)> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(input.clone());
        for l in &self.layers {
            let z = affine(activations.last().expect("pushed"), &l.weight, &l.bias);
            let mut a = z.clone();
            if l.activation != Activation::Linear {
                a.data_mut()
                    .iter_mut()
                    .for_each(|v| *v = l.activation.apply(*v));
            }
            pre_activations.push(z);
            activations.push(a);
        }
        let out = activations.last().expect("pushed").clone();
        Ok((
            out,
            Tape {
                activations,
                pre_activations,
            },
        ))
    }

    /// On/off state of every ReLU unit recorded in `tape`, layer by layer.
    pub fn active_units(&self, tape: &Tape) -> Vec<bool> {
        self.layers
            .iter()
            .zip(&tape.pre_activations)
            .filter(|(l, _)| l.activation == Activation::Relu)
            .flat_map(|(_, z)| z.data().iter().map(|&v| v > 0.0))
            .collect()
    }

    fn check_tape(&self, tape: &Tape, upstream: &Matrix) -> Result<()> {
        if tape.pre_activations.len() != self.layers.len() {
            return Err(Error::shape(
                "tape layers",
                self.layers.len(),
                tape.pre_activations.len(),
            ));
        }
        for (i, (l, z)) in self.layers.iter().zip(&tape.pre_activations).enumerate() {
            if z.cols() != l.output_dim() {
                return Err(Error::shape(format!("tape layer {i}"), l.output_dim(), z.cols()));
            }
        }
        if upstream.rows() != tape.batch_size() || upstream.cols() != self.output_dim() {
            return Err(Error::shape(
                "upstream gradient",
                format!("{}x{}", tape.batch_size(), self.output_dim()),
                format!("{}x{}", upstream.rows(), upstream.cols()),
            ));
        }
        Ok(())
    }

    /// Exact gradients w.r.t. every parameter and w.r.t. the input.
    ///
    /// `upstream` is the gradient of a scalar loss w.r.t. the network output.
    pub fn backward(&self, tape: &Tape, upstream: &Matrix) -> Result<(Gradients, Matrix)> {
        self.check_tape(tape, upstream)?;
        let mut grads = Gradients::zeros_like(self);
        let dx = self.backprop(tape, upstream, Some(&mut grads));
        Ok((grads, dx))
    }

    /// Gradient w.r.t. the input only; parameter gradients are not formed.
    pub fn backward_input(&self, tape: &Tape, upstream: &Matrix) -> Result<Matrix> {
        self.check_tape(tape, upstream)?;
        Ok(self.backprop(tape, upstream, None))
    }

    fn backprop(&self, tape: &Tape, upstream: &Matrix, mut grads: Option<&mut Gradients>) -> Matrix {
        let mut delta = upstream.clone();
        for (i, l) in self.layers.iter().enumerate().rev() {
            if l.activation != Activation::Linear {
                let z = &tape.pre_activations[i];
                let a = &tape.activations[i + 1];
                for ((d, &zv), &av) in delta.data_mut().iter_mut().zip(z.data()).zip(a.data()) {
                    *d *= l.activation.derivative(zv, av);
                }
            }
            if let Some(g) = grads.as_deref_mut() {
                let lg = &mut g.layers[i];
                accumulate_outer(&tape.activations[i], &delta, &mut lg.weight);
                for row in delta.row_iter() {
                    lg.bias.iter_mut().zip(row).for_each(|(b, d)| *b += d);
                }
            }
            delta = times_transpose(&delta, &l.weight);
        }
        delta
    }
}
