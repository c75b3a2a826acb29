//! The crater classifier: two valid convolutions, a ReLU hidden layer and a
//! two-way softmax output. No pooling.
//!
//! ```text
//! (a) input [1,15,15]
//! (b) conv 20 x 4x4, stride 1   -> [20,12,12]
//! (c) conv 20 x 4x4x20, stride 1 -> [20,9,9]  -> flatten 1620
//! (d) dense + ReLU              -> hidden
//! (e) dense linear              -> 2 logits -> softmax
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{cross_entropy, softmax, Activation, ConvLayer, DenseLayer};
use crate::rng::{stream, Stream};
use crate::tensor::Tensor;

/// Class index of a non-crater.
pub const NON_CRATER: usize = 0;
/// Class index of a crater.
pub const CRATER: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetConfig {
    /// Side of the square single-channel input patch.
    pub input_size: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    /// Side of every (square) convolution filter.
    pub kernel: usize,
    pub stride: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            input_size: 15,
            conv1_filters: 20,
            conv2_filters: 20,
            kernel: 4,
            stride: 1,
            hidden: 64,
            classes: 2,
        }
    }
}

impl NetConfig {
    fn conv_extent(extent: usize, kernel: usize, stride: usize) -> Result<usize> {
        if stride == 0 || extent < kernel || (extent - kernel) % stride != 0 {
            return Err(Error::Config(format!(
                "kernel {kernel} with stride {stride} does not tile extent {extent}"
            )));
        }
        Ok((extent - kernel) / stride + 1)
    }

    /// Spatial side after layer (b) and after layer (c).
    pub fn conv_extents(&self) -> Result<(usize, usize)> {
        let e1 = Self::conv_extent(self.input_size, self.kernel, self.stride)?;
        let e2 = Self::conv_extent(e1, self.kernel, self.stride)?;
        Ok((e1, e2))
    }

    pub fn flat_features(&self) -> Result<usize> {
        let (_, e2) = self.conv_extents()?;
        Ok(self.conv2_filters * e2 * e2)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("conv1_filters", self.conv1_filters),
            ("conv2_filters", self.conv2_filters),
            ("kernel", self.kernel),
            ("hidden", self.hidden),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        self.conv_extents().map(|_| ())
    }
}

/// Stage of the computation graph, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    Flatten,
    Dense(Activation),
    Softmax,
}

/// Every intermediate value of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub input: Tensor,
    /// Layer (b) output, before any nonlinearity.
    pub conv1: Tensor,
    pub conv2: Tensor,
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetConfig,
    conv1: ConvLayer,
    conv2: ConvLayer,
    hidden: DenseLayer,
    output: DenseLayer,
}

fn glorot_fill(rng: &mut impl Rng, t: &mut Tensor, fan_in: usize, fan_out: usize) {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    t.map_inplace(|_| rng.gen_range(-s..s));
}

impl Network {
    /// All-zero network: every filter, weight and bias is 0.
    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let k = config.kernel;
        Ok(Self {
            conv1: ConvLayer::new(config.conv1_filters, 1, k, k, config.stride)?,
            conv2: ConvLayer::new(config.conv2_filters, config.conv1_filters, k, k, config.stride)?,
            hidden: DenseLayer::new(config.hidden, config.flat_features()?, Activation::Relu)?,
            output: DenseLayer::new(config.classes, config.hidden, Activation::Linear)?,
            config,
        })
    }

    /// Weights drawn from `uniform(-s, s)`, `s = sqrt(6 / (fan_in + fan_out))`;
    /// biases zero. Fully determined by `seed`.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        let mut rng = stream(seed, Stream::Init);
        let kk = config.kernel * config.kernel;
        glorot_fill(
            &mut rng,
            net.conv1.filters_mut(),
            kk,
            config.conv1_filters * kk,
        );
        glorot_fill(
            &mut rng,
            net.conv2.filters_mut(),
            config.conv1_filters * kk,
            config.conv2_filters * kk,
        );
        let flat = config.flat_features()?;
        glorot_fill(&mut rng, net.hidden.weights_mut(), flat, config.hidden);
        glorot_fill(
            &mut rng,
            net.output.weights_mut(),
            config.hidden,
            config.classes,
        );
        Ok(net)
    }

    /// Reassembles a network from its four layers, checking that they chain.
    pub fn from_layers(
        conv1: ConvLayer,
        conv2: ConvLayer,
        hidden: DenseLayer,
        output: DenseLayer,
        input_size: usize,
    ) -> Result<Self> {
        let (k, _) = conv1.kernel();
        let config = NetConfig {
            input_size,
            conv1_filters: conv1.num_filters(),
            conv2_filters: conv2.num_filters(),
            kernel: k,
            stride: conv1.stride(),
            hidden: hidden.out_units(),
            classes: output.out_units(),
        };
        config.validate()?;
        let expected = Self::zeros(config)?;
        let shapes_match = conv1.filters().shape() == expected.conv1.filters().shape()
            && conv2.filters().shape() == expected.conv2.filters().shape()
            && conv2.stride() == config.stride
            && hidden.weights().shape() == expected.hidden.weights().shape()
            && output.weights().shape() == expected.output.weights().shape()
            && hidden.activation() == Activation::Relu
            && output.activation() == Activation::Linear;
        if !shapes_match {
            return Err(Error::Format(format!(
                "layers do not form the crater network chain for {config:?}"
            )));
        }
        Ok(Self {
            config,
            conv1,
            conv2,
            hidden,
            output,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn conv1(&self) -> &ConvLayer {
        &self.conv1
    }

    pub fn conv2(&self) -> &ConvLayer {
        &self.conv2
    }

    pub fn hidden(&self) -> &DenseLayer {
        &self.hidden
    }

    pub fn output(&self) -> &DenseLayer {
        &self.output
    }

    pub fn conv1_mut(&mut self) -> &mut ConvLayer {
        &mut self.conv1
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [1, self.config.input_size, self.config.input_size]
    }

    pub fn layer_kinds(&self) -> Vec<LayerKind> {
        vec![
            LayerKind::Conv,
            LayerKind::Conv,
            LayerKind::Flatten,
            LayerKind::Dense(self.hidden.activation()),
            LayerKind::Dense(self.output.activation()),
            LayerKind::Softmax,
        ]
    }

    /// Shapes flowing between stages: input, (b), (c), flattened, (d), (e).
    pub fn shape_chain(&self) -> Result<Vec<Vec<usize>>> {
        let input = self.input_shape();
        let b = self.conv1.output_shape(&input)?;
        let c = self.conv2.output_shape(&b)?;
        Ok(vec![
            input.to_vec(),
            b.to_vec(),
            c.to_vec(),
            vec![c.iter().product()],
            vec![self.hidden.out_units()],
            vec![self.output.out_units()],
        ])
    }

    fn check_patch(&self, patch: &Tensor) -> Result<()> {
        if patch.shape() != self.input_shape() {
            return Err(Error::shape(format!(
                "network expects a {:?} patch, got {:?}",
                self.input_shape(),
                patch.shape()
            )));
        }
        Ok(())
    }

    pub fn forward_pass(&self, patch: &Tensor) -> Result<ForwardPass> {
        self.check_patch(patch)?;
        let conv1 = self.conv1.forward(patch)?;
        let conv2 = self.conv2.forward(&conv1)?;
        let hidden = self.hidden.forward(conv2.data())?;
        let logits = self.output.forward(&hidden)?;
        let probs = softmax(&logits)?;
        Ok(ForwardPass {
            input: patch.clone(),
            conv1,
            conv2,
            hidden,
            logits,
            probs,
        })
    }

    /// Class probabilities for one patch.
    pub fn forward(&self, patch: &Tensor) -> Result<Vec<f64>> {
        Ok(self.forward_pass(patch)?.probs)
    }

    /// Layer (b) output for `patch`, before any nonlinearity.
    pub fn first_layer_response(&self, patch: &Tensor) -> Result<Tensor> {
        self.check_patch(patch)?;
        self.conv1.forward(patch)
    }

    /// Backpropagates `dL/dlogits` through the whole network, accumulating
    /// parameter gradients. Returns `dL/dinput` when `want_input_grad` is set.
    pub fn backward_logits(
        &mut self,
        pass: &ForwardPass,
        grad_logits: &[f64],
        want_input_grad: bool,
    ) -> Result<Option<Tensor>> {
        let g_hidden = self
            .output
            .backward(&pass.hidden, &pass.logits, grad_logits)?;
        let g_flat = self
            .hidden
            .backward(pass.conv2.data(), &pass.hidden, &g_hidden)?;
        let g_conv2 = Tensor::from_vec(pass.conv2.shape(), g_flat)?;
        let g_conv1 = self.conv2.backward(&pass.conv1, &g_conv2)?;
        if want_input_grad {
            Ok(Some(self.conv1.backward(&pass.input, &g_conv1)?))
        } else {
            self.conv1.backward_params(&pass.input, &g_conv1)?;
            Ok(None)
        }
    }

    /// Cross-entropy backward step for one labelled example; returns the loss.
    pub fn backward(&mut self, pass: &ForwardPass, label: usize) -> Result<f64> {
        let ce = cross_entropy(&pass.probs, label)?;
        self.backward_logits(pass, &ce.grad_logits, false)?;
        Ok(ce.loss)
    }

    /// Forward, loss and backward for one example; returns `(loss, probs)`.
    pub fn accumulate_example(&mut self, patch: &Tensor, label: usize) -> Result<(f64, Vec<f64>)> {
        let pass = self.forward_pass(patch)?;
        let loss = self.backward(&pass, label)?;
        Ok((loss, pass.probs))
    }

    pub fn zero_grad(&mut self) {
        self.conv1.zero_grad();
        self.conv2.zero_grad();
        self.hidden.zero_grad();
        self.output.zero_grad();
    }

    /// `(name, parameter, gradient accumulator)` for every parameter tensor.
    pub fn params_and_grads_mut(&mut self) -> Vec<(String, &mut Tensor, &mut Tensor)> {
        let mut out = Vec::with_capacity(8);
        let layers: [(&str, [(&mut Tensor, &mut Tensor); 2]); 4] = [
            ("conv1", self.conv1.params_and_grads_mut()),
            ("conv2", self.conv2.params_and_grads_mut()),
            ("hidden", self.hidden.params_and_grads_mut()),
            ("output", self.output.params_and_grads_mut()),
        ];
        for (layer, [(w, gw), (b, gb)]) in layers {
            out.push((format!("{layer}.weights"), w, gw));
            out.push((format!("{layer}.biases"), b, gb));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.conv1.filters().len()
            + self.conv1.biases().len()
            + self.conv2.filters().len()
            + self.conv2.biases().len()
            + self.hidden.weights().len()
            + self.hidden.biases().len()
            + self.output.weights().len()
            + self.output.biases().len()
    }

    /// All parameters, concatenated in layer order.
    pub fn flat_params(&self) -> Vec<f64> {
        [
            self.conv1.filters(),
            self.conv1.biases(),
            self.conv2.filters(),
            self.conv2.biases(),
            self.hidden.weights(),
            self.hidden.biases(),
            self.output.weights(),
            self.output.biases(),
        ]
        .iter()
        .flat_map(|t| t.data().iter().copied())
        .collect()
    }
}
