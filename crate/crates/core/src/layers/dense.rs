use crate::error::{Error, Result};
use crate::tensor::{axpy, dot, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

/// Fully connected layer: `z_u = bias_u + sum_i weights[u, i] * x_i`, followed
/// by `max(0, z)` for [`Activation::Relu`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Tensor,
    biases: Tensor,
    activation: Activation,
    grad_weights: Tensor,
    grad_biases: Tensor,
}

impl DenseLayer {
    pub fn new(out_units: usize, in_units: usize, activation: Activation) -> Result<Self> {
        Self::from_params(
            Tensor::zeros(&[out_units, in_units])?,
            Tensor::zeros(&[out_units])?,
            activation,
        )
    }

    pub fn from_params(weights: Tensor, biases: Tensor, activation: Activation) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::shape(format!(
                "dense weights must be [out, in], got {:?}",
                weights.shape()
            )));
        }
        if biases.shape() != [weights.shape()[0]] {
            return Err(Error::shape(format!(
                "dense biases {:?} do not match {} units",
                biases.shape(),
                weights.shape()[0]
            )));
        }
        Ok(Self {
            grad_weights: Tensor::zeros(weights.shape())?,
            grad_biases: Tensor::zeros(biases.shape())?,
            weights,
            biases,
            activation,
        })
    }

    pub fn out_units(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_units(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn biases(&self) -> &Tensor {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut Tensor {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut Tensor {
        &mut self.biases
    }

    pub fn grad_weights(&self) -> &Tensor {
        &self.grad_weights
    }

    pub fn grad_biases(&self) -> &Tensor {
        &self.grad_biases
    }

    pub(crate) fn params_and_grads_mut(&mut self) -> [(&mut Tensor, &mut Tensor); 2] {
        [
            (&mut self.weights, &mut self.grad_weights),
            (&mut self.biases, &mut self.grad_biases),
        ]
    }

    pub fn zero_grad(&mut self) {
        self.grad_weights.fill(0.0);
        self.grad_biases.fill(0.0);
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_units() {
            return Err(Error::shape(format!(
                "dense layer expects {} inputs, got {}",
                self.in_units(),
                x.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let n = self.in_units();
        let out = self
            .weights
            .data()
            .chunks_exact(n)
            .zip(self.biases.data())
            .map(|(row, &b)| {
                let z = b + dot(row, x);
                match self.activation {
                    Activation::Relu => z.max(0.0),
                    Activation::Linear => z,
                }
            })
            .collect();
        Ok(out)
    }

    /// Accumulates `dL/dweights` and `dL/dbiases` and returns `dL/dx`.
    ///
    /// `output` is the value [`DenseLayer::forward`] returned for `x`. For ReLU
    /// layers it supplies the gate: units whose output is 0 (pre-activation
    /// `<= 0`) pass no gradient.
    pub fn backward(&mut self, x: &[f64], output: &[f64], grad_out: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let m = self.out_units();
        if output.len() != m || grad_out.len() != m {
            return Err(Error::shape(format!(
                "dense layer has {m} units, got output {} and grad_out {}",
                output.len(),
                grad_out.len()
            )));
        }
        let n = self.in_units();
        let mut grad_in = vec![0.0; n];
        for u in 0..m {
            let g = match self.activation {
                Activation::Relu if output[u] <= 0.0 => continue,
                _ => grad_out[u],
            };
            if g == 0.0 {
                continue;
            }
            self.grad_biases[u] += g;
            axpy(
                &mut self.grad_weights.data_mut()[u * n..(u + 1) * n],
                g,
                x,
            );
            axpy(&mut grad_in, g, &self.weights.data()[u * n..(u + 1) * n]);
        }
        Ok(grad_in)
    }
}
