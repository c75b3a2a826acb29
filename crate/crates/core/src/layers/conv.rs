//! Valid (unpadded) 2-D convolution over `[C, H, W]` inputs.
//!
//! Windows are unrolled into a column matrix (`im2col`) so the forward pass
//! and both gradient products are single matrix multiplications:
//!
//! ```text
//! cols[(c,a,b), (i,j)] = input[c, i*s + a, j*s + b]
//! out   = filters[K, C*fh*fw] . cols + bias
//! dF   += grad_out . cols^T
//! dcols = filters^T . grad_out      (scattered back by col2im)
//! ```

use crate::error::{Error, Result};
use crate::linalg::gemm;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    filters: Tensor,
    biases: Tensor,
    stride: usize,
    grad_filters: Tensor,
    grad_biases: Tensor,
}

impl ConvLayer {
    /// Zero-initialized layer with `num_filters` filters of `in_channels x fh x fw`.
    pub fn new(
        num_filters: usize,
        in_channels: usize,
        fh: usize,
        fw: usize,
        stride: usize,
    ) -> Result<Self> {
        let filters = Tensor::zeros(&[num_filters, in_channels, fh, fw])?;
        let biases = Tensor::zeros(&[num_filters])?;
        Self::from_params(filters, biases, stride)
    }

    pub fn from_params(filters: Tensor, biases: Tensor, stride: usize) -> Result<Self> {
        if filters.shape().len() != 4 {
            return Err(Error::shape(format!(
                "conv filters must be [K, C, fh, fw], got {:?}",
                filters.shape()
            )));
        }
        if biases.shape() != [filters.shape()[0]] {
            return Err(Error::shape(format!(
                "conv biases {:?} do not match {} filters",
                biases.shape(),
                filters.shape()[0]
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidShape("conv stride must be positive".into()));
        }
        Ok(Self {
            grad_filters: Tensor::zeros(filters.shape())?,
            grad_biases: Tensor::zeros(biases.shape())?,
            filters,
            biases,
            stride,
        })
    }

    pub fn num_filters(&self) -> usize {
        self.filters.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.filters.shape()[1]
    }

    /// `(fh, fw)`
    pub fn kernel(&self) -> (usize, usize) {
        (self.filters.shape()[2], self.filters.shape()[3])
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn filters(&self) -> &Tensor {
        &self.filters
    }

    pub fn biases(&self) -> &Tensor {
        &self.biases
    }

    pub fn filters_mut(&mut self) -> &mut Tensor {
        &mut self.filters
    }

    pub fn biases_mut(&mut self) -> &mut Tensor {
        &mut self.biases
    }

    pub fn grad_filters(&self) -> &Tensor {
        &self.grad_filters
    }

    pub fn grad_biases(&self) -> &Tensor {
        &self.grad_biases
    }

    pub(crate) fn params_and_grads_mut(&mut self) -> [(&mut Tensor, &mut Tensor); 2] {
        [
            (&mut self.filters, &mut self.grad_filters),
            (&mut self.biases, &mut self.grad_biases),
        ]
    }

    pub fn zero_grad(&mut self) {
        self.grad_filters.fill(0.0);
        self.grad_biases.fill(0.0);
    }

    /// Output spatial extent for an input of `extent` along one axis.
    pub fn output_extent(&self, extent: usize, filter: usize) -> Result<usize> {
        if extent < filter {
            return Err(Error::shape(format!(
                "input extent {extent} is smaller than filter extent {filter}"
            )));
        }
        if (extent - filter) % self.stride != 0 {
            return Err(Error::shape(format!(
                "stride {} does not tile extent {extent} with filter {filter}",
                self.stride
            )));
        }
        Ok((extent - filter) / self.stride + 1)
    }

    /// Output shape `[K, H', W']` for an input of shape `[C, H, W]`.
    pub fn output_shape(&self, input_shape: &[usize]) -> Result<[usize; 3]> {
        let [c, h, w] = match *input_shape {
            [c, h, w] => [c, h, w],
            _ => {
                return Err(Error::shape(format!(
                    "conv input must be [C, H, W], got {input_shape:?}"
                )))
            }
        };
        if c != self.in_channels() {
            return Err(Error::shape(format!(
                "conv expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        let (fh, fw) = self.kernel();
        Ok([
            self.num_filters(),
            self.output_extent(h, fh)?,
            self.output_extent(w, fw)?,
        ])
    }

    fn im2col(&self, input: &Tensor, out_h: usize, out_w: usize) -> Vec<f64> {
        let [c_n, h_n, w_n] = [input.shape()[0], input.shape()[1], input.shape()[2]];
        let (fh, fw) = self.kernel();
        let s = self.stride;
        let p_n = out_h * out_w;
        let src = input.data();
        let mut cols = vec![0.0; c_n * fh * fw * p_n];
        let mut row = 0;
        for c in 0..c_n {
            let plane = &src[c * h_n * w_n..(c + 1) * h_n * w_n];
            for a in 0..fh {
                for b in 0..fw {
                    let dst = &mut cols[row * p_n..(row + 1) * p_n];
                    for i in 0..out_h {
                        let src_row = &plane[(i * s + a) * w_n..];
                        let dst_row = &mut dst[i * out_w..(i + 1) * out_w];
                        if s == 1 {
                            dst_row.copy_from_slice(&src_row[b..b + out_w]);
                        } else {
                            for (j, d) in dst_row.iter_mut().enumerate() {
                                *d = src_row[j * s + b];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64], input_shape: &[usize], out_h: usize, out_w: usize) -> Tensor {
        let [c_n, h_n, w_n] = [input_shape[0], input_shape[1], input_shape[2]];
        let (fh, fw) = self.kernel();
        let s = self.stride;
        let p_n = out_h * out_w;
        let mut grad = vec![0.0; c_n * h_n * w_n];
        let mut row = 0;
        for c in 0..c_n {
            let plane = &mut grad[c * h_n * w_n..(c + 1) * h_n * w_n];
            for a in 0..fh {
                for b in 0..fw {
                    let src = &cols[row * p_n..(row + 1) * p_n];
                    for i in 0..out_h {
                        let base = (i * s + a) * w_n + b;
                        for j in 0..out_w {
                            plane[base + j * s] += src[i * out_w + j];
                        }
                    }
                    row += 1;
                }
            }
        }
        Tensor::from_vec(input_shape, grad).expect("col2im preserves the input shape")
    }

    /// `out[k,i,j] = bias[k] + sum_{c,a,b} filter[k,c,a,b] * input[c, i*s+a, j*s+b]`
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let out_shape = self.output_shape(input.shape())?;
        let [k_n, out_h, out_w] = out_shape;
        let p_n = out_h * out_w;
        let cols = self.im2col(input, out_h, out_w);
        let r_n = cols.len() / p_n;
        let mut out = vec![0.0; k_n * p_n];
        for (k, chunk) in out.chunks_exact_mut(p_n).enumerate() {
            chunk.fill(self.biases[k]);
        }
        gemm(k_n, r_n, p_n, self.filters.data(), false, &cols, false, 1.0, &mut out);
        Tensor::from_vec(&out_shape, out)
    }

    fn check_grad_out(&self, input: &Tensor, grad_out: &Tensor) -> Result<[usize; 3]> {
        let out_shape = self.output_shape(input.shape())?;
        if grad_out.shape() != out_shape {
            return Err(Error::shape(format!(
                "conv grad_out {:?} does not match output shape {out_shape:?}",
                grad_out.shape()
            )));
        }
        Ok(out_shape)
    }

    fn accumulate(&mut self, cols: &[f64], grad_out: &Tensor, p_n: usize) {
        let k_n = self.num_filters();
        let r_n = cols.len() / p_n;
        gemm(
            k_n,
            p_n,
            r_n,
            grad_out.data(),
            false,
            cols,
            true,
            1.0,
            self.grad_filters.data_mut(),
        );
        for (k, g) in grad_out.data().chunks_exact(p_n).enumerate() {
            self.grad_biases[k] += g.iter().sum::<f64>();
        }
    }

    /// Accumulates filter and bias gradients and returns `dL/dinput`.
    pub fn backward(&mut self, input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let [k_n, out_h, out_w] = self.check_grad_out(input, grad_out)?;
        let p_n = out_h * out_w;
        let cols = self.im2col(input, out_h, out_w);
        self.accumulate(&cols, grad_out, p_n);
        let r_n = cols.len() / p_n;
        let mut dcols = cols;
        gemm(
            r_n,
            k_n,
            p_n,
            self.filters.data(),
            true,
            grad_out.data(),
            false,
            0.0,
            &mut dcols,
        );
        Ok(self.col2im(&dcols, input.shape(), out_h, out_w))
    }

    /// Like [`ConvLayer::backward`] but skips the input gradient.
    pub fn backward_params(&mut self, input: &Tensor, grad_out: &Tensor) -> Result<()> {
        let [_, out_h, out_w] = self.check_grad_out(input, grad_out)?;
        let cols = self.im2col(input, out_h, out_w);
        self.accumulate(&cols, grad_out, out_h * out_w);
        Ok(())
    }
}
