//! Dense row-major `f64` tensor.
//!
//! Just enough array machinery for the network: construction, elementwise
//! arithmetic, reshaping and a dot product. There is no broadcasting and no
//! strided view; layers index the flat buffer directly.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_extents(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::InvalidShape("shape has no extents".into()));
    }
    if let Some(pos) = shape.iter().position(|&e| e == 0) {
        return Err(Error::InvalidShape(format!(
            "extent {pos} of {shape:?} is zero"
        )));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    /// Tensor of `shape` with every element set to `fill`.
    pub fn full(shape: &[usize], fill: f64) -> Result<Self> {
        let len = check_extents(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![fill; len],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len = check_extents(shape)?;
        if len != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {len} elements, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// One-dimensional tensor over `data`.
    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let len = data.len();
        Self::from_vec(&[len], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of `(c, h, w)` in a rank-3 tensor.
    #[inline]
    pub fn offset3(&self, c: usize, h: usize, w: usize) -> usize {
        debug_assert_eq!(self.shape.len(), 3);
        (c * self.shape[1] + h) * self.shape[2] + w
    }

    pub fn at3(&self, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.offset3(c, h, w)]
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        if self.shape.len() != 1 || other.shape.len() != 1 {
            return Err(Error::shape(format!(
                "dot needs vectors, got {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        if self.len() != other.len() {
            return Err(Error::shape(format!(
                "dot of lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(dot(&self.data, &other.data))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_inplace(&mut self, mut f: impl FnMut(f64) -> f64) {
        self.data.iter_mut().for_each(|v| *v = f(*v));
    }

    fn zip_with(&self, other: &Tensor, op: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "{op} of {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|v| v * factor)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "axpy of {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        axpy(&mut self.data, alpha, &other.data);
        Ok(())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn reshape(self, new_shape: &[usize]) -> Result<Tensor> {
        let len = check_extents(new_shape)?;
        if len != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} ({} elements) into {new_shape:?} ({len} elements)",
                self.shape,
                self.data.len()
            )));
        }
        Ok(Tensor {
            shape: new_shape.to_vec(),
            data: self.data,
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        min_max(&self.data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<usize> for Tensor {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for Tensor {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, &x)| *y += alpha * x);
}

pub(crate) fn min_max(data: &[f64]) -> (f64, f64) {
    data.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}
