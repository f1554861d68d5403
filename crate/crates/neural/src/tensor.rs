use crate::error::{shape_err, NeuralError, Result};
use crate::Scalar;

/// Dense row-major tensor. `grad` is allocated only for trainable
/// parameters and stays empty on activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Scalar> Default for Tensor<T> {
    fn default() -> Self {
        Self::zeros(&[0])
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NeuralError::Argument(format!("shape {shape:?} needs {n} elements, got {}", data.len())));
        }
        Ok(Self { shape: shape.to_vec(), data, grad: Vec::new() })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![T::zero(); shape.iter().product()], grad: Vec::new() }
    }

    /// Trainable tensor with a zeroed gradient buffer.
    pub fn param(shape: &[usize], data: Vec<T>) -> Self {
        let mut t = Self::new(shape, data).expect("parameter shape matches data");
        t.grad = vec![T::zero(); t.data.len()];
        t
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&v| T::of(v)).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.to_f64_lossy()).collect()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(shape_err("reshape", shape, &self.shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Errors unless the tensor has exactly `expected` shape; `0` entries
    /// act as wildcards.
    pub fn expect_shape(&self, op: &'static str, expected: &[usize]) -> Result<()> {
        let ok = self.shape.len() == expected.len() && self.shape.iter().zip(expected).all(|(&s, &e)| e == 0 || s == e);
        if ok {
            Ok(())
        } else {
            Err(shape_err(op, expected, &self.shape))
        }
    }

    /// Same shape as `self` with new contents.
    pub fn with_data(&self, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self { shape: self.shape.clone(), data, grad: Vec::new() }
    }
}
