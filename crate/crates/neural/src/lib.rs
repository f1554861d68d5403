//! Minimal reverse-mode network core for spectral target recognition.
//!
//! Every layer caches what it needs during `forward` and returns the input
//! gradient from `backward`, accumulating parameter gradients on the way.
//! Layers are generic over [`Scalar`]: training runs in `f32`, gradient
//! verification in `f64`.

pub mod adam;
pub mod cfa;
pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod resnet;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use cfa::{Cfa, CfaConfig};
pub use error::{NeuralError, Result};
pub use layers::{Layer, ParamKind};
pub use network::{InputRepr, Network, NetworkConfig};
pub use resnet::{ResNet1d, ResNetConfig};
pub use tensor::Tensor;

use hrrp_core::Real;

/// Scalar type of the network core with a matching GEMM kernel.
pub trait Scalar: Real {
    /// `c ← alpha·op(a)·op(b) + beta·c` for row-major `op(a)`: `m×k`,
    /// `op(b)`: `k×n`, `c`: `m×n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        trans_a: bool,
        b: &[Self],
        trans_b: bool,
        beta: Self,
        c: &mut [Self],
    );
}

macro_rules! impl_scalar {
    ($t:ty, $kernel:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                trans_a: bool,
                b: &[Self],
                trans_b: bool,
                beta: Self,
                c: &mut [Self],
            ) {
                assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too short");
                let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
                let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
                // SAFETY: the strides above address exactly the m·k, k·n and
                // m·n leading elements, whose presence is asserted.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Network32 = Network<f32>;
pub type Network64 = Network<f64>;
pub type Cfa32 = Cfa<f32>;
pub type ResNet1d32 = ResNet1d<f32>;
