//! Layer set with hand-written forward/backward passes.
//!
//! Activations are `[batch, channels, length]` unless noted otherwise.

use hrrp_core::{FftPlan, Prng};
use num_complex::Complex;

use crate::error::{shape_err, NeuralError, Result};
use crate::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Updated by the optimizer.
    Trainable,
    /// Persistent state that is not trained (batch-norm running statistics).
    Buffer,
}

pub trait Layer<T: Scalar> {
    fn forward(&mut self, x: &Tensor<T>, train: bool) -> Result<Tensor<T>>;

    /// Accumulates parameter gradients and returns the gradient with respect
    /// to the input of the most recent `forward`.
    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>>;

    fn visit(&self, _f: &mut dyn FnMut(&str, &Tensor<T>, ParamKind)) {}

    fn visit_mut(&mut self, _f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {}
}

pub(crate) fn visit_child<T: Scalar>(
    child: &dyn Layer<T>,
    prefix: &str,
    f: &mut dyn FnMut(&str, &Tensor<T>, ParamKind),
) {
    child.visit(&mut |name, t, k| f(&format!("{prefix}.{name}"), t, k));
}

pub(crate) fn visit_child_mut<T: Scalar>(
    child: &mut dyn Layer<T>,
    prefix: &str,
    f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind),
) {
    child.visit_mut(&mut |name, t, k| f(&format!("{prefix}.{name}"), t, k));
}

/// Number of trainable scalars.
pub fn param_count<T: Scalar>(layer: &dyn Layer<T>) -> usize {
    let mut n = 0;
    layer.visit(&mut |_, t, k| {
        if k == ParamKind::Trainable {
            n += t.numel();
        }
    });
    n
}

pub fn zero_grad<T: Scalar>(layer: &mut dyn Layer<T>) {
    layer.visit_mut(&mut |_, t, _| t.zero_grad());
}

/// Parameter or buffer in precision-neutral form.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
    pub data: Vec<f64>,
}

pub fn export_state<T: Scalar>(layer: &dyn Layer<T>) -> Vec<NamedArray> {
    let mut out = Vec::new();
    layer.visit(&mut |name, t, kind| {
        out.push(NamedArray { name: name.to_string(), shape: t.shape.clone(), kind, data: t.to_f64() })
    });
    out
}

/// Loads every parameter and buffer by name; names and shapes must match
/// exactly.
pub fn import_state<T: Scalar>(layer: &mut dyn Layer<T>, state: &[NamedArray]) -> Result<()> {
    let mut seen = 0;
    let mut err = None;
    layer.visit_mut(&mut |name, t, _| {
        if err.is_some() {
            return;
        }
        match state.iter().find(|a| a.name == name) {
            Some(a) if a.shape == t.shape => {
                t.data.iter_mut().zip(&a.data).for_each(|(d, &v)| *d = T::of(v));
                seen += 1;
            }
            Some(a) => err = Some(shape_err("import_state", &t.shape, &a.shape)),
            None => err = Some(NeuralError::Checkpoint(format!("missing tensor {name}"))),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    if seen != state.len() {
        return Err(NeuralError::Checkpoint(format!("state has {} tensors but the model expects {seen}", state.len())));
    }
    Ok(())
}

/// Kaiming-uniform draw, bound `sqrt(6/fan_in)`.
pub fn kaiming_uniform<T: Scalar>(n: usize, fan_in: usize, prng: &mut Prng) -> Vec<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| T::of((2.0 * prng.uniform() - 1.0) * bound)).collect()
}

fn dims3<T: Scalar>(x: &Tensor<T>, op: &'static str) -> Result<(usize, usize, usize)> {
    match x.shape[..] {
        [b, c, l] => Ok((b, c, l)),
        _ => Err(shape_err(op, &[0, 0, 0], &x.shape)),
    }
}

#[derive(Debug, Clone)]
pub struct Conv1d<T> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
    cols: Vec<T>,
    in_shape: Vec<usize>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
        prng: &mut Prng,
    ) -> Self {
        let fan_in = in_ch * kernel;
        Self {
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
            weight: Tensor::param(&[out_ch, in_ch, kernel], kaiming_uniform(out_ch * fan_in, fan_in, prng)),
            bias: bias.then(|| Tensor::param(&[out_ch], vec![T::zero(); out_ch])),
            cols: Vec::new(),
            in_shape: Vec::new(),
        }
    }

    pub fn out_len(&self, len: usize) -> Option<usize> {
        (len + 2 * self.padding).checked_sub(self.kernel).map(|v| v / self.stride + 1)
    }
}

impl<T: Scalar> Layer<T> for Conv1d<T> {
    fn forward(&mut self, x: &Tensor<T>, _train: bool) -> Result<Tensor<T>> {
        let (b, c, l) = dims3(x, "conv1d")?;
        if c != self.in_ch {
            return Err(shape_err("conv1d", &[b, self.in_ch, l], &x.shape));
        }
        let lout = self.out_len(l).ok_or_else(|| shape_err("conv1d", &[b, c, self.kernel], &x.shape))?;
        let ck = c * self.kernel;
        self.cols = vec![T::zero(); b * ck * lout];
        for bi in 0..b {
            let xb = &x.data[bi * c * l..(bi + 1) * c * l];
            let col = &mut self.cols[bi * ck * lout..(bi + 1) * ck * lout];
            for ci in 0..c {
                for kk in 0..self.kernel {
                    let row = &mut col[(ci * self.kernel + kk) * lout..][..lout];
                    for (t, r) in row.iter_mut().enumerate() {
                        let pos = (t * self.stride + kk) as isize - self.padding as isize;
                        if pos >= 0 && (pos as usize) < l {
                            *r = xb[ci * l + pos as usize];
                        }
                    }
                }
            }
        }
        let mut y = Tensor::zeros(&[b, self.out_ch, lout]);
        for bi in 0..b {
            let out = &mut y.data[bi * self.out_ch * lout..(bi + 1) * self.out_ch * lout];
            T::gemm(
                self.out_ch,
                ck,
                lout,
                T::one(),
                &self.weight.data,
                false,
                &self.cols[bi * ck * lout..],
                false,
                T::zero(),
                out,
            );
            if let Some(bias) = &self.bias {
                for (o, row) in out.chunks_mut(lout).enumerate() {
                    row.iter_mut().for_each(|v| *v += bias.data[o]);
                }
            }
        }
        self.in_shape = x.shape.clone();
        Ok(y)
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, c, l) = (self.in_shape[0], self.in_shape[1], self.in_shape[2]);
        let lout = self.out_len(l).expect("validated in forward");
        gy.expect_shape("conv1d backward", &[b, self.out_ch, lout])?;
        let ck = c * self.kernel;
        let mut gx = Tensor::zeros(&self.in_shape);
        let mut gcol = vec![T::zero(); ck * lout];
        for bi in 0..b {
            let g = &gy.data[bi * self.out_ch * lout..(bi + 1) * self.out_ch * lout];
            let col = &self.cols[bi * ck * lout..(bi + 1) * ck * lout];
            T::gemm(self.out_ch, lout, ck, T::one(), g, false, col, true, T::one(), &mut self.weight.grad);
            if let Some(bias) = &mut self.bias {
                for (o, row) in g.chunks(lout).enumerate() {
                    bias.grad[o] += row.iter().copied().sum::<T>();
                }
            }
            T::gemm(ck, self.out_ch, lout, T::one(), &self.weight.data, true, g, false, T::zero(), &mut gcol);
            let gxb = &mut gx.data[bi * c * l..(bi + 1) * c * l];
            for ci in 0..c {
                for kk in 0..self.kernel {
                    let row = &gcol[(ci * self.kernel + kk) * lout..][..lout];
                    for (t, &r) in row.iter().enumerate() {
                        let pos = (t * self.stride + kk) as isize - self.padding as isize;
                        if pos >= 0 && (pos as usize) < l {
                            gxb[ci * l + pos as usize] += r;
                        }
                    }
                }
            }
        }
        Ok(gx)
    }

    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor<T>, ParamKind)) {
        f("weight", &self.weight, ParamKind::Trainable);
        if let Some(b) = &self.bias {
            f("bias", b, ParamKind::Trainable);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {
        f("weight", &mut self.weight, ParamKind::Trainable);
        if let Some(b) = &mut self.bias {
            f("bias", b, ParamKind::Trainable);
        }
    }
}

/// Fully connected layer on `[batch, features]`.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    input: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(inputs: usize, outputs: usize, prng: &mut Prng) -> Self {
        Self {
            weight: Tensor::param(&[outputs, inputs], kaiming_uniform(outputs * inputs, inputs, prng)),
            bias: Tensor::param(&[outputs], vec![T::zero(); outputs]),
            input: Tensor::zeros(&[0]),
        }
    }

    pub fn zeroed(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Tensor::param(&[outputs, inputs], vec![T::zero(); outputs * inputs]),
            bias: Tensor::param(&[outputs], vec![T::zero(); outputs]),
            input: Tensor::zeros(&[0]),
        }
    }

    fn dims(&self) -> (usize, usize) {
        (self.weight.shape[1], self.weight.shape[0])
    }
}

impl<T: Scalar> Layer<T> for Linear<T> {
    fn forward(&mut self, x: &Tensor<T>, _train: bool) -> Result<Tensor<T>> {
        let (inp, out) = self.dims();
        x.expect_shape("linear", &[0, inp])?;
        let b = x.shape[0];
        let mut y = Tensor::zeros(&[b, out]);
        T::gemm(b, inp, out, T::one(), &x.data, false, &self.weight.data, true, T::zero(), &mut y.data);
        for row in y.data.chunks_mut(out) {
            row.iter_mut().zip(&self.bias.data).for_each(|(v, b)| *v += *b);
        }
        self.input = x.clone();
        Ok(y)
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let (inp, out) = self.dims();
        let b = self.input.shape[0];
        gy.expect_shape("linear backward", &[b, out])?;
        T::gemm(out, b, inp, T::one(), &gy.data, true, &self.input.data, false, T::one(), &mut self.weight.grad);
        for row in gy.data.chunks(out) {
            self.bias.grad.iter_mut().zip(row).for_each(|(g, v)| *g += *v);
        }
        let mut gx = Tensor::zeros(&[b, inp]);
        T::gemm(b, out, inp, T::one(), &gy.data, false, &self.weight.data, false, T::zero(), &mut gx.data);
        Ok(gx)
    }

    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor<T>, ParamKind)) {
        f("weight", &self.weight, ParamKind::Trainable);
        f("bias", &self.bias, ParamKind::Trainable);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {
        f("weight", &mut self.weight, ParamKind::Trainable);
        f("bias", &mut self.bias, ParamKind::Trainable);
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Vec<bool>,
    shape: Vec<usize>,
}

impl<T: Scalar> Layer<T> for Relu {
    fn forward(&mut self, x: &Tensor<T>, _train: bool) -> Result<Tensor<T>> {
        self.mask = x.data.iter().map(|&v| v > T::zero()).collect();
        self.shape = x.shape.clone();
        Ok(x.with_data(x.data.iter().map(|&v| v.max(T::zero())).collect()))
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        gy.expect_shape("relu backward", &self.shape)?;
        Ok(gy.with_data(gy.data.iter().zip(&self.mask).map(|(&g, &m)| if m { g } else { T::zero() }).collect()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sigmoid<T: Scalar> {
    out: Tensor<T>,
}

pub fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

impl<T: Scalar> Layer<T> for Sigmoid<T> {
    fn forward(&mut self, x: &Tensor<T>, _train: bool) -> Result<Tensor<T>> {
        self.out = x.with_data(x.data.iter().map(|&v| sigmoid(v)).collect());
        Ok(self.out.clone())
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        gy.expect_shape("sigmoid backward", &self.out.shape)?;
        Ok(gy.with_data(gy.data.iter().zip(&self.out.data).map(|(&g, &s)| g * s * (T::one() - s)).collect()))
    }
}

/// Batch normalization over `[batch, channels, length]` or `[batch, channels]`;
/// statistics are taken over batch and length per channel.
#[derive(Debug, Clone)]
pub struct BatchNorm1d<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub eps: f64,
    pub momentum: f64,
    xhat: Vec<T>,
    inv_std: Vec<T>,
    shape: Vec<usize>,
    trained: bool,
}

impl<T: Scalar> BatchNorm1d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::param(&[channels], vec![T::one(); channels]),
            beta: Tensor::param(&[channels], vec![T::zero(); channels]),
            running_mean: Tensor::new(&[channels], vec![T::zero(); channels]).expect("sized"),
            running_var: Tensor::new(&[channels], vec![T::one(); channels]).expect("sized"),
            eps: 1e-5,
            momentum: 0.1,
            xhat: Vec::new(),
            inv_std: Vec::new(),
            shape: Vec::new(),
            trained: false,
        }
    }

    fn layout(&self, x: &Tensor<T>) -> Result<(usize, usize, usize)> {
        let c = self.gamma.numel();
        match x.shape[..] {
            [b, ch] if ch == c => Ok((b, c, 1)),
            [b, ch, l] if ch == c => Ok((b, c, l)),
            _ => Err(shape_err("batch_norm_1d", &[0, c, 0], &x.shape)),
        }
    }
}

impl<T: Scalar> Layer<T> for BatchNorm1d<T> {
    fn forward(&mut self, x: &Tensor<T>, train: bool) -> Result<Tensor<T>> {
        let (b, c, l) = self.layout(x)?;
        let n = b * l;
        let idx = |bi: usize, ci: usize, t: usize| (bi * c + ci) * l + t;
        let mut y = x.with_data(vec![T::zero(); x.numel()]);
        self.xhat = vec![T::zero(); x.numel()];
        self.inv_std = vec![T::zero(); c];
        let eps = T::of(self.eps);
        let mom = T::of(self.momentum);
        for ci in 0..c {
            let (mean, var) = if train {
                let mut s = T::zero();
                for bi in 0..b {
                    for t in 0..l {
                        s += x.data[idx(bi, ci, t)];
                    }
                }
                let mean = s / T::of(n as f64);
                let mut v = T::zero();
                for bi in 0..b {
                    for t in 0..l {
                        let d = x.data[idx(bi, ci, t)] - mean;
                        v += d * d;
                    }
                }
                let var = v / T::of(n as f64);
                let unbiased = if n > 1 { v / T::of((n - 1) as f64) } else { var };
                let rm = &mut self.running_mean.data[ci];
                *rm = (T::one() - mom) * *rm + mom * mean;
                let rv = &mut self.running_var.data[ci];
                *rv = (T::one() - mom) * *rv + mom * unbiased;
                (mean, var)
            } else {
                (self.running_mean.data[ci], self.running_var.data[ci])
            };
            let inv = T::one() / (var + eps).sqrt();
            self.inv_std[ci] = inv;
            for bi in 0..b {
                for t in 0..l {
                    let i = idx(bi, ci, t);
                    let xh = (x.data[i] - mean) * inv;
                    self.xhat[i] = xh;
                    y.data[i] = self.gamma.data[ci] * xh + self.beta.data[ci];
                }
            }
        }
        self.shape = x.shape.clone();
        self.trained = train;
        Ok(y)
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        gy.expect_shape("batch_norm_1d backward", &self.shape)?;
        let c = self.gamma.numel();
        let (b, l) = (self.shape[0], if self.shape.len() == 3 { self.shape[2] } else { 1 });
        let n = T::of((b * l) as f64);
        let idx = |bi: usize, ci: usize, t: usize| (bi * c + ci) * l + t;
        let mut gx = gy.with_data(vec![T::zero(); gy.numel()]);
        for ci in 0..c {
            let (mut sg, mut sgx) = (T::zero(), T::zero());
            for bi in 0..b {
                for t in 0..l {
                    let i = idx(bi, ci, t);
                    sg += gy.data[i];
                    sgx += gy.data[i] * self.xhat[i];
                }
            }
            self.beta.grad[ci] += sg;
            self.gamma.grad[ci] += sgx;
            let k = self.gamma.data[ci] * self.inv_std[ci];
            for bi in 0..b {
                for t in 0..l {
                    let i = idx(bi, ci, t);
                    gx.data[i] =
                        if self.trained { k * (gy.data[i] - sg / n - self.xhat[i] * sgx / n) } else { k * gy.data[i] };
                }
            }
        }
        Ok(gx)
    }

    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor<T>, ParamKind)) {
        f("gamma", &self.gamma, ParamKind::Trainable);
        f("beta", &self.beta, ParamKind::Trainable);
        f("running_mean", &self.running_mean, ParamKind::Buffer);
        f("running_var", &self.running_var, ParamKind::Buffer);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {
        f("gamma", &mut self.gamma, ParamKind::Trainable);
        f("beta", &mut self.beta, ParamKind::Trainable);
        f("running_mean", &mut self.running_mean, ParamKind::Buffer);
        f("running_var", &mut self.running_var, ParamKind::Buffer);
    }
}

/// Maximum over the length axis: `[B, C, L] → [B, C]`.
#[derive(Debug, Clone, Default)]
pub struct MaxPoolLen {
    argmax: Vec<usize>,
    shape: Vec<usize>,
}

impl<T: Scalar> Layer<T> for MaxPoolLen {
    fn forward(&mut self, x: &Tensor<T>, _train: bool) -> Result<Tensor<T>> {
        let (b, c, l) = dims3(x, "max_pool_len")?;
        if l == 0 {
            return Err(shape_err("max_pool_len", &[b, c, 1], &x.shape));
        }
        self.argmax.clear();
        let mut y = Tensor::zeros(&[b, c]);
        for (row, out) in x.data.chunks(l).zip(y.data.iter_mut()) {
            // First maximum wins on ties.
            let (i, &m) =
                row.iter().enumerate().fold((0, &row[0]), |best, cur| if *cur.1 > *best.1 { cur } else { best });
            self.argmax.push(i);
            *out = m;
        }
        self.shape = x.shape.clone();
        Ok(y)
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        gy.expect_shape("max_pool_len backward", &self.shape[..2])?;
        let l = self.shape[2];
        let mut gx = Tensor::zeros(&self.shape);
        for (r, (&g, &i)) in gy.data.iter().zip(&self.argmax).enumerate() {
            gx.data[r * l + i] = g;
        }
        Ok(gx)
    }
}

/// Mean over the length axis: `[B, C, L] → [B, C]`.
#[derive(Debug, Clone, Default)]
pub struct AvgPoolLen {
    shape: Vec<usize>,
}

/// Global average pooling is the mean over the full length.
pub type GlobalAvgPool = AvgPoolLen;

impl<T: Scalar> Layer<T> for AvgPoolLen {
    fn forward(&mut self, x: &Tensor<T>, _train: bool) -> Result<Tensor<T>> {
        let (b, c, l) = dims3(x, "avg_pool_len")?;
        if l == 0 {
            return Err(shape_err("avg_pool_len", &[b, c, 1], &x.shape));
        }
        let inv = T::one() / T::of(l as f64);
        let data = x.data.chunks(l).map(|row| row.iter().copied().sum::<T>() * inv).collect();
        self.shape = x.shape.clone();
        Tensor::new(&[b, c], data)
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        gy.expect_shape("avg_pool_len backward", &self.shape[..2])?;
        let l = self.shape[2];
        let inv = T::one() / T::of(l as f64);
        let data = gy.data.iter().flat_map(|&g| std::iter::repeat_n(g * inv, l)).collect();
        Tensor::new(&self.shape, data)
    }
}

/// Per-bin magnitude of stacked real/imaginary planes: `[B, 2, N] → [B, 1, N]`.
#[derive(Debug, Clone, Default)]
pub struct Magnitude<T: Scalar> {
    input: Tensor<T>,
    mag: Vec<T>,
}

impl<T: Scalar> Layer<T> for Magnitude<T> {
    fn forward(&mut self, x: &Tensor<T>, _train: bool) -> Result<Tensor<T>> {
        x.expect_shape("magnitude", &[0, 2, 0])?;
        let (b, n) = (x.shape[0], x.shape[2]);
        let mut mag = Vec::with_capacity(b * n);
        for planes in x.data.chunks(2 * n) {
            let (re, im) = planes.split_at(n);
            mag.extend(re.iter().zip(im).map(|(&r, &i)| r.hypot(i)));
        }
        self.input = x.clone();
        self.mag = mag.clone();
        Tensor::new(&[b, 1, n], mag)
    }

    /// The gradient at exactly zero magnitude is taken as zero.
    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, n) = (self.input.shape[0], self.input.shape[2]);
        gy.expect_shape("magnitude backward", &[b, 1, n])?;
        let mut gx = Tensor::zeros(&self.input.shape);
        for bi in 0..b {
            for k in 0..n {
                let m = self.mag[bi * n + k];
                if m > T::zero() {
                    let g = gy.data[bi * n + k] / m;
                    gx.data[bi * 2 * n + k] = g * self.input.data[bi * 2 * n + k];
                    gx.data[bi * 2 * n + n + k] = g * self.input.data[bi * 2 * n + n + k];
                }
            }
        }
        Ok(gx)
    }
}

/// Unitary inverse DFT on stacked real/imaginary planes, `[B, 2, N]`.
///
/// Output is `x[n] = N^{-1/2}·Σ X[k]·e^{+j2πkn/N}`. The adjoint of a unitary
/// map is its inverse, so the backward pass is the forward DFT scaled by
/// `N^{-1/2}`.
#[derive(Debug, Clone)]
pub struct Ifft<T: Scalar> {
    plan: FftPlan<T>,
    batch: usize,
}

impl<T: Scalar> Ifft<T> {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self { plan: FftPlan::new(n)?, batch: 0 })
    }

    fn apply(&self, x: &Tensor<T>, inverse: bool, op: &'static str) -> Result<Tensor<T>> {
        let n = self.plan.len();
        x.expect_shape(op, &[0, 2, n])?;
        let scale = T::one() / T::of(n as f64).sqrt();
        let mut y = Tensor::zeros(&x.shape);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        for (src, dst) in x.data.chunks(2 * n).zip(y.data.chunks_mut(2 * n)) {
            for (k, z) in buf.iter_mut().enumerate() {
                *z = Complex::new(src[k], src[n + k]);
            }
            if inverse {
                self.plan.inverse_unscaled(&mut buf)?;
            } else {
                self.plan.forward(&mut buf)?;
            }
            for (k, z) in buf.iter().enumerate() {
                dst[k] = z.re * scale;
                dst[n + k] = z.im * scale;
            }
        }
        Ok(y)
    }
}

impl<T: Scalar> Layer<T> for Ifft<T> {
    fn forward(&mut self, x: &Tensor<T>, _train: bool) -> Result<Tensor<T>> {
        self.batch = x.shape.first().copied().unwrap_or(0);
        self.apply(x, true, "ifft")
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        gy.expect_shape("ifft backward", &[self.batch, 2, self.plan.len()])?;
        self.apply(gy, false, "ifft backward")
    }
}

/// Row-wise softmax of `[B, K]` logits.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    logits.expect_shape("softmax", &[0, 0])?;
    let k = logits.shape[1];
    let mut out = logits.clone();
    for row in out.data.chunks_mut(k) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut s = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    Ok(out)
}

/// Mean softmax cross-entropy over the batch and its gradient with respect
/// to the logits, `(p − onehot)/B`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let p = softmax(logits)?;
    let (b, k) = (logits.shape[0], logits.shape[1]);
    if labels.len() != b {
        return Err(shape_err("softmax_cross_entropy labels", &[b], &[labels.len()]));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(NeuralError::Argument(format!("label {bad} out of range for {k} classes")));
    }
    let inv_b = T::one() / T::of(b as f64);
    let mut loss = T::zero();
    let mut grad = p.clone();
    for (bi, &y) in labels.iter().enumerate() {
        // log-sum-exp form keeps the loss finite when p underflows.
        let row = &logits.data[bi * k..(bi + 1) * k];
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
        loss += lse - row[y];
        grad.data[bi * k + y] -= T::one();
    }
    grad.data.iter_mut().for_each(|g| *g *= inv_b);
    Ok((loss * inv_b, grad))
}
