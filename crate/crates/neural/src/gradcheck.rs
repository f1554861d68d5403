//! Finite-difference verification of every backward pass.
//!
//! The scalar probed is `Σ r·y` for a fixed random `r`, so one backward pass
//! with `gy = r` yields the full analytic gradient. Numerical derivatives are
//! central differences taken on an `f64` copy of the layer holding exactly the
//! subject's parameters. In 32-bit mode the analytic side runs in `f32`.
//!
//! Per element the error is `|a − n| / max(|a|, |n|, floor)`, with
//! `floor = 1e-3·max|n|` over the whole check so that entries whose true
//! gradient vanishes are judged on an absolute scale.

use hrrp_core::Prng;

use crate::error::Result;
use crate::layers::{
    export_state, import_state, softmax_cross_entropy, zero_grad, AvgPoolLen, BatchNorm1d, Conv1d, GlobalAvgPool, Ifft,
    Layer, Linear, Magnitude, MaxPoolLen, ParamKind, Relu, Sigmoid,
};
use crate::resnet::BasicBlock;
use crate::{Cfa, CfaConfig, Network, NetworkConfig, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    /// Largest accepted relative error.
    pub fn tolerance(self) -> f64 {
        match self {
            Precision::F32 => 1e-3,
            Precision::F64 => 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Elements probed per parameter tensor (all if the tensor is smaller).
    pub max_per_tensor: usize,
    /// Input elements probed.
    pub max_inputs: usize,
    /// Relative disagreement between step sizes treated as a kink.
    pub kink_tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { eps: 1e-5, max_per_tensor: 24, max_inputs: 48, kink_tolerance: 1e-5, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub name: String,
    pub max_rel_err: f64,
    /// Parameter and input elements compared.
    pub checked: usize,
    /// Where the worst error occurred.
    pub worst: String,
}

impl GradReport {
    pub fn passes(&self, precision: Precision) -> bool {
        self.max_rel_err < precision.tolerance()
    }
}

fn probe_indices(n: usize, count: usize) -> Vec<usize> {
    if n <= count {
        (0..n).collect()
    } else {
        (0..count).map(|i| i * n / count + (n / count) / 2).collect()
    }
}

/// Central difference at step `h`, halved up to three times while `D(h)` and
/// `D(h/2)` disagree. Smooth functions agree to `O(h²)`; a ReLU or max-pool
/// kink inside `[−h, h]` makes them differ, and shrinking the step moves the
/// kink out of the stencil. `scale` is the smallest magnitude disagreements
/// are measured against.
fn stable_difference(h: f64, tol: f64, scale: f64, diff: &mut dyn FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut h = h;
    let mut coarse = diff(h)?;
    for _ in 0..3 {
        let fine = diff(h / 2.0)?;
        if (coarse - fine).abs() <= tol * coarse.abs().max(fine.abs()).max(scale) {
            return Ok(fine);
        }
        h /= 4.0;
        coarse = diff(h)?;
    }
    Ok(coarse)
}

fn projected(layer: &mut dyn Layer<f64>, x: &Tensor<f64>, r: &[f64], train: bool) -> Result<f64> {
    let y = layer.forward(x, train)?;
    Ok(y.data.iter().zip(r).map(|(a, b)| a * b).sum())
}

/// Mutable access to the `target`-th trainable tensor.
fn with_param(layer: &mut dyn Layer<f64>, target: usize, op: &mut dyn FnMut(&mut Tensor<f64>)) {
    let mut i = 0;
    layer.visit_mut(&mut |_, t, kind| {
        if kind == ParamKind::Trainable {
            if i == target {
                op(t);
            }
            i += 1;
        }
    });
}

/// Compares `subject`'s analytic gradients with central differences on
/// `reference`, which is overwritten with `subject`'s parameters first.
pub fn check_layer<S: Scalar>(
    name: &str,
    subject: &mut dyn Layer<S>,
    reference: &mut dyn Layer<f64>,
    x: &Tensor<f64>,
    train: bool,
    opts: &GradCheckOptions,
) -> Result<GradReport> {
    import_state(reference, &export_state(subject))?;
    let xs = Tensor::<S>::from_f64(&x.shape, &x.data)?;
    let x = Tensor::new(&x.shape, xs.to_f64())?;

    let snapshot = export_state(reference);
    let out_len = reference.forward(&x, train)?.numel();
    import_state(reference, &snapshot)?;
    let mut prng = Prng::new(opts.seed, 11);
    let r: Vec<f64> = (0..out_len).map(|_| prng.normal()).collect();

    zero_grad(subject);
    let ys = subject.forward(&xs, train)?;
    let gx = subject.backward(&ys.with_data(r.iter().map(|&v| S::of(v)).collect()))?.to_f64();
    let mut analytic_params: Vec<(String, Vec<f64>)> = Vec::new();
    subject.visit(&mut |n, t, kind| {
        if kind == ParamKind::Trainable {
            analytic_params.push((n.to_string(), t.grad.iter().map(|g| g.to_f64_lossy()).collect()));
        }
    });

    let tol = opts.kink_tolerance;
    let scale = 1e-3
        * analytic_params
            .iter()
            .flat_map(|(_, g)| g.iter())
            .chain(&gx)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
    let mut pairs: Vec<(String, f64, f64)> = Vec::new();
    for (ti, (pname, grads)) in analytic_params.iter().enumerate() {
        for i in probe_indices(grads.len(), opts.max_per_tensor) {
            let mut orig = 0.0;
            with_param(reference, ti, &mut |t| orig = t.data[i]);
            let numeric = stable_difference(opts.eps, tol, scale, &mut |h| {
                with_param(reference, ti, &mut |t| t.data[i] = orig + h);
                let up = projected(reference, &x, &r, train);
                with_param(reference, ti, &mut |t| t.data[i] = orig - h);
                let down = projected(reference, &x, &r, train);
                with_param(reference, ti, &mut |t| t.data[i] = orig);
                Ok((up? - down?) / (2.0 * h))
            })?;
            pairs.push((format!("{pname}[{i}]"), grads[i], numeric));
        }
    }
    for i in probe_indices(x.numel(), opts.max_inputs) {
        let numeric = stable_difference(opts.eps, tol, scale, &mut |h| {
            let mut xp = x.clone();
            xp.data[i] += h;
            let up = projected(reference, &xp, &r, train)?;
            xp.data[i] -= 2.0 * h;
            let down = projected(reference, &xp, &r, train)?;
            Ok((up - down) / (2.0 * h))
        })?;
        pairs.push((format!("input[{i}]"), gx[i], numeric));
    }

    let floor = 1e-3 * pairs.iter().map(|p| p.2.abs()).fold(0.0, f64::max);
    let mut report =
        GradReport { name: name.to_string(), max_rel_err: 0.0, checked: pairs.len(), worst: String::new() };
    for (what, a, n) in pairs {
        let denom = a.abs().max(n.abs()).max(floor).max(f64::MIN_POSITIVE);
        let err = (a - n).abs() / denom;
        if err > report.max_rel_err || report.worst.is_empty() {
            report.max_rel_err = err;
            report.worst = format!("{what}: analytic {a:.6e} numeric {n:.6e}");
        }
    }
    Ok(report)
}

/// Mean softmax cross-entropy as a layer with scalar output, for checking.
#[derive(Debug, Clone)]
pub struct CrossEntropyProbe<T> {
    pub labels: Vec<usize>,
    grad: Tensor<T>,
}

impl<T: Scalar> CrossEntropyProbe<T> {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels, grad: Tensor::zeros(&[0]) }
    }
}

impl<T: Scalar> Layer<T> for CrossEntropyProbe<T> {
    fn forward(&mut self, x: &Tensor<T>, _train: bool) -> Result<Tensor<T>> {
        let (loss, grad) = softmax_cross_entropy(x, &self.labels)?;
        self.grad = grad;
        Tensor::new(&[1], vec![loss])
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        gy.expect_shape("cross entropy backward", &[1])?;
        Ok(self.grad.with_data(self.grad.data.iter().map(|&g| g * gy.data[0]).collect()))
    }
}

fn normal_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut p = Prng::new(seed, 5);
    let n = shape.iter().product();
    Tensor::from_f64(shape, &(0..n).map(|_| p.normal()).collect::<Vec<_>>()).expect("sized")
}

/// Gives batch-norm layers non-trivial affine parameters and running stats.
fn perturb_state<S: Scalar>(layer: &mut dyn Layer<S>, seed: u64) {
    let mut p = Prng::new(seed, 6);
    layer.visit_mut(&mut |name, t, _| {
        let positive = name.ends_with("running_var") || name.ends_with("gamma");
        let offset = name.ends_with("beta") || name.ends_with("running_mean") || name.ends_with("bias");
        for v in t.data.iter_mut() {
            if positive {
                *v = S::of((1.0 + 0.3 * p.normal()).max(0.2));
            } else if offset {
                *v = S::of(0.3 * p.normal());
            }
        }
    });
}

/// Every layer, the attention module and the full spectrum-to-logits graph.
pub fn run_suite(precision: Precision) -> Result<Vec<GradReport>> {
    match precision {
        Precision::F32 => suite::<f32>(),
        Precision::F64 => suite::<f64>(),
    }
}

fn suite<S: Scalar>() -> Result<Vec<GradReport>> {
    let opts = GradCheckOptions::default();
    let mut out = Vec::new();
    let prng = |s: u64| Prng::new(s, 0);

    out.push(check_layer::<S>(
        "conv1d",
        &mut Conv1d::<S>::new(3, 4, 5, 2, 2, true, &mut prng(1)),
        &mut Conv1d::<f64>::new(3, 4, 5, 2, 2, true, &mut prng(1)),
        &normal_tensor(&[2, 3, 11], 1),
        true,
        &opts,
    )?);
    out.push(check_layer::<S>(
        "linear",
        &mut Linear::<S>::new(5, 3, &mut prng(2)),
        &mut Linear::<f64>::new(5, 3, &mut prng(2)),
        &normal_tensor(&[4, 5], 2),
        true,
        &opts,
    )?);
    out.push(check_layer::<S>(
        "relu",
        &mut Relu::default(),
        &mut Relu::default(),
        &normal_tensor(&[2, 3, 7], 3),
        true,
        &opts,
    )?);
    out.push(check_layer::<S>(
        "sigmoid",
        &mut Sigmoid::<S>::default(),
        &mut Sigmoid::<f64>::default(),
        &normal_tensor(&[2, 3, 7], 4),
        true,
        &opts,
    )?);
    out.push(check_layer::<S>(
        "max_pool_len",
        &mut MaxPoolLen::default(),
        &mut MaxPoolLen::default(),
        &normal_tensor(&[2, 3, 6], 5),
        true,
        &opts,
    )?);
    out.push(check_layer::<S>(
        "avg_pool_len",
        &mut AvgPoolLen::default(),
        &mut AvgPoolLen::default(),
        &normal_tensor(&[2, 3, 6], 6),
        true,
        &opts,
    )?);
    out.push(check_layer::<S>(
        "global_avg_pool",
        &mut GlobalAvgPool::default(),
        &mut GlobalAvgPool::default(),
        &normal_tensor(&[3, 4, 9], 7),
        true,
        &opts,
    )?);
    for (name, train) in [("batch_norm_1d_train", true), ("batch_norm_1d_eval", false)] {
        let mut bn = BatchNorm1d::<S>::new(3);
        perturb_state(&mut bn, 8);
        out.push(check_layer::<S>(
            name,
            &mut bn,
            &mut BatchNorm1d::<f64>::new(3),
            &normal_tensor(&[4, 3, 5], 8),
            train,
            &opts,
        )?);
    }
    out.push(check_layer::<S>(
        "softmax_cross_entropy",
        &mut CrossEntropyProbe::<S>::new(vec![0, 5, 2, 3]),
        &mut CrossEntropyProbe::<f64>::new(vec![0, 5, 2, 3]),
        &normal_tensor(&[4, 6], 9),
        true,
        &opts,
    )?);
    out.push(check_layer::<S>(
        "magnitude",
        &mut Magnitude::<S>::default(),
        &mut Magnitude::<f64>::default(),
        &normal_tensor(&[2, 2, 16], 10),
        true,
        &opts,
    )?);
    out.push(check_layer::<S>(
        "ifft",
        &mut Ifft::<S>::new(16)?,
        &mut Ifft::<f64>::new(16)?,
        &normal_tensor(&[2, 2, 16], 11),
        true,
        &opts,
    )?);
    {
        let mut block = BasicBlock::<S>::new(4, 6, 2, &mut prng(12));
        perturb_state(&mut block, 12);
        out.push(check_layer::<S>(
            "residual_block",
            &mut block,
            &mut BasicBlock::<f64>::new(4, 6, 2, &mut prng(12)),
            &normal_tensor(&[3, 4, 16], 12),
            true,
            &opts,
        )?);
    }
    {
        let mut cfa = Cfa::<S>::new(CfaConfig::default(), &mut prng(13))?;
        // Leave the neutral start so the whole attention path carries signal.
        let mut p = Prng::new(13, 1);
        cfa.visit_mut(&mut |name, t, _| {
            if name.starts_with("fc2") {
                t.data.iter_mut().for_each(|v| *v = S::of(0.5 * p.normal()));
            }
        });
        out.push(check_layer::<S>(
            "cfa",
            &mut cfa,
            &mut Cfa::<f64>::new(CfaConfig::default(), &mut prng(13))?,
            &normal_tensor(&[2, 2, 1024], 13),
            true,
            &opts,
        )?);
    }
    {
        let mut net = Network::<S>::new(NetworkConfig::default(), 14)?;
        let mut p = Prng::new(14, 1);
        net.visit_mut(&mut |name, t, _| {
            if name.contains("fc2") {
                t.data.iter_mut().for_each(|v| *v = S::of(0.5 * p.normal()));
            }
        });
        let full = GradCheckOptions { max_per_tensor: 4, max_inputs: 32, ..opts };
        out.push(check_layer::<S>(
            "cfa_ifft_classifier",
            &mut net,
            &mut Network::<f64>::new(NetworkConfig::default(), 14)?,
            &normal_tensor(&[2, 2, 1024], 14),
            true,
            &full,
        )?);
    }
    Ok(out)
}
