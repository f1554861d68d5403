//! Small 1-D residual classifier.

use hrrp_core::Prng;
use serde::{Deserialize, Serialize};

use crate::error::{NeuralError, Result};
use crate::layers::{visit_child, visit_child_mut, BatchNorm1d, Conv1d, GlobalAvgPool, Layer, Linear, ParamKind, Relu};
use crate::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResNetConfig {
    pub in_channels: usize,
    pub stem_channels: usize,
    pub stem_kernel: usize,
    pub widths: Vec<usize>,
    pub blocks_per_stage: usize,
    pub n_classes: usize,
}

impl Default for ResNetConfig {
    fn default() -> Self {
        Self {
            in_channels: 2,
            stem_channels: 16,
            stem_kernel: 7,
            widths: vec![16, 32, 64],
            blocks_per_stage: 2,
            n_classes: 6,
        }
    }
}

/// conv3 → BN → ReLU → conv3 → BN, plus identity or 1×1 projection
/// shortcut, then ReLU.
#[derive(Debug, Clone)]
pub struct BasicBlock<T: Scalar> {
    conv1: Conv1d<T>,
    bn1: BatchNorm1d<T>,
    act1: Relu,
    conv2: Conv1d<T>,
    bn2: BatchNorm1d<T>,
    shortcut: Option<(Conv1d<T>, BatchNorm1d<T>)>,
    out_act: Relu,
}

impl<T: Scalar> BasicBlock<T> {
    pub fn new(in_ch: usize, out_ch: usize, stride: usize, prng: &mut Prng) -> Self {
        let shortcut = (stride != 1 || in_ch != out_ch)
            .then(|| (Conv1d::new(in_ch, out_ch, 1, stride, 0, false, prng), BatchNorm1d::new(out_ch)));
        Self {
            conv1: Conv1d::new(in_ch, out_ch, 3, stride, 1, false, prng),
            bn1: BatchNorm1d::new(out_ch),
            act1: Relu::default(),
            conv2: Conv1d::new(out_ch, out_ch, 3, 1, 1, false, prng),
            bn2: BatchNorm1d::new(out_ch),
            shortcut,
            out_act: Relu::default(),
        }
    }
}

impl<T: Scalar> Layer<T> for BasicBlock<T> {
    fn forward(&mut self, x: &Tensor<T>, train: bool) -> Result<Tensor<T>> {
        let h = self.conv1.forward(x, train)?;
        let h = self.bn1.forward(&h, train)?;
        let h = self.act1.forward(&h, train)?;
        let h = self.conv2.forward(&h, train)?;
        let mut h = self.bn2.forward(&h, train)?;
        let skip = match &mut self.shortcut {
            Some((conv, bn)) => {
                let s = conv.forward(x, train)?;
                bn.forward(&s, train)?
            }
            None => x.clone(),
        };
        if skip.shape != h.shape {
            return Err(NeuralError::Shape { op: "residual add", expected: h.shape, got: skip.shape });
        }
        h.data.iter_mut().zip(&skip.data).for_each(|(a, b)| *a += *b);
        self.out_act.forward(&h, train)
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.out_act.backward(gy)?;
        let gm = self.bn2.backward(&g)?;
        let gm = self.conv2.backward(&gm)?;
        let gm = self.act1.backward(&gm)?;
        let gm = self.bn1.backward(&gm)?;
        let mut gx = self.conv1.backward(&gm)?;
        let gs = match &mut self.shortcut {
            Some((conv, bn)) => {
                let s = bn.backward(&g)?;
                conv.backward(&s)?
            }
            None => g,
        };
        gx.data.iter_mut().zip(&gs.data).for_each(|(a, b)| *a += *b);
        Ok(gx)
    }

    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor<T>, ParamKind)) {
        visit_child(&self.conv1, "conv1", f);
        visit_child(&self.bn1, "bn1", f);
        visit_child(&self.conv2, "conv2", f);
        visit_child(&self.bn2, "bn2", f);
        if let Some((conv, bn)) = &self.shortcut {
            visit_child(conv, "shortcut.conv", f);
            visit_child(bn, "shortcut.bn", f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {
        visit_child_mut(&mut self.conv1, "conv1", f);
        visit_child_mut(&mut self.bn1, "bn1", f);
        visit_child_mut(&mut self.conv2, "conv2", f);
        visit_child_mut(&mut self.bn2, "bn2", f);
        if let Some((conv, bn)) = &mut self.shortcut {
            visit_child_mut(conv, "shortcut.conv", f);
            visit_child_mut(bn, "shortcut.bn", f);
        }
    }
}

/// Stem conv (stride 2) → BN → ReLU → residual stages (stride 2 at each
/// stage entry) → global average pool → linear.
#[derive(Debug, Clone)]
pub struct ResNet1d<T: Scalar> {
    pub config: ResNetConfig,
    stem: Conv1d<T>,
    stem_bn: BatchNorm1d<T>,
    stem_act: Relu,
    blocks: Vec<BasicBlock<T>>,
    pool: GlobalAvgPool,
    head: Linear<T>,
}

impl<T: Scalar> ResNet1d<T> {
    pub fn new(config: ResNetConfig, prng: &mut Prng) -> Result<Self> {
        if config.in_channels == 0 || config.stem_channels == 0 || config.n_classes < 2 || config.widths.is_empty() {
            return Err(NeuralError::Argument(format!("invalid classifier config {config:?}")));
        }
        if config.widths.contains(&0) || config.blocks_per_stage == 0 || config.stem_kernel.is_multiple_of(2) {
            return Err(NeuralError::Argument(format!("invalid classifier config {config:?}")));
        }
        let stem = Conv1d::new(
            config.in_channels,
            config.stem_channels,
            config.stem_kernel,
            2,
            config.stem_kernel / 2,
            false,
            prng,
        );
        let mut blocks = Vec::new();
        let mut ch = config.stem_channels;
        for &w in &config.widths {
            for i in 0..config.blocks_per_stage {
                blocks.push(BasicBlock::new(ch, w, if i == 0 { 2 } else { 1 }, prng));
                ch = w;
            }
        }
        let head = Linear::new(ch, config.n_classes, prng);
        Ok(Self {
            stem_bn: BatchNorm1d::new(config.stem_channels),
            config,
            stem,
            stem_act: Relu::default(),
            blocks,
            pool: GlobalAvgPool::default(),
            head,
        })
    }
}

impl<T: Scalar> Layer<T> for ResNet1d<T> {
    fn forward(&mut self, x: &Tensor<T>, train: bool) -> Result<Tensor<T>> {
        let h = self.stem.forward(x, train)?;
        let h = self.stem_bn.forward(&h, train)?;
        let mut h = self.stem_act.forward(&h, train)?;
        for b in &mut self.blocks {
            h = b.forward(&h, train)?;
        }
        let h = self.pool.forward(&h, train)?;
        self.head.forward(&h, train)
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.head.backward(gy)?;
        let mut g = Layer::<T>::backward(&mut self.pool, &g)?;
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(&g)?;
        }
        let g = self.stem_act.backward(&g)?;
        let g = self.stem_bn.backward(&g)?;
        self.stem.backward(&g)
    }

    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor<T>, ParamKind)) {
        visit_child(&self.stem, "stem.conv", f);
        visit_child(&self.stem_bn, "stem.bn", f);
        for (i, b) in self.blocks.iter().enumerate() {
            visit_child(b, &format!("block{i}"), f);
        }
        visit_child(&self.head, "head", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {
        visit_child_mut(&mut self.stem, "stem.conv", f);
        visit_child_mut(&mut self.stem_bn, "stem.bn", f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            visit_child_mut(b, &format!("block{i}"), f);
        }
        visit_child_mut(&mut self.head, "head", f);
    }
}
