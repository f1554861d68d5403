//! Complex frequency attention: a learned per-band gain on the spectrum.
//!
//! The magnitude spectrum is folded into `C` channels of `L` bins, so with
//! the defaults each channel is one hop sub-band. Max- and average-pooled
//! channel descriptors pass through one shared conv block and one shared
//! MLP; their sum goes through a sigmoid to give `w ∈ (0,1)^C`, which scales
//! both the real and imaginary part of every bin in its channel.

use hrrp_core::Prng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, NeuralError, Result};
use crate::layers::{
    sigmoid, visit_child, visit_child_mut, AvgPoolLen, Conv1d, Layer, Linear, Magnitude, MaxPoolLen, ParamKind, Relu,
};
use crate::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfaConfig {
    pub channels: usize,
    pub length: usize,
    pub reduction: usize,
    /// Odd kernel, applied with same padding along the channel axis.
    pub conv_kernel: usize,
    /// Width of the hidden layer inside the conv block.
    pub conv_hidden: usize,
}

impl Default for CfaConfig {
    fn default() -> Self {
        Self { channels: 16, length: 64, reduction: 4, conv_kernel: 3, conv_hidden: 4 }
    }
}

impl CfaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.length == 0 || self.conv_hidden == 0 {
            return Err(NeuralError::Argument("CFA dimensions must be positive".into()));
        }
        if self.reduction == 0 || !self.channels.is_multiple_of(self.reduction) {
            return Err(NeuralError::Argument(format!(
                "reduction {} must divide channel count {}",
                self.reduction, self.channels
            )));
        }
        if self.conv_kernel.is_multiple_of(2) {
            return Err(NeuralError::Argument(format!("conv kernel must be odd, got {}", self.conv_kernel)));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.channels * self.length
    }
}

#[derive(Debug, Clone)]
pub struct Cfa<T: Scalar> {
    pub config: CfaConfig,
    magnitude: Magnitude<T>,
    max_pool: MaxPoolLen,
    avg_pool: AvgPoolLen,
    conv1: Conv1d<T>,
    conv_act: Relu,
    conv2: Conv1d<T>,
    fc1: Linear<T>,
    mlp_act: Relu,
    fc2: Linear<T>,
    input: Tensor<T>,
    weights: Tensor<T>,
}

impl<T: Scalar> Cfa<T> {
    /// The last MLP layer starts at zero, so an untrained module applies
    /// the neutral gain 0.5 everywhere.
    pub fn new(config: CfaConfig, prng: &mut Prng) -> Result<Self> {
        config.validate()?;
        let pad = config.conv_kernel / 2;
        let hidden = config.channels / config.reduction;
        Ok(Self {
            config,
            magnitude: Magnitude::default(),
            max_pool: MaxPoolLen::default(),
            avg_pool: AvgPoolLen::default(),
            conv1: Conv1d::new(1, config.conv_hidden, config.conv_kernel, 1, pad, true, prng),
            conv_act: Relu::default(),
            conv2: Conv1d::new(config.conv_hidden, 1, config.conv_kernel, 1, pad, true, prng),
            fc1: Linear::new(config.channels, hidden, prng),
            mlp_act: Relu::default(),
            fc2: Linear::zeroed(hidden, config.channels),
            input: Tensor::zeros(&[0]),
            weights: Tensor::zeros(&[0]),
        })
    }

    /// Attention weights `[B, C]` from the most recent forward pass.
    pub fn weights(&self) -> &Tensor<T> {
        &self.weights
    }

    /// Output of the shared conv block for each pooled descriptor,
    /// `[2B, C]` (max branch first). Exposed for inspection.
    pub fn descriptors(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let stacked = self.pooled(x)?;
        self.conv_block(&stacked)
    }

    fn pooled(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (c, l) = (self.config.channels, self.config.length);
        x.expect_shape("cfa", &[0, 2, c * l])?;
        let b = x.shape[0];
        let m = self.magnitude.forward(x, true)?.reshape(&[b, c, l])?;
        let mx = self.max_pool.forward(&m, true)?;
        let av = self.avg_pool.forward(&m, true)?;
        let mut data = mx.data;
        data.extend(av.data);
        Tensor::new(&[2 * b, 1, c], data)
    }

    fn conv_block(&mut self, stacked: &Tensor<T>) -> Result<Tensor<T>> {
        let h = self.conv1.forward(stacked, true)?;
        let h = self.conv_act.forward(&h, true)?;
        let h = self.conv2.forward(&h, true)?;
        h.reshape(&[stacked.shape[0], self.config.channels])
    }
}

impl<T: Scalar> Layer<T> for Cfa<T> {
    fn forward(&mut self, x: &Tensor<T>, _train: bool) -> Result<Tensor<T>> {
        let (c, l) = (self.config.channels, self.config.length);
        let stacked = self.pooled(x)?;
        let b = x.shape[0];
        let d = self.conv_block(&stacked)?;
        let h = self.fc1.forward(&d, true)?;
        let h = self.mlp_act.forward(&h, true)?;
        let z = self.fc2.forward(&h, true)?;
        let (zmax, zavg) = z.data.split_at(b * c);
        let w: Vec<T> = zmax.iter().zip(zavg).map(|(&a, &v)| sigmoid(a + v)).collect();
        let mut y = x.clone();
        for bi in 0..b {
            for plane in 0..2 {
                let row = &mut y.data[(bi * 2 + plane) * c * l..][..c * l];
                for (ch, seg) in row.chunks_mut(l).enumerate() {
                    let g = w[bi * c + ch];
                    seg.iter_mut().for_each(|v| *v *= g);
                }
            }
        }
        self.input = x.clone();
        self.weights = Tensor::new(&[b, c], w)?;
        Ok(y)
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let (c, l) = (self.config.channels, self.config.length);
        let b = self.input.shape[0];
        gy.expect_shape("cfa backward", &self.input.shape)?;
        let mut gx = gy.clone();
        let mut gw = vec![T::zero(); b * c];
        for bi in 0..b {
            for plane in 0..2 {
                let off = (bi * 2 + plane) * c * l;
                for ch in 0..c {
                    let w = self.weights.data[bi * c + ch];
                    for k in off + ch * l..off + (ch + 1) * l {
                        gw[bi * c + ch] += gy.data[k] * self.input.data[k];
                        gx.data[k] = gy.data[k] * w;
                    }
                }
            }
        }
        // Both branches receive the same gradient through the sum.
        let gz: Vec<T> = gw.iter().zip(&self.weights.data).map(|(&g, &w)| g * w * (T::one() - w)).collect();
        let mut gz2 = gz.clone();
        gz2.extend_from_slice(&gz);
        let g = self.fc2.backward(&Tensor::new(&[2 * b, c], gz2)?)?;
        let g = self.mlp_act.backward(&g)?;
        let g = self.fc1.backward(&g)?;
        let g = self.conv2.backward(&g.reshape(&[2 * b, 1, c])?)?;
        let g = self.conv_act.backward(&g)?;
        let g = self.conv1.backward(&g)?;
        let (gmax, gavg) = g.data.split_at(b * c);
        let gm_max = self.max_pool.backward(&Tensor::new(&[b, c], gmax.to_vec())?)?;
        let gm_avg = self.avg_pool.backward(&Tensor::new(&[b, c], gavg.to_vec())?)?;
        let gm = gm_max.data.iter().zip(&gm_avg.data).map(|(&a, &v)| a + v).collect();
        let gmag = self.magnitude.backward(&Tensor::new(&[b, 1, c * l], gm)?)?;
        if gmag.shape != gx.shape {
            return Err(shape_err("cfa backward", &gx.shape, &gmag.shape));
        }
        gx.data.iter_mut().zip(&gmag.data).for_each(|(a, v)| *a += *v);
        Ok(gx)
    }

    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor<T>, ParamKind)) {
        visit_child(&self.conv1, "conv1", f);
        visit_child(&self.conv2, "conv2", f);
        visit_child(&self.fc1, "fc1", f);
        visit_child(&self.fc2, "fc2", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {
        visit_child_mut(&mut self.conv1, "conv1", f);
        visit_child_mut(&mut self.conv2, "conv2", f);
        visit_child_mut(&mut self.fc1, "fc1", f);
        visit_child_mut(&mut self.fc2, "fc2", f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::param_count;

    fn random_input(b: usize, seed: u64) -> Tensor<f64> {
        let mut p = Prng::new(seed, 0);
        Tensor::from_f64(&[b, 2, 1024], &(0..b * 2048).map(|_| p.normal()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn neutral_at_init() {
        let mut cfa = Cfa::<f64>::new(CfaConfig::default(), &mut Prng::new(1, 0)).unwrap();
        let x = random_input(2, 3);
        let y = cfa.forward(&x, true).unwrap();
        assert!(cfa.weights().data.iter().all(|&w| w == 0.5));
        for (a, b) in y.data.iter().zip(&x.data) {
            assert_eq!(*a, b / 2.0);
        }
    }

    #[test]
    fn weights_in_open_unit_interval_and_phase_kept() {
        let mut cfa = Cfa::<f64>::new(CfaConfig::default(), &mut Prng::new(1, 0)).unwrap();
        let mut p = Prng::new(5, 0);
        cfa.fc2.weight.data.iter_mut().for_each(|w| *w = 3.0 * p.normal());
        cfa.fc2.bias.data.iter_mut().for_each(|w| *w = p.normal());
        let x = random_input(3, 4);
        let y = cfa.forward(&x, true).unwrap();
        assert!(cfa.weights().data.iter().all(|&w| w > 0.0 && w < 1.0));
        assert!(cfa.weights().data.iter().any(|&w| (w - 0.5).abs() > 0.1));
        for bi in 0..3 {
            for k in 0..1024 {
                let (xr, xi) = (x.data[bi * 2048 + k], x.data[bi * 2048 + 1024 + k]);
                let (yr, yi) = (y.data[bi * 2048 + k], y.data[bi * 2048 + 1024 + k]);
                assert!((xi.atan2(xr) - yi.atan2(yr)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_descriptor_is_channel_local() {
        // Two stacked kernel-3 convs see at most two channels either side.
        let mut cfa = Cfa::<f64>::new(CfaConfig::default(), &mut Prng::new(8, 0)).unwrap();
        let x = random_input(1, 9);
        let base = cfa.descriptors(&x).unwrap();
        for c in [0usize, 7, 15] {
            let mut z = x.clone();
            for plane in 0..2 {
                z.data[plane * 1024 + c * 64..plane * 1024 + (c + 1) * 64].iter_mut().for_each(|v| *v = 0.0);
            }
            let d = cfa.descriptors(&z).unwrap();
            for branch in 0..2 {
                for ch in 0..16 {
                    let changed = d.data[branch * 16 + ch] != base.data[branch * 16 + ch];
                    if changed {
                        assert!(ch.abs_diff(c) <= 2, "zeroing {c} moved {ch}");
                    }
                }
            }
        }
    }

    #[test]
    fn parameter_count() {
        let cfa = Cfa::<f32>::new(CfaConfig::default(), &mut Prng::new(0, 0)).unwrap();
        // conv 1→4 (16) + conv 4→1 (13) + fc 16→4 (68) + fc 4→16 (80)
        assert_eq!(param_count(&cfa), 177);
    }

    #[test]
    fn config_validation() {
        assert!(CfaConfig { reduction: 3, ..Default::default() }.validate().is_err());
        assert!(CfaConfig { conv_kernel: 4, ..Default::default() }.validate().is_err());
        let mut cfa = Cfa::<f32>::new(CfaConfig::default(), &mut Prng::new(0, 0)).unwrap();
        assert!(matches!(cfa.forward(&Tensor::zeros(&[1, 2, 1000]), true), Err(NeuralError::Shape { .. })));
    }
}
