//! Spectrum → optional attention → unitary IFFT → classifier.

use hrrp_core::Prng;
use serde::{Deserialize, Serialize};

use crate::error::{NeuralError, Result};
use crate::layers::{visit_child, visit_child_mut, Ifft, Layer, Magnitude, ParamKind};
use crate::{Cfa, CfaConfig, ResNet1d, ResNetConfig, Scalar, Tensor};

/// What the classifier sees after the inverse transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputRepr {
    /// Real and imaginary planes of the complex time signal.
    #[default]
    Complex,
    /// Magnitude of the complex time signal (the HRRP itself).
    Magnitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub n_bins: usize,
    pub use_cfa: bool,
    pub cfa: CfaConfig,
    pub classifier: ResNetConfig,
    pub input_repr: InputRepr,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_bins: 1024,
            use_cfa: true,
            cfa: CfaConfig::default(),
            classifier: ResNetConfig::default(),
            input_repr: InputRepr::Complex,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Network<T: Scalar> {
    pub config: NetworkConfig,
    pub cfa: Option<Cfa<T>>,
    ifft: Ifft<T>,
    magnitude: Option<Magnitude<T>>,
    pub classifier: ResNet1d<T>,
}

impl<T: Scalar> Network<T> {
    /// Builds and initializes every parameter from `seed`; the same seed
    /// gives the same weights in either precision (up to rounding).
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        let mut prng = Prng::new(seed, 0x6e6e);
        let want_in = match config.input_repr {
            InputRepr::Complex => 2,
            InputRepr::Magnitude => 1,
        };
        if config.classifier.in_channels != want_in {
            return Err(NeuralError::Argument(format!(
                "classifier expects {} input channels but {:?} input provides {want_in}",
                config.classifier.in_channels, config.input_repr
            )));
        }
        let cfa = if config.use_cfa {
            if config.cfa.bins() != config.n_bins {
                return Err(NeuralError::Argument(format!(
                    "CFA folds {}×{} bins but the spectrum has {}",
                    config.cfa.channels, config.cfa.length, config.n_bins
                )));
            }
            Some(Cfa::new(config.cfa, &mut prng)?)
        } else {
            None
        };
        let classifier = ResNet1d::new(config.classifier.clone(), &mut prng)?;
        Ok(Self {
            ifft: Ifft::new(config.n_bins)?,
            magnitude: (config.input_repr == InputRepr::Magnitude).then(Magnitude::default),
            config,
            cfa,
            classifier,
        })
    }

    /// Attention weights `[B, C]` of the most recent forward pass.
    pub fn attention(&self) -> Option<&Tensor<T>> {
        self.cfa.as_ref().map(|c| c.weights())
    }
}

impl<T: Scalar> Layer<T> for Network<T> {
    fn forward(&mut self, x: &Tensor<T>, train: bool) -> Result<Tensor<T>> {
        x.expect_shape("network", &[0, 2, self.config.n_bins])?;
        let spec = match &mut self.cfa {
            Some(cfa) => cfa.forward(x, train)?,
            None => x.clone(),
        };
        let mut h = self.ifft.forward(&spec, train)?;
        if let Some(m) = &mut self.magnitude {
            h = m.forward(&h, train)?;
        }
        self.classifier.forward(&h, train)
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = self.classifier.backward(gy)?;
        if let Some(m) = &mut self.magnitude {
            g = m.backward(&g)?;
        }
        let g = self.ifft.backward(&g)?;
        match &mut self.cfa {
            Some(cfa) => cfa.backward(&g),
            None => Ok(g),
        }
    }

    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor<T>, ParamKind)) {
        if let Some(cfa) = &self.cfa {
            visit_child(cfa, "cfa", f);
        }
        visit_child(&self.classifier, "classifier", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {
        if let Some(cfa) = &mut self.cfa {
            visit_child_mut(cfa, "cfa", f);
        }
        visit_child_mut(&mut self.classifier, "classifier", f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{export_state, param_count, softmax};

    #[test]
    fn same_seed_same_weights_across_precisions() {
        let a = Network::<f32>::new(NetworkConfig::default(), 5).unwrap();
        let b = Network::<f64>::new(NetworkConfig::default(), 5).unwrap();
        for (x, y) in export_state(&a).iter().zip(export_state(&b)) {
            assert_eq!(x.name, y.name);
            for (u, v) in x.data.iter().zip(&y.data) {
                assert_eq!(*u, *v as f32 as f64);
            }
        }
    }

    #[test]
    fn deterministic_forward_and_normalized_softmax() {
        let mut net = Network::<f32>::new(NetworkConfig::default(), 1).unwrap();
        let mut p = Prng::new(2, 0);
        let x = Tensor::from_f64(&[2, 2, 1024], &(0..4096).map(|_| p.normal()).collect::<Vec<_>>()).unwrap();
        let a = net.forward(&x, false).unwrap();
        let b = net.forward(&x, false).unwrap();
        assert_eq!(a, b);
        for row in softmax(&a).unwrap().data.chunks(6) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn cfa_overhead_is_small() {
        let with = Network::<f32>::new(NetworkConfig::default(), 0).unwrap();
        let cfa = param_count(with.cfa.as_ref().unwrap());
        let clf = param_count(&with.classifier);
        assert!((cfa as f64) <= 0.02 * clf as f64);
    }

    #[test]
    fn magnitude_input_needs_one_channel() {
        let mut cfg = NetworkConfig { input_repr: InputRepr::Magnitude, ..Default::default() };
        assert!(Network::<f32>::new(cfg.clone(), 0).is_err());
        cfg.classifier.in_channels = 1;
        let mut net = Network::<f32>::new(cfg, 0).unwrap();
        assert_eq!(net.forward(&Tensor::zeros(&[1, 2, 1024]), false).unwrap().shape, vec![1, 6]);
    }
}
