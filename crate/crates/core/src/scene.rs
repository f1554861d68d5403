//! Parametric point-scatterer targets.
//!
//! A target is a handful of point reflectors along the line of sight. Its
//! frequency response is the coherent sum of their two-way phase terms.

use serde::{Deserialize, Serialize};

use crate::numerics::Prng;
use crate::{Error, Result, C64, SPEED_OF_LIGHT};

/// Half of the 192 m unambiguous window at the default band plan.
pub const MAX_ABS_OFFSET_M: f64 = 96.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scatterer {
    /// Offset from the target reference point, meters.
    pub range_offset_m: f64,
    pub amp_re: f64,
    pub amp_im: f64,
}

impl Scatterer {
    pub fn new(range_offset_m: f64, amplitude: C64) -> Self {
        Self { range_offset_m, amp_re: amplitude.re, amp_im: amplitude.im }
    }

    pub fn amplitude(&self) -> C64 {
        C64::new(self.amp_re, self.amp_im)
    }
}

/// Per-sample perturbation applied to a class template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jitter {
    pub range_std_m: f64,
    /// Relative (multiplicative) amplitude std.
    pub amplitude_std: f64,
    pub dropout_prob: f64,
}

impl Jitter {
    pub const NONE: Jitter = Jitter { range_std_m: 0.0, amplitude_std: 0.0, dropout_prob: 0.0 };
}

impl Default for Jitter {
    fn default() -> Self {
        Self { range_std_m: 0.15, amplitude_std: 0.1, dropout_prob: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetClass {
    pub id: usize,
    pub scatterers: Vec<Scatterer>,
    pub jitter: Jitter,
}

impl TargetClass {
    pub fn validate(&self) -> Result<()> {
        if self.scatterers.is_empty() {
            return Err(Error::Argument(format!("class {} has an empty template", self.id)));
        }
        for s in &self.scatterers {
            if !(s.range_offset_m.abs() < MAX_ABS_OFFSET_M) {
                return Err(Error::Argument(format!(
                    "class {}: offset {} m outside the unambiguous window",
                    self.id, s.range_offset_m
                )));
            }
            if !s.amplitude().is_finite() {
                return Err(Error::Argument(format!("class {}: non-finite amplitude", self.id)));
            }
        }
        let j = &self.jitter;
        if !(j.range_std_m >= 0.0 && j.amplitude_std >= 0.0 && (0.0..1.0).contains(&j.dropout_prob)) {
            return Err(Error::Argument(format!("class {}: invalid jitter {j:?}", self.id)));
        }
        Ok(())
    }
}

/// JSON document holding a list of class templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassTemplates {
    pub classes: Vec<TargetClass>,
}

impl ClassTemplates {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text).map_err(|e| Error::Argument(e.to_string()))?;
        validate_classes(&doc.classes)?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("templates serialize")
    }
}

/// Checks every template and the uniqueness of class ids.
pub fn validate_classes(classes: &[TargetClass]) -> Result<()> {
    let mut ids: Vec<usize> = classes.iter().map(|c| c.id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != classes.len() {
        return Err(Error::Argument("class ids must be unique".into()));
    }
    classes.iter().try_for_each(TargetClass::validate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetInstance {
    pub scatterers: Vec<Scatterer>,
    pub class_id: usize,
    pub aspect_seed: u64,
}

/// Six synthetic stand-in classes, 4 to 10 scatterers each, spread over at
/// most 40 m with amplitudes in `[0.3, 1.0]`.
pub fn builtin_classes() -> Vec<TargetClass> {
    const LAYOUTS: [&[(f64, f64)]; 6] = [
        &[(-14.0, 1.0), (-5.5, 0.55), (3.0, 0.8), (12.5, 0.4)],
        &[(-17.0, 0.6), (-8.0, 1.0), (-2.5, 0.35), (6.0, 0.9), (15.5, 0.5)],
        &[(-19.0, 0.45), (-12.5, 0.7), (-4.0, 1.0), (1.5, 0.3), (9.0, 0.85), (18.0, 0.6)],
        &[(-16.0, 0.9), (-11.0, 0.4), (-6.5, 0.65), (0.0, 1.0), (4.5, 0.5), (10.0, 0.75), (13.5, 0.35)],
        &[(-18.5, 0.5), (-13.0, 0.8), (-9.5, 0.3), (-3.0, 0.95), (2.5, 0.6), (7.0, 0.4), (11.5, 1.0), (19.0, 0.7)],
        &[
            (-20.0, 0.35),
            (-15.5, 0.6),
            (-11.0, 0.9),
            (-7.5, 0.45),
            (-3.5, 1.0),
            (0.5, 0.55),
            (5.0, 0.8),
            (9.5, 0.3),
            (14.0, 0.7),
            (17.5, 0.5),
        ],
    ];
    LAYOUTS
        .iter()
        .enumerate()
        .map(|(id, layout)| TargetClass {
            id,
            scatterers: layout
                .iter()
                .enumerate()
                .map(|(k, &(offset, mag))| {
                    // Deterministic per-scatterer phase pattern.
                    Scatterer::new(offset, C64::from_polar(mag, 0.7 * (k * (id + 1)) as f64))
                })
                .collect(),
            jitter: Jitter::default(),
        })
        .collect()
}

/// Draws one perturbed instance of `class`.
///
/// Each template scatterer is dropped with `dropout_prob`, shifted by a
/// Gaussian range error and scaled by `max(0, 1 + amplitude_std·N(0,1))`. If
/// every scatterer would drop out, the strongest one is kept.
pub fn sample_instance(class: &TargetClass, prng: &mut Prng) -> TargetInstance {
    let aspect_seed = prng.next_u64();
    let j = class.jitter;
    let mut scatterers = Vec::with_capacity(class.scatterers.len());
    for s in &class.scatterers {
        let keep = prng.uniform() >= j.dropout_prob;
        let dr = prng.normal() * j.range_std_m;
        let gain = (1.0 + prng.normal() * j.amplitude_std).max(0.0);
        if keep {
            scatterers.push(Scatterer::new(s.range_offset_m + dr, s.amplitude() * gain));
        }
    }
    if scatterers.is_empty() {
        let strongest = class
            .scatterers
            .iter()
            .max_by(|a, b| a.amplitude().norm().total_cmp(&b.amplitude().norm()))
            .expect("validated template is non-empty");
        scatterers.push(*strongest);
    }
    TargetInstance { scatterers, class_id: class.id, aspect_seed }
}

/// `H(f) = Σ_k a_k·exp(−j·4π·f·Δr_k/c)` at each absolute frequency.
pub fn target_transfer(instance: &TargetInstance, freqs: &[f64]) -> Result<Vec<C64>> {
    if instance.scatterers.is_empty() {
        return Err(Error::Argument("target has no scatterers".into()));
    }
    Ok(freqs
        .iter()
        .map(|&f| instance.scatterers.iter().map(|s| s.amplitude() * two_way_phase(f, s.range_offset_m)).sum())
        .collect())
}

/// `exp(−j·4π·f·r/c)`, the two-way propagation phase at frequency `f` and range `r`.
#[inline]
pub fn two_way_phase(freq_hz: f64, range_m: f64) -> C64 {
    // Cycles = 2fr/c; reducing to the fractional part before scaling by 2π
    // keeps the trig argument small.
    let cycles = 2.0 * freq_hz * range_m / SPEED_OF_LIGHT;
    let frac = cycles - cycles.round();
    C64::from_polar(1.0, -2.0 * std::f64::consts::PI * frac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(offset: f64, amp: C64) -> TargetInstance {
        TargetInstance { scatterers: vec![Scatterer::new(offset, amp)], class_id: 0, aspect_seed: 0 }
    }

    #[test]
    fn six_builtin_classes_valid() {
        let classes = builtin_classes();
        assert_eq!(classes.len(), 6);
        validate_classes(&classes).unwrap();
        for c in &classes {
            assert!((4..=10).contains(&c.scatterers.len()));
            let lo = c.scatterers.iter().map(|s| s.range_offset_m).fold(f64::MAX, f64::min);
            let hi = c.scatterers.iter().map(|s| s.range_offset_m).fold(f64::MIN, f64::max);
            assert!(hi - lo <= 40.0);
            for s in &c.scatterers {
                let m = s.amplitude().norm();
                assert!((0.3 - 1e-12..=1.0 + 1e-12).contains(&m));
            }
        }
    }

    #[test]
    fn builtin_layouts_pairwise_distinct() {
        // (count, sorted spacing multiset) in centimeters.
        let keys: Vec<(usize, Vec<i64>)> = builtin_classes()
            .iter()
            .map(|c| {
                let mut offs: Vec<f64> = c.scatterers.iter().map(|s| s.range_offset_m).collect();
                offs.sort_by(f64::total_cmp);
                let mut gaps: Vec<i64> = offs.windows(2).map(|w| ((w[1] - w[0]) * 100.0).round() as i64).collect();
                gaps.sort_unstable();
                (offs.len(), gaps)
            })
            .collect();
        for i in 0..keys.len() {
            for j in i + 1..keys.len() {
                assert_ne!(keys[i], keys[j], "classes {i} and {j}");
            }
        }
    }

    #[test]
    fn zero_jitter_reproduces_template() {
        let mut class = builtin_classes()[3].clone();
        class.jitter = Jitter::NONE;
        let inst = sample_instance(&class, &mut Prng::new(1, 1));
        assert_eq!(inst.scatterers, class.scatterers);
        assert_eq!(inst.class_id, 3);
    }

    #[test]
    fn sampling_is_deterministic() {
        let class = builtin_classes()[2].clone();
        let a = sample_instance(&class, &mut Prng::new(9, 4));
        let b = sample_instance(&class, &mut Prng::new(9, 4));
        assert_eq!(a, b);
    }

    #[test]
    fn range_jitter_std_matches() {
        let class = TargetClass {
            id: 0,
            scatterers: vec![Scatterer::new(0.0, C64::new(1.0, 0.0))],
            jitter: Jitter { range_std_m: 0.05, amplitude_std: 0.0, dropout_prob: 0.0 },
        };
        let mut p = Prng::new(77, 0);
        let offs: Vec<f64> =
            (0..10_000).map(|_| sample_instance(&class, &mut p).scatterers[0].range_offset_m).collect();
        let mean = offs.iter().sum::<f64>() / offs.len() as f64;
        let var = offs.iter().map(|o| (o - mean).powi(2)).sum::<f64>() / (offs.len() - 1) as f64;
        assert!((var.sqrt() - 0.05).abs() < 0.005, "std {}", var.sqrt());
    }

    #[test]
    fn full_dropout_keeps_strongest() {
        let mut class = builtin_classes()[0].clone();
        class.jitter = Jitter { range_std_m: 0.0, amplitude_std: 0.0, dropout_prob: 0.999_999 };
        let inst = sample_instance(&class, &mut Prng::new(0, 0));
        assert_eq!(inst.scatterers.len(), 1);
        assert!((inst.scatterers[0].amplitude().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_offset_unit_scatterer_is_flat() {
        let h = target_transfer(&single(0.0, C64::new(1.0, 0.0)), &[2.4e9, 2.8e9, 3.2e9]).unwrap();
        for z in h {
            assert!((z - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn quarter_wave_pair_has_root_two_magnitude() {
        let f = 2.4e9;
        let inst = TargetInstance {
            scatterers: vec![
                Scatterer::new(0.0, C64::new(1.0, 0.0)),
                Scatterer::new(SPEED_OF_LIGHT / (8.0 * f), C64::new(1.0, 0.0)),
            ],
            class_id: 0,
            aspect_seed: 0,
        };
        let h = target_transfer(&inst, &[f]).unwrap();
        // Direct arithmetic: 1 + e^{-jπ/2} = 1 - j.
        assert!((h[0] - C64::new(1.0, -1.0)).norm() < 1e-12);
        assert!((h[0].norm() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_instance_is_error() {
        let inst = TargetInstance { scatterers: vec![], class_id: 0, aspect_seed: 0 };
        assert!(matches!(target_transfer(&inst, &[1.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn templates_json_round_trip() {
        let doc = ClassTemplates { classes: builtin_classes() };
        let back = ClassTemplates::from_json(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        assert!(ClassTemplates::from_json(r#"{"classes":[],"extra":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn transfer_is_linear_and_translation_keeps_magnitude(
            s in 0.1f64..5.0, delta in -10.0f64..10.0, f in 2.4e9f64..3.2e9,
        ) {
            let base = &builtin_classes()[4];
            let inst = TargetInstance { scatterers: base.scatterers.clone(), class_id: 4, aspect_seed: 0 };
            let scaled = TargetInstance {
                scatterers: base.scatterers.iter().map(|x| Scatterer::new(x.range_offset_m, x.amplitude() * s)).collect(),
                ..inst.clone()
            };
            let shifted = TargetInstance {
                scatterers: base.scatterers.iter().map(|x| Scatterer::new(x.range_offset_m + delta, x.amplitude())).collect(),
                ..inst.clone()
            };
            let h = target_transfer(&inst, &[f]).unwrap()[0];
            let hs = target_transfer(&scaled, &[f]).unwrap()[0];
            let ht = target_transfer(&shifted, &[f]).unwrap()[0];
            prop_assert!((hs - h * s).norm() < 1e-9 * (1.0 + hs.norm()));
            prop_assert!((ht.norm() - h.norm()).abs() < 1e-9 * (1.0 + h.norm()));
        }
    }
}
