//! Deterministic complex-vector math shared by every other module.
//!
//! FFT convention: the forward transform is unscaled,
//! `X[k] = Σ x[n]·exp(−j2πkn/N)`, and the inverse carries the full `1/N`,
//! `x[n] = (1/N)·Σ X[k]·exp(+j2πkn/N)`. Consequently
//! `Σ|x|² = (1/N)·Σ|X|²`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftNum, FftPlanner};

use crate::{ComplexVec, Error, Result, C64};

/// Floating-point scalar accepted by the generic kernels (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + FftNum
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; exact for `f64`, rounds for `f32`.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Real")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Forward and inverse plans for one power-of-two length.
#[derive(Clone)]
pub struct FftPlan<T: Real> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> Debug for FftPlan<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("n", &self.n).finish()
    }
}

impl<T: Real> FftPlan<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Size(n));
        }
        let mut planner = FftPlanner::new();
        Ok(Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place unscaled forward transform.
    pub fn forward(&self, buf: &mut [Complex<T>]) -> Result<()> {
        self.check(buf)?;
        self.forward.process(buf);
        Ok(())
    }

    /// In-place inverse transform including the `1/N` factor.
    pub fn inverse(&self, buf: &mut [Complex<T>]) -> Result<()> {
        self.inverse_unscaled(buf)?;
        let scale = T::one() / T::of(self.n as f64);
        for z in buf.iter_mut() {
            *z *= scale;
        }
        Ok(())
    }

    /// In-place inverse transform without any scaling (`Σ X[k]·e^{+j2πkn/N}`).
    pub fn inverse_unscaled(&self, buf: &mut [Complex<T>]) -> Result<()> {
        self.check(buf)?;
        self.inverse.process(buf);
        Ok(())
    }

    fn check(&self, buf: &[Complex<T>]) -> Result<()> {
        if buf.len() != self.n {
            return Err(Error::Argument(format!("buffer length {} does not match plan length {}", buf.len(), self.n)));
        }
        Ok(())
    }
}

/// Unscaled forward DFT of a power-of-two length vector.
pub fn fft<T: Real>(x: &[Complex<T>]) -> Result<ComplexVec<T>> {
    let plan = FftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.forward(&mut out)?;
    Ok(out)
}

/// Inverse DFT with `1/N` scaling; `ifft(fft(x)) == x`.
pub fn ifft<T: Real>(x: &[Complex<T>]) -> Result<ComplexVec<T>> {
    let plan = FftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.inverse(&mut out)?;
    Ok(out)
}

/// Time signal `x[n] = Σ X[k]·e^{+j2πkn/N}` whose average power equals
/// `Σ|X[k]|²`. This is the sampled waveform whose spectral samples are `X`,
/// so `periodogram_psd` of the result recovers `|X[k]|²/Δf`.
pub fn spectrum_to_signal<T: Real>(spectrum: &[Complex<T>]) -> Result<ComplexVec<T>> {
    let plan = FftPlan::new(spectrum.len())?;
    let mut out = spectrum.to_vec();
    plan.inverse_unscaled(&mut out)?;
    Ok(out)
}

/// Seeded random stream: a ChaCha8 generator keyed by `(seed, stream_id)`.
///
/// Identical `(seed, stream_id)` pairs replay identical sequences and
/// distinct stream ids are independent, so each unit of parallel work can own
/// its own substream.
#[derive(Debug, Clone)]
pub struct Prng {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Prng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { rng, spare_normal: None }
    }

    /// Uniform double in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `0..n`; `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random::<u64>()
    }

    /// Standard normal pair via Box–Muller.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        // 1 - U keeps the log argument in (0, 1].
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// Standard normal draw; the second Box–Muller value is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let (a, b) = self.normal_pair();
        self.spare_normal = Some(b);
        a
    }
}

/// SplitMix64 finalizer over two words; used to derive per-sample seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n` i.i.d. circular complex Gaussian samples with `E|z|² = variance`.
pub fn gaussian_complex(prng: &mut Prng, n: usize, variance: f64) -> Result<ComplexVec<f64>> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::Domain(format!("variance must be finite and >= 0, got {variance}")));
    }
    if n == 0 {
        return Err(Error::Argument("sample count must be >= 1".into()));
    }
    let sigma = (variance / 2.0).sqrt();
    Ok((0..n)
        .map(|_| {
            let (a, b) = prng.normal_pair();
            C64::new(sigma * a, sigma * b)
        })
        .collect())
}

/// Averaged periodogram in power per Hz.
///
/// Each segment of length `N` is transformed and `|X[k]|²/(N²·bin_width)` is
/// averaged across segments, so `Σ_k psd[k]·bin_width` equals the average
/// segment power `(1/N)·Σ|x|²`. Rectangular window only.
pub fn periodogram_psd<T: Real>(segments: &[ComplexVec<T>], bin_width: f64) -> Result<Vec<T>> {
    let first = segments.first().ok_or_else(|| Error::Argument("periodogram needs at least one segment".into()))?;
    if !(bin_width > 0.0) {
        return Err(Error::Domain(format!("bin width must be > 0, got {bin_width}")));
    }
    let n = first.len();
    if segments.iter().any(|s| s.len() != n) {
        return Err(Error::Argument("periodogram segments must share one length".into()));
    }
    let plan = FftPlan::<T>::new(n)?;
    let mut acc = vec![0.0f64; n];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for seg in segments {
        buf.copy_from_slice(seg);
        plan.forward(&mut buf)?;
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr().to_f64_lossy();
        }
    }
    let norm = (n as f64).powi(2) * bin_width * segments.len() as f64;
    Ok(acc.into_iter().map(|a| T::of(a / norm)).collect())
}

/// Total power `Σ|x|²`.
pub fn energy<T: Real>(x: &[Complex<T>]) -> T {
    x.iter().map(|z| z.norm_sqr()).sum()
}
