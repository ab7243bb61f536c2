//! Linear degradation operators A = M ∘ Wᵀ: a measurement matrix composed
//! with the inverse sparsifying transform, each with an exact adjoint.
//!
//! All operators are normalized so that ‖A‖₂ ≤ 1 by construction: pixel
//! selection and restricted unitary DFT rows are non-expansive over an
//! orthonormal synthesis, and a normalized nonnegative blur kernel has DFT
//! magnitudes at most one.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Error;
use crate::fft;
use crate::wavelet::{dwt_forward_with_layout, dwt_inverse, CoeffLayout, CoeffVector, WaveletSpec};
use crate::Result;

/// Images are stored in [0,1]; noise standard deviations are quoted on the
/// 8-bit 0-255 intensity scale and rescaled at synthesis time.
pub const INTENSITY_SCALE: f64 = 255.0;

/// Retained-sample set for subsampling operators.
#[derive(Debug, Clone)]
pub struct SamplingPattern {
    indices: Vec<usize>,
    rate: f64,
    seed: u64,
}

impl SamplingPattern {
    /// Uniform random selection of `round(rate * n)` distinct indices.
    /// `force_first` pins index 0 (the DC frequency for Fourier patterns)
    /// into the retained set.
    fn uniform(n: usize, rate: f64, seed: u64, force_first: bool) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sampling rate {rate} not in (0, 1]"
            )));
        }
        let m = ((rate * n as f64).round() as usize).min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // partial Fisher-Yates over an index pool
        let mut pool: Vec<usize> = (0..n).collect();
        let start = if force_first && m >= 1 { 1 } else { 0 };
        let mut indices = Vec::with_capacity(m);
        if start == 1 {
            indices.push(0);
            pool.swap_remove(0);
        }
        for _ in start..m {
            let j = rng.gen_range(0..pool.len());
            indices.push(pool.swap_remove(j));
        }
        indices.sort_unstable();
        Ok(Self {
            indices,
            rate,
            seed,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Which degradation process the operator models.
#[derive(Debug, Clone)]
pub enum ModelKind {
    Inpainting(SamplingPattern),
    PartialFourier {
        pattern: SamplingPattern,
        noise_sigma: f64,
    },
    GaussianBlur {
        sigma: f64,
        kernel_fft: Array2<Complex64>,
    },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Inpainting(_) => "inpainting",
            ModelKind::PartialFourier { .. } => "partial-fourier",
            ModelKind::GaussianBlur { .. } => "gaussian-blur",
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, ModelKind::PartialFourier { .. })
    }
}

/// Measurement payload; complex for partial Fourier sampling.
#[derive(Debug, Clone)]
pub enum MeasurementData {
    Real(Array1<f64>),
    Complex(Array1<Complex64>),
}

/// A measurement vector y tagged with the kind of model that produced it.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub data: MeasurementData,
    pub kind: &'static str,
}

impl Measurement {
    pub fn len(&self) -> usize {
        match &self.data {
            MeasurementData::Real(v) => v.len(),
            MeasurementData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Squared l2 norm (complex values contribute |v|^2).
    pub fn norm_sq(&self) -> f64 {
        match &self.data {
            MeasurementData::Real(v) => v.dot(v),
            MeasurementData::Complex(v) => v.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// Elementwise difference; kinds and lengths must match.
    pub fn sub(&self, other: &Measurement) -> Result<Measurement> {
        if self.kind != other.kind || self.len() != other.len() {
            return Err(Error::ShapeMismatch(format!(
                "measurement mismatch: {}[{}] vs {}[{}]",
                self.kind,
                self.len(),
                other.kind,
                other.len()
            )));
        }
        let data = match (&self.data, &other.data) {
            (MeasurementData::Real(a), MeasurementData::Real(b)) => MeasurementData::Real(a - b),
            (MeasurementData::Complex(a), MeasurementData::Complex(b)) => {
                MeasurementData::Complex(a - b)
            }
            _ => {
                return Err(Error::ShapeMismatch(
                    "cannot mix real and complex measurements".into(),
                ))
            }
        };
        Ok(Measurement {
            data,
            kind: self.kind,
        })
    }
}

/// Linear forward operator A = M ∘ Wᵀ with adjoint and a cached upper
/// bound on ‖A‖₂².
#[derive(Debug, Clone)]
pub struct ForwardModel {
    kind: ModelKind,
    layout: Arc<CoeffLayout>,
    spectral_bound: f64,
}

impl ForwardModel {
    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn layout(&self) -> &Arc<CoeffLayout> {
        &self.layout
    }

    pub fn wavelet(&self) -> WaveletSpec {
        self.layout.spec()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.layout.height(), self.layout.width())
    }

    /// Upper bound on ‖A‖₂² (holds by construction, validated in tests by
    /// power iteration).
    pub fn spectral_bound(&self) -> f64 {
        self.spectral_bound
    }

    pub fn measurement_len(&self) -> usize {
        match &self.kind {
            ModelKind::Inpainting(p) => p.len(),
            ModelKind::PartialFourier { pattern, .. } => pattern.len(),
            ModelKind::GaussianBlur { .. } => self.layout.len(),
        }
    }

    fn check_coeffs(&self, x: &CoeffVector) -> Result<()> {
        if x.len() != self.layout.len() {
            return Err(Error::ShapeMismatch(format!(
                "coefficient length {} vs model length {}",
                x.len(),
                self.layout.len()
            )));
        }
        Ok(())
    }

    /// Applies the operator: coefficients -> measurement.
    pub fn apply(&self, x: &CoeffVector) -> Result<Measurement> {
        self.check_coeffs(x)?;
        let img = dwt_inverse(x);
        let data = match &self.kind {
            ModelKind::Inpainting(pattern) => {
                let flat = img.as_slice().expect("contiguous image");
                MeasurementData::Real(Array1::from_iter(
                    pattern.indices.iter().map(|&i| flat[i]),
                ))
            }
            ModelKind::PartialFourier { pattern, .. } => {
                let spectrum = fft::unitary_fft2(&img);
                let flat = spectrum.as_slice().expect("contiguous spectrum");
                MeasurementData::Complex(Array1::from_iter(
                    pattern.indices.iter().map(|&i| flat[i]),
                ))
            }
            ModelKind::GaussianBlur { kernel_fft, .. } => {
                let blurred = fft::circular_convolve(&img, kernel_fft);
                MeasurementData::Real(Array1::from_iter(blurred.iter().copied()))
            }
        };
        Ok(Measurement {
            data,
            kind: self.kind.name(),
        })
    }

    /// Adjoint operator: measurement -> coefficients. For complex
    /// measurements this is the real part of the Hermitian adjoint, the
    /// derivative convention for real-valued iterates.
    pub fn adjoint(&self, m: &Measurement) -> Result<CoeffVector> {
        Ok(self.adjoint_parts(m)?.0)
    }

    /// Real and imaginary parts of the adjoint. The imaginary part is
    /// `None` for real measurements; for complex measurements it feeds the
    /// extra predictor input channels.
    pub fn adjoint_parts(&self, m: &Measurement) -> Result<(CoeffVector, Option<CoeffVector>)> {
        if m.kind != self.kind.name() {
            return Err(Error::ShapeMismatch(format!(
                "measurement kind {} does not match model {}",
                m.kind,
                self.kind.name()
            )));
        }
        if m.len() != self.measurement_len() {
            return Err(Error::ShapeMismatch(format!(
                "measurement length {} vs model {}",
                m.len(),
                self.measurement_len()
            )));
        }
        let (h, w) = self.shape();
        match (&self.kind, &m.data) {
            (ModelKind::Inpainting(pattern), MeasurementData::Real(v)) => {
                let mut img = Array2::zeros((h, w));
                {
                    let flat = img.as_slice_mut().expect("contiguous image");
                    for (&i, &val) in pattern.indices.iter().zip(v.iter()) {
                        flat[i] = val;
                    }
                }
                Ok((dwt_forward_with_layout(&img, &self.layout)?, None))
            }
            (ModelKind::PartialFourier { pattern, .. }, MeasurementData::Complex(v)) => {
                let mut spectrum = Array2::from_elem((h, w), Complex64::default());
                {
                    let flat = spectrum.as_slice_mut().expect("contiguous spectrum");
                    for (&i, &val) in pattern.indices.iter().zip(v.iter()) {
                        flat[i] = val;
                    }
                }
                let img = fft::unitary_ifft2(&spectrum);
                let re = dwt_forward_with_layout(&img.mapv(|z| z.re), &self.layout)?;
                let im = dwt_forward_with_layout(&img.mapv(|z| z.im), &self.layout)?;
                Ok((re, Some(im)))
            }
            (ModelKind::GaussianBlur { kernel_fft, .. }, MeasurementData::Real(v)) => {
                let img = Array2::from_shape_vec((h, w), v.to_vec())
                    .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
                // kernel is circularly symmetric, so the image-space blur is
                // self-adjoint
                let blurred = fft::circular_convolve(&img, kernel_fft);
                Ok((dwt_forward_with_layout(&blurred, &self.layout)?, None))
            }
            _ => Err(Error::ShapeMismatch(
                "measurement data kind does not match model".into(),
            )),
        }
    }

    /// Synthesizes y = A(W img) + noise. `noise_sigma` is quoted on the
    /// 0-255 intensity scale; complex measurements get independent noise in
    /// the real and imaginary parts.
    pub fn synthesize_measurement(
        &self,
        ground_truth: &Array2<f64>,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Measurement> {
        if noise_sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise sigma {noise_sigma} must be nonnegative"
            )));
        }
        let coeffs = dwt_forward_with_layout(ground_truth, &self.layout)?;
        let mut m = self.apply(&coeffs)?;
        if noise_sigma > 0.0 {
            let sigma = noise_sigma / INTENSITY_SCALE;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, sigma).expect("valid sigma");
            match &mut m.data {
                MeasurementData::Real(v) => {
                    for x in v.iter_mut() {
                        *x += normal.sample(&mut rng);
                    }
                }
                MeasurementData::Complex(v) => {
                    for z in v.iter_mut() {
                        *z += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
                    }
                }
            }
        }
        Ok(m)
    }
}

/// Random pixel mask inpainting operator.
pub fn make_inpainting(
    spec: WaveletSpec,
    height: usize,
    width: usize,
    rate: f64,
    seed: u64,
) -> Result<ForwardModel> {
    let layout = CoeffLayout::new(spec, height, width)?;
    let pattern = SamplingPattern::uniform(height * width, rate, seed, false)?;
    Ok(ForwardModel {
        kind: ModelKind::Inpainting(pattern),
        layout,
        spectral_bound: 1.0,
    })
}

/// Partial unitary-DFT sampling operator. The DC frequency is always
/// retained so the image mean is observed.
pub fn make_partial_fourier(
    spec: WaveletSpec,
    height: usize,
    width: usize,
    rate: f64,
    seed: u64,
    noise_sigma: f64,
) -> Result<ForwardModel> {
    if noise_sigma < 0.0 {
        return Err(Error::InvalidParameter(
            "noise sigma must be nonnegative".into(),
        ));
    }
    let layout = CoeffLayout::new(spec, height, width)?;
    let pattern = SamplingPattern::uniform(height * width, rate, seed, true)?;
    Ok(ForwardModel {
        kind: ModelKind::PartialFourier {
            pattern,
            noise_sigma,
        },
        layout,
        spectral_bound: 1.0,
    })
}

/// Circular Gaussian blur operator, DFT-diagonalized. The kernel sums to
/// one, so constants are preserved and the spectral bound is exactly 1.
pub fn make_gaussian_blur(
    spec: WaveletSpec,
    height: usize,
    width: usize,
    sigma: f64,
) -> Result<ForwardModel> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "blur sigma {sigma} must be positive"
        )));
    }
    let layout = CoeffLayout::new(spec, height, width)?;
    let mut kernel = Array2::zeros((height, width));
    let mut sum = 0.0;
    for r in 0..height {
        let dr = r.min(height - r) as f64;
        for c in 0..width {
            let dc = c.min(width - c) as f64;
            let v = (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp();
            kernel[(r, c)] = v;
            sum += v;
        }
    }
    kernel.mapv_inplace(|v| v / sum);
    let mut kernel_fft = kernel.mapv(|v| Complex64::new(v, 0.0));
    fft::fft2_inplace(&mut kernel_fft, false);
    Ok(ForwardModel {
        kind: ModelKind::GaussianBlur { sigma, kernel_fft },
        layout,
        spectral_bound: 1.0,
    })
}
