//! The LASSO objective F(x) = ½‖Ax − y‖² + λ‖x‖₁ and its services:
//! gradient, Lipschitz estimation, soft-threshold / scaled prox, and the
//! image-domain NMSE metric.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::forward::ForwardModel;
use crate::wavelet::{dwt_inverse, CoeffLayout, CoeffVector};
use crate::{Measurement, Result};

/// NMSE sentinel for an exact match, keeping report files finite.
pub const NMSE_EXACT_MATCH_DB: f64 = -300.0;

/// An inverse problem instance: operator, measurement, regularization
/// weight, and the estimated Lipschitz constant of the smooth part.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    pub model: ForwardModel,
    pub y: Measurement,
    pub lambda: f64,
    pub lipschitz: f64,
}

impl LassoProblem {
    /// Builds a problem, estimating the Lipschitz constant by power
    /// iteration.
    pub fn new(model: ForwardModel, y: Measurement, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda {lambda} must be positive"
            )));
        }
        if y.len() != model.measurement_len() {
            return Err(Error::ShapeMismatch(format!(
                "measurement length {} vs model {}",
                y.len(),
                model.measurement_len()
            )));
        }
        let lipschitz = estimate_lipschitz(&model);
        Ok(Self {
            model,
            y,
            lambda,
            lipschitz,
        })
    }

    pub fn layout(&self) -> &std::sync::Arc<CoeffLayout> {
        self.model.layout()
    }

    /// Data fidelity f(x) = ½‖Ax − y‖².
    pub fn fidelity(&self, x: &CoeffVector) -> Result<f64> {
        let r = self.model.apply(x)?.sub(&self.y)?;
        Ok(0.5 * r.norm_sq())
    }

    /// ∇f(x) = Aᵀ(Ax − y) (real part of the Hermitian adjoint for complex
    /// measurements).
    pub fn gradient(&self, x: &CoeffVector) -> Result<CoeffVector> {
        let r = self.model.apply(x)?.sub(&self.y)?;
        self.model.adjoint(&r)
    }

    /// Full objective F(x) = f(x) + λ‖x‖₁.
    pub fn objective(&self, x: &CoeffVector) -> Result<f64> {
        Ok(self.fidelity(x)? + self.lambda * x.norm_l1())
    }
}

/// Grouped diagonal scaling: one positive value per wavelet subband, all
/// within [1/δ, δ] so the induced matrix stays in the admissible set.
#[derive(Debug, Clone)]
pub struct DiagScaling {
    values: Vec<f64>,
    delta: f64,
}

impl DiagScaling {
    pub fn new(values: Vec<f64>, delta: f64) -> Result<Self> {
        if !(delta >= 1.0) {
            return Err(Error::InvalidParameter(format!("delta {delta} must be >= 1")));
        }
        let lo = 1.0 / delta;
        for (g, &v) in values.iter().enumerate() {
            if !(v >= lo && v <= delta) {
                return Err(Error::InvalidParameter(format!(
                    "scaling value {v} for group {g} outside [{lo}, {delta}]"
                )));
            }
        }
        Ok(Self { values, delta })
    }

    /// Clamps out-of-range entries into [1/δ, δ]; reports whether any
    /// clamping happened.
    pub fn clamped(values: Vec<f64>, delta: f64) -> (Self, bool) {
        let lo = 1.0 / delta;
        let mut clamped = false;
        let values = values
            .into_iter()
            .map(|v| {
                let c = v.clamp(lo, delta);
                if c != v {
                    clamped = true;
                }
                c
            })
            .collect();
        (Self { values, delta }, clamped)
    }

    pub fn identity(groups: usize, delta: f64) -> Self {
        Self {
            values: vec![1.0; groups],
            delta: delta.max(1.0),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Expands group values to a full per-coefficient vector following the
    /// subband layout.
    pub fn expand(&self, layout: &CoeffLayout) -> Result<Array1<f64>> {
        if self.values.len() != layout.num_groups() {
            return Err(Error::LayoutMismatch(format!(
                "{} scaling groups vs {} subbands",
                self.values.len(),
                layout.num_groups()
            )));
        }
        let mut out = Array1::zeros(layout.len());
        for (sb, &v) in layout.subbands().iter().zip(self.values.iter()) {
            for i in sb.range() {
                out[i] = v;
            }
        }
        Ok(out)
    }
}

/// Elementwise soft threshold: the exact prox of τᵢ|·| per coordinate.
pub fn soft_threshold(x: &CoeffVector, tau: &Array1<f64>) -> Result<CoeffVector> {
    if tau.len() != x.len() {
        return Err(Error::ShapeMismatch(format!(
            "threshold length {} vs vector {}",
            tau.len(),
            x.len()
        )));
    }
    if tau.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidParameter("negative soft threshold".into()));
    }
    let data = Array1::from_shape_fn(x.len(), |i| shrink(x.data()[i], tau[i]));
    CoeffVector::from_data(x.layout().clone(), data)
}

/// Soft threshold with a single scalar threshold.
pub fn soft_threshold_scalar(x: &CoeffVector, tau: f64) -> Result<CoeffVector> {
    if tau < 0.0 {
        return Err(Error::InvalidParameter("negative soft threshold".into()));
    }
    let data = x.data().mapv(|v| shrink(v, tau));
    CoeffVector::from_data(x.layout().clone(), data)
}

#[inline]
fn shrink(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Scaled prox of the λ‖·‖₁ term for a grouped diagonal scaling:
/// elementwise soft threshold with τᵢ = λ dᵢ.
pub fn prox_scaled(x: &CoeffVector, d: &DiagScaling, lambda: f64) -> Result<CoeffVector> {
    let scale = d.expand(x.layout())?;
    let tau = scale.mapv(|s| lambda * s);
    soft_threshold(x, &tau)
}

/// Power-iteration estimate of ‖A‖₂² with a 1.01 safety factor, so the
/// returned value upper-bounds the true Lipschitz constant of ∇f with
/// overwhelming probability.
pub fn estimate_lipschitz(model: &ForwardModel) -> f64 {
    let layout = model.layout().clone();
    let n = layout.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_11f5);
    let mut v = CoeffVector::from_data(
        layout.clone(),
        Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0f64)),
    )
    .expect("layout length");
    let mut norm = v.norm();
    if norm == 0.0 {
        return 1.01e-12;
    }
    v.data_mut().mapv_inplace(|x| x / norm);
    let mut estimate = 0.0;
    for _ in 0..100 {
        let w = model
            .adjoint(&model.apply(&v).expect("shapes fixed"))
            .expect("shapes fixed");
        let rayleigh = v.dot(&w);
        norm = w.norm();
        if norm <= f64::EPSILON {
            estimate = rayleigh.max(0.0);
            break;
        }
        let mut w = w;
        w.data_mut().mapv_inplace(|x| x / norm);
        let change = (rayleigh - estimate).abs();
        estimate = rayleigh;
        v = w;
        if change < 1e-8 * estimate.max(1e-300) {
            break;
        }
    }
    (estimate.max(1e-12)) * 1.01
}

/// Image-domain normalized MSE in dB:
/// 10 log₁₀(‖Wᵀ(x̂ − x_ref)‖² / ‖Wᵀ x_ref‖²). Exact matches return the
/// −300 dB sentinel.
pub fn nmse_db(x_hat: &CoeffVector, x_ref: &CoeffVector) -> Result<f64> {
    if !x_hat.same_layout(x_ref) {
        return Err(Error::LayoutMismatch("nmse operands differ".into()));
    }
    let diff = CoeffVector::from_data(x_hat.layout().clone(), x_hat.data() - x_ref.data())?;
    let err_img = dwt_inverse(&diff);
    let ref_img = dwt_inverse(x_ref);
    let num: f64 = err_img.iter().map(|v| v * v).sum();
    let den: f64 = ref_img.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::InvalidParameter("nmse reference is zero".into()));
    }
    if num == 0.0 || 10.0 * (num / den).log10() < NMSE_EXACT_MATCH_DB {
        return Ok(NMSE_EXACT_MATCH_DB);
    }
    Ok(10.0 * (num / den).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{make_inpainting, MeasurementData};
    use crate::wavelet::{dwt_forward, WaveletFamily, WaveletSpec};
    use ndarray::Array2;

    fn spec() -> WaveletSpec {
        WaveletSpec::new(WaveletFamily::Symlet4, 2).unwrap()
    }

    fn small_problem(seed: u64) -> (LassoProblem, CoeffVector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = Array2::from_shape_fn((16, 16), |_| rng.gen_range(0.0..1.0));
        let model = make_inpainting(spec(), 16, 16, 0.6, seed + 1).unwrap();
        let y = model.synthesize_measurement(&img, 0.0, 0).unwrap();
        let gt = dwt_forward(&img, spec()).unwrap();
        (LassoProblem::new(model, y, 0.1).unwrap(), gt)
    }

    #[test]
    fn fidelity_at_zero_is_half_y_norm() {
        let (p, _) = small_problem(1);
        let x0 = CoeffVector::zeros(p.layout().clone());
        let f = p.fidelity(&x0).unwrap();
        assert!((f - 0.5 * p.y.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn fidelity_vanishes_at_consistent_point() {
        let (p, gt) = small_problem(2);
        // gt reproduces y exactly (noiseless synthesis)
        assert!(p.fidelity(&gt).unwrap() < 1e-20);
        let g = p.gradient(&gt).unwrap();
        assert!(g.norm() < 1e-10);
    }

    #[test]
    fn objective_splits_into_parts() {
        let (p, gt) = small_problem(3);
        let f = p.fidelity(&gt).unwrap();
        let obj = p.objective(&gt).unwrap();
        assert!((obj - (f + p.lambda * gt.norm_l1())).abs() < 1e-12);
    }

    #[test]
    fn identity_model_gradient_is_x_minus_y() {
        // rate-1 inpainting makes A an orthonormal map, so
        // grad = A'(Ax - y) = x - A'y
        let (mut p, gt) = small_problem(4);
        p = {
            let model = make_inpainting(spec(), 16, 16, 1.0, 9).unwrap();
            let y = model.apply(&gt).unwrap();
            LassoProblem::new(model, y, 0.1).unwrap()
        };
        let x = {
            let mut c = CoeffVector::zeros(p.layout().clone());
            c.data_mut().fill(0.25);
            c
        };
        let g = p.gradient(&x).unwrap();
        let aty = p.model.adjoint(&p.y).unwrap();
        for i in 0..x.len() {
            assert!((g.data()[i] - (x.data()[i] - aty.data()[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn soft_threshold_hand_case() {
        let spec1 = WaveletSpec::new(WaveletFamily::Haar, 1).unwrap();
        let layout = CoeffLayout::new(spec1, 2, 2).unwrap();
        let x = CoeffVector::from_data(layout, ndarray::arr1(&[3.0, -0.5, 1.0, 0.0])).unwrap();
        let tau = Array1::from_elem(4, 1.0);
        let out = soft_threshold(&x, &tau).unwrap();
        assert_eq!(out.data().to_vec(), vec![2.0, 0.0, 0.0, 0.0]);
        // tau = 0 is the identity
        let id = soft_threshold(&x, &Array1::zeros(4)).unwrap();
        assert_eq!(id.data().to_vec(), x.data().to_vec());
        // negative threshold rejected
        assert!(soft_threshold(&x, &ndarray::arr1(&[-1.0, 0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn prox_scaled_matches_plain_soft_threshold_for_identity() {
        let (p, gt) = small_problem(5);
        let d = DiagScaling::identity(p.layout().num_groups(), 10.0);
        let a = prox_scaled(&gt, &d, p.lambda).unwrap();
        let b = soft_threshold_scalar(&gt, p.lambda).unwrap();
        for i in 0..a.len() {
            assert_eq!(a.data()[i], b.data()[i]);
        }
    }

    #[test]
    fn prox_scaled_group_value_scales_thresholds() {
        let (p, gt) = small_problem(6);
        let groups = p.layout().num_groups();
        let mut vals = vec![1.0; groups];
        vals[0] = 2.0;
        let d = DiagScaling::new(vals, 10.0).unwrap();
        let scaled = prox_scaled(&gt, &d, p.lambda).unwrap();
        let sb = p.layout().subbands()[0];
        for i in sb.range() {
            assert_eq!(scaled.data()[i], shrink(gt.data()[i], 2.0 * p.lambda));
        }
        for i in sb.len()..gt.len() {
            assert_eq!(scaled.data()[i], shrink(gt.data()[i], p.lambda));
        }
    }

    #[test]
    fn diag_scaling_range_enforced() {
        assert!(DiagScaling::new(vec![0.05], 10.0).is_err());
        assert!(DiagScaling::new(vec![11.0], 10.0).is_err());
        let (d, clamped) = DiagScaling::clamped(vec![0.05, 11.0, 1.0], 10.0);
        assert!(clamped);
        assert_eq!(d.values(), &[0.1, 10.0, 1.0]);
    }

    #[test]
    fn lipschitz_of_identity_like_model() {
        let model = make_inpainting(spec(), 16, 16, 1.0, 13).unwrap();
        let l = estimate_lipschitz(&model);
        assert!((l - 1.01).abs() < 1e-6, "estimate {l}");
    }

    #[test]
    fn lipschitz_of_blur_bounded() {
        let model = crate::forward::make_gaussian_blur(spec(), 16, 16, 2.0).unwrap();
        let l = estimate_lipschitz(&model);
        assert!(l <= 1.01 + 1e-9, "estimate {l}");
    }

    #[test]
    fn nmse_cases() {
        let (_, gt) = small_problem(7);
        assert_eq!(nmse_db(&gt, &gt).unwrap(), NMSE_EXACT_MATCH_DB);
        let zero = CoeffVector::zeros(gt.layout().clone());
        assert!((nmse_db(&zero, &gt).unwrap()).abs() < 1e-12);
        // scaling by 1.1 gives exactly 10 log10(0.01) = -20 dB
        let scaled =
            CoeffVector::from_data(gt.layout().clone(), gt.data().mapv(|v| 1.1 * v)).unwrap();
        assert!((nmse_db(&scaled, &gt).unwrap() + 20.0).abs() < 1e-9);
    }

    #[test]
    fn measurement_kind_mismatch_rejected() {
        let (p, _) = small_problem(8);
        let bad = Measurement {
            data: MeasurementData::Real(Array1::zeros(3)),
            kind: "inpainting",
        };
        assert!(p.model.adjoint(&bad).is_err());
    }
}
