//! Thin 2-D FFT helpers over rustfft. Plans are cached per thread.

use std::cell::RefCell;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_rows(data: &mut Array2<Complex64>, inverse: bool) {
    let (h, w) = data.dim();
    PLANNER.with(|p| {
        let fft = if inverse {
            p.borrow_mut().plan_fft_inverse(w)
        } else {
            p.borrow_mut().plan_fft_forward(w)
        };
        let mut buf = vec![Complex64::default(); w];
        for r in 0..h {
            for c in 0..w {
                buf[c] = data[(r, c)];
            }
            fft.process(&mut buf);
            for c in 0..w {
                data[(r, c)] = buf[c];
            }
        }
    });
}

fn fft_cols(data: &mut Array2<Complex64>, inverse: bool) {
    let (h, w) = data.dim();
    PLANNER.with(|p| {
        let fft = if inverse {
            p.borrow_mut().plan_fft_inverse(h)
        } else {
            p.borrow_mut().plan_fft_forward(h)
        };
        let mut buf = vec![Complex64::default(); h];
        for c in 0..w {
            for r in 0..h {
                buf[r] = data[(r, c)];
            }
            fft.process(&mut buf);
            for r in 0..h {
                data[(r, c)] = buf[r];
            }
        }
    });
}

/// In-place unnormalized 2-D FFT (inverse leaves the customary factor
/// `h*w` in place for the caller to handle).
pub(crate) fn fft2_inplace(data: &mut Array2<Complex64>, inverse: bool) {
    fft_rows(data, inverse);
    fft_cols(data, inverse);
}

/// Unitary 2-D DFT of a real image.
pub(crate) fn unitary_fft2(img: &Array2<f64>) -> Array2<Complex64> {
    let mut data = img.mapv(|v| Complex64::new(v, 0.0));
    fft2_inplace(&mut data, false);
    let scale = 1.0 / ((img.len() as f64).sqrt());
    data.mapv_inplace(|v| v * scale);
    data
}

/// Unitary inverse 2-D DFT.
pub(crate) fn unitary_ifft2(spectrum: &Array2<Complex64>) -> Array2<Complex64> {
    let mut data = spectrum.clone();
    fft2_inplace(&mut data, true);
    let scale = 1.0 / ((spectrum.len() as f64).sqrt());
    data.mapv_inplace(|v| v * scale);
    data
}

/// Circular convolution of a real image with a kernel given by its
/// unnormalized 2-D DFT.
pub(crate) fn circular_convolve(img: &Array2<f64>, kernel_fft: &Array2<Complex64>) -> Array2<f64> {
    let mut data = img.mapv(|v| Complex64::new(v, 0.0));
    fft2_inplace(&mut data, false);
    data.zip_mut_with(kernel_fft, |v, k| *v *= k);
    fft2_inplace(&mut data, true);
    let scale = 1.0 / (img.len() as f64);
    data.mapv(|v| v.re * scale)
}
