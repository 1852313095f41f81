//! Thin wrappers around rustfft for the spectral operations used throughout.

use num_complex::Complex;
use rustfft::FftPlanner;

pub type C64 = Complex<f64>;

/// Forward DFT, unnormalized (sum convention).
pub fn fft(data: &mut [C64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(data.len()).process(data);
}

/// Inverse DFT, normalized by 1/n so that ifft(fft(x)) = x.
pub fn ifft(data: &mut [C64]) {
    let n = data.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(data);
    let scale = 1.0 / n as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Signed integer wavenumber for bin `i` of an n-point DFT:
/// 0, 1, ..., n/2, -(n/2 - 1), ..., -1.
pub fn wavenumber(i: usize, n: usize) -> i64 {
    let i = i as i64;
    let n = n as i64;
    if i <= n / 2 {
        i
    } else {
        i - n
    }
}

/// Multiplier applied to bin `i` for the order-th spectral derivative on a
/// period-`length` grid. The Nyquist bin gets zero for odd orders (the
/// symmetric convention); even orders keep the real power of the modulus.
pub fn derivative_symbol(i: usize, n: usize, length: f64, order: u32) -> C64 {
    let m = wavenumber(i, n);
    let k = 2.0 * std::f64::consts::PI * m as f64 / length;
    if order % 2 == 1 && n % 2 == 0 && 2 * i == n {
        return C64::new(0.0, 0.0);
    }
    // (i k)^order
    let ik = C64::new(0.0, k);
    ik.powu(order)
}

/// Fourier coefficients (normalized: u(y) = sum_m coef[m] e^{i 2 pi m y / L})
/// of real samples, indexed by DFT bin.
pub fn coefficients(samples: &[f64]) -> Vec<C64> {
    let n = samples.len();
    let mut buf: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
    fft(&mut buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
    buf
}
