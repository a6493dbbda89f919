//! Thin wrappers around rustfft for the cyclic convolutions used by the
//! kernel tables, the circulant noise sampler, and the spectral steppers.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Forward/inverse plans plus a scratch buffer for one transform size.
pub struct FftPair {
    pub n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        FftPair {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    /// Unnormalized inverse; callers divide by `n`.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.inverse.process_with_scratch(buf, &mut self.scratch);
    }
}

/// Cyclic convolution of two real sequences of equal length.
pub fn conv_cyclic_real(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    assert_eq!(n, b.len());
    let mut pair = FftPair::new(n);
    // Pack both sequences into one complex transform.
    let mut buf: Vec<Complex64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| Complex64::new(x, y))
        .collect();
    pair.forward(&mut buf);
    let mut prod = vec![Complex64::default(); n];
    for k in 0..n {
        let kc = (n - k) % n;
        let zk = buf[k];
        let zkc = buf[kc].conj();
        let ahat = 0.5 * (zk + zkc);
        let bhat = Complex64::new(0.0, -0.5) * (zk - zkc);
        prod[k] = ahat * bhat;
    }
    pair.inverse(&mut prod);
    prod.iter().map(|z| z.re / n as f64).collect()
}

/// Real part of the inverse DFT of `spectrum` (unnormalized rustfft inverse,
/// normalized here).
pub fn irfft_real(spectrum: &[Complex64]) -> Vec<f64> {
    let n = spectrum.len();
    let mut pair = FftPair::new(n);
    let mut buf = spectrum.to_vec();
    pair.inverse(&mut buf);
    buf.iter().map(|z| z.re / n as f64).collect()
}

/// Angular wavenumber of DFT bin `m` on a torus of circumference `length`.
pub fn wavenumber(m: usize, n: usize, length: f64) -> f64 {
    let signed = if m <= n / 2 {
        m as isize
    } else {
        m as isize - n as isize
    };
    2.0 * std::f64::consts::PI * signed as f64 / length
}
