//! Driving-noise synthesis and spectral diagnostics.
//!
//! The noise is white in time with spatial covariance `f`: space-time white
//! (`f = δ_0`), a Gaussian kernel (`f = p_1`), or a Cauchy kernel
//! (`f(x) = Π_j (1+x_j²)^{-1}`). Per time step the solver consumes one
//! [`NoiseSlice`] of cell masses: i.i.d. `N(0, dt·dx)` for white noise, and a
//! stationary vector with `Cov(cell_j, cell_k) = dt·dx²·f((j-k)dx)` realized
//! by circulant embedding for colored noise.
//!
//! Every draw is a pure function of `(seed, replica, step)`, so replicas can
//! run in parallel (and be re-run) without stream coordination.

use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::quad::{adaptive_simpson, gauss_laguerre};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// The three spatial covariances of the driving noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    GaussianKernel,
    CauchyKernel,
}

impl NoiseKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(NoiseKind::White),
            "gaussian" => Ok(NoiseKind::GaussianKernel),
            "cauchy" => Ok(NoiseKind::CauchyKernel),
            other => Err(Error::domain(format!("unknown noise kind '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::GaussianKernel => "gaussian",
            NoiseKind::CauchyKernel => "cauchy",
        }
    }
}

/// A concrete noise covariance in dimension `d`, with closed-form density
/// `f` and spectral density `f̂(z) = ∫ e^{iz·x} f(x) dx`.
#[derive(Clone, Copy, Debug)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub d: usize,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, d: usize) -> Result<Self> {
        if d == 0 || d > 2 {
            return Err(Error::domain(format!("d = {d} unsupported (d ∈ {{1,2}})")));
        }
        Ok(NoiseSpec { kind, d })
    }

    pub fn is_white(&self) -> bool {
        self.kind == NoiseKind::White
    }

    /// Covariance density `f(z)`. White noise has no density (δ_0).
    pub fn density(&self, z: &[f64]) -> Result<f64> {
        debug_assert_eq!(z.len(), self.d);
        match self.kind {
            NoiseKind::White => Err(Error::domain("white noise covariance is not a density")),
            NoiseKind::GaussianKernel => {
                let n2: f64 = z.iter().map(|v| v * v).sum();
                Ok((2.0 * PI).powf(-0.5 * self.d as f64) * (-0.5 * n2).exp())
            }
            NoiseKind::CauchyKernel => Ok(z.iter().map(|v| 1.0 / (1.0 + v * v)).product()),
        }
    }

    /// Spectral density `f̂(z)`; the white-noise spectral measure is
    /// Lebesgue, i.e. density 1.
    pub fn fhat(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.d);
        match self.kind {
            NoiseKind::White => 1.0,
            NoiseKind::GaussianKernel => {
                let n2: f64 = z.iter().map(|v| v * v).sum();
                (-0.5 * n2).exp()
            }
            NoiseKind::CauchyKernel => {
                PI.powi(self.d as i32) * (-z.iter().map(|v| v.abs()).sum::<f64>()).exp()
            }
        }
    }

    /// `f(R^d)`; `None` flags the white-noise case (no finite density mass).
    pub fn total_mass(&self) -> Option<f64> {
        match self.kind {
            NoiseKind::White => None,
            NoiseKind::GaussianKernel => Some(1.0),
            NoiseKind::CauchyKernel => Some(PI.powi(self.d as i32)),
        }
    }

    /// `f̂(R^d) = ∫ f̂`; `None` flags an infinite spectral mass (white).
    pub fn spectral_mass(&self) -> Option<f64> {
        match self.kind {
            NoiseKind::White => None,
            NoiseKind::GaussianKernel => Some((2.0 * PI).powf(0.5 * self.d as f64)),
            NoiseKind::CauchyKernel => Some((2.0 * PI).powi(self.d as i32)),
        }
    }
}

/// One-axis covariance density periodized onto a torus of the given
/// circumference: `Σ_k f_axis(x + k·period)`.
///
/// Periodization (rather than torus-distance sampling) keeps the DFT of
/// the covariance row a Poisson sum of `f̂ ≥ 0`, so the circulant
/// embedding stays nonnegative-definite even for the polynomial Cauchy
/// tails. The Cauchy sum has a closed form; the Gaussian wraps decay like
/// `e^{-period²/2}` and three terms suffice.
pub fn periodized_axis_density(kind: NoiseKind, x: f64, period: f64) -> Result<f64> {
    match kind {
        NoiseKind::White => Err(Error::domain("white noise covariance is not a density")),
        NoiseKind::GaussianKernel => {
            let mut acc = 0.0;
            for k in -3i32..=3 {
                let y = x + k as f64 * period;
                acc += (2.0 * PI).powf(-0.5) * (-0.5 * y * y).exp();
            }
            Ok(acc)
        }
        NoiseKind::CauchyKernel => {
            let a = 2.0 * PI / period;
            Ok(PI / period * a.sinh() / (a.cosh() - (a * x).cos()))
        }
    }
}

/// Gaussian increments for one time step on the simulation grid.
pub struct NoiseSlice {
    pub increments: Vec<f64>,
    pub dt: f64,
    pub dx: f64,
    pub seed_path: (u64, u64, u64),
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Counter-based stream: a ChaCha8 generator keyed by `(seed, replica,
/// step, stream)` through SplitMix64 expansion. Identical keys yield
/// identical draws; distinct keys yield independent streams.
pub fn keyed_rng(seed: u64, replica: u64, step: u64, stream: u64) -> ChaCha8Rng {
    let mut state = seed ^ 0xD1B54A32D192ED03;
    let words = [
        splitmix64(&mut state) ^ replica.wrapping_mul(0xA24BAED4963EE407),
        splitmix64(&mut state) ^ step.wrapping_mul(0x9FB21C651E98DF25),
        splitmix64(&mut state) ^ stream.wrapping_mul(0xC2B2AE3D27D4EB4F),
        splitmix64(&mut state),
    ];
    let mut mixed = words[0] ^ words[1].rotate_left(21) ^ words[2].rotate_left(42) ^ words[3];
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        let word = splitmix64(&mut mixed);
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// I.i.d. `N(0, dt·dx)` cell masses of space-time white noise.
pub fn sample_white_slice(
    n: usize,
    dx: f64,
    dt: f64,
    seed_path: (u64, u64, u64),
) -> Result<NoiseSlice> {
    if !(dx > 0.0) || dt < 0.0 {
        return Err(Error::domain("white slice needs dx > 0 and dt ≥ 0"));
    }
    let (seed, replica, step) = seed_path;
    let mut rng = keyed_rng(seed, replica, step, 0);
    let sd = (dt * dx).sqrt();
    let increments = (0..n)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(NoiseSlice {
        increments,
        dt,
        dx,
        seed_path,
    })
}

/// Circulant-embedding sampler for spatially colored noise on a periodic
/// grid of `n` cells, immutable after construction and shared across
/// replicas.
///
/// The embedding torus has at least `2n` cells (rounded to a power of two)
/// so the retained window sees the line covariance `f((j-k)dx)` up to the
/// wrap tail. Eigenvalues are the DFT of the covariance row at unit `dt`;
/// draws scale by `√dt`.
pub struct ColoredSampler {
    pub n: usize,
    pub m: usize,
    pub dx: f64,
    sqrt_lambda: Vec<f64>,
    /// Most negative raw eigenvalue relative to the largest (diagnostic).
    pub clamp_relative: f64,
}

impl ColoredSampler {
    pub fn new(spec: &NoiseSpec, n: usize, dx: f64) -> Result<Self> {
        if spec.is_white() {
            return Err(Error::domain("circulant sampler requires a colored spec"));
        }
        if spec.d != 1 {
            return Err(Error::domain(
                "ColoredSampler is one-dimensional; see ColoredSampler2d",
            ));
        }
        let m = (2 * n).next_power_of_two();
        let period = m as f64 * dx;
        let mut row = vec![Complex64::default(); m];
        for (j, r) in row.iter_mut().enumerate() {
            let dist = j.min(m - j) as f64 * dx;
            *r = Complex64::new(
                dx * dx * periodized_axis_density(spec.kind, dist, period)?,
                0.0,
            );
        }
        let mut fft = FftPair::new(m);
        fft.forward(&mut row);
        let max_lambda = row.iter().map(|z| z.re).fold(0.0f64, f64::max);
        let mut clamp_relative = 0.0f64;
        let mut sqrt_lambda = Vec::with_capacity(m);
        for z in &row {
            if z.re < 0.0 {
                clamp_relative = clamp_relative.max(-z.re / max_lambda);
                if -z.re > 1e-10 * max_lambda {
                    return Err(Error::Embedding { value: z.re });
                }
                sqrt_lambda.push(0.0);
            } else {
                sqrt_lambda.push(z.re.sqrt());
            }
        }
        Ok(ColoredSampler {
            n,
            m,
            dx,
            sqrt_lambda,
            clamp_relative,
        })
    }

    /// Covariance row actually realized after clamping (inverse DFT of the
    /// clamped eigenvalues); equals the target row up to the clamp.
    pub fn realized_row(&self) -> Vec<f64> {
        let spec: Vec<Complex64> = self
            .sqrt_lambda
            .iter()
            .map(|&s| Complex64::new(s * s, 0.0))
            .collect();
        crate::fft::irfft_real(&spec)
    }

    /// Draw one slice into `out` using caller-owned FFT workspace of size
    /// `self.m`. Pure function of `(seed_path, dt)`.
    pub fn sample_into(
        &self,
        fft: &mut FftPair,
        buf: &mut Vec<Complex64>,
        dt: f64,
        seed_path: (u64, u64, u64),
        out: &mut [f64],
    ) {
        assert_eq!(fft.n, self.m);
        assert_eq!(out.len(), self.n);
        if dt == 0.0 {
            out.fill(0.0);
            return;
        }
        let (seed, replica, step) = seed_path;
        let mut rng = keyed_rng(seed, replica, step, 1);
        buf.clear();
        buf.extend(self.sqrt_lambda.iter().map(|&s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(s * re, s * im)
        }));
        fft.inverse(buf);
        let scale = (dt / self.m as f64).sqrt();
        for (o, z) in out.iter_mut().zip(buf.iter()) {
            *o = scale * z.re;
        }
    }

    /// Convenience sampler that owns its workspace.
    pub fn sample(&self, dt: f64, seed_path: (u64, u64, u64)) -> NoiseSlice {
        let mut fft = FftPair::new(self.m);
        let mut buf = Vec::with_capacity(self.m);
        let mut increments = vec![0.0; self.n];
        self.sample_into(&mut fft, &mut buf, dt, seed_path, &mut increments);
        NoiseSlice {
            increments,
            dt,
            dx: self.dx,
            seed_path,
        }
    }
}

/// Two-dimensional circulant sampler on an `n × n` periodic grid
/// (case 2, d = 2). Cell covariance `dt·dx⁴·f((j-k)dx, (l-m)dx)`.
pub struct ColoredSampler2d {
    pub n: usize,
    pub m: usize,
    pub dx: f64,
    sqrt_lambda: Vec<f64>,
}

impl ColoredSampler2d {
    pub fn new(spec: &NoiseSpec, n: usize, dx: f64) -> Result<Self> {
        if spec.is_white() || spec.d != 2 {
            return Err(Error::domain(
                "ColoredSampler2d requires a colored spec with d = 2",
            ));
        }
        let m = (2 * n).next_power_of_two();
        let period = m as f64 * dx;
        // Both specs factor over axes, so the periodized 2-D row is the
        // product of periodized axis rows.
        let mut axis = vec![0.0; m];
        for (j, v) in axis.iter_mut().enumerate() {
            let dist = j.min(m - j) as f64 * dx;
            *v = periodized_axis_density(spec.kind, dist, period)?;
        }
        let mut row = vec![Complex64::default(); m * m];
        for j in 0..m {
            for k in 0..m {
                row[j * m + k] = Complex64::new(dx.powi(4) * axis[j] * axis[k], 0.0);
            }
        }
        fft2_inplace(&mut row, m, false);
        let max_lambda = row.iter().map(|z| z.re).fold(0.0f64, f64::max);
        let mut sqrt_lambda = Vec::with_capacity(m * m);
        for z in &row {
            if z.re < -1e-10 * max_lambda {
                return Err(Error::Embedding { value: z.re });
            }
            sqrt_lambda.push(z.re.max(0.0).sqrt());
        }
        Ok(ColoredSampler2d {
            n,
            m,
            dx,
            sqrt_lambda,
        })
    }

    /// Draw one `n × n` slice (row-major) scaled for time step `dt`.
    pub fn sample(&self, dt: f64, seed_path: (u64, u64, u64)) -> Vec<f64> {
        let m = self.m;
        if dt == 0.0 {
            return vec![0.0; self.n * self.n];
        }
        let (seed, replica, step) = seed_path;
        let mut rng = keyed_rng(seed, replica, step, 1);
        let mut buf: Vec<Complex64> = self
            .sqrt_lambda
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(s * re, s * im)
            })
            .collect();
        fft2_inplace(&mut buf, m, true);
        let scale = (dt / (m * m) as f64).sqrt();
        let mut out = vec![0.0; self.n * self.n];
        for j in 0..self.n {
            for k in 0..self.n {
                out[j * self.n + k] = scale * buf[j * m + k].re;
            }
        }
        out
    }
}

/// In-place 2-D DFT of an `m × m` row-major buffer.
pub fn fft2_inplace(buf: &mut [Complex64], m: usize, inverse: bool) {
    let mut fft = FftPair::new(m);
    let run = |fft: &mut FftPair, row: &mut [Complex64]| {
        if inverse {
            fft.inverse(row);
        } else {
            fft.forward(row);
        }
    };
    for row in buf.chunks_mut(m) {
        run(&mut fft, row);
    }
    let mut col = vec![Complex64::default(); m];
    for k in 0..m {
        for j in 0..m {
            col[j] = buf[j * m + k];
        }
        run(&mut fft, &mut col);
        for j in 0..m {
            buf[j * m + k] = col[j];
        }
    }
}

/// Value of the Dalang functional `Υ(β)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Upsilon {
    Finite(f64),
    Infinite,
}

impl Upsilon {
    pub fn finite(self) -> Option<f64> {
        match self {
            Upsilon::Finite(v) => Some(v),
            Upsilon::Infinite => None,
        }
    }
}

/// `Υ(β) = (2π)^{-d} ∫ f̂(dy) / (β + ‖y‖^α)`, the integrability functional
/// governing existence of the solution.
pub fn upsilon(beta: f64, spec: &NoiseSpec, alpha: f64) -> Result<Upsilon> {
    if !(beta > 0.0) {
        return Err(Error::domain("upsilon requires beta > 0"));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::domain("upsilon requires alpha in (0, 2]"));
    }
    let d = spec.d;
    match spec.kind {
        NoiseKind::White => {
            if d >= 2 || alpha <= 1.0 {
                return Ok(Upsilon::Infinite);
            }
            // (1/π) ∫_0^∞ dy/(β + y^α), body + series tail.
            let y_cut = 50.0f64.max((1e3 * beta).powf(1.0 / alpha));
            let body = adaptive_simpson(&|y: f64| 1.0 / (beta + y.powf(alpha)), 0.0, y_cut, 1e-12);
            let mut tail = 0.0;
            for k in 0..4 {
                let kf = k as f64;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                tail += sign * beta.powi(k as i32) * y_cut.powf(1.0 - alpha * (kf + 1.0))
                    / (alpha * (kf + 1.0) - 1.0);
            }
            Ok(Upsilon::Finite((body + tail) / PI))
        }
        NoiseKind::GaussianKernel => {
            let v = match d {
                1 => {
                    adaptive_simpson(
                        &|y: f64| (-0.5 * y * y).exp() / (beta + y.powf(alpha)),
                        0.0,
                        12.0,
                        1e-12,
                    ) / PI
                }
                _ => {
                    adaptive_simpson(
                        &|r: f64| r * (-0.5 * r * r).exp() / (beta + r.powf(alpha)),
                        0.0,
                        12.0,
                        1e-12,
                    ) / (2.0 * PI)
                }
            };
            Ok(Upsilon::Finite(v))
        }
        NoiseKind::CauchyKernel => {
            let (nodes, weights) = gauss_laguerre(64);
            let v = match d {
                1 => nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&y, &w)| w / (beta + y.powf(alpha)))
                    .sum::<f64>(),
                _ => {
                    let mut acc = 0.0;
                    for (&y1, &w1) in nodes.iter().zip(&weights) {
                        for (&y2, &w2) in nodes.iter().zip(&weights) {
                            let r = (y1 * y1 + y2 * y2).sqrt();
                            acc += w1 * w2 / (beta + r.powf(alpha));
                        }
                    }
                    acc
                }
            };
            Ok(Upsilon::Finite(v))
        }
    }
}
