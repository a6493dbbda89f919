//! Deterministic second-moment and covariance oracles for the linear
//! equation, via the renewal (Volterra) equations implied by the Walsh
//! isometry on the mild form.
//!
//! Case 1 (white noise): with `m2(s) = E[u(s,0)²]`,
//! `m2(s) = 1 + ∫_0^s G_α(2(s-r), 0) m2(r) dr`, a weakly singular scalar
//! Volterra equation solved by product integration (the kernel
//! `G_α(2τ,0) = (2τ)^{-1/α} g_α(0)` is integrated exactly against a
//! piecewise-linear unknown). The spatial covariance then has the closed
//! quadrature form `Σ(t,z) = ∫_0^t m2(r) G_α(2(t-r), z) dr`.
//!
//! Case 2 (colored noise): the covariance field feeds back through `f`,
//! `Σ(s,z) = ∫_0^s [p_{2(s-r)} ⋆ (f · (1+Σ(r,·)))](z) dr`, a space-time
//! Volterra equation stepped with trapezoid weights in time and spectral
//! convolutions in space. The heat semigroup lets the whole history ride
//! in one running field, so each step costs a single FFT convolution.
//!
//! `σ²_N = ∫∫_{[0,N]^{2d}} Σ(t, x-y) dx dy` follows by window quadrature.

use crate::error::{Error, Result};
use crate::fft::{wavenumber, FftPair};
use crate::kernels::eval_stable_density;
use crate::noise::{fft2_inplace, NoiseKind, NoiseSpec};
use rustfft::num_complex::Complex64;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// Which linear equation the oracle models.
#[derive(Clone, Copy, Debug)]
pub enum OracleCase {
    /// Fractional operator, space-time white noise, d = 1.
    Case1 { alpha: f64 },
    /// Heat operator (v = 1/2), colored noise.
    Case2 { kind: NoiseKind, d: usize },
}

#[derive(Clone, Copy, Debug)]
pub struct OracleConfig {
    pub case: OracleCase,
    pub t: f64,
    /// Time mesh size.
    pub time_steps: usize,
    /// Spatial tabulation step for Σ.
    pub dz: f64,
    /// Largest offset the Σ table must certify.
    pub extent: f64,
}

impl OracleConfig {
    /// Defaults per case; extent `2N + 8√(2t)` covers window quadrature up
    /// to `N` with decay margin.
    pub fn for_max_window(case: OracleCase, t: f64, n_max: f64) -> Self {
        let extent = 2.0 * n_max + 8.0 * (2.0 * t).sqrt();
        let (time_steps, dz) = match case {
            OracleCase::Case1 { .. } => (2048, 0.05),
            OracleCase::Case2 { d: 1, .. } => (400, 0.02),
            OracleCase::Case2 { .. } => (200, 0.1),
        };
        OracleConfig {
            case,
            t,
            time_steps,
            dz,
            extent,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) {
            return Err(Error::domain("oracle needs t > 0"));
        }
        match self.case {
            OracleCase::Case1 { alpha } => {
                if !(alpha > 1.0 && alpha <= 2.0) {
                    return Err(Error::domain(format!(
                        "case 1 oracle needs alpha in (1, 2], got {alpha} (kernel not integrable)"
                    )));
                }
            }
            OracleCase::Case2 { kind, d } => {
                if kind == NoiseKind::White {
                    return Err(Error::domain("case 2 oracle needs a colored noise spec"));
                }
                if d == 0 || d > 2 {
                    return Err(Error::domain("case 2 oracle supports d in {1, 2}"));
                }
            }
        }
        Ok(())
    }
}

/// `E[u(s,0)²]` on a uniform time mesh, with the plug-back residual of the
/// renewal equation.
#[derive(Clone, Debug)]
pub struct SecondMoment {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub residual: f64,
}

impl SecondMoment {
    pub fn at(&self, s: f64) -> f64 {
        let t_max = *self.times.last().unwrap();
        let u = (s / t_max).clamp(0.0, 1.0) * (self.times.len() - 1) as f64;
        let i = (u as usize).min(self.times.len() - 2);
        let frac = u - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// `∫_0^t m2(s) ds` — the case-1 limit of `σ²_N / N`.
    pub fn time_integral(&self) -> f64 {
        let h = self.times[1] - self.times[0];
        crate::quad::trapz_uniform(&self.values, h)
    }
}

/// Product-integration solve of the case-1 renewal equation.
pub fn solve_second_moment_case1(alpha: f64, t: f64, steps: usize) -> Result<SecondMoment> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::domain(format!(
            "second-moment kernel is integrable only for alpha in (1, 2], got {alpha}"
        )));
    }
    if !(t > 0.0) || steps < 2 {
        return Err(Error::domain("need t > 0 and at least 2 time steps"));
    }
    let c_kernel = 2.0f64.powf(-1.0 / alpha) * eval_stable_density(alpha, 0.0)?;
    let e0 = 1.0 - 1.0 / alpha;
    let e1 = 2.0 - 1.0 / alpha;
    let h = t / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    let mut m2 = vec![1.0f64; steps + 1];

    // Exact kernel moments over the τ-panel [jh, (j+1)h]:
    // I0 = ∫ τ^{-1/α} dτ, I1 = ∫ τ^{1-1/α} dτ. The linear interpolant of
    // m2 on the panel splits into weights w_a (value at τ = jh, i.e.
    // m2[n-j]) and w_b (value at τ = (j+1)h, i.e. m2[n-1-j]).
    let mut w_a = vec![0.0; steps];
    let mut w_b = vec![0.0; steps];
    for j in 0..steps {
        let a = j as f64 * h;
        let b = (j + 1) as f64 * h;
        let i0 = (b.powf(e0) - a.powf(e0)) / e0;
        let i1 = (b.powf(e1) - a.powf(e1)) / e1;
        let s = (i1 - a * i0) / h;
        w_a[j] = i0 - s;
        w_b[j] = s;
    }

    for n in 1..=steps {
        // j = 0 contributes w_a[0]·m2[n] implicitly.
        let mut known = w_b[0] * m2[n - 1];
        for j in 1..n {
            known += w_a[j] * m2[n - j] + w_b[j] * m2[n - 1 - j];
        }
        m2[n] = (1.0 + c_kernel * known) / (1.0 - c_kernel * w_a[0]);
    }

    let mut residual = 0.0f64;
    for n in 1..=steps {
        let mut acc = 0.0;
        for j in 0..n {
            acc += w_a[j] * m2[n - j] + w_b[j] * m2[n - 1 - j];
        }
        let rhs = 1.0 + c_kernel * acc;
        residual = residual.max(((m2[n] - rhs) / rhs).abs());
    }

    Ok(SecondMoment {
        times,
        values: m2,
        residual,
    })
}

/// Tabulated covariance `Σ(t, z) = Cov[u(t, x+z), u(t, x)]`.
#[derive(Clone, Debug)]
pub struct CovarianceSolution {
    pub case: OracleCase,
    pub t: f64,
    pub d: usize,
    pub m2: SecondMoment,
    pub dz: f64,
    /// `Σ(t, i·dz)` for `i = 0..=half` (d = 1), or row-major over the
    /// nonnegative quadrant (d = 2). Even in each coordinate.
    pub sigma: Vec<f64>,
    pub half: usize,
    /// Self-consistency residual (case 1: renewal plug-back; case 2:
    /// relative change of Σ under halving the time mesh).
    pub residual: f64,
}

impl CovarianceSolution {
    pub fn sigma_at(&self, z: f64) -> Result<f64> {
        if self.d != 1 {
            return Err(Error::domain("sigma_at is one-dimensional"));
        }
        let az = z.abs();
        let u = az / self.dz;
        let i = u as usize;
        if i + 1 > self.half {
            return Err(Error::Extent(format!(
                "offset {az} beyond table extent {}",
                self.half as f64 * self.dz
            )));
        }
        let frac = u - i as f64;
        Ok(self.sigma[i] * (1.0 - frac) + self.sigma[(i + 1).min(self.half)] * frac)
    }

    /// `∫ Σ(t, z) dz`. Case 1 adds the polynomial tail
    /// `Σ(t,z) ≈ 2 c_α z^{-1-α} ∫_0^t (t-r) m2(r) dr` beyond the extent;
    /// case-2 tails decay at Gaussian speed and are dropped.
    pub fn sigma_integral(&self) -> f64 {
        match self.d {
            1 => {
                let body = 2.0 * crate::quad::trapz_uniform(&self.sigma, self.dz);
                let tail = match self.case {
                    OracleCase::Case1 { alpha } if alpha < 2.0 => {
                        let edge = self.half as f64 * self.dz;
                        let h = self.m2.times[1] - self.m2.times[0];
                        let weighted: Vec<f64> = self
                            .m2
                            .times
                            .iter()
                            .zip(&self.m2.values)
                            .map(|(&r, &v)| 2.0 * (self.t - r) * v)
                            .collect();
                        let moment = crate::quad::trapz_uniform(&weighted, h);
                        let c = gamma(1.0 + alpha) * (0.5 * PI * alpha).sin() / PI;
                        2.0 * moment * c * edge.powf(-alpha) / alpha
                    }
                    _ => 0.0,
                };
                body + tail
            }
            _ => {
                let n = self.half + 1;
                let mut acc = 0.0;
                for i in 0..n {
                    let wi = if i == 0 || i == self.half { 0.5 } else { 1.0 };
                    for j in 0..n {
                        let wj = if j == 0 || j == self.half { 0.5 } else { 1.0 };
                        acc += wi * wj * self.sigma[i * n + j];
                    }
                }
                4.0 * acc * self.dz * self.dz
            }
        }
    }
}

/// Solve the covariance equation for the configured case.
pub fn solve_covariance(cfg: &OracleConfig) -> Result<CovarianceSolution> {
    cfg.validate()?;
    match cfg.case {
        OracleCase::Case1 { alpha } => solve_covariance_case1(cfg, alpha),
        OracleCase::Case2 { kind, d: 1 } => solve_covariance_case2_1d(cfg, kind),
        OracleCase::Case2 { kind, d: _ } => solve_covariance_case2_2d(cfg, kind),
    }
}

/// The second moment, dispatching on the case (case 2 reads it off the
/// covariance solve's diagonal).
pub fn solve_second_moment(cfg: &OracleConfig) -> Result<SecondMoment> {
    cfg.validate()?;
    match cfg.case {
        OracleCase::Case1 { alpha } => solve_second_moment_case1(alpha, cfg.t, cfg.time_steps),
        OracleCase::Case2 { .. } => Ok(solve_covariance(cfg)?.m2),
    }
}

fn solve_covariance_case1(cfg: &OracleConfig, alpha: f64) -> Result<CovarianceSolution> {
    let m2 = solve_second_moment_case1(alpha, cfg.t, cfg.time_steps)?;
    let half = (cfg.extent / cfg.dz).ceil() as usize;
    // Σ(t,z) = ∫_0^t m2(t-τ) G_α(2τ, z) dτ, graded by τ = t·w^q with
    // q = α/(α-1) so the w-integrand is bounded at w = 0 (where only the
    // diagonal z = 0 keeps a finite nonzero limit).
    let q = alpha / (alpha - 1.0);
    let t = cfg.t;
    let nodes = 1601usize;
    let hw = 1.0 / (nodes - 1) as f64;
    let g0 = eval_stable_density(alpha, 0.0)?;
    let table = if alpha < 2.0 {
        Some(crate::kernels::stable_table(alpha)?)
    } else {
        None
    };
    struct Node {
        scale: f64,  // (2τ)^{-1/α}
        factor: f64, // m2(t-τ) · t q w^{q-1} · simpson weight · hw/3
    }
    let mut node_set = Vec::with_capacity(nodes - 1);
    for k in 1..nodes {
        let w = k as f64 * hw;
        let tau = t * w.powf(q);
        let simpson = if k == nodes - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        node_set.push(Node {
            scale: (2.0 * tau).powf(-1.0 / alpha),
            factor: m2.at(t - tau) * t * q * w.powf(q - 1.0) * simpson * hw / 3.0,
        });
    }
    // w = 0 endpoint: integrand limit is m2(t)·g_α(0)·(2t)^{-1/α}·t·q on
    // the diagonal and 0 off it.
    let diag_limit = (hw / 3.0) * m2.at(t) * g0 * (2.0 * t).powf(-1.0 / alpha) * t * q;

    let mut sigma = vec![0.0; half + 1];
    for (i, out) in sigma.iter_mut().enumerate() {
        let z = i as f64 * cfg.dz;
        let mut acc = if i == 0 { diag_limit } else { 0.0 };
        for node in &node_set {
            let u = z * node.scale;
            let dens = match &table {
                Some(tb) => tb.density(u),
                None => (4.0 * PI).powf(-0.5) * (-u * u / 4.0).exp(),
            };
            acc += node.factor * node.scale * dens;
        }
        *out = acc;
    }

    let residual = m2.residual;
    Ok(CovarianceSolution {
        case: cfg.case,
        t,
        d: 1,
        m2,
        dz: cfg.dz,
        sigma,
        half,
        residual,
    })
}

/// One trapezoid-in-time pass of the case-2 (d = 1) solve.
fn case2_1d_pass(
    cfg: &OracleConfig,
    kind: NoiseKind,
    steps: usize,
) -> Result<(SecondMoment, Vec<f64>, usize)> {
    let spec = NoiseSpec::new(kind, 1)?;
    let half = (cfg.extent / cfg.dz).ceil() as usize;
    let nz = (2 * (half + 1)).next_power_of_two();
    let length = nz as f64 * cfg.dz;
    let dt = cfg.t / steps as f64;

    let mut f_row = vec![0.0; nz];
    for (j, v) in f_row.iter_mut().enumerate() {
        let z = j.min(nz - j) as f64 * cfg.dz;
        *v = spec.density(&[z])?;
    }
    // p_{2·dt} multiplier e^{-dt ξ²}.
    let mult: Vec<f64> = (0..nz)
        .map(|m| {
            let xi = wavenumber(m, nz, length);
            (-dt * xi * xi).exp()
        })
        .collect();

    let mut fft = FftPair::new(nz);
    let mut history = vec![0.0f64; nz];
    let mut sigma_row = vec![0.0f64; nz];
    let mut m2_values = Vec::with_capacity(steps + 1);
    m2_values.push(1.0);
    let mut buf = vec![Complex64::default(); nz];
    for n in 0..steps {
        let w0 = if n == 0 { 0.5 } else { 1.0 };
        for j in 0..nz {
            let t_term = f_row[j] * (1.0 + sigma_row[j]);
            buf[j] = Complex64::new(history[j] + w0 * t_term, 0.0);
        }
        fft.forward(&mut buf);
        for (b, m) in buf.iter_mut().zip(&mult) {
            *b *= m;
        }
        fft.inverse(&mut buf);
        for (h, b) in history.iter_mut().zip(&buf) {
            *h = b.re / nz as f64;
        }
        for j in 0..nz {
            let implicit = 0.5 * dt * f_row[j];
            sigma_row[j] = (dt * history[j] + implicit) / (1.0 - implicit);
        }
        m2_values.push(1.0 + sigma_row[0]);
    }
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    Ok((
        SecondMoment {
            times,
            values: m2_values,
            residual: 0.0,
        },
        sigma_row,
        half,
    ))
}

fn solve_covariance_case2_1d(cfg: &OracleConfig, kind: NoiseKind) -> Result<CovarianceSolution> {
    let steps = cfg.time_steps.max(8);
    let (mut m2, row_fine, half) = case2_1d_pass(cfg, kind, steps)?;
    let (_, row_coarse, _) = case2_1d_pass(cfg, kind, steps / 2)?;
    let scale = row_fine[0].abs().max(1e-300);
    let mut residual = 0.0f64;
    for j in 0..=half {
        residual = residual.max((row_fine[j] - row_coarse[j]).abs() / scale);
    }
    m2.residual = residual;
    Ok(CovarianceSolution {
        case: cfg.case,
        t: cfg.t,
        d: 1,
        m2,
        dz: cfg.dz,
        sigma: row_fine[..=half].to_vec(),
        half,
        residual,
    })
}

fn solve_covariance_case2_2d(cfg: &OracleConfig, kind: NoiseKind) -> Result<CovarianceSolution> {
    let spec = NoiseSpec::new(kind, 2)?;
    let half = (cfg.extent / cfg.dz).ceil() as usize;
    let nz = (2 * (half + 1)).next_power_of_two();
    let length = nz as f64 * cfg.dz;
    let steps = cfg.time_steps.max(8);
    let dt = cfg.t / steps as f64;

    let mut f_grid = vec![0.0; nz * nz];
    for j in 0..nz {
        let zj = j.min(nz - j) as f64 * cfg.dz;
        for k in 0..nz {
            let zk = k.min(nz - k) as f64 * cfg.dz;
            f_grid[j * nz + k] = spec.density(&[zj, zk])?;
        }
    }
    let mut mult = vec![0.0; nz * nz];
    for j in 0..nz {
        let xj = wavenumber(j, nz, length);
        for k in 0..nz {
            let xk = wavenumber(k, nz, length);
            mult[j * nz + k] = (-dt * (xj * xj + xk * xk)).exp();
        }
    }

    let mut history = vec![0.0f64; nz * nz];
    let mut sigma_grid = vec![0.0f64; nz * nz];
    let mut m2_values = vec![1.0];
    let mut buf = vec![Complex64::default(); nz * nz];
    for n in 0..steps {
        let w0 = if n == 0 { 0.5 } else { 1.0 };
        for j in 0..nz * nz {
            buf[j] = Complex64::new(history[j] + w0 * f_grid[j] * (1.0 + sigma_grid[j]), 0.0);
        }
        fft2_inplace(&mut buf, nz, false);
        for (b, m) in buf.iter_mut().zip(&mult) {
            *b *= m;
        }
        fft2_inplace(&mut buf, nz, true);
        let norm = (nz * nz) as f64;
        for (h, b) in history.iter_mut().zip(&buf) {
            *h = b.re / norm;
        }
        for j in 0..nz * nz {
            let implicit = 0.5 * dt * f_grid[j];
            sigma_grid[j] = (dt * history[j] + implicit) / (1.0 - implicit);
        }
        m2_values.push(1.0 + sigma_grid[0]);
    }
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let n_out = half + 1;
    let mut sigma = vec![0.0; n_out * n_out];
    for i in 0..n_out {
        for j in 0..n_out {
            sigma[i * n_out + j] = sigma_grid[i * nz + j];
        }
    }
    Ok(CovarianceSolution {
        case: cfg.case,
        t: cfg.t,
        d: 2,
        m2: SecondMoment {
            times,
            values: m2_values,
            residual: 0.0,
        },
        dz: cfg.dz,
        sigma,
        half,
        residual: 0.0,
    })
}

/// `σ²_N` and its case-appropriate normalization.
#[derive(Clone, Copy, Debug)]
pub struct WindowVariance {
    pub window: f64,
    pub sigma2: f64,
    /// `σ²_N / N^d`.
    pub per_scale: f64,
}

/// `σ²_N = ∫∫_{[0,N]^{2d}} Σ(t, x-y) dx dy`; in d = 1 this reduces to
/// `2 ∫_0^N (N-z) Σ(t,z) dz`.
pub fn variance_of_average(sol: &CovarianceSolution, window: f64) -> Result<WindowVariance> {
    if !(window > 0.0) {
        return Err(Error::domain("window must be positive"));
    }
    let edge = sol.half as f64 * sol.dz;
    if window > edge {
        return Err(Error::Extent(format!(
            "window {window} exceeds Σ table extent {edge}"
        )));
    }
    let imax = (window / sol.dz).floor() as usize;
    let sigma2 = match sol.d {
        1 => {
            let mut vals = Vec::with_capacity(imax + 1);
            for i in 0..=imax {
                let z = i as f64 * sol.dz;
                vals.push((window - z) * sol.sigma[i]);
            }
            2.0 * crate::quad::trapz_uniform(&vals, sol.dz)
        }
        _ => {
            let n = sol.half + 1;
            let mut acc = 0.0;
            for i in 0..=imax {
                let wi = (window - i as f64 * sol.dz) * if i == 0 || i == imax { 0.5 } else { 1.0 };
                for j in 0..=imax {
                    let wj =
                        (window - j as f64 * sol.dz) * if j == 0 || j == imax { 0.5 } else { 1.0 };
                    acc += wi * wj * sol.sigma[i * n + j];
                }
            }
            4.0 * acc * sol.dz * sol.dz
        }
    };
    Ok(WindowVariance {
        window,
        sigma2,
        per_scale: sigma2 / window.powi(sol.d as i32),
    })
}
