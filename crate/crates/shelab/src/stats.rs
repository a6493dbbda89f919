//! Ensemble statistics: streaming moments with associative merge, kernel
//! density estimates of the normalized averages, sup/TV distances to the
//! standard normal, Kolmogorov-Smirnov checks, and log-log rate fits.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erf;
use std::f64::consts::PI;

pub fn normal_pdf(x: f64) -> f64 {
    (2.0 * PI).powf(-0.5) * (-0.5 * x * x).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Streaming Monte-Carlo aggregates of the window averages, with retained
/// samples for shape statistics. Merging two accumulators reproduces the
/// single-pass result (Chan's update), so replica shards combine in any
/// association.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n: u64,
    pub mean: f64,
    /// Sum of squared deviations from the running mean.
    pub m2: f64,
    pub samples: Vec<f64>,
    pub neg_fraction_sum: f64,
    pub diverged: u64,
}

impl EnsembleStats {
    pub fn push(&mut self, a_n: f64, neg_fraction: f64) {
        self.n += 1;
        let delta = a_n - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (a_n - self.mean);
        self.samples.push(a_n);
        self.neg_fraction_sum += neg_fraction;
    }

    pub fn push_diverged(&mut self) {
        self.diverged += 1;
    }

    pub fn merge(&mut self, other: &EnsembleStats) {
        if other.n == 0 {
            self.diverged += other.diverged;
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let delta = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += delta * n2 / n;
        self.m2 += other.m2 + delta * delta * n1 * n2 / n;
        self.n += other.n;
        self.samples.extend_from_slice(&other.samples);
        self.neg_fraction_sum += other.neg_fraction_sum;
        self.diverged += other.diverged;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n as f64 - 1.0)
        }
    }

    pub fn mean_neg_fraction(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.neg_fraction_sum / self.n as f64
        }
    }
}

/// Unbiased sample variance of `A_N` and its standard error from the
/// fourth-moment formula `Var(s²) ≈ (m₄ - s⁴(n-3)/(n-1)) / n`.
pub fn estimate_variance(ensemble: &EnsembleStats) -> Result<(f64, f64)> {
    if ensemble.n < 2 {
        return Err(Error::InsufficientData(format!(
            "variance needs ≥ 2 samples, have {}",
            ensemble.n
        )));
    }
    let n = ensemble.n as f64;
    let s2 = ensemble.variance();
    let mean = ensemble.mean;
    let m4 = ensemble
        .samples
        .iter()
        .map(|&x| (x - mean).powi(4))
        .sum::<f64>()
        / n;
    let var_s2 = (m4 - s2 * s2 * (n - 3.0) / (n - 1.0)).max(0.0) / n;
    Ok((s2, var_s2.sqrt()))
}

pub fn sample_skewness(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = samples.iter().map(|&x| (x - mean).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Kernel density estimate on the fixed grid `[-5, 5]`, step 0.01.
#[derive(Clone, Debug)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

pub const DENSITY_GRID_STEP: f64 = 0.01;
pub const DENSITY_GRID_RADIUS: f64 = 5.0;

/// Gaussian-kernel KDE with the Silverman bandwidth
/// `h = 1.06 σ̂ n^{-1/5}`, evaluated through linear binning (the binning
/// error is O((bin/h)²) and far below Monte-Carlo noise here).
pub fn kde_density(samples: &[f64]) -> Result<DensityEstimate> {
    if samples.len() < 100 {
        return Err(Error::InsufficientData(format!(
            "KDE needs ≥ 100 samples, have {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::domain("degenerate sample spread: KDE undefined"));
    }
    let h = 1.06 * sd * n.powf(-0.2);

    let bin = DENSITY_GRID_STEP;
    let reach = 8.0 * h;
    let lo = -DENSITY_GRID_RADIUS - reach;
    let bins = ((2.0 * (DENSITY_GRID_RADIUS + reach)) / bin).ceil() as usize + 1;
    let mut counts = vec![0.0f64; bins];
    for &x in samples {
        let pos = (x - lo) / bin;
        if pos < 0.0 || pos >= (bins - 1) as f64 {
            continue; // outside the evaluation reach; still counted in n
        }
        let i = pos as usize;
        let frac = pos - i as f64;
        counts[i] += 1.0 - frac;
        counts[i + 1] += frac;
    }
    let half_width = (reach / bin).ceil() as isize;
    let kernel: Vec<f64> = (-half_width..=half_width)
        .map(|k| {
            let u = k as f64 * bin / h;
            (-0.5 * u * u).exp() / (h * (2.0 * PI).sqrt())
        })
        .collect();
    let m = (2.0 * DENSITY_GRID_RADIUS / DENSITY_GRID_STEP).round() as usize + 1;
    let mut grid = Vec::with_capacity(m);
    let mut values = vec![0.0f64; m];
    for (g, value) in values.iter_mut().enumerate() {
        let x = -DENSITY_GRID_RADIUS + g as f64 * DENSITY_GRID_STEP;
        grid.push(x);
        let center = ((x - lo) / bin).round() as isize;
        let mut acc = 0.0;
        for (k, kv) in kernel.iter().enumerate() {
            let idx = center + k as isize - half_width;
            if idx >= 0 && (idx as usize) < bins {
                acc += counts[idx as usize] * kv;
            }
        }
        *value = acc / n;
    }
    Ok(DensityEstimate {
        grid,
        values,
        bandwidth: h,
    })
}

/// `sup_x |est(x) - φ(x)|` over the evaluation grid.
pub fn sup_distance(est: &DensityEstimate) -> f64 {
    est.grid
        .iter()
        .zip(&est.values)
        .map(|(&x, &v)| (v - normal_pdf(x)).abs())
        .fold(0.0, f64::max)
}

/// Total variation distance `½ ∫ |est - φ|` by trapezoid on the grid.
pub fn tv_distance(est: &DensityEstimate) -> f64 {
    let diffs: Vec<f64> = est
        .grid
        .iter()
        .zip(&est.values)
        .map(|(&x, &v)| (v - normal_pdf(x)).abs())
        .collect();
    0.5 * crate::quad::trapz_uniform(&diffs, DENSITY_GRID_STEP)
}

/// Kolmogorov-Smirnov statistic of `samples` against N(0,1).
pub fn ks_statistic(samples: &[f64]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let phi = normal_cdf(x);
        d = d.max(((i + 1) as f64 / n - phi).abs());
        d = d.max((phi - i as f64 / n).abs());
    }
    d
}

/// Asymptotic KS critical value at significance 0.01.
pub fn ks_critical_001(n: usize) -> f64 {
    1.62762 / (n as f64).sqrt()
}

/// Ordinary least squares of `log distance` on `log N`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Points discarded for nonpositive distance.
    pub dropped: usize,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    fit_rate_with(points, |n| n.ln())
}

/// Case-3 variant regressing against `log(N / log N)`.
pub fn fit_rate_log_adjusted(points: &[(f64, f64)]) -> Result<RateFit> {
    fit_rate_with(points, |n| (n / n.ln()).ln())
}

/// Rate fit that drops the smallest `N` when doing so improves R² by more
/// than 0.05 (pre-asymptotic transients).
pub fn fit_rate_pruned(points: &[(f64, f64)]) -> Result<RateFit> {
    let full = fit_rate(points)?;
    if points.len() >= 4 {
        if let Ok(pruned) = fit_rate(&points[1..]) {
            if pruned.r2 > full.r2 + 0.05 {
                return Ok(pruned);
            }
        }
    }
    Ok(full)
}

fn fit_rate_with(points: &[(f64, f64)], xmap: impl Fn(f64) -> f64) -> Result<RateFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = 0;
    for &(n, d) in points {
        if d > 0.0 && n > 0.0 {
            xs.push(xmap(n));
            ys.push(d.ln());
        } else {
            dropped += 1;
        }
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs ≥ 3 positive points, have {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Validation("degenerate abscissae in rate fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept,
        r2,
        dropped,
    })
}

/// Spearman rank correlation with the one-sided p-value for the
/// alternative `ρ > 0` (via the t approximation).
pub fn spearman_positive_trend(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 4 {
        return Err(Error::InsufficientData(
            "spearman needs ≥ 4 paired points".into(),
        ));
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..xs.len() {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let rho = sxy / (sxx * syy).sqrt();
    let df = n - 2.0;
    let t = rho * (df / (1.0 - rho * rho).max(1e-12)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Validation(e.to_string()))?;
    let p_greater = 1.0 - dist.cdf(t);
    Ok((rho, p_greater))
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = rank;
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn variance_of_tiny_samples() {
        let mut e = EnsembleStats::default();
        e.push(1.0, 0.0);
        e.push(-1.0, 0.0);
        let (v, _) = estimate_variance(&e).unwrap();
        assert!((v - 2.0).abs() < 1e-14);

        let mut c = EnsembleStats::default();
        for _ in 0..10 {
            c.push(3.5, 0.0);
        }
        let (v, se) = estimate_variance(&c).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(se, 0.0);

        let mut single = EnsembleStats::default();
        single.push(1.0, 0.0);
        assert!(estimate_variance(&single).is_err());
    }

    #[test]
    fn merge_matches_single_pass() {
        let mut rng = crate::noise::keyed_rng(5, 0, 0, 0);
        let xs: Vec<f64> = (0..1000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut whole = EnsembleStats::default();
        for &x in &xs {
            whole.push(x, 0.0);
        }
        let mut left = EnsembleStats::default();
        let mut right = EnsembleStats::default();
        for (i, &x) in xs.iter().enumerate() {
            if i < 313 {
                left.push(x, 0.0);
            } else {
                right.push(x, 0.0);
            }
        }
        left.merge(&right);
        assert_eq!(left.n, whole.n);
        assert!((left.mean - whole.mean).abs() < 1e-12 * whole.mean.abs().max(1.0));
        assert!((left.variance() - whole.variance()).abs() < 1e-12 * whole.variance());
    }

    #[test]
    fn kde_calibration_against_standard_normal() {
        // 10^6 i.i.d. N(0,1) samples: sup|KDE - φ| < 0.01 and unit mass.
        let mut rng = crate::noise::keyed_rng(17, 0, 0, 0);
        let samples: Vec<f64> = (0..1_000_000)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let est = kde_density(&samples).unwrap();
        let sup = sup_distance(&est);
        assert!(sup < 0.01, "sup distance {sup}");
        let mass = crate::quad::trapz_uniform(&est.values, DENSITY_GRID_STEP);
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
        let tv = tv_distance(&est);
        assert!(tv < 0.02, "tv {tv}");
        assert!((0.0..=1.0).contains(&tv));
    }

    #[test]
    fn kde_rejects_degenerate_input() {
        let zeros = vec![0.0; 500];
        assert!(kde_density(&zeros).is_err());
        let few = vec![1.0; 50];
        assert!(kde_density(&few).is_err());
    }

    #[test]
    fn sup_distance_matches_grid_search_oracle() {
        // est = density of N(0.5, 1): the maximum of |φ(x-1/2) - φ(x)| by
        // dense independent grid search.
        let grid: Vec<f64> = (0..=1000)
            .map(|i| -DENSITY_GRID_RADIUS + i as f64 * DENSITY_GRID_STEP)
            .collect();
        let est = DensityEstimate {
            values: grid.iter().map(|&x| normal_pdf(x - 0.5)).collect(),
            grid,
            bandwidth: 0.1,
        };
        let got = sup_distance(&est);
        let mut oracle = 0.0f64;
        let mut x = -8.0;
        while x < 8.0 {
            oracle = oracle.max((normal_pdf(x - 0.5) - normal_pdf(x)).abs());
            x += 1e-4;
        }
        assert!((got - oracle).abs() < 1e-5, "got {got}, oracle {oracle}");
        // The dense search itself pins the value near 0.1185.
        assert!((oracle - 0.1185).abs() < 5e-4, "oracle {oracle}");
    }

    #[test]
    fn sup_distance_zero_for_exact_normal() {
        let grid: Vec<f64> = (0..=1000)
            .map(|i| -DENSITY_GRID_RADIUS + i as f64 * DENSITY_GRID_STEP)
            .collect();
        let est = DensityEstimate {
            values: grid.iter().map(|&x| normal_pdf(x)).collect(),
            grid,
            bandwidth: 0.1,
        };
        assert_eq!(sup_distance(&est), 0.0);
        assert_eq!(tv_distance(&est), 0.0);
    }

    #[test]
    fn tv_of_unit_shift_matches_closed_form() {
        // TV(N(1,1), N(0,1)) = 2Φ(1/2) - 1 ≈ 0.38292.
        let grid: Vec<f64> = (0..=1000)
            .map(|i| -DENSITY_GRID_RADIUS + i as f64 * DENSITY_GRID_STEP)
            .collect();
        let est = DensityEstimate {
            values: grid.iter().map(|&x| normal_pdf(x - 1.0)).collect(),
            grid,
            bandwidth: 0.1,
        };
        let tv = tv_distance(&est);
        let want = 2.0 * normal_cdf(0.5) - 1.0;
        assert!((want - 0.3829249225480263).abs() < 1e-12);
        // The [-5,5] grid misses a sliver of the shifted density's tail.
        assert!((tv - want).abs() < 1e-3, "tv {tv} want {want}");
    }

    #[test]
    fn rate_fit_recovers_exact_slopes() {
        let pts: Vec<(f64, f64)> = (4..=12)
            .map(|k| {
                let n = 2f64.powi(k);
                (n, 7.0 * n.powf(-0.5))
            })
            .collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12, "slope {}", fit.slope);
        assert!(fit.r2 > 1.0 - 1e-12);

        let flat: Vec<(f64, f64)> = (4..=10).map(|k| (2f64.powi(k), 0.37)).collect();
        let fit = fit_rate(&flat).unwrap();
        assert!(fit.slope.abs() < 1e-12);

        // d = √(log N)/√N over N = 16..4096: shallow pre-asymptotic slope.
        let pts: Vec<(f64, f64)> = (4..=12)
            .map(|k| {
                let n = 2f64.powi(k);
                (n, n.ln().sqrt() / n.sqrt())
            })
            .collect();
        let fit = fit_rate(&pts).unwrap();
        assert!(
            fit.slope > -0.5 && fit.slope < -0.35,
            "slope {}",
            fit.slope
        );
        // The log-adjusted regression straightens it to -1/2.
        let fit = fit_rate_log_adjusted(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.03, "adjusted {}", fit.slope);
    }

    #[test]
    fn rate_fit_drops_bad_points() {
        let pts = vec![(16.0, 0.5), (32.0, 0.0), (64.0, 0.25), (128.0, 0.2)];
        let fit = fit_rate(&pts).unwrap();
        assert_eq!(fit.dropped, 1);
        let too_few = vec![(16.0, 0.5), (32.0, -1.0), (64.0, 0.0)];
        assert!(fit_rate(&too_few).is_err());
    }

    #[test]
    fn ks_accepts_normal_rejects_shifted() {
        let mut rng = crate::noise::keyed_rng(23, 0, 0, 0);
        let n = 20_000;
        let samples: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let d = ks_statistic(&samples);
        assert!(d < ks_critical_001(n), "d {d}");
        let shifted: Vec<f64> = samples.iter().map(|x| x + 0.1).collect();
        let d = ks_statistic(&shifted);
        assert!(d > ks_critical_001(n), "d {d}");
    }

    #[test]
    fn spearman_detects_trends() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let ys_up: Vec<f64> = xs.iter().map(|x| 0.5 * x + 1.0).collect();
        let (rho, p) = spearman_positive_trend(&xs, &ys_up).unwrap();
        assert!(rho > 0.99 && p < 0.01);
        let ys_down: Vec<f64> = xs.iter().map(|x| -0.1 * x).collect();
        let (rho, p) = spearman_positive_trend(&xs, &ys_down).unwrap();
        assert!(rho < -0.99 && p > 0.99);
    }
}
