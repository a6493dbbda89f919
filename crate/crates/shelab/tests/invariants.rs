//! Cross-module statistical invariants at moderate replica counts: the
//! normalized averages F_N = A_N/σ̂_N center and scale correctly, pass a
//! KS test against N(0,1) at the default configurations of every case,
//! and carry the expected positive, N-decreasing skewness.

use rayon::prelude::*;
use shelab::noise::NoiseKind;
use shelab::solver::{SimConfig, Simulator};
use shelab::stats::{
    ks_critical_001, ks_statistic, sample_skewness, spearman_positive_trend, EnsembleStats,
};

fn collect(cfg: SimConfig, replicas: usize) -> EnsembleStats {
    let sim = Simulator::new(cfg).unwrap();
    let batches: Vec<usize> = (0..replicas.div_ceil(256)).collect();
    let mut nested = Vec::new();
    batches
        .par_iter()
        .map(|&c| {
            let mut ws = sim.workspace();
            let lo = c * 256;
            let hi = (lo + 256).min(replicas);
            (lo..hi)
                .map(|r| {
                    let out = sim.simulate_path(r as u64, &mut ws).unwrap();
                    (out.a_n, out.neg_fraction)
                })
                .collect::<Vec<_>>()
        })
        .collect_into_vec(&mut nested);
    let mut stats = EnsembleStats::default();
    for (a, nf) in nested.into_iter().flatten() {
        stats.push(a, nf);
    }
    stats
}

fn cfg_for(case: u8, window: f64, seed: u64) -> SimConfig {
    SimConfig {
        case,
        alpha: 2.0,
        t: 1.0,
        window,
        d: 1,
        nx: if case == 3 { 4 } else { 8 },
        nt: 64,
        pad: 0.0,
        seed,
        replicas: 0,
        mesh_grading: 2.0,
        noise: if case == 1 {
            NoiseKind::White
        } else {
            NoiseKind::GaussianKernel
        },
        compensate_subgrid: true,
    }
}

#[test]
fn normalized_averages_center_and_pass_ks_all_cases() {
    for case in [1u8, 2, 3] {
        let reps = 20_000;
        let stats = collect(cfg_for(case, 64.0, 2000 + case as u64), reps);
        let sd = stats.variance().sqrt();
        let normalized: Vec<f64> = stats.samples.iter().map(|&a| a / sd).collect();

        // Sample mean → 0 and variance → 1 within 3 SE.
        let n = normalized.len() as f64;
        let mean = normalized.iter().sum::<f64>() / n;
        assert!(
            mean.abs() < 3.0 / n.sqrt(),
            "case {case}: F_N mean {mean:.4}"
        );
        let var = normalized.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 1e-6, "self-normalized variance");

        let ks = ks_statistic(&normalized);
        assert!(
            ks < ks_critical_001(normalized.len()),
            "case {case}: KS {ks:.5} at N=64 fails at level 0.01"
        );
    }
}

#[test]
fn skewness_positive_and_decreasing_in_window_size() {
    let ladder = [16.0, 64.0, 256.0];
    let mut skews = Vec::new();
    for (i, &n) in ladder.iter().enumerate() {
        let stats = collect(cfg_for(1, n, 2100 + i as u64), 20_000);
        let sd = stats.variance().sqrt();
        let normalized: Vec<f64> = stats.samples.iter().map(|&a| a / sd).collect();
        skews.push(sample_skewness(&normalized));
    }
    println!("skewness over ladder: {skews:?}");
    assert!(skews.iter().all(|&s| s > 0.0), "skewness positive: {skews:?}");
    // Decreasing as a trend: not significantly increasing.
    let (rho, p_up) = spearman_positive_trend(&ladder, &skews).unwrap();
    assert!(
        p_up >= 0.05 || rho <= 0.0,
        "skewness trend not decreasing: {skews:?}"
    );
    // The endpoints are far enough apart to order strictly.
    assert!(
        skews[0] > *skews.last().unwrap(),
        "skewness should shrink from N=16 to N=256: {skews:?}"
    );
}

#[test]
fn case2_variance_cross_validates_oracle() {
    // Independent-implementations check: the colored-noise stepper against
    // the space-time Volterra oracle (gaussian kernel, N = 16, t = 1).
    let stats = collect(cfg_for(2, 16.0, 2200), 20_000);
    let (s2, se) = shelab::stats::estimate_variance(&stats).unwrap();
    let ocfg = shelab::oracle::OracleConfig::for_max_window(
        shelab::oracle::OracleCase::Case2 {
            kind: NoiseKind::GaussianKernel,
            d: 1,
        },
        1.0,
        20.0,
    );
    let sol = shelab::oracle::solve_covariance(&ocfg).unwrap();
    let target = shelab::oracle::variance_of_average(&sol, 16.0).unwrap().sigma2;
    let z = (s2 - target) / se;
    assert!(
        z.abs() < 3.0,
        "case-2 MC σ̂² {s2:.3} vs oracle {target:.3} (z = {z:.2})"
    );
}

#[test]
fn case2_d2_window_average_is_centered() {
    let mut cfg = cfg_for(2, 6.0, 2300);
    cfg.d = 2;
    cfg.nx = 4;
    cfg.nt = 32;
    let sim = shelab::solver::Simulator2d::new(cfg).unwrap();
    let reps = 600usize;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for r in 0..reps {
        let (_, a_n) = sim.simulate_path(r as u64).unwrap();
        sum += a_n;
        sum2 += a_n * a_n;
    }
    let mean = sum / reps as f64;
    let var = sum2 / reps as f64 - mean * mean;
    let se = (var / reps as f64).sqrt();
    assert!(mean.abs() < 3.0 * se, "2d mean {mean} se {se}");
}
