//! Quadrature helpers shared across the crate.
//!
//! Three workhorses: tanh-sinh (double-exponential) rules for endpoint
//! singularities, Gauss-Legendre panels for smooth integrands, and a
//! period-panel scheme for the `(1 - cos z)/z^2`-weighted integrals that
//! appear throughout the variance functionals.

use std::f64::consts::PI;

/// Trapezoid rule on a uniform grid.
pub fn trapz_uniform(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (0.5 * values[0] + inner + 0.5 * values[values.len() - 1])
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre quadrature of `f` over [a, b] with `n` nodes.
pub fn gl_integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        acc += w * f(mid + c * x);
    }
    c * acc
}

/// Tanh-sinh quadrature over (a, b). Handles integrable endpoint
/// singularities; refines the step until successive levels agree to `tol`.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let c = 0.5 * (b - a);
    // Evaluates the symmetric node pair at |t|. The abscissae are formed as
    // offsets from the endpoints (2c/(e^{2s}+1) is exact near the ends,
    // where mid + c·tanh(s) would cancel catastrophically).
    let eval = |f: &mut F, t: f64| -> f64 {
        if t == 0.0 {
            let v = f(0.5 * (a + b));
            return if v.is_finite() { 0.5 * PI * v } else { 0.0 };
        }
        let s = 0.5 * PI * t.sinh();
        if s > 300.0 {
            return 0.0;
        }
        let w = 0.5 * PI * t.cosh() / s.cosh().powi(2);
        let delta = 2.0 * c / ((2.0 * s).exp() + 1.0);
        if delta == 0.0 || delta >= c {
            return 0.0;
        }
        let mut acc = 0.0;
        for point in [a + delta, b - delta] {
            let v = f(point);
            if v.is_finite() {
                acc += v * w;
            }
        }
        acc
    };
    let t_max = 4.5;
    let mut h = 1.0;
    let mut sum = eval(&mut f, 0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        sum += eval(&mut f, k as f64 * h);
        k += 1;
    }
    let mut result = c * h * sum;
    for level in 0..10 {
        h *= 0.5;
        // Add the midpoints of the previous level.
        let mut extra = 0.0;
        let mut t = h;
        while t <= t_max {
            extra += eval(&mut f, t);
            t += 2.0 * h;
        }
        sum += extra;
        let next = c * h * sum;
        // Successive-level agreement bounds the error of the *coarser* level;
        // one more refinement puts the returned value comfortably inside tol.
        if (next - result).abs() <= 0.01 * tol * (1.0 + next.abs()) && level >= 3 {
            return next;
        }
        result = next;
    }
    result
}

/// Gauss-Laguerre nodes and weights for `∫_0^∞ e^{-x} f(x) dx`.
pub fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    let mut x = 0.0f64;
    for i in 0..n {
        // Stroud-Secrest initial guesses.
        x = if i == 0 {
            3.0 / (1.0 + 2.4 * nf)
        } else if i == 1 {
            x + 15.0 / (1.0 + 2.5 * nf)
        } else {
            let ai = i as f64 - 1.0;
            x + (1.0 + 2.55 * ai) / (1.9 * ai) * (x - nodes[i - 2])
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p0, mut p1) = (1.0, 1.0 - x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0 - x) * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            pp = nf * (p1 - p0) / x;
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-14 * x.max(1.0) {
                break;
            }
        }
        nodes[i] = x;
        // w_i = x_i / (n+1)^2 / L_{n+1}(x_i)^2, via pp relation.
        let (mut p0, mut p1) = (1.0, 1.0 - x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0 - x) * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        weights[i] = -1.0 / (pp * nf * p0);
    }
    (nodes, weights)
}

/// `∫_0^∞ (1 - cos z)/z^2 · w(z) dz` for a smooth, bounded, eventually
/// decaying weight `w`.
///
/// The axis is split into cos-period panels `[2πk, 2π(k+1)]` integrated by
/// Gauss-Legendre; past `z_max` the non-oscillatory remainder
/// `∫ w(z)/z^2 dz` is computed exactly on `u = 1/z` and the oscillatory
/// remainder is reduced by two integrations by parts.
pub fn cos_window_integral<F: Fn(f64) -> f64>(w: F, z_max_hint: f64, tol: f64) -> f64 {
    let (nodes, wts) = gauss_legendre(24);
    let integrand = |z: f64| -> f64 {
        let frac = if z.abs() < 1e-4 {
            0.5 - z * z / 24.0
        } else {
            (1.0 - z.cos()) / (z * z)
        };
        frac * w(z)
    };
    let panel = |a: f64, b: f64| -> f64 {
        let c = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, wt) in nodes.iter().zip(&wts) {
            acc += wt * integrand(mid + c * x);
        }
        c * acc
    };

    let z_stop = z_max_hint.max(1024.0 * PI);
    let mut total = 0.0;
    let mut k = 0usize;
    let mut z = 0.0;
    loop {
        let z_next = 2.0 * PI * (k as f64 + 1.0);
        let p = panel(z, z_next);
        total += p;
        z = z_next;
        k += 1;
        if z >= z_stop && p.abs() < tol * 0.01 {
            break;
        }
        if k > 4_000_000 {
            break;
        }
    }

    // Non-oscillatory tail ∫_z^∞ w/u^2 du = ∫_0^{1/z} w(1/v) dv.
    let zcap = z;
    let tail_non = gl_integrate(
        |v| if v > 0.0 { w(1.0 / v) } else { 0.0 },
        0.0,
        1.0 / zcap,
        32,
    );
    // Oscillatory tail -∫_z^∞ cos(u) g(u) du with g = w/u^2, by parts twice.
    let g = |u: f64| w(u) / (u * u);
    let eps = zcap * 1e-6;
    let gp = (g(zcap + eps) - g(zcap - eps)) / (2.0 * eps);
    let tail_osc = zcap.sin() * g(zcap) + zcap.cos() * gp;
    total + tail_non + tail_osc
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}
