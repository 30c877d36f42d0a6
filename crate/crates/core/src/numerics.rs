//! Small numerical utilities shared across modules: quadrature, statistics,
//! peak finding, and a damped Levenberg–Marquardt least-squares solver.

use num_complex::Complex64 as C64;

use crate::error::Error;

/// Trapezoidal integral of uniformly sampled data.
pub fn trapezoid(y: &[f64], dx: f64) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    let interior: f64 = y[1..y.len() - 1].iter().sum();
    dx * (0.5 * (y[0] + y[y.len() - 1]) + interior)
}

/// Trapezoidal integral of uniformly sampled complex data.
pub fn trapezoid_complex(y: &[C64], dx: f64) -> C64 {
    if y.len() < 2 {
        return C64::new(0.0, 0.0);
    }
    let mut acc = 0.5 * (y[0] + y[y.len() - 1]);
    for v in &y[1..y.len() - 1] {
        acc += v;
    }
    acc * dx
}

/// Cumulative trapezoidal integral; output has the same length as the input
/// and starts at zero.
pub fn cumulative_trapezoid(y: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..y.len() {
        acc += 0.5 * dx * (y[k - 1] + y[k]);
        out.push(acc);
    }
    out
}

/// Complex-valued counterpart of [`cumulative_trapezoid`].
pub fn cumulative_trapezoid_complex(y: &[C64], dx: f64) -> Vec<C64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = C64::new(0.0, 0.0);
    out.push(acc);
    for k in 1..y.len() {
        acc += 0.5 * dx * (y[k - 1] + y[k]);
        out.push(acc);
    }
    out
}

/// Adaptive Simpson quadrature for complex integrands on a real interval.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> C64
where
    F: Fn(f64) -> C64,
{
    fn simpson(a: f64, fa: C64, b: f64, fb: C64, fm: C64) -> C64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse<F: Fn(f64) -> C64>(
        f: &F,
        a: f64,
        fa: C64,
        b: f64,
        fb: C64,
        fm: C64,
        whole: C64,
        tol: f64,
        depth: u32,
    ) -> C64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let err = left + right - whole;
        if depth == 0 || err.norm() <= 15.0 * tol {
            return left + right + err / 15.0;
        }
        recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return C64::new(0.0, 0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 40)
}

/// Sample mean.
pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Median (copies and sorts).
pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Indices of strict-or-plateau local maxima of `y` that exceed
/// `floor`, keeping only peaks separated by at least `min_separation` bins
/// (largest peak wins inside a separation window).
pub fn local_maxima(y: &[f64], floor: f64, min_separation: usize) -> Vec<usize> {
    let n = y.len();
    let mut cand = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if y[i] > floor && y[i] >= y[i - 1] && y[i] >= y[i + 1] && (y[i] > y[i - 1] || y[i] > y[i + 1])
        {
            cand.push(i);
        }
    }
    cand.sort_by(|&a, &b| y[b].partial_cmp(&y[a]).unwrap());
    let mut kept: Vec<usize> = Vec::new();
    for i in cand {
        if kept.iter().all(|&k| k.abs_diff(i) >= min_separation) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// Refine a discrete peak position by fitting a parabola through the three
/// samples around index `i`; returns the fractional index.
pub fn parabolic_peak(y: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= y.len() {
        return i as f64;
    }
    let denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
    if denom.abs() < 1e-300 {
        return i as f64;
    }
    i as f64 + 0.5 * (y[i - 1] - y[i + 1]) / denom
}

/// SplitMix64 step, used to derive independent RNG substreams from a master
/// seed and an index without correlations between streams.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Result of a Levenberg–Marquardt fit.
#[derive(Debug, Clone)]
pub struct LmFit {
    pub params: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped Levenberg–Marquardt for small dense least-squares problems.
///
/// `residuals(p, r)` fills `r` with the residual vector at parameters `p`.
/// The Jacobian is formed by forward differences. On failure to converge the
/// best iterate found is returned inside the error so callers can report it.
pub fn levenberg_marquardt<F>(
    residuals: F,
    x0: &[f64],
    n_res: usize,
    max_iter: usize,
    tol: f64,
) -> std::result::Result<LmFit, (Error, LmFit)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x0.len();
    let mut p = x0.to_vec();
    let mut r = vec![0.0; n_res];
    residuals(&p, &mut r);
    let mut cost = r.iter().map(|v| v * v).sum::<f64>();
    let mut lambda = 1e-3;
    let mut jac = vec![0.0; n_res * n];
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..max_iter {
        iterations = it + 1;
        // forward-difference Jacobian
        let mut rp = vec![0.0; n_res];
        for j in 0..n {
            let h = 1e-7 * p[j].abs().max(1e-7);
            let mut pj = p.clone();
            pj[j] += h;
            residuals(&pj, &mut rp);
            for i in 0..n_res {
                jac[i * n + j] = (rp[i] - r[i]) / h;
            }
        }
        // normal equations J^T J + lambda diag(J^T J)
        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for i in 0..n_res {
            for a in 0..n {
                jtr[a] += jac[i * n + a] * r[i];
                for b in a..n {
                    jtj[a * n + b] += jac[i * n + a] * jac[i * n + b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                jtj[a * n + b] = jtj[b * n + a];
            }
        }

        let mut improved = false;
        for _ in 0..12 {
            let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
            let mut g = nalgebra::DVector::<f64>::zeros(n);
            for a in 0..n {
                g[a] = -jtr[a];
                for b in 0..n {
                    m[(a, b)] = jtj[a * n + b];
                }
                m[(a, a)] += lambda * jtj[a * n + a].max(1e-12);
            }
            let step = match m.lu().solve(&g) {
                Some(s) => s,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
            let mut rt = vec![0.0; n_res];
            residuals(&trial, &mut rt);
            let ct = rt.iter().map(|v| v * v).sum::<f64>();
            if ct.is_finite() && ct < cost {
                let rel = (cost - ct) / cost.max(1e-300);
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < tol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !improved {
            // stuck: either converged to machine precision or genuinely failing
            converged = cost.sqrt() / (n_res as f64).sqrt() < 1e3 * tol || cost < 1e-24;
            break;
        }
    }

    let fit = LmFit {
        params: p,
        residual_norm: cost.sqrt(),
        iterations,
        converged,
    };
    if fit.converged {
        Ok(fit)
    } else {
        Err((
            Error::NoConvergence {
                context: "levenberg-marquardt".into(),
                detail: format!(
                    "residual norm {:.3e} after {} iterations",
                    fit.residual_norm, fit.iterations
                ),
            },
            fit,
        ))
    }
}
