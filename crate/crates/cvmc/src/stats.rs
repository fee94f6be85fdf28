//! Small statistical toolbox: moments, quantiles, an exact finite-sample
//! Kolmogorov-Smirnov distribution, and log-log slope fitting.
//!
//! The KS distribution is evaluated with the Marsaglia-Tsang-Wang matrix
//! power method, which gives P(D_n < d) to near machine precision for the
//! sample sizes used by the studies (up to about 10^4 replications). No
//! asymptotic approximation is substituted in the region where it would
//! change the reported digits.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population-style variance with divisor n.
pub fn variance_n(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Quantile of the standard normal distribution.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// CDF of the standard normal distribution.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Quantile of Student's t distribution with `df` degrees of freedom.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).unwrap().inverse_cdf(p)
}

/// Exact CDF P(D_n < d) of the Kolmogorov-Smirnov statistic for sample size n.
///
/// Matrix-power method: with k = floor(n d) + 1, h = k - n d and m = 2k - 1,
/// build the m x m matrix H of partial-sum transition weights, then
/// P(D_n < d) = (n!/n^n) (H^n)_{kk}. Powers are computed by repeated squaring
/// with explicit rescaling by 1e140 to dodge overflow, exactly as in the
/// published algorithm. For n d^2 >= 20 the exact value is 1 to the last
/// double-precision ulp, so 1.0 is returned without forming the matrix.
pub fn ks_cdf(n: usize, d: f64) -> f64 {
    assert!(n >= 1, "sample size must be positive");
    if d <= 0.0 {
        return 0.0;
    }
    if d >= 1.0 {
        return 1.0;
    }
    let nf = n as f64;
    if nf * d * d >= 20.0 {
        return 1.0;
    }
    let k = (nf * d) as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nf * d;

    let mut hm = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                hm[(i, j)] = 1.0;
            }
        }
    }
    for i in 0..m {
        hm[(i, 0)] -= h.powi(i as i32 + 1);
        hm[(m - 1, i)] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1, 0)] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                for g in 1..=(i + 1 - j) {
                    hm[(i, j)] /= g as f64;
                }
            }
        }
    }

    let (q, mut e) = mat_pow_scaled(&hm, n, k);
    let mut s = q[(k - 1, k - 1)];
    for i in 1..=n {
        s = s * i as f64 / nf;
        if s < 1e-140 {
            s *= 1e140;
            e -= 1;
        }
    }
    (s * 1e140f64.powi(e)).clamp(0.0, 1.0)
}

/// H^n together with a base-1e140 exponent, rescaled on the diagonal entry
/// that the caller will read.
fn mat_pow_scaled(h: &DMatrix<f64>, n: usize, k: usize) -> (DMatrix<f64>, i32) {
    if n == 1 {
        return (h.clone(), 0);
    }
    let (half, e_half) = mat_pow_scaled(h, n / 2, k);
    let mut q = &half * &half;
    let mut e = 2 * e_half;
    if n % 2 == 1 {
        q = &q * h;
    }
    if q[(k - 1, k - 1)] > 1e140 {
        q /= 1e140;
        e += 1;
    }
    (q, e)
}

/// Two-sided KS statistic of a sample against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut z: Vec<f64> = sample.to_vec();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in z.iter().enumerate() {
        let f = cdf(v);
        d = d.max(f - i as f64 / n).max((i as f64 + 1.0) / n - f);
    }
    d
}

/// KS statistic and exact p-value of a sample against the standard normal.
pub fn ks_test_standard_normal(sample: &[f64]) -> (f64, f64) {
    let d = ks_statistic(sample, normal_cdf);
    let p = 1.0 - ks_cdf(sample.len(), d);
    (d, p)
}

/// Least squares slope of ln(y) against ln(x).
pub fn fit_log_log_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xbar = mean(&xs);
    let ybar = mean(&ys);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..xs.len() {
        num += (xs[i] - xbar) * (ys[i] - ybar);
        den += (xs[i] - xbar) * (xs[i] - xbar);
    }
    num / den
}

/// Symmetric three-standard-error band around the nominal coverage 1 - alpha
/// for an empirical coverage estimated from `reps` replications.
pub fn coverage_band(alpha: f64, reps: usize) -> (f64, f64) {
    let p = 1.0 - alpha;
    let half = 3.0 * (p * alpha / reps as f64).sqrt();
    (p - half, p + half)
}
