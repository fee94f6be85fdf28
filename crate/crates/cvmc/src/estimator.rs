//! The control-variate estimator and its companions.
//!
//! Given samples X_1..X_n, an integrand f, and m zero-mean basis functions
//! h, the estimator regresses f(X_i) on h(X_i) with an intercept and reports
//! the intercept as the integral estimate:
//!
//!   (mu_hat, beta_hat) = argmin sum_i { f(X_i) - a - b'h(X_i) }^2.
//!
//! Two algebraic forms are implemented. The regression form solves the least
//! squares problem on the design [1 | H] by QR decomposition. The projection
//! form evaluates the closed-form identity
//!
//!   mu_hat = { P_n(f) - P_n(f h') P_n(hh')^{-1} P_n(h) }
//!          / { 1 - P_n(h') P_n(hh')^{-1} P_n(h) }
//!
//! through Cholesky solves on the uncentered second-moment matrix. The two
//! routes share no linear algebra, which makes their agreement a meaningful
//! cross-check rather than a tautology.
//!
//! The residual variance estimate sigma2_hat is the minimized sum of squares
//! divided by n; the degrees-of-freedom corrected value multiplies it by
//! n/(n - m - 1) and feeds the reported confidence interval.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{evaluate_basis, gram, BasisMatrix, ControlBasis};
use crate::domain::SamplePoints;
use crate::error::{CvmcError, Result};
use crate::integrand::Integrand;
use crate::quadrature::{product_nodes, QuadratureSpec};
use crate::stats::{normal_quantile, student_t_quantile};

/// Which algebraic route computes the estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OlsForm {
    Regression,
    Projection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Naive,
    OlsRegression,
    OlsProjection,
    OracleBeta,
}

/// Which quantile family the confidence interval uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileRule {
    Normal,
    StudentT,
}

/// Everything a single estimate reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub mu_hat: f64,
    /// Minimized sum of squares over n.
    pub sigma2_hat: f64,
    /// sigma2_hat scaled by n/(n - m - 1).
    pub sigma2_hat_dof: f64,
    /// Normal-quantile interval built from sigma2_hat_dof.
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
    pub n: usize,
    pub m: usize,
    /// 1 - P_n(h') P_n(hh')^{-1} P_n(h), the share of the constant function
    /// not explained by the sampled basis; 1 when there are no controls.
    pub denom: f64,
    pub method: EstimateMethod,
}

impl EstimateReport {
    /// Interval back out of the report under either quantile rule; the
    /// Student-t rule uses n - m - 1 degrees of freedom.
    pub fn ci_with(&self, rule: QuantileRule) -> (f64, f64) {
        let q = match rule {
            QuantileRule::Normal => normal_quantile(1.0 - self.alpha / 2.0),
            QuantileRule::StudentT => {
                student_t_quantile(1.0 - self.alpha / 2.0, (self.n - self.m - 1) as f64)
            }
        };
        let half = q * (self.sigma2_hat_dof / self.n as f64).sqrt();
        (self.mu_hat - half, self.mu_hat + half)
    }
}

/// Sample weights that turn the estimator into a weighted mean: applying
/// them to any integrand's values reproduces its estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub denom: f64,
    pub n: usize,
    pub m: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSource {
    EmpiricalOls,
    PopulationOracle,
}

/// Control-variate coefficients, either fitted or computed from population
/// integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaCoefficients {
    pub beta: Vec<f64>,
    pub source: BetaSource,
}

/// Population-optimal coefficients together with the residual variance
/// sigma^2(f - beta'h) they achieve.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleBeta {
    pub coefficients: BetaCoefficients,
    pub sigma2: f64,
    pub mu: f64,
}

/// A fitted estimate together with its slope coefficients.
#[derive(Clone, Debug)]
pub struct OlsFit {
    pub report: EstimateReport,
    pub beta: BetaCoefficients,
}

/// Operation counts for one estimator run, and the naive-MC sample size that
/// spends the same budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub basis_evals: u64,
    pub gram_ops: u64,
    pub solve_ops: u64,
    pub naive_equivalent_n: u64,
}

/// Operation counts with unit constants: n m basis evaluations, n m^2 (or
/// n m for localized bases) Gram accumulation operations, m^3 solve
/// operations. The budget-matched naive sample size is n m^2, or n m when
/// localized, and plain n when there are no controls.
pub fn cost_model(n: usize, m: usize, localized: bool) -> CostModel {
    let n = n as u64;
    let m = m as u64;
    let gram_ops = if localized { n * m } else { n * m * m };
    CostModel {
        basis_evals: n * m,
        gram_ops,
        solve_ops: m * m * m,
        naive_equivalent_n: if m == 0 { n } else { gram_ops },
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CvmcError::InvalidSpec {
            msg: format!("alpha must lie in (0,1), got {alpha}"),
        });
    }
    Ok(())
}

fn check_domains(f: &Integrand, samples: &SamplePoints) -> Result<()> {
    let (fd, sd) = (f.domain(), samples.domain());
    if fd.dim() != sd.dim() || fd.bounds() != sd.bounds() {
        return Err(CvmcError::DomainMismatch {
            msg: format!("integrand on {fd}, samples on {sd}"),
        });
    }
    Ok(())
}

fn ci_normal(mu: f64, sigma2_dof: f64, n: usize, alpha: f64) -> (f64, f64) {
    let half = normal_quantile(1.0 - alpha / 2.0) * (sigma2_dof / n as f64).sqrt();
    (mu - half, mu + half)
}

/// Plain Monte Carlo: sample mean, sample variance, normal interval.
pub fn naive_mc(f: &Integrand, samples: &SamplePoints, alpha: f64) -> Result<EstimateReport> {
    check_alpha(alpha)?;
    check_domains(f, samples)?;
    let n = samples.n();
    if n < 2 {
        return Err(CvmcError::InsufficientSamples { n, required: 2 });
    }
    let ys: Vec<f64> = samples.iter().map(|x| f.eval(x)).collect();
    let mu = crate::stats::mean(&ys);
    let sigma2 = crate::stats::variance_n(&ys);
    let sigma2_dof = sigma2 * n as f64 / (n as f64 - 1.0);
    let (ci_low, ci_high) = ci_normal(mu, sigma2_dof, n, alpha);
    Ok(EstimateReport {
        mu_hat: mu,
        sigma2_hat: sigma2,
        sigma2_hat_dof: sigma2_dof,
        ci_low,
        ci_high,
        alpha,
        n,
        m: 0,
        denom: 1.0,
        method: EstimateMethod::Naive,
    })
}

/// Outcome of the shared design validation: thin QR data reused by the
/// estimate and weight paths.
#[derive(Debug)]
struct DesignGate {
    q: DMatrix<f64>,
    /// Q'1, the coordinates of the ones vector in the sampled basis span.
    q_t_ones: DVector<f64>,
    denom: f64,
}

const PIVOT_RTOL: f64 = 1e-10;
const DENOM_FLOOR: f64 = 1e-8;

/// Validate the sampled design: column rank of the centered basis matrix
/// (rank loss means a control function adds nothing on these samples, e.g.
/// an empty stratum) and distance of the ones vector from the basis span.
fn validate_design(h: &DMatrix<f64>) -> Result<DesignGate> {
    let n = h.nrows();
    let m = h.ncols();
    let ones = DVector::from_element(n, 1.0);
    if m == 0 {
        return Ok(DesignGate {
            q: DMatrix::zeros(n, 0),
            q_t_ones: DVector::zeros(0),
            denom: 1.0,
        });
    }

    // centered columns: a column that is constant on the samples (or a
    // combination that is) carries no information and collapses the centered
    // Gram matrix P_n(hh') - P_n(h)P_n(h')
    let mut centered = h.clone();
    for j in 0..m {
        let mean = centered.column(j).mean();
        centered.column_mut(j).add_scalar_mut(-mean);
    }
    let piv = centered.col_piv_qr();
    let r = piv.r();
    let mut max_piv: f64 = 0.0;
    let mut min_piv = f64::INFINITY;
    for j in 0..m {
        let v = r[(j, j)].abs();
        max_piv = max_piv.max(v);
        min_piv = min_piv.min(v);
    }
    if max_piv == 0.0 || min_piv < PIVOT_RTOL * max_piv {
        return Err(CvmcError::SingularGram);
    }

    let qr = h.clone().qr();
    let q = qr.q();
    let q_t_ones = q.tr_mul(&ones);
    let denom = 1.0 - q_t_ones.norm_squared() / n as f64;
    if denom <= DENOM_FLOOR {
        return Err(CvmcError::OnesInColumnSpace { denom });
    }
    Ok(DesignGate { q, q_t_ones, denom })
}

/// Control-variate estimate of the integral of f, with fitted coefficients.
pub fn olsmc_fit(
    f: &Integrand,
    samples: &SamplePoints,
    basis: &ControlBasis,
    alpha: f64,
    form: OlsForm,
) -> Result<OlsFit> {
    check_alpha(alpha)?;
    check_domains(f, samples)?;
    let n = samples.n();
    let m = basis.m();
    if m == 0 {
        let report = naive_mc(f, samples, alpha)?;
        return Ok(OlsFit {
            report,
            beta: BetaCoefficients {
                beta: vec![],
                source: BetaSource::EmpiricalOls,
            },
        });
    }
    if n < m + 2 {
        return Err(CvmcError::InsufficientSamples { n, required: m + 2 });
    }
    let h = evaluate_basis(basis, samples)?;
    let y = DVector::from_iterator(n, samples.iter().map(|x| f.eval(x)));
    let gate = validate_design(&h.values)?;

    let (mu, beta, sigma2, denom, method) = match form {
        OlsForm::Regression => {
            let (mu, beta, sigma2) = solve_regression(&h, &y)?;
            (mu, beta, sigma2, gate.denom, EstimateMethod::OlsRegression)
        }
        OlsForm::Projection => solve_projection(&h, &y)?,
    };

    let dof_factor = n as f64 / (n as f64 - m as f64 - 1.0);
    let sigma2_dof = sigma2 * dof_factor;
    let (ci_low, ci_high) = ci_normal(mu, sigma2_dof, n, alpha);
    Ok(OlsFit {
        report: EstimateReport {
            mu_hat: mu,
            sigma2_hat: sigma2,
            sigma2_hat_dof: sigma2_dof,
            ci_low,
            ci_high,
            alpha,
            n,
            m,
            denom,
            method,
        },
        beta: BetaCoefficients {
            beta: beta.iter().copied().collect(),
            source: BetaSource::EmpiricalOls,
        },
    })
}

/// Control-variate estimate of the integral of f.
pub fn olsmc(
    f: &Integrand,
    samples: &SamplePoints,
    basis: &ControlBasis,
    alpha: f64,
    form: OlsForm,
) -> Result<EstimateReport> {
    olsmc_fit(f, samples, basis, alpha, form).map(|fit| fit.report)
}

/// Least squares on [1 | H] by QR; returns (intercept, slopes, rss/n).
fn solve_regression(h: &BasisMatrix, y: &DVector<f64>) -> Result<(f64, DVector<f64>, f64)> {
    let n = h.n();
    let m = h.m();
    let mut design = DMatrix::<f64>::zeros(n, m + 1);
    design.column_mut(0).fill(1.0);
    design.view_mut((0, 1), (n, m)).copy_from(&h.values);
    let qr = design.clone().qr();
    let qtb = qr.q().tr_mul(y);
    let mut theta = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or(CvmcError::SingularGram)?;
    // One fixed-precision refinement step. A single QR pass leaves the
    // coefficients with rounding error proportional to the size of y, which
    // dominates the statistical error once the controls absorb nearly all of
    // f; re-solving against the residual shrinks that error to the residual
    // scale for one extra O(nm) sweep.
    let mut resid = y - &design * &theta;
    if let Some(correction) = qr
        .r()
        .solve_upper_triangular(&qr.q().tr_mul(&resid))
    {
        theta += correction;
        resid = y - &design * &theta;
    }
    let mu = theta[0];
    let beta = theta.rows(1, m).into_owned();
    let sigma2 = resid.norm_squared() / n as f64;
    Ok((mu, beta, sigma2))
}

/// The projection identities, via Cholesky solves on P_n(hh') and on the
/// centered matrix G_n = P_n(hh') - P_n(h)P_n(h').
fn solve_projection(
    h: &BasisMatrix,
    y: &DVector<f64>,
) -> Result<(f64, DVector<f64>, f64, f64, EstimateMethod)> {
    let n = h.n();
    let nf = n as f64;
    let ones = DVector::from_element(n, 1.0);
    let a = h.values.tr_mul(&h.values) / nf; // P_n(hh')
    let b = h.values.tr_mul(&ones) / nf; // P_n(h)
    let c = h.values.tr_mul(y) / nf; // P_n(hf)
    let ybar = y.mean();

    let chol_a = Cholesky::new(a.clone()).ok_or(CvmcError::SingularGram)?;
    let x = chol_a.solve(&b);
    let denom = 1.0 - b.dot(&x);
    if denom <= DENOM_FLOOR {
        return Err(CvmcError::OnesInColumnSpace { denom });
    }
    let mu = (ybar - c.dot(&x)) / denom;

    let g = &a - &b * b.transpose();
    let rhs = &c - &b * ybar;
    let chol_g = Cholesky::new(g).ok_or(CvmcError::SingularGram)?;
    let beta = chol_g.solve(&rhs);

    let s_yy = y.iter().map(|v| (v - ybar) * (v - ybar)).sum::<f64>() / nf;
    let sigma2 = (s_yy - rhs.dot(&beta)).max(0.0);
    Ok((mu, beta, sigma2, denom, EstimateMethod::OlsProjection))
}

/// The integrand-independent weights w = (I - Pi) 1 / (1'(I - Pi) 1), where
/// Pi projects onto the sampled basis columns. Applying them to any
/// integrand's values reproduces that integrand's estimate.
pub fn olsmc_weights(samples: &SamplePoints, basis: &ControlBasis) -> Result<WeightVector> {
    let n = samples.n();
    let m = basis.m();
    if m == 0 {
        return Ok(WeightVector {
            weights: vec![1.0 / n as f64; n],
            denom: 1.0,
            n,
            m,
        });
    }
    if n < m + 2 {
        return Err(CvmcError::InsufficientSamples { n, required: m + 2 });
    }
    let h = evaluate_basis(basis, samples)?;
    let gate = validate_design(&h.values)?;
    // Pi 1 = Q (Q'1); the weight of point i is (1 - (Pi 1)_i) / (n denom)
    let pi_ones = &gate.q * &gate.q_t_ones;
    let scale = 1.0 / (n as f64 * gate.denom);
    let weights = (0..n).map(|i| (1.0 - pi_ones[i]) * scale).collect();
    Ok(WeightVector {
        weights,
        denom: gate.denom,
        n,
        m,
    })
}

/// Population-optimal coefficients beta = P(hh')^{-1} P(hf) and the residual
/// variance sigma^2(f - beta'h), both from quadrature.
///
/// The variance is integrated directly as P((f - mu - beta'h)^2) rather than
/// evaluated through the difference identity sigma^2(f) - P(fh')P(hh')^{-1}
/// P(hf): when the basis captures f almost entirely the difference of the
/// two near-equal numbers is pure cancellation noise, while the residual
/// integral keeps full relative precision at any scale.
pub fn beta_oracle(
    f: &Integrand,
    basis: &ControlBasis,
    spec: &QuadratureSpec,
) -> Result<OracleBeta> {
    let bd = basis.domain();
    let fd = f.domain();
    if bd.dim() != fd.dim() || bd.bounds() != fd.bounds() {
        return Err(CvmcError::DomainMismatch {
            msg: format!("integrand on {fd}, basis on {bd}"),
        });
    }
    let m = basis.m();
    let g = gram(basis, spec)?;

    // one node sweep accumulates P(hf) and P(f)
    let mut knots: Vec<f64> = basis.axis_knots().to_vec();
    knots.extend_from_slice(f.breakpoints());
    let (points, weights, d) = product_nodes(bd, spec, &knots)?;
    let mut rhs = DVector::<f64>::zeros(m);
    let mut mean_quad = 0.0;
    let mut hbuf = vec![0.0; m];
    for (idx, w) in weights.iter().enumerate() {
        let x = &points[idx * d..(idx + 1) * d];
        let fv = f.eval(x);
        if !fv.is_finite() {
            return Err(CvmcError::NonFinite {
                context: format!("integrand {} at a quadrature node", f.id()),
            });
        }
        basis.eval_all(x, &mut hbuf);
        for j in 0..m {
            rhs[j] += w * fv * hbuf[j];
        }
        mean_quad += w * fv;
    }
    let mu = f.true_mean().unwrap_or(mean_quad);

    let beta = if m == 0 {
        DVector::zeros(0)
    } else {
        Cholesky::new(g)
            .ok_or(CvmcError::RankDeficient {
                lambda_min: f64::NAN,
            })?
            .solve(&rhs)
    };

    // second sweep: residual variance P((f - mu - beta'h)^2)
    let mut sigma2 = 0.0;
    for (idx, w) in weights.iter().enumerate() {
        let x = &points[idx * d..(idx + 1) * d];
        basis.eval_all(x, &mut hbuf);
        let mut r = f.eval(x) - mu;
        for j in 0..m {
            r -= beta[j] * hbuf[j];
        }
        sigma2 += w * r * r;
    }

    Ok(OracleBeta {
        coefficients: BetaCoefficients {
            beta: beta.iter().copied().collect(),
            source: BetaSource::PopulationOracle,
        },
        sigma2,
        mu,
    })
}

/// Mean of f - beta'h over the samples, with fixed (non-fitted) coefficients.
pub fn estimate_with_oracle_beta(
    f: &Integrand,
    samples: &SamplePoints,
    basis: &ControlBasis,
    beta: &BetaCoefficients,
    alpha: f64,
) -> Result<EstimateReport> {
    check_alpha(alpha)?;
    check_domains(f, samples)?;
    let n = samples.n();
    let m = basis.m();
    if beta.beta.len() != m {
        return Err(CvmcError::InvalidSpec {
            msg: format!(
                "coefficient vector has length {}, basis has m = {m}",
                beta.beta.len()
            ),
        });
    }
    if n < 2 {
        return Err(CvmcError::InsufficientSamples { n, required: 2 });
    }
    let h = evaluate_basis(basis, samples)?;
    let mut gs = Vec::with_capacity(n);
    for (i, x) in samples.iter().enumerate() {
        let mut v = f.eval(x);
        for j in 0..m {
            v -= beta.beta[j] * h.values[(i, j)];
        }
        gs.push(v);
    }
    let mu = crate::stats::mean(&gs);
    let sigma2 = crate::stats::variance_n(&gs);
    let sigma2_dof = sigma2 * n as f64 / (n as f64 - 1.0);
    let (ci_low, ci_high) = ci_normal(mu, sigma2_dof, n, alpha);
    Ok(EstimateReport {
        mu_hat: mu,
        sigma2_hat: sigma2,
        sigma2_hat_dof: sigma2_dof,
        ci_low,
        ci_high,
        alpha,
        n,
        m,
        denom: 1.0,
        method: EstimateMethod::OracleBeta,
    })
}
