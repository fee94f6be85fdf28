//! Leverage diagnostics for the growing-basis regime.
//!
//! The leverage function q(x) = h(x)' P(hh')^{-1} h(x) measures how much a
//! point at x can pull the fit; its mean over the domain is always m, so
//! trouble shows up in the supremum. The estimator's normality rests on the
//! growth rule m * sup_x q(x) / n -> 0: as long as no point is worth more
//! than a vanishing share of the sample, adding control functions keeps
//! helping. This module evaluates q, its empirical counterpart (the hat
//! matrix diagonal), the growth-rule ratio along a schedule, and a cheap
//! eigenvalue upper bound for q.

use nalgebra::{Cholesky, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::basis::{evaluate_basis, gram, BasisFamily, BasisMatrix, ControlBasis};
use crate::domain::SamplePoints;
use crate::error::{CvmcError, Result};
use crate::quadrature::{product_nodes, QuadratureSpec};

/// Default multiple of the average leverage m/n above which a point is
/// flagged as high-leverage.
pub const DEFAULT_LEVERAGE_FLAG_FACTOR: f64 = 3.0;

/// The leverage function of a basis, with the Gram solve cached.
pub struct LeverageFunction {
    basis: ControlBasis,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl LeverageFunction {
    pub fn new(basis: &ControlBasis, quad: &QuadratureSpec) -> Result<Self> {
        let chol = if basis.m() == 0 {
            None
        } else {
            let g = gram(basis, quad)?;
            Some(Cholesky::new(g).ok_or(CvmcError::RankDeficient {
                lambda_min: f64::NAN,
            })?)
        };
        Ok(LeverageFunction {
            basis: basis.clone(),
            chol,
        })
    }

    /// q(x) = h(x)' P(hh')^{-1} h(x).
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.chol {
            None => 0.0,
            Some(chol) => {
                let m = self.basis.m();
                let mut h = DVector::zeros(m);
                self.basis.eval_all(x, h.as_mut_slice());
                let solved = chol.solve(&h);
                h.dot(&solved)
            }
        }
    }
}

/// One-shot evaluation of the leverage function at a point.
pub fn leverage_function(basis: &ControlBasis, x: &[f64], quad: &QuadratureSpec) -> Result<f64> {
    Ok(LeverageFunction::new(basis, quad)?.eval(x))
}

/// Diagonal of the hat matrix H (H'H)^{-1} H' for the sampled basis matrix.
/// Entry i is the empirical leverage of sample i; the entries sum to m.
pub fn empirical_leverages(basis_matrix: &BasisMatrix) -> Result<Vec<f64>> {
    let n = basis_matrix.n();
    let m = basis_matrix.m();
    if m == 0 {
        return Ok(vec![0.0; n]);
    }
    if n < m {
        return Err(CvmcError::SingularGram);
    }
    let piv = basis_matrix.values.clone().col_piv_qr();
    let r = piv.r();
    let mut max_piv: f64 = 0.0;
    let mut min_piv = f64::INFINITY;
    for j in 0..m {
        let v = r[(j, j)].abs();
        max_piv = max_piv.max(v);
        min_piv = min_piv.min(v);
    }
    if max_piv == 0.0 || min_piv < 1e-10 * max_piv {
        return Err(CvmcError::SingularGram);
    }
    let q = basis_matrix.values.clone().qr().q();
    Ok((0..n).map(|i| q.row(i).norm_squared()).collect())
}

/// Leverage summary for one basis on one sample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeverageProfile {
    pub m: usize,
    pub n: usize,
    /// Supremum of q over the domain: analytic for the built-in families,
    /// otherwise the maximum over a probe grid (then a lower bound).
    pub sup_q: f64,
    /// True when sup_q came from probing rather than a closed form.
    pub sup_q_is_lower_bound: bool,
    /// Quadrature of q over the domain; equals m for any valid basis.
    pub mean_q_quad: f64,
    pub empirical_leverages: Vec<f64>,
    pub max_empirical: f64,
    /// Sample indices whose leverage exceeds c * m / n.
    pub high_leverage_flags: Vec<usize>,
    pub c: f64,
}

/// Supremum of the leverage function.
///
/// Indicators have constant leverage m. For 1-d Legendre the maximum sits at
/// the endpoint where every polynomial equals 1, giving sum of (2j+1) =
/// m(m+2). The tensor family is orthonormal, so q is the plain sum of
/// squares, again maximized at the corner of ones. Custom bases are probed:
/// a 1000-point grid per axis up to d = 2, a deterministic Kronecker lattice
/// in higher dimension; the result is a lower bound on the true supremum.
pub fn sup_leverage(basis: &ControlBasis, quad: &QuadratureSpec) -> Result<(f64, bool)> {
    let m = basis.m() as f64;
    match basis.family() {
        BasisFamily::IndicatorStrata => Ok((m, false)),
        BasisFamily::Legendre1d => Ok((m * (m + 2.0), false)),
        BasisFamily::LegendreTensor => {
            let mut total = 0.0;
            for degrees in basis.degree_vectors() {
                let mut prod = 1.0;
                for &a in degrees {
                    prod *= 2.0 * a as f64 + 1.0;
                }
                total += prod;
            }
            Ok((total, false))
        }
        BasisFamily::Custom => {
            let lf = LeverageFunction::new(basis, quad)?;
            let d = basis.domain().dim();
            let (lo, hi) = basis.domain().bounds();
            let width = hi - lo;
            let mut best: f64 = 0.0;
            if d <= 2 {
                let k = 1000usize;
                let axis: Vec<f64> =
                    (0..=k).map(|i| lo + width * i as f64 / k as f64).collect();
                if d == 1 {
                    for &x in &axis {
                        best = best.max(lf.eval(&[x]));
                    }
                } else {
                    for &x0 in &axis {
                        for &x1 in &axis {
                            best = best.max(lf.eval(&[x0, x1]));
                        }
                    }
                }
            } else {
                // Kronecker lattice: x_i = frac(i * g) per axis with golden
                // ratio powers, deterministic and well spread
                let points = 4096usize;
                let mut gens = Vec::with_capacity(d);
                let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
                let mut g = 1.0 / phi;
                for _ in 0..d {
                    gens.push(g);
                    g = (g / phi).fract();
                }
                let mut x = vec![0.0; d];
                for i in 0..points {
                    for (a, xa) in x.iter_mut().enumerate() {
                        *xa = lo + width * ((i as f64 + 0.5) * gens[a]).fract();
                    }
                    best = best.max(lf.eval(&x));
                }
            }
            Ok((best, true))
        }
    }
}

/// Quadrature of the leverage function over the domain. The identity
/// P(q) = m holds for every basis with an invertible Gram matrix.
pub fn mean_leverage_by_quadrature(
    basis: &ControlBasis,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if basis.m() == 0 {
        return Ok(0.0);
    }
    let lf = LeverageFunction::new(basis, quad)?;
    let (points, weights, d) = product_nodes(basis.domain(), quad, basis.axis_knots())?;
    let mut acc = 0.0;
    for (idx, w) in weights.iter().enumerate() {
        acc += w * lf.eval(&points[idx * d..(idx + 1) * d]);
    }
    Ok(acc)
}

/// Full leverage summary: population supremum and mean, empirical hat-matrix
/// diagonal, and the indices flagged as high-leverage at threshold c * m / n.
pub fn leverage_profile(
    basis: &ControlBasis,
    samples: &SamplePoints,
    quad: &QuadratureSpec,
    c: f64,
) -> Result<LeverageProfile> {
    let m = basis.m();
    let n = samples.n();
    let (sup_q, sup_q_is_lower_bound) = sup_leverage(basis, quad)?;
    let mean_q_quad = mean_leverage_by_quadrature(basis, quad)?;
    let h = evaluate_basis(basis, samples)?;
    let empirical = empirical_leverages(&h)?;
    let max_empirical = empirical.iter().cloned().fold(0.0, f64::max);
    let threshold = c * m as f64 / n as f64;
    let high_leverage_flags = empirical
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > threshold)
        .map(|(i, _)| i)
        .collect();
    Ok(LeverageProfile {
        m,
        n,
        sup_q,
        sup_q_is_lower_bound,
        mean_q_quad,
        empirical_leverages: empirical,
        max_empirical,
        high_leverage_flags,
        c,
    })
}

/// One grid entry of a growth-rule check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: usize,
    pub m: usize,
    pub sup_q: f64,
    /// m * sup_q / n, the quantity that must tend to zero.
    pub ratio: f64,
}

/// Verdict of a growth-rule check along a schedule.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub family: BasisFamily,
    pub rows: Vec<GrowthRow>,
    /// True when the ratio sequence is heading to zero over the grid.
    pub passes: bool,
    /// The schedule shape under which the family satisfies the growth rule.
    pub sufficient_schedule: String,
}

/// Evaluate the growth rule m * sup_q / n along a schedule n -> m_n.
///
/// The analytic supremum per family is m for indicators, m(m+2) for 1-d
/// Legendre, and order m^2 for the graded tensor family. The verdict passes
/// when the ratio sequence is non-increasing over the grid (5% slack for
/// floor-function jitter in the schedule) and at least halves from first to
/// last entry.
pub fn check_growth_rule(
    family: BasisFamily,
    schedule: impl Fn(usize) -> usize,
    n_grid: &[usize],
) -> Result<GrowthCheck> {
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CvmcError::InvalidSpec {
            msg: "growth check needs a strictly increasing grid of at least two sizes".into(),
        });
    }
    let (sup_of_m, sufficient): (fn(f64) -> f64, &str) = match family {
        BasisFamily::IndicatorStrata => (|m| m, "m = o(n^{1/2})"),
        BasisFamily::Legendre1d => (|m| m * (m + 2.0), "m = o(n^{1/3})"),
        BasisFamily::LegendreTensor => (|m| m * m, "m^3 = o(n)"),
        BasisFamily::Custom => {
            return Err(CvmcError::InvalidSpec {
                msg: "custom bases have no analytic leverage supremum; probe an instance instead"
                    .into(),
            })
        }
    };
    let rows: Vec<GrowthRow> = n_grid
        .iter()
        .map(|&n| {
            let m = schedule(n);
            let sup_q = sup_of_m(m as f64);
            GrowthRow {
                n,
                m,
                sup_q,
                ratio: m as f64 * sup_q / n as f64,
            }
        })
        .collect();
    let nonincreasing = rows.windows(2).all(|w| w[1].ratio <= 1.05 * w[0].ratio);
    let shrinks = rows.last().unwrap().ratio <= 0.5 * rows.first().unwrap().ratio;
    Ok(GrowthCheck {
        family,
        rows,
        passes: nonincreasing && shrinks,
        sufficient_schedule: sufficient.to_string(),
    })
}

/// The eigenvalue bound q(x) <= (1/lambda_min) sum_j h_j(x)^2, which needs
/// only the smallest Gram eigenvalue rather than a full solve.
pub fn leverage_upper_bound(
    basis: &ControlBasis,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    let m = basis.m();
    if m == 0 {
        return Ok(0.0);
    }
    let lambda_min = match basis.lambda_min_analytic() {
        Some(v) => v,
        None => {
            let g = gram(basis, quad)?;
            let eigen = g.symmetric_eigen();
            eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
        }
    };
    if !(lambda_min > 0.0) {
        return Err(CvmcError::RankDeficient { lambda_min });
    }
    let mut h = vec![0.0; m];
    basis.eval_all(x, &mut h);
    Ok(h.iter().map(|v| v * v).sum::<f64>() / lambda_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    use crate::basis::{
        make_custom_basis, make_indicator_basis, make_legendre_basis, make_legendre_tensor_basis,
        CustomBasisFn,
    };
    use crate::domain::{draw_samples, Domain, SamplePoints};
    use std::sync::Arc;

    fn quad() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn indicator_leverage_is_constant_m() {
        let basis = make_indicator_basis(4).unwrap();
        let lf = LeverageFunction::new(&basis, &quad()).unwrap();
        for x in [0.01, 0.25, 0.5, 0.77, 0.99] {
            assert!(
                (lf.eval(&[x]) - 4.0).abs() < 1e-10,
                "q({x}) = {} should be m = 4",
                lf.eval(&[x])
            );
        }
    }

    #[test]
    fn legendre_leverage_at_known_points() {
        // at x = 1 every polynomial is 1, so q(1) = sum of (2j+1) = m(m+2)
        let basis = make_legendre_basis(3).unwrap();
        let q1 = leverage_function(&basis, &[1.0], &quad()).unwrap();
        assert!((q1 - 15.0).abs() < 1e-9, "q(1) = {q1}, want 15");

        // at x = 0: L_1 = 0, L_2 = -1/2, so q(0) = 3*0 + 5/4
        let basis = make_legendre_basis(2).unwrap();
        let q0 = leverage_function(&basis, &[0.0], &quad()).unwrap();
        assert!((q0 - 1.25).abs() < 1e-10, "q(0) = {q0}, want 5/4");
    }

    #[test]
    fn leverage_is_invariant_under_basis_transformation() {
        let base = make_legendre_basis(3).unwrap();
        let a_rows = [[1.0, 2.0, 0.5], [0.0, 1.0, -1.0], [3.0, 0.0, 1.0]];
        let fns: Vec<CustomBasisFn> = (0..3)
            .map(|r| {
                let base = base.clone();
                let row = a_rows[r];
                let f: CustomBasisFn = Arc::new(move |x: &[f64]| {
                    let mut h = [0.0; 3];
                    base.eval_all(x, &mut h);
                    row[0] * h[0] + row[1] * h[1] + row[2] * h[2]
                });
                f
            })
            .collect();
        let transformed =
            make_custom_basis(fns, Domain::IntervalM1P1, true, vec![], &quad()).unwrap();
        let lf = LeverageFunction::new(&base, &quad()).unwrap();
        let lf_a = LeverageFunction::new(&transformed, &quad()).unwrap();
        for x in [-0.9, -0.3, 0.0, 0.4, 1.0] {
            let (q, qa) = (lf.eval(&[x]), lf_a.eval(&[x]));
            assert!(
                (q - qa).abs() < 1e-9,
                "q({x}): direct {q} vs transformed {qa}"
            );
        }
    }

    #[test]
    fn hand_sized_empirical_leverages() {
        // one column with values (-1, 1): H(H'H)^{-1}H' = hh'/2
        let bm = BasisMatrix {
            values: DMatrix::from_column_slice(2, 1, &[-1.0, 1.0]),
        };
        let lev = empirical_leverages(&bm).unwrap();
        assert!((lev[0] - 0.5).abs() < 1e-14 && (lev[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn empirical_leverages_sum_to_m() {
        let basis = make_legendre_basis(4).unwrap();
        let s = draw_samples(Domain::IntervalM1P1, 300, 8).unwrap();
        let h = evaluate_basis(&basis, &s).unwrap();
        let lev = empirical_leverages(&h).unwrap();
        let total: f64 = lev.iter().sum();
        assert!((total - 4.0).abs() < 1e-9, "trace {total} should be m = 4");
        assert!(lev.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn empirical_leverages_match_dense_hat_matrix() {
        let basis = make_indicator_basis(3).unwrap();
        let s = draw_samples(Domain::UnitInterval01, 40, 12).unwrap();
        let h = evaluate_basis(&basis, &s).unwrap();
        let lev = empirical_leverages(&h).unwrap();
        let hth = h.values.tr_mul(&h.values);
        let inv = hth.try_inverse().expect("Gram invertible");
        let hat = &h.values * inv * h.values.transpose();
        for i in 0..40 {
            assert!(
                (lev[i] - hat[(i, i)]).abs() < 1e-10,
                "leverage {i}: {} vs dense {}",
                lev[i],
                hat[(i, i)]
            );
        }
    }

    #[test]
    fn indicator_leverage_follows_the_stratum_count_formula() {
        // for indicators the hat matrix is constant per stratum, and a point
        // in stratum k has leverage 1/n_k - 1/(n_k^2 S) with S = sum 1/n_l
        let basis = make_indicator_basis(2).unwrap();
        let s = SamplePoints::from_values(
            Domain::UnitInterval01,
            vec![0.1, 0.2, 0.4, 0.45, 0.5, 0.7, 0.8, 0.9, 0.95],
        )
        .unwrap();
        let h = evaluate_basis(&basis, &s).unwrap();
        let lev = empirical_leverages(&h).unwrap();
        let counts = [2.0, 3.0, 4.0];
        let s_inv: f64 = counts.iter().map(|c| 1.0 / c).sum();
        let strata = [0, 0, 1, 1, 1, 2, 2, 2, 2];
        for i in 0..9 {
            let nk = counts[strata[i]];
            let want = 1.0 / nk - 1.0 / (nk * nk * s_inv);
            assert!(
                (lev[i] - want).abs() < 1e-12,
                "point {i}: leverage {} vs formula {want}",
                lev[i]
            );
        }
    }

    #[test]
    fn singular_designs_are_rejected() {
        // duplicated column
        let vals = DMatrix::from_column_slice(4, 2, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0]);
        let bm = BasisMatrix { values: vals };
        assert!(matches!(
            empirical_leverages(&bm),
            Err(CvmcError::SingularGram)
        ));
        // fewer samples than columns
        let bm = BasisMatrix {
            values: DMatrix::from_element(2, 3, 1.0),
        };
        assert!(matches!(
            empirical_leverages(&bm),
            Err(CvmcError::SingularGram)
        ));
    }

    #[test]
    fn mean_leverage_equals_m_by_quadrature() {
        let cases: Vec<(ControlBasis, f64)> = vec![
            (make_indicator_basis(4).unwrap(), 4.0),
            (make_legendre_basis(3).unwrap(), 3.0),
            (make_legendre_tensor_basis(5, 2).unwrap(), 5.0),
        ];
        for (basis, m) in cases {
            let mean = mean_leverage_by_quadrature(&basis, &quad()).unwrap();
            assert!(
                (mean - m).abs() < 1e-8,
                "mean leverage {mean} should equal m = {m}"
            );
        }
    }

    #[test]
    fn growth_rule_matches_known_schedules() {
        let grid = [100, 10_000, 1_000_000];
        let fourth_root = |n: usize| (n as f64).powf(0.25) as usize;
        let check =
            check_growth_rule(BasisFamily::Legendre1d, fourth_root, &grid).unwrap();
        assert!(check.passes, "m = n^(1/4) must pass for 1-d Legendre");
        assert!(check.rows.windows(2).all(|w| w[1].ratio < w[0].ratio));

        let square_root = |n: usize| (n as f64).sqrt() as usize;
        let check =
            check_growth_rule(BasisFamily::Legendre1d, square_root, &grid).unwrap();
        assert!(!check.passes, "m = n^(1/2) must fail for 1-d Legendre");

        let cube_root = |n: usize| (n as f64).cbrt() as usize;
        let check =
            check_growth_rule(BasisFamily::IndicatorStrata, cube_root, &grid).unwrap();
        assert!(check.passes, "m = n^(1/3) must pass for indicators");
        assert_eq!(check.sufficient_schedule, "m = o(n^{1/2})");
    }

    #[test]
    fn growth_rule_rejects_bad_grids() {
        assert!(check_growth_rule(BasisFamily::Legendre1d, |_| 3, &[100]).is_err());
        assert!(check_growth_rule(BasisFamily::Legendre1d, |_| 3, &[100, 100]).is_err());
        assert!(check_growth_rule(BasisFamily::Custom, |_| 3, &[100, 200]).is_err());
    }

    #[test]
    fn upper_bound_dominates_and_is_tight_when_orthonormal() {
        // orthonormal tensor Gram: the bound is exactly q
        let basis = make_legendre_tensor_basis(5, 2).unwrap();
        let lf = LeverageFunction::new(&basis, &quad()).unwrap();
        for x in [[0.3, -0.8], [0.0, 0.0], [1.0, 1.0]] {
            let bound = leverage_upper_bound(&basis, &x, &quad()).unwrap();
            assert!((bound - lf.eval(&x)).abs() < 1e-9);
        }

        // 1-d Legendre m = 2: lambda_min = 1/5, at x = 1 the bound is 10
        // against q(1) = 8
        let basis = make_legendre_basis(2).unwrap();
        let bound = leverage_upper_bound(&basis, &[1.0], &quad()).unwrap();
        assert!((bound - 10.0).abs() < 1e-10, "bound {bound}, want 10");
        let q1 = leverage_function(&basis, &[1.0], &quad()).unwrap();
        assert!((q1 - 8.0).abs() < 1e-9);

        // indicator m = 2 at x = 0.1: h = (2, -1), lambda_min = 1, bound 5
        let basis = make_indicator_basis(2).unwrap();
        let bound = leverage_upper_bound(&basis, &[0.1], &quad()).unwrap();
        assert!((bound - 5.0).abs() < 1e-12);
        let q = leverage_function(&basis, &[0.1], &quad()).unwrap();
        assert!((q - 2.0).abs() < 1e-10);
        assert!(bound >= q);
    }

    #[test]
    fn upper_bound_dominates_on_a_probe_grid() {
        let basis = make_legendre_basis(3).unwrap();
        let lf = LeverageFunction::new(&basis, &quad()).unwrap();
        for i in 0..=1000 {
            let x = -1.0 + 2.0 * i as f64 / 1000.0;
            let bound = leverage_upper_bound(&basis, &[x], &quad()).unwrap();
            assert!(
                bound + 1e-10 >= lf.eval(&[x]),
                "bound {bound} below q({x}) = {}",
                lf.eval(&[x])
            );
        }
    }

    #[test]
    fn empirical_leverage_approaches_the_population_leverage() {
        let basis = make_legendre_basis(3).unwrap();
        let s = draw_samples(Domain::IntervalM1P1, 100_000, 2024).unwrap();
        let h = evaluate_basis(&basis, &s).unwrap();
        let lev = empirical_leverages(&h).unwrap();
        let lf = LeverageFunction::new(&basis, &quad()).unwrap();
        let n = s.n() as f64;
        let mut worst = 0.0f64;
        for (i, x) in s.iter().enumerate() {
            worst = worst.max((n * lev[i] - lf.eval(x)).abs());
        }
        assert!(
            worst < 0.5,
            "max |n pi_ii - q(X_i)| = {worst}, expected below 0.5 at n = 1e5"
        );
    }

    #[test]
    fn profile_flags_a_lone_point_in_its_own_stratum() {
        // 39 points spread over four cells, one alone in the fifth
        let mut values: Vec<f64> = (0..39).map(|i| 0.02 * i as f64).collect();
        values.push(0.9);
        let s = SamplePoints::from_values(Domain::UnitInterval01, values).unwrap();
        let basis = make_indicator_basis(4).unwrap();
        let p = leverage_profile(&basis, &s, &quad(), 2.0).unwrap();
        assert_eq!((p.m, p.n), (4, 40));
        assert!((p.sup_q - 4.0).abs() < 1e-12 && !p.sup_q_is_lower_bound);
        assert!((p.mean_q_quad - 4.0).abs() < 1e-8);
        let total: f64 = p.empirical_leverages.iter().sum();
        assert!((total - 4.0).abs() < 1e-9);
        assert_eq!(
            p.high_leverage_flags,
            vec![39],
            "only the isolated point should exceed 2m/n"
        );
        assert!((p.max_empirical - p.empirical_leverages[39]).abs() < 1e-15);
    }

    #[test]
    fn probed_supremum_is_close_for_a_custom_basis() {
        // custom copy of the m = 2 Legendre basis: probing must come close
        // to the analytic supremum m(m+2) = 8
        let fns: Vec<CustomBasisFn> = vec![
            Arc::new(|x: &[f64]| x[0]),
            Arc::new(|x: &[f64]| 1.5 * x[0] * x[0] - 0.5),
        ];
        let basis =
            make_custom_basis(fns, Domain::IntervalM1P1, true, vec![], &quad()).unwrap();
        let (sup, lower_bound) = sup_leverage(&basis, &quad()).unwrap();
        assert!(lower_bound, "custom suprema are probed lower bounds");
        assert!(
            sup > 7.9 && sup <= 8.0 + 1e-9,
            "probed sup {sup} should approach 8"
        );
    }
}
