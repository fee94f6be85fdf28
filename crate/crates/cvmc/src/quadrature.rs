//! Deterministic quadrature used as the ground-truth oracle.
//!
//! Every quantity the estimators are later tested against (true means,
//! optimal coefficients, residual variances, leverage averages) comes from
//! Gauss-Legendre rules evaluated here. Because the integration measure is
//! the uniform probability measure, `quad_integrate` returns the mean of the
//! integrand over the domain, not the raw integral.
//!
//! Three rules are offered:
//! * `GaussLegendre`: a single k-node rule on a 1-d domain,
//! * `TensorGaussLegendre`: the k^d product rule on cubes up to d = 3,
//! * `AdaptivePanel`: 1-d panel bisection until the two-panel refinement of
//!   each panel changes by less than the requested absolute tolerance.
//!
//! Piecewise integrands (step functions, stratum indicators, kinks) are
//! handled by passing interior knots; each axis is then integrated as a
//! composite rule with panel boundaries at the knots, which restores full
//! Gauss-Legendre accuracy on every smooth piece.

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{CvmcError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadRule {
    GaussLegendre,
    TensorGaussLegendre,
    AdaptivePanel,
}

/// How to integrate: which rule, how many nodes per axis, and (for the
/// adaptive rule) the target absolute tolerance on the raw integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rule: QuadRule,
    pub nodes_per_axis: usize,
    pub abs_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rule: QuadRule::TensorGaussLegendre,
            nodes_per_axis: 64,
            abs_tol: 1e-12,
        }
    }
}

impl QuadratureSpec {
    fn validate(&self) -> Result<()> {
        if self.nodes_per_axis < 2 {
            return Err(CvmcError::InvalidSpec {
                msg: format!("nodes_per_axis must be >= 2, got {}", self.nodes_per_axis),
            });
        }
        if !(self.abs_tol > 0.0) {
            return Err(CvmcError::InvalidSpec {
                msg: format!("abs_tol must be positive, got {}", self.abs_tol),
            });
        }
        Ok(())
    }
}

/// Value and derivative of the degree-k Legendre polynomial at x, via the
/// three-term recurrence. Only valid for |x| < 1 (the derivative formula
/// divides by x^2 - 1), which holds at every Gauss-Legendre node.
fn legendre_value_derivative(k: usize, x: f64) -> (f64, f64) {
    debug_assert!(k >= 1);
    let mut p_prev = 1.0;
    let mut p = x;
    for j in 1..k {
        let jf = j as f64;
        let p_next = ((2.0 * jf + 1.0) * x * p - jf * p_prev) / (jf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let dp = k as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Nodes and weights of the k-point Gauss-Legendre rule on [-1, 1].
///
/// Nodes are the roots of the degree-k Legendre polynomial, found by Newton
/// iteration from the Chebyshev-like initial guess cos(pi (i + 3/4)/(k + 1/2)).
/// The rule integrates polynomials up to degree 2k - 1 exactly; weights sum
/// to 2. Nodes are returned in ascending order and are exactly symmetric
/// about 0 because each root is computed once and mirrored.
pub fn gauss_legendre_nodes(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1, "need at least one node");
    let mut x = vec![0.0; k];
    let mut w = vec![0.0; k];
    let half = (k + 1) / 2;
    for i in 0..half {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        if k % 2 == 1 && i == half - 1 {
            z = 0.0; // middle root of an odd-degree rule is exactly zero
        }
        for _ in 0..100 {
            let (p, dp) = legendre_value_derivative(k, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_value_derivative(k, z);
        // (1 - z)(1 + z) instead of 1 - z^2: the subtraction is then exact
        // for z >= 1/2, so the only error left in the weight comes from the
        // recurrence for the derivative (a few hundred ulps at k = 64)
        let weight = 2.0 / ((1.0 - z) * (1.0 + z) * dp * dp);
        // z sits in [0, 1); store the mirrored pair (for odd k the middle
        // assignment happens twice and lands on +0.0)
        x[i] = -z;
        x[k - 1 - i] = z;
        w[i] = weight;
        w[k - 1 - i] = weight;
    }
    (x, w)
}

/// Points and probability weights of a composite Gauss-Legendre rule on one
/// axis [lo, hi], split at the given interior knots. Weights are normalized
/// by the axis length, so they sum to 1 and the rule computes means directly.
fn axis_rule(lo: f64, hi: f64, knots: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_legendre_nodes(k);
    let mut edges: Vec<f64> = vec![lo];
    let mut interior: Vec<f64> = knots
        .iter()
        .copied()
        .filter(|&v| v > lo && v < hi)
        .collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    edges.extend(interior);
    edges.push(hi);

    let axis_len = hi - lo;
    let mut points = Vec::with_capacity(k * (edges.len() - 1));
    let mut weights = Vec::with_capacity(k * (edges.len() - 1));
    for seg in edges.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let center = 0.5 * (a + b);
        let scale = 0.5 * (b - a);
        for i in 0..k {
            points.push(center + scale * t[i]);
            // raw weights sum to 2 per segment; (b - a)/2 maps to segment
            // length, and dividing by the axis length makes them a mean rule
            weights.push(w[i] * scale / axis_len);
        }
    }
    (points, weights)
}

fn check_finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CvmcError::NonFinite {
            context: "quadrature node evaluation".into(),
        })
    }
}

/// Mean of f over a product domain using per-axis composite rules.
fn product_mean<F: Fn(&[f64]) -> f64>(f: &F, axes: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let d = axes.len();
    let total: usize = axes.iter().map(|(p, _)| p.len()).product();
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0f64; d];
    let mut acc = 0.0;
    for _ in 0..total {
        let mut weight = 1.0;
        for ax in 0..d {
            point[ax] = axes[ax].0[idx[ax]];
            weight *= axes[ax].1[idx[ax]];
        }
        acc += weight * check_finite(f(&point))?;
        for ax in 0..d {
            idx[ax] += 1;
            if idx[ax] < axes[ax].0.len() {
                break;
            }
            idx[ax] = 0;
        }
    }
    Ok(acc)
}

/// Flattened product-rule nodes and probability weights for a domain, with
/// axes split at the interior `knots`. Returns (points row-major, weights,
/// dimension); weights sum to 1. Used wherever a whole family of functions
/// must be integrated over the same nodes (Gram matrices, leverage means).
pub(crate) fn product_nodes(
    domain: Domain,
    spec: &QuadratureSpec,
    knots: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    spec.validate()?;
    let d = domain.dim();
    if d > 3 {
        return Err(CvmcError::InvalidSpec {
            msg: format!("product rule supports d <= 3, domain has d = {d}"),
        });
    }
    let (lo, hi) = domain.bounds();
    let axis = axis_rule(lo, hi, knots, spec.nodes_per_axis);
    let per_axis = axis.0.len();
    let total = per_axis.pow(d as u32);
    let mut points = Vec::with_capacity(total * d);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let mut w = 1.0;
        for ax in 0..d {
            points.push(axis.0[idx[ax]]);
            w *= axis.1[idx[ax]];
        }
        weights.push(w);
        for ax in 0..d {
            idx[ax] += 1;
            if idx[ax] < per_axis {
                break;
            }
            idx[ax] = 0;
        }
    }
    Ok((points, weights, d))
}

/// Raw integral of f over [a, b] with a k-node Gauss-Legendre rule.
fn panel_integral<F: Fn(&[f64]) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    t: &[f64],
    w: &[f64],
) -> Result<f64> {
    let center = 0.5 * (a + b);
    let scale = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..t.len() {
        acc += w[i] * check_finite(f(&[center + scale * t[i]]))?;
    }
    Ok(acc * scale)
}

fn adaptive_panel<F: Fn(&[f64]) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    t: &[f64],
    w: &[f64],
) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let left = panel_integral(f, a, mid, t, w)?;
    let right = panel_integral(f, mid, b, t, w)?;
    let refined = left + right;
    if (refined - whole).abs() <= tol || depth >= 48 || (b - a) < 1e-14 {
        return Ok(refined);
    }
    let half_tol = 0.5 * tol;
    Ok(adaptive_panel(f, a, mid, left, half_tol, depth + 1, t, w)?
        + adaptive_panel(f, mid, b, right, half_tol, depth + 1, t, w)?)
}

/// Mean of f over the domain (integral divided by volume).
pub fn quad_integrate<F: Fn(&[f64]) -> f64>(
    f: F,
    domain: Domain,
    spec: &QuadratureSpec,
) -> Result<f64> {
    quad_integrate_with_knots(f, domain, spec, &[])
}

/// Mean of f over the domain, with each axis split at the interior `knots`.
///
/// Knots are where the integrand (or a basis function multiplying it) is
/// allowed to be non-smooth; every panel between consecutive knots is then
/// integrated at full Gauss-Legendre accuracy.
pub fn quad_integrate_with_knots<F: Fn(&[f64]) -> f64>(
    f: F,
    domain: Domain,
    spec: &QuadratureSpec,
    knots: &[f64],
) -> Result<f64> {
    spec.validate()?;
    let d = domain.dim();
    let (lo, hi) = domain.bounds();
    match spec.rule {
        QuadRule::GaussLegendre => {
            if d != 1 {
                return Err(CvmcError::InvalidSpec {
                    msg: format!("gauss_legendre rule is 1-d only, domain has d = {d}"),
                });
            }
            let axis = axis_rule(lo, hi, knots, spec.nodes_per_axis);
            product_mean(&f, &[axis])
        }
        QuadRule::TensorGaussLegendre => {
            if d > 3 {
                return Err(CvmcError::InvalidSpec {
                    msg: format!("tensor rule supports d <= 3, domain has d = {d}"),
                });
            }
            let axis = axis_rule(lo, hi, knots, spec.nodes_per_axis);
            let axes: Vec<_> = (0..d).map(|_| axis.clone()).collect();
            product_mean(&f, &axes)
        }
        QuadRule::AdaptivePanel => {
            if d != 1 {
                return Err(CvmcError::InvalidSpec {
                    msg: format!("adaptive_panel rule is 1-d only, domain has d = {d}"),
                });
            }
            let (t, w) = gauss_legendre_nodes(spec.nodes_per_axis);
            let mut edges: Vec<f64> = vec![lo];
            let mut interior: Vec<f64> = knots
                .iter()
                .copied()
                .filter(|&v| v > lo && v < hi)
                .collect();
            interior.sort_by(f64::total_cmp);
            interior.dedup();
            edges.extend(interior);
            edges.push(hi);
            let seg_tol = spec.abs_tol / (edges.len() - 1) as f64;
            let mut acc = 0.0;
            for seg in edges.windows(2) {
                let whole = panel_integral(&f, seg[0], seg[1], &t, &w)?;
                acc += adaptive_panel(&f, seg[0], seg[1], whole, seg_tol, 0, &t, &w)?;
            }
            Ok(acc / (hi - lo))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_1d() -> QuadratureSpec {
        QuadratureSpec {
            rule: QuadRule::GaussLegendre,
            ..QuadratureSpec::default()
        }
    }

    #[test]
    fn eight_point_rule_matches_published_values() {
        // reference nodes/weights computed independently with
        // numpy.polynomial.legendre.leggauss(8)
        let expect_x = [
            -0.9602898564975362,
            -0.7966664774136267,
            -0.525532409916329,
            -0.18343464249564978,
            0.18343464249564978,
            0.525532409916329,
            0.7966664774136267,
            0.9602898564975362,
        ];
        let expect_w = [
            0.10122853629037669,
            0.22238103445337434,
            0.31370664587788705,
            0.36268378337836177,
            0.36268378337836177,
            0.31370664587788705,
            0.22238103445337434,
            0.10122853629037669,
        ];
        let (x, w) = gauss_legendre_nodes(8);
        for i in 0..8 {
            assert!(
                (x[i] - expect_x[i]).abs() < 1e-14,
                "node {i}: {} vs {}",
                x[i],
                expect_x[i]
            );
            assert!(
                (w[i] - expect_w[i]).abs() < 1e-14,
                "weight {i}: {} vs {}",
                w[i],
                expect_w[i]
            );
        }
    }

    #[test]
    fn sixty_four_point_rule_spot_checks() {
        // reference values from mpmath at 40 digits (numpy's leggauss is
        // itself only ~1e-15 accurate on the endpoint weight)
        let (x, w) = gauss_legendre_nodes(64);
        assert!((x[0] - -0.99930504173577213946).abs() < 1e-15);
        assert!((w[0] - 0.0017832807216964329473).abs() < 1e-14);
        assert!((x[31] - -0.024350292663424432509).abs() < 1e-15);
        assert!((w[31] - 0.048690957009139720383).abs() < 1e-15);
        assert!((x[63] - 0.99930504173577213946).abs() < 1e-15);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-13, "weights sum to {total}");
    }

    #[test]
    fn weights_are_symmetric_and_positive() {
        for k in [2, 3, 7, 16, 65] {
            let (x, w) = gauss_legendre_nodes(k);
            for i in 0..k {
                assert!(w[i] > 0.0);
                assert_eq!(x[i], -x[k - 1 - i], "nodes must mirror exactly (k = {k})");
                assert_eq!(w[i], w[k - 1 - i]);
            }
        }
    }

    #[test]
    fn polynomial_exactness_up_to_degree_2k_minus_1() {
        // mean of x^p over [-1, 1] is 0 for odd p and 1/(p + 1) for even p
        for k in [2usize, 5, 8, 20] {
            let spec = QuadratureSpec {
                rule: QuadRule::GaussLegendre,
                nodes_per_axis: k,
                abs_tol: 1e-12,
            };
            for p in 0..=(2 * k - 1) {
                let got = quad_integrate(|x| x[0].powi(p as i32), Domain::IntervalM1P1, &spec)
                    .unwrap();
                let want = if p % 2 == 1 { 0.0 } else { 1.0 / (p as f64 + 1.0) };
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "k = {k}, degree {p}: got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn odd_integrand_on_symmetric_interval_is_zero() {
        let got = quad_integrate(|x| x[0], Domain::IntervalM1P1, &spec_1d()).unwrap();
        assert!(got.abs() < 1e-15, "mean of x over [-1,1] came out {got}");
    }

    #[test]
    fn exp_mean_on_unit_interval() {
        let got = quad_integrate(|x| x[0].exp(), Domain::UnitInterval01, &spec_1d()).unwrap();
        let want = std::f64::consts::E - 1.0;
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn tensor_rule_on_square_and_cube() {
        let spec = QuadratureSpec::default();
        let got2 = quad_integrate(
            |x| (x[0] + x[1]).exp(),
            Domain::UnitCube { d: 2 },
            &spec,
        )
        .unwrap();
        let e1 = std::f64::consts::E - 1.0;
        assert!((got2 - e1 * e1).abs() < 1e-12);

        let got3 =
            quad_integrate(|x| x[0] * x[1] * x[2], Domain::CubeM1P1 { d: 3 }, &spec).unwrap();
        assert!(got3.abs() < 1e-14, "odd product should vanish, got {got3}");
    }

    #[test]
    fn knots_recover_full_accuracy_on_a_step() {
        let u = 0.37;
        let spec = spec_1d();
        let got = quad_integrate_with_knots(
            |x| if x[0] >= u { 1.0 } else { 0.0 },
            Domain::UnitInterval01,
            &spec,
            &[u],
        )
        .unwrap();
        assert!((got - (1.0 - u)).abs() < 1e-14, "step mean {got}");
    }

    #[test]
    fn knots_handle_a_kink_exactly() {
        let got = quad_integrate_with_knots(
            |x| (x[0] - 1.0 / 3.0).abs(),
            Domain::UnitInterval01,
            &spec_1d(),
            &[1.0 / 3.0],
        )
        .unwrap();
        assert!((got - 5.0 / 18.0).abs() < 1e-15, "kink mean {got}");
    }

    #[test]
    fn adaptive_rule_resolves_a_kink_without_knots() {
        let spec = QuadratureSpec {
            rule: QuadRule::AdaptivePanel,
            nodes_per_axis: 16,
            abs_tol: 1e-12,
        };
        let got = quad_integrate(|x| (x[0] - 1.0 / 3.0).abs(), Domain::UnitInterval01, &spec)
            .unwrap();
        assert!((got - 5.0 / 18.0).abs() < 1e-11, "adaptive kink mean {got}");
    }

    #[test]
    fn adaptive_rule_on_runge() {
        let spec = QuadratureSpec {
            rule: QuadRule::AdaptivePanel,
            nodes_per_axis: 32,
            abs_tol: 1e-13,
        };
        let got =
            quad_integrate(|x| 1.0 / (1.0 + 25.0 * x[0] * x[0]), Domain::UnitInterval01, &spec)
                .unwrap();
        // (1/5) arctan(5), computed independently
        let want = 0.2746801533890032;
        assert!((got - want).abs() < 1e-12, "runge mean {got}");
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = quad_integrate(|_| f64::NAN, Domain::UnitInterval01, &spec_1d()).unwrap_err();
        assert!(matches!(err, CvmcError::NonFinite { .. }));
    }

    #[test]
    fn bad_specs_are_rejected() {
        let err = quad_integrate(
            |x| x[0],
            Domain::UnitInterval01,
            &QuadratureSpec {
                nodes_per_axis: 1,
                ..QuadratureSpec::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, CvmcError::InvalidSpec { .. }));

        let err = quad_integrate(
            |x| x[0],
            Domain::UnitCube { d: 4 },
            &QuadratureSpec::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CvmcError::InvalidSpec { .. }));
    }
}
