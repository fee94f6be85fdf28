//! Test integrands with known means, plus helpers to build new ones.
//!
//! Every integrand carries its domain, an optional exact mean under the
//! uniform measure, and the interior breakpoints where it is not smooth, so
//! that quadrature against it can split panels there. The built-in corpus is
//! addressed by string id from the CLI and the study runners.

use std::sync::Arc;

use crate::basis::ControlBasis;
use crate::domain::Domain;
use crate::error::{CvmcError, Result};
use crate::quadrature::{quad_integrate_with_knots, QuadratureSpec};

pub type IntegrandFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A function to integrate over a fixed domain.
#[derive(Clone)]
pub struct Integrand {
    id: String,
    domain: Domain,
    f: IntegrandFn,
    true_mean: Option<f64>,
    breakpoints: Vec<f64>,
}

impl std::fmt::Debug for Integrand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Integrand({} on {})", self.id, self.domain)
    }
}

impl Integrand {
    pub fn new(
        id: impl Into<String>,
        domain: Domain,
        f: IntegrandFn,
        true_mean: Option<f64>,
        breakpoints: Vec<f64>,
    ) -> Integrand {
        Integrand {
            id: id.into(),
            domain,
            f,
            true_mean,
            breakpoints,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// Exact mean under the uniform measure, when known in closed form.
    pub fn true_mean(&self) -> Option<f64> {
        self.true_mean
    }

    /// Interior points (per axis) where the integrand is discontinuous or
    /// kinked.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// The declared mean if present, otherwise the quadrature oracle's value.
    pub fn mean_or_quad(&self, spec: &QuadratureSpec) -> Result<f64> {
        match self.true_mean {
            Some(mu) => Ok(mu),
            None => quad_integrate_with_knots(
                |x| self.eval(x),
                self.domain,
                spec,
                &self.breakpoints,
            ),
        }
    }
}

fn one_dimensional(id: &str, domain: Domain) -> Result<()> {
    if domain.dim() != 1 {
        return Err(CvmcError::InvalidSpec {
            msg: format!("integrand '{id}' is one-dimensional, domain is {domain}"),
        });
    }
    Ok(())
}

/// Look up a built-in integrand by id on the given domain.
///
/// Available ids: `const`, `linear`, `square`, `exp`, `abs_shift`
/// (|x - 1/3|), `step:u` (indicator of [u, 1]), `runge` (1/(1 + 25x^2)),
/// and `product_exp` (exp of the coordinate sum, any dimension).
pub fn integrand_by_id(id: &str, domain: Domain) -> Result<Integrand> {
    let (lo, hi) = domain.bounds();
    let width = hi - lo;
    match id {
        "const" => Ok(Integrand::new(id, domain, Arc::new(|_| 1.0), Some(1.0), vec![])),
        "linear" => {
            one_dimensional(id, domain)?;
            Ok(Integrand::new(
                id,
                domain,
                Arc::new(|x: &[f64]| x[0]),
                Some(0.5 * (lo + hi)),
                vec![],
            ))
        }
        "square" => {
            one_dimensional(id, domain)?;
            // mean of x^2: 1/3 on both [0,1] and [-1,1]
            Ok(Integrand::new(
                id,
                domain,
                Arc::new(|x: &[f64]| x[0] * x[0]),
                Some((hi * hi + hi * lo + lo * lo) / 3.0),
                vec![],
            ))
        }
        "exp" => {
            one_dimensional(id, domain)?;
            Ok(Integrand::new(
                id,
                domain,
                Arc::new(|x: &[f64]| x[0].exp()),
                Some((hi.exp() - lo.exp()) / width),
                vec![],
            ))
        }
        "abs_shift" => {
            one_dimensional(id, domain)?;
            let c = 1.0 / 3.0;
            let mean = ((hi - c).powi(2) + (c - lo).powi(2)) / (2.0 * width);
            Ok(Integrand::new(
                id,
                domain,
                Arc::new(move |x: &[f64]| (x[0] - c).abs()),
                Some(mean),
                vec![c],
            ))
        }
        "runge" => {
            one_dimensional(id, domain)?;
            // antiderivative of 1/(1+25x^2) is arctan(5x)/5
            let mean = ((5.0 * hi).atan() - (5.0 * lo).atan()) / (5.0 * width);
            Ok(Integrand::new(
                id,
                domain,
                Arc::new(|x: &[f64]| 1.0 / (1.0 + 25.0 * x[0] * x[0])),
                Some(mean),
                vec![],
            ))
        }
        "product_exp" => {
            let d = domain.dim();
            let axis_mean = (hi.exp() - lo.exp()) / width;
            Ok(Integrand::new(
                id,
                domain,
                Arc::new(|x: &[f64]| x.iter().sum::<f64>().exp()),
                Some(axis_mean.powi(d as i32)),
                vec![],
            ))
        }
        _ => {
            if let Some(u_str) = id.strip_prefix("step:") {
                one_dimensional(id, domain)?;
                let u: f64 = u_str.parse().map_err(|_| CvmcError::InvalidSpec {
                    msg: format!("cannot parse step threshold in '{id}'"),
                })?;
                if !(u > lo && u < hi) {
                    return Err(CvmcError::InvalidSpec {
                        msg: format!("step threshold {u} outside the interior of {domain}"),
                    });
                }
                return Ok(Integrand::new(
                    id,
                    domain,
                    Arc::new(move |x: &[f64]| if x[0] >= u { 1.0 } else { 0.0 }),
                    Some((hi - u) / width),
                    vec![u],
                ));
            }
            Err(CvmcError::InvalidSpec {
                msg: format!("unknown integrand id '{id}'"),
            })
        }
    }
}

/// The integrand a + sum_j b_j h_j(x); its mean is exactly `a` because every
/// basis function has mean zero.
pub fn affine_combination(a: f64, b: &[f64], basis: &ControlBasis) -> Integrand {
    assert_eq!(b.len(), basis.m(), "one coefficient per basis function");
    let basis_cl = basis.clone();
    let coeffs = b.to_vec();
    let m = basis.m();
    let breakpoints = basis.axis_knots().to_vec();
    Integrand::new(
        format!("affine(a={a}, m={m})"),
        basis.domain(),
        Arc::new(move |x: &[f64]| {
            let mut h = vec![0.0; m];
            basis_cl.eval_all(x, &mut h);
            let mut acc = a;
            for j in 0..m {
                acc += coeffs[j] * h[j];
            }
            acc
        }),
        Some(a),
        breakpoints,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::make_indicator_basis;
    use crate::quadrature::QuadratureSpec;

    #[test]
    fn corpus_means_match_quadrature() {
        let spec = QuadratureSpec::default();
        let cases = [
            ("const", Domain::UnitInterval01),
            ("linear", Domain::UnitInterval01),
            ("linear", Domain::IntervalM1P1),
            ("square", Domain::IntervalM1P1),
            ("exp", Domain::UnitInterval01),
            ("exp", Domain::IntervalM1P1),
            ("abs_shift", Domain::UnitInterval01),
            ("abs_shift", Domain::IntervalM1P1),
            ("runge", Domain::UnitInterval01),
            ("runge", Domain::IntervalM1P1),
            ("step:0.6", Domain::UnitInterval01),
            ("product_exp", Domain::UnitCube { d: 2 }),
            ("product_exp", Domain::CubeM1P1 { d: 3 }),
        ];
        for (id, domain) in cases {
            let f = integrand_by_id(id, domain).unwrap();
            let mu = f.true_mean().expect("corpus integrands declare means");
            let quad = quad_integrate_with_knots(|x| f.eval(x), domain, &spec, f.breakpoints())
                .unwrap();
            // the poles of 1/(1+25x^2) at x = i/5 sit close to [-1,1], which
            // caps a single 64-node panel near 1e-11 there; every other case
            // converges to full precision
            let tol = if id == "runge" && domain == Domain::IntervalM1P1 {
                5e-11
            } else {
                1e-12
            };
            assert!(
                (mu - quad).abs() < tol,
                "{id} on {domain}: declared {mu}, quadrature {quad}"
            );
        }
    }

    #[test]
    fn specific_known_means() {
        let e = std::f64::consts::E;
        let f = integrand_by_id("exp", Domain::UnitInterval01).unwrap();
        assert!((f.true_mean().unwrap() - (e - 1.0)).abs() < 1e-15);
        let f = integrand_by_id("exp", Domain::IntervalM1P1).unwrap();
        assert!((f.true_mean().unwrap() - 1.0f64.sinh()).abs() < 1e-15);
        let f = integrand_by_id("abs_shift", Domain::UnitInterval01).unwrap();
        assert!((f.true_mean().unwrap() - 5.0 / 18.0).abs() < 1e-15);
        let f = integrand_by_id("runge", Domain::UnitInterval01).unwrap();
        assert!((f.true_mean().unwrap() - 0.2746801533890032).abs() < 1e-15);
        let f = integrand_by_id("step:0.25", Domain::UnitInterval01).unwrap();
        assert!((f.true_mean().unwrap() - 0.75).abs() < 1e-15);
        let f = integrand_by_id("product_exp", Domain::UnitCube { d: 2 }).unwrap();
        assert!((f.true_mean().unwrap() - (e - 1.0) * (e - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn step_threshold_validation() {
        assert!(integrand_by_id("step:0.0", Domain::UnitInterval01).is_err());
        assert!(integrand_by_id("step:1.5", Domain::UnitInterval01).is_err());
        assert!(integrand_by_id("step:x", Domain::UnitInterval01).is_err());
        // -0.5 is interior on [-1, 1]
        assert!(integrand_by_id("step:-0.5", Domain::IntervalM1P1).is_ok());
    }

    #[test]
    fn unknown_ids_and_dimension_mismatches_fail() {
        assert!(integrand_by_id("cubic", Domain::UnitInterval01).is_err());
        assert!(integrand_by_id("exp", Domain::UnitCube { d: 2 }).is_err());
        assert!(integrand_by_id("const", Domain::UnitCube { d: 5 }).is_ok());
    }

    #[test]
    fn affine_combination_has_mean_a() {
        let basis = make_indicator_basis(3).unwrap();
        let f = affine_combination(2.5, &[0.3, -1.0, 0.7], &basis);
        assert_eq!(f.true_mean(), Some(2.5));
        let spec = QuadratureSpec::default();
        let quad = f.mean_or_quad(&spec).unwrap();
        assert_eq!(quad, 2.5, "declared mean short-circuits quadrature");
        let by_quad = quad_integrate_with_knots(
            |x| f.eval(x),
            f.domain(),
            &spec,
            f.breakpoints(),
        )
        .unwrap();
        assert!((by_quad - 2.5).abs() < 1e-13);
    }

    #[test]
    fn breakpoints_are_carried() {
        let f = integrand_by_id("step:0.4", Domain::UnitInterval01).unwrap();
        assert_eq!(f.breakpoints(), &[0.4]);
        let f = integrand_by_id("abs_shift", Domain::UnitInterval01).unwrap();
        assert_eq!(f.breakpoints(), &[1.0 / 3.0]);
    }
}
