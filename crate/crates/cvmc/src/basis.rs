//! Control-variate families: stratum indicators, Legendre polynomials,
//! tensor-product Legendre, and user-supplied closures.
//!
//! Every family has mean zero under the uniform measure on its domain, which
//! is what makes its members usable as control variates. Where a closed-form
//! Gram matrix P(hh') exists it is carried analytically:
//!
//! * indicators over m + 1 equal cells (last cell omitted): (m+1)I - 11',
//! * Legendre L_1..L_m on [-1, 1]: diag(1/3, 1/5, ..., 1/(2m+1)),
//! * normalized tensor products: the identity.
//!
//! Custom closures fall back to quadrature for their Gram matrix and are
//! centered by quadrature unless the caller declares them zero-mean (the
//! declaration is verified, not trusted).

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, SamplePoints};
use crate::error::{CvmcError, Result};
use crate::quadrature::{product_nodes, quad_integrate_with_knots, QuadratureSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    IndicatorStrata,
    Legendre1d,
    LegendreTensor,
    Custom,
}

pub type CustomBasisFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A family of m zero-mean basis functions tied to a specific domain.
///
/// Immutable and cheap to clone; closures are shared by reference count.
#[derive(Clone)]
pub struct ControlBasis {
    family: BasisFamily,
    domain: Domain,
    m: usize,
    /// Indicator families: cells per axis (total cells = cells_per_axis^d).
    cells_per_axis: usize,
    /// Tensor family: one degree vector per basis function.
    degree_vectors: Vec<Vec<usize>>,
    custom_fns: Vec<CustomBasisFn>,
    /// Quadrature means subtracted from custom closures to center them.
    custom_offsets: Vec<f64>,
    /// Interior knots (per axis) where basis functions are discontinuous.
    axis_knots: Vec<f64>,
}

impl std::fmt::Debug for ControlBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ControlBasis({}, m = {}, {})", self.describe(), self.m, self.domain)
    }
}

/// Same box, regardless of which enum variant spells it.
fn same_domain(a: Domain, b: Domain) -> bool {
    a.dim() == b.dim() && a.bounds() == b.bounds()
}

impl ControlBasis {
    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn degree_vectors(&self) -> &[Vec<usize>] {
        &self.degree_vectors
    }

    /// Interior knots (shared by all axes) where the basis is discontinuous;
    /// quadrature against this basis must split panels here.
    pub fn axis_knots(&self) -> &[f64] {
        &self.axis_knots
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn describe(&self) -> String {
        match self.family {
            BasisFamily::IndicatorStrata => {
                if self.domain.dim() == 1 {
                    format!("indicator(m={})", self.m)
                } else {
                    format!(
                        "indicator_grid(k={}, d={})",
                        self.cells_per_axis,
                        self.domain.dim()
                    )
                }
            }
            BasisFamily::Legendre1d => format!("legendre(m={})", self.m),
            BasisFamily::LegendreTensor => {
                format!("legendre_tensor(m={}, d={})", self.m, self.domain.dim())
            }
            BasisFamily::Custom => format!("custom(m={})", self.m),
        }
    }

    /// The basis with no functions at all; the estimator degenerates to
    /// plain Monte Carlo on it.
    pub fn empty(domain: Domain) -> ControlBasis {
        ControlBasis {
            family: BasisFamily::Custom,
            domain,
            m: 0,
            cells_per_axis: 0,
            degree_vectors: Vec::new(),
            custom_fns: Vec::new(),
            custom_offsets: Vec::new(),
            axis_knots: Vec::new(),
        }
    }

    /// Evaluate all m functions at one point into `out`.
    pub fn eval_all(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.m);
        debug_assert_eq!(x.len(), self.domain.dim());
        match self.family {
            BasisFamily::IndicatorStrata => {
                let k = self.cells_per_axis;
                let cells = self.m + 1;
                let mut flat = 0usize;
                let mut stride = 1usize;
                for &xi in x {
                    let c = ((xi * k as f64) as usize).min(k - 1);
                    flat += c * stride;
                    stride *= k;
                }
                out.fill(-1.0);
                if flat < self.m {
                    out[flat] = cells as f64 - 1.0;
                }
            }
            BasisFamily::Legendre1d => {
                legendre_from_degree_one(x[0], out);
            }
            BasisFamily::LegendreTensor => {
                let d = x.len();
                let max_deg = self
                    .degree_vectors
                    .iter()
                    .flat_map(|v| v.iter().copied())
                    .max()
                    .unwrap_or(0);
                // per-axis table of normalized values sqrt(2a+1) L_a(x_axis)
                let mut table = vec![0.0f64; d * (max_deg + 1)];
                for (ax, &xi) in x.iter().enumerate() {
                    let row = &mut table[ax * (max_deg + 1)..(ax + 1) * (max_deg + 1)];
                    legendre_normalized_all(xi, row);
                }
                for (j, degs) in self.degree_vectors.iter().enumerate() {
                    let mut v = 1.0;
                    for (ax, &a) in degs.iter().enumerate() {
                        v *= table[ax * (max_deg + 1) + a];
                    }
                    out[j] = v;
                }
            }
            BasisFamily::Custom => {
                for j in 0..self.m {
                    out[j] = (self.custom_fns[j])(x) - self.custom_offsets[j];
                }
            }
        }
    }

    /// Evaluate a single basis function (1-based index not used; j is 0-based).
    pub fn eval_one(&self, j: usize, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.m];
        self.eval_all(x, &mut buf);
        buf[j]
    }

    /// Closed-form Gram matrix, if this family has one.
    pub fn analytic_gram(&self) -> Option<DMatrix<f64>> {
        match self.family {
            BasisFamily::IndicatorStrata => {
                let cells = self.m as f64 + 1.0;
                let mut g = DMatrix::from_element(self.m, self.m, -1.0);
                for j in 0..self.m {
                    g[(j, j)] = cells - 1.0;
                }
                Some(g)
            }
            BasisFamily::Legendre1d => Some(DMatrix::from_diagonal(
                &nalgebra::DVector::from_iterator(
                    self.m,
                    (1..=self.m).map(|j| 1.0 / (2.0 * j as f64 + 1.0)),
                ),
            )),
            BasisFamily::LegendreTensor => Some(DMatrix::identity(self.m, self.m)),
            BasisFamily::Custom => None,
        }
    }

    /// Smallest eigenvalue of the population Gram, when known in closed form.
    ///
    /// Indicators: eigenvalues are 1 (on the direction of the all-ones
    /// vector) and m + 1; Legendre: 1/(2m+1); normalized tensor: 1.
    pub fn lambda_min_analytic(&self) -> Option<f64> {
        match self.family {
            BasisFamily::IndicatorStrata => Some(1.0),
            BasisFamily::Legendre1d => Some(1.0 / (2.0 * self.m as f64 + 1.0)),
            BasisFamily::LegendreTensor => Some(1.0),
            BasisFamily::Custom => None,
        }
    }
}

/// L_1(x), ..., L_m(x) by the Bonnet recurrence
/// (j+1) L_{j+1}(x) = (2j+1) x L_j(x) - j L_{j-1}(x).
fn legendre_from_degree_one(x: f64, out: &mut [f64]) {
    let m = out.len();
    if m == 0 {
        return;
    }
    let mut prev = 1.0; // L_0
    let mut cur = x; // L_1
    out[0] = cur;
    for j in 1..m {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * x * cur - jf * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
        out[j] = cur;
    }
}

/// sqrt(2a+1) L_a(x) for a = 0..out.len()-1 (degree zero included).
fn legendre_normalized_all(x: f64, out: &mut [f64]) {
    let top = out.len();
    if top == 0 {
        return;
    }
    let mut prev = 1.0;
    let mut cur = x;
    out[0] = 1.0;
    if top > 1 {
        out[1] = 3.0f64.sqrt() * x;
    }
    for a in 2..top {
        let jf = (a - 1) as f64;
        let next = ((2.0 * jf + 1.0) * x * cur - jf * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
        out[a] = (2.0 * a as f64 + 1.0).sqrt() * cur;
    }
}

/// Stratum indicators on [0, 1]: h_j = (m+1) 1{x in cell j} - 1 over m + 1
/// equal cells, with the last cell's indicator omitted.
pub fn make_indicator_basis(m: usize) -> Result<ControlBasis> {
    if m == 0 {
        return Ok(ControlBasis::empty(Domain::UnitInterval01));
    }
    make_indicator_grid_basis(m + 1, 1)
}

/// Stratum indicators over a k^d grid of equal cells on [0, 1]^d, last cell
/// omitted, giving m = k^d - 1 functions h_j = k^d 1{cell j} - 1.
///
/// With d = 1 this is exactly `make_indicator_basis(k - 1)`.
pub fn make_indicator_grid_basis(cells_per_axis: usize, d: usize) -> Result<ControlBasis> {
    if cells_per_axis < 1 || d < 1 {
        return Err(CvmcError::InvalidSpec {
            msg: format!("indicator grid needs k >= 1 and d >= 1, got k = {cells_per_axis}, d = {d}"),
        });
    }
    let cells = cells_per_axis.pow(d as u32);
    let domain = if d == 1 {
        Domain::UnitInterval01
    } else {
        Domain::UnitCube { d }
    };
    let knots: Vec<f64> = (1..cells_per_axis)
        .map(|i| i as f64 / cells_per_axis as f64)
        .collect();
    Ok(ControlBasis {
        family: BasisFamily::IndicatorStrata,
        domain,
        m: cells - 1,
        cells_per_axis,
        degree_vectors: Vec::new(),
        custom_fns: Vec::new(),
        custom_offsets: Vec::new(),
        axis_knots: knots,
    })
}

/// Legendre polynomials L_1..L_m on [-1, 1], normalized so L_j(1) = 1.
pub fn make_legendre_basis(m: usize) -> Result<ControlBasis> {
    if m == 0 {
        return Ok(ControlBasis::empty(Domain::IntervalM1P1));
    }
    Ok(ControlBasis {
        family: BasisFamily::Legendre1d,
        domain: Domain::IntervalM1P1,
        m,
        cells_per_axis: 0,
        degree_vectors: Vec::new(),
        custom_fns: Vec::new(),
        custom_offsets: Vec::new(),
        axis_knots: Vec::new(),
    })
}

/// Degree vectors in graded order: every vector with max-degree <= g is
/// listed before any vector containing a coordinate g + 1. Within one grade,
/// vectors are ordered with the first axis varying fastest, which for d = 2,
/// m = 3 yields (1,0), (0,1), (1,1). The all-zero vector is excluded.
fn degree_vectors(d: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(m);
    let mut grade = 1usize;
    while out.len() < m {
        // walk the (grade+1)^d box with axis 0 as the fastest axis, keeping
        // vectors whose maximum entry is exactly `grade`
        let mut v = vec![0usize; d];
        loop {
            if v.iter().copied().max().unwrap() == grade {
                out.push(v.clone());
                if out.len() == m {
                    return out;
                }
            }
            let mut ax = 0;
            loop {
                v[ax] += 1;
                if v[ax] <= grade {
                    break;
                }
                v[ax] = 0;
                ax += 1;
                if ax == d {
                    break;
                }
            }
            if ax == d {
                break;
            }
        }
        grade += 1;
    }
    out
}

/// Tensor products of normalized Legendre polynomials on [-1, 1]^d:
/// h_j(x) = prod_l sqrt(2 a_j(l) + 1) L_{a_j(l)}(x_l), orthonormal under the
/// uniform measure.
pub fn make_legendre_tensor_basis(m: usize, d: usize) -> Result<ControlBasis> {
    if d < 1 {
        return Err(CvmcError::InvalidSpec {
            msg: "tensor basis needs d >= 1".into(),
        });
    }
    let domain = if d == 1 {
        Domain::IntervalM1P1
    } else {
        Domain::CubeM1P1 { d }
    };
    if m == 0 {
        return Ok(ControlBasis::empty(domain));
    }
    Ok(ControlBasis {
        family: BasisFamily::LegendreTensor,
        domain,
        m,
        cells_per_axis: 0,
        degree_vectors: degree_vectors(d, m),
        custom_fns: Vec::new(),
        custom_offsets: Vec::new(),
        axis_knots: Vec::new(),
    })
}

/// Wrap user closures as a basis.
///
/// If `declared_zero_mean` is set, each closure's quadrature mean must
/// already vanish (checked to 1e-10); otherwise the means are computed once
/// and subtracted at every evaluation. `axis_knots` marks discontinuities so
/// later quadrature against the basis stays accurate.
pub fn make_custom_basis(
    fns: Vec<CustomBasisFn>,
    domain: Domain,
    declared_zero_mean: bool,
    axis_knots: Vec<f64>,
    quad: &QuadratureSpec,
) -> Result<ControlBasis> {
    let m = fns.len();
    let mut offsets = vec![0.0; m];
    for (j, f) in fns.iter().enumerate() {
        let mean = quad_integrate_with_knots(|x| f(x), domain, quad, &axis_knots)?;
        if declared_zero_mean {
            if mean.abs() > 1e-10 {
                return Err(CvmcError::InvalidSpec {
                    msg: format!(
                        "custom basis function {j} declared zero-mean but integrates to {mean:e}"
                    ),
                });
            }
        } else {
            offsets[j] = mean;
        }
    }
    Ok(ControlBasis {
        family: BasisFamily::Custom,
        domain,
        m,
        cells_per_axis: 0,
        degree_vectors: Vec::new(),
        custom_fns: fns,
        custom_offsets: offsets,
        axis_knots,
    })
}

/// The n x m matrix of basis values at the sample points, row i holding
/// h_1(X_i), ..., h_m(X_i).
#[derive(Clone, Debug)]
pub struct BasisMatrix {
    pub values: DMatrix<f64>,
}

impl BasisMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }
}

/// Evaluate the basis at every sample point.
pub fn evaluate_basis(basis: &ControlBasis, samples: &SamplePoints) -> Result<BasisMatrix> {
    if !same_domain(basis.domain(), samples.domain()) {
        return Err(CvmcError::DomainMismatch {
            msg: format!(
                "basis lives on {}, samples on {}",
                basis.domain(),
                samples.domain()
            ),
        });
    }
    let n = samples.n();
    let m = basis.m();
    let mut values = DMatrix::<f64>::zeros(n, m);
    let mut row = vec![0.0; m];
    for i in 0..n {
        basis.eval_all(samples.point(i), &mut row);
        for j in 0..m {
            values[(i, j)] = row[j];
        }
    }
    Ok(BasisMatrix { values })
}

/// Population Gram matrix P(hh'): closed form when the family has one,
/// otherwise quadrature. Errors with `RankDeficient` if the result is not
/// positive definite to working precision.
pub fn gram(basis: &ControlBasis, spec: &QuadratureSpec) -> Result<DMatrix<f64>> {
    let g = match basis.analytic_gram() {
        Some(g) => g,
        None => gram_by_quadrature(basis, spec)?,
    };
    check_positive_definite(&g)?;
    Ok(g)
}

/// Gram matrix by quadrature only, regardless of any closed form; used to
/// cross-check the analytic matrices.
pub fn gram_by_quadrature(basis: &ControlBasis, spec: &QuadratureSpec) -> Result<DMatrix<f64>> {
    let m = basis.m();
    let (points, weights, d) = product_nodes(basis.domain(), spec, basis.axis_knots())?;
    let mut g = DMatrix::<f64>::zeros(m, m);
    let mut h = vec![0.0; m];
    for (idx, w) in weights.iter().enumerate() {
        basis.eval_all(&points[idx * d..(idx + 1) * d], &mut h);
        for a in 0..m {
            for b in a..m {
                g[(a, b)] += w * h[a] * h[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    Ok(g)
}

fn check_positive_definite(g: &DMatrix<f64>) -> Result<()> {
    if g.nrows() == 0 {
        return Ok(());
    }
    let eig = g.clone().symmetric_eigen();
    let lambda_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lambda_min < 1e-10 {
        return Err(CvmcError::RankDeficient { lambda_min });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::draw_samples;
    use crate::quadrature::quad_integrate_with_knots;

    fn quad() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn indicator_values_by_hand() {
        // m = 1: two half cells, h_1 = 2 * 1{x < 1/2} - 1
        let b = make_indicator_basis(1).unwrap();
        assert_eq!(b.eval_one(0, &[0.2]), 1.0);
        assert_eq!(b.eval_one(0, &[0.7]), -1.0);

        // m = 2: three cells; a point in the omitted last cell sees all -1
        let b = make_indicator_basis(2).unwrap();
        let mut row = [0.0; 2];
        b.eval_all(&[0.9], &mut row);
        assert_eq!(row, [-1.0, -1.0]);
        b.eval_all(&[0.1], &mut row);
        assert_eq!(row, [2.0, -1.0]);
        // boundary 1/3 belongs to the second cell (half-open cells)
        b.eval_all(&[1.0 / 3.0], &mut row);
        assert_eq!(row, [-1.0, 2.0]);
    }

    #[test]
    fn indicator_gram_closed_form() {
        let b = make_indicator_basis(2).unwrap();
        let g = b.analytic_gram().unwrap();
        assert_eq!(g[(0, 0)], 2.0);
        assert_eq!(g[(0, 1)], -1.0);
        assert_eq!(g[(1, 0)], -1.0);
        assert_eq!(g[(1, 1)], 2.0);

        // inverse of (m+1)I - 11' is ((I + 11')/(m+1); check by multiplication
        let inv = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]) / 3.0;
        let prod = &g * &inv;
        assert!((&prod - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-14);
    }

    #[test]
    fn legendre_values_match_explicit_polynomials() {
        let b = make_legendre_basis(3).unwrap();
        let mut row = [0.0; 3];
        b.eval_all(&[0.5], &mut row);
        // L_1 = x, L_2 = (3x^2-1)/2, L_3 = (5x^3-3x)/2
        assert!((row[0] - 0.5).abs() < 1e-15);
        assert!((row[1] - -0.125).abs() < 1e-15);
        assert!((row[2] - -0.4375).abs() < 1e-15);

        let b5 = make_legendre_basis(5).unwrap();
        let mut row5 = [0.0; 5];
        b5.eval_all(&[1.0], &mut row5);
        for (j, v) in row5.iter().enumerate() {
            assert!((v - 1.0).abs() < 1e-14, "L_{}(1) = {v}", j + 1);
        }
        // spot values against numpy.polynomial.legendre.legval
        b5.eval_all(&[0.9], &mut row5);
        assert!((row5[4] - -0.04114125000000002).abs() < 1e-14);
        let b3 = make_legendre_basis(3).unwrap();
        let mut row3 = [0.0; 3];
        b3.eval_all(&[-0.2], &mut row3);
        assert!((row3[2] - 0.28).abs() < 1e-15);
    }

    #[test]
    fn legendre_gram_is_diagonal() {
        let b = make_legendre_basis(4).unwrap();
        let g = b.analytic_gram().unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let want = if j == k { 1.0 / (2.0 * (j + 1) as f64 + 1.0) } else { 0.0 };
                assert!((g[(j, k)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tensor_degree_vectors_for_small_cases() {
        assert_eq!(
            degree_vectors(2, 3),
            vec![vec![1, 0], vec![0, 1], vec![1, 1]]
        );
        // next grade starts only after grade 1 is exhausted
        assert_eq!(
            degree_vectors(2, 5),
            vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![2, 0], vec![2, 1]]
        );
        // d = 1 reduces to plain degrees 1, 2, 3, ...
        assert_eq!(degree_vectors(1, 3), vec![vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn tensor_basis_in_one_dimension_is_normalized_legendre() {
        let b = make_legendre_tensor_basis(2, 1).unwrap();
        let mut row = [0.0; 2];
        b.eval_all(&[0.5], &mut row);
        assert!((row[0] - 3.0f64.sqrt() * 0.5).abs() < 1e-15);
        assert!((row[1] - 5.0f64.sqrt() * -0.125).abs() < 1e-15);
        let g = gram_by_quadrature(&b, &quad()).unwrap();
        assert!((&g - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-10);
    }

    #[test]
    fn tensor_gram_is_identity_by_quadrature() {
        let b = make_legendre_tensor_basis(7, 2).unwrap();
        let g = gram_by_quadrature(&b, &quad()).unwrap();
        let err = (&g - DMatrix::<f64>::identity(7, 7)).abs().max();
        assert!(err < 1e-9, "orthonormality violated by {err}");
    }

    #[test]
    fn zero_mean_for_all_builtin_families() {
        let bases = vec![
            make_indicator_basis(5).unwrap(),
            make_legendre_basis(6).unwrap(),
            make_legendre_tensor_basis(5, 2).unwrap(),
            make_indicator_grid_basis(3, 2).unwrap(),
        ];
        for b in &bases {
            for j in 0..b.m() {
                let mean = quad_integrate_with_knots(
                    |x| b.eval_one(j, x),
                    b.domain(),
                    &quad(),
                    b.axis_knots(),
                )
                .unwrap();
                assert!(
                    mean.abs() <= 1e-10,
                    "{} function {j} has mean {mean:e}",
                    b.describe()
                );
            }
        }
    }

    #[test]
    fn analytic_and_quadrature_grams_agree() {
        for m in [1, 5, 30] {
            let b = make_indicator_basis(m).unwrap();
            let a = b.analytic_gram().unwrap();
            let q = gram_by_quadrature(&b, &quad()).unwrap();
            assert!((&a - &q).abs().max() < 1e-9, "indicator m = {m}");

            let b = make_legendre_basis(m).unwrap();
            let a = b.analytic_gram().unwrap();
            let q = gram_by_quadrature(&b, &quad()).unwrap();
            assert!((&a - &q).abs().max() < 1e-9, "legendre m = {m}");
        }
        let b = make_legendre_tensor_basis(12, 2).unwrap();
        let a = b.analytic_gram().unwrap();
        let q = gram_by_quadrature(&b, &quad()).unwrap();
        assert!((&a - &q).abs().max() < 1e-9, "tensor d = 2");
    }

    #[test]
    fn custom_basis_matches_hand_integrals() {
        // {x, x^2 - 1/3} on [-1, 1]: Gram = [[1/3, 0], [0, 4/45]]
        let fns: Vec<CustomBasisFn> = vec![
            Arc::new(|x: &[f64]| x[0]),
            Arc::new(|x: &[f64]| x[0] * x[0] - 1.0 / 3.0),
        ];
        let b = make_custom_basis(fns, Domain::IntervalM1P1, true, vec![], &quad()).unwrap();
        let g = gram(&b, &quad()).unwrap();
        assert!((g[(0, 0)] - 1.0 / 3.0).abs() < 1e-12);
        assert!(g[(0, 1)].abs() < 1e-14);
        assert!((g[(1, 1)] - 4.0 / 45.0).abs() < 1e-12);
    }

    #[test]
    fn custom_basis_is_centered_when_not_declared() {
        let fns: Vec<CustomBasisFn> = vec![Arc::new(|x: &[f64]| x[0] * x[0])];
        let b = make_custom_basis(fns, Domain::UnitInterval01, false, vec![], &quad()).unwrap();
        // x^2 has mean 1/3 on [0,1]; centered value at 0 is -1/3
        assert!((b.eval_one(0, &[0.0]) - -(1.0 / 3.0)).abs() < 1e-12);
        let mean =
            quad_integrate_with_knots(|x| b.eval_one(0, x), b.domain(), &quad(), &[]).unwrap();
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn false_zero_mean_declaration_is_rejected() {
        let fns: Vec<CustomBasisFn> = vec![Arc::new(|x: &[f64]| x[0])];
        let err = make_custom_basis(fns, Domain::UnitInterval01, true, vec![], &quad())
            .unwrap_err();
        assert!(matches!(err, CvmcError::InvalidSpec { .. }));
    }

    #[test]
    fn collinear_custom_basis_is_rank_deficient() {
        let fns: Vec<CustomBasisFn> = vec![
            Arc::new(|x: &[f64]| x[0]),
            Arc::new(|x: &[f64]| 2.0 * x[0]),
        ];
        let b = make_custom_basis(fns, Domain::IntervalM1P1, true, vec![], &quad()).unwrap();
        let err = gram(&b, &quad()).unwrap_err();
        assert!(matches!(err, CvmcError::RankDeficient { .. }));
    }

    #[test]
    fn evaluate_basis_fills_rows() {
        let b = make_legendre_basis(2).unwrap();
        let s = draw_samples(Domain::IntervalM1P1, 50, 3).unwrap();
        let h = evaluate_basis(&b, &s).unwrap();
        assert_eq!((h.n(), h.m()), (50, 2));
        for i in 0..50 {
            let x = s.point(i)[0];
            assert_eq!(h.values[(i, 0)], x);
            assert!((h.values[(i, 1)] - (1.5 * x * x - 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn evaluate_basis_rejects_domain_mismatch() {
        let b = make_legendre_basis(2).unwrap();
        let s = draw_samples(Domain::UnitInterval01, 10, 3).unwrap();
        assert!(matches!(
            evaluate_basis(&b, &s),
            Err(CvmcError::DomainMismatch { .. })
        ));
    }

    #[test]
    fn tensor_d1_accepts_interval_samples() {
        // [-1,1]^1 and [-1,1] are the same box; no rescaling is involved
        let b = make_legendre_tensor_basis(3, 1).unwrap();
        let s = draw_samples(Domain::IntervalM1P1, 10, 9).unwrap();
        assert!(evaluate_basis(&b, &s).is_ok());
    }

    #[test]
    fn empirical_gram_approaches_population_gram() {
        // (1/n) H'H at n = 1e5 should sit within 4 empirical standard errors
        // of the analytic Gram, entry by entry
        for b in [make_legendre_basis(3).unwrap(), make_indicator_basis(4).unwrap()] {
            let n = 100_000;
            let s = draw_samples(b.domain(), n, 20260823).unwrap();
            let h = evaluate_basis(&b, &s).unwrap();
            let g = b.analytic_gram().unwrap();
            for a in 0..b.m() {
                for c in a..b.m() {
                    let prods: Vec<f64> = (0..n)
                        .map(|i| h.values[(i, a)] * h.values[(i, c)])
                        .collect();
                    let emp = crate::stats::mean(&prods);
                    let se = (crate::stats::variance_n(&prods) / n as f64).sqrt();
                    assert!(
                        (emp - g[(a, c)]).abs() <= 4.0 * se,
                        "{} entry ({a},{c}): emp {emp}, analytic {}, se {se}",
                        b.describe(),
                        g[(a, c)]
                    );
                }
            }
        }
    }

    #[test]
    fn grid_indicator_reduces_to_one_dimensional_case() {
        let grid = make_indicator_grid_basis(4, 1).unwrap();
        let plain = make_indicator_basis(3).unwrap();
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        for x in [0.05, 0.3, 0.6, 0.99] {
            grid.eval_all(&[x], &mut a);
            plain.eval_all(&[x], &mut b);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn grid_indicator_gram_closed_form_in_2d() {
        // 2x2 grid: 4 cells, m = 3, Gram = 4I - 11'
        let b = make_indicator_grid_basis(2, 2).unwrap();
        assert_eq!(b.m(), 3);
        let a = b.analytic_gram().unwrap();
        let q = gram_by_quadrature(&b, &quad()).unwrap();
        assert!((&a - &q).abs().max() < 1e-9);
        assert_eq!(a[(0, 0)], 3.0);
        assert_eq!(a[(0, 1)], -1.0);
    }

    #[test]
    fn empty_basis_has_no_columns() {
        let b = ControlBasis::empty(Domain::UnitInterval01);
        let s = draw_samples(Domain::UnitInterval01, 5, 1).unwrap();
        let h = evaluate_basis(&b, &s).unwrap();
        assert_eq!((h.n(), h.m()), (5, 0));
    }
}
