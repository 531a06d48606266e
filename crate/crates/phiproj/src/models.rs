//! Parametric model sets `M = S(Theta)`.
//!
//! A model is a bounded parameter polytope `Theta = {theta : L theta <= u}`
//! in `R^k` together with an injective twice-differentiable map `S` into
//! `[0,1]^m` that sends the interior of `Theta` into `(0,1)^m`. Affine models
//! store `(A, gamma)` with `S(theta) = A theta + gamma` exactly; their second
//! derivative stack is identically zero.
//!
//! Constructors cover the binomial family, moment-constrained probability
//! vectors (via a Vandermonde system), Frechet classes of bivariate
//! probability arrays, sets defined by linear equalities (via an orthonormal
//! kernel basis), and explicit affine data.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

type VectorMap = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type MatrixMap = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
use crate::measures::ProbabilityVector;
use crate::projection::find_interior_point;

/// Hard ceiling on the Vandermonde condition estimate.
pub const VANDERMONDE_CONDITION_LIMIT: f64 = 1e12;

/// Relative cutoff under which singular values are treated as zero.
pub const KERNEL_SINGULAR_VALUE_CUTOFF: f64 = 1e-10;

/// Residual tolerance for affine membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// A system of linear inequalities `coeffs * theta <= bounds`.
#[derive(Clone, Debug)]
pub struct LinearInequalities {
    coeffs: DMatrix<f64>,
    bounds: DVector<f64>,
}

impl LinearInequalities {
    pub fn new(coeffs: DMatrix<f64>, bounds: DVector<f64>) -> Result<Self> {
        if coeffs.nrows() != bounds.len() {
            return Err(Error::DimensionMismatch {
                expected: coeffs.nrows(),
                actual: bounds.len(),
            });
        }
        Ok(Self { coeffs, bounds })
    }

    /// The system `0 <= A theta + gamma <= 1`, row pair per component.
    fn box_image(a: &DMatrix<f64>, gamma: &DVector<f64>) -> Self {
        let m = a.nrows();
        let k = a.ncols();
        let mut coeffs = DMatrix::zeros(2 * m, k);
        let mut bounds = DVector::zeros(2 * m);
        for i in 0..m {
            for j in 0..k {
                coeffs[(i, j)] = -a[(i, j)];
                coeffs[(m + i, j)] = a[(i, j)];
            }
            bounds[i] = gamma[i];
            bounds[m + i] = 1.0 - gamma[i];
        }
        Self { coeffs, bounds }
    }

    fn stacked(mut self, extra: &LinearInequalities) -> Result<Self> {
        if extra.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: extra.dim(),
            });
        }
        let rows = self.coeffs.nrows() + extra.coeffs.nrows();
        let mut coeffs = DMatrix::zeros(rows, self.dim());
        let mut bounds = DVector::zeros(rows);
        coeffs.rows_mut(0, self.coeffs.nrows()).copy_from(&self.coeffs);
        coeffs
            .rows_mut(self.coeffs.nrows(), extra.coeffs.nrows())
            .copy_from(&extra.coeffs);
        bounds.rows_mut(0, self.bounds.len()).copy_from(&self.bounds);
        bounds
            .rows_mut(self.bounds.len(), extra.bounds.len())
            .copy_from(&extra.bounds);
        self.coeffs = coeffs;
        self.bounds = bounds;
        Ok(self)
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn bounds(&self) -> &DVector<f64> {
        &self.bounds
    }

    /// Number of inequality rows.
    pub fn len(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameter dimension.
    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    /// `bounds - coeffs * theta`; nonnegative iff `theta` is feasible.
    pub fn slacks(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.bounds - &self.coeffs * theta
    }

    pub fn min_slack(&self, theta: &DVector<f64>) -> f64 {
        self.slacks(theta).min()
    }

    pub fn is_strictly_feasible(&self, theta: &DVector<f64>, margin: f64) -> bool {
        self.min_slack(theta) > margin
    }
}

enum ModelMap {
    Affine {
        matrix: DMatrix<f64>,
        offset: DVector<f64>,
    },
    General {
        eval: VectorMap,
        jacobian: MatrixMap,
        // Stack of second derivatives: Jacobian of the column-major
        // vectorization of the model Jacobian, an (m k) x k matrix.
        second_jacobian: MatrixMap,
    },
}

pub struct ParametricModel {
    name: String,
    k: usize,
    m: usize,
    map: ModelMap,
    constraints: LinearInequalities,
    interior_point: DVector<f64>,
}

impl std::fmt::Debug for ParametricModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParametricModel")
            .field("name", &self.name)
            .field("k", &self.k)
            .field("m", &self.m)
            .field("is_affine", &self.is_affine())
            .finish()
    }
}

impl ParametricModel {
    /// Binomial family on `m` cells: `S_i(theta)` is the probability of
    /// `i - 1` successes in `m - 1` trials with success probability `theta`,
    /// `Theta = [0, 1]`.
    pub fn binomial(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "binomial model requires m >= 2 cells, got {m}"
            )));
        }
        let trials = m - 1;
        let eval = move |theta: &DVector<f64>| DVector::from_vec(binomial_pmf(trials, theta[0]));
        let jacobian = move |theta: &DVector<f64>| {
            DMatrix::from_vec(m, 1, binomial_pmf_derivative(trials, theta[0]))
        };
        let second_jacobian = move |theta: &DVector<f64>| {
            DMatrix::from_vec(m, 1, binomial_pmf_second_derivative(trials, theta[0]))
        };
        let constraints = LinearInequalities::new(
            DMatrix::from_vec(2, 1, vec![1.0, -1.0]),
            DVector::from_vec(vec![1.0, 0.0]),
        )?;
        let model = Self {
            name: "binomial".into(),
            k: 1,
            m,
            map: ModelMap::General {
                eval: Box::new(eval),
                jacobian: Box::new(jacobian),
                second_jacobian: Box::new(second_jacobian),
            },
            constraints,
            interior_point: DVector::from_element(1, 0.5),
        };
        model.validated()
    }

    /// Probability vectors on distinct support points `x` with raw moments
    /// of order `1..=r` fixed to `mu[1..]` (`mu[0]` must be 1, the total
    /// mass). Parameters are the free raw moments of order `r+1..=m-1`.
    pub fn moments(x_points: &[f64], mu: &[f64]) -> Result<Self> {
        let m = x_points.len();
        if mu.is_empty() || (mu[0] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(
                "moment vector must start with mu_0 = 1".into(),
            ));
        }
        let r = mu.len() - 1;
        if r < 1 || r >= m.saturating_sub(1) {
            return Err(Error::InvalidArgument(format!(
                "moment model requires 1 <= r < m - 1, got r = {r}, m = {m}"
            )));
        }
        for i in 0..m {
            for j in (i + 1)..m {
                if x_points[i] == x_points[j] {
                    return Err(Error::DuplicateSupportPoint { i, j });
                }
            }
        }
        let k = m - r - 1;
        // Vandermonde rows are increasing powers of the support points.
        let vandermonde = DMatrix::from_fn(m, m, |i, j| x_points[j].powi(i as i32));
        let svd = vandermonde.clone().svd(false, false);
        let sigma_max = svd.singular_values.max();
        let sigma_min = svd.singular_values.min();
        let condition = sigma_max / sigma_min;
        if !condition.is_finite() || condition > VANDERMONDE_CONDITION_LIMIT {
            return Err(Error::IllConditioned(condition));
        }
        // Columns of the inverse via one LU factorization, never an explicit
        // inverse formula.
        let lu = vandermonde.lu();
        let mut inverse_columns = Vec::with_capacity(m);
        for j in 0..m {
            let mut e = DVector::zeros(m);
            e[j] = 1.0;
            let col = lu.solve(&e).ok_or(Error::IllConditioned(condition))?;
            inverse_columns.push(col);
        }
        let mut gamma = DVector::zeros(m);
        for (j, col) in inverse_columns.iter().take(r + 1).enumerate() {
            gamma += col * mu[j];
        }
        let mut a = DMatrix::zeros(m, k);
        for j in 0..k {
            a.set_column(j, &inverse_columns[r + 1 + j]);
        }
        let constraints = LinearInequalities::box_image(&a, &gamma);
        let interior = interior_from_center_or_phase1(&a, &gamma, &constraints)?;
        Self::assemble_affine("moment", a, gamma, constraints, interior)
    }

    /// The Frechet class of `r x s` bivariate probability arrays with row
    /// margins `a` and column margins `b`, vectorized column-major. The free
    /// parameters are the upper-left `(r-1) x (s-1)` block.
    pub fn frechet(spec: &FrechetSpec) -> Result<Self> {
        let r = spec.rows();
        let s = spec.cols();
        let a_margin = spec.row_margins().entries();
        let b_margin = spec.col_margins().entries();
        let m = r * s;
        let k = (r - 1) * (s - 1);
        let mut a = DMatrix::zeros(m, k);
        for i in 0..(r - 1) {
            for j in 0..(s - 1) {
                let col = i + j * (r - 1);
                a[(i + j * r, col)] = 1.0; // the block cell itself
                a[((r - 1) + j * r, col)] = -1.0; // column margin row
                a[(i + (s - 1) * r, col)] = -1.0; // row margin column
                a[((r - 1) + (s - 1) * r, col)] = 1.0; // lower-right corner
            }
        }
        let mut gamma = DVector::zeros(m);
        for j in 0..(s - 1) {
            gamma[(r - 1) + j * r] = b_margin[j];
        }
        for i in 0..(r - 1) {
            gamma[i + (s - 1) * r] = a_margin[i];
        }
        gamma[m - 1] = a_margin[r - 1] + b_margin[s - 1] - 1.0;
        let constraints = LinearInequalities::box_image(&a, &gamma);
        // The independence array a b^T is strictly interior.
        let mut interior = DVector::zeros(k);
        for i in 0..(r - 1) {
            for j in 0..(s - 1) {
                interior[i + j * (r - 1)] = a_margin[i] * b_margin[j];
            }
        }
        Self::assemble_affine("frechet", a, gamma, constraints, interior)
    }

    /// The set `{s in [0,1]^m : B s = alpha}` parametrized around the
    /// strictly interior member `s0` by an orthonormal basis of `ker(B)`.
    ///
    /// Any orthonormal kernel basis is a valid parametrization; reported
    /// parameter values are basis-dependent for this constructor.
    pub fn from_linear_equalities(
        b: &DMatrix<f64>,
        alpha: &DVector<f64>,
        s0: &DVector<f64>,
    ) -> Result<Self> {
        let m = b.ncols();
        if alpha.len() != b.nrows() {
            return Err(Error::DimensionMismatch {
                expected: b.nrows(),
                actual: alpha.len(),
            });
        }
        if s0.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: s0.len(),
            });
        }
        if let Some(i) = (0..m).find(|&i| !(s0[i] > 0.0 && s0[i] < 1.0)) {
            return Err(Error::InfeasibleBasePoint(format!(
                "s0[{i}] = {} is not strictly inside (0, 1)",
                s0[i]
            )));
        }
        let residual = (b * s0 - alpha).amax();
        if residual > 1e-10 {
            return Err(Error::InfeasibleBasePoint(format!(
                "B s0 differs from alpha by {residual:.3e}"
            )));
        }
        let a = orthonormal_kernel_basis(b)?;
        let gamma = s0.clone();
        let constraints = LinearInequalities::box_image(&a, &gamma);
        let interior = DVector::zeros(a.ncols());
        Self::assemble_affine("linear_equalities", a, gamma, constraints, interior)
    }

    /// A model from explicit map closures. `second_jacobian` must return the
    /// `(m k) x k` Jacobian of the column-major vectorization of the model
    /// Jacobian. The interior point must be strictly feasible with a
    /// strictly interior image.
    #[allow(clippy::too_many_arguments)]
    pub fn general(
        name: &str,
        m: usize,
        k: usize,
        eval: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        second_jacobian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        constraints: LinearInequalities,
        interior_point: DVector<f64>,
    ) -> Result<Self> {
        let model = Self {
            name: name.into(),
            k,
            m,
            map: ModelMap::General {
                eval: Box::new(eval),
                jacobian: Box::new(jacobian),
                second_jacobian: Box::new(second_jacobian),
            },
            constraints,
            interior_point,
        };
        model.validated()
    }

    /// Explicit affine model `S(theta) = A theta + gamma` with
    /// `Theta = {theta : 0 <= S(theta) <= 1}`, optionally intersected with
    /// extra linear inequalities.
    pub fn affine(
        a: DMatrix<f64>,
        gamma: DVector<f64>,
        extra_constraints: Option<LinearInequalities>,
        interior_hint: Option<DVector<f64>>,
    ) -> Result<Self> {
        if gamma.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                actual: gamma.len(),
            });
        }
        let mut constraints = LinearInequalities::box_image(&a, &gamma);
        if let Some(extra) = extra_constraints {
            constraints = constraints.stacked(&extra)?;
        }
        let interior = match interior_hint {
            Some(theta) if constraints.is_strictly_feasible(&theta, 1e-12) => theta,
            Some(theta) => {
                return Err(Error::InfeasibleBasePoint(format!(
                    "interior hint has slack {:.3e}",
                    constraints.min_slack(&theta)
                )))
            }
            None => interior_from_center_or_phase1(&a, &gamma, &constraints)?,
        };
        Self::assemble_affine("affine", a, gamma, constraints, interior)
    }

    fn assemble_affine(
        name: &str,
        a: DMatrix<f64>,
        gamma: DVector<f64>,
        constraints: LinearInequalities,
        interior_point: DVector<f64>,
    ) -> Result<Self> {
        let model = Self {
            name: name.into(),
            k: a.ncols(),
            m: a.nrows(),
            map: ModelMap::Affine { matrix: a, offset: gamma },
            constraints,
            interior_point,
        };
        model.validated()
    }

    /// Construction-time checks: the interior point is strictly feasible and
    /// maps into `(0,1)^m`, and the map Jacobian there has full column rank.
    fn validated(self) -> Result<Self> {
        if self.constraints.dim() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                actual: self.constraints.dim(),
            });
        }
        if !self
            .constraints
            .is_strictly_feasible(&self.interior_point, 0.0)
        {
            return Err(Error::InfeasibleModel(format!(
                "interior point has slack {:.3e}",
                self.constraints.min_slack(&self.interior_point)
            )));
        }
        let s = self.eval(&self.interior_point);
        if let Some(i) = (0..self.m).find(|&i| !(s[i] > 0.0 && s[i] < 1.0)) {
            return Err(Error::InfeasibleModel(format!(
                "model image component {i} is {} at the interior point",
                s[i]
            )));
        }
        let jac = self.jacobian(&self.interior_point);
        let svd = jac.svd(false, false);
        let sigma_min = svd.singular_values.min();
        if sigma_min.is_nan() || sigma_min <= 1e-10 {
            return Err(Error::RankDeficient(sigma_min));
        }
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Parameter dimension.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Ambient dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_affine(&self) -> bool {
        matches!(self.map, ModelMap::Affine { .. })
    }

    /// `(A, gamma)` for affine models.
    pub fn affine_data(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        match &self.map {
            ModelMap::Affine { matrix, offset } => Some((matrix, offset)),
            ModelMap::General { .. } => None,
        }
    }

    pub fn constraints(&self) -> &LinearInequalities {
        &self.constraints
    }

    /// A certified strictly feasible parameter with interior image.
    pub fn interior_point(&self) -> &DVector<f64> {
        &self.interior_point
    }

    pub fn eval(&self, theta: &DVector<f64>) -> DVector<f64> {
        match &self.map {
            ModelMap::Affine { matrix, offset } => matrix * theta + offset,
            ModelMap::General { eval, .. } => eval(theta),
        }
    }

    /// The `m x k` Jacobian of the model map.
    pub fn jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        match &self.map {
            ModelMap::Affine { matrix, .. } => matrix.clone(),
            ModelMap::General { jacobian, .. } => jacobian(theta),
        }
    }

    /// The `(m k) x k` second-derivative stack: the Jacobian of the
    /// column-major vectorization of [`ParametricModel::jacobian`]. Exactly
    /// zero for affine models.
    pub fn second_jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        match &self.map {
            ModelMap::Affine { .. } => DMatrix::zeros(self.m * self.k, self.k),
            ModelMap::General { second_jacobian, .. } => second_jacobian(theta),
        }
    }

    /// Left inverse of an affine model map: recovers `theta` from a member
    /// `s` of the model set via the normal equations.
    pub fn affine_inverse(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        let (a, gamma) = self.affine_data().ok_or(Error::NotAffine)?;
        if s.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                actual: s.len(),
            });
        }
        let diff = s - gamma;
        // Least squares through the SVD: the normal equations square the
        // condition number, which already costs digits on Vandermonde-
        // derived maps.
        let svd = a.clone().svd(true, true);
        let theta = svd
            .solve(&diff, 0.0)
            .map_err(|_| Error::RankDeficient(0.0))?;
        let residual = (a * &theta - diff).amax();
        if residual > MEMBERSHIP_TOL {
            return Err(Error::NotInModel {
                residual,
                tolerance: MEMBERSHIP_TOL,
            });
        }
        Ok(theta)
    }
}

/// Margins of a Frechet class: strictly interior probability vectors on the
/// rows and columns of an `r x s` array.
#[derive(Clone, Debug)]
pub struct FrechetSpec {
    a: ProbabilityVector,
    b: ProbabilityVector,
}

impl FrechetSpec {
    pub fn new(a: ProbabilityVector, b: ProbabilityVector) -> Result<Self> {
        if a.len() < 2 || b.len() < 2 {
            return Err(Error::InvalidArgument(
                "Frechet margins need at least two cells each".into(),
            ));
        }
        if !a.is_interior() || !b.is_interior() {
            return Err(Error::InvalidArgument(
                "Frechet margins must be strictly inside (0, 1)".into(),
            ));
        }
        Ok(Self { a, b })
    }

    pub fn rows(&self) -> usize {
        self.a.len()
    }

    pub fn cols(&self) -> usize {
        self.b.len()
    }

    pub fn row_margins(&self) -> &ProbabilityVector {
        &self.a
    }

    pub fn col_margins(&self) -> &ProbabilityVector {
        &self.b
    }
}

/// Least-squares center of the image box, falling back to a feasibility
/// phase when that point is not strictly interior.
fn interior_from_center_or_phase1(
    a: &DMatrix<f64>,
    gamma: &DVector<f64>,
    constraints: &LinearInequalities,
) -> Result<DVector<f64>> {
    let gram = a.transpose() * a;
    let target = DVector::from_element(a.nrows(), 0.5) - gamma;
    if let Some(chol) = nalgebra::Cholesky::new(gram) {
        let center = chol.solve(&(a.transpose() * target));
        let scale = 1.0 + constraints.bounds().amax();
        if constraints.is_strictly_feasible(&center, 1e-9 * scale) {
            return Ok(center);
        }
    }
    find_interior_point(constraints)
}

/// Orthonormal basis of `ker(B)` via the SVD of the zero-padded square
/// matrix (so the full right factor is available). Columns with singular
/// value below the relative cutoff span the kernel. Basis vector signs are
/// normalized so each column's largest-magnitude entry is positive.
fn orthonormal_kernel_basis(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = b.ncols();
    let rows = b.nrows().max(m);
    let mut padded = DMatrix::zeros(rows, m);
    padded.rows_mut(0, b.nrows()).copy_from(b);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("svd of finite matrix yields right factor");
    let sigma_max = svd.singular_values.max();
    let cutoff = KERNEL_SINGULAR_VALUE_CUTOFF * sigma_max.max(1.0);
    let mut columns = Vec::new();
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] <= cutoff {
            columns.push(v_t.row(i).transpose());
        }
    }
    if columns.is_empty() {
        return Err(Error::SingletonModel);
    }
    let mut basis = DMatrix::zeros(m, columns.len());
    for (j, col) in columns.iter().enumerate() {
        let lead = col.iter().cloned().fold(0.0f64, |acc, v| {
            if v.abs() > acc.abs() {
                v
            } else {
                acc
            }
        });
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        basis.set_column(j, &(col * sign));
    }
    Ok(basis)
}

fn binomial_pmf(trials: usize, theta: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; trials + 1];
    pmf[0] = 1.0;
    // Pascal-style update keeps coefficients implicit and exact to rounding.
    for level in 1..=trials {
        pmf[level] = pmf[level - 1] * theta;
        for i in (1..level).rev() {
            pmf[i] = pmf[i] * (1.0 - theta) + pmf[i - 1] * theta;
        }
        pmf[0] *= 1.0 - theta;
    }
    pmf
}

fn binomial_pmf_derivative(trials: usize, theta: f64) -> Vec<f64> {
    if trials == 0 {
        return vec![0.0];
    }
    let lower = binomial_pmf(trials - 1, theta);
    finite_support_difference(trials, &lower)
}

fn binomial_pmf_second_derivative(trials: usize, theta: f64) -> Vec<f64> {
    if trials == 0 {
        return vec![0.0];
    }
    let lower = binomial_pmf_derivative(trials - 1, theta);
    finite_support_difference(trials, &lower)
}

/// The recursion `ell * (shift(x) - x)` shared by both derivative orders.
fn finite_support_difference(level: usize, lower: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; level + 1];
    for (i, slot) in out.iter_mut().enumerate() {
        let from_left = if i > 0 { lower[i - 1] } else { 0.0 };
        let from_right = if i < level { lower[i] } else { 0.0 };
        *slot = level as f64 * (from_left - from_right);
    }
    out
}
