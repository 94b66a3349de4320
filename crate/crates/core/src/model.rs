//! SDE coefficients and the differential calculus built on them.
//!
//! A model is the autonomous Itô system
//!
//! ```text
//! dX_t = b(X_t) dt + Σ_{j=1..d} σ_j(X_t) dB^j_t,    X_0 = x ∈ ℝᴺ
//! ```
//!
//! Coefficient columns are indexed `0..=d` with column `0` being the drift
//! (`σ₀ ≡ b`) and columns `1..=d` the diffusion fields. The first-order
//! operators are `L_j = Σ_i σ_j^i ∂_i` for `j ≥ 1`, and `L₀` is the generator
//! `Σ_i b^i ∂_i + ½ Σ a^{ik} ∂_{ik}` with `a = σσᵀ`.
//!
//! `l_sigma(j1, j2, x)` returns `L_{j1} σ_{j2}(x)`, i.e. field `j2`
//! differentiated along field `j1`. The classical Milstein coefficient
//! `g_{j1 j2} = Σ_i σ_{j2}^i ∂_i σ_{j1}` is therefore `l_sigma(j2, j1, x)`;
//! see [`SdeModel::g`].
//!
//! Jacobians are row-major `N×N` with entry `[i*N + l] = ∂_l f^i`; Hessians
//! are `N×N×N` with entry `[(i*N + l)*N + m] = ∂_{lm} f^i`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Evaluates a field at `x` into `out`. Used for values, Jacobians and Hessians.
pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("column index {index} out of range (allowed {min}..={max})")]
    IndexOutOfRange { index: usize, min: usize, max: usize },
    #[error("generator L0 needs the Hessian of the scalar field")]
    MissingHessian,
    #[error("at least one sample point is required")]
    EmptySamples,
    #[error("incomplete model '{label}': {detail}")]
    Incomplete { label: String, detail: String },
    #[error("invalid model '{label}': {detail}")]
    Invalid { label: String, detail: String },
}

/// A point of the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Self {
        StateVector(coords)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        StateVector(v)
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Dense cubic tensor, entry `(i, j, k)` at `[(i*dim + j)*dim + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Tensor3 {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One coefficient column with its first and second derivatives.
#[derive(Clone)]
pub struct Column {
    pub value: FieldFn,
    pub jacobian: FieldFn,
    pub hessian: FieldFn,
}

impl Column {
    pub fn new<V, J, H>(value: V, jacobian: J, hessian: H) -> Self
    where
        V: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        J: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        H: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Column {
            value: Arc::new(value),
            jacobian: Arc::new(jacobian),
            hessian: Arc::new(hessian),
        }
    }
}

/// An autonomous Itô SDE with analytic (or finite-difference) derivatives.
///
/// Immutable after construction; shared freely between worker threads.
#[derive(Clone)]
pub struct SdeModel {
    label: String,
    state_dim: usize,
    noise_dim: usize,
    /// `columns[0]` is the drift, `columns[j]` the diffusion field `σ_j`.
    columns: Vec<Column>,
    nonnegative_coords: Vec<usize>,
}

impl fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeModel")
            .field("label", &self.label)
            .field("state_dim", &self.state_dim)
            .field("noise_dim", &self.noise_dim)
            .field("nonnegative_coords", &self.nonnegative_coords)
            .finish()
    }
}

pub struct SdeModelBuilder {
    label: String,
    state_dim: usize,
    noise_dim: usize,
    drift: Option<Column>,
    diffusion: Vec<Column>,
    nonnegative_coords: Vec<usize>,
}

impl SdeModelBuilder {
    pub fn drift(mut self, column: Column) -> Self {
        self.drift = Some(column);
        self
    }

    pub fn diffusion(mut self, column: Column) -> Self {
        self.diffusion.push(column);
        self
    }

    /// Marks a coordinate whose coefficients are evaluated through
    /// `max(x, 0)`; simulation counts the steps where it goes negative.
    pub fn nonnegative_coord(mut self, coord: usize) -> Self {
        self.nonnegative_coords.push(coord);
        self
    }

    pub fn build(self) -> Result<SdeModel, ModelError> {
        let label = self.label;
        if self.state_dim == 0 || self.noise_dim == 0 {
            return Err(ModelError::Invalid {
                label,
                detail: "state and noise dimensions must be positive".into(),
            });
        }
        let drift = self.drift.ok_or_else(|| ModelError::Incomplete {
            label: label.clone(),
            detail: "drift not set".into(),
        })?;
        if self.diffusion.len() != self.noise_dim {
            return Err(ModelError::Incomplete {
                label,
                detail: format!(
                    "{} diffusion columns supplied for noise dimension {}",
                    self.diffusion.len(),
                    self.noise_dim
                ),
            });
        }
        if let Some(&c) = self.nonnegative_coords.iter().find(|&&c| c >= self.state_dim) {
            return Err(ModelError::Invalid {
                label,
                detail: format!("nonnegative coordinate {c} outside state dimension"),
            });
        }
        let mut columns = Vec::with_capacity(self.noise_dim + 1);
        columns.push(drift);
        columns.extend(self.diffusion);
        Ok(SdeModel {
            label,
            state_dim: self.state_dim,
            noise_dim: self.noise_dim,
            columns,
            nonnegative_coords: self.nonnegative_coords,
        })
    }
}

/// Central-difference step `ε^{1/3}·max(1, |x|)`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

fn fd_jacobian(f: &FieldFn, n: usize, x: &[f64], out: &mut [f64]) {
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for l in 0..n {
        let step = fd_step(x[l]);
        xp[l] = x[l] + step;
        f(&xp, &mut fp);
        xp[l] = x[l] - step;
        f(&xp, &mut fm);
        xp[l] = x[l];
        let width = 2.0 * step;
        for i in 0..n {
            out[i * n + l] = (fp[i] - fm[i]) / width;
        }
    }
}

/// Differentiates a Jacobian field once more; output in Hessian layout.
fn fd_hessian_from_jacobian(jac: &FieldFn, n: usize, x: &[f64], out: &mut [f64]) {
    let mut xp = x.to_vec();
    let mut jp = vec![0.0; n * n];
    let mut jm = vec![0.0; n * n];
    for m in 0..n {
        let step = fd_step(x[m]);
        xp[m] = x[m] + step;
        jac(&xp, &mut jp);
        xp[m] = x[m] - step;
        jac(&xp, &mut jm);
        xp[m] = x[m];
        let width = 2.0 * step;
        for i in 0..n {
            for l in 0..n {
                out[(i * n + l) * n + m] = (jp[i * n + l] - jm[i * n + l]) / width;
            }
        }
    }
}

fn fd_column(value: FieldFn, n: usize) -> Column {
    let jv = value.clone();
    let jacobian: FieldFn = Arc::new(move |x: &[f64], out: &mut [f64]| fd_jacobian(&jv, n, x, out));
    let jj = jacobian.clone();
    let hessian: FieldFn =
        Arc::new(move |x: &[f64], out: &mut [f64]| fd_hessian_from_jacobian(&jj, n, x, out));
    Column {
        value,
        jacobian,
        hessian,
    }
}

impl SdeModel {
    pub fn builder(label: impl Into<String>, state_dim: usize, noise_dim: usize) -> SdeModelBuilder {
        SdeModelBuilder {
            label: label.into(),
            state_dim,
            noise_dim,
            drift: None,
            diffusion: Vec::new(),
            nonnegative_coords: Vec::new(),
        }
    }

    /// Builds a model from coefficient values only; all derivatives come from
    /// central differences. Intended for ad-hoc models, not for accuracy
    /// studies.
    pub fn from_values_fd(
        label: impl Into<String>,
        state_dim: usize,
        drift: FieldFn,
        diffusion: Vec<FieldFn>,
    ) -> Result<SdeModel, ModelError> {
        let noise_dim = diffusion.len();
        let mut b = SdeModel::builder(label, state_dim, noise_dim).drift(fd_column(drift, state_dim));
        for col in diffusion {
            b = b.diffusion(fd_column(col, state_dim));
        }
        b.build()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn nonnegative_coords(&self) -> &[usize] {
        &self.nonnegative_coords
    }

    /// Column `j` (`0` = drift).
    pub fn column(&self, j: usize) -> &Column {
        &self.columns[j]
    }

    pub fn check_state(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.state_dim {
            return Err(ModelError::DimensionMismatch {
                what: "state vector",
                expected: self.state_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_column(&self, j: usize, min: usize) -> Result<(), ModelError> {
        if j < min || j > self.noise_dim {
            return Err(ModelError::IndexOutOfRange {
                index: j,
                min,
                max: self.noise_dim,
            });
        }
        Ok(())
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        (self.columns[0].value)(x, &mut out);
        out
    }

    /// Diffusion field `σ_j`, `j ∈ 1..=d`.
    pub fn diffusion(&self, j: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        (self.columns[j].value)(x, &mut out);
        out
    }

    /// Evaluates every column and its derivatives at `x`.
    pub fn jet(&self, x: &[f64], with_hessians: bool) -> Result<CoefficientJet, ModelError> {
        self.check_state(x)?;
        let mut jet = CoefficientJet::new(self.state_dim, self.noise_dim);
        jet.evaluate(self, x, with_hessians);
        Ok(jet)
    }

    /// Applies `L_j` (`j ≥ 1`) or the generator `L₀` (`j = 0`) to a scalar field.
    pub fn apply_l(&self, j: usize, phi: &ScalarField, x: &[f64]) -> Result<f64, ModelError> {
        self.check_state(x)?;
        self.check_column(j, 0)?;
        let n = self.state_dim;
        let mut grad = vec![0.0; n];
        (phi.gradient)(x, &mut grad);
        if j > 0 {
            let sigma = self.diffusion(j, x);
            return Ok(dot(&sigma, &grad));
        }
        let hess_fn = phi.hessian.as_ref().ok_or(ModelError::MissingHessian)?;
        let mut hess = vec![0.0; n * n];
        hess_fn(x, &mut hess);
        let jet = self.jet(x, false)?;
        let a = jet.diffusion_matrix();
        let mut second = 0.0;
        for i in 0..n {
            for k in 0..n {
                second += a[i * n + k] * hess[i * n + k];
            }
        }
        Ok(dot(jet.column(0), &grad) + 0.5 * second)
    }

    /// `L_{j1} σ_{j2}(x)` with `σ₀ = b`.
    pub fn l_sigma(&self, j1: usize, j2: usize, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_column(j1, 0)?;
        self.check_column(j2, 0)?;
        let jet = self.jet(x, j1 == 0)?;
        let mut out = vec![0.0; self.state_dim];
        jet.l_sigma(j1, j2, &mut out);
        Ok(out)
    }

    /// The Milstein coefficient `g_{j1 j2} = Σ_i σ_{j2}^i ∂_i σ_{j1} = L_{j2} σ_{j1}`.
    pub fn g(&self, j1: usize, j2: usize, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_column(j1, 1)?;
        self.check_column(j2, 1)?;
        self.l_sigma(j2, j1, x)
    }

    /// `[L_{j1}, L_{j2}](x)` for diffusion fields, computed from Jacobian–vector
    /// products.
    pub fn lie_bracket(&self, j1: usize, j2: usize, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_column(j1, 1)?;
        self.check_column(j2, 1)?;
        let jet = self.jet(x, false)?;
        let mut out = vec![0.0; self.state_dim];
        jet.lie_bracket(j1, j2, &mut out);
        Ok(out)
    }

    /// Drift of the equivalent Stratonovich equation,
    /// `b̃^i = b^i − ½ Σ_k Σ_l σ_k^l ∂_l σ_k^i`.
    pub fn stratonovich_drift(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let jet = self.jet(x, false)?;
        let n = self.state_dim;
        let mut out = jet.column(0).to_vec();
        let mut corr = vec![0.0; n];
        for k in 1..=self.noise_dim {
            jet.l_sigma(k, k, &mut corr);
            for (o, c) in out.iter_mut().zip(&corr) {
                *o -= 0.5 * c;
            }
        }
        Ok(out)
    }

    /// Samples `g_{j1 j2} − g_{j2 j1}` for all `j1 < j2` and reports the largest
    /// component. The verdict compares against `tolerance × (1 + max |σ|)`.
    pub fn commutativity_check(
        &self,
        sample_points: &[StateVector],
        tolerance: f64,
    ) -> Result<CommutativityReport, ModelError> {
        let first = sample_points.first().ok_or(ModelError::EmptySamples)?;
        let d = self.noise_dim;
        let mut report = CommutativityReport {
            commutative: true,
            max_defect: 0.0,
            witness_point: first.clone(),
            sample_count: sample_points.len(),
        };
        let mut sigma_scale: f64 = 0.0;
        for p in sample_points {
            let jet = self.jet(p.as_slice(), false)?;
            for j in 1..=d {
                sigma_scale = jet.column(j).iter().fold(sigma_scale, |m, v| m.max(v.abs()));
            }
            for j1 in 1..=d {
                for j2 in (j1 + 1)..=d {
                    let g12 = self.g(j1, j2, p.as_slice())?;
                    let g21 = self.g(j2, j1, p.as_slice())?;
                    for (a, b) in g12.iter().zip(&g21) {
                        let defect = (a - b).abs();
                        if defect > report.max_defect {
                            report.max_defect = defect;
                            report.witness_point = p.clone();
                        }
                    }
                }
            }
        }
        report.commutative = report.max_defect <= tolerance * (1.0 + sigma_scale);
        Ok(report)
    }

    /// Coefficients `(v, M)` of `∂_i u` and `∂_{ij} u` in Φ₁:
    /// `v^i = ½ (L₀b)^i`, `M^{ij} = ½ Σ_m σ_m^i {(L_m b)^j + (L₀σ_m)^j}`.
    pub fn phi1_coefficients(&self, x: &[f64]) -> Result<(Vec<f64>, Matrix), ModelError> {
        let jet = self.jet(x, true)?;
        let n = self.state_dim;
        let mut v = vec![0.0; n];
        jet.l_sigma(0, 0, &mut v);
        v.iter_mut().for_each(|c| *c *= 0.5);
        let mut m = Matrix::zeros(n);
        let mut lmb = vec![0.0; n];
        let mut l0s = vec![0.0; n];
        for k in 1..=self.noise_dim {
            jet.l_sigma(k, 0, &mut lmb);
            jet.l_sigma(0, k, &mut l0s);
            let sigma = jet.column(k);
            for i in 0..n {
                for j in 0..n {
                    m.data[i * n + j] += 0.5 * sigma[i] * (lmb[j] + l0s[j]);
                }
            }
        }
        Ok((v, m))
    }

    /// Coefficients `(T, M)` of `∂_{ijk} u` and `∂_{ij} u` in Φ₂.
    pub fn phi2_coefficients(&self, x: &[f64]) -> Result<(Tensor3, Matrix), ModelError> {
        let jet = self.jet(x, false)?;
        let n = self.state_dim;
        let d = self.noise_dim;
        let mut t = Tensor3::zeros(n);
        let mut m = Matrix::zeros(n);
        let mut l12 = vec![0.0; n];
        let mut l21 = vec![0.0; n];
        for m1 in 1..=d {
            for m2 in 1..=d {
                jet.l_sigma(m1, m2, &mut l12);
                jet.l_sigma(m2, m1, &mut l21);
                let s1 = jet.column(m1);
                let s2 = jet.column(m2);
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            t.data[(i * n + j) * n + k] += 0.5 * l12[i] * s1[j] * s2[k];
                        }
                        m.data[i * n + j] += 0.125 * l12[i] * (l12[j] + l21[j]);
                    }
                }
            }
        }
        Ok((t, m))
    }

    /// Coefficient `C` of `∂_{ij} u` in Φ₃:
    /// `C^{ij} = ⅛ Σ_{m1,m2} (L_{m1}σ_{m2})^i [L_{m1}, L_{m2}]^j`.
    pub fn phi3_coefficients(&self, x: &[f64]) -> Result<Matrix, ModelError> {
        let jet = self.jet(x, false)?;
        let n = self.state_dim;
        let d = self.noise_dim;
        let mut c = Matrix::zeros(n);
        let mut l12 = vec![0.0; n];
        let mut bracket = vec![0.0; n];
        for m1 in 1..=d {
            for m2 in 1..=d {
                if m1 == m2 {
                    continue;
                }
                jet.l_sigma(m1, m2, &mut l12);
                jet.lie_bracket(m1, m2, &mut bracket);
                for i in 0..n {
                    for j in 0..n {
                        c.data[i * n + j] += 0.125 * l12[i] * bracket[j];
                    }
                }
            }
        }
        Ok(c)
    }
}

/// A scalar test function given through its gradient and (optionally) Hessian.
pub struct ScalarField {
    pub gradient: FieldFn,
    pub hessian: Option<FieldFn>,
}

impl ScalarField {
    pub fn new<G>(gradient: G) -> Self
    where
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        ScalarField {
            gradient: Arc::new(gradient),
            hessian: None,
        }
    }

    pub fn with_hessian<H>(mut self, hessian: H) -> Self
    where
        H: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.hessian = Some(Arc::new(hessian));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommutativityReport {
    pub commutative: bool,
    pub max_defect: f64,
    pub witness_point: StateVector,
    pub sample_count: usize,
}

/// Default commutativity tolerance (relative to `1 + max |σ|`).
pub const COMMUTATIVITY_TOLERANCE: f64 = 1e-10;

/// How many derivative levels a jet evaluation fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOrder {
    Values,
    Jacobians,
    Hessians,
}

/// All coefficient columns and derivatives evaluated at one point.
///
/// The schemes reuse one jet per worker, so evaluation writes into
/// preallocated buffers.
#[derive(Debug, Clone)]
pub struct CoefficientJet {
    n: usize,
    d: usize,
    values: Vec<f64>,
    jacobians: Vec<f64>,
    hessians: Vec<f64>,
    diffusion_matrix: Vec<f64>,
    has_hessians: bool,
}

impl CoefficientJet {
    pub fn new(n: usize, d: usize) -> Self {
        CoefficientJet {
            n,
            d,
            values: vec![0.0; (d + 1) * n],
            jacobians: vec![0.0; (d + 1) * n * n],
            hessians: vec![0.0; (d + 1) * n * n * n],
            diffusion_matrix: vec![0.0; n * n],
            has_hessians: false,
        }
    }

    /// Fills values and Jacobians of all columns; Hessians and `a = σσᵀ`
    /// only when `with_hessians` is set.
    pub fn evaluate(&mut self, model: &SdeModel, x: &[f64], with_hessians: bool) {
        let order = if with_hessians { JetOrder::Hessians } else { JetOrder::Jacobians };
        self.evaluate_to(model, x, order);
    }

    pub fn evaluate_to(&mut self, model: &SdeModel, x: &[f64], order: JetOrder) {
        let n = self.n;
        let nn = n * n;
        let with_hessians = order == JetOrder::Hessians;
        for (j, col) in model.columns.iter().enumerate() {
            (col.value)(x, &mut self.values[j * n..(j + 1) * n]);
            if order != JetOrder::Values {
                (col.jacobian)(x, &mut self.jacobians[j * nn..(j + 1) * nn]);
            }
            if with_hessians {
                (col.hessian)(x, &mut self.hessians[j * nn * n..(j + 1) * nn * n]);
            }
        }
        self.has_hessians = with_hessians;
        if with_hessians {
            self.diffusion_matrix.iter_mut().for_each(|v| *v = 0.0);
            for k in 1..=self.d {
                let s = &self.values[k * n..(k + 1) * n];
                for i in 0..n {
                    for l in 0..n {
                        self.diffusion_matrix[i * n + l] += s[i] * s[l];
                    }
                }
            }
        }
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn jacobian(&self, j: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.jacobians[j * nn..(j + 1) * nn]
    }

    pub fn hessian(&self, j: usize) -> &[f64] {
        let nnn = self.n * self.n * self.n;
        &self.hessians[j * nnn..(j + 1) * nnn]
    }

    pub fn diffusion_matrix(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for k in 1..=self.d {
            let s = self.column(k);
            for i in 0..n {
                for l in 0..n {
                    a[i * n + l] += s[i] * s[l];
                }
            }
        }
        a
    }

    /// Writes `L_{j1} σ_{j2}` into `out`. `j1 = 0` requires Hessians.
    pub fn l_sigma(&self, j1: usize, j2: usize, out: &mut [f64]) {
        let n = self.n;
        let dir = self.column(j1);
        let jac = self.jacobian(j2);
        for i in 0..n {
            let row = &jac[i * n..(i + 1) * n];
            out[i] = dot(dir, row);
        }
        if j1 == 0 {
            assert!(self.has_hessians, "L0 applied without Hessians in the jet");
            let hess = self.hessian(j2);
            let a = &self.diffusion_matrix;
            for i in 0..n {
                let block = &hess[i * n * n..(i + 1) * n * n];
                out[i] += 0.5 * dot(a, block);
            }
        }
    }

    /// `[L_{j1}, L_{j2}]^i = Σ_l σ_{j1}^l ∂_l σ_{j2}^i − σ_{j2}^l ∂_l σ_{j1}^i`.
    pub fn lie_bracket(&self, j1: usize, j2: usize, out: &mut [f64]) {
        let n = self.n;
        let (v, w) = (self.column(j1), self.column(j2));
        let (jv, jw) = (self.jacobian(j1), self.jacobian(j2));
        for i in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                acc += v[l] * jw[i * n + l] - w[l] * jv[i * n + l];
            }
            out[i] = acc;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome of comparing analytic derivatives with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeCheck {
    pub points: usize,
    pub max_rel_error: f64,
    pub worst: Option<(String, StateVector)>,
}

/// Compares every Jacobian with central differences of the values and every
/// Hessian with central differences of the Jacobians. The error of entry `e`
/// is `|analytic − fd| / max(1, |analytic|)`.
pub fn check_derivatives(model: &SdeModel, points: &[StateVector]) -> Result<DerivativeCheck, ModelError> {
    let n = model.state_dim();
    let mut out = DerivativeCheck {
        points: points.len(),
        max_rel_error: 0.0,
        worst: None,
    };
    let mut jac = vec![0.0; n * n];
    let mut jac_fd = vec![0.0; n * n];
    let mut hess = vec![0.0; n * n * n];
    let mut hess_fd = vec![0.0; n * n * n];
    for p in points {
        let x = p.as_slice();
        model.check_state(x)?;
        for j in 0..=model.noise_dim() {
            let col = model.column(j);
            (col.jacobian)(x, &mut jac);
            fd_jacobian(&col.value, n, x, &mut jac_fd);
            (col.hessian)(x, &mut hess);
            fd_hessian_from_jacobian(&col.jacobian, n, x, &mut hess_fd);
            let pairs = jac
                .iter()
                .zip(&jac_fd)
                .map(|(a, f)| ("jacobian", a, f))
                .chain(hess.iter().zip(&hess_fd).map(|(a, f)| ("hessian", a, f)));
            for (kind, a, f) in pairs {
                let err = (a - f).abs() / a.abs().max(1.0);
                if err > out.max_rel_error {
                    out.max_rel_error = err;
                    out.worst = Some((format!("column {j} {kind}"), p.clone()));
                }
            }
        }
    }
    Ok(out)
}
