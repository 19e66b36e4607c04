//! Generalized-linear hypotheses `x ↦ ⟨w, φ(x)⟩` and the ERM solvers that fit
//! them to metasamples under a multi-observation loss.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::losses::MultiObsLoss;
use crate::metasample::Metasample;

/// Gram matrices with a larger condition number get a ridge term.
pub const CONDITION_LIMIT: f64 = 1e12;
const RIDGE_SCALE: f64 = 1e-10;
/// Relative objective changes below this are summation noise, not increases.
const OBJECTIVE_NOISE_FLOOR: f64 = 1e-12;

pub const BASIS_IDS: &[&str] = &["affine", "linear", "poly:<degree>"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureBasis {
    /// `φ(x) = [1, x₁, …, x_d]`.
    Affine { d: usize },
    /// `φ(x) = [x₁, …, x_d]`, no intercept.
    Linear { d: usize },
    /// `φ(x) = [1, x, …, x^p]` for scalar `x`.
    Polynomial { degree: usize },
}

impl FeatureBasis {
    pub fn affine(d: usize) -> Self {
        FeatureBasis::Affine { d }
    }

    pub fn polynomial(degree: usize) -> Self {
        FeatureBasis::Polynomial { degree }
    }

    /// Length of `φ(x)`.
    pub fn dim(&self) -> usize {
        match *self {
            FeatureBasis::Affine { d } => d + 1,
            FeatureBasis::Linear { d } => d,
            FeatureBasis::Polynomial { degree } => degree + 1,
        }
    }

    /// Dimension of the input `x`.
    pub fn input_dim(&self) -> usize {
        match *self {
            FeatureBasis::Affine { d } | FeatureBasis::Linear { d } => d,
            FeatureBasis::Polynomial { .. } => 1,
        }
    }

    /// Same basis kind for inputs of dimension `d`.
    pub fn with_input_dim(self, d: usize) -> Result<Self> {
        match self {
            FeatureBasis::Affine { .. } => Ok(FeatureBasis::Affine { d }),
            FeatureBasis::Linear { .. } => Ok(FeatureBasis::Linear { d }),
            FeatureBasis::Polynomial { .. } if d == 1 => Ok(self),
            FeatureBasis::Polynomial { .. } => Err(Error::DimensionMismatch { expected: 1, got: d }),
        }
    }

    pub fn features_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        debug_assert_eq!(out.len(), self.dim());
        match *self {
            FeatureBasis::Affine { .. } => {
                out[0] = 1.0;
                out[1..].copy_from_slice(x);
            }
            FeatureBasis::Linear { .. } => out.copy_from_slice(x),
            FeatureBasis::Polynomial { .. } => {
                let mut power = 1.0;
                for slot in out.iter_mut() {
                    *slot = power;
                    power *= x[0];
                }
            }
        }
        Ok(())
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.features_into(x, &mut out)?;
        Ok(out)
    }
}

impl fmt::Display for FeatureBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureBasis::Affine { .. } => write!(f, "affine"),
            FeatureBasis::Linear { .. } => write!(f, "linear"),
            FeatureBasis::Polynomial { degree } => write!(f, "poly:{degree}"),
        }
    }
}

/// Parses `affine`, `linear` or `poly:p`. Affine and linear bases are
/// one-dimensional until re-targeted with [`FeatureBasis::with_input_dim`].
impl FromStr for FeatureBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownId {
            kind: "basis",
            id: s.to_string(),
            valid: BASIS_IDS.join(", "),
        };
        match s.split_once(':') {
            None if s == "affine" => Ok(FeatureBasis::Affine { d: 1 }),
            None if s == "linear" => Ok(FeatureBasis::Linear { d: 1 }),
            Some(("poly", p)) => Ok(FeatureBasis::Polynomial {
                degree: p.parse().map_err(|_| unknown())?,
            }),
            _ => Err(unknown()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub basis: FeatureBasis,
    pub w: Vec<f64>,
}

impl Hypothesis {
    pub fn new(basis: FeatureBasis, w: Vec<f64>) -> Result<Self> {
        if w.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: w.len(),
            });
        }
        Ok(Hypothesis { basis, w })
    }

    pub fn zeros(basis: FeatureBasis) -> Self {
        Hypothesis {
            basis,
            w: vec![0.0; basis.dim()],
        }
    }

    /// `⟨w, φ(x)⟩`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let phi = self.basis.features(x)?;
        Ok(dot(&self.w, &phi))
    }

    /// Ascending coefficients of the prediction as a polynomial in scalar `x`.
    pub fn as_polynomial(&self) -> Result<Vec<f64>> {
        match self.basis {
            FeatureBasis::Polynomial { .. } => Ok(self.w.clone()),
            FeatureBasis::Affine { d: 1 } => Ok(self.w.clone()),
            FeatureBasis::Linear { d: 1 } => Ok(vec![0.0, self.w[0]]),
            other => Err(invalid(format!(
                "basis `{other}` over {} inputs is not a univariate polynomial",
                other.input_dim()
            ))),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    pub hypothesis: Hypothesis,
    /// Ridge added to the Gram diagonal, if conditioning required one.
    pub ridge: Option<f64>,
    pub condition_number: f64,
}

/// Least squares of `target` on `φ(x)` through the normal equations.
///
/// The Gram matrix is Cholesky-factored; when its condition number exceeds
/// [`CONDITION_LIMIT`] a ridge of `1e-10 · trace / dim` is added first.
pub fn least_squares<'a, I>(rows: I, basis: FeatureBasis) -> Result<LeastSquaresFit>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let dim = basis.dim();
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    let mut phi = vec![0.0; dim];
    let mut count = 0usize;
    for (x, target) in rows {
        if !target.is_finite() {
            return Err(Error::NonFinite(format!("regression target {target}")));
        }
        basis.features_into(x, &mut phi)?;
        for i in 0..dim {
            rhs[i] += phi[i] * target;
            for j in 0..=i {
                gram[(i, j)] += phi[i] * phi[j];
            }
        }
        count += 1;
    }
    if count < dim {
        return Err(Error::InsufficientData(format!(
            "{count} rows for a basis of dimension {dim}"
        )));
    }
    for i in 0..dim {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }

    let eigen = gram.clone().symmetric_eigen();
    let max_eig = eigen.eigenvalues.max();
    let min_eig = eigen.eigenvalues.min();
    let condition_number = if min_eig > 0.0 {
        max_eig / min_eig
    } else {
        f64::INFINITY
    };
    let ridge = if condition_number > CONDITION_LIMIT {
        let r = RIDGE_SCALE * gram.trace() / dim as f64;
        for i in 0..dim {
            gram[(i, i)] += r;
        }
        Some(r)
    } else {
        None
    };

    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("Gram matrix is not positive definite".into()))?;
    let w = chol.solve(&rhs);
    Ok(LeastSquaresFit {
        hypothesis: Hypothesis {
            basis,
            w: w.iter().copied().collect(),
        },
        ridge,
        condition_number,
    })
}

/// Minimizes `Σᵢ (⟨w, φ(xᵢ)⟩ − ψ(y⃗ᵢ))²` for a squared-form loss.
pub fn fit_least_squares(
    metasamples: &[Metasample],
    loss: &MultiObsLoss,
    basis: FeatureBasis,
) -> Result<LeastSquaresFit> {
    if !loss.has_psi() {
        return Err(invalid(format!("loss `{loss}` has no squared form; use fit_gradient")));
    }
    let targets = metasamples
        .iter()
        .map(|ms| {
            if ms.labels.iter().any(|y| !y.is_finite()) {
                return Err(Error::NonFinite("metasample label".into()));
            }
            loss.psi(&ms.labels)
        })
        .collect::<Result<Vec<f64>>>()?;
    least_squares(
        metasamples
            .iter()
            .zip(&targets)
            .map(|(ms, &t)| (ms.x_rep.as_slice(), t)),
        basis,
    )
}

/// Average loss `(1/n) Σᵢ ℓ(⟨w, φ(xᵢ)⟩, y⃗ᵢ)` over a fixed set of metasamples,
/// with features precomputed.
#[derive(Debug, Clone)]
pub struct ErmObjective {
    loss: MultiObsLoss,
    basis: FeatureBasis,
    features: Vec<f64>,
    labels: Vec<f64>,
    count: usize,
    lower_clamp: Option<f64>,
}

impl ErmObjective {
    pub fn new(metasamples: &[Metasample], loss: MultiObsLoss, basis: FeatureBasis) -> Result<Self> {
        if metasamples.is_empty() {
            return Err(Error::InsufficientData("no metasamples".into()));
        }
        let (dim, m) = (basis.dim(), loss.m());
        let mut features = vec![0.0; metasamples.len() * dim];
        let mut labels = Vec::with_capacity(metasamples.len() * m);
        for (ms, row) in metasamples.iter().zip(features.chunks_exact_mut(dim)) {
            if ms.labels.len() != m {
                return Err(Error::LabelCount {
                    expected: m,
                    got: ms.labels.len(),
                });
            }
            basis.features_into(&ms.x_rep, row)?;
            labels.extend_from_slice(&ms.labels);
        }
        Ok(ErmObjective {
            loss,
            basis,
            features,
            labels,
            count: metasamples.len(),
            lower_clamp: None,
        })
    }

    /// Evaluates predictions as `max(⟨w, φ(x)⟩, clamp)`.
    pub fn with_lower_clamp(mut self, clamp: Option<f64>) -> Self {
        self.lower_clamp = clamp;
        self
    }

    pub fn basis(&self) -> FeatureBasis {
        self.basis
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        self.value_and_gradient(w).0
    }

    pub fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let (dim, m) = (self.basis.dim(), self.loss.m());
        let mut total = 0.0;
        let mut grad = vec![0.0; dim];
        for (phi, ys) in self.features.chunks_exact(dim).zip(self.labels.chunks_exact(m)) {
            let raw = dot(w, phi);
            let (r, active) = match self.lower_clamp {
                Some(c) if raw < c => (c, false),
                _ => (raw, true),
            };
            let (value, deriv) = self.loss.value_and_deriv(r, ys);
            total += value;
            if active {
                for (g, p) in grad.iter_mut().zip(phi) {
                    *g += deriv * p;
                }
            }
        }
        let scale = 1.0 / self.count as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        (total * scale, grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientOptions {
    /// Starting coefficients; zeros when absent.
    pub init: Option<Vec<f64>>,
    pub step: f64,
    pub max_iter: usize,
    /// Stop once the gradient's ∞-norm is at most this.
    pub tol: f64,
    pub lower_clamp: Option<f64>,
}

impl Default for GradientOptions {
    fn default() -> Self {
        GradientOptions {
            init: None,
            step: 1e-2,
            max_iter: 10_000,
            tol: 1e-8,
            lower_clamp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientFit {
    pub hypothesis: Hypothesis,
    pub objective: f64,
    pub initial_objective: f64,
    /// Gradient steps attempted, accepted or not.
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

/// Gradient descent on the average multi-observation loss.
///
/// A step is accepted only if it does not increase the objective beyond
/// rounding noise; otherwise the step size is halved and the iterate kept.
/// The returned hypothesis is the best iterate seen, or the converged one. Hitting `max_iter` is reported through
/// [`GradientFit::converged`], not as an error. The returned hypothesis is
/// never clamped.
pub fn fit_gradient(
    metasamples: &[Metasample],
    loss: &MultiObsLoss,
    basis: FeatureBasis,
    opts: &GradientOptions,
) -> Result<GradientFit> {
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(invalid(format!("step must be positive, got {}", opts.step)));
    }
    let objective = ErmObjective::new(metasamples, *loss, basis)?.with_lower_clamp(opts.lower_clamp);
    let mut w = match &opts.init {
        Some(init) if init.len() != basis.dim() => {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: init.len(),
            })
        }
        Some(init) => init.clone(),
        None => vec![0.0; basis.dim()],
    };
    let (mut value, mut grad) = objective.value_and_gradient(&w);
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("objective at init is {value}")));
    }
    let initial_objective = value;
    let mut best = (w.clone(), value, inf_norm(&grad));
    let mut step = opts.step;
    let mut iterations = 0;
    let mut converged = false;
    let mut trial = vec![0.0; w.len()];
    loop {
        if inf_norm(&grad) <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter || step < f64::MIN_POSITIVE {
            break;
        }
        iterations += 1;
        for ((t, wi), gi) in trial.iter_mut().zip(&w).zip(&grad) {
            *t = wi - step * gi;
        }
        let (next_value, next_grad) = objective.value_and_gradient(&trial);
        let slack = OBJECTIVE_NOISE_FLOOR * value.abs().max(1.0);
        if next_value.is_finite() && next_value <= value + slack {
            w.copy_from_slice(&trial);
            value = next_value;
            grad = next_grad;
            if value < best.1 || (value == best.1 && inf_norm(&grad) < best.2) {
                best = (w.clone(), value, inf_norm(&grad));
            }
        } else {
            step *= 0.5;
        }
    }
    if converged {
        best = (w, value, inf_norm(&grad));
    }
    let (w, objective, gradient_norm) = best;
    Ok(GradientFit {
        hypothesis: Hypothesis { basis, w },
        objective,
        initial_objective,
        iterations,
        converged,
        gradient_norm,
    })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `(2/n) Σᵢ φ(xᵢ)φ(xᵢ)ᵀ`, the Hessian of the empirical squared-form risk.
pub fn empirical_hessian(metasamples: &[Metasample], basis: FeatureBasis) -> Result<DMatrix<f64>> {
    if metasamples.is_empty() {
        return Err(Error::InsufficientData("no metasamples".into()));
    }
    let dim = basis.dim();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let mut phi = vec![0.0; dim];
    for ms in metasamples {
        basis.features_into(&ms.x_rep, &mut phi)?;
        for i in 0..dim {
            for j in 0..dim {
                h[(i, j)] += phi[i] * phi[j];
            }
        }
    }
    Ok(h * (2.0 / metasamples.len() as f64))
}
