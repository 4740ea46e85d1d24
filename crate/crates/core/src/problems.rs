//! Test objectives with exact gradients and the stochastic gradient oracle.
//!
//! Three families are provided: a separable quadratic, binary logistic
//! regression with labels in `{-1, +1}`, and the one-dimensional nonconvex
//! function `x² + 3 sin² x`, which satisfies the Polyak–Łojasiewicz
//! inequality.

use std::fmt;

use thiserror::Error;

use crate::rng::RngStream;
use crate::vector::{dot, norm};

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("quadratic curvature must be positive, got {value} at index {index}")]
    NonPositiveCurvature { index: usize, value: f64 },
    #[error("quadratic needs at least one curvature value")]
    EmptyQuadratic,
    #[error("logistic label {label} at sample {index} is not -1 or +1")]
    BadLabel { index: usize, label: f64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sample {index} has {got} features, expected {expected}")]
    RaggedFeatures {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("sample {index} has a non-finite feature")]
    NonFiniteFeature { index: usize },
    #[error("features and labels differ in length ({features} vs {labels})")]
    LengthMismatch { features: usize, labels: usize },
    #[error("power iteration did not converge within {iterations} iterations")]
    PowerIteration { iterations: usize },
    #[error("optimal value f* is unknown for this problem")]
    UnknownOptimum,
    #[error("{0} is not supported for this problem")]
    Unsupported(&'static str),
    #[error("mini-batch sampling needs a finite-sum problem")]
    NoSampleStructure,
    #[error("point has dimension {got}, problem has {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("dataset line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Row-major feature matrix with `±1` labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticData {
    features: Vec<f64>,
    labels: Vec<f64>,
    n: usize,
    d: usize,
}

impl LogisticData {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self, ProblemError> {
        if rows.is_empty() {
            return Err(ProblemError::EmptyDataset);
        }
        if rows.len() != labels.len() {
            return Err(ProblemError::LengthMismatch {
                features: rows.len(),
                labels: labels.len(),
            });
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(ProblemError::EmptyDataset);
        }
        let mut features = Vec::with_capacity(rows.len() * d);
        for (index, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(ProblemError::RaggedFeatures {
                    index,
                    got: row.len(),
                    expected: d,
                });
            }
            if !row.iter().all(|v| v.is_finite()) {
                return Err(ProblemError::NonFiniteFeature { index });
            }
            features.extend_from_slice(row);
        }
        for (index, &label) in labels.iter().enumerate() {
            if label != 1.0 && label != -1.0 {
                return Err(ProblemError::BadLabel { index, label });
            }
        }
        Ok(Self {
            features,
            labels,
            n: rows.len(),
            d,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    fn sample_loss(&self, i: usize, x: &[f64]) -> f64 {
        softplus(-self.labels[i] * dot(self.row(i), x))
    }

    /// `out += scale * ∇ℓ_i(x)`
    fn add_sample_gradient(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let b = self.labels[i];
        let a = self.row(i);
        let coef = -b / (1.0 + (b * dot(a, x)).exp());
        for (o, ai) in out.iter_mut().zip(a) {
            *o += scale * coef * ai;
        }
    }

    /// Largest eigenvalue of `AᵀA` by power iteration.
    fn gram_spectral_norm(&self, tol: f64, max_iter: usize) -> Result<f64, ProblemError> {
        let mut rng = RngStream::new(0x5EED_1A7E);
        let mut v: Vec<f64> = (0..self.d).map(|_| 1.0 + rng.next_f64()).collect();
        let scale = norm(&v);
        v.iter_mut().for_each(|c| *c /= scale);
        let mut av = vec![0.0; self.n];
        let mut w = vec![0.0; self.d];
        let mut estimate = 0.0;
        for _ in 0..max_iter {
            for (i, slot) in av.iter_mut().enumerate() {
                *slot = dot(self.row(i), &v);
            }
            w.iter_mut().for_each(|c| *c = 0.0);
            for (i, &s) in av.iter().enumerate() {
                for (wj, aj) in w.iter_mut().zip(self.row(i)) {
                    *wj += s * aj;
                }
            }
            let next = dot(&v, &w);
            let wn = norm(&w);
            if wn == 0.0 {
                return Ok(0.0);
            }
            for (vj, wj) in v.iter_mut().zip(&w) {
                *vj = wj / wn;
            }
            if (next - estimate).abs() <= tol * next.abs() {
                return Ok(next);
            }
            estimate = next;
        }
        Err(ProblemError::PowerIteration {
            iterations: max_iter,
        })
    }
}

/// Numerically stable `ln(1 + e^t)`.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    /// `½ Σ λᵢ xᵢ²`
    Quadratic { lambdas: Vec<f64> },
    /// `(1/n) Σ ln(1 + exp(−bᵢ⟨x, aᵢ⟩))`
    Logistic(LogisticData),
    /// `x² + 3 sin² x`
    PlSine,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Quadratic { lambdas } => write!(f, "quadratic(d={})", lambdas.len()),
            Objective::Logistic(data) => write!(f, "logistic(n={}, d={})", data.n, data.d),
            Objective::PlSine => f.write_str("plsine"),
        }
    }
}

/// An objective with its smoothness constant and whatever optimum metadata
/// is known. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    objective: Objective,
    dim: usize,
    l_smooth: f64,
    mu: Option<f64>,
    f_star: Option<f64>,
    x_star: Option<Vec<f64>>,
    convex: bool,
}

impl Problem {
    pub fn quadratic(lambdas: &[f64]) -> Result<Self, ProblemError> {
        if lambdas.is_empty() {
            return Err(ProblemError::EmptyQuadratic);
        }
        if let Some((index, &value)) = lambdas
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0 && v.is_finite()))
        {
            return Err(ProblemError::NonPositiveCurvature { index, value });
        }
        let mut p = Self {
            objective: Objective::Quadratic {
                lambdas: lambdas.to_vec(),
            },
            dim: lambdas.len(),
            l_smooth: 0.0,
            mu: None,
            f_star: Some(0.0),
            x_star: Some(vec![0.0; lambdas.len()]),
            convex: true,
        };
        p.l_smooth = estimate_l(&p)?;
        p.mu = Some(estimate_mu(&p)?);
        Ok(p)
    }

    pub fn logistic(data: LogisticData) -> Result<Self, ProblemError> {
        let dim = data.d;
        let mut p = Self {
            objective: Objective::Logistic(data),
            dim,
            l_smooth: 0.0,
            mu: None,
            f_star: None,
            x_star: None,
            convex: true,
        };
        p.l_smooth = estimate_l(&p)?;
        Ok(p)
    }

    pub fn pl_sine() -> Self {
        let mut p = Self {
            objective: Objective::PlSine,
            dim: 1,
            l_smooth: 8.0,
            mu: None,
            f_star: Some(0.0),
            x_star: Some(vec![0.0]),
            convex: false,
        };
        p.mu = estimate_mu(&p).ok();
        p
    }

    /// Attach a numerically computed optimum.
    pub fn with_optimum(mut self, f_star: f64, x_star: Option<Vec<f64>>) -> Self {
        self.f_star = Some(f_star);
        self.x_star = x_star;
        self
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn l_smooth(&self) -> f64 {
        self.l_smooth
    }

    pub fn mu(&self) -> Option<f64> {
        self.mu
    }

    pub fn f_star(&self) -> Option<f64> {
        self.f_star
    }

    pub fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    /// Number of component functions for finite-sum objectives.
    pub fn sample_count(&self) -> Option<usize> {
        match &self.objective {
            Objective::Logistic(data) => Some(data.n),
            _ => None,
        }
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<(), ProblemError> {
        if x.len() == self.dim {
            Ok(())
        } else {
            Err(ProblemError::Dimension {
                got: x.len(),
                expected: self.dim,
            })
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.objective {
            Objective::Quadratic { lambdas } => {
                0.5 * lambdas.iter().zip(x).map(|(l, xi)| l * xi * xi).sum::<f64>()
            }
            Objective::Logistic(data) => {
                (0..data.n).map(|i| data.sample_loss(i, x)).sum::<f64>() / data.n as f64
            }
            Objective::PlSine => {
                let s = x[0].sin();
                x[0] * x[0] + 3.0 * s * s
            }
        }
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.objective {
            Objective::Quadratic { lambdas } => {
                for ((o, l), xi) in out.iter_mut().zip(lambdas).zip(x) {
                    *o = l * xi;
                }
            }
            Objective::Logistic(data) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let scale = 1.0 / data.n as f64;
                for i in 0..data.n {
                    data.add_sample_gradient(i, x, scale, out);
                }
            }
            Objective::PlSine => out[0] = 2.0 * x[0] + 3.0 * (2.0 * x[0]).sin(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.gradient_into(x, &mut g);
        g
    }

    /// Gap `f(x) − f*`, when `f*` is known.
    pub fn gap(&self, x: &[f64]) -> Option<f64> {
        self.f_star.map(|fs| self.value(x) - fs)
    }
}

/// Oracle noise satisfying the unbiased, bounded-variance assumption.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    /// `g = ∇f(x) + ε`, `ε` i.i.d. `N(0, σ²/d)` per coordinate, so
    /// `E‖g − ∇f(x)‖² = σ²`.
    Gaussian { sigma: f64 },
    /// Average of `batch` per-sample gradients drawn uniformly with
    /// replacement. `batch >= n` evaluates the full gradient.
    Minibatch { batch: usize },
}

impl NoiseModel {
    pub fn exact() -> Self {
        NoiseModel::Gaussian { sigma: 0.0 }
    }

    pub fn is_deterministic(&self, problem: &Problem) -> bool {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma == 0.0,
            NoiseModel::Minibatch { batch } => problem.sample_count().is_some_and(|n| batch >= n),
        }
    }
}

/// One stochastic gradient with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSample {
    pub g: Vec<f64>,
    /// Mini-batch indices, when the sample came from index sampling.
    pub indices: Option<Vec<usize>>,
}

pub fn sample_gradient(
    problem: &Problem,
    noise: &NoiseModel,
    x: &[f64],
    stream: &mut RngStream,
) -> Result<GradientSample, ProblemError> {
    problem.check_dim(x)?;
    match *noise {
        NoiseModel::Gaussian { sigma } => {
            let mut g = problem.gradient(x);
            let scale = sigma / (problem.dim as f64).sqrt();
            let eps = stream.gaussian_vec(problem.dim);
            for (gi, e) in g.iter_mut().zip(eps) {
                *gi += scale * e;
            }
            Ok(GradientSample { g, indices: None })
        }
        NoiseModel::Minibatch { batch } => {
            let Objective::Logistic(data) = &problem.objective else {
                return Err(ProblemError::NoSampleStructure);
            };
            if batch >= data.n {
                return Ok(GradientSample {
                    g: problem.gradient(x),
                    indices: None,
                });
            }
            let indices: Vec<usize> = (0..batch).map(|_| stream.next_index(data.n)).collect();
            let mut g = vec![0.0; problem.dim];
            let scale = 1.0 / batch as f64;
            for &i in &indices {
                data.add_sample_gradient(i, x, scale, &mut g);
            }
            Ok(GradientSample {
                g,
                indices: Some(indices),
            })
        }
    }
}

pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITER: usize = 10_000;

/// Smoothness constant `L` for the supported objectives.
pub fn estimate_l(problem: &Problem) -> Result<f64, ProblemError> {
    match &problem.objective {
        Objective::Quadratic { lambdas } => Ok(lambdas.iter().copied().fold(f64::MIN, f64::max)),
        Objective::Logistic(data) => {
            let top = data.gram_spectral_norm(POWER_TOL, POWER_MAX_ITER)?;
            Ok(top / (4.0 * data.n as f64))
        }
        // |f''(x)| = |2 + 6 cos 2x| ≤ 8
        Objective::PlSine => Ok(8.0),
    }
}

/// Grid half-width and spacing for the one-dimensional PL ratio scan.
const PL_GRID_RADIUS: f64 = 10.0;
const PL_GRID_STEP: f64 = 1e-3;
const PL_REFINE_STEP: f64 = 1e-7;

/// Lower estimate of the PL constant `μ`.
///
/// Quadratics return their smallest curvature. One-dimensional problems take
/// the minimum of `f'(x)² / (2(f(x) − f*))` over a grid of spacing 1e-3 on
/// `[-10, 10]`, refined on a 1e-7 grid around the best cell. Points with
/// `f(x) − f* < 1e-12` are skipped.
pub fn estimate_mu(problem: &Problem) -> Result<f64, ProblemError> {
    let f_star = problem.f_star.ok_or(ProblemError::UnknownOptimum)?;
    match &problem.objective {
        Objective::Quadratic { lambdas } => Ok(lambdas.iter().copied().fold(f64::MAX, f64::min)),
        Objective::PlSine => {
            let ratio = |x: f64| -> Option<f64> {
                let p = [x];
                let gap = problem.value(&p) - f_star;
                if gap < 1e-12 {
                    return None;
                }
                let g = problem.gradient(&p)[0];
                Some(g * g / (2.0 * gap))
            };
            let steps = (2.0 * PL_GRID_RADIUS / PL_GRID_STEP).round() as i64;
            let (mut best, mut best_x) = (f64::INFINITY, 0.0);
            for i in 0..=steps {
                let x = -PL_GRID_RADIUS + i as f64 * PL_GRID_STEP;
                if let Some(r) = ratio(x) {
                    if r < best {
                        best = r;
                        best_x = x;
                    }
                }
            }
            let fine = (PL_GRID_STEP / PL_REFINE_STEP).round() as i64;
            for i in -fine..=fine {
                if let Some(r) = ratio(best_x + i as f64 * PL_REFINE_STEP) {
                    best = best.min(r);
                }
            }
            Ok(best)
        }
        Objective::Logistic(_) => Err(ProblemError::Unsupported("PL constant estimation")),
    }
}

/// Synthetic logistic data: standard-normal rows scaled to unit norm, labels
/// from a random planted hyperplane with each label flipped with probability
/// `flip`.
pub fn synthetic_logistic(
    n: usize,
    d: usize,
    flip: f64,
    stream: &mut RngStream,
) -> Result<LogisticData, ProblemError> {
    if n == 0 || d == 0 {
        return Err(ProblemError::EmptyDataset);
    }
    let planted = stream.gaussian_vec(d);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut a = stream.gaussian_vec(d);
        let scale = norm(&a);
        if scale > 0.0 {
            a.iter_mut().for_each(|v| *v /= scale);
        }
        let mut b = if dot(&a, &planted) >= 0.0 { 1.0 } else { -1.0 };
        if stream.next_f64() < flip {
            b = -b;
        }
        rows.push(a);
        labels.push(b);
    }
    LogisticData::new(rows, labels)
}

/// Map `{0, 1}` labels to `{-1, +1}`.
pub fn labels_from_binary(labels: &[u8]) -> Vec<f64> {
    labels
        .iter()
        .map(|&b| if b == 0 { -1.0 } else { 1.0 })
        .collect()
}

/// Parse the whitespace-separated dataset format `label feat₁ … feat_d`,
/// one sample per line. Blank lines and `#` comments are ignored.
pub fn parse_dataset(text: &str) -> Result<LogisticData, ProblemError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace().map(|tok| {
            tok.parse::<f64>().map_err(|_| ProblemError::Parse {
                line: lineno + 1,
                reason: format!("not a number: {tok:?}"),
            })
        });
        let label = fields.next().transpose()?.ok_or(ProblemError::Parse {
            line: lineno + 1,
            reason: "missing label".into(),
        })?;
        let row = fields.collect::<Result<Vec<f64>, _>>()?;
        if row.is_empty() {
            return Err(ProblemError::Parse {
                line: lineno + 1,
                reason: "no features".into(),
            });
        }
        rows.push(row);
        labels.push(label);
    }
    LogisticData::new(rows, labels)
}
