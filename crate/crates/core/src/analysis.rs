//! Lyapunov functions, theorem right-hand sides, and post-hoc verification of
//! traces against them.

use std::fmt;

use thiserror::Error;

use crate::schedules::{gamma_tilde, ConstantSchedule, Schedule, TheoremId};
use crate::trace::{Trace, TraceRow};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("{theorem} needs {input}")]
    MissingInput {
        theorem: &'static str,
        input: &'static str,
    },
    #[error("effective step at k={k} is {value}, p_k is undefined")]
    NonPositiveStep { k: usize, value: f64 },
    #[error("denominator of C is {0}, expected positive")]
    Denominator(f64),
    #[error("no traces to verify")]
    NoTraces,
    #[error("trace is missing column {0}")]
    Schema(&'static str),
    #[error("schedule has no parameters for k={0}")]
    ScheduleRange(usize),
}

/// Running product `Θ_0 = 1`, `Θ_k = (1 − θ_k)Θ_{k−1}`.
///
/// Carried as a double-double so that a million factors stay within a few
/// ulps of the closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaProduct {
    k: usize,
    hi: f64,
    lo: f64,
}

impl Default for ThetaProduct {
    fn default() -> Self {
        Self {
            k: 0,
            hi: 1.0,
            lo: 0.0,
        }
    }
}

impl ThetaProduct {
    /// Advance from `Θ_{k−1}` to `Θ_k`.
    pub fn advance(&mut self, theta_k: f64) -> f64 {
        self.k += 1;
        // 1 − θ split exactly into a_hi + a_lo (θ ≤ 1)
        let a_hi = 1.0 - theta_k;
        let a_lo = (1.0 - a_hi) - theta_k;
        let p = self.hi * a_hi;
        let e = self.hi.mul_add(a_hi, -p) + (self.hi * a_lo + self.lo * a_hi);
        self.hi = p + e;
        self.lo = e - (self.hi - p);
        self.hi
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn value(&self) -> f64 {
        self.hi
    }
}

/// `p_k = θ_k / (2 γ̃_k Θ_k)`
pub fn p_coef(theta_k: f64, gamma_tilde_k: f64, big_theta_k: f64) -> f64 {
    theta_k / (2.0 * gamma_tilde_k * big_theta_k)
}

/// `Φ₁ = f(x₁) − f* + θ₁θ₂/(2(1−θ₁)(θ₂γ₁ + (1−β₁)η₁)) ‖x₁ − x*‖²`
pub fn phi1(schedule: &Schedule, f1_gap: f64, dist1_sq: f64) -> Result<f64, AnalysisError> {
    let s1 = schedule.step(1).ok_or(AnalysisError::ScheduleRange(1))?;
    let (th1, th2) = match (s1.theta, schedule.theta(2)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(AnalysisError::MissingInput {
                theorem: "phi",
                input: "a theta-bearing schedule",
            })
        }
    };
    let denom = th2 * s1.gamma + (1.0 - s1.beta) * s1.eta;
    if denom <= 0.0 {
        return Err(AnalysisError::NonPositiveStep { k: 1, value: denom });
    }
    Ok(f1_gap + th1 * th2 / (2.0 * (1.0 - th1) * denom) * dist1_sq)
}

/// Online evaluation of `Φ_k = (1/Θ_{k−1})(f(y_k) − f*) + p_k ‖v_k − x*‖²`.
/// Feed `k = 1, 2, …` in order.
#[derive(Clone, Debug, Default)]
pub struct PhiTracker {
    big_theta: ThetaProduct,
}

impl PhiTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn eval(
        &mut self,
        schedule: &Schedule,
        k: usize,
        f_y_gap: f64,
        v_dist_sq: f64,
    ) -> Result<f64, AnalysisError> {
        debug_assert_eq!(self.big_theta.k() + 1, k);
        let step = schedule.step(k).ok_or(AnalysisError::ScheduleRange(k))?;
        let (theta, theta_next) = match (step.theta, schedule.theta(k + 1)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(AnalysisError::MissingInput {
                    theorem: "phi",
                    input: "a theta-bearing schedule",
                })
            }
        };
        let prev = self.big_theta.value();
        let cur = self.big_theta.advance(theta);
        let eff = gamma_tilde(&step, theta_next);
        if eff <= 0.0 {
            return Err(AnalysisError::NonPositiveStep { k, value: eff });
        }
        Ok(f_y_gap / prev + p_coef(theta, eff, cur) * v_dist_sq)
    }
}

/// Constants of the PL Lyapunov function:
/// `M = (γ+η) − L(γ+η)²/(1−β) − L(γ+η)²/2` and
/// `C = (β²Lη²/2 + Mμ(μ+L)β²η²/(1−β)) / (1 − β − μM + μ(μ+L)β²η²/(1−β))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlConstants {
    pub m: f64,
    pub c: f64,
}

impl PlConstants {
    pub fn new(s: &ConstantSchedule, l: f64, mu: f64) -> Result<Self, AnalysisError> {
        let (b, e) = (s.beta, s.eta);
        let step = s.effective_step();
        let m = step - l * step * step / (1.0 - b) - l * step * step / 2.0;
        let shared = mu * (mu + l) * b * b * e * e / (1.0 - b);
        let num = b * b * l * e * e / 2.0 + m * shared;
        let den = 1.0 - b - mu * m + shared;
        if den <= 0.0 {
            return Err(AnalysisError::Denominator(den));
        }
        Ok(Self { m, c: num / den })
    }
}

/// `S_1 = 0`, `S_k = β S_{k−1} + ‖∇f(x_{k−1})‖²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricSum {
    beta: f64,
    value: f64,
}

impl GeometricSum {
    pub fn new(beta: f64) -> Self {
        Self { beta, value: 0.0 }
    }

    pub fn push(&mut self, grad_sq: f64) -> f64 {
        self.value = self.beta * self.value + grad_sq;
        self.value
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// `φ_k = f(w_k) − f* + C S_k`
pub fn varphi(f_w_gap: f64, c: f64, geometric_sum: f64) -> f64 {
    f_w_gap + c * geometric_sum
}

/// Problem and start-point data that theorem right-hand sides depend on.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundInputs {
    pub l: f64,
    pub sigma: f64,
    pub mu: Option<f64>,
    /// `f(x₁) − f*`
    pub f1_gap: f64,
    /// `‖x₁ − x*‖²`
    pub dist1_sq: Option<f64>,
    /// `‖∇f(x₁)‖²`
    pub grad1_sq: f64,
    /// Constant of the stochastic accelerated bound.
    pub c: Option<f64>,
}

fn need<T>(v: Option<T>, theorem: TheoremId, input: &'static str) -> Result<T, AnalysisError> {
    v.ok_or(AnalysisError::MissingInput {
        theorem: theorem.as_str(),
        input,
    })
}

fn need_constant(theorem: TheoremId, schedule: &Schedule) -> Result<&ConstantSchedule, AnalysisError> {
    need(schedule.as_constant(), theorem, "a constant schedule")
}

/// Theorem right-hand side for `t = 0..=t_max`. Entries with a `1/t` factor
/// are `+∞` at `t = 0`.
pub fn bound_series(
    theorem: TheoremId,
    t_max: usize,
    inputs: &BoundInputs,
    schedule: &Schedule,
) -> Result<Vec<f64>, AnalysisError> {
    let BoundInputs {
        l,
        sigma,
        f1_gap,
        grad1_sq,
        ..
    } = *inputs;
    let sigma_sq = sigma * sigma;
    let mut out = Vec::with_capacity(t_max + 1);
    match theorem {
        TheoremId::CvxConst | TheoremId::CvxDeter => {
            let s = need_constant(theorem, schedule)?;
            let dist = need(inputs.dist1_sq, theorem, "||x1 - x*||^2")?;
            let (b, g, step) = (s.beta, s.gamma, s.effective_step());
            let (head, floor) = if theorem == TheoremId::CvxConst {
                (
                    b * f1_gap / (1.0 - b),
                    (3.0 * b * g / (2.0 * (1.0 - b)) + step / 2.0) * sigma_sq,
                )
            } else {
                (b * (f1_gap + g * grad1_sq / 2.0) / (1.0 - b), 0.0)
            };
            for t in 0..=t_max {
                let tf = t as f64;
                out.push(dist / (2.0 * step * tf) + head / tf + floor);
            }
        }
        TheoremId::AccelDet | TheoremId::AccelStoch => {
            let dist = need(inputs.dist1_sq, theorem, "||x1 - x*||^2")?;
            let c = if theorem == TheoremId::AccelStoch {
                Some(need(inputs.c, theorem, "C")?)
            } else {
                None
            };
            for t in 0..=t_max {
                let tf = t as f64;
                let mut v = 2.0 * (f1_gap + l * dist) / (tf * (tf + 1.0));
                if let Some(c) = c {
                    v += sigma / tf.sqrt() * (dist / c + 11.0 * c / 3.0);
                }
                out.push(v);
            }
        }
        TheoremId::CvxVary => {
            let dist = need(inputs.dist1_sq, theorem, "||x1 - x*||^2")?;
            let phi_1 = phi1(schedule, f1_gap, dist)?;
            // Θ_{t−1} Σ_{k<t} (Lγ_k² + θ_kγ̃_k)/(2Θ_k), accumulated in t.
            let mut big_theta = ThetaProduct::default();
            let mut acc = 0.0;
            out.push(f64::INFINITY);
            for t in 1..=t_max {
                let prev = big_theta.value();
                out.push(phi_1 * prev + sigma_sq * prev * acc);
                let step = schedule.step(t).ok_or(AnalysisError::ScheduleRange(t))?;
                let theta = need(step.theta, theorem, "a theta-bearing schedule")?;
                let theta_next = need(schedule.theta(t + 1), theorem, "theta_{k+1}")?;
                let cur = big_theta.advance(theta);
                let eff = gamma_tilde(&step, theta_next);
                acc += (l * step.gamma * step.gamma + theta * eff) / (2.0 * cur);
            }
        }
        TheoremId::Nc => {
            let s = need_constant(theorem, schedule)?;
            let (b, e, step) = (s.beta, s.eta, s.effective_step());
            let floor = (b * b * l * e / (1.0 + b) + l * step) * sigma_sq;
            for t in 0..=t_max {
                out.push(2.0 * f1_gap / (step * t as f64) + floor);
            }
        }
        TheoremId::Pl => {
            let s = need_constant(theorem, schedule)?;
            let mu = need(inputs.mu, theorem, "mu")?;
            let (b, e, step) = (s.beta, s.eta, s.effective_step());
            let rate = 1.0 - mu * step / 18.0;
            let floor = (3.0 * b * b * e / (1.0 + b) + step) * (9.0 * l / mu) * sigma_sq;
            let mut geo = 1.0;
            for _ in 0..=t_max {
                out.push(geo * f1_gap + floor);
                geo *= rate;
            }
        }
    }
    Ok(out)
}

/// Single right-hand-side value at `t`.
pub fn bound_rhs(
    theorem: TheoremId,
    t: usize,
    inputs: &BoundInputs,
    schedule: &Schedule,
) -> Result<f64, AnalysisError> {
    if theorem == TheoremId::Pl {
        // closed form avoids materializing the series
        let s = need_constant(theorem, schedule)?;
        let mu = need(inputs.mu, theorem, "mu")?;
        let step = s.effective_step();
        let floor = (3.0 * s.beta * s.beta * s.eta / (1.0 + s.beta) + step)
            * (9.0 * inputs.l / mu)
            * inputs.sigma
            * inputs.sigma;
        return Ok((1.0 - mu * step / 18.0).powi(t as i32) * inputs.f1_gap + floor);
    }
    Ok(bound_series(theorem, t, inputs, schedule)?[t])
}

/// The `t` at which trace row `k` is compared against the bound. The PL
/// bound at `t` concerns `w_{t+1}`, so row `k` pairs with `t = k − 1`.
pub fn row_t(theorem: TheoremId, k: usize) -> usize {
    if theorem == TheoremId::Pl {
        k - 1
    } else {
        k
    }
}

/// Right-hand side of the momentum second-moment bound for `k = 0..=n`,
/// given mean squared gradient norms `grad_sq[j−1] ≈ E‖∇f(x_j)‖²`:
/// `2(1−β) Σ_{j≤k} β^{k−j} grad_sq_j + 2(1−β)σ²/(1+β)`.
pub fn mbound_series(beta: f64, sigma: f64, grad_sq: &[f64]) -> Vec<f64> {
    let floor = 2.0 * (1.0 - beta) * sigma * sigma / (1.0 + beta);
    let mut out = Vec::with_capacity(grad_sq.len() + 1);
    out.push(floor);
    let mut acc = 0.0;
    for &g in grad_sq {
        acc = beta * acc + g;
        out.push(2.0 * (1.0 - beta) * acc + floor);
    }
    out
}

/// Settings for [`verify_trace`].
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    /// Restrict the check to these `t`; `None` checks every available `t`.
    pub at: Option<Vec<usize>>,
    /// Standard errors of slack for multi-seed means.
    pub z: f64,
    /// `f*`, needed for every gap-based theorem.
    pub f_star: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            at: None,
            z: 2.0,
            f_star: None,
        }
    }
}

/// Outcome of comparing an empirical series with a bound.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub id: String,
    pub pass: bool,
    /// Largest excess of `mean − (rhs + z·se)` over checked `t`, or 0.
    pub max_violation: f64,
    pub first_t: Option<usize>,
    pub violations: usize,
    pub checked: usize,
    /// Smallest slack `rhs + z·se − mean` and where it occurs.
    pub min_margin: f64,
    pub min_margin_t: Option<usize>,
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "THEOREM {}: {} max_violation={:e} first_t=",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.max_violation
        )?;
        match self.first_t {
            Some(t) => write!(f, "{t}"),
            None => f.write_str("none"),
        }
    }
}

/// Mean and standard error of a sample; the error is 0 for a single value.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Accumulates per-`t` comparisons into a report.
#[derive(Debug)]
pub struct Comparator {
    report: VerificationReport,
}

impl Comparator {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            report: VerificationReport {
                id: id.into(),
                pass: true,
                max_violation: 0.0,
                first_t: None,
                violations: 0,
                checked: 0,
                min_margin: f64::INFINITY,
                min_margin_t: None,
            },
        }
    }

    /// Compare `mean ≤ rhs + z·se` at `t`. NaN on either side is a violation.
    pub fn check(&mut self, t: usize, mean: f64, se: f64, rhs: f64, z: f64) {
        let r = &mut self.report;
        r.checked += 1;
        let margin = rhs + z * se - mean;
        if margin < r.min_margin || margin.is_nan() {
            r.min_margin = margin;
            r.min_margin_t = Some(t);
        }
        // NaN margins count as violations
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(margin >= 0.0) {
            r.pass = false;
            r.violations += 1;
            r.first_t.get_or_insert(t);
            let excess = if margin.is_nan() { f64::INFINITY } else { -margin };
            r.max_violation = r.max_violation.max(excess);
        }
    }

    pub fn finish(self) -> VerificationReport {
        self.report
    }
}

/// Per-trace value of the quantity a theorem bounds, indexed by `t`
/// (`None` where unavailable).
fn quantity(
    theorem: TheoremId,
    trace: &Trace,
    f_star: Option<f64>,
) -> Result<Vec<Option<f64>>, AnalysisError> {
    let rows = &trace.rows;
    let fs = || need(f_star, theorem, "f*");
    let mut q = vec![None; rows.len() + 1];
    match theorem {
        TheoremId::CvxConst | TheoremId::CvxDeter => {
            let f_star = fs()?;
            let avg = trace.f_avg.as_ref().ok_or(AnalysisError::Schema("f_avg"))?;
            for (i, v) in avg.iter().enumerate() {
                q[i + 1] = Some(v - f_star);
            }
        }
        TheoremId::CvxVary | TheoremId::AccelDet | TheoremId::AccelStoch => {
            let f_star = fs()?;
            for r in rows {
                q[r.k] = Some(r.f_y.ok_or(AnalysisError::Schema("f_y"))? - f_star);
            }
        }
        TheoremId::Nc => {
            let mut acc = 0.0;
            for r in rows {
                acc += r.grad_sq;
                q[r.k] = Some(acc / r.k as f64);
            }
        }
        TheoremId::Pl => {
            let f_star = fs()?;
            for r in rows.iter().filter(|r| r.k >= 2) {
                q[r.k - 1] = Some(r.f_w.ok_or(AnalysisError::Schema("f_w"))? - f_star);
            }
            q.pop();
        }
    }
    Ok(q)
}

/// Compare the seed mean of a theorem's quantity with its right-hand side.
///
/// Constant-parameter convex theorems use `f(x̄_t)`, time-varying ones
/// `f(y_t)`, the nonconvex theorem the running mean of `‖∇f(x_k)‖²`, and the
/// PL theorem `f(w_{t+1})`. A point fails when the mean exceeds the bound by
/// more than `z` standard errors. All traces must share `k`-indexing; the
/// check runs up to the shortest one.
pub fn verify_trace(
    traces: &[Trace],
    theorem: TheoremId,
    inputs: &BoundInputs,
    schedule: &Schedule,
    options: &VerifyOptions,
) -> Result<VerificationReport, AnalysisError> {
    if traces.is_empty() {
        return Err(AnalysisError::NoTraces);
    }
    let per_seed: Vec<Vec<Option<f64>>> = traces
        .iter()
        .map(|t| quantity(theorem, t, options.f_star))
        .collect::<Result<_, _>>()?;
    let t_max = per_seed.iter().map(|q| q.len()).min().unwrap_or(1) - 1;
    let bounds = bound_series(theorem, t_max, inputs, schedule)?;
    let ts: Vec<usize> = match &options.at {
        Some(at) => at.iter().copied().filter(|&t| t >= 1 && t <= t_max).collect(),
        None => (1..=t_max).collect(),
    };
    let mut cmp = Comparator::new(theorem.as_str());
    let mut values = Vec::with_capacity(traces.len());
    for t in ts {
        values.clear();
        values.extend(per_seed.iter().filter_map(|q| q[t]));
        if values.len() != traces.len() {
            continue;
        }
        let (mean, se) = mean_se(&values);
        cmp.check(t, mean, se, bounds[t], options.z);
    }
    Ok(cmp.finish())
}

/// Check `E‖m_k‖² ≤ 2(1−β)Σ β^{k−j} E‖∇f(x_j)‖² + 2(1−β)σ²/(1+β)` for
/// `k = 1..=k_max`, with seed means substituted for expectations.
pub fn verify_mbound(
    traces: &[Trace],
    beta: f64,
    sigma: f64,
    k_max: usize,
    z: f64,
) -> Result<VerificationReport, AnalysisError> {
    if traces.is_empty() {
        return Err(AnalysisError::NoTraces);
    }
    let len = traces.iter().map(|t| t.len()).min().unwrap_or(0).min(k_max);
    let rows: Vec<&[TraceRow]> = traces.iter().map(|t| &t.rows[..len]).collect();
    let grad_means: Vec<f64> = (0..len)
        .map(|i| rows.iter().map(|r| r[i].grad_sq).sum::<f64>() / rows.len() as f64)
        .collect();
    let bound = mbound_series(beta, sigma, &grad_means);
    let mut cmp = Comparator::new("lem-m-var");
    let mut values = Vec::with_capacity(rows.len());
    for i in 0..len {
        values.clear();
        values.extend(rows.iter().map(|r| r[i].m_sq));
        let (mean, se) = mean_se(&values);
        cmp.check(i + 1, mean, se, bound[i + 1], z);
    }
    Ok(cmp.finish())
}

/// Least-squares slope of `ln y` against `ln t` over points with `y > 0`.
/// Returns `−∞` when fewer than two positive points remain (the sequence
/// reached exactly zero).
pub fn loglog_slope(points: &[(usize, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, y)| *y > 0.0)
        .map(|&(t, y)| ((t as f64).ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NEG_INFINITY;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
