//! Parameter sequences `(β_k, γ_k, η_k, θ_k)` and precondition checks for
//! every convergence theorem.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Residual tolerance for non-strict inequalities and equalities.
pub const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("beta must lie in [0, 1), got {0}")]
    Beta(f64),
    #[error("gamma must be nonnegative and finite, got {0}")]
    Gamma(f64),
    #[error("eta must be finite, got {0}")]
    Eta(f64),
    #[error("smoothness constant must be positive, got {0}")]
    Smoothness(f64),
    #[error("gamma must lie in (0, 1/L] = (0, {max}], got {gamma}")]
    GammaRange { gamma: f64, max: f64 },
    #[error("automatic gamma needs sigma > 0 and C > 0 (got sigma={sigma}, C={c:?})")]
    AutoGamma { sigma: f64, c: Option<f64> },
    #[error("eta_{k} = 0 leaves beta_{next} undefined", next = k + 1)]
    ZeroEta { k: usize },
    #[error("horizon must be at least 1")]
    Horizon,
    #[error("theta_{k} = {theta} is outside (0, 1)")]
    Theta { k: usize, theta: f64 },
    #[error("step {k} carries no theta")]
    MissingTheta { k: usize },
    #[error("bad schedule descriptor {0:?}: {1}")]
    Descriptor(String, String),
}

/// Parameters of iteration `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleStep {
    pub k: usize,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub theta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantSchedule {
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl ConstantSchedule {
    pub fn new(beta: f64, gamma: f64, eta: f64) -> Result<Self, ScheduleError> {
        if !(0.0..1.0).contains(&beta) {
            return Err(ScheduleError::Beta(beta));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(ScheduleError::Gamma(gamma));
        }
        if !eta.is_finite() {
            return Err(ScheduleError::Eta(eta));
        }
        Ok(Self { beta, gamma, eta })
    }

    pub fn step(&self, k: usize) -> ScheduleStep {
        ScheduleStep {
            k,
            beta: self.beta,
            gamma: self.gamma,
            eta: self.eta,
            theta: None,
        }
    }

    /// `γ + η`
    pub fn effective_step(&self) -> f64 {
        self.gamma + self.eta
    }
}

/// `θ_k = 2 / (k + 2)`
pub fn accel_theta(k: usize) -> f64 {
    2.0 / (k as f64 + 2.0)
}

/// `Θ_k = 2 / ((k + 1)(k + 2))`, the closed form of `Π_{j≤k}(1 − θ_j)`.
pub fn accel_big_theta(k: usize) -> f64 {
    let k = k as f64;
    2.0 / ((k + 1.0) * (k + 2.0))
}

fn check_smoothness(l: f64) -> Result<(), ScheduleError> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(ScheduleError::Smoothness(l))
    }
}

/// Time-varying schedule with `θ_k = 2/(k+2)` and constant `γ`, for which
/// the effective step is `(k+1)Lγ²/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct AcceleratedSchedule {
    l: f64,
    gamma: f64,
    beta1: f64,
    horizon: usize,
    /// Index `k − 1` holds `η_k`, `k = 1..=horizon+1`.
    eta: Vec<f64>,
    beta: Vec<f64>,
}

impl AcceleratedSchedule {
    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Iterations `k` whose `β_k` falls outside `[0, 1)`. Not a theorem
    /// condition, only reported.
    pub fn beta_out_of_range(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| !(0.0..1.0).contains(*b))
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Closed form `(k+1)Lγ²/2` of the effective step.
    pub fn gamma_tilde_closed(&self, k: usize) -> f64 {
        (k as f64 + 1.0) * self.l * self.gamma * self.gamma / 2.0
    }
}

/// Gamma choice for the accelerated schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaChoice {
    Fixed(f64),
    /// `min{1/L, t^{−3/4} √(C/(σL))}`
    Auto,
}

/// Resolve `γ` for an accelerated schedule.
pub fn accel_gamma(
    l: f64,
    gamma: GammaChoice,
    horizon: usize,
    sigma: f64,
    c: Option<f64>,
) -> Result<f64, ScheduleError> {
    check_smoothness(l)?;
    match gamma {
        GammaChoice::Fixed(g) => {
            let max = 1.0 / l;
            if g > 0.0 && g <= max * (1.0 + 1e-12) {
                Ok(g.min(max))
            } else {
                Err(ScheduleError::GammaRange { gamma: g, max })
            }
        }
        GammaChoice::Auto => match c {
            Some(c) if sigma > 0.0 && c > 0.0 && sigma.is_finite() && c.is_finite() => {
                let t = horizon.max(1) as f64;
                Ok((1.0 / l).min(t.powf(-0.75) * (c / (sigma * l)).sqrt()))
            }
            _ => Err(ScheduleError::AutoGamma { sigma, c }),
        },
    }
}

/// Materialize the accelerated schedule for `k = 1..=horizon+1`:
/// `η₁ = (Lγ² − γ)/(2(1 − β₁))`,
/// `η_k = (k/(k+3))η_{k−1} + ((k+1)Lγ² − 2γ)/(k+3)`,
/// `β_k = kη_{k−1}/((k+3)η_k)`.
pub fn build_accelerated(
    l: f64,
    gamma: GammaChoice,
    beta1: f64,
    horizon: usize,
    sigma: f64,
    c: Option<f64>,
) -> Result<AcceleratedSchedule, ScheduleError> {
    if horizon == 0 {
        return Err(ScheduleError::Horizon);
    }
    if !(0.0..1.0).contains(&beta1) {
        return Err(ScheduleError::Beta(beta1));
    }
    let gamma = accel_gamma(l, gamma, horizon, sigma, c)?;
    let n = horizon + 1;
    // Lγ, snapped to 1 when γ = 1/L up to rounding so that η₁ is exactly 0.
    let mut lg = l * gamma;
    if (lg - 1.0).abs() <= 4.0 * f64::EPSILON {
        lg = 1.0;
    }
    let mut eta = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    eta.push(gamma * (lg - 1.0) / (2.0 * (1.0 - beta1)));
    beta.push(beta1);
    for k in 2..=n {
        let kf = k as f64;
        let prev = eta[k - 2];
        let e = kf / (kf + 3.0) * prev + gamma * ((kf + 1.0) * lg - 2.0) / (kf + 3.0);
        if e == 0.0 {
            return Err(ScheduleError::ZeroEta { k });
        }
        eta.push(e);
        beta.push(kf * prev / ((kf + 3.0) * e));
    }
    Ok(AcceleratedSchedule {
        l,
        gamma,
        beta1,
        horizon,
        eta,
        beta,
    })
}

/// Classical Nesterov schedule `x_{k+1} = y_{k+1} + ((k−1)/(k+2))(y_{k+1} − y_k)`
/// with `y_{k+1} = x_k − γ g_k`, written as G-SGDM with constant `γ_k = γ`:
/// `η₀ = 0`, `β_k = η_{k−1}/(η_{k−1} + γ)`, `η_k = ((k−1)/(k+2))(γ + η_{k−1})`.
/// `θ_k = 2/(k+2)` is attached so the accelerated diagnostics can be
/// evaluated; the coupling condition on `β` then does not hold exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct NagClassicSchedule {
    gamma: f64,
    horizon: usize,
    eta: Vec<f64>,
    beta: Vec<f64>,
}

impl NagClassicSchedule {
    pub fn new(gamma: f64, horizon: usize) -> Result<Self, ScheduleError> {
        if horizon == 0 {
            return Err(ScheduleError::Horizon);
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(ScheduleError::Gamma(gamma));
        }
        let n = horizon + 1;
        let mut eta = Vec::with_capacity(n);
        let mut beta = Vec::with_capacity(n);
        let mut prev = 0.0;
        for k in 1..=n {
            let kf = k as f64;
            beta.push(prev / (prev + gamma));
            prev = (kf - 1.0) / (kf + 2.0) * (gamma + prev);
            eta.push(prev);
        }
        Ok(Self {
            gamma,
            horizon,
            eta,
            beta,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Momentum coefficient `(k−1)/(k+2)` of the native form.
    pub fn native_momentum(k: usize) -> f64 {
        (k as f64 - 1.0) / (k as f64 + 2.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Constant(ConstantSchedule),
    Accelerated(AcceleratedSchedule),
    NagClassic(NagClassicSchedule),
}

impl Schedule {
    /// Parameters of iteration `k`; `None` past the materialized range.
    pub fn step(&self, k: usize) -> Option<ScheduleStep> {
        if k == 0 {
            return None;
        }
        match self {
            Schedule::Constant(s) => Some(s.step(k)),
            Schedule::Accelerated(s) => Some(ScheduleStep {
                k,
                beta: *s.beta.get(k - 1)?,
                gamma: s.gamma,
                eta: s.eta[k - 1],
                theta: Some(accel_theta(k)),
            }),
            Schedule::NagClassic(s) => Some(ScheduleStep {
                k,
                beta: *s.beta.get(k - 1)?,
                gamma: s.gamma,
                eta: s.eta[k - 1],
                theta: Some(accel_theta(k)),
            }),
        }
    }

    /// `θ_k`, defined for every `k ≥ 1` on θ-bearing schedules.
    pub fn theta(&self, k: usize) -> Option<f64> {
        match self {
            Schedule::Constant(_) => None,
            _ => Some(accel_theta(k)),
        }
    }

    pub fn has_theta(&self) -> bool {
        !matches!(self, Schedule::Constant(_))
    }

    pub fn as_constant(&self) -> Option<&ConstantSchedule> {
        match self {
            Schedule::Constant(s) => Some(s),
            _ => None,
        }
    }

    /// Steps `1..=n`, stopping early at the end of the materialized range.
    pub fn steps(&self, n: usize) -> Vec<ScheduleStep> {
        (1..=n).map_while(|k| self.step(k)).collect()
    }

    /// `γ̃_k = γ_k + ((1 − β_k)/θ_{k+1})η_k`.
    pub fn gamma_tilde(&self, k: usize) -> Option<f64> {
        let step = self.step(k)?;
        Some(gamma_tilde(&step, self.theta(k + 1)?))
    }
}

pub fn gamma_tilde(step: &ScheduleStep, theta_next: f64) -> f64 {
    step.gamma + (1.0 - step.beta) / theta_next * step.eta
}

/// Theorem identifiers, as used on the command line and in reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TheoremId {
    /// Constant parameters, stochastic convex: ergodic gap bound.
    CvxConst,
    /// Constant parameters, deterministic convex.
    CvxDeter,
    /// Time-varying parameters, general rate `Φ₁Θ_{t−1} + σ²Σ…`.
    CvxVary,
    /// Accelerated schedule, deterministic `O(1/t²)`.
    AccelDet,
    /// Accelerated schedule with automatic `γ`, stochastic `O(1/√t)`.
    AccelStoch,
    /// Nonconvex average squared gradient norm.
    Nc,
    /// PL linear rate to a noise floor.
    Pl,
}

impl TheoremId {
    pub const ALL: [TheoremId; 7] = [
        TheoremId::CvxConst,
        TheoremId::CvxDeter,
        TheoremId::CvxVary,
        TheoremId::AccelDet,
        TheoremId::AccelStoch,
        TheoremId::Nc,
        TheoremId::Pl,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremId::CvxConst => "thm-cvx-const",
            TheoremId::CvxDeter => "thm-cvx-deter",
            TheoremId::CvxVary => "thm-cvx-vary",
            TheoremId::AccelDet => "thm-accel-det",
            TheoremId::AccelStoch => "thm-accel-stoch",
            TheoremId::Nc => "thm-nc",
            TheoremId::Pl => "thm-pl",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            TheoremId::CvxConst
                | TheoremId::CvxVary
                | TheoremId::AccelStoch
                | TheoremId::Nc
                | TheoremId::Pl
        )
    }

    pub fn needs_theta(&self) -> bool {
        matches!(
            self,
            TheoremId::CvxVary | TheoremId::AccelDet | TheoremId::AccelStoch
        )
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown theorem id {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `residual ≥ −tol`
    Ge,
    /// `residual > 0`, no tolerance
    Gt,
    /// `|residual| ≤ tol`
    Eq,
}

impl Relation {
    pub fn holds(self, residual: f64) -> bool {
        match self {
            Relation::Ge => residual >= -RESIDUAL_TOL,
            Relation::Gt => residual > 0.0,
            Relation::Eq => residual.abs() <= RESIDUAL_TOL,
        }
    }
}

/// One checked condition. For `k`-indexed conditions `value` is the worst
/// residual over all checked `k`, attained at `at_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionResidual {
    pub name: &'static str,
    pub relation: Relation,
    pub value: f64,
    pub at_k: Option<usize>,
    pub first_fail_k: Option<usize>,
    pub pass: bool,
}

impl ConditionResidual {
    fn scalar(name: &'static str, relation: Relation, value: f64) -> Self {
        Self {
            name,
            relation,
            value,
            at_k: None,
            first_fail_k: None,
            pass: relation.holds(value),
        }
    }
}

/// Per-`k` residuals of the time-varying conditions. `None` where the
/// condition is not checked at that `k`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TimeVaryingResiduals {
    pub k: usize,
    pub cond_beta: Option<f64>,
    pub lr0: Option<f64>,
    pub lr1: Option<f64>,
    pub lr2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub theorem: TheoremId,
    pub pass: bool,
    pub residuals: Vec<ConditionResidual>,
    pub first_fail_k: Option<usize>,
    pub per_k: Vec<TimeVaryingResiduals>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    fn from_residuals(theorem: TheoremId, residuals: Vec<ConditionResidual>) -> Self {
        let pass = residuals.iter().all(|r| r.pass);
        let first_fail_k = residuals.iter().filter_map(|r| r.first_fail_k).min();
        Self {
            theorem,
            pass,
            residuals,
            first_fail_k,
            per_k: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn residual(&self, name: &str) -> Option<&ConditionResidual> {
        self.residuals.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "VALIDATE {}: {}",
            self.theorem,
            if self.pass { "PASS" } else { "FAIL" }
        )?;
        for r in &self.residuals {
            write!(f, " {}={:.3e}", r.name, r.value)?;
            if let Some(k) = r.first_fail_k {
                write!(f, "@k={k}")?;
            }
        }
        for note in &self.notes {
            write!(f, "\n  note: {note}")?;
        }
        Ok(())
    }
}

/// Step-size region of the constant-parameter convex theorems.
///
/// Stochastic: `γ ≤ 1/L` and `0 < γ + η ≤ 1/L`. Deterministic: `γ ≤ 1/L` and
/// `−γ < η ≤ 1/L + γ(2β − 1)/(1 − β)`.
pub fn validate_convex_constant(
    s: &ConstantSchedule,
    l: f64,
    deterministic: bool,
) -> Result<ValidationReport, ScheduleError> {
    check_smoothness(l)?;
    let inv_l = 1.0 / l;
    let (g, e, b) = (s.gamma, s.eta, s.beta);
    let residuals = if deterministic {
        vec![
            ConditionResidual::scalar("gamma_le_inv_l", Relation::Ge, inv_l - g),
            ConditionResidual::scalar("eta_gt_neg_gamma", Relation::Gt, e + g),
            ConditionResidual::scalar(
                "eta_le_upper",
                Relation::Ge,
                inv_l + g * (2.0 * b - 1.0) / (1.0 - b) - e,
            ),
        ]
    } else {
        vec![
            ConditionResidual::scalar("gamma_le_inv_l", Relation::Ge, inv_l - g),
            ConditionResidual::scalar("step_positive", Relation::Gt, g + e),
            ConditionResidual::scalar("step_le_inv_l", Relation::Ge, inv_l - (g + e)),
        ]
    };
    let theorem = if deterministic {
        TheoremId::CvxDeter
    } else {
        TheoremId::CvxConst
    };
    Ok(ValidationReport::from_residuals(theorem, residuals))
}

/// Upper bound on `γ + η` for the nonconvex (`pl = false`) or PL theorem.
pub fn nonconvex_step_bound(beta: f64, l: f64, pl: bool) -> f64 {
    if pl {
        let second = if beta == 0.0 {
            f64::INFINITY
        } else {
            (1.0 - beta) / (8.0 * beta * beta * l)
        };
        ((1.0 - beta) / (2.0 * l)).min(second)
    } else {
        (1.0 - beta) / (3.0 * l)
    }
}

/// Step bound of the nonconvex theorem (`0 < γ+η ≤ (1−β)/(3L)`) or the PL
/// theorem (`0 < γ+η ≤ min{(1−β)/(2L), (1−β)/(8β²L)}`); both need `η > 0`.
pub fn validate_nonconvex(
    s: &ConstantSchedule,
    l: f64,
    pl: bool,
) -> Result<ValidationReport, ScheduleError> {
    check_smoothness(l)?;
    let step = s.effective_step();
    let bound = nonconvex_step_bound(s.beta, l, pl);
    let residuals = vec![
        ConditionResidual::scalar("eta_positive", Relation::Gt, s.eta),
        ConditionResidual::scalar("step_positive", Relation::Gt, step),
        ConditionResidual::scalar("step_le_bound", Relation::Ge, bound - step),
    ];
    let theorem = if pl { TheoremId::Pl } else { TheoremId::Nc };
    Ok(ValidationReport::from_residuals(theorem, residuals))
}

struct Worst {
    name: &'static str,
    relation: Relation,
    value: f64,
    at_k: Option<usize>,
    first_fail_k: Option<usize>,
}

impl Worst {
    fn new(name: &'static str, relation: Relation) -> Self {
        Self {
            name,
            relation,
            value: f64::INFINITY,
            at_k: None,
            first_fail_k: None,
        }
    }

    fn push(&mut self, k: usize, r: f64) {
        let badness = match self.relation {
            Relation::Eq => -r.abs(),
            _ => r,
        };
        let current = match self.relation {
            Relation::Eq => -self.value.abs(),
            _ => self.value,
        };
        if self.at_k.is_none() || badness < current || r.is_nan() {
            self.value = r;
            self.at_k = Some(k);
        }
        if self.first_fail_k.is_none() && !self.relation.holds(r) {
            self.first_fail_k = Some(k);
        }
    }

    fn finish(self) -> ConditionResidual {
        let pass = self.first_fail_k.is_none();
        ConditionResidual {
            name: self.name,
            relation: self.relation,
            value: if self.at_k.is_some() { self.value } else { 0.0 },
            at_k: self.at_k,
            first_fail_k: self.first_fail_k,
            pass,
        }
    }
}

/// Residual of `β_k η_k / η_{k−1} = θ_{k+1}(1/θ_k − 1)`, normalized by
/// `|η_{k−1}|` (absolute when `η_{k−1} = 0`).
fn cond_beta_residual(cur: &ScheduleStep, prev: &ScheduleStep, theta_k: f64, theta_next: f64) -> f64 {
    let target = theta_next * (1.0 / theta_k - 1.0);
    let diff = cur.beta * cur.eta - target * prev.eta;
    if prev.eta == 0.0 {
        diff
    } else {
        diff / prev.eta.abs()
    }
}

/// `|θγ + (1−β)η|` over the magnitudes of its terms. With `β_k → 1` the
/// denominator cancels large terms and inherits their rounding, so lr-2 is
/// measured against this scale rather than the bare result.
fn conditioning(den: f64, theta: f64, s: &ScheduleStep) -> f64 {
    let mag = theta * s.gamma.abs() + s.eta.abs() + (s.beta * s.eta).abs();
    if mag > 0.0 {
        (den.abs() / mag).min(1.0)
    } else {
        1.0
    }
}

/// `a / b` with `0/0 = 0` and `x/0 = ±∞`.
fn ratio(a: f64, b: f64) -> f64 {
    if b != 0.0 {
        a / b
    } else if a == 0.0 {
        0.0
    } else {
        a.signum() * f64::INFINITY
    }
}

/// Check the time-varying conditions on `steps` for `k = 1..=t+1` (so the
/// horizon is `t = steps.len() − 1`):
/// coupling `β_kη_k/η_{k−1} = θ_{k+1}(1/θ_k − 1)` for `2 ≤ k ≤ t−1`,
/// `γ̃_k > 0`, `2 − Lγ_k − θ_k(1−β_k)η_k/(θ_{k+1}γ_k) − θ_k ≥ 0`, and
/// `θ_k/(θ_{k+1}γ_k + (1−β_k)η_k) ≥ θ_{k+2}/((1−θ_{k+1})(θ_{k+2}γ_{k+1} + (1−β_{k+1})η_{k+1}))`
/// for `k ≤ t−1`. The last residual is relative to the left-hand side and
/// scaled by the conditioning of the two denominators.
pub fn validate_timevarying(
    steps: &[ScheduleStep],
    l: f64,
) -> Result<ValidationReport, ScheduleError> {
    check_smoothness(l)?;
    let mut thetas = Vec::with_capacity(steps.len());
    for s in steps {
        let theta = s.theta.ok_or(ScheduleError::MissingTheta { k: s.k })?;
        if !(theta > 0.0 && theta < 1.0) {
            return Err(ScheduleError::Theta { k: s.k, theta });
        }
        thetas.push(theta);
    }
    let t = steps.len().saturating_sub(1);
    // θ_{k+2} at k = t−1 is θ_{t+1}; tolerate a schedule one short by
    // skipping the final lr-2 check rather than reading past the end.
    let theta = |k: usize| thetas[k - 1];
    let mut cond_beta = Worst::new("cond_beta", Relation::Eq);
    let mut lr0 = Worst::new("lr0", Relation::Gt);
    let mut lr1 = Worst::new("lr1", Relation::Ge);
    let mut lr2 = Worst::new("lr2", Relation::Ge);
    let mut per_k = Vec::with_capacity(t.saturating_sub(1));
    for k in 1..t {
        let s = &steps[k - 1];
        let next = &steps[k];
        let (th, th1) = (theta(k), theta(k + 1));
        let mut row = TimeVaryingResiduals {
            k,
            ..Default::default()
        };
        if k >= 2 {
            let r = cond_beta_residual(s, &steps[k - 2], th, th1);
            cond_beta.push(k, r);
            row.cond_beta = Some(r);
        }
        let eff = gamma_tilde(s, th1);
        lr0.push(k, eff);
        row.lr0 = Some(eff);

        let r1 = 2.0 - l * s.gamma - th * ratio((1.0 - s.beta) * s.eta, th1 * s.gamma) - th;
        lr1.push(k, r1);
        row.lr1 = Some(r1);

        if k + 2 <= steps.len() {
            let th2 = theta(k + 2);
            let den_l = th1 * s.gamma + (1.0 - s.beta) * s.eta;
            let den_r = th2 * next.gamma + (1.0 - next.beta) * next.eta;
            let lhs = ratio(th, den_l);
            let rhs = ratio(th2, (1.0 - th1) * den_r);
            let r2 = if lhs.is_finite() && lhs != 0.0 {
                (lhs - rhs) / lhs.abs() * conditioning(den_l, th1, s).min(conditioning(den_r, th2, next))
            } else {
                lhs - rhs
            };
            lr2.push(k, r2);
            row.lr2 = Some(r2);
        }
        per_k.push(row);
    }
    let residuals = vec![cond_beta.finish(), lr0.finish(), lr1.finish(), lr2.finish()];
    let mut report = ValidationReport::from_residuals(TheoremId::CvxVary, residuals);
    report.per_k = per_k;
    let out: Vec<usize> = steps
        .iter()
        .filter(|s| !(0.0..1.0).contains(&s.beta))
        .map(|s| s.k)
        .collect();
    if !out.is_empty() {
        report.notes.push(format!(
            "beta_k outside [0,1) at {} iterations (first k={})",
            out.len(),
            out[0]
        ));
    }
    Ok(report)
}

/// Validate a schedule against a theorem's preconditions. `horizon` bounds
/// the time-varying checks.
pub fn validate_for(
    theorem: TheoremId,
    schedule: &Schedule,
    l: f64,
    horizon: usize,
) -> Result<ValidationReport, ScheduleError> {
    match (theorem, schedule) {
        (TheoremId::CvxConst, Schedule::Constant(s)) => validate_convex_constant(s, l, false),
        (TheoremId::CvxDeter, Schedule::Constant(s)) => validate_convex_constant(s, l, true),
        (TheoremId::Nc, Schedule::Constant(s)) => validate_nonconvex(s, l, false),
        (TheoremId::Pl, Schedule::Constant(s)) => validate_nonconvex(s, l, true),
        (t, s) if t.needs_theta() && s.has_theta() => {
            let mut report = validate_timevarying(&schedule.steps(horizon + 1), l)?;
            report.theorem = t;
            Ok(report)
        }
        (t, _) => {
            let mut report = ValidationReport::from_residuals(t, Vec::new());
            report.pass = false;
            report
                .notes
                .push(format!("{t} does not apply to this kind of schedule"));
            Ok(report)
        }
    }
}

/// Keys of a `const:` descriptor. Which keys are meaningful depends on the
/// method the schedule is paired with.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConstParams {
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub s: Option<f64>,
    pub nu: Option<f64>,
    pub lambda: Option<f64>,
}

/// Parsed schedule descriptor:
/// `const:beta=…,gamma=…,eta=…` (also `alpha`, `s`, `nu`, `lambda`),
/// `accel:gamma=auto|<v>,beta1=…,C=…`, or `nag-classic:gamma=…`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScheduleDescriptor {
    Const(ConstParams),
    Accel {
        gamma: GammaChoice,
        beta1: f64,
        c: Option<f64>,
    },
    NagClassic {
        gamma: f64,
    },
}

/// Default `β₁` of the accelerated schedule when the descriptor omits it.
pub const DEFAULT_BETA1: f64 = 0.9;

fn parse_pairs(text: &str, body: &str) -> Result<Vec<(String, String)>, ScheduleError> {
    let bad = |why: String| ScheduleError::Descriptor(text.to_string(), why);
    let mut out: Vec<(String, String)> = Vec::new();
    for part in body.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, got {part:?}")))?;
        let k = k.trim().to_string();
        if out.iter().any(|(seen, _)| *seen == k) {
            return Err(bad(format!("duplicate key {k:?}")));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

fn parse_num(text: &str, key: &str, v: &str) -> Result<f64, ScheduleError> {
    let x: f64 = v.parse().map_err(|_| {
        ScheduleError::Descriptor(text.to_string(), format!("{key}={v:?} is not a number"))
    })?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ScheduleError::Descriptor(
            text.to_string(),
            format!("{key} must be finite"),
        ))
    }
}

impl FromStr for ScheduleDescriptor {
    type Err = ScheduleError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| ScheduleError::Descriptor(text.to_string(), why.to_string());
        let (kind, body) = text.split_once(':').unwrap_or((text, ""));
        let pairs = parse_pairs(text, body)?;
        match kind {
            "const" => {
                let mut p = ConstParams::default();
                for (k, v) in &pairs {
                    let x = Some(parse_num(text, k, v)?);
                    match k.as_str() {
                        "beta" => p.beta = x,
                        "gamma" => p.gamma = x,
                        "eta" => p.eta = x,
                        "alpha" => p.alpha = x,
                        "s" => p.s = x,
                        "nu" => p.nu = x,
                        "lambda" => p.lambda = x,
                        other => return Err(bad(&format!("unknown key {other:?}"))),
                    }
                }
                Ok(ScheduleDescriptor::Const(p))
            }
            "accel" => {
                let mut gamma = None;
                let mut beta1 = DEFAULT_BETA1;
                let mut c = None;
                for (k, v) in &pairs {
                    match k.as_str() {
                        "gamma" if v == "auto" => gamma = Some(GammaChoice::Auto),
                        "gamma" => gamma = Some(GammaChoice::Fixed(parse_num(text, k, v)?)),
                        "beta1" => beta1 = parse_num(text, k, v)?,
                        "C" => c = Some(parse_num(text, k, v)?),
                        other => return Err(bad(&format!("unknown key {other:?}"))),
                    }
                }
                let gamma = gamma.ok_or_else(|| bad("accel needs gamma=auto or gamma=<value>"))?;
                Ok(ScheduleDescriptor::Accel { gamma, beta1, c })
            }
            "nag-classic" => {
                let mut gamma = None;
                for (k, v) in &pairs {
                    match k.as_str() {
                        "gamma" => gamma = Some(parse_num(text, k, v)?),
                        other => return Err(bad(&format!("unknown key {other:?}"))),
                    }
                }
                let gamma = gamma.ok_or_else(|| bad("nag-classic needs gamma"))?;
                Ok(ScheduleDescriptor::NagClassic { gamma })
            }
            _ => Err(bad("expected const:, accel: or nag-classic:")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn accel(l: f64, gamma: f64, beta1: f64, horizon: usize) -> AcceleratedSchedule {
        build_accelerated(l, GammaChoice::Fixed(gamma), beta1, horizon, 0.0, None).unwrap()
    }

    #[test]
    fn accelerated_first_terms() {
        let s = Schedule::Accelerated(accel(1.0, 1.0, 0.9, 10));
        let s1 = s.step(1).unwrap();
        let s2 = s.step(2).unwrap();
        assert_eq!(s1.eta, 0.0);
        assert_eq!(s1.beta, 0.9);
        assert!((s2.eta - 0.2).abs() < 1e-15);
        assert_eq!(s2.beta, 0.0);
        assert_eq!(s1.theta, Some(2.0 / 3.0));
        assert_eq!(s2.theta, Some(0.5));
    }

    #[test]
    fn effective_step_closed_form_unit_l() {
        let a = accel(1.0, 1.0, 0.9, 1000);
        let s = Schedule::Accelerated(a.clone());
        for k in 1..=1000 {
            let eff = s.gamma_tilde(k).unwrap();
            let want = (k as f64 + 1.0) / 2.0;
            assert!((eff - want).abs() <= 1e-12 * want, "k={k}: {eff} vs {want}");
            assert_eq!(a.gamma_tilde_closed(k), want);
        }
    }

    #[test]
    fn accelerated_rejects_bad_gamma() {
        assert!(matches!(
            build_accelerated(1.0, GammaChoice::Fixed(1.5), 0.9, 10, 0.0, None),
            Err(ScheduleError::GammaRange { .. })
        ));
        assert!(matches!(
            build_accelerated(1.0, GammaChoice::Fixed(0.0), 0.9, 10, 0.0, None),
            Err(ScheduleError::GammaRange { .. })
        ));
        assert!(matches!(
            build_accelerated(1.0, GammaChoice::Auto, 0.9, 10, 0.0, Some(1.0)),
            Err(ScheduleError::AutoGamma { .. })
        ));
        assert!(matches!(
            build_accelerated(1.0, GammaChoice::Auto, 0.9, 10, 1.0, None),
            Err(ScheduleError::AutoGamma { .. })
        ));
    }

    #[test]
    fn auto_gamma_selector() {
        // t^{-3/4} sqrt(C/(σL)) = 10^{-3} sqrt(1/1) when t = 10^4
        let g = accel_gamma(1.0, GammaChoice::Auto, 10_000, 1.0, Some(1.0)).unwrap();
        assert!((g - 1e-3).abs() < 1e-15);
        let g = accel_gamma(1.0, GammaChoice::Auto, 1, 1.0, Some(4.0)).unwrap();
        assert_eq!(g, 1.0);
    }

    #[test]
    fn unit_gamma_passes_with_lr2_equalities() {
        let s = Schedule::Accelerated(accel(1.0, 1.0, 0.9, 100_000));
        let report = validate_timevarying(&s.steps(100_001), 1.0).unwrap();
        assert!(report.pass, "{report}");
        for row in &report.per_k {
            if let Some(r) = row.lr2 {
                assert!(r.abs() <= 1e-12, "k={}: lr2 residual {r}", row.k);
            }
        }
    }

    #[test]
    fn lr1_residual_at_inverse_l() {
        let l = 4.0;
        let s = Schedule::Accelerated(accel(l, 1.0 / l, 0.9, 500));
        let report = validate_timevarying(&s.steps(501), l).unwrap();
        assert!(report.pass, "{report}");
        for row in &report.per_k {
            let k = row.k as f64;
            let want = 1.0 - (k + 1.0) / (k + 2.0);
            assert!((row.lr1.unwrap() - want).abs() < 1e-12, "k={}", row.k);
        }
    }

    #[test]
    fn classical_nesterov_with_constant_eta_breaks_coupling() {
        let steps: Vec<ScheduleStep> = (1..=50)
            .map(|k| ScheduleStep {
                k,
                beta: (k as f64 - 1.0) / (k as f64 + 2.0),
                gamma: 0.1,
                eta: 0.5,
                theta: Some(accel_theta(k)),
            })
            .collect();
        let report = validate_timevarying(&steps, 1.0).unwrap();
        for row in report.per_k.iter().filter(|r| r.k >= 2) {
            let k = row.k as f64;
            let want = (k - 1.0) / (k + 2.0) - k / (k + 3.0);
            assert!((row.cond_beta.unwrap() - want).abs() < 1e-14);
        }
        assert!(!report.pass);
        assert_eq!(report.residual("cond_beta").unwrap().first_fail_k, Some(2));
    }

    #[test]
    fn nag_classic_embedding_residual() {
        let s = Schedule::NagClassic(NagClassicSchedule::new(0.1, 100).unwrap());
        let report = validate_timevarying(&s.steps(101), 10.0).unwrap();
        // η₁ = 0, so k = 2 falls back to the absolute form β₂η₂ = 0.
        assert_eq!(report.per_k[1].cond_beta, Some(0.0));
        for row in report.per_k.iter().filter(|r| r.k >= 3) {
            let k = row.k as f64;
            let want = -3.0 / ((k + 2.0) * (k + 3.0));
            let r = row.cond_beta.unwrap();
            assert!((r - want).abs() < 1e-13, "k={}: {r} vs {want}", row.k);
        }
        assert!(!report.pass);
        // momentum coefficient of the native form
        for k in 2..=100 {
            let cur = s.step(k).unwrap();
            let prev = s.step(k - 1).unwrap();
            if prev.eta != 0.0 {
                let c = cur.beta * cur.eta / prev.eta;
                assert!((c - NagClassicSchedule::native_momentum(k)).abs() < 1e-14);
            }
            assert!((cur.gamma + 0.0 - 0.1).abs() < 1e-18);
        }
    }

    #[test]
    fn theta_out_of_range_is_an_error() {
        let steps = vec![ScheduleStep {
            k: 1,
            beta: 0.0,
            gamma: 1.0,
            eta: 0.0,
            theta: Some(1.0),
        }];
        assert!(matches!(
            validate_timevarying(&steps, 1.0),
            Err(ScheduleError::Theta { k: 1, .. })
        ));
    }

    #[test]
    fn convex_constant_examples() {
        let s = ConstantSchedule::new(0.9, 1.0, 1.0).unwrap();
        let det = validate_convex_constant(&s, 1.0, true).unwrap();
        assert!(det.pass);
        assert!((det.residual("eta_le_upper").unwrap().value - 8.0).abs() < 1e-12);

        let s = ConstantSchedule::new(0.0, 0.5, 0.6).unwrap();
        let sto = validate_convex_constant(&s, 1.0, false).unwrap();
        assert!(!sto.pass);
        assert!((sto.residual("step_le_inv_l").unwrap().value + 0.1).abs() < 1e-12);

        let gd = ConstantSchedule::new(0.0, 0.0, 1.0).unwrap();
        assert!(validate_convex_constant(&gd, 1.0, false).unwrap().pass);
        assert!(validate_convex_constant(&gd, 1.0, true).unwrap().pass);
    }

    #[test]
    fn strict_conditions_reject_zero_step() {
        let s = ConstantSchedule::new(0.5, 0.0, 0.0).unwrap();
        let r = validate_convex_constant(&s, 1.0, false).unwrap();
        assert!(!r.pass);
        assert!(!r.residual("step_positive").unwrap().pass);
    }

    #[test]
    fn nonconvex_examples() {
        let s = ConstantSchedule::new(0.9, 0.0, 0.03).unwrap();
        assert!(validate_nonconvex(&s, 1.0, false).unwrap().pass);
        let s = ConstantSchedule::new(0.5, 0.01, 0.01).unwrap();
        assert!(validate_nonconvex(&s, 1.0, true).unwrap().pass);
        assert_eq!(nonconvex_step_bound(0.5, 1.0, true), 0.25);
        let s = ConstantSchedule::new(0.0, 0.0, 0.5).unwrap();
        let r = validate_nonconvex(&s, 1.0, true).unwrap();
        assert!(r.pass);
        assert_eq!(r.residual("step_le_bound").unwrap().value, 0.0);
        let s = ConstantSchedule::new(0.9, 0.03, 0.0).unwrap();
        assert!(!validate_nonconvex(&s, 1.0, false).unwrap().pass);
    }

    #[test]
    fn constant_schedule_ranges() {
        assert_eq!(ConstantSchedule::new(1.0, 0.0, 0.1), Err(ScheduleError::Beta(1.0)));
        assert_eq!(ConstantSchedule::new(0.5, -0.1, 0.1), Err(ScheduleError::Gamma(-0.1)));
        assert!(ConstantSchedule::new(0.5, 0.1, -0.05).is_ok());
    }

    #[test]
    fn descriptor_grammar() {
        let d: ScheduleDescriptor = "const:beta=0.9,gamma=0.01,eta=0.09".parse().unwrap();
        assert_eq!(
            d,
            ScheduleDescriptor::Const(ConstParams {
                beta: Some(0.9),
                gamma: Some(0.01),
                eta: Some(0.09),
                ..Default::default()
            })
        );
        let d: ScheduleDescriptor = "accel:gamma=auto,beta1=0.9,C=1.0".parse().unwrap();
        assert_eq!(
            d,
            ScheduleDescriptor::Accel {
                gamma: GammaChoice::Auto,
                beta1: 0.9,
                c: Some(1.0)
            }
        );
        let d: ScheduleDescriptor = "nag-classic:gamma=0.01".parse().unwrap();
        assert_eq!(d, ScheduleDescriptor::NagClassic { gamma: 0.01 });
        for bad in [
            "const:beta",
            "const:foo=1",
            "const:beta=x",
            "accel:beta1=0.5",
            "nag-classic:",
            "linear:beta=1",
            "const:beta=0.1,beta=0.2",
        ] {
            assert!(bad.parse::<ScheduleDescriptor>().is_err(), "{bad}");
        }
    }

    #[test]
    fn theorem_ids_round_trip() {
        for t in TheoremId::ALL {
            assert_eq!(t.as_str().parse::<TheoremId>().unwrap(), t);
        }
        assert!("thm-foo".parse::<TheoremId>().is_err());
    }

    #[test]
    fn inverse_l_schedule_over_a_million_steps() {
        let a = accel(1.0, 1.0, 0.9, 1_000_000);
        assert!(a.beta_out_of_range().is_empty());
        let s = Schedule::Accelerated(a);
        for k in 2..=1_000_000 {
            assert!(s.step(k).unwrap().eta > 0.0, "k={k}");
        }
    }

    proptest! {
        #[test]
        fn built_schedules_satisfy_identities(
            l in 0.1f64..100.0,
            lg in 0.05f64..=1.0,
            beta1 in 0.0f64..0.99,
        ) {
            let gamma = lg / l;
            let a = accel(l, gamma, beta1, 2000);
            let s = Schedule::Accelerated(a.clone());
            let report = validate_timevarying(&s.steps(2001), l).unwrap();
            let cb = report.residual("cond_beta").unwrap();
            prop_assert!(cb.value.abs() < 1e-12, "cond_beta {}", cb.value);
            for k in 1..=2000 {
                let eff = s.gamma_tilde(k).unwrap();
                let want = a.gamma_tilde_closed(k);
                prop_assert!((eff - want).abs() <= 1e-12 * want, "k={} {} vs {}", k, eff, want);
            }
        }

        #[test]
        fn inverse_l_gives_admissible_betas(l in 0.1f64..100.0, beta1 in 0.0f64..0.99) {
            let a = accel(l, 1.0 / l, beta1, 5000);
            prop_assert!(a.beta_out_of_range().is_empty());
            let s = Schedule::Accelerated(a);
            for k in 2..=5000 {
                prop_assert!(s.step(k).unwrap().eta > 0.0);
            }
        }
    }
}
