//! The G-SGDM stepper and online maintenance of the auxiliary sequences.
//!
//! ```text
//! m_k     = β_k m_{k−1} + (1 − β_k) g_k
//! x_{k+1} = x_k − γ_k g_k − η_k m_k
//! ```
//! with `m_0 = 0`.

use thiserror::Error;

use crate::analysis::{
    bound_series, row_t, AnalysisError, BoundInputs, GeometricSum, PhiTracker, PlConstants,
};
use crate::problems::{sample_gradient, NoiseModel, Problem, ProblemError};
use crate::rng::RngStream;
use crate::schedules::{gamma_tilde, ConstantSchedule, Schedule, ScheduleStep, TheoremId};
use crate::trace::{Trace, TraceRow};
use crate::vector::{all_finite, axpy, dist_sq, norm, norm_sq};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("state is at k={state} but step is for k={step}")]
    StepIndex { state: usize, step: usize },
    #[error("schedule has no parameters for k={0}")]
    ScheduleRange(usize),
    #[error("{0}")]
    Tracker(&'static str),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Iterate `x_k` with the momentum `m_{k−1}` and the look-ahead `y_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunState {
    pub k: usize,
    pub x: Vec<f64>,
    pub m_prev: Vec<f64>,
    pub g_prev: Option<Vec<f64>>,
    /// `y_k = x_{k−1} − γ_{k−1} g_{k−1}`, `y_1 = x_1`.
    pub y: Vec<f64>,
}

impl RunState {
    pub fn new(x1: Vec<f64>) -> Self {
        let d = x1.len();
        Self {
            k: 1,
            y: x1.clone(),
            x: x1,
            m_prev: vec![0.0; d],
            g_prev: None,
        }
    }
}

/// One G-SGDM step from `x_k` to `x_{k+1}`.
pub fn gsgdm_step(state: &mut RunState, step: &ScheduleStep, g: &[f64]) -> Result<(), EngineError> {
    if state.k != step.k {
        return Err(EngineError::StepIndex {
            state: state.k,
            step: step.k,
        });
    }
    if g.len() != state.x.len() {
        return Err(EngineError::Dimension {
            expected: state.x.len(),
            got: g.len(),
        });
    }
    let (b, gamma, eta) = (step.beta, step.gamma, step.eta);
    for ((m, yi), (xi, gi)) in state
        .m_prev
        .iter_mut()
        .zip(state.y.iter_mut())
        .zip(state.x.iter_mut().zip(g))
    {
        *m = b * *m + (1.0 - b) * gi;
        *yi = *xi - gamma * gi;
        *xi = *xi - gamma * gi - eta * *m;
    }
    match &mut state.g_prev {
        Some(prev) => prev.copy_from_slice(g),
        None => state.g_prev = Some(g.to_vec()),
    }
    state.k += 1;
    Ok(())
}

/// `w_k = x_k − (βη/(1−β)) m_{k−1}`; equals `x₁` at `k = 1` since `m_0 = 0`.
pub fn update_w(state: &RunState, s: &ConstantSchedule) -> Vec<f64> {
    let mut w = state.x.clone();
    axpy(-s.beta * s.eta / (1.0 - s.beta), &state.m_prev, &mut w);
    w
}

/// `w_k = (x_k − βx_{k−1} + βγg_{k−1})/(1−β)` for `k ≥ 2`, `x₁` otherwise.
pub fn w_direct(
    x_k: &[f64],
    prev: Option<(&[f64], &[f64])>,
    s: &ConstantSchedule,
) -> Vec<f64> {
    let Some((x_prev, g_prev)) = prev else {
        return x_k.to_vec();
    };
    let b = s.beta;
    x_k.iter()
        .zip(x_prev)
        .zip(g_prev)
        .map(|((x, xp), gp)| (x - b * xp + b * s.gamma * gp) / (1.0 - b))
        .collect()
}

/// `(v_k, y_k)` with `v_k = x_k + (1/θ_k − 1)(x_k − y_k)`; both equal `x₁` at
/// `k = 1`.
pub fn update_v_y(state: &RunState, theta_k: f64) -> (Vec<f64>, Vec<f64>) {
    if state.k == 1 {
        return (state.x.clone(), state.x.clone());
    }
    let c = 1.0 / theta_k - 1.0;
    let v = state
        .x
        .iter()
        .zip(&state.y)
        .map(|(x, y)| x + c * (x - y))
        .collect();
    (v, state.y.clone())
}

/// `v_k = (x_k − (1−θ_k)x_{k−1} + (1−θ_k)γ_{k−1}g_{k−1})/θ_k` for `k ≥ 2`.
pub fn v_direct(
    x_k: &[f64],
    x_prev: &[f64],
    g_prev: &[f64],
    gamma_prev: f64,
    theta_k: f64,
) -> Vec<f64> {
    let c = 1.0 - theta_k;
    x_k.iter()
        .zip(x_prev)
        .zip(g_prev)
        .map(|((x, xp), gp)| (x - c * xp + c * gamma_prev * gp) / theta_k)
        .collect()
}

/// Optional trace columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Trackers {
    /// `f(w_k)`; constant schedules only.
    pub w: bool,
    /// `f(y_k)` (and `v_k` internally); θ-bearing schedules only.
    pub v: bool,
    pub phi: bool,
    pub varphi: bool,
    /// `resid_w` / `resid_v` of the one-step identities.
    pub residuals: bool,
    /// `f(x̄_t)` of the running average, kept beside the rows.
    pub f_avg: bool,
}

impl Trackers {
    /// Every tracker applicable to `schedule` given what `problem` knows.
    pub fn all_for(schedule: &Schedule, problem: &Problem) -> Self {
        let constant = schedule.as_constant().is_some();
        let optimum = problem.f_star().is_some() && problem.x_star().is_some();
        Self {
            w: constant,
            v: schedule.has_theta(),
            phi: schedule.has_theta() && optimum,
            varphi: constant && problem.f_star().is_some() && problem.mu().is_some(),
            residuals: true,
            f_avg: true,
        }
    }
}

/// What to run.
#[derive(Clone, Debug)]
pub struct EngineConfig<'a> {
    pub problem: &'a Problem,
    pub schedule: &'a Schedule,
    pub noise: NoiseModel,
    pub horizon: usize,
    pub x1: Vec<f64>,
    pub stream: RngStream,
    pub track: Trackers,
    /// Theorem whose right-hand side fills the `bound` column.
    pub bound: Option<TheoremId>,
    /// Variance bound used in right-hand sides. Defaults to the Gaussian
    /// noise scale; mini-batch runs must supply it.
    pub bound_sigma: Option<f64>,
    /// Constant of the stochastic accelerated bound.
    pub bound_c: Option<f64>,
    /// Replaces the problem's `μ` in `φ_k` and the PL bound.
    pub mu: Option<f64>,
    /// Stop once `g_k = 0` and `β_k m_{k−1} = 0`.
    pub early_exit: bool,
}

impl<'a> EngineConfig<'a> {
    pub fn new(problem: &'a Problem, schedule: &'a Schedule, x1: Vec<f64>, horizon: usize) -> Self {
        Self {
            problem,
            schedule,
            noise: NoiseModel::exact(),
            horizon,
            x1,
            stream: RngStream::new(0),
            track: Trackers::default(),
            bound: None,
            bound_sigma: None,
            bound_c: None,
            mu: None,
            early_exit: false,
        }
    }

    fn sigma(&self) -> Option<f64> {
        self.bound_sigma.or(match self.noise {
            NoiseModel::Gaussian { sigma } => Some(sigma),
            NoiseModel::Minibatch { .. } if self.noise.is_deterministic(self.problem) => Some(0.0),
            NoiseModel::Minibatch { .. } => None,
        })
    }
}

/// Right-hand-side inputs for a start point.
pub fn bound_inputs(
    problem: &Problem,
    x1: &[f64],
    sigma: f64,
    mu: Option<f64>,
    c: Option<f64>,
) -> Option<BoundInputs> {
    let f_star = problem.f_star()?;
    Some(BoundInputs {
        l: problem.l_smooth(),
        sigma,
        mu: mu.or(problem.mu()),
        f1_gap: problem.value(x1) - f_star,
        dist1_sq: problem.x_star().map(|xs| dist_sq(x1, xs)),
        grad1_sq: norm_sq(&problem.gradient(x1)),
        c,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub trace: Trace,
    pub state: RunState,
    /// Iteration at which a non-finite value appeared.
    pub diverged_at: Option<usize>,
    /// Iteration at which the fixed point was detected (no row written).
    pub fixed_point_at: Option<usize>,
}

impl RunOutcome {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

fn scaled_residual(next: &[f64], cur: &[f64], step: f64, g: &[f64]) -> f64 {
    let r: f64 = next
        .iter()
        .zip(cur)
        .zip(g)
        .map(|((n, c), gi)| {
            let d = n - c + step * gi;
            d * d
        })
        .sum();
    r.sqrt() / (1.0 + norm(cur))
}

fn row_is_finite(r: &TraceRow) -> bool {
    [r.f_x, r.grad_sq, r.m_sq].iter().all(|v| v.is_finite())
        && [r.f_w, r.f_y, r.phi, r.varphi, r.resid_w, r.resid_v]
            .iter()
            .flatten()
            .all(|v| v.is_finite())
}

/// Run `horizon` iterations and collect the trace.
pub fn run(config: EngineConfig<'_>) -> Result<RunOutcome, EngineError> {
    run_with_sink(config, |_| {})
}

/// As [`run`], handing each row to `sink` as soon as it is recorded.
pub fn run_with_sink(
    mut config: EngineConfig<'_>,
    mut sink: impl FnMut(&TraceRow),
) -> Result<RunOutcome, EngineError> {
    let problem = config.problem;
    let schedule = config.schedule;
    problem.check_dim(&config.x1)?;
    let constant = schedule.as_constant().copied();
    let track = config.track;
    let need_w = track.w || track.varphi || (track.residuals && constant.is_some());
    let need_v = track.v || track.phi || (track.residuals && schedule.has_theta());
    if (track.w || track.varphi) && constant.is_none() {
        return Err(EngineError::Tracker("w and varphi need a constant schedule"));
    }
    if (track.v || track.phi) && !schedule.has_theta() {
        return Err(EngineError::Tracker("v, y and phi need a theta-bearing schedule"));
    }
    let f_star = problem.f_star();
    let mu = config.mu.or(problem.mu());
    if track.phi && (f_star.is_none() || problem.x_star().is_none()) {
        return Err(EngineError::Tracker("phi needs f* and x*"));
    }
    let pl_c = if track.varphi {
        let (Some(_), Some(mu)) = (f_star, mu) else {
            return Err(EngineError::Tracker("varphi needs f* and mu"));
        };
        Some(PlConstants::new(constant.as_ref().expect("checked above"), problem.l_smooth(), mu)?.c)
    } else {
        None
    };
    let bounds = match config.bound {
        Some(theorem) => {
            let sigma = config
                .sigma()
                .ok_or(EngineError::Tracker("bound needs a variance bound sigma"))?;
            let inputs = bound_inputs(problem, &config.x1, sigma, mu, config.bound_c)
                .ok_or(EngineError::Tracker("bound needs f*"))?;
            Some((theorem, bound_series(theorem, config.horizon, &inputs, schedule)?))
        }
        None => None,
    };

    let d = problem.dim();
    let mut state = RunState::new(config.x1.clone());
    let mut rows = Vec::with_capacity(config.horizon);
    let mut f_avg = track.f_avg.then(|| Vec::with_capacity(config.horizon));
    let mut x_sum = vec![0.0; d];
    let mut phi_tracker = PhiTracker::new();
    let mut gsum = constant.map(|s| GeometricSum::new(s.beta));
    let mut grad = vec![0.0; d];
    let mut diverged_at = None;
    let mut fixed_point_at = None;

    for k in 1..=config.horizon {
        let step = schedule.step(k).ok_or(EngineError::ScheduleRange(k))?;
        problem.gradient_into(&state.x, &mut grad);
        let grad_sq = norm_sq(&grad);
        let f_x = problem.value(&state.x);
        let g = sample_gradient(problem, &config.noise, &state.x, &mut config.stream)?.g;

        if config.early_exit
            && g.iter().all(|v| *v == 0.0)
            && state.m_prev.iter().all(|m| step.beta * m == 0.0)
        {
            fixed_point_at = Some(k);
            break;
        }

        let w = need_w.then(|| update_w(&state, constant.as_ref().expect("checked")));
        let theta = step.theta;
        let vy = if need_v {
            let theta = theta.ok_or(EngineError::Tracker("step carries no theta"))?;
            Some(update_v_y(&state, theta))
        } else {
            None
        };
        let f_w = w.as_ref().map(|w| problem.value(w));
        let f_y = vy.as_ref().map(|(_, y)| problem.value(y));

        let phi = if track.phi {
            let (v, _) = vy.as_ref().expect("phi implies v");
            let fs = f_star.expect("checked");
            let dist = dist_sq(v, problem.x_star().expect("checked"));
            Some(phi_tracker.eval(schedule, k, f_y.expect("phi implies y") - fs, dist)?)
        } else {
            None
        };
        let varphi = match (pl_c, gsum.as_ref()) {
            (Some(c), Some(s)) => Some(f_w.expect("varphi implies w") - f_star.expect("checked") + c * s.value()),
            _ => None,
        };
        if let Some(avg) = f_avg.as_mut() {
            axpy(1.0, &state.x, &mut x_sum);
            let mean: Vec<f64> = x_sum.iter().map(|s| s / k as f64).collect();
            avg.push(problem.value(&mean));
        }

        gsgdm_step(&mut state, &step, &g)?;
        if let Some(s) = gsum.as_mut() {
            s.push(grad_sq);
        }

        let (mut resid_w, mut resid_v) = (None, None);
        if track.residuals {
            if let (Some(w), Some(s)) = (&w, &constant) {
                let w_next = update_w(&state, s);
                resid_w = Some(scaled_residual(&w_next, w, s.effective_step(), &g));
            }
            if let Some((v, _)) = &vy {
                let theta_next = schedule.theta(k + 1).expect("theta-bearing");
                let (v_next, _) = update_v_y(&state, theta_next);
                resid_v = Some(scaled_residual(&v_next, v, gamma_tilde(&step, theta_next), &g));
            }
        }

        let row = TraceRow {
            k,
            f_x,
            f_w,
            f_y,
            grad_sq,
            m_sq: norm_sq(&state.m_prev),
            phi,
            varphi,
            bound: bounds.as_ref().map(|(t, b)| b[row_t(*t, k)]),
            resid_w,
            resid_v,
        };
        if !row_is_finite(&row) {
            diverged_at = Some(k);
            if let Some(avg) = f_avg.as_mut() {
                avg.truncate(rows.len());
            }
            break;
        }
        sink(&row);
        rows.push(row);
        if !all_finite(&state.x) || !all_finite(&state.m_prev) {
            diverged_at = Some(k + 1);
            break;
        }
    }

    Ok(RunOutcome {
        trace: Trace { rows, f_avg },
        state,
        diverged_at,
        fixed_point_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::{build_accelerated, GammaChoice};

    fn half_square() -> Problem {
        Problem::quadratic(&[1.0]).unwrap()
    }

    #[test]
    fn single_step_worked_example() {
        let mut st = RunState::new(vec![1.0]);
        let s = ConstantSchedule::new(0.5, 0.0, 0.5).unwrap();
        let w1 = update_w(&st, &s);
        assert_eq!(w1, vec![1.0]);
        gsgdm_step(&mut st, &s.step(1), &[1.0]).unwrap();
        assert_eq!(st.m_prev, vec![0.5]);
        assert_eq!(st.x, vec![0.75]);
        let w2 = update_w(&st, &s);
        assert_eq!(w2, vec![0.5]);
        // w₂ − w₁ = −(γ + η) g₁
        assert_eq!(w2[0] - w1[0], -0.5);
        assert_eq!(st.k, 2);
    }

    #[test]
    fn momentum_free_step_is_sgd() {
        let mut st = RunState::new(vec![2.0, -1.0]);
        let step = ScheduleStep {
            k: 1,
            beta: 0.0,
            gamma: 0.3,
            eta: 0.2,
            theta: None,
        };
        gsgdm_step(&mut st, &step, &[1.0, 4.0]).unwrap();
        assert_eq!(st.x, vec![2.0 - 0.5, -1.0 - 2.0]);
        let s = ConstantSchedule::new(0.0, 0.3, 0.2).unwrap();
        assert_eq!(update_w(&st, &s), st.x);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut st = RunState::new(vec![0.0]);
        let s = ConstantSchedule::new(0.9, 0.1, 0.2).unwrap();
        gsgdm_step(&mut st, &s.step(1), &[0.0]).unwrap();
        assert_eq!(st.x, vec![0.0]);
    }

    #[test]
    fn step_index_and_dimension_are_checked() {
        let mut st = RunState::new(vec![0.0, 0.0]);
        let s = ConstantSchedule::new(0.9, 0.1, 0.2).unwrap();
        assert_eq!(
            gsgdm_step(&mut st, &s.step(2), &[0.0, 0.0]),
            Err(EngineError::StepIndex { state: 1, step: 2 })
        );
        assert_eq!(
            gsgdm_step(&mut st, &s.step(1), &[0.0]),
            Err(EngineError::Dimension {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn v_forms_agree() {
        let mut rng = RngStream::new(8);
        let mut st = RunState::new(rng.gaussian_vec(4));
        let (v1, y1) = update_v_y(&st, 2.0 / 3.0);
        assert_eq!(v1, st.x);
        assert_eq!(y1, st.x);
        for k in 1..50 {
            let step = ScheduleStep {
                k,
                beta: 0.3 + 0.01 * k as f64,
                gamma: 0.05,
                eta: 0.1,
                theta: Some(2.0 / (k as f64 + 2.0)),
            };
            let x_prev = st.x.clone();
            let g = rng.gaussian_vec(4);
            gsgdm_step(&mut st, &step, &g).unwrap();
            let theta = 2.0 / (k as f64 + 3.0);
            let (v, _) = update_v_y(&st, theta);
            let direct = v_direct(&st.x, &x_prev, &g, step.gamma, theta);
            let scale = 1.0 + norm(&direct);
            for (a, b) in v.iter().zip(&direct) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
        let mut unit = RunState::new(vec![1.0]);
        unit.k = 2;
        unit.y = vec![0.3];
        assert_eq!(update_v_y(&unit, 1.0).0, vec![1.0]);
    }

    #[test]
    fn w_forms_agree() {
        let mut rng = RngStream::new(9);
        let s = ConstantSchedule::new(0.8, 0.07, -0.02).unwrap();
        let mut st = RunState::new(rng.gaussian_vec(3));
        assert_eq!(w_direct(&st.x, None, &s), update_w(&st, &s));
        for k in 1..200 {
            let x_prev = st.x.clone();
            let g = rng.gaussian_vec(3);
            gsgdm_step(&mut st, &s.step(k), &g).unwrap();
            let a = update_w(&st, &s);
            let b = w_direct(&st.x, Some((&x_prev, &g)), &s);
            let scale = 1.0 + norm(&b);
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() <= 1e-12 * scale, "k={k}");
            }
        }
    }

    #[test]
    fn one_step_gd_reaches_minimiser() {
        let p = half_square();
        let sched = Schedule::Constant(ConstantSchedule::new(0.0, 1.0, 0.0).unwrap());
        let mut cfg = EngineConfig::new(&p, &sched, vec![1.0], 10);
        cfg.early_exit = true;
        let out = run(cfg).unwrap();
        assert_eq!(out.state.x, vec![0.0]);
        assert_eq!(p.value(&out.state.x), 0.0);
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.fixed_point_at, Some(2));
    }

    #[test]
    fn heavy_ball_meets_deterministic_bound() {
        let p = half_square();
        let s = ConstantSchedule::new(0.9, 0.0, 1.0).unwrap();
        let sched = Schedule::Constant(s);
        let mut cfg = EngineConfig::new(&p, &sched, vec![1.0], 2000);
        cfg.track.f_avg = true;
        let out = run(cfg).unwrap();
        let avg = out.trace.f_avg.unwrap();
        for (i, fa) in avg.iter().enumerate() {
            let t = (i + 1) as f64;
            let rhs = 1.0 / (2.0 * t) + 0.9 * 0.5 / (0.1 * t);
            assert!(*fa <= rhs, "t={t}");
        }
    }

    #[test]
    fn divergence_is_flagged_and_trace_kept() {
        let p = Problem::pl_sine();
        let sched = Schedule::Constant(ConstantSchedule::new(0.0, 1e6, 0.0).unwrap());
        let out = run(EngineConfig::new(&p, &sched, vec![1.0], 1000)).unwrap();
        assert!(out.diverged());
        assert!(out.trace.len() < 1000);
        assert!(out.trace.rows.iter().all(|r| r.f_x.is_finite()));
    }

    #[test]
    fn trackers_follow_schedule_kind() {
        let p = half_square();
        let accel = Schedule::Accelerated(
            build_accelerated(1.0, GammaChoice::Fixed(1.0), 0.9, 10, 0.0, None).unwrap(),
        );
        let mut cfg = EngineConfig::new(&p, &accel, vec![1.0], 10);
        cfg.track.w = true;
        assert!(matches!(run(cfg), Err(EngineError::Tracker(_))));
        let cons = Schedule::Constant(ConstantSchedule::new(0.5, 0.1, 0.1).unwrap());
        let mut cfg = EngineConfig::new(&p, &cons, vec![1.0], 10);
        cfg.track.phi = true;
        assert!(matches!(run(cfg), Err(EngineError::Tracker(_))));
    }

    #[test]
    fn full_tracking_populates_columns() {
        let p = Problem::quadratic(&[1.0, 4.0]).unwrap();
        let accel = Schedule::Accelerated(
            build_accelerated(4.0, GammaChoice::Fixed(0.25), 0.9, 100, 0.0, None).unwrap(),
        );
        let mut cfg = EngineConfig::new(&p, &accel, vec![1.0, -1.0], 100);
        cfg.track = Trackers::all_for(&accel, &p);
        cfg.bound = Some(TheoremId::AccelDet);
        let out = run(cfg).unwrap();
        let r = &out.trace.rows[0];
        assert_eq!(r.f_y, Some(r.f_x));
        assert!(r.phi.is_some() && r.bound.is_some() && r.resid_v.is_some());
        assert!(r.f_w.is_none() && r.varphi.is_none());
        // Φ₁ = f(x₁) + L‖x₁‖² when γ = 1/L
        assert!((r.phi.unwrap() - (2.5 + 4.0 * 2.0)).abs() < 1e-12);
        for w in out.trace.rows.windows(2) {
            assert!(w[1].phi.unwrap() <= w[0].phi.unwrap() + 1e-10);
        }
    }

    #[test]
    fn identical_seeds_identical_rows() {
        let p = Problem::quadratic(&[1.0, 4.0]).unwrap();
        let sched = Schedule::Constant(ConstantSchedule::new(0.9, 0.1, 0.1).unwrap());
        let make = || {
            let mut cfg = EngineConfig::new(&p, &sched, vec![1.0, 1.0], 300);
            cfg.noise = NoiseModel::Gaussian { sigma: 1.0 };
            cfg.stream = RngStream::for_run(42, 1);
            cfg.track = Trackers::all_for(&sched, &p);
            run(cfg).unwrap().trace
        };
        assert_eq!(make(), make());
    }
}
