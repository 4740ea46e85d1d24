//! Classical momentum methods in their native form, and their parameter maps
//! into G-SGDM.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::engine::{gsgdm_step, RunState};
use crate::problems::{sample_gradient, NoiseModel, Problem, ProblemError};
use crate::rng::RngStream;
use crate::schedules::{
    ConstParams, ConstantSchedule, NagClassicSchedule, Schedule, ScheduleError,
};
use crate::vector::norm;

#[derive(Debug, Error, PartialEq)]
pub enum VariantError {
    #[error("{method}: {reason}")]
    Range {
        method: Method,
        reason: &'static str,
    },
    #[error("{method} needs parameter {key}")]
    MissingParam { method: Method, key: &'static str },
    #[error("{method} does not take parameter {key}")]
    ExtraParam { method: Method, key: &'static str },
    #[error("state belongs to {state}, step asked for {step}")]
    Mismatch { state: Method, step: Method },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Method names accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Sgd,
    Hb,
    Nag,
    NagClassic,
    Sum,
    Qhm,
    Mass,
    Gsgdm,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Sgd,
        Method::Hb,
        Method::Nag,
        Method::NagClassic,
        Method::Sum,
        Method::Qhm,
        Method::Mass,
        Method::Gsgdm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::Hb => "hb",
            Method::Nag => "nag",
            Method::NagClassic => "nag-classic",
            Method::Sum => "sum",
            Method::Qhm => "qhm",
            Method::Mass => "mass",
            Method::Gsgdm => "gsgdm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// A specialized method with its native parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Variant {
    /// `x_{k+1} = x_k − α g_k`
    Sgd { alpha: f64 },
    /// `x_{k+1} = x_k + β(x_k − x_{k−1}) − (1−β)η g_k`
    Hb { beta: f64, eta: f64 },
    /// `y_{k+1} = x_k − γ g_k`, `x_{k+1} = y_{k+1} + β(y_{k+1} − y_k)`
    Nag { beta: f64, gamma: f64 },
    /// `y_{k+1} = x_k − α g_k`, `z_{k+1} = x_k − sα g_k`,
    /// `x_{k+1} = y_{k+1} + β(z_{k+1} − z_k)`
    Sum { beta: f64, alpha: f64, s: f64 },
    /// `m_k = βm_{k−1} + (1−β)g_k`, `x_{k+1} = x_k − α[(1−ν)g_k + νm_k]`
    Qhm { beta: f64, alpha: f64, nu: f64 },
    /// `y_{k+1} = x_k − α g_k`, `x_{k+1} = (1+β)y_{k+1} − βy_k + λ g_k`
    Mass { beta: f64, alpha: f64, lambda: f64 },
    /// `y_{k+1} = x_k − γ g_k`, `x_{k+1} = y_{k+1} + ((k−1)/(k+2))(y_{k+1} − y_k)`
    NagClassic { gamma: f64 },
}

fn finite_pos(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl Variant {
    pub fn method(&self) -> Method {
        match self {
            Variant::Sgd { .. } => Method::Sgd,
            Variant::Hb { .. } => Method::Hb,
            Variant::Nag { .. } => Method::Nag,
            Variant::Sum { .. } => Method::Sum,
            Variant::Qhm { .. } => Method::Qhm,
            Variant::Mass { .. } => Method::Mass,
            Variant::NagClassic { .. } => Method::NagClassic,
        }
    }

    pub fn validate(&self) -> Result<(), VariantError> {
        let method = self.method();
        let fail = |reason| Err(VariantError::Range { method, reason });
        let beta_ok = |b: f64| (0.0..1.0).contains(&b);
        match *self {
            Variant::Sgd { alpha } if !finite_pos(alpha) => fail("alpha must be positive"),
            Variant::Hb { beta, .. } if !beta_ok(beta) => fail("beta must lie in [0, 1)"),
            Variant::Hb { eta, .. } if !(eta != 0.0 && eta.is_finite()) => {
                fail("eta must be finite and nonzero")
            }
            Variant::Nag { beta, .. } if !(beta > 0.0 && beta < 1.0) => {
                fail("beta must lie in (0, 1); gamma_k = (1-beta)eta_{k-1}/beta divides by beta")
            }
            Variant::Nag { gamma, .. } if !finite_pos(gamma) => fail("gamma must be positive"),
            Variant::Sum { beta, .. } if !beta_ok(beta) => fail("beta must lie in [0, 1)"),
            Variant::Sum { alpha, .. } if !finite_pos(alpha) => fail("alpha must be positive"),
            Variant::Sum { beta, s, .. } if !(s >= 0.0 && s <= 1.0 / (1.0 - beta)) => {
                fail("s must lie in [0, 1/(1-beta)]")
            }
            Variant::Qhm { beta, .. } if !beta_ok(beta) => fail("beta must lie in [0, 1)"),
            Variant::Qhm { alpha, .. } if !finite_pos(alpha) => fail("alpha must be positive"),
            Variant::Qhm { nu, .. } if !(0.0..=1.0).contains(&nu) => fail("nu must lie in [0, 1]"),
            Variant::Mass { beta, .. } if !beta_ok(beta) => fail("beta must lie in [0, 1)"),
            Variant::Mass { alpha, .. } if !finite_pos(alpha) => fail("alpha must be positive"),
            Variant::Mass { lambda, .. } if !finite_pos(lambda) => fail("lambda must be positive"),
            Variant::NagClassic { gamma } if !finite_pos(gamma) => fail("gamma must be positive"),
            _ => Ok(()),
        }
    }

    /// Read native parameters from `const:` descriptor keys. Keys the method
    /// does not use are rejected.
    pub fn from_const(method: Method, p: &ConstParams) -> Result<Self, VariantError> {
        let given = [
            ("beta", p.beta),
            ("gamma", p.gamma),
            ("eta", p.eta),
            ("alpha", p.alpha),
            ("s", p.s),
            ("nu", p.nu),
            ("lambda", p.lambda),
        ];
        let allowed: &[&str] = match method {
            Method::Sgd => &["alpha"],
            Method::Hb => &["beta", "eta"],
            Method::Nag => &["beta", "gamma"],
            Method::Sum => &["beta", "alpha", "s"],
            Method::Qhm => &["beta", "alpha", "nu"],
            Method::Mass => &["beta", "alpha", "lambda"],
            Method::NagClassic | Method::Gsgdm => &[],
        };
        if allowed.is_empty() {
            return Err(VariantError::Range {
                method,
                reason: "no native constant parameterization",
            });
        }
        if let Some((key, _)) = given
            .iter()
            .find(|(k, v)| v.is_some() && !allowed.contains(k))
        {
            return Err(VariantError::ExtraParam { method, key });
        }
        let get = |key: &'static str| {
            given
                .iter()
                .find(|(k, _)| *k == key)
                .and_then(|(_, v)| *v)
                .ok_or(VariantError::MissingParam { method, key })
        };
        let v = match method {
            Method::Sgd => Variant::Sgd {
                alpha: get("alpha")?,
            },
            Method::Hb => Variant::Hb {
                beta: get("beta")?,
                eta: get("eta")?,
            },
            Method::Nag => Variant::Nag {
                beta: get("beta")?,
                gamma: get("gamma")?,
            },
            Method::Sum => Variant::Sum {
                beta: get("beta")?,
                alpha: get("alpha")?,
                s: get("s")?,
            },
            Method::Qhm => Variant::Qhm {
                beta: get("beta")?,
                alpha: get("alpha")?,
                nu: get("nu")?,
            },
            Method::Mass => Variant::Mass {
                beta: get("beta")?,
                alpha: get("alpha")?,
                lambda: get("lambda")?,
            },
            Method::NagClassic | Method::Gsgdm => unreachable!("rejected above"),
        };
        v.validate()?;
        Ok(v)
    }
}

/// Constant `(β, γ, η)` embedding of a constant-parameter method.
pub fn map_constant(v: &Variant) -> Result<ConstantSchedule, VariantError> {
    v.validate()?;
    let (beta, gamma, eta) = match *v {
        Variant::Sgd { alpha } => (0.0, alpha, 0.0),
        Variant::Hb { beta, eta } => (beta, 0.0, eta),
        Variant::Nag { beta, gamma } => (beta, gamma, beta * gamma / (1.0 - beta)),
        Variant::Sum { beta, alpha, s } => (beta, s * alpha, alpha / (1.0 - beta) - s * alpha),
        Variant::Qhm { beta, alpha, nu } => (beta, alpha * (1.0 - nu), alpha * nu),
        Variant::Mass {
            beta,
            alpha,
            lambda,
        } => (beta, alpha, (beta * alpha - lambda) / (1.0 - beta)),
        Variant::NagClassic { .. } => {
            return Err(VariantError::Range {
                method: Method::NagClassic,
                reason: "time-varying; use map_to_gsgdm",
            })
        }
    };
    Ok(ConstantSchedule::new(beta, gamma, eta)?)
}

/// G-SGDM schedule reproducing `v` exactly, materialized for `horizon` steps
/// when time-varying.
pub fn map_to_gsgdm(v: &Variant, horizon: usize) -> Result<Schedule, VariantError> {
    match *v {
        Variant::NagClassic { gamma } => {
            v.validate()?;
            Ok(Schedule::NagClassic(NagClassicSchedule::new(gamma, horizon)?))
        }
        _ => Ok(Schedule::Constant(map_constant(v)?)),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Aux {
    None,
    /// `x_{k−1}`, with `x₀ := x₁`
    XPrev(Vec<f64>),
    /// `y_k`, with `y₁ := x₁`
    Y(Vec<f64>),
    /// `z_k`, with `z₁ := x₁`
    Z(Vec<f64>),
    /// `m_{k−1}`, with `m₀ := 0`
    M(Vec<f64>),
}

/// Iterate of a native method plus its method-specific memory.
#[derive(Clone, Debug, PartialEq)]
pub struct VariantState {
    pub k: usize,
    pub x: Vec<f64>,
    method: Method,
    aux: Aux,
}

impl VariantState {
    /// Initial state. Auxiliaries start so the first native step equals the
    /// first G-SGDM step with `m₀ = 0`.
    pub fn new(v: &Variant, x1: Vec<f64>) -> Self {
        let aux = match v {
            Variant::Sgd { .. } => Aux::None,
            Variant::Hb { .. } => Aux::XPrev(x1.clone()),
            Variant::Nag { .. } | Variant::Mass { .. } | Variant::NagClassic { .. } => {
                Aux::Y(x1.clone())
            }
            Variant::Sum { .. } => Aux::Z(x1.clone()),
            Variant::Qhm { .. } => Aux::M(vec![0.0; x1.len()]),
        };
        Self {
            k: 1,
            x: x1,
            method: v.method(),
            aux,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }
}

/// One step of the native recursion.
pub fn variant_step(state: &mut VariantState, v: &Variant, g: &[f64]) -> Result<(), VariantError> {
    if state.method != v.method() {
        return Err(VariantError::Mismatch {
            state: state.method,
            step: v.method(),
        });
    }
    if g.len() != state.x.len() {
        return Err(VariantError::Dimension {
            expected: state.x.len(),
            got: g.len(),
        });
    }
    let x = &mut state.x;
    match (*v, &mut state.aux) {
        (Variant::Sgd { alpha }, Aux::None) => {
            for (xi, gi) in x.iter_mut().zip(g) {
                *xi -= alpha * gi;
            }
        }
        (Variant::Hb { beta, eta }, Aux::XPrev(prev)) => {
            for ((xi, pi), gi) in x.iter_mut().zip(prev.iter_mut()).zip(g) {
                let next = *xi + beta * (*xi - *pi) - (1.0 - beta) * eta * gi;
                *pi = *xi;
                *xi = next;
            }
        }
        (Variant::Nag { beta, gamma }, Aux::Y(y)) => {
            for ((xi, yi), gi) in x.iter_mut().zip(y.iter_mut()).zip(g) {
                let y_next = *xi - gamma * gi;
                *xi = y_next + beta * (y_next - *yi);
                *yi = y_next;
            }
        }
        (Variant::NagClassic { gamma }, Aux::Y(y)) => {
            let c = NagClassicSchedule::native_momentum(state.k);
            for ((xi, yi), gi) in x.iter_mut().zip(y.iter_mut()).zip(g) {
                let y_next = *xi - gamma * gi;
                *xi = y_next + c * (y_next - *yi);
                *yi = y_next;
            }
        }
        (Variant::Sum { beta, alpha, s }, Aux::Z(z)) => {
            for ((xi, zi), gi) in x.iter_mut().zip(z.iter_mut()).zip(g) {
                let y_next = *xi - alpha * gi;
                let z_next = *xi - s * alpha * gi;
                *xi = y_next + beta * (z_next - *zi);
                *zi = z_next;
            }
        }
        (Variant::Qhm { beta, alpha, nu }, Aux::M(m)) => {
            for ((xi, mi), gi) in x.iter_mut().zip(m.iter_mut()).zip(g) {
                *mi = beta * *mi + (1.0 - beta) * gi;
                *xi -= alpha * ((1.0 - nu) * gi + nu * *mi);
            }
        }
        (
            Variant::Mass {
                beta,
                alpha,
                lambda,
            },
            Aux::Y(y),
        ) => {
            for ((xi, yi), gi) in x.iter_mut().zip(y.iter_mut()).zip(g) {
                let y_next = *xi - alpha * gi;
                *xi = (1.0 + beta) * y_next - beta * *yi + lambda * gi;
                *yi = y_next;
            }
        }
        _ => unreachable!("auxiliary layout fixed by VariantState::new"),
    }
    state.k += 1;
    Ok(())
}

/// Largest iterate gap between a native method and its G-SGDM embedding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwinReport {
    pub max_deviation: f64,
    pub max_norm: f64,
    pub steps: usize,
}

impl TwinReport {
    /// `max_k ‖x_k^G − x_k^V‖ ≤ tol · (1 + max_k ‖x_k‖)`
    pub fn within(&self, tol: f64) -> bool {
        self.max_deviation <= tol * (1.0 + self.max_norm)
    }
}

/// Run `v` natively and through G-SGDM in lockstep. Each side draws its
/// gradient noise from its own copy of `stream`, so both consume the same
/// noise sequence in the same order.
pub fn twin_run(
    problem: &Problem,
    v: &Variant,
    noise: &NoiseModel,
    x1: &[f64],
    stream: &RngStream,
    steps: usize,
) -> Result<TwinReport, VariantError> {
    let schedule = map_to_gsgdm(v, steps)?;
    let mut g_state = RunState::new(x1.to_vec());
    let mut v_state = VariantState::new(v, x1.to_vec());
    let mut g_stream = stream.clone();
    let mut v_stream = stream.clone();
    let mut report = TwinReport {
        max_deviation: 0.0,
        max_norm: norm(x1),
        steps,
    };
    for k in 1..=steps {
        let step = schedule
            .step(k)
            .ok_or(ScheduleError::Horizon)?;
        let gg = sample_gradient(problem, noise, &g_state.x, &mut g_stream)?.g;
        let gv = sample_gradient(problem, noise, &v_state.x, &mut v_stream)?.g;
        gsgdm_step(&mut g_state, &step, &gg).map_err(|_| VariantError::Dimension {
            expected: x1.len(),
            got: gg.len(),
        })?;
        variant_step(&mut v_state, v, &gv)?;
        let dev = crate::vector::dist_sq(&g_state.x, &v_state.x).sqrt();
        report.max_deviation = report.max_deviation.max(dev);
        report.max_norm = report.max_norm.max(norm(&g_state.x)).max(norm(&v_state.x));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad10() -> Problem {
        let lambdas: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        Problem::quadratic(&lambdas).unwrap()
    }

    fn close(a: &ConstantSchedule, b: (f64, f64, f64)) -> bool {
        (a.beta - b.0).abs() < 1e-15 && (a.gamma - b.1).abs() < 1e-15 && (a.eta - b.2).abs() < 1e-15
    }

    #[test]
    fn proposition_maps() {
        let q = map_constant(&Variant::Qhm {
            beta: 0.9,
            alpha: 0.1,
            nu: 1.0,
        })
        .unwrap();
        assert!(close(&q, (0.9, 0.0, 0.1)));
        let hb = map_constant(&Variant::Hb { beta: 0.9, eta: 0.1 }).unwrap();
        assert_eq!(q, hb);

        let s0 = map_constant(&Variant::Sum {
            beta: 0.5,
            alpha: 0.2,
            s: 0.0,
        })
        .unwrap();
        assert!(close(&s0, (0.5, 0.0, 0.4)));

        let m = map_constant(&Variant::Mass {
            beta: 0.9,
            alpha: 0.1,
            lambda: 0.09,
        })
        .unwrap();
        assert_eq!(m.gamma, 0.1);
        assert!(m.eta.abs() < 1e-15);

        let n = map_constant(&Variant::Nag {
            beta: 0.5,
            gamma: 0.1,
        })
        .unwrap();
        assert!(close(&n, (0.5, 0.1, 0.1)));
    }

    #[test]
    fn out_of_range_parameters_rejected() {
        for v in [
            Variant::Nag {
                beta: 0.0,
                gamma: 0.1,
            },
            Variant::Sum {
                beta: 0.5,
                alpha: 0.1,
                s: 2.5,
            },
            Variant::Qhm {
                beta: 0.5,
                alpha: 0.1,
                nu: 1.5,
            },
            Variant::Mass {
                beta: 0.5,
                alpha: 0.1,
                lambda: 0.0,
            },
            Variant::Hb { beta: 1.0, eta: 0.1 },
            Variant::Sgd { alpha: -1.0 },
        ] {
            assert!(matches!(map_constant(&v), Err(VariantError::Range { .. })), "{v:?}");
        }
    }

    #[test]
    fn descriptor_keys() {
        let p = ConstParams {
            beta: Some(0.9),
            eta: Some(0.1),
            ..Default::default()
        };
        assert_eq!(
            Variant::from_const(Method::Hb, &p).unwrap(),
            Variant::Hb { beta: 0.9, eta: 0.1 }
        );
        assert_eq!(
            Variant::from_const(Method::Nag, &p),
            Err(VariantError::ExtraParam {
                method: Method::Nag,
                key: "eta"
            })
        );
        let p = ConstParams {
            beta: Some(0.0),
            gamma: Some(0.1),
            ..Default::default()
        };
        assert!(matches!(
            Variant::from_const(Method::Nag, &p),
            Err(VariantError::Range { .. })
        ));
        assert_eq!(
            Variant::from_const(Method::Sum, &p),
            Err(VariantError::ExtraParam {
                method: Method::Sum,
                key: "gamma"
            })
        );
    }

    #[test]
    fn qhm_without_momentum_is_sgd() {
        let v = Variant::Qhm {
            beta: 0.7,
            alpha: 0.1,
            nu: 0.0,
        };
        let mut st = VariantState::new(&v, vec![1.0, 2.0]);
        variant_step(&mut st, &v, &[1.0, -1.0]).unwrap();
        assert_eq!(st.x, vec![0.9, 2.1]);
    }

    #[test]
    fn heavy_ball_first_step() {
        let v = Variant::Hb { beta: 0.9, eta: 0.5 };
        let mut st = VariantState::new(&v, vec![1.0]);
        variant_step(&mut st, &v, &[2.0]).unwrap();
        let want = 1.0 - 0.1 * 0.5 * 2.0;
        assert!((st.x[0] - want).abs() < 1e-16);
        let mut g = RunState::new(vec![1.0]);
        gsgdm_step(&mut g, &map_constant(&v).unwrap().step(1), &[2.0]).unwrap();
        assert!((g.x[0] - want).abs() < 1e-16);
    }

    #[test]
    fn nag_fifty_steps_on_unit_quadratic() {
        let p = Problem::quadratic(&[1.0]).unwrap();
        let v = Variant::Nag {
            beta: 0.5,
            gamma: 0.1,
        };
        let r = twin_run(&p, &v, &NoiseModel::exact(), &[1.0], &RngStream::new(0), 50).unwrap();
        assert!(r.max_deviation <= 1e-12, "{r:?}");
    }

    #[test]
    fn every_method_twins_its_embedding() {
        let p = quad10();
        let mut rng = RngStream::new(3);
        let x1 = rng.gaussian_vec(10);
        let noise = NoiseModel::Gaussian { sigma: 0.1 };
        let variants = [
            Variant::Sgd { alpha: 0.5 },
            Variant::Hb { beta: 0.8, eta: 0.7 },
            Variant::Nag {
                beta: 0.6,
                gamma: 0.5,
            },
            Variant::Sum {
                beta: 0.7,
                alpha: 0.3,
                s: 1.5,
            },
            Variant::Qhm {
                beta: 0.9,
                alpha: 0.4,
                nu: 0.7,
            },
            Variant::Mass {
                beta: 0.8,
                alpha: 0.4,
                lambda: 0.1,
            },
            Variant::NagClassic { gamma: 0.5 },
        ];
        for v in variants {
            let r = twin_run(&p, &v, &noise, &x1, &RngStream::new(17), 300).unwrap();
            assert!(r.within(1e-10), "{v:?}: {r:?}");
        }
    }

    #[test]
    fn sum_endpoints() {
        let p = quad10();
        let x1 = RngStream::new(5).gaussian_vec(10);
        let noise = NoiseModel::Gaussian { sigma: 0.1 };
        let stream = RngStream::new(23);
        let (beta, alpha) = (0.6, 0.2);
        let run_sum = |s: f64| {
            let v = Variant::Sum { beta, alpha, s };
            let sched = map_constant(&v).unwrap();
            (v, sched)
        };
        let run_native = |v: &Variant| {
            let mut st = VariantState::new(v, x1.clone());
            let mut rs = stream.clone();
            let mut path = Vec::new();
            for _ in 0..200 {
                let g = sample_gradient(&p, &noise, &st.x, &mut rs).unwrap().g;
                variant_step(&mut st, v, &g).unwrap();
                path.push(st.x.clone());
            }
            path
        };
        let same = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            a.iter()
                .zip(b)
                .all(|(x, y)| crate::vector::dist_sq(x, y).sqrt() <= 1e-10 * (1.0 + norm(x)))
        };
        // s = 0: heavy ball with η = α/(1−β)
        let (v0, s0) = run_sum(0.0);
        let hb = Variant::Hb {
            beta,
            eta: alpha / (1.0 - beta),
        };
        assert_eq!(s0, map_constant(&hb).unwrap());
        assert!(same(&run_native(&v0), &run_native(&hb)));
        // s = 1: Nesterov with γ = α
        let (v1, s1) = run_sum(1.0);
        let nag = Variant::Nag { beta, gamma: alpha };
        let n = map_constant(&nag).unwrap();
        assert!((s1.gamma - n.gamma).abs() < 1e-15 && (s1.eta - n.eta).abs() < 1e-15);
        assert!(same(&run_native(&v1), &run_native(&nag)));
        // s = 1/(1−β): η = 0, plain SGD with step α/(1−β)
        let (vmax, smax) = run_sum(1.0 / (1.0 - beta));
        assert!(smax.eta.abs() < 1e-15);
        let sgd = Variant::Sgd {
            alpha: alpha / (1.0 - beta),
        };
        assert!(same(&run_native(&vmax), &run_native(&sgd)));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("adam".parse::<Method>().is_err());
    }
}
