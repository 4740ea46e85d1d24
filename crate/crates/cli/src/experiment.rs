//! Running a plan: problem setup, seed sweeps, CSV output and checks.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use gsgdm::analysis::{bound_series, verify_mbound, verify_trace, VerificationReport, VerifyOptions};
use gsgdm::engine::{bound_inputs, run, EngineConfig, RunOutcome, Trackers};
use gsgdm::problems::{parse_dataset, synthetic_logistic, NoiseModel, Problem};
use gsgdm::rng::RngStream;
use gsgdm::schedules::{
    build_accelerated, validate_for, validate_nonconvex, ConstantSchedule, Schedule,
    ScheduleDescriptor, TheoremId,
};
use gsgdm::trace::{mean_rows, write_csv, Trace};
use gsgdm::variants::map_to_gsgdm;

use crate::fstar::cached_optimum;
use crate::plan::{Check, ExperimentPlan, MethodPlan, ProblemDescriptor};
use crate::{CliError, EXIT_CHECK_FAILED, EXIT_DIVERGED, EXIT_OK};

/// Run index of the stream that generates synthetic datasets.
pub const DATA_STREAM: u64 = u64::MAX;
/// Fraction of the grid estimate of `μ` used when `--mu` is absent.
pub const MU_SLACK: f64 = 0.95;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(path.display().to_string(), e)
}

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

/// Build the problem, attaching a reference optimum for logistic instances.
pub fn build_problem(plan: &ExperimentPlan) -> Result<Problem, CliError> {
    let problem = match &plan.problem {
        ProblemDescriptor::Quadratic(l) => Problem::quadratic(l).map_err(usage)?,
        ProblemDescriptor::PlSine => Problem::pl_sine(),
        ProblemDescriptor::LogisticFile(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            Problem::logistic(parse_dataset(&text).map_err(usage)?).map_err(usage)?
        }
        ProblemDescriptor::LogisticSynth { n, d, flip } => {
            let mut stream = RngStream::for_run(plan.seed, DATA_STREAM);
            Problem::logistic(synthetic_logistic(*n, *d, *flip, &mut stream).map_err(usage)?)
                .map_err(usage)?
        }
    };
    if !plan.problem.is_logistic() {
        return Ok(problem);
    }
    let key = match &plan.problem {
        ProblemDescriptor::LogisticSynth { .. } => format!("{} seed={}", plan.problem, plan.seed),
        other => other.to_string(),
    };
    let (f, x) = cached_optimum(&plan.out_dir, &key, &problem, plan.fstar_iters)?;
    Ok(problem.with_optimum(f, Some(x)))
}

/// G-SGDM schedule of one method.
pub fn build_schedule(
    m: &MethodPlan,
    problem: &Problem,
    plan: &ExperimentPlan,
) -> Result<Schedule, CliError> {
    if let Some(v) = &m.variant {
        return map_to_gsgdm(v, plan.horizon).map_err(usage);
    }
    match m.schedule {
        ScheduleDescriptor::Const(p) => {
            let (Some(b), Some(g), Some(e)) = (p.beta, p.gamma, p.eta) else {
                return Err(usage("const schedule needs beta, gamma and eta"));
            };
            Ok(Schedule::Constant(ConstantSchedule::new(b, g, e).map_err(usage)?))
        }
        ScheduleDescriptor::Accel { gamma, beta1, c } => {
            let a = build_accelerated(
                problem.l_smooth(),
                gamma,
                beta1,
                plan.horizon,
                plan.sigma.unwrap_or(0.0),
                c.or(plan.c),
            )
            .map_err(usage)?;
            Ok(Schedule::Accelerated(a))
        }
        ScheduleDescriptor::NagClassic { .. } => {
            Err(usage("nag-classic schedule without a method mapping"))
        }
    }
}

fn write_trace(path: &Path, trace: &Trace) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_csv(&mut w, &trace.rows).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
    w.flush().map_err(io_err(path))
}

/// A failed report for a check that could not be evaluated.
fn missing(id: &str, reason: impl ToString) -> VerificationReport {
    VerificationReport {
        id: format!("{id} ({})", reason.to_string()),
        pass: false,
        max_violation: f64::INFINITY,
        first_t: None,
        violations: 0,
        checked: 0,
        min_margin: f64::NEG_INFINITY,
        min_margin_t: None,
    }
}

/// Everything shared by the methods of one experiment.
struct Setup {
    problem: Problem,
    x1: Vec<f64>,
    noise: NoiseModel,
    /// Variance bound in right-hand sides.
    sigma: Option<f64>,
    mu: Option<f64>,
}

fn setup(plan: &ExperimentPlan) -> Result<Setup, CliError> {
    let problem = build_problem(plan)?;
    let x1 = match &plan.x1 {
        Some(x) => x.clone(),
        None => RngStream::for_run(plan.seed, 0).gaussian_vec(problem.dim()),
    };
    problem.check_dim(&x1).map_err(usage)?;
    let (noise, sigma) = match plan.batch {
        Some(batch) => {
            let noise = NoiseModel::Minibatch { batch };
            let sigma = if noise.is_deterministic(&problem) {
                Some(0.0)
            } else {
                plan.sigma
            };
            (noise, sigma)
        }
        None => {
            let s = plan.sigma.unwrap_or(0.0);
            (NoiseModel::Gaussian { sigma: s }, Some(s))
        }
    };
    let mu = plan.mu.or(problem.mu().map(|m| MU_SLACK * m));
    Ok(Setup {
        problem,
        x1,
        noise,
        sigma,
        mu,
    })
}

fn trackers(schedule: &Schedule, s: &Setup) -> Trackers {
    let mut t = Trackers::all_for(schedule, &s.problem);
    // φ is only defined inside the PL step-size region
    t.varphi = t.varphi
        && s.mu.is_some()
        && schedule.as_constant().is_some_and(|c| {
            validate_nonconvex(c, s.problem.l_smooth(), true).is_ok_and(|r| r.pass)
        });
    t
}

fn sweep(
    plan: &ExperimentPlan,
    m: &MethodPlan,
    s: &Setup,
    schedule: &Schedule,
    bound: Option<TheoremId>,
) -> Result<Vec<RunOutcome>, CliError> {
    let track = trackers(schedule, s);
    (0..plan.seeds)
        .into_par_iter()
        .map(|i| {
            let mut cfg = EngineConfig::new(&s.problem, schedule, s.x1.clone(), plan.horizon);
            cfg.noise = s.noise;
            cfg.stream = RngStream::for_run(plan.seed, i + 1);
            cfg.track = track;
            cfg.bound = bound;
            cfg.bound_sigma = s.sigma;
            cfg.bound_c = method_c(plan, m);
            cfg.mu = s.mu;
            run(cfg).map_err(|e| CliError::Run(e.to_string()))
        })
        .collect()
}

/// Constant `C` of the stochastic accelerated bound for one method.
fn method_c(plan: &ExperimentPlan, m: &MethodPlan) -> Option<f64> {
    match m.schedule {
        ScheduleDescriptor::Accel { c, .. } => c.or(plan.c),
        _ => plan.c,
    }
}

/// Theorem whose right-hand side fills the `bound` column: the first
/// requested theorem whose inputs are available.
fn bound_theorem(plan: &ExperimentPlan, m: &MethodPlan, s: &Setup, schedule: &Schedule) -> Option<TheoremId> {
    plan.checks.iter().find_map(|c| match c {
        Check::Theorem(t) => {
            let inputs = bound_inputs(&s.problem, &s.x1, s.sigma?, s.mu, method_c(plan, m))?;
            bound_series(*t, 1, &inputs, schedule).ok().map(|_| *t)
        }
        Check::MomentBound => None,
    })
}

fn check(
    c: Check,
    plan: &ExperimentPlan,
    m: &MethodPlan,
    s: &Setup,
    schedule: &Schedule,
    traces: &[Trace],
) -> VerificationReport {
    match c {
        Check::Theorem(t) => {
            let Some(sigma) = s.sigma else {
                return missing(t.as_str(), "needs --sigma as a variance bound");
            };
            let Some(inputs) = bound_inputs(&s.problem, &s.x1, sigma, s.mu, method_c(plan, m))
            else {
                return missing(t.as_str(), "needs f*");
            };
            let opts = VerifyOptions {
                at: plan.check_at.clone(),
                z: plan.z,
                f_star: s.problem.f_star(),
            };
            verify_trace(traces, t, &inputs, schedule, &opts)
                .unwrap_or_else(|e| missing(t.as_str(), e))
        }
        Check::MomentBound => {
            let id = Check::MOMENT_BOUND_ID;
            let (Some(cs), Some(sigma)) = (schedule.as_constant(), s.sigma) else {
                return missing(id, "needs a constant schedule and a variance bound");
            };
            // checked at every k up to the largest requested t
            let k_max = plan
                .check_at
                .as_ref()
                .and_then(|at| at.iter().copied().max())
                .unwrap_or(plan.horizon);
            verify_mbound(traces, cs.beta, sigma, k_max, plan.z).unwrap_or_else(|e| missing(id, e))
        }
    }
}

/// Execute the plan, writing traces under `out_dir` and reports to `out`.
/// Returns the process exit code.
pub fn run_experiment(plan: &ExperimentPlan, out: &mut dyn Write) -> Result<i32, CliError> {
    let dir = &plan.out_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let s = setup(plan)?;
    let wr = |e: std::io::Error| CliError::Io("stdout".into(), e);
    writeln!(
        out,
        "problem {} d={} L={:e}{}{}",
        plan.problem,
        s.problem.dim(),
        s.problem.l_smooth(),
        s.problem
            .f_star()
            .map(|f| format!(" f*={f:e}"))
            .unwrap_or_default(),
        s.mu.map(|m| format!(" mu={m:e}")).unwrap_or_default(),
    )
    .map_err(wr)?;

    let mut all_pass = true;
    let mut diverged = false;
    for m in &plan.methods {
        let schedule = build_schedule(m, &s.problem, plan)?;
        writeln!(out, "METHOD {} schedule={}", m.method, m.schedule_text).map_err(wr)?;
        for c in &plan.checks {
            if let Check::Theorem(t) = c {
                let v = validate_for(*t, &schedule, s.problem.l_smooth(), plan.horizon).map_err(usage)?;
                writeln!(out, "{v}").map_err(wr)?;
            }
        }

        let outcomes = sweep(plan, m, &s, &schedule, bound_theorem(plan, m, &s, &schedule))?;
        for (i, o) in outcomes.iter().enumerate() {
            let path = dir.join(format!("{}_{i}.csv", m.method));
            write_trace(&path, &o.trace)?;
            if let Some(k) = o.diverged_at {
                diverged = true;
                writeln!(out, "DIVERGED {} seed={i} k={k}", m.method).map_err(wr)?;
            }
        }
        let rows: Vec<&[_]> = outcomes.iter().map(|o| o.trace.rows.as_slice()).collect();
        let mean = Trace {
            rows: mean_rows(&rows),
            f_avg: None,
        };
        write_trace(&dir.join(format!("{}_mean.csv", m.method)), &mean)?;

        let traces: Vec<Trace> = outcomes.into_iter().map(|o| o.trace).collect();
        for &c in &plan.checks {
            let r = check(c, plan, m, &s, &schedule, &traces);
            all_pass &= r.pass;
            writeln!(out, "{r}").map_err(wr)?;
        }
    }
    Ok(if diverged {
        EXIT_DIVERGED
    } else if all_pass {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}
