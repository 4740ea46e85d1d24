//! Reference optimum for problems without a closed-form minimizer.

use std::fs;
use std::path::Path;

use gsgdm::engine::{gsgdm_step, RunState};
use gsgdm::problems::Problem;
use gsgdm::schedules::{build_accelerated, GammaChoice, Schedule};

use crate::CliError;

pub const CACHE_FILE: &str = "fstar.txt";

/// `f*` and its minimizer as the lowest `f(x_k)` seen over `iters` steps of
/// the deterministic accelerated schedule with `γ = 1/L`, started at 0.
pub fn reference_optimum(problem: &Problem, iters: usize) -> Result<(f64, Vec<f64>), CliError> {
    let l = problem.l_smooth();
    let schedule = Schedule::Accelerated(
        build_accelerated(l, GammaChoice::Fixed(1.0 / l), 0.9, iters, 0.0, None)
            .map_err(|e| CliError::Run(e.to_string()))?,
    );
    let mut state = RunState::new(vec![0.0; problem.dim()]);
    let mut best = (problem.value(&state.x), state.x.clone());
    let mut g = vec![0.0; problem.dim()];
    for k in 1..=iters {
        let step = schedule.step(k).expect("materialized for the horizon");
        problem.gradient_into(&state.x, &mut g);
        gsgdm_step(&mut state, &step, &g).map_err(|e| CliError::Run(e.to_string()))?;
        let f = problem.value(&state.x);
        if f < best.0 {
            best = (f, state.x.clone());
        }
    }
    Ok(best)
}

fn parse_cache(text: &str, key: &str, iters: usize) -> Option<(f64, Vec<f64>)> {
    let mut lines = text.lines();
    if lines.next()? != format!("problem {key}") || lines.next()? != format!("iters {iters}") {
        return None;
    }
    let f = lines.next()?.strip_prefix("f_star ")?.parse().ok()?;
    let x = lines
        .next()?
        .strip_prefix("x_star")?
        .split_whitespace()
        .map(|v| v.parse().ok())
        .collect::<Option<Vec<f64>>>()?;
    Some((f, x))
}

/// Reuse `dir/fstar.txt` when it was written for the same problem key and
/// iteration count, otherwise compute and overwrite it.
pub fn cached_optimum(
    dir: &Path,
    key: &str,
    problem: &Problem,
    iters: usize,
) -> Result<(f64, Vec<f64>), CliError> {
    let path = dir.join(CACHE_FILE);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Some((f, x)) = parse_cache(&text, key, iters) {
            if x.len() == problem.dim() {
                return Ok((f, x));
            }
        }
    }
    let (f, x) = reference_optimum(problem, iters)?;
    let xs: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
    let text = format!(
        "problem {key}\niters {iters}\nf_star {f:e}\nx_star {}\n",
        xs.join(" ")
    );
    fs::write(&path, text).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    Ok((f, x))
}
