#![allow(dead_code)]

use gsgdm::problems::{synthetic_logistic, Problem};
use gsgdm::rng::RngStream;
use gsgdm::vector::{dot, norm};

/// Problems the gradient checks sweep over, with a sampler for test points.
pub fn fd_problems() -> Vec<(&'static str, Problem, f64)> {
    let mut rng = RngStream::new(7);
    let data = synthetic_logistic(200, 5, 0.1, &mut rng).unwrap();
    vec![
        ("quad:1,4", Problem::quadratic(&[1.0, 4.0]).unwrap(), 3.0),
        ("quad:2,3,5", Problem::quadratic(&[2.0, 3.0, 5.0]).unwrap(), 3.0),
        ("logistic:synth=200,5", Problem::logistic(data).unwrap(), 2.0),
        ("plsine", Problem::pl_sine(), 5.0),
    ]
}

/// Worst relative gap between a central difference (step `h`) and the
/// analytic directional derivative over `pairs` random `(x, d)` draws.
pub fn fd_worst(problem: &Problem, scale: f64, pairs: usize, h: f64, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed);
    let dim = problem.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x: Vec<f64> = rng.gaussian_vec(dim).iter().map(|v| v * scale).collect();
        let mut d = rng.gaussian_vec(dim);
        let n = norm(&d);
        d.iter_mut().for_each(|v| *v /= n);
        let plus: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - h * b).collect();
        let fd = (problem.value(&plus) - problem.value(&minus)) / (2.0 * h);
        let an = dot(&problem.gradient(&x), &d);
        worst = worst.max((fd - an).abs() / an.abs().max(1e-6));
    }
    worst
}

/// Largest `‖∇f(y)−∇f(x)‖ − (L + 1e−9)‖y−x‖` over random pairs; `≤ 0` means
/// every pair respects the smoothness constant.
pub fn lipschitz_excess(problem: &Problem, scale: f64, pairs: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed);
    let dim = problem.dim();
    let l = problem.l_smooth() + 1e-9;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let x: Vec<f64> = rng.gaussian_vec(dim).iter().map(|v| v * scale).collect();
        let y: Vec<f64> = rng.gaussian_vec(dim).iter().map(|v| v * scale).collect();
        let gx = problem.gradient(&x);
        let gy = problem.gradient(&y);
        let lhs = gsgdm::vector::dist_sq(&gx, &gy).sqrt();
        let rhs = l * gsgdm::vector::dist_sq(&x, &y).sqrt();
        worst = worst.max(lhs - rhs);
    }
    worst
}
