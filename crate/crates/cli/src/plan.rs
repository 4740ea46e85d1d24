//! Command-line flags and their translation into a validated experiment plan.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Parser;

use gsgdm::schedules::{ConstParams, ConstantSchedule, GammaChoice, ScheduleDescriptor, TheoremId};
use gsgdm::variants::{map_constant, Method, Variant};

use crate::CliError;

/// Label-flip probability of `logistic:synth=n,d` when no third value is given.
pub const DEFAULT_FLIP: f64 = 0.1;

#[derive(Parser, Debug, Clone)]
#[command(
    name = "gsgdm",
    version,
    about = "Run G-SGDM and its special cases, write CSV traces and check convergence bounds"
)]
pub struct Args {
    /// quad:<l1>,<l2>,… | logistic:file=<path> | logistic:synth=<n>,<d>[,<flip>] | plsine
    #[arg(long)]
    pub problem: String,
    /// Comma-separated: sgd, hb, nag, nag-classic, sum, qhm, mass, gsgdm
    #[arg(long, value_delimiter = ',', required = true)]
    pub method: Vec<String>,
    /// const:… | accel:gamma=auto|<v>,beta1=<v>,C=<v> | nag-classic:gamma=<v>.
    /// Give one per method, or one shared by all.
    #[arg(long, required = true)]
    pub schedule: Vec<String>,
    /// Gaussian noise scale; with --batch, the variance bound used in bounds
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Mini-batch size for logistic problems (default: full batch)
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// thm-cvx-const | thm-cvx-deter | thm-cvx-vary | thm-accel-det |
    /// thm-accel-stoch | thm-nc | thm-pl | lem-m-var (repeatable)
    #[arg(long)]
    pub check: Vec<String>,
    /// Restrict checks to these iteration counts
    #[arg(long = "check-at", value_delimiter = ',')]
    pub check_at: Vec<usize>,
    /// Constant of the stochastic accelerated schedule and bound
    #[arg(long = "C")]
    pub c: Option<f64>,
    /// PL constant (default: 95% of the grid estimate)
    #[arg(long)]
    pub mu: Option<f64>,
    /// Start point (default: standard normal from the seed)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x1: Option<Vec<f64>>,
    /// Iterations of the reference run that fixes f* for logistic problems
    #[arg(long = "fstar-iters", default_value_t = 1_000_000)]
    pub fstar_iters: usize,
    /// Standard errors of slack in multi-seed checks
    #[arg(long, default_value_t = 2.0)]
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemDescriptor {
    Quadratic(Vec<f64>),
    LogisticFile(PathBuf),
    LogisticSynth { n: usize, d: usize, flip: f64 },
    PlSine,
}

impl fmt::Display for ProblemDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemDescriptor::Quadratic(l) => {
                let parts: Vec<String> = l.iter().map(|v| v.to_string()).collect();
                write!(f, "quad:{}", parts.join(","))
            }
            ProblemDescriptor::LogisticFile(p) => write!(f, "logistic:file={}", p.display()),
            ProblemDescriptor::LogisticSynth { n, d, flip } => {
                write!(f, "logistic:synth={n},{d},{flip}")
            }
            ProblemDescriptor::PlSine => f.write_str("plsine"),
        }
    }
}

impl FromStr for ProblemDescriptor {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| CliError::Usage(format!("--problem {s:?}: {why}"));
        if s == "plsine" {
            return Ok(ProblemDescriptor::PlSine);
        }
        if let Some(body) = s.strip_prefix("quad:") {
            let lambdas = body
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad("curvatures must be numbers"))?;
            return Ok(ProblemDescriptor::Quadratic(lambdas));
        }
        if let Some(path) = s.strip_prefix("logistic:file=") {
            if path.is_empty() {
                return Err(bad("empty path"));
            }
            return Ok(ProblemDescriptor::LogisticFile(PathBuf::from(path)));
        }
        if let Some(body) = s.strip_prefix("logistic:synth=") {
            let parts: Vec<&str> = body.split(',').map(str::trim).collect();
            if !(2..=3).contains(&parts.len()) {
                return Err(bad("expected synth=<n>,<d>[,<flip>]"));
            }
            let n = parts[0].parse().map_err(|_| bad("n must be a count"))?;
            let d = parts[1].parse().map_err(|_| bad("d must be a count"))?;
            let flip = match parts.get(2) {
                Some(p) => p.parse().map_err(|_| bad("flip must be a number"))?,
                None => DEFAULT_FLIP,
            };
            if !(0.0..=1.0).contains(&flip) {
                return Err(bad("flip must lie in [0, 1]"));
            }
            return Ok(ProblemDescriptor::LogisticSynth { n, d, flip });
        }
        Err(bad("expected quad:…, logistic:file=…, logistic:synth=… or plsine"))
    }
}

impl ProblemDescriptor {
    pub fn is_logistic(&self) -> bool {
        matches!(
            self,
            ProblemDescriptor::LogisticFile(_) | ProblemDescriptor::LogisticSynth { .. }
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    Theorem(TheoremId),
    /// Second-moment bound on the momentum buffer.
    MomentBound,
}

impl Check {
    pub const MOMENT_BOUND_ID: &'static str = "lem-m-var";
}

impl FromStr for Check {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == Check::MOMENT_BOUND_ID {
            return Ok(Check::MomentBound);
        }
        s.parse::<TheoremId>()
            .map(Check::Theorem)
            .map_err(|_| CliError::Usage(format!("--check: unknown id {s:?}")))
    }
}

/// One method with the schedule it runs under.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodPlan {
    pub method: Method,
    pub schedule_text: String,
    pub schedule: ScheduleDescriptor,
    /// Native parameters for the constant-parameter special cases.
    pub variant: Option<Variant>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub problem: ProblemDescriptor,
    pub methods: Vec<MethodPlan>,
    pub sigma: Option<f64>,
    pub batch: Option<usize>,
    pub horizon: usize,
    pub seeds: u64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub checks: Vec<Check>,
    pub check_at: Option<Vec<usize>>,
    pub c: Option<f64>,
    pub mu: Option<f64>,
    pub x1: Option<Vec<f64>>,
    pub fstar_iters: usize,
    pub z: f64,
}

fn pair(method: Method, text: &str, sigma: Option<f64>, c: Option<f64>) -> Result<MethodPlan, CliError> {
    let schedule: ScheduleDescriptor = text
        .parse()
        .map_err(|e: gsgdm::schedules::ScheduleError| CliError::Usage(e.to_string()))?;
    let mismatch = || {
        CliError::Usage(format!(
            "method {method} cannot run under schedule {text:?}"
        ))
    };
    let variant = match (method, &schedule) {
        (Method::Gsgdm, ScheduleDescriptor::Const(p)) => {
            let extra = [("alpha", p.alpha), ("s", p.s), ("nu", p.nu), ("lambda", p.lambda)];
            if let Some((k, _)) = extra.iter().find(|(_, v)| v.is_some()) {
                return Err(CliError::Usage(format!(
                    "method gsgdm takes beta, gamma and eta, not {k}"
                )));
            }
            let (Some(b), Some(g), Some(e)) = (p.beta, p.gamma, p.eta) else {
                return Err(CliError::Usage(
                    "method gsgdm with a const schedule needs beta, gamma and eta".into(),
                ));
            };
            ConstantSchedule::new(b, g, e).map_err(|e| CliError::Usage(e.to_string()))?;
            None
        }
        (Method::Gsgdm, ScheduleDescriptor::Accel { gamma, c: dc, .. }) => {
            if *gamma == GammaChoice::Auto {
                let has_c = dc.or(c).is_some_and(|c| c > 0.0);
                let has_sigma = sigma.is_some_and(|s| s > 0.0);
                if !(has_c && has_sigma) {
                    return Err(CliError::Usage(
                        "accel:gamma=auto needs --sigma > 0 and C > 0 (descriptor or --C)".into(),
                    ));
                }
            }
            if let (Some(a), Some(b)) = (dc, c) {
                if a != &b {
                    return Err(CliError::Usage(format!("C={a} in the schedule but --C {b}")));
                }
            }
            None
        }
        (Method::Gsgdm | Method::NagClassic, ScheduleDescriptor::NagClassic { gamma }) => {
            let v = Variant::NagClassic { gamma: *gamma };
            v.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            (method == Method::NagClassic).then_some(v)
        }
        (Method::NagClassic, _) => return Err(mismatch()),
        (m, ScheduleDescriptor::Const(p)) => Some(native_from_const(m, p)?),
        _ => return Err(mismatch()),
    };
    Ok(MethodPlan {
        method,
        schedule_text: text.to_string(),
        schedule,
        variant,
    })
}

/// Native parameters of `method` from a `const:` descriptor. G-SGDM keys the
/// method does not take natively are accepted when they equal the embedded
/// value, so `hb` may spell out `gamma=0`.
fn native_from_const(method: Method, p: &ConstParams) -> Result<Variant, CliError> {
    let native: &[&str] = match method {
        Method::Sgd => &[],
        Method::Hb => &["beta", "eta"],
        Method::Nag => &["beta", "gamma"],
        Method::Sum | Method::Qhm | Method::Mass => &["beta"],
        Method::NagClassic | Method::Gsgdm => unreachable!("handled by the caller"),
    };
    let mut stripped = *p;
    let mut implied = Vec::new();
    for (key, slot) in [
        ("beta", &mut stripped.beta),
        ("gamma", &mut stripped.gamma),
        ("eta", &mut stripped.eta),
    ] {
        if !native.contains(&key) {
            if let Some(v) = slot.take() {
                implied.push((key, v));
            }
        }
    }
    let variant = Variant::from_const(method, &stripped).map_err(|e| CliError::Usage(e.to_string()))?;
    let s = map_constant(&variant).map_err(|e| CliError::Usage(e.to_string()))?;
    for (key, given) in implied {
        let embedded = match key {
            "beta" => s.beta,
            "gamma" => s.gamma,
            _ => s.eta,
        };
        if (given - embedded).abs() > 1e-12 * (1.0 + embedded.abs()) {
            return Err(CliError::Usage(format!(
                "method {method} implies {key}={embedded}, schedule gives {key}={given}"
            )));
        }
    }
    Ok(variant)
}

/// Validate parsed flags into a plan.
pub fn plan_from_args(args: Args) -> Result<ExperimentPlan, CliError> {
    let usage = |m: String| CliError::Usage(m);
    let problem: ProblemDescriptor = args.problem.parse()?;
    if args.iters == 0 {
        return Err(usage("--iters must be at least 1".into()));
    }
    if args.seeds == 0 {
        return Err(usage("--seeds must be at least 1".into()));
    }
    if let Some(s) = args.sigma {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(usage("--sigma must be finite and non-negative".into()));
        }
    }
    match args.batch {
        Some(0) => return Err(usage("--batch must be at least 1".into())),
        Some(_) if !problem.is_logistic() => {
            return Err(usage("--batch needs a logistic problem".into()))
        }
        _ => {}
    }
    if args.batch.is_some() && args.sigma.is_some_and(|s| s == 0.0) {
        return Err(usage("--sigma with --batch is a variance bound and must be positive".into()));
    }
    if let Some(mu) = args.mu {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(usage("--mu must be positive".into()));
        }
    }
    if !(args.z >= 0.0 && args.z.is_finite()) {
        return Err(usage("--z must be non-negative".into()));
    }

    let methods: Vec<Method> = args
        .method
        .iter()
        .map(|m| m.parse::<Method>().map_err(usage))
        .collect::<Result<_, _>>()?;
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].contains(m) {
            return Err(usage(format!("method {m} given twice")));
        }
    }
    let schedules: Vec<&String> = match (args.schedule.len(), methods.len()) {
        (1, n) => vec![&args.schedule[0]; n],
        (s, n) if s == n => args.schedule.iter().collect(),
        (s, n) => {
            return Err(usage(format!(
                "{s} schedules for {n} methods; give one per method or one for all"
            )))
        }
    };
    let plans = methods
        .iter()
        .zip(schedules)
        .map(|(&m, s)| pair(m, s, args.sigma, args.c))
        .collect::<Result<Vec<_>, _>>()?;
    let checks = args
        .check
        .iter()
        .map(|c| c.parse::<Check>())
        .collect::<Result<Vec<_>, _>>()?;

    Ok(ExperimentPlan {
        problem,
        methods: plans,
        sigma: args.sigma,
        batch: args.batch,
        horizon: args.iters,
        seeds: args.seeds,
        seed: args.seed,
        out_dir: args.out,
        checks,
        check_at: (!args.check_at.is_empty()).then_some(args.check_at),
        c: args.c,
        mu: args.mu,
        x1: args.x1,
        fstar_iters: args.fstar_iters,
        z: args.z,
    })
}

/// Parse an argument vector (program name first).
pub fn parse_args<I, T>(argv: I) -> Result<ExperimentPlan, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(CliError::Clap)?;
    plan_from_args(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("gsgdm".to_string())
            .chain(s.split_whitespace().map(String::from))
            .collect()
    }

    #[test]
    fn nonconvex_plan() {
        let p = parse_args(argv(
            "--problem plsine --method hb --schedule const:beta=0.9,gamma=0,eta=0.03 --check thm-nc --iters 10000",
        ))
        .unwrap();
        assert_eq!(p.problem, ProblemDescriptor::PlSine);
        assert_eq!(p.horizon, 10_000);
        assert_eq!(p.seed, 42);
        assert_eq!(p.seeds, 1);
        assert_eq!(p.checks, vec![Check::Theorem(TheoremId::Nc)]);
        assert_eq!(p.methods[0].variant, Some(Variant::Hb { beta: 0.9, eta: 0.03 }));
    }

    #[test]
    fn implied_keys_must_match_embedding() {
        // hb embeds with gamma = 0
        let e = parse_args(argv(
            "--problem plsine --method hb --schedule const:beta=0.9,gamma=0.1,eta=0.03",
        ))
        .unwrap_err();
        assert!(matches!(e, CliError::Usage(_)), "{e}");
        parse_args(argv("--problem plsine --method sgd --schedule const:alpha=0.1,beta=0,eta=0")).unwrap();
    }

    #[test]
    fn auto_gamma_needs_sigma_and_c() {
        for flags in ["", "--sigma 1", "--C 1"] {
            let e = parse_args(argv(&format!(
                "--problem quad:1,4 --method gsgdm --schedule accel:gamma=auto {flags}"
            )))
            .unwrap_err();
            assert!(matches!(e, CliError::Usage(_)), "{flags}: {e}");
        }
        parse_args(argv(
            "--problem quad:1,4 --method gsgdm --schedule accel:gamma=auto --sigma 1 --C 1",
        ))
        .unwrap();
        parse_args(argv(
            "--problem quad:1,4 --method gsgdm --schedule accel:gamma=auto,C=2 --sigma 1",
        ))
        .unwrap();
    }

    #[test]
    fn nag_needs_positive_beta() {
        let e = parse_args(argv(
            "--problem quad:1,4 --method nag --schedule const:beta=0,gamma=0.1",
        ))
        .unwrap_err();
        assert!(e.to_string().contains("beta"), "{e}");
    }

    #[test]
    fn incompatible_pairs() {
        for (m, s) in [
            ("hb", "accel:gamma=0.25"),
            ("nag-classic", "const:beta=0.9,gamma=0.1,eta=0.1"),
            ("qhm", "nag-classic:gamma=0.1"),
            ("gsgdm", "const:beta=0.9,gamma=0.1"),
            ("gsgdm", "const:beta=0.9,gamma=0.1,eta=0.1,alpha=1"),
        ] {
            let r = parse_args(argv(&format!("--problem quad:1,4 --method {m} --schedule {s}")));
            assert!(matches!(r, Err(CliError::Usage(_))), "{m} {s}");
        }
    }

    #[test]
    fn five_methods_five_schedules() {
        let p = parse_args(argv(
            "--problem logistic:synth=100,5 --method sgd,hb,nag,nag-classic,gsgdm \
             --schedule const:alpha=0.1 --schedule const:beta=0.9,eta=0.1 \
             --schedule const:beta=0.9,gamma=0.1 --schedule nag-classic:gamma=0.1 \
             --schedule accel:gamma=0.1 --batch 16",
        ))
        .unwrap();
        assert_eq!(p.methods.len(), 5);
        assert_eq!(p.methods[3].variant, Some(Variant::NagClassic { gamma: 0.1 }));
        let e = parse_args(argv(
            "--problem plsine --method sgd,hb --schedule const:alpha=0.1 --schedule a --schedule b",
        ))
        .unwrap_err();
        assert!(matches!(e, CliError::Usage(_)));
    }

    #[test]
    fn problem_descriptors() {
        assert_eq!(
            "quad:1,4".parse::<ProblemDescriptor>().unwrap(),
            ProblemDescriptor::Quadratic(vec![1.0, 4.0])
        );
        assert_eq!(
            "logistic:synth=10,3".parse::<ProblemDescriptor>().unwrap(),
            ProblemDescriptor::LogisticSynth {
                n: 10,
                d: 3,
                flip: DEFAULT_FLIP
            }
        );
        assert!("quad:a".parse::<ProblemDescriptor>().is_err());
        assert!("logistic:synth=10".parse::<ProblemDescriptor>().is_err());
        assert!("rosenbrock".parse::<ProblemDescriptor>().is_err());
    }

    #[test]
    fn unknown_flag_and_check() {
        assert!(matches!(
            parse_args(argv("--problem plsine --method sgd --schedule const:alpha=0.1 --bogus 1")),
            Err(CliError::Clap(_))
        ));
        assert!(matches!(
            parse_args(argv("--problem plsine --method sgd --schedule const:alpha=0.1 --check thm-x")),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            parse_args(argv("--problem plsine --method sgd --schedule const:alpha=0.1 --batch 4")),
            Err(CliError::Usage(_))
        ));
    }
}
