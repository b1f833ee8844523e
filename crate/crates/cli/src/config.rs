//! Experiment configuration files.
//!
//! A config is a TOML document with the sections `[run]`, `[problem]`,
//! `[schedule]` and one of `[localization]` / `[quadratic]`:
//!
//! ```toml
//! [run]
//! iterations = 200
//! alpha = "optimal"      # or a number
//! rho = "auto"           # or a number
//! sigma = "auto"         # or a number; "auto" is the largest matrix gap
//! m = 6                  # optional override
//! mode = "vectorized"    # or "netsim"
//!
//! [problem]
//! kind = "localization"  # or "quadratic"
//!
//! [localization]
//! target = [1.0, 1.0]
//! positions = [[0.3, 1.7], [1.9, 0.2]]
//!
//! [schedule]
//! kind = "random"        # "constant", "cyclic", "random"
//! seed = 11
//! builtin = "five-agent-pair"
//! # or explicit matrices, one string per row:
//! # matrices = [["1/2, 1/2", "1/2, 1/2"]]
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use gossipgd::algorithm::{initial_states, AgentState, AlgorithmParams};
use gossipgd::gossip::{parse_row, ScheduleKind, ScheduleOptions, DEFAULT_STOCHASTIC_TOL};
use gossipgd::localization::{five_agent_gossip_pair, localization_problem, optimal_stepsize, LocalizationConfig};
use gossipgd::objective::{params_from_one_point_convexity, seeded_quadratic_problem, StrongSmoothParams};
use gossipgd::{ExactGossipMatrix, GossipMatrix, GossipSchedule, Problem64};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::CliError;

/// A number, or a keyword asking for the value to be derived.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Value(f64),
    Keyword(Derived),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Derived {
    Auto,
    Optimal,
}

impl Default for Param {
    fn default() -> Self {
        Param::Keyword(Derived::Auto)
    }
}

impl Param {
    fn value(self) -> Option<f64> {
        match self {
            Param::Value(v) => Some(v),
            Param::Keyword(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Vectorized,
    Netsim,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub alpha: Param,
    #[serde(default)]
    pub rho: Param,
    #[serde(default)]
    pub sigma: Param,
    pub m: Option<usize>,
    #[serde(default)]
    pub mode: Mode,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Quadratic,
    Localization,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: ProblemKind,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationSection {
    pub target: [f64; 2],
    /// Explicit agent positions; when absent, `agents` positions are drawn
    /// from `seed`.
    pub positions: Option<Vec<[f64; 2]>>,
    pub agents: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default = "default_box")]
    pub bounds: [f64; 2],
    #[serde(default = "default_exclusion")]
    pub exclusion: f64,
}

fn default_box() -> [f64; 2] {
    [0.0, 2.0]
}

fn default_exclusion() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSection {
    pub agents: usize,
    pub dim: usize,
    pub mu: f64,
    pub l: f64,
    #[serde(default)]
    pub seed: u64,
    /// Half-width of the box the initial `x_i⁰` are drawn from.
    #[serde(default = "default_spread")]
    pub spread: f64,
}

fn default_spread() -> f64 {
    5.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub nonnegative: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub builtin: Option<String>,
    pub matrices: Option<Vec<Vec<String>>>,
}

fn default_tol() -> f64 {
    DEFAULT_STOCHASTIC_TOL
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_samples() -> usize {
    1000
}

fn default_radius() -> f64 {
    gossipgd::objective::DEFAULT_SAMPLE_RADIUS
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self { samples: default_samples(), radius: default_radius() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub problem: ProblemSection,
    pub schedule: ScheduleSection,
    pub localization: Option<LocalizationSection>,
    pub quadratic: Option<QuadraticSection>,
    #[serde(default)]
    pub validate: ValidateSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// A config resolved into library objects.
#[derive(Debug)]
pub struct Experiment {
    pub problem: Problem64,
    /// Matrices as written, before conversion to `f64`.
    pub exact_matrices: Vec<ExactGossipMatrix>,
    pub schedule: GossipSchedule<f64>,
    pub params: AlgorithmParams<f64>,
    pub initial: Vec<AgentState<f64>>,
    pub iterations: usize,
    pub mode: Mode,
    pub output: Option<PathBuf>,
    pub schedule_tol: f64,
    pub require_nonnegative: bool,
    pub validate: ValidateSection,
}

impl Experiment {
    pub fn optimizer(&self) -> &[f64] {
        self.problem.optimizer().expect("both problem kinds know their optimiser")
    }
}

fn config_err(e: gossipgd::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn exact_complete(n: usize) -> ExactGossipMatrix {
    let w = Rational64::new(1, n as i64);
    GossipMatrix::new(n, vec![w; n * n]).expect("square")
}

fn exact_ring(n: usize) -> ExactGossipMatrix {
    if n <= 2 {
        return exact_complete(n);
    }
    let mut w = vec![Rational64::from_integer(0); n * n];
    for i in 0..n {
        for j in [(i + n - 1) % n, i, (i + 1) % n] {
            w[i * n + j] = Rational64::new(1, 3);
        }
    }
    GossipMatrix::new(n, w).expect("square")
}

fn exact_identity(n: usize) -> ExactGossipMatrix {
    let mut w = vec![Rational64::from_integer(0); n * n];
    for i in 0..n {
        w[i * n + i] = Rational64::from_integer(1);
    }
    GossipMatrix::new(n, w).expect("square")
}

fn schedule_matrices(s: &ScheduleSection, n: usize) -> Result<Vec<ExactGossipMatrix>, CliError> {
    match (&s.builtin, &s.matrices) {
        (Some(_), Some(_)) => Err(CliError::Config("give either `builtin` or `matrices`, not both".into())),
        (None, None) => Err(CliError::Config("schedule needs `builtin` or `matrices`".into())),
        (Some(name), None) => Ok(match name.as_str() {
            "five-agent-pair" => {
                let (a, b) = five_agent_gossip_pair();
                vec![a, b]
            }
            "five-agent-first" => vec![five_agent_gossip_pair().0],
            "five-agent-second" => vec![five_agent_gossip_pair().1],
            "ring" => vec![exact_ring(n)],
            "complete" => vec![exact_complete(n)],
            "identity" => vec![exact_identity(n)],
            other => return Err(CliError::Config(format!("unknown builtin schedule `{other}`"))),
        }),
        (None, Some(list)) => list
            .iter()
            .map(|rows| {
                let rows = rows.iter().map(|r| parse_row(r)).collect::<Result<Vec<_>, _>>().map_err(config_err)?;
                GossipMatrix::from_rows(rows).map_err(config_err)
            })
            .collect(),
    }
}

fn build_localization(cfg: &RunConfig) -> Result<(Problem64, Vec<AgentState<f64>>, LocalizationConfig<f64>), CliError> {
    let sec = cfg
        .localization
        .as_ref()
        .ok_or_else(|| CliError::Config("problem kind `localization` needs a [localization] section".into()))?;
    let loc = match (&sec.positions, sec.seed) {
        (Some(p), _) => LocalizationConfig::new(p.clone(), sec.target),
        (None, Some(seed)) => {
            let n = sec.agents.unwrap_or(5);
            LocalizationConfig::seeded(n, sec.target, sec.bounds[0], sec.bounds[1], sec.exclusion, seed)
        }
        (None, None) => return Err(CliError::Config("[localization] needs `positions` or `seed`".into())),
    }
    .map_err(config_err)?;
    let problem = localization_problem(&loc).map_err(config_err)?;
    let initial = initial_states(loc.positions().iter().map(|p| p.to_vec()).collect());
    Ok((problem, initial, loc))
}

fn build_quadratic(cfg: &RunConfig) -> Result<(Problem64, Vec<AgentState<f64>>, StrongSmoothParams<f64>), CliError> {
    let sec = cfg
        .quadratic
        .as_ref()
        .ok_or_else(|| CliError::Config("problem kind `quadratic` needs a [quadratic] section".into()))?;
    let sp = StrongSmoothParams::new(sec.mu, sec.l).map_err(config_err)?;
    let problem = seeded_quadratic_problem(sec.agents, sec.dim, &sp, sec.seed).map_err(config_err)?;
    let xstar = problem.optimizer().expect("seeded problems know x*").to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let xs = (0..sec.agents)
        .map(|_| xstar.iter().map(|c| c + sec.spread * (2.0 * rng.random::<f64>() - 1.0)).collect())
        .collect();
    Ok((problem, initial_states(xs), sp))
}

/// Builds the problem, schedule and parameters described by `cfg`.
pub fn build(cfg: &RunConfig) -> Result<Experiment, CliError> {
    let (problem, initial, alpha, rho) = match cfg.problem.kind {
        ProblemKind::Localization => {
            let (problem, initial, loc) = build_localization(cfg)?;
            let alpha = match cfg.run.alpha.value() {
                Some(a) => a,
                None => optimal_stepsize(&problem, &loc.target()).map_err(config_err)?,
            };
            let rho = cfg.run.rho.value().unwrap_or_else(|| loc.centralized_rate(alpha));
            (problem, initial, alpha, rho)
        }
        ProblemKind::Quadratic => {
            let (problem, initial, sp) = build_quadratic(cfg)?;
            let cp = params_from_one_point_convexity(&sp);
            let alpha = cfg.run.alpha.value().unwrap_or(cp.alpha);
            let rho = cfg.run.rho.value().unwrap_or(cp.rho);
            (problem, initial, alpha, rho)
        }
    };

    let n = problem.n();
    let exact_matrices = schedule_matrices(&cfg.schedule, n)?;
    let kind = ScheduleKind::from_str(&cfg.schedule.kind).map_err(config_err)?;
    let matrices = exact_matrices
        .iter()
        .map(|w| w.to_scalar::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(config_err)?;
    let options = ScheduleOptions { tol: cfg.schedule.tol, require_nonnegative: cfg.schedule.nonnegative };
    let schedule = GossipSchedule::new(kind, matrices, cfg.schedule.seed, options).map_err(config_err)?;
    if schedule.n() != n {
        return Err(CliError::Config(format!("schedule is {0}x{0} but the problem has {n} agents", schedule.n())));
    }

    let sigma = match cfg.run.sigma.value() {
        Some(s) => s,
        None => schedule.max_gap(),
    };
    let mut params = AlgorithmParams::new(alpha, rho, sigma).map_err(config_err)?;
    if let Some(m) = cfg.run.m {
        params = params.with_m(m).map_err(config_err)?;
    }
    if cfg.run.iterations == 0 {
        return Err(CliError::Config("iterations must be positive".into()));
    }

    Ok(Experiment {
        problem,
        exact_matrices,
        schedule,
        params,
        initial,
        iterations: cfg.run.iterations,
        mode: cfg.run.mode,
        output: cfg.run.output.clone(),
        schedule_tol: cfg.schedule.tol,
        require_nonnegative: cfg.schedule.nonnegative,
        validate: cfg.validate.clone(),
    })
}
