use std::fmt;
use std::io::Write;
use std::str::FromStr;

use gossipgd::algorithm::{centralized_gd, comm_rounds, run, sigma0};
use gossipgd::analysis::{fit_rate, lyapunov_trace_with, FixedPoint, DEFAULT_TAIL_FRACTION};
use gossipgd::linalg;
use gossipgd::netsim::{locality_audit, run_netsim, NetsimOptions};
use gossipgd::objective::{check_contraction, sample_ball, ContractionParams};
use gossipgd::RunTrace64;
use num_rational::Rational64;

use crate::config::{Experiment, Mode};
use crate::CliError;

fn runtime(e: gossipgd::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Metadata and fitted rates of one `run`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: Mode,
    pub alpha: f64,
    pub rho: f64,
    pub sigma: f64,
    pub m: usize,
    pub m_overridden: bool,
    pub lambda: f64,
    pub iterations: usize,
    pub gradient_evals: usize,
    pub row_communications: usize,
    pub messages: usize,
    pub final_max_error: f64,
    pub final_centralized_error: f64,
    pub decentralized_rate: Option<f64>,
    pub centralized_rate: Option<f64>,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rate = |r: Option<f64>| r.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
        writeln!(f, "mode                 {:?}", self.mode)?;
        writeln!(f, "alpha                {}", self.alpha)?;
        writeln!(f, "rho                  {}", self.rho)?;
        writeln!(f, "sigma                {}", self.sigma)?;
        writeln!(f, "m                    {}{}", self.m, if self.m_overridden { " (override)" } else { "" })?;
        writeln!(f, "lambda               {}", self.lambda)?;
        writeln!(f, "iterations           {}", self.iterations)?;
        writeln!(f, "gradient evaluations {}", self.gradient_evals)?;
        writeln!(f, "row communications   {}", self.row_communications)?;
        writeln!(f, "messages             {}", self.messages)?;
        writeln!(f, "final max error      {:e}", self.final_max_error)?;
        writeln!(f, "final centralized    {:e}", self.final_centralized_error)?;
        writeln!(f, "fitted rate          {}", rate(self.decentralized_rate))?;
        write!(f, "centralized rate     {}", rate(self.centralized_rate))
    }
}

fn execute(exp: &Experiment) -> Result<RunTrace64, CliError> {
    match exp.mode {
        Mode::Vectorized => {
            run(&exp.problem, &exp.schedule, &exp.params, exp.initial.clone(), exp.iterations).map_err(runtime)
        }
        Mode::Netsim => {
            let out = run_netsim(
                &exp.problem,
                &exp.schedule,
                &exp.params,
                exp.initial.clone(),
                exp.iterations,
                &NetsimOptions::default(),
            )
            .map_err(runtime)?;
            let audit = locality_audit(&out.ledger, &exp.schedule, exp.params.m);
            if !audit.passed() {
                return Err(CliError::Runtime(format!(
                    "locality audit failed: {} zero-weight deliveries, {} foreign row reads",
                    audit.zero_weight_deliveries.len(),
                    audit.foreign_row_reads.len()
                )));
            }
            Ok(out.trace)
        }
    }
}

/// Runs the experiment, writes the trace CSV to `out` and returns the
/// summary.
pub fn cmd_run(exp: &Experiment, out: impl Write) -> Result<RunSummary, CliError> {
    let trace = execute(exp)?;
    let xstar = exp.optimizer();
    let errors = trace.agent_errors(xstar);
    if let Some((k, _)) = errors.iter().enumerate().find(|(_, row)| row.iter().any(|e| !e.is_finite())) {
        return Err(CliError::Runtime(format!("iterates became non-finite at iteration {k}")));
    }
    let fixed = FixedPoint::new(&exp.problem, &exp.params).map_err(runtime)?;
    let lyap = lyapunov_trace_with(&fixed, &trace).map_err(runtime)?.values();

    let n = exp.initial.len();
    let mut x0 = vec![0.0; xstar.len()];
    for s in &exp.initial {
        x0 = linalg::axpy(&x0, 1.0 / n as f64, &s.x);
    }
    let central = centralized_gd(&exp.problem, exp.params.alpha, x0, exp.iterations).map_err(runtime)?;
    let central_err: Vec<f64> = central.iter().map(|x| linalg::norm(&linalg::sub(x, xstar))).collect();
    if central_err.iter().any(|e| !e.is_finite()) {
        return Err(CliError::Runtime("centralized iterates became non-finite".into()));
    }

    let m = exp.params.m;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "step", "agent", "error", "lyapunov"])?;
    for (k, row) in errors.iter().enumerate() {
        let (iter, step, v) = (k.to_string(), (k * m).to_string(), format!("{:e}", lyap[k]));
        for (i, e) in row.iter().enumerate() {
            w.write_record([iter.as_str(), &step, &i.to_string(), &format!("{e:e}"), &v])?;
        }
    }
    for (k, e) in central_err.iter().enumerate() {
        w.write_record([k.to_string(), k.to_string(), "centralized".into(), format!("{e:e}"), String::new()])?;
    }
    w.flush()?;

    let max_err = trace.max_errors(xstar);
    Ok(RunSummary {
        mode: exp.mode,
        alpha: exp.params.alpha,
        rho: exp.params.rho,
        sigma: exp.params.sigma,
        m,
        m_overridden: exp.params.m_overridden,
        lambda: exp.params.lambda,
        iterations: exp.iterations,
        gradient_evals: trace.gradient_evals,
        row_communications: trace.row_communications,
        messages: trace.messages,
        final_max_error: *max_err.last().expect("nonempty"),
        final_centralized_error: *central_err.last().expect("nonempty"),
        decentralized_rate: fit_rate(&max_err, DEFAULT_TAIL_FRACTION).ok(),
        centralized_rate: fit_rate(&central_err, DEFAULT_TAIL_FRACTION).ok(),
    })
}

/// Grid axis: `lo:hi` (evenly spaced, with a resolution) or an explicit
/// comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    Range(f64, f64),
    List(Vec<f64>),
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number `{t}`: {e}"));
        if let Some((lo, hi)) = s.split_once(':') {
            Ok(Axis::Range(num(lo)?, num(hi)?))
        } else {
            Ok(Axis::List(s.split(',').map(num).collect::<Result<_, _>>()?))
        }
    }
}

impl Axis {
    /// Points of the axis; every point must lie in `(0, 1)`.
    pub fn points(&self, resolution: usize) -> Result<Vec<f64>, CliError> {
        let pts = match self {
            Axis::Range(lo, hi) => {
                if resolution < 2 {
                    return Err(CliError::Config(format!("resolution must be at least 2, got {resolution}")));
                }
                if !(lo < hi) {
                    return Err(CliError::Config(format!("empty range {lo}:{hi}")));
                }
                (0..resolution).map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64).collect()
            }
            Axis::List(v) => v.clone(),
        };
        if pts.is_empty() {
            return Err(CliError::Config("axis has no points".into()));
        }
        if let Some(bad) = pts.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(CliError::Config(format!("axis value {bad} outside (0, 1)")));
        }
        Ok(pts)
    }
}

/// `rho,sigma,m` over the grid.
pub fn cmd_grid(rho: &Axis, sigma: &Axis, resolution: usize, out: impl Write) -> Result<(), CliError> {
    let (rs, ss) = (rho.points(resolution)?, sigma.points(resolution)?);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rho", "sigma", "m"])?;
    for &r in &rs {
        for &s in &ss {
            let m = comm_rounds(r, s).map_err(|e| CliError::Config(e.to_string()))?;
            w.write_record([r.to_string(), s.to_string(), m.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `rho,sigma,m,per_step_rate` with `per_step_rate = ρ^{1/m}`.
pub fn cmd_rates(rho: &Axis, sigma: &Axis, resolution: usize, out: impl Write) -> Result<(), CliError> {
    let (rs, ss) = (rho.points(resolution)?, sigma.points(resolution)?);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rho", "sigma", "m", "per_step_rate"])?;
    for &r in &rs {
        for &s in &ss {
            let m = comm_rounds(r, s).map_err(|e| CliError::Config(e.to_string()))?;
            let rate = r.powf(1.0 / m as f64);
            w.write_record([r.to_string(), s.to_string(), m.to_string(), rate.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `r,s,m` with `m = max(1, ⌈log_s σ₀(r)⌉)` for `r ∈ [ρ, r_max]`,
/// `s ∈ [σ, s_max]`. Returns the value at the corner `(ρ, σ)` and the
/// smallest value on the grid.
pub fn cmd_explore_m(
    rho: f64,
    sigma: f64,
    r_max: f64,
    s_max: f64,
    resolution: usize,
    out: impl Write,
) -> Result<(usize, usize), CliError> {
    let rs = Axis::Range(rho, r_max).points(resolution)?;
    let ss = Axis::Range(sigma, s_max).points(resolution)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "s", "m"])?;
    let mut smallest = usize::MAX;
    for &r in &rs {
        for &s in &ss {
            let m = comm_rounds(r, s).map_err(|e| CliError::Config(e.to_string()))?;
            smallest = smallest.min(m);
            w.write_record([r.to_string(), s.to_string(), m.to_string()])?;
        }
    }
    w.flush()?;
    let corner = comm_rounds(rho, sigma).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((corner, smallest))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Checks the assumptions behind the convergence guarantee for `exp`.
pub fn cmd_validate(exp: &Experiment) -> Result<ValidationReport, CliError> {
    let mut report = ValidationReport::default();
    let tol = Rational64::approximate_float(exp.schedule_tol)
        .filter(|t| *t > Rational64::from_integer(0))
        .ok_or_else(|| CliError::Config(format!("schedule tolerance {} is not usable", exp.schedule_tol)))?;
    for (idx, w) in exp.exact_matrices.iter().enumerate() {
        let r = w.validate_doubly_stochastic(tol).map_err(|e| CliError::Config(e.to_string()))?;
        report.push(
            format!("doubly stochastic [{idx}]"),
            r.passed,
            format!("max deviation {} (tol {})", r.max_deviation, exp.schedule_tol),
        );
        if exp.require_nonnegative {
            report.push(format!("nonnegative [{idx}]"), w.is_nonnegative(), "");
        }
    }

    let sigma = exp.params.sigma;
    for (idx, w) in exp.schedule.matrices().iter().enumerate() {
        let gap = w.spectral_gap();
        report.push(format!("spectral gap [{idx}]"), gap <= sigma, format!("{gap:.10} vs sigma {sigma}"));
    }

    let s0 = sigma0(exp.params.rho).map_err(|e| CliError::Config(e.to_string()))?;
    let power = sigma.powi(exp.params.m as i32);
    report.push(
        "consensus contraction",
        exp.params.satisfies_consensus_bound(),
        format!("sigma^m = {power:.6} vs sigma0(rho) = {s0:.6} (m = {})", exp.params.m),
    );

    let xstar = exp.optimizer();
    let cp = ContractionParams::new(exp.params.alpha, exp.params.rho).map_err(|e| CliError::Config(e.to_string()))?;
    let samples = sample_ball(xstar, exp.validate.radius, exp.validate.samples, 0);
    for (i, f) in exp.problem.locals().iter().enumerate() {
        match check_contraction(f.as_ref(), xstar, &cp, &samples) {
            Ok(r) => report.push(
                format!("local contraction [{i}]"),
                r.passed,
                format!("max ratio {:.6} vs rho {} over {} samples", r.max_ratio, exp.params.rho, r.checked),
            ),
            Err(e) => report.push(format!("local contraction [{i}]"), false, e.to_string()),
        }
    }

    let n = exp.problem.n();
    let sum = exp.problem.gradient_sum(xstar).map_err(runtime)?;
    let residual = linalg::norm(&sum);
    let bound = 1e-6 * n as f64;
    report.push("gradients sum to zero", residual <= bound, format!("|sum grad f_i(x*)| = {residual:e} (bound {bound:e})"));
    Ok(report)
}
