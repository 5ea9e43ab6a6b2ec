//! Experiment orchestration: wire a graph, weights, objective, algorithm,
//! and step sizes together, run to a budget, and record residuals plus
//! invariant diagnostics.
//!
//! Each run owns its state exclusively, so distinct experiments can execute
//! concurrently; trace serialization is per-run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algorithms::{
    ab_init, ab_step, add_opt_init, add_opt_step, dgd_init, dgd_step, frost_init, frost_step,
    frost_tracking_error, gt_ds_init, gt_ds_step, mass_conservation_error, row_sublinear_init,
    row_sublinear_step, subgradient_push_init, subgradient_push_step, tracker_conservation_error,
    NetworkState, Schedule, StepSizes,
};
use crate::digraph::{gen_random_strongly_connected, gen_ring, symmetrize, Digraph};
use crate::error::{FrostError, Result};
use crate::oracle::{fit_linear_rate, solve_centralized, RateFit};
use crate::problems::{
    gen_logistic_data, gen_quadratic_suite, logistic_objective, LogisticObjective, Objective,
    QuadraticObjective, SmoothnessConstants,
};
use crate::weights::{
    column_stochastic_uniform, contraction_estimate, doubly_stochastic_metropolis, perron_left,
    row_stochastic_uniform, StochasticMatrix,
};

/// Default iteration budget: desk-scale, seconds-level runs.
pub const DEFAULT_BUDGET: usize = 50_000;

/// Default residual target.
pub const DEFAULT_TARGET: f64 = 1e-10;

/// Default invariant-check cadence (iterations between diagnostics).
pub const DEFAULT_CADENCE: usize = 10;

/// Abort threshold: residual exceeding this multiple of the initial
/// residual counts as divergence. Tuning grids include unstable step
/// sizes by design, so this is an expected exit, not a bug.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// The iteration engines the harness can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Frost,
    Dgd,
    GradientTracking,
    SubgradientPush,
    AddOpt,
    Ab,
    RowSublinear,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Frost => "frost",
            Algorithm::Dgd => "dgd",
            Algorithm::GradientTracking => "gt",
            Algorithm::SubgradientPush => "subgradient-push",
            Algorithm::AddOpt => "add-opt",
            Algorithm::Ab => "ab",
            Algorithm::RowSublinear => "row-sublinear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "frost" => Ok(Algorithm::Frost),
            "dgd" => Ok(Algorithm::Dgd),
            "gt" => Ok(Algorithm::GradientTracking),
            "subgradient-push" => Ok(Algorithm::SubgradientPush),
            "add-opt" => Ok(Algorithm::AddOpt),
            "ab" => Ok(Algorithm::Ab),
            "row-sublinear" => Ok(Algorithm::RowSublinear),
            other => Err(FrostError::Parse(format!("unknown algorithm '{other}'"))),
        }
    }

    /// Diminishing-step methods; everything else runs constant steps by
    /// default.
    pub fn default_schedule(self) -> Schedule {
        match self {
            Algorithm::SubgradientPush | Algorithm::RowSublinear => Schedule::Diminishing,
            _ => Schedule::Constant,
        }
    }
}

/// How to obtain the communication graph.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Ring(usize),
    Random { n: usize, fraction: f64, seed: u64 },
    File(String),
}

impl GraphSpec {
    /// Compact shell-friendly form: `ring:N`, `rand:N:frac:seed`,
    /// `file:PATH`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || FrostError::Parse(format!("bad graph spec '{s}'"));
        if let Some(rest) = s.strip_prefix("ring:") {
            return Ok(GraphSpec::Ring(rest.parse().map_err(|_| bad())?));
        }
        if let Some(rest) = s.strip_prefix("rand:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            return Ok(GraphSpec::Random {
                n: parts[0].parse().map_err(|_| bad())?,
                fraction: parts[1].parse().map_err(|_| bad())?,
                seed: parts[2].parse().map_err(|_| bad())?,
            });
        }
        if let Some(rest) = s.strip_prefix("file:") {
            return Ok(GraphSpec::File(rest.to_string()));
        }
        Err(bad())
    }

    pub fn render(&self) -> String {
        match self {
            GraphSpec::Ring(n) => format!("ring:{n}"),
            GraphSpec::Random { n, fraction, seed } => format!("rand:{n}:{fraction}:{seed}"),
            GraphSpec::File(p) => format!("file:{p}"),
        }
    }

    pub fn build(&self) -> Result<Digraph> {
        match self {
            GraphSpec::Ring(n) => Ok(gen_ring(*n)),
            GraphSpec::Random { n, fraction, seed } => {
                gen_random_strongly_connected(*n, *fraction, *seed)
            }
            GraphSpec::File(path) => {
                let text = std::fs::read_to_string(path)?;
                Digraph::from_edge_list_text(&text)
            }
        }
    }
}

/// Which objective family to instantiate over the graph's agents.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    /// Random quadratic suite of the given dimension.
    Quadratic { dim: usize },
    /// Regularized logistic regression on synthetic data; the decision
    /// variable is `(w, b)` of dimension `dim + 1`.
    Logistic { dim: usize, samples: usize, lambda: f64 },
}

impl ProblemSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ProblemSpec::Quadratic { .. } => "quadratic",
            ProblemSpec::Logistic { .. } => "logistic",
        }
    }
}

/// Scalar vs per-agent step sizes; the schedule is carried separately.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSpec {
    Scalar(f64),
    PerAgent(Vec<f64>),
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub algorithm: Algorithm,
    pub steps: StepSpec,
    pub schedule: Schedule,
    pub problem: ProblemSpec,
    pub budget: usize,
    pub target: f64,
    pub cadence: usize,
    /// Seed for problem data and the initial iterate.
    pub seed: u64,
}

impl ExperimentConfig {
    /// Sensible defaults: quadratic suite, scalar step, constant schedule.
    pub fn new(graph: GraphSpec, algorithm: Algorithm, alpha: f64) -> Self {
        ExperimentConfig {
            graph,
            algorithm,
            steps: StepSpec::Scalar(alpha),
            schedule: algorithm.default_schedule(),
            problem: ProblemSpec::Quadratic { dim: 5 },
            budget: DEFAULT_BUDGET,
            target: DEFAULT_TARGET,
            cadence: DEFAULT_CADENCE,
            seed: 0,
        }
    }

    pub fn with_problem(mut self, problem: ProblemSpec) -> Self {
        self.problem = problem;
        self
    }

    pub fn with_steps(mut self, steps: StepSpec) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Flat key=value form, the same keys the CLI flags map onto.
    pub fn to_key_values(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("alg".into(), self.algorithm.name().into());
        m.insert("graph".into(), self.graph.render());
        m.insert("problem".into(), self.problem.kind_name().into());
        match &self.problem {
            ProblemSpec::Quadratic { dim } => {
                m.insert("dim".into(), dim.to_string());
            }
            ProblemSpec::Logistic { dim, samples, lambda } => {
                m.insert("dim".into(), dim.to_string());
                m.insert("samples".into(), samples.to_string());
                m.insert("lambda".into(), lambda.to_string());
            }
        }
        match &self.steps {
            StepSpec::Scalar(a) => {
                m.insert("alpha".into(), a.to_string());
            }
            StepSpec::PerAgent(v) => {
                let joined: Vec<String> = v.iter().map(|a| a.to_string()).collect();
                m.insert("alphas".into(), joined.join(","));
            }
        }
        m.insert(
            "schedule".into(),
            match self.schedule {
                Schedule::Constant => "constant".into(),
                Schedule::Diminishing => "diminishing".into(),
            },
        );
        m.insert("iters".into(), self.budget.to_string());
        m.insert("target".into(), self.target.to_string());
        m.insert("cadence".into(), self.cadence.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m
    }

    /// Inverse of [`to_key_values`]: unknown keys are rejected so typos in
    /// config files fail loudly.
    pub fn from_key_values(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let parse_num = |k: &str, v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| FrostError::Parse(format!("key '{k}': bad number '{v}'")))
        };
        let parse_usize = |k: &str, v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| FrostError::Parse(format!("key '{k}': bad integer '{v}'")))
        };

        let known = [
            "alg", "graph", "problem", "dim", "samples", "lambda", "alpha", "alphas", "schedule",
            "iters", "target", "cadence", "seed",
        ];
        for k in map.keys() {
            if !known.contains(&k.as_str()) {
                return Err(FrostError::Parse(format!("unknown config key '{k}'")));
            }
        }

        let algorithm = Algorithm::parse(
            get("alg").ok_or_else(|| FrostError::Parse("missing key 'alg'".into()))?,
        )?;
        let graph = GraphSpec::parse(
            get("graph").ok_or_else(|| FrostError::Parse("missing key 'graph'".into()))?,
        )?;

        let problem = match get("problem").unwrap_or("quadratic") {
            "quadratic" => ProblemSpec::Quadratic {
                dim: match get("dim") {
                    Some(v) => parse_usize("dim", v)?,
                    None => 5,
                },
            },
            "logistic" => ProblemSpec::Logistic {
                dim: match get("dim") {
                    Some(v) => parse_usize("dim", v)?,
                    None => 10,
                },
                samples: match get("samples") {
                    Some(v) => parse_usize("samples", v)?,
                    None => 20,
                },
                lambda: match get("lambda") {
                    Some(v) => parse_num("lambda", v)?,
                    None => 0.1,
                },
            },
            other => return Err(FrostError::Parse(format!("unknown problem '{other}'"))),
        };

        let steps = match (get("alpha"), get("alphas")) {
            (Some(_), Some(_)) => {
                return Err(FrostError::Parse("give 'alpha' or 'alphas', not both".into()))
            }
            (Some(a), None) => StepSpec::Scalar(parse_num("alpha", a)?),
            (None, Some(list)) => {
                let mut v = Vec::new();
                for part in list.split(',') {
                    v.push(parse_num("alphas", part.trim())?);
                }
                StepSpec::PerAgent(v)
            }
            (None, None) => return Err(FrostError::Parse("missing key 'alpha'".into())),
        };

        let schedule = match get("schedule") {
            None => algorithm.default_schedule(),
            Some("constant") => Schedule::Constant,
            Some("diminishing") => Schedule::Diminishing,
            Some(other) => {
                return Err(FrostError::Parse(format!("unknown schedule '{other}'")))
            }
        };

        Ok(ExperimentConfig {
            graph,
            algorithm,
            steps,
            schedule,
            problem,
            budget: match get("iters") {
                Some(v) => parse_usize("iters", v)?,
                None => DEFAULT_BUDGET,
            },
            target: match get("target") {
                Some(v) => parse_num("target", v)?,
                None => DEFAULT_TARGET,
            },
            cadence: match get("cadence") {
                Some(v) => parse_usize("cadence", v)?.max(1),
                None => DEFAULT_CADENCE,
            },
            seed: match get("seed") {
                Some(v) => v
                    .parse()
                    .map_err(|_| FrostError::Parse(format!("key 'seed': bad integer '{v}'")))?,
                None => 0,
            },
        })
    }
}

/// Parse a flat `key=value` config file; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| FrostError::Parse(format!("line {}: expected key=value", lineno + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Invariant diagnostics sampled every `cadence` iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagSample {
    pub iter: usize,
    /// FROST weighted tracking-identity error, if the algorithm has one.
    pub track_err: Option<f64>,
    /// Push-sum mass drift or tracker-sum error, if applicable.
    pub mass_err: Option<f64>,
}

/// One run's record: residual per iteration (including k=0), diagnostics
/// per cadence, and the final stacked estimates.
#[derive(Debug, Clone)]
pub struct Trace {
    pub residuals: Vec<f64>,
    pub diagnostics: Vec<DiagSample>,
    pub iters_to_target: Option<usize>,
    pub wall_time: Duration,
    /// Final per-agent estimates (`n x p`).
    pub final_estimates: DMatrix<f64>,
    /// Centralized optimum the residuals are measured against.
    pub x_star: DVector<f64>,
}

impl Trace {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("trace has at least k=0")
    }

    /// Network-average of the final estimates, the consensus point.
    pub fn consensus_point(&self) -> DVector<f64> {
        let n = self.final_estimates.nrows();
        let p = self.final_estimates.ncols();
        DVector::from_fn(p, |j, _| {
            (0..n).map(|i| self.final_estimates[(i, j)]).sum::<f64>() / n as f64
        })
    }

    pub fn max_track_err(&self) -> f64 {
        self.diagnostics
            .iter()
            .filter_map(|d| d.track_err)
            .fold(0.0, f64::max)
    }

    pub fn max_mass_err(&self) -> f64 {
        self.diagnostics
            .iter()
            .filter_map(|d| d.mass_err)
            .fold(0.0, f64::max)
    }

    /// Residual stalls: relative change below `rel_change` over the last
    /// `window` iterations while still above `target`.
    pub fn plateaued(&self, target: f64, window: usize, rel_change: f64) -> bool {
        let m = self.residuals.len();
        if m <= window {
            return false;
        }
        let old = self.residuals[m - 1 - window];
        let new = self.residuals[m - 1];
        new > target && old > 0.0 && ((old - new).abs() / old) < rel_change
    }

    /// CSV with header `iter,residual,track_err,mass_err`; diagnostics are
    /// NaN on non-cadence rows (and for algorithms that lack them).
    pub fn to_csv(&self) -> String {
        let mut diag = BTreeMap::new();
        for d in &self.diagnostics {
            diag.insert(d.iter, (d.track_err, d.mass_err));
        }
        let mut out = String::from("iter,residual,track_err,mass_err\n");
        for (k, r) in self.residuals.iter().enumerate() {
            let (t, m) = diag
                .get(&k)
                .copied()
                .unwrap_or((None, None));
            let _ = writeln!(
                out,
                "{k},{:.16e},{:.16e},{:.16e}",
                r,
                t.unwrap_or(f64::NAN),
                m.unwrap_or(f64::NAN)
            );
        }
        out
    }
}

/// Residual `(1/n) sum_i ||x_i^k - x*||_2`.
pub fn residual(estimates: &DMatrix<f64>, x_star: &DVector<f64>) -> f64 {
    let n = estimates.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let mut sq = 0.0;
        for j in 0..estimates.ncols() {
            let d = estimates[(i, j)] - x_star[j];
            sq += d * d;
        }
        total += sq.sqrt();
    }
    total / n as f64
}

/// Instantiated problem: the trait object plus its constants.
pub struct BuiltProblem {
    pub objective: Box<dyn Objective>,
    pub constants: SmoothnessConstants,
}

/// Build the configured objective over `n` agents.
pub fn build_problem(spec: &ProblemSpec, n: usize, seed: u64) -> BuiltProblem {
    match spec {
        ProblemSpec::Quadratic { dim } => {
            let (obj, constants): (QuadraticObjective, _) = gen_quadratic_suite(n, *dim, seed);
            BuiltProblem { objective: Box::new(obj), constants }
        }
        ProblemSpec::Logistic { dim, samples, lambda } => {
            let data = gen_logistic_data(n, *samples, *dim, *lambda, seed);
            let (obj, constants): (LogisticObjective, _) = logistic_objective(data);
            BuiltProblem { objective: Box::new(obj), constants }
        }
    }
}

/// Weight matrices an engine needs; unused kinds stay `None`.
struct Weights {
    row: Option<StochasticMatrix>,
    col: Option<StochasticMatrix>,
    doubly: Option<StochasticMatrix>,
}

/// Build only the weight kinds the algorithm consumes. Doubly-stochastic
/// methods get Metropolis weights on the symmetrized graph, since they are
/// undirected-network methods run here on a shared base topology.
fn build_weights(alg: Algorithm, g: &Digraph) -> Result<Weights> {
    let mut w = Weights { row: None, col: None, doubly: None };
    match alg {
        Algorithm::Frost | Algorithm::RowSublinear => {
            w.row = Some(row_stochastic_uniform(g));
        }
        Algorithm::Dgd | Algorithm::GradientTracking => {
            w.doubly = Some(doubly_stochastic_metropolis(&symmetrize(g))?);
        }
        Algorithm::SubgradientPush | Algorithm::AddOpt => {
            w.col = Some(column_stochastic_uniform(g));
        }
        Algorithm::Ab => {
            w.row = Some(row_stochastic_uniform(g));
            w.col = Some(column_stochastic_uniform(g));
        }
    }
    Ok(w)
}

fn resolve_steps(cfg: &ExperimentConfig, n: usize) -> Result<StepSizes> {
    let alphas = match &cfg.steps {
        StepSpec::Scalar(a) => vec![*a; n],
        StepSpec::PerAgent(v) => {
            if v.len() != n {
                return Err(FrostError::IncompatibleConfig(format!(
                    "{} step sizes for {n} agents",
                    v.len()
                )));
            }
            v.clone()
        }
    };
    if alphas.iter().any(|&a| a < 0.0 || !a.is_finite()) {
        return Err(FrostError::IncompatibleConfig("negative or non-finite step size".into()));
    }
    if alphas.iter().all(|&a| a == 0.0) {
        return Err(FrostError::IncompatibleConfig(
            "all step sizes are zero; at least one agent must move".into(),
        ));
    }
    if !matches!(cfg.algorithm, Algorithm::Frost) && alphas.contains(&0.0) {
        return Err(FrostError::IncompatibleConfig(format!(
            "{} requires every step size positive; only frost tolerates zeros",
            cfg.algorithm.name()
        )));
    }
    Ok(StepSizes { alphas, schedule: cfg.schedule })
}

/// Seeded standard-normal initial iterates, one row per agent.
fn initial_estimates(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    // Offset the stream so x0 does not reuse the problem-data draws.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
}

/// Run one configured experiment to the budget, the residual target, or
/// the divergence guard, whichever comes first.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Trace> {
    let start = Instant::now();
    let g = cfg.graph.build()?;
    let n = g.n();
    let problem = build_problem(&cfg.problem, n, cfg.seed);
    let obj = problem.objective.as_ref();
    let steps = resolve_steps(cfg, n)?;
    let weights = build_weights(cfg.algorithm, &g)?;

    let x_star = solve_centralized(obj, &problem.constants, 1e-12, 1_000_000)?;
    let x0 = initial_estimates(n, obj.dim(), cfg.seed);

    // Push-sum style methods optimize through the ratio z = x / v; the
    // residual is measured on whatever plays the role of the estimate.
    let uses_ratio = matches!(cfg.algorithm, Algorithm::SubgradientPush | Algorithm::AddOpt);
    let estimates = |s: &NetworkState| -> DMatrix<f64> {
        if uses_ratio {
            s.z.clone().expect("push-sum state carries z")
        } else {
            s.x.clone()
        }
    };

    let mut state = match cfg.algorithm {
        Algorithm::Frost => frost_init(weights.row.as_ref().unwrap(), obj, x0)?,
        Algorithm::Dgd => dgd_init(obj, x0)?,
        Algorithm::GradientTracking => gt_ds_init(obj, x0)?,
        Algorithm::SubgradientPush => subgradient_push_init(obj, x0)?,
        Algorithm::AddOpt => add_opt_init(obj, x0)?,
        Algorithm::Ab => ab_init(obj, x0)?,
        Algorithm::RowSublinear => row_sublinear_init(obj, x0)?,
    };

    // The tracking identity needs the row matrix's left Perron vector.
    let pi = match cfg.algorithm {
        Algorithm::Frost => Some(perron_left(weights.row.as_ref().unwrap(), 1e-14, 100_000)?),
        _ => None,
    };

    let mut residuals = Vec::with_capacity(cfg.budget + 1);
    let mut diagnostics = Vec::new();
    let initial = residual(&estimates(&state), &x_star);
    residuals.push(initial);
    let guard = DIVERGENCE_FACTOR * initial.max(1e-12);

    let record_diag = |state: &NetworkState, diagnostics: &mut Vec<DiagSample>| -> Result<()> {
        let track_err = match (&pi, cfg.algorithm) {
            (Some(pi), Algorithm::Frost) => Some(frost_tracking_error(state, pi, obj)?),
            _ => None,
        };
        let mass_err = match cfg.algorithm {
            Algorithm::SubgradientPush | Algorithm::AddOpt => mass_conservation_error(state),
            Algorithm::GradientTracking | Algorithm::Ab => {
                tracker_conservation_error(state, obj)
            }
            _ => None,
        };
        if track_err.is_some() || mass_err.is_some() {
            diagnostics.push(DiagSample { iter: state.k, track_err, mass_err });
        }
        Ok(())
    };
    record_diag(&state, &mut diagnostics)?;

    let mut iters_to_target = if initial <= cfg.target { Some(0) } else { None };
    while state.k < cfg.budget && iters_to_target.is_none() {
        state = match cfg.algorithm {
            Algorithm::Frost => {
                frost_step(&state, weights.row.as_ref().unwrap(), &steps, obj)?
            }
            Algorithm::Dgd => dgd_step(&state, weights.doubly.as_ref().unwrap(), &steps, obj)?,
            Algorithm::GradientTracking => {
                gt_ds_step(&state, weights.doubly.as_ref().unwrap(), &steps, obj)?
            }
            Algorithm::SubgradientPush => {
                subgradient_push_step(&state, weights.col.as_ref().unwrap(), &steps, obj)?
            }
            Algorithm::AddOpt => {
                add_opt_step(&state, weights.col.as_ref().unwrap(), &steps, obj)?
            }
            Algorithm::Ab => ab_step(
                &state,
                weights.row.as_ref().unwrap(),
                weights.col.as_ref().unwrap(),
                &steps,
                obj,
            )?,
            Algorithm::RowSublinear => {
                row_sublinear_step(&state, weights.row.as_ref().unwrap(), &steps, obj)?
            }
        };
        let r = residual(&estimates(&state), &x_star);
        residuals.push(r);
        if !r.is_finite() || r > guard {
            return Err(FrostError::Diverged { iter: state.k, residual: r });
        }
        if state.k % cfg.cadence == 0 {
            record_diag(&state, &mut diagnostics)?;
        }
        if r <= cfg.target {
            iters_to_target = Some(state.k);
        }
    }

    Ok(Trace {
        residuals,
        diagnostics,
        iters_to_target,
        wall_time: start.elapsed(),
        final_estimates: estimates(&state),
        x_star,
    })
}

/// Grid-search a scalar step size: the winner minimizes iterations to the
/// residual target (ties go to the smaller step); divergent grid points
/// are excluded.
pub fn tune_step_size(cfg: &ExperimentConfig, grid: &[f64]) -> Result<(f64, Trace)> {
    if grid.is_empty() || grid.iter().any(|&a| a <= 0.0) {
        return Err(FrostError::IncompatibleConfig(
            "tuning grid must be non-empty and positive".into(),
        ));
    }
    let mut best: Option<(f64, Trace)> = None;
    for &alpha in grid {
        let mut c = cfg.clone();
        c.steps = StepSpec::Scalar(alpha);
        let trace = match run_experiment(&c) {
            Ok(t) => t,
            Err(FrostError::Diverged { .. }) => continue,
            Err(e) => return Err(e),
        };
        let better = match &best {
            None => true,
            Some((ba, bt)) => {
                let key = (
                    trace.iters_to_target.unwrap_or(usize::MAX),
                    trace.final_residual(),
                    alpha,
                );
                let bkey = (bt.iters_to_target.unwrap_or(usize::MAX), bt.final_residual(), *ba);
                key < bkey
            }
        };
        if better {
            best = Some((alpha, trace));
        }
    }
    best.ok_or(FrostError::AllGridPointsDiverged(grid.len()))
}

/// i.i.d. uniform draws on `[0, alpha_max]`, deterministic per seed;
/// redrawn in the (measure-zero) event that every draw is zero.
pub fn gen_uncoordinated_steps(alpha_max: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=alpha_max)).collect();
        if v.iter().any(|&a| a > 0.0) {
            return v;
        }
    }
}

/// One line of a comparison table.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub algorithm: String,
    pub iters_to_target: Option<usize>,
    pub rate: Option<RateFit>,
    pub final_residual: f64,
    /// Residual stalled above target (constant-step DGD signature).
    pub plateau: bool,
    pub trace: Trace,
}

/// Run each config (sharing objective and graph) and tabulate.
pub fn compare_algorithms(cfgs: &[ExperimentConfig]) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        let trace = run_experiment(cfg)?;
        let rate = fit_linear_rate(&trace.residuals).ok();
        let plateau = trace.plateaued(cfg.target, 1_000, 1e-4);
        rows.push(ComparisonRow {
            algorithm: cfg.algorithm.name().to_string(),
            iters_to_target: trace.iters_to_target,
            rate,
            final_residual: trace.final_residual(),
            plateau,
            trace,
        });
    }
    Ok(rows)
}

/// CSV with header `algorithm,iters_to_target,rate,r2,final_residual`;
/// missing values are NaN (target never reached, fit unavailable).
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("algorithm,iters_to_target,rate,r2,final_residual\n");
    for row in rows {
        let iters = row
            .iters_to_target
            .map_or_else(|| "nan".to_string(), |k| k.to_string());
        let (rate, r2) = row
            .rate
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |f| (f.rate, f.r_squared));
        let _ = writeln!(
            out,
            "{},{iters},{:.16e},{:.16e},{:.16e}",
            row.algorithm, rate, r2, row.final_residual
        );
    }
    out
}

/// One sweep point: the generated graph's edge fraction, its contraction
/// estimate, the run's trace, and the fitted rate.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub fraction: f64,
    pub sigma_hat: f64,
    pub rate: Option<RateFit>,
    pub trace: Trace,
}

/// Sparsity sweep: one random strongly-connected graph per fraction,
/// matched seeds, same template config otherwise. Rates are reported, not
/// ranked; density helps only in aggregate.
pub fn sparsity_sweep(
    n: usize,
    fractions: &[f64],
    seed: u64,
    template: &ExperimentConfig,
) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let mut cfg = template.clone();
        cfg.graph = GraphSpec::Random { n, fraction, seed };
        let g = cfg.graph.build()?;
        let a = row_stochastic_uniform(&g);
        let sigma_hat = contraction_estimate(&a)?;
        let trace = run_experiment(&cfg)?;
        let rate = fit_linear_rate(&trace.residuals).ok();
        points.push(SweepPoint { fraction, sigma_hat, rate, trace });
    }
    Ok(points)
}
