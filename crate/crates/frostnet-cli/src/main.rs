//! Command-line frontend for the frostnet experiment harness.
//!
//! Every flag has a config-file equivalent (flat `key=value` lines, `#`
//! comments); CLI flags override file values. Exit status: 0 success,
//! 1 usage error, 2 experiment failure.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use frostnet::digraph::{gen_ring, is_strongly_connected};
use frostnet::harness::{
    build_problem, compare_algorithms, comparison_csv, gen_uncoordinated_steps, parse_config_text,
    run_experiment, sparsity_sweep, tune_step_size, Algorithm, ExperimentConfig, GraphSpec,
    StepSpec,
};
use frostnet::oracle::{check_gradient, fit_linear_rate, solve_centralized};
use frostnet::weights::{check_stochasticity, contraction_estimate, row_stochastic_uniform};
use frostnet::FrostError;

#[derive(Parser)]
#[command(
    name = "frostnet",
    about = "Decentralized first-order optimization over directed graphs",
    long_about = "Simulates FROST and baseline decentralized optimization methods on \
directed communication graphs and records convergence traces.\n\n\
Config files are flat key=value lines mirroring the flags below \
(alg, graph, problem, dim, samples, lambda, alpha, alphas, schedule, \
iters, target, cadence, seed, weights); flags override file values. \
FROSTNET_SEED supplies the seed when neither source sets one."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the experiment-driving subcommands. Each maps onto the
/// config key named in its help string.
#[derive(Args, Clone, Default)]
struct ConfigFlags {
    /// Config file with key=value lines; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Algorithm (key: alg): frost | dgd | gt | subgradient-push | add-opt | ab | row-sublinear
    #[arg(long)]
    alg: Option<String>,
    /// Graph spec (key: graph): ring:N | rand:N:frac:seed | file:PATH
    #[arg(long)]
    graph: Option<String>,
    /// Objective family (key: problem): quadratic | logistic
    #[arg(long)]
    problem: Option<String>,
    /// Problem dimension (key: dim)
    #[arg(long)]
    dim: Option<usize>,
    /// Logistic samples per agent (key: samples)
    #[arg(long)]
    samples: Option<usize>,
    /// Logistic ridge parameter (key: lambda)
    #[arg(long)]
    lambda: Option<f64>,
    /// Scalar step size for every agent (key: alpha)
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated per-agent step sizes (key: alphas)
    #[arg(long)]
    alphas: Option<String>,
    /// Step schedule (key: schedule): constant | diminishing
    #[arg(long)]
    schedule: Option<String>,
    /// Iteration budget (key: iters)
    #[arg(long)]
    iters: Option<usize>,
    /// Residual target (key: target)
    #[arg(long)]
    target: Option<f64>,
    /// Invariant-check cadence (key: cadence)
    #[arg(long)]
    cadence: Option<usize>,
    /// Seed for problem data and initial iterates (key: seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Weight-kind override (key: weights): row | column | doubly.
    /// Must be compatible with the algorithm
    #[arg(long)]
    weights: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace CSV
    Run {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Trace CSV output path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid-search a scalar step size, then report the winning run
    Tune {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Comma-separated step-size grid
        #[arg(long)]
        grid: String,
        /// Trace CSV output path for the winning run
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several algorithms on one graph and objective; tabulate
    Compare {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Comma-separated algorithm list (overrides --alg)
        #[arg(long)]
        algs: String,
        /// Comparison CSV output path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run one config over random graphs of several edge fractions
    Sweep {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Number of agents in each generated graph
        #[arg(long)]
        n: usize,
        /// Comma-separated edge fractions
        #[arg(long)]
        fractions: String,
        /// Summary CSV output path; traces go to <out>.<index>.csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a graph and write its edge list
    GraphGen {
        /// Graph spec: ring:N | rand:N:frac:seed
        #[arg(long)]
        graph: String,
        /// Edge-list output path
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in invariant suites
    Validate {
        /// Which suite: all | graphs | weights | engines | oracles
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Usage problems exit 1; runtime experiment failures exit 2.
fn exit_code(e: &FrostError) -> u8 {
    match e {
        FrostError::Parse(_)
        | FrostError::IncompatibleConfig(_)
        | FrostError::KindMismatch { .. }
        | FrostError::StepSizeOutOfRange(..)
        | FrostError::EdgeOutOfRange(..)
        | FrostError::InfeasibleEdgeFraction { .. } => 1,
        _ => 2,
    }
}

/// Merge config file, flags, and the FROSTNET_SEED fallback into the
/// flat key=value map the harness parses.
fn build_map(flags: &ConfigFlags) -> Result<BTreeMap<String, String>, FrostError> {
    let mut map = match &flags.config {
        Some(path) => parse_config_text(&std::fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    };
    set("alg", flags.alg.clone());
    set("graph", flags.graph.clone());
    set("problem", flags.problem.clone());
    set("dim", flags.dim.map(|v| v.to_string()));
    set("samples", flags.samples.map(|v| v.to_string()));
    set("lambda", flags.lambda.map(|v| v.to_string()));
    set("alpha", flags.alpha.map(|v| v.to_string()));
    set("alphas", flags.alphas.clone());
    set("schedule", flags.schedule.clone());
    set("iters", flags.iters.map(|v| v.to_string()));
    set("target", flags.target.map(|v| v.to_string()));
    set("cadence", flags.cadence.map(|v| v.to_string()));
    set("seed", flags.seed.map(|v| v.to_string()));
    set("weights", flags.weights.clone());
    if !map.contains_key("seed") {
        if let Ok(s) = std::env::var("FROSTNET_SEED") {
            map.insert("seed".into(), s);
        }
    }
    Ok(map)
}

/// The weight kinds each algorithm can actually consume.
fn allowed_weights(alg: Algorithm) -> &'static [&'static str] {
    match alg {
        Algorithm::Frost | Algorithm::RowSublinear => &["row"],
        Algorithm::Dgd | Algorithm::GradientTracking => &["doubly"],
        Algorithm::SubgradientPush | Algorithm::AddOpt => &["column"],
        Algorithm::Ab => &["row", "column"],
    }
}

fn parse_experiment(flags: &ConfigFlags) -> Result<ExperimentConfig, FrostError> {
    parse_experiment_with(flags, &[])
}

/// Like [`parse_experiment`], but subcommands that supply a value through
/// a dedicated flag (tune's grid, compare's algorithm list) can fill the
/// corresponding key when neither flag nor config file set it.
fn parse_experiment_with(
    flags: &ConfigFlags,
    defaults: &[(&str, String)],
) -> Result<ExperimentConfig, FrostError> {
    let mut map = build_map(flags)?;
    for (k, v) in defaults {
        map.entry(k.to_string()).or_insert_with(|| v.clone());
    }
    // `weights` is a CLI-level compatibility assertion, not a harness key:
    // the harness always builds the kind the algorithm requires.
    let weights = map.remove("weights");
    let cfg = ExperimentConfig::from_key_values(&map)?;
    if let Some(w) = weights {
        let allowed = allowed_weights(cfg.algorithm);
        if !["row", "column", "doubly"].contains(&w.as_str()) {
            return Err(FrostError::Parse(format!("unknown weight kind '{w}'")));
        }
        if !allowed.contains(&w.as_str()) {
            return Err(FrostError::IncompatibleConfig(format!(
                "{} requires {}-stochastic weights",
                cfg.algorithm.name(),
                allowed.join("- and ")
            )));
        }
    }
    Ok(cfg)
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, FrostError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| FrostError::Parse(format!("bad {what} entry '{p}'")))
        })
        .collect()
}

fn write_out(path: &Option<PathBuf>, contents: &str) -> Result<(), FrostError> {
    if let Some(path) = path {
        std::fs::write(path, contents)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn summarize(name: &str, trace: &frostnet::harness::Trace) {
    let reached = trace
        .iters_to_target
        .map_or_else(|| "target not reached".to_string(), |k| format!("target hit at iter {k}"));
    let rate = fit_linear_rate(&trace.residuals)
        .map(|f| format!("rate {:.6} (r2 {:.4})", f.rate, f.r_squared))
        .unwrap_or_else(|_| "rate fit unavailable".to_string());
    println!(
        "{name}: {} iterations, final residual {:.3e}, {reached}, {rate}",
        trace.residuals.len() - 1,
        trace.final_residual()
    );
}

fn dispatch(cmd: Command) -> Result<(), FrostError> {
    match cmd {
        Command::Run { flags, out } => {
            let cfg = parse_experiment(&flags)?;
            let trace = run_experiment(&cfg)?;
            summarize(cfg.algorithm.name(), &trace);
            write_out(&out, &trace.to_csv())
        }
        Command::Tune { flags, grid, out } => {
            let grid = parse_f64_list(&grid, "grid")?;
            let first = grid
                .first()
                .ok_or_else(|| FrostError::Parse("empty tuning grid".into()))?;
            let cfg = parse_experiment_with(&flags, &[("alpha", first.to_string())])?;
            let (best, trace) = tune_step_size(&cfg, &grid)?;
            println!("best alpha {best}");
            summarize(cfg.algorithm.name(), &trace);
            write_out(&out, &trace.to_csv())
        }
        Command::Compare { flags, algs, out } => {
            let first = algs
                .split(',')
                .next()
                .map(|s| s.trim().to_string())
                .unwrap_or_default();
            let base = parse_experiment_with(&flags, &[("alg", first)])?;
            let mut cfgs = Vec::new();
            for name in algs.split(',') {
                let alg = Algorithm::parse(name.trim())?;
                let mut c = base.clone();
                c.algorithm = alg;
                c.schedule = alg.default_schedule();
                cfgs.push(c);
            }
            let rows = compare_algorithms(&cfgs)?;
            for row in &rows {
                summarize(&row.algorithm, &row.trace);
                if row.plateau {
                    println!("{}: plateau (residual stalled above target)", row.algorithm);
                }
            }
            write_out(&out, &comparison_csv(&rows))
        }
        Command::Sweep { flags, n, fractions, out } => {
            let template = parse_experiment(&flags)?;
            let fractions = parse_f64_list(&fractions, "fractions")?;
            let points = sparsity_sweep(n, &fractions, template.seed, &template)?;
            let mut summary = String::from("fraction,sigma_hat,rate,r2,final_residual\n");
            for (i, p) in points.iter().enumerate() {
                let (rate, r2) =
                    p.rate.as_ref().map_or((f64::NAN, f64::NAN), |f| (f.rate, f.r_squared));
                summary.push_str(&format!(
                    "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    p.fraction,
                    p.sigma_hat,
                    rate,
                    r2,
                    p.trace.final_residual()
                ));
                println!(
                    "fraction {}: sigma_hat {:.6}, final residual {:.3e}",
                    p.fraction,
                    p.sigma_hat,
                    p.trace.final_residual()
                );
                if let Some(path) = &out {
                    let trace_path = path.with_extension(format!("{i}.csv"));
                    std::fs::write(&trace_path, p.trace.to_csv())?;
                    println!("wrote {}", trace_path.display());
                }
            }
            write_out(&out, &summary)
        }
        Command::GraphGen { graph, out } => {
            let g = GraphSpec::parse(&graph)?.build()?;
            std::fs::write(&out, g.to_edge_list_text())?;
            println!("wrote {} ({} nodes, {} directed edges)", out.display(), g.n(), g.edge_count());
            Ok(())
        }
        Command::Validate { suite } => validate(&suite),
    }
}

/// One-command health check: exercises each module's key properties on
/// small instances and exits nonzero if anything fails.
fn validate(suite: &str) -> Result<(), FrostError> {
    let known = ["all", "graphs", "weights", "engines", "oracles"];
    if !known.contains(&suite) {
        return Err(FrostError::Parse(format!(
            "unknown suite '{suite}' (expected one of {})",
            known.join(", ")
        )));
    }
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool| {
        println!("{}  {name}", if ok { "pass" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    if suite == "all" || suite == "graphs" {
        check("ring graphs are strongly connected", {
            (2..=12).all(|n| is_strongly_connected(&gen_ring(n)))
        });
        check("random generator yields strongly connected graphs", {
            (0..5).all(|seed| {
                GraphSpec::Random { n: 20, fraction: 0.2, seed }
                    .build()
                    .map(|g| is_strongly_connected(&g))
                    .unwrap_or(false)
            })
        });
    }
    if suite == "all" || suite == "weights" {
        check("uniform row weights are stochastic", {
            (3..=8).all(|n| check_stochasticity(&row_stochastic_uniform(&gen_ring(n)), 1e-12))
        });
        check("ring contraction estimates are strictly below one", {
            (3..=8).all(|n| {
                contraction_estimate(&row_stochastic_uniform(&gen_ring(n)))
                    .map(|s| s < 1.0)
                    .unwrap_or(false)
            })
        });
    }
    if suite == "all" || suite == "engines" {
        let mut cfg = ExperimentConfig::new(GraphSpec::Ring(5), Algorithm::Frost, 0.0);
        let problem = build_problem(&cfg.problem, 5, cfg.seed);
        cfg.steps = StepSpec::Scalar(0.3 / (5.0 * problem.constants.l));
        let frost = run_experiment(&cfg)?;
        check("frost reaches the residual target on a quadratic ring", {
            frost.iters_to_target.is_some()
        });
        check("frost tracking identity holds along the run", frost.max_track_err() <= 1e-10);

        let mut cfg = ExperimentConfig::new(GraphSpec::Ring(5), Algorithm::AddOpt, 0.0);
        cfg.steps = StepSpec::Scalar(0.3 / (5.0 * problem.constants.l));
        cfg.budget = 5_000;
        let add_opt = run_experiment(&cfg)?;
        check("add-opt conserves push-sum mass", add_opt.max_mass_err() <= 1e-12);

        let steps = gen_uncoordinated_steps(0.05, 5, 7);
        check("uncoordinated step draws stay in range", {
            steps.iter().all(|&a| (0.0..=0.05).contains(&a)) && steps.iter().any(|&a| a > 0.0)
        });
    }
    if suite == "all" || suite == "oracles" {
        let problem = build_problem(
            &frostnet::harness::ProblemSpec::Logistic { dim: 6, samples: 10, lambda: 0.1 },
            4,
            0,
        );
        let xs = solve_centralized(problem.objective.as_ref(), &problem.constants, 1e-11, 500_000)?;
        check("centralized logistic solve reaches gradient norm 1e-11", {
            problem.objective.global_gradient(&xs).norm() <= 1e-11
        });
        let points: Vec<_> = (0..10)
            .map(|i| {
                frostnet::nalgebra::DVector::from_fn(problem.objective.dim(), |j, _| {
                    ((i * 31 + j * 7) as f64).sin()
                })
            })
            .collect();
        check("logistic gradients match finite differences", {
            check_gradient(problem.objective.as_ref(), &points, 1e-6) <= 1e-5
        });
    }

    if failures == 0 {
        println!("all checks passed");
        Ok(())
    } else {
        Err(FrostError::InvariantViolation {
            iter: 0,
            what: format!("{failures} validation check(s) failed"),
        })
    }
}
