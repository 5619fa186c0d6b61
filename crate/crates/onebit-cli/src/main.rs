//! `onebit` binary: generate one-bit measurement problems, solve them, and
//! reproduce the benchmark tables and parameter sweeps.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error, 3 solver
//! assertion (potential descent violated under monitoring).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use onebit_cli::experiment::{
    self, bench_csv, raw_csv, sweep_csv, ExperimentSpec, GenGrid, SweepParameter,
};
use onebit_cli::options::{
    parse_f64, parse_f64_list, parse_matrix_types, parse_solvers, parse_u64, parse_usize,
    parse_usize_list, pick, OptionSource,
};
use onebit_cli::protocol::{ModelOverrides, SolverChoice, SolverOverrides};
use onebit_core::data::MatrixType;
use onebit_core::solver::{SolverConfig, TerminationStatus};
use onebit_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "onebit",
    version,
    about = "Sparse recovery from one-bit measurements: problem generation, solvers, benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Default)]
struct SharedArgs {
    /// Measurement count(s), comma separated for grids
    #[arg(long)]
    m: Option<String>,
    /// Signal dimension(s)
    #[arg(long)]
    n: Option<String>,
    /// True sparsity value(s)
    #[arg(long)]
    sparsity: Option<String>,
    /// Matrix type(s): 1 = correlated rows, 2 = i.i.d. standard normal
    #[arg(long = "matrix-type")]
    matrix_type: Option<String>,
    /// Row correlation factor(s) in [0,1), type 1 only
    #[arg(long)]
    mu: Option<String>,
    /// Noise standard deviation(s)
    #[arg(long)]
    noise: Option<String>,
    /// Sign flip ratio(s) in [0,1)
    #[arg(long)]
    flip: Option<String>,
    /// Trials per grid point
    #[arg(long)]
    trials: Option<String>,
    /// Base seed; trial k uses seed base+k
    #[arg(long)]
    seed: Option<String>,
    /// Solver(s): znorm, scad, mcp
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    /// Surrogate shape parameter
    #[arg(long)]
    a: Option<String>,
    /// Step scale c for tau = c / ||A||^2 (default 2)
    #[arg(long = "step-scale")]
    step_scale: Option<String>,
    /// Use the certified worst-case Lipschitz step rule
    #[arg(long = "lipschitz-step")]
    lipschitz_step: bool,
    #[arg(long)]
    varsigma: Option<String>,
    #[arg(long = "tau-safety")]
    tau_safety: Option<String>,
    #[arg(long = "beta-cap")]
    beta_cap: Option<String>,
    #[arg(long = "max-iter")]
    max_iter: Option<String>,
    #[arg(long = "step-tol")]
    step_tol: Option<String>,
    /// Output path (CSV for bench/sweep/solve, directory for generate)
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for trials: 0 = all cores, 1 = sequential
    #[arg(long)]
    workers: Option<String>,
    /// Record the full iterate sequence
    #[arg(long)]
    trace: bool,
    /// Assert potential descent every iteration
    #[arg(long = "monitor-descent")]
    monitor_descent: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate problem bundles on disk
    Generate {
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Solve a single problem and print recovery metrics
    Solve {
        #[command(flatten)]
        shared: SharedArgs,
        /// Problem bundle directory (alternative to inline generation)
        #[arg(long)]
        problem: Option<PathBuf>,
        /// Start vector file, one value per line (defaults to normalized
        /// column sums)
        #[arg(long)]
        start: Option<PathBuf>,
    },
    /// Run a trial grid and emit an aggregated CSV table
    Bench {
        #[command(flatten)]
        shared: SharedArgs,
        /// Also write per-trial rows next to --out
        #[arg(long)]
        raw: bool,
    },
    /// Sweep sigma or lambda and record mean MSE per value and solver
    Sweep {
        #[command(flatten)]
        shared: SharedArgs,
        /// Which parameter to sweep: sigma or lambda
        #[arg(long)]
        parameter: Option<String>,
        /// Comma-separated parameter values
        #[arg(long)]
        values: Option<String>,
    },
}

/// Options shared by all subcommands, after merging flags with the config
/// file and applying defaults.
struct Resolved {
    grid: GenGrid,
    model: ModelOverrides,
    solver_cfg: SolverConfig,
    solvers: Vec<SolverChoice>,
    trials: usize,
    seed: u64,
    workers: usize,
    out: Option<PathBuf>,
}

fn resolve(shared: &SharedArgs) -> Result<Resolved> {
    let src = OptionSource::load(shared.config.as_deref())?;

    let required_list = |flag: &Option<String>, key: &str| -> Result<String> {
        pick(flag, &src, key)
            .ok_or_else(|| Error::Invalid(format!("missing required option '--{key}'")))
    };

    let grid = GenGrid {
        m: parse_usize_list("m", &required_list(&shared.m, "m")?)?,
        n: parse_usize_list("n", &required_list(&shared.n, "n")?)?,
        s_star: parse_usize_list("sparsity", &required_list(&shared.sparsity, "sparsity")?)?,
        matrix_type: match pick(&shared.matrix_type, &src, "matrix_type") {
            Some(raw) => parse_matrix_types("matrix-type", &raw)?,
            None => vec![MatrixType::TypeII],
        },
        mu: match pick(&shared.mu, &src, "mu") {
            Some(raw) => parse_f64_list("mu", &raw)?,
            None => vec![0.0],
        },
        noise: match pick(&shared.noise, &src, "noise") {
            Some(raw) => parse_f64_list("noise", &raw)?,
            None => vec![0.0],
        },
        flip: match pick(&shared.flip, &src, "flip") {
            Some(raw) => parse_f64_list("flip", &raw)?,
            None => vec![0.0],
        },
    };

    let scalar_f64 = |flag: &Option<String>, key: &str| -> Result<Option<f64>> {
        pick(flag, &src, key).map(|raw| parse_f64(key, &raw)).transpose()
    };

    let model = ModelOverrides {
        sigma: scalar_f64(&shared.sigma, "sigma")?,
        gamma: scalar_f64(&shared.gamma, "gamma")?,
        lambda: scalar_f64(&shared.lambda, "lambda")?,
        rho: scalar_f64(&shared.rho, "rho")?,
        a: scalar_f64(&shared.a, "a")?,
    };

    let solver_ov = SolverOverrides {
        step_scale: scalar_f64(&shared.step_scale, "step_scale")?,
        lipschitz_step: shared.lipschitz_step || src.get("lipschitz_step") == Some("true"),
        varsigma: scalar_f64(&shared.varsigma, "varsigma")?,
        tau_safety: scalar_f64(&shared.tau_safety, "tau_safety")?,
        beta_cap: scalar_f64(&shared.beta_cap, "beta_cap")?,
        max_iter: pick(&shared.max_iter, &src, "max_iter")
            .map(|raw| parse_usize("max_iter", &raw))
            .transpose()?,
        step_tol: scalar_f64(&shared.step_tol, "step_tol")?,
        monitor_descent: shared.monitor_descent
            || src.get("monitor_descent") == Some("true"),
        trace: shared.trace || src.get("trace") == Some("true"),
    };
    let solver_cfg = onebit_cli::protocol::resolve_solver_config(&solver_ov)?;

    let solvers = match pick(&shared.solver, &src, "solver") {
        Some(raw) => parse_solvers(&raw)?,
        None => vec![SolverChoice::Znorm, SolverChoice::Scad],
    };

    let trials = match pick(&shared.trials, &src, "trials") {
        Some(raw) => parse_usize("trials", &raw)?,
        None => 1,
    };
    let seed = match pick(&shared.seed, &src, "seed") {
        Some(raw) => parse_u64("seed", &raw)?,
        None => 0,
    };
    let workers = match pick(&shared.workers, &src, "workers") {
        Some(raw) => parse_usize("workers", &raw)?,
        None => 0,
    };

    Ok(Resolved {
        grid,
        model,
        solver_cfg,
        solvers,
        trials,
        seed,
        workers,
        out: shared.out.clone(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.display().to_string(),
                source: e,
            })?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn single_point(grid: &GenGrid, what: &str) -> Result<experiment::GridPoint> {
    let points = grid.points();
    if points.len() != 1 {
        return Err(Error::Invalid(format!(
            "{what} requires single values for m, n, sparsity, matrix-type, mu, noise, flip"
        )));
    }
    Ok(points[0])
}

fn cmd_generate(shared: &SharedArgs) -> Result<()> {
    let r = resolve(shared)?;
    let out = r
        .out
        .ok_or_else(|| Error::Invalid("generate requires --out DIRECTORY".into()))?;
    let paths = experiment::run_generate(&r.grid, r.trials, r.seed, &out)?;
    for p in &paths {
        println!("{}", p.display());
    }
    println!("generated {} bundle(s) under {}", paths.len(), out.display());
    Ok(())
}

fn status_name(s: TerminationStatus) -> &'static str {
    match s {
        TerminationStatus::StepTol => "step_tol",
        TerminationStatus::ObjPlateau => "obj_plateau",
        TerminationStatus::MaxIter => "max_iter",
    }
}

fn cmd_solve(shared: &SharedArgs, problem: Option<&Path>, start: Option<&Path>) -> Result<()> {
    let r = resolve_for_solve(shared, problem.is_some())?;
    if r.solvers.len() != 1 {
        return Err(Error::Invalid(
            "solve takes exactly one --solver (znorm, scad, or mcp)".into(),
        ));
    }
    let choice = r.solvers[0];
    let inline = match problem {
        Some(_) => None,
        None => Some(single_point(&r.grid, "inline solve")?.gen_config(r.seed)),
    };
    let start_vec = start.map(onebit_core::data::load_vector).transpose()?;
    let outcome = experiment::run_solve(
        problem,
        inline,
        choice,
        &r.model,
        &r.solver_cfg,
        start_vec,
    )?;

    let res = &outcome.result;
    println!(
        "solver={} status={} iterations={} time_s={:.4} tau={:.3e} stationarity={:.3e} \
         gamma_set_empty={} min_nonzero={:.3e}",
        outcome.solver.name(),
        status_name(res.status),
        res.iterations,
        outcome.wall_seconds,
        res.tau,
        res.final_stationarity_residual,
        res.gamma_index_set_empty,
        res.min_nonzero_magnitude,
    );
    if let Some(metrics) = &outcome.metrics {
        println!(
            "mse={} herr={} fnr={} fpr={}",
            experiment::fmt6(metrics.mse),
            experiment::fmt6(metrics.herr),
            experiment::fmt6(metrics.fnr),
            experiment::fmt6(metrics.fpr),
        );
    }

    if let Some(out) = &r.out {
        let g = &outcome.gen;
        let (mse, herr, fnr, fpr) = match &outcome.metrics {
            Some(m) => (
                experiment::fmt17(m.mse),
                experiment::fmt17(m.herr),
                experiment::fmt17(m.fnr),
                experiment::fmt17(m.fpr),
            ),
            None => ("nan".into(), "nan".into(), "nan".into(), "nan".into()),
        };
        let row = format!(
            "{},{},{},{},{},{},{},{},0,{},{},{},{},{},{},{},ok\n",
            outcome.solver.name(),
            g.m,
            g.n,
            g.s_star,
            u8::from(g.matrix_type),
            g.mu,
            g.noise_level,
            g.flip_ratio,
            g.seed,
            mse,
            herr,
            fnr,
            fpr,
            experiment::fmt17(outcome.wall_seconds),
            res.iterations,
        );
        let mut text = String::new();
        if !out.exists() {
            text.push_str(experiment::RAW_HEADER);
            text.push('\n');
        }
        text.push_str(&row);
        if out.exists() {
            use std::io::Write;
            let mut f = std::fs::OpenOptions::new()
                .append(true)
                .open(out)
                .map_err(|e| Error::Io {
                    path: out.display().to_string(),
                    source: e,
                })?;
            f.write_all(text.as_bytes()).map_err(|e| Error::Io {
                path: out.display().to_string(),
                source: e,
            })?;
        } else {
            write_text(out, &text)?;
        }
        println!("appended metrics to {}", out.display());
    }
    Ok(())
}

/// `solve --problem` does not need generation sizes; inline solve does.
fn resolve_for_solve(shared: &SharedArgs, have_bundle: bool) -> Result<Resolved> {
    if !have_bundle {
        return resolve(shared);
    }
    // substitute placeholder sizes so `resolve` does not demand them
    let mut patched = SharedArgs {
        m: Some(shared.m.clone().unwrap_or_else(|| "1".into())),
        n: Some(shared.n.clone().unwrap_or_else(|| "1".into())),
        sparsity: Some(shared.sparsity.clone().unwrap_or_else(|| "1".into())),
        ..SharedArgs::default()
    };
    patched.matrix_type = shared.matrix_type.clone();
    patched.mu = shared.mu.clone();
    patched.noise = shared.noise.clone();
    patched.flip = shared.flip.clone();
    patched.trials = shared.trials.clone();
    patched.seed = shared.seed.clone();
    patched.solver = shared.solver.clone();
    patched.sigma = shared.sigma.clone();
    patched.gamma = shared.gamma.clone();
    patched.lambda = shared.lambda.clone();
    patched.rho = shared.rho.clone();
    patched.a = shared.a.clone();
    patched.step_scale = shared.step_scale.clone();
    patched.lipschitz_step = shared.lipschitz_step;
    patched.varsigma = shared.varsigma.clone();
    patched.tau_safety = shared.tau_safety.clone();
    patched.beta_cap = shared.beta_cap.clone();
    patched.max_iter = shared.max_iter.clone();
    patched.step_tol = shared.step_tol.clone();
    patched.out = shared.out.clone();
    patched.config = shared.config.clone();
    patched.workers = shared.workers.clone();
    patched.trace = shared.trace;
    patched.monitor_descent = shared.monitor_descent;
    resolve(&patched)
}

fn cmd_bench(shared: &SharedArgs, raw: bool) -> Result<()> {
    let r = resolve(shared)?;
    let spec = ExperimentSpec {
        grid: r.grid,
        model: r.model,
        solver_cfg: r.solver_cfg,
        solvers: r.solvers,
        trials: r.trials,
        base_seed: r.seed,
        workers: r.workers,
    };
    let (rows, runs) = experiment::run_bench(&spec)?;
    let table = bench_csv(&rows);
    match &r.out {
        Some(out) => {
            write_text(out, &table)?;
            println!("wrote {} aggregate row(s) to {}", rows.len(), out.display());
            if raw {
                let raw_path = out.with_extension("raw.csv");
                write_text(&raw_path, &raw_csv(&runs))?;
                println!("wrote {} raw row(s) to {}", runs.len(), raw_path.display());
            }
        }
        None => {
            print!("{table}");
            if raw {
                print!("{}", raw_csv(&runs));
            }
        }
    }
    Ok(())
}

fn cmd_sweep(shared: &SharedArgs, parameter: Option<&str>, values: Option<&str>) -> Result<()> {
    let r = resolve(shared)?;
    let parameter = SweepParameter::parse(
        parameter.ok_or_else(|| Error::Invalid("sweep requires --parameter".into()))?,
    )?;
    let values = parse_f64_list(
        "values",
        values.ok_or_else(|| Error::Invalid("sweep requires --values".into()))?,
    )?;
    let spec = ExperimentSpec {
        grid: r.grid,
        model: r.model,
        solver_cfg: r.solver_cfg,
        solvers: r.solvers,
        trials: r.trials,
        base_seed: r.seed,
        workers: r.workers,
    };
    let rows = experiment::run_sweep(parameter, &values, &spec)?;
    let table = sweep_csv(&rows);
    match &r.out {
        Some(out) => {
            write_text(out, &table)?;
            println!("wrote {} sweep row(s) to {}", rows.len(), out.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Generate { shared } => cmd_generate(shared),
        Cmd::Solve {
            shared,
            problem,
            start,
        } => cmd_solve(shared, problem.as_deref(), start.as_deref()),
        Cmd::Bench { shared, raw } => cmd_bench(shared, *raw),
        Cmd::Sweep {
            shared,
            parameter,
            values,
        } => cmd_sweep(shared, parameter.as_deref(), values.as_deref()),
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 2,
        Error::DescentViolation { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
