use anyhow::{bail, Context, Result};
use ce2nd::harness::{self, load_config, write_comparison, write_experiment};
use ce2nd::oracles::{
    self, FixedPointSettings, IdealCeSettings, QuadratureSettings,
};
use ce2nd::{make_benchmark, GaussianParams, Matrix, RngState};
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;

/// `println!` that reports write failures instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout().lock(), $($arg)*)?
    };
}

#[derive(Parser)]
#[command(name = "ce2nd", version, about = "Incremental cross-entropy optimizer and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config for all its replications and write traces and summaries.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stride: Option<u64>,
    },
    /// Run several configs on one objective under a common evaluation budget.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        budget: u64,
        /// H(μ) level for evaluations-to-target; defaults to the first
        /// config's success threshold.
        #[arg(long)]
        target: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value = "runs/compare")]
        out: PathBuf,
    },
    /// Benchmark utilities.
    Bench {
        #[command(subcommand)]
        cmd: BenchCommand,
    },
    /// One-dimensional reference computations.
    Oracle {
        #[command(subcommand)]
        cmd: OracleCommand,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Evaluate benchmark `name` in dimension `m` at `x`.
    Eval {
        name: String,
        m: usize,
        #[arg(allow_negative_numbers = true, num_args = 1..)]
        x: Vec<f64>,
    },
    /// List benchmarks with default dimension and optimum.
    List,
}

#[derive(Args, Clone)]
struct Model1D {
    /// identity, neg-square, triangle:<delta>, or a benchmark name (m = 1)
    #[arg(long, default_value = "identity")]
    h: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    var: f64,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = oracles::DEFAULT_NODES)]
    nodes: usize,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// (1-ρ)-quantile of H(X), X ~ N(mu, var), by loss minimization and directly.
    Quantile {
        #[command(flatten)]
        model: Model1D,
    },
    /// Iterate exact-expectation CE steps.
    IdealCe {
        #[command(flatten)]
        model: Model1D,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        mu0: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Monte-Carlo tracker fixed points with standard errors.
    FixedPoint {
        #[command(flatten)]
        model: Model1D,
        /// Elite threshold; omitted means every draw is elite.
        #[arg(long, allow_negative_numbers = true)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        mu0: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn objective_1d(spec: &str) -> Result<Box<dyn Fn(f64) -> f64 + Sync>> {
    Ok(match spec {
        "identity" => Box::new(|x| x),
        "neg-square" => Box::new(|x| -x * x),
        s if s.starts_with("triangle:") => {
            let delta: f64 = s["triangle:".len()..].parse().context("triangle half-width")?;
            let f = ce2nd::make_triangle_example::<f64>(delta)?;
            Box::new(move |x| f.peek(&[x]).unwrap_or(f64::NAN))
        }
        name => {
            let f = make_benchmark::<f64>(name, 1)?;
            Box::new(move |x| f.peek(&[x]).unwrap_or(f64::NAN))
        }
    })
}

fn gauss1(mu: f64, var: f64) -> Result<GaussianParams<f64>> {
    Ok(GaussianParams::new(vec![mu], Matrix::from_rows(&[vec![var]]))?)
}

fn quad(nodes: usize) -> QuadratureSettings {
    QuadratureSettings {
        nodes,
        ..QuadratureSettings::default()
    }
}

fn run(config: PathBuf, seed: Option<u64>, reps: Option<usize>, out: Option<PathBuf>, stride: Option<u64>) -> Result<()> {
    let mut cfg = load_config(&config)
        .with_context(|| format!("loading {}", config.display()))?
        .config;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(k) = reps {
        cfg.replications = k;
    }
    if let Some(s) = stride {
        cfg.stride = s;
    }
    let dir = out.unwrap_or_else(|| harness::default_output_dir(&cfg));
    let result = harness::run_experiment(&cfg)?;
    write_experiment(&result, &dir).with_context(|| format!("writing {}", dir.display()))?;
    let a = result.aggregate();
    out!(
        "{}: {} replications, median final H(mu) {}, median best H(mu) {}, success {}, diverged {}, evaluations {}",
        cfg.name(),
        a.replications,
        a.median_final_h,
        a.median_best_h,
        a.success_fraction.map_or("n/a".to_string(), |s| format!("{s}")),
        a.diverged,
        a.total_evals
    );
    out!("wrote {}", dir.display());
    Ok(())
}

fn compare(configs: Vec<PathBuf>, budget: u64, target: Option<f64>, reps: Option<usize>, out: PathBuf) -> Result<()> {
    let mut loaded = Vec::new();
    for p in &configs {
        let mut c = load_config(p)
            .with_context(|| format!("loading {}", p.display()))?
            .config;
        if let Some(k) = reps {
            c.replications = k;
        }
        loaded.push(c);
    }
    let report = harness::compare(&loaded, budget, target)?;
    write_comparison(&report, &out)?;
    out!("target H(mu) >= {}, budget {budget}", report.target);
    for (i, e) in report.entries.iter().enumerate() {
        let reached = e.evals_to_target.iter().filter(|h| h.is_some()).count();
        out!(
            "{:>2}. {:<28} {:<6} median evals-to-target {:>12}  reached {}/{}",
            i + 1,
            e.result.config.name(),
            e.result.config.algorithm.id(),
            e.median_evals_to_target.map_or("never".to_string(), |m| format!("{m}")),
            reached,
            e.evals_to_target.len()
        );
    }
    out!("wrote {}", out.display());
    Ok(())
}

fn bench(cmd: BenchCommand) -> Result<()> {
    match cmd {
        BenchCommand::Eval { name, m, x } => {
            if x.len() != m {
                bail!("expected {m} coordinates, got {}", x.len());
            }
            let mut f = make_benchmark::<f64>(&name, m)?;
            out!("{}", f.evaluate(&x)?);
        }
        BenchCommand::List => {
            for b in ce2nd::Benchmark::ALL {
                out!(
                    "{:<14} default m = {:<4} H* = {}",
                    b.id(),
                    b.default_dim(),
                    b.optimum_value::<f64>()
                );
            }
        }
    }
    Ok(())
}

fn oracle(cmd: OracleCommand) -> Result<()> {
    match cmd {
        OracleCommand::Quantile { model } => {
            let h = objective_1d(&model.h)?;
            let q = oracles::quantile_by_minimization(&h, &gauss1(model.mu, model.var)?, model.rho, quad(model.nodes))?;
            out!("by_minimization {}", q.by_minimization);
            out!("direct          {}", q.direct);
            out!("resolution      {}", q.resolution);
            out!("nodes           {}", q.nodes);
        }
        OracleCommand::IdealCe {
            model,
            r,
            lambda,
            mu0,
            q,
            steps,
        } => {
            let h = objective_1d(&model.h)?;
            let cfg = IdealCeSettings {
                rho: model.rho,
                r,
                lambda,
                initial: Some(gauss1(mu0, q)?),
                quad: quad(model.nodes),
            };
            let mut theta = gauss1(model.mu, model.var)?;
            out!("step,gamma,mu,var");
            for k in 0..steps {
                let s = oracles::ideal_ce_step_1d(&h, &theta, &cfg)?;
                out!("{},{:?},{:?},{:?}", k, s.gamma, s.theta.mu()[0], s.theta.sigma()[(0, 0)]);
                theta = s.theta;
            }
        }
        OracleCommand::FixedPoint {
            model,
            gamma,
            r,
            lambda,
            mu0,
            q,
            samples,
            seed,
        } => {
            let h = objective_1d(&model.h)?;
            let cfg = FixedPointSettings {
                lambda,
                gamma,
                r,
                shift: None,
                n_samples: samples,
            };
            let est = oracles::fixed_point_oracle(
                |x: &[f64]| h(x[0]),
                &gauss1(model.mu, model.var)?,
                &gauss1(mu0, q)?,
                &cfg,
                &mut RngState::new(seed, 0),
            )?;
            out!("mean   {} ± {}", est.mean[0], est.mean_se[0]);
            out!("second {} ± {}", est.second[(0, 0)], est.second_se[(0, 0)]);
            out!("elites {}", est.elites);
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().cmd {
        Command::Run {
            config,
            seed,
            reps,
            out,
            stride,
        } => run(config, seed, reps, out, stride),
        Command::Compare {
            configs,
            budget,
            target,
            reps,
            out,
        } => compare(configs, budget, target, reps, out),
        Command::Bench { cmd } => bench(cmd),
        Command::Oracle { cmd } => oracle(cmd),
    };
    match result {
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) => Ok(()),
        other => other,
    }
}
