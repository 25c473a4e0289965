use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use moblo::gmoba::solve_from;
use moblo::harness::{emit, recompute_metrics, run_campaign, ExperimentConfig, Method};
use moblo::l2o::{l2o_then_gmoba, load_checkpoint, save_checkpoint, train, TrainConfig};
use moblo::metrics::{dp, feasibility};
use moblo::moml::moml_solve;
use moblo::pareto::{sweep_front, FrontOracle};
use moblo::rng::{derive_seed, seeded, standard_normal_vector};
use moblo::{generate_instance, BilevelProblem, ProblemDims, QuadraticInstance, SolverState, Vector};

#[derive(Parser)]
#[command(name = "moblo", version, about = "Multi-objective bilevel solvers and benchmark campaigns")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "MOBA_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write seeded quadratic instances as JSON files.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 0.1)]
        mu: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Sweep an instance's Pareto front and write it as CSV.
    Front {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        num_weights: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one solver from one seeded start and print the outcome.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "gmoba")]
        method: String,
        /// Experiment config supplying solver settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed of the Gaussian start.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trained parameters for `l2o-gmoba`; untrained when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run a full campaign from a config file.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the unrolled warm start on one instance and save a checkpoint.
    TrainL2o {
        #[arg(long)]
        instance: PathBuf,
        /// Experiment config supplying `l2o` and `gmoba` settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute metrics from a campaign's output directory.
    Metrics {
        #[arg(long)]
        out: PathBuf,
        /// Purity tolerance; defaults to the campaign's.
        #[arg(long)]
        tau: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> moblo::Result<()> {
    if let Some(t) = cli.threads {
        // Ignore the error when a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Generate { config, n, m, mu, seed, count, out } => {
            let (n, m, mu, seed, count) = match config {
                Some(path) => {
                    let c = ExperimentConfig::load(path)?;
                    (c.problem.n, c.problem.m, c.problem.mu, c.problem.instance_seed, c.problem.num_instances)
                }
                None => (n, m, mu, seed, count),
            };
            std::fs::create_dir_all(&out)?;
            for i in 0..count as u64 {
                let s = seed.wrapping_add(i);
                let inst = generate_instance(ProblemDims::square(n, m)?, mu, s)?;
                let path = out.join(format!("instance_{s}.json"));
                inst.save(&path)?;
                println!("{}", path.display());
            }
        }
        Command::Front { instance, num_weights, out } => {
            let inst = QuadraticInstance::load(instance)?;
            let w = num_weights.unwrap_or(if inst.dims().m == 2 { 500 } else { 60 });
            let front = sweep_front(&inst, w)?;
            front.write_csv(std::io::BufWriter::new(std::fs::File::create(&out)?))?;
            println!("{} non-dominated points -> {}", front.len(), out.display());
        }
        Command::Solve { instance, method, config, seed, checkpoint } => {
            let inst = QuadraticInstance::load(instance)?;
            let method: Method = method.parse()?;
            let (gcfg, mcfg) = match config {
                Some(p) => {
                    let c = ExperimentConfig::load(p)?;
                    (c.gmoba, c.moml)
                }
                None => Default::default(),
            };
            let dims = inst.dims();
            let front = sweep_front(&inst, if dims.m == 2 { 500 } else { 60 })?;
            let oracle = FrontOracle { instance: &inst, front: &front };
            let x0 = standard_normal_vector(dims.n_x, &mut seeded(derive_seed(&[seed], "solve-x0")));
            let y0 = Vector::zeros(dims.n_y);
            let rec = match method {
                Method::Gmoba => solve_from(&inst, SolverState::new(&inst, x0, y0, None)?, &gcfg, Some(&oracle))?,
                Method::Moml => moml_solve(&inst, x0, y0, &mcfg, Some(&oracle))?,
                Method::L2oGmoba => {
                    let params = match checkpoint {
                        Some(p) => load_checkpoint(p)?.0,
                        None => moblo::l2o::L2OParams::uniform(TrainConfig::default().layers, dims.m),
                    };
                    let v0 = vec![Vector::zeros(dims.n_y); dims.m];
                    l2o_then_gmoba(&inst, &params, &x0, &y0, &v0, &gcfg, Some(&oracle))?
                }
            };
            println!("method: {method}");
            println!("termination: {}", rec.termination.as_str());
            println!("iterations: {}", rec.iterations);
            println!("dp: {:.6e}", dp(&inst, &front, &rec.state.x)?);
            println!("feasibility: {:.6e}", feasibility(&inst, &rec.state.x, &rec.state.y)?);
            println!("objectives: {:?}", rec.state.last_f);
            println!("wall_time_ms: {:.3}", rec.wall_time.as_secs_f64() * 1e3);
        }
        Command::Campaign { config, out } => {
            let mut c = ExperimentConfig::load(config)?;
            if let Some(dir) = out {
                c.output.dir = dir;
            }
            let result = run_campaign(&c, cli.threads)?;
            emit(&result, &c.output.dir)?;
            for (method, summary) in &result.methods {
                let get = |k: &str| summary.aggregate.get(k).map_or("n/a".into(), |s| format!("{:.4} ± {:.4}", s.mean, s.std));
                println!(
                    "{method:<10} purity {}  dp {}  feasibility {}  time_s {}",
                    get("purity"),
                    get("dp"),
                    get("feasibility"),
                    get("time_s")
                );
            }
            println!("wrote {}", c.output.dir.display());
        }
        Command::TrainL2o { instance, config, seed, out } => {
            let inst = QuadraticInstance::load(instance)?;
            let mut tc = match config {
                Some(p) => ExperimentConfig::load(p)?.train_config(inst.seed()),
                None => TrainConfig::default(),
            };
            tc.seed = seed;
            let outcome = train(&inst, &tc)?;
            save_checkpoint(&out, &outcome.params, &tc)?;
            println!(
                "trained {} iterations in {:.2} s{} -> {}",
                outcome.iterations,
                outcome.wall_time.as_secs_f64(),
                if outcome.diverged { " (stopped on non-finite loss)" } else { "" },
                out.display()
            );
        }
        Command::Metrics { out, tau } => {
            let reports = recompute_metrics(&out, tau)?;
            let named: std::collections::BTreeMap<_, _> = reports.iter().map(|(k, v)| (k.as_str(), v)).collect();
            println!("{}", serde_json::to_string_pretty(&named)?);
        }
    }
    Ok(())
}
