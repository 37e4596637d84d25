use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pansampler_core::bench::{run_file, run_suite, summary_csv, BenchConfig, PAPER_TARGETS};
use pansampler_core::bitblast::blast_formula;
use pansampler_core::coverage::satisfies;
use pansampler_core::model::parse_models;
use pansampler_core::sampler::{Mode, SamplerConfig};
use pansampler_core::sat::{
    model_line, solve, BitDistribution, Cnf, PhaseBias, SatResult, SolverConfig,
};
use pansampler_core::smtlib::parse_formula;

#[derive(Parser)]
#[command(
    name = "pansampler",
    version,
    about = "Coverage-maximizing sampler for QF_BV / QF_ABV / QF_AUFBV"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample one .smt2 file.
    Sample {
        file: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Sample every .smt2 file in a directory at several targets.
    Suite {
        dir: PathBuf,
        /// Comma-separated coverage targets.
        #[arg(long, env = "PANSAMPLER_TARGETS", value_delimiter = ',', default_values_t = PAPER_TARGETS.to_vec())]
        targets: Vec<f64>,
        #[arg(long, env = "PANSAMPLER_JOBS")]
        jobs: Option<usize>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Solve a DIMACS CNF with the built-in solver.
    Sat {
        file: PathBuf,
        #[arg(long, env = "PANSAMPLER_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Print the CNF of a formula's bit-vector abstraction.
    Blast { file: PathBuf },
    /// Re-evaluate a samples file against its formula.
    Check { formula: PathBuf, samples: PathBuf },
}

#[derive(Args)]
struct RunOpts {
    #[arg(long, env = "PANSAMPLER_TARGET_COVERAGE", default_value_t = 0.995)]
    target_coverage: f64,
    #[arg(long, env = "PANSAMPLER_LAMBDA", default_value_t = 50)]
    lambda: usize,
    #[arg(long, env = "PANSAMPLER_MAX_SOLUTIONS", default_value_t = 1000)]
    max_solutions: usize,
    /// Seconds per benchmark.
    #[arg(long, env = "PANSAMPLER_TIME_BUDGET", default_value_t = 3600.0)]
    time_budget: f64,
    #[arg(long, env = "PANSAMPLER_MODE", default_value_t = Mode::PanSampler)]
    mode: Mode,
    #[arg(long, env = "PANSAMPLER_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "PANSAMPLER_BIAS_P", default_value_t = 0.85)]
    bias_p: f64,
    /// Bias only the first decision on each variable after a restart.
    #[arg(long, env = "PANSAMPLER_FIRST_DECISION_ONLY")]
    first_decision_only: bool,
    /// Report every theory violation per round instead of the first.
    #[arg(long, env = "PANSAMPLER_ALL_VIOLATIONS")]
    all_violations: bool,
    #[arg(long, env = "PANSAMPLER_CONFLICT_BUDGET")]
    conflict_budget: Option<u64>,
    /// Also write `<name>.cnf`.
    #[arg(long, env = "PANSAMPLER_EMIT_DIMACS")]
    emit_dimacs: bool,
    /// Verify against exhaustive enumeration (small formulas only).
    #[arg(long, env = "PANSAMPLER_ORACLE_CHECK")]
    oracle_check: bool,
    /// Record zero times, for byte-reproducible tables.
    #[arg(long, env = "PANSAMPLER_NO_TIMING")]
    no_timing: bool,
    #[arg(long, short, env = "PANSAMPLER_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

impl RunOpts {
    fn config(&self) -> BenchConfig {
        BenchConfig {
            sampler: SamplerConfig {
                lambda: self.lambda,
                target_coverage: self.target_coverage,
                max_solutions: self.max_solutions,
                time_budget_s: self.time_budget,
                mode: self.mode,
                seed: self.seed,
                bias_p: self.bias_p,
                phase_bias: if self.first_decision_only {
                    PhaseBias::FirstDecisionOnly
                } else {
                    PhaseBias::EveryDecision
                },
                all_violations: self.all_violations,
                conflict_budget: self.conflict_budget,
            },
            out_dir: self.out_dir.clone(),
            write_artifacts: true,
            emit_dimacs: self.emit_dimacs,
            oracle_check: self.oracle_check,
            no_timing: self.no_timing,
            jobs: None,
        }
    }
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Sample { file, opts } => {
            let cfg = opts.config();
            if let Err(e) = cfg.sampler.validate() {
                return fail(e);
            }
            let run = run_file(&file, &cfg);
            if let Some(e) = &run.error {
                eprintln!("error: {e}");
            }
            let mut out = serde_json::to_value(&run.record).unwrap();
            if let Some(o) = &run.oracle {
                out["oracle"] = serde_json::to_value(o).unwrap();
            }
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
            ExitCode::from(run.exit_code() as u8)
        }
        Cmd::Suite {
            dir,
            targets,
            jobs,
            opts,
        } => {
            let mut cfg = opts.config();
            cfg.jobs = jobs;
            if let Err(e) = cfg.sampler.validate() {
                return fail(e);
            }
            match run_suite(&dir, &cfg, &targets) {
                Ok(s) => {
                    print!("{}", summary_csv(&s.summary).unwrap());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Cmd::Sat { file, seed } => {
            let text = match fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => return fail(format!("{}: {e}", file.display())),
            };
            let cnf = match Cnf::parse_dimacs(&text) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let cfg = SolverConfig {
                seed,
                ..SolverConfig::default()
            };
            match solve(&cnf, &BitDistribution::empty(), &cfg) {
                SatResult::Sat(m) => {
                    println!("s SATISFIABLE\n{}", model_line(&m));
                    ExitCode::from(10)
                }
                SatResult::Unsat => {
                    println!("s UNSATISFIABLE");
                    ExitCode::from(20)
                }
                SatResult::Unknown => {
                    println!("s UNKNOWN");
                    ExitCode::SUCCESS
                }
            }
        }
        Cmd::Blast { file } => {
            let f = match fs::read_to_string(&file)
                .map_err(|e| e.to_string())
                .and_then(|t| parse_formula(&t).map_err(|e| e.to_string()))
            {
                Ok(f) => f,
                Err(e) => return fail(format!("{}: {e}", file.display())),
            };
            match blast_formula(&f) {
                Ok((cnf, _)) => {
                    print!("{}", cnf.to_dimacs());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Cmd::Check { formula, samples } => {
            let f = match fs::read_to_string(&formula)
                .map_err(|e| e.to_string())
                .and_then(|t| parse_formula(&t).map_err(|e| e.to_string()))
            {
                Ok(f) => f,
                Err(e) => return fail(format!("{}: {e}", formula.display())),
            };
            let models = match fs::read_to_string(&samples)
                .map_err(|e| e.to_string())
                .and_then(|t| parse_models(&f, &t).map_err(|e| e.to_string()))
            {
                Ok(m) => m,
                Err(e) => return fail(format!("{}: {e}", samples.display())),
            };
            let bad: Vec<usize> = (0..models.len())
                .filter(|&i| !satisfies(&f, &models[i]))
                .collect();
            println!("{} models, {} violating", models.len(), bad.len());
            for i in &bad {
                println!("  model {i} does not satisfy the formula");
            }
            if bad.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
    }
}
