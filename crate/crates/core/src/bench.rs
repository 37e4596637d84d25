//! Per-file runs with artifacts, and suite tables of #suc / #sol / time.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::bitblast::{abstract_formula, bit_blast};
use crate::coverage::satisfies;
use crate::model::{model_json, parse_models, print_model};
use crate::oracle::{enumerate_solutions, exact_coverage, min_cover, DEFAULT_DOMAIN_BIT_CAP};
use crate::sampler::{sample, Mode, SampleResult, SamplerConfig, Termination};
use crate::smtlib::{parse_formula, Formula};

pub const PAPER_TARGETS: [f64; 6] = [0.8, 0.9, 0.95, 0.98, 0.99, 0.995];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Target,
    MaxSolutions,
    Timeout,
    Stall,
    Unsat,
    Error,
}

impl Reason {
    pub fn exit_code(self) -> i32 {
        match self {
            Reason::Target => 0,
            Reason::Error => 1,
            Reason::Stall => 3,
            Reason::MaxSolutions => 4,
            Reason::Timeout => 5,
            Reason::Unsat => 10,
        }
    }
}

impl From<Termination> for Reason {
    fn from(t: Termination) -> Self {
        match t {
            Termination::Target => Reason::Target,
            Termination::MaxSolutions => Reason::MaxSolutions,
            Termination::Timeout => Reason::Timeout,
            Termination::Stall => Reason::Stall,
            Termination::Unsat => Reason::Unsat,
        }
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub benchmark: String,
    pub logic: String,
    pub mode: Mode,
    pub r: f64,
    pub achieved: bool,
    pub num_solutions: usize,
    pub time_s: f64,
    pub coverage_star: f64,
    pub reason: Reason,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub sampler: SamplerConfig,
    /// Artifact directory; `None` writes next to the input.
    pub out_dir: Option<PathBuf>,
    pub write_artifacts: bool,
    pub emit_dimacs: bool,
    pub oracle_check: bool,
    /// Report every time as 0 so that tables are byte-reproducible.
    pub no_timing: bool,
    /// Worker threads for suites; `None` uses rayon's default.
    pub jobs: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sampler: SamplerConfig::default(),
            out_dir: None,
            write_artifacts: true,
            emit_dimacs: false,
            oracle_check: false,
            no_timing: false,
            jobs: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Config(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Exact-coverage verification on enumerable formulas.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleCheck {
    pub valid_bits: usize,
    pub total_slots: usize,
    pub num_models: usize,
    pub exact_coverage: f64,
    pub coverage_star: f64,
    pub min_cover: usize,
    pub min_cover_exact: bool,
    /// Coverage* ≤ exact coverage and |A| ≥ the minimum cover at the reached coverage.
    pub consistent: bool,
}

pub struct FileRun {
    pub record: BenchRecord,
    pub result: Option<SampleResult>,
    pub oracle: Option<OracleCheck>,
    pub error: Option<String>,
    pub parse_time_s: f64,
}

impl FileRun {
    pub fn exit_code(&self) -> i32 {
        self.record.reason.exit_code()
    }
}

pub fn oracle_check(f: &Formula, res: &SampleResult) -> Option<OracleCheck> {
    let rep = enumerate_solutions(f, DEFAULT_DOMAIN_BIT_CAP).ok()?;
    let exact = exact_coverage(f, &rep, &res.solutions);
    let m = min_cover(&rep, exact);
    let star = res.coverage.coverage_star;
    Some(OracleCheck {
        valid_bits: rep.valid_bits,
        total_slots: rep.total_slots,
        num_models: rep.solutions.len(),
        exact_coverage: exact,
        coverage_star: star,
        min_cover: m.cardinality,
        min_cover_exact: m.exact,
        consistent: star <= exact + 1e-12 && (!m.exact || res.solutions.len() >= m.cardinality),
    })
}

fn stem(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().trim_end_matches(".smt2").to_string())
        .unwrap_or_else(|| "input".into())
}

fn artifact(cfg: &BenchConfig, path: &Path, ext: &str) -> PathBuf {
    let dir = match &cfg.out_dir {
        Some(d) => d.clone(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    dir.join(format!("{}.{ext}", stem(path)))
}

fn write_artifacts(
    cfg: &BenchConfig,
    path: &Path,
    f: &Formula,
    run: &FileRun,
) -> Result<(), String> {
    if let Some(d) = &cfg.out_dir {
        fs::create_dir_all(d).map_err(|e| format!("{}: {e}", d.display()))?;
    }
    let write =
        |p: PathBuf, text: &str| fs::write(&p, text).map_err(|e| format!("{}: {e}", p.display()));
    let res = run.result.as_ref();
    let sols = res.map(|r| r.solutions.as_slice()).unwrap_or_default();

    let samples: String = sols.iter().map(|a| print_model(f, a)).collect();
    let p = artifact(cfg, path, "samples.smt2");
    write(p.clone(), &samples)?;
    // re-read and re-check what was written
    let back = parse_models(f, &fs::read_to_string(&p).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if back.len() != sols.len() || !back.iter().all(|a| satisfies(f, a)) {
        return Err(format!(
            "{}: emitted samples do not satisfy the formula",
            p.display()
        ));
    }

    let mut report = json!({
        "benchmark": run.record.benchmark,
        "logic": run.record.logic,
        "config": cfg.sampler,
        "parse_time_s": if cfg.no_timing { 0.0 } else { run.parse_time_s },
        "record": run.record,
        "solutions": sols.iter().map(|a| model_json(f, a)).collect::<Vec<_>>(),
    });
    if let Some(r) = res {
        let mut v = serde_json::to_value(r).map_err(|e| e.to_string())?;
        if cfg.no_timing {
            v["wall_time_s"] = json!(0.0);
            v["phase_times"] = json!({"sample_s": 0.0, "score_s": 0.0, "post_opt_s": 0.0});
        }
        report["result"] = v;
    }
    if let Some(o) = &run.oracle {
        report["oracle"] = json!(o);
    }
    write(
        artifact(cfg, path, "report.json"),
        &serde_json::to_string_pretty(&report).unwrap(),
    )?;

    if cfg.emit_dimacs {
        let (cnf, _) = bit_blast(&abstract_formula(f), &[]).map_err(|e| e.to_string())?;
        write(artifact(cfg, path, "cnf"), &cnf.to_dimacs())?;
    }
    Ok(())
}

/// Samples one file; failures end up in the record's reason.
pub fn run_file(path: &Path, cfg: &BenchConfig) -> FileRun {
    run_file_named(path, &path.display().to_string(), cfg)
}

fn run_file_named(path: &Path, name: &str, cfg: &BenchConfig) -> FileRun {
    let mut record = BenchRecord {
        benchmark: name.to_string(),
        logic: String::new(),
        mode: cfg.sampler.mode,
        r: cfg.sampler.target_coverage,
        achieved: false,
        num_solutions: 0,
        time_s: 0.0,
        coverage_star: 0.0,
        reason: Reason::Error,
    };
    let fail = |record: BenchRecord, e: String| FileRun {
        record,
        result: None,
        oracle: None,
        error: Some(e),
        parse_time_s: 0.0,
    };
    let t0 = Instant::now();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(record, format!("{}: {e}", path.display())),
    };
    let f = match parse_formula(&text) {
        Ok(f) => f,
        Err(e) => return fail(record, format!("{}: {e}", path.display())),
    };
    let parse_time_s = t0.elapsed().as_secs_f64();
    record.logic = f.logic.clone().unwrap_or_default();
    let mut run = match sample(&f, &cfg.sampler) {
        Ok(res) => {
            record.achieved = res.achieved;
            record.num_solutions = res.solutions.len();
            record.time_s = if cfg.no_timing { 0.0 } else { res.wall_time_s };
            record.coverage_star = res.coverage.coverage_star;
            record.reason = res.termination.into();
            let oracle = if cfg.oracle_check {
                oracle_check(&f, &res)
            } else {
                None
            };
            FileRun {
                record,
                result: Some(res),
                oracle,
                error: None,
                parse_time_s,
            }
        }
        Err(e) => return fail(record, e.to_string()),
    };
    if cfg.write_artifacts {
        if let Err(e) = write_artifacts(cfg, path, &f, &run) {
            run.record.reason = Reason::Error;
            run.record.achieved = false;
            run.error = Some(e);
        }
    }
    run
}

/// Aggregate row for one target: successes and means over successes only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub mode: Mode,
    pub r: f64,
    pub benchmarks: usize,
    pub suc: usize,
    pub mean_solutions: Option<f64>,
    pub mean_time_s: Option<f64>,
}

pub struct SuiteResult {
    pub records: Vec<BenchRecord>,
    pub summary: Vec<SummaryRow>,
}

pub fn summarize(records: &[BenchRecord], mode: Mode, targets: &[f64]) -> Vec<SummaryRow> {
    if records.is_empty() {
        return Vec::new();
    }
    targets
        .iter()
        .map(|&r| {
            let rows: Vec<&BenchRecord> = records
                .iter()
                .filter(|x| x.r == r && x.mode == mode)
                .collect();
            let ok: Vec<&&BenchRecord> = rows.iter().filter(|x| x.achieved).collect();
            let mean = |g: fn(&BenchRecord) -> f64| {
                (!ok.is_empty()).then(|| ok.iter().map(|x| g(x)).sum::<f64>() / ok.len() as f64)
            };
            SummaryRow {
                mode,
                r,
                benchmarks: rows.len(),
                suc: ok.len(),
                mean_solutions: mean(|x| x.num_solutions as f64),
                mean_time_s: mean(|x| x.time_s),
            }
        })
        .collect()
}

pub fn records_csv(records: &[BenchRecord]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        w.write_record([
            "benchmark",
            "logic",
            "mode",
            "r",
            "achieved",
            "num_solutions",
            "time_s",
            "coverage_star",
            "reason",
        ])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(
        w.into_inner()
            .map_err(|e| csv::Error::from(e.into_error()))?,
    )
    .unwrap())
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "mode",
        "r",
        "benchmarks",
        "suc",
        "mean_solutions",
        "mean_time_s",
    ])?;
    let dash = |x: Option<f64>, prec: usize| x.map_or("-".to_string(), |v| format!("{v:.prec$}"));
    for s in rows {
        w.write_record([
            s.mode.to_string(),
            s.r.to_string(),
            s.benchmarks.to_string(),
            s.suc.to_string(),
            dash(s.mean_solutions, 2),
            dash(s.mean_time_s, 3),
        ])?;
    }
    Ok(String::from_utf8(
        w.into_inner()
            .map_err(|e| csv::Error::from(e.into_error()))?,
    )
    .unwrap())
}

/// `.smt2` files directly under `dir`, sorted by name.
pub fn suite_files(dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "smt2"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs every file at every target. Writes records.csv, summary.csv and
/// summary.json into `out_dir` when one is configured.
pub fn run_suite(
    dir: &Path,
    cfg: &BenchConfig,
    targets: &[f64],
) -> Result<SuiteResult, BenchError> {
    let files = suite_files(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let mut records = Vec::with_capacity(files.len() * targets.len());
    for &r in targets {
        let mut c = cfg.clone();
        c.sampler.target_coverage = r;
        if let Some(d) = &cfg.out_dir {
            c.out_dir = Some(d.join(format!("r{r}")));
        }
        let runs: Vec<BenchRecord> = pool.install(|| {
            files
                .par_iter()
                .map(|p| {
                    let name = p.strip_prefix(dir).unwrap_or(p).display().to_string();
                    let run = run_file_named(p, &name, &c);
                    if let Some(e) = &run.error {
                        log::warn!("{e}");
                    }
                    run.record
                })
                .collect()
        });
        records.extend(runs);
    }
    let summary = summarize(&records, cfg.sampler.mode, targets);
    if let Some(d) = &cfg.out_dir {
        fs::create_dir_all(d).map_err(io_err(d))?;
        let write = |name: &str, text: String| {
            let p = d.join(name);
            fs::write(&p, text).map_err(io_err(&p))
        };
        write("records.csv", records_csv(&records)?)?;
        write("summary.csv", summary_csv(&summary)?)?;
        write(
            "summary.json",
            serde_json::to_string_pretty(&summary).unwrap(),
        )?;
    }
    Ok(SuiteResult { records, summary })
}
