//! The sampling loop: draw λ candidates, keep the one adding the most
//! uncovered AST-bits, improve it by single-variable deviations, absorb it.

mod smt;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{
    build_universe, cover_set, coverage_star, manhattan_score, score_slots, Assignment,
    AstBitUniverse, CoverState, CoverageReport,
};
use crate::sat::PhaseBias;
use crate::smtlib::Formula;

pub use smt::{DiversitySmt, SmtConfig, SmtError, SmtOutcome, SmtStats, Solution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    PanSampler,
    /// Blocking clauses instead of the distribution bias.
    Alt1,
    /// Manhattan distance instead of AST-bit gain for candidate selection.
    Alt2,
    /// No post-optimization.
    Alt3,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::PanSampler, Mode::Alt1, Mode::Alt2, Mode::Alt3];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::PanSampler => "pansampler",
            Mode::Alt1 => "alt1",
            Mode::Alt2 => "alt2",
            Mode::Alt3 => "alt3",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown mode `{s}` (expected pansampler, alt1, alt2 or alt3)"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub lambda: usize,
    pub target_coverage: f64,
    pub max_solutions: usize,
    pub time_budget_s: f64,
    pub mode: Mode,
    pub seed: u64,
    pub bias_p: f64,
    pub phase_bias: PhaseBias,
    pub all_violations: bool,
    /// Per SAT call; `None` means unbounded.
    pub conflict_budget: Option<u64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            lambda: 50,
            target_coverage: 0.995,
            max_solutions: 1000,
            time_budget_s: 3600.0,
            mode: Mode::PanSampler,
            seed: 0,
            bias_p: 0.85,
            phase_bias: PhaseBias::EveryDecision,
            all_violations: false,
            conflict_budget: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::Config(m.to_string()));
        if self.lambda == 0 {
            return bad("lambda must be at least 1");
        }
        if !(self.target_coverage > 0.0 && self.target_coverage <= 1.0) {
            return bad("target coverage must lie in (0, 1]");
        }
        if self.max_solutions == 0 {
            return bad("max solutions must be positive");
        }
        if self.time_budget_s.is_nan() || self.time_budget_s <= 0.0 {
            return bad("time budget must be positive");
        }
        if !(0.5..=1.0).contains(&self.bias_p) {
            return bad("bias p must lie in [0.5, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Target,
    MaxSolutions,
    Timeout,
    /// λ consecutive iterations without new coverage.
    Stall,
    Unsat,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Target => "target",
            Termination::MaxSolutions => "max_solutions",
            Termination::Timeout => "timeout",
            Termination::Stall => "stall",
            Termination::Unsat => "unsat",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub sample_s: f64,
    pub score_s: f64,
    pub post_opt_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleResult {
    #[serde(skip)]
    pub solutions: Vec<Assignment>,
    /// Abstraction models of the solutions.
    #[serde(skip)]
    pub abstractions: Vec<Assignment>,
    pub coverage_star_trace: Vec<f64>,
    pub achieved: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub phase_times: PhaseTimes,
    pub coverage: CoverageReport,
    pub smt: SmtStats,
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Smt(#[from] SmtError),
}

/// What the observer sees of one iteration, before absorption.
pub struct IterationView<'a> {
    pub iteration: usize,
    pub accepted: &'a [Assignment],
    pub cover: &'a CoverState,
    pub candidates: &'a [Solution],
    pub scores: &'a [usize],
    pub selected: usize,
}

pub fn sample(f: &Formula, cfg: &SamplerConfig) -> Result<SampleResult, SamplerError> {
    sample_with_observer(f, cfg, |_| {})
}

/// Index of the first maximum.
pub fn argmax(scores: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn sample_with_observer(
    f: &Formula,
    cfg: &SamplerConfig,
    mut observer: impl FnMut(&IterationView<'_>),
) -> Result<SampleResult, SamplerError> {
    cfg.validate()?;
    let start = Instant::now();
    let deadline = start + Duration::from_secs_f64(cfg.time_budget_s.min(1e9));
    let u = build_universe(f);
    let mut cover = CoverState::new(&u);
    let smt_cfg = SmtConfig {
        bias_strength: if cfg.mode == Mode::Alt1 {
            0.5
        } else {
            cfg.bias_p
        },
        phase_bias: cfg.phase_bias,
        all_violations: cfg.all_violations,
        conflict_budget: cfg.conflict_budget,
        deadline: Some(deadline),
    };
    let mut smt = DiversitySmt::new(f, smt_cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut solutions: Vec<Assignment> = Vec::new();
    let mut abstractions: Vec<Assignment> = Vec::new();
    let mut trace = Vec::new();
    let mut times = PhaseTimes::default();
    let mut stall = 0usize;
    let mut iterations = 0usize;

    let termination = 'main: loop {
        if !solutions.is_empty() && coverage_star(&cover, &u) >= cfg.target_coverage {
            break Termination::Target;
        }
        if solutions.len() >= cfg.max_solutions {
            break Termination::MaxSolutions;
        }
        if Instant::now() >= deadline {
            break Termination::Timeout;
        }
        iterations += 1;

        let t = Instant::now();
        let mut candidates: Vec<Solution> = Vec::with_capacity(cfg.lambda);
        for _ in 0..cfg.lambda {
            let seed = rng.next_u64();
            let (prior, extra) = if cfg.mode == Mode::Alt1 {
                let extra: Vec<_> = solutions
                    .iter()
                    .chain(candidates.iter().map(|c| &c.assignment))
                    .map(|a| smt.blocking_clause(a))
                    .collect();
                (&[][..], extra)
            } else {
                (&abstractions[..], Vec::new())
            };
            match smt.solve(prior, &extra, seed)? {
                SmtOutcome::Sat(s) => candidates.push(s),
                SmtOutcome::Unsat => break,
                SmtOutcome::Unknown => {
                    times.sample_s += t.elapsed().as_secs_f64();
                    break 'main Termination::Timeout;
                }
            }
        }
        times.sample_s += t.elapsed().as_secs_f64();
        if candidates.is_empty() {
            // Nothing left to draw: the formula is unsatisfiable or, with
            // blocking clauses, every projection has been produced.
            break if solutions.is_empty() {
                Termination::Unsat
            } else {
                Termination::Stall
            };
        }

        let t = Instant::now();
        let scores: Vec<usize> = candidates
            .iter()
            .map(|c| match cfg.mode {
                Mode::Alt2 => manhattan_score(f, &solutions, &c.assignment),
                _ => score_slots(&cover, &cover_set(f, &u, &c.assignment)),
            })
            .collect();
        let best = argmax(&scores).unwrap();
        times.score_s += t.elapsed().as_secs_f64();
        observer(&IterationView {
            iteration: iterations,
            accepted: &solutions,
            cover: &cover,
            candidates: &candidates,
            scores: &scores,
            selected: best,
        });
        let mut chosen = candidates.swap_remove(best);

        if cfg.mode != Mode::Alt3 {
            let t = Instant::now();
            let opt = post_opt(f, &u, &cover, &abstractions, &mut smt, chosen, &mut rng)?;
            times.post_opt_s += t.elapsed().as_secs_f64();
            chosen = opt.0;
            if opt.1 {
                break Termination::Timeout;
            }
        }

        let slots = cover_set(f, &u, &chosen.assignment);
        let gain = score_slots(&cover, &slots);
        if gain == 0 && !solutions.is_empty() {
            stall += 1;
            if stall >= cfg.lambda {
                break Termination::Stall;
            }
            continue;
        }
        stall = 0;
        cover.absorb(&slots).expect("universe-sized cover set");
        solutions.push(chosen.assignment);
        abstractions.push(chosen.abstraction);
        trace.push(coverage_star(&cover, &u));
    };

    let coverage = cover.report(&u);
    let achieved = !solutions.is_empty() && coverage.coverage_star >= cfg.target_coverage;
    debug_assert_eq!(achieved, termination == Termination::Target);
    Ok(SampleResult {
        solutions,
        abstractions,
        coverage_star_trace: trace,
        achieved,
        termination,
        iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
        phase_times: times,
        coverage,
        smt: smt.stats().clone(),
    })
}

/// Single-variable deviation search around `alpha`. Returns the best of
/// `alpha` and every deviation scoring at least as well, and whether the
/// deadline was hit.
pub fn post_opt(
    f: &Formula,
    u: &AstBitUniverse,
    cover: &CoverState,
    prior: &[Assignment],
    smt: &mut DiversitySmt<'_>,
    alpha: Solution,
    rng: &mut ChaCha8Rng,
) -> Result<(Solution, bool), SamplerError> {
    let base = score_slots(cover, &cover_set(f, u, &alpha.assignment));
    let mut best = alpha.clone();
    let mut best_score = base;
    let vars: Vec<_> = f.scalar_vars().collect();
    for v in vars {
        let value = alpha.assignment.get(v).cloned().expect("total assignment");
        let clause = smt.deviation_clause(v, &value);
        match smt.solve(prior, &[clause], rng.next_u64())? {
            SmtOutcome::Sat(s) => {
                let score = score_slots(cover, &cover_set(f, u, &s.assignment));
                if score >= base && score > best_score {
                    best_score = score;
                    best = s;
                }
            }
            SmtOutcome::Unsat => {}
            SmtOutcome::Unknown => return Ok((best, true)),
        }
    }
    Ok((best, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::satisfies;
    use crate::smtlib::parse_formula;

    fn cfg(r: f64) -> SamplerConfig {
        SamplerConfig {
            target_coverage: r,
            lambda: 5,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn argmax_takes_first_maximum() {
        assert_eq!(argmax(&[1, 3, 3, 0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn tautology_reaches_all_reachable_bits() {
        let f = parse_formula("(declare-const x Bool)(assert (or x (not x)))").unwrap();
        // the `or` root is always true: 5 of 6 slots are reachable
        let r = sample(&f, &cfg(5.0 / 6.0)).unwrap();
        assert!(r.achieved);
        assert_eq!(r.solutions.len(), 2);
        assert_eq!(r.termination, Termination::Target);
    }

    #[test]
    fn unsat_yields_no_solutions() {
        let f = parse_formula("(declare-const x Bool)(assert (and x (not x)))").unwrap();
        let r = sample(&f, &cfg(0.9)).unwrap();
        assert_eq!(r.termination, Termination::Unsat);
        assert!(r.solutions.is_empty());
        assert!(!r.achieved);
    }

    #[test]
    fn unique_solution_stalls_at_half() {
        let f = parse_formula("(declare-const m (_ BitVec 3))(assert (= m #b101))").unwrap();
        let r = sample(&f, &cfg(0.99)).unwrap();
        assert_eq!(r.termination, Termination::Stall);
        assert_eq!(r.solutions.len(), 1);
        assert_eq!(r.coverage.coverage_star, 0.5);
    }

    #[test]
    fn modes_emit_valid_solutions_deterministically() {
        let f = parse_formula(
            "(declare-const a (_ BitVec 3))(declare-const b (_ BitVec 3))(declare-const c Bool)
             (assert (=> c (bvult (bvadd a b) #b101)))",
        )
        .unwrap();
        for mode in Mode::ALL {
            let c = SamplerConfig { mode, ..cfg(0.9) };
            let r1 = sample(&f, &c).unwrap();
            let r2 = sample(&f, &c).unwrap();
            assert_eq!(r1.solutions, r2.solutions, "{mode}");
            assert!(r1.solutions.iter().all(|a| satisfies(&f, a)));
            assert!(r1.coverage_star_trace.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn config_is_validated() {
        let f = parse_formula("(assert true)").unwrap();
        for bad in [
            SamplerConfig {
                lambda: 0,
                ..Default::default()
            },
            SamplerConfig {
                target_coverage: 0.0,
                ..Default::default()
            },
            SamplerConfig {
                bias_p: 0.4,
                ..Default::default()
            },
        ] {
            assert!(matches!(sample(&f, &bad), Err(SamplerError::Config(_))));
        }
        // empty universe: one solution covers everything
        let r = sample(&f, &cfg(1.0)).unwrap();
        assert!(r.achieved);
        assert_eq!(r.solutions.len(), 1);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("alt4".parse::<Mode>().is_err());
    }
}
