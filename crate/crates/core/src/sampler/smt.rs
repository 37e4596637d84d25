//! Lazy SMT solving with a diversity-biased SAT core.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitblast::{
    abstract_formula, bit_blast, distribution_from, lift_model, Abstraction, BlastMap,
};
use crate::coverage::{satisfies, Assignment, Value};
use crate::sat::{self, BitDistribution, Cnf, Lit, PhaseBias, SatResult, SolverConfig};
use crate::smtlib::{Formula, SymbolId, TermId};
use crate::theory::{check_theories, TheoryVerdict};

#[derive(Clone, Debug)]
pub struct SmtConfig {
    pub bias_strength: f64,
    pub phase_bias: PhaseBias,
    /// Return every violated instance per round instead of the first.
    pub all_violations: bool,
    pub conflict_budget: Option<u64>,
    pub deadline: Option<Instant>,
}

impl Default for SmtConfig {
    fn default() -> Self {
        SmtConfig {
            bias_strength: 0.85,
            phase_bias: PhaseBias::EveryDecision,
            all_violations: false,
            conflict_budget: None,
            deadline: None,
        }
    }
}

/// A model of the input formula with the abstraction model it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub assignment: Assignment,
    pub abstraction: Assignment,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SmtOutcome {
    Sat(Solution),
    Unsat,
    /// Conflict budget or deadline exhausted.
    Unknown,
}

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("bit-blasting failed: {0}")]
    Blast(#[from] crate::bitblast::BlastError),
    #[error("completed model violates the formula")]
    InvalidModel,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmtStats {
    pub calls: u64,
    pub sat_calls: u64,
    pub lemmas: u64,
    /// Largest number of lemma rounds in a single call.
    pub max_rounds: u64,
    pub axiom_bound: u64,
}

/// Incremental-by-lemma solver for one formula. Lemmas persist across calls.
pub struct DiversitySmt<'f> {
    f: &'f Formula,
    abs: Abstraction,
    lemmas: Vec<TermId>,
    cnf: Option<(usize, Cnf)>,
    map: BlastMap,
    cfg: SmtConfig,
    stats: SmtStats,
}

impl<'f> DiversitySmt<'f> {
    pub fn new(f: &'f Formula, cfg: SmtConfig) -> Result<Self, SmtError> {
        let abs = abstract_formula(f);
        let (cnf, map) = bit_blast(&abs, &[])?;
        let stats = SmtStats {
            axiom_bound: abs.axiom_bound(),
            ..Default::default()
        };
        Ok(DiversitySmt {
            f,
            abs,
            lemmas: Vec::new(),
            cnf: Some((0, cnf)),
            map,
            cfg,
            stats,
        })
    }

    pub fn abstraction(&self) -> &Abstraction {
        &self.abs
    }

    pub fn map(&self) -> &BlastMap {
        &self.map
    }

    pub fn lemmas(&self) -> &[TermId] {
        &self.lemmas
    }

    pub fn stats(&self) -> &SmtStats {
        &self.stats
    }

    pub fn config_mut(&mut self) -> &mut SmtConfig {
        &mut self.cfg
    }

    /// Abstraction CNF with every lemma learnt so far.
    pub fn cnf(&mut self) -> Result<&Cnf, SmtError> {
        let n = self.lemmas.len();
        if self.cnf.as_ref().map(|(k, _)| *k) != Some(n) {
            let (cnf, map) = bit_blast(&self.abs, &self.lemmas)?;
            debug_assert_eq!(map, self.map);
            self.cnf = Some((n, cnf));
        }
        Ok(&self.cnf.as_ref().unwrap().1)
    }

    /// Clause forcing symbol `s` of the input formula away from `value`.
    pub fn deviation_clause(&self, s: SymbolId, value: &Value) -> Vec<Lit> {
        self.map
            .symbol_vars(s)
            .expect("scalar symbol")
            .enumerate()
            .map(|(i, v)| v.lit(!value.bit(i as u32)))
            .collect()
    }

    /// Clause excluding the values `a` gives to the original scalar symbols.
    pub fn blocking_clause(&self, a: &Assignment) -> Vec<Lit> {
        let mut c = Vec::new();
        for s in self.f.scalar_vars() {
            let v = a
                .get(s)
                .cloned()
                .unwrap_or_else(|| Value::zero(&self.f.symbol(s).sort));
            c.extend(self.deviation_clause(s, &v));
        }
        c
    }

    /// One DiversitySMT call: solve the abstraction biased against `prior`
    /// (abstraction models), refine with lemmas until the theories agree.
    pub fn solve(
        &mut self,
        prior: &[Assignment],
        extra: &[Vec<Lit>],
        seed: u64,
    ) -> Result<SmtOutcome, SmtError> {
        self.stats.calls += 1;
        let dist = if prior.is_empty() {
            BitDistribution::empty()
        } else {
            distribution_from(prior, &self.map)
        };
        let mut rounds = 0u64;
        loop {
            let mut cnf = self.cnf()?.clone();
            for c in extra {
                cnf.add_clause(c.iter().copied());
            }
            let sat_cfg = SolverConfig {
                seed: seed.wrapping_add(rounds.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
                bias_strength: self.cfg.bias_strength,
                phase_bias: self.cfg.phase_bias,
                conflict_budget: self.cfg.conflict_budget,
                deadline: self.cfg.deadline,
                ..Default::default()
            };
            self.stats.sat_calls += 1;
            let model = match sat::solve(&cnf, &dist, &sat_cfg) {
                SatResult::Unsat => return Ok(SmtOutcome::Unsat),
                SatResult::Unknown => return Ok(SmtOutcome::Unknown),
                SatResult::Sat(m) => m,
            };
            let alpha = lift_model(&self.abs.formula, &self.map, &model)
                .expect("model covers tracked bits");
            match check_theories(self.f, &mut self.abs, &alpha, self.cfg.all_violations) {
                TheoryVerdict::Conflict(ls) => {
                    rounds += 1;
                    self.stats.lemmas += ls.len() as u64;
                    self.stats.max_rounds = self.stats.max_rounds.max(rounds);
                    self.lemmas.extend(ls);
                }
                TheoryVerdict::Consistent(full) => {
                    if !satisfies(self.f, &full) {
                        return Err(SmtError::InvalidModel);
                    }
                    return Ok(SmtOutcome::Sat(Solution {
                        assignment: full,
                        abstraction: alpha,
                    }));
                }
            }
        }
    }
}
