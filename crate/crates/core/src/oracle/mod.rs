//! Brute-force references for small formulas: exhaustive enumeration,
//! exact coverage and gain, minimum covering subsets, DPLL and fuzzing.

mod dpll;
pub mod fuzz;
mod slow_eval;

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::bv::Bv;
use crate::coverage::{build_universe, Assignment, AstBitUniverse, FunValue, Value};
use crate::smtlib::{Formula, Sort, TermId};

pub use dpll::dpll;
pub use slow_eval::{slow_evaluate, slow_satisfies, slow_values};

pub const DEFAULT_DOMAIN_BIT_CAP: u32 = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("enumeration needs {bits} bits, cap is {cap}")]
    CapExceeded { bits: u64, cap: u32 },
}

#[derive(Clone, Debug)]
pub struct EnumerationReport {
    pub solutions: Vec<Assignment>,
    pub covers: Vec<FixedBitSet>,
    /// Slots covered by at least one solution.
    pub valid: FixedBitSet,
    pub valid_bits: usize,
    pub total_slots: usize,
    pub domain_bits: u64,
}

fn scalar_domain(sort: &Sort) -> u64 {
    match sort {
        Sort::Bool => 2,
        Sort::BitVec(w) if *w < 63 => 1 << w,
        _ => u64::MAX,
    }
}

fn scalar_value(sort: &Sort, k: u64) -> Value {
    match sort {
        Sort::Bool => Value::Bool(k == 1),
        Sort::BitVec(w) => Value::Bv(Bv::from_u64(*w, k)),
        _ => unreachable!(),
    }
}

/// Bits needed to enumerate every value of a symbol: whole tables for
/// arrays and functions.
fn symbol_bits(sort: &Sort) -> u64 {
    match sort {
        Sort::Bool | Sort::BitVec(_) => sort.bit_width().unwrap() as u64,
        Sort::Array(i, e) => scalar_domain(i).saturating_mul(e.bit_width().unwrap() as u64),
        Sort::Fun(args, r) => args
            .iter()
            .fold(1u64, |acc, a| acc.saturating_mul(scalar_domain(a)))
            .saturating_mul(r.bit_width().unwrap() as u64),
    }
}

fn take(bits: &mut u64, w: u32) -> u64 {
    let v = *bits & ((1u64 << w) - 1);
    *bits >>= w;
    v
}

fn decode(f: &Formula, mut code: u64) -> Assignment {
    let mut a = Assignment::new();
    for s in f.symbol_ids() {
        let sort = f.symbol(s).sort.clone();
        let v = match &sort {
            Sort::Bool | Sort::BitVec(_) => {
                let w = sort.bit_width().unwrap();
                scalar_value(&sort, take(&mut code, w))
            }
            Sort::Array(i, e) => {
                let mut arr = Value::zero(&sort).as_array().clone();
                let w = e.bit_width().unwrap();
                for k in 0..scalar_domain(i) {
                    let cell = scalar_value(e, take(&mut code, w));
                    arr = arr.store(scalar_value(i, k), cell);
                }
                Value::Array(arr)
            }
            Sort::Fun(args, r) => {
                let w = r.bit_width().unwrap();
                let mut table = BTreeMap::new();
                let n: u64 = args.iter().map(scalar_domain).product();
                for mut k in 0..n {
                    let mut tuple = Vec::with_capacity(args.len());
                    for s in args {
                        let d = scalar_domain(s);
                        tuple.push(scalar_value(s, k % d));
                        k /= d;
                    }
                    let out = scalar_value(r, take(&mut code, w));
                    if out != Value::zero(r) {
                        table.insert(tuple, out);
                    }
                }
                Value::Fun(FunValue {
                    default: Box::new(Value::zero(r)),
                    table,
                })
            }
        };
        a.set(s, v);
    }
    a
}

/// Cover set computed with the slow evaluator.
pub fn oracle_cover_set(f: &Formula, u: &AstBitUniverse, a: &Assignment) -> FixedBitSet {
    let nodes: Vec<TermId> = u.counted_nodes().collect();
    let vals = slow_values(f, &nodes, a);
    let mut slots = FixedBitSet::with_capacity(u.total_slots());
    let mut k = 0;
    for (node, v) in nodes.iter().zip(&vals) {
        let w = f.sort(*node).bit_width().unwrap();
        for b in 0..w {
            slots.insert(2 * k + v.bit(b) as usize);
            k += 1;
        }
    }
    slots
}

/// Every solution of `f` over the full domains of its symbols.
pub fn enumerate_solutions(
    f: &Formula,
    domain_bit_cap: u32,
) -> Result<EnumerationReport, OracleError> {
    let bits = f
        .symbols()
        .iter()
        .fold(0u64, |acc, s| acc.saturating_add(symbol_bits(&s.sort)));
    if bits > domain_bit_cap as u64 || bits >= 63 {
        return Err(OracleError::CapExceeded {
            bits,
            cap: domain_bit_cap,
        });
    }
    let u = build_universe(f);
    let mut report = EnumerationReport {
        solutions: Vec::new(),
        covers: Vec::new(),
        valid: FixedBitSet::with_capacity(u.total_slots()),
        valid_bits: 0,
        total_slots: u.total_slots(),
        domain_bits: bits,
    };
    for code in 0..1u64 << bits {
        let a = decode(f, code);
        if slow_satisfies(f, &a) {
            let c = oracle_cover_set(f, &u, &a);
            report.valid.union_with(&c);
            report.covers.push(c);
            report.solutions.push(a);
        }
    }
    report.valid_bits = report.valid.count_ones(..);
    Ok(report)
}

fn union_of(f: &Formula, u: &AstBitUniverse, sols: &[Assignment]) -> FixedBitSet {
    let mut s = FixedBitSet::with_capacity(u.total_slots());
    for a in sols {
        s.union_with(&oracle_cover_set(f, u, a));
    }
    s
}

/// Covered valid bits over all valid bits.
pub fn exact_coverage(f: &Formula, report: &EnumerationReport, sols: &[Assignment]) -> f64 {
    if sols.is_empty() || report.valid_bits == 0 {
        return 0.0;
    }
    let u = build_universe(f);
    union_of(f, &u, sols).count_ones(..) as f64 / report.valid_bits as f64
}

/// Exact coverage gain of adding `alpha` to `prior`.
pub fn exact_scr(
    f: &Formula,
    report: &EnumerationReport,
    prior: &[Assignment],
    alpha: &Assignment,
) -> f64 {
    if report.valid_bits == 0 {
        return 0.0;
    }
    let u = build_universe(f);
    let before = union_of(f, &u, prior);
    let mut after = before.clone();
    after.union_with(&oracle_cover_set(f, &u, alpha));
    (after.count_ones(..) - before.count_ones(..)) as f64 / report.valid_bits as f64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinCover {
    pub cardinality: usize,
    /// Indices into the report's solutions.
    pub solutions: Vec<usize>,
    /// False when the greedy fallback was used; the cardinality is then an upper bound.
    pub exact: bool,
}

/// Smallest set of solutions whose coverage reaches `r`. Full coverage uses
/// an exact set-cover search; partial targets search subsets exhaustively
/// when at most 20 candidate sets remain and fall back to greedy otherwise.
pub fn min_cover(report: &EnumerationReport, r: f64) -> MinCover {
    let need = ((r * report.valid_bits as f64) - 1e-9).ceil().max(0.0) as usize;
    let need = need.min(report.valid_bits);
    if need == 0 {
        return MinCover {
            cardinality: 0,
            solutions: Vec::new(),
            exact: true,
        };
    }
    // distinct, undominated cover sets
    let mut cands: Vec<usize> = Vec::new();
    for (i, c) in report.covers.iter().enumerate() {
        if cands.iter().any(|&j| report.covers[j] == *c) {
            continue;
        }
        cands.push(i);
    }
    let cands: Vec<usize> = cands
        .iter()
        .copied()
        .filter(|&i| {
            !cands.iter().any(|&j| {
                j != i
                    && report.covers[i].is_subset(&report.covers[j])
                    && report.covers[i] != report.covers[j]
            })
        })
        .collect();
    if need == report.valid_bits {
        let sets: Vec<&FixedBitSet> = cands.iter().map(|&i| &report.covers[i]).collect();
        let mut budget = EXACT_NODE_BUDGET;
        for k in 1..=sets.len() {
            let mut picked = Vec::new();
            let covered = FixedBitSet::with_capacity(report.total_slots);
            match cover_within(&sets, &report.valid, covered, k, &mut picked, &mut budget) {
                Some(true) => {
                    let solutions: Vec<usize> = picked.iter().map(|&j| cands[j]).collect();
                    return MinCover {
                        cardinality: solutions.len(),
                        solutions,
                        exact: true,
                    };
                }
                Some(false) => {}
                None => break,
            }
        }
    } else if cands.len() <= 20 {
        let n = cands.len();
        let mut best: Option<u32> = None;
        for mask in 1u32..(1 << n) {
            let k = mask.count_ones();
            if best.is_some_and(|b| k >= b.count_ones()) {
                continue;
            }
            let mut u = FixedBitSet::with_capacity(report.total_slots);
            for (bit, &i) in cands.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    u.union_with(&report.covers[i]);
                }
            }
            if u.count_ones(..) >= need {
                best = Some(mask);
            }
        }
        let mask = best.expect("all solutions together reach the valid bits");
        let solutions: Vec<usize> = (0..n)
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| cands[b])
            .collect();
        return MinCover {
            cardinality: solutions.len(),
            solutions,
            exact: true,
        };
    }
    let mut covered = FixedBitSet::with_capacity(report.total_slots);
    let mut chosen = Vec::new();
    while covered.count_ones(..) < need {
        let (i, _) = cands
            .iter()
            .map(|&i| (i, report.covers[i].difference(&covered).count()))
            .max_by_key(|&(i, g)| (g, std::cmp::Reverse(i)))
            .unwrap();
        covered.union_with(&report.covers[i]);
        chosen.push(i);
    }
    MinCover {
        cardinality: chosen.len(),
        solutions: chosen,
        exact: false,
    }
}

const EXACT_NODE_BUDGET: u64 = 2_000_000;

/// Depth-limited search for `k` sets covering `target`, branching on the
/// uncovered element with the fewest covering sets. `None` when the node
/// budget runs out.
fn cover_within(
    sets: &[&FixedBitSet],
    target: &FixedBitSet,
    covered: FixedBitSet,
    k: usize,
    picked: &mut Vec<usize>,
    budget: &mut u64,
) -> Option<bool> {
    if *budget == 0 {
        return None;
    }
    *budget -= 1;
    let missing: Vec<usize> = target.difference(&covered).collect();
    if missing.is_empty() {
        return Some(true);
    }
    if k == 0 {
        return Some(false);
    }
    let best_gain = sets
        .iter()
        .map(|s| missing.iter().filter(|&&e| s.contains(e)).count())
        .max()
        .unwrap_or(0);
    if best_gain * k < missing.len() {
        return Some(false);
    }
    let pivot = *missing
        .iter()
        .min_by_key(|&&e| sets.iter().filter(|s| s.contains(e)).count())
        .unwrap();
    for (j, s) in sets.iter().enumerate() {
        if !s.contains(pivot) {
            continue;
        }
        let mut next = covered.clone();
        next.union_with(s);
        picked.push(j);
        match cover_within(sets, target, next, k - 1, picked, budget)? {
            true => return Some(true),
            false => {
                picked.pop();
            }
        }
    }
    Some(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::{build_universe, cover_set, satisfies};
    use crate::smtlib::parse_formula;

    #[test]
    fn tautology_enumeration() {
        let f = parse_formula("(declare-const x Bool)(assert (or x (not x)))").unwrap();
        let r = enumerate_solutions(&f, DEFAULT_DOMAIN_BIT_CAP).unwrap();
        assert_eq!(r.solutions.len(), 2);
        // x and `not x` take both values, the root only `true`
        assert_eq!(r.valid_bits, 5);
        assert_eq!(r.total_slots, 6);
        assert_eq!(exact_coverage(&f, &r, &r.solutions), 1.0);
        assert_eq!(exact_coverage(&f, &r, &[]), 0.0);
        assert_eq!(exact_coverage(&f, &r, &r.solutions[..1]), 3.0 / 5.0);
        assert_eq!(min_cover(&r, 1.0).cardinality, 2);
        assert_eq!(min_cover(&r, 0.0).cardinality, 0);
    }

    #[test]
    fn contradiction_and_forced_value() {
        let f = parse_formula("(declare-const x Bool)(assert (and x (not x)))").unwrap();
        let r = enumerate_solutions(&f, DEFAULT_DOMAIN_BIT_CAP).unwrap();
        assert!(r.solutions.is_empty());
        assert_eq!(r.valid_bits, 0);

        let g = parse_formula("(declare-const m (_ BitVec 2))(assert (= m #b11))").unwrap();
        let r = enumerate_solutions(&g, DEFAULT_DOMAIN_BIT_CAP).unwrap();
        assert_eq!(r.solutions.len(), 1);
        assert_eq!(
            r.solutions[0].get(g.lookup("m").unwrap()),
            Some(&Value::Bv(Bv::from_u64(2, 3)))
        );
        assert_eq!(min_cover(&r, 1.0).cardinality, 1);
    }

    #[test]
    fn cap_is_enforced() {
        let f = parse_formula("(declare-const m (_ BitVec 21))(assert (= m m))").unwrap();
        assert_eq!(
            enumerate_solutions(&f, DEFAULT_DOMAIN_BIT_CAP).unwrap_err(),
            OracleError::CapExceeded { bits: 21, cap: 20 }
        );
    }

    #[test]
    fn arrays_and_functions_enumerate_whole_tables() {
        let f = parse_formula(
            "(declare-const a (Array (_ BitVec 1) (_ BitVec 1)))(declare-fun g ((_ BitVec 1)) Bool)(declare-const i (_ BitVec 1))
             (assert (and (= (select a i) #b1) (g i)))",
        )
        .unwrap();
        let r = enumerate_solutions(&f, DEFAULT_DOMAIN_BIT_CAP).unwrap();
        // 2 + 2 + 1 bits; for each i, the other cell of a and the other row of g are free
        assert_eq!(r.domain_bits, 5);
        assert_eq!(r.solutions.len(), 2 * 2 * 2);
        let u = build_universe(&f);
        for (a, c) in r.solutions.iter().zip(&r.covers) {
            assert!(satisfies(&f, a));
            assert_eq!(*c, cover_set(&f, &u, a));
        }
    }

    #[test]
    fn scr_and_greedy_fallback() {
        let f = parse_formula("(declare-const m (_ BitVec 5))(assert (= m m))").unwrap();
        let r = enumerate_solutions(&f, DEFAULT_DOMAIN_BIT_CAP).unwrap();
        assert_eq!(exact_scr(&f, &r, &[], &r.solutions[0]), 6.0 / 11.0);
        assert_eq!(exact_scr(&f, &r, &r.solutions[..1], &r.solutions[0]), 0.0);
        // 32 distinct undominated covers: exact set cover at r = 1, greedy below
        let m = min_cover(&r, 1.0);
        assert!(m.exact);
        assert_eq!(m.cardinality, 2);
        let g = min_cover(&r, 0.8);
        assert!(!g.exact);
        assert_eq!(g.cardinality, 2);
    }
}
