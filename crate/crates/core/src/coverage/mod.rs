//! AST-bit coverage: the bit universe of a formula, per-solution cover sets,
//! the accumulated cover state and the scores built on it.
//!
//! Slot `2k` of a cover bitset stands for entry `k` taking value 0 and slot
//! `2k + 1` for value 1. Constant literals are not part of the universe and
//! shared subterms are counted once.

mod eval;
mod value;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{eval_all, evaluate, satisfies};
pub use value::{domain_size, value_sort, ArrayValue, Assignment, FunValue, Value};

use crate::smtlib::{Formula, TermId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoverageError {
    #[error("cover set has {got} slots, universe has {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct CountedNode {
    node: TermId,
    width: u32,
    offset: usize,
}

/// Every (node, bit) pair of the non-constant Bool/bit-vector nodes reachable
/// from the assertions, in node-id then bit order.
#[derive(Clone, Debug)]
pub struct AstBitUniverse {
    nodes: Vec<CountedNode>,
    num_entries: usize,
}

impl AstBitUniverse {
    pub fn build(f: &Formula) -> Self {
        let mut nodes = Vec::new();
        let mut offset = 0;
        for t in f.reachable() {
            let n = f.node(t);
            if n.op.is_const() {
                continue;
            }
            if let Some(width) = n.sort.bit_width() {
                nodes.push(CountedNode {
                    node: t,
                    width,
                    offset,
                });
                offset += width as usize;
            }
        }
        AstBitUniverse {
            nodes,
            num_entries: offset,
        }
    }

    pub fn num_entries(&self) -> usize {
        self.num_entries
    }

    /// |ASTBits|: two slots per entry.
    pub fn total_slots(&self) -> usize {
        2 * self.num_entries
    }

    pub fn entries(&self) -> impl Iterator<Item = (TermId, u32)> + '_ {
        self.nodes
            .iter()
            .flat_map(|n| (0..n.width).map(move |b| (n.node, b)))
    }

    pub fn counted_nodes(&self) -> impl Iterator<Item = TermId> + '_ {
        self.nodes.iter().map(|n| n.node)
    }

    /// Cover set from precomputed node values (as returned by [`eval_all`]).
    pub fn cover_from_values(&self, vals: &[Value]) -> FixedBitSet {
        let mut slots = FixedBitSet::with_capacity(self.total_slots());
        for n in &self.nodes {
            let v = &vals[n.node.index()];
            for b in 0..n.width {
                let k = n.offset + b as usize;
                slots.insert(2 * k + v.bit(b) as usize);
            }
        }
        slots
    }
}

pub fn build_universe(f: &Formula) -> AstBitUniverse {
    AstBitUniverse::build(f)
}

/// AST-bits covered by one assignment; exactly one slot per entry is set.
pub fn cover_set(f: &Formula, u: &AstBitUniverse, a: &Assignment) -> FixedBitSet {
    u.cover_from_values(&eval_all(f, a))
}

#[derive(Clone, Debug)]
pub struct CoverState {
    covered: FixedBitSet,
    num_solutions: usize,
}

impl CoverState {
    pub fn new(u: &AstBitUniverse) -> Self {
        CoverState {
            covered: FixedBitSet::with_capacity(u.total_slots()),
            num_solutions: 0,
        }
    }

    pub fn covered(&self) -> &FixedBitSet {
        &self.covered
    }

    pub fn covered_slots(&self) -> usize {
        self.covered.count_ones(..)
    }

    pub fn num_solutions(&self) -> usize {
        self.num_solutions
    }

    /// Unions `slots` into the covered set and counts one more solution.
    pub fn absorb(&mut self, slots: &FixedBitSet) -> Result<(), CoverageError> {
        if slots.len() != self.covered.len() {
            return Err(CoverageError::SizeMismatch {
                expected: self.covered.len(),
                got: slots.len(),
            });
        }
        self.covered.union_with(slots);
        self.num_solutions += 1;
        Ok(())
    }

    pub fn report(&self, u: &AstBitUniverse) -> CoverageReport {
        CoverageReport {
            covered_slots: self.covered_slots(),
            total_slots: u.total_slots(),
            coverage_star: coverage_star(self, u),
            num_solutions: self.num_solutions,
        }
    }
}

/// Covered slots over all slots. Zero before any solution is absorbed; a
/// formula with an empty universe is fully covered by any solution.
pub fn coverage_star(c: &CoverState, u: &AstBitUniverse) -> f64 {
    if c.num_solutions == 0 {
        0.0
    } else if u.total_slots() == 0 {
        1.0
    } else {
        c.covered_slots() as f64 / u.total_slots() as f64
    }
}

/// Number of slots of `slots` not yet covered by `c`.
pub fn score_slots(c: &CoverState, slots: &FixedBitSet) -> usize {
    slots.difference(&c.covered).count()
}

/// Newly covered AST-bits if `a` were added; proportional to the Coverage* gain.
pub fn ast_score(f: &Formula, u: &AstBitUniverse, c: &CoverState, a: &Assignment) -> usize {
    score_slots(c, &cover_set(f, u, a))
}

pub fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Sum of Hamming distances between the tracked variable bits of `a` and each of `prior`.
pub fn manhattan_score(f: &Formula, prior: &[Assignment], a: &Assignment) -> usize {
    let bits = a.tracked_bits(f);
    prior
        .iter()
        .map(|b| hamming(&bits, &b.tracked_bits(f)))
        .sum()
}

pub fn absorb(c: &mut CoverState, slots: &FixedBitSet) -> Result<(), CoverageError> {
    c.absorb(slots)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub covered_slots: usize,
    pub total_slots: usize,
    pub coverage_star: f64,
    pub num_solutions: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv::Bv;
    use crate::smtlib::parse_formula;

    fn assign(f: &Formula, vals: &[(&str, Value)]) -> Assignment {
        let mut a = Assignment::zeros(f);
        for (n, v) in vals {
            a.set(f.lookup(n).unwrap(), v.clone());
        }
        a
    }

    #[test]
    fn single_node_universe() {
        let f = parse_formula("(declare-const x (_ BitVec 3))(assert (= x x))").unwrap();
        let u = build_universe(&f);
        // x contributes 3 entries (6 AST-bits); the `=` node one more.
        assert_eq!(
            u.entries()
                .filter(|(t, _)| f.node(*t).op == crate::smtlib::Op::Var(f.lookup("x").unwrap()))
                .count(),
            3
        );
        let g = parse_formula("(declare-const x Bool)(assert x)").unwrap();
        let ug = build_universe(&g);
        assert_eq!(ug.num_entries(), 1);
        assert_eq!(ug.total_slots(), 2);
    }

    #[test]
    fn constants_are_excluded_and_sharing_counted_once() {
        let f = parse_formula(
            "(declare-const a (_ BitVec 2))(declare-const b (_ BitVec 2))(assert (= (bvadd a b) #b00))",
        )
        .unwrap();
        let u = build_universe(&f);
        assert_eq!(u.num_entries(), 7);
        assert_eq!(u.total_slots(), 14);
        let g = parse_formula(
            "(declare-const a (_ BitVec 2))(assert (and (= (bvadd a a) a) (= (bvadd a a) #b01)))",
        )
        .unwrap();
        // a, bvadd, two `=`, and
        assert_eq!(build_universe(&g).num_entries(), 2 + 2 + 1 + 1 + 1);
    }

    #[test]
    fn cover_set_of_single_boolean() {
        let f = parse_formula("(declare-const x Bool)(assert x)").unwrap();
        let u = build_universe(&f);
        let a = assign(&f, &[("x", Value::Bool(true))]);
        let s = cover_set(&f, &u, &a);
        assert!(s.contains(1));
        assert!(!s.contains(0));
    }

    #[test]
    fn coverage_star_progression() {
        let f = parse_formula("(declare-const x Bool)(assert (or x (not x)))").unwrap();
        let u = build_universe(&f);
        let mut c = CoverState::new(&u);
        assert_eq!(coverage_star(&c, &u), 0.0);
        let s1 = cover_set(&f, &u, &assign(&f, &[("x", Value::Bool(false))]));
        let s0 = cover_set(&f, &u, &assign(&f, &[("x", Value::Bool(true))]));
        assert_eq!(score_slots(&c, &s1), u.num_entries());
        c.absorb(&s1).unwrap();
        assert_eq!(coverage_star(&c, &u), 0.5);
        assert_eq!(score_slots(&c, &s1), 0);
        c.absorb(&s1).unwrap();
        assert_eq!(c.num_solutions(), 2);
        assert_eq!(coverage_star(&c, &u), 0.5);
        c.absorb(&s0).unwrap();
        // x and `not x` flip; the `or` root stays true.
        assert_eq!(c.covered_slots(), 5);
        assert!(c.absorb(&FixedBitSet::with_capacity(3)).is_err());
    }

    #[test]
    fn manhattan_counts_flipped_bits() {
        let f = parse_formula("(declare-const x (_ BitVec 4))(assert (= x x))").unwrap();
        let zero = assign(&f, &[("x", Value::Bv(Bv::zero(4)))]);
        let ones = assign(&f, &[("x", Value::Bv(Bv::ones(4)))]);
        assert_eq!(manhattan_score(&f, &[], &ones), 0);
        assert_eq!(manhattan_score(&f, std::slice::from_ref(&ones), &ones), 0);
        assert_eq!(manhattan_score(&f, &[zero], &ones), 4);
    }
}
