//! Tseitin bit-blasting of bit-vector formulas.

use std::collections::HashMap;
use std::ops::Not;

use thiserror::Error;

use super::abstraction::Abstraction;
use crate::coverage::{Assignment, Value};
use crate::sat::{Cnf, Lit, Var};
use crate::smtlib::{Formula, Op, SymbolId, TermId, TrackedBit};

/// Correspondence between tracked variable bits and SAT variables.
///
/// Tracked bits take the first SAT variables, in `var_bits` order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlastMap {
    bits: Vec<TrackedBit>,
    by_symbol: HashMap<SymbolId, (usize, u32)>,
}

impl BlastMap {
    fn new(f: &Formula) -> Self {
        let bits = f.var_bits();
        let mut by_symbol = HashMap::new();
        let mut start = 0;
        for s in f.scalar_vars() {
            let w = f.symbol(s).sort.bit_width().unwrap();
            by_symbol.insert(s, (start, w));
            start += w as usize;
        }
        BlastMap { bits, by_symbol }
    }

    pub fn tracked_bits(&self) -> &[TrackedBit] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// blasted(x(i)).
    pub fn forward(&self, tb: TrackedBit) -> Option<Var> {
        let &(start, w) = self.by_symbol.get(&tb.symbol)?;
        (tb.bit < w).then(|| Var((start + tb.bit as usize) as u32))
    }

    pub fn reverse(&self, v: Var) -> Option<TrackedBit> {
        self.bits.get(v.index()).copied()
    }

    /// SAT variables of a symbol's bits, least significant first.
    pub fn symbol_vars(&self, s: SymbolId) -> Option<impl Iterator<Item = Var>> {
        let &(start, w) = self.by_symbol.get(&s)?;
        Some((start..start + w as usize).map(|i| Var(i as u32)))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BlastError {
    #[error("width mismatch at `{op}`: {detail}")]
    Width { op: &'static str, detail: String },
    #[error("`{0}` cannot be bit-blasted; abstract the formula first")]
    Theory(&'static str),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LiftError {
    #[error("SAT model has {got} variables, tracked bit {symbol}({bit}) needs variable {need}")]
    Unassigned {
        symbol: String,
        bit: u32,
        need: usize,
        got: usize,
    },
}

/// CNF of the abstraction's assertions, its extensionality axioms and `lemmas`.
pub fn bit_blast(abs: &Abstraction, lemmas: &[TermId]) -> Result<(Cnf, BlastMap), BlastError> {
    let roots: Vec<TermId> = abs
        .formula
        .assertions()
        .iter()
        .chain(&abs.axioms)
        .chain(lemmas)
        .copied()
        .collect();
    blast_roots(&abs.formula, &roots)
}

/// CNF of a formula without arrays or functions.
pub fn blast_formula(f: &Formula) -> Result<(Cnf, BlastMap), BlastError> {
    blast_roots(f, f.assertions())
}

fn blast_roots(f: &Formula, roots: &[TermId]) -> Result<(Cnf, BlastMap), BlastError> {
    let map = BlastMap::new(f);
    let mut b = Blaster {
        f,
        cnf: Cnf::new(),
        terms: HashMap::new(),
        gates: HashMap::new(),
        map: &map,
    };
    b.cnf.num_vars = map.len() as u32;
    for &r in roots {
        let bits = b.blast(r)?;
        match bits[0] {
            Bit::Const(true) => {}
            Bit::Const(false) => b.cnf.clauses.push(Vec::new()),
            Bit::Lit(l) => b.cnf.add_clause([l]),
        }
    }
    let cnf = b.cnf;
    Ok((cnf, map))
}

/// Reads every tracked bit of the abstraction from a SAT model.
pub fn lift_model(f: &Formula, map: &BlastMap, model: &[bool]) -> Result<Assignment, LiftError> {
    let mut a = Assignment::new();
    for s in f.scalar_vars() {
        let sort = &f.symbol(s).sort;
        let mut bits = Vec::new();
        for (bit, v) in map
            .symbol_vars(s)
            .expect("scalar symbol is mapped")
            .enumerate()
        {
            let Some(&x) = model.get(v.index()) else {
                return Err(LiftError::Unassigned {
                    symbol: f.symbol(s).name.clone(),
                    bit: bit as u32,
                    need: v.index(),
                    got: model.len(),
                });
            };
            bits.push(x);
        }
        a.set(s, Value::from_bits(sort, &bits));
    }
    Ok(a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bit {
    Const(bool),
    Lit(Lit),
}

impl Not for Bit {
    type Output = Bit;
    fn not(self) -> Bit {
        match self {
            Bit::Const(b) => Bit::Const(!b),
            Bit::Lit(l) => Bit::Lit(!l),
        }
    }
}

const F: Bit = Bit::Const(false);
const T: Bit = Bit::Const(true);

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Gate {
    And(Lit, Lit),
    Xor(Lit, Lit),
    Mux(Lit, Lit, Lit),
}

struct Blaster<'a> {
    f: &'a Formula,
    cnf: Cnf,
    terms: HashMap<TermId, Vec<Bit>>,
    gates: HashMap<Gate, Lit>,
    map: &'a BlastMap,
}

impl Blaster<'_> {
    fn fresh(&mut self) -> Lit {
        self.cnf.new_var().lit(true)
    }

    fn and(&mut self, a: Bit, b: Bit) -> Bit {
        let (x, y) = match (a, b) {
            (F, _) | (_, F) => return F,
            (T, o) | (o, T) => return o,
            (Bit::Lit(x), Bit::Lit(y)) => (x.min(y), x.max(y)),
        };
        if x == y {
            return Bit::Lit(x);
        }
        if x == !y {
            return F;
        }
        if let Some(&g) = self.gates.get(&Gate::And(x, y)) {
            return Bit::Lit(g);
        }
        let g = self.fresh();
        self.cnf.add_clause([!g, x]);
        self.cnf.add_clause([!g, y]);
        self.cnf.add_clause([g, !x, !y]);
        self.gates.insert(Gate::And(x, y), g);
        Bit::Lit(g)
    }

    fn or(&mut self, a: Bit, b: Bit) -> Bit {
        !self.and(!a, !b)
    }

    fn xor(&mut self, a: Bit, b: Bit) -> Bit {
        let (x, y) = match (a, b) {
            (Bit::Const(c), o) | (o, Bit::Const(c)) => return if c { !o } else { o },
            (Bit::Lit(x), Bit::Lit(y)) => (x, y),
        };
        // Normalise to positive literals; each negation flips the output.
        let flip = !x.is_positive() ^ !y.is_positive();
        let (x, y) = (x.var().lit(true), y.var().lit(true));
        let (x, y) = (x.min(y), x.max(y));
        let out = if x == y {
            F
        } else if let Some(&g) = self.gates.get(&Gate::Xor(x, y)) {
            Bit::Lit(g)
        } else {
            let g = self.fresh();
            self.cnf.add_clause([!g, x, y]);
            self.cnf.add_clause([!g, !x, !y]);
            self.cnf.add_clause([g, !x, y]);
            self.cnf.add_clause([g, x, !y]);
            self.gates.insert(Gate::Xor(x, y), g);
            Bit::Lit(g)
        };
        if flip {
            !out
        } else {
            out
        }
    }

    fn xnor(&mut self, a: Bit, b: Bit) -> Bit {
        !self.xor(a, b)
    }

    /// `c ? t : e`.
    fn mux(&mut self, c: Bit, t: Bit, e: Bit) -> Bit {
        match (c, t, e) {
            (T, _, _) => t,
            (F, _, _) => e,
            _ if t == e => t,
            (_, T, F) => c,
            (_, F, T) => !c,
            (_, T, _) => self.or(c, e),
            (_, F, _) => self.and(!c, e),
            (_, _, T) => self.or(!c, t),
            (_, _, F) => self.and(c, t),
            (Bit::Lit(c), Bit::Lit(t), Bit::Lit(e)) => {
                if t == !e {
                    return self.xnor(Bit::Lit(c), Bit::Lit(t));
                }
                if let Some(&g) = self.gates.get(&Gate::Mux(c, t, e)) {
                    return Bit::Lit(g);
                }
                let g = self.fresh();
                self.cnf.add_clause([!c, !t, g]);
                self.cnf.add_clause([!c, t, !g]);
                self.cnf.add_clause([c, !e, g]);
                self.cnf.add_clause([c, e, !g]);
                self.gates.insert(Gate::Mux(c, t, e), g);
                Bit::Lit(g)
            }
        }
    }

    fn and_all(&mut self, bits: impl IntoIterator<Item = Bit>) -> Bit {
        let mut acc = T;
        for b in bits {
            acc = self.and(acc, b);
        }
        acc
    }

    fn or_all(&mut self, bits: impl IntoIterator<Item = Bit>) -> Bit {
        let mut acc = F;
        for b in bits {
            acc = self.or(acc, b);
        }
        acc
    }

    fn add(&mut self, a: &[Bit], b: &[Bit], mut carry: Bit) -> Vec<Bit> {
        let mut out = Vec::with_capacity(a.len());
        for (&x, &y) in a.iter().zip(b) {
            let p = self.xor(x, y);
            out.push(self.xor(p, carry));
            let g = self.and(x, y);
            let k = self.and(p, carry);
            carry = self.or(g, k);
        }
        out
    }

    fn mul(&mut self, a: &[Bit], b: &[Bit]) -> Vec<Bit> {
        let w = a.len();
        let mut acc = vec![F; w];
        for i in 0..w {
            if b[i] == F {
                continue;
            }
            let mut row = vec![F; w];
            for j in i..w {
                row[j] = self.and(a[j - i], b[i]);
            }
            acc = self.add(&acc, &row, F);
        }
        acc
    }

    fn shift(&mut self, x: &[Bit], amount: &[Bit], op: &Op) -> Vec<Bit> {
        let w = x.len();
        let fill = if *op == Op::BvAshr { x[w - 1] } else { F };
        let mut cur = x.to_vec();
        let mut overflow = F;
        for (k, &a) in amount.iter().enumerate() {
            let s = if k < 63 { 1u64 << k } else { u64::MAX };
            if s >= w as u64 {
                overflow = self.or(overflow, a);
                continue;
            }
            let s = s as usize;
            let mut next = Vec::with_capacity(w);
            for j in 0..w {
                let moved = match op {
                    Op::BvShl => {
                        if j >= s {
                            cur[j - s]
                        } else {
                            F
                        }
                    }
                    _ => {
                        if j + s < w {
                            cur[j + s]
                        } else {
                            fill
                        }
                    }
                };
                next.push(self.mux(a, moved, cur[j]));
            }
            cur = next;
        }
        cur.into_iter()
            .map(|b| self.mux(overflow, fill, b))
            .collect()
    }

    fn ult(&mut self, a: &[Bit], b: &[Bit]) -> Bit {
        let mut lt = F;
        for (&x, &y) in a.iter().zip(b) {
            let d = self.xor(x, y);
            lt = self.mux(d, y, lt);
        }
        lt
    }

    fn slt(&mut self, a: &[Bit], b: &[Bit]) -> Bit {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        let top = a.len() - 1;
        a[top] = !a[top];
        b[top] = !b[top];
        self.ult(&a, &b)
    }

    fn eq(&mut self, a: &[Bit], b: &[Bit]) -> Bit {
        let mut acc = T;
        for (&x, &y) in a.iter().zip(b) {
            let e = self.xnor(x, y);
            acc = self.and(acc, e);
        }
        acc
    }

    fn blast(&mut self, root: TermId) -> Result<Vec<Bit>, BlastError> {
        if let Some(v) = self.terms.get(&root) {
            return Ok(v.clone());
        }
        // Children have smaller ids, so ascending order is bottom-up.
        for t in self.f.reachable_from(&[root]) {
            if self.terms.contains_key(&t) {
                continue;
            }
            let bits = self.blast_node(t)?;
            self.terms.insert(t, bits);
        }
        Ok(self.terms[&root].clone())
    }

    fn blast_node(&mut self, t: TermId) -> Result<Vec<Bit>, BlastError> {
        let node = self.f.node(t);
        let op = node.op.clone();
        let ch: Vec<Vec<Bit>> = node
            .children
            .iter()
            .map(|c| self.terms[c].clone())
            .collect();
        let same = |op: &'static str, a: &[Bit], b: &[Bit]| -> Result<(), BlastError> {
            if a.len() != b.len() {
                Err(BlastError::Width {
                    op,
                    detail: format!("{} vs {}", a.len(), b.len()),
                })
            } else {
                Ok(())
            }
        };
        let bits = match &op {
            Op::Var(s) => {
                let vars = self
                    .map
                    .symbol_vars(*s)
                    .ok_or(BlastError::Theory("array or function variable"))?;
                vars.map(|v| Bit::Lit(v.lit(true))).collect()
            }
            Op::BoolConst(b) => vec![Bit::Const(*b)],
            Op::BvConst(v) => v.bits().map(Bit::Const).collect(),
            Op::BvAdd => {
                same("bvadd", &ch[0], &ch[1])?;
                self.add(&ch[0], &ch[1], F)
            }
            Op::BvMul => {
                same("bvmul", &ch[0], &ch[1])?;
                self.mul(&ch[0], &ch[1])
            }
            Op::BvAnd | Op::BvOr | Op::BvXor => {
                same(op.name(), &ch[0], &ch[1])?;
                let mut out = Vec::with_capacity(ch[0].len());
                for (&x, &y) in ch[0].iter().zip(&ch[1]) {
                    out.push(match op {
                        Op::BvAnd => self.and(x, y),
                        Op::BvOr => self.or(x, y),
                        _ => self.xor(x, y),
                    });
                }
                out
            }
            Op::BvNot => ch[0].iter().map(|&b| !b).collect(),
            Op::BvNeg => {
                let inv: Vec<Bit> = ch[0].iter().map(|&b| !b).collect();
                let zero = vec![F; inv.len()];
                self.add(&inv, &zero, T)
            }
            Op::BvShl | Op::BvLshr | Op::BvAshr => {
                same(op.name(), &ch[0], &ch[1])?;
                self.shift(&ch[0], &ch[1], &op)
            }
            Op::BvUlt => vec![self.ult(&ch[0], &ch[1])],
            Op::BvUle => vec![!self.ult(&ch[1], &ch[0])],
            Op::BvSlt => vec![self.slt(&ch[0], &ch[1])],
            Op::BvSle => vec![!self.slt(&ch[1], &ch[0])],
            Op::Concat => {
                let mut out = ch[1].clone();
                out.extend_from_slice(&ch[0]);
                out
            }
            Op::Extract { hi, lo } => ch[0][*lo as usize..=*hi as usize].to_vec(),
            Op::Ite => {
                same("ite", &ch[1], &ch[2])?;
                let c = ch[0][0];
                let mut out = Vec::with_capacity(ch[1].len());
                for (&x, &y) in ch[1].iter().zip(&ch[2]) {
                    out.push(self.mux(c, x, y));
                }
                out
            }
            Op::Eq => {
                same("=", &ch[0], &ch[1])?;
                vec![self.eq(&ch[0], &ch[1])]
            }
            Op::Distinct => {
                let mut parts = Vec::new();
                for i in 0..ch.len() {
                    for j in i + 1..ch.len() {
                        same("distinct", &ch[i], &ch[j])?;
                        parts.push(!self.eq(&ch[i], &ch[j]));
                    }
                }
                vec![self.and_all(parts)]
            }
            Op::And => vec![self.and_all(ch.iter().map(|c| c[0]))],
            Op::Or => vec![self.or_all(ch.iter().map(|c| c[0]))],
            Op::Not => vec![!ch[0][0]],
            Op::Implies => vec![self.or(!ch[0][0], ch[1][0])],
            Op::Select => return Err(BlastError::Theory("select")),
            Op::Store => return Err(BlastError::Theory("store")),
            Op::Apply(_) => return Err(BlastError::Theory("function application")),
        };
        Ok(bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitblast::abstract_formula;
    use crate::coverage::satisfies;
    use crate::smtlib::parse_formula;

    /// Projections onto the tracked bits of every model of `cnf`.
    fn projected_models(cnf: &Cnf, tracked: usize) -> Vec<Vec<bool>> {
        let n = cnf.num_vars as usize;
        assert!(n <= 22, "too many variables to enumerate");
        let mut out = Vec::new();
        for m in 0u64..(1 << n) {
            let model: Vec<bool> = (0..n).map(|i| m >> i & 1 == 1).collect();
            if cnf.is_satisfied_by(&model) {
                out.push(model[..tracked].to_vec());
            }
        }
        out.sort();
        out.dedup();
        out
    }

    #[test]
    fn unit_assertion() {
        let f = parse_formula("(declare-const x Bool)(assert x)").unwrap();
        let (cnf, map) = blast_formula(&f).unwrap();
        assert_eq!(cnf.num_vars, 1);
        assert_eq!(cnf.clauses, vec![vec![Var(0).lit(true)]]);
        let a = lift_model(&f, &map, &[true]).unwrap();
        assert_eq!(a.get(f.lookup("x").unwrap()), Some(&Value::Bool(true)));
        assert!(lift_model(&f, &map, &[]).is_err());
    }

    #[test]
    fn xnor_gadget() {
        let f = parse_formula(
            "(declare-const x (_ BitVec 1))(declare-const y (_ BitVec 1))(assert (= x y))",
        )
        .unwrap();
        let (cnf, map) = blast_formula(&f).unwrap();
        assert_eq!(
            projected_models(&cnf, map.len()),
            vec![vec![false, false], vec![true, true]]
        );
    }

    #[test]
    fn unsigned_less_than_has_six_models() {
        let f = parse_formula(
            "(declare-const x (_ BitVec 2))(declare-const y (_ BitVec 2))(assert (bvult x y))",
        )
        .unwrap();
        let (cnf, map) = blast_formula(&f).unwrap();
        let models = projected_models(&cnf, map.len());
        assert_eq!(models.len(), 6);
        for m in models {
            let a = lift_model(&f, &map, &m).unwrap();
            assert!(satisfies(&f, &a));
        }
    }

    #[test]
    fn every_operator_agrees_with_evaluator() {
        let ops = [
            "(= (bvadd x y) z)",
            "(= (bvmul x y) z)",
            "(= (bvshl x y) z)",
            "(= (bvlshr x y) z)",
            "(= (bvashr x y) z)",
            "(= (bvneg x) z)",
            "(= (bvand x (bvor y (bvnot z))) (bvxor x y))",
            "(bvslt x y)",
            "(bvsle x z)",
            "(bvule y z)",
            "(= ((_ extract 2 1) (concat x y)) ((_ extract 1 0) z))",
            "(distinct x y z)",
            "(=> (= x y) (= (ite (bvult x z) x z) y))",
        ];
        for body in ops {
            let src = format!(
                "(declare-const x (_ BitVec 3))(declare-const y (_ BitVec 3))(declare-const z (_ BitVec 3))(assert {body})"
            );
            let f = parse_formula(&src).unwrap();
            let (cnf, map) = blast_formula(&f).unwrap();
            let mut sat_count = 0;
            for m in 0u32..512 {
                let bits: Vec<bool> = (0..9).map(|i| m >> i & 1 == 1).collect();
                let a = lift_model(&f, &map, &bits).unwrap();
                let expected = satisfies(&f, &a);
                // tracked bits fixed; does some auxiliary extension satisfy the CNF?
                let mut fixed = cnf.clone();
                for (i, &b) in bits.iter().enumerate() {
                    fixed.add_clause([Var(i as u32).lit(b)]);
                }
                let got =
                    crate::sat::solve(&fixed, &Default::default(), &Default::default()).is_sat();
                assert_eq!(got, expected, "{body} at {m:09b}");
                sat_count += expected as u32;
            }
            assert!(sat_count > 0, "{body} unexpectedly unsat");
        }
    }

    #[test]
    fn abstraction_with_lemmas_blasts() {
        let f = parse_formula(
            "(declare-const a (Array (_ BitVec 2) (_ BitVec 1)))(declare-const i (_ BitVec 2))(assert (= (select a i) #b1))",
        )
        .unwrap();
        let abs = abstract_formula(&f);
        let (cnf, map) = bit_blast(&abs, &[]).unwrap();
        // i (2 bits) then the fresh select bit
        assert_eq!(map.len(), 3);
        assert!(cnf.num_vars >= 3);
        assert!(blast_formula(&f).is_err());
    }
}
