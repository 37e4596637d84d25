//! Bit-vector abstraction: array reads, function applications and array
//! equalities become fresh constants of a pure bit-vector formula.
//!
//! The abstraction declares the original symbols first and in the same
//! order, so a `SymbolId` of the input names the same symbol here. Fresh
//! constants follow. Array terms are kept aside as a small DAG over
//! [`ArrayNode`] whose scalar operands are terms of the abstraction.
//!
//! Extensionality is instantiated up front: every array equality atom gets a
//! witness index and the per-index consequences over all index terms.

use std::collections::HashMap;

use crate::coverage::{evaluate, ArrayValue, Assignment, Value};
use crate::smtlib::{Formula, Op, Sort, SymbolId, SymbolKind, TermId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArrayRef(pub u32);

impl ArrayRef {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ArrayNode {
    Base(SymbolId),
    Store {
        parent: ArrayRef,
        index: TermId,
        value: TermId,
    },
    Ite {
        cond: TermId,
        then: ArrayRef,
        els: ArrayRef,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AtomKind {
    Select {
        array: ArrayRef,
        index: TermId,
    },
    Apply {
        fun: SymbolId,
        args: Vec<TermId>,
    },
    ArrayEq {
        lhs: ArrayRef,
        rhs: ArrayRef,
    },
    /// Index at which the arrays of an equality atom differ when it is false.
    Witness {
        eq: SymbolId,
    },
}

/// A fresh constant standing for a theory term.
#[derive(Clone, Debug)]
pub struct Atom {
    pub symbol: SymbolId,
    pub term: TermId,
    pub kind: AtomKind,
    /// Node of the input formula this atom replaces, if any.
    pub origin: Option<TermId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mapped {
    Scalar(TermId),
    Array(ArrayRef),
}

#[derive(Clone, Debug)]
pub struct Abstraction {
    pub formula: Formula,
    pub atoms: Vec<Atom>,
    pub arrays: Vec<ArrayNode>,
    /// Extensionality instances; blasted alongside the assertions.
    pub axioms: Vec<TermId>,
    num_original_symbols: usize,
    mapped: HashMap<TermId, Mapped>,
    array_memo: HashMap<ArrayNode, ArrayRef>,
    select_memo: HashMap<(ArrayRef, TermId), usize>,
    apply_memo: HashMap<(SymbolId, Vec<TermId>), usize>,
    eq_memo: HashMap<(ArrayRef, ArrayRef), usize>,
    atom_of: HashMap<SymbolId, usize>,
}

/// Builds the bit-vector abstraction of `f`.
pub fn abstract_formula(f: &Formula) -> Abstraction {
    let mut g = Formula::new();
    g.logic = Some("QF_BV".into());
    for s in f.symbol_ids() {
        let sym = f.symbol(s);
        g.declare(&sym.name, sym.sort.clone())
            .expect("redeclaring input symbols");
    }
    let mut abs = Abstraction {
        formula: g,
        atoms: Vec::new(),
        arrays: Vec::new(),
        axioms: Vec::new(),
        num_original_symbols: f.symbols().len(),
        mapped: HashMap::new(),
        array_memo: HashMap::new(),
        select_memo: HashMap::new(),
        apply_memo: HashMap::new(),
        eq_memo: HashMap::new(),
        atom_of: HashMap::new(),
    };
    for t in f.reachable() {
        let m = abs.translate(f, t);
        abs.mapped.insert(t, m);
    }
    for &t in f.assertions() {
        let Some(Mapped::Scalar(u)) = abs.mapped.get(&t).copied() else {
            unreachable!("assertions are Bool")
        };
        abs.formula.assert_term(u).expect("Bool assertion");
    }
    abs.instantiate_extensionality();
    abs
}

impl Abstraction {
    pub fn num_original_symbols(&self) -> usize {
        self.num_original_symbols
    }

    /// True when nothing was abstracted.
    pub fn is_pure(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_original(&self, s: SymbolId) -> bool {
        s.index() < self.num_original_symbols
    }

    pub fn atom(&self, s: SymbolId) -> Option<&Atom> {
        self.atom_of.get(&s).map(|&i| &self.atoms[i])
    }

    /// Image of a scalar node of the input formula.
    pub fn map_term(&self, t: TermId) -> Option<TermId> {
        match self.mapped.get(&t) {
            Some(Mapped::Scalar(u)) => Some(*u),
            _ => None,
        }
    }

    pub fn map_array(&self, t: TermId) -> Option<ArrayRef> {
        match self.mapped.get(&t) {
            Some(Mapped::Array(a)) => Some(*a),
            _ => None,
        }
    }

    pub fn array(&self, a: ArrayRef) -> &ArrayNode {
        &self.arrays[a.index()]
    }

    /// Sort of an array term.
    pub fn array_sort(&self, a: ArrayRef) -> Sort {
        self.base_sort(a)
    }

    pub fn select_atoms(&self) -> impl Iterator<Item = (usize, ArrayRef, TermId)> + '_ {
        self.atoms
            .iter()
            .enumerate()
            .filter_map(|(i, a)| match a.kind {
                AtomKind::Select { array, index } => Some((i, array, index)),
                _ => None,
            })
    }

    pub fn apply_atoms(&self) -> impl Iterator<Item = (usize, SymbolId, &[TermId])> + '_ {
        self.atoms
            .iter()
            .enumerate()
            .filter_map(|(i, a)| match &a.kind {
                AtomKind::Apply { fun, args } => Some((i, *fun, args.as_slice())),
                _ => None,
            })
    }

    /// Number of endpoints a read over `a` can reach, and how many of them are base arrays.
    pub fn read_paths(&self, a: ArrayRef) -> (u64, u64) {
        match &self.arrays[a.index()] {
            ArrayNode::Base(_) => (1, 1),
            ArrayNode::Store { parent, .. } => {
                let (n, e) = self.read_paths(*parent);
                (n + 1, e)
            }
            ArrayNode::Ite { then, els, .. } => {
                let (n1, e1) = self.read_paths(*then);
                let (n2, e2) = self.read_paths(*els);
                (n1 + n2, e1 + e2)
            }
        }
    }

    /// Upper bound on distinct lemma instances: one read-over-write instance
    /// per store endpoint of every read, one congruence instance per pair of
    /// base endpoints, one functional-consistency instance per pair of
    /// applications of the same symbol.
    pub fn axiom_bound(&self) -> u64 {
        let mut row = 0u64;
        let mut base = 0u64;
        for (_, a, _) in self.select_atoms() {
            let (n, e) = self.read_paths(a);
            row = row.saturating_add(n - e);
            base = base.saturating_add(e);
        }
        let pairs = |k: u64| k.saturating_mul(k.saturating_sub(1)) / 2;
        let mut per_fun: HashMap<SymbolId, u64> = HashMap::new();
        for (_, fun, _) in self.apply_atoms() {
            *per_fun.entry(fun).or_default() += 1;
        }
        let ack: u64 = per_fun.values().map(|&k| pairs(k)).sum();
        row.saturating_add(pairs(base)).saturating_add(ack)
    }

    /// The bit-vector abstraction of an assignment to the input formula:
    /// original symbols keep their values, every atom takes the value of the
    /// term it replaces.
    pub fn project(&self, f: &Formula, a: &Assignment) -> Assignment {
        let mut p = Assignment::new();
        for s in f.symbol_ids() {
            if f.symbol(s).kind == SymbolKind::Var {
                let v = a
                    .get(s)
                    .cloned()
                    .unwrap_or_else(|| Value::zero(&f.symbol(s).sort));
                p.set(s, v);
            }
        }
        for atom in &self.atoms {
            let v = match &atom.kind {
                AtomKind::Select { array, index } => {
                    let arr = self.eval_array(f, *array, a, &p);
                    let i = evaluate(&self.formula, *index, &p);
                    arr.get(&i).clone()
                }
                AtomKind::Apply { fun, args } => {
                    let args: Vec<Value> = args
                        .iter()
                        .map(|&t| evaluate(&self.formula, t, &p))
                        .collect();
                    match a.get(*fun) {
                        Some(Value::Fun(fv)) => fv.apply(&args).clone(),
                        _ => {
                            let Sort::Fun(_, ret) = &f.symbol(*fun).sort else {
                                unreachable!()
                            };
                            Value::zero(ret)
                        }
                    }
                }
                AtomKind::ArrayEq { lhs, rhs } => {
                    let l = self.eval_array(f, *lhs, a, &p);
                    let r = self.eval_array(f, *rhs, a, &p);
                    Value::Bool(l.semantic_eq(&r))
                }
                AtomKind::Witness { eq } => {
                    let AtomKind::ArrayEq { lhs, rhs } = self.atom(*eq).unwrap().kind else {
                        unreachable!()
                    };
                    let l = self.eval_array(f, lhs, a, &p);
                    let r = self.eval_array(f, rhs, a, &p);
                    let sort = self.formula.symbol(atom.symbol).sort.clone();
                    differing_index(&l, &r).unwrap_or_else(|| Value::zero(&sort))
                }
            };
            p.set(atom.symbol, v);
        }
        p
    }

    fn eval_array(
        &self,
        f: &Formula,
        a: ArrayRef,
        orig: &Assignment,
        p: &Assignment,
    ) -> ArrayValue {
        match &self.arrays[a.index()] {
            ArrayNode::Base(s) => match orig.get(*s) {
                Some(Value::Array(v)) => v.clone(),
                _ => Value::zero(&f.symbol(*s).sort).as_array().clone(),
            },
            ArrayNode::Store {
                parent,
                index,
                value,
            } => {
                let base = self.eval_array(f, *parent, orig, p);
                base.store(
                    evaluate(&self.formula, *index, p),
                    evaluate(&self.formula, *value, p),
                )
            }
            ArrayNode::Ite { cond, then, els } => {
                if evaluate(&self.formula, *cond, p).as_bool() {
                    self.eval_array(f, *then, orig, p)
                } else {
                    self.eval_array(f, *els, orig, p)
                }
            }
        }
    }

    pub(crate) fn mk(&mut self, op: Op, children: Vec<TermId>) -> TermId {
        self.formula
            .mk(op, children)
            .expect("well-sorted construction")
    }

    pub(crate) fn mk_eq(&mut self, a: TermId, b: TermId) -> TermId {
        self.mk(Op::Eq, vec![a, b])
    }

    pub(crate) fn mk_not(&mut self, a: TermId) -> TermId {
        self.mk(Op::Not, vec![a])
    }

    /// `premises ⇒ conclusion`, or just the conclusion without premises.
    pub(crate) fn mk_implication(&mut self, premises: Vec<TermId>, conclusion: TermId) -> TermId {
        match premises.len() {
            0 => conclusion,
            1 => self.mk(Op::Implies, vec![premises[0], conclusion]),
            _ => {
                let p = self.mk(Op::And, premises);
                self.mk(Op::Implies, vec![p, conclusion])
            }
        }
    }

    fn fresh(&mut self, base: &str, sort: Sort, kind: AtomKind, origin: Option<TermId>) -> usize {
        let symbol = self.formula.declare_fresh(base, sort);
        let term = self.formula.mk_var(symbol);
        let i = self.atoms.len();
        self.atoms.push(Atom {
            symbol,
            term,
            kind,
            origin,
        });
        self.atom_of.insert(symbol, i);
        i
    }

    fn array_ref(&mut self, node: ArrayNode) -> ArrayRef {
        if let Some(&r) = self.array_memo.get(&node) {
            return r;
        }
        let r = ArrayRef(self.arrays.len() as u32);
        self.arrays.push(node.clone());
        self.array_memo.insert(node, r);
        r
    }

    fn eq_atom(&mut self, a: ArrayRef, b: ArrayRef, origin: Option<TermId>) -> TermId {
        if a == b {
            return self.formula.mk_bool(true);
        }
        let key = (a.min(b), a.max(b));
        if let Some(&i) = self.eq_memo.get(&key) {
            return self.atoms[i].term;
        }
        let i = self.fresh(
            "arreq",
            Sort::Bool,
            AtomKind::ArrayEq {
                lhs: key.0,
                rhs: key.1,
            },
            origin,
        );
        self.eq_memo.insert(key, i);
        self.atoms[i].term
    }

    fn scalar(&self, t: TermId) -> TermId {
        match self.mapped[&t] {
            Mapped::Scalar(u) => u,
            Mapped::Array(_) => panic!("expected a scalar operand"),
        }
    }

    fn arr(&self, t: TermId) -> ArrayRef {
        match self.mapped[&t] {
            Mapped::Array(a) => a,
            Mapped::Scalar(_) => panic!("expected an array operand"),
        }
    }

    fn translate(&mut self, f: &Formula, t: TermId) -> Mapped {
        let node = f.node(t);
        let ch = &node.children;
        match &node.op {
            Op::Var(s) => {
                if node.sort.is_array() {
                    Mapped::Array(self.array_ref(ArrayNode::Base(*s)))
                } else {
                    Mapped::Scalar(self.formula.mk_var(*s))
                }
            }
            Op::BoolConst(b) => Mapped::Scalar(self.formula.mk_bool(*b)),
            Op::BvConst(v) => Mapped::Scalar(self.formula.mk_bv(v.clone())),
            Op::Select => {
                let a = self.arr(ch[0]);
                let i = self.scalar(ch[1]);
                Mapped::Scalar(self.select_atom(a, i, Some(t)))
            }
            Op::Store => {
                let parent = self.arr(ch[0]);
                let index = self.scalar(ch[1]);
                let value = self.scalar(ch[2]);
                Mapped::Array(self.array_ref(ArrayNode::Store {
                    parent,
                    index,
                    value,
                }))
            }
            Op::Ite if node.sort.is_array() => {
                let cond = self.scalar(ch[0]);
                let then = self.arr(ch[1]);
                let els = self.arr(ch[2]);
                Mapped::Array(self.array_ref(ArrayNode::Ite { cond, then, els }))
            }
            Op::Eq if f.sort(ch[0]).is_array() => {
                let (a, b) = (self.arr(ch[0]), self.arr(ch[1]));
                Mapped::Scalar(self.eq_atom(a, b, Some(t)))
            }
            Op::Distinct if f.sort(ch[0]).is_array() => {
                let refs: Vec<ArrayRef> = ch.iter().map(|&c| self.arr(c)).collect();
                let mut parts = Vec::new();
                for i in 0..refs.len() {
                    for j in i + 1..refs.len() {
                        let e = self.eq_atom(refs[i], refs[j], None);
                        parts.push(self.mk_not(e));
                    }
                }
                let r = if parts.len() == 1 {
                    parts[0]
                } else {
                    self.mk(Op::And, parts)
                };
                Mapped::Scalar(r)
            }
            Op::Apply(fun) => {
                let args: Vec<TermId> = ch.iter().map(|&c| self.scalar(c)).collect();
                let key = (*fun, args.clone());
                if let Some(&i) = self.apply_memo.get(&key) {
                    return Mapped::Scalar(self.atoms[i].term);
                }
                let i = self.fresh(
                    "app",
                    node.sort.clone(),
                    AtomKind::Apply { fun: *fun, args },
                    Some(t),
                );
                self.apply_memo.insert(key, i);
                Mapped::Scalar(self.atoms[i].term)
            }
            op => {
                let children: Vec<TermId> = ch.iter().map(|&c| self.scalar(c)).collect();
                Mapped::Scalar(self.mk(op.clone(), children))
            }
        }
    }

    /// Witness and per-index instances for every array equality atom.
    fn instantiate_extensionality(&mut self) {
        let eqs: Vec<usize> = self
            .atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| matches!(a.kind, AtomKind::ArrayEq { .. }))
            .map(|(i, _)| i)
            .collect();
        if eqs.is_empty() {
            return;
        }
        let mut indices: Vec<TermId> = Vec::new();
        for a in &self.atoms {
            if let AtomKind::Select { index, .. } = a.kind {
                indices.push(index);
            }
        }
        for n in &self.arrays {
            if let ArrayNode::Store { index, .. } = n {
                indices.push(*index);
            }
        }
        let mut witnesses = Vec::new();
        for &e in &eqs {
            let AtomKind::ArrayEq { lhs, .. } = self.atoms[e].kind else {
                unreachable!()
            };
            let sort = self.base_index_sort(lhs);
            let eq_sym = self.atoms[e].symbol;
            let w = self.fresh("ext", sort, AtomKind::Witness { eq: eq_sym }, None);
            witnesses.push(w);
            indices.push(self.atoms[w].term);
        }
        indices.sort();
        indices.dedup();
        for (k, &e) in eqs.iter().enumerate() {
            let AtomKind::ArrayEq { lhs, rhs } = self.atoms[e].kind else {
                unreachable!()
            };
            let eterm = self.atoms[e].term;
            let sort = self.base_index_sort(lhs);
            let w = self.atoms[witnesses[k]].term;
            let sl = self.select_atom(lhs, w, None);
            let sr = self.select_atom(rhs, w, None);
            let same = self.mk_eq(sl, sr);
            let differ = self.mk_not(same);
            let lemma = self.mk(Op::Or, vec![eterm, differ]);
            self.axioms.push(lemma);
            for &i in &indices {
                if *self.formula.sort(i) != sort {
                    continue;
                }
                let sl = self.select_atom(lhs, i, None);
                let sr = self.select_atom(rhs, i, None);
                let same = self.mk_eq(sl, sr);
                let lemma = self.mk(Op::Implies, vec![eterm, same]);
                self.axioms.push(lemma);
            }
        }
    }

    fn base_sort(&self, mut a: ArrayRef) -> Sort {
        loop {
            match &self.arrays[a.index()] {
                ArrayNode::Base(s) => return self.formula.symbol(*s).sort.clone(),
                ArrayNode::Store { parent, .. } => a = *parent,
                ArrayNode::Ite { then, .. } => a = *then,
            }
        }
    }

    fn base_index_sort(&self, a: ArrayRef) -> Sort {
        self.base_sort(a).array_parts().unwrap().0.clone()
    }

    pub(crate) fn select_atom(
        &mut self,
        array: ArrayRef,
        index: TermId,
        origin: Option<TermId>,
    ) -> TermId {
        if let Some(&i) = self.select_memo.get(&(array, index)) {
            return self.atoms[i].term;
        }
        let elem = self.base_sort(array).array_parts().unwrap().1.clone();
        let i = self.fresh("sel", elem, AtomKind::Select { array, index }, origin);
        self.select_memo.insert((array, index), i);
        self.atoms[i].term
    }
}

/// An index at which two arrays differ, if any.
pub fn differing_index(a: &ArrayValue, b: &ArrayValue) -> Option<Value> {
    for k in a.overrides.keys().chain(b.overrides.keys()) {
        if a.get(k) != b.get(k) {
            return Some(k.clone());
        }
    }
    if a.default == b.default {
        return None;
    }
    // Defaults differ: any index outside both override sets.
    let sort = &a.index_sort;
    let n = crate::coverage::domain_size(sort);
    let mut candidate = 0u128;
    loop {
        if candidate >= n {
            return None;
        }
        let v = match sort {
            Sort::Bool => Value::Bool(candidate == 1),
            Sort::BitVec(w) => Value::Bv(crate::bv::Bv::from_biguint(*w, &candidate.into())),
            _ => unreachable!(),
        };
        if !a.overrides.contains_key(&v) && !b.overrides.contains_key(&v) {
            return Some(v);
        }
        candidate += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::satisfies;
    use crate::smtlib::{parse_formula, print_formula};

    #[test]
    fn pure_formula_is_unchanged() {
        let src = "(declare-const a (_ BitVec 2))(declare-const b (_ BitVec 2))(assert (= (bvadd a b) #b00))";
        let f = parse_formula(src).unwrap();
        let abs = abstract_formula(&f);
        assert!(abs.is_pure());
        assert!(abs.axioms.is_empty());
        let mut g = abs.formula.clone();
        g.logic = f.logic.clone();
        assert_eq!(print_formula(&g), print_formula(&f));
        assert_eq!(abs.axiom_bound(), 0);
    }

    #[test]
    fn select_becomes_fresh_bit() {
        let f = parse_formula(
            "(declare-const a (Array (_ BitVec 2) (_ BitVec 1)))(declare-const i (_ BitVec 2))(assert (= (select a i) #b1))",
        )
        .unwrap();
        let abs = abstract_formula(&f);
        assert_eq!(abs.atoms.len(), 1);
        let atom = &abs.atoms[0];
        assert_eq!(abs.formula.symbol(atom.symbol).sort, Sort::BitVec(1));
        let root = abs.formula.node(abs.formula.assertions()[0]);
        assert_eq!(root.op, Op::Eq);
        assert_eq!(root.children[0], atom.term);
        assert!(abs
            .formula
            .nodes()
            .all(|(_, n)| !matches!(n.op, Op::Select | Op::Store | Op::Apply(_))));
        // ids of the original symbols are preserved
        assert_eq!(abs.formula.lookup("i"), f.lookup("i"));
    }

    #[test]
    fn applications_get_one_variable_each() {
        let f = parse_formula(
            "(declare-fun g ((_ BitVec 2)) (_ BitVec 2))(declare-const x (_ BitVec 2))(declare-const y (_ BitVec 2))
             (assert (= (g x) (g y)))",
        )
        .unwrap();
        let abs = abstract_formula(&f);
        assert_eq!(abs.apply_atoms().count(), 2);
        let root = abs.formula.node(abs.formula.assertions()[0]);
        assert_eq!(root.children, vec![abs.atoms[0].term, abs.atoms[1].term]);
        assert_eq!(abs.axiom_bound(), 1);
    }

    #[test]
    fn array_equality_gets_witness_and_instances() {
        let f = parse_formula(
            "(declare-const a (Array (_ BitVec 2) (_ BitVec 2)))(declare-const b (Array (_ BitVec 2) (_ BitVec 2)))
             (declare-const i (_ BitVec 2))(assert (and (= a (store b i #b01)) (= (select a i) #b10)))",
        )
        .unwrap();
        let abs = abstract_formula(&f);
        assert!(abs
            .atoms
            .iter()
            .any(|a| matches!(a.kind, AtomKind::Witness { .. })));
        // witness lemma plus one instance per index term (i and the witness)
        assert_eq!(abs.axioms.len(), 3);
    }

    #[test]
    fn solutions_project_to_solutions() {
        let f = parse_formula(
            "(declare-const a (Array (_ BitVec 1) (_ BitVec 2)))(declare-const i (_ BitVec 1))(declare-const v (_ BitVec 2))
             (assert (distinct a (store a i v)))",
        )
        .unwrap();
        let abs = abstract_formula(&f);
        let mut sol = Assignment::zeros(&f);
        sol.set(
            f.lookup("v").unwrap(),
            Value::Bv(crate::bv::Bv::from_u64(2, 3)),
        );
        assert!(satisfies(&f, &sol));
        let p = abs.project(&f, &sol);
        let mut full = abs.formula.clone();
        for &ax in &abs.axioms.clone() {
            full.assert_term(ax).unwrap();
        }
        assert!(satisfies(&full, &p));
    }

    #[test]
    fn read_paths_through_ite_and_store() {
        let f = parse_formula(
            "(declare-const a (Array (_ BitVec 2) (_ BitVec 2)))(declare-const b (Array (_ BitVec 2) (_ BitVec 2)))
             (declare-const c Bool)(declare-const i (_ BitVec 2))
             (assert (= (select (ite c (store a i #b01) b) i) #b11))",
        )
        .unwrap();
        let abs = abstract_formula(&f);
        let (_, arr, _) = abs.select_atoms().next().unwrap();
        assert_eq!(abs.read_paths(arr), (3, 2));
        // one store endpoint, two base endpoints -> 1 + C(2, 2)
        assert_eq!(abs.axiom_bound(), 2);
    }
}
