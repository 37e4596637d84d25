//! Array and function consistency checks over a model of the abstraction.
//!
//! A read is followed down its array term under the candidate: through
//! `ite` by the condition's value, past stores whose index differs, until it
//! hits a store at an equal index or a base array. A hit with a different
//! value violates read-over-write. Two reads reaching the same base array at
//! equal index values with different results violate read congruence.
//! Applications of one function at equal argument values with different
//! results violate functional consistency. Each violation yields a lemma over
//! the abstraction that is false under the candidate.

use std::collections::HashMap;

use crate::bitblast::{Abstraction, ArrayNode, AtomKind};
use crate::coverage::{eval_all, Assignment, FunValue, Value};
use crate::smtlib::{Formula, Sort, SymbolId, TermId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TheoryVerdict {
    /// Assignment over the input formula's symbols.
    Consistent(Assignment),
    /// Lemmas over the abstraction, each false under the candidate.
    Conflict(Vec<TermId>),
}

impl TheoryVerdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, TheoryVerdict::Consistent(_))
    }
}

#[derive(Clone, Copy, Debug)]
enum PathLit {
    Cond(TermId, bool),
    IndexNe(TermId, TermId),
}

struct Endpoint {
    atom: usize,
    index: TermId,
    path: Vec<PathLit>,
}

fn path_terms(abs: &mut Abstraction, path: &[PathLit]) -> Vec<TermId> {
    path.iter()
        .map(|p| match *p {
            PathLit::Cond(c, true) => c,
            PathLit::Cond(c, false) => abs.mk_not(c),
            PathLit::IndexNe(i, j) => {
                let e = abs.mk_eq(i, j);
                abs.mk_not(e)
            }
        })
        .collect()
}

fn scalars(f: &Formula, a: &Assignment) -> Assignment {
    let mut out = Assignment::new();
    for s in f.scalar_vars() {
        let v = a
            .get(s)
            .cloned()
            .unwrap_or_else(|| Value::zero(&f.symbol(s).sort));
        out.set(s, v);
    }
    out
}

fn array_lemmas(
    abs: &mut Abstraction,
    a: &Assignment,
    all: bool,
) -> Result<Vec<(SymbolId, Value, Value)>, Vec<TermId>> {
    let vals = eval_all(&abs.formula, a);
    let val = |t: TermId| &vals[t.index()];
    let mut lemmas = Vec::new();
    let mut reads: HashMap<(SymbolId, Value), Endpoint> = HashMap::new();
    let mut cells = Vec::new();
    let selects: Vec<(usize, _, TermId)> = abs.select_atoms().collect();
    for (atom, array, index) in selects {
        let sel = abs.atoms[atom].term;
        let iv = val(index).clone();
        let sv = val(sel).clone();
        let mut path = Vec::new();
        let mut cur = array;
        loop {
            match abs.array(cur).clone() {
                ArrayNode::Base(base) => {
                    match reads.get(&(base, iv.clone())) {
                        Some(first) if *val(abs.atoms[first.atom].term) != sv => {
                            let mut premises = path_terms(abs, &first.path);
                            premises.extend(path_terms(abs, &path));
                            if first.index != index {
                                premises.push(abs.mk_eq(first.index, index));
                            }
                            let other = abs.atoms[first.atom].term;
                            let conclusion = abs.mk_eq(other, sel);
                            lemmas.push(abs.mk_implication(premises, conclusion));
                        }
                        Some(_) => {}
                        None => {
                            cells.push((base, iv.clone(), sv.clone()));
                            reads.insert((base, iv.clone()), Endpoint { atom, index, path });
                        }
                    }
                    break;
                }
                ArrayNode::Store {
                    parent,
                    index: j,
                    value,
                } => {
                    if *val(j) == iv {
                        if *val(value) != sv {
                            let mut premises = path_terms(abs, &path);
                            if j != index {
                                premises.push(abs.mk_eq(index, j));
                            }
                            let conclusion = abs.mk_eq(sel, value);
                            lemmas.push(abs.mk_implication(premises, conclusion));
                        }
                        break;
                    }
                    path.push(PathLit::IndexNe(index, j));
                    cur = parent;
                }
                ArrayNode::Ite { cond, then, els } => {
                    let c = val(cond).as_bool();
                    path.push(PathLit::Cond(cond, c));
                    cur = if c { then } else { els };
                }
            }
        }
        if !all && !lemmas.is_empty() {
            break;
        }
    }
    if lemmas.is_empty() {
        Ok(cells)
    } else {
        Err(lemmas)
    }
}

/// Observed `(function, arguments, result)` rows.
type FunRows = Vec<(SymbolId, Vec<Value>, Value)>;

fn function_lemmas(
    abs: &mut Abstraction,
    a: &Assignment,
    all: bool,
) -> Result<FunRows, Vec<TermId>> {
    let vals = eval_all(&abs.formula, a);
    let mut seen: HashMap<(SymbolId, Vec<Value>), usize> = HashMap::new();
    let mut lemmas = Vec::new();
    let mut table = Vec::new();
    let apps: Vec<(usize, SymbolId, Vec<TermId>)> = abs
        .apply_atoms()
        .map(|(i, f, args)| (i, f, args.to_vec()))
        .collect();
    for (atom, fun, args) in &apps {
        let key: Vec<Value> = args.iter().map(|t| vals[t.index()].clone()).collect();
        let r = abs.atoms[*atom].term;
        let rv = vals[r.index()].clone();
        match seen.get(&(*fun, key.clone())) {
            Some(&first) => {
                let other = abs.atoms[first].term;
                if vals[other.index()] != rv {
                    let AtomKind::Apply {
                        args: first_args, ..
                    } = abs.atoms[first].kind.clone()
                    else {
                        unreachable!()
                    };
                    let mut premises = Vec::new();
                    for (&x, &y) in first_args.iter().zip(args) {
                        if x != y {
                            premises.push(abs.mk_eq(x, y));
                        }
                    }
                    let conclusion = abs.mk_eq(other, r);
                    lemmas.push(abs.mk_implication(premises, conclusion));
                    if !all {
                        break;
                    }
                }
            }
            None => {
                seen.insert((*fun, key.clone()), *atom);
                table.push((*fun, key, rv));
            }
        }
    }
    if lemmas.is_empty() {
        Ok(table)
    } else {
        Err(lemmas)
    }
}

/// Read-over-write and read-congruence check. On success the completion
/// binds every array of `f` to zero plus the cells read from it.
pub fn check_arrays(
    f: &Formula,
    abs: &mut Abstraction,
    a: &Assignment,
    all: bool,
) -> TheoryVerdict {
    match array_lemmas(abs, a, all) {
        Err(l) => TheoryVerdict::Conflict(l),
        Ok(cells) => {
            let mut out = scalars(f, a);
            complete_arrays(f, &mut out, cells);
            TheoryVerdict::Consistent(out)
        }
    }
}

/// Functional-consistency check. On success the completion binds every
/// function of `f` to the observed table with default zero.
pub fn check_functions(
    f: &Formula,
    abs: &mut Abstraction,
    a: &Assignment,
    all: bool,
) -> TheoryVerdict {
    match function_lemmas(abs, a, all) {
        Err(l) => TheoryVerdict::Conflict(l),
        Ok(table) => {
            let mut out = scalars(f, a);
            complete_functions(f, &mut out, table);
            TheoryVerdict::Consistent(out)
        }
    }
}

/// Arrays first, then functions; the completion covers every symbol of `f`.
pub fn check_theories(
    f: &Formula,
    abs: &mut Abstraction,
    a: &Assignment,
    all: bool,
) -> TheoryVerdict {
    let cells = match array_lemmas(abs, a, all) {
        Err(l) => return TheoryVerdict::Conflict(l),
        Ok(c) => c,
    };
    let table = match function_lemmas(abs, a, all) {
        Err(l) => return TheoryVerdict::Conflict(l),
        Ok(t) => t,
    };
    let mut out = scalars(f, a);
    complete_arrays(f, &mut out, cells);
    complete_functions(f, &mut out, table);
    TheoryVerdict::Consistent(out)
}

fn complete_arrays(f: &Formula, out: &mut Assignment, cells: Vec<(SymbolId, Value, Value)>) {
    for s in f.array_vars() {
        out.set(s, Value::zero(&f.symbol(s).sort));
    }
    for (s, i, v) in cells {
        let Some(Value::Array(arr)) = out.get(s) else {
            unreachable!()
        };
        let next = arr.store(i, v);
        out.set(s, Value::Array(next));
    }
}

fn complete_functions(
    f: &Formula,
    out: &mut Assignment,
    table: Vec<(SymbolId, Vec<Value>, Value)>,
) {
    let mut funs: HashMap<SymbolId, FunValue> = HashMap::new();
    for s in f.functions() {
        let Sort::Fun(_, ret) = &f.symbol(s).sort else {
            unreachable!()
        };
        funs.insert(
            s,
            FunValue {
                default: Box::new(Value::zero(ret)),
                table: Default::default(),
            },
        );
    }
    for (s, args, v) in table {
        let fv = funs.get_mut(&s).expect("applied symbol is a function");
        if v != *fv.default {
            fv.table.insert(args, v);
        }
    }
    for (s, fv) in funs {
        out.set(s, Value::Fun(fv));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitblast::abstract_formula;
    use crate::bv::Bv;
    use crate::coverage::{evaluate, satisfies};
    use crate::smtlib::parse_formula;

    fn bv(w: u32, v: u64) -> Value {
        Value::Bv(Bv::from_u64(w, v))
    }

    fn set(abs: &Abstraction, a: &mut Assignment, name: &str, v: Value) {
        a.set(abs.formula.lookup(name).unwrap(), v);
    }

    const ROW: &str = "(declare-const a (Array (_ BitVec 2) (_ BitVec 2)))(declare-const i (_ BitVec 2))(declare-const v (_ BitVec 2))
        (assert (= (select (store a i v) i) (select (store a i v) i)))";

    #[test]
    fn read_over_write_violation() {
        let f = parse_formula(ROW).unwrap();
        let mut abs = abstract_formula(&f);
        let sel = abs.formula.symbol(abs.atoms[0].symbol).name.clone();
        let mut a = Assignment::zeros(&abs.formula);
        set(&abs, &mut a, "v", bv(2, 1));
        set(&abs, &mut a, &sel, bv(2, 2));
        let TheoryVerdict::Conflict(ls) = check_arrays(&f, &mut abs, &a, false) else {
            panic!("expected a conflict")
        };
        assert_eq!(ls.len(), 1);
        assert_eq!(evaluate(&abs.formula, ls[0], &a), Value::Bool(false));

        set(&abs, &mut a, &sel, bv(2, 1));
        set(&abs, &mut a, "i", bv(2, 3));
        let TheoryVerdict::Consistent(full) = check_arrays(&f, &mut abs, &a, false) else {
            panic!("expected consistency")
        };
        // the store is visible through the read, the base array stays zero
        assert_eq!(
            full.get(f.lookup("a").unwrap()),
            Some(&Value::zero(&f.symbol(f.lookup("a").unwrap()).sort))
        );
        assert!(satisfies(&f, &full));
    }

    #[test]
    fn read_congruence_violation() {
        let f = parse_formula(
            "(declare-const a (Array (_ BitVec 2) (_ BitVec 2)))(declare-const i (_ BitVec 2))(declare-const j (_ BitVec 2))
             (assert (distinct (select a i) (select a j)))",
        )
        .unwrap();
        let mut abs = abstract_formula(&f);
        let names: Vec<String> = abs
            .atoms
            .iter()
            .map(|x| abs.formula.symbol(x.symbol).name.clone())
            .collect();
        let mut a = Assignment::zeros(&abs.formula);
        set(&abs, &mut a, &names[0], bv(2, 1));
        set(&abs, &mut a, &names[1], bv(2, 2));
        let TheoryVerdict::Conflict(ls) = check_arrays(&f, &mut abs, &a, false) else {
            panic!("expected a conflict")
        };
        assert_eq!(evaluate(&abs.formula, ls[0], &a), Value::Bool(false));
        // unequal indices: consistent, with both cells filled in
        set(&abs, &mut a, "j", bv(2, 2));
        let TheoryVerdict::Consistent(full) = check_arrays(&f, &mut abs, &a, false) else {
            panic!("expected consistency")
        };
        assert!(satisfies(&f, &full));
        let arr = full.get(f.lookup("a").unwrap()).unwrap().as_array();
        assert_eq!(arr.get(&bv(2, 0)), &bv(2, 1));
        assert_eq!(arr.get(&bv(2, 2)), &bv(2, 2));
    }

    #[test]
    fn congruence_of_functions() {
        let f = parse_formula(
            "(declare-fun g ((_ BitVec 2)) (_ BitVec 2))(declare-const x (_ BitVec 2))(declare-const y (_ BitVec 2))(declare-const z (_ BitVec 2))
             (assert (and (= x y) (= (g x) (bvadd (g y) (g z)))))",
        )
        .unwrap();
        let mut abs = abstract_formula(&f);
        let names: Vec<String> = abs
            .atoms
            .iter()
            .map(|x| abs.formula.symbol(x.symbol).name.clone())
            .collect();
        let mut a = Assignment::zeros(&abs.formula);
        // all three arguments equal, results 1, 1, 3
        set(&abs, &mut a, &names[0], bv(2, 1));
        set(&abs, &mut a, &names[1], bv(2, 1));
        set(&abs, &mut a, &names[2], bv(2, 3));
        let TheoryVerdict::Conflict(ls) = check_functions(&f, &mut abs, &a, false) else {
            panic!("expected a conflict")
        };
        assert_eq!(ls.len(), 1);
        assert_eq!(evaluate(&abs.formula, ls[0], &a), Value::Bool(false));
        let TheoryVerdict::Conflict(all) = check_functions(&f, &mut abs, &a, true) else {
            panic!()
        };
        assert_eq!(all.len(), 1);
    }

    #[test]
    fn single_application_is_consistent() {
        let f = parse_formula(
            "(declare-fun g ((_ BitVec 2)) Bool)(declare-const x (_ BitVec 2))(assert (g x))",
        )
        .unwrap();
        let mut abs = abstract_formula(&f);
        let mut a = Assignment::zeros(&abs.formula);
        let app = abs.formula.symbol(abs.atoms[0].symbol).name.clone();
        set(&abs, &mut a, &app, Value::Bool(true));
        set(&abs, &mut a, "x", bv(2, 2));
        let TheoryVerdict::Consistent(full) = check_theories(&f, &mut abs, &a, false) else {
            panic!()
        };
        assert!(satisfies(&f, &full));
    }
}
