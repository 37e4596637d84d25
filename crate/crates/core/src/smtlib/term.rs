//! Hash-consed term DAG and the formula container.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sort::Sort;
use crate::bv::Bv;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TermId(pub u32);

impl TermId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymbolId(pub u32);

impl SymbolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Var(SymbolId),
    BoolConst(bool),
    BvConst(Bv),
    BvAdd,
    BvMul,
    BvAnd,
    BvOr,
    BvXor,
    BvNot,
    BvNeg,
    BvShl,
    BvLshr,
    BvAshr,
    BvUlt,
    BvUle,
    BvSlt,
    BvSle,
    Concat,
    Extract { hi: u32, lo: u32 },
    Ite,
    Eq,
    Distinct,
    And,
    Or,
    Not,
    Implies,
    Select,
    Store,
    Apply(SymbolId),
}

impl Op {
    pub fn is_const(&self) -> bool {
        matches!(self, Op::BoolConst(_) | Op::BvConst(_))
    }

    /// SMT-LIB operator name, without indices.
    pub fn name(&self) -> &'static str {
        match self {
            Op::Var(_) => "var",
            Op::BoolConst(_) | Op::BvConst(_) => "const",
            Op::BvAdd => "bvadd",
            Op::BvMul => "bvmul",
            Op::BvAnd => "bvand",
            Op::BvOr => "bvor",
            Op::BvXor => "bvxor",
            Op::BvNot => "bvnot",
            Op::BvNeg => "bvneg",
            Op::BvShl => "bvshl",
            Op::BvLshr => "bvlshr",
            Op::BvAshr => "bvashr",
            Op::BvUlt => "bvult",
            Op::BvUle => "bvule",
            Op::BvSlt => "bvslt",
            Op::BvSle => "bvsle",
            Op::Concat => "concat",
            Op::Extract { .. } => "extract",
            Op::Ite => "ite",
            Op::Eq => "=",
            Op::Distinct => "distinct",
            Op::And => "and",
            Op::Or => "or",
            Op::Not => "not",
            Op::Implies => "=>",
            Op::Select => "select",
            Op::Store => "store",
            Op::Apply(_) => "apply",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    pub op: Op,
    pub children: Vec<TermId>,
    pub sort: Sort,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    /// Bool or bit-vector constant.
    Var,
    Array,
    Fun,
}

#[derive(Clone, Debug)]
pub struct Symbol {
    pub name: String,
    pub sort: Sort,
    pub kind: SymbolKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SortError {
    #[error("`{op}` expects {expected} argument(s), got {got}")]
    Arity {
        op: String,
        expected: String,
        got: usize,
    },
    #[error("sort mismatch in `{op}`: {detail}")]
    Mismatch { op: String, detail: String },
    #[error("symbol `{0}` is already declared")]
    Redeclared(String),
    #[error("unsupported sort {0}")]
    UnsupportedSort(String),
}

/// A tracked bit `x(i)` of a Bool or bit-vector variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrackedBit {
    pub symbol: SymbolId,
    pub bit: u32,
}

/// Conjunction of assertions over a hash-consed term DAG.
///
/// Node ids are topologically ordered: every child id is smaller than its parent's.
#[derive(Clone, Debug, Default)]
pub struct Formula {
    nodes: Vec<Node>,
    cons: HashMap<(Op, Vec<TermId>), TermId>,
    symbols: Vec<Symbol>,
    by_name: HashMap<String, SymbolId>,
    assertions: Vec<TermId>,
    pub logic: Option<String>,
    pub warnings: Vec<String>,
}

impl Formula {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: &str, sort: Sort) -> Result<SymbolId, SortError> {
        if self.by_name.contains_key(name) {
            return Err(SortError::Redeclared(name.to_string()));
        }
        let kind = match &sort {
            Sort::Bool | Sort::BitVec(_) => SymbolKind::Var,
            Sort::Array(i, e) => {
                if !i.is_scalar() || !e.is_scalar() {
                    return Err(SortError::UnsupportedSort(sort.to_string()));
                }
                SymbolKind::Array
            }
            Sort::Fun(args, ret) => {
                if args.is_empty() || !ret.is_scalar() || !args.iter().all(Sort::is_scalar) {
                    return Err(SortError::UnsupportedSort(sort.to_string()));
                }
                SymbolKind::Fun
            }
        };
        if let Sort::BitVec(0) = sort {
            return Err(SortError::UnsupportedSort(sort.to_string()));
        }
        let id = SymbolId(self.symbols.len() as u32);
        self.symbols.push(Symbol {
            name: name.to_string(),
            sort,
            kind,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    /// Declares `base` or, if taken, the first free `base!k`.
    pub fn declare_fresh(&mut self, base: &str, sort: Sort) -> SymbolId {
        let mut k = self.symbols.len();
        let mut name = base.to_string();
        while self.by_name.contains_key(&name) {
            name = format!("{base}!{k}");
            k += 1;
        }
        self.declare(&name, sort).expect("fresh symbol declaration")
    }

    pub fn symbol(&self, id: SymbolId) -> &Symbol {
        &self.symbols[id.index()]
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol_ids(&self) -> impl Iterator<Item = SymbolId> + '_ {
        (0..self.symbols.len() as u32).map(SymbolId)
    }

    pub fn lookup(&self, name: &str) -> Option<SymbolId> {
        self.by_name.get(name).copied()
    }

    pub fn node(&self, id: TermId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn sort(&self, id: TermId) -> &Sort {
        &self.nodes[id.index()].sort
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (TermId, &Node)> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (TermId(i as u32), n))
    }

    pub fn assertions(&self) -> &[TermId] {
        &self.assertions
    }

    pub fn assert_term(&mut self, t: TermId) -> Result<(), SortError> {
        if !self.sort(t).is_bool() {
            return Err(SortError::Mismatch {
                op: "assert".into(),
                detail: format!("expected Bool, got {}", self.sort(t)),
            });
        }
        self.assertions.push(t);
        Ok(())
    }

    /// Bool/bit-vector variables, in declaration order.
    pub fn scalar_vars(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.symbol_ids()
            .filter(|&s| self.symbol(s).kind == SymbolKind::Var)
    }

    pub fn array_vars(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.symbol_ids()
            .filter(|&s| self.symbol(s).kind == SymbolKind::Array)
    }

    pub fn functions(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.symbol_ids()
            .filter(|&s| self.symbol(s).kind == SymbolKind::Fun)
    }

    /// One entry per bit of every Bool/bit-vector variable, in declaration
    /// order then bit index ascending. Arrays and functions contribute nothing.
    pub fn var_bits(&self) -> Vec<TrackedBit> {
        let mut out = Vec::new();
        for s in self.scalar_vars() {
            let w = self.symbol(s).sort.bit_width().unwrap();
            out.extend((0..w).map(|bit| TrackedBit { symbol: s, bit }));
        }
        out
    }

    /// Node ids reachable from the assertions, ascending.
    pub fn reachable(&self) -> Vec<TermId> {
        self.reachable_from(&self.assertions)
    }

    pub fn reachable_from(&self, roots: &[TermId]) -> Vec<TermId> {
        let mut mark = vec![false; self.nodes.len()];
        let mut stack: Vec<TermId> = roots.to_vec();
        while let Some(t) = stack.pop() {
            if std::mem::replace(&mut mark[t.index()], true) {
                continue;
            }
            stack.extend(self.nodes[t.index()].children.iter().copied());
        }
        mark.iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| TermId(i as u32))
            .collect()
    }

    pub fn mk_var(&mut self, s: SymbolId) -> TermId {
        let sort = self.symbol(s).sort.clone();
        assert!(
            !matches!(sort, Sort::Fun(..)),
            "function symbols are not terms"
        );
        self.intern(Op::Var(s), Vec::new(), sort)
    }

    pub fn mk_bool(&mut self, b: bool) -> TermId {
        self.intern(Op::BoolConst(b), Vec::new(), Sort::Bool)
    }

    pub fn mk_bv(&mut self, v: Bv) -> TermId {
        let w = v.width();
        self.intern(Op::BvConst(v), Vec::new(), Sort::BitVec(w))
    }

    /// Builds a sort-checked node, reusing an existing identical one.
    pub fn mk(&mut self, op: Op, children: Vec<TermId>) -> Result<TermId, SortError> {
        let sort = self.check(&op, &children)?;
        Ok(self.intern(op, children, sort))
    }

    fn intern(&mut self, op: Op, children: Vec<TermId>, sort: Sort) -> TermId {
        let key = (op, children);
        if let Some(&id) = self.cons.get(&key) {
            return id;
        }
        let id = TermId(self.nodes.len() as u32);
        self.nodes.push(Node {
            op: key.0.clone(),
            children: key.1.clone(),
            sort,
        });
        self.cons.insert(key, id);
        id
    }

    fn check(&self, op: &Op, children: &[TermId]) -> Result<Sort, SortError> {
        let name = op.name();
        let arity = |expected: usize| -> Result<(), SortError> {
            if children.len() != expected {
                Err(SortError::Arity {
                    op: name.into(),
                    expected: expected.to_string(),
                    got: children.len(),
                })
            } else {
                Ok(())
            }
        };
        let at_least = |min: usize| -> Result<(), SortError> {
            if children.len() < min {
                Err(SortError::Arity {
                    op: name.into(),
                    expected: format!("at least {min}"),
                    got: children.len(),
                })
            } else {
                Ok(())
            }
        };
        let mismatch = |detail: String| SortError::Mismatch {
            op: name.into(),
            detail,
        };
        let sorts: Vec<&Sort> = children.iter().map(|&c| self.sort(c)).collect();
        let bv = |k: usize| -> Result<u32, SortError> {
            sorts[k].bv_width().ok_or_else(|| {
                mismatch(format!(
                    "argument {} has sort {}, expected a bit-vector",
                    k + 1,
                    sorts[k]
                ))
            })
        };
        let all_bool = || -> Result<(), SortError> {
            for (k, s) in sorts.iter().enumerate() {
                if !s.is_bool() {
                    return Err(mismatch(format!(
                        "argument {} has sort {s}, expected Bool",
                        k + 1
                    )));
                }
            }
            Ok(())
        };
        let same_bv2 = || -> Result<u32, SortError> {
            arity(2)?;
            let (a, b) = (bv(0)?, bv(1)?);
            if a != b {
                return Err(mismatch(format!("widths {a} and {b} differ")));
            }
            Ok(a)
        };
        match op {
            Op::Var(_) | Op::BoolConst(_) | Op::BvConst(_) => {
                unreachable!("leaves are built with mk_var / mk_bool / mk_bv")
            }
            Op::BvAdd
            | Op::BvMul
            | Op::BvAnd
            | Op::BvOr
            | Op::BvXor
            | Op::BvShl
            | Op::BvLshr
            | Op::BvAshr => Ok(Sort::BitVec(same_bv2()?)),
            Op::BvNot | Op::BvNeg => {
                arity(1)?;
                Ok(Sort::BitVec(bv(0)?))
            }
            Op::BvUlt | Op::BvUle | Op::BvSlt | Op::BvSle => {
                same_bv2()?;
                Ok(Sort::Bool)
            }
            Op::Concat => {
                arity(2)?;
                Ok(Sort::BitVec(bv(0)? + bv(1)?))
            }
            Op::Extract { hi, lo } => {
                arity(1)?;
                let w = bv(0)?;
                if lo > hi || *hi >= w {
                    return Err(mismatch(format!(
                        "indices ({hi}, {lo}) out of range for width {w}"
                    )));
                }
                Ok(Sort::BitVec(hi - lo + 1))
            }
            Op::Ite => {
                arity(3)?;
                if !sorts[0].is_bool() {
                    return Err(mismatch(format!("condition has sort {}", sorts[0])));
                }
                if sorts[1] != sorts[2] {
                    return Err(mismatch(format!(
                        "branches have sorts {} and {}",
                        sorts[1], sorts[2]
                    )));
                }
                Ok(sorts[1].clone())
            }
            Op::Eq => {
                arity(2)?;
                if sorts[0] != sorts[1] {
                    return Err(mismatch(format!(
                        "operands have sorts {} and {}",
                        sorts[0], sorts[1]
                    )));
                }
                Ok(Sort::Bool)
            }
            Op::Distinct => {
                at_least(2)?;
                if sorts.iter().any(|s| *s != sorts[0]) {
                    return Err(mismatch("operands have different sorts".into()));
                }
                Ok(Sort::Bool)
            }
            Op::And | Op::Or => {
                at_least(1)?;
                all_bool()?;
                Ok(Sort::Bool)
            }
            Op::Not => {
                arity(1)?;
                all_bool()?;
                Ok(Sort::Bool)
            }
            Op::Implies => {
                arity(2)?;
                all_bool()?;
                Ok(Sort::Bool)
            }
            Op::Select => {
                arity(2)?;
                let (i, e) = sorts[0].array_parts().ok_or_else(|| {
                    mismatch(format!(
                        "first argument has sort {}, expected an array",
                        sorts[0]
                    ))
                })?;
                if i != sorts[1] {
                    return Err(mismatch(format!(
                        "index has sort {}, expected {i}",
                        sorts[1]
                    )));
                }
                Ok(e.clone())
            }
            Op::Store => {
                arity(3)?;
                let (i, e) = sorts[0].array_parts().ok_or_else(|| {
                    mismatch(format!(
                        "first argument has sort {}, expected an array",
                        sorts[0]
                    ))
                })?;
                if i != sorts[1] || e != sorts[2] {
                    return Err(mismatch(format!(
                        "index/value sorts {} / {} do not match {}",
                        sorts[1], sorts[2], sorts[0]
                    )));
                }
                Ok(sorts[0].clone())
            }
            Op::Apply(f) => {
                let sym = self.symbol(*f);
                let Sort::Fun(args, ret) = &sym.sort else {
                    return Err(mismatch(format!("`{}` is not a function", sym.name)));
                };
                if args.len() != children.len() {
                    return Err(SortError::Arity {
                        op: sym.name.clone(),
                        expected: args.len().to_string(),
                        got: children.len(),
                    });
                }
                for (k, (a, s)) in args.iter().zip(sorts.iter()).enumerate() {
                    if a != *s {
                        return Err(SortError::Mismatch {
                            op: sym.name.clone(),
                            detail: format!("argument {} has sort {s}, expected {a}", k + 1),
                        });
                    }
                }
                Ok((**ret).clone())
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::printer::print_formula(self))
    }
}
