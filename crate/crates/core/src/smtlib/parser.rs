//! Parser for the supported SMT-LIB 2 subset.
//!
//! Derived operators (`bvsub`, `bvugt`, `zero_extend`, Bool `xor`, chained `=`, ...)
//! are rewritten into the core operator set while building the DAG.

use std::collections::HashMap;

use log::warn;
use num_bigint::BigUint;
use thiserror::Error;

use super::sexp::{read_all, Pos, Sexp};
use super::sort::Sort;
use super::term::{Formula, Op, SortError, SymbolKind, TermId};
use crate::bv::Bv;

pub const SUPPORTED_LOGICS: &[&str] = &["QF_BV", "QF_ABV", "QF_AUFBV", "QF_UFBV"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: {source}")]
    Sort {
        pos: Pos,
        #[source]
        source: SortError,
    },
    #[error("{pos}: unsupported {what}")]
    Unsupported { pos: Pos, what: String },
    #[error("{pos}: unsupported logic `{logic}`")]
    Logic { pos: Pos, logic: String },
    #[error("{pos}: quantifier `{quantifier}` is not allowed in quantifier-free logics")]
    Quantifier { pos: Pos, quantifier: String },
    #[error("{pos}: undeclared symbol `{name}`")]
    Undeclared { pos: Pos, name: String },
}

impl ParseError {
    pub fn is_arity(&self) -> bool {
        matches!(
            self,
            ParseError::Sort {
                source: SortError::Arity { .. },
                ..
            }
        )
    }
}

fn syntax(pos: Pos, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        pos,
        msg: msg.into(),
    }
}

const IGNORED_COMMANDS: &[&str] = &[
    "set-info",
    "set-option",
    "get-model",
    "get-value",
    "get-info",
    "get-option",
    "get-assertions",
    "get-assignment",
    "get-unsat-core",
    "get-proof",
    "echo",
];

/// Parses SMT-LIB source into a sort-checked formula.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let exprs = read_all(text).map_err(|e| syntax(e.pos, e.msg))?;
    let mut p = Parser {
        f: Formula::new(),
        scopes: Vec::new(),
    };
    for cmd in &exprs {
        let pos = cmd.pos();
        let items = cmd
            .as_list()
            .ok_or_else(|| syntax(pos, "expected a command"))?;
        let head = items
            .first()
            .and_then(Sexp::as_atom)
            .ok_or_else(|| syntax(pos, "expected a command name"))?;
        match head {
            "set-logic" => {
                let logic = items
                    .get(1)
                    .and_then(Sexp::as_atom)
                    .ok_or_else(|| syntax(pos, "set-logic expects a logic name"))?;
                if !SUPPORTED_LOGICS.contains(&logic) {
                    return Err(ParseError::Logic {
                        pos,
                        logic: logic.to_string(),
                    });
                }
                p.f.logic = Some(logic.to_string());
            }
            "declare-const" => {
                if items.len() != 3 {
                    return Err(syntax(pos, "declare-const expects a name and a sort"));
                }
                let name = symbol_name(&items[1])?;
                let sort = parse_sort(&items[2])?;
                p.f.declare(name, sort)
                    .map_err(|source| ParseError::Sort { pos, source })?;
            }
            "declare-fun" => {
                if items.len() != 4 {
                    return Err(syntax(
                        pos,
                        "declare-fun expects a name, argument sorts and a sort",
                    ));
                }
                let name = symbol_name(&items[1])?;
                let args = items[2]
                    .as_list()
                    .ok_or_else(|| syntax(items[2].pos(), "expected a list of argument sorts"))?
                    .iter()
                    .map(parse_sort)
                    .collect::<Result<Vec<_>, _>>()?;
                let ret = parse_sort(&items[3])?;
                let sort = if args.is_empty() {
                    ret
                } else {
                    Sort::Fun(args, Box::new(ret))
                };
                p.f.declare(name, sort)
                    .map_err(|source| ParseError::Sort { pos, source })?;
            }
            "assert" => {
                if items.len() != 2 {
                    return Err(syntax(pos, "assert expects one term"));
                }
                let t = p.term(&items[1])?;
                p.f.assert_term(t)
                    .map_err(|source| ParseError::Sort { pos, source })?;
            }
            "check-sat" => {}
            "exit" => break,
            other if IGNORED_COMMANDS.contains(&other) => {
                let msg = format!("{pos}: ignored command `{other}`");
                warn!("{msg}");
                p.f.warnings.push(msg);
            }
            other => {
                return Err(ParseError::Unsupported {
                    pos,
                    what: format!("command `{other}`"),
                })
            }
        }
    }
    Ok(p.f)
}

fn symbol_name(s: &Sexp) -> Result<&str, ParseError> {
    s.as_atom()
        .ok_or_else(|| syntax(s.pos(), "expected a symbol"))
}

fn parse_u32(s: &Sexp) -> Result<u32, ParseError> {
    s.as_atom()
        .and_then(|a| a.parse::<u32>().ok())
        .ok_or_else(|| syntax(s.pos(), "expected a numeral"))
}

pub fn parse_sort(s: &Sexp) -> Result<Sort, ParseError> {
    let pos = s.pos();
    match s {
        Sexp::Atom(a, _) if a == "Bool" => Ok(Sort::Bool),
        Sexp::List(items, _) => {
            let head = items.first().and_then(Sexp::as_atom);
            match (head, items.len()) {
                (Some("_"), 3) if items[1].as_atom() == Some("BitVec") => {
                    let w = parse_u32(&items[2])?;
                    if w == 0 {
                        return Err(syntax(pos, "bit-vector width must be positive"));
                    }
                    Ok(Sort::BitVec(w))
                }
                (Some("Array"), 3) => {
                    let (i, e) = (parse_sort(&items[1])?, parse_sort(&items[2])?);
                    if !i.is_scalar() || !e.is_scalar() {
                        return Err(ParseError::Unsupported {
                            pos,
                            what: "nested array sort".into(),
                        });
                    }
                    Ok(Sort::array(i, e))
                }
                _ => Err(ParseError::Unsupported {
                    pos,
                    what: format!("sort {s}"),
                }),
            }
        }
        _ => Err(ParseError::Unsupported {
            pos,
            what: format!("sort {s}"),
        }),
    }
}

/// Parses `#b...`, `#x...`, or `(_ bvN w)`; `None` when `s` is not a bit-vector literal.
pub fn parse_bv_literal(s: &Sexp) -> Result<Option<Bv>, ParseError> {
    let pos = s.pos();
    match s {
        Sexp::Atom(a, _) => {
            if let Some(d) = a.strip_prefix("#b") {
                Bv::from_binary_str(d)
                    .map(Some)
                    .ok_or_else(|| syntax(pos, format!("malformed literal `{a}`")))
            } else if let Some(d) = a.strip_prefix("#x") {
                Bv::from_hex_str(d)
                    .map(Some)
                    .ok_or_else(|| syntax(pos, format!("malformed literal `{a}`")))
            } else {
                Ok(None)
            }
        }
        Sexp::List(items, _) if items.len() == 3 && items[0].as_atom() == Some("_") => {
            let Some(name) = items[1].as_atom().and_then(|n| n.strip_prefix("bv")) else {
                return Ok(None);
            };
            let value: BigUint = name
                .parse()
                .map_err(|_| syntax(pos, format!("malformed literal `{s}`")))?;
            let w = parse_u32(&items[2])?;
            if w == 0 {
                return Err(syntax(pos, "bit-vector width must be positive"));
            }
            Ok(Some(Bv::from_biguint(w, &value)))
        }
        _ => Ok(None),
    }
}

struct Parser {
    f: Formula,
    scopes: Vec<HashMap<String, TermId>>,
}

impl Parser {
    fn mk(&mut self, pos: Pos, op: Op, children: Vec<TermId>) -> Result<TermId, ParseError> {
        self.f
            .mk(op, children)
            .map_err(|source| ParseError::Sort { pos, source })
    }

    fn fold_left(&mut self, pos: Pos, op: Op, args: Vec<TermId>) -> Result<TermId, ParseError> {
        if args.len() < 2 {
            return self.mk(pos, op, args);
        }
        let mut acc = args[0];
        for &a in &args[1..] {
            acc = self.mk(pos, op.clone(), vec![acc, a])?;
        }
        Ok(acc)
    }

    fn bv_width(&self, pos: Pos, t: TermId) -> Result<u32, ParseError> {
        self.f.sort(t).bv_width().ok_or_else(|| ParseError::Sort {
            pos,
            source: SortError::Mismatch {
                op: "extend".into(),
                detail: format!("expected a bit-vector, got {}", self.f.sort(t)),
            },
        })
    }

    fn repeat(&mut self, pos: Pos, x: TermId, times: u32) -> Result<TermId, ParseError> {
        let mut acc = x;
        for _ in 1..times {
            acc = self.mk(pos, Op::Concat, vec![acc, x])?;
        }
        Ok(acc)
    }

    fn term(&mut self, s: &Sexp) -> Result<TermId, ParseError> {
        let pos = s.pos();
        if let Some(bv) = parse_bv_literal(s)? {
            return Ok(self.f.mk_bv(bv));
        }
        match s {
            Sexp::Str(..) => Err(syntax(pos, "unexpected string literal")),
            Sexp::Atom(a, _) => self.atom(pos, a),
            Sexp::List(items, _) => {
                let Some(head) = items.first() else {
                    return Err(syntax(pos, "empty application"));
                };
                match head {
                    Sexp::List(h, _) => self.indexed_app(pos, h, &items[1..]),
                    Sexp::Atom(name, _) => self.app(pos, name, &items[1..]),
                    Sexp::Str(..) => Err(syntax(pos, "unexpected string literal")),
                }
            }
        }
    }

    fn atom(&mut self, pos: Pos, a: &str) -> Result<TermId, ParseError> {
        match a {
            "true" => return Ok(self.f.mk_bool(true)),
            "false" => return Ok(self.f.mk_bool(false)),
            _ => {}
        }
        for scope in self.scopes.iter().rev() {
            if let Some(&t) = scope.get(a) {
                return Ok(t);
            }
        }
        if a.chars().next().is_some_and(|c| c.is_ascii_digit()) {
            return Err(ParseError::Unsupported {
                pos,
                what: format!("integer literal `{a}`"),
            });
        }
        let sym = self.f.lookup(a).ok_or_else(|| ParseError::Undeclared {
            pos,
            name: a.to_string(),
        })?;
        if self.f.symbol(sym).kind == SymbolKind::Fun {
            return Err(ParseError::Sort {
                pos,
                source: SortError::Arity {
                    op: a.to_string(),
                    expected: "at least 1".into(),
                    got: 0,
                },
            });
        }
        Ok(self.f.mk_var(sym))
    }

    fn indexed_app(
        &mut self,
        pos: Pos,
        head: &[Sexp],
        args: &[Sexp],
    ) -> Result<TermId, ParseError> {
        if head.first().and_then(Sexp::as_atom) != Some("_") || head.len() < 2 {
            return Err(syntax(pos, "expected an indexed operator"));
        }
        let name = head[1]
            .as_atom()
            .ok_or_else(|| syntax(pos, "expected an operator name"))?;
        let indices = head[2..]
            .iter()
            .map(parse_u32)
            .collect::<Result<Vec<_>, _>>()?;
        let targs = args
            .iter()
            .map(|a| self.term(a))
            .collect::<Result<Vec<_>, _>>()?;
        let one_index = |expected: usize| -> Result<(), ParseError> {
            if indices.len() != expected {
                Err(syntax(
                    pos,
                    format!("`{name}` expects {expected} index(es)"),
                ))
            } else {
                Ok(())
            }
        };
        let one_arg = |targs: &[TermId]| -> Result<TermId, ParseError> {
            if targs.len() != 1 {
                Err(ParseError::Sort {
                    pos,
                    source: SortError::Arity {
                        op: name.to_string(),
                        expected: "1".into(),
                        got: targs.len(),
                    },
                })
            } else {
                Ok(targs[0])
            }
        };
        match name {
            "extract" => {
                one_index(2)?;
                self.mk(
                    pos,
                    Op::Extract {
                        hi: indices[0],
                        lo: indices[1],
                    },
                    targs,
                )
            }
            "zero_extend" => {
                one_index(1)?;
                let x = one_arg(&targs)?;
                self.bv_width(pos, x)?;
                if indices[0] == 0 {
                    return Ok(x);
                }
                let z = self.f.mk_bv(Bv::zero(indices[0]));
                self.mk(pos, Op::Concat, vec![z, x])
            }
            "sign_extend" => {
                one_index(1)?;
                let x = one_arg(&targs)?;
                let w = self.bv_width(pos, x)?;
                if indices[0] == 0 {
                    return Ok(x);
                }
                let msb = self.mk(
                    pos,
                    Op::Extract {
                        hi: w - 1,
                        lo: w - 1,
                    },
                    vec![x],
                )?;
                let hi = self.repeat(pos, msb, indices[0])?;
                self.mk(pos, Op::Concat, vec![hi, x])
            }
            "repeat" => {
                one_index(1)?;
                let x = one_arg(&targs)?;
                self.bv_width(pos, x)?;
                if indices[0] == 0 {
                    return Err(syntax(pos, "repeat count must be positive"));
                }
                self.repeat(pos, x, indices[0])
            }
            other => Err(ParseError::Unsupported {
                pos,
                what: format!("operator `(_ {other} ...)`"),
            }),
        }
    }

    fn app(&mut self, pos: Pos, name: &str, args: &[Sexp]) -> Result<TermId, ParseError> {
        match name {
            "let" => return self.let_term(pos, args),
            "forall" | "exists" => {
                return Err(ParseError::Quantifier {
                    pos,
                    quantifier: name.to_string(),
                })
            }
            "!" => {
                let inner = args
                    .first()
                    .ok_or_else(|| syntax(pos, "annotation without a term"))?;
                return self.term(inner);
            }
            _ => {}
        }
        let targs = args
            .iter()
            .map(|a| self.term(a))
            .collect::<Result<Vec<_>, _>>()?;
        let simple = |op: Op| Some(op);
        let core = match name {
            "bvnot" => simple(Op::BvNot),
            "bvneg" => simple(Op::BvNeg),
            "bvshl" => simple(Op::BvShl),
            "bvlshr" => simple(Op::BvLshr),
            "bvashr" => simple(Op::BvAshr),
            "bvult" => simple(Op::BvUlt),
            "bvule" => simple(Op::BvUle),
            "bvslt" => simple(Op::BvSlt),
            "bvsle" => simple(Op::BvSle),
            "ite" => simple(Op::Ite),
            "distinct" => simple(Op::Distinct),
            "and" => simple(Op::And),
            "or" => simple(Op::Or),
            "not" => simple(Op::Not),
            "select" => simple(Op::Select),
            "store" => simple(Op::Store),
            _ => None,
        };
        if let Some(op) = core {
            return self.mk(pos, op, targs);
        }
        match name {
            "bvadd" => self.fold_left(pos, Op::BvAdd, targs),
            "bvmul" => self.fold_left(pos, Op::BvMul, targs),
            "bvand" => self.fold_left(pos, Op::BvAnd, targs),
            "bvor" => self.fold_left(pos, Op::BvOr, targs),
            "bvxor" => self.fold_left(pos, Op::BvXor, targs),
            "concat" => self.fold_left(pos, Op::Concat, targs),
            "xor" => self.fold_left(pos, Op::Distinct, targs),
            "bvsub" => {
                if targs.len() < 2 {
                    return self.mk(pos, Op::BvAdd, targs);
                }
                let mut acc = targs[0];
                for &b in &targs[1..] {
                    let nb = self.mk(pos, Op::BvNeg, vec![b])?;
                    acc = self.mk(pos, Op::BvAdd, vec![acc, nb])?;
                }
                Ok(acc)
            }
            "bvugt" | "bvuge" | "bvsgt" | "bvsge" => {
                let op = match name {
                    "bvugt" => Op::BvUlt,
                    "bvuge" => Op::BvUle,
                    "bvsgt" => Op::BvSlt,
                    _ => Op::BvSle,
                };
                let swapped = if targs.len() == 2 {
                    vec![targs[1], targs[0]]
                } else {
                    targs
                };
                self.mk(pos, op, swapped)
            }
            "=" => {
                if targs.len() <= 2 {
                    return self.mk(pos, Op::Eq, targs);
                }
                let pairs = targs
                    .windows(2)
                    .map(|w| self.mk(pos, Op::Eq, vec![w[0], w[1]]))
                    .collect::<Result<Vec<_>, _>>()?;
                self.mk(pos, Op::And, pairs)
            }
            "=>" => {
                if targs.len() < 2 {
                    return self.mk(pos, Op::Implies, targs);
                }
                let mut acc = *targs.last().unwrap();
                for &a in targs[..targs.len() - 1].iter().rev() {
                    acc = self.mk(pos, Op::Implies, vec![a, acc])?;
                }
                Ok(acc)
            }
            _ => {
                let sym = self.f.lookup(name).ok_or_else(|| {
                    if name.starts_with("bv") || KNOWN_UNSUPPORTED.contains(&name) {
                        ParseError::Unsupported {
                            pos,
                            what: format!("operator `{name}`"),
                        }
                    } else {
                        ParseError::Undeclared {
                            pos,
                            name: name.to_string(),
                        }
                    }
                })?;
                if self.f.symbol(sym).kind != SymbolKind::Fun {
                    return Err(ParseError::Sort {
                        pos,
                        source: SortError::Mismatch {
                            op: name.to_string(),
                            detail: "applied symbol is not a function".into(),
                        },
                    });
                }
                self.mk(pos, Op::Apply(sym), targs)
            }
        }
    }

    fn let_term(&mut self, pos: Pos, args: &[Sexp]) -> Result<TermId, ParseError> {
        if args.len() != 2 {
            return Err(syntax(pos, "let expects bindings and a body"));
        }
        let bindings = args[0]
            .as_list()
            .ok_or_else(|| syntax(args[0].pos(), "expected a binding list"))?;
        let mut scope = HashMap::new();
        for b in bindings {
            let pair = b
                .as_list()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| syntax(b.pos(), "expected `(name term)`"))?;
            let name = symbol_name(&pair[0])?;
            let t = self.term(&pair[1])?;
            scope.insert(name.to_string(), t);
        }
        self.scopes.push(scope);
        let body = self.term(&args[1]);
        self.scopes.pop();
        body
    }
}

const KNOWN_UNSUPPORTED: &[&str] = &[
    "bvudiv", "bvurem", "bvsdiv", "bvsrem", "bvsmod", "bvnand", "bvnor", "bvxnor", "bvcomp", "as",
];

#[cfg(test)]
mod tests {
    use super::*;

    const RQ7: &str =
        "(declare-const l Bool)(declare-const m (_ BitVec 32))(assert (=> (= m #x00000003) l))";

    #[test]
    fn parses_configuration_example() {
        let f = parse_formula(RQ7).unwrap();
        assert_eq!(f.assertions().len(), 1);
        let names: Vec<_> = f.symbols().iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["l", "m"]);
        assert_eq!(f.var_bits().len(), 33);
    }

    #[test]
    fn trivial_assertion_has_no_variables() {
        let f = parse_formula("(assert true)").unwrap();
        assert_eq!(f.assertions().len(), 1);
        assert!(f.symbols().is_empty());
        assert!(f.var_bits().is_empty());
    }

    #[test]
    fn unary_bvadd_is_an_arity_error() {
        let e =
            parse_formula("(declare-const x (_ BitVec 4))(assert (= x (bvadd x)))").unwrap_err();
        assert!(e.is_arity(), "{e}");
        let e = parse_formula("(declare-const x (_ BitVec 4))(assert (bvadd x))").unwrap_err();
        assert!(e.is_arity(), "{e}");
    }

    #[test]
    fn rejects_quantifiers_logics_and_unknown_operators() {
        assert!(matches!(
            parse_formula("(assert (forall ((x Bool)) x))"),
            Err(ParseError::Quantifier { .. })
        ));
        assert!(matches!(
            parse_formula("(set-logic QF_LIA)"),
            Err(ParseError::Logic { .. })
        ));
        assert!(matches!(
            parse_formula("(declare-const x (_ BitVec 4))(assert (= x (bvudiv x x)))"),
            Err(ParseError::Unsupported { .. })
        ));
        assert!(matches!(
            parse_formula("(define-fun f () Bool true)"),
            Err(ParseError::Unsupported { .. })
        ));
        assert!(matches!(
            parse_formula("(assert y)"),
            Err(ParseError::Undeclared { .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_formula("(declare-const x Bool)\n(assert (and x x)").unwrap_err();
        match e {
            ParseError::Syntax { pos, .. } => assert_eq!(pos.line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn hash_consing_shares_duplicate_subterms() {
        let f = parse_formula(
            "(declare-const x (_ BitVec 4))(declare-const y (_ BitVec 4))(assert (= (bvadd x y) (bvadd x y)))",
        )
        .unwrap();
        let adds = f.nodes().filter(|(_, n)| n.op == Op::BvAdd).count();
        assert_eq!(adds, 1);
    }

    #[test]
    fn ignored_commands_are_recorded() {
        let f = parse_formula("(set-info :status sat)(set-logic QF_BV)(assert true)(check-sat)(get-model)(exit)(assert false)").unwrap();
        assert_eq!(f.warnings.len(), 2);
        assert_eq!(f.assertions().len(), 1);
        assert_eq!(f.logic.as_deref(), Some("QF_BV"));
    }

    #[test]
    fn derived_operators_desugar() {
        let f = parse_formula(
            "(declare-const a (_ BitVec 4))(declare-const b (_ BitVec 4))
             (assert (bvugt a (bvsub a b)))
             (assert (= ((_ zero_extend 2) a) ((_ sign_extend 2) b)))
             (assert (let ((c (bvmul a b a))) (= c c)))",
        )
        .unwrap();
        assert!(f.nodes().any(|(_, n)| n.op == Op::BvUlt));
        assert!(f.nodes().any(|(_, n)| n.op == Op::BvNeg));
        assert!(f.nodes().all(|(_, n)| n.sort != Sort::BitVec(0)));
    }

    #[test]
    fn arrays_and_functions() {
        let f = parse_formula(
            "(set-logic QF_AUFBV)
             (declare-fun a () (Array (_ BitVec 2) (_ BitVec 3)))
             (declare-fun f ((_ BitVec 3)) Bool)
             (declare-fun i () (_ BitVec 2))
             (assert (f (select (store a i #b101) i)))",
        )
        .unwrap();
        assert_eq!(f.array_vars().count(), 1);
        assert_eq!(f.functions().count(), 1);
        assert_eq!(f.var_bits().len(), 2);
    }
}
