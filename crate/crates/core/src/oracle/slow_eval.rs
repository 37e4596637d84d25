//! A second evaluator, top-down with memoization, over arbitrary-precision
//! integers. Arrays are association lists searched most-recent-first and
//! compared cell by cell over the whole index domain.

use std::collections::HashMap;
use std::rc::Rc;

use num_bigint::BigUint;

use crate::bv::Bv;
use crate::coverage::{Assignment, Value};
use crate::smtlib::{Formula, Op, Sort, TermId};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Sv {
    B(bool),
    N(BigUint, u32),
    A(Rc<Table>),
}

#[derive(Debug, PartialEq, Eq)]
struct Table {
    index: Sort,
    default: Sv,
    /// Newest first.
    cells: Vec<(Sv, Sv)>,
}

impl Table {
    fn read(&self, i: &Sv) -> Sv {
        self.cells
            .iter()
            .find(|(k, _)| k == i)
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| self.default.clone())
    }
}

fn modulus(w: u32) -> BigUint {
    BigUint::from(1u8) << w
}

fn from_value(v: &Value) -> Sv {
    match v {
        Value::Bool(b) => Sv::B(*b),
        Value::Bv(b) => Sv::N(b.to_biguint(), b.width()),
        Value::Array(a) => Sv::A(Rc::new(Table {
            index: a.index_sort.clone(),
            default: from_value(&a.default),
            cells: a
                .overrides
                .iter()
                .rev()
                .map(|(k, v)| (from_value(k), from_value(v)))
                .collect(),
        })),
        Value::Fun(_) => panic!("function values are not terms"),
    }
}

fn to_value(v: &Sv) -> Option<Value> {
    match v {
        Sv::B(b) => Some(Value::Bool(*b)),
        Sv::N(n, w) => Some(Value::Bv(Bv::from_biguint(*w, n))),
        Sv::A(_) => None,
    }
}

fn domain(sort: &Sort) -> Option<Vec<Sv>> {
    match sort {
        Sort::Bool => Some(vec![Sv::B(false), Sv::B(true)]),
        Sort::BitVec(w) if *w <= 16 => Some(
            (0u32..1 << w)
                .map(|i| Sv::N(BigUint::from(i), *w))
                .collect(),
        ),
        _ => None,
    }
}

fn arrays_equal(x: &Table, y: &Table) -> bool {
    match domain(&x.index) {
        Some(all) => all.iter().all(|i| x.read(i) == y.read(i)),
        None => {
            // Wide index: every index outside both cell lists reads the defaults.
            let keys = x.cells.iter().chain(&y.cells).map(|(k, _)| k);
            keys.clone().all(|k| x.read(k) == y.read(k)) && x.default == y.default
        }
    }
}

struct Ctx<'a> {
    f: &'a Formula,
    a: &'a Assignment,
    memo: HashMap<TermId, Sv>,
}

impl Ctx<'_> {
    fn n(&mut self, t: TermId) -> (BigUint, u32) {
        match self.eval(t) {
            Sv::N(n, w) => (n, w),
            other => panic!("expected a bit-vector, got {other:?}"),
        }
    }

    fn b(&mut self, t: TermId) -> bool {
        match self.eval(t) {
            Sv::B(b) => b,
            other => panic!("expected Bool, got {other:?}"),
        }
    }

    fn eval(&mut self, t: TermId) -> Sv {
        if let Some(v) = self.memo.get(&t) {
            return v.clone();
        }
        let node = self.f.node(t);
        let c = node.children.clone();
        let v = match &node.op {
            Op::Var(s) => match self.a.get(*s) {
                Some(v) => from_value(v),
                None => from_value(&Value::zero(&self.f.symbol(*s).sort)),
            },
            Op::BoolConst(b) => Sv::B(*b),
            Op::BvConst(b) => Sv::N(b.to_biguint(), b.width()),
            Op::BvAdd | Op::BvMul | Op::BvAnd | Op::BvOr | Op::BvXor => {
                let (x, w) = self.n(c[0]);
                let (y, _) = self.n(c[1]);
                let r = match node.op {
                    Op::BvAdd => (x + y) % modulus(w),
                    Op::BvMul => (x * y) % modulus(w),
                    Op::BvAnd => x & y,
                    Op::BvOr => x | y,
                    _ => x ^ y,
                };
                Sv::N(r, w)
            }
            Op::BvNot => {
                let (x, w) = self.n(c[0]);
                Sv::N(modulus(w) - 1u8 - x, w)
            }
            Op::BvNeg => {
                let (x, w) = self.n(c[0]);
                Sv::N((modulus(w) - x) % modulus(w), w)
            }
            Op::BvShl | Op::BvLshr | Op::BvAshr => {
                let (x, w) = self.n(c[0]);
                let (y, _) = self.n(c[1]);
                let negative = x.bit(w as u64 - 1);
                let r = if y >= BigUint::from(w) {
                    if node.op == Op::BvAshr && negative {
                        modulus(w) - 1u8
                    } else {
                        BigUint::ZERO
                    }
                } else {
                    let k: usize = y.try_into().unwrap();
                    match node.op {
                        Op::BvShl => (x << k) % modulus(w),
                        Op::BvLshr => x >> k,
                        _ if negative => {
                            let ones = modulus(w) - 1u8;
                            let inv = &ones - x;
                            ones - (inv >> k)
                        }
                        _ => x >> k,
                    }
                };
                Sv::N(r, w)
            }
            Op::BvUlt | Op::BvUle | Op::BvSlt | Op::BvSle => {
                let (mut x, w) = self.n(c[0]);
                let (mut y, _) = self.n(c[1]);
                if matches!(node.op, Op::BvSlt | Op::BvSle) {
                    let half = BigUint::from(1u8) << (w - 1);
                    x ^= &half;
                    y ^= &half;
                }
                Sv::B(match node.op {
                    Op::BvUlt | Op::BvSlt => x < y,
                    _ => x <= y,
                })
            }
            Op::Concat => {
                let (x, wx) = self.n(c[0]);
                let (y, wy) = self.n(c[1]);
                Sv::N((x << wy) | y, wx + wy)
            }
            Op::Extract { hi, lo } => {
                let (x, _) = self.n(c[0]);
                let w = hi - lo + 1;
                Sv::N((x >> *lo) % modulus(w), w)
            }
            Op::Ite => {
                if self.b(c[0]) {
                    self.eval(c[1])
                } else {
                    self.eval(c[2])
                }
            }
            Op::Eq | Op::Distinct => {
                let vals: Vec<Sv> = c.iter().map(|&x| self.eval(x)).collect();
                let eq = |x: &Sv, y: &Sv| match (x, y) {
                    (Sv::A(p), Sv::A(q)) => arrays_equal(p, q),
                    _ => x == y,
                };
                if node.op == Op::Eq {
                    Sv::B(eq(&vals[0], &vals[1]))
                } else {
                    let mut all_differ = true;
                    for i in 0..vals.len() {
                        for j in 0..i {
                            all_differ &= !eq(&vals[i], &vals[j]);
                        }
                    }
                    Sv::B(all_differ)
                }
            }
            Op::And => {
                let mut r = true;
                for &x in &c {
                    r &= self.b(x);
                }
                Sv::B(r)
            }
            Op::Or => {
                let mut r = false;
                for &x in &c {
                    r |= self.b(x);
                }
                Sv::B(r)
            }
            Op::Not => Sv::B(!self.b(c[0])),
            Op::Implies => {
                let p = self.b(c[0]);
                let q = self.b(c[1]);
                Sv::B(!p || q)
            }
            Op::Select => {
                let Sv::A(tab) = self.eval(c[0]) else {
                    panic!("select on a non-array")
                };
                let i = self.eval(c[1]);
                tab.read(&i)
            }
            Op::Store => {
                let Sv::A(tab) = self.eval(c[0]) else {
                    panic!("store on a non-array")
                };
                let i = self.eval(c[1]);
                let v = self.eval(c[2]);
                let mut cells = vec![(i, v)];
                cells.extend(tab.cells.iter().cloned());
                Sv::A(Rc::new(Table {
                    index: tab.index.clone(),
                    default: tab.default.clone(),
                    cells,
                }))
            }
            Op::Apply(s) => {
                let args: Vec<Sv> = c.iter().map(|&x| self.eval(x)).collect();
                let Sort::Fun(_, ret) = &self.f.symbol(*s).sort else {
                    unreachable!()
                };
                match self.a.get(*s) {
                    Some(Value::Fun(fv)) => fv
                        .table
                        .iter()
                        .find(|(k, _)| k.iter().map(from_value).eq(args.iter().cloned()))
                        .map(|(_, v)| from_value(v))
                        .unwrap_or_else(|| from_value(&fv.default)),
                    _ => from_value(&Value::zero(ret)),
                }
            }
        };
        self.memo.insert(t, v.clone());
        v
    }
}

/// Value of a Bool or bit-vector node.
pub fn slow_evaluate(f: &Formula, t: TermId, a: &Assignment) -> Value {
    let mut ctx = Ctx {
        f,
        a,
        memo: HashMap::new(),
    };
    to_value(&ctx.eval(t)).expect("scalar node")
}

/// Values of the given scalar nodes under one shared memo.
pub fn slow_values(f: &Formula, nodes: &[TermId], a: &Assignment) -> Vec<Value> {
    let mut ctx = Ctx {
        f,
        a,
        memo: HashMap::new(),
    };
    nodes
        .iter()
        .map(|&t| to_value(&ctx.eval(t)).expect("scalar node"))
        .collect()
}

pub fn slow_satisfies(f: &Formula, a: &Assignment) -> bool {
    let mut ctx = Ctx {
        f,
        a,
        memo: HashMap::new(),
    };
    f.assertions().iter().all(|&t| ctx.b(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::evaluate;
    use crate::smtlib::parse_formula;

    #[test]
    fn agrees_on_signed_shift_corner_cases() {
        let f = parse_formula(
            "(declare-const x (_ BitVec 4))(declare-const y (_ BitVec 4))
             (assert (= (bvashr x y) (bvlshr (bvshl x y) y)))",
        )
        .unwrap();
        let root = f.assertions()[0];
        let lhs = f.node(root).children[0];
        for xv in 0..16u64 {
            for yv in 0..16u64 {
                let mut a = Assignment::new();
                a.set(f.lookup("x").unwrap(), Value::Bv(Bv::from_u64(4, xv)));
                a.set(f.lookup("y").unwrap(), Value::Bv(Bv::from_u64(4, yv)));
                assert_eq!(slow_evaluate(&f, lhs, &a), evaluate(&f, lhs, &a));
                assert_eq!(slow_evaluate(&f, root, &a), evaluate(&f, root, &a));
            }
        }
    }
}
