//! Bottom-up evaluation of the term DAG under an assignment.

use super::value::{Assignment, Value};
use crate::smtlib::{Formula, Node, Op, TermId};

/// Values of every node of `f`, indexed by term id.
///
/// Unbound symbols read as the zero value of their sort.
pub fn eval_all(f: &Formula, a: &Assignment) -> Vec<Value> {
    let mut vals: Vec<Value> = Vec::with_capacity(f.num_nodes());
    for (_, node) in f.nodes() {
        let v = eval_node(f, node, a, &vals);
        vals.push(v);
    }
    vals
}

/// Value of a single node; only its cone is evaluated.
pub fn evaluate(f: &Formula, node: TermId, a: &Assignment) -> Value {
    let cone = f.reachable_from(&[node]);
    let mut vals: Vec<Option<Value>> = vec![None; node.index() + 1];
    for t in cone {
        let n = f.node(t);
        let v = eval_with(f, n, a, |c| {
            vals[c.index()].as_ref().expect("child evaluated first")
        });
        vals[t.index()] = Some(v);
    }
    vals[node.index()].take().unwrap()
}

/// True when every assertion of `f` holds under `a`.
pub fn satisfies(f: &Formula, a: &Assignment) -> bool {
    let vals = eval_all(f, a);
    f.assertions().iter().all(|t| vals[t.index()].as_bool())
}

fn eval_node(f: &Formula, node: &Node, a: &Assignment, vals: &[Value]) -> Value {
    eval_with(f, node, a, |c| &vals[c.index()])
}

fn eval_with<'v>(
    f: &Formula,
    node: &Node,
    a: &Assignment,
    child: impl Fn(TermId) -> &'v Value,
) -> Value {
    let ch = |k: usize| child(node.children[k]);
    let bv2 = |op: fn(&crate::bv::Bv, &crate::bv::Bv) -> crate::bv::Bv| {
        Value::Bv(op(ch(0).as_bv(), ch(1).as_bv()))
    };
    match &node.op {
        Op::Var(s) => a
            .get(*s)
            .cloned()
            .unwrap_or_else(|| Value::zero(&f.symbol(*s).sort)),
        Op::BoolConst(b) => Value::Bool(*b),
        Op::BvConst(v) => Value::Bv(v.clone()),
        Op::BvAdd => bv2(|x, y| x.add(y)),
        Op::BvMul => bv2(|x, y| x.mul(y)),
        Op::BvAnd => bv2(|x, y| x.and(y)),
        Op::BvOr => bv2(|x, y| x.or(y)),
        Op::BvXor => bv2(|x, y| x.xor(y)),
        Op::BvShl => bv2(|x, y| x.shl(y)),
        Op::BvLshr => bv2(|x, y| x.lshr(y)),
        Op::BvAshr => bv2(|x, y| x.ashr(y)),
        Op::BvNot => Value::Bv(ch(0).as_bv().not()),
        Op::BvNeg => Value::Bv(ch(0).as_bv().neg()),
        Op::BvUlt => Value::Bool(ch(0).as_bv().ult(ch(1).as_bv())),
        Op::BvUle => Value::Bool(!ch(1).as_bv().ult(ch(0).as_bv())),
        Op::BvSlt => Value::Bool(ch(0).as_bv().slt(ch(1).as_bv())),
        Op::BvSle => Value::Bool(!ch(1).as_bv().slt(ch(0).as_bv())),
        Op::Concat => Value::Bv(ch(0).as_bv().concat(ch(1).as_bv())),
        Op::Extract { hi, lo } => Value::Bv(ch(0).as_bv().extract(*hi, *lo)),
        Op::Ite => {
            if ch(0).as_bool() {
                ch(1).clone()
            } else {
                ch(2).clone()
            }
        }
        Op::Eq => Value::Bool(ch(0).semantic_eq(ch(1))),
        Op::Distinct => {
            let n = node.children.len();
            let mut ok = true;
            'outer: for i in 0..n {
                for j in i + 1..n {
                    if ch(i).semantic_eq(ch(j)) {
                        ok = false;
                        break 'outer;
                    }
                }
            }
            Value::Bool(ok)
        }
        Op::And => Value::Bool((0..node.children.len()).all(|k| ch(k).as_bool())),
        Op::Or => Value::Bool((0..node.children.len()).any(|k| ch(k).as_bool())),
        Op::Not => Value::Bool(!ch(0).as_bool()),
        Op::Implies => Value::Bool(!ch(0).as_bool() || ch(1).as_bool()),
        Op::Select => ch(0).as_array().get(ch(1)).clone(),
        Op::Store => Value::Array(ch(0).as_array().store(ch(1).clone(), ch(2).clone())),
        Op::Apply(s) => {
            let args: Vec<Value> = (0..node.children.len()).map(|k| ch(k).clone()).collect();
            match a.get(*s) {
                Some(Value::Fun(fv)) => fv.apply(&args).clone(),
                _ => {
                    let crate::smtlib::Sort::Fun(_, ret) = &f.symbol(*s).sort else {
                        unreachable!("apply of a non-function symbol")
                    };
                    Value::zero(ret)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv::Bv;
    use crate::smtlib::parse_formula;

    fn bv(w: u32, v: u64) -> Value {
        Value::Bv(Bv::from_u64(w, v))
    }

    #[test]
    fn equality_node_of_configuration_example() {
        let f = parse_formula(
            "(declare-const l Bool)(declare-const m (_ BitVec 32))(assert (=> (= m #x00000003) l))",
        )
        .unwrap();
        let mut a = Assignment::new();
        a.set(f.lookup("l").unwrap(), Value::Bool(true));
        a.set(f.lookup("m").unwrap(), bv(32, 3));
        let root = f.assertions()[0];
        let eq = f.node(root).children[0];
        assert_eq!(evaluate(&f, eq, &a), Value::Bool(true));
        assert!(satisfies(&f, &a));
    }

    #[test]
    fn read_over_write() {
        let f = parse_formula(
            "(declare-const a (Array (_ BitVec 2) (_ BitVec 2)))(declare-const i (_ BitVec 2))(declare-const v (_ BitVec 2))
             (assert (= (select (store a i v) i) v))",
        )
        .unwrap();
        for (i, v) in [(0, 1), (3, 2), (2, 0)] {
            let mut a = Assignment::zeros(&f);
            a.set(f.lookup("i").unwrap(), bv(2, i));
            a.set(f.lookup("v").unwrap(), bv(2, v));
            let sel = f.node(f.assertions()[0]).children[0];
            assert_eq!(evaluate(&f, sel, &a), bv(2, v));
        }
    }

    #[test]
    fn bvadd_wraps_modulo_width() {
        let f = parse_formula("(declare-const a (_ BitVec 2))(declare-const b (_ BitVec 2))(assert (= (bvadd a b) #b01))").unwrap();
        let mut a = Assignment::new();
        a.set(f.lookup("a").unwrap(), bv(2, 3));
        a.set(f.lookup("b").unwrap(), bv(2, 2));
        let add = f.node(f.assertions()[0]).children[0];
        // 3 + 2 = 5 = 1 (mod 4)
        assert_eq!(evaluate(&f, add, &a), bv(2, 5 % 4));
    }

    #[test]
    fn uninterpreted_function_default() {
        let f = parse_formula("(declare-fun g ((_ BitVec 2)) (_ BitVec 2))(declare-const x (_ BitVec 2))(assert (= (g x) #b00))").unwrap();
        let a = Assignment::zeros(&f);
        assert!(satisfies(&f, &a));
    }
}
