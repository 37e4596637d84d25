//! Models as SMT-LIB `(model (define-fun ...))` blocks, and back.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::coverage::{ArrayValue, Assignment, FunValue, Value};
use crate::smtlib::sexp::{read_all, Sexp};
use crate::smtlib::{parse_bv_literal, parse_sort, quote_symbol, Formula, Sort, SymbolId};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{0}")]
    Read(String),
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("unknown symbol `{0}`")]
    Unknown(String),
}

fn param(k: usize) -> String {
    format!("x!{k}")
}

/// One `(model ...)` block over the declared symbols of `f`.
pub fn print_model(f: &Formula, a: &Assignment) -> String {
    let mut out = String::from("(model\n");
    for s in f.symbol_ids() {
        let sym = f.symbol(s);
        let name = quote_symbol(&sym.name);
        let zero;
        let v = match a.get(s) {
            Some(v) => v,
            None => {
                zero = Value::zero(&sym.sort);
                &zero
            }
        };
        match (&sym.sort, v) {
            (Sort::Fun(args, ret), Value::Fun(fv)) => {
                let params: Vec<String> = args
                    .iter()
                    .enumerate()
                    .map(|(k, s)| format!("({} {s})", param(k)))
                    .collect();
                let _ = write!(out, "  (define-fun {name} ({}) {ret} ", params.join(" "));
                for (tuple, r) in &fv.table {
                    let eqs: Vec<String> = tuple
                        .iter()
                        .enumerate()
                        .map(|(k, x)| format!("(= {} {x})", param(k)))
                        .collect();
                    let cond = if eqs.len() == 1 {
                        eqs[0].clone()
                    } else {
                        format!("(and {})", eqs.join(" "))
                    };
                    let _ = write!(out, "(ite {cond} {r} ");
                }
                let _ = write!(out, "{}", fv.default);
                out.push_str(&")".repeat(fv.table.len()));
                out.push_str(")\n");
            }
            (sort, v) => {
                let _ = writeln!(out, "  (define-fun {name} () {sort} {v})");
            }
        }
    }
    out.push_str(")\n");
    out
}

fn malformed(s: &Sexp) -> ModelError {
    ModelError::Malformed(format!("{}: {s}", s.pos()))
}

fn parse_scalar(s: &Sexp, sort: &Sort) -> Result<Value, ModelError> {
    match sort {
        Sort::Bool => match s.as_atom() {
            Some("true") => Ok(Value::Bool(true)),
            Some("false") => Ok(Value::Bool(false)),
            _ => Err(malformed(s)),
        },
        Sort::BitVec(w) => match parse_bv_literal(s) {
            Ok(Some(b)) if b.width() == *w => Ok(Value::Bv(b)),
            _ => Err(malformed(s)),
        },
        _ => Err(malformed(s)),
    }
}

fn parse_array(s: &Sexp, index: &Sort, elem: &Sort) -> Result<ArrayValue, ModelError> {
    let items = s.as_list().ok_or_else(|| malformed(s))?;
    match items {
        [head, base, i, v] if head.as_atom() == Some("store") => {
            let arr = parse_array(base, index, elem)?;
            Ok(arr.store(parse_scalar(i, index)?, parse_scalar(v, elem)?))
        }
        [head, v] => {
            let h = head.as_list().ok_or_else(|| malformed(s))?;
            let ok = h.len() == 3
                && h[0].as_atom() == Some("as")
                && h[1].as_atom() == Some("const")
                && parse_sort(&h[2]).ok() == Some(Sort::array(index.clone(), elem.clone()));
            if !ok {
                return Err(malformed(s));
            }
            Ok(ArrayValue {
                index_sort: index.clone(),
                default: Box::new(parse_scalar(v, elem)?),
                overrides: BTreeMap::new(),
            })
        }
        _ => Err(malformed(s)),
    }
}

fn parse_fun(body: &Sexp, args: &[Sort], ret: &Sort) -> Result<FunValue, ModelError> {
    let mut table = BTreeMap::new();
    let mut cur = body;
    loop {
        match cur.as_list() {
            Some([head, cond, r, rest]) if head.as_atom() == Some("ite") => {
                let eqs: Vec<&Sexp> = match cond.as_list() {
                    Some([and, tail @ ..]) if and.as_atom() == Some("and") => tail.iter().collect(),
                    _ => vec![cond],
                };
                if eqs.len() != args.len() {
                    return Err(malformed(cond));
                }
                let mut tuple = Vec::with_capacity(args.len());
                for (k, (e, sort)) in eqs.iter().zip(args).enumerate() {
                    match e.as_list() {
                        Some([eq, x, c])
                            if eq.as_atom() == Some("=")
                                && x.as_atom() == Some(param(k).as_str()) =>
                        {
                            tuple.push(parse_scalar(c, sort)?)
                        }
                        _ => return Err(malformed(e)),
                    }
                }
                // earlier branches shadow later ones
                table.entry(tuple).or_insert(parse_scalar(r, ret)?);
                cur = rest;
            }
            _ => break,
        }
    }
    let default = parse_scalar(cur, ret)?;
    table.retain(|_, v| *v != default);
    Ok(FunValue {
        default: Box::new(default),
        table,
    })
}

fn parse_define(f: &Formula, d: &Sexp) -> Result<(SymbolId, Value), ModelError> {
    let items = d.as_list().ok_or_else(|| malformed(d))?;
    let [head, name, params, _sort, body] = items else {
        return Err(malformed(d));
    };
    if head.as_atom() != Some("define-fun") {
        return Err(malformed(d));
    }
    let name = name.as_atom().ok_or_else(|| malformed(d))?;
    let s = f
        .lookup(name)
        .ok_or_else(|| ModelError::Unknown(name.to_string()))?;
    let sort = &f.symbol(s).sort;
    let nparams = params.as_list().ok_or_else(|| malformed(params))?.len();
    let v = match sort {
        Sort::Fun(args, ret) if nparams == args.len() => Value::Fun(parse_fun(body, args, ret)?),
        Sort::Array(i, e) if nparams == 0 => Value::Array(parse_array(body, i, e)?),
        Sort::Bool | Sort::BitVec(_) if nparams == 0 => parse_scalar(body, sort)?,
        _ => return Err(malformed(d)),
    };
    Ok((s, v))
}

/// Every `(model ...)` block in `text`, interpreted over the symbols of `f`.
pub fn parse_models(f: &Formula, text: &str) -> Result<Vec<Assignment>, ModelError> {
    let exprs = read_all(text).map_err(|e| ModelError::Read(format!("{}: {}", e.pos, e.msg)))?;
    let mut out = Vec::new();
    for e in &exprs {
        let items = e.as_list().ok_or_else(|| malformed(e))?;
        if items.first().and_then(Sexp::as_atom) != Some("model") {
            return Err(malformed(e));
        }
        let mut a = Assignment::new();
        for d in &items[1..] {
            let (s, v) = parse_define(f, d)?;
            a.set(s, v);
        }
        if !a.is_total_for(f) {
            return Err(ModelError::Malformed(
                "model does not assign every symbol".into(),
            ));
        }
        out.push(a);
    }
    Ok(out)
}

fn value_json(v: &Value) -> Json {
    match v {
        Value::Bool(b) => json!(b),
        Value::Bv(b) => json!(b.to_string()),
        Value::Array(a) => json!({
            "default": value_json(&a.default),
            "stores": a.overrides.iter().map(|(k, v)| json!([value_json(k), value_json(v)])).collect::<Vec<_>>(),
        }),
        Value::Fun(fv) => json!({
            "default": value_json(&fv.default),
            "table": fv.table.iter().map(|(k, v)| json!([k.iter().map(value_json).collect::<Vec<_>>(), value_json(v)])).collect::<Vec<_>>(),
        }),
    }
}

/// `{"name": value, ...}` with bit-vectors as `#b` strings.
pub fn model_json(f: &Formula, a: &Assignment) -> Json {
    let mut m = serde_json::Map::new();
    for s in f.symbol_ids() {
        if let Some(v) = a.get(s) {
            m.insert(f.symbol(s).name.clone(), value_json(v));
        }
    }
    Json::Object(m)
}
