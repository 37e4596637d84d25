//! Stable SMT-LIB printer. Shared subterms are printed in full (no `let`).

use std::fmt::Write;

use super::sort::Sort;
use super::term::{Formula, Op, SymbolKind, TermId};

pub fn quote_symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.chars().next().unwrap().is_ascii_digit()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

pub fn print_term(f: &Formula, t: TermId) -> String {
    let mut out = String::new();
    write_term(f, t, &mut out);
    out
}

fn write_term(f: &Formula, t: TermId, out: &mut String) {
    let node = f.node(t);
    let head: String = match &node.op {
        Op::Var(s) => {
            out.push_str(&quote_symbol(&f.symbol(*s).name));
            return;
        }
        Op::BoolConst(b) => {
            out.push_str(if *b { "true" } else { "false" });
            return;
        }
        Op::BvConst(v) => {
            let _ = write!(out, "{v}");
            return;
        }
        Op::Extract { hi, lo } => format!("(_ extract {hi} {lo})"),
        Op::Apply(s) => quote_symbol(&f.symbol(*s).name),
        op => op.name().to_string(),
    };
    out.push('(');
    out.push_str(&head);
    for &c in &node.children {
        out.push(' ');
        write_term(f, c, out);
    }
    out.push(')');
}

fn write_decl(out: &mut String, name: &str, sort: &Sort) {
    match sort {
        Sort::Fun(args, ret) => {
            let _ = write!(out, "(declare-fun {} (", quote_symbol(name));
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{a}");
            }
            let _ = writeln!(out, ") {ret})");
        }
        _ => {
            let _ = writeln!(out, "(declare-fun {} () {sort})", quote_symbol(name));
        }
    }
}

pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    if let Some(l) = &f.logic {
        let _ = writeln!(out, "(set-logic {l})");
    }
    for s in f.symbols() {
        debug_assert!(matches!(
            s.kind,
            SymbolKind::Var | SymbolKind::Array | SymbolKind::Fun
        ));
        write_decl(&mut out, &s.name, &s.sort);
    }
    for &a in f.assertions() {
        let _ = writeln!(out, "(assert {})", print_term(f, a));
    }
    out.push_str("(check-sat)\n");
    out
}
