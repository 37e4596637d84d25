//! Plain recursive DPLL with unit propagation; a reference for the CDCL solver.

use crate::sat::{Cnf, Lit};

/// A model, or `None` when `cnf` is unsatisfiable.
pub fn dpll(cnf: &Cnf) -> Option<Vec<bool>> {
    let mut assign: Vec<Option<bool>> = vec![None; cnf.num_vars as usize];
    if search(&cnf.clauses, &mut assign) {
        Some(assign.into_iter().map(|v| v.unwrap_or(false)).collect())
    } else {
        None
    }
}

fn value(l: Lit, assign: &[Option<bool>]) -> Option<bool> {
    assign[l.var().index()].map(|b| b == l.is_positive())
}

fn search(clauses: &[Vec<Lit>], assign: &mut Vec<Option<bool>>) -> bool {
    let mut trail = Vec::new();
    // unit propagation to fixpoint
    loop {
        let mut changed = false;
        for c in clauses {
            let mut unassigned = None;
            let mut free = 0;
            let mut sat = false;
            for &l in c {
                match value(l, assign) {
                    Some(true) => {
                        sat = true;
                        break;
                    }
                    Some(false) => {}
                    None => {
                        free += 1;
                        unassigned = Some(l);
                    }
                }
            }
            if sat {
                continue;
            }
            match free {
                0 => {
                    undo(assign, &trail);
                    return false;
                }
                1 => {
                    let l = unassigned.unwrap();
                    assign[l.var().index()] = Some(l.is_positive());
                    trail.push(l.var().index());
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    let Some(v) = assign.iter().position(Option::is_none) else {
        return true;
    };
    for b in [false, true] {
        assign[v] = Some(b);
        if search(clauses, assign) {
            return true;
        }
    }
    assign[v] = None;
    undo(assign, &trail);
    false
}

fn undo(assign: &mut [Option<bool>], trail: &[usize]) {
    for &v in trail {
        assign[v] = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_instances() {
        let mut cnf = Cnf::new();
        cnf.add_clause([Lit::from_dimacs(1), Lit::from_dimacs(2)]);
        cnf.add_clause([Lit::from_dimacs(-1)]);
        let m = dpll(&cnf).unwrap();
        assert!(cnf.is_satisfied_by(&m));
        cnf.add_clause([Lit::from_dimacs(-2)]);
        assert!(dpll(&cnf).is_none());
    }
}
