//! CNF representation and the distribution-biased CDCL solver.

mod cnf;
mod solver;

pub use cnf::{Cnf, DimacsError, Lit, Var};
pub use solver::{solve, BitDistribution, PhaseBias, SatResult, SolverConfig};

/// Renders a model as a SAT-competition `v` line.
pub fn model_line(model: &[bool]) -> String {
    let mut s = String::from("v");
    for (i, &b) in model.iter().enumerate() {
        let d = i as i64 + 1;
        s.push(' ');
        s.push_str(&(if b { d } else { -d }).to_string());
    }
    s.push_str(" 0");
    s
}
