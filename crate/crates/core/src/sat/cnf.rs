use std::fmt;
use std::ops::Not;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn lit(self, positive: bool) -> Lit {
        Lit::new(self, positive)
    }
}

/// A literal: variable index shifted left once, low bit set for negation.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(v: Var, positive: bool) -> Lit {
        Lit(v.0 << 1 | (!positive) as u32)
    }

    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn code(self) -> usize {
        self.0 as usize
    }

    /// Signed 1-based DIMACS literal.
    pub fn to_dimacs(self) -> i64 {
        let v = self.var().0 as i64 + 1;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }

    pub fn from_dimacs(d: i64) -> Lit {
        assert!(d != 0, "0 is not a literal");
        Lit::new(Var((d.unsigned_abs() - 1) as u32), d > 0)
    }

    /// True when `model` makes this literal true.
    pub fn holds(self, model: &[bool]) -> bool {
        model[self.var().index()] == self.is_positive()
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
}

impl Cnf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn new_var(&mut self) -> Var {
        let v = Var(self.num_vars);
        self.num_vars += 1;
        v
    }

    /// Adds a clause with duplicate literals removed; tautologies are dropped.
    pub fn add_clause(&mut self, lits: impl IntoIterator<Item = Lit>) {
        let mut c: Vec<Lit> = lits.into_iter().collect();
        c.sort_unstable();
        c.dedup();
        if c.windows(2).any(|w| w[0] == !w[1]) {
            return;
        }
        for l in &c {
            if l.var().0 >= self.num_vars {
                self.num_vars = l.var().0 + 1;
            }
        }
        self.clauses.push(c);
    }

    pub fn is_satisfied_by(&self, model: &[bool]) -> bool {
        model.len() >= self.num_vars as usize
            && self
                .clauses
                .iter()
                .all(|c| c.iter().any(|l| l.holds(model)))
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                out.push_str(&l.to_dimacs().to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }

    pub fn parse_dimacs(text: &str) -> Result<Cnf, DimacsError> {
        let mut cnf = Cnf::new();
        let mut header: Option<(u32, usize)> = None;
        let mut current = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 || parts[1] != "cnf" {
                    return Err(DimacsError::Header(lineno + 1));
                }
                let nv = parts[2]
                    .parse()
                    .map_err(|_| DimacsError::Header(lineno + 1))?;
                let nc = parts[3]
                    .parse()
                    .map_err(|_| DimacsError::Header(lineno + 1))?;
                header = Some((nv, nc));
                cnf.num_vars = nv;
                continue;
            }
            if header.is_none() {
                return Err(DimacsError::MissingHeader);
            }
            for tok in line.split_whitespace() {
                let d: i64 = tok
                    .parse()
                    .map_err(|_| DimacsError::Literal(lineno + 1, tok.to_string()))?;
                if d == 0 {
                    cnf.add_clause(current.drain(..));
                } else {
                    current.push(Lit::from_dimacs(d));
                }
            }
        }
        if !current.is_empty() {
            cnf.add_clause(current);
        }
        if header.is_none() {
            return Err(DimacsError::MissingHeader);
        }
        Ok(cnf)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimacsError {
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("line {0}: malformed `p cnf` header")]
    Header(usize),
    #[error("line {0}: malformed literal `{1}`")]
    Literal(usize, String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tautologies_dropped_and_duplicates_merged() {
        let mut cnf = Cnf::new();
        let a = cnf.new_var();
        let b = cnf.new_var();
        cnf.add_clause([a.lit(true), a.lit(false)]);
        assert!(cnf.clauses.is_empty());
        cnf.add_clause([a.lit(true), b.lit(false), a.lit(true)]);
        assert_eq!(cnf.clauses[0].len(), 2);
    }

    #[test]
    fn dimacs_round_trip() {
        let text = "c demo\np cnf 3 2\n1 -2 0\n2 3 0\n";
        let cnf = Cnf::parse_dimacs(text).unwrap();
        assert_eq!(cnf.num_vars, 3);
        assert_eq!(Cnf::parse_dimacs(&cnf.to_dimacs()).unwrap(), cnf);
        assert!(Cnf::parse_dimacs("1 2 0").is_err());
    }
}
