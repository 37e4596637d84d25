//! Random small formulas (as SMT-LIB text) and random CNFs.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sat::{Cnf, Lit, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FuzzLogic {
    Bv,
    Abv,
    Aufbv,
}

impl FuzzLogic {
    pub fn name(self) -> &'static str {
        match self {
            FuzzLogic::Bv => "QF_BV",
            FuzzLogic::Abv => "QF_ABV",
            FuzzLogic::Aufbv => "QF_AUFBV",
        }
    }
}

#[derive(Clone, Debug)]
pub struct FuzzConfig {
    pub logic: FuzzLogic,
    pub bv_vars: usize,
    pub bool_vars: usize,
    pub max_width: u32,
    pub depth: u32,
    pub assertions: usize,
    /// Index and element widths of arrays (one array per declared name).
    pub arrays: usize,
    pub array_index_width: u32,
    pub array_elem_width: u32,
    /// Unary functions over bit-vectors.
    pub functions: usize,
    pub fun_arg_width: u32,
}

impl FuzzConfig {
    /// Small enough for exhaustive enumeration.
    pub fn enumerable(logic: FuzzLogic) -> Self {
        FuzzConfig {
            logic,
            bv_vars: 2,
            bool_vars: 1,
            max_width: 3,
            depth: 3,
            assertions: 2,
            arrays: usize::from(logic != FuzzLogic::Bv),
            array_index_width: 1,
            array_elem_width: 2,
            functions: usize::from(logic == FuzzLogic::Aufbv),
            fun_arg_width: 1,
        }
    }
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    cfg: &'a FuzzConfig,
    bv: Vec<(String, u32)>,
    bools: Vec<String>,
    arrays: Vec<String>,
    funs: Vec<(String, u32, u32)>,
}

/// A random formula; deterministic in `seed`.
pub fn generate(seed: u64, cfg: &FuzzConfig) -> String {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        cfg,
        bv: Vec::new(),
        bools: Vec::new(),
        arrays: Vec::new(),
        funs: Vec::new(),
    };
    let mut out = format!("(set-logic {})\n", cfg.logic.name());
    for i in 0..cfg.bv_vars {
        let w = g.rng.random_range(1..=cfg.max_width.max(1));
        out.push_str(&format!("(declare-const v{i} (_ BitVec {w}))\n"));
        g.bv.push((format!("v{i}"), w));
    }
    for i in 0..cfg.bool_vars {
        out.push_str(&format!("(declare-const p{i} Bool)\n"));
        g.bools.push(format!("p{i}"));
    }
    if cfg.logic != FuzzLogic::Bv {
        for i in 0..cfg.arrays {
            out.push_str(&format!(
                "(declare-const a{i} (Array (_ BitVec {}) (_ BitVec {})))\n",
                cfg.array_index_width, cfg.array_elem_width
            ));
            g.arrays.push(format!("a{i}"));
        }
    }
    if cfg.logic == FuzzLogic::Aufbv {
        for i in 0..cfg.functions {
            let ret = g.rng.random_range(1..=cfg.max_width.max(1));
            out.push_str(&format!(
                "(declare-fun f{i} ((_ BitVec {})) (_ BitVec {ret}))\n",
                cfg.fun_arg_width
            ));
            g.funs.push((format!("f{i}"), cfg.fun_arg_width, ret));
        }
    }
    for _ in 0..cfg.assertions {
        let t = g.boolean(cfg.depth);
        out.push_str(&format!("(assert {t})\n"));
    }
    out.push_str("(check-sat)\n");
    out
}

impl Gen<'_> {
    fn constant(&mut self, w: u32) -> String {
        let bits: String = (0..w)
            .map(|_| if self.rng.random_bool(0.5) { '1' } else { '0' })
            .collect();
        format!("#b{bits}")
    }

    fn width(&mut self) -> u32 {
        if !self.bv.is_empty() && self.rng.random_bool(0.7) {
            self.bv.choose(&mut self.rng).unwrap().1
        } else {
            self.rng.random_range(1..=self.cfg.max_width.max(1))
        }
    }

    fn leaf(&mut self, w: u32) -> String {
        let same: Vec<&(String, u32)> = self.bv.iter().filter(|(_, x)| *x == w).collect();
        if !same.is_empty() && self.rng.random_bool(0.75) {
            return same.choose(&mut self.rng).unwrap().0.clone();
        }
        let wider: Vec<&(String, u32)> = self.bv.iter().filter(|(_, x)| *x > w).collect();
        if !wider.is_empty() && self.rng.random_bool(0.5) {
            let (name, x) = wider.choose(&mut self.rng).unwrap();
            let lo = self.rng.random_range(0..=x - w);
            return format!("((_ extract {} {lo}) {name})", lo + w - 1);
        }
        let narrower: Vec<&(String, u32)> = self.bv.iter().filter(|(_, x)| *x < w).collect();
        if !narrower.is_empty() && self.rng.random_bool(0.5) {
            let (name, x) = narrower.choose(&mut self.rng).unwrap();
            let ext = if self.rng.random_bool(0.5) {
                "zero_extend"
            } else {
                "sign_extend"
            };
            return format!("((_ {ext} {}) {name})", w - x);
        }
        self.constant(w)
    }

    fn array(&mut self, depth: u32) -> String {
        let base = self.arrays.choose(&mut self.rng).unwrap().clone();
        if depth == 0 {
            return base;
        }
        match self.rng.random_range(0..4) {
            0 | 1 => {
                let a = self.array(depth - 1);
                let i = self.bitvec(self.cfg.array_index_width, depth - 1);
                let v = self.bitvec(self.cfg.array_elem_width, depth - 1);
                format!("(store {a} {i} {v})")
            }
            2 => {
                let c = self.boolean(depth - 1);
                let x = self.array(depth - 1);
                let y = self.array(depth - 1);
                format!("(ite {c} {x} {y})")
            }
            _ => base,
        }
    }

    fn bitvec(&mut self, w: u32, depth: u32) -> String {
        if depth == 0 {
            return self.leaf(w);
        }
        let d = depth - 1;
        let mut choices = vec![0, 1, 2, 3, 4];
        if !self.arrays.is_empty() && w == self.cfg.array_elem_width {
            choices.extend([6, 6]);
        }
        if self.funs.iter().any(|f| f.2 == w) {
            choices.extend([7, 7]);
        }
        if w >= 2 {
            choices.push(8);
        }
        match *choices.choose(&mut self.rng).unwrap() {
            0 => self.leaf(w),
            1 => {
                let op = ["bvnot", "bvneg"].choose(&mut self.rng).unwrap();
                let x = self.bitvec(w, d);
                format!("({op} {x})")
            }
            2 | 3 => {
                let op = [
                    "bvadd", "bvsub", "bvmul", "bvand", "bvor", "bvxor", "bvshl", "bvlshr",
                    "bvashr",
                ]
                .choose(&mut self.rng)
                .unwrap();
                let x = self.bitvec(w, d);
                let y = self.bitvec(w, d);
                format!("({op} {x} {y})")
            }
            4 => {
                let c = self.boolean(d);
                let x = self.bitvec(w, d);
                let y = self.bitvec(w, d);
                format!("(ite {c} {x} {y})")
            }
            6 => {
                let a = self.array(d);
                let i = self.bitvec(self.cfg.array_index_width, d);
                format!("(select {a} {i})")
            }
            7 => {
                let cands: Vec<(String, u32, u32)> =
                    self.funs.iter().filter(|f| f.2 == w).cloned().collect();
                let (name, arg, _) = cands.choose(&mut self.rng).unwrap().clone();
                let x = self.bitvec(arg, d);
                format!("({name} {x})")
            }
            _ => {
                let hi = self.rng.random_range(1..w);
                let x = self.bitvec(hi, d);
                let y = self.bitvec(w - hi, d);
                format!("(concat {x} {y})")
            }
        }
    }

    fn boolean(&mut self, depth: u32) -> String {
        if depth == 0 {
            if !self.bools.is_empty() && self.rng.random_bool(0.5) {
                return self.bools.choose(&mut self.rng).unwrap().clone();
            }
            let w = self.width();
            let x = self.leaf(w);
            let y = self.leaf(w);
            return format!("(= {x} {y})");
        }
        let d = depth - 1;
        let mut choices = vec![0, 0, 1, 1, 2, 3];
        if !self.arrays.is_empty() {
            choices.push(4);
        }
        match *choices.choose(&mut self.rng).unwrap() {
            0 => {
                let op = [
                    "=", "distinct", "bvult", "bvule", "bvslt", "bvsle", "bvugt", "bvsge",
                ]
                .choose(&mut self.rng)
                .unwrap();
                let w = self.width();
                let x = self.bitvec(w, d);
                let y = self.bitvec(w, d);
                format!("({op} {x} {y})")
            }
            1 => {
                let op = ["and", "or", "=>", "xor", "="]
                    .choose(&mut self.rng)
                    .unwrap();
                let x = self.boolean(d);
                let y = self.boolean(d);
                format!("({op} {x} {y})")
            }
            2 => {
                let x = self.boolean(d);
                format!("(not {x})")
            }
            3 => {
                if !self.bools.is_empty() {
                    self.bools.choose(&mut self.rng).unwrap().clone()
                } else {
                    self.boolean(d)
                }
            }
            _ => {
                let x = self.array(d);
                let y = self.array(d);
                let op = ["=", "distinct"].choose(&mut self.rng).unwrap();
                format!("({op} {x} {y})")
            }
        }
    }
}

/// Uniform random k-CNF over `vars` variables.
pub fn random_cnf(rng: &mut impl Rng, vars: u32, clauses: usize, k: usize) -> Cnf {
    let mut cnf = Cnf::new();
    cnf.num_vars = vars;
    for _ in 0..clauses {
        let c: Vec<Lit> = (0..k)
            .map(|_| Var(rng.random_range(0..vars)).lit(rng.random_bool(0.5)))
            .collect();
        cnf.add_clause(c);
    }
    cnf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smtlib::parse_formula;

    #[test]
    fn generated_formulas_parse() {
        for logic in [FuzzLogic::Bv, FuzzLogic::Abv, FuzzLogic::Aufbv] {
            let cfg = FuzzConfig::enumerable(logic);
            for seed in 0..200 {
                let text = generate(seed, &cfg);
                parse_formula(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
                assert_eq!(text, generate(seed, &cfg));
            }
        }
    }
}
