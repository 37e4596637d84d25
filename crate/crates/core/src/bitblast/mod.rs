//! Bit-vector abstraction of array/function formulas and their compilation
//! to CNF.

mod abstraction;
mod blaster;

pub use abstraction::{
    abstract_formula, differing_index, Abstraction, ArrayNode, ArrayRef, Atom, AtomKind,
};
pub use blaster::{bit_blast, blast_formula, lift_model, Bit, BlastError, BlastMap, LiftError};

use crate::coverage::Assignment;
use crate::sat::BitDistribution;

/// Per-SAT-variable counts of observed 0s and 1s over `prior`, which are
/// assignments to the abstraction.
pub fn distribution_from(prior: &[Assignment], map: &BlastMap) -> BitDistribution {
    let mut dist = BitDistribution::empty();
    for tb in map.tracked_bits() {
        let v = map.forward(*tb).expect("tracked bit is mapped");
        for a in prior {
            let bit = a.get(tb.symbol).map(|x| x.bit(tb.bit)).unwrap_or(false);
            dist.record(v, bit);
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::Value;
    use crate::sat::Var;
    use crate::smtlib::parse_formula;

    #[test]
    fn distribution_counts() {
        let f =
            parse_formula("(declare-const x (_ BitVec 2))(declare-const y Bool)(assert (= x x))")
                .unwrap();
        let (_, map) = blast_formula(&f).unwrap();
        assert!(distribution_from(&[], &map).is_empty());
        let mut a = Assignment::zeros(&f);
        let b = a.clone();
        a.set(f.lookup("y").unwrap(), Value::Bool(true));
        let d = distribution_from(&[a, b], &map);
        assert_eq!(d.get(Var(0)), Some((2, 0)));
        assert_eq!(d.get(Var(2)), Some((1, 1)));
    }
}
