//! Coverage-maximizing solution sampling for quantifier-free bit-vector,
//! array and uninterpreted-function formulas.

pub mod bench;
pub mod bitblast;
pub mod bv;
pub mod coverage;
pub mod model;
pub mod oracle;
pub mod sampler;
pub mod sat;
pub mod smtlib;
pub mod theory;
