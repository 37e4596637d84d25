//! SMT-LIB 2 frontend: sorts, the hash-consed term DAG, parsing and printing.

mod parser;
mod printer;
pub mod sexp;
mod sort;
mod term;

pub use parser::{parse_bv_literal, parse_formula, parse_sort, ParseError, SUPPORTED_LOGICS};
pub use printer::{print_formula, print_term, quote_symbol};
pub use sort::Sort;
pub use term::{Formula, Node, Op, SortError, Symbol, SymbolId, SymbolKind, TermId, TrackedBit};

/// Tracked bits of every Bool/bit-vector variable; see [`Formula::var_bits`].
pub fn var_bits(f: &Formula) -> Vec<TrackedBit> {
    f.var_bits()
}
