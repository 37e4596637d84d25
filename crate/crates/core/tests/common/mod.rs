#![allow(dead_code)]

use std::path::{Path, PathBuf};

use pansampler_core::oracle::fuzz::{generate, FuzzConfig, FuzzLogic};
use pansampler_core::smtlib::{parse_formula, Formula};

pub const LOGICS: [FuzzLogic; 3] = [FuzzLogic::Bv, FuzzLogic::Abv, FuzzLogic::Aufbv];

pub struct Fixture {
    pub name: String,
    pub text: String,
    pub formula: Formula,
}

/// Wider widths and arrays than the enumerable setting.
pub fn wide(logic: FuzzLogic) -> FuzzConfig {
    FuzzConfig {
        max_width: 8,
        bv_vars: 3,
        array_index_width: 3,
        array_elem_width: 4,
        fun_arg_width: 3,
        ..FuzzConfig::enumerable(logic)
    }
}

/// `n` fixtures cycling through the three logics.
pub fn corpus(n: usize, cfg: impl Fn(FuzzLogic) -> FuzzConfig) -> Vec<Fixture> {
    (0..n)
        .map(|k| {
            let logic = LOGICS[k % 3];
            let seed = 1000 + k as u64;
            let text = generate(seed, &cfg(logic));
            let formula = parse_formula(&text).expect("generated formulas parse");
            Fixture {
                name: format!("{}_{seed}", logic.name().to_lowercase()),
                text,
                formula,
            }
        })
        .collect()
}

pub fn enumerable_corpus(n: usize) -> Vec<Fixture> {
    corpus(n, FuzzConfig::enumerable)
}

pub fn micro_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/micro")
}
