use pyo3::ffi::c_str;
use pyo3::prelude::*;

use pansampler::pansampler;

#[test]
fn module_works_inside_an_embedded_interpreter() {
    pyo3::append_to_inittab!(pansampler);
    Python::attach(|py| {
        py.run(
            c_str!(
                r#"
import pansampler
f = "(declare-const x (_ BitVec 4))(assert (bvult x #x9))"
r = pansampler.sample(f, target_coverage=0.9, lam=8, seed=3)
assert r["termination"] in ("target", "stall"), r["termination"]
assert all(pansampler.check(f, "".join(r["samples"])))
o = pansampler.oracle(f, "".join(r["samples"]))
assert o["num_solutions"] == 9
assert r["coverage"]["coverage_star"] <= o["exact_coverage"]
"#
            ),
            None,
            None,
        )
    })
    .unwrap();
}
