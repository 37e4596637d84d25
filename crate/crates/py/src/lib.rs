use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value as Json;

use pansampler_core::coverage::{
    build_universe, cover_set, coverage_star as cov_star, satisfies, CoverState,
};
use pansampler_core::model::{model_json, parse_models, print_model};
use pansampler_core::oracle::{enumerate_solutions, exact_coverage, min_cover};
use pansampler_core::sampler::{sample as run_sampler, Mode, SamplerConfig};
use pansampler_core::smtlib::{parse_formula, Formula};

fn formula(text: &str) -> PyResult<Formula> {
    parse_formula(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py>(py: Python<'py>, v: &Json) -> PyResult<Bound<'py, PyAny>> {
    match v {
        Json::Null => Ok(py.None().into_bound(py)),
        Json::Bool(b) => b.into_bound_py_any(py),
        Json::Number(n) => match n.as_u64() {
            Some(u) => u.into_bound_py_any(py),
            None => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py),
        },
        Json::String(s) => s.into_bound_py_any(py),
        Json::Array(xs) => {
            let l = PyList::empty(py);
            for x in xs {
                l.append(to_py(py, x)?)?;
            }
            Ok(l.into_any())
        }
        Json::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, to_py(py, x)?)?;
            }
            Ok(d.into_any())
        }
    }
}

/// Sample an SMT-LIB formula. Returns a dict with the run summary, the
/// models as `(model ...)` text and as plain values.
#[pyfunction]
#[pyo3(signature = (text, target_coverage=0.995, lam=50, max_solutions=1000, time_budget=3600.0, mode="pansampler", seed=0, bias_p=0.85))]
#[allow(clippy::too_many_arguments)]
fn sample<'py>(
    py: Python<'py>,
    text: &str,
    target_coverage: f64,
    lam: usize,
    max_solutions: usize,
    time_budget: f64,
    mode: &str,
    seed: u64,
    bias_p: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let f = formula(text)?;
    let mode: Mode = mode.parse().map_err(PyValueError::new_err)?;
    let cfg = SamplerConfig {
        lambda: lam,
        target_coverage,
        max_solutions,
        time_budget_s: time_budget,
        mode,
        seed,
        bias_p,
        ..SamplerConfig::default()
    };
    let res = py
        .detach(|| run_sampler(&f, &cfg))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let mut summary =
        serde_json::to_value(&res).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    summary["models"] = Json::Array(res.solutions.iter().map(|a| model_json(&f, a)).collect());
    summary["samples"] = Json::Array(
        res.solutions
            .iter()
            .map(|a| Json::String(print_model(&f, a)))
            .collect(),
    );
    Ok(to_py(py, &summary)?.cast_into::<PyDict>()?)
}

/// Whether each model in `samples` satisfies the formula.
#[pyfunction]
fn check(text: &str, samples: &str) -> PyResult<Vec<bool>> {
    let f = formula(text)?;
    let models = parse_models(&f, samples).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(models.iter().map(|a| satisfies(&f, a)).collect())
}

/// Coverage* of the models in `samples`.
#[pyfunction]
fn coverage_star(text: &str, samples: &str) -> PyResult<f64> {
    let f = formula(text)?;
    let models = parse_models(&f, samples).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let u = build_universe(&f);
    let mut c = CoverState::new(&u);
    for a in &models {
        c.absorb(&cover_set(&f, &u, a))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    }
    Ok(cov_star(&c, &u))
}

/// Exhaustive reference numbers for a small formula.
#[pyfunction]
#[pyo3(signature = (text, samples=None, cap=20))]
fn oracle<'py>(
    py: Python<'py>,
    text: &str,
    samples: Option<&str>,
    cap: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let f = formula(text)?;
    let rep = enumerate_solutions(&f, cap).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let d = PyDict::new(py);
    d.set_item("num_solutions", rep.solutions.len())?;
    d.set_item("valid_bits", rep.valid_bits)?;
    d.set_item("total_slots", rep.total_slots)?;
    let m = min_cover(&rep, 1.0);
    d.set_item("min_cover", m.cardinality)?;
    d.set_item("min_cover_exact", m.exact)?;
    if let Some(s) = samples {
        let models = parse_models(&f, s).map_err(|e| PyValueError::new_err(e.to_string()))?;
        d.set_item("exact_coverage", exact_coverage(&f, &rep, &models))?;
    }
    Ok(d)
}

#[pymodule]
pub fn pansampler(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_star, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add(
        "MODES",
        Mode::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
    )?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
