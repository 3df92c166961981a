use pyo3::prelude::*;
use pyo3::types::PyDict;
use pyo3::wrap_pymodule;

fn with_module<F: for<'py> FnOnce(Python<'py>, Bound<'py, PyDict>)>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let module = wrap_pymodule!(linkrisk::linkrisk)(py);
        let scope = PyDict::new(py);
        scope.set_item("linkrisk", module).unwrap();
        f(py, scope);
    });
}

fn run(py: Python<'_>, scope: &Bound<'_, PyDict>, code: &str) {
    let code = std::ffi::CString::new(code).unwrap();
    if let Err(e) = py.run(&code, Some(scope), None) {
        e.print(py);
        panic!("python snippet failed");
    }
}

#[test]
fn scalar_functions_round_trip() {
    with_module(|py, scope| {
        run(
            py,
            &scope,
            "assert linkrisk.normalize_attribute('Zip Code') == 'zip_code'\n\
             assert linkrisk.risk_score(1, 1, 50.0) == 50.0\n\
             assert linkrisk.normalize_risk(91.0) == 2.5\n\
             assert linkrisk.nmi(['a','b'], ['a','a']) == 0.0\n",
        );
    });
}

#[test]
fn join_returns_nested_dicts() {
    with_module(|py, scope| {
        run(
            py,
            &scope,
            "a = linkrisk.Dataset.from_string('a', 'age,sex,x\\n30,f,1\\n40,m,2\\n50,f,3\\n')\n\
             b = linkrisk.Dataset.from_string('b', 'Age,Sex,y\\n30,f,q\\n41,m,r\\n')\n\
             r = linkrisk.join(a, b, ['age', 'sex'], numeric_match='exact')\n\
             assert r['outcome']['match_count'] == 1\n\
             assert r['outcome']['matches'][0]['row_index_a'] == 0\n\
             assert r['suggestions'] is None\n",
        );
    });
}

#[test]
fn errors_raise_the_module_exception() {
    with_module(|py, scope| {
        run(
            py,
            &scope,
            "d = linkrisk.PrivacyDictionary(['age'])\n\
             try:\n    d.insert('')\nexcept linkrisk.LinkRiskError:\n    pass\nelse:\n    raise AssertionError()\n\
             try:\n    linkrisk.risk_score(3, 2, 50.0)\nexcept linkrisk.LinkRiskError:\n    pass\nelse:\n    raise AssertionError()\n",
        );
    });
}
