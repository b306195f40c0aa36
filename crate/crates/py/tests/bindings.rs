use pyo3::prelude::*;
use pyo3::types::PyDict;

use hyperlab_py::hyperlab_py;

#[test]
fn module_exposes_types_and_functions() {
    pyo3::append_to_inittab!(hyperlab_py);
    pyo3::prepare_freethreaded_python();
    Python::with_gil(|py| {
        let m = py.import("hyperlab").unwrap();
        for name in ["Group", "Automaton", "Representation", "Functional", "PattersonSullivan", "estimate", "simulate"] {
            assert!(m.hasattr(name).unwrap(), "{name}");
        }
        let locals = PyDict::new(py);
        locals.set_item("h", &m).unwrap();
        let lam: f64 = py
            .eval(c"h.Automaton.builtin('product:2,3').analyze()['lambda']", None, Some(&locals))
            .unwrap()
            .extract()
            .unwrap();
        assert!((lam - 2f64.sqrt()).abs() < 1e-10);
        let err = py.eval(c"h.Group('free:x')", None, Some(&locals)).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}
