//! Python bindings for `hyperlab`.
//!
//! Words cross the boundary as strings in the group's alphabet (single
//! characters or whitespace-separated symbols, `"id"` for the identity).
//! Reports are returned as plain dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use hyperlab::automaton::{validate_strongly_markov, Automaton};
use hyperlab::boundary::PattersonSullivan as CorePs;
use hyperlab::builtins::{builtin_representation, parse_group};
use hyperlab::counting::{
    build_count_table, clt_comparison_suite, estimate_limits, sample_sphere_uniform, spherical_statistics,
    HistogramSpec, Mode, Schedule,
};
use hyperlab::group::{Alphabet, GroupOracle, LinearRepresentation, SubadditiveFunctional, Word};
use hyperlab::markov::{coin_diagonal_process, parry_product_process, simulate as simulate_process};
use hyperlab::rng::stream_rng;
use hyperlab::spectral::{analyze as spectral_analyze, edge_chain, parry_measure, scc_decomposition, TransitionMatrix};

fn err(e: hyperlab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse(alphabet: &Alphabet, text: &str) -> PyResult<Word> {
    alphabet.parse_word(text).map_err(err)
}

/// A group given by a word-problem oracle, e.g. `Group("free:2")`,
/// `Group("product:2,3")`, `Group("surface:2")`.
#[pyclass(module = "hyperlab", frozen)]
struct Group {
    spec: String,
    oracle: GroupOracle,
    automaton: Option<Automaton>,
}

#[pymethods]
impl Group {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        let g = parse_group(spec).map_err(err)?;
        Ok(Group { spec: spec.to_string(), oracle: g.oracle, automaton: g.automaton })
    }

    /// Group from a presentation JSON document.
    #[staticmethod]
    fn from_presentation_json(text: &str) -> PyResult<Self> {
        let oracle = GroupOracle::from_presentation_json(text).map_err(err)?;
        Ok(Group { spec: "presentation".into(), oracle, automaton: None })
    }

    #[getter]
    fn symbols(&self) -> Vec<String> {
        self.oracle.alphabet().symbols().to_vec()
    }

    fn automaton(&self) -> Option<PyAutomaton> {
        self.automaton.clone().map(|inner| PyAutomaton { inner })
    }

    fn reduce(&self, word: &str) -> PyResult<String> {
        let w = self.oracle.reduce(&parse(self.oracle.alphabet(), word)?).map_err(err)?;
        Ok(self.oracle.alphabet().format_word(&w))
    }

    fn word_length(&self, word: &str) -> PyResult<usize> {
        self.oracle.word_length(&parse(self.oracle.alphabet(), word)?).map_err(err)
    }

    fn gromov_product(&self, g: &str, h: &str) -> PyResult<f64> {
        let a = self.oracle.alphabet();
        self.oracle.gromov_product(&parse(a, g)?, &parse(a, h)?).map_err(err)
    }

    /// `#S_n` for `n = 0..=n_max` by breadth-first enumeration.
    fn sphere_sizes(&self, n_max: usize) -> PyResult<Vec<u64>> {
        self.oracle.sphere_sizes(n_max).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Group({:?})", self.spec)
    }
}

#[pyclass(name = "Automaton", module = "hyperlab", frozen)]
#[derive(Clone)]
struct PyAutomaton {
    inner: Automaton,
}

#[pymethods]
impl PyAutomaton {
    /// Built-in strongly Markov structure of `free:K` or `product:M1,M2,…`.
    #[staticmethod]
    fn builtin(spec: &str) -> PyResult<Self> {
        parse_group(spec)
            .map_err(err)?
            .automaton
            .map(|inner| PyAutomaton { inner })
            .ok_or_else(|| PyValueError::new_err(format!("`{spec}` has no built-in automaton")))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyAutomaton { inner: Automaton::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn vertices(&self) -> Vec<String> {
        self.inner.vertices().to_vec()
    }

    #[getter]
    fn symbols(&self) -> Vec<String> {
        self.inner.alphabet().symbols().to_vec()
    }

    /// Number of length-`n` paths from the start vertex, `n = 0..=n_max`.
    fn sphere_sizes(&self, n_max: usize) -> Vec<u128> {
        self.inner.path_counts(n_max)
    }

    /// Spectral report: growth rate, components, periods, limit vectors.
    fn analyze(&self, py: Python<'_>) -> PyResult<PyObject> {
        let report = spectral_analyze(&TransitionMatrix::from_automaton(&self.inner)).map_err(err)?;
        to_py(py, &report)
    }

    /// Checks the structure against `group` up to `depth`.
    #[pyo3(signature = (group, depth = 8))]
    fn validate(&self, py: Python<'_>, group: &Group, depth: usize) -> PyResult<PyObject> {
        let report = validate_strongly_markov(&self.inner, &group.oracle, depth, depth).map_err(err)?;
        to_py(py, &report)
    }

    fn __repr__(&self) -> String {
        format!("Automaton(vertices={}, symbols={})", self.inner.vertices().len(), self.inner.alphabet().len())
    }
}

#[pyclass(module = "hyperlab", frozen)]
#[derive(Clone)]
struct Representation {
    inner: LinearRepresentation,
}

#[pymethods]
impl Representation {
    /// `sanov`, `orthogonal` or `modular`, over the generators of `group`.
    #[staticmethod]
    fn builtin(name: &str, group: &Group) -> PyResult<Self> {
        Ok(Representation { inner: builtin_representation(name, &group.oracle).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Representation { inner: LinearRepresentation::from_json(text).map_err(err)? })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    /// The matrix of `word` as a list of rows.
    fn matrix(&self, word: &str) -> PyResult<Vec<Vec<f64>>> {
        let m = self.inner.eval(&parse(self.inner.alphabet(), word)?).map_err(err)?;
        Ok(m.to_matrix().to_rows())
    }

    fn log_norm(&self, word: &str) -> PyResult<f64> {
        let m = self.inner.eval(&parse(self.inner.alphabet(), word)?).map_err(err)?;
        Ok(m.log_operator_norm())
    }
}

/// A subadditive functional on words.
#[pyclass(module = "hyperlab", frozen)]
struct Functional {
    inner: SubadditiveFunctional,
    alphabet: Alphabet,
}

#[pymethods]
impl Functional {
    #[staticmethod]
    fn log_norm(rep: &Representation) -> Self {
        Functional { alphabet: rep.inner.alphabet().clone(), inner: SubadditiveFunctional::log_norm(rep.inner.clone()) }
    }

    #[staticmethod]
    fn log_frobenius(rep: &Representation) -> Self {
        Functional { alphabet: rep.inner.alphabet().clone(), inner: SubadditiveFunctional::LogFrobenius(rep.inner.clone()) }
    }

    #[staticmethod]
    fn displacement(rep: &Representation) -> PyResult<Self> {
        Ok(Functional {
            alphabet: rep.inner.alphabet().clone(),
            inner: SubadditiveFunctional::displacement(rep.inner.clone()).map_err(err)?,
        })
    }

    #[staticmethod]
    fn word_length(group: &Group) -> Self {
        Functional {
            alphabet: group.oracle.alphabet().clone(),
            inner: SubadditiveFunctional::identity_word_length(group.oracle.clone()),
        }
    }

    #[staticmethod]
    fn abs_homomorphism(group: &Group, weights: Vec<f64>) -> PyResult<Self> {
        let alphabet = group.oracle.alphabet().clone();
        let inner = SubadditiveFunctional::abs_homomorphism(&alphabet, weights).map_err(err)?;
        Ok(Functional { inner, alphabet })
    }

    #[staticmethod]
    fn homomorphism(group: &Group, weights: Vec<f64>) -> PyResult<Self> {
        let alphabet = group.oracle.alphabet().clone();
        let inner = SubadditiveFunctional::homomorphism(&alphabet, weights).map_err(err)?;
        Ok(Functional { inner, alphabet })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn eval(&self, word: &str) -> PyResult<f64> {
        self.inner.eval(&parse(&self.alphabet, word)?).map_err(err)
    }

    fn __call__(&self, word: &str) -> PyResult<f64> {
        self.eval(word)
    }
}

/// Patterson-Sullivan measure of the boundary, built from an automaton.
#[pyclass(module = "hyperlab", frozen)]
struct PattersonSullivan {
    inner: CorePs,
}

#[pymethods]
impl PattersonSullivan {
    #[new]
    fn new(automaton: &PyAutomaton) -> PyResult<Self> {
        Ok(PattersonSullivan { inner: CorePs::new(&automaton.inner).map_err(err)? })
    }

    #[getter]
    fn growth_rate(&self) -> f64 {
        self.inner.lambda()
    }

    /// Mass of the cylinder of rays starting with `word`.
    fn cylinder_mass(&self, word: &str) -> PyResult<f64> {
        let w = parse(self.inner.automaton().alphabet(), word)?;
        self.inner.word_mass(&w).map_err(err)
    }

    /// First `length` letters of a ray drawn from the measure.
    #[pyo3(signature = (length, seed = 0, stream = 0))]
    fn sample_ray(&self, length: usize, seed: u64, stream: u64) -> String {
        let ray = self.inner.sample_ray(length, &mut stream_rng(seed, stream));
        self.inner.automaton().alphabet().format_word(&ray.word)
    }

    fn additivity_residual(&self, depth: usize) -> f64 {
        self.inner.additivity_residual(depth)
    }

    /// Total variation between the normalized sphere measure at depth `n` and
    /// the limit measure, on prefixes of length `k`.
    fn finite_measure_tv(&self, n: usize, k: usize) -> PyResult<f64> {
        self.inner.finite_measure_tv(n, k).map_err(err)
    }
}

fn check_alignment(aut: &Automaton, f: &Functional) -> PyResult<()> {
    if aut.alphabet().symbols() != f.alphabet.symbols() {
        return Err(PyValueError::new_err("functional and automaton use different alphabets"));
    }
    Ok(())
}

/// Mean, variance and deviation fractions of `functional` over the sphere of
/// radius `n`; exact when `samples` is `None`, Monte Carlo otherwise.
#[pyfunction]
#[pyo3(signature = (automaton, functional, n, samples = None, seed = 0, lambda_ref = 0.0, eps = vec![]))]
#[allow(clippy::too_many_arguments)]
fn sphere_statistics(
    py: Python<'_>,
    automaton: &PyAutomaton,
    functional: &Functional,
    n: usize,
    samples: Option<usize>,
    seed: u64,
    lambda_ref: f64,
    eps: Vec<f64>,
) -> PyResult<PyObject> {
    check_alignment(&automaton.inner, functional)?;
    let table = build_count_table(&automaton.inner, n);
    let mode = match samples {
        None => Mode::Exact,
        Some(samples) => Mode::MonteCarlo { samples, seed },
    };
    let hist = HistogramSpec { origin: 0.0, width: 1.0, bins: 1 };
    let s = py
        .allow_threads(|| {
            spherical_statistics(&automaton.inner, &table, &functional.inner, n, mode, lambda_ref, &eps, &hist)
        })
        .map_err(err)?;
    to_py(py, &s)
}

/// Estimates of the drift and variance of `functional` from exact spheres
/// `1..=exact_to`, refined by Monte Carlo at `mc_depths`.
#[pyfunction]
#[pyo3(signature = (automaton, functional, exact_to = 10, mc_depths = vec![], samples = 1000, seed = 0))]
fn estimate(
    py: Python<'_>,
    automaton: &PyAutomaton,
    functional: &Functional,
    exact_to: usize,
    mc_depths: Vec<usize>,
    samples: usize,
    seed: u64,
) -> PyResult<PyObject> {
    check_alignment(&automaton.inner, functional)?;
    let n_max = mc_depths.iter().copied().chain([exact_to]).max().unwrap_or(exact_to);
    let table = build_count_table(&automaton.inner, n_max);
    let schedule = Schedule {
        exact: (1..=exact_to).collect(),
        monte_carlo: mc_depths.iter().map(|&n| (n, samples)).collect(),
        seed,
    };
    let est = py
        .allow_threads(|| estimate_limits(&automaton.inner, &table, &functional.inner, &schedule))
        .map_err(err)?;
    to_py(py, &est)
}

/// `count` uniformly random elements of the sphere of radius `n`.
#[pyfunction]
#[pyo3(signature = (automaton, n, count = 1, seed = 0))]
fn sample_sphere(automaton: &PyAutomaton, n: usize, count: usize, seed: u64) -> PyResult<Vec<String>> {
    let aut = &automaton.inner;
    let table = build_count_table(aut, n);
    let mut rng = stream_rng(seed, 0);
    (0..count)
        .map(|_| {
            let w = sample_sphere_uniform(aut, &table, n, &mut rng).map_err(err)?;
            Ok(aut.alphabet().format_word(&w))
        })
        .collect()
}

/// One trajectory of `log ‖M_k‖`: the Parry random product of `rep` along
/// the automaton, or the two-state coin process when `automaton` is `None`.
#[pyfunction]
#[pyo3(signature = (n, automaton = None, rep = None, seed = 0, stream = 0))]
fn simulate(
    py: Python<'_>,
    n: usize,
    automaton: Option<&PyAutomaton>,
    rep: Option<&Representation>,
    seed: u64,
    stream: u64,
) -> PyResult<PyObject> {
    let process = match (automaton, rep) {
        (None, None) => coin_diagonal_process().map_err(err)?,
        (Some(aut), Some(rep)) => {
            let aut = &aut.inner;
            let a = TransitionMatrix::from_automaton(aut);
            let report = spectral_analyze(&a).map_err(err)?;
            let c = report.maximal.iter().position(|&m| m).ok_or(hyperlab::Error::NoGrowth).map_err(err)?;
            let parry = parry_measure(&a, &scc_decomposition(&a).components[c]).map_err(err)?;
            let rep = rep.inner.aligned_to(aut.alphabet()).map_err(err)?;
            parry_product_process(aut, &edge_chain(&parry), &rep).map_err(err)?
        }
        _ => return Err(PyValueError::new_err("pass both automaton and rep, or neither")),
    };
    let t = py.allow_threads(|| simulate_process(&process, n, seed, stream));
    to_py(py, &t)
}

/// Total-variation tables comparing the sphere measures with their Markov
/// approximations.
#[pyfunction]
#[pyo3(signature = (automaton, ns, c = vec![1.0, 2.0, 4.0]))]
fn clt_suite(py: Python<'_>, automaton: &PyAutomaton, ns: Vec<usize>, c: Vec<f64>) -> PyResult<PyObject> {
    let aut = &automaton.inner;
    let p = spectral_analyze(&TransitionMatrix::from_automaton(aut)).map_err(err)?.p_common;
    let report = py.allow_threads(|| clt_comparison_suite(aut, &ns, p, &c, false)).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
#[pyo3(name = "hyperlab")]
pub fn hyperlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Group>()?;
    m.add_class::<PyAutomaton>()?;
    m.add_class::<Representation>()?;
    m.add_class::<Functional>()?;
    m.add_class::<PattersonSullivan>()?;
    m.add_function(wrap_pyfunction!(sphere_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(sample_sphere, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(clt_suite, m)?)?;
    Ok(())
}
