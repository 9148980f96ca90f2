//! Python bindings for genskel.

use genskel_core::harness::{run_experiment as run, Experiment, ExperimentConfig};
use genskel_core::latticeoracle::{parse_rational, Ensemble};
use genskel_core::limitlaw;
use genskel_core::replica::{rng_for, salt};
use genskel_core::skeleton::{self, BranchMatrix, BuiltShape};
use genskel_core::treegen::{self, GenTree, LawKind};
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::str::FromStr;

const DEFAULT_CAP: u64 = 50_000_000;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Critical offspring law: "geometric-half", "poisson-one" or "binary-half".
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct OffspringLaw(treegen::OffspringLaw);

#[pymethods]
impl OffspringLaw {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(OffspringLaw(treegen::OffspringLaw::new(
            LawKind::from_str(name).map_err(value_err)?,
        )))
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.0.kind().name()
    }

    /// Offspring variance.
    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    fn pmf(&self, k: u64) -> f64 {
        self.0.pmf(k)
    }

    fn __repr__(&self) -> String {
        format!("OffspringLaw({:?})", self.name())
    }
}

/// Galton-Watson tree with breadth-first vertex ids; the root is 0.
#[pyclass(frozen)]
struct Tree(GenTree);

impl Tree {
    fn vertex(&self, v: u64) -> PyResult<u32> {
        self.0
            .check_vertex(v)
            .map_err(|e| PyIndexError::new_err(e.to_string()))
    }
}

#[pymethods]
impl Tree {
    /// Grows a tree, truncated at `depth` if given.
    #[staticmethod]
    #[pyo3(signature = (law, seed, depth=None, cap=DEFAULT_CAP))]
    fn grow(law: &OffspringLaw, seed: u64, depth: Option<u32>, cap: u64) -> PyResult<Self> {
        let mut rng = rng_for(seed, salt("py-grow"), 0);
        let t = match depth {
            Some(d) => treegen::grow_tree_to_depth(&law.0, d, cap, &mut rng),
            None => treegen::grow_tree(&law.0, cap, &mut rng),
        };
        t.map(Tree).map_err(value_err)
    }

    /// Grows trees until one has a vertex in generation `m`.
    #[staticmethod]
    #[pyo3(signature = (law, m, seed, depth=None, cap=DEFAULT_CAP))]
    fn grow_conditioned(
        law: &OffspringLaw,
        m: u32,
        seed: u64,
        depth: Option<u32>,
        cap: u64,
    ) -> PyResult<Self> {
        let mut rng = rng_for(seed, salt("py-grow-conditioned"), 0);
        treegen::grow_conditioned(&law.0, m, depth, cap, &mut rng)
            .map(|c| Tree(c.value))
            .map_err(value_err)
    }

    /// Builds a tree from offspring counts in breadth-first order.
    #[staticmethod]
    fn from_offspring_counts(counts: Vec<u32>) -> PyResult<Self> {
        GenTree::from_offspring_counts(&counts)
            .map(Tree)
            .map_err(value_err)
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.0.num_vertices()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    fn __len__(&self) -> usize {
        self.0.num_vertices()
    }

    fn parent(&self, v: u64) -> PyResult<Option<u32>> {
        Ok(self.0.parent(self.vertex(v)?))
    }

    fn generation(&self, v: u64) -> PyResult<u32> {
        Ok(self.0.generation(self.vertex(v)?))
    }

    fn children(&self, v: u64) -> PyResult<Vec<u32>> {
        Ok(self.0.children(self.vertex(v)?).collect())
    }

    fn generation_sizes(&self) -> Vec<u64> {
        self.0.generation_sizes()
    }

    /// Most recent common ancestor of two vertices.
    fn mrca(&self, u: u64, v: u64) -> PyResult<u32> {
        Ok(treegen::mrca(&self.0, self.vertex(u)?, self.vertex(v)?).0)
    }

    /// `k` i.i.d. uniform vertices; smaller `k` with the same seed gives a prefix.
    fn uniform_vertices(&self, k: usize, seed: u64) -> Vec<u32> {
        treegen::uniform_vertices(&self.0, k, &mut rng_for(seed, salt("py-uniform"), 0))
    }

    /// Genealogical branch matrix of the given vertices.
    fn branch_matrix(&self, vertices: Vec<u64>) -> PyResult<Vec<Vec<i64>>> {
        let vs = vertices
            .into_iter()
            .map(|v| self.vertex(v))
            .collect::<PyResult<Vec<u32>>>()?;
        Ok(skeleton::genealogical_branch_matrix(&self.0, &vs).rows())
    }

    /// Lattice positions after attaching i.i.d. displacements uniform on
    /// `[-L, L]^d \ {o}`.
    #[pyo3(signature = (d, seed, range=1))]
    fn positions(&self, d: usize, seed: u64, range: u32) -> PyResult<Vec<Vec<i32>>> {
        let mut rng = rng_for(seed, salt("py-displacements"), 0);
        let st =
            treegen::attach_displacements(self.0.clone(), d, range, &mut rng).map_err(value_err)?;
        Ok(st.positions().chunks(d).map(<[i32]>::to_vec).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Tree(num_vertices={}, height={})",
            self.0.num_vertices(),
            self.0.height()
        )
    }
}

/// Labelled shape of a branch matrix as text, or `None` when degenerate.
#[pyfunction]
fn shape_of(matrix: Vec<Vec<i64>>) -> PyResult<Option<String>> {
    let tau = BranchMatrix::from_rows(matrix).map_err(value_err)?;
    Ok(match skeleton::build_shape(&tau, 0.0).map_err(value_err)? {
        BuiltShape::Tree(t) => Some(t.shape().to_text()),
        BuiltShape::Empty { .. } => None,
    })
}

/// All labelled shapes with `k` leaves, as text.
#[pyfunction]
fn enumerate_shapes(k: usize) -> PyResult<Vec<String>> {
    Ok(skeleton::enumerate_shapes(k)
        .map_err(value_err)?
        .iter()
        .map(|s| s.to_text())
        .collect())
}

/// Number of labelled shapes with `k` leaves.
#[pyfunction]
fn count_shapes(k: usize) -> u128 {
    skeleton::count_shapes(k)
}

/// `P(T_m ≠ ∅)`.
#[pyfunction]
fn survival_probability(law: &OffspringLaw, m: u64) -> f64 {
    limitlaw::survival_probability(&law.0, m)
}

/// Exact `P(T_m ≠ ∅)` for the geometric law, as a fraction string.
#[pyfunction]
fn exact_survival_geometric(m: u64) -> String {
    limitlaw::exact_survival_geometric(m).to_string()
}

/// Limiting tail of the rescaled lifetime of a uniform vertex, for `t > 1`.
#[pyfunction]
fn lifetime_tail_limit(t: f64) -> PyResult<f64> {
    limitlaw::lifetime_tail_limit(t).map_err(value_err)
}

/// Limiting rescaled pair count with MRCA time in `[a, b]`.
#[pyfunction]
fn branch_time_limit_measure(t1: f64, t2: f64, a: f64, b: f64) -> PyResult<f64> {
    limitlaw::branch_time_limit_measure(t1, t2, a, b).map_err(value_err)
}

/// Exact summary of the lattice-tree ensemble with at most `max_edges` bonds.
#[pyfunction]
#[pyo3(signature = (d, range, z, max_edges))]
fn lattice_ensemble<'py>(
    py: Python<'py>,
    d: usize,
    range: u32,
    z: &str,
    max_edges: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let ens = Ensemble::new(d, range, parse_rational(z).map_err(value_err)?, max_edges)
        .map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("partition", ens.partition().to_string())?;
    out.set_item("edge_counts", ens.edge_counts())?;
    let means: Vec<String> = (0..=max_edges as u32)
        .map(|m| ens.generation_mean(m).to_string())
        .collect();
    out.set_item("generation_means", means)?;
    out.set_item("text", ens.to_text())?;
    Ok(out)
}

/// Experiment names accepted by `run_experiment`.
#[pyfunction]
fn experiments() -> Vec<&'static str> {
    Experiment::ALL.iter().map(|e| e.name()).collect()
}

/// Runs an experiment with defaults overlaid by a flat TOML document and
/// returns the record as a dict.
#[pyfunction]
#[pyo3(signature = (name, config=""))]
fn run_experiment<'py>(py: Python<'py>, name: &str, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let experiment = Experiment::from_str(name).map_err(value_err)?;
    let cfg = ExperimentConfig::from_toml(experiment, config).map_err(value_err)?;
    let output = py.detach(|| run(&cfg)).map_err(value_err)?;
    py.import("json")?
        .call_method1("loads", (output.record.to_json(),))
}

#[pymodule]
pub fn genskel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<OffspringLaw>()?;
    m.add_class::<Tree>()?;
    m.add_function(wrap_pyfunction!(shape_of, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_shapes, m)?)?;
    m.add_function(wrap_pyfunction!(count_shapes, m)?)?;
    m.add_function(wrap_pyfunction!(survival_probability, m)?)?;
    m.add_function(wrap_pyfunction!(exact_survival_geometric, m)?)?;
    m.add_function(wrap_pyfunction!(lifetime_tail_limit, m)?)?;
    m.add_function(wrap_pyfunction!(branch_time_limit_measure, m)?)?;
    m.add_function(wrap_pyfunction!(lattice_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(experiments, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
