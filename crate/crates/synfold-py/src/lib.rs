//! Python bindings: the main types and operations of the workbench behind
//! thin wrapper classes. Rationals cross the boundary as `"p/q"` strings so
//! nothing is ever rounded; domain errors surface as `ValueError` with the
//! library's stable error names in the message.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use synfold::derivation::{
    analyze_topology, apply_derivation, check_homomorphism, sd_to_graph, substitute, AnnotatedSd,
    DerivationScript, RelationSet, Term as RsTerm,
};
use synfold::knot::{
    apply_rmove, attempt_collapse, enumerate_applicable_moves, is_tricolorable, lackenby_bound,
    reduce_to_unknot_budgeted, writhe, KnotDiagram, DEFAULT_STATE_BUDGET,
};
use synfold::lgraph::{
    classify_occurrences, classify_walk, detect_cycle, dominates, immediately_dominates,
    is_ordered, single_mother_violations, LGraph, VertexId,
};
use synfold::mono::{
    bracketing as tree_bracketing, classify_steps, history_tree, is_fs_describable,
    segment_max_monotonic, GrowthHistory, PlainTree,
};
use synfold::rat::{format_rat, parse_rat};
use synfold::space::{
    are_separated, boundary, classify_space, make_ultrametric_field, metric_closure, metrize_step,
    neighborhood, triangle_census, DistanceMatrix as RsMatrix, NeighborhoodSpec, PointId,
};
use synfold::tree::{
    build_dendrogram, cophenetic_matrix, height_dominates, node_heights, xbar_matrix,
    Dendrogram as RsDendrogram, NodeId, XBarSpec,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rat_arg(s: &str) -> PyResult<synfold::Rat> {
    parse_rat(s).map_err(value_err)
}

/// Finite distance space over labelled points.
#[pyclass(name = "DistanceMatrix", skip_from_py_object)]
#[derive(Clone)]
struct PyMatrix {
    inner: RsMatrix,
}

#[pymethods]
impl PyMatrix {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyMatrix {
            inner: RsMatrix::from_json(s).map_err(value_err)?,
        })
    }

    /// Constant ultrametric field with `n` points at distance `k`.
    #[staticmethod]
    fn field(n: usize, k: &str) -> PyResult<Self> {
        Ok(PyMatrix {
            inner: make_ultrametric_field(n, &rat_arg(k)?).map_err(value_err)?,
        })
    }

    /// X-bar template matrix over {Spec, X, YP} with the given base.
    #[staticmethod]
    fn xbar(base: u32) -> Self {
        PyMatrix {
            inner: xbar_matrix(&XBarSpec { base }),
        }
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn points(&self) -> Vec<String> {
        self.inner.points().iter().map(|p| p.to_string()).collect()
    }

    fn distance(&self, x: &str, y: &str) -> PyResult<String> {
        self.inner
            .distance(&PointId::new(x), &PointId::new(y))
            .map(format_rat)
            .map_err(value_err)
    }

    /// Tightest class: NotSemimetric, Semimetric, Metric, or Ultrametric.
    fn classify(&self) -> String {
        classify_space(&self.inner).class.to_string()
    }

    /// Witness of the first failed inequality, if any.
    fn witness(&self) -> Option<String> {
        classify_space(&self.inner).witness.map(|w| w.to_string())
    }

    fn census(&self) -> BTreeMap<String, usize> {
        let t = triangle_census(&self.inner);
        BTreeMap::from([
            ("equilateral".to_string(), t.equilateral),
            (
                "isoscelesTopTwoEqual".to_string(),
                t.isosceles_top_two_equal,
            ),
            ("other".to_string(), t.other),
            ("total".to_string(), t.total),
        ])
    }

    fn closure(&self) -> Self {
        PyMatrix {
            inner: metric_closure(&self.inner),
        }
    }

    /// Pull two points to a strictly smaller distance and re-close.
    fn metrize(&self, x: &str, y: &str, new_d: &str) -> PyResult<Self> {
        Ok(PyMatrix {
            inner: metrize_step(
                &self.inner,
                &PointId::new(x),
                &PointId::new(y),
                &rat_arg(new_d)?,
            )
            .map_err(value_err)?,
        })
    }

    #[pyo3(signature = (center, radius, closed = true))]
    fn neighborhood(&self, center: &str, radius: &str, closed: bool) -> PyResult<Vec<String>> {
        let spec = NeighborhoodSpec {
            center: PointId::new(center),
            radius: rat_arg(radius)?,
            closed,
        };
        Ok(neighborhood(&self.inner, &spec)
            .map_err(value_err)?
            .iter()
            .map(|p| p.to_string())
            .collect())
    }

    #[pyo3(signature = (x, y, closed = true))]
    fn separated(&self, x: &str, y: &str, closed: bool) -> PyResult<Option<String>> {
        Ok(
            are_separated(&self.inner, &PointId::new(x), &PointId::new(y), closed)
                .map_err(value_err)?
                .as_ref()
                .map(format_rat),
        )
    }

    fn boundary(&self, subset: Vec<String>, eps: &str) -> PyResult<Vec<String>> {
        let subset = subset.into_iter().map(PointId::new).collect();
        Ok(boundary(&self.inner, &subset, &rat_arg(eps)?)
            .map_err(value_err)?
            .iter()
            .map(|p| p.to_string())
            .collect())
    }

    /// Build the dendrogram; fails on non-ultrametric matrices.
    fn dendrogram(&self) -> PyResult<PyDendrogram> {
        Ok(PyDendrogram {
            inner: build_dendrogram(&self.inner).map_err(value_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "DistanceMatrix({} points, {})",
            self.inner.len(),
            self.classify()
        )
    }
}

/// Height-annotated tree form of an ultrametric matrix.
#[pyclass(name = "Dendrogram", skip_from_py_object)]
#[derive(Clone)]
struct PyDendrogram {
    inner: RsDendrogram,
}

#[pymethods]
impl PyDendrogram {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyDendrogram {
            inner: RsDendrogram::from_json(s).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_dot(&self) -> String {
        self.inner.to_dot()
    }

    fn leaves(&self) -> Vec<String> {
        self.inner.leaves().iter().map(|p| p.to_string()).collect()
    }

    /// Lowest-common-ancestor height matrix; always ultrametric.
    fn cophenetic(&self) -> PyResult<PyMatrix> {
        Ok(PyMatrix {
            inner: cophenetic_matrix(&self.inner).map_err(value_err)?,
        })
    }

    /// Preorder node id -> height as a `p/q` string.
    fn heights(&self) -> BTreeMap<usize, String> {
        node_heights(&self.inner)
            .iter()
            .map(|(id, h)| (id.0, format_rat(h)))
            .collect()
    }

    /// Height-based domination between preorder node ids.
    fn dominates(&self, a: usize, b: usize) -> PyResult<bool> {
        height_dominates(&self.inner, NodeId(a), NodeId(b)).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Dendrogram({} leaves)", self.inner.leaves().len())
    }
}

/// Directed structural description with multidominance.
#[pyclass(name = "Graph", skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: LGraph,
}

#[pymethods]
impl PyGraph {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyGraph {
            inner: LGraph::from_json(s).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_dot(&self) -> String {
        self.inner.to_dot()
    }

    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    fn single_mother_violations(&self) -> Vec<String> {
        single_mother_violations(&self.inner)
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    fn classify_occurrences(&self) -> BTreeMap<String, String> {
        classify_occurrences(&self.inner)
            .iter()
            .map(|(v, c)| (v.to_string(), c.to_string()))
            .collect()
    }

    fn cycle(&self) -> Option<Vec<String>> {
        detect_cycle(&self.inner).map(|c| c.iter().map(|v| v.to_string()).collect())
    }

    /// Path, Trail, Walk, or Invalid.
    fn walk_class(&self, seq: Vec<String>) -> String {
        let seq: Vec<VertexId> = seq.into_iter().map(VertexId::new).collect();
        classify_walk(&self.inner, &seq).to_string()
    }

    fn immediately_dominates(&self, a: &str, b: &str) -> PyResult<bool> {
        immediately_dominates(&self.inner, &VertexId::new(a), &VertexId::new(b)).map_err(value_err)
    }

    fn dominates(&self, a: &str, b: &str) -> PyResult<bool> {
        dominates(&self.inner, &VertexId::new(a), &VertexId::new(b)).map_err(value_err)
    }

    fn is_ordered(&self, a: &str, b: &str) -> PyResult<bool> {
        is_ordered(&self.inner, &VertexId::new(a), &VertexId::new(b)).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph({} vertices, {} edges)",
            self.inner.vertex_count(),
            self.inner.edge_count()
        )
    }
}

/// Tokenized sentence with coreference addresses.
#[pyclass(name = "Sentence", skip_from_py_object)]
#[derive(Clone)]
struct PySentence {
    inner: AnnotatedSd,
}

#[pymethods]
impl PySentence {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PySentence {
            inner: AnnotatedSd::from_json(s).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn tokens(&self) -> Vec<String> {
        self.inner.tokens().to_vec()
    }

    /// Folding / self-intersection report.
    fn analyze<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
        use pyo3::types::PyDictMethods;
        let report = analyze_topology(&self.inner).map_err(value_err)?;
        let dict = pyo3::types::PyDict::new(py);
        dict.set_item("foldings", report.foldings)?;
        let intersections: BTreeMap<String, usize> = report
            .self_intersections
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        dict.set_item("selfIntersections", intersections)?;
        dict.set_item("totalIntersections", report.total_intersections)?;
        dict.set_item("classification", report.classification)?;
        Ok(dict)
    }

    /// Pre-collapse occurrence graph.
    fn to_graph(&self) -> PyResult<PyGraph> {
        Ok(PyGraph {
            inner: sd_to_graph(&self.inner).map_err(value_err)?,
        })
    }
}

/// Rooted labeled tree with open slots at the frontier.
#[pyclass(name = "Term", skip_from_py_object)]
#[derive(Clone)]
struct PyTerm {
    inner: RsTerm,
}

#[pymethods]
impl PyTerm {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyTerm {
            inner: RsTerm::from_json(s).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn bracketing(&self) -> String {
        self.inner.bracketing()
    }

    fn open_slots(&self) -> Vec<String> {
        self.inner
            .open_slots()
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    /// Substitution: works iff the slot label equals the term's root label.
    fn substitute(&self, slot: &str, term: &PyTerm) -> PyResult<PyTerm> {
        Ok(PyTerm {
            inner: substitute(&self.inner, slot, &term.inner).map_err(value_err)?,
        })
    }
}

/// Signed Gauss code knot diagram.
#[pyclass(name = "Knot", skip_from_py_object)]
#[derive(Clone)]
struct PyKnot {
    inner: KnotDiagram,
}

#[pymethods]
impl PyKnot {
    #[staticmethod]
    fn parse(code: &str) -> PyResult<Self> {
        Ok(PyKnot {
            inner: KnotDiagram::parse(code).map_err(value_err)?,
        })
    }

    fn code(&self) -> String {
        self.inner.to_string()
    }

    fn crossings(&self) -> usize {
        self.inner.crossing_count()
    }

    fn writhe(&self) -> i64 {
        writhe(&self.inner)
    }

    fn tricolorable(&self) -> bool {
        is_tricolorable(&self.inner)
    }

    /// Applicable Reidemeister moves, rendered.
    fn moves(&self) -> Vec<String> {
        enumerate_applicable_moves(&self.inner)
            .iter()
            .map(|m| m.to_string())
            .collect()
    }

    /// Apply the move at the given enumeration index.
    fn apply_move(&self, index: usize) -> PyResult<PyKnot> {
        let moves = enumerate_applicable_moves(&self.inner);
        let m = moves
            .get(index)
            .ok_or_else(|| value_err(format!("move index {index} out of range")))?;
        Ok(PyKnot {
            inner: apply_rmove(&self.inner, m).map_err(value_err)?,
        })
    }

    /// Shortest reduction to the empty diagram within the bounds, if the
    /// search finds one.
    #[pyo3(signature = (max_moves = 12, max_crossings = 8, max_states = DEFAULT_STATE_BUDGET))]
    fn reduce(
        &self,
        max_moves: usize,
        max_crossings: usize,
        max_states: usize,
    ) -> Option<Vec<String>> {
        reduce_to_unknot_budgeted(&self.inner, max_moves, max_crossings, max_states)
            .map(|moves| moves.iter().map(|m| m.to_string()).collect())
    }

    /// Worst-case Reidemeister move bound (236·c)^11, as a decimal string.
    fn worst_case_bound(&self) -> String {
        lackenby_bound(self.inner.crossing_count().max(1)).to_string()
    }

    /// Identify two arcs. Always raises: the diagram model has no
    /// representation for an intersection.
    fn collapse(&self, arc_a: usize, arc_b: usize) -> PyResult<()> {
        attempt_collapse(&self.inner, arc_a, arc_b).map_err(value_err)
    }

    fn same_diagram(&self, other: &PyKnot) -> bool {
        self.inner.same_diagram(&other.inner)
    }

    fn __repr__(&self) -> String {
        format!("Knot({})", self.inner)
    }
}

/// Classify growth-history steps given as the history JSON op list; returns
/// the step classes and the bracketing of the tree the history builds.
#[pyfunction]
fn classify_history(s: &str) -> PyResult<(Vec<String>, String)> {
    let h = GrowthHistory::from_json(s).map_err(value_err)?;
    let steps = classify_steps(&h).iter().map(|c| c.to_string()).collect();
    Ok((steps, tree_bracketing(&history_tree(&h))))
}

/// Bracketing of a plain tree given as nested-list JSON.
#[pyfunction]
fn bracketing(tree_json: &str) -> PyResult<String> {
    Ok(tree_bracketing(
        &PlainTree::from_json(tree_json).map_err(value_err)?,
    ))
}

/// Finite-state describability of a plain tree.
#[pyfunction]
fn fs_describable(tree_json: &str) -> PyResult<bool> {
    is_fs_describable(&PlainTree::from_json(tree_json).map_err(value_err)?).map_err(value_err)
}

/// Maximal finite-state segments of a plain tree, as bracketings.
#[pyfunction]
fn segments(tree_json: &str) -> PyResult<Vec<String>> {
    let t = PlainTree::from_json(tree_json).map_err(value_err)?;
    Ok(segment_max_monotonic(&t)
        .map_err(value_err)?
        .segments
        .iter()
        .map(tree_bracketing)
        .collect())
}

/// Relation-preservation check over relation-set JSON files.
#[pyfunction]
fn homomorphism(src_json: &str, dst_json: &str, map: BTreeMap<String, String>) -> PyResult<bool> {
    let src = RelationSet::from_json(src_json).map_err(value_err)?;
    let dst = RelationSet::from_json(dst_json).map_err(value_err)?;
    check_homomorphism(&src, &dst, &map).map_err(value_err)
}

/// Replay a derivation script; returns (step index, label, class) triples.
#[pyfunction]
#[pyo3(signature = (script_json, field, graph, term = None))]
fn run_script(
    script_json: &str,
    field: &PyMatrix,
    graph: &PyGraph,
    term: Option<&PyTerm>,
) -> PyResult<Vec<(usize, String, String)>> {
    let script = DerivationScript::from_json(script_json).map_err(value_err)?;
    let snapshots = apply_derivation(
        &script,
        &field.inner,
        &graph.inner,
        term.map(|t| t.inner.clone()),
    )
    .map_err(value_err)?;
    Ok(snapshots
        .iter()
        .map(|s| (s.step_index, s.label.clone(), s.class.to_string()))
        .collect())
}

/// Write the bundled example corpus into a directory.
#[pyfunction]
fn bundle_examples(dir: PathBuf) -> PyResult<Vec<String>> {
    Ok(synfold::fixtures::bundle_examples(&dir)
        .map_err(value_err)?
        .iter()
        .map(|p| p.display().to_string())
        .collect())
}

#[pymodule]
fn synfold_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatrix>()?;
    m.add_class::<PyDendrogram>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PySentence>()?;
    m.add_class::<PyTerm>()?;
    m.add_class::<PyKnot>()?;
    m.add_function(wrap_pyfunction!(classify_history, m)?)?;
    m.add_function(wrap_pyfunction!(bracketing, m)?)?;
    m.add_function(wrap_pyfunction!(fs_describable, m)?)?;
    m.add_function(wrap_pyfunction!(segments, m)?)?;
    m.add_function(wrap_pyfunction!(homomorphism, m)?)?;
    m.add_function(wrap_pyfunction!(run_script, m)?)?;
    m.add_function(wrap_pyfunction!(bundle_examples, m)?)?;
    Ok(())
}
