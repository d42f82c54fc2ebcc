//! Directed graphs as structural descriptions.
//!
//! Vertices carry an address into a workspace field; nothing stops two
//! edges from pointing at the same vertex, so multidominance is
//! representable directly and the Single Mother Condition becomes an audit
//! ([`single_mother_violations`]) instead of an axiom. Dominance is
//! directional; traversal is not: a walk may ride an edge against its
//! direction, which is what lets a collapsed chain be visited as a trail.
//!
//! Cycles are permitted at construction (identification of occurrences can
//! create them) and reported by [`detect_cycle`]; dominance queries fall
//! back to plain reachability and may report mutual domination on cyclic
//! graphs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::PointId;

/// Unique identifier of a vertex within one graph.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(String);

impl VertexId {
    pub fn new(id: impl Into<String>) -> Self {
        VertexId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VertexId {
    fn from(s: &str) -> Self {
        VertexId::new(s)
    }
}

/// Address-bearing vertex. `predicative` is input data: the copy criterion
/// presupposes knowing which vertices are predicative expressions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub vid: VertexId,
    pub address: PointId,
    pub form: String,
    pub predicative: bool,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("UnknownVertex: {0} is not a vertex of this graph")]
    UnknownVertex(VertexId),
    #[error("DuplicateVertex: vid {0} appears more than once")]
    DuplicateVertex(VertexId),
    #[error("SelfLoop: edge ({0}, {0}) is not allowed")]
    SelfLoop(VertexId),
    #[error("EmptyVid: vertex ids must be non-empty")]
    EmptyVid,
    #[error("NothingToCollapse: fewer than two vertices carry address {0}")]
    NothingToCollapse(PointId),
    #[error("JsonError: {0}")]
    Json(String),
}

/// Directed graph over [`Vertex`] values; no self-loops, multidominance
/// allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LGraph {
    vertices: BTreeMap<VertexId, Vertex>,
    edges: BTreeSet<(VertexId, VertexId)>,
}

impl LGraph {
    pub fn new(
        vertices: Vec<Vertex>,
        edges: Vec<(VertexId, VertexId)>,
    ) -> Result<Self, GraphError> {
        let mut map = BTreeMap::new();
        for v in vertices {
            if v.vid.as_str().is_empty() {
                return Err(GraphError::EmptyVid);
            }
            let vid = v.vid.clone();
            if map.insert(vid.clone(), v).is_some() {
                return Err(GraphError::DuplicateVertex(vid));
            }
        }
        let mut set = BTreeSet::new();
        for (from, to) in edges {
            if from == to {
                return Err(GraphError::SelfLoop(from));
            }
            for end in [&from, &to] {
                if !map.contains_key(end) {
                    return Err(GraphError::UnknownVertex(end.clone()));
                }
            }
            set.insert((from, to));
        }
        Ok(LGraph {
            vertices: map,
            edges: set,
        })
    }

    pub fn empty() -> Self {
        LGraph {
            vertices: BTreeMap::new(),
            edges: BTreeSet::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Vertices in vid order.
    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.values()
    }

    pub fn vertex(&self, vid: &VertexId) -> Option<&Vertex> {
        self.vertices.get(vid)
    }

    fn require(&self, vid: &VertexId) -> Result<&Vertex, GraphError> {
        self.vertex(vid)
            .ok_or_else(|| GraphError::UnknownVertex(vid.clone()))
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = &(VertexId, VertexId)> {
        self.edges.iter()
    }

    pub fn has_edge(&self, from: &VertexId, to: &VertexId) -> bool {
        self.edges.contains(&(from.clone(), to.clone()))
    }

    /// Vertices carrying the given address, in vid order.
    pub fn vertices_with_address(&self, addr: &PointId) -> Vec<&Vertex> {
        self.vertices
            .values()
            .filter(|v| &v.address == addr)
            .collect()
    }

    /// Merges all vertices with address `addr` into the one with the
    /// smallest vid, rewiring every incident edge onto it.
    ///
    /// Duplicate edges disappear into the set representation, and any edge
    /// that becomes a self-loop through the merge is dropped: the
    /// identified occurrence does not dominate itself. The survivor keeps
    /// the representative's form and predicative flag. Returns the merged
    /// graph and the vids that were folded in.
    pub fn merge_by_address(&self, addr: &PointId) -> Result<(LGraph, Vec<VertexId>), GraphError> {
        let group: Vec<VertexId> = self
            .vertices_with_address(addr)
            .iter()
            .map(|v| v.vid.clone())
            .collect();
        if group.len() < 2 {
            return Err(GraphError::NothingToCollapse(addr.clone()));
        }
        let keep = group[0].clone();
        let folded: BTreeSet<&VertexId> = group.iter().skip(1).collect();
        let vertices = self
            .vertices
            .values()
            .filter(|v| !folded.contains(&v.vid))
            .cloned()
            .collect();
        let rename = |vid: &VertexId| {
            if folded.contains(vid) {
                keep.clone()
            } else {
                vid.clone()
            }
        };
        let edges = self
            .edges
            .iter()
            .map(|(from, to)| (rename(from), rename(to)))
            .filter(|(from, to)| from != to)
            .collect();
        let merged = LGraph::new(vertices, edges)?;
        Ok((merged, group))
    }

    /// Serializes to the graph file format, vertices and edges sorted.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphFile::from(self))
            .expect("graph serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, GraphError> {
        let file: GraphFile =
            serde_json::from_str(s).map_err(|e| GraphError::Json(e.to_string()))?;
        file.try_into()
    }

    /// Deterministic DOT rendering; multidominant vertices simply show
    /// several incoming arrows.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph sd {\n");
        for v in self.vertices.values() {
            let shape = if v.predicative { "ellipse" } else { "box" };
            let _ = writeln!(
                out,
                "  \"{}\" [label=\"{}\\n@{}\", shape={shape}];",
                v.vid, v.form, v.address
            );
        }
        for (from, to) in &self.edges {
            let _ = writeln!(out, "  \"{from}\" -> \"{to}\";");
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    vertices: Vec<VertexFile>,
    edges: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct VertexFile {
    vid: String,
    address: String,
    form: String,
    predicative: bool,
}

impl From<&LGraph> for GraphFile {
    fn from(g: &LGraph) -> Self {
        GraphFile {
            vertices: g
                .vertices
                .values()
                .map(|v| VertexFile {
                    vid: v.vid.to_string(),
                    address: v.address.to_string(),
                    form: v.form.clone(),
                    predicative: v.predicative,
                })
                .collect(),
            edges: g
                .edges
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }
}

impl TryFrom<GraphFile> for LGraph {
    type Error = GraphError;

    fn try_from(f: GraphFile) -> Result<Self, GraphError> {
        LGraph::new(
            f.vertices
                .into_iter()
                .map(|v| Vertex {
                    vid: VertexId::new(v.vid),
                    address: PointId::new(v.address),
                    form: v.form,
                    predicative: v.predicative,
                })
                .collect(),
            f.edges
                .into_iter()
                .map(|(a, b)| (VertexId::new(a), VertexId::new(b)))
                .collect(),
        )
    }
}

/// True iff the edge (v1, v2) exists. Directional.
pub fn immediately_dominates(g: &LGraph, v1: &VertexId, v2: &VertexId) -> Result<bool, GraphError> {
    g.require(v1)?;
    g.require(v2)?;
    Ok(g.has_edge(v1, v2))
}

/// True iff a directed walk leads from `v1` to `v2`. Irreflexive: no vertex
/// transitively dominates itself, cycles notwithstanding.
pub fn dominates(g: &LGraph, v1: &VertexId, v2: &VertexId) -> Result<bool, GraphError> {
    g.require(v1)?;
    g.require(v2)?;
    if v1 == v2 {
        return Ok(false);
    }
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([v1.clone()]);
    while let Some(u) = queue.pop_front() {
        for (from, to) in &g.edges {
            if from == &u && seen.insert(to.clone()) {
                if to == v2 {
                    return Ok(true);
                }
                queue.push_back(to.clone());
            }
        }
    }
    Ok(false)
}

/// True iff one of the two vertices dominates the other, immediately or
/// transitively. Order is via dominance only, so siblings are unordered.
pub fn is_ordered(g: &LGraph, v1: &VertexId, v2: &VertexId) -> Result<bool, GraphError> {
    Ok(dominates(g, v1, v2)? || dominates(g, v2, v1)?)
}

/// Strongest classification of a vertex sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WalkClass {
    Path,
    Trail,
    Walk,
    Invalid,
}

impl fmt::Display for WalkClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WalkClass::Path => "Path",
            WalkClass::Trail => "Trail",
            WalkClass::Walk => "Walk",
            WalkClass::Invalid => "Invalid",
        };
        f.write_str(s)
    }
}

/// Classifies a vertex sequence: `Path` if no vertex repeats, `Trail` if no
/// edge repeats but some vertex does, `Walk` otherwise, `Invalid` when some
/// consecutive pair is not connected by an edge (in either direction) or a
/// vertex is unknown.
///
/// Each step must consume an edge between its endpoints; a step may ride an
/// edge against its direction. With at most one edge per direction, a trail
/// needs no more steps between two vertices than there are edges between
/// them.
pub fn classify_walk(g: &LGraph, seq: &[VertexId]) -> WalkClass {
    if seq.is_empty() {
        return WalkClass::Invalid;
    }
    for v in seq {
        if g.vertex(v).is_none() {
            return WalkClass::Invalid;
        }
    }
    let mut step_count: BTreeMap<(VertexId, VertexId), usize> = BTreeMap::new();
    for pair in seq.windows(2) {
        let (u, v) = (&pair[0], &pair[1]);
        if !g.has_edge(u, v) && !g.has_edge(v, u) {
            return WalkClass::Invalid;
        }
        let key = if u <= v {
            (u.clone(), v.clone())
        } else {
            (v.clone(), u.clone())
        };
        *step_count.entry(key).or_default() += 1;
    }
    let vertex_repeats = {
        let mut seen = BTreeSet::new();
        seq.iter().any(|v| !seen.insert(v.clone()))
    };
    if !vertex_repeats {
        return WalkClass::Path;
    }
    let edge_repeats = step_count.iter().any(|((u, v), &count)| {
        let available = usize::from(g.has_edge(u, v)) + usize::from(g.has_edge(v, u));
        count > available
    });
    if edge_repeats {
        WalkClass::Walk
    } else {
        WalkClass::Trail
    }
}

/// Vertices with two or more mothers.
pub fn single_mother_violations(g: &LGraph) -> BTreeSet<VertexId> {
    let mut indegree: BTreeMap<&VertexId, usize> = BTreeMap::new();
    for (_, to) in g.edges() {
        *indegree.entry(to).or_default() += 1;
    }
    indegree
        .into_iter()
        .filter(|(_, d)| *d >= 2)
        .map(|(v, _)| v.clone())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OccurrenceClass {
    /// Immediately dominated by at least two distinct predicative vertices.
    Copy,
    /// Shares its surface form with a vertex at a different address.
    Repetition,
    Single,
}

impl fmt::Display for OccurrenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OccurrenceClass::Copy => "Copy",
            OccurrenceClass::Repetition => "Repetition",
            OccurrenceClass::Single => "Single",
        };
        f.write_str(s)
    }
}

/// Copy / repetition / single verdict for every vertex; Copy takes
/// precedence over Repetition.
pub fn classify_occurrences(g: &LGraph) -> BTreeMap<VertexId, OccurrenceClass> {
    let mut out = BTreeMap::new();
    for v in g.vertices() {
        let predicative_mothers = g
            .edges()
            .filter(|(from, to)| to == &v.vid && g.vertex(from).is_some_and(|m| m.predicative))
            .map(|(from, _)| from.clone())
            .collect::<BTreeSet<_>>();
        let class = if predicative_mothers.len() >= 2 {
            OccurrenceClass::Copy
        } else if g
            .vertices()
            .any(|w| w.vid != v.vid && w.form == v.form && w.address != v.address)
        {
            OccurrenceClass::Repetition
        } else {
            OccurrenceClass::Single
        };
        out.insert(v.vid.clone(), class);
    }
    out
}

/// Finds a directed cycle if one exists, returned as the vertices along it.
/// Deterministic: depth-first in vid order.
pub fn detect_cycle(g: &LGraph) -> Option<Vec<VertexId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Gray,
        Black,
    }

    fn visit(
        g: &LGraph,
        u: &VertexId,
        marks: &mut BTreeMap<VertexId, Mark>,
        stack: &mut Vec<VertexId>,
    ) -> Option<Vec<VertexId>> {
        marks.insert(u.clone(), Mark::Gray);
        stack.push(u.clone());
        for (from, to) in g.edges() {
            if from != u {
                continue;
            }
            match marks[to] {
                Mark::Gray => {
                    let start = stack.iter().position(|v| v == to).expect("gray on stack");
                    return Some(stack[start..].to_vec());
                }
                Mark::White => {
                    if let Some(cycle) = visit(g, to, marks, stack) {
                        return Some(cycle);
                    }
                }
                Mark::Black => {}
            }
        }
        stack.pop();
        marks.insert(u.clone(), Mark::Black);
        None
    }

    let ids: Vec<VertexId> = g.vertices().map(|v| v.vid.clone()).collect();
    let mut marks: BTreeMap<VertexId, Mark> =
        ids.iter().map(|v| (v.clone(), Mark::White)).collect();
    for v in &ids {
        if marks[v] == Mark::White {
            let mut stack = Vec::new();
            if let Some(cycle) = visit(g, v, &mut marks, &mut stack) {
                return Some(cycle);
            }
        }
    }
    None
}
