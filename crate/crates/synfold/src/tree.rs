//! Dendrograms: the unique tree form of an ultrametric matrix.
//!
//! An ultrametric matrix determines a height-annotated tree (merge heights =
//! pairwise distances via lowest common ancestors), and the tree determines
//! the matrix back. [`build_dendrogram`] performs the agglomerative
//! direction, [`cophenetic_matrix`] the other; the pair is inverse up to
//! child ordering, which the data model treats as irrelevant.
//!
//! Also here: the X-bar distance template over {Spec, X, YP} and the
//! height-based domination relation (descend freely, go up at most once).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rat::{format_rat, parse_rat, rat, Rat};
use crate::space::{classify_space, ClassWitness, DistanceMatrix, PointId, SpaceClass, SpaceError};

/// Rooted tree with heights on internal nodes; leaves sit at height 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dendrogram {
    Leaf {
        label: PointId,
    },
    Node {
        height: Rat,
        children: Vec<Dendrogram>,
    },
}

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("NotUltrametric: matrix classifies {class}{witness}")]
    NotUltrametric { class: SpaceClass, witness: String },
    #[error("UnknownNode: no node #{0} in this tree")]
    UnknownNode(usize),
    #[error("MalformedTree: {0}")]
    MalformedTree(String),
    #[error("JsonError: {0}")]
    Json(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

fn not_ultrametric(class: SpaceClass, witness: Option<ClassWitness>) -> TreeError {
    TreeError::NotUltrametric {
        class,
        witness: witness.map(|w| format!("; {w}")).unwrap_or_default(),
    }
}

impl Dendrogram {
    pub fn leaf(label: impl Into<PointId>) -> Self {
        Dendrogram::Leaf {
            label: label.into(),
        }
    }

    pub fn node(height: Rat, children: Vec<Dendrogram>) -> Self {
        Dendrogram::Node { height, children }
    }

    /// Height of this node: 0 for leaves.
    pub fn height(&self) -> Rat {
        match self {
            Dendrogram::Leaf { .. } => Rat::zero(),
            Dendrogram::Node { height, .. } => height.clone(),
        }
    }

    /// Leaf labels in left-to-right order.
    pub fn leaves(&self) -> Vec<PointId> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<PointId>) {
        match self {
            Dendrogram::Leaf { label } => out.push(label.clone()),
            Dendrogram::Node { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Checks the structural invariants: positive heights strictly
    /// decreasing downward, at least two children per internal node, and
    /// unique non-empty leaf labels.
    pub fn validate(&self) -> Result<(), TreeError> {
        let mut seen = BTreeMap::new();
        for label in self.leaves() {
            if label.as_str().is_empty() {
                return Err(TreeError::MalformedTree("empty leaf label".into()));
            }
            if seen.insert(label.clone(), ()).is_some() {
                return Err(TreeError::MalformedTree(format!(
                    "leaf label {label} appears more than once"
                )));
            }
        }
        self.validate_heights(None)
    }

    fn validate_heights(&self, parent: Option<&Rat>) -> Result<(), TreeError> {
        match self {
            Dendrogram::Leaf { .. } => Ok(()),
            Dendrogram::Node { height, children } => {
                if height <= &Rat::zero() {
                    return Err(TreeError::MalformedTree(format!(
                        "internal node height {} is not positive",
                        format_rat(height)
                    )));
                }
                if let Some(p) = parent {
                    if height >= p {
                        return Err(TreeError::MalformedTree(format!(
                            "child height {} does not decrease below parent height {}",
                            format_rat(height),
                            format_rat(p)
                        )));
                    }
                }
                if children.len() < 2 {
                    return Err(TreeError::MalformedTree(
                        "internal node with fewer than two children".into(),
                    ));
                }
                for c in children {
                    c.validate_heights(Some(height))?;
                }
                Ok(())
            }
        }
    }

    /// Canonical form: children sorted recursively by their smallest leaf
    /// label. Two dendrograms are the same tree up to child reordering iff
    /// their canonical forms are equal.
    pub fn canonicalize(&self) -> Dendrogram {
        match self {
            Dendrogram::Leaf { label } => Dendrogram::leaf(label.clone()),
            Dendrogram::Node { height, children } => {
                let mut kids: Vec<Dendrogram> = children.iter().map(|c| c.canonicalize()).collect();
                kids.sort_by_key(|k| k.min_leaf());
                Dendrogram::node(height.clone(), kids)
            }
        }
    }

    fn min_leaf(&self) -> PointId {
        self.leaves().into_iter().min().expect("tree has a leaf")
    }

    /// Nodes in preorder: `(id, height, leaf label if any)`. Ids from this
    /// listing address nodes in [`height_dominates`] and [`node_heights`].
    pub fn preorder(&self) -> Vec<(NodeId, Rat, Option<PointId>)> {
        self.flatten()
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (NodeId(i), n.height.clone(), n.label.clone()))
            .collect()
    }

    fn flatten(&self) -> FlatTree {
        let mut flat = FlatTree { nodes: Vec::new() };
        self.flatten_into(None, &mut flat);
        flat
    }

    fn flatten_into(&self, parent: Option<usize>, flat: &mut FlatTree) {
        let id = flat.nodes.len();
        flat.nodes.push(FlatNode {
            parent,
            height: self.height(),
            label: match self {
                Dendrogram::Leaf { label } => Some(label.clone()),
                Dendrogram::Node { .. } => None,
            },
        });
        if let Dendrogram::Node { children, .. } = self {
            for c in children {
                c.flatten_into(Some(id), flat);
            }
        }
    }

    /// Serializes to the dendrogram file format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TreeFile::from(self))
            .expect("dendrogram serialization cannot fail")
    }

    /// Parses and validates the dendrogram file format.
    pub fn from_json(s: &str) -> Result<Self, TreeError> {
        let file: TreeFile = serde_json::from_str(s).map_err(|e| TreeError::Json(e.to_string()))?;
        let tree: Dendrogram = file.try_into()?;
        tree.validate()?;
        Ok(tree)
    }

    /// Deterministic DOT rendering (children in canonical order).
    pub fn to_dot(&self) -> String {
        let canon = self.canonicalize();
        let flat = canon.flatten();
        let mut out = String::from("digraph dendrogram {\n");
        for (i, n) in flat.nodes.iter().enumerate() {
            match &n.label {
                Some(label) => {
                    let _ = writeln!(out, "  n{i} [label=\"{label}\", shape=box];");
                }
                None => {
                    let _ = writeln!(out, "  n{i} [label=\"{}\"];", format_rat(&n.height));
                }
            }
        }
        for (i, n) in flat.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                let _ = writeln!(out, "  n{p} -> n{i};");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Preorder index of a node within its dendrogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeId(pub usize);

struct FlatNode {
    parent: Option<usize>,
    height: Rat,
    label: Option<PointId>,
}

struct FlatTree {
    nodes: Vec<FlatNode>,
}

impl FlatTree {
    fn depth(&self, mut i: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.nodes[i].parent {
            i = p;
            d += 1;
        }
        d
    }

    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        let (mut da, mut db) = (self.depth(a), self.depth(b));
        while da > db {
            a = self.nodes[a].parent.expect("depth accounted");
            da -= 1;
        }
        while db > da {
            b = self.nodes[b].parent.expect("depth accounted");
            db -= 1;
        }
        while a != b {
            a = self.nodes[a].parent.expect("roots meet");
            b = self.nodes[b].parent.expect("roots meet");
        }
        a
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TreeFile {
    Leaf {
        leaf: String,
    },
    Node {
        height: String,
        children: Vec<TreeFile>,
    },
}

impl From<&Dendrogram> for TreeFile {
    fn from(t: &Dendrogram) -> Self {
        match t {
            Dendrogram::Leaf { label } => TreeFile::Leaf {
                leaf: label.to_string(),
            },
            Dendrogram::Node { height, children } => TreeFile::Node {
                height: format_rat(height),
                children: children.iter().map(TreeFile::from).collect(),
            },
        }
    }
}

impl TryFrom<TreeFile> for Dendrogram {
    type Error = TreeError;

    fn try_from(f: TreeFile) -> Result<Self, TreeError> {
        match f {
            TreeFile::Leaf { leaf } => Ok(Dendrogram::leaf(PointId::new(leaf))),
            TreeFile::Node { height, children } => {
                let height = parse_rat(&height).map_err(TreeError::MalformedTree)?;
                let children = children
                    .into_iter()
                    .map(Dendrogram::try_from)
                    .collect::<Result<_, _>>()?;
                Ok(Dendrogram::node(height, children))
            }
        }
    }
}

/// Base distance for the X-bar template.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct XBarSpec {
    pub base: u32,
}

/// Three-point matrix over {Spec, X, YP}: the specifier sits at `i + 2` from
/// both the head and its complement, the head/complement pair at `i + 1`.
/// Ultrametric for every base, and its only triangle is isosceles, never
/// equilateral.
pub fn xbar_matrix(spec: &XBarSpec) -> DistanceMatrix {
    let far = rat(i64::from(spec.base) + 2);
    let near = rat(i64::from(spec.base) + 1);
    DistanceMatrix::new(
        vec![PointId::new("Spec"), PointId::new("X"), PointId::new("YP")],
        vec![
            vec![rat(0), far.clone(), far.clone()],
            vec![far.clone(), rat(0), near.clone()],
            vec![far, near, rat(0)],
        ],
    )
    .expect("template matrix is well-formed")
}

/// Agglomerative construction of the unique dendrogram of an ultrametric
/// matrix.
///
/// Repeatedly merges everything at the current minimal inter-cluster
/// distance in one step; ultrametricity makes equal-distance cluster groups
/// cliques, so the simultaneous multi-child merge is well defined and the
/// result is unique up to child order.
pub fn build_dendrogram(m: &DistanceMatrix) -> Result<Dendrogram, TreeError> {
    let c = classify_space(m);
    if c.class != SpaceClass::Ultrametric {
        return Err(not_ultrametric(c.class, c.witness));
    }
    // Each cluster keeps a representative point index; in an ultrametric
    // space the inter-cluster distance does not depend on the choice.
    let mut clusters: Vec<(usize, Dendrogram)> = m
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| (i, Dendrogram::leaf(p.clone())))
        .collect();

    while clusters.len() > 1 {
        let delta = clusters
            .iter()
            .enumerate()
            .flat_map(|(a, (ra, _))| {
                clusters
                    .iter()
                    .skip(a + 1)
                    .map(move |(rb, _)| m.at(*ra, *rb).clone())
            })
            .min()
            .expect("at least two clusters");

        // Group clusters into components of the distance-delta graph; in an
        // ultrametric space these components are cliques.
        let mut group_of: Vec<usize> = (0..clusters.len()).collect();
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                if m.at(clusters[a].0, clusters[b].0) == &delta {
                    let (ga, gb) = (group_of[a], group_of[b]);
                    let target = ga.min(gb);
                    for g in group_of.iter_mut() {
                        if *g == ga || *g == gb {
                            *g = target;
                        }
                    }
                }
            }
        }

        let mut merged: BTreeMap<usize, Vec<(usize, Dendrogram)>> = BTreeMap::new();
        for (slot, cluster) in group_of.iter().zip(clusters) {
            merged.entry(*slot).or_default().push(cluster);
        }
        clusters = merged
            .into_values()
            .map(|members| {
                if members.len() == 1 {
                    members.into_iter().next().expect("one member")
                } else {
                    let rep = members[0].0;
                    let kids = members.into_iter().map(|(_, t)| t).collect();
                    (rep, Dendrogram::node(delta.clone(), kids))
                }
            })
            .collect();
    }

    Ok(clusters
        .into_iter()
        .next()
        .expect("one cluster remains")
        .1
        .canonicalize())
}

/// Matrix of lowest-common-ancestor heights over the tree's leaves, in
/// lexicographic point order. Always classifies ultrametric.
pub fn cophenetic_matrix(t: &Dendrogram) -> Result<DistanceMatrix, TreeError> {
    t.validate()?;
    let mut labels = t.leaves();
    labels.sort();
    let index: BTreeMap<&PointId, usize> = labels.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let n = labels.len();
    let mut d = vec![vec![Rat::zero(); n]; n];
    fill_lca_heights(t, &index, &mut d);
    Ok(DistanceMatrix::new(labels, d)?)
}

/// Returns the leaf index set of `t`, writing `height(t)` for every pair of
/// leaves split across different children.
fn fill_lca_heights(
    t: &Dendrogram,
    index: &BTreeMap<&PointId, usize>,
    d: &mut [Vec<Rat>],
) -> Vec<usize> {
    match t {
        Dendrogram::Leaf { label } => vec![index[label]],
        Dendrogram::Node { height, children } => {
            let sets: Vec<Vec<usize>> = children
                .iter()
                .map(|c| fill_lca_heights(c, index, d))
                .collect();
            for (a, sa) in sets.iter().enumerate() {
                for sb in sets.iter().skip(a + 1) {
                    for &x in sa {
                        for &y in sb {
                            d[x][y] = height.clone();
                            d[y][x] = height.clone();
                        }
                    }
                }
            }
            sets.into_iter().flatten().collect()
        }
    }
}

/// Height-based domination: `a` dominates `b` iff `a` sits at least as high
/// as `b` and a connecting walk descends except for at most one upward step.
///
/// In a tree the unique simple path from `a` to `b` climbs to their lowest
/// common ancestor and descends from there, so the walk condition reduces to
/// the climb being at most one edge. Reflexive, and satisfied by the root
/// against every node. Node ids are preorder indices (see
/// [`Dendrogram::preorder`]).
pub fn height_dominates(t: &Dendrogram, a: NodeId, b: NodeId) -> Result<bool, TreeError> {
    let flat = t.flatten();
    for id in [a, b] {
        if id.0 >= flat.nodes.len() {
            return Err(TreeError::UnknownNode(id.0));
        }
    }
    if flat.nodes[a.0].height < flat.nodes[b.0].height {
        return Ok(false);
    }
    let lca = flat.lca(a.0, b.0);
    Ok(flat.depth(a.0) - flat.depth(lca) <= 1)
}

/// Heights of all nodes keyed by preorder id; leaves map to 0.
pub fn node_heights(t: &Dendrogram) -> BTreeMap<NodeId, Rat> {
    t.flatten()
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (NodeId(i), n.height.clone()))
        .collect()
}
