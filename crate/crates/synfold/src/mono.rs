//! Monotonic vs non-monotonic growth of phrase markers.
//!
//! A growth history extends a structure one step at a time: a step that
//! introduces a single terminal is monotonic; a step that introduces an
//! already-complex object is not, and it is exactly those steps that break
//! finite-state describability. On the tree side, a plain tree is
//! finite-state describable iff no node branches into two non-leaf
//! children, and [`segment_max_monotonic`] carves an arbitrary binary/unary
//! tree into its maximal finite-state pieces with the joints in between.

use std::fmt;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MonoError {
    #[error("NotBinary: node has {0} children; only unary or binary nodes are supported")]
    NotBinary(usize),
    #[error("MalformedHistory: {0}")]
    MalformedHistory(String),
    #[error("MalformedTree: {0}")]
    MalformedTree(String),
    #[error("JsonError: {0}")]
    Json(String),
}

/// Rooted ordered tree; leaves carry surface forms, internal nodes carry
/// only their children.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlainTree {
    Leaf(String),
    Node(Vec<PlainTree>),
}

impl PlainTree {
    pub fn leaf(form: impl Into<String>) -> Self {
        PlainTree::Leaf(form.into())
    }

    pub fn node(children: Vec<PlainTree>) -> Self {
        PlainTree::Node(children)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, PlainTree::Leaf(_))
    }

    /// Leaf forms left to right.
    pub fn frontier(&self) -> Vec<String> {
        match self {
            PlainTree::Leaf(form) => vec![form.clone()],
            PlainTree::Node(children) => children.iter().flat_map(|c| c.frontier()).collect(),
        }
    }

    /// Total node count, leaves included.
    pub fn size(&self) -> usize {
        match self {
            PlainTree::Leaf(_) => 1,
            PlainTree::Node(children) => 1 + children.iter().map(|c| c.size()).sum::<usize>(),
        }
    }

    /// Parses the nested-list format: a leaf is a string, a node is a
    /// non-empty array.
    pub fn from_json(s: &str) -> Result<Self, MonoError> {
        let value: Value = serde_json::from_str(s).map_err(|e| MonoError::Json(e.to_string()))?;
        PlainTree::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self, MonoError> {
        match value {
            Value::String(s) => Ok(PlainTree::leaf(s.clone())),
            Value::Array(items) => {
                if items.is_empty() {
                    return Err(MonoError::MalformedTree(
                        "internal node needs at least one child".into(),
                    ));
                }
                Ok(PlainTree::node(
                    items
                        .iter()
                        .map(PlainTree::from_value)
                        .collect::<Result<_, _>>()?,
                ))
            }
            other => Err(MonoError::MalformedTree(format!(
                "expected string or array, found {other}"
            ))),
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            PlainTree::Leaf(form) => Value::String(form.clone()),
            PlainTree::Node(children) => {
                Value::Array(children.iter().map(|c| c.to_value()).collect())
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_value()).expect("tree serialization cannot fail")
    }
}

/// One growth step: a bare terminal or an already-assembled subtree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GrowthStep {
    Terminal(String),
    ComplexObject(PlainTree),
}

/// Ordered, non-empty sequence of growth steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrowthHistory {
    steps: Vec<GrowthStep>,
}

impl GrowthHistory {
    pub fn new(steps: Vec<GrowthStep>) -> Result<Self, MonoError> {
        if steps.is_empty() {
            return Err(MonoError::MalformedHistory(
                "a growth history needs at least one step".into(),
            ));
        }
        Ok(GrowthHistory { steps })
    }

    pub fn steps(&self) -> &[GrowthStep] {
        &self.steps
    }

    /// Parses the op-list format:
    /// `[{"op": "terminal", "form": "he"}, {"op": "complex", "tree": [...]}]`.
    pub fn from_json(s: &str) -> Result<Self, MonoError> {
        let value: Value = serde_json::from_str(s).map_err(|e| MonoError::Json(e.to_string()))?;
        let items = value
            .as_array()
            .ok_or_else(|| MonoError::MalformedHistory("expected an array of steps".into()))?;
        let mut steps = Vec::new();
        for item in items {
            let op = item
                .get("op")
                .and_then(Value::as_str)
                .ok_or_else(|| MonoError::MalformedHistory("step without an op".into()))?;
            match op {
                "terminal" => {
                    let form = item.get("form").and_then(Value::as_str).ok_or_else(|| {
                        MonoError::MalformedHistory("terminal step without a form".into())
                    })?;
                    steps.push(GrowthStep::Terminal(form.to_string()));
                }
                "complex" => {
                    let tree = item.get("tree").ok_or_else(|| {
                        MonoError::MalformedHistory("complex step without a tree".into())
                    })?;
                    steps.push(GrowthStep::ComplexObject(PlainTree::from_value(tree)?));
                }
                other => {
                    return Err(MonoError::MalformedHistory(format!("unknown op {other:?}")));
                }
            }
        }
        GrowthHistory::new(steps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StepClass {
    Monotonic,
    NonMonotonic,
}

impl fmt::Display for StepClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepClass::Monotonic => "Monotonic",
            StepClass::NonMonotonic => "NonMonotonic",
        })
    }
}

/// Terminal steps are monotonic; complex-object steps are not.
///
/// A complex object consisting of a single leaf is indistinguishable from a
/// terminal and counts as monotonic: non-monotonicity requires at least two
/// nodes of structure in one step.
pub fn classify_steps(h: &GrowthHistory) -> Vec<StepClass> {
    h.steps()
        .iter()
        .map(|s| match s {
            GrowthStep::Terminal(_) => StepClass::Monotonic,
            GrowthStep::ComplexObject(t) => {
                if t.size() >= 2 {
                    StepClass::NonMonotonic
                } else {
                    StepClass::Monotonic
                }
            }
        })
        .collect()
}

/// The tree a history builds: each step embeds the remainder as its sister,
/// so the first step is outermost and a terminal-only history is uniformly
/// right-descending.
pub fn history_tree(h: &GrowthHistory) -> PlainTree {
    let mut acc: Option<PlainTree> = None;
    for step in h.steps().iter().rev() {
        let item = match step {
            GrowthStep::Terminal(form) => PlainTree::leaf(form.clone()),
            GrowthStep::ComplexObject(t) => t.clone(),
        };
        acc = Some(match acc {
            None => PlainTree::node(vec![item]),
            Some(rest) => PlainTree::node(vec![item, rest]),
        });
    }
    acc.expect("history has at least one step")
}

fn ensure_unary_or_binary(t: &PlainTree) -> Result<(), MonoError> {
    match t {
        PlainTree::Leaf(_) => Ok(()),
        PlainTree::Node(children) => {
            if children.len() > 2 {
                return Err(MonoError::NotBinary(children.len()));
            }
            children.iter().try_for_each(ensure_unary_or_binary)
        }
    }
}

/// True iff no node branches into two non-leaf children: the tree's growth
/// is uniformly linear and a purely left-linear or right-linear rule set
/// generates its frontier.
pub fn is_fs_describable(t: &PlainTree) -> Result<bool, MonoError> {
    ensure_unary_or_binary(t)?;
    Ok(fs_describable_unchecked(t))
}

fn fs_describable_unchecked(t: &PlainTree) -> bool {
    match t {
        PlainTree::Leaf(_) => true,
        PlainTree::Node(children) => {
            children.iter().filter(|c| !c.is_leaf()).count() <= 1
                && children.iter().all(fs_describable_unchecked)
        }
    }
}

/// Child-index path from the root to a node.
pub type TreePath = Vec<usize>;

/// Maximal finite-state pieces of a tree plus the joints between them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segmentation {
    /// Maximal finite-state describable subtrees, left to right.
    pub segments: Vec<PlainTree>,
    /// Paths of nodes where two non-leaf subtrees meet.
    pub joints: Vec<TreePath>,
}

/// Splits a binary/unary tree into maximal finite-state describable
/// subtrees. Concatenating the segment frontiers in order reproduces the
/// frontier of the whole tree, and the tree is finite-state describable iff
/// there is exactly one segment.
pub fn segment_max_monotonic(t: &PlainTree) -> Result<Segmentation, MonoError> {
    ensure_unary_or_binary(t)?;
    let mut seg = Segmentation {
        segments: Vec::new(),
        joints: Vec::new(),
    };
    split(t, &mut Vec::new(), &mut seg);
    Ok(seg)
}

fn split(t: &PlainTree, path: &mut TreePath, seg: &mut Segmentation) {
    if fs_describable_unchecked(t) {
        seg.segments.push(t.clone());
        return;
    }
    if let PlainTree::Node(children) = t {
        if children.iter().filter(|c| !c.is_leaf()).count() >= 2 {
            seg.joints.push(path.clone());
        }
        for (i, child) in children.iter().enumerate() {
            path.push(i);
            split(child, path, seg);
            path.pop();
        }
    }
}

/// Deterministic bracket rendering: nodes wrap their children in square
/// brackets, nested leaves print bare, and a bare leaf at the top level is
/// wrapped so the output is always bracketed.
pub fn bracketing(t: &PlainTree) -> String {
    match t {
        PlainTree::Leaf(form) => format!("[{form}]"),
        PlainTree::Node(_) => render(t),
    }
}

fn render(t: &PlainTree) -> String {
    match t {
        PlainTree::Leaf(form) => form.clone(),
        PlainTree::Node(children) => {
            let inner: Vec<String> = children.iter().map(render).collect();
            format!("[{}]", inner.join(" "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ...[who [shows [he [deserves [it]]]]]...
    fn right_descending() -> PlainTree {
        PlainTree::node(vec![
            PlainTree::leaf("who"),
            PlainTree::node(vec![
                PlainTree::leaf("shows"),
                PlainTree::node(vec![
                    PlainTree::leaf("he"),
                    PlainTree::node(vec![
                        PlainTree::leaf("deserves"),
                        PlainTree::node(vec![PlainTree::leaf("it")]),
                    ]),
                ]),
            ]),
        ])
    }

    /// [[the man] [saw her]]
    fn complex_subject() -> PlainTree {
        PlainTree::node(vec![
            PlainTree::node(vec![PlainTree::leaf("the"), PlainTree::leaf("man")]),
            PlainTree::node(vec![PlainTree::leaf("saw"), PlainTree::leaf("her")]),
        ])
    }

    #[test]
    fn classify_terminal_and_complex_steps() {
        let h = GrowthHistory::new(vec![
            GrowthStep::Terminal("he".into()),
            GrowthStep::Terminal("saw".into()),
            GrowthStep::Terminal("her".into()),
        ])
        .unwrap();
        assert_eq!(classify_steps(&h), vec![StepClass::Monotonic; 3]);

        let h2 = GrowthHistory::new(vec![
            GrowthStep::ComplexObject(PlainTree::node(vec![
                PlainTree::leaf("the"),
                PlainTree::leaf("man"),
            ])),
            GrowthStep::Terminal("saw".into()),
            GrowthStep::Terminal("her".into()),
        ])
        .unwrap();
        assert_eq!(
            classify_steps(&h2),
            vec![
                StepClass::NonMonotonic,
                StepClass::Monotonic,
                StepClass::Monotonic
            ]
        );

        // A one-leaf "complex" step carries no more structure than a
        // terminal.
        let h3 =
            GrowthHistory::new(vec![GrowthStep::ComplexObject(PlainTree::leaf("it"))]).unwrap();
        assert_eq!(classify_steps(&h3), vec![StepClass::Monotonic]);
    }

    #[test]
    fn empty_history_is_rejected() {
        assert!(matches!(
            GrowthHistory::new(vec![]),
            Err(MonoError::MalformedHistory(_))
        ));
    }

    #[test]
    fn terminal_history_builds_fs_tree() {
        let h = GrowthHistory::new(vec![
            GrowthStep::Terminal("he".into()),
            GrowthStep::Terminal("saw".into()),
            GrowthStep::Terminal("her".into()),
        ])
        .unwrap();
        let t = history_tree(&h);
        assert_eq!(bracketing(&t), "[he [saw [her]]]");
        assert!(is_fs_describable(&t).unwrap());
    }

    #[test]
    fn complex_step_forces_a_joint() {
        let h = GrowthHistory::new(vec![
            GrowthStep::ComplexObject(PlainTree::node(vec![
                PlainTree::leaf("the"),
                PlainTree::leaf("man"),
            ])),
            GrowthStep::Terminal("saw".into()),
            GrowthStep::Terminal("her".into()),
        ])
        .unwrap();
        let t = history_tree(&h);
        assert_eq!(bracketing(&t), "[[the man] [saw [her]]]");
        assert!(!is_fs_describable(&t).unwrap());
        let seg = segment_max_monotonic(&t).unwrap();
        assert_eq!(seg.joints.len(), 1);
    }

    #[test]
    fn fs_describability_examples() {
        assert!(is_fs_describable(&right_descending()).unwrap());
        assert!(!is_fs_describable(&complex_subject()).unwrap());
        assert!(is_fs_describable(&PlainTree::leaf("it")).unwrap());
        let ternary = PlainTree::node(vec![
            PlainTree::leaf("a"),
            PlainTree::leaf("b"),
            PlainTree::leaf("c"),
        ]);
        assert!(matches!(
            is_fs_describable(&ternary),
            Err(MonoError::NotBinary(3))
        ));
    }

    #[test]
    fn segmentation_examples() {
        let one = segment_max_monotonic(&right_descending()).unwrap();
        assert_eq!(one.segments.len(), 1);
        assert!(one.joints.is_empty());

        let two = segment_max_monotonic(&complex_subject()).unwrap();
        assert_eq!(two.segments.len(), 2);
        assert_eq!(two.joints, vec![Vec::<usize>::new()]);
        assert_eq!(two.segments[0].frontier(), vec!["the", "man"]);
        assert_eq!(two.segments[1].frontier(), vec!["saw", "her"]);

        // Fully left-branching stays one segment.
        let mut t = PlainTree::node(vec![PlainTree::leaf("e"), PlainTree::leaf("d")]);
        for form in ["c", "b", "a"] {
            t = PlainTree::node(vec![t, PlainTree::leaf(form)]);
        }
        assert_eq!(segment_max_monotonic(&t).unwrap().segments.len(), 1);
    }

    #[test]
    fn segment_frontiers_concatenate_losslessly() {
        let nested = PlainTree::node(vec![
            PlainTree::leaf("a"),
            PlainTree::node(vec![
                PlainTree::node(vec![PlainTree::leaf("b"), PlainTree::leaf("c")]),
                PlainTree::node(vec![PlainTree::leaf("d"), PlainTree::leaf("e")]),
            ]),
        ]);
        let seg = segment_max_monotonic(&nested).unwrap();
        let glued: Vec<String> = seg.segments.iter().flat_map(|s| s.frontier()).collect();
        assert_eq!(glued, nested.frontier());
        assert_eq!(seg.segments.len(), 3);
        assert_eq!(seg.joints, vec![vec![1]]);
    }

    #[test]
    fn fs_iff_single_segment() {
        for t in [right_descending(), complex_subject(), PlainTree::leaf("x")] {
            let fs = is_fs_describable(&t).unwrap();
            let seg = segment_max_monotonic(&t).unwrap();
            assert_eq!(fs, seg.segments.len() == 1);
        }
    }

    #[test]
    fn bracketing_examples() {
        assert_eq!(
            bracketing(&right_descending()),
            "[who [shows [he [deserves [it]]]]]"
        );
        assert_eq!(bracketing(&PlainTree::leaf("it")), "[it]");
        assert_eq!(bracketing(&complex_subject()), "[[the man] [saw her]]");
    }

    #[test]
    fn tree_json_round_trip() {
        let t = complex_subject();
        assert_eq!(PlainTree::from_json(&t.to_json()).unwrap(), t);
        assert!(PlainTree::from_json("[]").is_err());
        assert!(PlainTree::from_json("3").is_err());
    }

    #[test]
    fn history_json() {
        let h = GrowthHistory::from_json(
            r#"[
                {"op": "complex", "tree": ["the", "man"]},
                {"op": "terminal", "form": "saw"},
                {"op": "terminal", "form": "her"}
            ]"#,
        )
        .unwrap();
        assert_eq!(classify_steps(&h)[0], StepClass::NonMonotonic);
        assert!(GrowthHistory::from_json("[]").is_err());
        assert!(GrowthHistory::from_json(r#"[{"op": "warp"}]"#).is_err());
    }
}
