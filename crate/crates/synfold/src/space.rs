//! Finite distance spaces.
//!
//! A [`DistanceMatrix`] is a total symmetric nonnegative rational distance
//! function over labelled points. Construction enforces the unconditional
//! axioms (zero diagonal, symmetry, nonnegativity); the conditional ones —
//! positivity off the diagonal, the triangle inequality, and the ultrametric
//! inequality — are classified by [`classify_space`], never assumed.
//!
//! The derivational story lives in [`draw_closer`] / [`metrize_step`]: an
//! initially constant-distance field (see [`make_ultrametric_field`]) loses
//! its ultrametricity step by step as selected points are pulled together,
//! with [`metric_closure`] repairing the triangle inequality after each pull.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rat::{format_rat, parse_rat, rat, Rat};

/// Opaque label for a point of a distance space.
///
/// Labels are non-empty and unique within one matrix; both are enforced when
/// the matrix is built, not here.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId(String);

impl PointId {
    pub fn new(label: impl Into<String>) -> Self {
        PointId(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PointId {
    fn from(s: &str) -> Self {
        PointId::new(s)
    }
}

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("EmptyField: a distance space needs at least one point")]
    EmptyField,
    #[error("EmptyPointLabel: point labels must be non-empty")]
    EmptyPointLabel,
    #[error("DuplicatePoint: label {0} appears more than once")]
    DuplicatePoint(PointId),
    #[error("ShapeMismatch: {detail}")]
    ShapeMismatch { detail: String },
    #[error("NonzeroDiagonal: d({0}, {0}) must be 0")]
    NonzeroDiagonal(PointId),
    #[error("AsymmetricEntry: d({x}, {y}) = {xy} but d({y}, {x}) = {yx}")]
    AsymmetricEntry {
        x: PointId,
        y: PointId,
        xy: String,
        yx: String,
    },
    #[error("NegativeEntry: d({x}, {y}) = {value} is negative")]
    NegativeEntry {
        x: PointId,
        y: PointId,
        value: String,
    },
    #[error("BadRational: cell ({x}, {y}): {detail}")]
    BadRational {
        x: String,
        y: String,
        detail: String,
    },
    #[error("UnknownPoint: {0} is not a point of this space")]
    UnknownPoint(PointId),
    #[error("SamePoint: {0} was given for both points")]
    SamePoint(PointId),
    #[error("NotACloserDistance: {new} does not undercut the current d({x}, {y}) = {current}")]
    NotACloserDistance {
        x: PointId,
        y: PointId,
        current: String,
        new: String,
    },
    #[error("InvalidDistance: {0}")]
    InvalidDistance(String),
    #[error("JsonError: {0}")]
    Json(String),
}

/// Finite symmetric nonnegative distance function over labelled points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceMatrix {
    points: Vec<PointId>,
    d: Vec<Vec<Rat>>,
}

impl DistanceMatrix {
    /// Builds a matrix, enforcing the unconditional axioms.
    ///
    /// Rejects empty point sets, empty or duplicate labels, non-square data,
    /// nonzero diagonals, asymmetric entries, and negative entries, naming
    /// the offending cell in the error.
    pub fn new(points: Vec<PointId>, d: Vec<Vec<Rat>>) -> Result<Self, SpaceError> {
        if points.is_empty() {
            return Err(SpaceError::EmptyField);
        }
        let n = points.len();
        let mut seen = BTreeSet::new();
        for p in &points {
            if p.as_str().is_empty() {
                return Err(SpaceError::EmptyPointLabel);
            }
            if !seen.insert(p.clone()) {
                return Err(SpaceError::DuplicatePoint(p.clone()));
            }
        }
        if d.len() != n {
            return Err(SpaceError::ShapeMismatch {
                detail: format!("{} rows for {} points", d.len(), n),
            });
        }
        for (i, row) in d.iter().enumerate() {
            if row.len() != n {
                return Err(SpaceError::ShapeMismatch {
                    detail: format!(
                        "row {} has {} entries, expected {}",
                        points[i],
                        row.len(),
                        n
                    ),
                });
            }
        }
        for i in 0..n {
            if !d[i][i].is_zero() {
                return Err(SpaceError::NonzeroDiagonal(points[i].clone()));
            }
            for j in (i + 1)..n {
                if d[i][j] != d[j][i] {
                    return Err(SpaceError::AsymmetricEntry {
                        x: points[i].clone(),
                        y: points[j].clone(),
                        xy: format_rat(&d[i][j]),
                        yx: format_rat(&d[j][i]),
                    });
                }
                if d[i][j] < Rat::zero() {
                    return Err(SpaceError::NegativeEntry {
                        x: points[i].clone(),
                        y: points[j].clone(),
                        value: format_rat(&d[i][j]),
                    });
                }
            }
        }
        Ok(DistanceMatrix { points, d })
    }

    /// Constant field: every off-diagonal distance equals `k`.
    pub fn constant(points: Vec<PointId>, k: Rat) -> Result<Self, SpaceError> {
        if k <= Rat::zero() {
            return Err(SpaceError::InvalidDistance(format!(
                "constant field distance must be positive, got {}",
                format_rat(&k)
            )));
        }
        let n = points.len();
        let d = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { Rat::zero() } else { k.clone() })
                    .collect()
            })
            .collect();
        DistanceMatrix::new(points, d)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one point
    }

    pub fn points(&self) -> &[PointId] {
        &self.points
    }

    pub fn index_of(&self, p: &PointId) -> Option<usize> {
        self.points.iter().position(|q| q == p)
    }

    fn require(&self, p: &PointId) -> Result<usize, SpaceError> {
        self.index_of(p)
            .ok_or_else(|| SpaceError::UnknownPoint(p.clone()))
    }

    /// Distance by index; panics on out-of-range indices.
    pub fn at(&self, i: usize, j: usize) -> &Rat {
        &self.d[i][j]
    }

    pub fn distance(&self, x: &PointId, y: &PointId) -> Result<&Rat, SpaceError> {
        Ok(&self.d[self.require(x)?][self.require(y)?])
    }

    /// True when both matrices describe the same distance space: equal label
    /// sets and equal pairwise distances, ignoring point order.
    pub fn eq_as_space(&self, other: &DistanceMatrix) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let mut map = Vec::with_capacity(self.len());
        for p in &self.points {
            match other.index_of(p) {
                Some(i) => map.push(i),
                None => return false,
            }
        }
        for i in 0..self.len() {
            for j in 0..self.len() {
                if self.d[i][j] != other.d[map[i]][map[j]] {
                    return false;
                }
            }
        }
        true
    }

    /// Serializes to the matrix file format (rationals as strings).
    pub fn to_json(&self) -> String {
        let file = MatrixFile {
            points: self.points.iter().map(|p| p.to_string()).collect(),
            d: self
                .d
                .iter()
                .map(|row| row.iter().map(format_rat).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("matrix serialization cannot fail")
    }

    /// Parses the matrix file format, running full construction validation.
    pub fn from_json(s: &str) -> Result<Self, SpaceError> {
        let file: MatrixFile =
            serde_json::from_str(s).map_err(|e| SpaceError::Json(e.to_string()))?;
        file.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    points: Vec<String>,
    d: Vec<Vec<String>>,
}

impl TryFrom<MatrixFile> for DistanceMatrix {
    type Error = SpaceError;

    fn try_from(file: MatrixFile) -> Result<Self, SpaceError> {
        let points: Vec<PointId> = file.points.iter().map(PointId::new).collect();
        let mut rows = Vec::with_capacity(file.d.len());
        for (i, row) in file.d.iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (j, cell) in row.iter().enumerate() {
                let name = |k: usize| {
                    file.points
                        .get(k)
                        .cloned()
                        .unwrap_or_else(|| format!("#{k}"))
                };
                out.push(parse_rat(cell).map_err(|detail| SpaceError::BadRational {
                    x: name(i),
                    y: name(j),
                    detail,
                })?);
            }
            rows.push(out);
        }
        DistanceMatrix::new(points, rows)
    }
}

/// Classification lattice for finite distance spaces.
///
/// `Ultrametric` implies `Metric` implies `Semimetric`; [`classify_space`]
/// returns the tightest class that holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum SpaceClass {
    NotSemimetric,
    Semimetric,
    Metric,
    Ultrametric,
}

impl fmt::Display for SpaceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SpaceClass::NotSemimetric => "NotSemimetric",
            SpaceClass::Semimetric => "Semimetric",
            SpaceClass::Metric => "Metric",
            SpaceClass::Ultrametric => "Ultrametric",
        };
        f.write_str(s)
    }
}

/// First failure of the strongest inequality tried.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassWitness {
    /// d(x, y) = 0 for distinct x, y: the positivity axiom fails.
    ZeroOffDiagonal { x: PointId, y: PointId },
    /// d(x, z) > d(x, y) + d(y, z): the triangle inequality fails.
    TriangleViolation { x: PointId, y: PointId, z: PointId },
    /// d(x, z) > max(d(x, y), d(y, z)): the ultrametric inequality fails.
    UltrametricViolation { x: PointId, y: PointId, z: PointId },
}

impl fmt::Display for ClassWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassWitness::ZeroOffDiagonal { x, y } => {
                write!(f, "d({x}, {y}) = 0 for distinct points")
            }
            ClassWitness::TriangleViolation { x, y, z } => {
                write!(
                    f,
                    "d({x}, {z}) > d({x}, {y}) + d({y}, {z}) at ({x}, {y}, {z})"
                )
            }
            ClassWitness::UltrametricViolation { x, y, z } => {
                write!(
                    f,
                    "d({x}, {z}) > max(d({x}, {y}), d({y}, {z})) at ({x}, {y}, {z})"
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub class: SpaceClass,
    pub witness: Option<ClassWitness>,
}

/// Returns the tightest class the matrix satisfies, with a witness for the
/// first failed inequality.
///
/// Checks run in order: off-diagonal positivity, then the triangle
/// inequality over all triples, then the ultrametric inequality. One- and
/// two-point spaces classify `Ultrametric` vacuously.
pub fn classify_space(m: &DistanceMatrix) -> Classification {
    let n = m.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if m.at(i, j).is_zero() {
                return Classification {
                    class: SpaceClass::Semimetric,
                    witness: Some(ClassWitness::ZeroOffDiagonal {
                        x: m.points[i].clone(),
                        y: m.points[j].clone(),
                    }),
                };
            }
        }
    }
    if let Some((x, y, z)) = first_triple_violation(m, |a, b, c| c > &(a + b)) {
        return Classification {
            class: SpaceClass::Semimetric,
            witness: Some(ClassWitness::TriangleViolation { x, y, z }),
        };
    }
    if let Some((x, y, z)) = first_triple_violation(m, |a, b, c| c > a.max(b)) {
        return Classification {
            class: SpaceClass::Metric,
            witness: Some(ClassWitness::UltrametricViolation { x, y, z }),
        };
    }
    Classification {
        class: SpaceClass::Ultrametric,
        witness: None,
    }
}

/// Scans all ordered corners of all triples; `violates(a, b, c)` receives the
/// two legs `a = d(x,y)`, `b = d(y,z)` and the span `c = d(x,z)`.
fn first_triple_violation(
    m: &DistanceMatrix,
    violates: impl Fn(&Rat, &Rat, &Rat) -> bool,
) -> Option<(PointId, PointId, PointId)> {
    let n = m.len();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                for (x, y, z) in [(i, j, k), (j, i, k), (i, k, j)] {
                    if violates(m.at(x, y), m.at(y, z), m.at(x, z)) {
                        return Some((
                            m.points[x].clone(),
                            m.points[y].clone(),
                            m.points[z].clone(),
                        ));
                    }
                }
            }
        }
    }
    None
}

/// Counts of unordered point triples by side multiset.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TriangleCensus {
    pub equilateral: usize,
    /// Two largest sides equal and strictly greater than the third.
    pub isosceles_top_two_equal: usize,
    pub other: usize,
    pub total: usize,
}

/// Classifies every unordered triple of points by its side multiset.
///
/// Fewer than three points yields the empty census rather than an error.
pub fn triangle_census(m: &DistanceMatrix) -> TriangleCensus {
    let mut census = TriangleCensus::default();
    let n = m.len();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let mut sides = [m.at(i, j), m.at(i, k), m.at(j, k)];
                sides.sort();
                census.total += 1;
                if sides[0] == sides[2] {
                    census.equilateral += 1;
                } else if sides[1] == sides[2] {
                    census.isosceles_top_two_equal += 1;
                } else {
                    census.other += 1;
                }
            }
        }
    }
    census
}

/// A ball around `center`: closed (`d <= radius`) or open (`d < radius`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborhoodSpec {
    pub center: PointId,
    pub radius: Rat,
    pub closed: bool,
}

/// Members of the requested ball.
pub fn neighborhood(
    m: &DistanceMatrix,
    spec: &NeighborhoodSpec,
) -> Result<BTreeSet<PointId>, SpaceError> {
    if spec.radius < Rat::zero() {
        return Err(SpaceError::InvalidDistance(format!(
            "neighborhood radius must be nonnegative, got {}",
            format_rat(&spec.radius)
        )));
    }
    let c = m.require(&spec.center)?;
    Ok(m.points
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            if spec.closed {
                m.at(c, *i) <= &spec.radius
            } else {
                m.at(c, *i) < &spec.radius
            }
        })
        .map(|(_, p)| p.clone())
        .collect())
}

/// Largest radius (among positive half-distances of matrix entries) whose
/// balls around `x` and `y` are disjoint, or `None` when no such radius
/// exists — e.g. after a collapse has set d(x, y) = 0.
pub fn are_separated(
    m: &DistanceMatrix,
    x: &PointId,
    y: &PointId,
    closed: bool,
) -> Result<Option<Rat>, SpaceError> {
    if x == y {
        return Err(SpaceError::SamePoint(x.clone()));
    }
    let xi = m.require(x)?;
    let yi = m.require(y)?;
    let mut candidates: BTreeSet<Rat> = BTreeSet::new();
    let n = m.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let half = m.at(i, j) / rat(2);
            if half > Rat::zero() {
                candidates.insert(half);
            }
        }
    }
    let ball = |center: usize, r: &Rat| -> BTreeSet<usize> {
        (0..n)
            .filter(|&i| {
                if closed {
                    m.at(center, i) <= r
                } else {
                    m.at(center, i) < r
                }
            })
            .collect()
    };
    for r in candidates.iter().rev() {
        if ball(xi, r).is_disjoint(&ball(yi, r)) {
            return Ok(Some(r.clone()));
        }
    }
    Ok(None)
}

/// Points of `subset` approachable from outside it within `eps`.
///
/// This is the discrete edge of a syntactic object: in a constant field the
/// result is all of `subset` or none of it, nothing in between.
pub fn boundary(
    m: &DistanceMatrix,
    subset: &BTreeSet<PointId>,
    eps: &Rat,
) -> Result<BTreeSet<PointId>, SpaceError> {
    if eps < &Rat::zero() {
        return Err(SpaceError::InvalidDistance(format!(
            "boundary eps must be nonnegative, got {}",
            format_rat(eps)
        )));
    }
    let mut inside = Vec::new();
    for p in subset {
        inside.push(m.require(p)?);
    }
    let outside: Vec<usize> = (0..m.len())
        .filter(|i| !subset.contains(&m.points[*i]))
        .collect();
    Ok(inside
        .into_iter()
        .filter(|&i| outside.iter().any(|&o| m.at(i, o) <= eps))
        .map(|i| m.points[i].clone())
        .collect())
}

/// All-pairs shortest-distance repair of the triangle inequality.
///
/// Pointwise dominated by the input and idempotent; distances here sum over
/// hop sequences, which is exactly what the triangle inequality licenses.
pub fn metric_closure(m: &DistanceMatrix) -> DistanceMatrix {
    let n = m.len();
    let mut d = m.d.clone();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = &d[i][k] + &d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    DistanceMatrix {
        points: m.points.clone(),
        d,
    }
}

/// Overwrites d(x, y) with a strictly smaller nonnegative value, without
/// re-closing the rest of the matrix. Setting 0 models identification.
pub fn draw_closer(
    m: &DistanceMatrix,
    x: &PointId,
    y: &PointId,
    new_d: &Rat,
) -> Result<DistanceMatrix, SpaceError> {
    if x == y {
        return Err(SpaceError::SamePoint(x.clone()));
    }
    let xi = m.require(x)?;
    let yi = m.require(y)?;
    if new_d < &Rat::zero() {
        return Err(SpaceError::InvalidDistance(format!(
            "distances are nonnegative, got {}",
            format_rat(new_d)
        )));
    }
    if new_d >= &m.d[xi][yi] {
        return Err(SpaceError::NotACloserDistance {
            x: x.clone(),
            y: y.clone(),
            current: format_rat(&m.d[xi][yi]),
            new: format_rat(new_d),
        });
    }
    let mut out = m.clone();
    out.d[xi][yi] = new_d.clone();
    out.d[yi][xi] = new_d.clone();
    Ok(out)
}

/// One metrization step: pull `x` and `y` to `new_d`, then re-close.
///
/// Third-party distances may shrink through the new shortcut; none ever
/// grows. The un-closed intermediate is available via [`draw_closer`].
pub fn metrize_step(
    m: &DistanceMatrix,
    x: &PointId,
    y: &PointId,
    new_d: &Rat,
) -> Result<DistanceMatrix, SpaceError> {
    Ok(metric_closure(&draw_closer(m, x, y, new_d)?))
}

/// Ground-state field: `n` points, every pair at distance `k`.
///
/// Every point is then the center of the radius-`k` sphere, and the space
/// classifies `Ultrametric`.
pub fn make_ultrametric_field(n: usize, k: &Rat) -> Result<DistanceMatrix, SpaceError> {
    if n == 0 {
        return Err(SpaceError::EmptyField);
    }
    let points = (0..n).map(|i| PointId::new(format!("p{i}"))).collect();
    DistanceMatrix::constant(points, k.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::ratio;

    fn pid(s: &str) -> PointId {
        PointId::new(s)
    }

    /// Three-point matrix over a, b, c with the given side lengths.
    fn tri(ab: Rat, ac: Rat, bc: Rat) -> DistanceMatrix {
        DistanceMatrix::new(
            vec![pid("a"), pid("b"), pid("c")],
            vec![
                vec![rat(0), ab.clone(), ac.clone()],
                vec![ab, rat(0), bc.clone()],
                vec![ac, bc, rat(0)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn construction_rejects_bad_matrices() {
        assert!(matches!(
            DistanceMatrix::new(vec![], vec![]),
            Err(SpaceError::EmptyField)
        ));
        assert!(matches!(
            DistanceMatrix::new(
                vec![pid("a"), pid("a")],
                vec![vec![rat(0), rat(1)], vec![rat(1), rat(0)]]
            ),
            Err(SpaceError::DuplicatePoint(_))
        ));
        assert!(matches!(
            DistanceMatrix::new(
                vec![pid("a"), pid("b")],
                vec![vec![rat(0), rat(1)], vec![rat(2), rat(0)]]
            ),
            Err(SpaceError::AsymmetricEntry { .. })
        ));
        assert!(matches!(
            DistanceMatrix::new(
                vec![pid("a"), pid("b")],
                vec![vec![rat(0), rat(-1)], vec![rat(-1), rat(0)]]
            ),
            Err(SpaceError::NegativeEntry { .. })
        ));
        assert!(matches!(
            DistanceMatrix::new(
                vec![pid("a"), pid("b")],
                vec![vec![rat(1), rat(1)], vec![rat(1), rat(0)]]
            ),
            Err(SpaceError::NonzeroDiagonal(_))
        ));
    }

    #[test]
    fn one_point_space_is_ultrametric() {
        let m = DistanceMatrix::new(vec![pid("a")], vec![vec![rat(0)]]).unwrap();
        assert_eq!(classify_space(&m).class, SpaceClass::Ultrametric);
    }

    #[test]
    fn xbar_shape_is_ultrametric() {
        // Spec/X at 2, Spec/YP at 2, X/YP at 1.
        let m = tri(rat(2), rat(2), rat(1));
        let c = classify_space(&m);
        assert_eq!(c.class, SpaceClass::Ultrametric);
        assert!(c.witness.is_none());
    }

    #[test]
    fn broken_triangle_is_semimetric_with_witness() {
        let m = tri(rat(1), rat(3), rat(1));
        let c = classify_space(&m);
        assert_eq!(c.class, SpaceClass::Semimetric);
        assert_eq!(
            c.witness,
            Some(ClassWitness::TriangleViolation {
                x: pid("a"),
                y: pid("b"),
                z: pid("c"),
            })
        );
    }

    #[test]
    fn long_side_breaks_triangle_before_ultrametric() {
        // 2 > 0.5 + 0.7, so this is not even metric.
        let m = tri(ratio(1, 2), rat(2), ratio(7, 10));
        assert_eq!(classify_space(&m).class, SpaceClass::Semimetric);
    }

    #[test]
    fn metric_but_not_ultrametric() {
        let m = tri(rat(1), rat(2), ratio(3, 2));
        let c = classify_space(&m);
        assert_eq!(c.class, SpaceClass::Metric);
        assert!(matches!(
            c.witness,
            Some(ClassWitness::UltrametricViolation { .. })
        ));
    }

    #[test]
    fn zero_off_diagonal_is_semimetric() {
        let m = tri(rat(0), rat(1), rat(1));
        let c = classify_space(&m);
        assert_eq!(c.class, SpaceClass::Semimetric);
        assert_eq!(
            c.witness,
            Some(ClassWitness::ZeroOffDiagonal {
                x: pid("a"),
                y: pid("b")
            })
        );
    }

    #[test]
    fn census_constant_field_all_equilateral() {
        let m = make_ultrametric_field(4, &rat(3)).unwrap();
        let census = triangle_census(&m);
        assert_eq!(census.equilateral, 4);
        assert_eq!(census.isosceles_top_two_equal, 0);
        assert_eq!(census.other, 0);
        assert_eq!(census.total, 4);
    }

    #[test]
    fn census_xbar_single_isosceles() {
        let m = tri(rat(2), rat(2), rat(1));
        let census = triangle_census(&m);
        assert_eq!(census.equilateral, 0);
        assert_eq!(census.isosceles_top_two_equal, 1);
        assert_eq!(census.other, 0);
    }

    #[test]
    fn census_under_three_points_is_empty() {
        let m = make_ultrametric_field(2, &rat(1)).unwrap();
        assert_eq!(triangle_census(&m).total, 0);
    }

    #[test]
    fn closed_ball_in_constant_field_is_everything() {
        let m = make_ultrametric_field(4, &rat(2)).unwrap();
        let all: BTreeSet<_> = m.points().iter().cloned().collect();
        let spec = NeighborhoodSpec {
            center: pid("p0"),
            radius: rat(2),
            closed: true,
        };
        assert_eq!(neighborhood(&m, &spec).unwrap(), all);
        let open = NeighborhoodSpec {
            closed: false,
            ..spec
        };
        let just_center: BTreeSet<_> = [pid("p0")].into();
        assert_eq!(neighborhood(&m, &open).unwrap(), just_center);
    }

    #[test]
    fn neighborhood_after_metrization() {
        let m = make_ultrametric_field(4, &rat(2)).unwrap();
        let m = metrize_step(&m, &pid("p0"), &pid("p1"), &ratio(1, 2)).unwrap();
        let spec = NeighborhoodSpec {
            center: pid("p0"),
            radius: ratio(1, 2),
            closed: true,
        };
        let pulled: BTreeSet<_> = [pid("p0"), pid("p1")].into();
        assert_eq!(neighborhood(&m, &spec).unwrap(), pulled);
        // The boundary of a subset straddling the pulled pair is exactly
        // the point reachable from outside within eps.
        let subset: BTreeSet<_> = [pid("p0"), pid("p2")].into();
        let just_p0: BTreeSet<_> = [pid("p0")].into();
        assert_eq!(boundary(&m, &subset, &rat(1)).unwrap(), just_p0);
    }

    #[test]
    fn neighborhood_unknown_center() {
        let m = make_ultrametric_field(2, &rat(1)).unwrap();
        let spec = NeighborhoodSpec {
            center: pid("zz"),
            radius: rat(1),
            closed: true,
        };
        assert!(matches!(
            neighborhood(&m, &spec),
            Err(SpaceError::UnknownPoint(_))
        ));
    }

    #[test]
    fn separation_of_equidistant_triangle() {
        let m = tri(rat(2), rat(2), rat(2));
        let r = are_separated(&m, &pid("a"), &pid("b"), true).unwrap();
        assert_eq!(r, Some(rat(1)));
    }

    #[test]
    fn separation_two_point_space() {
        let m = DistanceMatrix::new(
            vec![pid("x"), pid("y")],
            vec![vec![rat(0), rat(4)], vec![rat(4), rat(0)]],
        )
        .unwrap();
        assert_eq!(
            are_separated(&m, &pid("x"), &pid("y"), true).unwrap(),
            Some(rat(2))
        );
    }

    #[test]
    fn separation_fails_at_distance_zero() {
        let m = tri(rat(0), rat(1), rat(1));
        assert_eq!(are_separated(&m, &pid("a"), &pid("b"), true).unwrap(), None);
        assert!(matches!(
            are_separated(&m, &pid("a"), &pid("a"), true),
            Err(SpaceError::SamePoint(_))
        ));
    }

    #[test]
    fn boundary_of_everything_is_empty() {
        let m = make_ultrametric_field(3, &rat(2)).unwrap();
        let all: BTreeSet<_> = m.points().iter().cloned().collect();
        assert!(boundary(&m, &all, &rat(2)).unwrap().is_empty());
    }

    #[test]
    fn boundary_in_constant_field_is_all_or_nothing() {
        let m = make_ultrametric_field(4, &rat(2)).unwrap();
        let subset: BTreeSet<_> = [pid("p0"), pid("p2")].into();
        assert_eq!(boundary(&m, &subset, &rat(2)).unwrap(), subset);
        assert!(boundary(&m, &subset, &rat(1)).unwrap().is_empty());
    }

    #[test]
    fn closure_fixes_broken_triangle() {
        let m = tri(rat(1), rat(3), rat(1));
        let closed = metric_closure(&m);
        assert_eq!(closed.distance(&pid("a"), &pid("c")).unwrap(), &rat(2));
        assert_eq!(closed.distance(&pid("a"), &pid("b")).unwrap(), &rat(1));
        assert_eq!(metric_closure(&closed), closed);
    }

    #[test]
    fn closure_of_metric_is_identity() {
        let m = tri(rat(1), rat(2), ratio(3, 2));
        assert_eq!(metric_closure(&m), m);
        let c = make_ultrametric_field(5, &rat(2)).unwrap();
        assert_eq!(metric_closure(&c), c);
    }

    #[test]
    fn metrize_keeps_then_breaks_ultrametricity() {
        let m = make_ultrametric_field(4, &rat(2)).unwrap();
        let step1 = metrize_step(&m, &pid("p0"), &pid("p1"), &ratio(1, 2)).unwrap();
        assert_eq!(classify_space(&step1).class, SpaceClass::Ultrametric);
        let step2 = metrize_step(&step1, &pid("p1"), &pid("p2"), &ratio(7, 10)).unwrap();
        assert_eq!(classify_space(&step2).class, SpaceClass::Metric);
        // p0..p2 now reachable through the two new short hops.
        assert_eq!(
            step2.distance(&pid("p0"), &pid("p2")).unwrap(),
            &ratio(6, 5)
        );
    }

    #[test]
    fn metrize_to_zero_models_identification() {
        let m = make_ultrametric_field(3, &rat(2)).unwrap();
        let out = metrize_step(&m, &pid("p0"), &pid("p1"), &rat(0)).unwrap();
        assert_eq!(out.distance(&pid("p0"), &pid("p1")).unwrap(), &rat(0));
        assert_eq!(classify_space(&out).class, SpaceClass::Semimetric);
    }

    #[test]
    fn metrize_rejects_non_closer() {
        let m = make_ultrametric_field(3, &rat(2)).unwrap();
        assert!(matches!(
            metrize_step(&m, &pid("p0"), &pid("p1"), &rat(2)),
            Err(SpaceError::NotACloserDistance { .. })
        ));
        assert!(matches!(
            metrize_step(&m, &pid("p0"), &pid("p0"), &rat(1)),
            Err(SpaceError::SamePoint(_))
        ));
        assert!(matches!(
            metrize_step(&m, &pid("p0"), &pid("p1"), &rat(-1)),
            Err(SpaceError::InvalidDistance(_))
        ));
    }

    #[test]
    fn field_builder_edge_cases() {
        assert!(matches!(
            make_ultrametric_field(0, &rat(1)),
            Err(SpaceError::EmptyField)
        ));
        assert!(matches!(
            make_ultrametric_field(3, &rat(0)),
            Err(SpaceError::InvalidDistance(_))
        ));
        let one = make_ultrametric_field(1, &rat(1)).unwrap();
        assert_eq!(classify_space(&one).class, SpaceClass::Ultrametric);
    }

    #[test]
    fn json_round_trip_and_cell_diagnostics() {
        let m = tri(rat(2), rat(2), ratio(1, 2));
        let back = DistanceMatrix::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);

        let bad = r#"{ "points": ["a", "b"], "d": [["0", "1"], ["2", "0"]] }"#;
        let err = DistanceMatrix::from_json(bad).unwrap_err();
        assert!(err.to_string().contains("AsymmetricEntry"));
        assert!(err.to_string().contains('a') && err.to_string().contains('b'));

        let neg = r#"{ "points": ["a", "b"], "d": [["0", "-1"], ["-1", "0"]] }"#;
        assert!(DistanceMatrix::from_json(neg)
            .unwrap_err()
            .to_string()
            .contains("NegativeEntry"));

        let garbled = r#"{ "points": ["a", "b"], "d": [["0", "x"], ["x", "0"]] }"#;
        assert!(DistanceMatrix::from_json(garbled)
            .unwrap_err()
            .to_string()
            .contains("BadRational"));
    }
}
