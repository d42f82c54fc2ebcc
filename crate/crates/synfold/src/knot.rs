//! Knot diagrams as signed Gauss codes.
//!
//! A diagram is a circular sequence recording each crossing twice (once
//! over, once under, same sign). The three Reidemeister moves rewrite the
//! code locally and reversibly; crossings are representable, intersections
//! are not — there is no symbol for two strand points at the same
//! coordinates, which is what [`attempt_collapse`] makes executable.
//!
//! No planarity or realizability check is performed: some codes denote
//! virtual knots. The move and invariant machinery is insensitive to this,
//! and realizability testing is orthogonal to what the module is for.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pass {
    Over,
    Under,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// One visit to a crossing along the strand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GaussSymbol {
    pub crossing: u32,
    pub pass: Pass,
    pub sign: Sign,
}

impl fmt::Display for GaussSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}",
            match self.pass {
                Pass::Over => 'O',
                Pass::Under => 'U',
            },
            self.crossing,
            match self.sign {
                Sign::Plus => '+',
                Sign::Minus => '-',
            }
        )
    }
}

#[derive(Debug, Error)]
pub enum KnotError {
    #[error("ParseError: token #{index} {token:?}: {detail}")]
    Parse {
        index: usize,
        token: String,
        detail: String,
    },
    #[error("InvalidDiagram: {0}")]
    InvalidDiagram(String),
    #[error("MoveNotApplicable: {0}")]
    MoveNotApplicable(String),
    #[error(
        "IncompatibleWithKnotTheory: {0}; every crossing carries an over/under \
         flag, so two strand points at the same coordinates have no representation"
    )]
    IncompatibleWithKnotTheory(String),
}

/// Signed Gauss code. Rotations of the sequence denote the same diagram;
/// [`KnotDiagram::canonical`] quotients that out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnotDiagram {
    code: Vec<GaussSymbol>,
}

impl KnotDiagram {
    /// The empty diagram: a closed curve with no crossings.
    pub fn unknot() -> Self {
        KnotDiagram { code: Vec::new() }
    }

    /// Validates the two-appearance rule: each crossing id occurs exactly
    /// twice, with complementary over/under flags and equal signs.
    pub fn new(code: Vec<GaussSymbol>) -> Result<Self, KnotError> {
        let mut seen: HashMap<u32, Vec<GaussSymbol>> = HashMap::new();
        for sym in &code {
            seen.entry(sym.crossing).or_default().push(*sym);
        }
        for (id, occurrences) in &seen {
            if occurrences.len() != 2 {
                return Err(KnotError::InvalidDiagram(format!(
                    "crossing {id} appears {} time(s), expected 2",
                    occurrences.len()
                )));
            }
            if occurrences[0].pass == occurrences[1].pass {
                return Err(KnotError::InvalidDiagram(format!(
                    "crossing {id} is not once over and once under"
                )));
            }
            if occurrences[0].sign != occurrences[1].sign {
                return Err(KnotError::InvalidDiagram(format!(
                    "crossing {id} carries two different signs"
                )));
            }
        }
        Ok(KnotDiagram { code })
    }

    /// Strict whitespace-separated token parser: `O1+ U2+ O3+ U1+ O2+ U3+`.
    /// An empty input is the unknot.
    pub fn parse(input: &str) -> Result<Self, KnotError> {
        let mut code = Vec::new();
        for (index, token) in input.split_whitespace().enumerate() {
            let err = |detail: &str| KnotError::Parse {
                index,
                token: token.to_string(),
                detail: detail.to_string(),
            };
            let mut chars = token.chars();
            let pass = match chars.next() {
                Some('O') => Pass::Over,
                Some('U') => Pass::Under,
                _ => return Err(err("expected O or U prefix")),
            };
            let rest: String = chars.collect();
            let sign = match rest.chars().last() {
                Some('+') => Sign::Plus,
                Some('-') => Sign::Minus,
                _ => return Err(err("expected + or - suffix")),
            };
            let digits = &rest[..rest.len() - 1];
            let crossing: u32 = digits
                .parse()
                .map_err(|_| err("expected a crossing number"))?;
            code.push(GaussSymbol {
                crossing,
                pass,
                sign,
            });
        }
        KnotDiagram::new(code)
    }

    /// Unchecked constructor for move application: every Reidemeister
    /// rewrite of a valid code is valid.
    fn from_code(code: Vec<GaussSymbol>) -> Self {
        KnotDiagram { code }
    }

    pub fn code(&self) -> &[GaussSymbol] {
        &self.code
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    pub fn crossing_count(&self) -> usize {
        self.code.len() / 2
    }

    fn at(&self, pos: usize) -> GaussSymbol {
        self.code[pos % self.code.len()]
    }

    fn next_id(&self) -> u32 {
        self.code
            .iter()
            .map(|s| s.crossing)
            .max()
            .map_or(1, |m| m + 1)
    }

    /// Canonical key: the lexicographically least relabelled symbol string
    /// over all rotations and both traversal directions. Two codes denote
    /// the same diagram iff their keys are equal.
    pub fn canonical(&self) -> Vec<u16> {
        let len = self.code.len();
        if len == 0 {
            return Vec::new();
        }
        let max_id = self.next_id() as usize;
        let mut relabel = vec![0u16; max_id + 1];
        let mut best: Option<Vec<u16>> = None;
        let mut key = vec![0u16; len];
        let reversed: Vec<GaussSymbol> = self.code.iter().rev().copied().collect();
        for seq in [&self.code, &reversed] {
            for start in 0..len {
                relabel.fill(0);
                let mut fresh = 0u16;
                for (k, slot) in key.iter_mut().enumerate() {
                    let sym = seq[(start + k) % len];
                    let entry = &mut relabel[sym.crossing as usize];
                    if *entry == 0 {
                        fresh += 1;
                        *entry = fresh;
                    }
                    *slot = (*entry << 2)
                        | if sym.pass == Pass::Over { 2 } else { 0 }
                        | if sym.sign == Sign::Plus { 1 } else { 0 };
                }
                if best.as_ref().is_none_or(|b| key < *b) {
                    best = Some(key.clone());
                }
            }
        }
        best.expect("nonempty code has a key")
    }

    pub fn same_diagram(&self, other: &KnotDiagram) -> bool {
        self.canonical() == other.canonical()
    }
}

impl fmt::Display for KnotDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tokens: Vec<String> = self.code.iter().map(|s| s.to_string()).collect();
        f.write_str(&tokens.join(" "))
    }
}

/// A Reidemeister move with its application site. Positions index the Gauss
/// sequence at application time; pair sites cover the position and its
/// circular successor, insertion positions are gaps in `0..=len`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RMove {
    /// Twist: insert a kink of the given sign; `over_first` picks the side.
    R1Add {
        pos: usize,
        sign: Sign,
        over_first: bool,
    },
    /// Untwist: remove the kink whose two symbols sit at `pos`, `pos + 1`.
    R1Remove { pos: usize },
    /// Poke: push a strand over another, adding two opposite-signed
    /// crossings; overs inserted at `over_pos`, unders at `under_pos`.
    R2Add {
        over_pos: usize,
        under_pos: usize,
        sign: Sign,
    },
    /// Unpoke: remove the over pair at `over_pos` and the matching under
    /// pair at `under_pos`.
    R2Remove { over_pos: usize, under_pos: usize },
    /// Slide: swap each of the three adjacent pairs starting at `sites`.
    R3 { sites: [usize; 3] },
}

impl fmt::Display for RMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RMove::R1Add {
                pos,
                sign,
                over_first,
            } => write!(
                f,
                "R1_add@{pos}{}{}",
                if *sign == Sign::Plus { "+" } else { "-" },
                if *over_first { "" } else { "~" }
            ),
            RMove::R1Remove { pos } => write!(f, "R1_remove@{pos}"),
            RMove::R2Add {
                over_pos,
                under_pos,
                sign,
            } => write!(
                f,
                "R2_add@{over_pos},{under_pos}{}",
                if *sign == Sign::Plus { "+" } else { "-" }
            ),
            RMove::R2Remove {
                over_pos,
                under_pos,
            } => {
                write!(f, "R2_remove@{over_pos},{under_pos}")
            }
            RMove::R3 { sites } => write!(f, "R3@{},{},{}", sites[0], sites[1], sites[2]),
        }
    }
}

impl RMove {
    /// Change in crossing count the move causes.
    pub fn crossing_delta(&self) -> i32 {
        match self {
            RMove::R1Add { .. } => 1,
            RMove::R1Remove { .. } => -1,
            RMove::R2Add { .. } => 2,
            RMove::R2Remove { .. } => -2,
            RMove::R3 { .. } => 0,
        }
    }
}

fn all_distinct(xs: &[usize]) -> bool {
    xs.iter().enumerate().all(|(i, x)| !xs[..i].contains(x))
}

fn remove_positions(code: &[GaussSymbol], drop: &[usize]) -> Vec<GaussSymbol> {
    code.iter()
        .enumerate()
        .filter(|(i, _)| !drop.contains(i))
        .map(|(_, s)| *s)
        .collect()
}

/// Applies a move, checking that its structural pattern is present at the
/// site first.
pub fn apply_rmove(d: &KnotDiagram, m: &RMove) -> Result<KnotDiagram, KnotError> {
    let len = d.len();
    match *m {
        RMove::R1Add {
            pos,
            sign,
            over_first,
        } => {
            if pos > len {
                return Err(KnotError::MoveNotApplicable(format!(
                    "insertion point {pos} outside 0..={len}"
                )));
            }
            let id = d.next_id();
            let over = GaussSymbol {
                crossing: id,
                pass: Pass::Over,
                sign,
            };
            let under = GaussSymbol {
                crossing: id,
                pass: Pass::Under,
                sign,
            };
            let mut code = d.code.clone();
            let kink = if over_first {
                [over, under]
            } else {
                [under, over]
            };
            code.splice(pos..pos, kink);
            Ok(KnotDiagram::from_code(code))
        }
        RMove::R1Remove { pos } => {
            if len < 2 || pos >= len {
                return Err(KnotError::MoveNotApplicable(format!(
                    "no kink at position {pos}"
                )));
            }
            let (a, b) = (d.at(pos), d.at(pos + 1));
            if a.crossing != b.crossing {
                return Err(KnotError::MoveNotApplicable(format!(
                    "symbols at {pos}, {} belong to different crossings",
                    (pos + 1) % len
                )));
            }
            Ok(KnotDiagram::from_code(remove_positions(
                &d.code,
                &[pos, (pos + 1) % len],
            )))
        }
        RMove::R2Add {
            over_pos,
            under_pos,
            sign,
        } => {
            if over_pos > len || under_pos > len {
                return Err(KnotError::MoveNotApplicable(format!(
                    "insertion points {over_pos}, {under_pos} outside 0..={len}"
                )));
            }
            let a = d.next_id();
            let b = a + 1;
            let sym = |crossing, pass, sign| GaussSymbol {
                crossing,
                pass,
                sign,
            };
            let overs = [sym(a, Pass::Over, sign), sym(b, Pass::Over, sign.flip())];
            let unders = [sym(b, Pass::Under, sign.flip()), sym(a, Pass::Under, sign)];
            let mut code = d.code.clone();
            // Insert at the later gap first so the earlier index stays valid.
            if over_pos <= under_pos {
                code.splice(under_pos..under_pos, unders);
                code.splice(over_pos..over_pos, overs);
            } else {
                code.splice(over_pos..over_pos, overs);
                code.splice(under_pos..under_pos, unders);
            }
            Ok(KnotDiagram::from_code(code))
        }
        RMove::R2Remove {
            over_pos,
            under_pos,
        } => {
            check_r2_pattern(d, over_pos, under_pos)?;
            let drop = [
                over_pos,
                (over_pos + 1) % len,
                under_pos,
                (under_pos + 1) % len,
            ];
            Ok(KnotDiagram::from_code(remove_positions(&d.code, &drop)))
        }
        RMove::R3 { sites } => {
            check_r3_pattern(d, &sites)?;
            let mut code = d.code.clone();
            for &p in &sites {
                code.swap(p, (p + 1) % len);
            }
            Ok(KnotDiagram::from_code(code))
        }
    }
}

/// Poke pattern: adjacent over pair (i)(j), adjacent under pair (j)(i)
/// elsewhere, over distinct crossings of opposite sign, four distinct
/// positions.
fn check_r2_pattern(d: &KnotDiagram, over_pos: usize, under_pos: usize) -> Result<(), KnotError> {
    let len = d.len();
    let fail = |detail: String| Err(KnotError::MoveNotApplicable(detail));
    if len < 4 || over_pos >= len || under_pos >= len {
        return fail(format!("no poke at ({over_pos}, {under_pos})"));
    }
    let positions = [
        over_pos,
        (over_pos + 1) % len,
        under_pos,
        (under_pos + 1) % len,
    ];
    if !all_distinct(&positions) {
        return fail("overlapping pair sites".to_string());
    }
    let (o1, o2) = (d.at(over_pos), d.at(over_pos + 1));
    let (u1, u2) = (d.at(under_pos), d.at(under_pos + 1));
    if o1.pass != Pass::Over || o2.pass != Pass::Over {
        return fail(format!("pair at {over_pos} is not an over pair"));
    }
    if u1.pass != Pass::Under || u2.pass != Pass::Under {
        return fail(format!("pair at {under_pos} is not an under pair"));
    }
    if o1.crossing == o2.crossing {
        return fail("over pair visits one crossing twice".to_string());
    }
    if o1.crossing != u2.crossing || o2.crossing != u1.crossing {
        return fail("pairs do not traverse the same two crossings in opposite order".to_string());
    }
    if o1.sign == o2.sign {
        return fail("poke crossings must carry opposite signs".to_string());
    }
    Ok(())
}

/// Triangle pattern: three disjoint adjacent pairs over exactly three
/// crossings, each crossing split across two pairs, with one strand passing
/// its two triangle crossings on the same level (the slider).
fn check_r3_pattern(d: &KnotDiagram, sites: &[usize; 3]) -> Result<(), KnotError> {
    let len = d.len();
    let fail = |detail: String| Err(KnotError::MoveNotApplicable(detail));
    if len < 6 {
        return fail("diagram too small for a triangle".to_string());
    }
    if sites.iter().any(|&p| p >= len) {
        return fail(format!("sites {sites:?} outside 0..{len}"));
    }
    let positions = [
        sites[0],
        (sites[0] + 1) % len,
        sites[1],
        (sites[1] + 1) % len,
        sites[2],
        (sites[2] + 1) % len,
    ];
    if !all_distinct(&positions) {
        return fail("triangle pairs overlap".to_string());
    }
    let pairs = [
        (d.at(sites[0]), d.at(sites[0] + 1)),
        (d.at(sites[1]), d.at(sites[1] + 1)),
        (d.at(sites[2]), d.at(sites[2] + 1)),
    ];
    let mut ids = [0u32; 3];
    let mut counts = [0usize; 3];
    let mut distinct = 0usize;
    for (a, b) in &pairs {
        if a.crossing == b.crossing {
            return fail("a triangle pair visits one crossing twice".to_string());
        }
        for sym in [a, b] {
            match ids[..distinct].iter().position(|&id| id == sym.crossing) {
                Some(i) => counts[i] += 1,
                None => {
                    if distinct == 3 {
                        return fail(
                            "pairs do not form a triangle over three crossings".to_string(),
                        );
                    }
                    ids[distinct] = sym.crossing;
                    counts[distinct] = 1;
                    distinct += 1;
                }
            }
        }
    }
    if distinct != 3 || counts != [2, 2, 2] {
        return fail("pairs do not form a triangle over three crossings".to_string());
    }
    if !pairs.iter().any(|(a, b)| a.pass == b.pass) {
        return fail("no strand passes both its triangle crossings on one level".to_string());
    }
    Ok(())
}

/// All structurally valid moves, in a fixed deterministic order. Additive
/// insertions are enumerated bounded: kinks at each gap with each sign and
/// side, pokes as contiguous four-symbol insertions at each gap with each
/// sign. [`apply_rmove`] additionally accepts split-site pokes.
pub fn enumerate_applicable_moves(d: &KnotDiagram) -> Vec<RMove> {
    let len = d.len();
    let mut moves = Vec::new();
    for pos in 0..len {
        if d.at(pos).crossing == d.at(pos + 1).crossing {
            moves.push(RMove::R1Remove { pos });
        }
    }
    for over_pos in 0..len {
        for under_pos in 0..len {
            if check_r2_pattern(d, over_pos, under_pos).is_ok() {
                moves.push(RMove::R2Remove {
                    over_pos,
                    under_pos,
                });
            }
        }
    }
    for p1 in 0..len {
        for p2 in (p1 + 1)..len {
            for p3 in (p2 + 1)..len {
                let sites = [p1, p2, p3];
                if check_r3_pattern(d, &sites).is_ok() {
                    moves.push(RMove::R3 { sites });
                }
            }
        }
    }
    for pos in 0..=len {
        for sign in [Sign::Plus, Sign::Minus] {
            for over_first in [true, false] {
                moves.push(RMove::R1Add {
                    pos,
                    sign,
                    over_first,
                });
            }
        }
    }
    for pos in 0..=len {
        for sign in [Sign::Plus, Sign::Minus] {
            moves.push(RMove::R2Add {
                over_pos: pos,
                under_pos: pos,
                sign,
            });
        }
    }
    moves
}

/// Arc-coloring invariant, decided by exhaustive search over all
/// assignments of three colors to arcs.
///
/// Arcs are maximal segments between undercrossings. At every crossing the
/// over arc and the two arcs meeting at the under pass must be all equal or
/// all distinct, and at least two colors must be used overall. Unchanged by
/// every Reidemeister move, which is what makes it a knot detector: the
/// trefoil is tricolorable, the unknot is not.
pub fn is_tricolorable(d: &KnotDiagram) -> bool {
    let len = d.len();
    if len == 0 {
        return false; // one closed arc, a second color is unreachable
    }
    let under_positions: Vec<usize> = (0..len).filter(|&p| d.at(p).pass == Pass::Under).collect();
    let arcs = under_positions.len();
    // Arc of a position: index of the undercrossing that terminates its
    // segment (wrapping to the first).
    let arc_of =
        |pos: usize| -> usize { under_positions.iter().position(|&u| u >= pos).unwrap_or(0) };
    // (over arc, incoming arc, outgoing arc) per crossing.
    let mut constraints = Vec::new();
    for (i, &u) in under_positions.iter().enumerate() {
        let crossing = d.at(u).crossing;
        let over_pos = (0..len)
            .find(|&p| d.at(p).crossing == crossing && d.at(p).pass == Pass::Over)
            .expect("validated diagram has the over pass");
        constraints.push((arc_of(over_pos), i, (i + 1) % arcs));
    }
    let mut colors = vec![0u8; arcs];
    loop {
        let ok = constraints.iter().all(|&(o, a, b)| {
            let (co, ca, cb) = (colors[o], colors[a], colors[b]);
            (co == ca && ca == cb) || (co != ca && ca != cb && co != cb)
        });
        if ok && colors.iter().collect::<HashSet<_>>().len() >= 2 {
            return true;
        }
        // Next assignment in base 3.
        let mut i = 0;
        loop {
            if i == arcs {
                return false;
            }
            colors[i] += 1;
            if colors[i] < 3 {
                break;
            }
            colors[i] = 0;
            i += 1;
        }
    }
}

/// Sum of crossing signs. Changes under twists, fixed under pokes and
/// slides.
pub fn writhe(d: &KnotDiagram) -> i64 {
    let mut seen = HashSet::new();
    d.code
        .iter()
        .filter(|s| seen.insert(s.crossing))
        .map(|s| match s.sign {
            Sign::Plus => 1,
            Sign::Minus => -1,
        })
        .sum()
}

/// Default cap on explored diagrams in [`reduce_to_unknot`].
pub const DEFAULT_STATE_BUDGET: usize = 50_000;

/// Breadth-first search for a shortest move sequence to the empty diagram.
///
/// Expands the bounded move enumeration, prunes diagrams above
/// `max_crossings`, stops at depth `max_moves`, and caps exploration at
/// [`DEFAULT_STATE_BUDGET`] distinct diagrams. `None` means no reduction
/// was found within those limits — never proof of knottedness: the bounds
/// here are desk-scale, and the known worst-case move bound
/// ([`lackenby_bound`]) is astronomically larger.
pub fn reduce_to_unknot(
    d: &KnotDiagram,
    max_moves: usize,
    max_crossings: usize,
) -> Option<Vec<RMove>> {
    reduce_to_unknot_budgeted(d, max_moves, max_crossings, DEFAULT_STATE_BUDGET)
}

/// [`reduce_to_unknot`] with an explicit exploration budget.
pub fn reduce_to_unknot_budgeted(
    d: &KnotDiagram,
    max_moves: usize,
    max_crossings: usize,
    state_budget: usize,
) -> Option<Vec<RMove>> {
    if d.is_empty() {
        return Some(Vec::new());
    }
    struct Entry {
        diagram: KnotDiagram,
        parent: usize,
        mv: Option<RMove>,
        depth: usize,
    }
    let mut entries = vec![Entry {
        diagram: d.clone(),
        parent: 0,
        mv: None,
        depth: 0,
    }];
    let mut visited: HashSet<Vec<u16>> = HashSet::from([d.canonical()]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        let depth = entries[idx].depth;
        if depth >= max_moves {
            continue;
        }
        for m in enumerate_applicable_moves(&entries[idx].diagram) {
            let child = apply_rmove(&entries[idx].diagram, &m)
                .expect("enumerated moves apply to their own diagram");
            let crossings = child.crossing_count();
            if crossings > max_crossings {
                continue;
            }
            // Even unpoking two crossings per move cannot finish in time.
            if depth + 1 + crossings.div_ceil(2) > max_moves {
                continue;
            }
            if !visited.insert(child.canonical()) {
                continue;
            }
            if child.is_empty() {
                let mut moves = vec![m];
                let mut walk = idx;
                while let Some(step) = entries[walk].mv {
                    moves.push(step);
                    walk = entries[walk].parent;
                }
                moves.reverse();
                return Some(moves);
            }
            if entries.len() >= state_budget {
                return None;
            }
            entries.push(Entry {
                diagram: child,
                parent: idx,
                mv: Some(m),
                depth: depth + 1,
            });
            queue.push_back(entries.len() - 1);
        }
    }
    None
}

/// The proven worst-case bound on Reidemeister moves needed to untangle an
/// unknot diagram with `crossings` crossings: (236·c)^11. Exposed for
/// context only; at c = 3 it already exceeds 10^31, so no search uses it.
pub fn lackenby_bound(crossings: usize) -> BigUint {
    BigUint::from(236usize * crossings).pow(11)
}

/// Identification of two arc points, attempted in the diagram model.
///
/// Always fails: the move repertoire keeps strands apart at every crossing,
/// so the distance-zero identification that chain collapse needs has no
/// counterpart here.
pub fn attempt_collapse(d: &KnotDiagram, arc_a: usize, arc_b: usize) -> Result<(), KnotError> {
    Err(KnotError::IncompatibleWithKnotTheory(format!(
        "cannot identify arcs {arc_a} and {arc_b} of a {}-crossing diagram",
        d.crossing_count()
    )))
}
