//! The bundled example corpus: annotated sentences, the X-bar matrices,
//! substitution terms, relation sets, plain trees, Gauss codes, and a
//! ready-to-run derivation narrative.
//!
//! Everything here is constructed in memory by a pure function and written
//! out by [`bundle_examples`], so re-running the bundler produces
//! byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::derivation::{
    AddressAnnotation, AnnotatedSd, DerivationScript, DerivationStep, RelationSet, Span, Term,
};
use crate::knot::{apply_rmove, KnotDiagram, RMove, Sign};
use crate::lgraph::{LGraph, Vertex, VertexId};
use crate::mono::PlainTree;
use crate::rat::{rat, ratio};
use crate::space::{make_ultrametric_field, DistanceMatrix, PointId};
use crate::tree::{xbar_matrix, XBarSpec};

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Mary was reading a book — no multi-occurrence addresses.
pub fn sd_reading() -> AnnotatedSd {
    AnnotatedSd::new(words("Mary was reading a book"), vec![], None)
        .expect("fixture is well-formed")
}

/// John despises himself — one address at both peripheries.
pub fn sd_reflexive() -> AnnotatedSd {
    AnnotatedSd::new(
        words("John despises himself"),
        vec![AddressAnnotation {
            id: PointId::new("John"),
            occurrences: vec![Span::new(0, 0), Span::new(2, 2)],
            gap_final: false,
        }],
        None,
    )
    .expect("fixture is well-formed")
}

/// Which picture of himself did John say Mary likes — the operator complex
/// spans the left periphery and leaves a final gap; John recurs mid-string.
pub fn sd_wh_question() -> AnnotatedSd {
    AnnotatedSd::new(
        words("Which picture of himself did John say Mary likes"),
        vec![
            AddressAnnotation {
                id: PointId::new("which-picture"),
                occurrences: vec![Span::new(0, 3)],
                gap_final: true,
            },
            AddressAnnotation {
                id: PointId::new("John"),
                occurrences: vec![Span::new(3, 3), Span::new(5, 5)],
                gap_final: false,
            },
        ],
        None,
    )
    .expect("fixture is well-formed")
}

/// The man who shows he deserves it will get the prize he desires — the
/// crossing-coreference sentence: three contexts per address. The prize
/// chain's final gap is annotated as one context among three, not as a
/// peripheral gluing partner.
pub fn sd_bach_peters() -> AnnotatedSd {
    AnnotatedSd::new(
        words("The man who shows he deserves it will get the prize he desires"),
        vec![
            AddressAnnotation {
                id: PointId::new("man"),
                occurrences: vec![Span::new(0, 1), Span::new(2, 2), Span::new(4, 4)],
                gap_final: false,
            },
            AddressAnnotation {
                id: PointId::new("prize"),
                occurrences: vec![Span::new(6, 6), Span::new(9, 10)],
                gap_final: true,
            },
        ],
        None,
    )
    .expect("fixture is well-formed")
}

/// The four bundled sentences in presentation order.
pub fn bundled_sds() -> Vec<(&'static str, AnnotatedSd)> {
    vec![
        ("sd_reading.json", sd_reading()),
        ("sd_reflexive.json", sd_reflexive()),
        ("sd_wh_question.json", sd_wh_question()),
        ("sd_bach_peters.json", sd_bach_peters()),
    ]
}

/// Host term with one open complement slot: `[K John [M wished [L]]]`.
pub fn term_host() -> Term {
    Term::node(
        "K",
        vec![
            Term::word("John"),
            Term::node("M", vec![Term::word("wished"), Term::slot("L")]),
        ],
    )
}

/// The separate complement term `[L that Mary would go out with him]`.
pub fn term_complement() -> Term {
    Term::node(
        "L",
        vec![
            Term::word("that"),
            Term::word("Mary"),
            Term::word("would"),
            Term::word("go"),
            Term::word("out"),
            Term::word("with"),
            Term::word("him"),
        ],
    )
}

/// Bracketing the substitution fixture must reproduce byte-exactly.
pub const SUBSTITUTION_EXPECTED: &str = "[K John [M wished [L that Mary would go out with him]]]";

/// The uniformly right-descending relative-clause tree.
pub fn tree_who_shows() -> PlainTree {
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

/// Bracketing of [`tree_who_shows`].
pub const WHO_SHOWS_BRACKETING: &str = "[who [shows [he [deserves [it]]]]]";

/// The complex-subject tree `[[the man] [saw her]]`.
pub fn tree_complex_subject() -> PlainTree {
    PlainTree::node(vec![
        PlainTree::node(vec![PlainTree::leaf("the"), PlainTree::leaf("man")]),
        PlainTree::node(vec![PlainTree::leaf("saw"), PlainTree::leaf("her")]),
    ])
}

/// Relations of the active stage of "John was murdered".
pub fn relations_before() -> RelationSet {
    RelationSet::new(
        ["e".to_string()],
        [
            ("murder".to_string(), "e".to_string(), "John".to_string()),
            ("dom".to_string(), "be".to_string(), "murdered".to_string()),
        ],
    )
}

/// Relations after the passive mapping: the same set extended by the
/// be/John dependency.
pub fn relations_after() -> RelationSet {
    RelationSet::new(
        ["e".to_string()],
        [
            ("murder".to_string(), "e".to_string(), "John".to_string()),
            ("dom".to_string(), "be".to_string(), "murdered".to_string()),
            ("dom".to_string(), "be".to_string(), "John".to_string()),
        ],
    )
}

pub fn map_identity() -> BTreeMap<String, String> {
    relations_before()
        .universe()
        .iter()
        .map(|e| (e.clone(), e.clone()))
        .collect()
}

/// Identity except that it swaps the arguments of the murder relation.
pub fn map_swapped() -> BTreeMap<String, String> {
    let mut map = map_identity();
    map.insert("e".to_string(), "John".to_string());
    map.insert("John".to_string(), "e".to_string());
    map
}

pub const TREFOIL_CODE: &str = "O1+ U2+ O3+ U1+ O2+ U3+";
pub const FIGURE_EIGHT_CODE: &str = "O1+ U2+ O3- U4- O2+ U1+ O4- U3-";
pub const GRANNY_CODE: &str = "O1+ U2+ O3+ U1+ O2+ U3+ O4+ U5+ O6+ U4+ O5+ U6+";
/// Three crossings forming a slideable triangle (over-over strand on top).
pub const TRIANGLE_CODE: &str = "O1+ O2+ U2+ O3+ U1+ U3+";

/// Trefoil with a strand poked over another: same knot, five crossings.
pub fn trefoil_poked() -> KnotDiagram {
    let trefoil = KnotDiagram::parse(TREFOIL_CODE).expect("fixture parses");
    apply_rmove(
        &trefoil,
        &RMove::R2Add {
            over_pos: 1,
            under_pos: 4,
            sign: Sign::Plus,
        },
    )
    .expect("poke applies")
}

/// The bundled knot corpus: all diagrams have at most six crossings.
pub fn gauss_corpus() -> Vec<(&'static str, KnotDiagram)> {
    let parse = |s: &str| KnotDiagram::parse(s).expect("fixture parses");
    vec![
        ("unknot.gauss", KnotDiagram::unknot()),
        ("twist1.gauss", parse("O1+ U1+")),
        ("twist2.gauss", parse("O1+ U1+ O2+ U2+")),
        ("trefoil.gauss", parse(TREFOIL_CODE)),
        ("figure_eight.gauss", parse(FIGURE_EIGHT_CODE)),
        ("triangle.gauss", parse(TRIANGLE_CODE)),
        ("trefoil_poked.gauss", trefoil_poked()),
        ("granny.gauss", parse(GRANNY_CODE)),
    ]
}

/// Ground-state field for the derivation narrative: six points, constant
/// distance 2.
pub fn narrative_field() -> DistanceMatrix {
    make_ultrametric_field(6, &rat(2)).expect("six points, positive distance")
}

/// Occurrence graph over the narrative field. Vids name the field points
/// the occurrences sit at; the John and himself occurrences share one
/// address and are the chain the script collapses.
pub fn narrative_graph() -> LGraph {
    let vx = |vid: &str, addr: &str, form: &str, predicative: bool| Vertex {
        vid: VertexId::new(vid),
        address: PointId::new(addr),
        form: form.to_string(),
        predicative,
    };
    LGraph::new(
        vec![
            vx("p0", "D-john", "John", false),
            vx("p1", "D-john", "himself", false),
            vx("p2", "P-despise", "despises", true),
            vx("p3", "P-clause", "clause", true),
            vx("p4", "P-say", "say", true),
            vx("p5", "D-mary", "Mary", false),
        ],
        vec![
            (VertexId::new("p3"), VertexId::new("p0")),
            (VertexId::new("p3"), VertexId::new("p2")),
            (VertexId::new("p2"), VertexId::new("p1")),
        ],
    )
    .expect("fixture is well-formed")
}

/// Two metrize steps, then the chain collapse.
pub fn narrative_script() -> DerivationScript {
    DerivationScript {
        steps: vec![
            DerivationStep::Metrize {
                x: PointId::new("p0"),
                y: PointId::new("p1"),
                new_d: ratio(1, 2),
            },
            DerivationStep::Metrize {
                x: PointId::new("p1"),
                y: PointId::new("p2"),
                new_d: ratio(7, 10),
            },
            DerivationStep::Collapse {
                address: PointId::new("D-john"),
            },
        ],
    }
}

const NARRATIVE_SCRIPT_JSON: &str = r#"[
  { "op": "metrize", "x": "p0", "y": "p1", "d": "1/2" },
  { "op": "metrize", "x": "p1", "y": "p2", "d": "7/10" },
  { "op": "collapse", "address": "D-john" }
]
"#;

fn map_json(map: &BTreeMap<String, String>) -> String {
    serde_json::to_string_pretty(map).expect("map serialization cannot fail")
}

/// Writes the whole corpus into `dir`, creating it if needed. Returns the
/// files written, in order. Byte-identical across runs.
pub fn bundle_examples(dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, content: String| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, content)?;
        written.push(path);
        Ok(())
    };

    for (name, sd) in bundled_sds() {
        put(name, sd.to_json() + "\n")?;
    }
    for (base, spec) in [
        (0u32, "xbar_i0.json"),
        (1, "xbar_i1.json"),
        (5, "xbar_i5.json"),
    ]
    .map(|(b, n)| (b, n))
    {
        put(spec, xbar_matrix(&XBarSpec { base }).to_json() + "\n")?;
    }
    put("term_host.json", term_host().to_json() + "\n")?;
    put("term_complement.json", term_complement().to_json() + "\n")?;
    put("tree_who_shows.json", tree_who_shows().to_json() + "\n")?;
    put(
        "tree_complex_subject.json",
        tree_complex_subject().to_json() + "\n",
    )?;
    put("relations_before.json", relations_before().to_json() + "\n")?;
    put("relations_after.json", relations_after().to_json() + "\n")?;
    put("map_identity.json", map_json(&map_identity()) + "\n")?;
    put("map_swapped.json", map_json(&map_swapped()) + "\n")?;
    for (name, diagram) in gauss_corpus() {
        put(name, diagram.to_string() + "\n")?;
    }
    put("narrative_field.json", narrative_field().to_json() + "\n")?;
    put("narrative_graph.json", narrative_graph().to_json() + "\n")?;
    put("narrative_script.json", NARRATIVE_SCRIPT_JSON.to_string())?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivation::DerivationScript;

    #[test]
    fn bundle_writes_expected_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let files = bundle_examples(dir.path()).unwrap();
        assert!(!files.is_empty());
        let sd_count = files
            .iter()
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("sd_") && n.ends_with(".json"))
            })
            .count();
        assert_eq!(sd_count, 4);

        // Round-trip a few through their parsers.
        let xbar = DistanceMatrix::from_json(
            &fs::read_to_string(dir.path().join("xbar_i0.json")).unwrap(),
        )
        .unwrap();
        assert!(xbar.eq_as_space(&xbar_matrix(&XBarSpec { base: 0 })));
        let trefoil =
            KnotDiagram::parse(&fs::read_to_string(dir.path().join("trefoil.gauss")).unwrap())
                .unwrap();
        assert_eq!(trefoil.crossing_count(), 3);
        let script = DerivationScript::from_json(
            &fs::read_to_string(dir.path().join("narrative_script.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(script, narrative_script());
    }

    #[test]
    fn bundle_is_byte_deterministic() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let files1 = bundle_examples(dir1.path()).unwrap();
        let files2 = bundle_examples(dir2.path()).unwrap();
        assert_eq!(files1.len(), files2.len());
        for (a, b) in files1.iter().zip(files2.iter()) {
            assert_eq!(a.file_name(), b.file_name());
            assert_eq!(
                fs::read(a).unwrap(),
                fs::read(b).unwrap(),
                "{:?} differs",
                a.file_name()
            );
        }
    }

    #[test]
    fn poked_trefoil_has_five_crossings() {
        assert_eq!(trefoil_poked().crossing_count(), 5);
    }
}
