#!/usr/bin/env python3
"""Smoke test for the synfold_py extension module.

Builds nothing itself: expects `cargo build -p synfold-py` (or --release)
to have produced libsynfold_py.so, which this script copies next to itself
under the importable name and then exercises end to end.
"""

import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def locate_extension() -> Path:
    candidates = [
        REPO / "target" / profile / f"libsynfold_py{suffix}"
        for profile in ("release", "debug")
        for suffix in (".so", ".dylib")
    ]
    for path in candidates:
        if path.exists():
            return path
    sys.exit(
        "could not find the built extension; run `cargo build -p synfold-py` first"
    )


def import_module():
    source = locate_extension()
    staging = Path(tempfile.mkdtemp(prefix="synfold-py-"))
    shutil.copy2(source, staging / "synfold_py.so")
    sys.path.insert(0, str(staging))
    import synfold_py

    return synfold_py


def main() -> None:
    sf = import_module()
    checks = 0

    def check(label: str, condition: bool) -> None:
        nonlocal checks
        if not condition:
            sys.exit(f"FAIL: {label}")
        checks += 1
        print(f"ok: {label}")

    # Fields, classification, metrization.
    field = sf.DistanceMatrix.field(4, "2")
    check("constant field is ultrametric", field.classify() == "Ultrametric")
    stepped = field.metrize("p0", "p1", "1/2")
    check("one step keeps ultrametricity", stepped.classify() == "Ultrametric")
    stepped = stepped.metrize("p1", "p2", "7/10")
    check("second step yields a metric space", stepped.classify() == "Metric")
    check("shortcut distance", stepped.distance("p0", "p2") == "6/5")
    check(
        "closed ball of the ground state is everything",
        field.neighborhood("p0", "2") == ["p0", "p1", "p2", "p3"],
    )

    # X-bar matrix and its dendrogram.
    xbar = sf.DistanceMatrix.xbar(0)
    check("xbar census", xbar.census()["isoscelesTopTwoEqual"] == 1)
    tree = xbar.dendrogram()
    check("xbar tree leaves", sorted(tree.leaves()) == ["Spec", "X", "YP"])
    check("root dominates", tree.dominates(0, 1))
    back = tree.cophenetic()
    check("cophenetic round trip", back.distance("X", "YP") == "1")

    # Sentence analysis.
    sentence = sf.Sentence.from_json(
        """{ "tokens": ["John", "despises", "himself"],
             "addresses": [ { "id": "John", "occurrences": [[0,0],[2,2]] } ] }"""
    )
    report = sentence.analyze()
    check("reflexive sentence glues end to end", report["foldings"] == 1)
    check("no self-intersections", report["totalIntersections"] == 0)
    graph = sentence.to_graph()
    check("three occurrence vertices", graph.vertex_count() == 3)

    # Substitution.
    host = sf.Term.from_json(
        '{ "label": "K", "children": [ { "label": "John" }, { "slot": "L" } ] }'
    )
    comp = sf.Term.from_json('{ "label": "L", "children": [ { "label": "that" } ] }')
    combined = host.substitute("L", comp)
    check("substitution bracketing", combined.bracketing() == "[K John [L that]]")
    try:
        host.substitute("L", sf.Term.from_json('{ "label": "Z" }'))
        sys.exit("FAIL: mismatched substitution did not raise")
    except ValueError as e:
        check("root identity enforced", "RootIdentityViolation" in str(e))

    # Knots.
    trefoil = sf.Knot.parse("O1+ U2+ O3+ U1+ O2+ U3+")
    check("trefoil is tricolorable", trefoil.tricolorable())
    check("trefoil writhe", trefoil.writhe() == 3)
    twist2 = sf.Knot.parse("O1+ U1+ O2+ U2+")
    check("twists are not tricolorable", not twist2.tricolorable())
    moves = twist2.reduce(max_moves=6, max_crossings=4)
    check("two twists reduce in two moves", moves is not None and len(moves) == 2)
    try:
        trefoil.collapse(0, 1)
        sys.exit("FAIL: knot collapse did not raise")
    except ValueError as e:
        check("collapse is incompatible", "IncompatibleWithKnotTheory" in str(e))

    # Monotonicity helpers.
    check(
        "right-descending bracketing",
        sf.bracketing('["who", ["shows", ["he", ["deserves", ["it"]]]]]')
        == "[who [shows [he [deserves [it]]]]]",
    )
    check(
        "complex subject is not finite-state",
        not sf.fs_describable('[["the", "man"], ["saw", "her"]]'),
    )
    check(
        "two segments",
        sf.segments('[["the", "man"], ["saw", "her"]]')
        == ["[the man]", "[saw her]"],
    )

    # Script replay.
    graph_json = """{ "vertices": [
        { "vid": "p0", "address": "D", "form": "John", "predicative": false },
        { "vid": "p1", "address": "D", "form": "himself", "predicative": false },
        { "vid": "p2", "address": "P", "form": "clause", "predicative": true } ],
        "edges": [["p2", "p0"], ["p2", "p1"]] }"""
    script = '[ { "op": "metrize", "x": "p0", "y": "p1", "d": "1/2" }, { "op": "collapse", "address": "D" } ]'
    snapshots = sf.run_script(script, sf.DistanceMatrix.field(4, "2"), sf.Graph.from_json(graph_json))
    check("script snapshot count", len(snapshots) == 3)
    check("collapse classifies semimetric", snapshots[2][2] == "Semimetric")

    # Homomorphism over the bundled relation fixtures.
    corpus = Path(tempfile.mkdtemp(prefix="synfold-corpus-"))
    files = sf.bundle_examples(corpus)
    check("bundle wrote files", len(files) > 20)
    before = (corpus / "relations_before.json").read_text()
    after = (corpus / "relations_after.json").read_text()
    identity = {e: e for e in ("e", "John", "be", "murdered")}
    check("passive preserves relations", sf.homomorphism(before, after, identity))
    swapped = dict(identity, e="John", John="e")
    check("argument swap fails", not sf.homomorphism(before, after, swapped))

    steps, built = sf.classify_history(
        '[ {"op": "complex", "tree": ["the", "man"]}, {"op": "terminal", "form": "saw"}, {"op": "terminal", "form": "her"} ]'
    )
    check("history head step is non-monotonic", steps[0] == "NonMonotonic")
    check("history tree bracketing", built == "[[the man] [saw [her]]]")

    print(f"\nall {checks} smoke checks passed")


if __name__ == "__main__":
    main()
