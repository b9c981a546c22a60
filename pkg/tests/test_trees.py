"""Tree projection and terminal extraction."""

from collections import Counter
from fractions import Fraction

import pytest

import builders as B
from mtnkit.model import Node
from mtnkit.trees import extract_terminals, project_tree


def count_nodes(measure):
    """Independent node count: 1 for the measure, each structural node, and
    each token."""
    def rec(item):
        if not isinstance(item, Node):
            return 1
        return 1 + sum(rec(c) for c in item.children)
    return 1 + sum(rec(c) for c in measure.children)


def test_labels_structural():
    m = B.measure(B.group(B.simple_chord(step=4), beams=1))
    t = project_tree(m)
    labels = [n.label for n in t.walk()]
    assert labels == ["measure", "note_group", "beam", "chord", "stem",
                      "stem_up", "note", "notehead_black"]


def test_size_matches_independent_count():
    import random
    rng = random.Random(5)
    for i in range(20):
        m = B.random_measure(rng, f"m{i}")
        assert project_tree(m).size == count_nodes(m)


def test_none_projects_to_empty_tree():
    t = project_tree(None)
    assert t.root is None
    assert t.size == 0


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        project_tree(B.standard_measure(), "fancy")


def test_terminals_beamed_pair():
    m = B.measure(B.group(B.simple_chord(step=6),
                          B.simple_chord(step=8, onset=Fraction(1, 2),
                                         direction="stem_down"),
                          beams=1))
    got = extract_terminals(m)
    assert got == Counter({"notehead_black": 2, "stem_up": 1,
                           "stem_down": 1, "beam": 1})
    assert sum(got.values()) == 5


def test_terminals_equal_structural_leaf_labels():
    import random
    rng = random.Random(6)
    for i in range(20):
        m = B.random_measure(rng, f"m{i}")
        leaves = Counter(n.label for n in project_tree(m).walk()
                         if not n.children and n.token_id is not None)
        assert leaves == extract_terminals(m)


def test_terminals_synthetic_switch():
    m = B.measure(
        B.treble_attributes(synthetic=True),
        B.group(B.simple_chord()))
    full = extract_terminals(m)
    assert full["clef_G"] == 1
    skipped = extract_terminals(m, include_synthetic=False)
    assert skipped["clef_G"] == 0
    assert skipped["notehead_black"] == 1


def test_semantic_meta_on_noteheads():
    m = B.measure(B.group(
        B.simple_chord(step=6, onset=0),
        B.simple_chord(step=8, onset=Fraction(1, 2)), beams=1))
    t = project_tree(m, "semantic")
    heads = [n for n in t.walk() if n.meta is not None and not n.meta.is_rest]
    assert len(heads) == 2
    first, second = sorted(heads, key=lambda n: n.meta.onset)
    assert (first.meta.staff, first.meta.step) == (1, 6)
    assert first.meta.onset == 0
    assert first.meta.duration == Fraction(1, 2)
    assert second.meta.onset == Fraction(1, 2)
    assert second.meta.head == "notehead_black"


def test_semantic_meta_on_rests():
    m = B.measure(B.rest("rest_eighth", onset=Fraction(3, 2)))
    t = project_tree(m, "semantic")
    rests = [n for n in t.walk() if n.meta is not None and n.meta.is_rest]
    assert len(rests) == 1
    assert rests[0].meta.onset == Fraction(3, 2)
    assert rests[0].meta.duration == Fraction(1, 2)
    assert rests[0].meta.staff == 1


def test_semantic_and_structural_labels_identical():
    m = B.standard_measure()
    structural = [n.label for n in project_tree(m).walk()]
    semantic = [n.label for n in project_tree(m, "semantic").walk()]
    assert structural == semantic


def test_synthetic_flag_propagates_to_leaves():
    m = B.measure(B.treble_attributes(synthetic=True),
                  B.group(B.simple_chord()))
    t = project_tree(m)
    synth = {n.label for n in t.walk() if n.synthetic}
    assert "clef_G" in synth
    assert "notehead_black" not in synth
