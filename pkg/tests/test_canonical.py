"""Canonical reading order: the documented sort criteria, idempotence, and
construction-order independence."""

import itertools
import random
from fractions import Fraction

import builders as B
from mtnkit.canonical import assign_ids, canonicalize, canonicalize_work
from mtnkit.model import Measure, Node


def kinds(measure):
    return [c.kind for c in measure.children]


def onsets(measure):
    return [c.onset for c in measure.children]


def test_onset_before_class():
    m = B.measure(
        B.barline(onset=4),
        B.rest(onset=2),
        B.group(B.simple_chord(onset=0)))
    out = canonicalize(m)
    assert onsets(out) == [Fraction(0), Fraction(2), Fraction(4)]


def test_class_rank_at_equal_onset():
    m = B.measure(
        B.barline(onset=0),
        B.group(B.simple_chord(onset=0)),
        B.rest(onset=0),
        B.direction(onset=0),
        B.treble_attributes(onset=0))
    out = canonicalize(m)
    assert kinds(out) == ["attributes", "direction", "rest", "note_group",
                          "barline"]


def test_staff_then_step_at_equal_onset_and_class():
    lower_staff = B.group(B.simple_chord(onset=0, staff=2, step=4))
    upper_staff_high = B.group(B.simple_chord(onset=0, staff=1, step=8))
    upper_staff_low = B.group(B.simple_chord(onset=0, staff=1, step=4))
    m = B.measure(lower_staff, upper_staff_high, upper_staff_low)
    out = canonicalize(m)
    got = [(c.children[-1].children[-1].children[0].position.staff,
            c.children[-1].children[-1].children[0].position.step)
           for c in out.children]
    assert got == [(1, 4), (1, 8), (2, 4)]


def test_stem_direction_tiebreak():
    down = B.group(B.simple_chord(onset=0, step=6, direction="stem_down"))
    up = B.group(B.simple_chord(onset=0, step=6, direction="stem_up"))
    m = B.measure(down, up)
    out = canonicalize(m)
    first_stem = [t.label for t in
                  out.children[0].children[0].children[0].children][0]
    assert first_stem == "stem_up"


def test_token_alphabetical_tiebreak():
    # two positionless tokens on one note: accent before dot before staccato
    extras = (B.tok("staccato"), B.tok("dot"), B.tok("accent"))
    m = B.measure(B.group(B.simple_chord(extras=extras)))
    out = canonicalize(m)
    note = out.children[0].children[0].children[-1]
    labels = [t.label for t in note.children]
    assert labels == ["notehead_black", "accent", "dot", "staccato"]


def test_positioned_tokens_before_positionless():
    extras = (B.tok("dot"), B.tok("accidental_sharp", step=6))
    m = B.measure(B.group(B.simple_chord(step=6, extras=extras)))
    note = canonicalize(m).children[0].children[0].children[-1]
    labels = [t.label for t in note.children]
    assert labels == ["accidental_sharp", "notehead_black", "dot"]


def test_chord_stem_first_then_notes_low_to_high():
    ch = B.chord(B.note(step=8), B.note(step=4), B.note(step=6),
                 stem_node=B.stem())
    m = B.measure(B.group(ch))
    out = canonicalize(m).children[0].children[0]
    assert out.children[0].kind == "stem"
    steps = [n.children[0].position.step for n in out.children[1:]]
    assert steps == [4, 6, 8]


def test_attr_staff_clef_key_timesig_order():
    sig = Node("time_sig", (B.tok("timesig_common"),))
    key = Node("key", (B.tok("accidental_sharp", step=10),))
    clef = B.clef_node()
    m = B.measure(B.attributes(B.attr_staff(sig, key, clef)))
    out = canonicalize(m)
    block = out.children[0].children[0]
    assert [c.kind for c in block.children] == ["clef", "key", "time_sig"]


def test_attributes_staves_top_down():
    m = B.measure(B.attributes(
        B.attr_staff(B.clef_node("clef_F", staff=2, step=8)),
        B.attr_staff(B.clef_node("clef_G", staff=1, step=4))))
    out = canonicalize(m)
    staves = [blk.children[0].children[0].position.staff
              for blk in out.children[0].children]
    assert staves == [1, 2]


def test_beam_tokens_before_group_content():
    g = Node("note_group",
             (B.simple_chord(onset=0), B.tok("beam"), B.simple_chord(onset=Fraction(1, 2))),
             onset=Fraction(0))
    out = canonicalize(B.measure(g))
    labels = ["beam" if not isinstance(c, Node) else c.kind
              for c in out.children[0].children]
    assert labels == ["beam", "chord", "chord"]


def test_every_permutation_reaches_the_same_measure():
    parts = [B.treble_attributes(), B.rest(onset=0),
             B.group(B.simple_chord(onset=0, step=4)),
             B.direction("dyn_f", onset=0)]
    outs = set()
    for perm in itertools.permutations(parts):
        outs.add(canonicalize(B.measure(*perm)))
    assert len(outs) == 1


def test_idempotent():
    rng = random.Random(2024)
    for i in range(30):
        m = B.random_measure(rng, f"m{i}")
        once = canonicalize(m)
        assert canonicalize(once) == once


def test_canonicalize_is_sorting_only():
    # same multiset of children before and after
    rng = random.Random(7)
    for i in range(20):
        m = B.random_measure(rng, f"m{i}")
        out = canonicalize(m)
        assert sorted(map(repr, m.children)) == sorted(map(repr, out.children))


def test_assign_ids_renumbers_in_document_order():
    w = B.standard_work(1)
    ids = [t.id for t in __import__("mtnkit.model", fromlist=["iter_tokens"])
           .iter_tokens(w)]
    assert ids == [f"t{i + 1}" for i in range(len(ids))]


def test_assign_ids_pairs_in_first_appearance_order():
    m1 = B.measure(B.group(B.simple_chord(
        extras=(B.tok("slur_start", pair="zz"),))), id="m1")
    m2 = B.measure(B.group(B.simple_chord(
        extras=(B.tok("slur_stop", pair="zz"),),
        onset=0)), id="m2")
    w = B.work(m1, m2)
    from mtnkit.model import iter_tokens
    pair_ids = [t.pair_id for t in iter_tokens(w) if t.pair_id]
    assert pair_ids == ["p1", "p1"]


def test_construction_order_independence_end_to_end():
    rng = random.Random(99)
    for i in range(20):
        m = B.random_measure(rng, "m1")
        shuffled_children = list(m.children)
        rng.shuffle(shuffled_children)
        m2 = Measure(m.id, tuple(shuffled_children), m.line_start)
        a = assign_ids(canonicalize_work(B.work(m, normalize=False)))
        b = assign_ids(canonicalize_work(B.work(m2, normalize=False)))
        assert a == b
