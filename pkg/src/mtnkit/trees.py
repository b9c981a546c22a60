"""Projection of measures onto plain ordered labeled trees.

Tier 2 and Tier 3 metrics run on these projections rather than the rich
model: internal nodes are labeled by their structural kind, leaves by their
token class. Structural mode stops there; semantic mode additionally
attaches pitch/time metadata to notehead and rest leaves for the refined
cost model (labels stay identical in both modes, so the structural edit
distance is unchanged by the metadata).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

from . import vocabulary
from .model import NOTE, REST, Measure, Node, Token
from .timing import TimedEvent, timed_events

MEASURE_LABEL = "measure"


@dataclass(frozen=True, slots=True)
class NoteMeta:
    """Semantic payload of a notehead leaf."""

    staff: int
    step: int
    head: str
    onset: Fraction
    duration: Fraction
    token_id: str
    is_rest: bool = False


@dataclass(frozen=True, slots=True)
class TreeNode:
    label: str
    children: tuple["TreeNode", ...] = ()
    meta: Optional[NoteMeta] = None
    token_id: str | None = None
    synthetic: bool = False


@dataclass(frozen=True, slots=True)
class LabeledTree:
    """An ordered labeled tree; root may be absent (the empty tree)."""

    root: TreeNode | None = None

    @property
    def size(self) -> int:
        return sum(1 for _ in self.walk())

    def walk(self) -> Iterator[TreeNode]:
        def rec(n: TreeNode) -> Iterator[TreeNode]:
            yield n
            for c in n.children:
                yield from rec(c)
        if self.root is not None:
            yield from rec(self.root)

    def postorder(self) -> list[TreeNode]:
        out: list[TreeNode] = []
        def rec(n: TreeNode) -> None:
            for c in n.children:
                rec(c)
            out.append(n)
        if self.root is not None:
            rec(self.root)
        return out


EMPTY_TREE = LabeledTree(None)


def _leaf(token: Token, meta: NoteMeta | None = None,
          synthetic: bool = False) -> TreeNode:
    return TreeNode(token.label, meta=meta, token_id=token.id,
                    synthetic=synthetic)


def _semantic_rest_meta(ev: TimedEvent, token: Token) -> NoteMeta:
    return NoteMeta(staff=token.position.staff, step=0, head=token.label,
                    onset=ev.onset if ev.onset is not None else Fraction(0),
                    duration=ev.duration, token_id=token.id, is_rest=True)


def project_tree(measure: Measure | None, mode: str = "structural") -> LabeledTree:
    """Project a measure to a labeled tree; None projects to the empty tree.

    mode "structural" labels leaves by token class only; "semantic" also
    attaches (staff, step, head class, onset, duration) to notehead leaves
    and (staff, onset, duration) to rest leaves.
    """
    if mode not in ("structural", "semantic"):
        raise ValueError(f"unknown projection mode: {mode}")
    if measure is None:
        return EMPTY_TREE
    semantic = mode == "semantic"
    ev_by_path: dict[tuple[int, ...], TimedEvent] = {}
    if semantic:
        ev_by_path = {ev.path: ev for ev in timed_events(measure)}

    def build(node: Node, path: tuple[int, ...],
              synthetic: bool) -> TreeNode:
        synthetic = synthetic or node.synthetic
        ev = ev_by_path.get(path)
        kids: list[TreeNode] = []
        for i, child in enumerate(node.children):
            if isinstance(child, Token):
                meta = None
                if semantic and node.kind == REST and child.label in vocabulary.RESTS:
                    rest_ev = ev if ev is not None else None
                    if rest_ev is not None:
                        meta = _semantic_rest_meta(rest_ev, child)
                kids.append(_leaf(child, meta, synthetic))
            else:
                kids.append(build(child, path + (i,), synthetic))
        if semantic and node.kind == NOTE:
            chord_ev = ev_by_path.get(path[:-1])
            if chord_ev is not None:
                kids = [_attach_note_meta(k, node, chord_ev) for k in kids]
        return TreeNode(node.kind, tuple(kids), synthetic=synthetic)

    def _attach_note_meta(leaf: TreeNode, note: Node,
                          ev: TimedEvent) -> TreeNode:
        if leaf.meta is not None or leaf.label not in vocabulary.NOTEHEADS:
            return leaf
        token = next(t for t in note.children
                     if isinstance(t, Token) and t.id == leaf.token_id)
        step = token.position.step if token.position.step is not None else 0
        meta = NoteMeta(staff=token.position.staff, step=step,
                        head=token.label,
                        onset=ev.onset if ev.onset is not None else Fraction(0),
                        duration=ev.duration, token_id=token.id)
        return TreeNode(leaf.label, leaf.children, meta, leaf.token_id,
                        leaf.synthetic)

    children = tuple(
        build(child, (i,), False) for i, child in enumerate(measure.children))
    return LabeledTree(TreeNode(MEASURE_LABEL, children))


def extract_terminals(measure: Measure | None, *,
                      include_synthetic: bool = True) -> Counter:
    """Multiset of token class labels in a measure.

    Equals the leaf-label multiset of the structural projection. With
    include_synthetic False, tokens under synthesized line-start attribute
    nodes are skipped.
    """
    counts: Counter = Counter()
    if measure is None:
        return counts

    def walk(node: Node, synthetic: bool) -> None:
        synthetic = synthetic or node.synthetic
        if synthetic and not include_synthetic:
            return
        for child in node.children:
            if isinstance(child, Token):
                counts[child.label] += 1
            else:
                walk(child, synthetic)

    for child in measure.children:
        walk(child, False)
    return counts
