"""Exact rational timing.

Onsets and durations are fractions of a quarter note. A chord's nominal
duration follows from its notehead class, stem presence, beam levels, flags
and dots; tuplet membership scales it by an inferred ratio. Onset inference
fills the onsets a score author may omit: within a note group only the first
chord needs explicit timing, the rest chain from accumulated durations.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from . import vocabulary
from .model import (
    CHORD, NOTE, NOTE_GROUP, REST, STEM, Measure, Node, Token,
)


class OnsetError(ValueError):
    """A chord chain is untimeable or contradicts its explicit onsets."""

    def __init__(self, subject: str, message: str):
        super().__init__(f"{subject}: {message}")
        self.subject = subject


def _dot_count(node: Node) -> int:
    """Dots attached to a chord (max over its notes) or a rest."""
    if node.kind == CHORD:
        counts = [0]
        for child in node.children:
            if isinstance(child, Node) and child.kind == NOTE:
                counts.append(sum(
                    1 for t in child.children
                    if isinstance(t, Token) and t.label == "dot"))
        return max(counts)
    return sum(1 for t in node.children
               if isinstance(t, Token) and t.label == "dot")


def _flag_count(chord: Node) -> int:
    for child in chord.children:
        if isinstance(child, Node) and child.kind == STEM:
            return sum(1 for t in child.children
                       if isinstance(t, Token) and t.label == "flag")
    return 0


def _has_stem(chord: Node) -> bool:
    return any(isinstance(c, Node) and c.kind == STEM for c in chord.children)


def _head_labels(chord: Node) -> list[str]:
    labels = []
    for child in chord.children:
        if isinstance(child, Node) and child.kind == NOTE:
            for t in child.children:
                if isinstance(t, Token) and t.label in vocabulary.NOTEHEADS:
                    labels.append(t.label)
    return labels


def duration_of(node: Node, *, beams: int = 0,
                factor: Fraction = Fraction(1)) -> Fraction:
    """Nominal duration of a chord or rest, in quarter notes.

    beams is the number of beam levels covering the chord (from enclosing
    note groups); factor is the combined tuplet ratio. Grace and cue
    noteheads take no time regardless of dots or flags.
    """
    dots = _dot_count(node)
    dot_factor = 2 - Fraction(1, 2 ** dots)
    if node.kind == REST:
        for t in node.children:
            if isinstance(t, Token) and t.label in vocabulary.RESTS:
                return vocabulary.REST_DURATIONS[t.label] * dot_factor * factor
        raise ValueError("rest node has no rest token")
    if node.kind != CHORD:
        raise ValueError(f"{node.kind} has no duration")
    heads = _head_labels(node)
    if not heads:
        raise ValueError("chord has no noteheads")
    if all(h in vocabulary.ZERO_DURATION_NOTEHEADS for h in heads):
        return Fraction(0)
    heads = [h for h in heads if h not in vocabulary.ZERO_DURATION_NOTEHEADS]
    base = Fraction(0)
    for head in heads:
        if head == "notehead_breve":
            dur = vocabulary.BREVE
        elif head == "notehead_white":
            dur = (vocabulary.WHITE_WITH_STEM if _has_stem(node)
                   else vocabulary.WHITE_WITHOUT_STEM)
        else:
            halvings = beams + _flag_count(node)
            dur = vocabulary.BLACK_BASE / (2 ** halvings)
        base = dur if base == 0 else min(base, dur)
    return base * dot_factor * factor


@dataclass(slots=True)
class TimedEvent:
    """A chord or rest located in its measure."""

    node: Node
    path: tuple[int, ...]  # child indices from the measure
    beams: int
    nominal: Fraction = Fraction(0)
    factor: Fraction = Fraction(1)
    group: int = -1  # index of the top-level node chain it belongs to

    @property
    def onset(self) -> Fraction | None:
        return self.node.onset

    @property
    def duration(self) -> Fraction:
        return self.nominal * self.factor


def timed_events(measure: Measure) -> list[TimedEvent]:
    """Chords and top-level rests in document order, with beam counts and
    tuplet factors resolved."""
    events: list[TimedEvent] = []

    def walk_group(node: Node, path: tuple[int, ...], beams: int, group: int):
        beams += sum(1 for c in node.children
                     if isinstance(c, Token) and c.label == "beam")
        for i, child in enumerate(node.children):
            if not isinstance(child, Node):
                continue
            if child.kind == CHORD:
                events.append(TimedEvent(child, path + (i,), beams, group=group))
            elif child.kind == NOTE_GROUP:
                walk_group(child, path + (i,), beams, group)

    for i, child in enumerate(measure.children):
        if child.kind == NOTE_GROUP:
            walk_group(child, (i,), 0, i)
        elif child.kind == REST:
            events.append(TimedEvent(child, (i,), 0, group=i))
    for ev in events:
        ev.nominal = duration_of(ev.node, beams=ev.beams)
    _apply_tuplet_factors(events)
    return events


def _tuplet_tokens(node: Node) -> list[tuple[str, str]]:
    """(role, pair_id) of tuplet tokens on a chord's notes or a rest."""
    found = []
    def scan(tokens):
        for t in tokens:
            if isinstance(t, Token) and t.label in ("tuplet_start", "tuplet_stop"):
                if t.pair_id is not None:
                    found.append((t.label, t.pair_id))
    if node.kind == CHORD:
        for child in node.children:
            if isinstance(child, Node) and child.kind == NOTE:
                scan(child.children)
    else:
        scan(node.children)
    return found


def _infer_ratio(members: list[TimedEvent]) -> Fraction:
    """Tuplet ratio normal/actual from member nominal durations.

    actual = span length in units of the smallest member duration; normal =
    largest power of two not above it. Unknowable spans get ratio 1.
    """
    nominals = [ev.nominal for ev in members if ev.nominal > 0]
    if not nominals:
        return Fraction(1)
    unit = min(nominals)
    n_units = sum(nominals) / unit
    if n_units.denominator != 1 or n_units < 3:
        return Fraction(1)
    actual = n_units.numerator
    normal = 1
    while normal * 2 <= actual:
        normal *= 2
    return Fraction(normal, actual)


def _apply_tuplet_factors(events: list[TimedEvent]) -> None:
    starts: dict[str, int] = {}
    stops: dict[str, int] = {}
    for idx, ev in enumerate(events):
        for role, pid in _tuplet_tokens(ev.node):
            target = starts if role == "tuplet_start" else stops
            target.setdefault(pid, idx)
    for pid, lo in starts.items():
        if pid not in stops:
            continue
        hi = stops[pid]
        if hi < lo:
            lo, hi = hi, lo
        members = events[lo:hi + 1]
        ratio = _infer_ratio(members)
        for ev in members:
            ev.factor *= ratio


def infer_onsets(measure: Measure) -> Measure:
    """Fill omitted chord onsets and verify explicit ones.

    Within each top-level note group, chords chain sequentially: each onset
    is the previous chord's onset plus its duration (grace chords contribute
    zero, so a grace run shares its principal's onset arithmetic). The first
    chord of a group must carry an onset. Explicit onsets that contradict
    the chain raise OnsetError. Fully timed measures pass through unchanged.
    """
    events = timed_events(measure)
    new_onsets: dict[tuple[int, ...], Fraction] = {}
    by_group: dict[int, list[TimedEvent]] = {}
    for ev in events:
        by_group.setdefault(ev.group, []).append(ev)
    for chain in by_group.values():
        first = chain[0]
        if first.onset is None:
            raise OnsetError(_path_str(measure, first.path),
                             "first chord of a group needs an explicit onset")
        cursor = first.onset + first.duration
        for ev in chain[1:]:
            if ev.onset is None:
                new_onsets[ev.path] = cursor
                cursor += ev.duration
            else:
                if ev.onset != cursor:
                    raise OnsetError(
                        _path_str(measure, ev.path),
                        f"onset {ev.onset} contradicts chained time {cursor}")
                cursor = ev.onset + ev.duration
    if not new_onsets:
        return measure

    def rebuild(node: Node, path: tuple[int, ...]) -> Node:
        children = tuple(
            rebuild(c, path + (i,)) if isinstance(c, Node) else c
            for i, c in enumerate(node.children))
        onset = new_onsets.get(path, node.onset)
        return replace(node, children=children, onset=onset)

    return replace(measure, children=tuple(
        rebuild(c, (i,)) for i, c in enumerate(measure.children)))


def strip_inferrable_onsets(measure: Measure) -> Measure:
    """Drop every chord onset that infer_onsets can restore.

    Keeps the first chord of each top-level group timed. Inverse of
    inference on verified measures.
    """
    events = timed_events(measure)
    keep: set[tuple[int, ...]] = set()
    seen_groups: set[int] = set()
    for ev in events:
        if ev.group not in seen_groups:
            seen_groups.add(ev.group)
            keep.add(ev.path)
    drop = {ev.path for ev in events
            if ev.path not in keep and ev.node.kind == CHORD}

    def rebuild(node: Node, path: tuple[int, ...]) -> Node:
        children = tuple(
            rebuild(c, path + (i,)) if isinstance(c, Node) else c
            for i, c in enumerate(node.children))
        onset = None if path in drop else node.onset
        return replace(node, children=children, onset=onset)

    return replace(measure, children=tuple(
        rebuild(c, (i,)) for i, c in enumerate(measure.children)))


def _path_str(measure: Measure, path: tuple[int, ...]) -> str:
    return measure.id + "/" + "/".join(str(i) for i in path)


def measure_end(measure: Measure) -> Fraction:
    """Latest offset of any timed content; 0 for an empty measure."""
    end = Fraction(0)
    for ev in timed_events(measure):
        if ev.onset is not None:
            end = max(end, ev.onset + ev.duration)
    return end
