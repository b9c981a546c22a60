"""Three-tier evaluation metrics for predicted measures against truth.

Tier 1 scores primitive detection: per-class precision and recall over
token labels, matched per measure as the minimum of the two counts, with
a truth-frequency-weighted aggregate.

Tier 2 is the tree error rate: edit distance between the structural tree
projections under unit costs, normalized by the truth tree size.

Tier 3 reads the semantic-cost edit mapping and scores the matched note
events: missed/spurious rates, pitch and staff and time precision, and
signed average shifts. A note event is a notehead or rest leaf; pitch
metrics apply to notehead pairs, time metrics to all matched events.

All counts are accumulated corpus-wide and divided once at the end, so
every rate is a ratio of sums, never a mean of per-measure ratios. Rates
are exact fractions; callers format them as floats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .model import Measure
from .trees import (
    EMPTY_TREE, LabeledTree, NoteMeta, extract_terminals, project_tree,
)
from .ted import EditScript, SEMANTIC_COSTS, UNIT_COSTS, tree_edit_distance
from .vocabulary import is_known


# ---------------------------------------------------------------------------
# Tier 1: primitive detection.

@dataclass(slots=True)
class ClassTally:
    """Counts for one token class, summable across measures."""

    truth: int = 0
    predicted: int = 0
    matched: int = 0

    @property
    def precision(self) -> Fraction | None:
        if self.predicted == 0:
            return None
        return Fraction(self.matched, self.predicted)

    @property
    def recall(self) -> Fraction | None:
        if self.truth == 0:
            return None
        return Fraction(self.matched, self.truth)

    def add(self, other: "ClassTally") -> None:
        self.truth += other.truth
        self.predicted += other.predicted
        self.matched += other.matched


@dataclass(slots=True)
class Tier1Report:
    classes: dict[str, ClassTally]
    aggregate_precision: Fraction | None
    aggregate_recall: Fraction | None
    undefined_precision: tuple[str, ...]  # truth classes never predicted

    @property
    def total_truth(self) -> int:
        return sum(t.truth for t in self.classes.values())

    @property
    def total_matched(self) -> int:
        return sum(t.matched for t in self.classes.values())


def tally_terminals(truth: Measure, predicted: Measure | None,
                    include_synthetic: bool = True) -> dict[str, ClassTally]:
    """Per-class counts for one aligned measure pair."""
    g = extract_terminals(truth, include_synthetic=include_synthetic)
    p = (extract_terminals(predicted, include_synthetic=include_synthetic)
         if predicted is not None else {})
    out: dict[str, ClassTally] = {}
    for label in set(g) | set(p):
        out[label] = ClassTally(truth=g.get(label, 0),
                                predicted=p.get(label, 0),
                                matched=min(g.get(label, 0), p.get(label, 0)))
    return out


def tier1_report(classes: dict[str, ClassTally]) -> Tier1Report:
    """Weighted aggregate over accumulated class tallies.

    Class weights are truth-count shares; classes absent from the truth
    have weight zero. A truth class with no predictions contributes zero
    precision and is listed as undefined.
    """
    total = sum(t.truth for t in classes.values())
    if total == 0:
        return Tier1Report(classes, None, None, ())
    precision = Fraction(0)
    recall = Fraction(0)
    undefined = []
    for label, tally in sorted(classes.items()):
        if tally.truth == 0:
            continue
        weight = Fraction(tally.truth, total)
        recall += weight * tally.recall
        if tally.precision is None:
            undefined.append(label)
        else:
            precision += weight * tally.precision
    return Tier1Report(classes, precision, recall, tuple(undefined))


def merge_tallies(into: dict[str, ClassTally],
                  part: dict[str, ClassTally]) -> None:
    for label, tally in part.items():
        into.setdefault(label, ClassTally()).add(tally)


# ---------------------------------------------------------------------------
# Tier 2: tree error rate.

def ter_score(truth: Measure,
              predicted: Measure | None) -> tuple[Fraction, EditScript]:
    """(tree error rate, edit script) for one measure pair.

    The rate is the unit-cost structural edit distance divided by the
    truth tree size; a missing prediction costs one deletion per truth
    node, i.e. exactly 1.
    """
    g = project_tree(truth, mode="structural")
    p = (project_tree(predicted, mode="structural")
         if predicted is not None else EMPTY_TREE)
    script = tree_edit_distance(g, p, UNIT_COSTS)
    return Fraction(script.cost) / g.size, script


# ---------------------------------------------------------------------------
# Tier 3: semantic note metrics.

@dataclass(slots=True)
class Tier3Counts:
    """Accumulated note-event counts; rates are derived properties.

    truth_events/pred_events count notehead and rest leaves; matched is
    |M|. Pitch fields cover only the matched notehead pairs.
    """

    truth_events: int = 0
    pred_events: int = 0
    matched: int = 0
    matched_notes: int = 0
    step_correct: int = 0
    staff_correct: int = 0
    tuple_correct: int = 0
    time_correct: int = 0
    step_diff: int = 0
    staff_diff: int = 0
    time_diff: Fraction = field(default_factory=Fraction)

    def add(self, other: "Tier3Counts") -> None:
        self.truth_events += other.truth_events
        self.pred_events += other.pred_events
        self.matched += other.matched
        self.matched_notes += other.matched_notes
        self.step_correct += other.step_correct
        self.staff_correct += other.staff_correct
        self.tuple_correct += other.tuple_correct
        self.time_correct += other.time_correct
        self.step_diff += other.step_diff
        self.staff_diff += other.staff_diff
        self.time_diff += other.time_diff

    # -- rates -------------------------------------------------------------

    @property
    def missed_note_rate(self) -> Fraction | None:
        if self.truth_events == 0:
            return None
        return Fraction(self.truth_events - self.matched, self.truth_events)

    @property
    def false_positive_rate(self) -> Fraction | None:
        if self.pred_events == 0:
            return None
        return Fraction(self.pred_events - self.matched, self.pred_events)

    @property
    def pitch_precision(self) -> Fraction | None:
        """Both staff and step correct, over matched notehead pairs."""
        if self.matched_notes == 0:
            return None
        return Fraction(self.tuple_correct, self.matched_notes)

    @property
    def step_precision(self) -> Fraction | None:
        if self.matched_notes == 0:
            return None
        return Fraction(self.step_correct, self.matched_notes)

    @property
    def staff_precision(self) -> Fraction | None:
        if self.matched_notes == 0:
            return None
        return Fraction(self.staff_correct, self.matched_notes)

    @property
    def time_precision(self) -> Fraction | None:
        if self.matched == 0:
            return None
        return Fraction(self.time_correct, self.matched)

    @property
    def pitch_shift(self) -> Fraction | None:
        if self.matched_notes == 0:
            return None
        return Fraction(self.step_diff, self.matched_notes)

    @property
    def staff_shift(self) -> Fraction | None:
        if self.matched_notes == 0:
            return None
        return Fraction(self.staff_diff, self.matched_notes)

    @property
    def time_shift(self) -> Fraction | None:
        if self.matched == 0:
            return None
        return self.time_diff / self.matched


def _note_events(tree: LabeledTree) -> list[NoteMeta]:
    return [n.meta for n in tree.postorder() if n.meta is not None]


def tier3_counts(truth: Measure, predicted: Measure | None) -> Tier3Counts:
    """Score matched note events from the semantic edit mapping."""
    g = project_tree(truth, mode="semantic")
    p = (project_tree(predicted, mode="semantic")
         if predicted is not None else EMPTY_TREE)
    script = tree_edit_distance(g, p, SEMANTIC_COSTS)
    counts = Tier3Counts()
    counts.truth_events = len(_note_events(g))
    counts.pred_events = len(_note_events(p))
    if g.root is None:
        return counts
    g_nodes = g.postorder()
    p_nodes = p.postorder()
    for gi, pi in script.mapping:
        gm = g_nodes[gi].meta
        pm = p_nodes[pi].meta
        if gm is None or pm is None:
            continue
        if gm.is_rest != pm.is_rest:
            continue  # only like-for-like event pairs enter M
        counts.matched += 1
        if gm.onset == pm.onset:
            counts.time_correct += 1
        counts.time_diff += pm.onset - gm.onset
        if not gm.is_rest:
            counts.matched_notes += 1
            if gm.step == pm.step:
                counts.step_correct += 1
            if gm.staff == pm.staff:
                counts.staff_correct += 1
            if gm.step == pm.step and gm.staff == pm.staff:
                counts.tuple_correct += 1
            counts.step_diff += pm.step - gm.step
            counts.staff_diff += pm.staff - gm.staff
    return counts


# ---------------------------------------------------------------------------
# Combined per-measure evaluation and corpus accumulation.

@dataclass(slots=True)
class MeasureEval:
    """Everything the harness needs from one aligned measure pair."""

    measure_id: str
    cost: Fraction
    truth_size: int
    tier1: dict[str, ClassTally]
    tier3: Tier3Counts

    @property
    def ter(self) -> Fraction:
        return Fraction(self.cost) / self.truth_size


def evaluate_measure(truth: Measure, predicted: Measure | None,
                     include_synthetic: bool = True) -> MeasureEval:
    rate, script = ter_score(truth, predicted)
    return MeasureEval(
        measure_id=truth.id,
        cost=Fraction(script.cost),
        truth_size=script.a_size,
        tier1=tally_terminals(truth, predicted, include_synthetic),
        tier3=tier3_counts(truth, predicted),
    )


@dataclass(slots=True)
class CorpusTally:
    """Ratio-of-sums accumulator over measure evaluations."""

    cost: Fraction = field(default_factory=Fraction)
    truth_nodes: int = 0
    measures: int = 0
    classes: dict[str, ClassTally] = field(default_factory=dict)
    tier3: Tier3Counts = field(default_factory=Tier3Counts)

    def add(self, ev: MeasureEval) -> None:
        self.cost += ev.cost
        self.truth_nodes += ev.truth_size
        self.measures += 1
        merge_tallies(self.classes, ev.tier1)
        self.tier3.add(ev.tier3)

    def merge(self, other: "CorpusTally") -> None:
        self.cost += other.cost
        self.truth_nodes += other.truth_nodes
        self.measures += other.measures
        merge_tallies(self.classes, other.classes)
        self.tier3.add(other.tier3)

    @property
    def ter(self) -> Fraction | None:
        if self.truth_nodes == 0:
            return None
        return self.cost / self.truth_nodes

    def tier1(self) -> Tier1Report:
        return tier1_report(self.classes)


def check_labels(classes: dict[str, ClassTally]) -> list[str]:
    """Labels outside the vocabulary, for harness warnings."""
    return sorted(label for label in classes if not is_known(label))
