"""Corpus evaluation harness.

A corpus is described by a JSON-lines manifest: one entry per page holding
the work id, page id, the measure ids in top-down reading order, the work
file's path relative to the corpus root, and an optional partition tag.
Truth and prediction trees live under two roots at the same relative
paths.

Alignment is per page: when the predicted work contains every measure id
the page lists, measures pair by id; otherwise the page's truth sequence
is zipped against the predicted work's measures in document order, extra
predictions are discarded (and counted), and leftover truth measures
count as fully missed, entering the metrics as empty predictions unless
the matched-only switch is set.

Page evaluations are independent, so they can run on a process pool; the
merge is associative and applied in manifest order, which makes the
report byte-identical for any worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .metrics import CorpusTally, MeasureEval, evaluate_measure
from .model import Measure, MTNWork
from .xmlio import FormatError, parse_work


class ManifestError(ValueError):
    pass


# Reference results of a published large-corpus baseline run (a commercial
# recognition engine against an engraved-score corpus). Not reproducible
# from this package; kept to document expected report columns and rough
# magnitudes. Keys mirror EvalReport fields.
REFERENCE_BASELINE = {
    "coverage": 0.769,
    "aggregate_precision": 0.894,
    "aggregate_recall": 0.733,
    "truth_tokens": 647965,
    "ter": 0.372,
    "time_shift": -0.096,
    "pitch_shift": -0.091,
    "staff_shift": 0.022,
    "time_precision": 0.802,
    "pitch_precision": 0.749,
    "staff_precision": 0.963,
    "false_positive_rate": 0.097,
    "missed_note_rate": 0.216,
}


@dataclass(frozen=True, slots=True)
class ManifestEntry:
    work: str
    page: str
    path: str
    measures: tuple[str, ...]
    partition: str | None = None


_ENTRY_KEYS = {"work", "page", "path", "measures", "partition"}


def read_manifest(text: str) -> list[ManifestEntry]:
    """Parse a JSON-lines manifest; one page entry per line."""
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"line {lineno}: bad JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ManifestError(f"line {lineno}: entry must be an object")
        unknown = set(raw) - _ENTRY_KEYS
        if unknown:
            raise ManifestError(
                f"line {lineno}: unknown keys {sorted(unknown)}")
        for key in ("work", "page", "path"):
            if not isinstance(raw.get(key), str):
                raise ManifestError(f"line {lineno}: {key} must be a string")
        measures = raw.get("measures")
        if (not isinstance(measures, list) or not measures
                or not all(isinstance(m, str) for m in measures)):
            raise ManifestError(
                f"line {lineno}: measures must be a non-empty string list")
        if len(set(measures)) != len(measures):
            raise ManifestError(f"line {lineno}: duplicate measure ids")
        partition = raw.get("partition")
        if partition is not None and not isinstance(partition, str):
            raise ManifestError(f"line {lineno}: partition must be a string")
        entries.append(ManifestEntry(raw["work"], raw["page"], raw["path"],
                                     tuple(measures), partition))
    return entries


def write_manifest(entries: list[ManifestEntry]) -> str:
    lines = []
    for e in entries:
        record = {"work": e.work, "page": e.page, "path": e.path,
                  "measures": list(e.measures)}
        if e.partition is not None:
            record["partition"] = e.partition
        lines.append(json.dumps(record, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def manifest_for_work(work: MTNWork, path: str,
                      partition: str | None = None) -> list[ManifestEntry]:
    """Single-page manifest entries for one work (one entry per work)."""
    ids = [m.id for part in work.parts for m in part.measures]
    return [ManifestEntry(work.work_id, "1", path, tuple(ids), partition)]


# ---------------------------------------------------------------------------
# Alignment.

@dataclass(slots=True)
class Alignment:
    pairs: list[tuple[Measure, Measure | None]]
    discarded: int  # surplus predicted measures
    missed: int     # truth measures with no prediction


def align_measures(entry: ManifestEntry, truth: MTNWork,
                   predicted: MTNWork | None) -> Alignment:
    """Pair a page's truth measures with predicted measures.

    Pairs by measure id when the prediction has them all, else zips in
    reading order per the discard rule.
    """
    truth_by_id = {m.id: m for part in truth.parts for m in part.measures}
    missing = [mid for mid in entry.measures if mid not in truth_by_id]
    if missing:
        raise ManifestError(
            f"page {entry.page} of {entry.work}: manifest names measures "
            f"missing from the truth work: {missing[:3]}")
    truth_list = [truth_by_id[mid] for mid in entry.measures]
    if predicted is None:
        return Alignment([(t, None) for t in truth_list], 0, len(truth_list))
    pred_by_id = {m.id: m for part in predicted.parts
                  for m in part.measures}
    if all(mid in pred_by_id for mid in entry.measures):
        return Alignment([(t, pred_by_id[t.id]) for t in truth_list], 0, 0)
    pred_list = [m for part in predicted.parts for m in part.measures]
    pairs: list[tuple[Measure, Measure | None]] = []
    for i, t in enumerate(truth_list):
        pairs.append((t, pred_list[i] if i < len(pred_list) else None))
    discarded = max(0, len(pred_list) - len(truth_list))
    missed = max(0, len(truth_list) - len(pred_list))
    return Alignment(pairs, discarded, missed)


# ---------------------------------------------------------------------------
# Corpus evaluation.

@dataclass(frozen=True, slots=True)
class EvalConfig:
    tiers: tuple[int, ...] = (1, 2, 3)
    include_synthetic: bool = True   # count synthetic attributes in tier 1
    matched_only: bool = False       # drop missed measures from tier 2/3
    partition: str | None = None
    jobs: int = 1
    per_measure: bool = False        # include the per-measure cost table


@dataclass(slots=True)
class PageOutcome:
    index: int
    evals: list[MeasureEval]
    matched: int = 0
    discarded: int = 0
    missed: int = 0
    skipped: bool = False
    warnings: list[str] = field(default_factory=list)


def _load_work(path: Path, warnings: list[str],
               side: str) -> MTNWork | None:
    try:
        data = path.read_bytes()
    except OSError as exc:
        warnings.append(f"{side} file unreadable: {exc}")
        return None
    try:
        return parse_work(data, on_warning=lambda msg: warnings.append(
            f"{side} {path.name}: {msg}"))
    except FormatError as exc:
        warnings.append(f"{side} file {path.name} rejected: {exc}")
        return None


def _evaluate_entry(args: tuple) -> PageOutcome:
    index, truth_root, pred_root, entry, config = args
    out = PageOutcome(index=index, evals=[])
    truth = _load_work(Path(truth_root) / entry.path, out.warnings, "truth")
    if truth is None:
        out.skipped = True
        return out
    predicted = _load_work(Path(pred_root) / entry.path, out.warnings,
                           "prediction")
    alignment = align_measures(entry, truth, predicted)
    out.discarded = alignment.discarded
    out.missed = alignment.missed
    for t, p in alignment.pairs:
        if p is not None:
            out.matched += 1
        elif config.matched_only:
            continue
        out.evals.append(evaluate_measure(
            t, p, include_synthetic=config.include_synthetic))
    return out


@dataclass(slots=True)
class EvalReport:
    config: EvalConfig
    tally: CorpusTally
    truth_measures: int = 0
    matched: int = 0
    discarded: int = 0
    missed: int = 0
    skipped_pages: int = 0
    per_measure: list[tuple[str, Fraction, int]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def coverage(self) -> Fraction | None:
        if self.truth_measures == 0:
            return None
        return Fraction(self.matched, self.truth_measures)


def evaluate_corpus(truth_root: str | Path, pred_root: str | Path,
                    entries: list[ManifestEntry],
                    config: EvalConfig | None = None) -> EvalReport:
    """Evaluate every manifest page; deterministic for any worker count."""
    config = config or EvalConfig()
    if config.partition is not None:
        entries = [e for e in entries if e.partition == config.partition]
    report = EvalReport(config=config, tally=CorpusTally())
    args = [(i, str(truth_root), str(pred_root), entry, config)
            for i, entry in enumerate(entries)]
    if config.jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_evaluate_entry, args))
    else:
        outcomes = [_evaluate_entry(a) for a in args]
    for entry, outcome in zip(entries, outcomes):
        report.truth_measures += len(entry.measures)
        report.matched += outcome.matched
        report.discarded += outcome.discarded
        report.missed += outcome.missed
        report.skipped_pages += 1 if outcome.skipped else 0
        report.warnings.extend(outcome.warnings)
        for ev in outcome.evals:
            report.tally.add(ev)
            if config.per_measure:
                report.per_measure.append(
                    (ev.measure_id, Fraction(ev.cost), ev.truth_size))
    return report


# ---------------------------------------------------------------------------
# Report serialization.

def _rat(x: Fraction | None) -> str | None:
    return None if x is None else str(Fraction(x))


def report_to_json(report: EvalReport) -> str:
    """Canonical JSON rendering; rationals as exact "num/den" strings."""
    tier1 = report.tally.tier1()
    total_truth = tier1.total_truth
    doc: dict = {
        "tool": {"name": "mtnkit", "version": __version__},
        "config": {
            "tiers": sorted(report.config.tiers),
            "include_synthetic": report.config.include_synthetic,
            "matched_only": report.config.matched_only,
            "partition": report.config.partition,
        },
        "coverage": {
            "truth_measures": report.truth_measures,
            "matched": report.matched,
            "ratio": _rat(report.coverage),
            "discarded_predictions": report.discarded,
            "missed_measures": report.missed,
            "skipped_pages": report.skipped_pages,
        },
        "warnings": list(report.warnings),
    }
    if 1 in report.config.tiers:
        classes = {}
        for label, tally in sorted(report.tally.classes.items()):
            classes[label] = {
                "truth": tally.truth,
                "predicted": tally.predicted,
                "matched": tally.matched,
                "precision": _rat(tally.precision),
                "recall": _rat(tally.recall),
                "proportion": _rat(Fraction(tally.truth, total_truth)
                                   if total_truth else None),
            }
        doc["tier1"] = {
            "classes": classes,
            "aggregate_precision": _rat(tier1.aggregate_precision),
            "aggregate_recall": _rat(tier1.aggregate_recall),
            "undefined_precision": list(tier1.undefined_precision),
            "total_truth_tokens": total_truth,
        }
    if 2 in report.config.tiers:
        doc["tier2"] = {
            "ter": _rat(report.tally.ter),
            "edit_cost": _rat(report.tally.cost),
            "truth_nodes": report.tally.truth_nodes,
            "measures": report.tally.measures,
        }
        if report.config.per_measure:
            doc["tier2"]["per_measure"] = [
                {"id": mid, "cost": _rat(cost), "truth_nodes": size,
                 "ter": _rat(cost / size)}
                for mid, cost, size in report.per_measure]
    if 3 in report.config.tiers:
        t3 = report.tally.tier3
        doc["tier3"] = {
            "truth_events": t3.truth_events,
            "predicted_events": t3.pred_events,
            "matched": t3.matched,
            "matched_notes": t3.matched_notes,
            "missed_note_rate": _rat(t3.missed_note_rate),
            "false_positive_rate": _rat(t3.false_positive_rate),
            "pitch_precision": _rat(t3.pitch_precision),
            "step_precision": _rat(t3.step_precision),
            "staff_precision": _rat(t3.staff_precision),
            "time_precision": _rat(t3.time_precision),
            "pitch_shift": _rat(t3.pitch_shift),
            "staff_shift": _rat(t3.staff_shift),
            "time_shift": _rat(t3.time_shift),
        }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _fmt(x: Fraction | None, width: int = 0) -> str:
    text = "-" if x is None else f"{float(x):.3f}"
    return text.rjust(width) if width else text


def render_report(report: EvalReport) -> str:
    """Human-readable text tables for the terminal."""
    lines: list[str] = []
    cov = report.coverage
    pct = "-" if cov is None else f"{float(cov) * 100:.1f}%"
    lines.append(
        f"Coverage: {report.matched}/{report.truth_measures} measures "
        f"({pct}); {report.discarded} extra predictions discarded, "
        f"{report.missed} measures missed, "
        f"{report.skipped_pages} pages skipped")
    if 1 in report.config.tiers:
        tier1 = report.tally.tier1()
        total = tier1.total_truth
        lines.append("")
        lines.append(f"{'Class':<28}{'Precision':>10}{'Recall':>8}"
                     f"{'Counts':>8}{'Prop':>7}")
        ordered = sorted(report.tally.classes.items(),
                         key=lambda kv: (-kv[1].truth, kv[0]))
        for label, tally in ordered:
            prop = Fraction(tally.truth, total) if total else None
            lines.append(f"{label:<28}{_fmt(tally.precision, 10)}"
                         f"{_fmt(tally.recall, 8)}{tally.truth:>8}"
                         f"{_fmt(prop, 7)}")
        lines.append(f"{'all (weighted)':<28}"
                     f"{_fmt(tier1.aggregate_precision, 10)}"
                     f"{_fmt(tier1.aggregate_recall, 8)}{total:>8}"
                     f"{_fmt(Fraction(1) if total else None, 7)}")
        if tier1.undefined_precision:
            lines.append("precision undefined (never predicted): "
                         + ", ".join(tier1.undefined_precision))
    if 2 in report.config.tiers or 3 in report.config.tiers:
        t3 = report.tally.tier3
        columns = [
            ("TER", report.tally.ter if 2 in report.config.tiers else None),
            ("Time Shift", t3.time_shift),
            ("Pitch Shift", t3.pitch_shift),
            ("Staff Shift", t3.staff_shift),
            ("Time Prec.", t3.time_precision),
            ("Pitch Prec.", t3.pitch_precision),
            ("Staff Prec.", t3.staff_precision),
            ("FPR", t3.false_positive_rate),
            ("MNR", t3.missed_note_rate),
        ]
        if 3 not in report.config.tiers:
            columns = columns[:1]
        lines.append("")
        lines.append("  ".join(name.rjust(max(len(name), 6))
                               for name, _ in columns))
        lines.append("  ".join(_fmt(value, max(len(name), 6))
                               for name, value in columns))
    if report.config.per_measure and report.per_measure:
        lines.append("")
        lines.append(f"{'Measure':<24}{'Cost':>8}{'Nodes':>7}{'TER':>8}")
        for mid, cost, size in report.per_measure:
            lines.append(f"{mid:<24}{_fmt(cost, 8)}{size:>7}"
                         f"{_fmt(cost / size, 8)}")
    return "\n".join(lines) + "\n"
