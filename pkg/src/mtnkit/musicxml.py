"""MusicXML to tree-score conversion.

Walks score-partwise (or timewise, regrouped first) documents with an exact
rational time cursor, maps engraving-level content to primitive tokens, and
assembles the measure trees: beam runs become nested note groups, spanners
pair through shared ids, key signatures expand to clef-dependent accidental
positions, and system breaks mark line-start measures which then receive
synthetic clef/key restatements.

Everything the walker cannot represent is reported in the returned warning
list with the element's location; nothing is dropped silently except
content that is excluded by design (lyrics, harmony frames, playback-only
elements).
"""

from __future__ import annotations

import itertools
import zipfile
from dataclasses import dataclass, field, replace
from fractions import Fraction
from io import BytesIO
from pathlib import Path
from xml.etree import ElementTree as ET

from .canonical import assign_ids, canonicalize_work
from .model import (
    ATTR_STAFF, ATTRIBUTES, BARLINE, CHORD, CLEF, DIRECTION, KEY, MTNWork,
    Measure, NOTE, NOTE_GROUP, Node, Part, REST, STEM, StaffPosition,
    TIME_SIG, Token, validate,
)

_LETTERS = {"C": 0, "D": 1, "E": 2, "F": 3, "G": 4, "A": 5, "B": 6}

MIDDLE_STEP = 6  # the middle staff line


class ConversionError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class ClefState:
    """Active clef of one staff: token label, staff step of the clef token,
    and the diatonic index that maps to step 0."""

    label: str | None
    line_step: int
    ref_index: int  # diatonic index (octave*7 + letter) rendered at step 0

    @staticmethod
    def treble() -> "ClefState":
        return ClefState("clef_G", 4, 28)


def clef_state(sign: str, line: int | None, octave_change: int = 0) -> ClefState | None:
    """Clef element to state; None for unpositioned signs (percussion, TAB).

    A G clef fixes G4 on its line, F fixes F3, C fixes C4; an octave change
    shifts the reference by seven steps per octave.
    """
    defaults = {"G": 2, "F": 4, "C": 3}
    anchors = {"G": 4 * 7 + 4, "F": 3 * 7 + 3, "C": 4 * 7 + 0}
    if sign not in defaults:
        return None
    line = line if line is not None else defaults[sign]
    line_step = 2 * line
    ref = anchors[sign] - line_step + 7 * octave_change
    if sign == "C":
        label = "clef_C"
    elif octave_change:
        label = f"clef_oct_{sign}"
    else:
        label = f"clef_{sign}"
    return ClefState(label, line_step, ref)


def pitch_to_step(letter: str, octave: int, clef: ClefState) -> int:
    """Staff step of a written pitch under a clef.

    Steps count diatonic positions from the first ledger line below the
    staff: bottom line 2, top line 10. Treble C4 is 0; bass E2 is 0.
    """
    if letter not in _LETTERS:
        raise ValueError(f"bad pitch letter {letter!r}")
    return octave * 7 + _LETTERS[letter] - clef.ref_index


# Key signature accidental steps per clef family at its default line.
# Derived from standard engraving pitch sequences (e.g. treble sharps
# F5 C5 G5 D5 A4 E5 B4).
_SHARP_STEPS = {
    ("G", 4): (10, 7, 11, 8, 5, 9, 6),
    ("F", 8): (8, 5, 9, 6, 3, 7, 4),
    ("C", 6): (9, 6, 10, 7, 4, 8, 5),
    ("C", 8): (4, 8, 5, 9, 6, 10, 7),
}
_FLAT_STEPS = {
    ("G", 4): (6, 9, 5, 8, 4, 7, 3),
    ("F", 8): (4, 7, 3, 6, 2, 5, 1),
    ("C", 6): (5, 8, 4, 7, 3, 6, 2),
    ("C", 8): (7, 10, 6, 9, 5, 8, 4),
}


def key_signature_steps(fifths: int, clef: ClefState) -> tuple[str, tuple[int, ...]]:
    """(accidental label, steps) for a key signature under a clef.

    Non-default clef lines reuse the family table shifted by the line
    delta. fifths 0 yields no accidentals here; cancellation naturals are
    the caller's concern.
    """
    if fifths == 0:
        return ("accidental_natural", ())
    table = _SHARP_STEPS if fifths > 0 else _FLAT_STEPS
    label = "accidental_sharp" if fifths > 0 else "accidental_flat"
    family = (clef.label or "clef_G").split("_")[-1]
    if family not in ("G", "F", "C"):
        family = "G"
    default_line = {"G": 4, "F": 8,
                    "C": 6 if clef.line_step <= 6 else 8}[family]
    steps = table[(family, default_line)]
    shift = clef.line_step - default_line
    count = min(abs(fifths), 7)
    return (label, tuple(s + shift for s in steps[:count]))


class TimeCursor:
    """Measure-local time in quarter notes, driven by divisions-based
    durations with backup/forward moves."""

    def __init__(self, divisions: int = 1):
        self.divisions = divisions
        self.now = Fraction(0)
        self.high_water = Fraction(0)

    def reset(self) -> None:
        self.now = Fraction(0)
        self.high_water = Fraction(0)

    def quarters(self, duration_divisions: int) -> Fraction:
        return Fraction(duration_divisions, self.divisions)

    def advance(self, duration_divisions: int) -> Fraction:
        """Consume a duration; returns the onset it started at."""
        onset = self.now
        self.now += self.quarters(duration_divisions)
        if self.now > self.high_water:
            self.high_water = self.now
        return onset

    def backup(self, duration_divisions: int) -> None:
        self.now -= self.quarters(duration_divisions)
        if self.now < 0:
            self.now = Fraction(0)

    def forward(self, duration_divisions: int) -> None:
        self.advance(duration_divisions)


# ---------------------------------------------------------------------------
# Conversion context and event types.

_TYPE_FLAGS = {"eighth": 1, "16th": 2, "32nd": 3, "64th": 4, "128th": 5,
               "256th": 6}
_KIND_RANK = {"black": 0, "half": 1, "whole": 2, "breve": 3}
_REST_BY_TYPE = {
    "maxima": "rest_maxima", "long": "rest_long", "breve": "rest_breve",
    "whole": "rest_whole", "half": "rest_half", "quarter": "rest_quarter",
    "eighth": "rest_eighth", "16th": "rest_16th", "32nd": "rest_32nd",
    "64th": "rest_64th", "128th": "rest_128th", "256th": "rest_128th",
}
_ARTICULATIONS = {"staccato": "staccato", "accent": "accent",
                  "tenuto": "tenuto", "caesura": "caesura"}
_DYNAMICS_WORDS = {
    "p", "pp", "ppp", "pppp", "ppppp", "pppppp", "f", "ff", "fff", "ffff",
    "fffff", "ffffff", "mp", "mf", "sf", "sfp", "sfpp", "fp", "rf", "rfz",
    "sfz", "sffz", "fz", "n", "pf", "sfzp",
}


@dataclass(slots=True)
class _NoteInfo:
    """One note element inside a chord event."""

    staff: int
    step: int | None
    tokens: list[Token] = field(default_factory=list)  # modifiers
    head: str = "notehead_black"


@dataclass(slots=True)
class _ChordEvent:
    onset: Fraction
    voice: str
    notes: list[_NoteInfo]
    stem: str | None = None
    beams: dict[int, str] = field(default_factory=dict)
    flags: int = 0
    kind: str = "black"  # black | half | whole | breve
    grace: bool = False


class _IdGen:
    def __init__(self) -> None:
        self._tokens = itertools.count(1)
        self._pairs = itertools.count(1)

    def token(self) -> str:
        return f"t{next(self._tokens)}"

    def pair(self) -> str:
        return f"q{next(self._pairs)}"


@dataclass(slots=True)
class _PartState:
    part_id: str
    cursor: TimeCursor = field(default_factory=TimeCursor)
    clefs: dict[int, ClefState] = field(default_factory=dict)
    fifths: dict[int, int] = field(default_factory=dict)
    staves: int = 1

    def clef(self, staff: int) -> ClefState:
        return self.clefs.get(staff, ClefState.treble())


@dataclass(frozen=True, slots=True)
class ConvertOptions:
    work_id: str | None = None
    use_print_breaks: bool = True
    explicit_breaks: tuple[str, ...] = ()  # measure numbers starting lines


@dataclass(slots=True)
class ConversionResult:
    work: MTNWork
    warnings: list[str]


class _Converter:
    def __init__(self, options: ConvertOptions):
        self.options = options
        self.ids = _IdGen()
        self.warnings: list[str] = []
        self.open_spanners: dict[tuple, str] = {}
        self.spanner_members: dict[str, int] = {}
        self.where = ""
        self.part_scope = ""  # spanners never pair across parts

    def warn(self, message: str) -> None:
        self.warnings.append(f"{self.where}: {message}" if self.where
                             else message)

    # -- token helpers ----------------------------------------------------

    def token(self, label: str, staff: int, step: int | None = None,
              pair: str | None = None, value: int | None = None) -> Token:
        if pair is not None:
            self.spanner_members[pair] = self.spanner_members.get(pair, 0) + 1
        return Token(self.ids.token(), label, StaffPosition(staff, step),
                     pair_id=pair, numeric_value=value)

    def open_pair(self, key: tuple) -> str:
        pair = self.ids.pair()
        self.open_spanners[(self.part_scope,) + key] = pair
        return pair

    def close_pair(self, key: tuple) -> str | None:
        return self.open_spanners.pop((self.part_scope,) + key, None)

    # -- conversion -------------------------------------------------------

    def convert(self, root: ET.Element, work_id: str) -> ConversionResult:
        if root.tag == "score-timewise":
            root = _timewise_to_partwise(root)
        if root.tag != "score-partwise":
            raise ConversionError(
                f"expected score-partwise or score-timewise, got <{root.tag}>")
        parts: list[Part] = []
        breaks: set[str] = set(self.options.explicit_breaks)
        part_elems = root.findall("part")
        if not part_elems:
            raise ConversionError("score has no parts")
        if self.options.use_print_breaks:
            for pe in part_elems:
                for me in pe.findall("measure"):
                    pr = me.find("print")
                    if pr is not None and (
                            pr.get("new-system") == "yes"
                            or pr.get("new-page") == "yes"):
                        breaks.add(me.get("number", ""))
        known_numbers = {me.get("number", "")
                         for pe in part_elems for me in pe.findall("measure")}
        for number in self.options.explicit_breaks:
            if number not in known_numbers:
                raise ConversionError(
                    f"explicit break names unknown measure {number!r}")
        for pe in part_elems:
            parts.append(self.convert_part(pe, breaks))
        work = MTNWork(work_id, tuple(parts))
        work = _prune_dangling_pairs(work, self)
        work = inject_line_starts(work)
        work = assign_ids(canonicalize_work(work))
        problems = validate(work)
        if problems:
            raise ConversionError(
                "conversion produced an invalid work: "
                + "; ".join(str(v) for v in problems[:5]))
        return ConversionResult(work, self.warnings)

    def convert_part(self, pe: ET.Element, breaks: set[str]) -> Part:
        part_id = pe.get("id", "P")
        self.part_scope = part_id
        state = _PartState(part_id)
        measures = []
        seen_ids: set[str] = set()
        for index, me in enumerate(pe.findall("measure")):
            number = me.get("number", str(index + 1))
            self.where = f"part {part_id} measure {number}"
            if me.get("implicit") == "yes":
                self.warn("pickup measure (implicit); converted as ordinary")
            line_start = index == 0 or number in breaks
            measure_id = f"{part_id}.{number}"
            while measure_id in seen_ids:
                measure_id += "+"
                self.warn(f"duplicate measure number; renamed {measure_id}")
            seen_ids.add(measure_id)
            measures.append(self.convert_measure(me, state, measure_id,
                                                 line_start))
        return Part(state.staves, tuple(measures))

    def convert_measure(self, me: ET.Element, state: _PartState,
                        measure_id: str, line_start: bool) -> Measure:
        state.cursor.reset()
        top: list[Node] = []          # rests, directions, attributes
        events: list[_ChordEvent] = []
        barlines: list[tuple[str, list[Token]]] = []  # (location, tokens)
        for elem in me:
            tag = elem.tag
            if tag == "attributes":
                node = self.handle_attributes(elem, state)
                if node is not None:
                    top.append(node)
            elif tag == "note":
                self.handle_note(elem, state, events, top)
            elif tag == "backup":
                state.cursor.backup(self._duration(elem))
            elif tag == "forward":
                state.cursor.forward(self._duration(elem))
            elif tag == "direction":
                top.extend(self.handle_direction(elem, state))
            elif tag == "barline":
                got = self.handle_barline(elem)
                if got is not None:
                    barlines.append(got)
            elif tag in ("print", "sound", "listening", "grouping",
                         "harmony", "figured-bass", "bookmark", "link"):
                pass  # layout/playback/analysis content, excluded by design
            else:
                self.warn(f"unhandled element <{tag}>")
        top.extend(self.build_note_groups(events))
        end = state.cursor.high_water
        for location, tokens in barlines:
            onset = Fraction(0) if location == "left" else end
            top.append(Node(BARLINE, tuple(tokens), onset=onset))
        return Measure(measure_id, tuple(top), line_start=line_start)

    def _duration(self, elem: ET.Element) -> int:
        raw = elem.findtext("duration")
        try:
            return int(raw)
        except (TypeError, ValueError):
            self.warn(f"missing or bad duration in <{elem.tag}>")
            return 0

    # -- attributes -------------------------------------------------------

    def handle_attributes(self, elem: ET.Element,
                          state: _PartState) -> Node | None:
        onset = state.cursor.now
        divisions = elem.findtext("divisions")
        if divisions:
            state.cursor.divisions = int(divisions)
        staves = elem.findtext("staves")
        if staves:
            state.staves = max(state.staves, int(staves))
        per_staff: dict[int, list[Node]] = {}

        for ce in elem.findall("clef"):
            staff = int(ce.get("number", "1"))
            state.staves = max(state.staves, staff)
            sign = ce.findtext("sign", "G")
            line = ce.findtext("line")
            octave_change = int(ce.findtext("clef-octave-change") or 0)
            cs = clef_state(sign, int(line) if line else None, octave_change)
            if cs is None:
                self.warn(f"clef sign {sign!r} unsupported; "
                          "treating staff as treble for positions")
                state.clefs[staff] = replace(ClefState.treble(), label=None)
                continue
            state.clefs[staff] = cs
            per_staff.setdefault(staff, []).append(Node(CLEF, (self.token(
                cs.label, staff, cs.line_step),)))

        for ke in elem.findall("key"):
            target_staves = ([int(ke.get("number"))] if ke.get("number")
                             else list(range(1, state.staves + 1)))
            state.staves = max(state.staves, *target_staves)
            raw = ke.findtext("fifths")
            if raw is None:
                self.warn("key without fifths")
                continue
            fifths = int(raw)
            for staff in target_staves:
                tokens = self.key_tokens(fifths, staff, state)
                state.fifths[staff] = fifths
                if tokens:
                    per_staff.setdefault(staff, []).append(
                        Node(KEY, tuple(tokens)))

        for te in elem.findall("time"):
            target_staves = ([int(te.get("number"))] if te.get("number")
                             else list(range(1, state.staves + 1)))
            state.staves = max(state.staves, *target_staves)
            for staff in target_staves:
                tokens = self.time_tokens(te, staff)
                if tokens:
                    per_staff.setdefault(staff, []).append(
                        Node(TIME_SIG, tuple(tokens)))

        for tag in ("measure-style", "directive", "for-part"):
            if elem.find(tag) is not None:
                self.warn(f"unhandled attributes content <{tag}>")

        if not per_staff:
            return None
        blocks = tuple(Node(ATTR_STAFF, tuple(kids))
                       for _, kids in sorted(per_staff.items()))
        return Node(ATTRIBUTES, blocks, onset=onset)

    def key_tokens(self, fifths: int, staff: int,
                   state: _PartState) -> list[Token]:
        clef = state.clef(staff)
        if fifths == 0:
            previous = state.fifths.get(staff, 0)
            if previous == 0:
                return []
            _, steps = key_signature_steps(previous, clef)
            return [self.token("accidental_natural", staff, s) for s in steps]
        label, steps = key_signature_steps(fifths, clef)
        if abs(fifths) > 7:
            self.warn(f"key with {fifths} fifths clipped to 7 accidentals")
        return [self.token(label, staff, s) for s in steps]

    def time_tokens(self, te: ET.Element, staff: int) -> list[Token]:
        symbol = te.get("symbol")
        if te.find("senza-misura") is not None:
            self.warn("senza-misura time signature has no tokens")
            return []
        if symbol in ("common", "cut"):
            return [self.token(f"timesig_{symbol}", staff)]
        if symbol not in (None, "normal"):
            self.warn(f"time symbol {symbol!r} rendered as numbers")
        tokens: list[Token] = []
        beats_list = te.findall("beats")
        types_list = te.findall("beat-type")
        for be, ty in zip(beats_list, types_list):
            for raw, step in ((be.text, 8), (ty.text, 4)):
                for piece in (raw or "").split("+"):
                    piece = piece.strip()
                    if not piece.isdigit():
                        self.warn(f"non-numeric time signature part {raw!r}")
                        continue
                    tokens.append(self.token("timesig_number", staff, step,
                                             value=int(piece)))
        if len(beats_list) > 1:
            self.warn("compound interchangeable time signature flattened")
        return tokens

    # -- directions -------------------------------------------------------

    def handle_direction(self, elem: ET.Element,
                         state: _PartState) -> list[Node]:
        staff = int(elem.findtext("staff") or 1)
        onset = state.cursor.now
        offset = elem.findtext("offset")
        if offset:
            try:
                onset = onset + state.cursor.quarters(int(offset))
            except ValueError:
                self.warn(f"bad direction offset {offset!r}")
            if onset < 0:
                self.warn("direction offset before measure start; clamped")
                onset = Fraction(0)
        out: list[Node] = []
        for dt in elem.findall("direction-type"):
            for child in dt:
                out.extend(self.direction_tokens(child, staff, onset))
        return out

    def direction_tokens(self, child: ET.Element, staff: int,
                         onset: Fraction) -> list[Node]:
        tag = child.tag
        nodes: list[Node] = []
        if tag == "dynamics":
            for mark in child:
                if mark.tag in _DYNAMICS_WORDS:
                    nodes.append(Node(DIRECTION, (self.token(
                        f"dyn_{mark.tag}", staff),), onset=onset))
                else:
                    self.warn(f"dynamics mark <{mark.tag}> unsupported")
        elif tag == "wedge":
            wtype = child.get("type")
            number = child.get("number", "1")
            if wtype in ("crescendo", "diminuendo"):
                pair = self.open_pair(("wedge", number))
                nodes.append(Node(DIRECTION, (self.token(
                    f"wedge_{wtype}", staff, pair=pair),), onset=onset))
            elif wtype == "stop":
                pair = self.close_pair(("wedge", number))
                if pair is None:
                    self.warn("wedge stop without a start; dropped")
                else:
                    nodes.append(Node(DIRECTION, (self.token(
                        "wedge_stop", staff, pair=pair),), onset=onset))
            else:
                self.warn(f"wedge type {wtype!r} unsupported")
        elif tag == "segno":
            nodes.append(Node(DIRECTION, (self.token("segno", staff),),
                              onset=onset))
        elif tag == "coda":
            nodes.append(Node(DIRECTION, (self.token("coda", staff),),
                              onset=onset))
        elif tag in ("words", "rehearsal", "metronome", "octave-shift",
                     "pedal", "dashes", "bracket", "principal-voice",
                     "percussion", "accordion-registration", "string-mute",
                     "scordatura", "image", "harp-pedals", "damp",
                     "damp-all", "eyeglasses", "symbol", "other-direction",
                     "staff-divide"):
            self.warn(f"direction <{tag}> is not representable")
        else:
            self.warn(f"unhandled direction <{tag}>")
        return nodes

    # -- barlines ---------------------------------------------------------

    def handle_barline(self, elem: ET.Element) -> tuple[str, list[Token]] | None:
        location = elem.get("location", "right")
        tokens: list[Token] = []
        style = elem.findtext("bar-style")
        style_map = {
            "regular": ["barline_tok_regular"],
            "light-light": ["barline_tok_regular", "barline_tok_regular"],
            "light-heavy": ["barline_tok_regular", "barline_tok_heavy"],
            "heavy-light": ["barline_tok_heavy", "barline_tok_regular"],
            "heavy": ["barline_tok_heavy"],
            "heavy-heavy": ["barline_tok_heavy", "barline_tok_heavy"],
        }
        if style in style_map:
            tokens.extend(self.token(lbl, 1) for lbl in style_map[style])
        elif style in ("dotted", "dashed", "tick", "short"):
            self.warn(f"bar style {style!r} approximated as regular")
            tokens.append(self.token("barline_tok_regular", 1))
        elif style == "none" or style is None:
            pass
        else:
            self.warn(f"bar style {style!r} unsupported")
        repeat = elem.find("repeat")
        if repeat is not None:
            direction = repeat.get("direction")
            if direction in ("forward", "backward"):
                tokens.append(self.token(f"repeat_{direction}", 1))
            else:
                self.warn(f"repeat direction {direction!r} unsupported")
        for fe in elem.findall("fermata"):
            tokens.append(self.token("fermata", 1))
        if elem.find("ending") is not None:
            self.warn("volta ending bracket is not representable")
        if not tokens:
            return None
        return (location, tokens)

    # -- notes ------------------------------------------------------------

    def handle_note(self, elem: ET.Element, state: _PartState,
                    events: list[_ChordEvent], top: list[Node]) -> None:
        staff = int(elem.findtext("staff") or 1)
        state.staves = max(state.staves, staff)
        voice = elem.findtext("voice") or "1"
        grace = elem.find("grace") is not None
        is_chord_note = elem.find("chord") is not None
        duration = 0 if grace else self._duration(elem)

        rest_elem = elem.find("rest")
        if rest_elem is not None:
            onset = state.cursor.advance(duration)
            node = self.rest_node(elem, rest_elem, staff, onset,
                                  state.cursor.quarters(duration))
            top.append(node)
            return

        pitch = elem.find("pitch")
        unpitched = elem.find("unpitched")
        if pitch is not None:
            letter = pitch.findtext("step", "C")
            octave = int(pitch.findtext("octave", "4"))
            step = pitch_to_step(letter, octave, state.clef(staff))
        elif unpitched is not None:
            letter = unpitched.findtext("display-step")
            octave_text = unpitched.findtext("display-octave")
            if letter and octave_text:
                step = pitch_to_step(letter, int(octave_text),
                                     state.clef(staff))
            else:
                self.warn("unpitched note without display position; "
                          "placed on the middle line")
                step = MIDDLE_STEP
        else:
            self.warn("note without pitch; placed on the middle line")
            step = MIDDLE_STEP

        if is_chord_note and events:
            event = events[-1]
        else:
            onset = (state.cursor.now if grace
                     else state.cursor.advance(duration))
            event = _ChordEvent(onset=onset, voice=voice, notes=[])
            events.append(event)

        ntype = elem.findtext("type")
        head, kind = self.head_class(elem, ntype, duration, state, grace)
        info = _NoteInfo(staff=staff, step=step, head=head)
        info.tokens.append(self.token(head, staff, step))
        self.note_modifiers(elem, info, staff, step)
        event.notes.append(info)
        event.grace = event.grace or grace
        # a mixed chord keeps a stem if any member is a stemmed shape
        if (len(event.notes) == 1
                or _KIND_RANK[kind] < _KIND_RANK[event.kind]):
            event.kind = kind
        stem_text = elem.findtext("stem")
        if stem_text in ("up", "down") and event.stem is None:
            event.stem = f"stem_{stem_text}"
        elif stem_text == "none":
            event.stem = "none"
        for be in elem.findall("beam"):
            level = int(be.get("number", "1"))
            event.beams[level] = (be.text or "").strip()
        if not event.beams and ntype in _TYPE_FLAGS:
            event.flags = _TYPE_FLAGS[ntype]

    def head_class(self, elem: ET.Element, ntype: str | None, duration: int,
                   state: _PartState, grace: bool) -> tuple[str, str | None]:
        """(notehead token label, chord kind) for one note element."""
        if grace:
            return "notehead_grace_black", "black"
        if elem.find("cue") is not None:
            if ntype in ("whole", "breve", "long", "maxima", "half"):
                return "notehead_cue_white", "whole"
            return "notehead_cue_black", "black"
        if ntype is None:
            quarters = state.cursor.quarters(duration) if duration else Fraction(1)
            if quarters >= 8:
                ntype = "breve"
            elif quarters >= 4:
                ntype = "whole"
            elif quarters >= 2:
                ntype = "half"
            else:
                ntype = "quarter"
            self.warn(f"note without type; assuming {ntype} from duration")
        if ntype in ("breve", "long", "maxima"):
            if ntype != "breve":
                self.warn(f"note type {ntype!r} approximated as a breve")
            return "notehead_breve", "breve"
        if ntype == "whole":
            return "notehead_white", "whole"
        if ntype == "half":
            return "notehead_white", "half"
        return "notehead_black", "black"

    def note_modifiers(self, elem: ET.Element, info: _NoteInfo, staff: int,
                       step: int | None) -> None:
        acc = elem.findtext("accidental")
        acc_map = {"sharp": "accidental_sharp", "flat": "accidental_flat",
                   "natural": "accidental_natural",
                   "double-sharp": "accidental_double_sharp",
                   "sharp-sharp": "accidental_double_sharp",
                   "flat-flat": "accidental_double_flat"}
        if acc is not None:
            acc = acc.strip()
            if acc in acc_map:
                info.tokens.append(self.token(acc_map[acc], staff, step))
            else:
                self.warn(f"accidental {acc!r} unsupported")
        for _ in elem.findall("dot"):
            info.tokens.append(self.token("dot", staff))

        handled_tie = False
        for notations in elem.findall("notations"):
            for item in notations:
                tag = item.tag
                if tag == "slur":
                    self.slur_token(item, info, staff)
                elif tag == "tied":
                    self.tie_token(item, info, staff, step)
                    handled_tie = True
                elif tag == "tuplet":
                    self.tuplet_token(item, info, staff)
                elif tag == "articulations":
                    for art in item:
                        if art.tag in _ARTICULATIONS:
                            info.tokens.append(self.token(
                                _ARTICULATIONS[art.tag], staff))
                        elif art.tag == "strong-accent":
                            self.warn("strong accent approximated as accent")
                            info.tokens.append(self.token("accent", staff))
                        elif art.tag == "breath-mark":
                            self.warn("breath mark is not representable")
                        else:
                            self.warn(f"articulation <{art.tag}> unsupported")
                elif tag == "ornaments":
                    for orn in item:
                        if orn.tag == "trill-mark":
                            info.tokens.append(self.token("trill", staff))
                        elif orn.tag in ("turn", "delayed-turn",
                                         "inverted-turn"):
                            if orn.tag != "turn":
                                self.warn(f"{orn.tag} approximated as a turn")
                            info.tokens.append(self.token("turn", staff))
                        elif orn.tag == "wavy-line":
                            if orn.get("type") != "stop":
                                info.tokens.append(self.token("wavy_line",
                                                              staff))
                        elif orn.tag == "accidental-mark":
                            pass  # engraved with its ornament; skipped
                        else:
                            self.warn(f"ornament <{orn.tag}> unsupported")
                elif tag == "fermata":
                    info.tokens.append(self.token("fermata", staff))
                elif tag == "arpeggiate":
                    info.tokens.append(self.token("arpeggiate", staff))
                elif tag in ("technical", "glissando", "slide",
                             "non-arpeggiate", "accidental-mark",
                             "other-notation", "dynamics"):
                    self.warn(f"notation <{tag}> unsupported")
        if not handled_tie:
            for tie in elem.findall("tie"):
                self.tie_token(tie, info, staff, step)

    def slur_token(self, item: ET.Element, info: _NoteInfo,
                   staff: int) -> None:
        stype = item.get("type")
        number = item.get("number", "1")
        if stype == "start":
            pair = self.open_pair(("slur", number))
            info.tokens.append(self.token("slur_start", staff, pair=pair))
        elif stype == "stop":
            pair = self.close_pair(("slur", number))
            if pair is None:
                self.warn("slur stop without a start; dropped")
            else:
                info.tokens.append(self.token("slur_stop", staff, pair=pair))
        elif stype != "continue":
            self.warn(f"slur type {stype!r} unsupported")

    def tie_token(self, item: ET.Element, info: _NoteInfo, staff: int,
                  step: int | None) -> None:
        ttype = item.get("type")
        key = ("tied", staff, step)
        if ttype == "start":
            pair = self.open_pair(key)
            info.tokens.append(self.token("tied_start", staff, pair=pair))
        elif ttype == "stop":
            pair = self.close_pair(key)
            if pair is None:
                self.warn("tie stop without a start; dropped")
            else:
                info.tokens.append(self.token("tied_stop", staff, pair=pair))
        elif ttype not in ("continue", "let-ring"):
            self.warn(f"tie type {ttype!r} unsupported")

    def tuplet_token(self, item: ET.Element, info: _NoteInfo,
                     staff: int) -> None:
        ttype = item.get("type")
        number = item.get("number", "1")
        if ttype == "start":
            pair = self.open_pair(("tuplet", number))
            info.tokens.append(self.token("tuplet_start", staff, pair=pair))
        elif ttype == "stop":
            pair = self.close_pair(("tuplet", number))
            if pair is None:
                self.warn("tuplet stop without a start; dropped")
            else:
                info.tokens.append(self.token("tuplet_stop", staff,
                                              pair=pair))
        else:
            self.warn(f"tuplet type {ttype!r} unsupported")

    def rest_node(self, elem: ET.Element, rest_elem: ET.Element, staff: int,
                  onset: Fraction, quarters: Fraction) -> Node:
        ntype = elem.findtext("type")
        if rest_elem.get("measure") == "yes":
            label = "rest_breve" if quarters >= 8 else "rest_whole"
        elif ntype is None:
            self.warn("typeless rest classified by duration")
            label = ("rest_whole" if quarters == 0
                     else _rest_for_duration(quarters))
        else:
            label = _REST_BY_TYPE.get(ntype)
            if label is None:
                self.warn(f"rest type {ntype!r} unsupported; using duration")
                label = _rest_for_duration(quarters)
        info = _NoteInfo(staff=staff, step=None)
        info.tokens.append(self.token(label, staff))
        self.note_modifiers(elem, info, staff, None)
        return Node(REST, tuple(info.tokens), onset=onset)

    # -- beam grouping ----------------------------------------------------

    def build_note_groups(self, events: list[_ChordEvent]) -> list[Node]:
        """Assemble per-voice note groups from beam states."""
        groups: list[Node] = []
        by_voice: dict[str, list[_ChordEvent]] = {}
        for ev in events:
            by_voice.setdefault(ev.voice, []).append(ev)
        for voice in sorted(by_voice):
            run: list[_ChordEvent] = []
            for ev in by_voice[voice]:
                if ev.beams.get(1) in ("begin", "continue", "end"):
                    run.append(ev)
                    if ev.beams.get(1) == "end":
                        groups.append(self.beamed_group(run, 1))
                        run = []
                else:
                    if run:  # unterminated run
                        self.warn("beam run without an end; closed early")
                        groups.append(self.beamed_group(run, 1))
                        run = []
                    groups.append(self.singleton_group(ev))
            if run:
                self.warn("beam run without an end; closed early")
                groups.append(self.beamed_group(run, 1))
        return groups

    def singleton_group(self, ev: _ChordEvent) -> Node:
        chord = self.chord_node(ev, beamed=False)
        return Node(NOTE_GROUP, (chord,), onset=chord.onset)

    def beamed_group(self, run: list[_ChordEvent], level: int) -> Node:
        """One beam level's run; deeper levels nest, full-width deeper runs
        collapse into extra beam tokens on the same group."""
        staff = run[0].notes[0].staff
        beam_tokens = [self.token("beam", staff)]
        # a deeper beam spanning the whole run joins this group directly
        while (len(run) > 1
               and run[0].beams.get(level + 1) == "begin"
               and run[-1].beams.get(level + 1) == "end"
               and all(ev.beams.get(level + 1) == "continue"
                       for ev in run[1:-1])):
            beam_tokens.append(self.token("beam", staff))
            level += 1
        children: list[Node] = []
        i = 0
        while i < len(run):
            ev = run[i]
            state_here = ev.beams.get(level + 1)
            if state_here in ("begin", "continue", "end"):
                sub = [ev]
                while (state_here != "end" and i + 1 < len(run)
                       and run[i + 1].beams.get(level + 1)
                       in ("continue", "end")):
                    i += 1
                    sub.append(run[i])
                    state_here = run[i].beams.get(level + 1)
                children.append(self.beamed_group(sub, level + 1))
            elif state_here in ("forward hook", "backward hook"):
                hook_staff = ev.notes[0].staff
                chord = self.chord_node(ev, beamed=True)
                children.append(Node(
                    NOTE_GROUP,
                    (self.token("beam", hook_staff), chord),
                    onset=chord.onset))
            else:
                children.append(self.chord_node(ev, beamed=True))
            i += 1
        onset = min(c.onset for c in children if c.onset is not None)
        return Node(NOTE_GROUP, tuple(beam_tokens) + tuple(children),
                    onset=onset)

    def chord_node(self, ev: _ChordEvent, beamed: bool) -> Node:
        notes = tuple(Node(NOTE, tuple(info.tokens)) for info in ev.notes)
        stem = self.stem_node(ev, beamed)
        kids = ((stem,) if stem is not None else ()) + notes
        return Node(CHORD, kids, onset=ev.onset)

    def stem_node(self, ev: _ChordEvent, beamed: bool) -> Node | None:
        if ev.kind in ("whole", "breve") or ev.stem == "none":
            return None
        direction = ev.stem or self.infer_stem(ev)
        staff = ev.notes[0].staff
        flags = 0 if beamed else ev.flags
        tokens = [self.token(direction, staff)]
        tokens.extend(self.token("flag", staff) for _ in range(flags))
        return Node(STEM, tuple(tokens))

    def infer_stem(self, ev: _ChordEvent) -> str:
        steps = [n.step for n in ev.notes if n.step is not None]
        if not steps:
            return "stem_up"
        above = max(steps) - MIDDLE_STEP
        below = MIDDLE_STEP - min(steps)
        return "stem_down" if above >= below else "stem_up"


def _rest_for_duration(quarters: Fraction) -> str:
    ordered = [("rest_maxima", Fraction(32)), ("rest_long", Fraction(16)),
               ("rest_breve", Fraction(8)), ("rest_whole", Fraction(4)),
               ("rest_half", Fraction(2)), ("rest_quarter", Fraction(1)),
               ("rest_eighth", Fraction(1, 2)), ("rest_16th", Fraction(1, 4)),
               ("rest_32nd", Fraction(1, 8)), ("rest_64th", Fraction(1, 16))]
    for label, dur in ordered:
        if quarters >= dur:
            return label
    return "rest_128th"


def _prune_dangling_pairs(work: MTNWork, conv: _Converter) -> MTNWork:
    """Remove spanner tokens whose pair never completed."""
    dangling = {pid for pid, count in conv.spanner_members.items()
                if count != 2}
    dangling.update(conv.open_spanners.values())
    if not dangling:
        return work
    for pid in sorted(dangling):
        conv.warnings.append(
            f"spanner pair {pid} never completed; its token was dropped")

    def scrub(node: Node) -> Node | None:
        kids = []
        for child in node.children:
            if isinstance(child, Token):
                if child.pair_id in dangling:
                    continue
                kids.append(child)
            else:
                sub = scrub(child)
                if sub is not None:
                    kids.append(sub)
        if not kids and node.kind in (DIRECTION,):
            return None
        return replace(node, children=tuple(kids))

    parts = []
    for part in work.parts:
        measures = []
        for m in part.measures:
            children = tuple(c for c in (scrub(c) for c in m.children)
                             if c is not None)
            measures.append(replace(m, children=children))
        parts.append(replace(part, measures=tuple(measures)))
    return replace(work, parts=tuple(parts))


# ---------------------------------------------------------------------------
# Line starts.

def inject_line_starts(work: MTNWork,
                       breaks: tuple[str, ...] = ()) -> MTNWork:
    """Synthesize clef/key restatements at line-start measures.

    Measures named in breaks are marked line_start first; an unknown id is
    an error. Each line-start measure then receives a synthetic attributes
    node at onset 0 restating the active clef and key signature for every
    staff that does not already state a clef there. Idempotent.
    """
    known = {m.id for p in work.parts for m in p.measures}
    for mid in breaks:
        if mid not in known:
            raise ValueError(f"unknown measure id in line breaks: {mid!r}")
    counter = itertools.count(1)

    def fresh(tok: Token) -> Token:
        return replace(tok, id=f"ls{next(counter)}")

    parts = []
    for part in work.parts:
        # active clef/key tokens per staff, carried across measures
        clefs: dict[int, Token] = {}
        keys: dict[int, tuple[Token, ...]] = {}
        measures = []
        for m in part.measures:
            line_start = m.line_start or m.id in breaks
            if line_start:
                m = replace(m, line_start=True)
            stated = _staves_with_clef_at_zero(m)
            need = [s for s in range(1, part.staff_count + 1)
                    if s in clefs and s not in stated]
            if line_start and need:
                blocks = []
                for staff in need:
                    kids: list[Node] = [Node(CLEF, (fresh(clefs[staff]),))]
                    if keys.get(staff):
                        kids.append(Node(KEY, tuple(
                            fresh(t) for t in keys[staff])))
                    blocks.append(Node(ATTR_STAFF, tuple(kids)))
                synthetic = Node(ATTRIBUTES, tuple(blocks),
                                 onset=Fraction(0), synthetic=True)
                m = replace(m, children=m.children + (synthetic,))
            _update_attr_state(m, clefs, keys)
            measures.append(m)
        parts.append(replace(part, measures=tuple(measures)))
    return replace(work, parts=tuple(parts))


def _staves_with_clef_at_zero(m: Measure) -> set[int]:
    stated: set[int] = set()
    for child in m.children:
        if child.kind == ATTRIBUTES and child.onset == 0:
            for block in child.children:
                for sub in block.children:
                    if isinstance(sub, Node) and sub.kind == CLEF:
                        for t in sub.children:
                            stated.add(t.position.staff)
    return stated


def _update_attr_state(m: Measure, clefs: dict[int, Token],
                       keys: dict[int, tuple[Token, ...]]) -> None:
    for child in m.children:
        if child.kind != ATTRIBUTES or child.synthetic:
            continue
        for block in child.children:
            for sub in block.children:
                if not isinstance(sub, Node):
                    continue
                if sub.kind == CLEF:
                    for t in sub.children:
                        clefs[t.position.staff] = t
                elif sub.kind == KEY:
                    toks = tuple(t for t in sub.children
                                 if isinstance(t, Token))
                    if toks:
                        naturals = all(t.label == "accidental_natural"
                                       for t in toks)
                        keys[toks[0].position.staff] = () if naturals else toks
    return None


# ---------------------------------------------------------------------------
# Entry points.

def _timewise_to_partwise(root: ET.Element) -> ET.Element:
    out = ET.Element("score-partwise")
    for child in root:
        if child.tag != "measure":
            out.append(child)
    parts: dict[str, ET.Element] = {}
    for me in root.findall("measure"):
        for pe in me.findall("part"):
            pid = pe.get("id", "P1")
            if pid not in parts:
                parts[pid] = ET.SubElement(out, "part", {"id": pid})
            measure = ET.SubElement(parts[pid], "measure",
                                    dict(me.attrib))
            measure.extend(list(pe))
    return out


def convert_score(source: bytes | str | ET.Element,
                  options: ConvertOptions | None = None) -> ConversionResult:
    """Convert a MusicXML document to a canonical tree-score work."""
    options = options or ConvertOptions()
    if isinstance(source, (bytes, str)):
        try:
            root = ET.fromstring(source)
        except ET.ParseError as exc:
            raise ConversionError(f"unparseable MusicXML: {exc}") from exc
    else:
        root = source
    work_id = options.work_id or "work"
    return _Converter(options).convert(root, work_id)


def convert_path(path: str | Path,
                 options: ConvertOptions | None = None) -> ConversionResult:
    """Convert a .musicxml/.xml file or a compressed .mxl archive."""
    path = Path(path)
    options = options or ConvertOptions()
    if options.work_id is None:
        options = replace(options, work_id=path.stem)
    data = path.read_bytes()
    if zipfile.is_zipfile(BytesIO(data)):
        data = _read_mxl(data, path)
    return convert_score(data, options)


def _read_mxl(data: bytes, path: Path) -> bytes:
    with zipfile.ZipFile(BytesIO(data)) as zf:
        rootfile = None
        try:
            container = ET.fromstring(zf.read("META-INF/container.xml"))
            first = container.find(".//rootfile")
            if first is not None:
                rootfile = first.get("full-path")
        except KeyError:
            pass
        if rootfile is None:
            candidates = [n for n in zf.namelist()
                          if n.endswith(".xml") and not n.startswith("META-INF")]
            if not candidates:
                raise ConversionError(f"{path}: no score file in archive")
            rootfile = candidates[0]
        return zf.read(rootfile)
