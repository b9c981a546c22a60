"""Registry of music primitive token classes.

Every token in a tree score carries a label drawn from this registry. The
registry is a closed set at validation time but extensible at runtime via
:func:`register_class` for corpora that need extra primitives.
"""

from __future__ import annotations

from fractions import Fraction

# Token classes whose tokens carry a vertical staff step. Everything else is
# positionless (step must be absent).
_POSITIONED: set[str] = set()

# label -> "start" | "stop" for classes that pair via a shared pair id.
_PAIR_ROLE: dict[str, str] = {}

# start label -> set of admissible stop labels.
PAIR_PARTNERS: dict[str, frozenset[str]] = {
    "slur_start": frozenset({"slur_stop"}),
    "tied_start": frozenset({"tied_stop"}),
    "tuplet_start": frozenset({"tuplet_stop"}),
    "wedge_crescendo": frozenset({"wedge_stop"}),
    "wedge_diminuendo": frozenset({"wedge_stop"}),
}

_ALL: set[str] = set()


def _define(labels: str | list[str], *, positioned: bool = False,
            pair_role: str | None = None) -> frozenset[str]:
    if isinstance(labels, str):
        labels = labels.split()
    for label in labels:
        _ALL.add(label)
        if positioned:
            _POSITIONED.add(label)
        if pair_role is not None:
            _PAIR_ROLE[label] = pair_role
    return frozenset(labels)


NOTEHEADS = _define(
    "notehead_black notehead_white notehead_breve "
    "notehead_grace_black notehead_cue_black notehead_cue_white",
    positioned=True)

# Grace and cue noteheads occupy no rhythmic time.
ZERO_DURATION_NOTEHEADS = frozenset(
    {"notehead_grace_black", "notehead_cue_black", "notehead_cue_white"})

# Nominal duration in quarter notes, before dots/tuplets. Stemless whites
# are whole notes; a stem turns a white head into a half note. Black heads
# start at one quarter and each beam or flag halves them.
WHITE_WITH_STEM = Fraction(2)
WHITE_WITHOUT_STEM = Fraction(4)
BLACK_BASE = Fraction(1)
BREVE = Fraction(8)

STEM_DIRECTIONS = _define("stem_up stem_down")
BEAM = _define("beam")
FLAG = _define("flag")

ACCIDENTALS = _define(
    "accidental_sharp accidental_flat accidental_natural "
    "accidental_double_sharp accidental_double_flat",
    positioned=True)

RESTS = _define(
    "rest_maxima rest_long rest_breve rest_whole rest_half rest_quarter "
    "rest_eighth rest_16th rest_32nd rest_64th rest_128th")

REST_DURATIONS: dict[str, Fraction] = {
    "rest_maxima": Fraction(32),
    "rest_long": Fraction(16),
    "rest_breve": Fraction(8),
    "rest_whole": Fraction(4),
    "rest_half": Fraction(2),
    "rest_quarter": Fraction(1),
    "rest_eighth": Fraction(1, 2),
    "rest_16th": Fraction(1, 4),
    "rest_32nd": Fraction(1, 8),
    "rest_64th": Fraction(1, 16),
    "rest_128th": Fraction(1, 32),
}

CLEFS = _define("clef_G clef_F clef_C clef_oct_G clef_oct_F", positioned=True)

TIMESIG_SYMBOLS = _define("timesig_common timesig_cut")
TIMESIG_NUMBER = _define("timesig_number", positioned=True)

BARLINE_TOKENS = _define("barline_tok_regular barline_tok_heavy")
REPEATS = _define("repeat_forward repeat_backward")

DYNAMICS = _define(
    "dyn_pppppp dyn_ppppp dyn_pppp dyn_ppp dyn_pp dyn_p dyn_mp "
    "dyn_mf dyn_f dyn_ff dyn_fff dyn_ffff dyn_fffff dyn_ffffff "
    "dyn_sf dyn_sfz dyn_sffz dyn_sfp dyn_sfpp dyn_sfzp dyn_fz dyn_rf "
    "dyn_rfz dyn_fp dyn_pf dyn_n")

WEDGES = _define("wedge_crescendo", pair_role="start") \
    | _define("wedge_diminuendo", pair_role="start") \
    | _define("wedge_stop", pair_role="stop")

MARKS = _define("segno coda")

SLURS = _define("slur_start", pair_role="start") \
    | _define("slur_stop", pair_role="stop")
TIES = _define("tied_start", pair_role="start") \
    | _define("tied_stop", pair_role="stop")
TUPLETS = _define("tuplet_start", pair_role="start") \
    | _define("tuplet_stop", pair_role="stop")

DOT = _define("dot")
ARTICULATIONS = _define("staccato accent tenuto")
ORNAMENTS = _define("trill turn wavy_line")
FERMATA = _define("fermata")
ARPEGGIATE = _define("arpeggiate")
CAESURA = _define("caesura")

# Tokens admissible under each structural node kind.
NOTE_MODIFIERS = (ACCIDENTALS | DOT | ARTICULATIONS | ORNAMENTS | FERMATA
                  | ARPEGGIATE | CAESURA | SLURS | TIES | TUPLETS)
NOTE_TOKENS = NOTEHEADS | NOTE_MODIFIERS
REST_MODIFIERS = DOT | FERMATA | TUPLETS
REST_TOKENS = RESTS | REST_MODIFIERS
STEM_TOKENS = STEM_DIRECTIONS | FLAG
DIRECTION_TOKENS = DYNAMICS | WEDGES | MARKS
BARLINE_NODE_TOKENS = BARLINE_TOKENS | REPEATS | FERMATA
TIMESIG_TOKENS = TIMESIG_SYMBOLS | TIMESIG_NUMBER


def register_class(label: str, *, positioned: bool = False,
                   pair_role: str | None = None,
                   partner: str | None = None) -> None:
    """Add a token class to the registry.

    Extension hook for corpora with primitives outside the shipped set.
    Registered classes validate and serialize but take part in no duration
    or conversion logic.
    """
    if label in _ALL:
        raise ValueError(f"token class already registered: {label}")
    if pair_role not in (None, "start", "stop"):
        raise ValueError(f"bad pair role: {pair_role}")
    if (pair_role == "start") != (partner is not None):
        raise ValueError("start classes need a partner; others must not have one")
    _define(label, positioned=positioned, pair_role=pair_role)
    if partner is not None:
        PAIR_PARTNERS[label] = frozenset({partner})


def is_known(label: str) -> bool:
    return label in _ALL


def is_positioned(label: str) -> bool:
    return label in _POSITIONED


def pair_role(label: str) -> str | None:
    """Pairing role of a class: "start", "stop", or None for unpaired."""
    return _PAIR_ROLE.get(label)


def all_classes() -> frozenset[str]:
    return frozenset(_ALL)
