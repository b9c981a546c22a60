"""Canonical XML round trips, byte stability, and the strict parse errors."""

import random
from fractions import Fraction

import pytest

import builders as B
from mtnkit.model import MTNWork, Part, validate
from mtnkit.xmlio import (
    DuplicateIdError, FractionSyntaxError, InvalidWorkError,
    MalformedXmlError, UnknownAttributeError, UnknownElementError,
    parse_work, serialize_work,
)


def test_round_trip_structural_equality():
    w = B.standard_work()
    data = serialize_work(w)
    assert parse_work(data) == w


def test_serialize_is_a_fixed_point_of_parse():
    w = B.standard_work()
    data = serialize_work(w)
    assert serialize_work(parse_work(data)) == data


def test_byte_form_basics():
    data = serialize_work(B.standard_work(1))
    text = data.decode("utf-8")
    assert text.startswith('<?xml version="1.0" encoding="UTF-8"?>\n')
    assert "\r" not in text
    assert text.endswith("</work>\n")
    assert 'mtn-version="1.0"' in text
    # two-space indentation, no tabs
    assert "\t" not in text
    assert '\n  <part staff_count="1">' in text


def test_fraction_attribute_lowest_terms():
    m = B.measure(
        B.group(B.simple_chord(onset=Fraction(2, 4))))
    data = serialize_work(B.work(m)).decode()
    assert 'onset="1/2"' in data
    assert "2/4" not in data and "0.5" not in data


def test_equal_works_serialize_identically():
    rng = random.Random(42)
    for i in range(20):
        m = B.random_measure(rng, "m1")
        kids = list(m.children)
        rng.shuffle(kids)
        w1 = B.work(B.measure(*m.children, id="m1"), work_id="w")
        w2 = B.work(B.measure(*kids, id="m1"), work_id="w")
        assert serialize_work(w1) == serialize_work(w2)


def test_shuffled_file_reparses_to_canonical_with_warning():
    w = B.standard_work(1)
    data = serialize_work(w).decode()
    # move the barline element block before the attributes block
    lines = data.splitlines()
    start = next(i for i, l in enumerate(lines) if "<barline" in l)
    stop = next(i for i, l in enumerate(lines) if "</barline>" in l)
    block = lines[start:stop + 1]
    del lines[start:stop + 1]
    anchor = next(i for i, l in enumerate(lines) if "<attributes" in l)
    shuffled = "\n".join(lines[:anchor] + block + lines[anchor:]) + "\n"
    warnings = []
    out = parse_work(shuffled, on_warning=warnings.append)
    assert out == w
    assert any("canonical" in msg for msg in warnings)


def test_no_warning_for_canonical_input():
    warnings = []
    parse_work(serialize_work(B.standard_work()), on_warning=warnings.append)
    assert warnings == []


def test_serialize_refuses_invalid_work():
    bad = MTNWork("w", (Part(0, ()),))
    with pytest.raises(InvalidWorkError) as info:
        serialize_work(bad)
    assert info.value.violation.rule == "staff-count"


def test_malformed_xml_has_position():
    with pytest.raises(MalformedXmlError) as info:
        parse_work("<work mtn-version='1.0' work_id='w'>"
                   "<part staff_count='1'></work>")
    assert info.value.line >= 1
    assert info.value.column >= 1


def test_unknown_element():
    doc = ('<?xml version="1.0" encoding="UTF-8"?>\n'
           '<work mtn-version="1.0" work_id="w">\n  <chapter/>\n</work>\n')
    with pytest.raises(UnknownElementError) as info:
        parse_work(doc)
    assert info.value.line == 3


def test_unknown_attribute():
    doc = ('<work mtn-version="1.0" work_id="w" color="red"></work>')
    with pytest.raises(UnknownAttributeError):
        parse_work(doc)


def test_missing_required_attribute():
    doc = ('<work mtn-version="1.0"></work>')
    with pytest.raises(UnknownAttributeError):
        parse_work(doc)


def test_unsupported_version():
    doc = ('<work mtn-version="9.9" work_id="w"></work>')
    with pytest.raises(UnknownAttributeError):
        parse_work(doc)


def test_bad_fraction_has_position():
    doc = ('<work mtn-version="1.0" work_id="w">\n'
           ' <part staff_count="1">\n'
           '  <measure id="m1">\n'
           '   <rest onset="nope"><token id="t1" label="rest_quarter" staff="1"/></rest>\n'
           '  </measure>\n </part>\n</work>\n')
    with pytest.raises(FractionSyntaxError) as info:
        parse_work(doc)
    assert info.value.line == 4


def test_duplicate_token_id_at_parse():
    doc = ('<work mtn-version="1.0" work_id="w">\n'
           ' <part staff_count="1">\n'
           '  <measure id="m1">\n'
           '   <rest onset="0"><token id="t1" label="rest_quarter" staff="1"/></rest>\n'
           '   <rest onset="1"><token id="t1" label="rest_quarter" staff="1"/></rest>\n'
           '  </measure>\n </part>\n</work>\n')
    with pytest.raises(DuplicateIdError) as info:
        parse_work(doc)
    assert info.value.line == 5


def test_duplicate_measure_id_at_parse():
    doc = ('<work mtn-version="1.0" work_id="w">\n'
           ' <part staff_count="1">\n'
           '  <measure id="m1"></measure>\n'
           '  <measure id="m1"></measure>\n'
           ' </part>\n</work>\n')
    with pytest.raises(DuplicateIdError):
        parse_work(doc)


def test_unexpected_text_content():
    doc = ('<work mtn-version="1.0" work_id="w">hello</work>')
    with pytest.raises(MalformedXmlError):
        parse_work(doc)


def test_random_work_round_trips():
    rng = random.Random(77)
    for i in range(40):
        w = B.random_work_checked(rng, f"w{i}")
        data = serialize_work(w)
        back = parse_work(data)
        assert back == w
        assert serialize_work(back) == data


def test_parse_keeps_explicit_timing_and_validates():
    w = B.standard_work()
    back = parse_work(serialize_work(w))
    assert validate(back) == []


def test_escaping_in_ids():
    m = B.standard_measure(id='m"<&>1')
    w = B.work(m, work_id='w&<">')
    data = serialize_work(w)
    assert parse_work(data) == w
