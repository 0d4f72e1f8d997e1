import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from normcharts.errors import EmptyInput, SchemaError
from normcharts.report_text import (
    InputMode,
    Report,
    SectionKind,
    Sex,
    compose_input,
    load_reports_jsonl,
    normalize_whitespace,
    parse_sections,
)

SAMPLE = (
    "CLINICAL INDICATION: Headache.\n"
    "TECHNIQUE: MRI brain without contrast.\n"
    "FINDINGS: The ventricles are normal in size.\n"
    "IMPRESSION: Unremarkable examination."
)


def make_report(text=SAMPLE, **kw):
    defaults = dict(
        id="r1", raw_text=text, exam_year=2017, site="site-A",
        age_days=4000, sex=Sex.F, procedure_description="MRI brain",
    )
    defaults.update(kw)
    return Report(**defaults)


def test_parse_sections_basic():
    s = parse_sections(SAMPLE)
    assert s[SectionKind.IMPRESSION] == "Unremarkable examination."
    assert s[SectionKind.FINDINGS] == "The ventricles are normal in size."
    assert s[SectionKind.CLINICAL_INDICATION] == "Headache."
    assert s[SectionKind.TECHNIQUE] == "MRI brain without contrast."


def test_parse_sections_preamble():
    s = parse_sections("Normal brain MRI.\nFINDINGS: nothing acute.")
    assert s[SectionKind.PREAMBLE] == "Normal brain MRI."
    assert s[SectionKind.FINDINGS] == "nothing acute."


def test_parse_sections_no_headers_is_all_preamble():
    s = parse_sections("just one line of text")
    assert s == {SectionKind.PREAMBLE: "just one line of text"}


def test_parse_sections_repeated_header_joined():
    s = parse_sections("FINDINGS: first.\nFINDINGS: second.")
    assert s[SectionKind.FINDINGS] == "first.\nsecond."


def test_parse_sections_case_insensitive():
    s = parse_sections("Impression: stable.")
    assert s[SectionKind.IMPRESSION] == "stable."


def test_end_of_impression_not_a_header():
    # "END OF IMPRESSION:" must stay inside the body, not start a section
    s = parse_sections("IMPRESSION: all clear. END OF IMPRESSION: signed.")
    assert len([k for k in s if k is SectionKind.IMPRESSION]) == 1
    assert "signed" in s[SectionKind.IMPRESSION]


def test_parse_sections_empty_raises():
    with pytest.raises(EmptyInput):
        parse_sections("")


@given(st.text(min_size=1, max_size=300))
def test_parse_sections_total_and_lossless_word_count(text):
    # every report parses; no section content is invented
    try:
        sections = parse_sections(text)
    except EmptyInput:
        assert text == ""
        return
    joined = " ".join(sections.values())
    for word in joined.split():
        assert word in text or word in normalize_whitespace(text)


def test_normalize_whitespace_preserves_newlines():
    assert normalize_whitespace("a  b\tc\nd") == "a b c\nd"


@given(st.text(max_size=200))
def test_normalize_whitespace_idempotent(text):
    once = normalize_whitespace(text)
    assert normalize_whitespace(once) == once


def test_compose_input_full():
    r = make_report()
    assert compose_input(r, InputMode.FULL_REPORT) == SAMPLE


def test_compose_input_impression():
    r = make_report()
    assert compose_input(r, InputMode.IMPRESSION_ONLY) == "Unremarkable examination."


def test_compose_input_preamble_fallback():
    r = make_report(text="Short narrative with no headers at all.")
    assert compose_input(r, InputMode.IMPRESSION_ONLY) == "Short narrative with no headers at all."


def test_compose_input_no_impression_no_preamble_raises():
    r = make_report(text="FINDINGS: only findings here.")
    with pytest.raises(EmptyInput):
        compose_input(r, InputMode.IMPRESSION_ONLY)


def test_report_rejects_negative_age():
    with pytest.raises(SchemaError):
        make_report(age_days=-1)


def test_report_rejects_empty_text():
    with pytest.raises(EmptyInput):
        make_report(text="")


def test_load_reports_jsonl(tmp_path):
    path = tmp_path / "reports.jsonl"
    rows = [
        {"id": "a", "text": SAMPLE, "exam_year": 2015, "site": "s", "age_days": 10,
         "sex": "M", "procedure_description": "MRI brain", "extra_field": "ignored"},
        {"id": "b", "text": "Plain narrative."},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    reports = load_reports_jsonl(path)
    assert [r.id for r in reports] == ["a", "b"]
    assert reports[1].sex is Sex.UNKNOWN


def test_load_reports_jsonl_bad_line_number_in_error(tmp_path):
    path = tmp_path / "reports.jsonl"
    path.write_text('{"id": "a", "text": "ok"}\n{"text": "missing id"}\n')
    with pytest.raises(SchemaError, match=":2"):
        load_reports_jsonl(path)
