"""Radiology report parsing: section extraction and classifier input composition."""

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping

from .errors import EmptyInput, SchemaError


class SectionKind(Enum):
    IMPRESSION = "Impression"
    FINDINGS = "Findings"
    CLINICAL_INDICATION = "ClinicalIndication"
    TECHNIQUE = "Technique"
    COMPARISON = "Comparison"
    PREAMBLE = "Preamble"


class Sex(Enum):
    M = "M"
    F = "F"
    UNKNOWN = "Unknown"


class InputMode(Enum):
    IMPRESSION_ONLY = "impression"
    FULL_REPORT = "full"


# The five headers seen consistently in the source reports.  Anything else,
# including "END OF IMPRESSION:", is body text.  Matching is case-insensitive;
# the lookbehind keeps "END OF IMPRESSION:" from registering as a header.
_HEADER_TO_KIND = {
    "IMPRESSION": SectionKind.IMPRESSION,
    "FINDINGS": SectionKind.FINDINGS,
    "CLINICAL INDICATION": SectionKind.CLINICAL_INDICATION,
    "TECHNIQUE": SectionKind.TECHNIQUE,
    "COMPARISON": SectionKind.COMPARISON,
}
_HEADER_RE = re.compile(
    r"(?<![Oo][Ff] )\b(IMPRESSION|FINDINGS|CLINICAL INDICATION|TECHNIQUE|COMPARISON)\s*:",
    re.IGNORECASE,
)


def normalize_whitespace(text: str) -> str:
    """Collapse runs of spaces/tabs; newlines are preserved."""
    return re.sub(r"[ \t]+", " ", text).strip()


def parse_sections(raw_text: str) -> dict[SectionKind, str]:
    """Partition a report into named sections in document order.

    Text before the first recognized header goes to Preamble (source reports
    open with an unlabeled impression summary).  Repeated headers concatenate
    in order, separated by a newline.  Parsing is total: a report with no
    headers yields only a Preamble.
    """
    if not raw_text:
        raise EmptyInput("report text is empty")
    sections: dict[SectionKind, str] = {}
    matches = list(_HEADER_RE.finditer(raw_text))

    def add(kind: SectionKind, chunk: str) -> None:
        chunk = normalize_whitespace(chunk)
        if not chunk:
            return
        if kind in sections:
            sections[kind] = sections[kind] + "\n" + chunk
        else:
            sections[kind] = chunk

    first = matches[0].start() if matches else len(raw_text)
    if raw_text[:first].strip():
        add(SectionKind.PREAMBLE, raw_text[:first])
    for i, m in enumerate(matches):
        kind = _HEADER_TO_KIND[m.group(1).upper()]
        end = matches[i + 1].start() if i + 1 < len(matches) else len(raw_text)
        add(kind, raw_text[m.end():end])
    return sections


@dataclass(frozen=True)
class Report:
    """One radiology report with parsed sections and EHR metadata."""

    id: str
    raw_text: str
    exam_year: int
    site: str
    age_days: int
    sex: Sex
    procedure_description: str
    sections: Mapping[SectionKind, str] = field(default=None, compare=False)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.raw_text:
            raise EmptyInput(f"report {self.id!r} has empty text")
        if self.age_days < 0:
            raise SchemaError(f"report {self.id!r} has negative age_days")
        if self.sections is None:
            object.__setattr__(self, "sections", parse_sections(self.raw_text))

    def section(self, kind: SectionKind) -> str:
        return self.sections.get(kind, "")


def compose_input(report: Report, mode: InputMode) -> str:
    """Build the classifier input for one report under the given input regime.

    ImpressionOnly falls back to the Preamble when there is no labeled
    Impression section, since many reports open with an unlabeled summary.
    """
    if mode is InputMode.FULL_REPORT:
        return report.raw_text
    text = report.section(SectionKind.IMPRESSION) or report.section(SectionKind.PREAMBLE)
    if not text:
        raise EmptyInput(f"report {report.id!r} has no impression or preamble text")
    return text


def load_reports_jsonl(path) -> list[Report]:
    """Read reports from a JSON-lines file; unknown fields are ignored."""
    reports = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({e})") from e
            try:
                reports.append(
                    Report(
                        id=str(obj["id"]),
                        raw_text=obj["text"],
                        exam_year=int(obj.get("exam_year", 0)),
                        site=str(obj.get("site", "")),
                        age_days=int(obj.get("age_days", 0)),
                        sex=Sex(obj.get("sex", "Unknown")),
                        procedure_description=str(obj.get("procedure_description", "")),
                    )
                )
            except (KeyError, ValueError) as e:
                raise SchemaError(f"{path}:{lineno}: {e}") from e
    return reports


def iter_reports(reports: Iterable[Report]) -> Iterator[Report]:
    return iter(reports)
