"""Reference labels: coarse keyword flagging and human-grade aggregation."""

import json
from dataclasses import dataclass
from enum import Enum

from .errors import EmptyAnnotation, SchemaError
from .report_text import Report, SectionKind


class Label(Enum):
    NORMAL = "Normal"        # positive (minority) class
    ABNORMAL = "Abnormal"    # negative class
    UNCERTAIN = "Uncertain"  # excluded from training/evaluation downstream


# Fixed keyword list for the coarse abnormality flag.  Plain substring match
# so morphological variants hit ("resect" matches "resection").
COARSE_KEYWORDS = (
    "chemotherapy",
    "resect",
    "craniotomy",
    "craniectomy",
    "surgical cavity",
    "post surgery",
)


def coarse_flag(report: Report) -> bool:
    """Flag a report as abnormal by keyword search over the Findings section.

    True iff the procedure description contains "brain" and the Findings
    section contains any coarse keyword, both case-insensitive.
    """
    if "brain" not in report.procedure_description.lower():
        return False
    findings = report.section(SectionKind.FINDINGS).lower()
    return any(kw in findings for kw in COARSE_KEYWORDS)


def aggregate_grades(grades: list[int]) -> Label:
    """Collapse annotator grades (0=abnormal, 1=uncertain, 2=normal) to a label.

    Mean > 1.5 is Normal, mean < 0.5 is Abnormal, everything between is
    Uncertain.  Both inequalities are strict.
    """
    if not grades:
        raise EmptyAnnotation("no grades given")
    for g in grades:
        if g not in (0, 1, 2):
            raise SchemaError(f"grade {g!r} outside {{0,1,2}}")
    mean = sum(grades) / len(grades)
    if mean > 1.5:
        return Label.NORMAL
    if mean < 0.5:
        return Label.ABNORMAL
    return Label.UNCERTAIN


@dataclass(frozen=True)
class AnnotationSet:
    report_id: str
    grades: tuple[int, ...]

    def label(self) -> Label:
        return aggregate_grades(list(self.grades))


def load_annotations_jsonl(path) -> list[AnnotationSet]:
    """Read annotation sets from a JSON-lines file: {report_id, grades}."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                out.append(AnnotationSet(str(obj["report_id"]), tuple(int(g) for g in obj["grades"])))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as e:
                raise SchemaError(f"{path}:{lineno}: {e}") from e
    return out


def label_reports(reports: list[Report], annotations: list[AnnotationSet]) -> dict[str, Label]:
    """Produce the reference label per report id.

    Human grades are authoritative when present; otherwise a coarse keyword
    hit labels the report Abnormal.  Reports with neither stay unlabeled.
    """
    by_id = {}
    for report in reports:
        if coarse_flag(report):
            by_id[report.id] = Label.ABNORMAL
    for ann in annotations:
        by_id[ann.report_id] = ann.label()
    return by_id
