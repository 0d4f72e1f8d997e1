"""Direct and stepwise yes/no inquiry protocols with a pluggable answer source.

The stepwise protocol asks five clinically informed sub-questions per report
and combines the verdicts with a fixed boolean rule: a report is Normal only
if (Q1 = No or Q2 = Yes) and Q3 = Q4 = Q5 = No.  Q2 is the single
inverse-polarity question (a Yes there argues for normality).
"""

import csv
import os
import re
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Protocol, Sequence

import requests

from .errors import ClientError, IncompleteRecord, MissingGold
from .labeling import Label
from .metrics import EvalResult, confusion
from .report_text import Report


class QuestionId(Enum):
    Q1 = "Q1"
    Q2 = "Q2"
    Q3 = "Q3"
    Q4 = "Q4"
    Q5 = "Q5"


class Verdict(Enum):
    YES = "Yes"
    NO = "No"
    UNPARSED = "Unparsed"


class InquiryMode(Enum):
    DIRECT = "direct"
    STEPWISE = "stepwise"


@dataclass(frozen=True)
class PromptSpec:
    id: QuestionId
    text: str
    abnormal_on_yes: bool


PROMPTS: dict[QuestionId, PromptSpec] = {
    QuestionId.Q1: PromptSpec(
        QuestionId.Q1,
        "Does the provided radiology report indicate any brain abnormalities? "
        "(Yes/No followed by reasoning)",
        abnormal_on_yes=True,
    ),
    QuestionId.Q2: PromptSpec(
        QuestionId.Q2,
        "Does the provided radiology report indicate that the pathology is outside "
        "of the brain? (Yes/No followed by reasoning)",
        abnormal_on_yes=False,
    ),
    QuestionId.Q3: PromptSpec(
        QuestionId.Q3,
        "Does the provided radiology report indicate any motion artifact or low "
        "quality scan? (Yes/No followed by reasoning)",
        abnormal_on_yes=True,
    ),
    QuestionId.Q4: PromptSpec(
        QuestionId.Q4,
        "Does the provided radiology report indicate any immediate clinical follow "
        "up is required? (Yes/No followed by reasoning)",
        abnormal_on_yes=True,
    ),
    QuestionId.Q5: PromptSpec(
        QuestionId.Q5,
        "Does the provided radiology report indicate that the radiologist or the "
        "medical doctor is highly concerned about the patient's condition? "
        "(Yes/No followed by reasoning)",
        abnormal_on_yes=True,
    ),
}

_FIRST_WORD = re.compile(r"[A-Za-z]+")


def parse_answer(response_text: str) -> Verdict:
    """Read the leading yes/no token of a free-text answer.

    Anything whose first alphabetic token is not "yes" or "no" is Unparsed;
    Unparsed never satisfies a condition downstream, so unparseable answers
    fail toward Abnormal.
    """
    m = _FIRST_WORD.search(response_text or "")
    if m is None:
        return Verdict.UNPARSED
    word = m.group(0).lower()
    if word == "yes":
        return Verdict.YES
    if word == "no":
        return Verdict.NO
    return Verdict.UNPARSED


def aggregate_direct(q1: Verdict) -> Label:
    """Single-question rule: only an explicit No counts as Normal."""
    return Label.NORMAL if q1 is Verdict.NO else Label.ABNORMAL


def aggregate_stepwise(answers: Mapping[QuestionId, Verdict]) -> Label:
    """Five-question decision rule; Unparsed fails every required condition."""
    missing = [q for q in QuestionId if q not in answers]
    if missing:
        raise IncompleteRecord(f"missing answers for {[q.value for q in missing]}")
    gate = answers[QuestionId.Q1] is Verdict.NO or answers[QuestionId.Q2] is Verdict.YES
    clear = all(
        answers[q] is Verdict.NO for q in (QuestionId.Q3, QuestionId.Q4, QuestionId.Q5)
    )
    return Label.NORMAL if gate and clear else Label.ABNORMAL


@dataclass(frozen=True)
class StepwiseRecord:
    report_id: str
    answers: Mapping[QuestionId, Verdict]
    reasoning: Mapping[QuestionId, str]
    label: Label


class AnswerSource(Protocol):
    def answer(self, report_id: str, question: PromptSpec, prompt: str) -> str:
        """Return the raw response text for one prompt."""
        ...


class FixtureAnswerSource:
    """Canned responses from a TSV of (report_id, question_id, response_text)."""

    def __init__(self, path):
        self.responses: dict[tuple[str, str], str] = {}
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f, delimiter="\t")
            for row in reader:
                self.responses[(row["report_id"], row["question_id"])] = row["response_text"]

    def answer(self, report_id: str, question: PromptSpec, prompt: str) -> str:
        # Missing cell parses to Unparsed downstream.
        return self.responses.get((report_id, question.id.value), "")


class HttpAnswerSource:
    """POSTs {"prompt", "model"} to a configured endpoint; expects {"text"}."""

    def __init__(self, base_url: str, model: str, timeout: float = 60.0, token_env: str = "NORMCHARTS_LLM_TOKEN"):
        self.base_url = base_url
        self.model = model
        self.timeout = timeout
        self.token = os.environ.get(token_env, "")

    def answer(self, report_id: str, question: PromptSpec, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            resp = requests.post(
                self.base_url,
                json={"prompt": prompt, "model": self.model},
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return str(resp.json()["text"])
        except (requests.RequestException, KeyError, ValueError) as e:
            raise ClientError(str(e), question_id=question.id.value) from e


def build_prompt(question: PromptSpec, report: Report) -> str:
    """Question first, then the full report text, separated by a blank line."""
    return f"{question.text}\n\n{report.raw_text}"


def run_inquiry(
    report: Report,
    mode: InquiryMode,
    client: AnswerSource,
    retries: int = 2,
) -> StepwiseRecord:
    """Issue the direct (Q1) or full five-question inquiry for one report.

    Each question is asked independently (no shared conversation state).
    Transport errors retry up to `retries` times, then the answer is treated
    as Unparsed.
    """
    questions = [QuestionId.Q1] if mode is InquiryMode.DIRECT else list(QuestionId)
    answers: dict[QuestionId, Verdict] = {q: Verdict.UNPARSED for q in QuestionId}
    reasoning: dict[QuestionId, str] = {q: "" for q in QuestionId}
    for qid in questions:
        spec = PROMPTS[qid]
        prompt = build_prompt(spec, report)
        text = ""
        for attempt in range(retries + 1):
            try:
                text = client.answer(report.id, spec, prompt)
                break
            except ClientError:
                if attempt == retries:
                    text = ""
        answers[qid] = parse_answer(text)
        reasoning[qid] = text
    if mode is InquiryMode.DIRECT:
        label = aggregate_direct(answers[QuestionId.Q1])
    else:
        label = aggregate_stepwise(answers)
    return StepwiseRecord(report_id=report.id, answers=answers, reasoning=reasoning, label=label)


def evaluate_inquiry(
    records: Sequence[StepwiseRecord],
    gold: Mapping[str, Label],
) -> EvalResult:
    """Score inquiry labels against gold, Normal as the positive class."""
    missing = [r.report_id for r in records if r.report_id not in gold]
    if missing:
        raise MissingGold(f"no gold label for {missing}")
    preds = [r.label for r in records]
    refs = [gold[r.report_id] for r in records]
    return confusion(preds, refs)
