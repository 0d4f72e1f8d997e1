"""Volumetric phenotype ingestion, QC exclusion, and session-level aggregation.

A phenotype record is one imaging sequence: six regional volumes plus eight
automated QC scores. Records failing QC are dropped, survivors are collapsed
to one phenotype per scan session, and every drop is tallied by cause so the
attrition arithmetic always balances.
"""

import csv
import statistics
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .errors import InvalidParams, SchemaError
from .report_text import Sex

QC_THRESHOLD = 0.65


class QcCategory(Enum):
    GENERAL_WHITE_MATTER = "qc_gwm"
    GENERAL_GREY_MATTER = "qc_ggm"
    GENERAL_CSF = "qc_gcsf"
    CEREBELLUM = "qc_cerebellum"
    BRAINSTEM = "qc_brainstem"
    THALAMUS = "qc_thalamus"
    PUTAMEN_PALLIDUM = "qc_putamen_pallidum"
    HIPPOCAMPUS_AMYGDALA = "qc_hippocampus_amygdala"


class Region(Enum):
    CORTICAL_GM = "vol_cortical_gm"
    SUBCORTICAL_GM = "vol_subcortical_gm"
    WHITE_MATTER = "vol_white_matter"
    VENTRICLES = "vol_ventricles"
    CEREBELLUM = "vol_cerebellum"
    TOTAL_INTRACRANIAL = "vol_tiv"


class AggregationMethod(Enum):
    MPRAGE_ONLY = "mprage"
    MEDIAN_ALL_SEQUENCES = "median"


@dataclass(frozen=True)
class PhenotypeRecord:
    session_id: str
    sequence_id: str
    scanner_id: str
    age_days: int
    sex: Sex
    is_mprage: bool
    volumes: Mapping[Region, float]
    qc: Mapping[QcCategory, float]

    def __post_init__(self):
        if self.age_days <= 0:
            raise SchemaError(f"age_days must be positive, got {self.age_days}")
        if self.sex not in (Sex.M, Sex.F):
            raise SchemaError(f"sex must be M or F, got {self.sex}")
        missing_qc = [c for c in QcCategory if c not in self.qc]
        if missing_qc:
            raise SchemaError(f"missing QC categories: {[c.value for c in missing_qc]}")
        missing_vol = [r for r in Region if r not in self.volumes]
        if missing_vol:
            raise SchemaError(f"missing volumes: {[r.value for r in missing_vol]}")
        for r, v in self.volumes.items():
            if not (v > 0.0 and v == v and v != float("inf")):
                raise SchemaError(f"volume {r.value} must be positive and finite, got {v}")


@dataclass(frozen=True)
class SessionPhenotype:
    session_id: str
    scanner_id: str
    age_days: int
    sex: Sex
    volumes: Mapping[Region, float]
    method: AggregationMethod

    @property
    def age_years(self) -> float:
        return self.age_days / 365.25


def qc_filter(records: Sequence[PhenotypeRecord]) -> list[PhenotypeRecord]:
    """Keep a record only if every QC category scores at least 0.65.

    The rule is strict: a score of exactly 0.65 passes.
    """
    return [r for r in records if all(r.qc[c] >= QC_THRESHOLD for c in QcCategory)]


def aggregate_session(
    records: Sequence[PhenotypeRecord],
    method: AggregationMethod,
) -> Optional[SessionPhenotype]:
    """Collapse one session's surviving sequences to a per-region median.

    MprageOnly restricts to MPRAGE sequences first and returns None when none
    survive. Caller is expected to have applied qc_filter already.
    """
    if not records:
        return None
    session_ids = {r.session_id for r in records}
    if len(session_ids) != 1:
        raise SchemaError(f"records span multiple sessions: {sorted(session_ids)}")
    pool = records
    if method is AggregationMethod.MPRAGE_ONLY:
        pool = [r for r in records if r.is_mprage]
        if not pool:
            return None
    first = records[0]
    volumes = {
        region: statistics.median(r.volumes[region] for r in pool) for region in Region
    }
    return SessionPhenotype(
        session_id=first.session_id,
        scanner_id=first.scanner_id,
        age_days=first.age_days,
        sex=first.sex,
        volumes=volumes,
        method=method,
    )


@dataclass(frozen=True)
class AttritionReport:
    n_input_sessions: int
    n_output_sessions: int
    dropped_qc: int
    dropped_no_mprage: int

    def __post_init__(self):
        total = self.n_output_sessions + self.dropped_qc + self.dropped_no_mprage
        if total != self.n_input_sessions:
            raise SchemaError(
                f"attrition does not balance: {self.n_input_sessions} != {total}"
            )


def build_sessions(
    records: Sequence[PhenotypeRecord],
    method: AggregationMethod,
) -> tuple[list[SessionPhenotype], AttritionReport]:
    """QC-filter, group by session, aggregate, and account for every drop."""
    groups: dict[str, list[PhenotypeRecord]] = {}
    for r in records:
        groups.setdefault(r.session_id, []).append(r)
    sessions: list[SessionPhenotype] = []
    dropped_qc = 0
    dropped_no_mprage = 0
    for sid in sorted(groups):
        surviving = qc_filter(groups[sid])
        if not surviving:
            dropped_qc += 1
            continue
        agg = aggregate_session(surviving, method)
        if agg is None:
            dropped_no_mprage += 1
            continue
        sessions.append(agg)
    report = AttritionReport(
        n_input_sessions=len(groups),
        n_output_sessions=len(sessions),
        dropped_qc=dropped_qc,
        dropped_no_mprage=dropped_no_mprage,
    )
    return sessions, report


PHENOTYPE_COLUMNS = (
    "session_id",
    "sequence_id",
    "scanner_id",
    "age_days",
    "sex",
    "is_mprage",
    "vol_cortical_gm",
    "vol_subcortical_gm",
    "vol_white_matter",
    "vol_ventricles",
    "vol_cerebellum",
    "vol_tiv",
    "qc_gwm",
    "qc_ggm",
    "qc_gcsf",
    "qc_cerebellum",
    "qc_brainstem",
    "qc_thalamus",
    "qc_putamen_pallidum",
    "qc_hippocampus_amygdala",
)


def load_phenotype_csv(path) -> list[PhenotypeRecord]:
    records = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in PHENOTYPE_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"phenotype CSV missing columns: {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                records.append(
                    PhenotypeRecord(
                        session_id=row["session_id"],
                        sequence_id=row["sequence_id"],
                        scanner_id=row["scanner_id"],
                        age_days=int(row["age_days"]),
                        sex=Sex(row["sex"]),
                        is_mprage=row["is_mprage"].strip().lower() in ("1", "true", "yes"),
                        volumes={r: float(row[r.value]) for r in Region},
                        qc={c: float(row[c.value]) for c in QcCategory},
                    )
                )
            except (ValueError, KeyError) as e:
                raise SchemaError(f"bad phenotype row at line {lineno}: {e}") from e
    return records


def write_phenotype_csv(path, records: Iterable[PhenotypeRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(PHENOTYPE_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.session_id,
                    r.sequence_id,
                    r.scanner_id,
                    r.age_days,
                    r.sex.value,
                    "true" if r.is_mprage else "false",
                ]
                + [f"{r.volumes[reg]:.6f}" for reg in Region]
                + [f"{r.qc[c]:.4f}" for c in QcCategory]
            )


SESSION_COLUMNS = (
    "session_id",
    "scanner_id",
    "age_days",
    "sex",
    "method",
    "vol_cortical_gm",
    "vol_subcortical_gm",
    "vol_white_matter",
    "vol_ventricles",
    "vol_cerebellum",
    "vol_tiv",
)


def write_sessions_csv(path, sessions: Iterable[SessionPhenotype]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SESSION_COLUMNS)
        for s in sessions:
            writer.writerow(
                [s.session_id, s.scanner_id, s.age_days, s.sex.value, s.method.value]
                + [f"{s.volumes[r]:.6f}" for r in Region]
            )


def load_sessions_csv(path) -> list[SessionPhenotype]:
    sessions = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in SESSION_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"session CSV missing columns: {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                sessions.append(
                    SessionPhenotype(
                        session_id=row["session_id"],
                        scanner_id=row["scanner_id"],
                        age_days=int(row["age_days"]),
                        sex=Sex(row["sex"]),
                        volumes={r: float(row[r.value]) for r in Region},
                        method=AggregationMethod(row["method"]),
                    )
                )
            except (ValueError, KeyError) as e:
                raise SchemaError(f"bad session row at line {lineno}: {e}") from e
    return sessions


# Relative size of each region against the modeled one; used only when
# synthesizing cohorts so every column of the CSV is populated.
_REGION_SCALE = {
    Region.CORTICAL_GM: 1.0,
    Region.SUBCORTICAL_GM: 0.12,
    Region.WHITE_MATTER: 0.80,
    Region.VENTRICLES: 0.04,
    Region.CEREBELLUM: 0.25,
    Region.TOTAL_INTRACRANIAL: 2.60,
}


def synth_cohort(
    seed: int,
    n_sessions: int,
    n_scanners: int,
    truth,
    age_range_days: tuple[float, float] = (135.0, 7100.0),
    qc_fail_rate: float = 0.02,
    jitter_sigma: float = 0.01,
) -> list[PhenotypeRecord]:
    """Draw a synthetic cohort from a known growth model.

    Ages are uniform over age_range_days, sexes fair-coin, scanners assigned
    round-robin, and 1 to 4 sequences per session carry small multiplicative
    jitter around the session draw. A qc_fail_rate fraction of sequences get
    one QC category planted below the exclusion threshold.
    """
    import numpy as np

    from .growthchart import GrowthTruth, gg_sample_one, truth_params

    if not isinstance(truth, GrowthTruth):
        raise InvalidParams("truth must be a GrowthTruth")
    if n_sessions < 1 or n_scanners < 1:
        raise InvalidParams("n_sessions and n_scanners must be >= 1")
    rng = np.random.default_rng(seed)
    if truth.scanner_intercepts:
        scanner_ids = sorted(truth.scanner_intercepts)
        if len(scanner_ids) != n_scanners:
            raise InvalidParams(
                f"truth has {len(scanner_ids)} scanner intercepts, expected {n_scanners}"
            )
    else:
        scanner_ids = [f"scan-{i:02d}" for i in range(n_scanners)]
    records = []
    lo, hi = age_range_days
    for i in range(n_sessions):
        age_days = int(round(rng.uniform(lo, hi)))
        age_days = max(1, age_days)
        sex = Sex.M if rng.random() < 0.5 else Sex.F
        scanner = scanner_ids[i % n_scanners]
        shift = truth.scanner_intercepts.get(scanner, 0.0)
        params = truth_params(truth, age_days / 365.25, sex, scanner_shift=shift)
        base = gg_sample_one(rng, params)
        n_seq = int(rng.integers(1, 5))
        for j in range(n_seq):
            jitter = float(np.exp(rng.normal(0.0, jitter_sigma)))
            modeled = base * jitter
            volumes = {
                region: modeled * scale for region, scale in _REGION_SCALE.items()
            }
            qc = {c: float(rng.uniform(0.70, 1.0)) for c in QcCategory}
            if rng.random() < qc_fail_rate:
                bad = list(QcCategory)[int(rng.integers(0, len(QcCategory)))]
                qc[bad] = float(rng.uniform(0.0, 0.649))
            records.append(
                PhenotypeRecord(
                    session_id=f"ses-{i:05d}",
                    sequence_id=f"ses-{i:05d}-seq-{j}",
                    scanner_id=scanner,
                    age_days=age_days,
                    sex=sex,
                    is_mprage=bool(rng.random() < 0.6),
                    volumes=volumes,
                    qc=qc,
                )
            )
    return records
