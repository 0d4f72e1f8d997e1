"""Command-line pipeline driver.

Subcommands cover each pipeline stage (ingest through compare) plus
run-experiment, which executes one of six named end-to-end protocols into a
timestamped run directory with the resolved configuration echoed alongside
the artifacts.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

import argparse
import configparser
import csv
import datetime
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from . import classifier, corpus, growthchart, labeling, metrics, phenotype, stepwise
from .errors import ConfigError, DataError, NormchartsError, NumericalError
from .labeling import Label
from .phenotype import AggregationMethod, Region
from .report_text import InputMode, Report, Sex, compose_input, load_reports_jsonl
from .synthcorpus import synth_reports

EXPERIMENTS = (
    "exp1_balanced",
    "exp2_weighted",
    "exp3_ood",
    "exp4_impression",
    "exp5_stepwise",
    "exp6_growthcharts",
)

DEFAULT_SEEDS = (11, 23, 37, 41, 53)


def data_file(name: str) -> Path:
    """Path of a bundled data file (edge-case fixture and friends)."""
    return Path(str(resources.files("normcharts").joinpath("data", name)))


@dataclass
class PipelineConfig:
    reports_path: Optional[str] = None
    annotations_path: Optional[str] = None
    phenotypes_path: Optional[str] = None
    fixture_path: Optional[str] = None
    gold_path: Optional[str] = None
    out_dir: str = "runs"
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    pos_weight: float = 10.0
    epochs: int = 20
    learning_rate: float = 0.5
    dimension: int = 1 << 18
    cutoff_year: int = 2018
    holdout_site: Optional[str] = None
    synth_n: int = 5000
    abnormal_fraction: float = 0.92
    llm_endpoint: Optional[str] = None
    llm_model: str = "default"
    n_sessions: int = 800
    n_scanners: int = 5
    ridge_lambda: float = 1.0
    sigma_age: bool = True
    fp1_only: bool = True
    region: str = Region.CORTICAL_GM.value

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["paths"] = {
            k: v
            for k, v in {
                "reports": self.reports_path,
                "annotations": self.annotations_path,
                "phenotypes": self.phenotypes_path,
                "fixture": self.fixture_path,
                "gold": self.gold_path,
                "out_dir": self.out_dir,
            }.items()
            if v is not None
        }
        cp["train"] = {
            "seeds": ",".join(str(s) for s in self.seeds),
            "pos_weight": str(self.pos_weight),
            "epochs": str(self.epochs),
            "learning_rate": str(self.learning_rate),
            "dimension": str(self.dimension),
            "cutoff_year": str(self.cutoff_year),
            "holdout_site": self.holdout_site or "",
            "synth_n": str(self.synth_n),
            "abnormal_fraction": str(self.abnormal_fraction),
        }
        cp["growth"] = {
            "n_sessions": str(self.n_sessions),
            "n_scanners": str(self.n_scanners),
            "ridge_lambda": str(self.ridge_lambda),
            "sigma_age": str(self.sigma_age),
            "fp1_only": str(self.fp1_only),
            "region": self.region,
        }
        cp["llm"] = {
            "endpoint": self.llm_endpoint or "",
            "model": self.llm_model,
        }
        import io

        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def load_config(path: Optional[str]) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is None:
        return cfg
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    try:
        p = cp["paths"] if cp.has_section("paths") else {}
        cfg.reports_path = p.get("reports") or None
        cfg.annotations_path = p.get("annotations") or None
        cfg.phenotypes_path = p.get("phenotypes") or None
        cfg.fixture_path = p.get("fixture") or None
        cfg.gold_path = p.get("gold") or None
        cfg.out_dir = p.get("out_dir", cfg.out_dir)
        t = cp["train"] if cp.has_section("train") else {}
        if t.get("seeds"):
            cfg.seeds = tuple(int(s) for s in t["seeds"].split(","))
        cfg.pos_weight = float(t.get("pos_weight", cfg.pos_weight))
        cfg.epochs = int(t.get("epochs", cfg.epochs))
        cfg.learning_rate = float(t.get("learning_rate", cfg.learning_rate))
        cfg.dimension = int(t.get("dimension", cfg.dimension))
        cfg.cutoff_year = int(t.get("cutoff_year", cfg.cutoff_year))
        cfg.holdout_site = t.get("holdout_site") or None
        cfg.synth_n = int(t.get("synth_n", cfg.synth_n))
        cfg.abnormal_fraction = float(t.get("abnormal_fraction", cfg.abnormal_fraction))
        g = cp["growth"] if cp.has_section("growth") else {}
        cfg.n_sessions = int(g.get("n_sessions", cfg.n_sessions))
        cfg.n_scanners = int(g.get("n_scanners", cfg.n_scanners))
        cfg.ridge_lambda = float(g.get("ridge_lambda", cfg.ridge_lambda))
        cfg.sigma_age = str(g.get("sigma_age", cfg.sigma_age)).lower() in ("1", "true", "yes")
        cfg.fp1_only = str(g.get("fp1_only", cfg.fp1_only)).lower() in ("1", "true", "yes")
        cfg.region = g.get("region", cfg.region)
        llm = cp["llm"] if cp.has_section("llm") else {}
        cfg.llm_endpoint = llm.get("endpoint") or None
        cfg.llm_model = llm.get("model", cfg.llm_model)
    except ValueError as e:
        raise ConfigError(f"bad config value: {e}") from e
    if not cfg.seeds:
        raise ConfigError("at least one seed is required")
    return cfg


def _write_labels_csv(path, labels: dict[str, Label]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["report_id", "label"])
        for rid in sorted(labels):
            w.writerow([rid, labels[rid].value])


def _load_labels_csv(path) -> dict[str, Label]:
    out = {}
    with open(path, encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            out[row["report_id"]] = Label(row["label"])
    return out


def _write_split_csv(path, assignment: corpus.SplitAssignment) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["report_id", "subset"])
        for rid in sorted(assignment.assignment):
            w.writerow([rid, assignment.assignment[rid].value])


def _load_split_csv(path) -> dict[str, corpus.Subset]:
    out = {}
    with open(path, encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            out[row["report_id"]] = corpus.Subset(row["subset"])
    return out


def _examples(
    reports: list[Report],
    ids: set[str],
    labels: dict[str, Label],
    mode: InputMode,
) -> list[tuple[str, Label]]:
    picked = []
    for r in reports:
        if r.id in ids and labels.get(r.id) in (Label.NORMAL, Label.ABNORMAL):
            picked.append((compose_input(r, mode), labels[r.id]))
    return picked


def _evaluate_model(model, reports, ids, labels, mode) -> metrics.EvalResult:
    preds, refs = [], []
    for r in reports:
        if r.id in ids and labels.get(r.id) in (Label.NORMAL, Label.ABNORMAL):
            preds.append(classifier.classify(model, compose_input(r, mode)))
            refs.append(labels[r.id])
    return metrics.confusion(preds, refs)


# ---------------------------------------------------------------------------
# experiment protocols


def _corpus_for(cfg: PipelineConfig, seed: int = 0):
    if cfg.reports_path:
        reports = load_reports_jsonl(cfg.reports_path)
        if cfg.annotations_path:
            annotations = labeling.load_annotations_jsonl(cfg.annotations_path)
        else:
            annotations = []
        labels = labeling.label_reports(reports, annotations)
        return reports, labels
    return synth_reports(seed=seed, n=cfg.synth_n, abnormal_fraction=cfg.abnormal_fraction)


def _classifier_experiment(name: str, cfg: PipelineConfig, run_dir: Path) -> list[dict]:
    balanced = name == "exp1_balanced"
    mode = InputMode.IMPRESSION_ONLY if name == "exp4_impression" else InputMode.FULL_REPORT
    distribution = "balanced" if balanced else "unbalanced"
    reports, labels = _corpus_for(cfg)
    rows: list[dict] = []
    results = []
    for seed in cfg.seeds:
        assignment = corpus.split(reports, seed, labels=labels)
        train_ids = assignment.ids(corpus.Subset.TRAIN)
        if balanced:
            train_ids = corpus.balance(train_ids, labels, seed)
        pos_weight = 1.0 if balanced else cfg.pos_weight
        tcfg = classifier.TrainConfig(
            pos_weight=pos_weight,
            learning_rate=cfg.learning_rate,
            epochs=cfg.epochs,
            seed=seed,
            input_mode=mode,
        )
        fcfg = classifier.FeatureConfig(dimension=cfg.dimension)
        model = classifier.train(_examples(reports, set(train_ids), labels, mode), tcfg, fcfg)
        classifier.save_model(model, run_dir / f"model-seed{seed}.bin")
        result = _evaluate_model(
            model, reports, set(assignment.ids(corpus.Subset.TEST)), labels, mode
        )
        results.append(result)
        rows.extend(
            metrics.result_rows(
                result,
                model="linear",
                experiment=name,
                distribution=distribution,
                evaluation_set="test",
                seed=seed,
            )
        )
    summary = metrics.seed_summary(results)
    rows.extend(
        metrics.summary_rows(
            summary,
            model="linear",
            experiment=name,
            distribution=distribution,
            evaluation_set="test",
        )
    )
    return rows


def _ood_experiment(cfg: PipelineConfig, run_dir: Path) -> list[dict]:
    reports, labels = _corpus_for(cfg)
    in_dist, ood = corpus.ood_partition(reports, cfg.cutoff_year, cfg.holdout_site)
    if not in_dist or not ood:
        raise DataError("OOD partition left one side empty; adjust cutoff_year")
    rows: list[dict] = []
    in_results, ood_results = [], []
    ood_ids = {r.id for r in ood}
    for seed in cfg.seeds:
        assignment = corpus.split(in_dist, seed, labels=labels)
        tcfg = classifier.TrainConfig(
            pos_weight=cfg.pos_weight,
            learning_rate=cfg.learning_rate,
            epochs=cfg.epochs,
            seed=seed,
        )
        fcfg = classifier.FeatureConfig(dimension=cfg.dimension)
        train_ids = set(assignment.ids(corpus.Subset.TRAIN))
        model = classifier.train(
            _examples(in_dist, train_ids, labels, InputMode.FULL_REPORT), tcfg, fcfg
        )
        classifier.save_model(model, run_dir / f"model-seed{seed}.bin")
        for eval_name, pool, ids, bucket in (
            ("test", in_dist, set(assignment.ids(corpus.Subset.TEST)), in_results),
            ("ood", ood, ood_ids, ood_results),
        ):
            result = _evaluate_model(model, pool, ids, labels, InputMode.FULL_REPORT)
            bucket.append(result)
            rows.extend(
                metrics.result_rows(
                    result,
                    model="linear",
                    experiment="exp3_ood",
                    distribution="unbalanced",
                    evaluation_set=eval_name,
                    seed=seed,
                )
            )
    for eval_name, bucket in (("test", in_results), ("ood", ood_results)):
        rows.extend(
            metrics.summary_rows(
                metrics.seed_summary(bucket),
                model="linear",
                experiment="exp3_ood",
                distribution="unbalanced",
                evaluation_set=eval_name,
            )
        )
    return rows


def _stepwise_experiment(cfg: PipelineConfig, run_dir: Path) -> list[dict]:
    reports_path = cfg.reports_path or data_file("edge_case_reports.jsonl")
    fixture_path = cfg.fixture_path or data_file("edge_case_responses.tsv")
    gold_path = cfg.gold_path or data_file("edge_case_gold.csv")
    reports = load_reports_jsonl(reports_path)
    gold = _load_labels_csv(gold_path)
    source = stepwise.FixtureAnswerSource(fixture_path)
    rows: list[dict] = []
    for mode, model_name in (
        (stepwise.InquiryMode.DIRECT, "direct"),
        (stepwise.InquiryMode.STEPWISE, "stepwise"),
    ):
        records = [stepwise.run_inquiry(r, mode, source) for r in reports]
        with open(run_dir / f"triage-{model_name}.csv", "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            w.writerow(["report_id"] + [q.value for q in stepwise.QuestionId] + ["label"])
            for rec in records:
                w.writerow(
                    [rec.report_id]
                    + [rec.answers[q].value for q in stepwise.QuestionId]
                    + [rec.label.value]
                )
        result = stepwise.evaluate_inquiry(records, gold)
        rows.extend(
            metrics.result_rows(
                result,
                model=model_name,
                experiment="exp5_stepwise",
                distribution="edge-cases",
                evaluation_set="referee",
                seed=0,
            )
        )
    return rows


def _growth_options(cfg: PipelineConfig) -> growthchart.FitOptions:
    candidates = None
    if cfg.fp1_only:
        candidates = [growthchart.FpSpec(1, (p,)) for p in growthchart.FP_POWERS]
    return growthchart.FitOptions(
        fp_candidates=candidates,
        sigma_age=cfg.sigma_age,
        ridge_lambda=cfg.ridge_lambda,
    )


def _default_truth(cfg: PipelineConfig) -> growthchart.GrowthTruth:
    shifts = [0.06, -0.04, 0.02, -0.05, 0.01]
    scanners = {f"scan-{i:02d}": shifts[i % len(shifts)] for i in range(cfg.n_scanners)}
    mean_shift = sum(scanners.values()) / len(scanners)
    scanners = {k: v - mean_shift for k, v in scanners.items()}
    return growthchart.GrowthTruth(
        region=Region(cfg.region),
        fp_mu=growthchart.FpSpec(1, (0.5,)),
        mu_coef=(12.2, 0.12, -0.05),
        fp_sigma=None,
        sigma_coef=(-2.12,),
        nu=1.5,
        scanner_intercepts=scanners,
    )


def _growth_experiment(cfg: PipelineConfig, run_dir: Path) -> list[dict]:
    if cfg.phenotypes_path:
        records = phenotype.load_phenotype_csv(cfg.phenotypes_path)
    else:
        truth = _default_truth(cfg)
        records = phenotype.synth_cohort(
            seed=cfg.seeds[0],
            n_sessions=cfg.n_sessions,
            n_scanners=cfg.n_scanners,
            truth=truth,
        )
    sessions, attrition = phenotype.build_sessions(
        records, AggregationMethod.MEDIAN_ALL_SEQUENCES
    )
    with open(run_dir / "attrition.json", "w", encoding="utf-8") as f:
        json.dump(
            {
                "input_sessions": attrition.n_input_sessions,
                "output_sessions": attrition.n_output_sessions,
                "dropped_qc": attrition.dropped_qc,
                "dropped_no_mprage": attrition.dropped_no_mprage,
            },
            f,
            indent=2,
        )
        f.write("\n")
    region = Region(cfg.region)
    # two overlapping subsets sharing 92% of sessions
    n = len(sessions)
    n_shared = round(0.92 * n)
    half_extra = (n - n_shared) // 2
    shared = sessions[:n_shared]
    only_a = sessions[n_shared : n_shared + half_extra]
    only_b = sessions[n_shared + half_extra :]
    options = _growth_options(cfg)
    model_a = growthchart.fit(shared + only_a, region, options)
    model_b = growthchart.fit(shared + only_b, region, options)
    growthchart.save_growth_model(run_dir / "growth-model-a.json", model_a)
    growthchart.save_growth_model(run_dir / "growth-model-b.json", model_b)
    cent_a = [growthchart.centile(model_a, s) for s in sessions]
    cent_b = [growthchart.centile(model_b, s) for s in sessions]
    r = growthchart.compare_centiles(cent_a, cent_b)
    ages = [1.0 + i * 0.5 for i in range(38)]
    curves = growthchart.percentile_curves(model_a, ages, Sex.F)
    with open(run_dir / "curves.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["age_years", "p2.5", "p50", "p97.5"])
        for row in curves:
            w.writerow(
                [f"{row['age_years']:.4f}", f"{row['p2.5']:.4f}", f"{row['p50']:.4f}", f"{row['p97.5']:.4f}"]
            )
    return [
        {
            "model": "growth",
            "experiment": "exp6_growthcharts",
            "distribution": "synthetic",
            "evaluation_set": "union",
            "seed": cfg.seeds[0],
            "metric": "pearson_r",
            "value": f"{r:.6f}",
        }
    ]


def run_experiment(name: str, cfg: PipelineConfig, timestamp: Optional[str] = None) -> Path:
    """Execute one named protocol; returns the run directory it wrote."""
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    stamp = timestamp or datetime.datetime.now().strftime("%Y%m%d-%H%M%S")
    run_dir = Path(cfg.out_dir) / f"{name}-{stamp}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.ini").write_text(cfg.to_ini(), encoding="utf-8")
    if name in ("exp1_balanced", "exp2_weighted", "exp4_impression"):
        rows = _classifier_experiment(name, cfg, run_dir)
    elif name == "exp3_ood":
        rows = _ood_experiment(cfg, run_dir)
    elif name == "exp5_stepwise":
        rows = _stepwise_experiment(cfg, run_dir)
    else:
        rows = _growth_experiment(cfg, run_dir)
    metrics.write_results_csv(run_dir / "metrics.csv", rows)
    return run_dir


# ---------------------------------------------------------------------------
# subcommands


def _cmd_ingest(args) -> int:
    reports = load_reports_jsonl(args.reports)
    kinds: dict[str, int] = {}
    for r in reports:
        for kind in r.sections:
            kinds[kind.value] = kinds.get(kind.value, 0) + 1
    print(f"reports: {len(reports)}")
    for kind in sorted(kinds):
        print(f"sections[{kind}]: {kinds[kind]}")
    return 0


def _cmd_label(args) -> int:
    reports = load_reports_jsonl(args.reports)
    annotations = (
        labeling.load_annotations_jsonl(args.annotations) if args.annotations else []
    )
    labels = labeling.label_reports(reports, annotations)
    _write_labels_csv(args.out, labels)
    print(f"labeled {len(labels)} of {len(reports)} reports -> {args.out}")
    return 0


def _cmd_split(args) -> int:
    reports = load_reports_jsonl(args.reports)
    labels = _load_labels_csv(args.labels) if args.labels else None
    assignment = corpus.split(reports, args.seed, labels=labels)
    _write_split_csv(args.out, assignment)
    for subset in corpus.Subset:
        print(f"{subset.value}: {len(assignment.ids(subset))}")
    return 0


def _cmd_train(args) -> int:
    reports = load_reports_jsonl(args.reports)
    labels = _load_labels_csv(args.labels)
    split_map = _load_split_csv(args.split)
    train_ids = {rid for rid, s in split_map.items() if s is corpus.Subset.TRAIN}
    if args.balanced:
        train_ids = set(corpus.balance(sorted(train_ids), labels, args.seed))
    mode = InputMode(args.input_mode)
    tcfg = classifier.TrainConfig(
        pos_weight=args.pos_weight,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        seed=args.seed,
        input_mode=mode,
    )
    model = classifier.train(_examples(reports, train_ids, labels, mode), tcfg)
    classifier.save_model(model, args.out)
    print(f"trained on {len(train_ids)} reports, final loss {model.final_loss:.6f} -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    reports = load_reports_jsonl(args.reports)
    labels = _load_labels_csv(args.labels)
    split_map = _load_split_csv(args.split)
    subset = corpus.Subset(args.subset)
    ids = {rid for rid, s in split_map.items() if s is subset}
    model = classifier.load_model(args.model)
    mode = InputMode(args.input_mode)
    result = _evaluate_model(model, reports, ids, labels, mode)
    rows = metrics.result_rows(
        result,
        model="linear",
        experiment="eval",
        distribution="as-given",
        evaluation_set=subset.value,
        seed="-",
    )
    metrics.write_results_csv(args.out, rows)
    for name in metrics.METRIC_NAMES:
        value = result.metric(name)
        print(f"{name}: {'undefined' if value is None else f'{value:.4f}'}")
    return 0


def _cmd_triage(args) -> int:
    reports = load_reports_jsonl(args.reports)
    if args.fixture:
        source = stepwise.FixtureAnswerSource(args.fixture)
    elif args.endpoint:
        source = stepwise.HttpAnswerSource(args.endpoint, args.model_name)
    else:
        raise ConfigError("triage needs --fixture or --endpoint")
    mode = stepwise.InquiryMode(args.mode)
    records = [stepwise.run_inquiry(r, mode, source) for r in reports]
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["report_id"] + [q.value for q in stepwise.QuestionId] + ["label"])
        for rec in records:
            w.writerow(
                [rec.report_id]
                + [rec.answers[q].value for q in stepwise.QuestionId]
                + [rec.label.value]
            )
    print(f"triaged {len(records)} reports -> {args.out}")
    if args.gold:
        result = stepwise.evaluate_inquiry(records, _load_labels_csv(args.gold))
        for name in metrics.METRIC_NAMES:
            value = result.metric(name)
            print(f"{name}: {'undefined' if value is None else f'{value:.4f}'}")
    return 0


def _cmd_qc(args) -> int:
    records = phenotype.load_phenotype_csv(args.phenotypes)
    kept = phenotype.qc_filter(records)
    phenotype.write_phenotype_csv(args.out, kept)
    print(f"kept {len(kept)} of {len(records)} sequences -> {args.out}")
    return 0


def _cmd_aggregate(args) -> int:
    records = phenotype.load_phenotype_csv(args.phenotypes)
    sessions, attrition = phenotype.build_sessions(records, AggregationMethod(args.method))
    phenotype.write_sessions_csv(args.out, sessions)
    print(
        f"sessions: {attrition.n_input_sessions} in, {attrition.n_output_sessions} out, "
        f"{attrition.dropped_qc} dropped by QC, {attrition.dropped_no_mprage} without MPRAGE"
    )
    return 0


def _cmd_fit_growth(args) -> int:
    records = phenotype.load_phenotype_csv(args.phenotypes)
    sessions, _ = phenotype.build_sessions(records, AggregationMethod(args.method))
    candidates = None
    if args.fp1_only:
        candidates = [growthchart.FpSpec(1, (p,)) for p in growthchart.FP_POWERS]
    options = growthchart.FitOptions(
        fp_candidates=candidates,
        sigma_age=not args.no_sigma_age,
        ridge_lambda=args.ridge_lambda,
    )
    model = growthchart.fit(sessions, Region(args.region), options)
    growthchart.save_growth_model(args.out, model)
    print(
        f"fitted {args.region} on {len(sessions)} sessions: "
        f"powers {model.fp_mu.powers}, nu {model.nu:.4f}, bic {model.bic:.2f}, "
        f"converged {model.converged} -> {args.out}"
    )
    return 0


def _cmd_centiles(args) -> int:
    model = growthchart.load_growth_model(args.model)
    records = phenotype.load_phenotype_csv(args.phenotypes)
    sessions, _ = phenotype.build_sessions(records, AggregationMethod(args.method))
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["session_id", "centile"])
        for s in sessions:
            w.writerow([s.session_id, f"{growthchart.centile(model, s):.6f}"])
    print(f"centiles for {len(sessions)} sessions -> {args.out}")
    return 0


def _cmd_curves(args) -> int:
    model = growthchart.load_growth_model(args.model)
    n = args.points
    ages = [args.age_min + i * (args.age_max - args.age_min) / (n - 1) for i in range(n)]
    rows = growthchart.percentile_curves(model, ages, Sex(args.sex))
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["age_years", "p2.5", "p50", "p97.5"])
        for row in rows:
            w.writerow(
                [f"{row['age_years']:.4f}", f"{row['p2.5']:.4f}", f"{row['p50']:.4f}", f"{row['p97.5']:.4f}"]
            )
    print(f"{n} grid points -> {args.out}")
    return 0


def _load_centiles_csv(path) -> dict[str, float]:
    out = {}
    with open(path, encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            out[row["session_id"]] = float(row["centile"])
    return out


def _cmd_compare(args) -> int:
    a = _load_centiles_csv(args.a)
    b = _load_centiles_csv(args.b)
    shared = sorted(set(a) & set(b))
    if len(shared) < 3:
        raise DataError(f"only {len(shared)} shared sessions between the two files")
    r = growthchart.compare_centiles([a[s] for s in shared], [b[s] for s in shared])
    print(f"pearson_r: {r:.6f} over {len(shared)} shared sessions")
    return 0


def _cmd_run_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seeds = (args.seed,)
    run_dir = run_experiment(args.name, cfg)
    print(f"run directory: {run_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="normcharts",
        description="Report triage and normative growth-chart pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a reports JSONL file")
    p.add_argument("--reports", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("label", help="derive reference labels")
    p.add_argument("--reports", required=True)
    p.add_argument("--annotations")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("split", help="seeded train/val/test assignment")
    p.add_argument("--reports", required=True)
    p.add_argument("--labels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train", help="train the linear report classifier")
    p.add_argument("--reports", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pos-weight", type=float, default=10.0)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--balanced", action="store_true")
    p.add_argument("--input-mode", choices=[m.value for m in InputMode], default="full")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained classifier")
    p.add_argument("--model", required=True)
    p.add_argument("--reports", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--subset", choices=[s.value for s in corpus.Subset], default="Test")
    p.add_argument("--input-mode", choices=[m.value for m in InputMode], default="full")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("triage", help="run the direct or stepwise inquiry")
    p.add_argument("--reports", required=True)
    p.add_argument("--mode", choices=[m.value for m in stepwise.InquiryMode], required=True)
    p.add_argument("--fixture")
    p.add_argument("--endpoint")
    p.add_argument("--model-name", default="default")
    p.add_argument("--gold")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_triage)

    p = sub.add_parser("qc", help="drop sequences failing any QC category")
    p.add_argument("--phenotypes", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_qc)

    p = sub.add_parser("aggregate", help="collapse sequences to sessions")
    p.add_argument("--phenotypes", required=True)
    p.add_argument("--method", choices=[m.value for m in AggregationMethod], default="median")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("fit-growth", help="fit the normative growth model")
    p.add_argument("--phenotypes", required=True)
    p.add_argument("--region", choices=[r.value for r in Region], required=True)
    p.add_argument("--method", choices=[m.value for m in AggregationMethod], default="median")
    p.add_argument("--ridge-lambda", type=float, default=1.0)
    p.add_argument("--no-sigma-age", action="store_true")
    p.add_argument("--fp1-only", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit_growth)

    p = sub.add_parser("centiles", help="score sessions against a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--phenotypes", required=True)
    p.add_argument("--method", choices=[m.value for m in AggregationMethod], default="median")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_centiles)

    p = sub.add_parser(
        "curves", aliases=["plot-data"], help="emit percentile curve grid points"
    )
    p.add_argument("--model", required=True)
    p.add_argument("--sex", choices=["M", "F"], default="F")
    p.add_argument("--age-min", type=float, default=0.5)
    p.add_argument("--age-max", type=float, default=19.0)
    p.add_argument("--points", type=int, default=38)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_curves)

    p = sub.add_parser("compare", help="Pearson r between two centile files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("run-experiment", help="execute a named end-to-end protocol")
    p.add_argument("name", choices=EXPERIMENTS)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_run_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 4
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NormchartsError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
