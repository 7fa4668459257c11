"""Policy evaluation, cross-scenario protocol, and report emission.

A policy maps one test sample to a fine-codebook beam index:

* ``model``       - a trained FusionModel checkpoint (counts one coarse sweep)
* ``softmax-ref`` - per-sector softmax regression fit on the train split
* ``hc``          - hierarchical codebook search on the sample's channel
* ``exhaustive``  - noised sweep over the whole fine codebook

Reports carry Top-1 accuracy, mean achievable rate at the predicted beams
(noise power from each sample's stored SNR), measurement counts, and the
median per-sample inference time.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baseline import exhaustive_search, hierarchical_search
from .channel import noise_power_for_snr
from .codebook import build_codebook
from .errors import ConfigError, DataError
from .learner.estimators import SoftmaxRefClassifier
from .learner.nets import predict as model_predict
from .learner.train import TrainSchedule, train
from .measurement import (
    Dataset,
    achievable_rate,
    build_dataset,
    normalized_channel,
    scenario_fingerprint,
    sector_codebooks,
)
from .rng import derive_seed
from .scenario import Scenario

POLICIES = ("model", "hc", "exhaustive", "softmax-ref")

_TIMING_WARMUP = 3


@dataclass
class EvalReport:
    task: str
    snr_db: float
    policy: str
    top1: float
    mean_rate: float
    mean_measurements: float
    sample_count: int
    inference_time_ms: float
    provenance: dict = field(default_factory=dict)


def top1_accuracy(predictions, labels) -> float:
    predictions = list(predictions)
    labels = list(labels)
    if len(predictions) != len(labels):
        raise ValueError(f"{len(predictions)} predictions vs {len(labels)} labels")
    if not labels:
        raise ValueError("cannot score an empty prediction list")
    return sum(p == l for p, l in zip(predictions, labels)) / len(labels)


def _task_name(provenance) -> str:
    cx1, cx2 = provenance["coarse_resolution"]
    fx1, fx2 = provenance["fine_resolution"]
    return f"{cx1}x{cx2}->{fx1}x{fx2}"


def _median_ms(durations) -> float:
    return float(np.median(durations) * 1e3) if durations else float("nan")


def evaluate_policy(
    policy: str,
    dataset: Dataset,
    scenario: Scenario,
    model=None,
    seed: int = 0,
    split: str = "test",
) -> EvalReport:
    """Run one policy over a dataset split and summarize its performance."""
    if policy not in POLICIES:
        raise ConfigError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    idx = dataset.split.get(split, [])
    if not idx:
        raise DataError(f"dataset has an empty {split!r} split")
    fingerprint = scenario_fingerprint(scenario)
    if dataset.provenance.get("scenario_sha256") not in (None, fingerprint):
        raise DataError("dataset provenance does not match the supplied scenario")

    snr_db = float(dataset.provenance["snr_db"])
    geom, ofdm = scenario.config.geom, scenario.config.ofdm
    coarse = sector_codebooks(tuple(dataset.provenance["coarse_resolution"]), geom)
    fine = sector_codebooks(tuple(dataset.provenance["fine_resolution"]), geom)
    ue_by_id = {ue.id: ue for ue in scenario.ues}

    samples = [dataset.samples[i] for i in idx]
    labels = [s.label_fine_beam for s in samples]
    coarse_count = next(iter(coarse.values())).beam_count
    fine_count = next(iter(fine.values())).beam_count

    channels = {}
    for s in samples:
        if s.ue_id not in ue_by_id:
            raise DataError(f"dataset sample references UE {s.ue_id} not present in the scenario")
        channels[s.ue_id] = normalized_channel(ue_by_id[s.ue_id], geom, ofdm)

    predictions = []
    measurements = []
    durations = []

    if policy == "softmax-ref":
        train_samples = [dataset.samples[i] for i in dataset.split.get("train", [])]
        if not train_samples:
            raise DataError("softmax-ref needs a nonempty train split to fit on")
        ref = SoftmaxRefClassifier(seed=seed)
        ref.fit(
            np.stack([s.features for s in train_samples]),
            np.array([s.label_fine_beam for s in train_samples]),
            sectors=np.array([s.sector_id for s in train_samples]),
        )

    for pos, s in enumerate(samples):
        h = channels[s.ue_id]
        noise_power = noise_power_for_snr(h, snr_db)
        start = time.perf_counter()
        if policy == "model":
            if model is None:
                raise ConfigError("model policy requires a trained model")
            beams, _ = model_predict(model, s.features[None], [s.sector_id])
            pred = int(beams[0])
            count = coarse_count
        elif policy == "softmax-ref":
            pred = int(ref.predict(s.features[None], sectors=[s.sector_id])[0])
            count = coarse_count
        elif policy == "hc":
            trace = hierarchical_search(
                h, coarse[s.sector_id], fine[s.sector_id], noise_power, derive_seed(seed, 31, s.ue_id)
            )
            pred, count = trace.final_beam, trace.total_measurements
        else:  # exhaustive
            trace = exhaustive_search(h, fine[s.sector_id], noise_power, derive_seed(seed, 32, s.ue_id))
            pred, count = trace.final_beam, trace.total_measurements
        elapsed = time.perf_counter() - start
        if pos >= _TIMING_WARMUP:
            durations.append(elapsed)
        predictions.append(pred)
        measurements.append(count)

    rates = []
    for s, pred in zip(samples, predictions):
        noise_power = noise_power_for_snr(channels[s.ue_id], snr_db)
        if noise_power == 0.0:  # infinite-SNR sentinel
            rates.append(float("inf"))
        else:
            rates.append(achievable_rate(channels[s.ue_id], fine[s.sector_id].beams[pred].vector, noise_power))
    return EvalReport(
        task=_task_name(dataset.provenance),
        snr_db=snr_db,
        policy=policy,
        top1=top1_accuracy(predictions, labels),
        mean_rate=float(np.mean(rates)),
        mean_measurements=float(np.mean(measurements)),
        sample_count=len(samples),
        inference_time_ms=_median_ms(durations),
        provenance={
            "scenario_sha256": fingerprint,
            "dataset_seed": dataset.provenance.get("seed"),
            "eval_seed": seed,
            "split": split,
        },
    )


@dataclass(frozen=True)
class CrossEvalSettings:
    coarse_resolution: tuple = (4, 4)
    fine_resolution: tuple = (16, 16)
    snr_db: float = 0.0
    dataset_seed: int = 0
    train_seed: int = 0
    model_config: object = None  # learner.ModelConfig; default built at run time
    schedule: TrainSchedule = field(default_factory=TrainSchedule)


def cross_scenario_eval(train_scenario: Scenario, test_scenarios, settings: CrossEvalSettings):
    """Train once, evaluate frozen on each test scenario's dataset."""
    from .learner.nets import ModelConfig

    fx1, fx2 = settings.fine_resolution
    config = settings.model_config or ModelConfig(fine_beam_count=fx1 * fx2)
    if config.fine_beam_count != fx1 * fx2:
        raise ConfigError("model fine_beam_count must match the fine codebook size")
    ds_train = build_dataset(
        train_scenario,
        settings.coarse_resolution,
        settings.fine_resolution,
        settings.snr_db,
        seed=settings.dataset_seed,
    )
    model, _ = train(ds_train, config, settings.schedule, seed=settings.train_seed)
    train_tag = scenario_fingerprint(train_scenario)
    reports = []
    for scenario in test_scenarios:
        ds = build_dataset(
            scenario,
            settings.coarse_resolution,
            settings.fine_resolution,
            settings.snr_db,
            seed=settings.dataset_seed,
        )
        report = evaluate_policy("model", ds, scenario, model=model, seed=settings.train_seed)
        report.provenance["train_scenario_sha256"] = train_tag
        report.provenance["test_scenario_sha256"] = scenario_fingerprint(scenario)
        reports.append(report)
    return reports


# ---------------------------------------------------------------------------
# Report files: CSV with a fixed column order, JSON, or plain x/y plot data.

_CSV_COLUMNS = [
    "task",
    "snr_db",
    "policy",
    "top1",
    "mean_rate",
    "mean_measurements",
    "sample_count",
    "inference_time_ms",
    "provenance",
]


def emit_report(reports, fmt: str, out_path) -> list:
    """Write reports in the chosen format; returns the created file paths."""
    if not reports:
        raise ValueError("no reports to emit")
    out = Path(out_path)
    if fmt == "csv":
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_COLUMNS)
            for r in reports:
                row = asdict(r)
                row["provenance"] = json.dumps(row["provenance"], sort_keys=True)
                writer.writerow([row[c] for c in _CSV_COLUMNS])
        return [out]
    if fmt == "json":
        with open(out, "w", encoding="utf-8") as fh:
            json.dump([asdict(r) for r in reports], fh, sort_keys=True, indent=2)
        return [out]
    if fmt == "plotdata":
        out.mkdir(parents=True, exist_ok=True)
        created = []
        series = {}
        for r in reports:
            series.setdefault((r.policy, r.task), []).append(r)
        for (policy, task), group in sorted(series.items()):
            group = sorted(group, key=lambda r: r.snr_db)
            for metric in ("top1", "mean_rate"):
                name = f"{metric}__{policy}__{task.replace('->', '_to_')}.dat"
                path = out / name
                with open(path, "w", encoding="utf-8") as fh:
                    for r in group:
                        fh.write(f"{r.snr_db} {getattr(r, metric)}\n")
                created.append(path)
        return created
    raise ConfigError(f"unknown report format {fmt!r}")


def read_reports(path) -> list:
    """Load reports back from a CSV or JSON file written by emit_report."""
    path = Path(path)
    if path.suffix == ".json":
        with open(path, encoding="utf-8") as fh:
            return [EvalReport(**obj) for obj in json.load(fh)]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        reports = []
        for row in reader:
            reports.append(
                EvalReport(
                    task=row["task"],
                    snr_db=float(row["snr_db"]),
                    policy=row["policy"],
                    top1=float(row["top1"]),
                    mean_rate=float(row["mean_rate"]),
                    mean_measurements=float(row["mean_measurements"]),
                    sample_count=int(row["sample_count"]),
                    inference_time_ms=float(row["inference_time_ms"]),
                    provenance=json.loads(row["provenance"]),
                )
            )
        return reports
