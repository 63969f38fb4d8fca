"""Accuracy, confusion matrices, per-policy reports and accuracy-vs-beam-count sweeps."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .neuralnet.model import MlpModel
from .neuralnet.training import TrainConfig, train
from .policies import N_BEAMS, BeamSubset, TimingConstants, cbs_select, deepia_select, ia_time
from .selection import SfsTrace, msb, subset_config

log = logging.getLogger(__name__)


def accuracy(predictions, labels) -> float:
    """Percentage of exact matches."""
    p, t = np.asarray(predictions), np.asarray(labels)
    if p.shape != t.shape:
        raise ValueError("predictions and labels differ in length")
    if p.size == 0:
        raise ValueError("accuracy of an empty set is undefined")
    return float(np.count_nonzero(p == t) * 100.0 / p.size)


def confusion_matrix(predictions, labels, n_beams: int = N_BEAMS) -> np.ndarray:
    """``counts[true - 1, pred - 1]``; rows are true beams, columns predictions."""
    p, t = np.asarray(predictions, dtype=np.int64), np.asarray(labels, dtype=np.int64)
    if p.shape != t.shape:
        raise ValueError("predictions and labels differ in length")
    for arr in (p, t):
        if arr.size and (arr.min() < 1 or arr.max() > n_beams):
            raise ValueError(f"beam indices must lie in 1..{n_beams}")
    counts = np.zeros((n_beams, n_beams), dtype=np.int64)
    np.add.at(counts, (t - 1, p - 1), 1)
    return counts


def per_beam_recall(confusion: np.ndarray) -> list[float | None]:
    rows = confusion.sum(axis=1)
    return [float(confusion[i, i] * 100.0 / rows[i]) if rows[i] else None for i in range(len(rows))]


def error_offsets(confusion: np.ndarray) -> np.ndarray:
    """Mass at each cyclic offset ``(pred - true) mod N``; index 0 is the diagonal."""
    n = confusion.shape[0]
    out = np.zeros(n, dtype=np.int64)
    for t in range(n):
        for p in range(n):
            out[(p - t) % n] += confusion[t, p]
    return out


@dataclass
class EvalReport:
    policy: str
    beam_subset: BeamSubset
    channel_tag: str
    snapshots: int
    split: str
    n_receivers: int
    accuracy: float
    confusion: np.ndarray
    ia_time: dict
    provenance: dict = field(default_factory=dict)

    @property
    def per_beam_recall(self) -> list[float | None]:
        return per_beam_recall(self.confusion)

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "beam_subset": self.beam_subset.to_dict(),
            "m": len(self.beam_subset),
            "channel_tag": self.channel_tag,
            "snapshots": self.snapshots,
            "split": self.split,
            "n_receivers": self.n_receivers,
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "per_beam_recall": self.per_beam_recall,
            "ia_time": self.ia_time,
            "provenance": self.provenance,
        }

    def confusion_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.confusion.shape[0]
        w.writerow(["true\\pred"] + [str(i) for i in range(1, n + 1)])
        for i, row in enumerate(self.confusion, start=1):
            w.writerow([str(i)] + [str(int(v)) for v in row])
        return buf.getvalue()


def evaluate(
    dataset,
    policy: str,
    subset: BeamSubset,
    *,
    model: MlpModel | None = None,
    snapshots: int | None = None,
    split: str = "test",
    timing: TimingConstants = TimingConstants(),
    provenance: dict | None = None,
) -> EvalReport:
    """Score one policy on one split of ``dataset`` using RSS from ``subset`` only."""
    key = policy.lower()
    rows = dataset.split_mask(split)
    if not rows.any():
        raise ValueError(f"dataset has no {split!r} rows")
    s = dataset.snapshots if snapshots is None else int(snapshots)
    feats = dataset.features(s)[rows][:, subset.columns]
    labels = dataset.true_beam[rows]
    if key == "cbs":
        pred = cbs_select(feats, subset)
    elif key == "deepia":
        if model is None:
            raise ValueError("the deepia policy needs a trained model")
        pred = deepia_select(model, feats, subset)
    else:
        raise ValueError(f"unknown policy {policy!r}")
    conf = confusion_matrix(pred, labels, dataset.n_beams)
    prov = {"dataset_seed": dataset.seed, "channel": dataset.channel.to_dict()}
    if model is not None:
        prov["train_config"] = model.meta.get("train_config")
    prov.update(provenance or {})
    return EvalReport(
        policy=key,
        beam_subset=subset,
        channel_tag=dataset.channel_tag,
        snapshots=s,
        split=split,
        n_receivers=int(rows.sum()),
        accuracy=accuracy(pred, labels),
        confusion=conf,
        ia_time=ia_time(key, len(subset), timing).to_dict(),
        provenance=prov,
    )


def resolve_subset(source, m: int) -> BeamSubset:
    if isinstance(source, SfsTrace):
        return source.subset(m)
    if source == "msb":
        return msb(m)
    raise ValueError(f"subset source must be 'msb' or an SFS trace, got {source!r}")


def sweep_experiment(
    dataset,
    policies=("cbs", "deepia"),
    subset_source="msb",
    m_values=range(1, N_BEAMS + 1),
    snapshots: int | None = None,
    train_cfg: TrainConfig = TrainConfig(),
    *,
    split: str = "test",
    normalization: str = "db",
    timing: TimingConstants = TimingConstants(),
) -> list[EvalReport]:
    """For each m build the subset, train where needed and evaluate every policy on it.

    Both policies see the same subset, so they are compared at equal sweep time.
    """
    if snapshots is not None and snapshots > dataset.snapshots:
        raise ValueError(f"dataset holds {dataset.snapshots} snapshots, asked for {snapshots}")
    reports = []
    for m in m_values:
        subset = resolve_subset(subset_source, int(m))
        for policy in policies:
            model = None
            if policy == "deepia":
                model, _ = train(dataset, subset, subset_config(train_cfg, subset.beams), snapshots=snapshots, normalization=normalization)
            rep = evaluate(dataset, policy, subset, model=model, snapshots=snapshots, split=split, timing=timing)
            log.info("m=%d %s %s: %.3f%%", m, policy, subset.beams, rep.accuracy)
            reports.append(rep)
    return reports


SWEEP_COLUMNS = ("m", "policy", "subset_origin", "s", "accuracy", "beams", "channel", "sweep_time_s", "total_time_s")


def sweep_rows(reports: list[EvalReport]) -> list[dict]:
    return [
        {
            "m": len(r.beam_subset),
            "policy": r.policy,
            "subset_origin": r.beam_subset.origin,
            "s": r.snapshots,
            "accuracy": r.accuracy,
            "beams": " ".join(str(b) for b in r.beam_subset.beams),
            "channel": r.channel_tag,
            "sweep_time_s": r.ia_time["sweep_time"],
            "total_time_s": r.ia_time["total"],
        }
        for r in reports
    ]


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
