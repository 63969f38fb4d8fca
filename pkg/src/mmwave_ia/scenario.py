"""Receiver population, RSS feature generation, splits, normalization and dataset files.

RSS for receiver k, beam i, snapshot j::

    rss[k, i, j] = tx_power + gain_i(A_k) - PL(d_k) - X[k, i, j]

with omnidirectional (0 dBi) receivers. Labels come from geometry, not RSS.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .antenna import ArrayConfig, BeamCodebook, build_codebook, label_offset
from .channel import ChannelParams, mean_path_loss
from .errors import FormatError, ShapeError
from .iohelpers import atomic_write_bytes, pack_container, read_container

SPLIT_NAMES = ("train", "val", "test")
CHUNK = 8192  # receivers per generation chunk; part of the determinism contract

DATASET_MAGIC = b"MMIA-DS\n"
DATASET_SCHEMA = 1


def true_beam_label(azimuth, n_beams: int = 24):
    """Sector label of each azimuth (deg, in [0, 360)).

    The azimuth is floored to whole degrees, shifted and wrapped:
    ``ceil(((floor(A) + h) mod 360) / w)`` with ``w = 360/N`` and a zero result
    mapped to beam N. For 24 beams ``h = 8``, so floor(A) in {353..359, 0..7}
    gives beam 1 and 352 gives beam 24.
    """
    az = np.asarray(azimuth, dtype=np.float64)
    width = 360 // n_beams
    shifted = np.mod(np.floor(az) + label_offset(n_beams), 360.0)
    label = np.ceil(shifted / width).astype(np.int64)
    label = np.where(label == 0, n_beams, label)
    return int(label) if label.ndim == 0 else label


def azimuth_deg(x, y) -> np.ndarray:
    az = np.mod(np.degrees(np.arctan2(np.asarray(y, np.float64), np.asarray(x, np.float64))), 360.0)
    return np.where(az >= 360.0, 0.0, az)


@dataclass(frozen=True)
class Receiver:
    id: int
    x: float
    y: float
    distance: float
    azimuth: float
    true_beam: int


@dataclass(eq=False)
class Receivers:
    """Column store of the receiver population, positions held as float32.

    Distance, azimuth and label are derived from the stored positions so that a
    file round trip reproduces them exactly.
    """

    x: np.ndarray
    y: np.ndarray
    n_beams: int = 24

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float32)
        self.y = np.asarray(self.y, dtype=np.float32)
        self.distance = np.hypot(self.x.astype(np.float64), self.y.astype(np.float64))
        self.azimuth = azimuth_deg(self.x, self.y)
        self.true_beam = true_beam_label(self.azimuth, self.n_beams)

    def __len__(self) -> int:
        return len(self.x)

    def __getitem__(self, k: int) -> Receiver:
        return Receiver(
            id=int(k),
            x=float(self.x[k]),
            y=float(self.y[k]),
            distance=float(self.distance[k]),
            azimuth=float(self.azimuth[k]),
            true_beam=int(self.true_beam[k]),
        )


def sample_receivers(
    count: int, half_side: float, exclusion: float, rng: np.random.Generator, n_beams: int = 24
) -> Receivers:
    """Uniform positions on the square ``[-half_side, half_side]^2`` minus the exclusion disk."""
    if not half_side > exclusion >= 0:
        raise ValueError("need half_side > exclusion >= 0")
    if count < 0:
        raise ValueError("count must be >= 0")
    keep_x, keep_y, have = [], [], 0
    while have < count:
        want = max(1024, int((count - have) * 1.05))
        x = rng.uniform(-half_side, half_side, want).astype(np.float32)
        y = rng.uniform(-half_side, half_side, want).astype(np.float32)
        ok = np.hypot(x.astype(np.float64), y.astype(np.float64)) >= exclusion
        keep_x.append(x[ok])
        keep_y.append(y[ok])
        have += int(ok.sum())
    x = np.concatenate(keep_x)[:count] if keep_x else np.zeros(0, np.float32)
    y = np.concatenate(keep_y)[:count] if keep_y else np.zeros(0, np.float32)
    return Receivers(x, y, n_beams)


@dataclass(eq=False)
class IADataset:
    receivers: Receivers
    rss_raw: np.ndarray  # float32 [R, N, s], dBm
    channel_tag: str
    channel: ChannelParams
    tx_power: float
    seed: int | None = None
    split: np.ndarray | None = None  # uint8 per receiver, index into SPLIT_NAMES
    meta: dict = field(default_factory=dict)

    @property
    def n_receivers(self) -> int:
        return self.rss_raw.shape[0]

    @property
    def n_beams(self) -> int:
        return self.rss_raw.shape[1]

    @property
    def snapshots(self) -> int:
        return self.rss_raw.shape[2]

    @property
    def true_beam(self) -> np.ndarray:
        return self.receivers.true_beam

    @property
    def rss_features(self) -> np.ndarray:
        return self.features()

    def features(self, snapshots: int | None = None, domain: str = "db") -> np.ndarray:
        """Per-(receiver, beam) average of the first ``snapshots`` measurements, dBm.

        ``domain="db"`` averages the dB values; ``"linear"`` averages milliwatts
        and converts back.
        """
        s = self.snapshots if snapshots is None else int(snapshots)
        if not 1 <= s <= self.snapshots:
            raise ValueError(f"snapshots must be in 1..{self.snapshots}, got {s}")
        raw = self.rss_raw[:, :, :s]
        if s == 1:
            return raw[:, :, 0].astype(np.float64)
        if domain == "db":
            return raw.mean(axis=2, dtype=np.float64)
        if domain == "linear":
            return 10.0 * np.log10(np.power(10.0, raw.astype(np.float64) / 10.0).mean(axis=2))
        raise ValueError(f"domain must be 'db' or 'linear', got {domain!r}")

    def split_mask(self, name: str) -> np.ndarray:
        if self.split is None:
            raise ValueError("dataset has not been split")
        return self.split == SPLIT_NAMES.index(name)

    def split_sizes(self) -> dict[str, int]:
        return {name: int(self.split_mask(name).sum()) for name in SPLIT_NAMES}


def generate_rss(
    receivers: Receivers,
    codebook: BeamCodebook,
    params: ChannelParams,
    tx_power: float,
    snapshots: int,
    rng: np.random.Generator,
    *,
    channel_tag: str = "custom",
    shadowing: str = "independent",
) -> IADataset:
    """Measure every beam ``snapshots`` times for every receiver.

    ``shadowing="independent"`` draws a fresh shadow term per (receiver, beam,
    snapshot); ``"shared"`` draws one per (receiver, snapshot), common to all
    beams of that sweep.
    """
    if snapshots < 1:
        raise ValueError("snapshots must be >= 1")
    if shadowing not in ("independent", "shared"):
        raise ValueError("shadowing must be 'independent' or 'shared'")
    n, nb = len(receivers), codebook.n_beams
    raw = np.empty((n, nb, snapshots), dtype=np.float32)
    beam_width = 1 if shadowing == "shared" else nb
    for start in range(0, n, CHUNK):
        stop = min(n, start + CHUNK)
        gains = codebook.gain_matrix(receivers.azimuth[start:stop])
        pl = mean_path_loss(receivers.distance[start:stop], params)
        shadow = rng.standard_normal((stop - start, beam_width, snapshots)) * params.shadow_std
        raw[start:stop] = (tx_power + gains - pl[:, None])[:, :, None] - shadow
    return IADataset(
        receivers=receivers,
        rss_raw=raw,
        channel_tag=channel_tag,
        channel=params,
        tx_power=float(tx_power),
        meta={"shadowing": shadowing},
    )


def split_dataset(
    ds: IADataset, fractions=(0.65, 0.15, 0.20), rng: np.random.Generator | None = None
) -> IADataset:
    """Random disjoint train/val/test assignment by receiver."""
    fr = np.asarray(fractions, dtype=np.float64)
    if fr.shape != (3,) or np.any(fr < 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise ValueError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    if rng is None:
        rng = np.random.default_rng(0)
    n = ds.n_receivers
    n_train = int(round(fr[0] * n))
    n_val = min(n - n_train, int(round(fr[1] * n)))
    codes = np.full(n, 2, dtype=np.uint8)
    order = rng.permutation(n)
    codes[order[:n_train]] = 0
    codes[order[n_train : n_train + n_val]] = 1
    meta = dict(ds.meta, split_fractions=[float(f) for f in fr])
    return replace(ds, split=codes, meta=meta)


def build_dataset(
    n_receivers: int,
    channel: ChannelParams,
    *,
    channel_tag: str = "custom",
    snapshots: int = 1,
    seed: int = 0,
    array: ArrayConfig = ArrayConfig(),
    n_beams: int = 24,
    half_side: float = 25.0,
    exclusion: float = 1.0,
    tx_power: float = 20.0,
    fractions=(0.65, 0.15, 0.20),
    shadowing: str = "independent",
) -> IADataset:
    """Sample receivers, measure RSS and split, each stage on its own child stream of ``seed``."""
    pos_seed, shadow_seed, split_seed = np.random.SeedSequence(seed).spawn(3)
    receivers = sample_receivers(n_receivers, half_side, exclusion, np.random.default_rng(pos_seed), n_beams)
    ds = generate_rss(
        receivers,
        build_codebook(array, n_beams),
        channel,
        tx_power,
        snapshots,
        np.random.default_rng(shadow_seed),
        channel_tag=channel_tag,
        shadowing=shadowing,
    )
    ds.seed = int(seed)
    ds.meta.update(half_side=half_side, exclusion=exclusion, array=asdict(array))
    return split_dataset(ds, fractions, np.random.default_rng(split_seed))


# --- normalization -------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizationScale:
    """``feature = (transform(rss_dbm) - offset) / scale``, fitted on training rows.

    ``mode="linear"``: transform to milliwatts, offset 0, scale = max |mW|.
    ``mode="db"``: identity transform, offset = min dBm, scale = max - min.
    Either way training rows land in [0, 1]; other rows may fall slightly outside.
    """

    mode: str
    offset: float
    scale: float

    @property
    def max_abs_linear(self) -> float:
        if self.mode != "linear":
            raise AttributeError("max_abs_linear is defined for linear scaling only")
        return self.scale

    def to_dict(self) -> dict:
        return {"mode": self.mode, "offset": self.offset, "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationScale":
        return cls(str(d["mode"]), float(d["offset"]), float(d["scale"]))


def fit_normalization(train_features_dbm: np.ndarray, mode: str = "db") -> NormalizationScale:
    x = np.asarray(train_features_dbm, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot fit normalization on an empty training set")
    if mode == "linear":
        peak = float(np.abs(np.power(10.0, x / 10.0)).max())
        if not peak > 0:
            raise ValueError("maximum linear power must be positive")
        return NormalizationScale("linear", 0.0, peak)
    if mode == "db":
        lo, hi = float(x.min()), float(x.max())
        if hi == lo:
            lo = hi - 1.0  # degenerate range: every training value maps to 1
        return NormalizationScale("db", lo, hi - lo)
    raise ValueError(f"normalization mode must be 'db' or 'linear', got {mode!r}")


def apply_normalization(features_dbm: np.ndarray, scale: NormalizationScale) -> np.ndarray:
    x = np.asarray(features_dbm, dtype=np.float64)
    if scale.mode == "linear":
        return np.power(10.0, x / 10.0) / scale.scale
    return (x - scale.offset) / scale.scale


# --- persistence ---------------------------------------------------------------------


def dataset_to_bytes(ds: IADataset) -> bytes:
    header = {
        "format": "mmwave-ia-dataset",
        "schema_version": DATASET_SCHEMA,
        "n_receivers": ds.n_receivers,
        "n_beams": ds.n_beams,
        "snapshots": ds.snapshots,
        "seed": ds.seed,
        "channel_tag": ds.channel_tag,
        "channel": ds.channel.to_dict(),
        "tx_power_dbm": ds.tx_power,
        "meta": ds.meta,
    }
    arrays = {"x": ds.receivers.x, "y": ds.receivers.y, "rss_raw": ds.rss_raw.astype(np.float32)}
    if ds.split is not None:
        arrays["split"] = ds.split.astype(np.uint8)
    return pack_container(DATASET_MAGIC, header, arrays)


def save_dataset(ds: IADataset, path: str | Path) -> None:
    atomic_write_bytes(path, dataset_to_bytes(ds))


def load_dataset(path: str | Path, expected_n_beams: int | None = None) -> IADataset:
    header, arrays = read_container(path, DATASET_MAGIC, "dataset")
    if header.get("format") != "mmwave-ia-dataset":
        raise FormatError(f"{path}: not a dataset file")
    if header.get("schema_version") != DATASET_SCHEMA:
        raise FormatError(f"{path}: unsupported dataset schema version {header.get('schema_version')!r}")
    try:
        n, nb, s = header["n_receivers"], header["n_beams"], header["snapshots"]
        raw, x, y = arrays["rss_raw"], arrays["x"], arrays["y"]
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from None
    if raw.shape != (n, nb, s) or x.shape != (n,) or y.shape != (n,):
        raise ShapeError(f"{path}: array shapes disagree with header ({raw.shape} vs {(n, nb, s)})")
    if expected_n_beams is not None and nb != expected_n_beams:
        raise ShapeError(f"{path}: dataset has {nb} beams, expected {expected_n_beams}")
    split = arrays.get("split")
    if split is not None and split.shape != (n,):
        raise ShapeError(f"{path}: split has shape {split.shape}, expected {(n,)}")
    return IADataset(
        receivers=Receivers(x, y, nb),
        rss_raw=raw.astype(np.float32),
        channel_tag=header["channel_tag"],
        channel=ChannelParams(**header["channel"]),
        tx_power=float(header["tx_power_dbm"]),
        seed=header["seed"],
        split=split,
        meta=header.get("meta", {}),
    )


def export_csv(ds: IADataset, path: str | Path, snapshots: int | None = None) -> None:
    """Inspection table: id, position, azimuth, label, split and per-beam averaged RSS."""
    feats = ds.features(snapshots)
    rec = ds.receivers
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["receiver", "x", "y", "azimuth_deg", "true_beam", "split"] + [f"rss_beam_{i}" for i in range(1, ds.n_beams + 1)])
        for k in range(ds.n_receivers):
            split = SPLIT_NAMES[ds.split[k]] if ds.split is not None else ""
            w.writerow(
                [k + 1, f"{rec.x[k]:.6f}", f"{rec.y[k]:.6f}", f"{rec.azimuth[k]:.6f}", int(rec.true_beam[k]), split]
                + [f"{v:.4f}" for v in feats[k]]
            )
    tmp.replace(path)
