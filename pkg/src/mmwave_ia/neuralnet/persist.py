"""Model files: the shared container with a model magic, parameters stored little-endian."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import FormatError, ShapeError
from ..iohelpers import atomic_write_bytes, pack_container, read_container
from .model import BatchNorm, MlpModel

MODEL_MAGIC = b"MMIA-NN\n"
MODEL_SCHEMA = 1


def model_to_bytes(model: MlpModel) -> bytes:
    from ..scenario import NormalizationScale

    norm = model.normalization
    header = {
        "format": "mmwave-ia-model",
        "schema_version": MODEL_SCHEMA,
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "hidden_sizes": list(model.hidden_sizes),
        "bn_momentum": model.bn_momentum,
        "bn_eps": model.bn_eps,
        "bn_placement": model.bn_placement,
        "dtype": np.dtype(model.dtype).name,
        "beam_subset": list(model.beam_subset) if model.beam_subset is not None else None,
        "normalization": norm.to_dict() if isinstance(norm, NormalizationScale) else None,
        "meta": model.meta,
    }
    arrays = {**model.parameters(), **model.buffers()}
    return pack_container(MODEL_MAGIC, header, arrays)


def save_model(model: MlpModel, path: str | Path) -> None:
    atomic_write_bytes(path, model_to_bytes(model))


def load_model(path: str | Path) -> MlpModel:
    from ..scenario import NormalizationScale

    header, arrays = read_container(path, MODEL_MAGIC, "model")
    if header.get("format") != "mmwave-ia-model":
        raise FormatError(f"{path}: not a model file")
    if header.get("schema_version") != MODEL_SCHEMA:
        raise FormatError(f"{path}: unsupported model schema version {header.get('schema_version')!r}")
    try:
        hidden = tuple(int(h) for h in header["hidden_sizes"])
        input_dim, output_dim = int(header["input_dim"]), int(header["output_dim"])
        dtype = np.dtype(header["dtype"])
        sizes = (input_dim, *hidden, output_dim)
        weights, biases = [], []
        for i in range(1, len(sizes)):
            w, b = arrays[f"dense{i}.W"], arrays[f"dense{i}.b"]
            if w.shape != (sizes[i - 1], sizes[i]) or b.shape != (sizes[i],):
                raise ShapeError(f"{path}: dense{i} has shape {w.shape}, expected {(sizes[i - 1], sizes[i])}")
            weights.append(w.astype(dtype))
            biases.append(b.astype(dtype))
        bns = []
        for i, width in enumerate((input_dim, *hidden)):
            parts = [arrays[f"bn{i}.{k}"] for k in ("gamma", "beta", "running_mean", "running_var")]
            if any(p.shape != (width,) for p in parts):
                raise ShapeError(f"{path}: bn{i} arrays do not have width {width}")
            bns.append(BatchNorm(*(p.astype(dtype) for p in parts)))
    except KeyError as exc:
        raise FormatError(f"{path}: missing model field {exc}") from None
    norm = header.get("normalization")
    subset = header.get("beam_subset")
    if subset is not None and len(subset) != input_dim:
        raise ShapeError(f"{path}: beam subset of size {len(subset)} for a {input_dim}-input model")
    return MlpModel(
        input_dim=input_dim,
        output_dim=output_dim,
        hidden_sizes=hidden,
        weights=weights,
        biases=biases,
        bns=bns,
        bn_momentum=float(header["bn_momentum"]),
        bn_eps=float(header["bn_eps"]),
        bn_placement=str(header["bn_placement"]),
        beam_subset=tuple(int(b) for b in subset) if subset is not None else None,
        normalization=NormalizationScale.from_dict(norm) if norm is not None else None,
        meta=dict(header.get("meta", {})),
    )
