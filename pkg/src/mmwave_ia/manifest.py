"""Run manifests: everything needed to re-run a command and check its outputs."""

from __future__ import annotations

import json
from pathlib import Path

from . import __version__
from .errors import FormatError
from .iohelpers import sha256_file, sha256_json, write_json

TOOL = "mmwave-ia"
MANIFEST_SCHEMA = 1


def manifest_path(out_dir: str | Path, command: str) -> Path:
    return Path(out_dir) / f"{command}.manifest.json"


def build_manifest(
    command: str,
    args: dict,
    config: dict | None,
    seeds: dict,
    inputs: list[str | Path],
    outputs: dict[str, Path],
    nondeterministic: tuple[str, ...] = (),
) -> dict:
    """No timestamps or host names, so identical runs give identical manifests."""
    return {
        "tool": TOOL,
        "version": __version__,
        "schema_version": MANIFEST_SCHEMA,
        "command": command,
        "args": args,
        "config": config,
        "config_sha256": sha256_json(config) if config is not None else None,
        "seeds": seeds,
        "inputs": {str(Path(p).resolve()): sha256_file(p) for p in inputs},
        "outputs": {name: sha256_file(p) for name, p in sorted(outputs.items())},
        "nondeterministic_outputs": sorted(nondeterministic),
    }


def write_manifest(out_dir: str | Path, manifest: dict) -> Path:
    path = manifest_path(out_dir, manifest["command"])
    write_json(path, manifest)
    return path


def load_manifest(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: manifest is not valid JSON: {exc}") from None
    if not isinstance(data, dict) or data.get("tool") != TOOL or "command" not in data:
        raise FormatError(f"{path}: not a {TOOL} manifest")
    if data.get("schema_version") != MANIFEST_SCHEMA:
        raise FormatError(f"{path}: unsupported manifest schema {data.get('schema_version')!r}")
    return data
