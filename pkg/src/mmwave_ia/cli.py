"""``mmwave-ia`` command line: generate, train, evaluate, sfs, sweep, time-model,
bench-decision, export-codebook and replay.

Every command writes its outputs plus ``<command>.manifest.json`` into ``--out``.
``replay`` re-runs a manifest into a fresh directory and compares digests.

Exit codes: 0 ok, 1 unexpected error, 2 usage, 3 invalid config, 4 missing file,
5 bad or incompatible file, 6 invalid beam subset, 7 replay mismatch.
"""

from __future__ import annotations

import argparse
import logging
import statistics
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .antenna import build_codebook, half_power_beamwidth
from .config import RunConfig, from_dict, load_config
from .errors import ConfigError, FormatError, SubsetError
from .evaluation import evaluate, sweep_csv, sweep_experiment, sweep_rows
from .iohelpers import atomic_write_text, sha256_file, write_json
from .manifest import build_manifest, load_manifest, write_manifest
from .neuralnet import load_model, save_model, train
from .neuralnet.model import fold_batchnorm, folded_predict
from .policies import N_BEAMS, BeamSubset, cbs_select, deepia_select, ia_time
from .scenario import apply_normalization, build_dataset, export_csv, load_dataset, save_dataset
from .selection import SfsTrace, msb, sfs, subset_config

log = logging.getLogger("mmwave_ia")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_CONFIG, EXIT_MISSING, EXIT_FORMAT, EXIT_SUBSET, EXIT_MISMATCH = range(8)


class ReplayMismatch(Exception):
    pass


# --- argument helpers ---------------------------------------------------------------


def parse_m_values(text: str) -> list[int]:
    """``"7"``, ``"1-24"`` or ``"4,8,12,24"`` (parts may mix)."""
    values: list[int] = []
    try:
        for part in str(text).split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = (int(p) for p in part.split("-", 1))
                values.extend(range(lo, hi + 1))
            else:
                values.append(int(part))
    except ValueError:
        raise SubsetError(f"cannot parse beam counts {text!r}") from None
    if not values or min(values) < 1 or max(values) > N_BEAMS:
        raise SubsetError(f"beam counts must lie in 1..{N_BEAMS}: {text!r}")
    return sorted(set(values))


def _load_trace(path: str | Path) -> SfsTrace:
    import json

    try:
        return SfsTrace.from_dict(json.loads(Path(path).read_text()))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: not an SFS trace: {exc}") from None


def parse_subset(spec: str) -> tuple[BeamSubset, list[Path]]:
    """``msb:M``, ``sfs:TRACE.json:K``, ``list:1,4,7`` or a bare ``1,4,7``.

    Returns the subset and any files it was read from.
    """
    spec = spec.strip()
    kind, _, rest = spec.partition(":")
    try:
        if kind == "msb":
            return msb(int(rest)), []
        if kind == "sfs":
            path, _, k = rest.rpartition(":")
            if not path:
                raise SubsetError("sfs subset spec needs sfs:TRACE:K")
            trace = _load_trace(path)
            return trace.subset(int(k)), [Path(path)]
        beams = rest if kind == "list" else spec
        return BeamSubset(tuple(int(b) for b in beams.split(",") if b.strip())), []
    except SubsetError:
        raise
    except ValueError as exc:
        raise SubsetError(f"invalid subset spec {spec!r}: {exc}") from None


def _abs_subset_spec(spec: str) -> str:
    kind, _, rest = spec.partition(":")
    if kind == "sfs":
        path, _, k = rest.rpartition(":")
        return f"sfs:{Path(path).resolve()}:{k}" if path else spec
    return spec


def _require(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    return p


# --- commands ----------------------------------------------------------------------
# each returns (outputs {name: path}, seeds, inputs, nondeterministic output names, summary)


def cmd_generate(args, cfg: RunConfig, out: Path):
    sc = cfg.scenario
    ds = build_dataset(
        sc.n_receivers,
        cfg.channel,
        channel_tag=cfg.channel_tag,
        snapshots=sc.snapshots,
        seed=cfg.seed,
        array=cfg.array,
        n_beams=sc.n_beams,
        half_side=sc.half_side,
        exclusion=sc.exclusion,
        tx_power=sc.tx_power,
        fractions=sc.split,
        shadowing=sc.shadowing,
    )
    outputs = {"dataset.bin": out / "dataset.bin"}
    save_dataset(ds, outputs["dataset.bin"])
    if args.csv:
        outputs["dataset.csv"] = out / "dataset.csv"
        export_csv(ds, outputs["dataset.csv"])
    if args.figures:
        outputs["codebook.png"] = out / "codebook.png"
        plotting.plot_codebook(build_codebook(cfg.array, sc.n_beams), outputs["codebook.png"])
    summary = {
        "n_receivers": ds.n_receivers,
        "snapshots": ds.snapshots,
        "channel_tag": ds.channel_tag,
        "split_fractions": list(sc.split),
        "split_sizes": ds.split_sizes(),
    }
    seeds = {"master": cfg.seed, "streams": "SeedSequence(master).spawn(3) -> positions, shadowing, split"}
    return outputs, seeds, [], (), summary


def cmd_train(args, cfg: RunConfig, out: Path):
    ds_path = _require(args.dataset)
    subset, extra = parse_subset(args.subset)
    ds = load_dataset(ds_path, expected_n_beams=cfg.scenario.n_beams)
    snapshots = args.snapshots or ds.snapshots
    if snapshots > ds.snapshots:
        raise ConfigError(f"dataset holds {ds.snapshots} snapshots, asked for {snapshots}")
    tcfg = subset_config(cfg.train, subset.beams)
    model, history = train(ds, subset, tcfg, snapshots=snapshots, normalization=cfg.normalization)
    model.meta.update(dataset_sha256=sha256_file(ds_path), subset_origin=subset.origin)
    outputs = {"model.bin": out / "model.bin", "history.json": out / "history.json"}
    save_model(model, outputs["model.bin"])
    write_json(outputs["history.json"], {"beam_subset": subset.to_dict(), "snapshots": snapshots, **history.to_dict()})
    if args.figures:
        outputs["history.png"] = out / "history.png"
        plotting.plot_history(history.to_dict(), outputs["history.png"])
    seeds = {"master": cfg.seed, "training": tcfg.seed}
    summary = {"beams": list(subset.beams), "final_val_accuracy": history.val_accuracy[-1]}
    return outputs, seeds, [ds_path, *extra], (), summary


def cmd_evaluate(args, cfg: RunConfig, out: Path):
    ds_path = _require(args.dataset)
    inputs = [ds_path]
    model = None
    if args.policy == "deepia":
        if not args.model:
            raise ConfigError("--policy deepia needs --model")
        inputs.append(_require(args.model))
        model = load_model(args.model)
        subset = BeamSubset(model.beam_subset, origin=model.meta.get("subset_origin", "manual"))
        if args.subset:
            asked, extra = parse_subset(args.subset)
            inputs += extra
            if asked.beams != subset.beams:
                raise SubsetError(f"model was trained on {subset.beams}, --subset asks for {asked.beams}")
    else:
        subset, extra = parse_subset(args.subset or f"msb:{N_BEAMS}")
        inputs += extra
    ds = load_dataset(ds_path, expected_n_beams=cfg.scenario.n_beams)
    snapshots = args.snapshots or (model.meta.get("snapshots") if model else None) or ds.snapshots
    if snapshots > ds.snapshots:
        raise ConfigError(f"dataset holds {ds.snapshots} snapshots, asked for {snapshots}")
    prov = {"dataset_sha256": sha256_file(ds_path)}
    if model is not None:
        prov["model_sha256"] = sha256_file(args.model)
    rep = evaluate(ds, args.policy, subset, model=model, snapshots=snapshots, split=args.split, timing=cfg.timing, provenance=prov)
    outputs = {"report.json": out / "report.json", "confusion.csv": out / "confusion.csv"}
    write_json(outputs["report.json"], rep.to_dict())
    atomic_write_text(outputs["confusion.csv"], rep.confusion_csv())
    if args.figures:
        outputs["confusion.png"] = out / "confusion.png"
        title = f"{rep.policy} {ds.channel_tag} m={len(subset)} s={snapshots}: {rep.accuracy:.2f}%"
        plotting.plot_confusion(rep.confusion, outputs["confusion.png"], title)
    return outputs, {"dataset": ds.seed}, inputs, (), {"accuracy": rep.accuracy, "beams": list(subset.beams)}


def cmd_sfs(args, cfg: RunConfig, out: Path):
    ds_path = _require(args.dataset)
    ds = load_dataset(ds_path, expected_n_beams=cfg.scenario.n_beams)
    snapshots = args.snapshots or ds.snapshots
    if snapshots > ds.snapshots:
        raise ConfigError(f"dataset holds {ds.snapshots} snapshots, asked for {snapshots}")
    trace = sfs(args.m_target, ds, cfg.train, snapshots=snapshots, normalization=cfg.normalization, stop_at=args.stop_at)
    outputs = {"sfs_trace.json": out / "sfs_trace.json"}
    write_json(outputs["sfs_trace.json"], trace.to_dict())
    if args.figures:
        outputs["sfs.png"] = out / "sfs.png"
        plotting.plot_sfs(trace, outputs["sfs.png"])
    seeds = {"master": cfg.seed, "per_subset": "derive_seed(master, beams)"}
    summary = {"subset": list(trace.rounds[-1].subset), "accuracies": trace.accuracies, "n_trainings": trace.n_trainings}
    return outputs, seeds, [ds_path], (), summary


def cmd_sweep(args, cfg: RunConfig, out: Path):
    ds_path = _require(args.dataset)
    m_values = parse_m_values(args.m)
    s_values = sorted({int(s) for s in str(args.snapshots).split(",")}) if args.snapshots else None
    policies = [p.strip() for p in args.policies.split(",")]
    if not policies or any(p not in ("cbs", "deepia") for p in policies):
        raise ConfigError(f"--policies takes cbs and/or deepia, got {args.policies!r}")
    inputs = [ds_path]
    if args.subsets == "msb":
        source = "msb"
    elif args.subsets.startswith("sfs:"):
        trace_path = _require(args.subsets[4:])
        inputs.append(trace_path)
        source = _load_trace(trace_path)
        if max(m_values) > len(source.rounds):
            raise SubsetError(f"trace has {len(source.rounds)} rounds, sweep asks for m up to {max(m_values)}")
    else:
        raise SubsetError(f"--subsets must be msb or sfs:TRACE.json, got {args.subsets!r}")
    ds = load_dataset(ds_path, expected_n_beams=cfg.scenario.n_beams)
    for s in s_values or [ds.snapshots]:
        if not 1 <= s <= ds.snapshots:
            raise ConfigError(f"dataset holds {ds.snapshots} snapshots, asked for {s}")
    reports = []
    for s in s_values or [ds.snapshots]:
        reports += sweep_experiment(
            ds, policies, source, m_values, s, cfg.train, split=args.split, normalization=cfg.normalization, timing=cfg.timing
        )
    rows = sweep_rows(reports)
    outputs = {"sweep.csv": out / "sweep.csv", "sweep_reports.json": out / "sweep_reports.json"}
    atomic_write_text(outputs["sweep.csv"], sweep_csv(rows))
    write_json(outputs["sweep_reports.json"], [r.to_dict() for r in reports])
    if args.figures:
        outputs["sweep.png"] = out / "sweep.png"
        plotting.plot_sweep(rows, outputs["sweep.png"], f"{ds.channel_tag}, {args.subsets if source == 'msb' else 'sfs'} subsets")
    seeds = {"master": cfg.seed, "per_subset": "derive_seed(master, beams)"}
    return outputs, seeds, inputs, (), {"rows": len(rows)}


TIME_COLUMNS = ("m", "policy", "sweep_time_s", "decision_time_s", "total_time_s")


def time_rows(m_values, timing) -> list[dict]:
    rows = []
    for m in m_values:
        for policy in ("cbs", "deepia"):
            t = ia_time(policy, m, timing)
            rows.append({"m": m, "policy": policy, "sweep_time_s": t.sweep_time, "decision_time_s": t.decision_time, "total_time_s": t.total})
    return rows


def cmd_time_model(args, cfg: RunConfig, out: Path):
    rows = time_rows(parse_m_values(args.m), cfg.timing)
    lines = [",".join(TIME_COLUMNS)]
    lines += [",".join(str(r[c]) if c in ("m", "policy") else repr(float(r[c])) for c in TIME_COLUMNS) for r in rows]
    outputs = {"ia_time.csv": out / "ia_time.csv"}
    atomic_write_text(outputs["ia_time.csv"], "\n".join(lines) + "\n")
    if args.figures:
        outputs["ia_time.png"] = out / "ia_time.png"
        plotting.plot_ia_time(rows, outputs["ia_time.png"])
    return outputs, {}, [], (), {"rows": len(rows)}


def _median_ns(fn, rows, repeats: int) -> float:
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        for r in rows:
            fn(r)
        best.append((time.perf_counter_ns() - t0) / len(rows))
    return statistics.median(best)


def bench_decisions(model, rows_dbm: np.ndarray, repeats: int = 5) -> dict:
    """Host-CPU single-decision latencies in seconds for CBS and (optionally) the network."""
    full = np.ascontiguousarray(rows_dbm, dtype=np.float64)
    res = {"cbs_decision_s": _median_ns(np.argmax, full, repeats) * 1e-9}
    res["cbs_select_call_s"] = _median_ns(cbs_select, full, repeats) * 1e-9
    if model is not None:
        cols = np.asarray(model.beam_subset) - 1
        sub = np.ascontiguousarray(full[:, cols])
        layers = fold_batchnorm(model)
        scale = model.normalization
        res["dnn_decision_s"] = _median_ns(lambda r: folded_predict(layers, apply_normalization(r, scale)), sub, repeats) * 1e-9
        res["deepia_select_call_s"] = _median_ns(lambda r: deepia_select(model, r), sub, repeats) * 1e-9
        t0 = time.perf_counter_ns()
        deepia_select(model, sub)
        res["dnn_batched_per_row_s"] = (time.perf_counter_ns() - t0) * 1e-9 / len(sub)
    return res


def cmd_bench_decision(args, cfg: RunConfig, out: Path):
    inputs = []
    model = None
    if args.model:
        inputs.append(_require(args.model))
        model = load_model(args.model)
    if args.dataset:
        inputs.append(_require(args.dataset))
        ds = load_dataset(args.dataset, expected_n_beams=cfg.scenario.n_beams)
        rows = ds.features()[ds.split_mask("test")][: args.rows]
    else:
        rows = np.random.default_rng(cfg.seed).uniform(-110.0, -30.0, (args.rows, N_BEAMS))
    res = bench_decisions(model, rows, args.repeats)
    tc = cfg.timing
    report = {
        "label": "host-CPU micro-benchmark (numpy); NOT an FPGA measurement",
        "rows": int(len(rows)),
        "repeats": args.repeats,
        "measured": res,
        "configured": tc.to_dict(),
    }
    if model is not None:
        report["ordering_holds"] = bool(res["cbs_decision_s"] < res["dnn_decision_s"] < tc.per_beam_sweep_time)
    outputs = {"bench.json": out / "bench.json"}
    write_json(outputs["bench.json"], report)
    return outputs, {"master": cfg.seed}, inputs, ("bench.json",), {"measured": res}


def cmd_export_codebook(args, cfg: RunConfig, out: Path):
    cb = build_codebook(cfg.array, cfg.scenario.n_beams)
    outputs = {"codebook.csv": out / "codebook.csv", "codebook.json": out / "codebook.json"}
    cb.to_csv(outputs["codebook.csv"])
    write_json(
        outputs["codebook.json"],
        {
            "array": asdict(cfg.array),
            "n_beams": cb.n_beams,
            "steering_angles_deg": cb.steering_angles.tolist(),
            "half_power_beamwidth_deg": half_power_beamwidth(cfg.array),
        },
    )
    if args.figures:
        outputs["codebook.png"] = out / "codebook.png"
        plotting.plot_codebook(cb, outputs["codebook.png"])
    return outputs, {}, [], (), {"half_power_beamwidth_deg": half_power_beamwidth(cfg.array)}


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sfs": cmd_sfs,
    "sweep": cmd_sweep,
    "time-model": cmd_time_model,
    "bench-decision": cmd_bench_decision,
    "export-codebook": cmd_export_codebook,
}

PATH_ARGS = ("dataset", "model")
NOT_RECORDED = ("command", "config", "seed", "profile", "channel", "out", "verbose", "manifest")


def recorded_args(args) -> dict:
    rec = {k: v for k, v in vars(args).items() if k not in NOT_RECORDED}
    for key in PATH_ARGS:
        if rec.get(key):
            rec[key] = str(Path(rec[key]).resolve())
    if rec.get("subset"):
        rec["subset"] = _abs_subset_spec(rec["subset"])
    if isinstance(rec.get("subsets"), str) and rec["subsets"].startswith("sfs:"):
        rec["subsets"] = "sfs:" + str(Path(rec["subsets"][4:]).resolve())
    return rec


def run_command(command: str, args, cfg: RunConfig, out: Path) -> dict:
    outputs, seeds, inputs, nondet, summary = COMMANDS[command](args, cfg, out)
    manifest = build_manifest(command, recorded_args(args), cfg.to_dict(), seeds, inputs, outputs, nondet)
    manifest["summary"] = summary
    write_manifest(out, manifest)
    return manifest


def cmd_replay(args) -> int:
    man = load_manifest(_require(args.manifest))
    command = man["command"]
    if command not in COMMANDS:
        raise FormatError(f"manifest names unknown command {command!r}")
    for path, digest in man["inputs"].items():
        if sha256_file(_require(path)) != digest:
            raise FormatError(f"input {path} changed since the manifest was written")
    cfg = from_dict(man["config"])
    out = Path(args.out) if args.out else Path(args.manifest).resolve().parent / "replay"
    ns = argparse.Namespace(**man["args"])
    fresh = run_command(command, ns, cfg, out)
    skip = set(man.get("nondeterministic_outputs", []))
    bad = []
    for name, digest in man["outputs"].items():
        got = fresh["outputs"].get(name)
        status = "skipped (timing)" if name in skip else ("identical" if got == digest else "DIFFERS")
        print(f"{name}: {status}")
        if status == "DIFFERS":
            bad.append(name)
    if set(fresh["outputs"]) != set(man["outputs"]):
        bad.append("<output set>")
    if bad:
        raise ReplayMismatch(f"replay of {command} differs in {', '.join(bad)}")
    print(f"replay of {command}: all deterministic outputs bit-identical ({out})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run config (every key optional)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--profile", choices=("desk", "paper"), help="desk: 2e5 receivers; paper: 1e6 (default)")
    common.add_argument("--channel", choices=("los", "nlos"), help="channel preset (overrides the config)")
    common.add_argument("--out", help="output directory (default: <output_dir>/<command>)")
    common.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True, help="render PNG figures next to the data files")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mmwave-ia", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="simulate a receiver dataset")
    g.add_argument("--csv", action="store_true", help="also export a per-receiver CSV table")

    t = sub.add_parser("train", parents=[common], help="train the beam predictor on a subset")
    t.add_argument("--dataset", required=True)
    t.add_argument("--subset", required=True, help="msb:M | sfs:TRACE.json:K | list:1,4,7")
    t.add_argument("--snapshots", type=int, help="average the first s snapshots (default: all stored)")

    e = sub.add_parser("evaluate", parents=[common], help="score a policy on a dataset split")
    e.add_argument("--dataset", required=True)
    e.add_argument("--policy", choices=("cbs", "deepia"), required=True)
    e.add_argument("--model")
    e.add_argument("--subset", help="default: the model's subset, or all beams for cbs")
    e.add_argument("--snapshots", type=int)
    e.add_argument("--split", choices=("train", "val", "test"), default="test")

    s = sub.add_parser("sfs", parents=[common], help="greedy forward beam selection")
    s.add_argument("--dataset", required=True)
    s.add_argument("--m-target", type=int, required=True, choices=range(1, N_BEAMS + 1), metavar="M")
    s.add_argument("--snapshots", type=int)
    s.add_argument("--stop-at", type=float, help="stop once validation accuracy (%%) reaches this")

    w = sub.add_parser("sweep", parents=[common], help="accuracy against number of swept beams")
    w.add_argument("--dataset", required=True)
    w.add_argument("--policies", default="cbs,deepia")
    w.add_argument("--subsets", default="msb", help="msb | sfs:TRACE.json")
    w.add_argument("--m", default=f"1-{N_BEAMS}", help="e.g. 1-24 or 4,8,12,24")
    w.add_argument("--snapshots", help="comma list of s values (default: all stored)")
    w.add_argument("--split", choices=("train", "val", "test"), default="test")

    tm = sub.add_parser("time-model", parents=[common], help="IA time table")
    tm.add_argument("--m", default=f"1-{N_BEAMS}")

    b = sub.add_parser("bench-decision", parents=[common], help="host-CPU decision latency (not FPGA)")
    b.add_argument("--model")
    b.add_argument("--dataset")
    b.add_argument("--rows", type=int, default=2000)
    b.add_argument("--repeats", type=int, default=5)

    sub.add_parser("export-codebook", parents=[common], help="tabulated beam gains")

    r = sub.add_parser("replay", help="re-run a manifest and compare output digests")
    r.add_argument("manifest")
    r.add_argument("--out", help="directory for the replayed outputs (default: <manifest dir>/replay)")
    r.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            return cmd_replay(args)
        cfg = load_config(args.config, seed=args.seed, profile=args.profile, channel=args.channel)
        out = Path(args.out) if args.out else Path(cfg.output_dir) / args.command
        man = run_command(args.command, args, cfg, out)
        print(f"{args.command}: wrote {', '.join(sorted(man['outputs']))} to {out}")
        for key, value in man["summary"].items():
            print(f"  {key}: {value}")
        return EXIT_OK
    except ReplayMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SubsetError as exc:
        print(f"subset error: {exc}", file=sys.stderr)
        return EXIT_SUBSET
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except FormatError as exc:
        print(f"file error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except Exception as exc:  # noqa: BLE001 - last-resort handler for the exit-code contract
        log.debug("unexpected failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
