"""Command-line entry point.

    uavcollect train --config F --algo {rla|alo|ddqn|fbs} --seed S --out DIR
    uavcollect eval --checkpoint F --episodes N
    uavcollect sweep --axis {antennas|power|n_nodes} --values V1,V2,...
    uavcollect beam solve --instance F
    uavcollect export --trace F --out DIR

Failures exit nonzero and print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import beamforming as bf
from . import config as C
from . import harness
from .checkpoint import CheckpointError

EXIT_USAGE, EXIT_CONFIG, EXIT_INPUT, EXIT_TRAINING, EXIT_INTERNAL = 2, 3, 4, 5, 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="uavcollect", description="UAV data-collection simulator and optimiser")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train one algorithm for one seed")
    t.add_argument("--config", help="INI config file (desk profile when omitted)")
    t.add_argument("--algo", choices=C.ALGOS, required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="run directory")
    t.add_argument("--episodes", type=int, help="override run.episodes")

    e = sub.add_parser("eval", help="evaluate a checkpoint with the policy frozen")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, required=True)
    e.add_argument("--config", help="override the config stored in the checkpoint")
    e.add_argument("--out", help="directory for eval metrics and traces")

    s = sub.add_parser("sweep", help="train and evaluate all algorithms along one axis")
    s.add_argument("--axis", choices=sorted(harness.SWEEP_AXES), required=True)
    s.add_argument("--values", required=True, help="comma-separated axis values")
    s.add_argument("--config")
    s.add_argument("--algos", default=",".join(C.ALGOS))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--episodes", type=int)
    s.add_argument("--out", default="sweep")

    b = sub.add_parser("beam", help="beamforming utilities")
    bsub = b.add_subparsers(dest="beam_command", required=True, parser_class=_Parser)
    bs = bsub.add_parser("solve", help="solve a beam instance JSON document")
    bs.add_argument("--instance", required=True)
    bs.add_argument("--method", choices=("sca", "mmse"), default="sca")
    bs.add_argument("--out", help="write the result here instead of stdout")

    x = sub.add_parser("export", help="per-episode trajectory CSVs from a trace")
    x.add_argument("--trace", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--config", help="re-check kinematics with this config's limits")
    return p


def _config(path, **overrides) -> C.ExperimentConfig:
    cfg = C.load(path) if path else C.desk_profile()
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return cfg.with_values(**overrides) if overrides else cfg


def cmd_train(a) -> dict:
    cfg = _config(a.config, run__algo=a.algo, run__episodes=a.episodes)
    art = harness.train(cfg, a.seed, a.out)
    last = art.rows[-1]
    return {"run_dir": art.directory, "episodes": len(art.rows), "config_hash": cfg.hash(),
            "last_reward": last["reward"], "last_sdc_bits": last["sdc_bits"]}


def cmd_eval(a) -> dict:
    cfg = C.load(a.config) if a.config else None
    out = harness.evaluate(a.checkpoint, a.episodes, cfg, out_dir=a.out)
    rows = [{k: r[k] for k in ("episode", "env_seed", "sdc_bits", "ee_bits_per_joule", "jain",
                               "reward")} for r in out["rows"]]
    return {"rows": rows, "summary": out["summary"]}


def cmd_sweep(a) -> dict:
    cfg = _config(a.config, run__episodes=a.episodes)
    algos = [s.strip() for s in a.algos.split(",") if s.strip()]
    for algo in algos:
        if algo not in C.ALGOS:
            raise UsageError(f"unknown algorithm {algo!r}")
    try:
        values = [float(v) for v in a.values.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --values: {exc}") from exc
    if not values:
        raise UsageError("--values is empty")
    return harness.sweep(cfg, a.axis, values, algos, a.seed, a.out)


def cmd_beam(a) -> dict:
    try:
        with open(a.instance) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read instance {a.instance}: {exc}") from exc
    result = bf.solve_json(doc, a.method)
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(bf.dumps(result))
        return {"written": a.out}
    return result


def cmd_export(a) -> dict:
    limits = C.load(a.config).scenario.limits() if a.config else None
    paths = harness.export_traces(a.trace, a.out, limits)
    return {"files": paths}


def _fail(code: int, kind: str, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        a = build_parser().parse_args(argv)
        handler = {"train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep, "beam": cmd_beam,
                   "export": cmd_export}[a.command]
        result = handler(a)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except C.ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except harness.TrainingAborted as exc:
        return _fail(EXIT_TRAINING, "training_aborted", exc)
    except (CheckpointError, ValueError, KeyError, OSError) as exc:
        return _fail(EXIT_INPUT, "input", exc)
    except Exception as exc:  # noqa: BLE001 - last-resort report, still machine readable
        return _fail(EXIT_INTERNAL, type(exc).__name__, exc)
    sys.stdout.write(bf.dumps(bf._jsonable(result)) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
