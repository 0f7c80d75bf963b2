"""Command line driver: ``movant train | eval | sweep | validate``."""

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__, maddpg
from ._accel import backend
from .config import ConfigError, ScenarioConfig

TRAIN_SCHEMA = "movant-train/1"
SWEEP_SCHEMA = "movant-sweep/1"
SWEEP_COLUMNS = ("axis", "value", "scheme", "seed", "sum_rate", "std")
SCHEME_CHOICES = ("DS", "RMA", "FPA", "TR")


def build_id():
    return f"movant-{__version__}+{backend()}"


def load_config(path, overrides=()):
    base = ScenarioConfig() if path is None else ScenarioConfig.load(path)
    if overrides:
        data = base.to_dict()
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep:
                raise ConfigError(f"override {item!r} must look like key=value")
            try:
                data[key] = json.loads(raw)
            except json.JSONDecodeError:
                data[key] = raw
        base = ScenarioConfig.from_dict(data)
    return base


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, schema, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema: {schema}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("".join(lines))))


def run_train(config, seed, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": config.to_dict(),
        "seed": seed,
        "build": build_id(),
        "outputs": {"csv": "train.csv", "checkpoint": "checkpoint.bin", "timings": "timings.json"},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    t0 = time.perf_counter()
    model, log = maddpg.train(config, seed)
    t1 = time.perf_counter()
    write_csv(out / "train.csv", TRAIN_SCHEMA, log.columns, log.rows)
    model.save(out / "checkpoint.bin", {"seed": seed, "build": build_id()})
    (out / "timings.json").write_text(json.dumps({"train_seconds": t1 - t0}) + "\n")
    return model, log


def scheme_config(config, scheme):
    if scheme == "TR":
        return config.replace(scheme="DS", algorithm="TR")
    return config.replace(scheme=scheme, algorithm="heterogeneous")


def axis_config(config, axis, value):
    if axis == "region":
        return config.replace(region=float(value))
    if axis == "snr":
        # P = 10^(dB/10) with sigma^2 = 1
        return config.replace(snr_db=float(value), sigma2=1.0)
    if axis == "nmse":
        return config.replace(nmse=float(value))
    if axis == "slots":
        return config.replace(n_epi=max(1, math.ceil(float(value) / config.n_step)))
    raise ConfigError(f"unknown sweep axis {axis!r}")


def _sweep_cell(args):
    config, axis, value, scheme, seed, episodes, eval_seed = args
    cfg = scheme_config(axis_config(config, axis, value), scheme)
    model, _ = maddpg.train(cfg, seed)
    res = maddpg.evaluate(model, cfg, episodes, eval_seed)
    return [axis, value, scheme, seed, res["mean"], res["std"]]


def run_sweep(config, axis, values, schemes, seeds, episodes=100, eval_seed=10_000, jobs=1):
    if not values:
        raise ConfigError("sweep needs at least one value")
    if not schemes:
        raise ConfigError("sweep needs at least one scheme")
    for s in schemes:
        if s not in SCHEME_CHOICES:
            raise ConfigError(f"unknown scheme {s!r}")
    axis_config(config, axis, values[0])
    cells = [(config, axis, v, s, seed, episodes, eval_seed)
             for v in values for s in schemes for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_cell, cells))
    return [_sweep_cell(c) for c in cells]


def _parse_list(text, cast=str):
    return [cast(x) for x in text.split(",") if x.strip()]


def _num(x):
    v = float(x)
    return int(v) if v.is_integer() and "." not in x and "e" not in x.lower() else v


def make_parser():
    p = argparse.ArgumentParser(prog="movant", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train agents and write CSV log, manifest and checkpoint")
    t.add_argument("--config", default=None, help="JSON config file (defaults if omitted)")
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)

    e = sub.add_parser("eval", help="evaluate a checkpoint and print a JSON summary")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--config", default=None, help="JSON overrides applied to the checkpoint's config")
    e.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("sweep", help="train and evaluate a grid of (value, scheme, seed) cells")
    s.add_argument("--config", default=None)
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    s.add_argument("--axis", required=True, choices=("region", "snr", "nmse", "slots"))
    s.add_argument("--values", required=True, help="comma separated")
    s.add_argument("--schemes", default="DS,RMA,FPA", help="comma separated subset of DS,RMA,FPA,TR")
    s.add_argument("--seeds", default="0", help="comma separated")
    s.add_argument("--episodes", type=int, default=100)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True, help="output CSV path")

    v = sub.add_parser("validate", help="run the acceptance checks")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    v.add_argument("--only", default=None, help="comma separated check names")
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        if args.command == "train":
            if args.config is not None and not os.path.exists(args.config):
                raise ConfigError(f"config file not found: {args.config}")
            config = load_config(args.config, args.set)
            run_train(config, args.seed, args.out)
            print(json.dumps({"out": str(args.out), "rows": config.n_epi * config.n_step}))
            return 0
        if args.command == "eval":
            header, _ = maddpg.neural.load_arrays(args.checkpoint)
            data = dict(header["config"])
            if args.config is not None:
                with open(args.config) as fh:
                    data.update(json.load(fh))
            config = load_config(None, [f"{k}={json.dumps(v)}" for k, v in data.items()] + list(args.set))
            model = maddpg.Maddpg.load(args.checkpoint, config)
            res = maddpg.evaluate(model, config, args.episodes, args.seed)
            res.pop("scores")
            print(json.dumps(res, sort_keys=True))
            return 0
        if args.command == "sweep":
            config = load_config(args.config, args.set)
            rows = run_sweep(config, args.axis, _parse_list(args.values, _num),
                             _parse_list(args.schemes), _parse_list(args.seeds, int),
                             args.episodes, jobs=args.jobs)
            write_csv(args.out, SWEEP_SCHEMA, SWEEP_COLUMNS, rows)
            return 0
        if args.command == "validate":
            from . import validation

            only = _parse_list(args.only) if args.only else None
            failed = []
            for res in validation.run_checks(args.level, only=only):
                print(res.line(), flush=True)
                if not res.ok:
                    failed.append(res.name)
            if failed:
                print("failed checks: " + ", ".join(failed), file=sys.stderr)
                return 1
            return 0
    except (ConfigError, maddpg.NoEpisodes, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
