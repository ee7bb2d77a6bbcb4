"""Command-line entry point: ``equiapprox {gen,train,eval,verify,demo,swr}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import io
from .approximator import ApproximatorModel
from .distributions import RNG_ALGORITHM, DistributionSpec, sample
from .experiments import exp_selection_identity, exp_swr
from .game import CapacityError, DimensionError
from .training import TrainConfig, evaluate, train
from .verify import run_suite

OUT_ENV = "EQUIAPPROX_OUT"
DEFAULT_OUT = "equiapprox_out"

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_CAPACITY = 3

log = logging.getLogger("equiapprox")


def _out_dir(arg) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _parse_params(items) -> dict:
    """``k=v`` pairs; values parsed as JSON when possible."""
    params = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise io.ConfigError(f"--param expects key=value, got {item!r}")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


def _spec_from(dist: dict, seed: int) -> DistributionSpec:
    shape = io.parse_shape(dist["shape"]) if dist.get("shape") is not None else None
    base = io.load_game(dist["base_game"]) if dist.get("base_game") else None
    return DistributionSpec(dist["kind"], shape, seed=seed, base=base, name=dist.get("name"),
                            params=dist.get("params") or {})


def cmd_gen(args) -> int:
    dist = {"kind": args.dist, "shape": args.shape, "base_game": args.base, "name": args.name,
            "params": _parse_params(args.param)}
    if args.dist != "named" and not args.shape and not args.base:
        raise io.ConfigError("--shape is required for uniform and orbit distributions")
    spec = _spec_from(dist, args.seed)
    out = _out_dir(args.out)
    paths = io.save_games(sample(spec, args.count), out)
    manifest = {"distribution": args.dist, "shape": str(spec.shape), "count": args.count, "seed": args.seed,
                "rng": RNG_ALGORITHM, "files": [p.name for p in paths]}
    (out / io.MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(paths)} games to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = io.load_config(args.config) if args.config else io.validate_config({})
    if args.seed is not None:
        cfg["seed"] = args.seed
    seed = cfg["seed"]
    out = _out_dir(args.out or cfg.get("output_dir"))
    out.mkdir(parents=True, exist_ok=True)
    if args.games:
        games = io.load_games(args.games)
    else:
        dist = cfg["distribution"]
        games = sample(_spec_from(dist, seed), dist.get("count", 500))
    m = cfg["model"]
    model = ApproximatorModel.create(games[0].shape, m["head"], m["mode"], hidden=m["hidden"], seed=seed,
                                     output_scale=m.get("output_scale", 1.0), num_samples=m.get("num_samples"))
    tcfg = TrainConfig(seed=seed, **cfg["train"])

    def checkpoint(step, current):
        io.save_model(current, out / f"model_step{step:06d}.json")

    trained, trace = train(model, games, tcfg, on_checkpoint=checkpoint)
    io.save_model(trained, out / "model.json")
    trace.write_csv(out / "trace.csv")
    summary = {"config": cfg, "rng": RNG_ALGORITHM, "final": evaluate(trained, games, tcfg.concept).to_dict(),
               "baseline": evaluate(ApproximatorModel.create(model.shape, model.head, model.mode, hidden=model.hidden,
                                                             seed=None), games, tcfg.concept).to_dict()}
    (out / "train_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps({"final_mean": summary["final"]["mean"], "baseline_mean": summary["baseline"]["mean"],
                      "model": str(out / "model.json")}))
    return EXIT_OK


def cmd_eval(args) -> int:
    model = io.load_model(args.model)
    games = io.load_games(args.games)
    concept = args.concept or ("NE" if model.head.value == "product" else "CCE")
    summary = {"model": str(args.model), "concept": concept, **evaluate(model, games, concept).to_dict()}
    text = json.dumps(summary, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_suite(quick=args.quick, seed=args.seed if args.seed is not None else 0)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        _error(EXIT_VERIFY, "verification", f"{len(failed)} checks failed: " + ", ".join(r.name for r in failed))
        return EXIT_VERIFY
    return EXIT_OK


def cmd_demo(args) -> int:
    report = exp_selection_identity(seed=args.seed or 0)
    both, pe = report.arms["both"], report.arms["pe"]
    print("identity 2x2 game, both players' actions swapped leaves it unchanged")
    print(f"both-mode NE approximator:   sigma_1={_fmt(both['strategy'][0])} sigma_2={_fmt(both['strategy'][1])}")
    print(f"PE-mode CCE approximator:    pi={[_fmt(row) for row in pe['strategy']]}")
    if "general_trained" in report.arms:
        g = report.arms["general_trained"]
        print(f"trained general approximator: sigma_1={_fmt(g['strategy'][0])} sigma_2={_fmt(g['strategy'][1])}"
              f" welfare={g['welfare']:.4f}")
    for name, ok in report.verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if args.out:
        report.save(_out_dir(args.out), seed=args.seed or 0)
    return EXIT_OK if report.passed else EXIT_VERIFY


def _fmt(vec) -> str:
    return "(" + ", ".join(f"{x:.6f}" for x in vec) + ")"


def cmd_swr(args) -> int:
    out = _out_dir(args.out) if args.out else None
    ok = True
    for eps in args.eps:
        report = exp_swr(eps, mode=args.mode, train_steps=args.train_steps, seed=args.seed or 0)
        r = report.arms["ratio"]["value"]
        print(f"eps={eps:g} max_ne_welfare={report.arms['general']['max_ne_welfare']:.6f} "
              f"max_{args.mode}_welfare={report.arms[args.mode]['max_reachable_welfare']:.6f} ratio={r:.6g}")
        ok &= report.passed
        if out:
            report.experiment_id = f"swr_eps{eps:g}"
            report.save(out, seed=args.seed or 0)
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="equiapprox", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="sample games to JSON files")
    g.add_argument("--dist", choices=["uniform", "orbit", "named"], default="uniform")
    g.add_argument("--shape", help="e.g. 2x2 or 3x3x2")
    g.add_argument("--count", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--base", help="base game file for --dist orbit")
    g.add_argument("--name", help="game id for --dist named")
    g.add_argument("--param", action="append", help="named-game parameter key=value")
    g.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train an approximator from a run config")
    t.add_argument("--config", help="JSON or TOML run config")
    t.add_argument("--games", nargs="+", help="game files/directories instead of sampling")
    t.add_argument("--seed", type=int)
    t.add_argument("--out")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on games")
    e.add_argument("--model", required=True)
    e.add_argument("--games", nargs="+", required=True)
    e.add_argument("--concept", choices=["NE", "CE", "CCE"])
    e.add_argument("--out", help="write the summary JSON here too")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run the property suite")
    v.add_argument("--quick", action="store_true")
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("demo", help="symmetric approximators on the identity game")
    d.add_argument("--seed", type=int)
    d.add_argument("--out")
    d.set_defaults(func=cmd_demo)

    s = sub.add_parser("swr", help="welfare ratio on the 3x3 eps-game")
    s.add_argument("--eps", type=float, nargs="+", default=[0.05, 0.1, 0.25])
    s.add_argument("--mode", choices=["both", "general"], default="both")
    s.add_argument("--train-steps", type=int, default=0)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_swr)
    return p


def _error(code: int, kind: str, message: str):
    print(f"error code={code} kind={kind}: {message}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CapacityError as exc:
        _error(EXIT_CAPACITY, "capacity", str(exc))
        return EXIT_CAPACITY
    except (io.ConfigError, io.FormatError, DimensionError, ValueError) as exc:
        _error(EXIT_CONFIG, "config", str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
