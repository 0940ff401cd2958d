"""Command-line entry point: ``hsot <command> ...``.

Every command writes one JSON document (sorted keys, embedding the run
configuration and ``format_version``) to ``--out`` or stdout; commands with
plottable series also write a CSV next to the JSON file.

Exit codes: 0 ok, 2 bad input, 3 degenerate mathematics, 4 non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .condition import dist_to_discriminant, p14_experiment
from .config import FORMAT_VERSION, RunConfig
from .errors import HypersurfaceOTError, SizeMismatch
from .geodesic import GeodesicConfig, optimize
from .hermitian import PolyPath, QuadratureSpec, path_energy_report
from .measure import AtomicMeasure, mu
from .projective import HomPoly
from .regularity import exponent_probe, metric_speed_profile, sobolev_energy
from .transport import wq_assignment, wq_lp

# wall-clock fields would break byte-identical reruns
_VOLATILE = {"seconds"}


class InvalidInput(HypersurfaceOTError, ValueError):
    exit_code = 2


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc


def _load_poly(path: str) -> HomPoly:
    return HomPoly.from_json(_load_json(path))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items() if k not in _VOLATILE}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def _emit(command: str, config: RunConfig, result: dict, csv_text: str | None = None) -> None:
    doc = {"format_version": FORMAT_VERSION, "command": command,
           "config": config.to_dict(), "result": result}
    text = json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n"
    if config.out is None:
        sys.stdout.write(text)
        return
    out = Path(config.out)
    out.write_text(text, encoding="utf-8")
    if csv_text is not None:
        out.with_suffix(".csv").write_text(csv_text, encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def cmd_mu(args, config: RunConfig) -> None:
    p = _load_poly(args.poly)
    m = mu(p, config, np.random.default_rng(config.seed)).sorted()
    result = {"n": p.n, "d": p.d, "atoms": len(m), "measure": m.to_json(),
              "exact": p.n == 1, "info": {k: v for k, v in m.info.items() if k != "lines"}}
    _emit("mu", config, result)


def _load_measure(path: str, config: RunConfig, rng) -> AtomicMeasure:
    data = _load_json(path)
    if "atoms" in data:
        return AtomicMeasure.from_json(data)
    if "measure" in data.get("result", {}):
        return AtomicMeasure.from_json(data["result"]["measure"])
    return mu(HomPoly.from_json(data), config, rng)


def cmd_dist(args, config: RunConfig) -> None:
    rng = np.random.default_rng(config.seed)
    a = _load_measure(args.a, config, rng)
    b = _load_measure(args.b, config, rng)
    # unequal atom counts go to the LP even when the masses would expand to a
    # common uniform grid, so the route is predictable from the inputs alone
    if len(a) == len(b):
        try:
            dist, match = wq_assignment(a, b, config.q)
        except SizeMismatch:
            dist, match = wq_lp(a, b, config.q)
    else:
        dist, match = wq_lp(a, b, config.q)
    result = {"distance": dist, "q": config.q, "route": match.route,
              "sizes": [len(a), len(b)], "routed_to_lp": match.route == "lp"}
    if args.matching:
        result["matching"] = match.to_json()
    _emit("dist", config, result)


def cmd_geodesic(args, config: RunConfig) -> None:
    p0, p1 = _load_poly(args.p0), _load_poly(args.p1)
    gcfg = GeodesicConfig(knots=config.knots, seed=config.seed, lines=config.lines,
                          guard=config.tolerances.guard_delta, max_iter=args.max_iter,
                          time_limit=float("inf"))
    res = optimize(p0, p1, gcfg)
    _emit("geodesic", config, res.to_json(), res.speeds_csv())


def cmd_energy(args, config: RunConfig) -> None:
    path = PolyPath.from_json(_load_json(args.path))
    quad = QuadratureSpec.for_dim(path.n, lines=config.lines, seed=config.seed,
                                  time_nodes=max(config.time_nodes, 2))
    rep = path_energy_report(path, quad, scheme=args.scheme)
    result = {"energy": rep.energy, "stderr": rep.stderr, "min_grad": rep.min_grad,
              "richardson": rep.richardson, "scheme": args.scheme,
              "nodes": rep.nodes, "speeds_sq": rep.speeds}
    _emit("energy", config, result, _rows_csv(["t", "speed_sq"], zip(rep.nodes, rep.speeds)))


def cmd_condition(args, config: RunConfig) -> None:
    if args.action == "p14":
        if args.p1 is None:
            raise InvalidInput("p14 needs two endpoint files")
        rep = p14_experiment(_load_poly(args.p0), _load_poly(args.p1), grid=args.grid)
        _emit("condition p14", config, rep.to_json(), rep.profiles_csv())
    else:
        dd = dist_to_discriminant(_load_poly(args.p0))
        _emit("condition distance", config,
              {"distance": dd.distance, "argmin": [[z.real, z.imag] for z in dd.argmin]})


def cmd_regularity(args, config: RunConfig) -> None:
    if args.action == "probe":
        qs = [float(s) for s in args.qs.split(",")]
        eps = [float(s) for s in args.epsilons.split(",")]
        rep = exponent_probe(args.degree, qs, eps, per_decade=args.per_decade)
        rows = [(r["q"], e, v) for r in rep["results"] for e, v in zip(rep["epsilons"], r["tail_energies"])]
        _emit("regularity probe", config, rep, _rows_csv(["q", "epsilon", "tail_energy"], rows))
        return
    if args.path is None:
        raise InvalidInput("profile needs a path file")
    path = PolyPath.from_json(_load_json(args.path))
    prof = metric_speed_profile(path, config.q, rng=np.random.default_rng(config.seed), n_lines=config.lines)
    result = {"q": config.q, "times": prof.times, "speeds": prof.speeds, "h": prof.h,
              "skipped_lines": prof.skipped_lines,
              "sobolev_energy": sobolev_energy(prof, config.epsilon), "epsilon": config.epsilon}
    _emit("regularity profile", config, result, _rows_csv(["t", "speed"], zip(prof.times, prof.speeds)))


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--lines", type=int)
    common.add_argument("--time-nodes", dest="time_nodes", type=int)
    common.add_argument("--q", type=float)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--knots", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out")

    parser = argparse.ArgumentParser(prog="hsot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("mu", parents=[common], help="measure of a polynomial")
    s.add_argument("poly")
    s.set_defaults(func=cmd_mu)

    s = sub.add_parser("dist", parents=[common], help="W_q between two measures or polynomials")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--matching", action="store_true", help="include the transport plan")
    s.set_defaults(func=cmd_dist)

    s = sub.add_parser("geodesic", parents=[common], help="inner-Wasserstein geodesic between two polynomials")
    s.add_argument("p0")
    s.add_argument("p1")
    s.add_argument("--max-iter", dest="max_iter", type=int, default=400)
    s.set_defaults(func=cmd_geodesic)

    s = sub.add_parser("energy", parents=[common], help="energy of a polynomial path")
    s.add_argument("path")
    s.add_argument("--scheme", choices=("central", "midpoint"), default="central")
    s.set_defaults(func=cmd_energy)

    s = sub.add_parser("condition", parents=[common], help="condition geometry along W2 geodesics")
    s.add_argument("action", choices=("p14", "distance"))
    s.add_argument("p0")
    s.add_argument("p1", nargs="?")
    s.add_argument("--grid", type=int, default=33)
    s.set_defaults(func=cmd_condition)

    s = sub.add_parser("regularity", parents=[common], help="metric speeds and Sobolev tails")
    s.add_argument("action", choices=("probe", "profile"))
    s.add_argument("path", nargs="?")
    s.add_argument("--degree", type=int, default=3)
    s.add_argument("--qs", default="1.2,1.8")
    s.add_argument("--epsilons", default="1e-8,1e-9,1e-10,1e-11,1e-12")
    s.add_argument("--per-decade", dest="per_decade", type=int, default=40)
    s.set_defaults(func=cmd_regularity)
    return parser


def config_from_args(args) -> RunConfig:
    flags = {k: getattr(args, k) for k in ("seed", "lines", "time_nodes", "q", "epsilon", "knots", "threads", "out")
             if getattr(args, k, None) is not None}
    # environment first, explicit flags win
    env = RunConfig.from_env()
    kw = {k: getattr(env, k) for k in ("seed", "lines", "time_nodes", "q", "epsilon", "knots", "threads", "out")}
    kw.update(flags)
    return RunConfig(**kw)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        args.func(args, config)
    except HypersurfaceOTError as exc:
        print(f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"InvalidInput: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
