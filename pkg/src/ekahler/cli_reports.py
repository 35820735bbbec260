"""Command-line front end.

Every subcommand is a thin wrapper that builds a run configuration and hands
it to :func:`execute`, so ``ekahler tidal ...`` and a ``run`` config listing
the ``tidal`` experiment share one code path.

Exit status: 0 when every check passes, 1 when an experiment fails, 2 for
unparsable input and 3 for input that parses but does not validate.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EKahlerError
from .experiments import REGISTRY, VERIFY_SET, Context, run_experiment
from .linear_models import ModelSpec

SCHEMA = "1"
EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INVALID = 0, 1, 2, 3


class ParseError(Exception):
    pass


class ValidationError(Exception):
    pass


@dataclass
class RunConfig:
    model: ModelSpec
    experiments: list[tuple[str, dict]]
    seed: int = 0
    output_dir: str | None = None
    tol_scale: float = 1.0
    fd: bool = False
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
        unknown = set(doc) - {"model", "experiments", "seed", "output_dir", "schema"}
        if unknown:
            raise ValidationError(f"unknown config fields {sorted(unknown)}")
        try:
            model = ModelSpec.from_json(doc.get("model", {}))
        except EKahlerError as exc:
            raise ValidationError(f"model: {exc}") from exc
        exps = []
        for item in doc.get("experiments", []):
            if isinstance(item, str):
                item = {"name": item}
            if not isinstance(item, dict) or "name" not in item:
                raise ValidationError("each experiment needs a name")
            params = item.get("params", {})
            if not isinstance(params, dict):
                raise ValidationError(f"params of {item['name']!r} must be an object")
            exps.append((str(item["name"]), params))
        seed = doc.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ValidationError("seed must be an integer")
        out = doc.get("output_dir")
        return cls(model, exps, seed, out if out is None else str(out))

    def validate(self) -> None:
        if not self.experiments:
            raise ValidationError("no experiments requested")
        bad = [name for name, _ in self.experiments if name not in REGISTRY]
        if bad:
            raise ValidationError(f"unknown experiments {bad}; known: {sorted(REGISTRY)}")
        if not (self.tol_scale > 0 and math.isfinite(self.tol_scale)):
            raise ValidationError("--tol must be a positive number")


def _clean(obj):
    """Make report content JSON-safe and deterministic."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(doc) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def execute(cfg: RunConfig, stream=None) -> tuple[int, dict]:
    """Run a validated config; returns the exit status and the report document."""
    stream = sys.stdout if stream is None else stream
    cfg.validate()
    if cfg.output_dir:
        os.makedirs(cfg.output_dir, exist_ok=True)
    ctx = Context(seed=cfg.seed, tol_scale=cfg.tol_scale, fd=cfg.fd, out_dir=cfg.output_dir)
    reports, timings = [], []
    for name, params in cfg.experiments:
        t0 = time.perf_counter()
        rep = run_experiment(name, cfg.model, params, ctx)
        timings.append({"experiment": name, "wall_time_s": time.perf_counter() - t0})
        reports.append(rep)
        status = "PASS" if rep["passed"] else "FAIL"
        failed = [c["name"] for c in rep["checks"] if not c["pass"]]
        detail = f" ({', '.join(failed)})" if failed else (f" ({rep['error']})" if "error" in rep else "")
        print(f"{status} {name}{detail}", file=stream)
    doc = {
        "schema": SCHEMA,
        "model": cfg.model.to_json(),
        "seed": cfg.seed,
        "tol_scale": cfg.tol_scale,
        "fd": cfg.fd,
        "reports": reports,
        "passed": all(r["passed"] for r in reports),
    }
    if cfg.output_dir:
        with open(os.path.join(cfg.output_dir, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(dumps(doc))
        with open(os.path.join(cfg.output_dir, "timings.json"), "w", encoding="utf-8") as fh:
            fh.write(dumps({"schema": SCHEMA, "timings": timings}))
    else:
        stream.write(dumps(doc))
    return (EXIT_OK if doc["passed"] else EXIT_FAIL), doc


# -------------------------------------------------------------- parsing


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON file: a run config, or a bare model spec")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="directory for report.json, timings.json and CSV files")
    p.add_argument("--tol", type=float, default=1.0, help="global tolerance scale")
    p.add_argument("--fd", action="store_true", help="force finite differences instead of jets")
    m = p.add_argument_group("model")
    m.add_argument("--epsilon", type=int, choices=(-1, 1), default=None)
    m.add_argument("--lambda", dest="lam", choices=("zero", "minus_eps_half"), default=None)
    m.add_argument("--n", type=int, default=None)
    m.add_argument("--R0", type=float, default=None)
    m.add_argument("--variant", choices=("singular", "cahen_wallach_analog"), default=None)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="ekahler", description="Verification lab for epsilon-Kaehler model spaces")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("model", parents=[common], help="describe a model and check its basic structure")
    v = sub.add_parser("verify", parents=[common], help="tensor identities on a model")
    v.add_argument("--only", default=None, help="comma-separated subset of " + ",".join(VERIFY_SET))
    g = sub.add_parser("geodesic", parents=[common], help="integrate one geodesic and export it")
    g.add_argument("--p0", type=_floats, default=None)
    g.add_argument("--v0", type=_floats, default=None)
    g.add_argument("--tmax", type=float, default=2.0)
    t = sub.add_parser("tidal", parents=[common], help="tidal curvature along the radial geodesic")
    t.add_argument("--t-samples", type=_floats, default=None)
    lie = sub.add_parser("lie", parents=[common], help="bracket tables and the infinitesimal model")
    lie.add_argument("--no-model", action="store_true", help="skip building the model from a chart")
    q = sub.add_parser("quat-kernel", parents=[common], help="quaternionic rigidity kernel")
    q.add_argument("--quat-n", type=int, default=1, choices=(1, 2))
    q.add_argument("--signature", choices=("pseudo", "para"), default="pseudo")
    pc = sub.add_parser("probe-completeness", parents=[common], help="seeded geodesic survival probe")
    pc.add_argument("--seeds", type=int, default=100)
    pc.add_argument("--tmax", type=float, default=None)
    pc.add_argument("--aim", choices=("random", "singular"), default=None)
    pc.add_argument("--zero-velocity", action="store_true")
    sub.add_parser("run", parents=[common], help="run every experiment listed in --config")
    return parser


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    return doc


def _model_doc(doc: dict, args) -> dict:
    model = dict(doc.get("model", doc if "experiments" not in doc else {}))
    for key, val in (("epsilon", args.epsilon), ("lambda", args.lam), ("n", args.n), ("R0", args.R0), ("variant", args.variant)):
        if val is not None:
            model[key] = val
    return model


def _subcommand_experiments(args) -> list[dict]:
    cmd = args.command
    if cmd == "model":
        return [{"name": "model"}]
    if cmd == "verify":
        names = VERIFY_SET if args.only is None else [s.strip() for s in args.only.split(",") if s.strip()]
        return [{"name": n} for n in names]
    if cmd == "geodesic":
        params = {"tmax": args.tmax}
        if (args.p0 is None) != (args.v0 is None):
            raise ValidationError("--p0 and --v0 go together")
        if args.p0 is not None:
            params.update(p0=args.p0, v0=args.v0)
        return [{"name": "geodesic", "params": params}]
    if cmd == "tidal":
        return [{"name": "tidal", "params": {} if args.t_samples is None else {"t_samples": args.t_samples}}]
    if cmd == "lie":
        return [{"name": "lie_verify", "params": {"build_model": not args.no_model}}]
    if cmd == "quat-kernel":
        return [{"name": "quat_kernel", "params": {"n": args.quat_n, "signature": args.signature}}]
    if cmd == "probe-completeness":
        params = {"seeds": args.seeds, "zero_velocity": args.zero_velocity}
        if args.tmax is not None:
            params["tmax"] = args.tmax
        if args.aim is not None:
            params["aim"] = args.aim
        return [{"name": "probe_completeness", "params": params}]
    raise ValidationError(f"unknown command {cmd}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return EXIT_PARSE if exc.code not in (0, None) else EXIT_OK
    try:
        doc = _load_config(args.config)
        if args.command == "run":
            if args.config is None:
                raise ValidationError("run needs --config")
            run_doc = dict(doc)
        else:
            run_doc = {"experiments": _subcommand_experiments(args), "seed": doc.get("seed", 0)}
        run_doc["model"] = _model_doc(doc, args)
        cfg = RunConfig.from_dict(run_doc)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.output_dir = args.out
        cfg.tol_scale = args.tol
        cfg.fd = args.fd
        cfg.validate()
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ValidationError, EKahlerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    code, _ = execute(cfg)
    return code


if __name__ == "__main__":
    sys.exit(main())
