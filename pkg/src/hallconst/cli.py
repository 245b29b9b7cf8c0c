"""Command-line client.

Every command builds a request model and either runs the matching handler
in-process or, with ``--server URL``, posts it to a running service.
Results are one JSON record per line; density grids can also be CSV.

Exit codes: 0 success, 2 usage, 3 non-convergence, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from pathlib import Path

from pydantic import ValidationError

from . import __version__
from .kernels import DivergenceError, SingularPointError
from .pipeline import ResultCache
from .quad import IntegrandError
from .service import handlers
from .service.schemas import (SCHEMA_VERSION, BernoulliRequest, DensityRequest, EntropyRequest,
                              HallRequest, RecognizeRequest, SpectrumRequest)

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_NUMERIC = 0, 2, 3, 4

COMMANDS = {
    "hall": (HallRequest, handlers.hall, True),
    "entropy": (EntropyRequest, handlers.entropy, True),
    "spectrum": (SpectrumRequest, handlers.spectrum, False),
    "density": (DensityRequest, handlers.density, False),
    "recognize": (RecognizeRequest, handlers.recognize, False),
    "bernoulli": (BernoulliRequest, handlers.bernoulli_table, False),
}


class NumericFailure(Exception):
    pass


class UsageFailure(Exception):
    pass


def _pi_range(text: str):
    try:
        lo, hi = text.split("..")
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError("expected A..B, e.g. 0..6")


def _default_workers() -> int:
    env = os.environ.get("HALLCONST_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hallconst", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--server", help="forward the request to a running service at this URL")
    common.add_argument("--config", help="JSON file whose keys provide defaults for any flag")
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--cache", help="JSON-lines result cache (env HALLCONST_CACHE)")
    sub = p.add_subparsers(dest="command", required=True)

    h = sub.add_parser("hall", parents=[common], help="normalization constant C_n")
    h.add_argument("n", type=int)
    h.add_argument("--method", choices=["adaptive", "qmc"], default="adaptive")
    h.add_argument("--mean", choices=["arithmetic", "identric"], default="arithmetic")
    h.add_argument("--beta", type=int, default=2)
    h.add_argument("--region", choices=["ordered", "full"])
    h.add_argument("--rel-tol", type=float)
    h.add_argument("--max-evals", type=int)
    h.add_argument("--recognize", action="store_true")
    h.add_argument("--max-residual", type=float)
    h.add_argument("--workers", type=int)

    e = sub.add_parser("entropy", parents=[common], help="average von Neumann entropy")
    e.add_argument("n", type=int)
    e.add_argument("--method", choices=["adaptive", "qmc"], default="adaptive")
    e.add_argument("--beta", type=int, default=2)
    e.add_argument("--rel-tol", type=float)
    e.add_argument("--max-evals", type=int)
    e.add_argument("--no-fit", dest="fit", action="store_false")
    e.add_argument("--workers", type=int)

    s = sub.add_parser("spectrum", parents=[common], help="expected ordered eigenvalues")
    s.add_argument("n", type=int)
    s.add_argument("--rel-tol", type=float)

    d = sub.add_parser("density", parents=[common], help="closed-form density on a grid")
    d.add_argument("case", choices=["bures2", "quasi2", "bures3", "quasi3"])
    d.add_argument("--marginal", choices=["theta", "phi", "theta-phi"], default="theta")
    d.add_argument("--grid", type=int, default=256)
    d.add_argument("--format", choices=["csv", "json"], default="csv")

    r = sub.add_parser("recognize", parents=[common], help="recognize x as N / pi^k")
    r.add_argument("--value", type=float, required=True)
    r.add_argument("--pi-powers", type=_pi_range, default=(0, 6))
    r.add_argument("--max-residual", type=float, default=1e-6)
    r.add_argument("--sequence-match", action="store_true")

    b = sub.add_parser("bernoulli", parents=[common], help="exact Bernoulli numbers")
    b.add_argument("--terms", type=int, default=10)
    b.add_argument("--partial-sum-denominators", action="store_true")

    rp = sub.add_parser("replay", help="re-run a manifest and compare result digests")
    rp.add_argument("manifest")
    rp.add_argument("--server")

    sv = sub.add_parser("serve", help="run the HTTP service")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    return p


def _request_fields(command: str, args: argparse.Namespace) -> dict:
    v = vars(args)
    if command == "recognize":
        lo, hi = v["pi_powers"]
        return {"value": v["value"], "pi_min": lo, "pi_max": hi,
                "max_residual": v["max_residual"], "sequence_match": v["sequence_match"]}
    model = COMMANDS[command][0]
    fields = {k: v[k] for k in model.model_fields if k in v and v[k] is not None}
    if "workers" in model.model_fields and "workers" not in fields:
        fields["workers"] = _default_workers()
    return fields


def _apply_config(parser, args, argv):
    """Values from --config fill in flags that were not given explicitly."""
    if not getattr(args, "config", None):
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageFailure(f"cannot read config: {exc}")
    given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    for key, value in cfg.items():
        key = key.replace("-", "_")
        if key not in given and hasattr(args, key):
            setattr(args, key, tuple(value) if key == "pi_powers" else value)
    return args


def _run_local(command: str, fields: dict, cache_path: str | None) -> dict:
    model, handler, cached = COMMANDS[command]
    try:
        req = model(**fields)
    except ValidationError as exc:
        raise UsageFailure(str(exc))
    try:
        if cached:
            env = handler(req, ResultCache(cache_path) if cache_path else None)
        else:
            env = handler(req)
    except (DivergenceError, SingularPointError, IntegrandError) as exc:
        raise NumericFailure(f"{type(exc).__name__}: {exc}")
    except ValueError as exc:
        raise UsageFailure(str(exc))
    return env.model_dump(mode="json")


def _run_remote(server: str, command: str, fields: dict) -> dict:
    import httpx

    try:
        resp = httpx.post(server.rstrip("/") + "/" + command, json=fields, timeout=None)
    except httpx.HTTPError as exc:
        raise NumericFailure(f"server unreachable: {exc}")
    body = resp.json()
    if resp.status_code == 422:
        if body.get("error") in ("DivergenceError", "SingularPointError", "IntegrandError"):
            raise NumericFailure(f"{body['error']}: {body['detail']}")
        raise UsageFailure(json.dumps(body.get("detail", body)))
    resp.raise_for_status()
    return body


def result_digest(envelope: dict) -> str:
    """Digest of the result payload with run-dependent fields removed."""
    blob = json.dumps(envelope.get("result"), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _manifest(command, fields, envelope, wall):
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "parameters": fields,
        "code_version": __version__,
        "wall_time_s": wall,
        "result_digest": result_digest(envelope),
    }


def _grid_csv(result: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    buf.write(f"# schema_version={SCHEMA_VERSION} case={result['case']} marginal={result['marginal']}\n")
    w.writerow(result["columns"])
    for row in result["rows"]:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _status_code(envelope: dict) -> int:
    return EXIT_NOT_CONVERGED if envelope["status"] == "not_converged" else EXIT_OK


def _execute(command, fields, server, cache):
    t0 = time.perf_counter()
    if server:
        env = _run_remote(server, command, fields)
    else:
        env = _run_local(command, fields, cache)
    return env, time.perf_counter() - t0


def _replay(args) -> int:
    man = json.loads(Path(args.manifest).read_text())
    env, _ = _execute(man["command"], man["parameters"], args.server, None)
    same = result_digest(env) == man["result_digest"]
    sys.stdout.write(json.dumps({"schema_version": SCHEMA_VERSION, "command": "replay",
                                 "manifest": args.manifest, "reproduced": same,
                                 "result_digest": result_digest(env)}) + "\n")
    return EXIT_OK if same else EXIT_NUMERIC


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad flags
    try:
        if args.command == "serve":
            import uvicorn
            uvicorn.run("hallconst.service.app:app", host=args.host, port=args.port)
            return EXIT_OK
        if args.command == "replay":
            return _replay(args)
        args = _apply_config(parser, args, argv)
        fields = _request_fields(args.command, args)
        cache = args.cache or os.environ.get("HALLCONST_CACHE")
        env, wall = _execute(args.command, fields, args.server, cache)
    except UsageFailure as exc:
        print(f"hallconst: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"hallconst: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    manifest = _manifest(args.command, fields, env, wall)
    if args.command == "density" and args.format == "csv":
        text = _grid_csv(env["result"])
        if not args.out:
            text = f"# manifest={json.dumps(manifest)}\n" + text
        _emit(text, args.out)
    else:
        _emit(json.dumps({**env, "manifest": manifest}) + "\n", args.out)
    if args.out:
        Path(args.out + ".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return _status_code(env)


if __name__ == "__main__":
    sys.exit(main())
