"""``biqrank`` command-line front end.

Every command prints one JSON report (or CSV rows with ``--csv``) and maps
its outcome to an exit code:

    0   success / SOS
    1   selftest had failing criteria
    2   z self-check failed (computed value differs from the published one)
    3   NOT_SOS
    4   INCONCLUSIVE
    64  usage error or size limit
    66  unreadable or invalid input file
    74  output file could not be written
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import BiqrankError, SizeLimit
from .forms import BiquadraticForm, choi_form, form_from_json, simple_form_from_graph
from .graphs import (
    DEFAULT_SIZE_LIMIT,
    BipartiteGraph,
    graph_from_json,
    is_c4_free,
    known_z,
    reiman_bound,
    zarankiewicz,
)
from .gram import decomposition_from_psd_gram, verify_decomposition
from .sosrank import (
    DEFAULT_TOLERANCES,
    Status,
    Tolerances,
    certify_sos,
    simple_rank_exact,
    sos_rank_search,
)

log = logging.getLogger("biqrank")

EXIT_OK = 0
EXIT_SELFTEST_FAILED = 1
EXIT_SELF_CHECK = 2
EXIT_NOT_SOS = 3
EXIT_INCONCLUSIVE = 4
EXIT_USAGE = 64
EXIT_NO_INPUT = 66
EXIT_IO = 74

_STATUS_EXIT = {Status.SOS: EXIT_OK, Status.NOT_SOS: EXIT_NOT_SOS, Status.INCONCLUSIVE: EXIT_INCONCLUSIVE}


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class Cache:
    """Payloads stored as JSON files named by a hash of the request."""

    def __init__(self, directory: Path | None):
        self.directory = directory

    def key(self, command: str, inputs: dict) -> str:
        blob = json.dumps({"command": command, "inputs": inputs, "version": __version__}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def get(self, key: str) -> str | None:
        if self.directory is None:
            return None
        path = self.directory / f"{key}.json"
        try:
            return path.read_text()
        except OSError:
            return None

    def put(self, key: str, text: str) -> None:
        if self.directory is None:
            return
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            tmp = self.directory / f"{key}.json.tmp"
            tmp.write_text(text)
            tmp.replace(self.directory / f"{key}.json")
        except OSError as exc:
            log.warning("cache write failed: %s", exc)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _tolerances(args) -> Tolerances:
    tol = replace(DEFAULT_TOLERANCES, seed=args.seed)
    if args.tol is not None:
        tol = replace(tol, cert_tol=args.tol)
    return tol


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _load_source(args) -> tuple[BiquadraticForm, BipartiteGraph | None, dict]:
    """Resolve --form / --graph / --choi into a form (plus the graph, if any)."""
    chosen = [s for s in ("form", "graph", "choi") if getattr(args, s) is not None]
    if len(chosen) != 1:
        raise UsageError("give exactly one of --form, --graph, --choi")
    try:
        if args.form is not None:
            form = form_from_json(_read_json(args.form))
            return form, None, {"form": form.to_json()}
        if args.graph is not None:
            graph = graph_from_json(_read_json(args.graph))
            return simple_form_from_graph(graph), graph, {"graph": graph.to_json()}
    except (ValueError, BiqrankError) as exc:
        raise InputError(str(exc)) from exc
    return choi_form(args.choi), None, {"choi": args.choi}


def _certificate_payload(form: BiquadraticForm, cert, tol: Tolerances) -> dict:
    payload = cert.to_json()
    payload.update({"rank_upper": None, "rank_lower": None, "decomposition": None, "tolerances": tol.to_json()})
    if cert.status is Status.SOS:
        psd_tol = max(tol.psd_tol, tol.cert_tol * max(1.0, abs(cert.lambda_star)))
        dec = decomposition_from_psd_gram(cert.witness, form.m, form.n, psd_tol)
        payload["rank_upper"] = len(dec)
        payload["decomposition"] = dec.to_json(verify_decomposition(form, dec))
    return payload


def cmd_z(args, cache: Cache) -> tuple[dict, dict, int]:
    m, n = args.m, args.n
    inputs = {"m": m, "n": n, "limit": args.limit, "symmetry_breaking": args.symmetry_breaking}
    key = cache.key("z", inputs)
    text = cache.get(key)
    if text is None:
        try:
            res = zarankiewicz(m, n, limit=args.limit, jobs=args.jobs, symmetry_breaking=args.symmetry_breaking)
        except SizeLimit as exc:
            raise UsageError(str(exc)) from exc
        payload = {
            "z": res.z,
            "witness": res.witness.to_json(),
            "reiman_bound": reiman_bound(m, n),
            "known": known_z(m, n),
            "nodes": res.nodes_explored,
        }
        text = _dumps(payload)
        cache.put(key, text)
    payload = json.loads(text)
    code = EXIT_OK
    if payload["known"] is not None and payload["known"] != payload["z"]:
        log.warning("z(%d,%d) = %d differs from the published value %d", m, n, payload["z"], payload["known"])
        code = EXIT_SELF_CHECK
    return inputs, payload, code


def cmd_certify(args, cache: Cache) -> tuple[dict, dict, int]:
    form, _, inputs = _load_source(args)
    tol = _tolerances(args)
    inputs = {**inputs, "seed": args.seed, "tolerances": tol.to_json()}
    key = cache.key("certify", inputs)
    text = cache.get(key)
    if text is None:
        cert = certify_sos(form, tol)
        payload = _certificate_payload(form, cert, tol)
        if form.is_simple():
            graph = BipartiteGraph(form.m, form.n, frozenset(form.support_edges()))
            if is_c4_free(graph):
                payload["rank_lower"] = len(graph.edges)
        text = _dumps(payload)
        cache.put(key, text)
    payload = json.loads(text)
    return inputs, payload, _STATUS_EXIT[Status(payload["status"])]


def cmd_sosrank(args, cache: Cache) -> tuple[dict, dict, int]:
    form, graph, inputs = _load_source(args)
    tol = _tolerances(args)
    inputs = {**inputs, "seed": args.seed, "tolerances": tol.to_json(), "r_min": args.r_min, "r_max": args.r_max}
    key = cache.key("sosrank", inputs)
    text = cache.get(key)
    if text is None:
        cert = certify_sos(form, tol)
        payload = cert.to_json()
        payload.update({"rank_upper": None, "rank_lower": None, "decomposition": None, "tolerances": tol.to_json()})
        if graph is not None:
            payload["exact"] = False
        if cert.status is not Status.SOS:
            payload["explanation"] = "rank search needs a form certified SOS"
        else:
            res = sos_rank_search(form, args.r_min, args.r_max, tol, certificate=cert)
            payload["rank_upper"] = res.r_upper
            payload["rank_lower"] = res.r_lower
            payload["decomposition"] = res.decomposition.to_json(res.residual)
            payload["failed_ranks"] = res.failed_ranks()
            payload["restarts_used"] = res.restarts_used
            if graph is not None and is_c4_free(graph):
                exact = simple_rank_exact(graph)
                payload["rank_lower"] = exact
                payload["exact"] = exact == res.r_upper
        text = _dumps(payload)
        cache.put(key, text)
    payload = json.loads(text)
    return inputs, payload, _STATUS_EXIT[Status(payload["status"])]


def cmd_graph_form(args, cache: Cache) -> tuple[dict, dict, int]:
    try:
        graph = graph_from_json(_read_json(args.graph_file))
    except (ValueError, BiqrankError) as exc:
        raise InputError(str(exc)) from exc
    form = simple_form_from_graph(graph)
    try:
        with open(args.out_file, "w") as fh:
            json.dump(form.to_json(), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {args.out_file}: {exc}") from exc
    inputs = {"graph": graph.to_json(), "out": args.out_file}
    payload = {"m": graph.m, "n": graph.n, "edges": len(graph.edges), "entries": len(form.coeffs), "out": args.out_file}
    return inputs, payload, EXIT_OK


def cmd_selftest(args, cache: Cache) -> tuple[dict, dict, int]:
    from .acceptance import run_all

    results = run_all(extended=args.extended, tol=args.tol, seed=args.seed, limit=args.limit)
    payload = {
        "criteria": [r.to_json() for r in results],
        "all_passed": all(r.passed for r in results),
    }
    inputs = {"extended": args.extended, "tol": args.tol, "seed": args.seed, "limit": args.limit}
    return inputs, payload, EXIT_OK if payload["all_passed"] else EXIT_SELFTEST_FAILED


_CSV_COLUMNS = {
    "z": ["z", "known", "reiman_bound", "nodes"],
    "certify": ["status", "lambda_star", "rank_upper", "rank_lower"],
    "sosrank": ["status", "lambda_star", "rank_upper", "rank_lower", "exact"],
    "graph-form": ["m", "n", "edges", "entries", "out"],
}


def _write_csv(command: str, inputs: dict, payload: dict, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    if command == "selftest":
        w.writerow(["criterion", "name", "passed", "elapsed_s", "detail"])
        for c in payload["criteria"]:
            w.writerow([c["id"], c["name"], c["passed"], f"{c['elapsed_s']:.3f}", c["detail"]])
        return
    cols = _CSV_COLUMNS[command]
    lead = ["m", "n"] if command == "z" else []
    w.writerow(lead + cols)
    w.writerow([inputs[k] for k in lead] + [payload.get(k) for k in cols])


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for randomized steps (default 42)")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="parallel workers for z search")
    p.add_argument("--tol", type=float, default=argparse.SUPPRESS, help="override certification tolerance")
    p.add_argument("--limit", type=int, default=argparse.SUPPRESS, help="largest part size for z search")
    p.add_argument("--cache-dir", default=argparse.SUPPRESS, help="result cache directory")
    p.add_argument("--no-cache", action="store_true", default=argparse.SUPPRESS)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json", default=argparse.SUPPRESS)
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv", default=argparse.SUPPRESS)
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--form", metavar="FILE", help="form JSON file")
    p.add_argument("--graph", metavar="FILE", help="graph JSON file; uses the simple form P_G")
    p.add_argument("--choi", choices=["classical", "printed"], help="built-in Choi form")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="biqrank", description="SOS rank of biquadratic forms and Zarankiewicz numbers")
    parser.add_argument("--version", action="version", version=f"biqrank {__version__}")
    _add_common(parser)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("z", help="exact Zarankiewicz number z(m, n)")
    p.add_argument("m", type=int)
    p.add_argument("n", type=int)
    p.add_argument("--symmetry-breaking", action="store_true", help="prune with non-increasing row degrees")
    _add_common(p)

    p = sub.add_parser("certify", help="decide whether a form is a sum of squares")
    _add_source(p)
    _add_common(p)

    p = sub.add_parser("sosrank", help="bound the SOS rank of a form")
    _add_source(p)
    p.add_argument("--r-min", type=int, default=None)
    p.add_argument("--r-max", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("graph-form", help="write the simple form P_G of a graph")
    p.add_argument("graph_file")
    p.add_argument("out_file")
    _add_common(p)

    p = sub.add_parser("selftest", help="run the acceptance criteria")
    p.add_argument("--extended", action="store_true", help="include the slow z(6,4) criterion")
    _add_common(p)
    return parser


_DEFAULTS = {
    "seed": 42,
    "jobs": 1,
    "tol": None,
    "limit": DEFAULT_SIZE_LIMIT,
    "cache_dir": None,
    "no_cache": False,
    "fmt": "json",
    "verbose": False,
}

_COMMANDS = {
    "z": cmd_z,
    "certify": cmd_certify,
    "sosrank": cmd_sosrank,
    "graph-form": cmd_graph_form,
    "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for k, v in _DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    cache_dir = args.cache_dir or os.environ.get("BIQRANK_CACHE_DIR") or ".biqrank-cache"
    cache = Cache(None if args.no_cache else Path(cache_dir))
    start = time.perf_counter()
    try:
        inputs, payload, code = _COMMANDS[args.command](args, cache)
    except UsageError as exc:
        print(f"biqrank: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"biqrank: {exc}", file=sys.stderr)
        return EXIT_NO_INPUT
    except OSError as exc:
        print(f"biqrank: {exc}", file=sys.stderr)
        return EXIT_IO

    report = {
        "command": args.command,
        "inputs": inputs,
        "result": payload,
        "elapsed_ms": int(round(1000 * (time.perf_counter() - start))),
        "tool_version": __version__,
        "tolerances": _tolerances(args).to_json(),
    }
    if args.fmt == "csv":
        _write_csv(args.command, inputs, payload, sys.stdout)
    else:
        print(json.dumps(report, indent=2, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
