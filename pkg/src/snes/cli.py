"""Command line: ``bench-hash``, ``serve`` and ``run``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .endpoint import Service, ServiceConfig, error_status, make_server
from .hashing import HashAlgorithm, birthday_expectation, collision_report, format_reports, synthetic_corpus
from .netsim import Topology, load_stores
from .oracle import BindingSet, equivalent, eval_reference
from .planner import DataModelGraph, load_endpoints
from .sparql import parse


def _add_network_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", required=True, type=Path, help="lines 'device_id parent_id latency_ms'")
    p.add_argument("--data", required=True, type=Path, help="directory of <device_id>.nt files")
    p.add_argument("--model", required=True, type=Path, help="data-model graph file")
    p.add_argument("--endpoints", type=Path, help="lines 'namespace_prefix endpoint_url'")
    p.add_argument("--mtu", type=int, default=96)
    p.add_argument("--seed", type=int, default=0)


def build_service(args: argparse.Namespace) -> Service:
    topology = Topology.load(args.topology)
    stores = load_stores(args.data, topology)
    model = DataModelGraph.load(args.model)
    endpoints = load_endpoints(args.endpoints) if args.endpoints else {}
    return Service(topology, stores, model, endpoints, ServiceConfig(mtu=args.mtu, seed=args.seed))


def format_table(result: BindingSet) -> str:
    lines = ["\t".join(f"?{v}" for v in result.variables)]
    for row in result.rows:
        lines.append("\t".join("" if t is None else t.token() for t in row))
    return "\n".join(lines)


def cmd_bench_hash(args: argparse.Namespace) -> int:
    if args.corpus:
        lines = Path(args.corpus).read_text(encoding="utf-8").splitlines()
        corpus = list(dict.fromkeys(line for line in lines if line))
    else:
        corpus = synthetic_corpus(args.size, args.seed)
    algs = list(HashAlgorithm) if args.alg == "all" else [HashAlgorithm.parse(a) for a in args.alg.split(",")]
    reports = [collision_report(a, corpus) for a in algs]
    if args.json:
        print(json.dumps([r.as_row() for r in reports], indent=2))
    else:
        print(format_reports(reports))
        print(f"birthday expectation for n={len(corpus)}: {birthday_expectation(len(corpus)):.3f}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    service = build_service(args)
    server = make_server(service, args.host, args.port)
    host, port = server.server_address[:2]
    print(f"SPARQL endpoint on http://{host}:{port}/sparql", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        service.close()
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    service = build_service(args)
    status = 0
    try:
        for path in args.query:
            text = Path(path).read_text(encoding="utf-8")
            if len(args.query) > 1:
                print(f"# {path}")
            try:
                out = service.handle_query(text)
            except Exception as exc:
                print(f"error {error_status(exc)} {type(exc).__name__}: {exc}", file=sys.stderr)
                status = 1
                continue
            if args.format == "json":
                print(json.dumps(out.json(), indent=2))
            else:
                print(format_table(out.result))
            st = out.stats
            print(
                f"# messages={st.messages} bytes={st.bytes_total} bytes_to_base={st.bytes_to_base} "
                f"string_requests={st.string_requests} first_result_ms={st.first_result_ms}",
                file=sys.stderr,
            )
            if args.trace:
                for rec in st.trace:
                    print(rec.line())
            if args.oracle:
                expected = eval_reference(service.device_triples() + service.web_triples(), parse(text))
                ok = equivalent(expected, out.result) or equivalent(expected, out.result, rel_tol=1e-6)
                print(f"# oracle: {'match' if ok else 'MISMATCH'}")
                if not ok:
                    print(format_table(expected))
                    status = 1
    finally:
        service.close()
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="snes", description="SPARQL over a simulated embedded device network")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench-hash", help="collision statistics of the 32-bit hash functions")
    p.add_argument("--corpus", type=Path, help="one distinct string per line (default: synthetic corpus)")
    p.add_argument("--alg", default="all", help="algorithm name, comma list, or 'all'")
    p.add_argument("--size", type=int, default=100_000, help="synthetic corpus size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench_hash)

    p = sub.add_parser("serve", help="serve SPARQL over HTTP")
    _add_network_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("run", help="answer query files once and exit")
    _add_network_args(p)
    p.add_argument("--query", required=True, nargs="+", type=Path)
    p.add_argument("--trace", action="store_true", help="print 'time_ms src dst msg_type size_bytes' lines")
    p.add_argument("--oracle", action="store_true", help="compare with the centralized reference evaluator")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_run)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
