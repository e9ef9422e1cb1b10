"""Command-line client for the analysis service.

Every subcommand marshals its arguments into a service request and sends
it through the FastAPI app: in-process over an ASGI transport by default,
or to a remote instance given --server. Exit codes: 0 analysis succeeded
(verdict true), 1 verdict false, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import asyncio
import os
import sys
from typing import Optional

import httpx

EXIT_OK = 0
EXIT_VERDICT_FALSE = 1
EXIT_USAGE = 2

_STATUS_EXIT = {
    "ok": EXIT_OK,
    "verdict_false": EXIT_VERDICT_FALSE,
    "parse_error": EXIT_USAGE,
    "usage_error": EXIT_USAGE,
}


def _color_enabled() -> bool:
    flag = os.environ.get("PNET_COLOR")
    if flag == "1":
        return True
    if flag == "0":
        return False
    return sys.stderr.isatty()


def _print_diagnostics(diagnostics: list[dict]):
    color = _color_enabled()
    for d in diagnostics:
        text = f"{d['line']}:{d['column']}: {d['severity']}: {d['message']}"
        if d.get("hint"):
            text += f" ({d['hint']})"
        if color:
            tint = "\033[31m" if d["severity"] == "error" else "\033[33m"
            text = f"{tint}{text}\033[0m"
        print(text, file=sys.stderr)


class ServiceClient:
    def __init__(self, server: Optional[str] = None):
        self.server = server.rstrip("/") if server else None

    def request(self, method: str, path: str, payload: Optional[dict] = None,
                params: Optional[dict] = None) -> dict:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=60.0) as client:
                response = client.request(method, path, json=payload, params=params)
        else:
            response = asyncio.run(self._in_process(method, path, payload, params))
        response.raise_for_status()
        return response.json()

    async def _in_process(self, method, path, payload, params):
        from .service.app import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, base_url="http://pnet") as client:
            return await client.request(method, path, json=payload, params=params)


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _finish(result: dict, body_lines: Optional[list[str]] = None) -> int:
    _print_diagnostics(result.get("diagnostics", []))
    if result.get("message"):
        print(result["message"], file=sys.stderr)
    for line in body_lines or []:
        print(line)
    return _STATUS_EXIT.get(result.get("status", "usage_error"), EXIT_USAGE)


def _report_lines(result: dict) -> list[str]:
    lines = []
    if result.get("verdict") is not None:
        lines.append("PASS" if result["verdict"] else "FAIL")
    lines += [f"witness: {w}" for w in result.get("witnesses", [])]
    lines += result.get("narrative", [])
    return lines


def cmd_check(client: ServiceClient, args) -> int:
    result = client.request("POST", "/check", {
        "model": _read(args.model), "src": args.src, "dst": args.dst})
    return _finish(result, _report_lines(result))


def cmd_simulate(client: ServiceClient, args) -> int:
    result = client.request("POST", "/simulate", {
        "model": _read(args.model), "source": args.source,
        "dst": args.dst, "ttl": args.ttl})
    lines = [result["text"]] if result.get("text") else []
    return _finish(result, lines)


def cmd_flood(client: ServiceClient, args) -> int:
    result = client.request("POST", "/flood", {
        "model": _read(args.model), "source": args.source})
    return _finish(result, result.get("agents", []))


def cmd_compile(client: ServiceClient, args) -> int:
    result = client.request("POST", "/compile", {"policy": _read(args.policy)})
    model = result.get("model")
    lines = []
    if model is not None:
        if args.output and args.output != "-":
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(model)
        else:
            lines = [model.rstrip("\n")]
    return _finish(result, lines)


def cmd_align(client: ServiceClient, args) -> int:
    result = client.request("POST", "/align", {
        "model": _read(args.model), "container": args.container,
        "desired": _read(args.desired)})
    return _finish(result, _report_lines(result))


def cmd_spof(client: ServiceClient, args) -> int:
    result = client.request("POST", "/spof", {
        "model": _read(args.model), "src": args.src, "dst": args.dst})
    return _finish(result, result.get("agents", []))


def cmd_scale(client: ServiceClient, args) -> int:
    result = client.request("GET", "/scale", params={
        "bits": args.bits, "prefix": args.prefix})
    lines = []
    if result.get("containers") is not None:
        lines = [f"containers={result['containers']} per_container={result['per_container']}"]
    return _finish(result, lines)


def cmd_dot(client: ServiceClient, args) -> int:
    result = client.request("POST", "/dot", {"model": _read(args.model)})
    lines = [result["dot"].rstrip("\n")] if result.get("dot") else []
    return _finish(result, lines)


def cmd_serve(_client: ServiceClient, args) -> int:
    import uvicorn

    uvicorn.run("pnet.service.app:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnet",
        description="Model, simulate and verify data networks as promise graphs.")
    parser.add_argument("--server", default=os.environ.get("PNET_SERVER"),
                        help="analysis service URL (default: run in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate a model; with --src/--dst, check cooperation")
    p.add_argument("model")
    p.add_argument("--src")
    p.add_argument("--dst")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="inject a message and print the delivery trace")
    p.add_argument("model")
    p.add_argument("--from", dest="source", required=True, metavar="AGENT")
    p.add_argument("--dst", required=True, metavar="ADDR",
                   help="address literal, e.g. mac:00:00:11:11:11:BB or ip:10.0.0.9/24")
    p.add_argument("--ttl", type=int, default=32)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("flood", help="broadcast from an agent and print who receives it")
    p.add_argument("model")
    p.add_argument("--from", dest="source", required=True, metavar="AGENT")
    p.set_defaults(func=cmd_flood)

    p = sub.add_parser("compile", help="compile a policy file into a low-level model")
    p.add_argument("policy")
    p.add_argument("-o", "--output", help="write the compiled model here (default stdout)")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("align", help="check a container's membrane against a desired set")
    p.add_argument("model")
    p.add_argument("--container", required=True)
    p.add_argument("--desired", required=True, metavar="FILE")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("spof", help="single points of failure between two agents")
    p.add_argument("model")
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    p.set_defaults(func=cmd_spof)

    p = sub.add_parser("scale", help="container/per-container counts for an n-bit address")
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--prefix", type=int, required=True)
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("dot", help="render a model as Graphviz DOT")
    p.add_argument("model")
    p.set_defaults(func=cmd_dot)

    p = sub.add_parser("serve", help="run the analysis service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    client = ServiceClient(args.server)
    try:
        return args.func(client, args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except httpx.HTTPError as exc:
        print(f"error: service request failed: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
