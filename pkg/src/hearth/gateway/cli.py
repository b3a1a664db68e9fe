"""Command line entry point: `hearth [--port ...] [--scenario ...]`."""

from __future__ import annotations

import argparse
import logging
import os
import socket
import sys
from pathlib import Path

from ..clock import MODES, SIMULATED
from ..errors import HearthError
from .server import Gateway, GatewayConfig, build_app


def _env(name: str, default):
    return os.environ.get(f"HEARTH_{name.upper().replace('-', '_')}", default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hearth",
        description="Automation gateway for a simulated smart home.",
    )
    parser.add_argument("--port", type=int, default=int(_env("port", 8740)))
    parser.add_argument("--host", default=_env("host", "127.0.0.1"))
    parser.add_argument("--state-dir", type=Path, default=Path(_env("state_dir", "./state")))
    parser.add_argument("--catalog", type=Path, default=_env("catalog", None))
    parser.add_argument("--scenario", type=Path, default=_env("scenario", None))
    parser.add_argument("--clock-mode", choices=MODES, default=_env("clock_mode", SIMULATED))
    parser.add_argument("--clock-factor", type=float, default=float(_env("clock_factor", 10.0)))
    parser.add_argument("--log-level", default=_env("log_level", "info"))
    parser.add_argument("--ui-dir", type=Path, default=_env("ui_dir", None))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper())

    state_dir = Path(args.state_dir)
    try:
        state_dir.mkdir(parents=True, exist_ok=True)
        probe = state_dir / ".writable"
        probe.touch()
        probe.unlink()
    except OSError as exc:
        print(f"hearth: state directory {state_dir} is not usable: {exc}", file=sys.stderr)
        return 2

    config = GatewayConfig(
        port=args.port,
        state_dir=state_dir,
        catalog_path=args.catalog,
        scenario_path=args.scenario,
        clock_mode=args.clock_mode,
        clock_factor=args.clock_factor,
        log_level=args.log_level,
        ui_dir=args.ui_dir,
    )

    # refuse to start on bad inputs, with a line-numbered diagnostic where we
    # have one
    try:
        gateway = Gateway(config)
    except HearthError as exc:
        line = getattr(exc, "line", None)
        where = f" (line {line})" if line else ""
        print(f"hearth: {exc.code}{where}: {exc}", file=sys.stderr)
        return 2

    # fail fast on a busy port instead of letting uvicorn retry
    try:
        probe_sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe_sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe_sock.bind((args.host, args.port))
        probe_sock.close()
    except OSError as exc:
        print(f"hearth: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        gateway.close()
        return 2

    import uvicorn

    app = build_app(gateway)
    uvicorn.run(app, host=args.host, port=args.port, log_level=args.log_level)
    gateway.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
