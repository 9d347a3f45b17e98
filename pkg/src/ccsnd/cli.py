"""Command-line front end: run a sweep from a TOML config and write results.

Outputs in ``--out``: ``results.csv``, ``manifest.json``, ``config.toml``
(the fully resolved config) and ``pe_vs_snr.png``. Files are written to
temporaries and renamed, so a failed run leaves no partial CSV behind.

Exit codes: 0 success, 1 configuration error, 2 runtime or I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

from . import __version__
from .config import dumps_toml, load_config
from .errors import ConfigError
from .simulator import run_experiment

CSV_HEADER = "snr_db,trials,pe,pe_ci95,missed_rate,false_alarm_rate,mean_decode_ms"

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def format_csv(stats, timing: bool = True) -> str:
    lines = [CSV_HEADER]
    for s in stats:
        ms = s.mean_decode_ms if timing else float("nan")
        row = (s.snr_db, s.trials, s.pe, s.pe_ci95, s.missed_rate, s.false_alarm_rate, ms)
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def build_manifest(cfg, stats, duration_s: float) -> dict:
    return {
        "tool": "ccsnd",
        "version": __version__,
        "seed": cfg.seed,
        "duration_s": duration_s,
        "config": cfg.to_document(),
        "points": [
            {
                "snr_db": s.snr_db,
                "trials": s.trials,
                "pe_low": s.pe_low,
                "pe_high": s.pe_high,
                "missed_ci95": s.missed_ci95,
                "nonconverged_slots": s.nonconverged_slots,
            }
            for s in stats
        ],
    }


def _atomic_write(path: Path, data, binary: bool = False) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb" if binary else "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _render_plot(stats, path: Path, title: str) -> None:
    from .plotting import plot_error_curves

    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.stem}.", suffix=path.suffix)
    os.close(fd)
    try:
        plot_error_curves(stats, tmp, title=title)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ccsnd", description="Run a neighbor-discovery Monte Carlo sweep.")
    p.add_argument("--config", required=True, help="TOML experiment config")
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: config sweep.workers)")
    p.add_argument("--seed", type=int, default=None, help="override sweep.seed")
    p.add_argument("--snr", type=float, nargs="+", default=None, metavar="DB", help="override the SNR grid (dB)")
    p.add_argument("--trials", type=int, default=None, help="override sweep.trials")
    p.add_argument("--no-timing", action="store_true",
                   help="write nan for mean_decode_ms so reruns are byte-identical")
    p.add_argument("--no-plot", action="store_true", help="skip the figure")
    p.add_argument("--quiet", action="store_true", help="no progress on stderr")
    return p


def run(args) -> int:
    try:
        cfg = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.snr is not None:
            overrides["snr_db"] = tuple(args.snr)
        if args.trials is not None:
            overrides["trials"] = args.trials
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads", "must be positive")
            overrides["workers"] = args.threads
        if overrides:
            cfg = cfg.replace(**overrides)
    except ConfigError as exc:
        print(f"ccsnd: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"ccsnd: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    def progress(done, total):
        print(f"\r{done}/{total} trials", end="" if done < total else "\n", file=sys.stderr, flush=True)

    try:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        stats = run_experiment(cfg, progress=None if args.quiet else progress)
        duration = time.perf_counter() - t0
        _atomic_write(out / "config.toml", dumps_toml(cfg.to_document()))
        _atomic_write(out / "manifest.json", json.dumps(build_manifest(cfg, stats, duration), indent=2) + "\n")
        if not args.no_plot:
            _render_plot(stats, out / "pe_vs_snr.png", f"K={cfg.K}, N={cfg.N}, T={cfg.T}, model {cfg.model}")
        _atomic_write(out / "results.csv", format_csv(stats, timing=not args.no_timing))
    except ConfigError as exc:
        print(f"ccsnd: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"ccsnd: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not args.quiet:
        sys.stdout.write(format_csv(stats, timing=not args.no_timing))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
